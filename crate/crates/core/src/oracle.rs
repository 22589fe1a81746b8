//! Brute-force reference implementations and synthetic elections.
//!
//! Nothing in here calls into [`crate::discrepancy`] or [`crate::risk`]; the
//! oracles recompute everything from the raw counts so they can be used to
//! check those modules.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::contest::{AuditRecord, ContestSetup, ContestTotals, PrecinctReturns};
use crate::risk::WeightFunction;
use crate::{AuditError, Rational, Result};

/// Precinct MRO by enumerating every winner/loser pair, comparing fractions
/// by cross-multiplication.
pub fn brute_mro(
    returns: &PrecinctReturns,
    audit: &AuditRecord,
    totals: &ContestTotals,
) -> Rational {
    let all = totals.totals();
    let mut best: Option<(i128, i128)> = None;
    for w in totals.winners() {
        for l in totals.losers() {
            let margin = all[w.0] as i128 - all[l.0] as i128;
            let v = returns.machine_votes[w.0] as i128 - returns.machine_votes[l.0] as i128;
            let a = audit.hand_votes[w.0] as i128 - audit.hand_votes[l.0] as i128;
            let candidate = (v - a, margin);
            best = match best {
                Some((n, d)) if n * candidate.1 >= candidate.0 * d => Some((n, d)),
                _ => Some(candidate),
            };
        }
    }
    let (n, d) = best.expect("a contest always has at least one pair");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

/// Minimal `|S|` over all subsets `S` of precincts such that
/// `sum_{p in S} u_p + (N - |S|) q >= M`, or `N + 1` if there is none.
pub fn brute_taint_count(bounds: &[Rational], threshold: &Rational, margin: &Rational) -> usize {
    brute_taint_count_weighted(bounds, threshold, margin, WeightFunction::Identity)
}

/// As [`brute_taint_count`]; under the taint weight an untainted precinct
/// contributes `q * u_p` instead of `q`.
pub fn brute_taint_count_weighted(
    bounds: &[Rational],
    threshold: &Rational,
    margin: &Rational,
    weight: WeightFunction,
) -> usize {
    let n = bounds.len();
    assert!(
        n <= 20,
        "exhaustive subset search is limited to 20 precincts"
    );
    // gain_p = u_p - cap_p; subset S works iff sum_S gain >= M - sum_p cap_p.
    let caps: Vec<Rational> = bounds
        .iter()
        .map(|u| match weight {
            WeightFunction::Identity => threshold.clone(),
            WeightFunction::Taint => threshold * u,
        })
        .collect();
    let gains: Vec<Rational> = bounds.iter().zip(&caps).map(|(u, c)| u - c).collect();
    let need_exact = caps.iter().fold(margin.clone(), |acc, c| acc - c);

    // Scale to a common denominator so subset sums are integer additions.
    let denom = gains
        .iter()
        .chain(core::iter::once(&need_exact))
        .fold(BigInt::from(1), |acc, r| acc.lcm(r.denom()));
    let scale = |r: &Rational| (r.numer() * (&denom / r.denom())).to_i128();
    let scaled: Option<Vec<i128>> = gains.iter().map(scale).collect();
    let (Some(scaled), Some(need)) = (scaled, scale(&need_exact)) else {
        return subsets_rational(&gains, &need_exact);
    };
    if scaled.iter().any(|g| g.unsigned_abs() > (1u128 << 100)) {
        return subsets_rational(&gains, &need_exact);
    }

    let mut sums = vec![0i128; 1 << n];
    let mut best = n + 1;
    for mask in 0usize..(1 << n) {
        if mask != 0 {
            let low = mask.trailing_zeros() as usize;
            sums[mask] = sums[mask & (mask - 1)] + scaled[low];
        }
        let size = mask.count_ones() as usize;
        if size < best && sums[mask] >= need {
            best = size;
        }
    }
    best
}

fn subsets_rational(gains: &[Rational], need: &Rational) -> usize {
    let n = gains.len();
    let mut best = n + 1;
    for mask in 0usize..(1 << n) {
        let size = mask.count_ones() as usize;
        if size >= best {
            continue;
        }
        let sum = (0..n)
            .filter(|i| mask >> i & 1 == 1)
            .fold(Rational::zero(), |acc, i| acc + &gains[i]);
        if sum >= *need {
            best = size;
        }
    }
    best
}

/// Shape of a synthetic election.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InstanceSpec {
    pub precincts: usize,
    pub candidates: usize,
    pub votes_per_voter: usize,
    /// Plant hand counts under which some apparent loser ties or beats some
    /// apparent winner.
    pub reversal: bool,
}

/// A synthetic election with a complete hand tally.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub setup: ContestSetup,
    pub returns: Vec<PrecinctReturns>,
    pub audits: Vec<AuditRecord>,
    /// `(winner, loser)` candidate indices whose actual margin was driven to
    /// zero or below, for reversal instances.
    pub reversed_pair: Option<(usize, usize)>,
}

/// Generates a reproducible synthetic election.
///
/// Ballots are simulated one by one, so machine counts always satisfy the
/// per-precinct bounds. Without `reversal` the hand tally equals the machine
/// counts. With it, hand counts are perturbed (some votes are dropped, some
/// moved from a chosen apparent winner to a chosen apparent loser) until the
/// loser's actual total is at least the winner's.
pub fn gen_instance(spec: InstanceSpec, seed: u64) -> Result<Instance> {
    let k = spec.candidates;
    let f = spec.votes_per_voter;
    if spec.precincts == 0 {
        return Err(AuditError::InfeasibleSpec(
            "at least one precinct is needed",
        ));
    }
    if !(2..=8).contains(&k) {
        return Err(AuditError::InfeasibleSpec(
            "between 2 and 8 candidates are supported",
        ));
    }
    if f == 0 || f >= k {
        return Err(AuditError::InfeasibleSpec(
            "votes per voter must be in 1..K",
        ));
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..k).map(|i| format!("C{i}")).collect();
    let setup = ContestSetup::new(names, f, spec.precincts)?;

    for _ in 0..1000 {
        let popularity: Vec<u32> = (0..k).map(|_| rng.random_range(1..=12)).collect();
        let returns: Vec<PrecinctReturns> = (0..spec.precincts)
            .map(|p| {
                let ballots = if rng.random_bool(0.05) {
                    0
                } else {
                    rng.random_range(1..=60)
                };
                let votes = cast_ballots(&mut rng, &popularity, f, ballots);
                PrecinctReturns::new(format!("P{p:03}"), "X", votes, ballots)
            })
            .collect();

        let mut totals = vec![0u64; k];
        for r in &returns {
            for (t, v) in totals.iter_mut().zip(&r.machine_votes) {
                *t += v;
            }
        }
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&a, &b| totals[b].cmp(&totals[a]));
        if totals[order[f - 1]] <= totals[order[f]] {
            continue;
        }

        let mut audits: Vec<AuditRecord> = returns
            .iter()
            .map(|r| AuditRecord::new(r.precinct_id.clone(), r.machine_votes.clone()))
            .collect();
        let reversed_pair = if spec.reversal {
            let w = order[rng.random_range(0..f)];
            let l = order[rng.random_range(f..k)];
            plant_reversal(&mut rng, &returns, &mut audits, w, l);
            Some((w, l))
        } else {
            None
        };
        return Ok(Instance {
            setup,
            returns,
            audits,
            reversed_pair,
        });
    }
    Err(AuditError::InfeasibleSpec(
        "could not draw an election with strictly positive margins",
    ))
}

fn cast_ballots(rng: &mut ChaCha20Rng, popularity: &[u32], f: usize, ballots: u64) -> Vec<u64> {
    let mut votes = vec![0u64; popularity.len()];
    let mut marked = vec![false; popularity.len()];
    for _ in 0..ballots {
        let marks = if rng.random_bool(0.1) {
            rng.random_range(0..f)
        } else {
            f
        };
        marked.iter_mut().for_each(|m| *m = false);
        for _ in 0..marks {
            let open: u32 = (0..popularity.len())
                .filter(|&c| !marked[c])
                .map(|c| popularity[c])
                .sum();
            let mut ticket = rng.random_range(0..open);
            for c in 0..popularity.len() {
                if marked[c] {
                    continue;
                }
                if ticket < popularity[c] {
                    marked[c] = true;
                    votes[c] += 1;
                    break;
                }
                ticket -= popularity[c];
            }
        }
    }
    votes
}

fn plant_reversal(
    rng: &mut ChaCha20Rng,
    returns: &[PrecinctReturns],
    audits: &mut [AuditRecord],
    w: usize,
    l: usize,
) {
    // Random undercounts never break the per-precinct bounds.
    for audit in audits.iter_mut() {
        if rng.random_bool(0.3) {
            let c = rng.random_range(0..audit.hand_votes.len());
            audit.hand_votes[c] = rng.random_range(0..=audit.hand_votes[c]);
        }
    }
    let total =
        |audits: &[AuditRecord], c: usize| -> u64 { audits.iter().map(|a| a.hand_votes[c]).sum() };
    let mut order: Vec<usize> = (0..audits.len()).collect();
    for i in (1..order.len()).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    // Moving a vote from w to l keeps the precinct total and stays within b_p.
    let mut greedy = false;
    while total(audits, w) > total(audits, l) {
        for &p in &order {
            let bound = returns[p].ballot_bound;
            let a = &mut audits[p].hand_votes;
            let room = a[w].min(bound - a[l]);
            let step = if greedy {
                room
            } else {
                rng.random_range(0..=room)
            };
            a[w] -= step;
            a[l] += step;
            if total(audits, w) <= total(audits, l) {
                return;
            }
        }
        greedy = true;
    }
}

/// Candidate totals re-summed from raw counts, for checking
/// [`crate::contest::compute_totals`] and [`crate::contest::actual_margins`].
pub fn resum(counts: &[&[u64]]) -> Vec<u64> {
    let width = counts.first().map_or(0, |c| c.len());
    let mut out = vec![0u64; width];
    for row in counts {
        for (o, v) in out.iter_mut().zip(row.iter()) {
            *o += v;
        }
    }
    out
}

/// Label for an instance, handy in assertion messages.
pub fn describe(spec: InstanceSpec, seed: u64) -> String {
    format!(
        "N={} K={} f={} reversal={} seed={seed}",
        spec.precincts, spec.candidates, spec.votes_per_voter, spec.reversal
    )
}
