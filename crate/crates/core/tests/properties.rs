//! Invariants of the contest, discrepancy and risk modules, checked against
//! synthetic elections and the brute-force oracles.

use mro_core::oracle::{
    brute_mro, brute_taint_count, brute_taint_count_weighted, gen_instance, resum, InstanceSpec,
};
use mro_core::risk::rational;
use mro_core::{
    actual_margins, compute_totals, mro_sum, p_value, pool_candidates, precinct_bound,
    precinct_mro, taint_count, AuditRecord, PrecinctDiscrepancy, Rational, Sampling,
    WeightFunction,
};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn instance_spec() -> impl Strategy<Value = (InstanceSpec, u64)> {
    (1usize..=12, 2usize..=6, any::<bool>(), any::<u64>()).prop_flat_map(|(n, k, rev, seed)| {
        (1..k.min(3)).prop_map(move |f| {
            (
                InstanceSpec {
                    precincts: n,
                    candidates: k,
                    votes_per_voter: f,
                    reversal: rev,
                },
                seed,
            )
        })
    })
}

fn bounds_strategy(max_len: usize) -> impl Strategy<Value = Vec<Rational>> {
    prop::collection::vec((0i64..400, 1i64..200), 1..=max_len)
        .prop_map(|v| v.into_iter().map(|(n, d)| rational(n, d * 10)).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn totals_respect_ballot_bounds((spec, seed) in instance_spec()) {
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let votes: u64 = totals.totals().iter().sum();
        let ballots: u64 = inst.returns.iter().map(|r| r.ballot_bound).sum();
        prop_assert!(votes <= spec.votes_per_voter as u64 * ballots);
        for p in totals.pairs() {
            prop_assert!(p.margin > 0);
        }
        prop_assert_eq!(totals.pairs().len(), spec.votes_per_voter * (spec.candidates - spec.votes_per_voter));
    }

    #[test]
    fn totals_ignore_precinct_order((spec, seed) in instance_spec(), shift in 0usize..12) {
        let inst = gen_instance(spec, seed).unwrap();
        let mut rotated = inst.returns.clone();
        let len = rotated.len();
        rotated.rotate_left(shift % len);
        rotated.reverse();
        prop_assert_eq!(
            compute_totals(&inst.setup, &inst.returns).unwrap(),
            compute_totals(&inst.setup, &rotated).unwrap()
        );
    }

    #[test]
    fn actual_totals_match_resummation((spec, seed) in instance_spec()) {
        let inst = gen_instance(spec, seed).unwrap();
        let actual = actual_margins(&inst.setup, &inst.returns, &inst.audits).unwrap();
        let hand: Vec<&[u64]> = inst.audits.iter().map(|a| a.hand_votes.as_slice()).collect();
        let expected = resum(&hand);
        prop_assert_eq!(&actual.totals, &expected);
        let confirmed = actual.margins.iter().all(|&(w, l, _)| expected[w.0] > expected[l.0]);
        prop_assert_eq!(actual.outcome_confirmed, confirmed);
        if spec.reversal {
            prop_assert!(!actual.outcome_confirmed);
        }
    }

    #[test]
    fn pooling_preserves_votes_and_other_margins((spec, seed) in instance_spec(), pick in any::<u64>()) {
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let losers: Vec<&str> = totals.losers().iter().map(|&c| inst.setup.name(c)).collect();
        let pool: Vec<&str> = losers
            .iter()
            .enumerate()
            .filter(|(i, _)| pick >> i & 1 == 1 || *i == 0)
            .map(|(_, n)| *n)
            .collect();
        let pooled_votes: u64 = pool.iter().map(|n| totals.total(inst.setup.index_of(n).unwrap())).sum();
        let weakest = totals.winners().iter().map(|&w| totals.total(w)).min().unwrap();
        let outcome = pool_candidates(&inst.setup, &inst.returns, &pool, "Pooled");
        if pooled_votes >= weakest {
            let outranked = matches!(outcome, Err(mro_core::AuditError::PoolOutranksWinner { .. }));
            prop_assert!(outranked);
            return Ok(());
        }
        let (setup, returns) = outcome.unwrap();
        prop_assert_eq!(setup.candidate_count(), inst.setup.candidate_count() + 1 - pool.len());
        let pooled = compute_totals(&setup, &returns).unwrap();
        prop_assert_eq!(
            pooled.totals().iter().sum::<u64>(),
            totals.totals().iter().sum::<u64>()
        );
        let pooled_total: u64 = pool.iter().map(|n| totals.total(inst.setup.index_of(n).unwrap())).sum();
        prop_assert_eq!(pooled.total(setup.index_of("Pooled").unwrap()), pooled_total);
        for p in totals.pairs() {
            let (w, l) = (inst.setup.name(p.winner), inst.setup.name(p.loser));
            if pool.contains(&l) {
                continue;
            }
            let m = pooled.margin(setup.index_of(w).unwrap(), setup.index_of(l).unwrap());
            prop_assert_eq!(m, Some(p.margin));
        }
    }

    #[test]
    fn mro_bounded_and_sum_of_max_dominates((spec, seed) in instance_spec(), subset in any::<u16>()) {
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let mut chosen = Vec::new();
        for (i, (r, a)) in inst.returns.iter().zip(&inst.audits).enumerate() {
            let d = PrecinctDiscrepancy::new(r, a, &totals).unwrap();
            prop_assert!(d.mro <= d.bound);
            for (_, e) in &d.pairwise {
                prop_assert!(*e <= d.bound);
            }
            prop_assert_eq!(&d.mro, &brute_mro(r, a, &totals));
            if subset >> (i % 16) & 1 == 1 {
                chosen.push(d);
            }
        }
        let s = mro_sum(&chosen).unwrap();
        prop_assert!(s.max_pair_sum <= s.total);
    }

    #[test]
    fn planted_reversal_forces_mro_past_one((spec, seed) in instance_spec()) {
        let spec = InstanceSpec { reversal: true, ..spec };
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let all: Vec<_> = inst
            .returns
            .iter()
            .zip(&inst.audits)
            .map(|(r, a)| PrecinctDiscrepancy::new(r, a, &totals).unwrap())
            .collect();
        let s = mro_sum(&all).unwrap();
        prop_assert!(s.max_pair_sum >= Rational::one());
        prop_assert!(s.total >= Rational::one());
    }

    #[test]
    fn two_candidate_reduction(seed in any::<u64>(), n in 1usize..10) {
        let spec = InstanceSpec { precincts: n, candidates: 2, votes_per_voter: 1, reversal: true };
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let pair = totals.pairs()[0];
        for (r, a) in inst.returns.iter().zip(&inst.audits) {
            let d = PrecinctDiscrepancy::new(r, a, &totals).unwrap();
            let (w, l) = (pair.winner.0, pair.loser.0);
            let num = (r.machine_votes[w] as i64 - r.machine_votes[l] as i64)
                - (a.hand_votes[w] as i64 - a.hand_votes[l] as i64);
            prop_assert_eq!(d.mro, rational(num, pair.margin as i64));
        }
    }

    #[test]
    fn scaling_every_count_leaves_ratios_unchanged((spec, seed) in instance_spec(), c in 2u64..7) {
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let scaled_returns: Vec<_> = inst
            .returns
            .iter()
            .map(|r| {
                let mut r = r.clone();
                r.machine_votes.iter_mut().for_each(|v| *v *= c);
                r.ballot_bound *= c;
                r
            })
            .collect();
        let scaled_audits: Vec<_> = inst
            .audits
            .iter()
            .map(|a| AuditRecord::new(a.precinct_id.clone(), a.hand_votes.iter().map(|v| v * c).collect()))
            .collect();
        let scaled_totals = compute_totals(&inst.setup, &scaled_returns).unwrap();
        for i in 0..inst.returns.len() {
            let d = PrecinctDiscrepancy::new(&inst.returns[i], &inst.audits[i], &totals).unwrap();
            let e = PrecinctDiscrepancy::new(&scaled_returns[i], &scaled_audits[i], &scaled_totals).unwrap();
            let lhs: Vec<_> = d.pairwise.iter().map(|(_, x)| x.clone()).collect();
            let rhs: Vec<_> = e.pairwise.iter().map(|(_, x)| x.clone()).collect();
            prop_assert_eq!(lhs, rhs);
            prop_assert_eq!(d.bound, e.bound);
        }
    }

    #[test]
    fn greedy_taint_matches_subset_search(bounds in bounds_strategy(12), q in 0i64..30, m in 1i64..40) {
        let q = rational(q, 1000);
        let m = rational(m, 10);
        for weight in [WeightFunction::Identity, WeightFunction::Taint] {
            prop_assert_eq!(
                taint_count(&bounds, &q, weight, &m).unwrap(),
                brute_taint_count_weighted(&bounds, &q, &m, weight)
            );
        }
    }

    #[test]
    fn zero_threshold_taint_is_greedy_prefix(bounds in bounds_strategy(40), m in 1i64..40) {
        let m = rational(m, 10);
        let mut sorted = bounds.clone();
        sorted.sort_by(|a, b| b.cmp(a));
        let mut acc = Rational::zero();
        let mut expected = bounds.len() + 1;
        for (i, u) in sorted.iter().enumerate() {
            acc += u;
            if acc >= m {
                expected = i + 1;
                break;
            }
        }
        prop_assert_eq!(taint_count(&bounds, &Rational::zero(), WeightFunction::Identity, &m).unwrap(), expected);
    }

    #[test]
    fn taint_count_monotone(bounds in bounds_strategy(30), bump in 0usize..30, q in 0i64..20) {
        let q = rational(q, 1000);
        let one = Rational::one();
        let t = taint_count(&bounds, &q, WeightFunction::Identity, &one).unwrap();
        let mut raised = bounds.clone();
        let i = bump % raised.len();
        raised[i] += rational(1, 20);
        prop_assert!(taint_count(&raised, &q, WeightFunction::Identity, &one).unwrap() <= t);
        let bigger_m = rational(3, 2);
        prop_assert!(taint_count(&bounds, &q, WeightFunction::Identity, &bigger_m).unwrap() >= t);
    }

    #[test]
    fn p_value_monotone(n_pop in 1usize..300, t in 0usize..300, n in 1usize..60) {
        let t = t % (n_pop + 1);
        let wr = |n| Sampling::WithReplacement { draws: n };
        let p = p_value(t, n_pop, wr(n)).unwrap();
        prop_assert!((0.0..=1.0).contains(&p));
        if t < n_pop {
            prop_assert!(p_value(t + 1, n_pop, wr(n)).unwrap() <= p);
        }
        prop_assert!(p_value(t, n_pop, wr(n + 1)).unwrap() <= p);
        if n <= n_pop {
            let srs = p_value(t, n_pop, Sampling::SimpleRandom { draws: n }).unwrap();
            prop_assert!(srs <= p + 1e-12);
        }
    }
}

#[test]
fn precinct_mro_matches_brute_force_on_wide_contests() {
    for seed in 0..300u64 {
        let spec = InstanceSpec {
            precincts: 4,
            candidates: 6,
            votes_per_voter: 3,
            reversal: seed % 2 == 0,
        };
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        assert_eq!(totals.pairs().len(), 9);
        for (r, a) in inst.returns.iter().zip(&inst.audits) {
            let pairwise = mro_core::pairwise_overstatement(r, a, &totals).unwrap();
            assert_eq!(precinct_mro(&pairwise).unwrap(), brute_mro(r, a, &totals));
        }
    }
}

#[test]
fn zero_error_instances_have_zero_mro() {
    for seed in 0..100u64 {
        let spec = InstanceSpec {
            precincts: 10,
            candidates: 4,
            votes_per_voter: 1,
            reversal: false,
        };
        let inst = gen_instance(spec, seed).unwrap();
        let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
        let all: Vec<_> = inst
            .returns
            .iter()
            .zip(&inst.audits)
            .map(|(r, a)| PrecinctDiscrepancy::new(r, a, &totals).unwrap())
            .collect();
        let s = mro_sum(&all).unwrap();
        assert!(s.total.is_zero() && s.max_pair_sum.is_zero());
        let actual = actual_margins(&inst.setup, &inst.returns, &inst.audits).unwrap();
        assert!(actual.outcome_confirmed);
        for (&(w, l, m), p) in actual.margins.iter().zip(totals.pairs()) {
            assert_eq!((w, l), (p.winner, p.loser));
            assert_eq!(m, p.margin as i128);
        }
    }
}

#[test]
fn bounds_need_no_audit() {
    let spec = InstanceSpec {
        precincts: 5,
        candidates: 3,
        votes_per_voter: 1,
        reversal: false,
    };
    let inst = gen_instance(spec, 3).unwrap();
    let totals = compute_totals(&inst.setup, &inst.returns).unwrap();
    for r in &inst.returns {
        let u = precinct_bound(r, &totals).unwrap();
        assert!(u >= Rational::zero());
    }
    assert_eq!(
        brute_taint_count(&[], &Rational::zero(), &Rational::one()),
        1
    );
}
