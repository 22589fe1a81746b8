//! Contest model: candidates, precinct returns, hand counts, totals and
//! pairwise margins.
//!
//! All vote arithmetic here is exact integer arithmetic. Ratios are only
//! formed in [`crate::discrepancy`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::{AuditError, Result};

/// Position of a candidate in [`ContestSetup::candidates`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CandidateIndex(pub usize);

/// The candidates in a contest, how many each voter may choose, and how many
/// precincts report.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContestSetup {
    candidates: Vec<String>,
    votes_per_voter: usize,
    precinct_count: usize,
}

impl ContestSetup {
    pub fn new(
        candidates: Vec<String>,
        votes_per_voter: usize,
        precinct_count: usize,
    ) -> Result<Self> {
        if candidates.len() < 2 {
            return Err(AuditError::TooFewCandidates {
                found: candidates.len(),
            });
        }
        if votes_per_voter == 0 || votes_per_voter >= candidates.len() {
            return Err(AuditError::InvalidVotesPerVoter {
                votes_per_voter,
                candidates: candidates.len(),
            });
        }
        if precinct_count == 0 {
            return Err(AuditError::EmptyContest);
        }
        let mut seen = BTreeSet::new();
        for c in &candidates {
            if !seen.insert(c.as_str()) {
                return Err(AuditError::DuplicateCandidate(c.clone()));
            }
        }
        Ok(ContestSetup {
            candidates,
            votes_per_voter,
            precinct_count,
        })
    }

    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn candidate_count(&self) -> usize {
        self.candidates.len()
    }

    pub fn votes_per_voter(&self) -> usize {
        self.votes_per_voter
    }

    pub fn precinct_count(&self) -> usize {
        self.precinct_count
    }

    pub fn name(&self, candidate: CandidateIndex) -> &str {
        &self.candidates[candidate.0]
    }

    pub fn index_of(&self, name: &str) -> Option<CandidateIndex> {
        self.candidates
            .iter()
            .position(|c| c == name)
            .map(CandidateIndex)
    }
}

/// Machine counts for one precinct, aligned with [`ContestSetup::candidates`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecinctReturns {
    pub precinct_id: String,
    pub county_id: String,
    pub machine_votes: Vec<u64>,
    /// Upper bound on the number of valid ballots cast in the precinct.
    pub ballot_bound: u64,
}

impl PrecinctReturns {
    pub fn new(
        precinct_id: impl Into<String>,
        county_id: impl Into<String>,
        machine_votes: Vec<u64>,
        ballot_bound: u64,
    ) -> Self {
        PrecinctReturns {
            precinct_id: precinct_id.into(),
            county_id: county_id.into(),
            machine_votes,
            ballot_bound,
        }
    }

    /// Sum of the machine counts over all candidates.
    pub fn total_votes(&self) -> u64 {
        self.machine_votes.iter().sum()
    }

    pub fn validate(&self, setup: &ContestSetup) -> Result<()> {
        check_counts(
            setup,
            &self.precinct_id,
            &self.machine_votes,
            self.ballot_bound,
        )
    }
}

/// Hand-count results for one audited precinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AuditRecord {
    pub precinct_id: String,
    pub hand_votes: Vec<u64>,
}

impl AuditRecord {
    pub fn new(precinct_id: impl Into<String>, hand_votes: Vec<u64>) -> Self {
        AuditRecord {
            precinct_id: precinct_id.into(),
            hand_votes,
        }
    }

    /// Checks the record against the machine returns of the same precinct:
    /// hand counts obey the same ballot bound as machine counts.
    pub fn validate(&self, setup: &ContestSetup, returns: &PrecinctReturns) -> Result<()> {
        if self.precinct_id != returns.precinct_id {
            return Err(AuditError::UnknownPrecinct(self.precinct_id.clone()));
        }
        check_counts(
            setup,
            &self.precinct_id,
            &self.hand_votes,
            returns.ballot_bound,
        )
    }
}

fn check_counts(setup: &ContestSetup, precinct: &str, counts: &[u64], bound: u64) -> Result<()> {
    if counts.len() != setup.candidate_count() {
        return Err(AuditError::CandidateMismatch {
            precinct: precinct.to_string(),
            expected: setup.candidate_count(),
            found: counts.len(),
        });
    }
    for (name, &votes) in setup.candidates.iter().zip(counts) {
        if votes > bound {
            return Err(AuditError::VotesExceedBound {
                precinct: precinct.to_string(),
                candidate: name.clone(),
                votes,
                bound,
            });
        }
    }
    let total: u128 = counts.iter().map(|&v| u128::from(v)).sum();
    let limit = u128::from(bound) * setup.votes_per_voter() as u128;
    if total > limit {
        return Err(AuditError::TotalExceedsBound {
            precinct: precinct.to_string(),
            total: total as u64,
            limit: limit as u64,
        });
    }
    Ok(())
}

/// Apparent margin of one winner over one loser.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMargin {
    pub winner: CandidateIndex,
    pub loser: CandidateIndex,
    /// `V_w - V_l`, always strictly positive.
    pub margin: u64,
}

/// Apparent totals, the winner/loser partition and every pairwise margin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContestTotals {
    totals: Vec<u64>,
    winners: Vec<CandidateIndex>,
    losers: Vec<CandidateIndex>,
    pairs: Vec<PairMargin>,
}

impl ContestTotals {
    pub fn totals(&self) -> &[u64] {
        &self.totals
    }

    pub fn total(&self, candidate: CandidateIndex) -> u64 {
        self.totals[candidate.0]
    }

    pub fn winners(&self) -> &[CandidateIndex] {
        &self.winners
    }

    pub fn losers(&self) -> &[CandidateIndex] {
        &self.losers
    }

    /// All `f * (K - f)` winner/loser pairs, winners outermost, both in
    /// candidate order.
    pub fn pairs(&self) -> &[PairMargin] {
        &self.pairs
    }

    pub fn margin(&self, winner: CandidateIndex, loser: CandidateIndex) -> Option<u64> {
        self.pairs
            .iter()
            .find(|p| p.winner == winner && p.loser == loser)
            .map(|p| p.margin)
    }

    pub fn is_winner(&self, candidate: CandidateIndex) -> bool {
        self.winners.contains(&candidate)
    }
}

/// Sums the machine counts and identifies the `f` apparent winners.
///
/// The winners are the `f` candidates with the largest totals; every one of
/// them must beat every other candidate by a strictly positive margin.
pub fn compute_totals(setup: &ContestSetup, returns: &[PrecinctReturns]) -> Result<ContestTotals> {
    if returns.len() != setup.precinct_count() {
        return Err(AuditError::PrecinctCountMismatch {
            expected: setup.precinct_count(),
            found: returns.len(),
        });
    }
    let mut seen = BTreeSet::new();
    let mut totals = alloc::vec![0u64; setup.candidate_count()];
    for precinct in returns {
        precinct.validate(setup)?;
        if !seen.insert(precinct.precinct_id.as_str()) {
            return Err(AuditError::DuplicatePrecinct(precinct.precinct_id.clone()));
        }
        for (total, &votes) in totals.iter_mut().zip(&precinct.machine_votes) {
            *total += votes;
        }
    }

    let mut ranked: Vec<CandidateIndex> = (0..totals.len()).map(CandidateIndex).collect();
    ranked.sort_by(|a, b| totals[b.0].cmp(&totals[a.0]).then(a.cmp(b)));
    let f = setup.votes_per_voter();
    let weakest_winner = ranked[f - 1];
    let strongest_loser = ranked[f];
    if totals[weakest_winner.0] <= totals[strongest_loser.0] {
        return Err(AuditError::AmbiguousOutcome {
            winner: setup.name(weakest_winner).to_string(),
            loser: setup.name(strongest_loser).to_string(),
            margin: totals[weakest_winner.0] as i128 - totals[strongest_loser.0] as i128,
        });
    }

    let mut winners = ranked[..f].to_vec();
    let mut losers = ranked[f..].to_vec();
    winners.sort();
    losers.sort();
    let pairs = winners
        .iter()
        .flat_map(|&w| {
            let totals = &totals;
            losers.iter().map(move |&l| PairMargin {
                winner: w,
                loser: l,
                margin: totals[w.0] - totals[l.0],
            })
        })
        .collect();
    Ok(ContestTotals {
        totals,
        winners,
        losers,
        pairs,
    })
}

/// What a complete hand tally shows about the apparent winners.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActualOutcome {
    /// `A_k` for every candidate.
    pub totals: Vec<u64>,
    /// `A_w - A_l` for every apparent winner/loser pair; may be nonpositive.
    pub margins: Vec<(CandidateIndex, CandidateIndex, i128)>,
    /// True when every actual margin is strictly positive.
    pub outcome_confirmed: bool,
}

impl ActualOutcome {
    pub fn min_margin(&self) -> i128 {
        self.margins.iter().map(|m| m.2).min().unwrap_or(0)
    }
}

/// Evaluates a full hand tally against the apparent winners.
pub fn actual_margins(
    setup: &ContestSetup,
    returns: &[PrecinctReturns],
    audits: &[AuditRecord],
) -> Result<ActualOutcome> {
    let apparent = compute_totals(setup, returns)?;
    let by_id = index_audits(returns, audits)?;

    let mut totals = alloc::vec![0u64; setup.candidate_count()];
    for precinct in returns {
        let audit = by_id.get(precinct.precinct_id.as_str()).ok_or_else(|| {
            AuditError::IncompleteTally {
                missing: precinct.precinct_id.clone(),
            }
        })?;
        audit.validate(setup, precinct)?;
        for (total, &votes) in totals.iter_mut().zip(&audit.hand_votes) {
            *total += votes;
        }
    }

    let margins: Vec<_> = apparent
        .pairs()
        .iter()
        .map(|p| {
            (
                p.winner,
                p.loser,
                totals[p.winner.0] as i128 - totals[p.loser.0] as i128,
            )
        })
        .collect();
    let outcome_confirmed = margins.iter().all(|m| m.2 > 0);
    Ok(ActualOutcome {
        totals,
        margins,
        outcome_confirmed,
    })
}

/// Indexes audit records by precinct id, rejecting duplicates and records for
/// precincts that are not in `returns`.
pub(crate) fn index_audits<'a>(
    returns: &[PrecinctReturns],
    audits: &'a [AuditRecord],
) -> Result<BTreeMap<&'a str, &'a AuditRecord>> {
    let known: BTreeSet<&str> = returns.iter().map(|r| r.precinct_id.as_str()).collect();
    let mut by_id = BTreeMap::new();
    for audit in audits {
        if !known.contains(audit.precinct_id.as_str()) {
            return Err(AuditError::UnknownPrecinct(audit.precinct_id.clone()));
        }
        if by_id.insert(audit.precinct_id.as_str(), audit).is_some() {
            return Err(AuditError::DuplicatePrecinct(audit.precinct_id.clone()));
        }
    }
    Ok(by_id)
}

/// A merge of several apparent losers into one pseudo-candidate.
///
/// The pooled candidate takes the position of the first pooled candidate;
/// all other candidates keep their relative order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePool {
    setup: ContestSetup,
    /// Old candidate index -> new candidate index.
    mapping: Vec<usize>,
}

impl CandidatePool {
    pub fn new(
        setup: &ContestSetup,
        returns: &[PrecinctReturns],
        pool: &[&str],
        pooled_id: &str,
    ) -> Result<Self> {
        if pool.is_empty() {
            return Err(AuditError::EmptyPool);
        }
        let mut members = BTreeSet::new();
        for name in pool {
            let idx = setup
                .index_of(name)
                .ok_or_else(|| AuditError::UnknownCandidate(name.to_string()))?;
            if !members.insert(idx) {
                return Err(AuditError::DuplicateCandidate(name.to_string()));
            }
        }
        if let Some(clash) = setup.index_of(pooled_id) {
            if !members.contains(&clash) {
                return Err(AuditError::PooledIdInUse(pooled_id.to_string()));
            }
        }
        let totals = compute_totals(setup, returns)?;
        if let Some(&winner) = members.iter().find(|&&c| totals.is_winner(c)) {
            return Err(AuditError::PoolContainsWinner(
                setup.name(winner).to_string(),
            ));
        }

        let pooled_total: u64 = members.iter().map(|&c| totals.total(c)).sum();
        if let Some(&weakest) = totals.winners().iter().min_by_key(|&&w| totals.total(w)) {
            if pooled_total >= totals.total(weakest) {
                return Err(AuditError::PoolOutranksWinner {
                    pooled: pooled_id.to_string(),
                    winner: setup.name(weakest).to_string(),
                });
            }
        }

        let first = *members.iter().next().expect("pool is nonempty");
        let mut names = Vec::with_capacity(setup.candidate_count() + 1 - members.len());
        let mut mapping = alloc::vec![0; setup.candidate_count()];
        for (i, name) in setup.candidates().iter().enumerate() {
            let idx = CandidateIndex(i);
            if idx == first {
                names.push(pooled_id.to_string());
            } else if members.contains(&idx) {
                continue;
            } else {
                names.push(name.clone());
            }
            mapping[i] = names.len() - 1;
        }
        for &m in &members {
            mapping[m.0] = mapping[first.0];
        }
        let pooled = ContestSetup::new(names, setup.votes_per_voter(), setup.precinct_count())?;
        Ok(CandidatePool {
            setup: pooled,
            mapping,
        })
    }

    /// The contest after pooling.
    pub fn setup(&self) -> &ContestSetup {
        &self.setup
    }

    fn merge(&self, counts: &[u64]) -> Vec<u64> {
        let mut merged = alloc::vec![0; self.setup.candidate_count()];
        for (&to, &votes) in self.mapping.iter().zip(counts) {
            merged[to] += votes;
        }
        merged
    }

    pub fn apply_returns(&self, returns: &PrecinctReturns) -> PrecinctReturns {
        PrecinctReturns {
            machine_votes: self.merge(&returns.machine_votes),
            ..returns.clone()
        }
    }

    pub fn apply_audit(&self, audit: &AuditRecord) -> AuditRecord {
        AuditRecord {
            precinct_id: audit.precinct_id.clone(),
            hand_votes: self.merge(&audit.hand_votes),
        }
    }
}

/// Merges the candidates in `pool` (all apparent losers) into a single
/// pseudo-candidate called `pooled_id`.
pub fn pool_candidates(
    setup: &ContestSetup,
    returns: &[PrecinctReturns],
    pool: &[&str],
    pooled_id: &str,
) -> Result<(ContestSetup, Vec<PrecinctReturns>)> {
    let pooling = CandidatePool::new(setup, returns, pool, pooled_id)?;
    let pooled = returns.iter().map(|r| pooling.apply_returns(r)).collect();
    Ok((pooling.setup, pooled))
}
