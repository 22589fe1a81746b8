//! Relative overstatement of pairwise margins.
//!
//! For a winner `w`, a loser `l` and a precinct `p`, the relative
//! overstatement is
//!
//! ```text
//! e_pwl = ((v_wp - v_lp) - (a_wp - a_lp)) / V_wl
//! ```
//!
//! where `v` are machine counts, `a` hand counts and `V_wl` the apparent
//! contest-wide margin. The precinct MRO `e_p` is the maximum over all
//! winner/loser pairs. Because hand counts lie in `[0, b_p]`, each `e_pwl` is
//! at most `(v_wp - v_lp + b_p) / V_wl`, and the maximum of those is the a
//! priori bound `u_p`.
//!
//! If the apparent winners are wrong, some pair has `sum_p e_pwl >= 1`, and
//! since the sum of maxima dominates the maximum of sums, `sum_p e_p >= 1`.

use alloc::string::String;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::contest::{AuditRecord, ContestTotals, PairMargin, PrecinctReturns};
use crate::{AuditError, Rational, Result};

/// Overstatements for one audited precinct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecinctDiscrepancy {
    pub precinct_id: String,
    /// `e_pwl` for every pair, in [`ContestTotals::pairs`] order.
    pub pairwise: Vec<(PairMargin, Rational)>,
    /// `e_p`, the largest pairwise overstatement.
    pub mro: Rational,
    /// `u_p`, the a priori bound computed from machine counts alone.
    pub bound: Rational,
}

impl PrecinctDiscrepancy {
    pub fn new(
        returns: &PrecinctReturns,
        audit: &AuditRecord,
        totals: &ContestTotals,
    ) -> Result<Self> {
        let pairwise = pairwise_overstatement(returns, audit, totals)?;
        let mro = precinct_mro(&pairwise)?;
        let bound = precinct_bound(returns, totals)?;
        Ok(PrecinctDiscrepancy {
            precinct_id: returns.precinct_id.clone(),
            pairwise,
            mro,
            bound,
        })
    }
}

fn check_width(precinct: &str, counts: &[u64], totals: &ContestTotals) -> Result<()> {
    if counts.len() != totals.totals().len() {
        return Err(AuditError::CandidateMismatch {
            precinct: precinct.into(),
            expected: totals.totals().len(),
            found: counts.len(),
        });
    }
    Ok(())
}

fn ratio(numerator: i128, margin: u64) -> Rational {
    Rational::new(BigInt::from(numerator), BigInt::from(margin))
}

/// Relative overstatement of every winner/loser margin in one precinct.
///
/// Negative values (understatements) are kept as they are. The audit record
/// is assumed to have been validated against the precinct's ballot bound.
pub fn pairwise_overstatement(
    returns: &PrecinctReturns,
    audit: &AuditRecord,
    totals: &ContestTotals,
) -> Result<Vec<(PairMargin, Rational)>> {
    if returns.precinct_id != audit.precinct_id {
        return Err(AuditError::UnknownPrecinct(audit.precinct_id.clone()));
    }
    check_width(&returns.precinct_id, &returns.machine_votes, totals)?;
    check_width(&audit.precinct_id, &audit.hand_votes, totals)?;

    let v = &returns.machine_votes;
    let a = &audit.hand_votes;
    Ok(totals
        .pairs()
        .iter()
        .map(|pair| {
            let (w, l) = (pair.winner.0, pair.loser.0);
            let machine = v[w] as i128 - v[l] as i128;
            let hand = a[w] as i128 - a[l] as i128;
            (*pair, ratio(machine - hand, pair.margin))
        })
        .collect())
}

/// The precinct MRO: the largest pairwise overstatement.
pub fn precinct_mro(pairwise: &[(PairMargin, Rational)]) -> Result<Rational> {
    pairwise
        .iter()
        .map(|(_, e)| e)
        .max()
        .cloned()
        .ok_or(AuditError::EmptyPairSet)
}

/// A priori bound `u_p` on the precinct MRO. Needs machine counts only.
pub fn precinct_bound(returns: &PrecinctReturns, totals: &ContestTotals) -> Result<Rational> {
    check_width(&returns.precinct_id, &returns.machine_votes, totals)?;
    let v = &returns.machine_votes;
    let b = returns.ballot_bound as i128;
    totals
        .pairs()
        .iter()
        .map(|pair| {
            ratio(
                v[pair.winner.0] as i128 - v[pair.loser.0] as i128 + b,
                pair.margin,
            )
        })
        .max()
        .ok_or(AuditError::EmptyPairSet)
}

/// Both sides of the sum-of-maxima inequality over a set of precincts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MroSum {
    /// `sum_p e_p`, the contest MRO over the given precincts.
    pub total: Rational,
    /// `max_{w,l} sum_p e_pwl`, never larger than `total`.
    pub max_pair_sum: Rational,
}

/// Sums the precinct MROs and, for comparison, the largest per-pair sum.
///
/// Every entry must come from the same [`ContestTotals`]. An empty list sums
/// to zero on both sides.
pub fn mro_sum(discrepancies: &[PrecinctDiscrepancy]) -> Result<MroSum> {
    let Some(first) = discrepancies.first() else {
        return Ok(MroSum {
            total: Rational::zero(),
            max_pair_sum: Rational::zero(),
        });
    };
    let width = first.pairwise.len();
    let mut per_pair = alloc::vec![Rational::zero(); width];
    let mut total = Rational::zero();
    for d in discrepancies {
        if d.pairwise.len() != width {
            return Err(AuditError::CandidateMismatch {
                precinct: d.precinct_id.clone(),
                expected: width,
                found: d.pairwise.len(),
            });
        }
        total += &d.mro;
        for (acc, (_, e)) in per_pair.iter_mut().zip(&d.pairwise) {
            *acc += e;
        }
    }
    let max_pair_sum = per_pair.into_iter().max().ok_or(AuditError::EmptyPairSet)?;
    Ok(MroSum {
        total,
        max_pair_sum,
    })
}
