//! Discrepancy measures and conservative P-values for post-election audits.
//!
//! The crate compares machine counts with hand tallies precinct by precinct
//! using the maximum relative overstatement of pairwise margins (MRO), bounds
//! that overstatement a priori from the number of ballots cast, and turns an
//! audit sample into a conservative P-value for the hypothesis that a full
//! hand count would change the set of winners.
//!
//! Everything here is pure computation over `alloc` collections; file formats
//! and the command line live in the `mro-audit` crate.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod contest;
pub mod discrepancy;
mod error;
pub mod oracle;
pub mod risk;
pub mod sampling;

pub use contest::{
    actual_margins, compute_totals, pool_candidates, ActualOutcome, AuditRecord, CandidateIndex,
    CandidatePool, ContestSetup, ContestTotals, PairMargin, PrecinctReturns,
};
pub use discrepancy::{
    mro_sum, pairwise_overstatement, precinct_bound, precinct_mro, MroSum, PrecinctDiscrepancy,
};
pub use error::AuditError;
pub use risk::{
    monte_carlo_pvalue, observed_statistic, p_value, run_test, taint_count, RiskReport, Sampling,
    TestConfig, WeightFunction,
};
pub use sampling::{conservative_effective_n, draw_sample, statutory_minimum, CountyPlan};

/// Exact rational used for every overstatement, bound and threshold.
pub type Rational = num_rational::BigRational;

/// Convenience alias used throughout the crate.
pub type Result<T, E = AuditError> = core::result::Result<T, E>;

/// Converts an exact rational to the nearest `f64` for reporting.
pub fn to_f64(value: &Rational) -> f64 {
    use num_traits::ToPrimitive;
    value.to_f64().unwrap_or(f64::NAN)
}
