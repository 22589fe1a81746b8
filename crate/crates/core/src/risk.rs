//! Conservative P-values for the hypothesis that the apparent winners are
//! wrong, i.e. that the contest MRO is at least `M` (with `M = 1`).
//!
//! The test statistic is the largest weighted precinct MRO seen in the
//! sample. If that is `q`, an adversary who wants the null to hold must put
//! error above `q` into enough precincts: precincts it does not "taint" can
//! contribute at most the cap implied by `w_p(e_p) <= q`, and tainted ones at
//! most their bound `u_p`. The smallest number of tainted precincts that
//! still lets the MRO reach `M` is the taint count `t`, and the P-value is
//! the chance that a sample of `n` precincts misses all `t` of them.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::contest::{compute_totals, index_audits, AuditRecord, ContestSetup, PrecinctReturns};
use crate::discrepancy::{precinct_bound, PrecinctDiscrepancy};
use crate::{AuditError, Rational, Result};

/// Monotone weight applied to each precinct MRO before taking the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightFunction {
    /// `w_p(x) = x`.
    #[default]
    Identity,
    /// `w_p(x) = x / u_p`.
    Taint,
}

impl WeightFunction {
    pub fn name(self) -> &'static str {
        match self {
            WeightFunction::Identity => "identity",
            WeightFunction::Taint => "taint",
        }
    }

    /// `w_p(e_p)`, or `None` for the taint weight on a precinct with `u_p = 0`.
    pub fn apply(self, mro: &Rational, bound: &Rational) -> Option<Rational> {
        match self {
            WeightFunction::Identity => Some(mro.clone()),
            WeightFunction::Taint if bound.is_zero() => None,
            WeightFunction::Taint => Some(mro / bound),
        }
    }

    /// Largest `e_p` with `w_p(e_p) <= q`.
    pub fn cap(self, threshold: &Rational, bound: &Rational) -> Rational {
        match self {
            WeightFunction::Identity => threshold.clone(),
            WeightFunction::Taint => threshold * bound,
        }
    }
}

/// How the sample is treated when computing the P-value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// `draws` independent uniform draws from all precincts.
    WithReplacement { draws: usize },
    /// A simple random sample of `draws` distinct precincts.
    SimpleRandom { draws: usize },
}

impl Sampling {
    pub fn draws(self) -> usize {
        match self {
            Sampling::WithReplacement { draws } | Sampling::SimpleRandom { draws } => draws,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Sampling::WithReplacement { .. } => "with_replacement",
            Sampling::SimpleRandom { .. } => "simple_random_sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TestConfig {
    pub weight: WeightFunction,
    /// `M`; the MRO must reach this for the apparent outcome to be wrong.
    pub margin_threshold: Rational,
    pub sampling: Sampling,
}

impl TestConfig {
    /// Configuration with `M = 1`.
    pub fn new(weight: WeightFunction, sampling: Sampling) -> Self {
        TestConfig {
            weight,
            margin_threshold: Rational::one(),
            sampling,
        }
    }

    fn validate(&self) -> Result<()> {
        if !self.margin_threshold.is_positive() {
            return Err(AuditError::NonPositiveMarginThreshold);
        }
        Ok(())
    }
}

/// Everything a test run computed, in enough detail to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    /// Largest `w_p(e_p)` over the sample.
    pub observed_statistic: Rational,
    /// Threshold `q` fed to the taint count: the statistic, floored at zero.
    pub threshold: Rational,
    /// `N + 1` when the null is infeasible.
    pub taint_count: usize,
    pub population_size: usize,
    pub effective_n: usize,
    pub p_value: f64,
    pub config: TestConfig,
    /// `u_p` for every precinct, in the order of the returns.
    pub bounds: Vec<Rational>,
    /// One entry per audited precinct, in the order of the audits.
    pub discrepancies: Vec<PrecinctDiscrepancy>,
}

/// Largest weighted precinct MRO in the sample.
pub fn observed_statistic(
    sample: &[PrecinctDiscrepancy],
    weight: WeightFunction,
) -> Result<Rational> {
    let mut best: Option<Rational> = None;
    for d in sample {
        let value =
            weight
                .apply(&d.mro, &d.bound)
                .ok_or_else(|| AuditError::ZeroBoundWithTaintWeight {
                    precinct: d.precinct_id.clone(),
                })?;
        if best.as_ref().is_none_or(|b| value > *b) {
            best = Some(value);
        }
    }
    best.ok_or(AuditError::EmptySample)
}

/// Smallest number of precincts that must carry error above the sample-implied
/// cap for the contest MRO to reach `margin_threshold`.
///
/// Untainted precincts contribute their cap (see [`WeightFunction::cap`]);
/// tainted ones contribute `u_p`. Tainting the precincts with the largest
/// gain `u_p - cap` first is optimal, so the answer is the shortest such
/// prefix. Returns `bounds.len() + 1` when even tainting everything falls
/// short.
pub fn taint_count(
    bounds: &[Rational],
    threshold: &Rational,
    weight: WeightFunction,
    margin_threshold: &Rational,
) -> Result<usize> {
    if threshold.is_negative() {
        return Err(AuditError::NegativeThreshold);
    }
    if let Some(index) = bounds.iter().position(|u| u.is_negative()) {
        return Err(AuditError::InconsistentBounds { index });
    }

    let mut reach = Rational::zero();
    let mut gains = Vec::with_capacity(bounds.len());
    for u in bounds {
        let cap = weight.cap(threshold, u);
        gains.push(u - &cap);
        reach += cap;
    }
    if reach >= *margin_threshold {
        return Ok(0);
    }
    gains.sort_unstable_by(|a, b| b.cmp(a));
    for (i, gain) in gains.into_iter().enumerate() {
        if !gain.is_positive() {
            break;
        }
        reach += gain;
        if reach >= *margin_threshold {
            return Ok(i + 1);
        }
    }
    Ok(bounds.len() + 1)
}

/// Chance that a sample of the given design contains none of `taint`
/// tainted precincts out of `population`.
pub fn p_value(taint: usize, population: usize, sampling: Sampling) -> Result<f64> {
    let n = sampling.draws();
    if population == 0 || n == 0 {
        return Err(AuditError::InvalidSampleSize {
            draws: n,
            population,
        });
    }
    if taint > population {
        return Err(AuditError::InvalidCount { taint, population });
    }
    if taint == 0 {
        return Ok(1.0);
    }
    let clean = population - taint;
    match sampling {
        Sampling::WithReplacement { draws } => {
            let miss = clean as f64 / population as f64;
            Ok(libm::pow(miss, draws as f64))
        }
        Sampling::SimpleRandom { draws } => {
            if draws > population {
                return Err(AuditError::InvalidSampleSize { draws, population });
            }
            if draws > clean {
                return Ok(0.0);
            }
            Ok((0..draws).fold(1.0, |p, i| p * (clean - i) as f64 / (population - i) as f64))
        }
    }
}

/// Runs the whole test: bounds for every precinct, discrepancies for the
/// audited ones, the observed statistic, the taint count and the P-value.
pub fn run_test(
    setup: &ContestSetup,
    returns: &[PrecinctReturns],
    audits: &[AuditRecord],
    config: &TestConfig,
) -> Result<RiskReport> {
    config.validate()?;
    let totals = compute_totals(setup, returns)?;
    let population = returns.len();
    let n = config.sampling.draws();
    if audits.is_empty() {
        return Err(AuditError::EmptySample);
    }
    if n == 0 || (matches!(config.sampling, Sampling::SimpleRandom { .. }) && n > population) {
        return Err(AuditError::InvalidSampleSize {
            draws: n,
            population,
        });
    }
    if n > audits.len() {
        return Err(AuditError::SampleExceedsAudits {
            draws: n,
            audited: audits.len(),
        });
    }

    index_audits(returns, audits)?;
    let bounds = returns
        .iter()
        .map(|r| precinct_bound(r, &totals))
        .collect::<Result<Vec<_>>>()?;
    let by_id: BTreeMap<&str, &PrecinctReturns> = returns
        .iter()
        .map(|r| (r.precinct_id.as_str(), r))
        .collect();
    let mut discrepancies = Vec::with_capacity(audits.len());
    for audit in audits {
        let precinct = by_id[audit.precinct_id.as_str()];
        audit.validate(setup, precinct)?;
        discrepancies.push(PrecinctDiscrepancy::new(precinct, audit, &totals)?);
    }

    let observed = observed_statistic(&discrepancies, config.weight)?;
    let threshold = if observed.is_negative() {
        Rational::zero()
    } else {
        observed.clone()
    };
    let taint = taint_count(&bounds, &threshold, config.weight, &config.margin_threshold)?;
    let p = if taint > population {
        0.0
    } else {
        p_value(taint, population, config.sampling)?
    };

    Ok(RiskReport {
        observed_statistic: observed,
        threshold,
        taint_count: taint,
        population_size: population,
        effective_n: n,
        p_value: p,
        config: config.clone(),
        bounds,
        discrepancies,
    })
}

/// Simulates the chance that a sample misses every tainted precinct.
///
/// Returns the estimate and its binomial standard error. Replication `i`
/// draws from its own ChaCha8 stream (`seed`, stream `i`), so results do not
/// depend on how replications are scheduled.
pub fn monte_carlo_pvalue(
    taint: usize,
    population: usize,
    sampling: Sampling,
    replications: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let n = sampling.draws();
    if population == 0 || population > u32::MAX as usize || replications == 0 {
        return Err(AuditError::InvalidSampleSize {
            draws: n,
            population,
        });
    }
    if taint > population {
        return Err(AuditError::InvalidCount { taint, population });
    }
    if matches!(sampling, Sampling::SimpleRandom { .. }) && n > population {
        return Err(AuditError::InvalidSampleSize {
            draws: n,
            population,
        });
    }

    let base = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0u64;
    for rep in 0..replications {
        let mut rng = base.clone();
        rng.set_stream(rep as u64);
        let missed = match sampling {
            Sampling::WithReplacement { draws } => {
                (0..draws).all(|_| rng.random_range(0..population as u32) as usize >= taint)
            }
            Sampling::SimpleRandom { draws } => {
                let mut remaining_taint = taint;
                (0..draws).all(|i| {
                    let pick = rng.random_range(0..(population - i) as u32) as usize;
                    if pick < remaining_taint {
                        remaining_taint -= 1;
                        false
                    } else {
                        true
                    }
                })
            }
        };
        misses += u64::from(missed);
    }
    let reps = replications as f64;
    let estimate = misses as f64 / reps;
    let se = libm::sqrt(estimate * (1.0 - estimate) / reps);
    Ok((estimate, se))
}

/// `a / b` as a [`Rational`].
pub fn rational(numerator: i64, denominator: i64) -> Rational {
    Rational::new(BigInt::from(numerator), BigInt::from(denominator))
}
