//! County-stratified audit samples and the conservative effective sample size.
//!
//! Counties audit a statutory minimum number of precincts depending on their
//! registration (2 below 50,000 registered voters, 3 from 50,000 through
//! 100,000, 4 above), and at least one audited precinct per county must have
//! 150 or more votes.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::contest::PrecinctReturns;
use crate::{AuditError, Result};

/// Votes a precinct needs to satisfy the large-precinct rule.
pub const LARGE_PRECINCT_VOTES: u64 = 150;

/// Minimum number of precincts a county must audit.
pub fn statutory_minimum(registered_voters: u64) -> usize {
    match registered_voters {
        0..50_000 => 2,
        50_000..=100_000 => 3,
        _ => 4,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountyPlan {
    pub county_id: String,
    pub registered_voters: u64,
    pub precincts: Vec<String>,
    pub required_samples: usize,
    /// At least one sampled precinct must have 150 or more votes.
    pub large_precinct_rule: bool,
}

impl CountyPlan {
    /// Plan auditing `required_samples` precincts, or the statutory minimum
    /// when `None`.
    pub fn new(
        county_id: impl Into<String>,
        registered_voters: u64,
        precincts: Vec<String>,
        required_samples: Option<usize>,
        large_precinct_rule: bool,
    ) -> Result<Self> {
        let plan = CountyPlan {
            county_id: county_id.into(),
            registered_voters,
            required_samples: required_samples.unwrap_or(statutory_minimum(registered_voters)),
            precincts,
            large_precinct_rule,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        let minimum = statutory_minimum(self.registered_voters);
        if self.required_samples < minimum {
            return Err(AuditError::BelowStatutoryMinimum {
                county: self.county_id.clone(),
                required: self.required_samples,
                minimum,
            });
        }
        if self.required_samples > self.precincts.len() {
            return Err(AuditError::SampleExceedsCounty {
                county: self.county_id.clone(),
                required: self.required_samples,
                precincts: self.precincts.len(),
            });
        }
        Ok(())
    }
}

/// Draws every county's sample from one ChaCha20 stream seeded with `seed`.
///
/// Counties are processed in the order given. Within a county, when the
/// large-precinct rule applies, the first precinct is drawn uniformly from
/// those with at least 150 votes and the rest uniformly without replacement
/// from the county's other precincts.
pub fn draw_sample(
    plans: &[CountyPlan],
    returns: &[PrecinctReturns],
    seed: u64,
) -> Result<Vec<String>> {
    let votes: BTreeMap<&str, u64> = returns
        .iter()
        .map(|r| (r.precinct_id.as_str(), r.total_votes()))
        .collect();
    let mut counties = BTreeSet::new();
    let mut assigned = BTreeSet::new();
    for plan in plans {
        plan.validate()?;
        if !counties.insert(plan.county_id.as_str()) {
            return Err(AuditError::DuplicateCounty(plan.county_id.clone()));
        }
        for p in &plan.precincts {
            if !votes.contains_key(p.as_str()) {
                return Err(AuditError::UnknownPrecinct(p.clone()));
            }
            if !assigned.insert(p.as_str()) {
                return Err(AuditError::DuplicatePrecinct(p.clone()));
            }
        }
    }

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut sample = Vec::with_capacity(plans.iter().map(|p| p.required_samples).sum());
    for plan in plans {
        let mut pool: Vec<&String> = plan.precincts.iter().collect();
        let mut needed = plan.required_samples;
        if plan.large_precinct_rule && needed > 0 {
            let eligible: Vec<usize> = (0..pool.len())
                .filter(|&i| votes[pool[i].as_str()] >= LARGE_PRECINCT_VOTES)
                .collect();
            if eligible.is_empty() {
                return Err(AuditError::InfeasibleConstraint {
                    county: plan.county_id.clone(),
                });
            }
            let pick = eligible[uniform(&mut rng, eligible.len())];
            sample.push(pool.remove(pick).clone());
            needed -= 1;
        }
        // Partial Fisher-Yates over the remaining precincts.
        for i in 0..needed {
            let j = i + uniform(&mut rng, pool.len() - i);
            pool.swap(i, j);
            sample.push(pool[i].clone());
        }
    }
    Ok(sample)
}

fn uniform(rng: &mut ChaCha20Rng, len: usize) -> usize {
    rng.random_range(0..len as u64) as usize
}

/// `floor(N * min_c required_c / precincts_c)`: the number of with-replacement
/// draws whose sampling fraction is no larger than that of any county.
pub fn conservative_effective_n(plans: &[CountyPlan], population: usize) -> Result<usize> {
    let mut smallest: Option<(u128, u128)> = None;
    for plan in plans {
        if plan.precincts.is_empty() {
            return Err(AuditError::EmptyCounty(plan.county_id.clone()));
        }
        let frac = (plan.required_samples as u128, plan.precincts.len() as u128);
        if smallest.is_none_or(|(r, c)| frac.0 * c < r * frac.1) {
            smallest = Some(frac);
        }
    }
    let (r, c) = smallest.ok_or(AuditError::EmptySample)?;
    Ok((population as u128 * r / c) as usize)
}
