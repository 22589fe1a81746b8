//! The JSON audit report and its independent re-verification.

use std::fmt;
use std::str::FromStr;

use mro_core::{
    compute_totals, p_value, precinct_bound, taint_count, to_f64, AuditRecord, ContestSetup,
    PrecinctDiscrepancy, PrecinctReturns, Rational, RiskReport, Sampling, WeightFunction,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "mro-audit/1";

/// An exact rational together with its nearest `f64`, for readers that do
/// not care about exactness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exact {
    pub exact: String,
    pub value: f64,
}

impl From<&Rational> for Exact {
    fn from(r: &Rational) -> Self {
        Exact {
            exact: r.to_string(),
            value: to_f64(r),
        }
    }
}

impl Exact {
    pub fn rational(&self) -> Result<Rational> {
        let r = Rational::from_str(&self.exact)
            .map_err(|_| Error::Verification(format!("`{}` is not a rational", self.exact)))?;
        if to_f64(&r).to_bits() != self.value.to_bits() {
            return Err(Error::Verification(format!(
                "value {} does not match exact {}",
                self.value, self.exact
            )));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pooling {
    pub pooled_id: String,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Margin {
    pub winner: String,
    pub loser: String,
    pub margin: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestSection {
    pub candidates: Vec<String>,
    pub votes_per_voter: usize,
    pub precinct_count: usize,
    pub pooling: Option<Pooling>,
    pub totals: Vec<u64>,
    pub winners: Vec<String>,
    pub losers: Vec<String>,
    pub margins: Vec<Margin>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrecinctRow {
    pub precinct_id: String,
    pub county_id: String,
    pub ballot_bound: u64,
    pub machine_votes: Vec<u64>,
    pub bound: Exact,
    pub sampled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hand_votes: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mro: Option<Exact>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskSection {
    pub weight: String,
    pub margin_threshold: Exact,
    pub sampling: String,
    pub draws: usize,
    pub audited: usize,
    pub observed_statistic: Exact,
    pub threshold: Exact,
    pub taint_count: usize,
    pub population_size: usize,
    pub p_value: f64,
    pub p_value_display: String,
    pub mro_sum: Exact,
    pub max_pair_sum: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReportDocument {
    pub schema: String,
    pub tool_version: String,
    pub inputs: Vec<InputDigest>,
    pub contest: ContestSection,
    pub precincts: Vec<PrecinctRow>,
    pub risk: RiskSection,
}

/// `p` as a percentage with two decimals, e.g. `4.05%`.
pub fn percent(p: f64) -> String {
    format!("{:.2}%", p * 100.0)
}

pub fn parse_weight(name: &str) -> Option<WeightFunction> {
    match name {
        "identity" => Some(WeightFunction::Identity),
        "taint" => Some(WeightFunction::Taint),
        _ => None,
    }
}

pub fn parse_sampling(label: &str, draws: usize) -> Option<Sampling> {
    match label {
        "with_replacement" => Some(Sampling::WithReplacement { draws }),
        "simple_random_sample" => Some(Sampling::SimpleRandom { draws }),
        _ => None,
    }
}

impl fmt::Display for AuditReportDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "t = {} of N = {}, n = {} ({}), p = {:.4} ({})",
            self.risk.taint_count,
            self.risk.population_size,
            self.risk.draws,
            self.risk.sampling,
            self.risk.p_value,
            self.risk.p_value_display
        )
    }
}

impl AuditReportDocument {
    pub fn build(
        inputs: Vec<InputDigest>,
        setup: &ContestSetup,
        pooling: Option<Pooling>,
        returns: &[PrecinctReturns],
        audits: &[AuditRecord],
        report: &RiskReport,
    ) -> Result<Self> {
        let totals = compute_totals(setup, returns)?;
        let names = |list: &[mro_core::CandidateIndex]| {
            list.iter()
                .map(|&c| setup.name(c).to_string())
                .collect::<Vec<_>>()
        };
        let contest = ContestSection {
            candidates: setup.candidates().to_vec(),
            votes_per_voter: setup.votes_per_voter(),
            precinct_count: setup.precinct_count(),
            pooling,
            totals: totals.totals().to_vec(),
            winners: names(totals.winners()),
            losers: names(totals.losers()),
            margins: totals
                .pairs()
                .iter()
                .map(|p| Margin {
                    winner: setup.name(p.winner).to_string(),
                    loser: setup.name(p.loser).to_string(),
                    margin: p.margin,
                })
                .collect(),
        };

        let audited: std::collections::HashMap<&str, (&AuditRecord, &PrecinctDiscrepancy)> = audits
            .iter()
            .zip(&report.discrepancies)
            .map(|(a, d)| (a.precinct_id.as_str(), (a, d)))
            .collect();
        let precincts = returns
            .iter()
            .zip(&report.bounds)
            .map(|(r, u)| {
                let hit = audited.get(r.precinct_id.as_str());
                PrecinctRow {
                    precinct_id: r.precinct_id.clone(),
                    county_id: r.county_id.clone(),
                    ballot_bound: r.ballot_bound,
                    machine_votes: r.machine_votes.clone(),
                    bound: u.into(),
                    sampled: hit.is_some(),
                    hand_votes: hit.map(|(a, _)| a.hand_votes.clone()),
                    mro: hit.map(|(_, d)| (&d.mro).into()),
                }
            })
            .collect();

        let sum = mro_core::mro_sum(&report.discrepancies)?;
        let risk = RiskSection {
            weight: report.config.weight.name().to_string(),
            margin_threshold: (&report.config.margin_threshold).into(),
            sampling: report.config.sampling.label().to_string(),
            draws: report.effective_n,
            audited: report.discrepancies.len(),
            observed_statistic: (&report.observed_statistic).into(),
            threshold: (&report.threshold).into(),
            taint_count: report.taint_count,
            population_size: report.population_size,
            p_value: report.p_value,
            p_value_display: percent(report.p_value),
            mro_sum: (&sum.total).into(),
            max_pair_sum: (&sum.max_pair_sum).into(),
        };

        Ok(AuditReportDocument {
            schema: SCHEMA.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs,
            contest,
            precincts,
            risk,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Recomputes every derived number in the document from the vote
    /// counts it carries and checks that they agree exactly.
    pub fn verify(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Verification(msg));
        if self.schema != SCHEMA {
            return fail(format!("unsupported schema `{}`", self.schema));
        }
        let c = &self.contest;
        if c.precinct_count != self.precincts.len() {
            return fail(format!(
                "contest lists {} precincts but the table has {}",
                c.precinct_count,
                self.precincts.len()
            ));
        }
        let setup = ContestSetup::new(c.candidates.clone(), c.votes_per_voter, c.precinct_count)?;
        let returns: Vec<PrecinctReturns> = self
            .precincts
            .iter()
            .map(|row| {
                PrecinctReturns::new(
                    row.precinct_id.clone(),
                    row.county_id.clone(),
                    row.machine_votes.clone(),
                    row.ballot_bound,
                )
            })
            .collect();
        for r in &returns {
            r.validate(&setup)?;
        }
        let totals = compute_totals(&setup, &returns)?;
        if totals.totals() != c.totals.as_slice() {
            return fail("candidate totals do not match the precinct table".into());
        }
        let margins: Vec<Margin> = totals
            .pairs()
            .iter()
            .map(|p| Margin {
                winner: setup.name(p.winner).to_string(),
                loser: setup.name(p.loser).to_string(),
                margin: p.margin,
            })
            .collect();
        if margins != c.margins {
            return fail("pairwise margins do not match the precinct table".into());
        }

        let weight = parse_weight(&self.risk.weight)
            .ok_or_else(|| Error::Verification(format!("unknown weight `{}`", self.risk.weight)))?;
        let mut bounds = Vec::with_capacity(returns.len());
        let mut sample = Vec::new();
        for (row, r) in self.precincts.iter().zip(&returns) {
            let u = precinct_bound(r, &totals)?;
            if row.bound.rational()? != u {
                return fail(format!("bound for `{}` is wrong", row.precinct_id));
            }
            match (row.sampled, &row.hand_votes, &row.mro) {
                (true, Some(hand), Some(mro)) => {
                    let audit = AuditRecord::new(row.precinct_id.clone(), hand.clone());
                    audit.validate(&setup, r)?;
                    let d = PrecinctDiscrepancy::new(r, &audit, &totals)?;
                    if mro.rational()? != d.mro {
                        return fail(format!("MRO for `{}` is wrong", row.precinct_id));
                    }
                    if d.mro > d.bound {
                        return fail(format!("MRO exceeds bound for `{}`", row.precinct_id));
                    }
                    sample.push(d);
                }
                (false, None, None) => {}
                _ => {
                    return fail(format!(
                        "inconsistent audit fields for `{}`",
                        row.precinct_id
                    ))
                }
            }
            bounds.push(u);
        }

        let risk = &self.risk;
        if sample.len() != risk.audited {
            return fail(format!(
                "{} audited rows but risk section says {}",
                sample.len(),
                risk.audited
            ));
        }
        let observed = mro_core::observed_statistic(&sample, weight)?;
        if risk.observed_statistic.rational()? != observed {
            return fail("observed statistic does not match the audited rows".into());
        }
        let threshold = risk.threshold.rational()?;
        let floored = if observed < Rational::default() {
            Rational::default()
        } else {
            observed
        };
        if threshold != floored {
            return fail("threshold is not the floored observed statistic".into());
        }
        let sum = mro_core::mro_sum(&sample)?;
        if risk.mro_sum.rational()? != sum.total
            || risk.max_pair_sum.rational()? != sum.max_pair_sum
        {
            return fail("MRO sums do not match the audited rows".into());
        }
        let margin_threshold = risk.margin_threshold.rational()?;
        let t = taint_count(&bounds, &threshold, weight, &margin_threshold)?;
        if t != risk.taint_count {
            return fail(format!(
                "taint count recomputes to {t}, document says {}",
                risk.taint_count
            ));
        }
        if risk.population_size != returns.len() {
            return fail("population size does not match the precinct table".into());
        }
        let sampling = parse_sampling(&risk.sampling, risk.draws)
            .ok_or_else(|| Error::Verification(format!("unknown sampling `{}`", risk.sampling)))?;
        let p = if t > returns.len() {
            0.0
        } else {
            p_value(t, returns.len(), sampling)?
        };
        if p.to_bits() != risk.p_value.to_bits() {
            return fail(format!(
                "P-value recomputes to {p:e}, document says {:e}",
                risk.p_value
            ));
        }
        if percent(p) != risk.p_value_display {
            return fail("P-value display does not match".into());
        }
        Ok(())
    }
}
