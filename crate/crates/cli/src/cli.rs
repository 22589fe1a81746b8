//! Command-line front end.
//!
//! Machine-readable JSON goes to stdout, human-oriented diagnostics to
//! stderr. Exit status is 0 on success, 1 when the input is well formed but
//! fails validation (or a report fails verification), and 2 for usage
//! errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use mro_core::oracle::{brute_mro, brute_taint_count_weighted, gen_instance, InstanceSpec};
use mro_core::{
    compute_totals, conservative_effective_n, draw_sample, monte_carlo_pvalue, precinct_bound,
    run_test, taint_count, AuditRecord, CandidatePool, ContestSetup, CountyPlan, PrecinctReturns,
    Rational, Sampling, TestConfig, WeightFunction,
};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::formats::{self, ReturnsFile};
use crate::report::{percent, AuditReportDocument, Exact, InputDigest, Margin, Pooling};

const DEFAULT_POOLED_ID: &str = "Pooled";
const DEFAULT_REPS: usize = 100_000;

#[derive(Debug, Parser)]
#[command(
    name = "mro-audit",
    version,
    about = "Post-election audit P-values from precinct hand counts"
)]
pub struct Cli {
    /// Settings file of `key = value` lines; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Candidate totals, apparent winners and pairwise margins.
    Margins(ContestArgs),
    /// A priori bound u_p on each precinct's overstatement.
    Bounds(ContestArgs),
    /// Draw a stratified audit sample by county.
    Plan {
        #[command(flatten)]
        contest: ContestArgs,
        #[arg(long, value_name = "FILE")]
        counties: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// P-value for the hypothesis that a full hand count changes the winners.
    Pvalue {
        #[command(flatten)]
        contest: ContestArgs,
        #[command(flatten)]
        test: TestArgs,
    },
    /// Full JSON report with per-precinct detail and input digests.
    Report {
        #[command(flatten)]
        contest: ContestArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Write the report here instead of stdout.
        #[arg(long, short, value_name = "FILE")]
        output: Option<PathBuf>,
    },
    /// Check the closed-form P-value against simulated samples.
    Simulate {
        #[command(flatten)]
        contest: ContestArgs,
        #[command(flatten)]
        test: TestArgs,
        /// Tainted precincts; with --population, skips the contest files.
        #[arg(long)]
        taint: Option<usize>,
        #[arg(long)]
        population: Option<usize>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Also cross-check the library against the brute-force oracles on
        /// synthetic elections.
        #[arg(long)]
        verify: bool,
        /// Synthetic elections for --verify.
        #[arg(long, default_value_t = 200)]
        instances: usize,
    },
    /// Re-derive every number in a saved report.
    Verify {
        #[arg(value_name = "REPORT")]
        report: PathBuf,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct ContestArgs {
    /// Machine returns CSV: precinct_id,county_id,ballot_bound,<candidates>.
    #[arg(value_name = "RETURNS")]
    pub returns: Option<PathBuf>,
    /// Winners per contest (and votes each voter may cast).
    #[arg(long, value_name = "F")]
    pub votes_per_voter: Option<usize>,
    /// Losing candidates to merge into one, comma separated.
    #[arg(long, value_name = "A,B,C")]
    pub pool: Option<String>,
    /// Name for the merged candidate.
    #[arg(long, value_name = "NAME")]
    pub pooled_id: Option<String>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TestArgs {
    /// Hand counts CSV: precinct_id,<candidates>.
    #[arg(long, value_name = "FILE")]
    pub audits: Option<PathBuf>,
    /// identity or taint.
    #[arg(long, value_name = "WEIGHT")]
    pub weight: Option<String>,
    /// wr, srs, wr:N or srs:N.
    #[arg(long, value_name = "SCHEME")]
    pub sampling: Option<String>,
    /// Sample size to assume when the sampling flag gives none.
    #[arg(long, value_name = "K")]
    pub effective_n: Option<usize>,
    /// County plan; its conservative sample size is used when no size is given.
    #[arg(long, value_name = "FILE")]
    pub counties: Option<PathBuf>,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let target: &mut dyn Write = if e.use_stderr() { err } else { out };
            let _ = write!(target, "{}", e.render());
            return e.exit_code();
        }
    };
    match execute(cli, out, err) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let settings = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    let value = match cli.command {
        Command::Margins(args) => margins(&load_contest(&args, &settings)?, err),
        Command::Bounds(args) => bounds(&load_contest(&args, &settings)?, err)?,
        Command::Plan {
            contest,
            counties,
            seed,
        } => {
            let contest = load_contest(&contest, &settings)?;
            let counties = counties
                .or(settings.counties.clone())
                .ok_or_else(|| Error::Usage("plan needs --counties".into()))?;
            let seed = seed
                .or(settings.seed)
                .ok_or_else(|| Error::Usage("plan needs --seed".into()))?;
            plan(&contest, &counties, seed, err)?
        }
        Command::Pvalue { contest, test } => {
            let design = design(&test, &settings)?;
            let doc = analyse(
                &load_contest(&contest, &settings)?,
                &design,
                &test,
                &settings,
            )?;
            let _ = writeln!(
                err,
                "p = {:.4} ({})",
                doc.risk.p_value, doc.risk.p_value_display
            );
            serde_json::to_value(&doc.risk)?
        }
        Command::Report {
            contest,
            test,
            output,
        } => {
            let design = design(&test, &settings)?;
            let doc = analyse(
                &load_contest(&contest, &settings)?,
                &design,
                &test,
                &settings,
            )?;
            let _ = writeln!(err, "{doc}");
            match output.or(settings.output.clone()) {
                Some(path) => {
                    std::fs::write(&path, doc.to_json()? + "\n")
                        .map_err(|source| Error::Io { path, source })?;
                    return Ok(());
                }
                None => serde_json::to_value(&doc)?,
            }
        }
        Command::Simulate {
            contest,
            test,
            taint,
            population,
            reps,
            seed,
            verify,
            instances,
        } => {
            let reps = reps.or(settings.reps).unwrap_or(DEFAULT_REPS);
            let seed = seed.or(settings.seed).unwrap_or(0);
            let mut value = simulate(
                &contest, &test, taint, population, reps, seed, &settings, err,
            )?;
            if verify {
                value["oracle"] = oracle_checks(instances, seed, err)?;
            }
            value
        }
        Command::Verify { report } => {
            let text = std::fs::read_to_string(&report).map_err(|source| Error::Io {
                path: report.clone(),
                source,
            })?;
            let doc = AuditReportDocument::from_json(&text)?;
            doc.verify()?;
            let _ = writeln!(err, "verified: {doc}");
            json!({ "verified": true, "p_value": doc.risk.p_value, "taint_count": doc.risk.taint_count })
        }
    };
    let text = serde_json::to_string_pretty(&value)?;
    match writeln!(out, "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::Io {
            path: "<stdout>".into(),
            source: e,
        }),
        _ => Ok(()),
    }
}

struct Contest {
    file: ReturnsFile,
    setup: ContestSetup,
    returns: Vec<PrecinctReturns>,
    pool: Option<(CandidatePool, Pooling)>,
    inputs: Vec<InputDigest>,
}

fn digest(role: &str, path: &Path) -> Result<InputDigest> {
    let bytes = std::fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(InputDigest {
        role: role.to_string(),
        path: path.display().to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}

fn load_contest(args: &ContestArgs, settings: &Settings) -> Result<Contest> {
    let path = args
        .returns
        .clone()
        .or(settings.returns.clone())
        .ok_or_else(|| Error::Usage("no returns file given".into()))?;
    let f = args
        .votes_per_voter
        .or(settings.votes_per_voter)
        .unwrap_or(1);
    let file = formats::load_returns(&path, f)?;
    let inputs = vec![digest("returns", &path)?];
    let context = |e| Error::Validation {
        context: path.display().to_string(),
        source: e,
    };

    let pooled_id = args.pooled_id.clone().or(settings.pooled_id.clone());
    let pool = match args.pool.clone().or(settings.pool.clone()) {
        None if pooled_id.is_some() => {
            return Err(Error::Usage("--pooled-id needs --pool".into()));
        }
        None => None,
        Some(list) => {
            let members: Vec<String> = list.split(',').map(|s| s.trim().to_string()).collect();
            let names: Vec<&str> = members.iter().map(String::as_str).collect();
            let pooled_id = pooled_id.unwrap_or_else(|| DEFAULT_POOLED_ID.to_string());
            let pooling = CandidatePool::new(&file.setup, &file.returns, &names, &pooled_id)
                .map_err(|e| Error::Validation {
                    context: "--pool".into(),
                    source: e,
                })?;
            Some((pooling, Pooling { pooled_id, members }))
        }
    };

    let (setup, returns) = match &pool {
        Some((pooling, _)) => (
            pooling.setup().clone(),
            file.returns
                .iter()
                .map(|r| pooling.apply_returns(r))
                .collect(),
        ),
        None => (file.setup.clone(), file.returns.clone()),
    };
    compute_totals(&setup, &returns).map_err(context)?;
    Ok(Contest {
        file,
        setup,
        returns,
        pool,
        inputs,
    })
}

fn margin_rows(setup: &ContestSetup, totals: &mro_core::ContestTotals) -> Vec<Margin> {
    totals
        .pairs()
        .iter()
        .map(|p| Margin {
            winner: setup.name(p.winner).to_string(),
            loser: setup.name(p.loser).to_string(),
            margin: p.margin,
        })
        .collect()
}

fn margins(contest: &Contest, err: &mut dyn Write) -> Value {
    let setup = &contest.setup;
    let totals = compute_totals(setup, &contest.returns).expect("checked when loaded");
    let names = |list: &[mro_core::CandidateIndex]| {
        list.iter()
            .map(|&c| setup.name(c).to_string())
            .collect::<Vec<_>>()
    };
    let candidates: Vec<Value> = setup
        .candidates()
        .iter()
        .zip(totals.totals())
        .map(|(name, votes)| json!({ "name": name, "votes": votes }))
        .collect();
    let ballots: u64 = contest.returns.iter().map(|r| r.ballot_bound).sum();
    let rows = margin_rows(setup, &totals);
    if let Some(smallest) = rows.iter().min_by_key(|m| m.margin) {
        let _ = writeln!(
            err,
            "smallest margin: {} over {} by {}",
            smallest.winner, smallest.loser, smallest.margin
        );
    }
    json!({
        "candidates": candidates,
        "votes_per_voter": setup.votes_per_voter(),
        "precincts": contest.returns.len(),
        "ballots": ballots,
        "pooling": contest.pool.as_ref().map(|(_, p)| p),
        "winners": names(totals.winners()),
        "losers": names(totals.losers()),
        "margins": rows,
    })
}

fn bounds(contest: &Contest, err: &mut dyn Write) -> Result<Value> {
    let totals = compute_totals(&contest.setup, &contest.returns)?;
    let mut rows = Vec::with_capacity(contest.returns.len());
    let mut all = Vec::with_capacity(contest.returns.len());
    for r in &contest.returns {
        let u = precinct_bound(r, &totals)?;
        rows.push(json!({
            "precinct_id": r.precinct_id,
            "county_id": r.county_id,
            "bound": Exact::from(&u),
        }));
        all.push(u);
    }
    let max = all.iter().max().cloned().unwrap_or_default();
    let sum: Rational = all.iter().sum();
    let one = Rational::from_integer(1.into());
    let t = taint_count(&all, &Rational::default(), WeightFunction::Identity, &one)?;
    let _ = writeln!(
        err,
        "max u_p = {:.4}; an error-free sample leaves t = {t} of {} precincts",
        mro_core::to_f64(&max),
        all.len()
    );
    Ok(json!({
        "margins": margin_rows(&contest.setup, &totals),
        "precincts": rows,
        "max_bound": Exact::from(&max),
        "sum_bounds": Exact::from(&sum),
        "taint_count_error_free": t,
    }))
}

fn plan(contest: &Contest, counties: &Path, seed: u64, err: &mut dyn Write) -> Result<Value> {
    let plans = formats::load_county_plans(counties, &contest.file)?;
    let sample = draw_sample(&plans, &contest.returns, seed).map_err(|e| Error::Validation {
        context: counties.display().to_string(),
        source: e,
    })?;
    let n = conservative_effective_n(&plans, contest.returns.len())?;
    let _ = writeln!(
        err,
        "{} precincts drawn across {} counties; conservative n = {n}",
        sample.len(),
        plans.len()
    );
    let rows: Vec<Value> = plans
        .iter()
        .map(|p| {
            json!({
                "county_id": p.county_id,
                "registered_voters": p.registered_voters,
                "precincts": p.precincts.len(),
                "required_samples": p.required_samples,
            })
        })
        .collect();
    Ok(json!({
        "seed": seed,
        "counties": rows,
        "sample_size": sample.len(),
        "effective_n": n,
        "sample": sample,
    }))
}

fn parse_scheme(spec: &str) -> Result<(bool, Option<usize>)> {
    let (kind, size) = match spec.split_once(':') {
        Some((kind, size)) => (kind, Some(size)),
        None => (spec, None),
    };
    let with_replacement = match kind {
        "wr" => true,
        "srs" => false,
        _ => {
            return Err(Error::Usage(format!(
                "unknown sampling `{spec}`; use wr[:N] or srs[:N]"
            )))
        }
    };
    let size = size
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::Usage(format!("bad sample size in `{spec}`")))
        })
        .transpose()?;
    Ok((with_replacement, size))
}

fn parse_weight(name: &str) -> Result<WeightFunction> {
    crate::report::parse_weight(name)
        .ok_or_else(|| Error::Usage(format!("unknown weight `{name}`; use identity or taint")))
}

struct Design {
    weight: WeightFunction,
    with_replacement: bool,
    explicit_n: Option<usize>,
    counties: Option<PathBuf>,
}

fn design(test: &TestArgs, settings: &Settings) -> Result<Design> {
    let weight = parse_weight(
        test.weight
            .as_deref()
            .or(settings.weight.as_deref())
            .unwrap_or("identity"),
    )?;
    let (with_replacement, scheme_n) = parse_scheme(
        test.sampling
            .as_deref()
            .or(settings.sampling.as_deref())
            .unwrap_or("wr"),
    )?;
    let effective_n = test.effective_n.or(settings.effective_n);
    let explicit_n = match (scheme_n, effective_n) {
        (Some(a), Some(b)) if a != b => {
            return Err(Error::Usage(format!(
                "sampling says n = {a} but --effective-n says {b}"
            )));
        }
        (a, b) => a.or(b),
    };
    if explicit_n == Some(0) {
        return Err(Error::Usage("sample size must be positive".into()));
    }
    Ok(Design {
        weight,
        with_replacement,
        explicit_n,
        counties: test.counties.clone().or(settings.counties.clone()),
    })
}

impl Design {
    fn sampling(&self, n: usize) -> Sampling {
        if self.with_replacement {
            Sampling::WithReplacement { draws: n }
        } else {
            Sampling::SimpleRandom { draws: n }
        }
    }
}

fn load_audits(contest: &Contest, path: &Path) -> Result<Vec<AuditRecord>> {
    let aligned = formats::load_audits(path)?.align(&contest.file)?;
    Ok(match &contest.pool {
        Some((pooling, _)) => aligned.iter().map(|a| pooling.apply_audit(a)).collect(),
        None => aligned,
    })
}

fn analyse(
    contest: &Contest,
    design: &Design,
    test: &TestArgs,
    settings: &Settings,
) -> Result<AuditReportDocument> {
    let audits_path = test
        .audits
        .clone()
        .or(settings.audits.clone())
        .ok_or_else(|| Error::Usage("no audits file given (--audits)".into()))?;
    let audits = load_audits(contest, &audits_path)?;
    let mut inputs = contest.inputs.clone();
    inputs.push(digest("audits", &audits_path)?);

    let n = match (design.explicit_n, &design.counties) {
        (Some(n), _) => n,
        (None, Some(counties)) => {
            let plans: Vec<CountyPlan> = formats::load_county_plans(counties, &contest.file)?;
            inputs.push(digest("counties", counties)?);
            conservative_effective_n(&plans, contest.returns.len())?
        }
        (None, None) => audits.len(),
    };
    let config = TestConfig::new(design.weight, design.sampling(n));
    let context = audits_path.display().to_string();
    let report = run_test(&contest.setup, &contest.returns, &audits, &config)
        .map_err(|e| Error::Validation { context, source: e })?;
    AuditReportDocument::build(
        inputs,
        &contest.setup,
        contest.pool.as_ref().map(|(_, p)| p.clone()),
        &contest.returns,
        &audits,
        &report,
    )
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    contest: &ContestArgs,
    test: &TestArgs,
    taint: Option<usize>,
    population: Option<usize>,
    reps: usize,
    seed: u64,
    settings: &Settings,
    err: &mut dyn Write,
) -> Result<Value> {
    let design = design(test, settings)?;
    let (t, big_n, sampling) = match (taint.or(settings.taint), population.or(settings.population))
    {
        (Some(t), Some(big_n)) => {
            let n = design.explicit_n.ok_or_else(|| {
                Error::Usage("give a sample size with --sampling wr:N or --effective-n".into())
            })?;
            (t, big_n, design.sampling(n))
        }
        (None, None) => {
            let doc = analyse(&load_contest(contest, settings)?, &design, test, settings)?;
            let sampling = crate::report::parse_sampling(&doc.risk.sampling, doc.risk.draws)
                .expect("labels produced by this crate");
            (doc.risk.taint_count, doc.risk.population_size, sampling)
        }
        _ => return Err(Error::Usage("--taint and --population go together".into())),
    };
    if reps == 0 {
        return Err(Error::Usage("--reps must be positive".into()));
    }

    let (closed, estimate, se) = if t > big_n {
        (0.0, 0.0, 0.0)
    } else {
        let closed = mro_core::p_value(t, big_n, sampling)?;
        let (estimate, se) = monte_carlo_pvalue(t, big_n, sampling, reps, seed)?;
        (closed, estimate, se)
    };
    let z = if se > 0.0 {
        (estimate - closed) / se
    } else {
        0.0
    };
    let agrees = (estimate - closed).abs() <= 3.0 * se || estimate == closed;
    let _ = writeln!(
        err,
        "closed form {closed:.6} ({}), simulated {estimate:.6} ± {se:.6} over {reps} runs: {}",
        percent(closed),
        if agrees {
            "agree within 3 SE"
        } else {
            "DISAGREE"
        }
    );
    Ok(json!({
        "taint_count": t,
        "population_size": big_n,
        "sampling": sampling.label(),
        "draws": sampling.draws(),
        "reps": reps,
        "seed": seed,
        "p_value": closed,
        "estimate": estimate,
        "standard_error": se,
        "z": z,
        "agrees": agrees,
    }))
}

/// Runs the library and the brute-force oracles side by side on `instances`
/// synthetic elections, alternating planted reversals with clean tallies.
fn oracle_checks(instances: usize, seed: u64, err: &mut dyn Write) -> Result<Value> {
    let one = Rational::from_integer(1.into());
    let (mut precincts, mut taints, mut reversals) = (0usize, 0usize, 0usize);
    for i in 0..instances {
        let s = seed.wrapping_add(i as u64);
        let candidates = 2 + i % 5;
        let spec = InstanceSpec {
            precincts: 1 + (i * 7) % 12,
            candidates,
            votes_per_voter: 1 + (i / 5) % (candidates - 1).min(2),
            reversal: i % 2 == 1,
        };
        let fail = |what: &str| Error::Verification(format!("{what} ({spec:?}, seed {s})"));
        let inst = gen_instance(spec, s)?;
        let totals = compute_totals(&inst.setup, &inst.returns)?;
        let mut sample = Vec::with_capacity(inst.returns.len());
        for (r, a) in inst.returns.iter().zip(&inst.audits) {
            let d = mro_core::PrecinctDiscrepancy::new(r, a, &totals)?;
            if d.mro != brute_mro(r, a, &totals) {
                return Err(fail("precinct MRO differs from the oracle"));
            }
            if d.mro > d.bound {
                return Err(fail("precinct MRO exceeds its bound"));
            }
            sample.push(d);
            precincts += 1;
        }
        let sum = mro_core::mro_sum(&sample)?;
        if sum.max_pair_sum > sum.total {
            return Err(fail("largest pairwise total exceeds the MRO sum"));
        }
        if spec.reversal {
            if sum.total < one {
                return Err(fail("planted reversal with MRO sum below one"));
            }
            reversals += 1;
        }
        let bounds: Vec<Rational> = sample.iter().map(|d| d.bound.clone()).collect();
        let q = sample[..sample.len().min(2)]
            .iter()
            .map(|d| d.mro.clone())
            .max()
            .unwrap_or_default();
        let q = if q < Rational::default() {
            Rational::default()
        } else {
            q
        };
        for weight in [WeightFunction::Identity, WeightFunction::Taint] {
            if weight == WeightFunction::Taint && bounds.iter().any(|u| *u == Rational::default()) {
                continue;
            }
            if taint_count(&bounds, &q, weight, &one)?
                != brute_taint_count_weighted(&bounds, &q, &one, weight)
            {
                return Err(fail("taint count differs from exhaustive search"));
            }
            taints += 1;
        }
    }
    let _ = writeln!(
        err,
        "oracles agree: {precincts} precinct MROs, {taints} taint counts, {reversals} planted reversals"
    );
    Ok(json!({
        "instances": instances,
        "precincts_checked": precincts,
        "taint_counts_checked": taints,
        "reversals_checked": reversals,
    }))
}
