//! Writes the synthetic statewide fixture used by the tests:
//!
//! * `minnesota_returns.csv`: 4,123 precincts in 87 counties whose column
//!   totals match the 2006 Minnesota U.S. Senate statewide returns exactly,
//!   shaped so that the largest a priori bound is 0.0097 and an error-free
//!   sample leaves exactly 166 precincts to taint;
//! * `minnesota_counties.csv`: registration figures giving one county of 211
//!   precincts that needs 4 audits (conservative n = 78) and 202 audits in all;
//! * `minnesota_audits.csv`: the 202 precincts drawn with seed 2006, hand
//!   counts equal to machine counts.
//!
//! Usage: `cargo run --example make_minnesota_fixture -- OUT_DIR`

use std::fmt::Write as _;
use std::path::PathBuf;

use mro_core::{draw_sample, CountyPlan};

const CANDIDATES: [&str; 6] = [
    "Fitzgerald",
    "Kennedy",
    "Klobuchar",
    "Cavlan",
    "Powers",
    "WriteIns",
];
// Candidate totals, then undervotes.
const TOTALS: [u64; 7] = [71_194, 835_653, 1_278_849, 10_714, 5_408, 901, 15_099];
const KLOBUCHAR: usize = 2;
const KENNEDY: usize = 1;
const MARGIN: u64 = 1_278_849 - 835_653;

const PRECINCTS: usize = 4_123;
const HEAVY: usize = 166;
const SEED: u64 = 2006;

/// Klobuchar-heavy precinct of `b` ballots: 80/12/3/2/1/0 percent, rest blank.
fn heavy(b: u64) -> [u64; 7] {
    let mut row = [
        3 * b / 100,
        12 * b / 100,
        80 * b / 100,
        2 * b / 100,
        b / 100,
        0,
        0,
    ];
    row[6] = b - row.iter().sum::<u64>();
    row
}

fn numerator(row: &[u64; 7]) -> u64 {
    row[KLOBUCHAR] - row[KENNEDY] + row.iter().sum::<u64>()
}

/// The heavy precincts: one of 2,559 ballots (u = 4299/443196), the rest
/// declining slowly from `base`.
fn heavy_rows(base: u64) -> Vec<[u64; 7]> {
    let mut rows = vec![heavy(2_559)];
    rows.extend((1..HEAVY as u64).map(|i| heavy(base - 2 * i)));
    rows
}

fn calibrated() -> Vec<[u64; 7]> {
    for base in (1_000..2_500).rev() {
        let rows = heavy_rows(base);
        let mut n: Vec<u64> = rows.iter().map(numerator).collect();
        n.sort_unstable_by(|a, b| b.cmp(a));
        let before: u64 = n[..HEAVY - 1].iter().sum();
        let through: u64 = before + n[HEAVY - 1];
        if before < MARGIN && through >= MARGIN {
            return rows;
        }
    }
    panic!("no calibration found");
}

/// Splits `total` over `weights` so the parts sum exactly to `total`.
fn apportion(total: u64, weights: &[u64]) -> Vec<u64> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    let mut cum = 0u128;
    let mut prev = 0u64;
    weights
        .iter()
        .map(|&w| {
            cum += w as u128;
            let next = (cum * total as u128 / sum) as u64;
            let part = next - prev;
            prev = next;
            part
        })
        .collect()
}

fn main() {
    let out: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| ".".into());

    let mut rows = calibrated();
    let mut rest = TOTALS;
    for row in &rows {
        for (r, v) in rest.iter_mut().zip(row) {
            *r -= v;
        }
    }
    let light = PRECINCTS - HEAVY;
    let sizes: Vec<u64> = (0..light as u64)
        .map(|j| 200 + (j * 7_919 + 13) % 681)
        .collect();
    let ballots = apportion(rest.iter().sum(), &sizes);
    let mut columns: Vec<Vec<u64>> = (0..7)
        .filter(|&c| c != KLOBUCHAR)
        .map(|c| apportion(rest[c], &ballots))
        .collect();
    columns.insert(KLOBUCHAR, vec![0; light]);
    for (j, &b) in ballots.iter().enumerate() {
        let mut row = [0u64; 7];
        for c in 0..7 {
            row[c] = columns[c][j];
        }
        row[KLOBUCHAR] = b - row.iter().sum::<u64>();
        rows.push(row);
    }

    // Counties: one large county of 211 precincts, 26 mid-sized counties that
    // need 3 audits and 60 small ones that need 2.
    let mut county_sizes = vec![211usize];
    county_sizes.extend(std::iter::repeat_n(70, 26));
    let small = PRECINCTS - county_sizes.iter().sum::<usize>();
    county_sizes.extend((0..60).map(|i| small / 60 + usize::from(i < small % 60)));
    let registered = |c: usize| -> u64 {
        match c {
            0 => 812_000,
            1..=26 => 50_000 + 1_700 * c as u64,
            _ => 8_000 + 400 * c as u64,
        }
    };

    // Spread the heavy precincts over the counties with a fixed stride.
    let order: Vec<usize> = (0..PRECINCTS).map(|i| i * 1_237 % PRECINCTS).collect();
    let mut returns_csv = String::from("precinct_id,county_id,ballot_bound");
    for c in CANDIDATES {
        write!(returns_csv, ",{c}").unwrap();
    }
    returns_csv.push('\n');
    let mut counties_csv =
        String::from("county_id,registered_voters,required_samples,large_precinct_rule\n");
    let mut plans = Vec::new();
    let mut returns = Vec::new();
    let mut next = 0;
    for (c, &size) in county_sizes.iter().enumerate() {
        let county = format!("C{:02}", c + 1);
        let mut ids = Vec::with_capacity(size);
        for _ in 0..size {
            let row = &rows[order[next]];
            next += 1;
            let id = format!("P{next:04}");
            let b: u64 = row.iter().sum();
            write!(returns_csv, "{id},{county},{b}").unwrap();
            for v in &row[..6] {
                write!(returns_csv, ",{v}").unwrap();
            }
            returns_csv.push('\n');
            returns.push(mro_core::PrecinctReturns::new(
                id.clone(),
                county.clone(),
                row[..6].to_vec(),
                b,
            ));
            ids.push(id);
        }
        writeln!(counties_csv, "{county},{},,true", registered(c)).unwrap();
        plans.push(CountyPlan::new(county, registered(c), ids, None, true).expect("valid plan"));
    }

    let sample = draw_sample(&plans, &returns, SEED).expect("drawable sample");
    let by_id: std::collections::HashMap<&str, &mro_core::PrecinctReturns> = returns
        .iter()
        .map(|r| (r.precinct_id.as_str(), r))
        .collect();
    let mut audits_csv = String::from("precinct_id");
    for c in CANDIDATES {
        write!(audits_csv, ",{c}").unwrap();
    }
    audits_csv.push('\n');
    for id in &sample {
        write!(audits_csv, "{id}").unwrap();
        for v in &by_id[id.as_str()].machine_votes {
            write!(audits_csv, ",{v}").unwrap();
        }
        audits_csv.push('\n');
    }

    std::fs::create_dir_all(&out).expect("output directory");
    std::fs::write(out.join("minnesota_returns.csv"), returns_csv).expect("write returns");
    std::fs::write(out.join("minnesota_counties.csv"), counties_csv).expect("write counties");
    std::fs::write(out.join("minnesota_audits.csv"), audits_csv).expect("write audits");
    eprintln!(
        "{} precincts, {} counties, {} audited",
        returns.len(),
        plans.len(),
        sample.len()
    );
}
