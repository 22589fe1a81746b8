use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

fn mro(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mro-audit"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn margins_on_statewide_totals() {
    let out = mro(&["margins", &fx("minnesota_aggregate.csv")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = stdout_json(&out);
    let margins: Vec<u64> = doc["margins"]
        .as_array()
        .unwrap()
        .iter()
        .map(|m| m["margin"].as_u64().unwrap())
        .collect();
    assert_eq!(
        margins,
        [1_207_655, 443_196, 1_268_135, 1_273_441, 1_277_948]
    );
    assert_eq!(doc["ballots"], 2_217_818);
    assert_eq!(doc["winners"], serde_json::json!(["Klobuchar"]));

    let out = mro(&[
        "margins",
        &fx("minnesota_aggregate.csv"),
        "--pool",
        "Cavlan,Powers,WriteIns",
    ]);
    let doc = stdout_json(&out);
    let pooled = doc["margins"]
        .as_array()
        .unwrap()
        .iter()
        .find(|m| m["loser"] == "Pooled")
        .unwrap()["margin"]
        .as_u64();
    assert_eq!(pooled, Some(1_261_826));
    assert_eq!(doc["candidates"].as_array().unwrap().len(), 4);
}

#[test]
fn tied_contest_is_a_validation_error() {
    let out = mro(&["margins", &fx("tied.csv")]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("ambiguous outcome"),
        "{}",
        stderr(&out)
    );
    assert!(out.stdout.is_empty());
}

#[test]
fn pvalue_with_pooling_and_78_draws() {
    let out = mro(&[
        "pvalue",
        &fx("minnesota_returns.csv"),
        "--audits",
        &fx("minnesota_audits.csv"),
        "--pool",
        "Cavlan,Powers,WriteIns",
        "--sampling",
        "wr:78",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("p = 0.0405 (4.05%)"),
        "{}",
        stderr(&out)
    );
    let risk = stdout_json(&out);
    assert_eq!(risk["taint_count"], 166);
    assert_eq!(risk["draws"], 78);
    assert_eq!(risk["p_value_display"], "4.05%");
}

#[test]
fn pvalue_with_202_draws() {
    let out = mro(&[
        "pvalue",
        &fx("minnesota_returns.csv"),
        "--audits",
        &fx("minnesota_audits.csv"),
        "--sampling",
        "wr:202",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(
        stderr(&out).contains("p = 0.0002 (0.02%)"),
        "{}",
        stderr(&out)
    );
    let p = stdout_json(&out)["p_value"].as_f64().unwrap();
    assert!((1e-4..=4e-4).contains(&p), "{p}");
}

#[test]
fn sample_size_from_county_plan() {
    let out = mro(&[
        "pvalue",
        &fx("minnesota_returns.csv"),
        "--audits",
        &fx("minnesota_audits.csv"),
        "--counties",
        &fx("minnesota_counties.csv"),
        "--sampling",
        "wr",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["draws"], 78);

    let plan = |seed: &str| {
        mro(&[
            "plan",
            &fx("minnesota_returns.csv"),
            "--counties",
            &fx("minnesota_counties.csv"),
            "--seed",
            seed,
        ])
    };
    let a = plan("2006");
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, plan("2006").stdout);
    assert_ne!(a.stdout, plan("2007").stdout);
    let doc = stdout_json(&a);
    assert_eq!(doc["sample_size"], 202);
    assert_eq!(doc["effective_n"], 78);

    // The audit fixture is exactly the seed-2006 sample.
    let audited: Vec<String> = std::fs::read_to_string(fixture("minnesota_audits.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().to_string())
        .collect();
    let drawn: Vec<String> = doc["sample"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_str().unwrap().to_string())
        .collect();
    assert_eq!(audited, drawn);
}

#[test]
fn bounds_table() {
    let out = mro(&["bounds", &fx("minnesota_returns.csv")]);
    assert_eq!(out.status.code(), Some(0));
    let doc = stdout_json(&out);
    assert_eq!(doc["precincts"].as_array().unwrap().len(), 4_123);
    assert_eq!(doc["max_bound"]["exact"], "1433/147732"); // 4299/443196
    assert_eq!(doc["taint_count_error_free"], 166);
    assert!(stderr(&out).contains("max u_p = 0.0097"));
}

#[test]
fn usage_errors_exit_2() {
    for args in [
        vec!["frobnicate"],
        vec!["margins", "--bogus", "x.csv"],
        vec!["margins"],
        vec!["pvalue", "x.csv", "--audits", "a.csv", "--weight", "square"],
        vec![
            "pvalue",
            "x.csv",
            "--audits",
            "a.csv",
            "--sampling",
            "bernoulli:5",
        ],
        vec![
            "pvalue",
            "x.csv",
            "--audits",
            "a.csv",
            "--sampling",
            "wr:many",
        ],
        vec!["simulate", "--taint", "3"],
    ] {
        let out = mro(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
    let out = mro(&[
        "pvalue",
        &fx("sample_returns.csv"),
        "--audits",
        &fx("sample_audits.csv"),
        "--sampling",
        "wr:2",
        "--effective-n",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("--effective-n"));
    let out = mro(&["plan", &fx("sample_returns.csv"), "--seed", "1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_and_version_exit_0() {
    assert_eq!(mro(&["--help"]).status.code(), Some(0));
    let out = mro(&["--version"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains(env!("CARGO_PKG_VERSION")));
}

#[test]
fn bad_inputs_exit_1_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let returns = dir.path().join("r.csv");
    std::fs::write(
        &returns,
        "precinct_id,county_id,ballot_bound,A,B\nP1,X,10,5,2\nP2,X,10,11,0\n",
    )
    .unwrap();
    let out = mro(&["margins", returns.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let msg = stderr(&out);
    assert!(msg.contains("r.csv:3") && msg.contains("`A`"), "{msg}");

    let out = mro(&["margins", dir.path().join("missing.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));

    let audits = dir.path().join("a.csv");
    std::fs::write(
        &audits,
        "precinct_id,Alice,Bob,Carol\nP2,90,80,20\nP9,1,1,1\n",
    )
    .unwrap();
    let out = mro(&[
        "report",
        &fx("sample_returns.csv"),
        "--audits",
        audits.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains("a.csv:3: unknown precinct `P9`"),
        "{}",
        stderr(&out)
    );

    let out = mro(&[
        "pvalue",
        &fx("sample_returns.csv"),
        "--audits",
        &fx("sample_audits.csv"),
        "--sampling",
        "wr:3",
    ]);
    assert_eq!(out.status.code(), Some(1), "{}", stderr(&out));

    let out = mro(&[
        "margins",
        &fx("sample_returns.csv"),
        "--pool",
        "Alice,Carol",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("apparent winner"));
}

#[test]
fn report_round_trip_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = mro(&[
        "report",
        &fx("sample_returns.csv"),
        "--audits",
        &fx("sample_audits.csv"),
        "--sampling",
        "srs",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert!(out.stdout.is_empty());

    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(doc["schema"], "mro-audit/1");
    let bytes = std::fs::read(fixture("sample_returns.csv")).unwrap();
    assert_eq!(
        doc["inputs"][0]["sha256"],
        hex::encode(Sha256::digest(&bytes))
    );
    assert_eq!(doc["risk"]["sampling"], "simple_random_sample");
    assert_eq!(doc["risk"]["draws"], 2);
    assert_eq!(doc["risk"]["observed_statistic"]["exact"], "3/80");

    let out = mro(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["verified"], true);

    let text = std::fs::read_to_string(&path)
        .unwrap()
        .replace("\"taint_count\": ", "\"taint_count\": 1");
    std::fs::write(&path, text).unwrap();
    let out = mro(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("verification failed"));
}

#[test]
fn config_file_supplies_defaults_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("audit.toml");
    std::fs::write(
        &config,
        format!(
            "returns = {:?}\naudits = {:?}\npool = \"Cavlan,Powers,WriteIns\"\nsampling = \"wr:78\"\n",
            fx("minnesota_returns.csv"),
            fx("minnesota_audits.csv")
        ),
    )
    .unwrap();
    let cfg = config.to_str().unwrap();
    let out = mro(&["--config", cfg, "pvalue"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["p_value_display"], "4.05%");

    let out = mro(&["pvalue", "--config", cfg, "--sampling", "wr:202"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(stdout_json(&out)["p_value_display"], "0.02%");

    std::fs::write(&config, "sampling = 78\n").unwrap();
    assert_eq!(mro(&["--config", cfg, "pvalue"]).status.code(), Some(2));
}

#[test]
fn simulate_agrees_with_closed_form() {
    let out = mro(&[
        "simulate",
        "--taint",
        "4",
        "--population",
        "10",
        "--sampling",
        "srs:3",
        "--reps",
        "50000",
        "--seed",
        "9",
        "--verify",
        "--instances",
        "40",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let doc = stdout_json(&out);
    assert_eq!(doc["agrees"], true);
    assert!((doc["p_value"].as_f64().unwrap() - 1.0 / 6.0).abs() < 1e-12);
    assert_eq!(doc["oracle"]["instances"], 40);

    let out = mro(&[
        "simulate",
        &fx("sample_returns.csv"),
        "--audits",
        &fx("sample_audits.csv"),
        "--reps",
        "2000",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
}
