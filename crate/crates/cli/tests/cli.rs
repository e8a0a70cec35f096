//! End-to-end tests of the `parisian` binary: output contracts, exit codes,
//! configuration merging, and numerical spot checks against closed forms.

use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_parisian"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

/// Parses a CSV body (header + rows) into per-row string fields.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn f(field: &str) -> f64 {
    field.parse().expect("numeric field")
}

#[test]
fn prob_matches_the_single_claim_closed_form() {
    // 1. p(1) has the closed form lambda/(lambda+mu c) e^{-lambda d - mu(u + c d)}
    for &u in &[0.0f64, 10.0] {
        let out = run(&["prob", "--u", &u.to_string(), "--n-max", "1"]);
        assert!(out.status.success());
        let rows = csv_rows(&stdout(&out));
        assert_eq!(rows.len(), 1);
        let closed = 1.0 / 3.0 * (-2.0 - (u + 4.0)).exp();
        let got = f(&rows[0][2]);
        assert!(
            ((got - closed) / closed).abs() < 1e-6,
            "u={u}: got {got}, closed {closed}"
        );
    }
}

#[test]
fn invalid_arguments_are_configuration_errors() {
    // 1. out-of-range solver parameter
    let out = run(&["prob", "--n-max", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(
        err.contains("n_max"),
        "diagnostic names the parameter: {err}"
    );

    // 2. unknown flag
    let out = run(&["prob", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(1));

    // 3. contradictory density flags
    let out = run(&["density", "--cumulative", "--deficit", "0.5"]);
    assert_eq!(out.status.code(), Some(1));

    // 4. help is not an error
    let out = run(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn density_rows_start_after_the_window_and_match_the_one_claim_law() {
    let out = run(&[
        "density",
        "--mode",
        "paper-faithful",
        "--n-max",
        "1",
        "--t-max",
        "5",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert!(!rows.is_empty());
    for row in &rows {
        let (t, v) = (f(&row[1]), f(&row[2]));
        // 1. the grid starts strictly past the window end d = 2
        assert!(t > 2.0, "node {t} inside the window");
        // 2. one claim from level zero: w(1, t) = lambda e^{-(lambda + mu c) t},
        //    exact up to the nine-significant-digit serialization (5e-9 rel)
        let closed = (-3.0 * t).exp();
        assert!(
            (v - closed).abs() < 5e-9 * closed.max(1e-30),
            "t={t}: got {v}, closed {closed}"
        );
    }
}

#[test]
fn cumulative_output_reproduces_the_coarse_reference_value() {
    // psi(1, 3) on the coarse profile at u = 0, c = 1.2
    let out = run(&[
        "density",
        "--cumulative",
        "--mode",
        "paper-faithful",
        "--c",
        "1.2",
        "--n-max",
        "1",
        "--t-max",
        "3",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    let last = rows.last().expect("rows");
    assert_eq!(f(&last[1]), 3.0);
    assert!((f(&last[2]) - 0.0044364).abs() < 5e-8);
}

#[test]
fn coarse_cumulative_equals_step_times_density_sum() {
    // The coarse profile integrates by right rectangles, so the cumulative
    // at the last node must equal step * sum of the density rows. Round-trip
    // through the serialized CSV keeps the identity to parsing precision.
    let common = [
        "--mode",
        "paper-faithful",
        "--c",
        "1.2",
        "--n-max",
        "2",
        "--t-max",
        "5",
    ];
    let dens = run(&[&["density"], &common[..]].concat());
    let cum = run(&[&["density", "--cumulative"], &common[..]].concat());
    assert!(dens.status.success() && cum.status.success());
    let dens_rows = csv_rows(&stdout(&dens));
    let cum_rows = csv_rows(&stdout(&cum));
    for n in 1..=2 {
        let tag = n.to_string();
        let total: f64 = dens_rows
            .iter()
            .filter(|r| r[0] == tag)
            .map(|r| f(&r[2]))
            .sum();
        let last = cum_rows.iter().rfind(|r| r[0] == tag).unwrap();
        assert_eq!(f(&last[1]), 5.0);
        assert!(
            (0.1 * total - f(&last[2])).abs() < 1e-9,
            "n={n}: sum {total}, cumulative {}",
            f(&last[2])
        );
    }
}

#[test]
fn simulation_is_deterministic_for_a_fixed_seed() {
    let args = ["simulate", "--paths", "5000", "--seed", "42", "--u", "0.5"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout, "same seed must give identical bytes");
}

#[test]
fn zero_window_simulation_recovers_classical_ruin() {
    // With d = 0 Parisian ruin degenerates to classical ruin, whose
    // probability is (lambda / (c mu)) e^{-(mu - lambda/c) u}.
    let out = run(&[
        "simulate", "--d", "0", "--u", "0.25", "--paths", "200000", "--seed", "5",
    ]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    let ruin = rows.iter().find(|r| r[0] == "ruin").expect("ruin row");
    let (est, se) = (f(&ruin[2]), f(&ruin[3]));
    let closed = 0.5 * (-0.5 * 0.25f64).exp();
    assert!(
        (est - closed).abs() < 3.0 * se,
        "estimate {est} +- {se} vs {closed}"
    );
}

#[test]
fn passage_atom_is_exact_and_masses_nearly_sum_to_one() {
    let out = run(&["passage", "--level", "1", "--k-max", "40"]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 41);
    // 1. the zero-claim mass is the atom e^{-lambda y / c}
    let atom = f(&rows[0][1]);
    let want = (-0.5f64).exp();
    assert!(((atom - want) / want).abs() < 1e-9);
    // 2. the first forty claim counts carry almost all the mass
    let total: f64 = rows.iter().map(|r| f(&r[1])).sum();
    assert!(total > 0.999 && total <= 1.0 + 1e-9, "sum {total}");
}

#[test]
fn config_file_merges_under_flags() {
    let path: PathBuf =
        std::env::temp_dir().join(format!("parisian-cli-{}.toml", std::process::id()));
    std::fs::write(
        &path,
        "[model]\nu = 1.0\n\n[solver]\nn_max = 2\n\n[output]\nformat = \"csv\"\n",
    )
    .unwrap();
    let cfg = path.to_str().unwrap();

    // 1. file values apply: u = 1 separates the two probability columns
    let out = run(&["prob", "--config", cfg]);
    assert!(out.status.success());
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows.len(), 2);
    assert!(f(&rows[0][2]) < f(&rows[0][1]));

    // 2. a flag overrides the file: u = 0 collapses them again
    let out = run(&["prob", "--config", cfg, "--u", "0"]);
    let rows = csv_rows(&stdout(&out));
    assert_eq!(rows[0][1], rows[0][2]);

    // 3. unknown keys are rejected with a configuration error
    std::fs::write(&path, "[solver]\nbogus = 1\n").unwrap();
    let out = run(&["prob", "--config", cfg]);
    assert_eq!(out.status.code(), Some(1));

    std::fs::remove_file(&path).ok();
}

#[test]
fn output_flag_writes_the_file() {
    let path: PathBuf =
        std::env::temp_dir().join(format!("parisian-cli-{}.csv", std::process::id()));
    let out = run(&["prob", "--n-max", "2", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("n,p0d,pud\n"));
    assert_eq!(text.lines().count(), 3);
    std::fs::remove_file(&path).ok();
}

#[test]
fn json_output_is_well_formed() {
    let out = run(&["prob", "--format", "json", "--n-max", "3"]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["n_max"], 3);
    assert_eq!(doc["p0d"].as_array().unwrap().len(), 3);

    let out = run(&[
        "density",
        "--format",
        "json",
        "--mode",
        "paper-faithful",
        "--n-max",
        "1",
        "--t-max",
        "3",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(doc["kind"], "density");
    assert_eq!(doc["orders"][0]["n"], 1);
}

#[test]
fn validation_suite_passes_by_default_and_fails_at_zero_tolerance() {
    // 1. the stock gates all pass
    let out = run(&["validate"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.contains("9 of 9 checks passed"), "{text}");
    assert!(!text.contains("[FAIL]"));

    // 2. scaling every gate to zero must fail every check and exit 3
    let out = run(&["validate", "--tolerance-scale", "0"]);
    assert_eq!(out.status.code(), Some(3));
    let text = stdout(&out);
    assert!(text.contains("0 of 9 checks passed"), "{text}");
    assert!(text.contains("[FAIL]"));
}
