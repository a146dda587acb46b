//! End-to-end tests that spawn the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stressim"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("spawn stressim")
}

fn run(args: &[&str]) -> Output {
    run_in(Path::new("."), args)
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn budget_boundary_solves_rho_of_one() {
    let out = run(&["budget", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--k", "30"]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("rho = 1"), "missing human line: {text}");

    // Last stdout line is the machine form with the manifest embedded.
    let last = text.lines().last().expect("machine line");
    let machine: serde_json::Value = serde_json::from_str(last).expect("machine line is JSON");
    assert_eq!(machine["budget"]["rho"], 1.0);
    assert_eq!(machine["solved_field"], "rho");
    assert_eq!(machine["manifest"]["subcommand"], "budget");
    assert_eq!(machine["manifest"]["toolkit_version"], env!("CARGO_PKG_VERSION"));
    assert!(machine["validation"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn budget_infeasible_exits_with_the_budget_code() {
    let out = run(&["budget", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--k", "31"]);
    assert_eq!(out.status.code(), Some(5));
    let err = stderr(&out);
    assert!(err.starts_with("error: budget:"), "got: {err}");
    assert_eq!(err.trim_end().lines().count(), 1, "stderr must be one line: {err}");
}

#[test]
fn budget_with_all_five_fields_is_a_usage_error() {
    let out = run(&[
        "budget", "--rho", "1", "--eta", "2.5", "--omega", "12", "--alpha", "1", "--k", "30",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: usage:"));
}

#[test]
fn help_documents_the_exit_codes() {
    let out = run(&["--help"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Exit codes:"), "help must list exit codes");
    assert!(text.contains("5  infeasible or degenerate prompt budget"));
}

#[test]
fn fit_recovers_the_four_point_closed_form() {
    let dir = tempfile::tempdir().expect("tempdir");
    // y(k) = 4 * (1 - 2^-k) exactly.
    let points = "\
k,category,base_efficiency,fatigue_scale,stressors_per_day,n_prompts,n_responses
1.0,ALL,0.5,1.0,2.0,1.0,1.0
2.0,ALL,0.75,1.0,3.0,2.0,2.0
3.0,ALL,0.875,1.0,3.5,3.0,3.0
4.0,ALL,0.9375,1.0,3.75,4.0,4.0
";
    fs::write(dir.path().join("points.csv"), points).expect("write points");
    let out = run_in(
        dir.path(),
        &["fit", "--input", "points.csv", "--out", "report.csv", "--plot-data", "plot.csv"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    // Structured sibling is written alongside the delimited report.
    let json = fs::read_to_string(dir.path().join("report.json")).expect("structured sibling");
    let rows: serde_json::Value = serde_json::from_str(&json).expect("report rows");
    let row = &rows.as_array().expect("array")[0];
    assert_eq!(row["category"], "ALL");
    let s = row["S"].as_f64().expect("S");
    let a = row["a"].as_f64().expect("a");
    assert!((s - 4.0).abs() < 1e-6, "S = {s}");
    assert!((a - std::f64::consts::LN_2).abs() < 1e-4, "a = {a}");

    let text = stdout(&out);
    assert!(text.contains("S = 4.0000"), "stdout: {text}");
    assert!(text.contains("a = 0.6931"), "stdout: {text}");

    // Delimited report keeps the documented column order.
    let csv = fs::read_to_string(dir.path().join("report.csv")).expect("report csv");
    assert!(csv.starts_with("category,S,a,weekly_model,weekly_observed"), "header: {csv}");

    // Plot data pairs the model curve with the simulated points.
    let plot = fs::read_to_string(dir.path().join("plot.csv")).expect("plot data");
    assert_eq!(plot.lines().count(), 1 + 4);
    assert!(plot.lines().next().unwrap().contains("y_model"));

    assert!(dir.path().join("report.manifest.json").exists(), "manifest missing");
}

#[test]
fn fit_missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_in(dir.path(), &["fit", "--input", "absent.csv", "--out", "report.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error: io:"));
}

#[test]
fn simulate_rejects_malformed_rows_as_schema_errors() {
    let dir = tempfile::tempdir().expect("tempdir");
    let events = "\
participant_id,time_of_day_min,likelihood,responded,category
p1,500,1,true,Work
p1,510,2,true,NotACategory
";
    fs::write(dir.path().join("events.csv"), events).expect("write events");
    let out = run_in(dir.path(), &["simulate", "--input", "events.csv", "--out", "points.csv"]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", stderr(&out));
    assert!(stderr(&out).starts_with("error: schema:"));
}

#[test]
fn synth_honors_a_partial_spec_file() {
    let dir = tempfile::tempdir().expect("tempdir");
    fs::write(dir.path().join("spec.json"), r#"{"n_participants": 5, "seed": 7}"#)
        .expect("write spec");
    let out = run_in(
        dir.path(),
        &["synth", "--spec", "spec.json", "--out", "events.csv", "--events-per-participant", "40"],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let events = fs::read_to_string(dir.path().join("events.csv")).expect("events");
    assert_eq!(events.lines().count(), 1 + 5 * 40);

    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("events.manifest.json")).expect("manifest"),
    )
    .expect("manifest JSON");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["config"]["spec"]["n_participants"], 5);
    assert_eq!(manifest["config"]["spec"]["events_per_participant"], 40);
}

#[test]
fn pipeline_reruns_are_byte_identical() {
    let dir = tempfile::tempdir().expect("tempdir");
    let args = |out_dir: &'static str| {
        vec![
            "pipeline",
            "--synth-default",
            "--seed",
            "42",
            "--days",
            "10",
            "--k-values",
            "2,6,12,24",
            "--out-dir",
            out_dir,
        ]
    };
    let first = run_in(dir.path(), &args("run1"));
    assert!(first.status.success(), "stderr: {}", stderr(&first));
    let second = run_in(dir.path(), &args("run2"));
    assert!(second.status.success(), "stderr: {}", stderr(&second));

    for name in ["events.csv", "points.csv", "report.csv", "plot.csv"] {
        let a = fs::read(dir.path().join("run1").join(name)).expect(name);
        let b = fs::read(dir.path().join("run2").join(name)).expect(name);
        assert_eq!(a, b, "{name} differs between reruns");
    }

    // Exactly one manifest per run, and a complete 13-row report.
    for run_dir in ["run1", "run2"] {
        let manifests = fs::read_dir(dir.path().join(run_dir))
            .expect("read dir")
            .filter(|e| {
                e.as_ref()
                    .unwrap()
                    .file_name()
                    .to_string_lossy()
                    .ends_with(".manifest.json")
            })
            .count();
        assert_eq!(manifests, 1, "{run_dir} must hold exactly one manifest");
    }
    let report = fs::read_to_string(dir.path().join("run1/report.csv")).expect("report");
    assert_eq!(report.lines().count(), 1 + 13, "header plus thirteen scope rows");

    // Stdout (minus the duration-bearing manifest) matches too.
    assert_eq!(stdout(&first), stdout(&second));
}

#[test]
fn pipeline_json_format_emits_structured_tables() {
    let dir = tempfile::tempdir().expect("tempdir");
    let out = run_in(
        dir.path(),
        &[
            "pipeline",
            "--synth-default",
            "--seed",
            "9",
            "--days",
            "6",
            "--k-values",
            "3,9",
            "--format",
            "json",
            "--out-dir",
            "run",
            "--threads",
            "1",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    for name in ["events.json", "points.json", "report.json", "plot.json"] {
        let text = fs::read_to_string(dir.path().join("run").join(name)).expect(name);
        let value: serde_json::Value = serde_json::from_str(&text).expect(name);
        assert!(value.is_array(), "{name} must be a JSON array");
    }
    let manifest: serde_json::Value = serde_json::from_str(
        &fs::read_to_string(dir.path().join("run/pipeline.manifest.json")).expect("manifest"),
    )
    .expect("manifest JSON");
    assert_eq!(manifest["subcommand"], "pipeline");
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["config"]["simulation"]["days_per_participant"], 6);
    assert_eq!(manifest["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn report_attaches_observed_extrapolations() {
    let dir = tempfile::tempdir().expect("tempdir");
    let points = "\
k,category,base_efficiency,fatigue_scale,stressors_per_day,n_prompts,n_responses
1.0,ALL,0.5,1.0,2.0,1.0,1.0
2.0,ALL,0.75,1.0,3.0,2.0,2.0
3.0,ALL,0.875,1.0,3.5,3.0,3.0
4.0,ALL,0.9375,1.0,3.75,4.0,4.0
";
    fs::write(dir.path().join("points.csv"), points).expect("write points");
    fs::write(dir.path().join("observed.csv"), "category,observed_per_day\nALL,1.62\n")
        .expect("write observed");
    let out = run_in(
        dir.path(),
        &[
            "report",
            "--input",
            "points.csv",
            "--observed",
            "observed.csv",
            "--wear-hours",
            "7.2",
            "--out",
            "report.csv",
        ],
    );
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let json = fs::read_to_string(dir.path().join("report.json")).expect("structured sibling");
    let rows: serde_json::Value = serde_json::from_str(&json).expect("rows");
    let observed = rows[0]["weekly_observed"].as_f64().expect("weekly_observed");
    // 1.62/day over 7.2 wear hours scales to 18.9/week over 12 waking hours.
    assert!((observed - 18.9).abs() < 1e-12, "weekly_observed = {observed}");
}
