use std::path::Path;
use std::process::{Command, Output};

fn otlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_otlab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn code_of(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn plan_round_trips_through_simulate() {
    let out = otlab(&["plan", "--p", "0.2", "--q", "0.2", "--eps", "0", "--k", "5"]);
    assert_eq!(code_of(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert!(v["leaf_count"].as_u64().unwrap() <= 386);
    assert_eq!(v["theorem"], "zero_error_squaring");

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    std::fs::write(&path, stdout_of(&out)).unwrap();
    let out = otlab(&[
        "simulate",
        "--plan",
        path.to_str().unwrap(),
        "--source",
        "event:0.2,0.2,0",
    ]);
    assert_eq!(code_of(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["ok"], true);
}

#[test]
fn impossible_triple_exits_two() {
    let out = otlab(&["plan", "--p", "0.5", "--q", "0.5", "--eps", "0"]);
    assert_eq!(code_of(&out), 2);
    assert!(stdout_of(&out).contains("impossible"));
}

#[test]
fn outside_region_exits_two_with_distinct_reason() {
    let out = otlab(&["plan", "--p", "0.25", "--q", "0.25", "--eps", "0.2"]);
    assert_eq!(code_of(&out), 2);
    assert!(stdout_of(&out).contains("outside-known-region"));
}

#[test]
fn perfect_input_gets_identity_plan() {
    let out = otlab(&["plan", "--p", "0", "--q", "0", "--eps", "0", "--k", "3"]);
    assert_eq!(code_of(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["theorem"], "identity");
    assert_eq!(v["tree"].as_array().unwrap().len(), 0);
}

#[test]
fn dyadic_literals_are_exact() {
    let out = otlab(&["plan", "--p", "1/2^2", "--q", "1/2^2", "--eps", "0", "--k", "3"]);
    assert_eq!(code_of(&out), 0);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(v["input"]["p"], 0.25);
}

#[test]
fn bad_probability_is_a_usage_error() {
    for bad in ["1.5", "abc", "-0.1", "3/2^1"] {
        let out = otlab(&["plan", "--p", bad, "--q", "0.1", "--eps", "0"]);
        assert_eq!(code_of(&out), 1, "input {bad:?}");
    }
}

#[test]
fn monte_carlo_requires_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let out = otlab(&["plan", "--p", "0.1", "--q", "0.1", "--eps", "0", "--k", "2"]);
    std::fs::write(&path, stdout_of(&out)).unwrap();
    let out = otlab(&[
        "simulate",
        "--plan",
        path.to_str().unwrap(),
        "--source",
        "event:0.1,0.1,0",
        "--mode",
        "monte-carlo",
    ]);
    assert_eq!(code_of(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn jobs_do_not_change_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let out = otlab(&["plan", "--p", "0.2", "--q", "0.2", "--eps", "0", "--k", "2"]);
    std::fs::write(&path, stdout_of(&out)).unwrap();
    let run = |jobs: &str| {
        otlab(&[
            "simulate",
            "--plan",
            path.to_str().unwrap(),
            "--source",
            "erasure:0.2,0.2",
            "--mode",
            "monte-carlo",
            "--trials",
            "400",
            "--seed",
            "21",
            "--jobs",
            jobs,
        ])
    };
    let one = run("1");
    let four = run("4");
    assert_eq!(one.stdout, four.stdout);
    assert_eq!(code_of(&one), code_of(&four));
}

#[test]
fn transcript_dump_parses_line_by_line() {
    let dir = tempfile::tempdir().unwrap();
    let plan_path = dir.path().join("plan.json");
    let dump_path = dir.path().join("transcript.txt");
    let out = otlab(&["plan", "--p", "0.05", "--q", "0.03", "--eps", "0.02", "--k", "4"]);
    assert_eq!(code_of(&out), 0);
    std::fs::write(&plan_path, stdout_of(&out)).unwrap();
    let out = otlab(&[
        "simulate",
        "--plan",
        plan_path.to_str().unwrap(),
        "--source",
        "event:0.05,0.03,0.02",
        "--mode",
        "monte-carlo",
        "--trials",
        "64",
        "--seed",
        "3",
        "--dump-transcript",
        dump_path.to_str().unwrap(),
    ]);
    assert_eq!(code_of(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&dump_path).unwrap();
    assert!(!text.is_empty());
    let lines = otlab::engine::parse_transcript(&text).unwrap();
    assert!(!lines.is_empty());
}

#[test]
fn region_grid_has_full_shape() {
    let out = otlab(&["region", "--resolution", "64", "--rounds", "2"]);
    assert_eq!(code_of(&out), 0);
    let text = stdout_of(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("p,q,l_value"));
    assert_eq!(lines.count(), 65 * 65);
}

#[test]
fn region_checkpoints_hold_by_default_resolution() {
    let out = otlab(&["region", "--resolution", "64", "--assert-paper", "--output", "text"]);
    assert_eq!(code_of(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("ok=true"));
}

#[test]
fn verify_suite_reports_zero_failures() {
    let out = otlab(&["verify", "prob-oracles", "--seed", "3"]);
    assert_eq!(code_of(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout_of(&out).contains("0 failures"));
}

#[test]
fn text_mode_renders_the_same_plan() {
    let json = otlab(&["plan", "--p", "0.2", "--q", "0.2", "--eps", "0", "--k", "4"]);
    let text = otlab(&[
        "plan", "--p", "0.2", "--q", "0.2", "--eps", "0", "--k", "4", "--output", "text",
    ]);
    let v: serde_json::Value = serde_json::from_str(&stdout_of(&json)).unwrap();
    let rendered = stdout_of(&text);
    assert!(rendered.contains(&format!("theorem: {}", v["theorem"].as_str().unwrap())));
    assert!(rendered.contains(&format!("leaves: {}", v["leaf_count"])));
}

#[test]
fn identical_invocations_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let out = otlab(&["plan", "--p", "0.05", "--q", "0.03", "--eps", "0.02", "--k", "3"]);
    assert_eq!(code_of(&out), 0);
    std::fs::write(&path, stdout_of(&out)).unwrap();
    let args: Vec<Vec<&str>> = vec![
        vec!["plan", "--p", "0.11", "--q", "0.07", "--eps", "0.01", "--k", "6"],
        vec![
            "simulate",
            "--plan",
            path.to_str().unwrap(),
            "--source",
            "event:0.05,0.03,0.02",
            "--mode",
            "monte-carlo",
            "--trials",
            "300",
            "--seed",
            "77",
        ],
        vec!["verify", "uot-theorem", "--seed", "5", "--output", "csv"],
    ];
    for argv in args {
        let first = otlab(&argv);
        for _ in 0..2 {
            let again = otlab(&argv);
            assert_eq!(first.stdout, again.stdout, "args {argv:?}");
            assert_eq!(code_of(&first), code_of(&again));
        }
    }
}

#[test]
fn missing_plan_file_is_a_usage_error() {
    let out = otlab(&[
        "simulate",
        "--plan",
        Path::new("/nonexistent/plan.json").to_str().unwrap(),
        "--source",
        "event:0.1,0.1,0",
    ]);
    assert_eq!(code_of(&out), 1);
}

#[test]
fn unknown_source_kind_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plan.json");
    let out = otlab(&["plan", "--p", "0", "--q", "0", "--eps", "0", "--k", "1"]);
    std::fs::write(&path, stdout_of(&out)).unwrap();
    let out = otlab(&[
        "simulate",
        "--plan",
        path.to_str().unwrap(),
        "--source",
        "gaussian:0.1",
    ]);
    assert_eq!(code_of(&out), 1);
}
