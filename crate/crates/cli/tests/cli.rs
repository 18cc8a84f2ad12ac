use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EX1: &str = r#"{"family":"power_weighted","alpha":0.5}"#;
const EX2: &str = r#"{"family":"power_weighted","alpha":0.5,"transform":{"kind":"log_plus","offset":5}}"#;
const EX3: &str = r#"{"family":"additive_separable_power","alpha":2,"beta":2}"#;

struct Sandbox {
    dir: TempDir,
}

impl Sandbox {
    fn new() -> Self {
        let dir = TempDir::new().unwrap();
        for (name, text) in [("ex1.json", EX1), ("ex2.json", EX2), ("ex3.json", EX3)] {
            std::fs::write(dir.path().join(name), text).unwrap();
        }
        Self { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_cv-kit")).current_dir(self.dir.path()).args(args).output().unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert_eq!(code(o), 0, "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&doc).unwrap()
}

fn assert_valid(name: &str, doc: &Value) {
    let v = schema(name);
    let errors: Vec<String> = v.iter_errors(doc).map(|e| format!("{e} at {}", e.instance_path)).collect();
    assert!(errors.is_empty(), "{name} schema: {errors:#?}");
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * b.abs().max(1.0)
}

#[test]
fn eval_reproduces_example_demand() {
    let s = Sandbox::new();
    let doc = json(&s.run(&["eval", "--spec", "ex1.json", "--p", "1,2", "--m", "12", "--z1", "1,4"]));
    let d: Vec<f64> = serde_json::from_value(doc["ump"]["demand"].clone()).unwrap();
    assert!(close(d[0], 4.0 / 3.0, 1e-5) && close(d[1], 16.0 / 3.0, 1e-5), "{d:?}");
    assert!(doc["max_rel_gap"].as_f64().unwrap() < 1e-5);
    assert_valid("eval", &doc);
}

#[test]
fn eval_csv_has_twelve_significant_digits() {
    let s = Sandbox::new();
    let o = s.run(&["eval", "--spec", "ex1.json", "--p", "1,2", "--m", "12", "--z1", "1,4", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("quantity,numerical,closed_form"));
    let demand1 = lines.next().unwrap();
    assert!(demand1.starts_with("demand_1,1.3333333333"), "{demand1}");
    assert!(demand1.ends_with(",1.33333333333"), "{demand1}");
}

#[test]
fn usage_errors_exit_two() {
    let s = Sandbox::new();
    let cases: &[&[&str]] = &[
        &["eval", "--spec", "missing.json", "--p", "1,2", "--m", "12", "--z1", "1,4"],
        &["eval", "--spec", "ex1.json", "--p", "1,2", "--m", "0", "--z1", "1,4"],
        &["eval", "--spec", "ex1.json", "--p", "1,2,3", "--m", "12", "--z1", "1,4"],
        &["verify", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--checks", ""],
        &["verify", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--checks", "Q9"],
        &["cv", "--t", "2", "--m", "100"],
        &["cv", "--phi", "-1", "--t", "0", "--m", "100"],
        &["estimate", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--t", "2"],
        &["estimate", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--mode", "good(3)"],
        &["bogus"],
    ];
    for args in cases {
        let o = s.run(args);
        assert_eq!(code(&o), 2, "{args:?}: {}", stderr(&o));
        assert!(!stderr(&o).is_empty(), "{args:?} printed no diagnostic");
    }
    let o = s.run(&["eval", "--spec", "missing.json", "--p", "1,2", "--m", "12", "--z1", "1,4"]);
    assert!(stderr(&o).contains("missing.json"));
}

#[test]
fn unattainable_expenditure_targets_exit_one() {
    let s = Sandbox::new();
    let o = s.run(&["eval", "--spec", "ex1.json", "--p", "1,2", "--m", "12", "--z1", "1,4", "--u", "1e200"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
    assert!(stderr(&o).contains("unattainable"));
    // Log utility falls below this target only at zero income.
    let o = s.run(&["eval", "--spec", "ex2.json", "--p", "1,2", "--m", "12", "--z1", "1,4", "--u", "-1e6"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn verify_runs_expected_checks() {
    let s = Sandbox::new();
    let o = s.run(&["verify", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--checks", "T1,C3,P4,C1"]);
    let doc = json(&o);
    assert_valid("verify", &doc);
    assert_eq!(doc["all_as_expected"], Value::Bool(true));
    let checks = doc["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 4);
    assert!(checks.iter().all(|c| c["report"]["passed"] == Value::Bool(true)));
}

#[test]
fn verify_separable_fails_t1_as_expected() {
    let s = Sandbox::new();
    let doc = json(&s.run(&["verify", "--spec", "ex3.json", "--p", "1,1", "--m", "4", "--z1", "1,1"]));
    assert_valid("verify", &doc);
    let t1 = doc["checks"].as_array().unwrap().iter().find(|c| c["report"]["property_id"] == "T1").unwrap();
    assert_eq!(t1["expected_pass"], Value::Bool(false));
    assert_eq!(t1["report"]["passed"], Value::Bool(false));
}

#[test]
fn cv_from_phi_alone() {
    let s = Sandbox::new();
    let doc = json(&s.run(&["cv", "--phi", "-1", "--t", "2,1", "--m", "100"]));
    assert_valid("cv", &doc);
    assert_eq!(doc["rows"][0]["cv_closed_form"].as_f64(), Some(-50.0));
    assert_eq!(doc["rows"][1]["cv_closed_form"].as_f64(), Some(0.0));
}

#[test]
fn cv_closed_form_and_brute_force_agree() {
    let s = Sandbox::new();
    let o = s.run(&["cv", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--t", "2"]);
    assert!(stderr(&o).is_empty(), "{}", stderr(&o));
    let doc = json(&o);
    assert_valid("cv", &doc);
    let row = &doc["rows"][0];
    assert!(close(row["cv_closed_form"].as_f64().unwrap(), -6.75, 1e-9));
    assert!(close(row["cv_brute_force"].as_f64().unwrap(), -6.75, 1e-6));
    let per_good: f64 = row["per_good"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
    assert!(close(per_good, -6.75, 1e-6));
}

#[test]
fn cv_separable_has_no_closed_form() {
    let s = Sandbox::new();
    let doc = json(&s.run(&["cv", "--spec", "ex3.json", "--p", "1,1", "--m", "4", "--z1", "1,1", "--t", "2"]));
    assert_valid("cv", &doc);
    assert!(doc["rows"][0]["cv_closed_form"].is_null());
    assert!(close(doc["rows"][0]["cv_brute_force"].as_f64().unwrap(), -2.0, 1e-6));
}

#[test]
fn cv_warns_when_measured_phi_disagrees_with_declaration() {
    let s = Sandbox::new();
    let base = ["cv", "--spec", "ex1.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--t", "1.01"];
    let o = s.run(&base);
    assert_eq!(code(&o), 0);
    assert!(!stderr(&o).contains("warning"), "{}", stderr(&o));
    // A coarse solver tolerance swamps a 1% provision change.
    let o = s.run(&[&base[..], &["--tol", "1e-2"]].concat());
    assert_eq!(code(&o), 0);
    assert!(stderr(&o).contains("warning"), "{}", stderr(&o));
    assert_valid("cv", &serde_json::from_slice(&o.stdout).unwrap());
}

#[test]
fn estimate_recovers_phi_without_noise() {
    let s = Sandbox::new();
    let doc = json(&s.run(&["estimate", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--mode", "all"]));
    assert_valid("estimate", &doc);
    let results = doc["results"].as_array().unwrap();
    assert_eq!(results.len(), 3);
    for r in results {
        let b1 = r["estimation"]["beta1"].as_f64().unwrap();
        assert!((b1 + 2.0).abs() < 1e-6, "{r}");
        assert_eq!(r["agreement"], Value::Bool(true));
    }
}

#[test]
fn estimate_with_noise_is_pinned() {
    let s = Sandbox::new();
    let args =
        ["estimate", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--noise", "0.05", "--n", "1000", "--seed", "7"];
    let doc = json(&s.run(&args));
    assert_valid("estimate", &doc);
    let b1 = doc["results"][0]["estimation"]["beta1"].as_f64().unwrap();
    assert_eq!(b1, -2.004_344_661_643_394_4);
}

#[test]
fn panel_file_round_trips_through_estimate() {
    let s = Sandbox::new();
    let gen = ["--spec", "ex1.json", "--p", "1,2,0.5", "--m", "30", "--z1", "1,2,3", "--n", "12"];
    let o = s.run(&[&["panel", "--out", "panel.csv"][..], &gen].concat());
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let direct = json(&s.run(&[&["estimate", "--mode", "good(2)"][..], &gen].concat()));
    let from_file = json(&s.run(&["estimate", "--panel", "panel.csv", "--phi", "-2", "--mode", "good(2)"]));
    assert_valid("estimate", &from_file);
    let a = direct["results"][0]["phi_hat"].as_f64().unwrap();
    let b = from_file["results"][0]["phi_hat"].as_f64().unwrap();
    assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    assert_eq!(from_file["results"][0]["agreement"], Value::Bool(true));

    let o = s.run(&["estimate", "--panel", "panel.csv", "--spec", "ex1.json"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn panel_json_validates() {
    let s = Sandbox::new();
    let doc = json(&s.run(&[
        "panel", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--n", "5", "--noise", "0.1", "--seed", "3",
        "--format", "json",
    ]));
    assert_valid("panel", &doc);
    assert_eq!(doc["rows"].as_array().unwrap().len(), 5);
}

#[test]
fn commands_are_deterministic() {
    let s = Sandbox::new();
    let runs: &[&[&str]] = &[
        &["eval", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4"],
        &["cv", "--spec", "ex1.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--t", "0.5,2", "--format", "csv"],
        &["panel", "--spec", "ex2.json", "--p", "1,2", "--m", "9", "--z1", "1,4", "--noise", "0.2", "--seed", "9"],
    ];
    for args in runs {
        let a = s.run(args);
        let b = s.run(args);
        assert_eq!(code(&a), 0, "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

#[test]
fn out_overwrites_atomically_and_leaves_no_temporaries() {
    let s = Sandbox::new();
    let target = s.path("report.json");
    std::fs::write(&target, "stale content that is longer than nothing\n".repeat(200)).unwrap();
    let args = ["cv", "--phi", "-1", "--t", "2", "--m", "100", "--out", "report.json"];
    for _ in 0..2 {
        let o = s.run(&args);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(o.stdout.is_empty());
        let doc: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
        assert_eq!(doc["rows"][0]["cv_closed_form"].as_f64(), Some(-50.0));
    }
    let mut names: Vec<String> =
        std::fs::read_dir(s.dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["ex1.json", "ex2.json", "ex3.json", "report.json"]);

    // A failed run leaves the previous output untouched.
    let before = std::fs::read(&target).unwrap();
    let o = s.run(&["eval", "--spec", "missing.json", "--p", "1", "--m", "1", "--z1", "1", "--out", "report.json"]);
    assert_eq!(code(&o), 2);
    assert_eq!(std::fs::read(&target).unwrap(), before);
}

#[test]
fn example_spec_files_match_the_spec_schema() {
    let v = schema("spec");
    for text in [EX1, EX2, EX3] {
        assert!(v.is_valid(&serde_json::from_str(text).unwrap()), "{text}");
    }
    for bad in [r#"{"family":"ces","alpha":0.5}"#, r#"{"family":"power_weighted"}"#, r#"{"family":"additive_separable_power","alpha":2}"#]
    {
        assert!(!v.is_valid(&serde_json::from_str(bad).unwrap()), "{bad}");
    }
}
