use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

fn example(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/examples").join(name)
}

fn riskctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_riskctl"))
        .args(args)
        .env("RISKCTL_COLOR", "never")
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8(bytes.to_vec()).unwrap()
}

fn case_study() -> String {
    example("iot_case_study.adt").to_string_lossy().into_owned()
}

fn write_temp(dir: &tempfile::TempDir, name: &str, body: &str) -> String {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_fixture_is_silent() {
    let out = riskctl(&["validate", &case_study()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
}

#[test]
fn validate_reports_spanned_diagnostic() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_temp(
        &dir,
        "bad.adt",
        "tree \"t\" {\n  leaf H \"x\" { prob 0.5 cost 4 impact 5 skill 0.5 }\n}\n",
    );
    let out = riskctl(&["validate", &path]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    assert!(lines[0].starts_with(&format!("{path}:2:30: LeafCostDomain: ")), "{}", lines[0]);
}

#[test]
fn validate_missing_file() {
    let out = riskctl(&["validate", "/nonexistent/tree.adt"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn syntax_errors_are_all_reported() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_temp(
        &dir,
        "bad.adt",
        "tree \"t\" {\n  or R \"r\" {\n    leaf A \"a\" { prob }\n    leaf B \"b\" { prob 0.5 cost 1 impact 5 skill 0.5 wat 3 }\n  }\n}\n",
    );
    let out = riskctl(&["validate", &path]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.lines().count() >= 2, "{stdout}");
    for line in stdout.lines() {
        assert!(line.starts_with(&format!("{path}:")), "{line}");
    }
}

#[test]
fn eval_csv_is_stable() {
    let args = ["eval", &case_study(), "--mode", "both", "--format", "csv"];
    let a = riskctl(&args);
    let b = riskctl(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let csv = text(&a.stdout);
    assert_eq!(csv.split("\r\n").filter(|l| !l.is_empty()).count(), 23);
    assert!(text(&a.stderr).contains("Root reduction: 2.0%"));
}

#[test]
fn eval_json_single_leaf() {
    let out = riskctl(&["eval", example("minimal.adt").to_str().unwrap(), "--mode", "inherent", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["nodes"].as_array().unwrap().len(), 1);
    assert_eq!(v["nodes"][0]["node_id"], "H");
}

#[test]
fn residual_without_controls_equals_inherent() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_temp(
        &dir,
        "plain.adt",
        "tree \"t\" {\n  and R \"r\" {\n    leaf A \"a\" { prob 0.3 cost 1 impact 4 skill 0.5 }\n    leaf B \"b\" { prob 0.8 cost 2 impact 7 skill 1 }\n  }\n}\n",
    );
    let inh = riskctl(&["eval", &path, "--mode", "inherent", "--format", "csv"]);
    let res = riskctl(&["eval", &path, "--mode", "residual", "--format", "csv"]);
    assert_eq!(inh.status.code(), Some(0));
    assert_eq!(inh.stdout, res.stdout);
}

#[test]
fn degenerate_or_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_temp(
        &dir,
        "zero.adt",
        "tree \"t\" {\n  or O_Z \"z\" {\n    leaf A \"a\" { prob 0 cost 1 impact 4 skill 0.5 }\n    leaf B \"b\" { prob 0 cost 2 impact 7 skill 1 }\n  }\n}\n",
    );
    let out = riskctl(&["eval", &path]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("O_Z"));
}

#[test]
fn eval_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("report.md");
    let out = riskctl(&["eval", &case_study(), "--out", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let md = fs::read_to_string(&target).unwrap();
    assert!(md.contains("| - | O_T | 1.18 | 9.4 | 0.5 | 1 | 3.98 |"));
    assert!(md.contains("## Summary"));

    let out = riskctl(&["eval", &case_study(), "--out", "/nonexistent/dir/report.md"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn eval_rejects_bad_decimals() {
    let out = riskctl(&["eval", &case_study(), "--decimals", "7"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn eval_reads_stdin() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_riskctl"))
        .args(["eval", "-", "--mode", "inherent", "--format", "csv"])
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(fs::read(example("minimal.adt")).unwrap().as_slice())
        .unwrap();
    let out = child.wait_with_output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(text(&out.stdout).lines().count(), 2);
}

#[test]
fn catalog_lint() {
    let out = riskctl(&["catalog", example("bundled_catalogue.adt").to_str().unwrap(), "lint"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    let dir = tempfile::tempdir().unwrap();
    let tampered = fs::read_to_string(example("bundled_catalogue.adt"))
        .unwrap()
        .replacen("final 0.4", "final 0.5", 1);
    let path = write_temp(&dir, "tampered.adt", &tampered);
    let out = riskctl(&["catalog", &path, "lint"]);
    assert_eq!(out.status.code(), Some(1));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("FinalValueMismatch"), "{stdout}");
    assert!(stdout.starts_with(&format!("{path}:")));
}

#[test]
fn catalog_coverage() {
    let out = riskctl(&["catalog", &case_study(), "coverage"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("| InformationDisclosure | 4 | 4 | 4 | 0 |"), "{stdout}");
    assert!(stdout.contains("Leaves without a threat code: H_B.4"));
}

#[test]
fn help_and_usage() {
    assert_eq!(riskctl(&["--help"]).status.code(), Some(0));
    assert_eq!(riskctl(&["--version"]).status.code(), Some(0));
    assert_eq!(riskctl(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(riskctl(&["eval", &case_study(), "--format", "xml"]).status.code(), Some(1));
}
