use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn run(dir: &Path, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_oclog"));
    cmd.args(args)
        .current_dir(dir)
        .env_remove("OCLOG_MODE")
        .env_remove("OCLOG_COLOR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

/// A temp dir holding `minimal.json` (strict, no collisions) and
/// `full.json` (every feature but orphans), both generated as ROCEL.
fn workspace() -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("minimal.cfg"), "{}").unwrap();
    std::fs::write(
        dir.path().join("full.cfg"),
        r#"{"seed": 3, "n_customers": 2, "n_orders": 4, "items_per_order_range": [1, 2], "n_packages": 2,
            "dynamic_attrs": true, "nm_relations": true, "schema_evolution": true, "inheritance": true,
            "simultaneous_events": true}"#,
    )
    .unwrap();
    for name in ["minimal", "full"] {
        let out = run(
            dir.path(),
            &["gen", &format!("{name}.cfg"), &format!("{name}.json")],
            &[],
        );
        assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    }
    dir
}

#[test]
fn strict_valid_log_passes_with_nineteen_rows() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &["validate", "minimal.json", "--mode", "strict"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().count(), 19);
    assert!(text.lines().all(|l| l.starts_with('S')));
}

#[test]
fn collisions_violate_unambiguous_changes() {
    let dir = workspace();
    let out = run(dir.path(), &["validate", "full.json"], &[]);
    assert_eq!(out.status.code(), Some(1));
    let row = stdout(&out)
        .lines()
        .find(|l| l.starts_with("S16 "))
        .unwrap()
        .to_string();
    assert!(
        row.contains("violated") && row.contains(".weight@"),
        "{row}"
    );
}

#[test]
fn garbage_is_an_input_error() {
    let dir = workspace();
    std::fs::write(dir.path().join("junk.bin"), b"\x00\x01 not a log").unwrap();
    assert_eq!(
        run(dir.path(), &["validate", "junk.bin"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(dir.path(), &["validate", "missing.json"], &[])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(run(dir.path(), &["frobnicate"], &[]).status.code(), Some(2));
}

#[test]
fn json_report_goes_to_stdout_only_when_asked() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &["validate", "minimal.json", "--json", "-"],
        &[],
    );
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema_version"], 1);
    assert_eq!(doc["results"].as_array().unwrap().len(), 19);

    let out = run(
        dir.path(),
        &["validate", "minimal.json", "--json", "report.json"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let doc: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(doc["mode"], "lax");
}

#[test]
fn several_inputs_keep_their_order() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &[
            "validate",
            "full.json",
            "minimal.json",
            "--jobs",
            "2",
            "--json",
            "-",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let inputs: Vec<&str> = doc
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["input"].as_str().unwrap())
        .collect();
    assert_eq!(inputs, ["full.json", "minimal.json"]);
}

#[test]
fn mode_and_colour_come_from_the_environment() {
    let dir = workspace();
    let lax = stdout(&run(dir.path(), &["validate", "minimal.json"], &[]));
    assert!(lax
        .lines()
        .any(|l| l.starts_with("S13 ") && l.contains("not applicable")));
    let strict = stdout(&run(
        dir.path(),
        &["validate", "minimal.json"],
        &[("OCLOG_MODE", "strict")],
    ));
    assert!(strict
        .lines()
        .any(|l| l.starts_with("S13 ") && l.contains("satisfied")));

    assert!(!lax.contains('\x1b'));
    let coloured = stdout(&run(
        dir.path(),
        &["validate", "minimal.json"],
        &[("OCLOG_COLOR", "always")],
    ));
    assert!(coloured.contains("\x1b[32m"));
}

#[test]
fn capabilities_for_one_format() {
    let dir = workspace();
    let out = run(dir.path(), &["capabilities", "--format", "DOCEL"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "| Specification | DOCEL |");
    let s13 = text.lines().find(|l| l.starts_with("| S13:")).unwrap();
    assert!(s13.ends_with("| ✓ |"), "{s13}");
    assert_eq!(
        run(dir.path(), &["capabilities", "--format", "NOPE"], &[])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn lossy_conversion_fails_when_lossless_is_required() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &[
            "convert",
            "full.json",
            "out.json",
            "--to",
            "OCEL1",
            "--require-lossless",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
    let loss: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("out.json.loss.json")).unwrap())
            .unwrap();
    assert_eq!(loss["lossless"], false);
    assert!(loss["entries"]["S9"]["count"].as_u64().unwrap() > 0);

    let out = run(
        dir.path(),
        &[
            "convert",
            "full.json",
            "same.json",
            "--to",
            "ROCEL",
            "--require-lossless",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        std::fs::read(dir.path().join("same.json")).unwrap(),
        std::fs::read(dir.path().join("full.json")).unwrap()
    );
}

#[test]
fn refinement_reports_what_stays_ambiguous() {
    let dir = workspace();
    let out = run(dir.path(), &["refine", "full.json", "refined.json"], &[]);
    assert_eq!(out.status.code(), Some(0));
    let line = stderr(&out)
        .lines()
        .find(|l| l.starts_with("unresolved changes:"))
        .unwrap()
        .to_string();
    let unresolved: usize = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(unresolved > 0);

    let report = run(
        dir.path(),
        &["validate", "refined.json", "--json", "-"],
        &[],
    );
    let doc: serde_json::Value = serde_json::from_slice(&report.stdout).unwrap();
    let s16 = doc["results"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["spec"] == "S16")
        .unwrap();
    assert_eq!(s16["findings"].as_array().unwrap().len(), unresolved);

    let strict = run(
        dir.path(),
        &[
            "refine",
            "full.json",
            "r2.json",
            "--steps",
            "key-changes",
            "--require-resolved",
        ],
        &[],
    );
    assert_eq!(strict.status.code(), Some(1));
    let clean = run(
        dir.path(),
        &["refine", "minimal.json", "r3.json", "--require-resolved"],
        &[],
    );
    assert_eq!(clean.status.code(), Some(0));
}

#[test]
fn flatten_writes_a_case_table() {
    let dir = workspace();
    let out = run(
        dir.path(),
        &[
            "flatten",
            "full.json",
            "items.csv",
            "--case-type",
            "Item",
            "--json",
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(summary["convergence_count"].as_u64().unwrap() > 0);
    let csv = std::fs::read_to_string(dir.path().join("items.csv")).unwrap();
    assert!(csv.starts_with("case_id,activity,timestamp,event_id\n"));
    assert_eq!(
        run(
            dir.path(),
            &["flatten", "full.json", "x.csv", "--case-type", "Nope"],
            &[]
        )
        .status
        .code(),
        Some(2)
    );
}

#[test]
fn stats_and_generation_formats() {
    let dir = workspace();
    let out = run(dir.path(), &["stats", "full.json", "--json"], &[]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(stats["events"].as_u64().unwrap() > 0);

    let out = run(
        dir.path(),
        &["gen", "full.cfg", "full.zip", "--to", "DOCEL"],
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(dir.path().join("full.zip.loss.json").exists());
    let text = stdout(&run(dir.path(), &["stats", "full.zip"], &[]));
    assert!(text.starts_with("format      DOCEL_TABLES"), "{text}");

    std::fs::write(dir.path().join("bad.cfg"), r#"{"nm_relations": true}"#).unwrap();
    assert_eq!(
        run(dir.path(), &["gen", "bad.cfg", "x.json"], &[])
            .status
            .code(),
        Some(2)
    );
}
