//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so the lines always reach the output.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Output};

use oclog::analysis::flatten;
use oclog::formats::{self, read_rocel, write_rocel};
use oclog::generator::{generate, scalability_series, GenConfig};
use oclog::refiner::{infer_cardinality, key_changes_by_event, reify_relations, Cardinality};
use oclog::validator::{validate, Location};
use oclog::{FormatId, OCLog, ObjectId, SpecId, Strictness, Timestamp};

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn oclog(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oclog"))
        .args(args)
        .current_dir(dir)
        .env_remove("OCLOG_MODE")
        .env_remove("OCLOG_COLOR")
        .output()
        .expect("binary runs")
}

// Cells transcribed by hand from the published comparison, one string per
// specification, columns XOC, OCEL 1.0, OCEL 2.0, DOCEL, ACEL, EKG, OCED.
// Y supported, N not, T not traceable, / not applicable.
const EXPECTED_MATRIX: [(&str, &str); 19] = [
    ("S1", "YYYYYYY"),
    ("S2", "YYYYYYY"),
    ("S3", "YYYYYYY"),
    ("S4", "YYYYYYY"),
    ("S5", "YYYYYYY"),
    ("S6", "YYYYYYY"),
    ("S7", "YYYYYYY"),
    ("S8", "TTYYYYY"),
    ("S9", "YNYNYYY"),
    ("S10", "NNYNNNY"),
    ("S11", "NNNNYNN"),
    ("S12", "NNNNNNN"),
    ("S13", "NYNYNNN"),
    ("S14", "NYNYNNN"),
    ("S15", "YYYYYYY"),
    ("S16", "YNNYYY/"),
    ("S17", "YNNYYY/"),
    ("S18", "NYYYYY/"),
    ("S19", "NYYYYY/"),
];

fn capability_matrix(dir: &Path) -> Outcome {
    let out = oclog(&["capabilities", "--all"], dir);
    ensure(out.status.success(), || {
        format!("exit {:?}", out.status.code())
    })?;
    let text = String::from_utf8(out.stdout).map_err(|e| e.to_string())?;
    let rows: Vec<Vec<String>> = text
        .lines()
        .map(|l| {
            l.trim_matches('|')
                .split('|')
                .map(|c| c.trim().to_string())
                .collect()
        })
        .collect();
    ensure(rows.len() == 20, || {
        format!("{} rows, expected header + 19", rows.len())
    })?;
    let header = &rows[0][1..];
    let columns = [
        "XOC", "OCEL 1.0", "OCEL 2.0", "DOCEL", "ACEL", "EKG", "OCED",
    ];
    ensure(header == columns, || format!("header {header:?}"))?;
    let mut cells = 0;
    for ((spec, expected), row) in EXPECTED_MATRIX.iter().zip(&rows[1..]) {
        ensure(row[0].starts_with(&format!("{spec}:")), || {
            format!("row {:?} out of order", row[0])
        })?;
        for (code, (cell, column)) in expected.chars().zip(row[1..].iter().zip(columns)) {
            let want = match code {
                'Y' => "✓",
                'N' => "X",
                'T' => "X (not traceable)",
                _ => "/",
            };
            ensure(cell == want, || {
                format!("{spec} {column}: got {cell:?}, expected {want:?}")
            })?;
            cells += 1;
        }
    }
    let snapshot = include_str!("snapshots/capabilities_all.txt");
    ensure(text == snapshot, || {
        "output differs from the stored snapshot".into()
    })?;
    Ok(format!("{cells} cells match, snapshot identical"))
}

fn refined_round_trip() -> Outcome {
    let mut features = BTreeSet::new();
    for seed in 1..=200 {
        let config = GenConfig::mixed(seed);
        features.insert(seed & 0x7f);
        let log = generate(&config).map_err(|e| e.to_string())?;
        let back = read_rocel(&write_rocel(&log)).map_err(|e| format!("seed {seed}: {e}"))?;
        ensure(back == log, || format!("seed {seed}: decoded log differs"))?;
    }
    Ok(format!(
        "200 seeds, {} feature combinations, 0 failures",
        features.len()
    ))
}

fn loss_accounting() -> Outcome {
    let mut pairs = 0;
    for seed in 1..=40 {
        let log = generate(&GenConfig::mixed(seed)).map_err(|e| e.to_string())?;
        for source in FormatId::ALL {
            let (input, _) = formats::write(source, &log);
            for target in FormatId::ALL {
                let at = || format!("seed {seed} {source} -> {target}");
                let conversion = oclog::converter::convert(&input, source, target)
                    .map_err(|e| format!("{}: {e}", at()))?;
                let preview = oclog::converter::loss_preview_ids(source, target);
                let keys = conversion.loss.keys();
                ensure(keys.is_subset(&preview), || {
                    format!("{}: lost {keys:?} outside {preview:?}", at())
                })?;
                let (decoded, _) = formats::read(target, &conversion.output)
                    .map_err(|e| format!("{}: {e}", at()))?;
                let restored = conversion
                    .loss
                    .restore(&decoded)
                    .map_err(|e| format!("{}: {e}", at()))?;
                ensure(restored == conversion.decoded, || {
                    format!("{}: reconstruction differs", at())
                })?;
                pairs += 1;
            }
        }
    }
    Ok(format!("{pairs} conversions contained and reconstructed"))
}

/// Events at exactly `at` linked to `object`, by scanning every event.
fn brute_force_candidates(log: &OCLog, object: &ObjectId, at: Timestamp) -> Vec<String> {
    log.events()
        .iter()
        .filter(|e| e.timestamp == at && e.e2o.iter().any(|l| &l.object == object))
        .map(|e| e.id.to_string())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect()
}

fn ambiguity_refinement() -> Outcome {
    let (mut resolved, mut unresolved) = (0, 0);
    for seed in 1..=60 {
        let config = GenConfig {
            simultaneous_events: true,
            ..GenConfig::mixed(seed)
        };
        let log = generate(&config).map_err(|e| e.to_string())?;
        let outcome = key_changes_by_event(&log);
        let mut expected_unresolved = BTreeSet::new();
        for (before, after) in log.objects().iter().zip(outcome.log.objects()) {
            for (b, a) in before.changes.iter().zip(&after.changes) {
                if b.cause.is_some() {
                    ensure(a.cause == b.cause, || {
                        format!(
                            "seed {seed}: cause of {}.{} altered",
                            before.id, b.attribute
                        )
                    })?;
                    continue;
                }
                let candidates = brute_force_candidates(&log, &before.id, b.at);
                let got = a.cause.as_ref().map(|c| c.to_string());
                if candidates.len() == 1 {
                    ensure(got.as_deref() == Some(candidates[0].as_str()), || {
                        format!(
                            "seed {seed}: {}.{}@{} should be keyed to {}",
                            before.id, b.attribute, b.at, candidates[0]
                        )
                    })?;
                    resolved += 1;
                } else {
                    ensure(got.is_none(), || {
                        format!(
                            "seed {seed}: {}.{}@{} keyed despite {} candidates",
                            before.id,
                            b.attribute,
                            b.at,
                            candidates.len()
                        )
                    })?;
                    expected_unresolved.insert(Location::Change {
                        object: before.id.clone(),
                        attribute: b.attribute.clone(),
                        at: b.at,
                    });
                    unresolved += 1;
                }
            }
        }
        let reported: BTreeSet<Location> = outcome
            .unresolved
            .iter()
            .map(|f| f.location.clone())
            .collect();
        ensure(reported == expected_unresolved, || {
            format!("seed {seed}: unresolved list differs from the oracle")
        })?;
        let report = validate(&outcome.log, Strictness::Lax);
        ensure(
            report.findings(SpecId::S16) == &outcome.unresolved[..],
            || format!("seed {seed}: S16 findings differ from the unresolved list"),
        )?;
    }
    ensure(resolved > 0 && unresolved > 0, || {
        "corpus lacks resolvable or ambiguous changes".into()
    })?;
    Ok(format!(
        "60 seeds, {resolved} keyed and {unresolved} left ambiguous as the oracle predicts"
    ))
}

fn reification() -> Outcome {
    let mut instants = 0;
    for seed in 1..=60 {
        let config = GenConfig {
            nm_relations: true,
            ..GenConfig::mixed(seed)
        };
        let log = generate(&config).map_err(|e| e.to_string())?;
        ensure(
            infer_cardinality(&log, "contains") == Ok(Cardinality::ManyToMany),
            || format!("seed {seed}: no N:M input"),
        )?;
        let outcome = reify_relations(&log, None);
        let originals: BTreeSet<&ObjectId> = log.objects().iter().map(|o| &o.id).collect();
        let times: BTreeSet<Timestamp> = log.events().iter().map(|e| e.timestamp).collect();
        for t in times {
            let restricted: BTreeSet<_> = outcome
                .log
                .derived_relation_closure(t)
                .into_iter()
                .filter(|(s, d)| originals.contains(s) && originals.contains(d))
                .collect();
            ensure(restricted == log.derived_relation_closure(t), || {
                format!("seed {seed}: closure differs at {t}")
            })?;
            instants += 1;
        }
        let qualifiers: BTreeSet<String> = outcome
            .log
            .relations()
            .map(|r| r.qualifier.clone())
            .collect();
        for q in qualifiers {
            let c = infer_cardinality(&outcome.log, &q).map_err(|e| e.to_string())?;
            ensure(c != Cardinality::ManyToMany, || {
                format!("seed {seed}: {q} is still N:M")
            })?;
        }
    }
    Ok(format!(
        "60 seeds, closures equal at {instants} event instants, no N:M qualifier left"
    ))
}

fn flattening_oracle() -> Outcome {
    let mut logs = 0;
    let mut checked = 0;
    for seed in 1..=120 {
        let log = generate(&GenConfig::mixed(seed)).map_err(|e| e.to_string())?;
        if log.events().len() > 50 {
            continue;
        }
        logs += 1;
        for case_type in log.object_types().keys() {
            let in_family = |id: &ObjectId| {
                let mut ty = log.object(id.as_str()).map(|o| o.object_type.clone());
                while let Some(name) = ty {
                    if &name == case_type {
                        return true;
                    }
                    ty = log.object_types().get(&name).and_then(|t| t.parent.clone());
                }
                false
            };
            let mut convergence = 0;
            for ev in log.events() {
                let cases: BTreeSet<&ObjectId> = ev
                    .e2o
                    .iter()
                    .map(|l| &l.object)
                    .filter(|o| in_family(o))
                    .collect();
                convergence += cases.len().saturating_sub(1);
            }
            let mut divergence = 0;
            for case in log.objects().iter().map(|o| &o.id).filter(|o| in_family(o)) {
                let mut spans: BTreeMap<String, BTreeSet<&ObjectId>> = BTreeMap::new();
                for ev in log
                    .events()
                    .iter()
                    .filter(|e| e.e2o.iter().any(|l| &l.object == case))
                {
                    for l in ev.e2o.iter().filter(|l| !in_family(&l.object)) {
                        let ty = log
                            .object(l.object.as_str())
                            .map(|o| o.object_type.clone())
                            .unwrap_or_default();
                        spans.entry(ty).or_default().insert(&l.object);
                    }
                }
                divergence += spans.values().filter(|s| s.len() > 1).count();
            }
            let result = flatten(&log, case_type).map_err(|e| e.to_string())?;
            ensure(result.convergence_count == convergence, || {
                format!(
                    "seed {seed} {case_type}: convergence {} vs {convergence}",
                    result.convergence_count
                )
            })?;
            ensure(result.divergence_count == divergence, || {
                format!(
                    "seed {seed} {case_type}: divergence {} vs {divergence}",
                    result.divergence_count
                )
            })?;
            checked += 1;
        }
    }
    ensure(logs >= 20, || {
        format!("only {logs} logs of at most 50 events")
    })?;
    Ok(format!(
        "{checked} flattenings over {logs} logs match the brute-force counts"
    ))
}

fn scalability() -> Outcome {
    let base = GenConfig {
        seed: 17,
        n_customers: 5,
        items_per_order_range: (1, 3),
        n_packages: 4,
        dynamic_attrs: true,
        schema_evolution: true,
        ..GenConfig::default()
    };
    let series = scalability_series(&base, &[10, 20, 40, 80]).map_err(|e| e.to_string())?;
    let ratios: Vec<f64> = series.iter().map(|e| e.ratio()).collect();
    ensure(ratios.windows(2).all(|w| w[1] > w[0]), || {
        format!("ratios not increasing: {ratios:?}")
    })?;
    let per_event: Vec<f64> = series.iter().map(|e| e.rocel_bytes_per_event()).collect();
    let (lo, hi) = per_event
        .iter()
        .fold((f64::MAX, 0f64), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    ensure(hi / lo < 1.25, || {
        format!("refined bytes per event vary too much: {per_event:?}")
    })?;
    let emulated: Vec<f64> = series
        .iter()
        .map(|e| e.emulated_bytes_per_event())
        .collect();
    ensure(emulated.windows(2).all(|w| w[1] > w[0]), || {
        format!("emulated bytes per event not growing: {emulated:?}")
    })?;
    let shown: Vec<String> = series
        .iter()
        .map(|e| format!("{}ev:{:.1}x", e.events, e.ratio()))
        .collect();
    Ok(format!("ratio strictly increasing [{}]", shown.join(" ")))
}

fn determinism(dir: &Path) -> Outcome {
    let write =
        |name: &str, body: &str| std::fs::write(dir.join(name), body).map_err(|e| e.to_string());
    write(
        "gen.json",
        r#"{"seed": 5, "n_customers": 3, "n_orders": 6, "items_per_order_range": [1, 3], "n_packages": 3,
            "dynamic_attrs": true, "nm_relations": true, "schema_evolution": true, "inheritance": true,
            "simultaneous_events": true}"#,
    )?;
    let runs: [&[&str]; 10] = [
        &["gen", "gen.json", "log.json"],
        &["gen", "gen.json", "log.zip", "--to", "DOCEL"],
        &["validate", "log.json", "--json", "-"],
        &[
            "validate",
            "log.json",
            "log.zip",
            "--mode",
            "strict",
            "--json",
            "report.json",
        ],
        &["convert", "log.json", "log.ocel1.json", "--to", "OCEL1"],
        &["convert", "log.json", "log.ocel2.json", "--to", "OCEL2"],
        &["refine", "log.json", "refined.json"],
        &[
            "flatten",
            "log.json",
            "flat.csv",
            "--case-type",
            "Order",
            "--json",
        ],
        &["stats", "log.json", "--json"],
        &["capabilities", "--all"],
    ];
    let files = [
        "log.json",
        "log.zip",
        "report.json",
        "log.ocel1.json",
        "log.ocel1.json.loss.json",
        "log.ocel2.json",
        "log.ocel2.json.loss.json",
        "refined.json",
        "flat.csv",
    ];
    let mut snapshots = Vec::new();
    for _ in 0..2 {
        let mut outputs = Vec::new();
        for args in runs {
            let out = oclog(args, dir);
            ensure(matches!(out.status.code(), Some(0 | 1)), || {
                format!(
                    "{args:?} exited {:?}: {}",
                    out.status.code(),
                    String::from_utf8_lossy(&out.stderr)
                )
            })?;
            outputs.push((args.join(" "), out.stdout, out.stderr));
        }
        for f in files {
            let bytes = std::fs::read(dir.join(f)).map_err(|e| format!("{f}: {e}"))?;
            outputs.push((f.to_string(), bytes, Vec::new()));
        }
        snapshots.push(outputs);
    }
    for (a, b) in snapshots[0].iter().zip(&snapshots[1]) {
        ensure(a == b, || format!("{} differs between runs", a.0))?;
    }
    Ok(format!(
        "{} commands and {} files byte-identical across runs",
        runs.len(),
        files.len()
    ))
}

fn main() {
    let dir = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<(&str, Check)> = vec![
        (
            "capability matrix",
            Box::new(|| capability_matrix(dir.path())),
        ),
        ("refined format round trip", Box::new(refined_round_trip)),
        ("loss accounting", Box::new(loss_accounting)),
        ("ambiguity refinement", Box::new(ambiguity_refinement)),
        ("reification", Box::new(reification)),
        ("flattening oracle", Box::new(flattening_oracle)),
        ("scalability", Box::new(scalability)),
        ("determinism", Box::new(|| determinism(dir.path()))),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {detail}", n + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
