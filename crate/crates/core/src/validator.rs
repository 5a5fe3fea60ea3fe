//! Instance-level conformance against the nineteen specifications.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::analysis::{codec_sizes, trace_of};
use crate::framework::{Dimension, SpecId};
use crate::graph;
use crate::model::{AttributeChange, EventId, O2ORelation, OCLog, Object, ObjectId, Strictness};
use crate::time::Timestamp;
use crate::value::AttributeValue;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Where a finding was observed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Location {
    Event {
        event: EventId,
    },
    Object {
        object: ObjectId,
    },
    ObjectType {
        object_type: String,
    },
    Change {
        object: ObjectId,
        attribute: String,
        at: Timestamp,
    },
    Relation {
        source: ObjectId,
        target: ObjectId,
        qualifier: String,
    },
}

impl Location {
    pub fn change(object: &ObjectId, change: &AttributeChange) -> Self {
        Location::Change {
            object: object.clone(),
            attribute: change.attribute.clone(),
            at: change.at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Finding {
    pub location: Location,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Metric {
    Count(usize),
    Ratio(f64),
}

pub type Metrics = BTreeMap<String, Metric>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum Verdict {
    Satisfied { metrics: Metrics },
    Violated { findings: Vec<Finding> },
    Measured { metrics: Metrics },
    NotApplicable { reason: String },
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Satisfied { .. } => "satisfied",
            Verdict::Violated { .. } => "violated",
            Verdict::Measured { .. } => "measured",
            Verdict::NotApplicable { .. } => "not applicable",
        }
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated { .. })
    }

    fn from_findings(mut findings: Vec<Finding>, metrics: Metrics) -> Verdict {
        if findings.is_empty() {
            Verdict::Satisfied { metrics }
        } else {
            findings.sort();
            Verdict::Violated { findings }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecResult {
    pub spec: SpecId,
    pub dimension: Dimension,
    pub specification: String,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub schema_version: u32,
    pub mode: Strictness,
    pub results: Vec<SpecResult>,
}

impl ConformanceReport {
    pub fn verdict(&self, spec: SpecId) -> &Verdict {
        &self.results[spec.number() - 1].verdict
    }

    pub fn findings(&self, spec: SpecId) -> &[Finding] {
        match self.verdict(spec) {
            Verdict::Violated { findings } => findings,
            _ => &[],
        }
    }

    pub fn any_violated(&self) -> bool {
        self.results.iter().any(|r| r.verdict.is_violated())
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    /// One line per specification.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for r in &self.results {
            let detail = match &r.verdict {
                Verdict::Satisfied { metrics } | Verdict::Measured { metrics } => {
                    render_metrics(metrics)
                }
                Verdict::Violated { findings } => {
                    let shown: Vec<String> = findings
                        .iter()
                        .take(5)
                        .map(|f| render_location(&f.location))
                        .collect();
                    let more = findings.len().saturating_sub(shown.len());
                    let mut s = format!("{} finding(s): {}", findings.len(), shown.join(", "));
                    if more > 0 {
                        let _ = write!(s, ", ... {more} more");
                    }
                    s
                }
                Verdict::NotApplicable { reason } => reason.clone(),
            };
            let _ = writeln!(
                out,
                "{:<4} {:<4} {:<15} {}",
                r.spec.to_string(),
                dimension_label(r.dimension),
                r.verdict.label(),
                detail
            );
        }
        out
    }
}

fn dimension_label(d: Dimension) -> &'static str {
    match d {
        Dimension::E2E => "E2E",
        Dimension::O2O => "O2O",
        Dimension::E2O => "E2O",
        Dimension::DataQuality => "DQ",
    }
}

fn render_metrics(metrics: &Metrics) -> String {
    metrics
        .iter()
        .map(|(k, v)| match v {
            Metric::Count(n) => format!("{k}={n}"),
            Metric::Ratio(x) => format!("{k}={x:.1}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn render_location(location: &Location) -> String {
    match location {
        Location::Event { event } => format!("event {event}"),
        Location::Object { object } => format!("object {object}"),
        Location::ObjectType { object_type } => format!("type {object_type}"),
        Location::Change {
            object,
            attribute,
            at,
        } => format!("{object}.{attribute}@{at}"),
        Location::Relation {
            source,
            target,
            qualifier,
        } => format!("{source}-[{qualifier}]->{target}"),
    }
}

fn count(pairs: &[(&str, usize)]) -> Metrics {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), Metric::Count(*v)))
        .collect()
}

/// Builds the report for `log`. Cardinality checks run only in strict mode.
pub fn validate(log: &OCLog, mode: Strictness) -> ConformanceReport {
    let ambiguous = find_ambiguous_changes(log);
    let n_changes: usize = log.objects().iter().map(|o| o.changes.len()).sum();
    let n_attrs: usize = log.objects().iter().map(|o| o.attributes.len()).sum();
    let n_relations = log.relations().count();
    let n_event_attrs: usize = log.events().iter().map(|e| e.attributes.len()).sum();

    let results = SpecId::ALL
        .iter()
        .map(|&spec| {
            let verdict = match spec {
                SpecId::S1 => Verdict::Satisfied {
                    metrics: count(&[("events", log.events().len())]),
                },
                SpecId::S2 => Verdict::Satisfied {
                    metrics: count(&[("timestamped_events", log.events().len())]),
                },
                SpecId::S3 => Verdict::Satisfied {
                    metrics: count(&[("activities", log.event_types().len())]),
                },
                SpecId::S4 => Verdict::Satisfied {
                    metrics: count(&[("event_attributes", n_event_attrs)]),
                },
                SpecId::S5 => Verdict::Satisfied {
                    metrics: count(&[("object_types", log.object_types().len())]),
                },
                SpecId::S6 => Verdict::Satisfied {
                    metrics: count(&[("objects", log.objects().len())]),
                },
                SpecId::S7 => Verdict::from_findings(
                    schema_findings(log),
                    count(&[("object_attributes", n_attrs)]),
                ),
                SpecId::S8 => {
                    Verdict::from_findings(ambiguous.clone(), count(&[("changes", n_changes)]))
                }
                SpecId::S9 => Verdict::Satisfied {
                    metrics: count(&[("relations", n_relations)]),
                },
                SpecId::S10 => {
                    let qualified = log
                        .events()
                        .iter()
                        .flat_map(|e| &e.e2o)
                        .filter(|l| l.qualifier.is_some())
                        .count();
                    Verdict::Satisfied {
                        metrics: count(&[
                            ("qualified_e2o", qualified),
                            ("qualified_o2o", n_relations),
                        ]),
                    }
                }
                SpecId::S11 => {
                    let scoped = log.relations().filter(|r| r.is_time_scoped()).count();
                    Verdict::from_findings(
                        scope_findings(log),
                        count(&[("time_scoped_relations", scoped)]),
                    )
                }
                SpecId::S12 => {
                    let subtypes = log
                        .object_types()
                        .values()
                        .filter(|t| t.parent.is_some())
                        .count();
                    Verdict::Satisfied {
                        metrics: count(&[("subtyped_types", subtypes)]),
                    }
                }
                SpecId::S13 | SpecId::S14 if mode == Strictness::Lax => Verdict::NotApplicable {
                    reason: "cardinality is only enforced in strict mode".into(),
                },
                SpecId::S13 => {
                    let findings = log
                        .events()
                        .iter()
                        .filter(|e| e.e2o.is_empty())
                        .map(|e| Finding {
                            location: Location::Event {
                                event: e.id.clone(),
                            },
                            message: "event relates to no object".into(),
                        })
                        .collect();
                    Verdict::from_findings(findings, count(&[("events", log.events().len())]))
                }
                SpecId::S14 => {
                    let findings = log
                        .objects()
                        .iter()
                        .filter(|o| log.events_of(o.id.as_str()).next().is_none())
                        .map(|o| Finding {
                            location: Location::Object {
                                object: o.id.clone(),
                            },
                            message: "object participates in no event".into(),
                        })
                        .collect();
                    Verdict::from_findings(findings, count(&[("objects", log.objects().len())]))
                }
                SpecId::S15 => {
                    let (findings, steps) = trace_findings(log);
                    Verdict::from_findings(
                        findings,
                        count(&[("traces", log.objects().len()), ("trace_steps", steps)]),
                    )
                }
                SpecId::S16 => {
                    Verdict::from_findings(ambiguous.clone(), count(&[("changes", n_changes)]))
                }
                SpecId::S17 => {
                    Verdict::from_findings(identity_findings(log), count(&[("changes", n_changes)]))
                }
                SpecId::S18 => {
                    let m = duplication_metrics(log);
                    Verdict::Measured {
                        metrics: count(&[
                            ("symmetric_duplicate_pairs", m.symmetric_duplicate_pairs),
                            ("stored_transitive_edges", m.stored_transitive_edges),
                        ]),
                    }
                }
                SpecId::S19 => {
                    let events = log.events().len().max(1) as f64;
                    Verdict::Measured {
                        metrics: codec_sizes(log)
                            .into_iter()
                            .map(|(f, bytes)| {
                                (
                                    format!("{f}.bytes_per_event"),
                                    Metric::Ratio(bytes as f64 / events),
                                )
                            })
                            .collect(),
                    }
                }
            };
            SpecResult {
                spec,
                dimension: spec.dimension(),
                specification: spec.sentence().to_string(),
                verdict,
            }
        })
        .collect();
    ConformanceReport {
        schema_version: REPORT_SCHEMA_VERSION,
        mode,
        results,
    }
}

fn schema_findings(log: &OCLog) -> Vec<Finding> {
    let mut findings = Vec::new();
    for obj in log.objects() {
        let Ok(schema) = log.effective_schema(&obj.object_type) else {
            continue;
        };
        let values = obj.attributes.iter().map(|(k, v)| (k, v, None)).chain(
            obj.changes
                .iter()
                .map(|c| (&c.attribute, &c.value, Some(c))),
        );
        for (name, value, change) in values {
            let problem = match schema.get(name) {
                None => Some(format!(
                    "attribute {name:?} is not declared for type {}",
                    obj.object_type
                )),
                Some(kind) => value
                    .kind()
                    .filter(|k| k != kind)
                    .map(|k| format!("attribute {name:?} holds a {k} but is declared {kind}")),
            };
            if let Some(message) = problem {
                let location = match change {
                    Some(c) => Location::change(&obj.id, c),
                    None => Location::Object {
                        object: obj.id.clone(),
                    },
                };
                findings.push(Finding { location, message });
            }
        }
    }
    findings
}

fn scope_findings(log: &OCLog) -> Vec<Finding> {
    let mut findings = Vec::new();
    for rel in log.relations() {
        let Some(cause) = &rel.change_cause else {
            continue;
        };
        let Some(ev) = log.event(cause.as_str()) else {
            continue;
        };
        if Some(ev.timestamp) != rel.valid_from && Some(ev.timestamp) != rel.valid_to {
            findings.push(Finding {
                location: relation_location(rel),
                message: format!("cause {cause} happens at neither bound of the validity interval"),
            });
        }
    }
    findings
}

fn relation_location(rel: &O2ORelation) -> Location {
    Location::Relation {
        source: rel.source.clone(),
        target: rel.target.clone(),
        qualifier: rel.qualifier.clone(),
    }
}

fn trace_findings(log: &OCLog) -> (Vec<Finding>, usize) {
    let mut findings = Vec::new();
    let mut steps = 0;
    for obj in log.objects() {
        match trace_of(log, obj.id.as_str()) {
            Ok(trace) => {
                steps += trace.steps.len();
                let ordered = trace
                    .steps
                    .windows(2)
                    .all(|w| (w[0].timestamp, &w[0].event) < (w[1].timestamp, &w[1].event));
                if !ordered {
                    findings.push(Finding {
                        location: Location::Object {
                            object: obj.id.clone(),
                        },
                        message: "trace is not in a total order".into(),
                    });
                }
            }
            Err(e) => findings.push(Finding {
                location: Location::Object {
                    object: obj.id.clone(),
                },
                message: e.to_string(),
            }),
        }
    }
    (findings, steps)
}

fn identity_findings(log: &OCLog) -> Vec<Finding> {
    let mut findings = Vec::new();
    for obj in log.objects() {
        let mut groups: BTreeMap<(&str, Timestamp), Vec<&AttributeValue>> = BTreeMap::new();
        for c in obj.changes.iter().filter(|c| c.cause.is_none()) {
            groups
                .entry((c.attribute.as_str(), c.at))
                .or_default()
                .push(&c.value);
        }
        for ((attribute, at), values) in groups {
            if values.iter().any(|v| *v != values[0]) {
                findings.push(Finding {
                    location: Location::Change {
                        object: obj.id.clone(),
                        attribute: attribute.to_string(),
                        at,
                    },
                    message: format!("{} uncaused records with distinct values", values.len()),
                });
            }
        }
    }
    findings
}

/// Events at exactly `at` touching `object`.
pub fn candidate_events<'a>(log: &'a OCLog, object: &str, at: Timestamp) -> Vec<&'a EventId> {
    log.events_of(object)
        .filter(|e| e.timestamp == at)
        .map(|e| &e.id)
        .collect()
}

/// The single event a cause-less change can be attributed to, if any.
///
/// There must be exactly one event touching the object at the change's
/// instant, and attributing the change to it must not collide with another
/// record of the same attribute at that instant (another cause-less one, or
/// one already caused by that event).
pub fn unique_cause<'a>(
    log: &'a OCLog,
    obj: &Object,
    change: &AttributeChange,
) -> Option<&'a EventId> {
    let candidates = candidate_events(log, obj.id.as_str(), change.at);
    let [only] = candidates[..] else { return None };
    let collides = obj
        .changes
        .iter()
        .filter(|c| {
            !std::ptr::eq(*c, change) && c.attribute == change.attribute && c.at == change.at
        })
        .any(|c| c.cause.is_none() || c.cause.as_ref() == Some(only));
    (!collides).then_some(only)
}

/// Cause-less changes that cannot be attributed to exactly one event.
pub fn find_ambiguous_changes(log: &OCLog) -> Vec<Finding> {
    let mut findings = Vec::new();
    for obj in log.objects() {
        for change in obj.changes.iter().filter(|c| c.cause.is_none()) {
            if unique_cause(log, obj, change).is_some() {
                continue;
            }
            let candidates = candidate_events(log, obj.id.as_str(), change.at);
            let message = match candidates.len() {
                0 => "no event touches the object at this instant".to_string(),
                1 => format!(
                    "colliding records for the single candidate event {}",
                    candidates[0]
                ),
                n => format!(
                    "{n} simultaneous candidate events: {}",
                    candidates
                        .iter()
                        .map(|e| e.as_str())
                        .collect::<Vec<_>>()
                        .join(", ")
                ),
            };
            findings.push(Finding {
                location: Location::change(&obj.id, change),
                message,
            });
        }
    }
    findings.sort();
    findings
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicationMetrics {
    pub symmetric_duplicate_pairs: usize,
    pub stored_transitive_edges: usize,
}

pub fn duplication_metrics(log: &OCLog) -> DuplicationMetrics {
    let directed: BTreeSet<(&ObjectId, &ObjectId)> = log
        .relations()
        .filter(|r| r.source != r.target)
        .map(|r| (&r.source, &r.target))
        .collect();
    let symmetric_duplicate_pairs = directed
        .iter()
        .filter(|(a, b)| a < b && directed.contains(&(*b, *a)))
        .count();
    let all: Vec<&O2ORelation> = log.relations().collect();
    let stored_transitive_edges = all
        .iter()
        .enumerate()
        .filter(|(i, r)| {
            is_implied(
                r,
                all.iter()
                    .enumerate()
                    .filter(|(j, _)| j != i)
                    .map(|(_, o)| *o),
            )
        })
        .count();
    DuplicationMetrics {
        symmetric_duplicate_pairs,
        stored_transitive_edges,
    }
}

/// True when `edge` is implied by a path of two or more same-qualifier
/// edges from `others` at every instant it is valid.
pub(crate) fn is_implied<'a>(
    edge: &O2ORelation,
    others: impl IntoIterator<Item = &'a O2ORelation>,
) -> bool {
    if edge.source == edge.target {
        return false;
    }
    let same: Vec<&O2ORelation> = others
        .into_iter()
        .filter(|o| o.qualifier == edge.qualifier)
        .collect();
    let probes = probe_times(edge, &same);
    !probes.is_empty()
        && probes.iter().all(|&t| {
            let adjacency = graph::adjacency(
                same.iter()
                    .filter(|o| o.is_valid_at(t))
                    .map(|o| (o.source.clone(), o.target.clone())),
            );
            graph::reachable_without_edge(&adjacency, &edge.source, &edge.target)
        })
}

/// Instants covering every piece of `edge`'s validity on which the snapshot
/// of `others` is constant.
fn probe_times(edge: &O2ORelation, others: &[&O2ORelation]) -> Vec<Timestamp> {
    let mut bounds: BTreeSet<Timestamp> = others
        .iter()
        .copied()
        .chain(std::iter::once(edge))
        .flat_map(|r| [r.valid_from, r.valid_to])
        .flatten()
        .collect();
    let before = bounds
        .first()
        .map_or(Timestamp::EPOCH, |t| t.plus_millis(-1));
    bounds.insert(before);
    bounds
        .into_iter()
        .filter(|&t| edge.is_valid_at(t))
        .collect()
}
