//! Trace recovery, flattening onto a single case notion, and log statistics.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::QueryError;
use crate::formats::{self, FormatId};
use crate::model::{EventId, OCLog, ObjectId};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub event: EventId,
    pub activity: String,
    pub timestamp: Timestamp,
    pub qualifier: Option<String>,
}

/// The events involving one object, in event order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub object: ObjectId,
    pub steps: Vec<TraceStep>,
}

pub fn trace_of(log: &OCLog, object: &str) -> Result<Trace, QueryError> {
    let obj = log
        .object(object)
        .ok_or_else(|| QueryError::UnknownObject(ObjectId::new(object)))?;
    let steps = log
        .events_of(object)
        .map(|ev| TraceStep {
            event: ev.id.clone(),
            activity: ev.activity.clone(),
            timestamp: ev.timestamp,
            qualifier: ev
                .e2o
                .iter()
                .find(|l| l.object == obj.id)
                .and_then(|l| l.qualifier.clone()),
        })
        .collect();
    Ok(Trace {
        object: obj.id.clone(),
        steps,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlattenResult {
    pub case_type: String,
    /// Case id to its events in event order.
    pub cases: BTreeMap<ObjectId, Vec<EventId>>,
    /// Extra copies made of events that belong to more than one case.
    pub convergence_count: usize,
    /// (case, foreign object type) pairs whose case events touch two or
    /// more instances of that type.
    pub divergence_count: usize,
    /// Events related to no instance of the case type.
    pub orphan_events: Vec<EventId>,
}

/// Projects the log onto `case_type`; instances of its subtypes are cases too.
pub fn flatten(log: &OCLog, case_type: &str) -> Result<FlattenResult, QueryError> {
    if !log.object_types().contains_key(case_type) {
        return Err(QueryError::UnknownType(case_type.to_string()));
    }
    let is_case = |id: &ObjectId| {
        log.object(id.as_str())
            .is_some_and(|o| log.is_subtype_of(&o.object_type, case_type))
    };
    let mut cases: BTreeMap<ObjectId, Vec<EventId>> = log
        .objects()
        .iter()
        .filter(|o| log.is_subtype_of(&o.object_type, case_type))
        .map(|o| (o.id.clone(), Vec::new()))
        .collect();
    let mut convergence_count = 0;
    let mut orphan_events = Vec::new();
    let mut foreign: BTreeMap<&ObjectId, BTreeMap<&str, BTreeSet<&ObjectId>>> = BTreeMap::new();
    for ev in log.events() {
        let case_ids: BTreeSet<&ObjectId> = ev
            .e2o
            .iter()
            .map(|l| &l.object)
            .filter(|o| is_case(o))
            .collect();
        if case_ids.is_empty() {
            orphan_events.push(ev.id.clone());
            continue;
        }
        convergence_count += case_ids.len() - 1;
        for case in &case_ids {
            cases
                .get_mut(*case)
                .expect("case exists")
                .push(ev.id.clone());
            let spans = foreign.entry(*case).or_default();
            for link in ev.e2o.iter().filter(|l| !is_case(&l.object)) {
                if let Some(obj) = log.object(link.object.as_str()) {
                    spans
                        .entry(obj.object_type.as_str())
                        .or_default()
                        .insert(&obj.id);
                }
            }
        }
    }
    let divergence_count = foreign
        .values()
        .flat_map(|by_type| by_type.values())
        .filter(|instances| instances.len() >= 2)
        .count();
    Ok(FlattenResult {
        case_type: case_type.to_string(),
        cases,
        convergence_count,
        divergence_count,
        orphan_events,
    })
}

/// Case-centric CSV: one row per (case, event).
pub fn flatten_to_csv(log: &OCLog, result: &FlattenResult) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer
        .write_record(["case_id", "activity", "timestamp", "event_id"])
        .expect("in-memory csv");
    for (case, events) in &result.cases {
        for id in events {
            let ev = log.event(id.as_str()).expect("flattened events exist");
            writer
                .write_record([
                    case.as_str(),
                    &ev.activity,
                    &ev.timestamp.to_string(),
                    ev.id.as_str(),
                ])
                .expect("in-memory csv");
        }
    }
    writer.into_inner().expect("in-memory csv")
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogStats {
    pub events: usize,
    pub objects: usize,
    pub e2o_links: usize,
    pub relations: usize,
    pub changes: usize,
    pub events_per_activity: BTreeMap<String, usize>,
    pub objects_per_type: BTreeMap<String, usize>,
    pub relations_per_qualifier: BTreeMap<String, usize>,
    pub changes_per_attribute: BTreeMap<String, usize>,
    /// Serialized size in bytes per writable format.
    pub codec_bytes: BTreeMap<FormatId, usize>,
}

pub fn log_stats(log: &OCLog) -> LogStats {
    let mut stats = LogStats {
        events: log.events().len(),
        objects: log.objects().len(),
        ..Default::default()
    };
    for ev in log.events() {
        *stats
            .events_per_activity
            .entry(ev.activity.clone())
            .or_default() += 1;
        stats.e2o_links += ev.e2o.len();
    }
    for obj in log.objects() {
        *stats
            .objects_per_type
            .entry(obj.object_type.clone())
            .or_default() += 1;
        for rel in &obj.relations {
            *stats
                .relations_per_qualifier
                .entry(rel.qualifier.clone())
                .or_default() += 1;
            stats.relations += 1;
        }
        for change in &obj.changes {
            *stats
                .changes_per_attribute
                .entry(change.attribute.clone())
                .or_default() += 1;
            stats.changes += 1;
        }
    }
    stats.codec_bytes = codec_sizes(log);
    stats
}

pub fn codec_sizes(log: &OCLog) -> BTreeMap<FormatId, usize> {
    FormatId::ALL
        .iter()
        .map(|&f| (f, formats::write(f, log).0.len()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{E2ORelation, Event, EventType, LogParts, Object, ObjectType, Strictness};

    fn ts(ms: i64) -> Timestamp {
        Timestamp::from_millis(ms)
    }

    fn shop() -> OCLog {
        OCLog::build(
            LogParts {
                object_types: vec![ObjectType::new("Order"), ObjectType::new("Item")],
                event_types: vec![EventType::new("place"), EventType::new("pack")],
                objects: vec![
                    Object::new("o1", "Order"),
                    Object::new("i1", "Item"),
                    Object::new("i2", "Item"),
                ],
                events: vec![
                    Event::new("e2", "place", ts(1))
                        .with_object(E2ORelation::new("o1"))
                        .with_object(E2ORelation::new("i1"))
                        .with_object(E2ORelation::new("i2")),
                    Event::new("e1", "pack", ts(1))
                        .with_object(E2ORelation::qualified("i1", "packed"))
                        .with_object(E2ORelation::new("i2")),
                ],
                meta: Default::default(),
            },
            Strictness::Lax,
        )
        .unwrap()
    }

    #[test]
    fn traces_follow_timestamp_then_id() {
        let log = shop();
        let trace = trace_of(&log, "i1").unwrap();
        let ids: Vec<&str> = trace.steps.iter().map(|s| s.event.as_str()).collect();
        assert_eq!(ids, ["e1", "e2"]);
        assert_eq!(trace.steps[0].qualifier.as_deref(), Some("packed"));
        assert!(matches!(
            trace_of(&log, "zz"),
            Err(QueryError::UnknownObject(_))
        ));
    }

    #[test]
    fn flatten_by_item_counts_convergence() {
        let result = flatten(&shop(), "Item").unwrap();
        assert_eq!(result.cases.len(), 2);
        // e1 and e2 each copied into both item cases
        assert_eq!(result.convergence_count, 2);
        // each item case touches just o1
        assert_eq!(result.divergence_count, 0);
        assert!(result.orphan_events.is_empty());
    }

    #[test]
    fn flatten_by_order_counts_divergence() {
        let result = flatten(&shop(), "Order").unwrap();
        assert_eq!(result.convergence_count, 0);
        assert_eq!(result.divergence_count, 1);
        assert_eq!(result.orphan_events, vec![EventId::new("e1")]);
        let csv = String::from_utf8(flatten_to_csv(&shop(), &result)).unwrap();
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.starts_with("case_id,activity,timestamp,event_id\n"));
    }

    #[test]
    fn unknown_case_type() {
        assert!(matches!(
            flatten(&shop(), "Nope"),
            Err(QueryError::UnknownType(_))
        ));
    }

    #[test]
    fn empty_log_stats_are_zero() {
        let stats = log_stats(&OCLog::empty());
        assert_eq!(stats.events, 0);
        assert_eq!(stats.objects, 0);
        assert!(stats.events_per_activity.is_empty());
        assert_eq!(stats.codec_bytes.len(), 4);
    }
}
