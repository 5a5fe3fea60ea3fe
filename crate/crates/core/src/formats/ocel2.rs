//! OCEL 2.0 JSON and its refined superset.
//!
//! Both share one layout. The refined format adds `parent` on object types,
//! `cause` on attribute entries, and `validFrom`/`validTo`/`cause` on
//! object relationships. Initial attribute values are entries at the Unix
//! epoch; a change that genuinely happens at the epoch carries
//! `"initial": false`.

use std::collections::{BTreeSet, HashMap};

use serde_json::{Map, Value};

use super::{
    array_field, decode_value, effective_hints, finish, opt_str_field, parse_timestamp, read_meta,
    schema_from_json, schema_to_json, str_field, to_pretty_bytes, types_without_parents,
    write_extensions, FormatId, Warnings, W_NON_CHRONOLOGICAL,
};
use crate::error::CodecError;
use crate::loss::{LossRecord, LossReport};
use crate::model::{
    AttributeChange, E2ORelation, Event, EventType, LogParts, O2ORelation, OCLog, Object,
    ObjectType, Strictness,
};
use crate::time::Timestamp;
use crate::value::ValueKind;
use crate::CodecWarning;

pub(crate) const ROCEL_VERSION_KEY: &str = "rocelVersion";
const KNOWN_KEYS: [&str; 5] = [
    "objectTypes",
    "eventTypes",
    "objects",
    "events",
    ROCEL_VERSION_KEY,
];

#[derive(Clone, Copy, PartialEq, Eq)]
enum Flavor {
    Ocel2,
    Rocel,
}

pub fn write_ocel2(log: &OCLog) -> (Vec<u8>, LossReport) {
    write_with(log, Flavor::Ocel2)
}

pub fn write_rocel(log: &OCLog) -> Vec<u8> {
    write_with(log, Flavor::Rocel).0
}

pub fn read_ocel2(bytes: &[u8]) -> Result<(OCLog, Vec<CodecWarning>), CodecError> {
    read_with(bytes, Flavor::Ocel2)
}

pub fn read_rocel(bytes: &[u8]) -> Result<OCLog, CodecError> {
    read_with(bytes, Flavor::Rocel).map(|(log, _)| log)
}

fn write_with(log: &OCLog, flavor: Flavor) -> (Vec<u8>, LossReport) {
    let rich = flavor == Flavor::Rocel;
    let mut loss = LossReport::new();
    let mut doc = Map::new();

    let written_types = if rich {
        log.object_types().values().cloned().collect()
    } else {
        types_without_parents(log, &mut loss)
    };
    let hints = effective_hints(written_types.iter(), rich);
    doc.insert(
        "objectTypes".into(),
        Value::Array(
            written_types
                .iter()
                .map(|ty| {
                    let mut entry = Map::new();
                    entry.insert("name".into(), ty.name.clone().into());
                    entry.insert("attributes".into(), schema_to_json(&ty.attributes));
                    if let Some(parent) = &ty.parent {
                        entry.insert("parent".into(), parent.clone().into());
                    }
                    Value::Object(entry)
                })
                .collect(),
        ),
    );
    doc.insert(
        "eventTypes".into(),
        Value::Array(
            log.event_types()
                .values()
                .map(|ty| {
                    let mut entry = Map::new();
                    entry.insert("name".into(), ty.name.clone().into());
                    entry.insert("attributes".into(), schema_to_json(&ty.attributes));
                    Value::Object(entry)
                })
                .collect(),
        ),
    );

    let mut objects = Vec::new();
    for obj in log.objects() {
        let empty = Default::default();
        let schema = hints.get(&obj.object_type).unwrap_or(&empty);
        let mut attributes = Vec::new();
        for (name, value) in &obj.attributes {
            let mut entry = Map::new();
            entry.insert("name".into(), name.clone().into());
            entry.insert("time".into(), Timestamp::EPOCH.to_string().into());
            entry.insert("value".into(), value.to_json(schema.get(name).copied()));
            attributes.push(Value::Object(entry));
        }
        for change in &obj.changes {
            let mut entry = Map::new();
            entry.insert("name".into(), change.attribute.clone().into());
            entry.insert("time".into(), change.at.to_string().into());
            entry.insert(
                "value".into(),
                change.value.to_json(schema.get(&change.attribute).copied()),
            );
            if change.at == Timestamp::EPOCH {
                entry.insert("initial".into(), false.into());
            }
            if let Some(cause) = &change.cause {
                if rich {
                    entry.insert("cause".into(), cause.as_str().into());
                } else {
                    loss.push(LossRecord::DroppedCause {
                        object: obj.id.clone(),
                        change: change.clone(),
                    });
                }
            }
            attributes.push(Value::Object(entry));
        }
        let mut relationships = Vec::new();
        for rel in &obj.relations {
            let mut entry = Map::new();
            entry.insert("objectId".into(), rel.target.as_str().into());
            entry.insert("qualifier".into(), rel.qualifier.clone().into());
            if rich {
                if let Some(from) = rel.valid_from {
                    entry.insert("validFrom".into(), from.to_string().into());
                }
                if let Some(to) = rel.valid_to {
                    entry.insert("validTo".into(), to.to_string().into());
                }
                if let Some(cause) = &rel.change_cause {
                    entry.insert("cause".into(), cause.as_str().into());
                }
            } else if rel.is_time_scoped() || rel.change_cause.is_some() {
                loss.push(LossRecord::StrippedRelationScope {
                    relation: rel.clone(),
                });
            }
            relationships.push(Value::Object(entry));
        }
        let mut entry = Map::new();
        entry.insert("id".into(), obj.id.as_str().into());
        entry.insert("type".into(), obj.object_type.clone().into());
        entry.insert("attributes".into(), Value::Array(attributes));
        entry.insert("relationships".into(), Value::Array(relationships));
        objects.push(Value::Object(entry));
    }
    doc.insert("objects".into(), Value::Array(objects));

    let events = log
        .events()
        .iter()
        .map(|ev| {
            let schema = log.event_types().get(&ev.activity).map(|t| &t.attributes);
            let mut entry = Map::new();
            entry.insert("id".into(), ev.id.as_str().into());
            entry.insert("type".into(), ev.activity.clone().into());
            entry.insert("time".into(), ev.timestamp.to_string().into());
            entry.insert(
                "attributes".into(),
                Value::Array(
                    ev.attributes
                        .iter()
                        .map(|(name, value)| {
                            let hint = schema.and_then(|s| s.get(name).copied());
                            let mut attr = Map::new();
                            attr.insert("name".into(), name.clone().into());
                            attr.insert("value".into(), value.to_json(hint));
                            Value::Object(attr)
                        })
                        .collect(),
                ),
            );
            entry.insert(
                "relationships".into(),
                Value::Array(
                    ev.e2o
                        .iter()
                        .map(|link| {
                            let mut rel = Map::new();
                            rel.insert("objectId".into(), link.object.as_str().into());
                            rel.insert(
                                "qualifier".into(),
                                link.qualifier.clone().unwrap_or_default().into(),
                            );
                            Value::Object(rel)
                        })
                        .collect(),
                ),
            );
            Value::Object(entry)
        })
        .collect();
    doc.insert("events".into(), Value::Array(events));

    write_extensions(&mut doc, log.meta());
    if rich {
        doc.insert(ROCEL_VERSION_KEY.into(), 1.into());
    }
    (to_pretty_bytes(&Value::Object(doc)), loss)
}

fn read_with(bytes: &[u8], flavor: Flavor) -> Result<(OCLog, Vec<CodecWarning>), CodecError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| CodecError::malformed("/", e.to_string()))?;
    let Value::Object(doc) = doc else {
        return Err(CodecError::malformed("/", "expected a JSON object"));
    };
    let source = match flavor {
        Flavor::Ocel2 => FormatId::Ocel2Json,
        Flavor::Rocel => FormatId::RocelJson,
    };
    let root = Value::Object(doc.clone());
    let meta = read_meta(&doc, &KNOWN_KEYS, source)?;
    // refined-only fields are invisible to a plain OCEL 2.0 reader
    let rich = flavor == Flavor::Rocel;
    let mut warnings = Warnings::default();

    let mut object_types = Vec::new();
    for (i, raw) in array_field(&root, "objectTypes", "")?.iter().enumerate() {
        let path = format!("/objectTypes/{i}");
        object_types.push(ObjectType {
            name: str_field(raw, "name", &path)?.to_string(),
            parent: match rich {
                true => opt_str_field(raw, "parent", &path)?.map(str::to_string),
                false => None,
            },
            attributes: schema_from_json(raw.get("attributes"), &format!("{path}/attributes"))?,
        });
    }
    let hints = effective_hints(object_types.iter(), rich);

    let mut event_types = Vec::new();
    for (i, raw) in array_field(&root, "eventTypes", "")?.iter().enumerate() {
        let path = format!("/eventTypes/{i}");
        event_types.push(EventType {
            name: str_field(raw, "name", &path)?.to_string(),
            attributes: schema_from_json(raw.get("attributes"), &format!("{path}/attributes"))?,
        });
    }
    let event_hints: HashMap<&str, &EventType> =
        event_types.iter().map(|t| (t.name.as_str(), t)).collect();

    let mut events = Vec::new();
    for (i, raw) in array_field(&root, "events", "")?.iter().enumerate() {
        let path = format!("/events/{i}");
        let activity = str_field(raw, "type", &path)?;
        let time_path = format!("{path}/time");
        let timestamp = parse_timestamp(str_field(raw, "time", &path)?, &time_path, &mut warnings)
            .map_err(|e| CodecError::malformed(&time_path, e))?;
        let mut event = Event::new(str_field(raw, "id", &path)?, activity, timestamp);
        for (j, attr) in array_field(raw, "attributes", &path)?.iter().enumerate() {
            let here = format!("{path}/attributes/{j}");
            let name = str_field(attr, "name", &here)?;
            let hint = event_hints
                .get(activity)
                .and_then(|t| t.attributes.get(name).copied());
            let value = decode_value(
                attr.get("value").unwrap_or(&Value::Null),
                hint,
                &here,
                &mut warnings,
            )?;
            event.attributes.insert(name.to_string(), value);
        }
        for (j, rel) in array_field(raw, "relationships", &path)?.iter().enumerate() {
            let here = format!("{path}/relationships/{j}");
            let object = str_field(rel, "objectId", &here)?;
            let link = match opt_str_field(rel, "qualifier", &here)? {
                None | Some("") => E2ORelation::new(object),
                Some(q) => E2ORelation::qualified(object, q),
            };
            event.e2o.push(link);
        }
        events.push(event);
    }

    let mut objects = Vec::new();
    for (i, raw) in array_field(&root, "objects", "")?.iter().enumerate() {
        let path = format!("/objects/{i}");
        let mut obj = Object::new(str_field(raw, "id", &path)?, str_field(raw, "type", &path)?);
        let schema = hints.get(&obj.object_type);
        for (j, attr) in array_field(raw, "attributes", &path)?.iter().enumerate() {
            let here = format!("{path}/attributes/{j}");
            let name = str_field(attr, "name", &here)?;
            let hint = schema.and_then(|s| s.get(name).copied());
            let value = decode_value(
                attr.get("value").unwrap_or(&Value::Null),
                hint,
                &here,
                &mut warnings,
            )?;
            let at = match attr.get("time") {
                None | Some(Value::Null) => Timestamp::EPOCH,
                Some(Value::String(s)) => {
                    parse_timestamp(s, &format!("{here}/time"), &mut warnings)
                        .map_err(|e| CodecError::malformed(format!("{here}/time"), e))?
                }
                Some(_) => {
                    return Err(CodecError::malformed(
                        format!("{here}/time"),
                        "expected a string",
                    ))
                }
            };
            let cause = match rich {
                true => opt_str_field(attr, "cause", &here)?,
                false => None,
            };
            let forced_change = attr.get("initial").and_then(Value::as_bool) == Some(false);
            if at == Timestamp::EPOCH
                && cause.is_none()
                && !forced_change
                && !obj.attributes.contains_key(name)
            {
                obj.attributes.insert(name.to_string(), value);
                continue;
            }
            let mut change = AttributeChange::new(name, value, at);
            if let Some(cause) = cause {
                change = change.caused_by(cause);
            }
            obj.changes.push(change);
        }
        for (j, rel) in array_field(raw, "relationships", &path)?.iter().enumerate() {
            let here = format!("{path}/relationships/{j}");
            let target = str_field(rel, "objectId", &here)?;
            let qualifier = str_field(rel, "qualifier", &here)?;
            let mut relation = O2ORelation::new(obj.id.clone(), target, qualifier);
            if !rich {
                obj.relations.push(relation);
                continue;
            }
            let bound =
                |key: &str, warnings: &mut Warnings| -> Result<Option<Timestamp>, CodecError> {
                    opt_str_field(rel, key, &here)?
                        .map(|s| {
                            parse_timestamp(s, &format!("{here}/{key}"), warnings)
                                .map_err(|e| CodecError::malformed(format!("{here}/{key}"), e))
                        })
                        .transpose()
                };
            relation.valid_from = bound("validFrom", &mut warnings)?;
            relation.valid_to = bound("validTo", &mut warnings)?;
            relation.change_cause = opt_str_field(rel, "cause", &here)?.map(Into::into);
            obj.relations.push(relation);
        }
        objects.push(obj);
    }

    if flavor == Flavor::Ocel2 {
        check_chronology(&objects, &events, meta.mode, &mut warnings)?;
    }

    let parts = LogParts {
        object_types,
        event_types,
        objects,
        events,
        meta,
    };
    let log = finish(parts)?;
    Ok((log, warnings.into_vec()))
}

/// Flags changes stamped before the first event touching their object.
fn check_chronology(
    objects: &[Object],
    events: &[Event],
    mode: Strictness,
    warnings: &mut Warnings,
) -> Result<(), CodecError> {
    let mut first_seen: HashMap<&str, Timestamp> = HashMap::new();
    for ev in events {
        let touched: BTreeSet<&str> = ev.e2o.iter().map(|l| l.object.as_str()).collect();
        for o in touched {
            first_seen
                .entry(o)
                .and_modify(|t| *t = (*t).min(ev.timestamp))
                .or_insert(ev.timestamp);
        }
    }
    for obj in objects {
        let Some(&first) = first_seen.get(obj.id.as_str()) else {
            continue;
        };
        for change in &obj.changes {
            if change.at < first {
                if mode == Strictness::Strict {
                    return Err(CodecError::NonChronologicalChange {
                        object: obj.id.clone(),
                        attribute: change.attribute.clone(),
                        at: change.at,
                    });
                }
                warnings.push(
                    W_NON_CHRONOLOGICAL,
                    format!("object {} attribute {}", obj.id, change.attribute),
                    format!(
                        "change at {} precedes the object's first event at {first}",
                        change.at
                    ),
                );
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn kind_of(schema: Option<&crate::model::Schema>, name: &str) -> Option<ValueKind> {
    schema.and_then(|s| s.get(name).copied())
}
