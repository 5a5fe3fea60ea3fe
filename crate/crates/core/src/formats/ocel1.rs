//! OCEL 1.0 JSON.
//!
//! Declared attribute kinds are kept under `oclog:*-schemas` keys inside
//! `ocel:global-log`; without them kinds are inferred from the values.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde_json::{Map, Value};

use super::{
    decode_value, effective_hints, finish, parse_timestamp, schema_from_json, schema_to_json,
    str_field, to_pretty_bytes, types_without_parents, FormatId, Warnings, META_KEY,
    W_AMBIGUOUS_TARGET,
};
use crate::error::CodecError;
use crate::loss::{LossRecord, LossReport};
use crate::model::{
    E2ORelation, Event, EventType, LogMeta, LogParts, OCLog, Object, ObjectType, Schema,
};
use crate::CodecWarning;

const GLOBAL_LOG: &str = "ocel:global-log";
const GLOBAL_EVENT: &str = "ocel:global-event";
const GLOBAL_OBJECT: &str = "ocel:global-object";
const EVENTS: &str = "ocel:events";
const OBJECTS: &str = "ocel:objects";
const OBJECT_SCHEMAS: &str = "oclog:object-type-schemas";
const EVENT_SCHEMAS: &str = "oclog:event-type-schemas";
const KNOWN_KEYS: [&str; 5] = [GLOBAL_LOG, GLOBAL_EVENT, GLOBAL_OBJECT, EVENTS, OBJECTS];

pub fn write_ocel1(log: &OCLog) -> (Vec<u8>, LossReport) {
    let mut loss = LossReport::new();
    let mut doc = Map::new();

    let mut attribute_names = BTreeSet::new();
    let mut object_schemas = Map::new();
    let written_types = types_without_parents(log, &mut loss);
    for ty in &written_types {
        object_schemas.insert(ty.name.clone(), schema_to_json(&ty.attributes));
        attribute_names.extend(ty.attributes.keys().cloned());
    }
    let hints = effective_hints(written_types.iter(), false);
    let mut event_schemas = Map::new();
    for ty in log.event_types().values() {
        event_schemas.insert(ty.name.clone(), schema_to_json(&ty.attributes));
        attribute_names.extend(ty.attributes.keys().cloned());
    }

    let mut events = Map::new();
    for ev in log.events() {
        if ev.e2o.iter().any(|l| l.qualifier.is_some()) {
            loss.push(LossRecord::DroppedQualifiers {
                event: ev.id.clone(),
                links: ev.e2o.clone(),
            });
        }
        let mut omap: Vec<&str> = Vec::new();
        for link in &ev.e2o {
            if !omap.contains(&link.object.as_str()) {
                omap.push(link.object.as_str());
            }
        }
        let schema = log.event_types().get(&ev.activity).map(|t| &t.attributes);
        let vmap: Map<String, Value> = ev
            .attributes
            .iter()
            .map(|(k, v)| {
                attribute_names.insert(k.clone());
                (k.clone(), v.to_json(schema.and_then(|s| s.get(k).copied())))
            })
            .collect();
        let mut entry = Map::new();
        entry.insert("ocel:activity".into(), ev.activity.clone().into());
        entry.insert("ocel:timestamp".into(), ev.timestamp.to_string().into());
        entry.insert("ocel:omap".into(), omap.into());
        entry.insert("ocel:vmap".into(), Value::Object(vmap));
        events.insert(ev.id.to_string(), Value::Object(entry));
    }

    let mut objects = Map::new();
    for obj in log.objects() {
        for rel in &obj.relations {
            loss.push(LossRecord::DroppedRelation {
                relation: rel.clone(),
            });
        }
        for change in &obj.changes {
            loss.push(LossRecord::DroppedChange {
                object: obj.id.clone(),
                change: change.clone(),
            });
        }
        let schema = hints.get(&obj.object_type);
        let ovmap: Map<String, Value> = obj
            .attributes
            .iter()
            .map(|(k, v)| {
                attribute_names.insert(k.clone());
                (k.clone(), v.to_json(schema.and_then(|s| s.get(k).copied())))
            })
            .collect();
        let mut entry = Map::new();
        entry.insert("ocel:type".into(), obj.object_type.clone().into());
        entry.insert("ocel:ovmap".into(), Value::Object(ovmap));
        objects.insert(obj.id.to_string(), Value::Object(entry));
    }

    let mut global = Map::new();
    global.insert("ocel:version".into(), "1.0".into());
    global.insert("ocel:ordering".into(), "timestamp".into());
    global.insert(
        "ocel:attribute-names".into(),
        attribute_names.into_iter().collect::<Vec<_>>().into(),
    );
    global.insert(
        "ocel:object-types".into(),
        log.object_types()
            .keys()
            .cloned()
            .collect::<Vec<_>>()
            .into(),
    );
    global.insert(OBJECT_SCHEMAS.into(), Value::Object(object_schemas));
    global.insert(EVENT_SCHEMAS.into(), Value::Object(event_schemas));
    global.insert(META_KEY.into(), super::meta_to_json(log.meta()));
    doc.insert(GLOBAL_LOG.into(), Value::Object(global));
    doc.insert(
        GLOBAL_EVENT.into(),
        serde_json::json!({"ocel:activity": "__INVALID__"}),
    );
    doc.insert(
        GLOBAL_OBJECT.into(),
        serde_json::json!({"ocel:type": "__INVALID__"}),
    );
    doc.insert(EVENTS.into(), Value::Object(events));
    doc.insert(OBJECTS.into(), Value::Object(objects));
    for (k, v) in &log.meta().extensions {
        doc.entry(k.clone()).or_insert_with(|| v.clone());
    }
    (to_pretty_bytes(&Value::Object(doc)), loss)
}

pub fn read_ocel1(bytes: &[u8]) -> Result<(OCLog, Vec<CodecWarning>), CodecError> {
    let doc: Value =
        serde_json::from_slice(bytes).map_err(|e| CodecError::malformed("/", e.to_string()))?;
    let Value::Object(doc) = doc else {
        return Err(CodecError::malformed("/", "expected a JSON object"));
    };
    let empty = Map::new();
    let global = match doc.get(GLOBAL_LOG) {
        None => &empty,
        Some(Value::Object(g)) => g,
        Some(_) => return Err(CodecError::malformed(GLOBAL_LOG, "expected an object")),
    };
    let mut meta = match global.get(META_KEY) {
        Some(raw) => serde_json::from_value::<LogMeta>(raw.clone()).map_err(|e| {
            CodecError::malformed(format!("{GLOBAL_LOG}/{META_KEY}"), e.to_string())
        })?,
        None => LogMeta {
            source_format: Some(FormatId::Ocel1Json.name().to_string()),
            ..LogMeta::default()
        },
    };
    meta.extensions = doc
        .iter()
        .filter(|(k, _)| !KNOWN_KEYS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    let declared_objects = declared_schemas(global.get(OBJECT_SCHEMAS), OBJECT_SCHEMAS)?;
    let declared_events = declared_schemas(global.get(EVENT_SCHEMAS), EVENT_SCHEMAS)?;
    let mut warnings = Warnings::default();

    let objects_raw = object_entries(&doc, OBJECTS)?;
    let mut objects = Vec::new();
    let mut inferred_objects: BTreeMap<String, Schema> = BTreeMap::new();
    for (id, raw) in objects_raw {
        let path = format!("/{OBJECTS}/{id}");
        let ty = str_field(raw, "ocel:type", &path)?;
        let mut obj = Object::new(id.as_str(), ty);
        let schema = declared_objects.get(ty);
        let inferred = inferred_objects.entry(ty.to_string()).or_default();
        for (name, value) in map_field(raw, "ocel:ovmap", &path)? {
            let here = format!("{path}/ocel:ovmap/{name}");
            let hint = schema.and_then(|s| s.get(name).copied());
            let value = decode_value(value, hint, &here, &mut warnings)?;
            if let Some(kind) = value.kind() {
                inferred.entry(name.clone()).or_insert(kind);
            }
            obj.attributes.insert(name.clone(), value);
        }
        objects.push(obj);
    }

    let mut type_names: BTreeSet<String> = inferred_objects.keys().cloned().collect();
    if let Some(Value::Array(names)) = global.get("ocel:object-types") {
        type_names.extend(names.iter().filter_map(Value::as_str).map(str::to_string));
    }
    type_names.extend(declared_objects.keys().cloned());
    let object_types: Vec<ObjectType> = type_names
        .into_iter()
        .map(|name| {
            let attributes = declared_objects
                .get(&name)
                .cloned()
                .or_else(|| inferred_objects.get(&name).cloned())
                .unwrap_or_default();
            ObjectType {
                name,
                parent: None,
                attributes,
            }
        })
        .collect();
    let object_schema: HashMap<&str, &ObjectType> =
        object_types.iter().map(|t| (t.name.as_str(), t)).collect();
    let object_by_id: HashMap<&str, &Object> = objects.iter().map(|o| (o.id.as_str(), o)).collect();

    let mut events = Vec::new();
    let mut inferred_events: BTreeMap<String, Schema> = BTreeMap::new();
    for (id, raw) in object_entries(&doc, EVENTS)? {
        let path = format!("/{EVENTS}/{id}");
        let activity = str_field(raw, "ocel:activity", &path)?;
        let time_path = format!("{path}/ocel:timestamp");
        let timestamp = parse_timestamp(
            str_field(raw, "ocel:timestamp", &path)?,
            &time_path,
            &mut warnings,
        )
        .map_err(|e| CodecError::malformed(&time_path, e))?;
        let mut event = Event::new(id.as_str(), activity, timestamp);
        match raw.get("ocel:omap") {
            None | Some(Value::Null) => {}
            Some(Value::Array(ids)) => {
                for (j, o) in ids.iter().enumerate() {
                    let o = o.as_str().ok_or_else(|| {
                        CodecError::malformed(format!("{path}/ocel:omap/{j}"), "expected a string")
                    })?;
                    if !event.e2o.iter().any(|l| l.object.as_str() == o) {
                        event.e2o.push(E2ORelation::new(o));
                    }
                }
            }
            Some(_) => {
                return Err(CodecError::malformed(
                    format!("{path}/ocel:omap"),
                    "expected an array",
                ))
            }
        }
        let schema = declared_events.get(activity);
        let inferred = inferred_events.entry(activity.to_string()).or_default();
        for (name, value) in map_field(raw, "ocel:vmap", &path)? {
            let here = format!("{path}/ocel:vmap/{name}");
            let hint = schema.and_then(|s| s.get(name).copied());
            let value = decode_value(value, hint, &here, &mut warnings)?;
            if let Some(kind) = value.kind() {
                inferred.entry(name.clone()).or_insert(kind);
            }
            for link in &event.e2o {
                let Some(obj) = object_by_id.get(link.object.as_str()) else {
                    continue;
                };
                let declared = object_schema
                    .get(obj.object_type.as_str())
                    .is_some_and(|t| t.attributes.contains_key(name));
                if declared || obj.attributes.contains_key(name) {
                    warnings.push(
                        W_AMBIGUOUS_TARGET,
                        here.clone(),
                        format!(
                            "event attribute {name:?} may belong to related object {}",
                            obj.id
                        ),
                    );
                    break;
                }
            }
            event.attributes.insert(name.clone(), value);
        }
        events.push(event);
    }

    let mut activity_names: BTreeSet<String> = inferred_events.keys().cloned().collect();
    activity_names.extend(declared_events.keys().cloned());
    let event_types = activity_names
        .into_iter()
        .map(|name| {
            let attributes = declared_events
                .get(&name)
                .cloned()
                .or_else(|| inferred_events.get(&name).cloned())
                .unwrap_or_default();
            EventType { name, attributes }
        })
        .collect();

    let log = finish(LogParts {
        object_types,
        event_types,
        objects,
        events,
        meta,
    })?;
    Ok((log, warnings.into_vec()))
}

fn declared_schemas(
    raw: Option<&Value>,
    path: &str,
) -> Result<BTreeMap<String, Schema>, CodecError> {
    let mut out = BTreeMap::new();
    match raw {
        None | Some(Value::Null) => {}
        Some(Value::Object(entries)) => {
            for (name, schema) in entries {
                out.insert(
                    name.clone(),
                    schema_from_json(Some(schema), &format!("{path}/{name}"))?,
                );
            }
        }
        Some(_) => return Err(CodecError::malformed(path, "expected an object")),
    }
    Ok(out)
}

fn object_entries<'a>(
    doc: &'a Map<String, Value>,
    key: &str,
) -> Result<Vec<(&'a String, &'a Value)>, CodecError> {
    match doc.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Object(entries)) => Ok(entries.iter().collect()),
        Some(_) => Err(CodecError::malformed(
            format!("/{key}"),
            "expected an object",
        )),
    }
}

fn map_field<'a>(
    value: &'a Value,
    key: &str,
    path: &str,
) -> Result<Vec<(&'a String, &'a Value)>, CodecError> {
    match value.get(key) {
        None | Some(Value::Null) => Ok(Vec::new()),
        Some(Value::Object(entries)) => Ok(entries.iter().collect()),
        Some(_) => Err(CodecError::malformed(
            format!("{path}/{key}"),
            "expected an object",
        )),
    }
}
