//! DOCEL tables: UTF-8 CSV files described by a JSON manifest.
//!
//! Cells holding attribute values are JSON literals; an empty cell means the
//! attribute is absent. Dynamic attribute tables key each change by both the
//! object and the causing event.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::io::{Cursor, Read, Write};
use std::path::Path;

use serde_json::{Map, Value};

use super::{
    decode_value, effective_hints, finish, read_meta, schema_from_json, schema_to_json, str_field,
    to_pretty_bytes, types_without_parents, write_extensions, FormatId, Warnings, W_UNKNOWN_CAUSE,
};
use crate::error::CodecError;
use crate::loss::{LossRecord, LossReport};
use crate::model::{
    AttributeChange, E2ORelation, Event, EventType, LogParts, OCLog, Object, ObjectType,
};
use crate::time::Timestamp;
use crate::value::{AttributeValue, ValueKind};
use crate::CodecWarning;

pub const MANIFEST_FILE: &str = "manifest.json";
/// Cause column value for a change whose causing event is unknown.
pub const UNKNOWN_CAUSE: &str = "UNKNOWN";
pub(crate) const VERSION_KEY: &str = "docelVersion";
const EVENTS_FILE: &str = "events.csv";
const ATTR_PREFIX: &str = "attr:";
const KNOWN_KEYS: [&str; 4] = [VERSION_KEY, "tables", "objectTypes", "eventTypes"];

/// The files of a table bundle, by name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TableBundle {
    pub files: BTreeMap<String, Vec<u8>>,
}

impl TableBundle {
    pub fn from_dir(dir: &Path) -> Result<Self, CodecError> {
        let mut files = BTreeMap::new();
        for entry in std::fs::read_dir(dir)? {
            let entry = entry?;
            if entry.file_type()?.is_file() {
                files.insert(
                    entry.file_name().to_string_lossy().into_owned(),
                    std::fs::read(entry.path())?,
                );
            }
        }
        Ok(TableBundle { files })
    }

    pub fn write_dir(&self, dir: &Path) -> Result<(), CodecError> {
        std::fs::create_dir_all(dir)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes)?;
        }
        Ok(())
    }

    pub fn from_zip(bytes: &[u8]) -> Result<Self, CodecError> {
        let bad = |e: zip::result::ZipError| CodecError::malformed("zip", e.to_string());
        let mut archive = zip::ZipArchive::new(Cursor::new(bytes)).map_err(bad)?;
        let mut files = BTreeMap::new();
        for i in 0..archive.len() {
            let mut file = archive.by_index(i).map_err(bad)?;
            if file.is_dir() {
                continue;
            }
            let name = file
                .name()
                .rsplit('/')
                .next()
                .unwrap_or_default()
                .to_string();
            let mut content = Vec::new();
            file.read_to_end(&mut content)?;
            files.insert(name, content);
        }
        Ok(TableBundle { files })
    }

    /// Deterministic archive: sorted members, fixed modification time.
    pub fn to_zip(&self) -> Vec<u8> {
        let mut writer = zip::ZipWriter::new(Cursor::new(Vec::new()));
        let options = zip::write::SimpleFileOptions::default()
            .compression_method(zip::CompressionMethod::Deflated)
            .last_modified_time(zip::DateTime::default())
            .unix_permissions(0o644);
        for (name, bytes) in &self.files {
            writer
                .start_file(name.as_str(), options)
                .expect("in-memory zip");
            writer.write_all(bytes).expect("in-memory zip");
        }
        writer.finish().expect("in-memory zip").into_inner()
    }

    fn get(&self, name: &str) -> Result<&[u8], CodecError> {
        self.files
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| CodecError::malformed(name, "table listed in the manifest is missing"))
    }
}

fn table_name(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}

fn csv_bytes(header: &[String], rows: &[Vec<String>]) -> Vec<u8> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    writer.write_record(header).expect("in-memory csv");
    for row in rows {
        writer.write_record(row).expect("in-memory csv");
    }
    writer.into_inner().expect("in-memory csv")
}

fn cell(value: Option<&AttributeValue>, hint: Option<ValueKind>) -> String {
    value.map_or_else(String::new, |v| v.to_json(hint).to_string())
}

pub fn write_docel(log: &OCLog) -> (TableBundle, LossReport) {
    let mut loss = LossReport::new();
    let mut files = BTreeMap::new();
    let mut tables = Vec::new();

    let written_types = types_without_parents(log, &mut loss);
    let hints = effective_hints(written_types.iter(), false);

    // events
    let attr_names: BTreeSet<&String> = log
        .events()
        .iter()
        .flat_map(|e| e.attributes.keys())
        .collect();
    let mut header: Vec<String> = ["event_id", "activity", "timestamp", "objects"]
        .map(String::from)
        .to_vec();
    header.extend(attr_names.iter().map(|n| format!("{ATTR_PREFIX}{n}")));
    let mut rows = Vec::new();
    for ev in log.events() {
        if ev.e2o.iter().any(|l| l.qualifier.is_some()) {
            loss.push(LossRecord::DroppedQualifiers {
                event: ev.id.clone(),
                links: ev.e2o.clone(),
            });
        }
        let mut ids: Vec<&str> = Vec::new();
        for link in &ev.e2o {
            if !ids.contains(&link.object.as_str()) {
                ids.push(link.object.as_str());
            }
        }
        let schema = log.event_types().get(&ev.activity).map(|t| &t.attributes);
        let mut row = vec![
            ev.id.to_string(),
            ev.activity.clone(),
            ev.timestamp.to_string(),
            serde_json::to_string(&ids).expect("ids serialize"),
        ];
        row.extend(attr_names.iter().map(|n| {
            cell(
                ev.attributes.get(*n),
                schema.and_then(|s| s.get(*n).copied()),
            )
        }));
        rows.push(row);
    }
    tables.push(serde_json::json!({"file": EVENTS_FILE, "role": "events", "columns": header}));
    files.insert(EVENTS_FILE.to_string(), csv_bytes(&header, &rows));

    // static object tables, one per type
    let mut dynamic: BTreeMap<(&str, &str), Vec<(&Object, &AttributeChange)>> = BTreeMap::new();
    for (ti, ty) in log.object_types().values().enumerate() {
        let members: Vec<&Object> = log
            .objects()
            .iter()
            .filter(|o| o.object_type == ty.name)
            .collect();
        let mut columns: BTreeSet<&String> = ty.attributes.keys().collect();
        columns.extend(members.iter().flat_map(|o| o.attributes.keys()));
        let schema = &hints[&ty.name];
        let mut header = vec!["object_id".to_string()];
        header.extend(columns.iter().map(|c| c.to_string()));
        let mut rows = Vec::new();
        for obj in &members {
            for rel in &obj.relations {
                loss.push(LossRecord::DroppedRelation {
                    relation: rel.clone(),
                });
            }
            let mut row = vec![obj.id.to_string()];
            row.extend(
                columns
                    .iter()
                    .map(|c| cell(obj.attributes.get(*c), schema.get(*c).copied())),
            );
            rows.push(row);
            for change in &obj.changes {
                dynamic
                    .entry((ty.name.as_str(), change.attribute.as_str()))
                    .or_default()
                    .push((obj, change));
            }
        }
        let file = format!("objects_{ti:03}_{}.csv", table_name(&ty.name));
        tables.push(serde_json::json!({"file": file, "role": "objects", "objectType": ty.name, "columns": header}));
        files.insert(file, csv_bytes(&header, &rows));
    }

    // dynamic attribute tables, one per (type, attribute)
    let header: Vec<String> = ["change_id", "value", "event_id", "object_id"]
        .map(String::from)
        .to_vec();
    let mut change_no = 0usize;
    for (di, ((ty, attr), changes)) in dynamic.iter().enumerate() {
        let hint = hints.get(*ty).and_then(|s| s.get(*attr).copied());
        let mut rows = Vec::new();
        for (obj, change) in changes {
            change_no += 1;
            let cause = match &change.cause {
                Some(c) => c.to_string(),
                None => {
                    loss.push(LossRecord::DroppedChange {
                        object: obj.id.clone(),
                        change: (*change).clone(),
                    });
                    UNKNOWN_CAUSE.to_string()
                }
            };
            rows.push(vec![
                format!("c{change_no}"),
                cell(Some(&change.value), hint),
                cause,
                obj.id.to_string(),
            ]);
        }
        let file = format!(
            "dynamic_{di:03}_{}_{}.csv",
            table_name(ty),
            table_name(attr)
        );
        tables.push(serde_json::json!({
            "file": file, "role": "dynamic_attribute", "objectType": ty, "attribute": attr, "columns": header
        }));
        files.insert(file, csv_bytes(&header, &rows));
    }

    let mut manifest = Map::new();
    manifest.insert(VERSION_KEY.into(), 1.into());
    manifest.insert("tables".into(), Value::Array(tables));
    manifest.insert(
        "objectTypes".into(),
        Value::Array(
            written_types
                .iter()
                .map(|t| serde_json::json!({"name": t.name, "attributes": schema_to_json(&t.attributes)}))
                .collect(),
        ),
    );
    manifest.insert(
        "eventTypes".into(),
        Value::Array(
            log.event_types()
                .values()
                .map(|t| serde_json::json!({"name": t.name, "attributes": schema_to_json(&t.attributes)}))
                .collect(),
        ),
    );
    write_extensions(&mut manifest, log.meta());
    files.insert(
        MANIFEST_FILE.to_string(),
        to_pretty_bytes(&Value::Object(manifest)),
    );
    (TableBundle { files }, loss)
}

struct Table {
    name: String,
    columns: HashMap<String, usize>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn parse(name: &str, bytes: &[u8], required: &[&str]) -> Result<Table, CodecError> {
        let bad = |row: usize, message: String| CodecError::MalformedTable {
            table: name.to_string(),
            row,
            message,
        };
        let mut reader = csv::ReaderBuilder::new().from_reader(bytes);
        let header = reader.headers().map_err(|e| bad(0, e.to_string()))?.clone();
        let columns: HashMap<String, usize> = header
            .iter()
            .enumerate()
            .map(|(i, h)| (h.to_string(), i))
            .collect();
        for col in required {
            if !columns.contains_key(*col) {
                return Err(bad(0, format!("missing column {col:?}")));
            }
        }
        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            rows.push(record.map_err(|e| bad(i + 1, e.to_string()))?);
        }
        Ok(Table {
            name: name.to_string(),
            columns,
            rows,
        })
    }

    fn get<'a>(&self, row: &'a csv::StringRecord, column: &str) -> &'a str {
        self.columns
            .get(column)
            .and_then(|&i| row.get(i))
            .unwrap_or("")
    }

    fn malformed(&self, row: usize, message: impl Into<String>) -> CodecError {
        CodecError::MalformedTable {
            table: self.name.clone(),
            row,
            message: message.into(),
        }
    }

    fn foreign_key(&self, row: usize, message: impl Into<String>) -> CodecError {
        CodecError::ForeignKeyViolation {
            table: self.name.clone(),
            row,
            message: message.into(),
        }
    }

    fn value(
        &self,
        row: usize,
        text: &str,
        hint: Option<ValueKind>,
        warnings: &mut Warnings,
    ) -> Result<Option<AttributeValue>, CodecError> {
        if text.is_empty() {
            return Ok(None);
        }
        let raw: Value =
            serde_json::from_str(text).map_err(|e| self.malformed(row, e.to_string()))?;
        let location = format!("{}#{row}", self.name);
        match decode_value(&raw, hint, &location, warnings) {
            Ok(v) => Ok(Some(v)),
            Err(e) => Err(self.malformed(row, e.to_string())),
        }
    }
}

pub fn read_docel(bundle: &TableBundle) -> Result<(OCLog, Vec<CodecWarning>), CodecError> {
    let manifest: Value = serde_json::from_slice(bundle.get(MANIFEST_FILE)?)
        .map_err(|e| CodecError::malformed(MANIFEST_FILE, e.to_string()))?;
    let Value::Object(doc) = &manifest else {
        return Err(CodecError::malformed(
            MANIFEST_FILE,
            "expected a JSON object",
        ));
    };
    let meta = read_meta(doc, &KNOWN_KEYS, FormatId::DocelTables)?;
    let mut warnings = Warnings::default();

    let mut object_types = Vec::new();
    for (i, raw) in super::array_field(&manifest, "objectTypes", "")?
        .iter()
        .enumerate()
    {
        let path = format!("{MANIFEST_FILE}/objectTypes/{i}");
        object_types.push(ObjectType {
            name: str_field(raw, "name", &path)?.to_string(),
            parent: None,
            attributes: schema_from_json(raw.get("attributes"), &format!("{path}/attributes"))?,
        });
    }
    let mut event_types = Vec::new();
    for (i, raw) in super::array_field(&manifest, "eventTypes", "")?
        .iter()
        .enumerate()
    {
        let path = format!("{MANIFEST_FILE}/eventTypes/{i}");
        event_types.push(EventType {
            name: str_field(raw, "name", &path)?.to_string(),
            attributes: schema_from_json(raw.get("attributes"), &format!("{path}/attributes"))?,
        });
    }
    let hints = effective_hints(object_types.iter(), false);
    let event_schemas: HashMap<String, crate::model::Schema> = event_types
        .iter()
        .map(|t| (t.name.clone(), t.attributes.clone()))
        .collect();

    let mut events_tables = Vec::new();
    let mut object_tables = Vec::new();
    let mut dynamic_tables = Vec::new();
    for (i, raw) in super::array_field(&manifest, "tables", "")?
        .iter()
        .enumerate()
    {
        let path = format!("{MANIFEST_FILE}/tables/{i}");
        let file = str_field(raw, "file", &path)?.to_string();
        match str_field(raw, "role", &path)? {
            "events" => events_tables.push(file),
            "objects" => {
                object_tables.push((file, str_field(raw, "objectType", &path)?.to_string()))
            }
            "dynamic_attribute" => dynamic_tables.push((
                file,
                str_field(raw, "objectType", &path)?.to_string(),
                str_field(raw, "attribute", &path)?.to_string(),
            )),
            other => {
                return Err(CodecError::malformed(
                    format!("{path}/role"),
                    format!("unknown role {other:?}"),
                ))
            }
        }
    }

    // objects
    let mut objects: Vec<Object> = Vec::new();
    let mut object_index: HashMap<String, usize> = HashMap::new();
    for (file, ty) in &object_tables {
        let table = Table::parse(file, bundle.get(file)?, &["object_id"])?;
        let schema = hints.get(ty);
        for (i, row) in table.rows.iter().enumerate() {
            let id = table.get(row, "object_id");
            if id.is_empty() {
                return Err(table.malformed(i + 1, "empty object_id"));
            }
            let mut obj = Object::new(id, ty.as_str());
            for (column, &ci) in &table.columns {
                if column == "object_id" {
                    continue;
                }
                let hint = schema.and_then(|s| s.get(column).copied());
                if let Some(v) =
                    table.value(i + 1, row.get(ci).unwrap_or(""), hint, &mut warnings)?
                {
                    obj.attributes.insert(column.clone(), v);
                }
            }
            object_index.insert(id.to_string(), objects.len());
            objects.push(obj);
        }
    }

    // events
    let mut events: Vec<Event> = Vec::new();
    let mut event_times: HashMap<String, Timestamp> = HashMap::new();
    for file in &events_tables {
        let table = Table::parse(
            file,
            bundle.get(file)?,
            &["event_id", "activity", "timestamp", "objects"],
        )?;
        for (i, row) in table.rows.iter().enumerate() {
            let rn = i + 1;
            let activity = table.get(row, "activity");
            let location = format!("{file}#{rn}");
            let timestamp =
                super::parse_timestamp(table.get(row, "timestamp"), &location, &mut warnings)
                    .map_err(|e| table.malformed(rn, e))?;
            let mut event = Event::new(table.get(row, "event_id"), activity, timestamp);
            let ids: Vec<String> = serde_json::from_str(table.get(row, "objects"))
                .map_err(|e| table.malformed(rn, format!("objects column: {e}")))?;
            for id in ids {
                if !object_index.contains_key(&id) {
                    return Err(
                        table.foreign_key(rn, format!("object {id} is not in any object table"))
                    );
                }
                if !event.e2o.iter().any(|l| l.object.as_str() == id) {
                    event.e2o.push(E2ORelation::new(id));
                }
            }
            let schema = event_schemas.get(activity);
            for (column, &ci) in &table.columns {
                let Some(name) = column.strip_prefix(ATTR_PREFIX) else {
                    continue;
                };
                let hint = schema.and_then(|s| s.get(name).copied());
                if let Some(v) = table.value(rn, row.get(ci).unwrap_or(""), hint, &mut warnings)? {
                    event.attributes.insert(name.to_string(), v);
                }
            }
            event_times.insert(event.id.to_string(), timestamp);
            events.push(event);
        }
    }

    // dynamic attributes
    for (file, ty, attr) in &dynamic_tables {
        let table = Table::parse(
            file,
            bundle.get(file)?,
            &["change_id", "value", "event_id", "object_id"],
        )?;
        let hint = hints.get(ty).and_then(|s| s.get(attr).copied());
        let mut seen_ids = HashSet::new();
        for (i, row) in table.rows.iter().enumerate() {
            let rn = i + 1;
            if !seen_ids.insert(table.get(row, "change_id")) {
                return Err(table.malformed(rn, "duplicate change_id"));
            }
            let object = table.get(row, "object_id");
            let Some(&oi) = object_index.get(object) else {
                return Err(
                    table.foreign_key(rn, format!("object {object} is not in any object table"))
                );
            };
            if objects[oi].object_type != *ty {
                return Err(table.foreign_key(rn, format!("object {object} is not of type {ty}")));
            }
            let event = table.get(row, "event_id");
            if event == UNKNOWN_CAUSE {
                warnings.push(
                    W_UNKNOWN_CAUSE,
                    format!("{file}#{rn}"),
                    "change without a causing event cannot be placed in time; row skipped",
                );
                continue;
            }
            let Some(&at) = event_times.get(event) else {
                return Err(
                    table.foreign_key(rn, format!("event {event} is not in the events table"))
                );
            };
            let value = table
                .value(rn, table.get(row, "value"), hint, &mut warnings)?
                .unwrap_or(AttributeValue::Null);
            objects[oi]
                .changes
                .push(AttributeChange::new(attr.as_str(), value, at).caused_by(event));
        }
    }

    let log = finish(LogParts {
        object_types,
        event_types,
        objects,
        events,
        meta,
    })?;
    Ok((log, warnings.into_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::framework::SpecId;
    use crate::model::{O2ORelation, Strictness};

    fn ts(ms: i64) -> Timestamp {
        Timestamp::from_millis(1_600_000_000_000 + ms)
    }

    fn base() -> LogParts {
        LogParts {
            object_types: vec![ObjectType::new("Item").with_attribute("price", ValueKind::Real)],
            event_types: vec![EventType::new("create"), EventType::new("discount")],
            objects: vec![
                Object::new("o1", "Item").with_attribute("price", AttributeValue::Real(10.0)),
                Object::new("o2", "Item"),
            ],
            events: vec![
                Event::new("e1", "create", ts(1)).with_object(E2ORelation::new("o1")),
                Event::new("e2", "discount", ts(2)).with_object(E2ORelation::new("o1")),
            ],
            meta: Default::default(),
        }
    }

    fn bundle_with_dynamic_row(event: &str) -> TableBundle {
        let (mut bundle, _) = write_docel(&OCLog::build(base(), Strictness::Lax).unwrap());
        let manifest: Value = serde_json::from_slice(&bundle.files[MANIFEST_FILE]).unwrap();
        let mut manifest = manifest.as_object().unwrap().clone();
        let tables = manifest.get_mut("tables").unwrap().as_array_mut().unwrap();
        tables.push(
            serde_json::json!({"file": "dyn.csv", "role": "dynamic_attribute",
            "objectType": "Item", "attribute": "price", "columns": []}),
        );
        bundle.files.insert(
            MANIFEST_FILE.into(),
            serde_json::to_vec(&Value::Object(manifest)).unwrap(),
        );
        bundle.files.insert(
            "dyn.csv".into(),
            format!("change_id,value,event_id,object_id\nva1,12,{event},o1\n").into_bytes(),
        );
        bundle
    }

    #[test]
    fn dynamic_row_decodes_with_cause_and_event_time() {
        let (log, _) = read_docel(&bundle_with_dynamic_row("e2")).unwrap();
        let change = &log.object("o1").unwrap().changes[0];
        assert_eq!(change.cause.as_ref().map(|c| c.as_str()), Some("e2"));
        assert_eq!(change.at, ts(2));
        assert_eq!(change.value, AttributeValue::Real(12.0));
    }

    #[test]
    fn missing_event_is_a_foreign_key_violation() {
        let err = read_docel(&bundle_with_dynamic_row("e9")).unwrap_err();
        assert!(
            matches!(err, CodecError::ForeignKeyViolation { row: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn relations_and_uncaused_changes_are_itemized() {
        let mut parts = base();
        for t in ["o2", "o1"] {
            parts.objects[0]
                .relations
                .push(O2ORelation::new("o1", t, "a"));
            parts.objects[0]
                .relations
                .push(O2ORelation::new("o1", t, "b"));
        }
        parts.objects[0].changes.push(AttributeChange::new(
            "price",
            AttributeValue::Real(9.0),
            ts(2),
        ));
        parts.meta.reflexive_qualifiers.insert("a".into());
        parts.meta.reflexive_qualifiers.insert("b".into());
        let log = OCLog::build(parts, Strictness::Lax).unwrap();
        let (bundle, loss) = write_docel(&log);
        assert_eq!(loss.count(SpecId::S9), 4);
        assert_eq!(loss.count(SpecId::S8), 1);
        let text = String::from_utf8(bundle.files.values().flatten().copied().collect()).unwrap();
        assert!(text.contains(UNKNOWN_CAUSE));
        let (decoded, warnings) = read_docel(&bundle).unwrap();
        assert!(warnings.iter().any(|w| w.code == W_UNKNOWN_CAUSE));
        assert_eq!(loss.restore(&decoded).unwrap(), log);
    }

    #[test]
    fn zip_is_deterministic_and_round_trips() {
        let log = OCLog::build(base(), Strictness::Lax).unwrap();
        let (bundle, _) = write_docel(&log);
        let a = bundle.to_zip();
        assert_eq!(a, bundle.to_zip());
        let back = TableBundle::from_zip(&a).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(
            super::super::detect_format(&a).unwrap(),
            FormatId::DocelTables
        );
        assert_eq!(read_docel(&back).unwrap().0, log);
    }
}
