//! Readers and writers between on-disk formats and [`OCLog`].
//!
//! Readers return the decoded log with [`CodecWarning`]s for content the
//! source expresses ambiguously. Writers are total: whatever the target
//! cannot hold is itemized in a [`LossReport`] instead of failing.

mod docel;
mod ocel1;
mod ocel2;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

pub use docel::{read_docel, write_docel, TableBundle, MANIFEST_FILE, UNKNOWN_CAUSE};
pub use ocel1::{read_ocel1, write_ocel1};
pub use ocel2::{read_ocel2, read_rocel, write_ocel2, write_rocel};

use crate::error::{CodecError, ModelError, UnknownFormatName};
use crate::framework::{format_capabilities, FormatDescriptor};
use crate::loss::{LossRecord, LossReport};
use crate::model::{build_log, LogMeta, LogParts, OCLog, ObjectType, Schema, Strictness};
use crate::time::{ParseNotes, Timestamp};
use crate::value::{merge_notes, AttributeValue, ValueKind};

pub const W_AMBIGUOUS_TARGET: &str = "W_AMBIGUOUS_TARGET";
pub const W_TZ_NORMALIZED: &str = "W_TZ_NORMALIZED";
pub const W_PRECISION_TRUNCATED: &str = "W_PRECISION_TRUNCATED";
pub const W_NON_CHRONOLOGICAL: &str = "W_NON_CHRONOLOGICAL";
pub const W_UNKNOWN_CAUSE: &str = "W_UNKNOWN_CAUSE";

/// Key under which log metadata is stored in every format.
pub(crate) const META_KEY: &str = "oclog:meta";

/// Formats with a codec.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FormatId {
    #[serde(rename = "OCEL1_JSON")]
    Ocel1Json,
    #[serde(rename = "OCEL2_JSON")]
    Ocel2Json,
    #[serde(rename = "DOCEL_TABLES")]
    DocelTables,
    #[serde(rename = "ROCEL_JSON")]
    RocelJson,
}

impl FormatId {
    pub const ALL: [FormatId; 4] = [
        FormatId::Ocel1Json,
        FormatId::Ocel2Json,
        FormatId::DocelTables,
        FormatId::RocelJson,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatId::Ocel1Json => "OCEL1_JSON",
            FormatId::Ocel2Json => "OCEL2_JSON",
            FormatId::DocelTables => "DOCEL_TABLES",
            FormatId::RocelJson => "ROCEL_JSON",
        }
    }

    pub fn descriptor(self) -> FormatDescriptor {
        let short = match self {
            FormatId::Ocel1Json => "OCEL1",
            FormatId::Ocel2Json => "OCEL2",
            FormatId::DocelTables => "DOCEL",
            FormatId::RocelJson => "ROCEL",
        };
        format_capabilities(short).expect("codec formats have descriptors")
    }
}

impl fmt::Display for FormatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormatId {
    type Err = UnknownFormatName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_uppercase();
        match key.as_str() {
            "OCEL1JSON" | "OCEL1" | "OCEL10" => Ok(FormatId::Ocel1Json),
            "OCEL2JSON" | "OCEL2" | "OCEL20" => Ok(FormatId::Ocel2Json),
            "DOCELTABLES" | "DOCEL" => Ok(FormatId::DocelTables),
            "ROCELJSON" | "ROCEL" => Ok(FormatId::RocelJson),
            _ => Err(UnknownFormatName(s.to_string())),
        }
    }
}

/// A note about input the decoder accepted but could not read unambiguously.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CodecWarning {
    pub code: String,
    pub location: String,
    pub message: String,
}

/// Identifies a format by its structural signature.
///
/// JSON documents are told apart by their top-level keys; a zip archive or
/// a JSON table manifest is a DOCEL bundle.
pub fn detect_format(bytes: &[u8]) -> Result<FormatId, CodecError> {
    if bytes.starts_with(b"PK\x03\x04") {
        return match TableBundle::from_zip(bytes) {
            Ok(bundle) if bundle.files.contains_key(MANIFEST_FILE) => Ok(FormatId::DocelTables),
            _ => Err(CodecError::UnrecognizedFormat),
        };
    }
    let Ok(Value::Object(doc)) = serde_json::from_slice::<Value>(bytes) else {
        return Err(CodecError::UnrecognizedFormat);
    };
    if doc.contains_key(docel::VERSION_KEY) {
        Ok(FormatId::DocelTables)
    } else if doc.contains_key("ocel:events") || doc.contains_key("ocel:global-log") {
        Ok(FormatId::Ocel1Json)
    } else if doc.contains_key(ocel2::ROCEL_VERSION_KEY) {
        Ok(FormatId::RocelJson)
    } else if ["objectTypes", "eventTypes", "objects", "events"]
        .iter()
        .all(|k| doc.contains_key(*k))
    {
        Ok(FormatId::Ocel2Json)
    } else {
        Err(CodecError::UnrecognizedFormat)
    }
}

/// Decodes `bytes` as `format`. DOCEL input is a zip archive of the bundle.
pub fn read(format: FormatId, bytes: &[u8]) -> Result<(OCLog, Vec<CodecWarning>), CodecError> {
    match format {
        FormatId::Ocel1Json => read_ocel1(bytes),
        FormatId::Ocel2Json => read_ocel2(bytes),
        FormatId::DocelTables => read_docel(&TableBundle::from_zip(bytes)?),
        FormatId::RocelJson => Ok((read_rocel(bytes)?, Vec::new())),
    }
}

/// Encodes `log` as `format`. DOCEL output is a zip archive of the bundle.
pub fn write(format: FormatId, log: &OCLog) -> (Vec<u8>, LossReport) {
    match format {
        FormatId::Ocel1Json => write_ocel1(log),
        FormatId::Ocel2Json => write_ocel2(log),
        FormatId::DocelTables => {
            let (bundle, loss) = write_docel(log);
            (bundle.to_zip(), loss)
        }
        FormatId::RocelJson => (write_rocel(log), LossReport::new()),
    }
}

pub(crate) fn to_pretty_bytes(value: &Value) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("JSON values serialize");
    bytes.push(b'\n');
    bytes
}

/// Collects warnings while decoding.
#[derive(Debug, Default)]
pub(crate) struct Warnings(Vec<CodecWarning>);

impl Warnings {
    pub fn push(&mut self, code: &str, location: impl Into<String>, message: impl Into<String>) {
        self.0.push(CodecWarning {
            code: code.to_string(),
            location: location.into(),
            message: message.into(),
        });
    }

    pub fn notes(&mut self, notes: ParseNotes, location: &str) {
        if notes.offset_normalized {
            self.push(
                W_TZ_NORMALIZED,
                location,
                "timestamp offset normalized to UTC",
            );
        }
        if notes.precision_truncated {
            self.push(
                W_PRECISION_TRUNCATED,
                location,
                "sub-millisecond digits dropped",
            );
        }
    }

    pub fn into_vec(mut self) -> Vec<CodecWarning> {
        self.0.sort();
        self.0.dedup();
        self.0
    }
}

pub(crate) fn parse_timestamp(
    text: &str,
    location: &str,
    warnings: &mut Warnings,
) -> Result<Timestamp, String> {
    let (ts, notes) = Timestamp::parse_with_notes(text).map_err(|e| e.to_string())?;
    warnings.notes(notes, location);
    Ok(ts)
}

pub(crate) fn decode_value(
    raw: &Value,
    hint: Option<ValueKind>,
    location: &str,
    warnings: &mut Warnings,
) -> Result<AttributeValue, CodecError> {
    let mut notes = ParseNotes::default();
    let value = AttributeValue::from_json(raw, hint, &mut notes)
        .map_err(|msg| CodecError::malformed(location, msg))?;
    warnings.notes(notes, location);
    Ok(value)
}

#[allow(dead_code)]
pub(crate) fn merge(into: &mut ParseNotes, from: ParseNotes) {
    merge_notes(into, from)
}

/// Effective attribute kinds per object type, walking whatever parents are
/// present in `types`.
/// Object types as a format without inheritance stores them: each subtype
/// loses its parent and gains the attributes it inherited.
pub(crate) fn types_without_parents(log: &OCLog, loss: &mut LossReport) -> Vec<ObjectType> {
    log.object_types()
        .values()
        .map(|ty| {
            let mut written = ty.clone();
            if let Some(parent) = written.parent.take() {
                let mut inherited = Vec::new();
                for (name, kind) in log.effective_schema(&ty.name).unwrap_or_default() {
                    if !written.attributes.contains_key(&name) {
                        written.attributes.insert(name.clone(), kind);
                        inherited.push(name);
                    }
                }
                loss.push(LossRecord::DroppedParent {
                    object_type: ty.name.clone(),
                    parent,
                    inherited,
                });
            }
            written
        })
        .collect()
}

pub(crate) fn effective_hints<'a>(
    types: impl IntoIterator<Item = &'a ObjectType> + Clone,
    with_parents: bool,
) -> HashMap<String, Schema> {
    let by_name: HashMap<&str, &ObjectType> = types
        .clone()
        .into_iter()
        .map(|t| (t.name.as_str(), t))
        .collect();
    let mut out = HashMap::new();
    for ty in types {
        let mut schema = Schema::new();
        let mut current = Some(ty);
        let mut steps = 0;
        while let Some(t) = current {
            for (k, v) in &t.attributes {
                schema.entry(k.clone()).or_insert(*v);
            }
            steps += 1;
            current = if with_parents && steps <= by_name.len() {
                t.parent.as_deref().and_then(|p| by_name.get(p).copied())
            } else {
                None
            };
        }
        out.insert(ty.name.clone(), schema);
    }
    out
}

pub(crate) fn schema_to_json(schema: &Schema) -> Value {
    Value::Array(
        schema
            .iter()
            .map(|(name, kind)| {
                let mut entry = Map::new();
                entry.insert("name".into(), Value::String(name.clone()));
                entry.insert("type".into(), Value::String(kind.name().into()));
                Value::Object(entry)
            })
            .collect(),
    )
}

pub(crate) fn schema_from_json(raw: Option<&Value>, path: &str) -> Result<Schema, CodecError> {
    let mut schema = Schema::new();
    let Some(raw) = raw else { return Ok(schema) };
    let entries = raw.as_array().ok_or_else(|| {
        CodecError::malformed(path, "expected an array of attribute declarations")
    })?;
    for (i, entry) in entries.iter().enumerate() {
        let here = format!("{path}[{i}]");
        let name = str_field(entry, "name", &here)?;
        let kind_name = str_field(entry, "type", &here)?;
        let kind = ValueKind::from_name(kind_name).ok_or_else(|| {
            CodecError::malformed(&here, format!("unknown attribute type {kind_name:?}"))
        })?;
        schema.insert(name.to_string(), kind);
    }
    Ok(schema)
}

pub(crate) fn str_field<'a>(
    value: &'a Value,
    key: &str,
    path: &str,
) -> Result<&'a str, CodecError> {
    value
        .get(key)
        .and_then(Value::as_str)
        .ok_or_else(|| CodecError::malformed(format!("{path}/{key}"), "expected a string"))
}

pub(crate) fn opt_str_field<'a>(
    value: &'a Value,
    key: &str,
    path: &str,
) -> Result<Option<&'a str>, CodecError> {
    match value.get(key) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) => Ok(Some(s)),
        Some(_) => Err(CodecError::malformed(
            format!("{path}/{key}"),
            "expected a string",
        )),
    }
}

pub(crate) fn array_field<'a>(
    value: &'a Value,
    key: &str,
    path: &str,
) -> Result<&'a [Value], CodecError> {
    match value.get(key) {
        None | Some(Value::Null) => Ok(&[]),
        Some(Value::Array(items)) => Ok(items),
        Some(_) => Err(CodecError::malformed(
            format!("{path}/{key}"),
            "expected an array",
        )),
    }
}

pub(crate) fn meta_to_json(meta: &LogMeta) -> Value {
    serde_json::to_value(meta).expect("metadata serializes")
}

/// Splits a top-level document into known keys and preserved extensions.
pub(crate) fn read_meta(
    doc: &Map<String, Value>,
    known: &[&str],
    source: FormatId,
) -> Result<LogMeta, CodecError> {
    let mut meta = match doc.get(META_KEY) {
        Some(raw) => serde_json::from_value::<LogMeta>(raw.clone())
            .map_err(|e| CodecError::malformed(META_KEY, e.to_string()))?,
        None => LogMeta {
            source_format: Some(source.name().to_string()),
            ..LogMeta::default()
        },
    };
    meta.extensions = doc
        .iter()
        .filter(|(k, _)| k.as_str() != META_KEY && !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect::<BTreeMap<_, _>>();
    Ok(meta)
}

pub(crate) fn write_extensions(doc: &mut Map<String, Value>, meta: &LogMeta) {
    for (k, v) in &meta.extensions {
        doc.entry(k.clone()).or_insert_with(|| v.clone());
    }
    doc.insert(META_KEY.into(), meta_to_json(meta));
}

/// Builds the decoded log, surfacing dangling references as codec errors.
pub(crate) fn finish(parts: LogParts) -> Result<OCLog, CodecError> {
    let mode = parts.meta.mode;
    build_log(parts, mode).map_err(|err| {
        match err.0.iter().find_map(|e| match e {
            ModelError::DanglingReference { from, to } => Some((from.clone(), to.clone())),
            _ => None,
        }) {
            Some((from, to)) => CodecError::DanglingReference { from, to },
            None => CodecError::Build(err),
        }
    })
}

/// Lax mode unless the document records otherwise.
#[allow(dead_code)]
pub(crate) fn default_mode() -> Strictness {
    Strictness::Lax
}
