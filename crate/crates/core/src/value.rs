//! Attribute values and their JSON encoding.
//!
//! All codecs share one JSON mapping. Scalars map to plain JSON values. A
//! timestamp is written as a bare string when the reader will know to parse
//! it (the declared kind of a top-level attribute is `time`) and otherwise as
//! `{"$time": "..."}`. Maps whose only key starts with `$` are wrapped as
//! `{"$map": {...}}` so they cannot be mistaken for either wrapper.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Number, Value};

use crate::time::{ParseNotes, Timestamp};

/// Maximum nesting depth accepted for list and map values.
pub const MAX_VALUE_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub enum AttributeValue {
    Text(String),
    Integer(i64),
    Real(f64),
    Boolean(bool),
    Timestamp(Timestamp),
    Null,
    List(Vec<AttributeValue>),
    Map(BTreeMap<String, AttributeValue>),
}

/// Declared kind of an attribute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueKind {
    #[serde(rename = "string")]
    Text,
    Integer,
    #[serde(rename = "float")]
    Real,
    Boolean,
    #[serde(rename = "time")]
    Timestamp,
    List,
    Map,
}

impl ValueKind {
    pub fn name(self) -> &'static str {
        match self {
            ValueKind::Text => "string",
            ValueKind::Integer => "integer",
            ValueKind::Real => "float",
            ValueKind::Boolean => "boolean",
            ValueKind::Timestamp => "time",
            ValueKind::List => "list",
            ValueKind::Map => "map",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "string" => ValueKind::Text,
            "integer" | "int" => ValueKind::Integer,
            "float" | "real" | "double" => ValueKind::Real,
            "boolean" | "bool" => ValueKind::Boolean,
            "time" | "date" | "timestamp" => ValueKind::Timestamp,
            "list" => ValueKind::List,
            "map" => ValueKind::Map,
            _ => return None,
        })
    }
}

impl fmt::Display for ValueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl AttributeValue {
    /// Kind of this value, `None` for null.
    pub fn kind(&self) -> Option<ValueKind> {
        match self {
            AttributeValue::Text(_) => Some(ValueKind::Text),
            AttributeValue::Integer(_) => Some(ValueKind::Integer),
            AttributeValue::Real(_) => Some(ValueKind::Real),
            AttributeValue::Boolean(_) => Some(ValueKind::Boolean),
            AttributeValue::Timestamp(_) => Some(ValueKind::Timestamp),
            AttributeValue::Null => None,
            AttributeValue::List(_) => Some(ValueKind::List),
            AttributeValue::Map(_) => Some(ValueKind::Map),
        }
    }

    /// Nesting depth; scalars have depth 0.
    pub fn depth(&self) -> usize {
        match self {
            AttributeValue::List(items) => 1 + items.iter().map(|v| v.depth()).max().unwrap_or(0),
            AttributeValue::Map(entries) => {
                1 + entries.values().map(|v| v.depth()).max().unwrap_or(0)
            }
            _ => 0,
        }
    }

    /// True when every real inside the value is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            AttributeValue::Real(x) => x.is_finite(),
            AttributeValue::List(items) => items.iter().all(|v| v.is_finite()),
            AttributeValue::Map(entries) => entries.values().all(|v| v.is_finite()),
            _ => true,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        AttributeValue::Text(s.into())
    }

    pub fn as_list(&self) -> Option<&[AttributeValue]> {
        match self {
            AttributeValue::List(items) => Some(items),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            AttributeValue::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Encodes the value; `hint` is the declared kind at top level.
    pub fn to_json(&self, hint: Option<ValueKind>) -> Value {
        match self {
            AttributeValue::Text(s) if hint == Some(ValueKind::Timestamp) => {
                wrap("$text", Value::String(s.clone()))
            }
            AttributeValue::Text(s) => Value::String(s.clone()),
            AttributeValue::Integer(i) if hint == Some(ValueKind::Real) => {
                wrap("$int", Value::Number((*i).into()))
            }
            AttributeValue::Integer(i) => Value::Number((*i).into()),
            AttributeValue::Real(x) => Number::from_f64(*x)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            AttributeValue::Boolean(b) => Value::Bool(*b),
            AttributeValue::Timestamp(ts) => {
                if hint == Some(ValueKind::Timestamp) {
                    Value::String(ts.to_string())
                } else {
                    wrap("$time", Value::String(ts.to_string()))
                }
            }
            AttributeValue::Null => Value::Null,
            AttributeValue::List(items) => {
                Value::Array(items.iter().map(|v| v.to_json(None)).collect())
            }
            AttributeValue::Map(entries) => {
                let inner: Map<String, Value> = entries
                    .iter()
                    .map(|(k, v)| (k.clone(), v.to_json(None)))
                    .collect();
                if inner.len() == 1 && inner.keys().all(|k| k.starts_with('$')) {
                    wrap("$map", Value::Object(inner))
                } else {
                    Value::Object(inner)
                }
            }
        }
    }

    /// Decodes a JSON value; see [`AttributeValue::to_json`] for the mapping.
    ///
    /// `notes` accumulates timestamp normalizations so callers can warn.
    pub fn from_json(
        value: &Value,
        hint: Option<ValueKind>,
        notes: &mut ParseNotes,
    ) -> Result<Self, String> {
        Self::from_json_at(value, hint, notes, 0)
    }

    fn from_json_at(
        value: &Value,
        hint: Option<ValueKind>,
        notes: &mut ParseNotes,
        depth: usize,
    ) -> Result<Self, String> {
        if depth > MAX_VALUE_DEPTH {
            return Err(format!("value nested deeper than {MAX_VALUE_DEPTH}"));
        }
        Ok(match value {
            Value::Null => AttributeValue::Null,
            Value::Bool(b) => AttributeValue::Boolean(*b),
            Value::Number(n) => {
                if hint == Some(ValueKind::Real) {
                    AttributeValue::Real(n.as_f64().ok_or("unrepresentable number")?)
                } else if let Some(i) = n.as_i64() {
                    AttributeValue::Integer(i)
                } else if n.is_u64() {
                    return Err(format!("integer {n} out of range"));
                } else {
                    AttributeValue::Real(n.as_f64().ok_or("unrepresentable number")?)
                }
            }
            Value::String(s) => {
                if hint == Some(ValueKind::Timestamp) {
                    match Timestamp::parse_with_notes(s) {
                        Ok((ts, n)) => {
                            merge_notes(notes, n);
                            AttributeValue::Timestamp(ts)
                        }
                        Err(_) => AttributeValue::Text(s.clone()),
                    }
                } else {
                    AttributeValue::Text(s.clone())
                }
            }
            Value::Array(items) => AttributeValue::List(
                items
                    .iter()
                    .map(|v| Self::from_json_at(v, None, notes, depth + 1))
                    .collect::<Result<_, _>>()?,
            ),
            Value::Object(entries) => {
                if entries.len() == 1 {
                    if let Some(Value::String(s)) = entries.get("$time") {
                        let (ts, n) = Timestamp::parse_with_notes(s).map_err(|e| e.to_string())?;
                        merge_notes(notes, n);
                        return Ok(AttributeValue::Timestamp(ts));
                    }
                    if let Some(Value::String(s)) = entries.get("$text") {
                        return Ok(AttributeValue::Text(s.clone()));
                    }
                    if let Some(i) = entries.get("$int").and_then(Value::as_i64) {
                        return Ok(AttributeValue::Integer(i));
                    }
                    if let Some(Value::Object(inner)) = entries.get("$map") {
                        return Self::map_from_json(inner, notes, depth);
                    }
                }
                Self::map_from_json(entries, notes, depth)?
            }
        })
    }

    fn map_from_json(
        entries: &Map<String, Value>,
        notes: &mut ParseNotes,
        depth: usize,
    ) -> Result<Self, String> {
        Ok(AttributeValue::Map(
            entries
                .iter()
                .map(|(k, v)| Ok((k.clone(), Self::from_json_at(v, None, notes, depth + 1)?)))
                .collect::<Result<_, String>>()?,
        ))
    }
}

fn wrap(key: &str, inner: Value) -> Value {
    let mut wrapper = Map::new();
    wrapper.insert(key.to_string(), inner);
    Value::Object(wrapper)
}

pub(crate) fn merge_notes(into: &mut ParseNotes, from: ParseNotes) {
    into.offset_normalized |= from.offset_normalized;
    into.precision_truncated |= from.precision_truncated;
}

impl From<&str> for AttributeValue {
    fn from(s: &str) -> Self {
        AttributeValue::Text(s.to_string())
    }
}

impl From<i64> for AttributeValue {
    fn from(i: i64) -> Self {
        AttributeValue::Integer(i)
    }
}

impl From<f64> for AttributeValue {
    fn from(x: f64) -> Self {
        AttributeValue::Real(x)
    }
}

impl From<bool> for AttributeValue {
    fn from(b: bool) -> Self {
        AttributeValue::Boolean(b)
    }
}

impl From<Timestamp> for AttributeValue {
    fn from(ts: Timestamp) -> Self {
        AttributeValue::Timestamp(ts)
    }
}

impl Serialize for AttributeValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_json(None).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AttributeValue {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Value::deserialize(deserializer)?;
        AttributeValue::from_json(&raw, None, &mut ParseNotes::default())
            .map_err(serde::de::Error::custom)
    }
}
