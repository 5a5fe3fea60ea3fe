use std::fmt;

use thiserror::Error;

use crate::model::{EventId, ObjectId};
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TimestampError {
    #[error("invalid timestamp {0:?}: expected ISO-8601 with an explicit offset")]
    Invalid(String),
}

/// Which id namespace a duplicate was found in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdKind {
    Event,
    Object,
    EventType,
    ObjectType,
    Change,
    Link,
}

impl fmt::Display for IdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IdKind::Event => "event",
            IdKind::Object => "object",
            IdKind::EventType => "event type",
            IdKind::ObjectType => "object type",
            IdKind::Change => "attribute change",
            IdKind::Link => "event-object link",
        })
    }
}

/// A single violated model invariant.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("duplicate {0} id {1:?}")]
    DuplicateId(IdKind, String),
    #[error("dangling reference from {from} to {to}")]
    DanglingReference { from: String, to: String },
    #[error("object type cycle: {}", .0.join(" -> "))]
    TypeCycle(Vec<String>),
    #[error("object {object} attribute {attribute:?} does not match the type schema")]
    SchemaMismatch { object: ObjectId, attribute: String },
    #[error("object type {type_name} redeclares inherited attribute {attribute:?} with a different kind")]
    InheritedKindConflict {
        type_name: String,
        attribute: String,
    },
    #[error("empty {0} name")]
    EmptyName(&'static str),
    #[error("change of {object}.{attribute} at {at} cites event {cause} at a different timestamp")]
    CauseTimestampMismatch {
        object: ObjectId,
        attribute: String,
        at: Timestamp,
        cause: EventId,
    },
    #[error("relation {source_id} -> {target} ({qualifier}) is reflexive but the qualifier is not marked reflexive-allowed")]
    SelfRelation {
        source_id: ObjectId,
        target: ObjectId,
        qualifier: String,
    },
    #[error("relation {source_id} -> {target} ({qualifier}) has valid_from after valid_to")]
    InvertedInterval {
        source_id: ObjectId,
        target: ObjectId,
        qualifier: String,
    },
    #[error("relation stored on object {owner} names {source_id} as its source")]
    MisplacedRelation {
        owner: ObjectId,
        source_id: ObjectId,
    },
    #[error("value of {location} nests deeper than the limit or holds a non-finite real")]
    InvalidValue { location: String },
    #[error("event {0} is related to no object")]
    EventWithoutObject(EventId),
    #[error("object {0} is related to no event")]
    ObjectWithoutEvent(ObjectId),
}

/// All invariant violations found while building a log.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct BuildError(pub Vec<ModelError>);

impl fmt::Display for BuildError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} invariant violation(s)", self.0.len())?;
        for err in self.0.iter().take(5) {
            write!(f, "; {err}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("unknown attribute {attribute:?} for object {object}")]
    UnknownAttribute { object: ObjectId, attribute: String },
    #[error("unknown object type {0:?}")]
    UnknownType(String),
    #[error("no relation carries qualifier {0:?}")]
    UnknownQualifier(String),
}

#[derive(Debug, Error)]
pub enum CodecError {
    #[error("unrecognized input format")]
    UnrecognizedFormat,
    #[error("malformed document at {path}: {message}")]
    MalformedDocument { path: String, message: String },
    #[error("dangling reference from {from} to {to}")]
    DanglingReference { from: String, to: String },
    #[error("malformed table {table} row {row}: {message}")]
    MalformedTable {
        table: String,
        row: usize,
        message: String,
    },
    #[error("foreign key violation in table {table} row {row}: {message}")]
    ForeignKeyViolation {
        table: String,
        row: usize,
        message: String,
    },
    #[error("change of {object}.{attribute} at {at} precedes the object's first event")]
    NonChronologicalChange {
        object: ObjectId,
        attribute: String,
        at: Timestamp,
    },
    #[error("decoded log is invalid: {0}")]
    Build(#[from] BuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl CodecError {
    pub(crate) fn malformed(path: impl Into<String>, message: impl Into<String>) -> Self {
        CodecError::MalformedDocument {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown format name {0:?}")]
pub struct UnknownFormatName(pub String);
