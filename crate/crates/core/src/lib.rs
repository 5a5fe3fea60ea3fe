//! Object-centric event logs: a canonical model, codecs for several published
//! formats, a conformance validator over nineteen specifications, converters
//! with exact loss accounting, refinements, flattening and a synthetic log
//! generator.

pub mod analysis;
pub mod converter;
pub mod error;
pub mod formats;
pub mod framework;
pub mod generator;
pub mod graph;
pub mod loss;
pub mod model;
pub mod refiner;
pub mod time;
pub mod validator;
pub mod value;

pub use error::{
    BuildError, CodecError, IdKind, ModelError, QueryError, TimestampError, UnknownFormatName,
};
pub use formats::{detect_format, CodecWarning, FormatId, TableBundle};
pub use framework::{format_capabilities, Dimension, FormatDescriptor, SpecId, Support};
pub use loss::{LossEntry, LossRecord, LossReport};
pub use model::{
    build_log, AttributeChange, E2ORelation, Event, EventId, EventType, LogMeta, LogParts,
    O2ORelation, OCLog, Object, ObjectId, ObjectType, Strictness,
};
pub use time::Timestamp;
pub use value::{AttributeValue, ValueKind};
