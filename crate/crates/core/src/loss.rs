//! Itemized accounts of what a write dropped.
//!
//! Each [`LossRecord`] carries the complete original item, so the decoded
//! output of a lossy write together with its report reconstructs the
//! written log exactly (see [`LossReport::restore`]).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::BuildError;
use crate::framework::SpecId;
use crate::model::{AttributeChange, E2ORelation, EventId, O2ORelation, OCLog, ObjectId};

/// Sample locations kept per specification entry.
pub const MAX_SAMPLES: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LossRecord {
    /// An object-to-object relation was not written.
    DroppedRelation { relation: O2ORelation },
    /// A relation was written without its validity bounds or cause.
    StrippedRelationScope { relation: O2ORelation },
    /// An event's links were written without qualifiers; `links` is the
    /// original list.
    DroppedQualifiers {
        event: EventId,
        links: Vec<E2ORelation>,
    },
    /// An attribute change was not written (or not in decodable form).
    DroppedChange {
        object: ObjectId,
        change: AttributeChange,
    },
    /// A change was written without its causing event.
    DroppedCause {
        object: ObjectId,
        change: AttributeChange,
    },
    /// An object type was written without its supertype.
    /// The type was written with its parent's attributes copied in.
    DroppedParent {
        object_type: String,
        parent: String,
        #[serde(default)]
        inherited: Vec<String>,
    },
}

impl LossRecord {
    pub fn spec(&self) -> SpecId {
        match self {
            LossRecord::DroppedRelation { .. } => SpecId::S9,
            LossRecord::StrippedRelationScope { .. } => SpecId::S11,
            LossRecord::DroppedQualifiers { .. } => SpecId::S10,
            LossRecord::DroppedChange { .. } => SpecId::S8,
            LossRecord::DroppedCause { .. } => SpecId::S16,
            LossRecord::DroppedParent { .. } => SpecId::S12,
        }
    }

    /// Number of lost items this record accounts for.
    pub fn weight(&self) -> usize {
        match self {
            LossRecord::DroppedQualifiers { links, .. } => {
                links.iter().filter(|l| l.qualifier.is_some()).count()
            }
            _ => 1,
        }
    }

    pub fn location(&self) -> String {
        match self {
            LossRecord::DroppedRelation { relation }
            | LossRecord::StrippedRelationScope { relation } => {
                format!(
                    "object {} -> {} ({})",
                    relation.source, relation.target, relation.qualifier
                )
            }
            LossRecord::DroppedQualifiers { event, .. } => format!("event {event}"),
            LossRecord::DroppedChange { object, change }
            | LossRecord::DroppedCause { object, change } => {
                format!(
                    "object {object} attribute {} at {}",
                    change.attribute, change.at
                )
            }
            LossRecord::DroppedParent { object_type, .. } => format!("object type {object_type}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossEntry {
    pub count: usize,
    pub sample_locations: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    lossless: bool,
    entries: BTreeMap<SpecId, LossEntry>,
    records: Vec<LossRecord>,
}

#[derive(Debug, Error)]
pub enum RestoreError {
    #[error("loss record refers to missing {0}")]
    Missing(String),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl LossReport {
    pub fn new() -> Self {
        LossReport {
            lossless: true,
            ..Default::default()
        }
    }

    pub fn push(&mut self, record: LossRecord) {
        let weight = record.weight();
        if weight > 0 {
            let entry = self.entries.entry(record.spec()).or_default();
            entry.count += weight;
            if entry.sample_locations.len() < MAX_SAMPLES {
                entry.sample_locations.push(record.location());
            }
            self.lossless = false;
        }
        self.records.push(record);
    }

    pub fn is_lossless(&self) -> bool {
        self.lossless
    }

    pub fn entries(&self) -> &BTreeMap<SpecId, LossEntry> {
        &self.entries
    }

    pub fn records(&self) -> &[LossRecord] {
        &self.records
    }

    pub fn keys(&self) -> BTreeSet<SpecId> {
        self.entries.keys().copied().collect()
    }

    pub fn count(&self, spec: SpecId) -> usize {
        self.entries.get(&spec).map_or(0, |e| e.count)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("loss reports serialize");
        text.push('\n');
        text
    }

    /// Re-applies every recorded loss to `decoded`, the log read back from
    /// the lossy output.
    pub fn restore(&self, decoded: &OCLog) -> Result<OCLog, RestoreError> {
        let mut parts = decoded.to_parts();
        for record in &self.records {
            match record {
                LossRecord::DroppedRelation { relation } => {
                    find_object(&mut parts.objects, &relation.source)?
                        .relations
                        .push(relation.clone());
                }
                LossRecord::StrippedRelationScope { relation } => {
                    let obj = find_object(&mut parts.objects, &relation.source)?;
                    let stripped = relation.unbounded();
                    let slot = obj
                        .relations
                        .iter_mut()
                        .find(|r| **r == stripped)
                        .ok_or_else(|| RestoreError::Missing(record.location()))?;
                    *slot = relation.clone();
                }
                LossRecord::DroppedQualifiers { event, links } => {
                    let ev = parts
                        .events
                        .iter_mut()
                        .find(|e| &e.id == event)
                        .ok_or_else(|| RestoreError::Missing(format!("event {event}")))?;
                    ev.e2o = links.clone();
                }
                LossRecord::DroppedChange { object, change } => {
                    find_object(&mut parts.objects, object)?
                        .changes
                        .push(change.clone());
                }
                LossRecord::DroppedCause { object, change } => {
                    let obj = find_object(&mut parts.objects, object)?;
                    let slot = obj
                        .changes
                        .iter_mut()
                        .find(|c| {
                            c.cause.is_none()
                                && c.attribute == change.attribute
                                && c.at == change.at
                                && c.value == change.value
                        })
                        .ok_or_else(|| RestoreError::Missing(record.location()))?;
                    *slot = change.clone();
                }
                LossRecord::DroppedParent {
                    object_type,
                    parent,
                    inherited,
                } => {
                    let ty = parts
                        .object_types
                        .iter_mut()
                        .find(|t| &t.name == object_type)
                        .ok_or_else(|| {
                            RestoreError::Missing(format!("object type {object_type}"))
                        })?;
                    ty.parent = Some(parent.clone());
                    for attribute in inherited {
                        ty.attributes.remove(attribute);
                    }
                }
            }
        }
        Ok(OCLog::build(parts, decoded.mode())?)
    }
}

fn find_object<'a>(
    objects: &'a mut [crate::model::Object],
    id: &ObjectId,
) -> Result<&'a mut crate::model::Object, RestoreError> {
    objects
        .iter_mut()
        .find(|o| &o.id == id)
        .ok_or_else(|| RestoreError::Missing(format!("object {id}")))
}
