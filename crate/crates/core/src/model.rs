//! Canonical object-centric log model.
//!
//! [`OCLog`] is a superset of what the supported formats can store: typed
//! objects with single inheritance, qualified event-object links, qualified
//! object-object relations with valid-time bounds, and attribute changes keyed
//! by timestamp and optionally by the event that caused them.
//!
//! Logs are immutable once built. To transform a log, take its
//! [`LogParts`], edit them and call [`build_log`] again.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{BuildError, IdKind, ModelError, QueryError};
use crate::graph;
use crate::time::Timestamp;
use crate::value::{AttributeValue, ValueKind, MAX_VALUE_DEPTH};

macro_rules! id_newtype {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                $name(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(id: &str) -> Self {
                $name(id.to_string())
            }
        }

        impl From<String> for $name {
            fn from(id: String) -> Self {
                $name(id)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

id_newtype!(
    /// Identifier of an event; a namespace separate from object ids.
    EventId
);
id_newtype!(
    /// Identifier of an object.
    ObjectId
);

pub type Attributes = BTreeMap<String, AttributeValue>;
pub type Schema = BTreeMap<String, ValueKind>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObjectType {
    pub name: String,
    pub parent: Option<String>,
    pub attributes: Schema,
}

impl ObjectType {
    pub fn new(name: impl Into<String>) -> Self {
        ObjectType {
            name: name.into(),
            parent: None,
            attributes: Schema::new(),
        }
    }

    pub fn with_parent(mut self, parent: impl Into<String>) -> Self {
        self.parent = Some(parent.into());
        self
    }

    pub fn with_attribute(mut self, name: impl Into<String>, kind: ValueKind) -> Self {
        self.attributes.insert(name.into(), kind);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventType {
    pub name: String,
    pub attributes: Schema,
}

impl EventType {
    pub fn new(name: impl Into<String>) -> Self {
        EventType {
            name: name.into(),
            attributes: Schema::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, kind: ValueKind) -> Self {
        self.attributes.insert(name.into(), kind);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct E2ORelation {
    pub object: ObjectId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<String>,
}

impl E2ORelation {
    pub fn new(object: impl Into<ObjectId>) -> Self {
        E2ORelation {
            object: object.into(),
            qualifier: None,
        }
    }

    pub fn qualified(object: impl Into<ObjectId>, qualifier: impl Into<String>) -> Self {
        E2ORelation {
            object: object.into(),
            qualifier: Some(qualifier.into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub id: EventId,
    pub activity: String,
    pub timestamp: Timestamp,
    pub attributes: Attributes,
    pub e2o: Vec<E2ORelation>,
}

impl Event {
    pub fn new(id: impl Into<EventId>, activity: impl Into<String>, timestamp: Timestamp) -> Self {
        Event {
            id: id.into(),
            activity: activity.into(),
            timestamp,
            attributes: Attributes::new(),
            e2o: Vec::new(),
        }
    }

    pub fn with_object(mut self, link: E2ORelation) -> Self {
        self.e2o.push(link);
        self
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    pub fn touches(&self, object: &ObjectId) -> bool {
        self.e2o.iter().any(|l| &l.object == object)
    }

    /// Total order key: timestamp, then event id.
    pub fn order_key(&self) -> (Timestamp, &EventId) {
        (self.timestamp, &self.id)
    }
}

/// One recorded value of a dynamic attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeChange {
    pub attribute: String,
    pub value: AttributeValue,
    pub at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<EventId>,
}

impl AttributeChange {
    pub fn new(attribute: impl Into<String>, value: AttributeValue, at: Timestamp) -> Self {
        AttributeChange {
            attribute: attribute.into(),
            value,
            at,
            cause: None,
        }
    }

    pub fn caused_by(mut self, event: impl Into<EventId>) -> Self {
        self.cause = Some(event.into());
        self
    }

    /// Resolution order: attribute, timestamp, then cause (absent first).
    pub fn key(&self) -> (&str, Timestamp, Option<&EventId>) {
        (&self.attribute, self.at, self.cause.as_ref())
    }
}

/// A qualified object-to-object relation with optional valid-time bounds.
///
/// The validity interval is half-open, `[valid_from, valid_to)`; an absent
/// bound extends the interval without limit on that side.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct O2ORelation {
    pub source: ObjectId,
    pub target: ObjectId,
    pub qualifier: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_from: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub valid_to: Option<Timestamp>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub change_cause: Option<EventId>,
}

impl O2ORelation {
    pub fn new(
        source: impl Into<ObjectId>,
        target: impl Into<ObjectId>,
        qualifier: impl Into<String>,
    ) -> Self {
        O2ORelation {
            source: source.into(),
            target: target.into(),
            qualifier: qualifier.into(),
            valid_from: None,
            valid_to: None,
            change_cause: None,
        }
    }

    pub fn valid(mut self, from: Option<Timestamp>, to: Option<Timestamp>) -> Self {
        self.valid_from = from;
        self.valid_to = to;
        self
    }

    pub fn caused_by(mut self, event: impl Into<EventId>) -> Self {
        self.change_cause = Some(event.into());
        self
    }

    pub fn is_valid_at(&self, at: Timestamp) -> bool {
        self.valid_from.is_none_or(|from| from <= at) && self.valid_to.is_none_or(|to| at < to)
    }

    /// True when the relation carries time-scoping information.
    pub fn is_time_scoped(&self) -> bool {
        self.valid_from.is_some() || self.valid_to.is_some() || self.change_cause.is_some()
    }

    /// The relation with bounds and cause removed.
    pub fn unbounded(&self) -> O2ORelation {
        O2ORelation {
            valid_from: None,
            valid_to: None,
            change_cause: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Object {
    pub id: ObjectId,
    pub object_type: String,
    /// Values holding before the first recorded change.
    pub attributes: Attributes,
    pub changes: Vec<AttributeChange>,
    pub relations: Vec<O2ORelation>,
}

impl Object {
    pub fn new(id: impl Into<ObjectId>, object_type: impl Into<String>) -> Self {
        Object {
            id: id.into(),
            object_type: object_type.into(),
            attributes: Attributes::new(),
            changes: Vec::new(),
            relations: Vec::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: AttributeValue) -> Self {
        self.attributes.insert(name.into(), value);
        self
    }

    pub fn with_change(mut self, change: AttributeChange) -> Self {
        self.changes.push(change);
        self
    }

    pub fn with_relation(mut self, relation: O2ORelation) -> Self {
        self.relations.push(relation);
        self
    }

    fn normalize(&mut self) {
        self.changes.sort_by(|a, b| {
            a.key()
                .cmp(&b.key())
                .then_with(|| format!("{:?}", a.value).cmp(&format!("{:?}", b.value)))
        });
        self.relations.sort_by(|a, b| {
            (
                &a.target,
                &a.qualifier,
                a.valid_from,
                a.valid_to,
                &a.change_cause,
            )
                .cmp(&(
                    &b.target,
                    &b.qualifier,
                    b.valid_from,
                    b.valid_to,
                    &b.change_cause,
                ))
        });
    }
}

/// Whether schema and cardinality rules are enforced at build time.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strictness {
    Strict,
    #[default]
    Lax,
}

impl FromStr for Strictness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "strict" => Ok(Strictness::Strict),
            "lax" => Ok(Strictness::Lax),
            other => Err(format!("unknown mode {other:?}, expected strict or lax")),
        }
    }
}

impl fmt::Display for Strictness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strictness::Strict => "strict",
            Strictness::Lax => "lax",
        })
    }
}

/// Log-level metadata.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LogMeta {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_format: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
    #[serde(default)]
    pub mode: Strictness,
    /// Qualifiers whose relations may have equal source and target.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub reflexive_qualifiers: BTreeSet<String>,
    /// Unrecognized top-level document keys, re-emitted verbatim on write.
    #[serde(skip)]
    pub extensions: BTreeMap<String, serde_json::Value>,
}

/// The unvalidated ingredients of a log.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogParts {
    pub object_types: Vec<ObjectType>,
    pub event_types: Vec<EventType>,
    pub objects: Vec<Object>,
    pub events: Vec<Event>,
    pub meta: LogMeta,
}

/// A validated, immutable object-centric event log.
#[derive(Debug, Clone)]
pub struct OCLog {
    object_types: BTreeMap<String, ObjectType>,
    event_types: BTreeMap<String, EventType>,
    /// Sorted by id.
    objects: Vec<Object>,
    /// Sorted by (timestamp, id).
    events: Vec<Event>,
    meta: LogMeta,
    object_index: HashMap<ObjectId, usize>,
    event_index: HashMap<EventId, usize>,
    /// Per object, indices into `events` of the events touching it, in order.
    participation: Vec<Vec<usize>>,
}

impl PartialEq for OCLog {
    fn eq(&self, other: &Self) -> bool {
        self.object_types == other.object_types
            && self.event_types == other.event_types
            && self.objects == other.objects
            && self.events == other.events
            && self.meta == other.meta
    }
}

/// Validates `parts` and assembles an [`OCLog`].
///
/// Every violated invariant is reported; a partially valid log is never
/// returned. `mode` is recorded in the log's metadata.
pub fn build_log(parts: LogParts, mode: Strictness) -> Result<OCLog, BuildError> {
    OCLog::build(parts, mode)
}

impl OCLog {
    pub fn build(parts: LogParts, mode: Strictness) -> Result<OCLog, BuildError> {
        let LogParts {
            object_types,
            event_types,
            mut objects,
            mut events,
            mut meta,
        } = parts;
        meta.mode = mode;
        let mut errors = Vec::new();

        let mut type_map = BTreeMap::new();
        for ty in object_types {
            if ty.name.is_empty() {
                errors.push(ModelError::EmptyName("object type"));
            }
            if type_map.contains_key(&ty.name) {
                errors.push(ModelError::DuplicateId(IdKind::ObjectType, ty.name.clone()));
                continue;
            }
            type_map.insert(ty.name.clone(), ty);
        }
        check_type_hierarchy(&type_map, &mut errors);

        let mut event_type_map = BTreeMap::new();
        for ty in event_types {
            if ty.name.is_empty() {
                errors.push(ModelError::EmptyName("event type"));
            }
            if event_type_map.contains_key(&ty.name) {
                errors.push(ModelError::DuplicateId(IdKind::EventType, ty.name.clone()));
                continue;
            }
            event_type_map.insert(ty.name.clone(), ty);
        }

        objects.sort_by(|a, b| a.id.cmp(&b.id));
        let mut object_index = HashMap::with_capacity(objects.len());
        for (i, obj) in objects.iter().enumerate() {
            if obj.id.as_str().is_empty() {
                errors.push(ModelError::EmptyName("object id"));
            }
            if object_index.insert(obj.id.clone(), i).is_some() {
                errors.push(ModelError::DuplicateId(IdKind::Object, obj.id.to_string()));
            }
        }

        events.sort_by(|a, b| a.order_key().cmp(&b.order_key()));
        let mut event_index = HashMap::with_capacity(events.len());
        for (i, ev) in events.iter().enumerate() {
            if ev.id.as_str().is_empty() {
                errors.push(ModelError::EmptyName("event id"));
            }
            if event_index.insert(ev.id.clone(), i).is_some() {
                errors.push(ModelError::DuplicateId(IdKind::Event, ev.id.to_string()));
            }
        }

        let mut participation = vec![Vec::new(); objects.len()];
        for (i, ev) in events.iter().enumerate() {
            if !event_type_map.contains_key(&ev.activity) {
                errors.push(ModelError::DanglingReference {
                    from: format!("event {}", ev.id),
                    to: format!("event type {}", ev.activity),
                });
            }
            check_values(&ev.attributes, &format!("event {}", ev.id), &mut errors);
            let mut seen = HashSet::new();
            for link in &ev.e2o {
                if link.qualifier.as_deref() == Some("") {
                    errors.push(ModelError::EmptyName("qualifier"));
                }
                if !seen.insert((&link.object, &link.qualifier)) {
                    errors.push(ModelError::DuplicateId(
                        IdKind::Link,
                        format!(
                            "{}/{}/{}",
                            ev.id,
                            link.object,
                            link.qualifier.as_deref().unwrap_or("")
                        ),
                    ));
                }
                match object_index.get(&link.object) {
                    Some(&oi) => {
                        if participation[oi].last() != Some(&i) {
                            participation[oi].push(i);
                        }
                    }
                    None => errors.push(ModelError::DanglingReference {
                        from: format!("event {}", ev.id),
                        to: format!("object {}", link.object),
                    }),
                }
            }
            if mode == Strictness::Strict && ev.e2o.is_empty() {
                errors.push(ModelError::EventWithoutObject(ev.id.clone()));
            }
        }

        for obj in &mut objects {
            obj.normalize();
        }
        for (oi, obj) in objects.iter().enumerate() {
            check_object(
                obj,
                &type_map,
                &events,
                &event_index,
                &object_index,
                &meta,
                mode,
                &mut errors,
            );
            if mode == Strictness::Strict && participation[oi].is_empty() {
                errors.push(ModelError::ObjectWithoutEvent(obj.id.clone()));
            }
        }

        if !errors.is_empty() {
            return Err(BuildError(errors));
        }
        Ok(OCLog {
            object_types: type_map,
            event_types: event_type_map,
            objects,
            events,
            meta,
            object_index,
            event_index,
            participation,
        })
    }

    pub fn empty() -> OCLog {
        OCLog::build(LogParts::default(), Strictness::Lax).expect("empty log is valid")
    }

    pub fn object_types(&self) -> &BTreeMap<String, ObjectType> {
        &self.object_types
    }

    pub fn event_types(&self) -> &BTreeMap<String, EventType> {
        &self.event_types
    }

    /// Objects sorted by id.
    pub fn objects(&self) -> &[Object] {
        &self.objects
    }

    /// Events in nondecreasing timestamp order, ties broken by event id.
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn meta(&self) -> &LogMeta {
        &self.meta
    }

    pub fn mode(&self) -> Strictness {
        self.meta.mode
    }

    pub fn object(&self, id: &str) -> Option<&Object> {
        self.object_index.get(id).map(|&i| &self.objects[i])
    }

    pub fn event(&self, id: &str) -> Option<&Event> {
        self.event_index.get(id).map(|&i| &self.events[i])
    }

    /// Position of an event in the total event order.
    pub fn event_position(&self, id: &str) -> Option<usize> {
        self.event_index.get(id).copied()
    }

    /// Events touching `object`, in event order. Empty for unknown objects.
    pub fn events_of<'a>(&'a self, object: &str) -> impl Iterator<Item = &'a Event> + 'a {
        let indices: &[usize] = self
            .object_index
            .get(object)
            .map(|&i| self.participation[i].as_slice())
            .unwrap_or(&[]);
        indices.iter().map(move |&i| &self.events[i])
    }

    /// Every stored O2O relation, grouped by source object.
    pub fn relations(&self) -> impl Iterator<Item = &O2ORelation> {
        self.objects.iter().flat_map(|o| o.relations.iter())
    }

    pub fn to_parts(&self) -> LogParts {
        LogParts {
            object_types: self.object_types.values().cloned().collect(),
            event_types: self.event_types.values().cloned().collect(),
            objects: self.objects.clone(),
            events: self.events.clone(),
            meta: self.meta.clone(),
        }
    }

    pub fn into_parts(self) -> LogParts {
        LogParts {
            object_types: self.object_types.into_values().collect(),
            event_types: self.event_types.into_values().collect(),
            objects: self.objects,
            events: self.events,
            meta: self.meta,
        }
    }

    /// `type_name` followed by its ancestors, nearest first.
    pub fn type_lineage(&self, type_name: &str) -> Result<Vec<&ObjectType>, QueryError> {
        let mut lineage = Vec::new();
        let mut current = Some(type_name);
        while let Some(name) = current {
            let ty = self
                .object_types
                .get(name)
                .ok_or_else(|| QueryError::UnknownType(name.to_string()))?;
            lineage.push(ty);
            current = ty.parent.as_deref();
        }
        Ok(lineage)
    }

    /// True when `type_name` is `ancestor` or inherits from it.
    pub fn is_subtype_of(&self, type_name: &str, ancestor: &str) -> bool {
        self.type_lineage(type_name)
            .map(|l| l.iter().any(|t| t.name == ancestor))
            .unwrap_or(false)
    }

    /// Declared attributes of `type_name` together with all inherited ones.
    pub fn effective_schema(&self, type_name: &str) -> Result<Schema, QueryError> {
        let mut schema = Schema::new();
        for ty in self.type_lineage(type_name)? {
            for (name, kind) in &ty.attributes {
                schema.entry(name.clone()).or_insert(*kind);
            }
        }
        Ok(schema)
    }

    /// Value of `attribute` on `object` at instant `at`.
    ///
    /// The latest change with `change.at <= at` wins; among changes at the
    /// same instant an uncaused change precedes caused ones, which follow
    /// event order (equivalently, cause id order). Without such a change the
    /// initial value is returned, else null.
    pub fn resolve_attribute(
        &self,
        object: &str,
        attribute: &str,
        at: Timestamp,
    ) -> Result<AttributeValue, QueryError> {
        let obj = self
            .object(object)
            .ok_or_else(|| QueryError::UnknownObject(ObjectId::new(object)))?;
        if self.mode() == Strictness::Strict {
            let schema = self.effective_schema(&obj.object_type)?;
            if !schema.contains_key(attribute) {
                return Err(QueryError::UnknownAttribute {
                    object: obj.id.clone(),
                    attribute: attribute.to_string(),
                });
            }
        }
        // changes are sorted by (attribute, at, cause)
        let latest = obj
            .changes
            .iter()
            .rfind(|c| c.attribute == attribute && c.at <= at);
        Ok(match latest {
            Some(change) => change.value.clone(),
            None => obj
                .attributes
                .get(attribute)
                .cloned()
                .unwrap_or(AttributeValue::Null),
        })
    }

    /// The relations valid at `at`, as (source, target, qualifier) triples.
    pub fn object_graph_at(&self, at: Timestamp) -> BTreeSet<(ObjectId, ObjectId, String)> {
        self.relations()
            .filter(|r| r.is_valid_at(at))
            .map(|r| (r.source.clone(), r.target.clone(), r.qualifier.clone()))
            .collect()
    }

    /// Transitive closure of the relation graph at `at`, ignoring qualifiers.
    pub fn derived_relation_closure(&self, at: Timestamp) -> BTreeSet<(ObjectId, ObjectId)> {
        let edges = self
            .relations()
            .filter(|r| r.is_valid_at(at))
            .map(|r| (r.source.clone(), r.target.clone()));
        graph::transitive_closure(edges)
    }
}

fn check_type_hierarchy(types: &BTreeMap<String, ObjectType>, errors: &mut Vec<ModelError>) {
    let mut reported_cycles: BTreeSet<Vec<String>> = BTreeSet::new();
    for ty in types.values() {
        if let Some(parent) = &ty.parent {
            if !types.contains_key(parent) {
                errors.push(ModelError::DanglingReference {
                    from: format!("object type {}", ty.name),
                    to: format!("object type {parent}"),
                });
                continue;
            }
        }
        // walk the ancestor chain looking for a repeat
        let mut path = vec![ty.name.clone()];
        let mut current = ty.parent.as_ref();
        let mut cyclic = false;
        while let Some(name) = current {
            if let Some(pos) = path.iter().position(|p| p == name) {
                let mut cycle: Vec<String> = path[pos..].to_vec();
                // rotate so the cycle starts at its smallest member
                let min = cycle
                    .iter()
                    .enumerate()
                    .min_by_key(|(_, n)| *n)
                    .map(|(i, _)| i)
                    .unwrap_or(0);
                cycle.rotate_left(min);
                cycle.push(cycle[0].clone());
                if reported_cycles.insert(cycle.clone()) {
                    errors.push(ModelError::TypeCycle(cycle));
                }
                cyclic = true;
                break;
            }
            path.push(name.clone());
            current = types.get(name).and_then(|t| t.parent.as_ref());
        }
        if cyclic {
            continue;
        }
        for ancestor in path.iter().skip(1) {
            let Some(anc) = types.get(ancestor) else {
                continue;
            };
            for (attr, kind) in &ty.attributes {
                if anc.attributes.get(attr).is_some_and(|k| k != kind) {
                    errors.push(ModelError::InheritedKindConflict {
                        type_name: ty.name.clone(),
                        attribute: attr.clone(),
                    });
                }
            }
        }
    }
}

fn check_values(attributes: &Attributes, location: &str, errors: &mut Vec<ModelError>) {
    for (name, value) in attributes {
        check_value(value, &format!("{location}.{name}"), errors);
        if name.is_empty() {
            errors.push(ModelError::EmptyName("attribute"));
        }
    }
}

fn check_value(value: &AttributeValue, location: &str, errors: &mut Vec<ModelError>) {
    if value.depth() > MAX_VALUE_DEPTH || !value.is_finite() {
        errors.push(ModelError::InvalidValue {
            location: location.to_string(),
        });
    }
}

fn effective_schema_of(types: &BTreeMap<String, ObjectType>, name: &str) -> Schema {
    let mut schema = Schema::new();
    let mut current = Some(name);
    let mut guard = 0;
    while let Some(n) = current {
        let Some(ty) = types.get(n) else { break };
        for (attr, kind) in &ty.attributes {
            schema.entry(attr.clone()).or_insert(*kind);
        }
        current = ty.parent.as_deref();
        guard += 1;
        if guard > types.len() {
            break;
        }
    }
    schema
}

#[allow(clippy::too_many_arguments)]
fn check_object(
    obj: &Object,
    types: &BTreeMap<String, ObjectType>,
    events: &[Event],
    event_index: &HashMap<EventId, usize>,
    object_index: &HashMap<ObjectId, usize>,
    meta: &LogMeta,
    mode: Strictness,
    errors: &mut Vec<ModelError>,
) {
    let location = format!("object {}", obj.id);
    if !types.contains_key(&obj.object_type) {
        errors.push(ModelError::DanglingReference {
            from: location.clone(),
            to: format!("object type {}", obj.object_type),
        });
    }
    check_values(&obj.attributes, &location, errors);

    let schema = (mode == Strictness::Strict).then(|| effective_schema_of(types, &obj.object_type));
    let conforms = |attribute: &str, value: &AttributeValue| match &schema {
        None => true,
        Some(schema) => match schema.get(attribute) {
            None => false,
            Some(kind) => value.kind().is_none_or(|k| k == *kind),
        },
    };
    for (name, value) in &obj.attributes {
        if !conforms(name, value) {
            errors.push(ModelError::SchemaMismatch {
                object: obj.id.clone(),
                attribute: name.clone(),
            });
        }
    }

    let mut change_keys = HashSet::new();
    for change in &obj.changes {
        check_value(
            &change.value,
            &format!("{location}.{}@{}", change.attribute, change.at),
            errors,
        );
        if change.attribute.is_empty() {
            errors.push(ModelError::EmptyName("attribute"));
        }
        if !conforms(&change.attribute, &change.value) {
            errors.push(ModelError::SchemaMismatch {
                object: obj.id.clone(),
                attribute: change.attribute.clone(),
            });
        }
        if let Some(cause) = &change.cause {
            match event_index.get(cause) {
                None => errors.push(ModelError::DanglingReference {
                    from: format!("change {}.{}@{}", obj.id, change.attribute, change.at),
                    to: format!("event {cause}"),
                }),
                Some(&ei) if events[ei].timestamp != change.at => {
                    errors.push(ModelError::CauseTimestampMismatch {
                        object: obj.id.clone(),
                        attribute: change.attribute.clone(),
                        at: change.at,
                        cause: cause.clone(),
                    })
                }
                Some(_) => {}
            }
        }
        if mode == Strictness::Strict && !change_keys.insert(change.key()) {
            errors.push(ModelError::DuplicateId(
                IdKind::Change,
                format!("{}.{}@{}", obj.id, change.attribute, change.at),
            ));
        }
    }

    for rel in &obj.relations {
        if rel.source != obj.id {
            errors.push(ModelError::MisplacedRelation {
                owner: obj.id.clone(),
                source_id: rel.source.clone(),
            });
        }
        if rel.qualifier.is_empty() {
            errors.push(ModelError::EmptyName("qualifier"));
        }
        if !object_index.contains_key(&rel.target) {
            errors.push(ModelError::DanglingReference {
                from: format!("relation {} -> {}", rel.source, rel.target),
                to: format!("object {}", rel.target),
            });
        }
        if rel.source == rel.target && !meta.reflexive_qualifiers.contains(&rel.qualifier) {
            errors.push(ModelError::SelfRelation {
                source_id: rel.source.clone(),
                target: rel.target.clone(),
                qualifier: rel.qualifier.clone(),
            });
        }
        if let (Some(from), Some(to)) = (rel.valid_from, rel.valid_to) {
            if from > to {
                errors.push(ModelError::InvertedInterval {
                    source_id: rel.source.clone(),
                    target: rel.target.clone(),
                    qualifier: rel.qualifier.clone(),
                });
            }
        }
        if let Some(cause) = &rel.change_cause {
            if !event_index.contains_key(cause) {
                errors.push(ModelError::DanglingReference {
                    from: format!("relation {} -> {}", rel.source, rel.target),
                    to: format!("event {cause}"),
                });
            }
        }
    }
}
