//! Log transformations that make changes traceable, reify many-to-many
//! relations and expose relations as dynamic attributes.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::QueryError;
use crate::model::{EventId, O2ORelation, OCLog, Object, ObjectId, ObjectType, Strictness};
use crate::time::Timestamp;
use crate::validator::{
    candidate_events, find_ambiguous_changes, is_implied, unique_cause, Finding,
};
use crate::value::{AttributeValue, ValueKind};

/// Prefix of attributes holding relation snapshots.
pub const RELATION_ATTRIBUTE_PREFIX: &str = "rel:";

#[derive(Debug, Clone, PartialEq)]
pub struct RefinementOutcome {
    pub log: OCLog,
    /// Changes keyed to an event, or relations reified, by this step.
    pub resolved: usize,
    /// Ambiguous changes remaining in `log`.
    pub unresolved: Vec<Finding>,
    /// Objects introduced by the transformation.
    pub created_objects: Vec<ObjectId>,
}

impl RefinementOutcome {
    fn new(log: OCLog, resolved: usize, created_objects: Vec<ObjectId>) -> Self {
        let unresolved = find_ambiguous_changes(&log);
        RefinementOutcome {
            log,
            resolved,
            unresolved,
            created_objects,
        }
    }
}

fn rebuild(parts: crate::model::LogParts, mode: Strictness) -> OCLog {
    OCLog::build(parts, mode).expect("refinements preserve log invariants")
}

/// Attributes every cause-less change to the only event that touches its
/// object at exactly that instant.
pub fn key_changes_by_event(log: &OCLog) -> RefinementOutcome {
    let mut parts = log.to_parts();
    let mut resolved = 0;
    for (original, obj) in log.objects().iter().zip(parts.objects.iter_mut()) {
        for (change, target) in original.changes.iter().zip(obj.changes.iter_mut()) {
            if change.cause.is_some() {
                continue;
            }
            if let Some(cause) = unique_cause(log, original, change) {
                target.cause = Some(cause.clone());
                resolved += 1;
            }
        }
    }
    RefinementOutcome::new(rebuild(parts, log.mode()), resolved, Vec::new())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cardinality {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

/// Cardinality of the relations labelled `qualifier` over the whole log.
pub fn infer_cardinality(log: &OCLog, qualifier: &str) -> Result<Cardinality, QueryError> {
    cardinality_of(log.relations().filter(|r| r.qualifier == qualifier))
        .ok_or_else(|| QueryError::UnknownQualifier(qualifier.to_string()))
}

fn cardinality_of<'a>(relations: impl Iterator<Item = &'a O2ORelation>) -> Option<Cardinality> {
    let mut targets: BTreeMap<&ObjectId, BTreeSet<&ObjectId>> = BTreeMap::new();
    let mut sources: BTreeMap<&ObjectId, BTreeSet<&ObjectId>> = BTreeMap::new();
    for r in relations {
        targets.entry(&r.source).or_default().insert(&r.target);
        sources.entry(&r.target).or_default().insert(&r.source);
    }
    if targets.is_empty() {
        return None;
    }
    let fan_out = targets.values().map(BTreeSet::len).max().unwrap_or(0);
    let fan_in = sources.values().map(BTreeSet::len).max().unwrap_or(0);
    Some(match (fan_out > 1, fan_in > 1) {
        (true, true) => Cardinality::ManyToMany,
        (true, false) => Cardinality::OneToMany,
        (false, true) => Cardinality::ManyToOne,
        (false, false) => Cardinality::OneToOne,
    })
}

/// Deterministic id for the link object standing for one relation.
pub fn link_object_id(relation: &O2ORelation) -> String {
    let mut hasher = Sha256::new();
    for part in [
        relation.qualifier.as_str(),
        relation.source.as_str(),
        relation.target.as_str(),
        &relation
            .valid_from
            .map_or_else(|| "-".to_string(), |t| t.to_string()),
    ] {
        hasher.update(part.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    format!("{}_link:{}", relation.qualifier, hex::encode(&digest[..8]))
}

/// Removes stored transitive edges, then replaces every many-to-many
/// relation by a link object with two one-sided relations.
///
/// `qualifiers` restricts both steps; `None` means all qualifiers. Link
/// objects take part in no event, so a strict log that gains any becomes lax.
pub fn reify_relations(log: &OCLog, qualifiers: Option<&BTreeSet<String>>) -> RefinementOutcome {
    let selected = |q: &str| qualifiers.is_none_or(|s| s.contains(q));
    let mut parts = log.to_parts();

    // greedy transitive reduction in canonical edge order
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for (oi, obj) in parts.objects.iter().enumerate() {
        for ri in 0..obj.relations.len() {
            edges.push((oi, ri));
        }
    }
    let mut removed: BTreeSet<(usize, usize)> = BTreeSet::new();
    for &(oi, ri) in &edges {
        let edge = &parts.objects[oi].relations[ri];
        if !selected(&edge.qualifier) {
            continue;
        }
        let others = edges
            .iter()
            .filter(|k| **k != (oi, ri) && !removed.contains(*k))
            .map(|&(o, r)| &parts.objects[o].relations[r]);
        if is_implied(edge, others) {
            removed.insert((oi, ri));
        }
    }
    for (oi, obj) in parts.objects.iter_mut().enumerate() {
        let mut ri = 0;
        obj.relations.retain(|_| {
            let keep = !removed.contains(&(oi, ri));
            ri += 1;
            keep
        });
    }

    let mut by_qualifier: BTreeMap<String, Vec<&O2ORelation>> = BTreeMap::new();
    for rel in parts.objects.iter().flat_map(|o| &o.relations) {
        by_qualifier
            .entry(rel.qualifier.clone())
            .or_default()
            .push(rel);
    }
    let many_to_many: BTreeSet<String> = by_qualifier
        .iter()
        .filter(|(q, rels)| {
            selected(q) && cardinality_of(rels.iter().copied()) == Some(Cardinality::ManyToMany)
        })
        .map(|(q, _)| q.clone())
        .collect();

    let mut type_names: BTreeSet<String> =
        parts.object_types.iter().map(|t| t.name.clone()).collect();
    let mut used_ids: BTreeSet<String> = parts.objects.iter().map(|o| o.id.to_string()).collect();
    let mut created = Vec::new();
    let mut link_objects = Vec::new();
    let mut resolved = 0;
    for q in &many_to_many {
        let mut type_name = format!("{q}_link");
        while type_names.contains(&type_name) {
            type_name.push('_');
        }
        type_names.insert(type_name.clone());
        parts.object_types.push(ObjectType::new(type_name.as_str()));
        for obj in parts.objects.iter_mut() {
            let (reified, kept): (Vec<O2ORelation>, Vec<O2ORelation>) =
                obj.relations.drain(..).partition(|r| &r.qualifier == q);
            obj.relations = kept;
            for rel in reified {
                let base = link_object_id(&rel);
                let mut id = base.clone();
                let mut n = 1;
                while used_ids.contains(&id) {
                    n += 1;
                    id = format!("{base}#{n}");
                }
                used_ids.insert(id.clone());
                let link_id = ObjectId::new(id);
                let scoped = |r: O2ORelation| O2ORelation {
                    valid_from: rel.valid_from,
                    valid_to: rel.valid_to,
                    change_cause: rel.change_cause.clone(),
                    ..r
                };
                obj.relations.push(scoped(O2ORelation::new(
                    rel.source.clone(),
                    link_id.clone(),
                    q.as_str(),
                )));
                link_objects.push(
                    Object::new(link_id.clone(), type_name.as_str()).with_relation(scoped(
                        O2ORelation::new(
                            link_id.clone(),
                            rel.target.clone(),
                            format!("{q}.target"),
                        ),
                    )),
                );
                created.push(link_id);
                resolved += 1;
            }
        }
    }
    parts.objects.extend(link_objects);
    let mode = if created.is_empty() {
        log.mode()
    } else {
        Strictness::Lax
    };
    created.sort();
    RefinementOutcome::new(rebuild(parts, mode), resolved, created)
}

fn relation_attribute(qualifier: &str) -> String {
    format!("{RELATION_ATTRIBUTE_PREFIX}{qualifier}")
}

fn snapshot(relations: &[&O2ORelation], at: Option<Timestamp>) -> Vec<AttributeValue> {
    let targets: BTreeSet<&str> = relations
        .iter()
        .filter(|r| match at {
            Some(t) => r.is_valid_at(t),
            None => r.valid_from.is_none(),
        })
        .map(|r| r.target.as_str())
        .collect();
    targets.into_iter().map(AttributeValue::text).collect()
}

/// Mirrors every relation group (source, qualifier) as a list-valued
/// attribute `rel:<qualifier>` that changes wherever the group does.
///
/// The relations themselves are kept. A change is caused by the event that
/// caused a relation to start or end at that instant, else by the only
/// event touching the source object then, else by the only event touching
/// a target that joined or left then, else it stays cause-less.
pub fn relations_as_dynamic_attributes(log: &OCLog) -> RefinementOutcome {
    let mut parts = log.to_parts();
    let mut declare: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    let mut resolved = 0;
    for (original, obj) in log.objects().iter().zip(parts.objects.iter_mut()) {
        let mut groups: BTreeMap<&str, Vec<&O2ORelation>> = BTreeMap::new();
        for rel in &original.relations {
            groups.entry(rel.qualifier.as_str()).or_default().push(rel);
        }
        for (q, rels) in groups {
            let attribute = relation_attribute(q);
            declare
                .entry(original.object_type.clone())
                .or_default()
                .insert(attribute.clone());
            obj.changes.retain(|c| c.attribute != attribute);
            let mut current = snapshot(&rels, None);
            obj.attributes
                .insert(attribute.clone(), AttributeValue::List(current.clone()));
            let bounds: BTreeSet<Timestamp> = rels
                .iter()
                .flat_map(|r| [r.valid_from, r.valid_to])
                .flatten()
                .collect();
            for at in bounds {
                let next = snapshot(&rels, Some(at));
                if next == current {
                    continue;
                }
                current = next;
                let mut change = crate::model::AttributeChange::new(
                    attribute.as_str(),
                    AttributeValue::List(current.clone()),
                    at,
                );
                change.cause = relation_cause(log, original, &rels, at);
                if change.cause.is_some() {
                    resolved += 1;
                }
                obj.changes.push(change);
            }
        }
    }
    for ty in parts.object_types.iter_mut() {
        let Some(attributes) = declare.get(&ty.name) else {
            continue;
        };
        let inherited = log.effective_schema(&ty.name).unwrap_or_default();
        for attribute in attributes {
            if !inherited.contains_key(attribute) {
                ty.attributes.insert(attribute.clone(), ValueKind::List);
            }
        }
    }
    RefinementOutcome::new(rebuild(parts, log.mode()), resolved, Vec::new())
}

fn relation_cause(
    log: &OCLog,
    obj: &Object,
    relations: &[&O2ORelation],
    at: Timestamp,
) -> Option<EventId> {
    let stated: BTreeSet<&EventId> = relations
        .iter()
        .filter(|r| r.valid_from == Some(at) || r.valid_to == Some(at))
        .filter_map(|r| r.change_cause.as_ref())
        .filter(|c| log.event(c.as_str()).is_some_and(|e| e.timestamp == at))
        .collect();
    if stated.len() == 1 {
        return stated.into_iter().next().cloned();
    }
    if !stated.is_empty() {
        return None;
    }
    if let [only] = candidate_events(log, obj.id.as_str(), at)[..] {
        return Some(only.clone());
    }
    // a link object is touched by no event; try the targets that came or went
    let mut nearby: BTreeSet<&EventId> = BTreeSet::new();
    for r in relations
        .iter()
        .filter(|r| r.valid_from == Some(at) || r.valid_to == Some(at))
    {
        nearby.extend(candidate_events(log, r.target.as_str(), at));
    }
    match nearby.len() {
        1 => nearby.into_iter().next().cloned(),
        _ => None,
    }
}

/// Rebuilds the relation snapshot at `at` from `rel:` attributes alone.
pub fn reconstruct_graph_at(log: &OCLog, at: Timestamp) -> BTreeSet<(ObjectId, ObjectId, String)> {
    let mut graph = BTreeSet::new();
    for obj in log.objects() {
        let names: BTreeSet<&String> = obj
            .attributes
            .keys()
            .chain(obj.changes.iter().map(|c| &c.attribute))
            .filter(|n| n.starts_with(RELATION_ATTRIBUTE_PREFIX))
            .collect();
        for name in names {
            let qualifier = &name[RELATION_ATTRIBUTE_PREFIX.len()..];
            let Ok(AttributeValue::List(targets)) =
                log.resolve_attribute(obj.id.as_str(), name, at)
            else {
                continue;
            };
            for t in targets.iter().filter_map(AttributeValue::as_text) {
                graph.insert((obj.id.clone(), ObjectId::new(t), qualifier.to_string()));
            }
        }
    }
    graph
}
