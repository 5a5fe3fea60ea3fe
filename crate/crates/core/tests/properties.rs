use std::collections::BTreeSet;

use oclog::analysis::{flatten, log_stats, trace_of};
use oclog::converter::{convert, loss_preview_ids};
use oclog::formats::{self, read_rocel, write_rocel};
use oclog::generator::{generate, GenConfig};
use oclog::refiner::{
    infer_cardinality, key_changes_by_event, reconstruct_graph_at, reify_relations,
    relations_as_dynamic_attributes, Cardinality,
};
use oclog::validator::{candidate_events, find_ambiguous_changes, validate, Location};
use oclog::{
    build_log, AttributeValue, E2ORelation, Event, EventId, FormatId, O2ORelation, OCLog, ObjectId,
    SpecId, Strictness, Timestamp,
};
use proptest::prelude::*;
use proptest::sample::Index;

fn config() -> impl Strategy<Value = GenConfig> {
    (1u64..10_000).prop_map(GenConfig::mixed)
}

fn log() -> impl Strategy<Value = OCLog> {
    config().prop_map(|c| generate(&c).expect("mixed configs are valid"))
}

fn event_times(log: &OCLog) -> BTreeSet<Timestamp> {
    log.events().iter().map(|e| e.timestamp).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_dangling_reference_is_rejected(log in log(), pick in any::<Index>(), kind in 0usize..4) {
        let mut parts = log.to_parts();
        let missing = ObjectId::new("no-such-object");
        match kind {
            0 => {
                let linked: Vec<usize> = (0..parts.events.len()).filter(|&i| !parts.events[i].e2o.is_empty()).collect();
                let ev = &mut parts.events[linked[pick.index(linked.len())]];
                let n = ev.e2o.len();
                ev.e2o[pick.index(n)].object = missing;
            }
            1 => {
                let i = pick.index(parts.objects.len());
                let source = parts.objects[i].id.clone();
                parts.objects[i].relations.push(O2ORelation::new(source, missing, "dangles"));
            }
            2 => {
                let i = pick.index(parts.objects.len());
                parts.objects[i].object_type = "NoSuchType".into();
            }
            _ => {
                let i = pick.index(parts.objects.len());
                let obj = &mut parts.objects[i];
                let change = oclog::AttributeChange::new("price", AttributeValue::Null, Timestamp::from_millis(0))
                    .caused_by("no-such-event");
                obj.changes.push(change);
            }
        }
        prop_assert!(build_log(parts, Strictness::Lax).is_err());
    }

    #[test]
    fn attribute_resolution_is_piecewise_constant(log in log(), pick in any::<Index>()) {
        let obj = &log.objects()[pick.index(log.objects().len())];
        let mut instants: BTreeSet<Timestamp> = event_times(&log);
        instants.extend(obj.changes.iter().map(|c| c.at));
        let instants: Vec<Timestamp> = instants.into_iter().collect();
        let attributes: BTreeSet<&String> = obj.attributes.keys().chain(obj.changes.iter().map(|c| &c.attribute)).collect();
        for attribute in attributes {
            for pair in instants.windows(2) {
                let (t, next) = (pair[0], pair[1]);
                if obj.changes.iter().any(|c| &c.attribute == attribute && c.at > t && c.at <= next) {
                    continue;
                }
                let before = log.resolve_attribute(obj.id.as_str(), attribute, t).unwrap();
                let mid = log.resolve_attribute(obj.id.as_str(), attribute, next.plus_millis(-1).max(t)).unwrap();
                prop_assert_eq!(before, mid);
            }
        }
    }

    #[test]
    fn subtypes_extend_their_parent_schema(log in log()) {
        for ty in log.object_types().values() {
            if let Some(parent) = &ty.parent {
                let own = log.effective_schema(&ty.name).unwrap();
                for (name, kind) in log.effective_schema(parent).unwrap() {
                    prop_assert_eq!(own.get(&name), Some(&kind));
                }
            }
        }
    }

    #[test]
    fn adding_a_relation_never_removes_snapshot_edges(log in log(), a in any::<Index>(), b in any::<Index>()) {
        let mut parts = log.to_parts();
        let n = parts.objects.len();
        let (i, j) = (a.index(n), b.index(n));
        prop_assume!(i != j);
        let (source, target) = (parts.objects[i].id.clone(), parts.objects[j].id.clone());
        parts.objects[i].relations.push(O2ORelation::new(source, target, "added"));
        let grown = build_log(parts, Strictness::Lax).unwrap();
        for t in event_times(&log) {
            prop_assert!(log.object_graph_at(t).is_subset(&grown.object_graph_at(t)));
        }
    }

    #[test]
    fn event_order_ignores_input_order(log in log(), seed in any::<u64>()) {
        let mut parts = log.to_parts();
        let n = parts.events.len();
        let mut state = seed | 1;
        for i in (1..n).rev() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            parts.events.swap(i, (state % (i as u64 + 1)) as usize);
        }
        parts.objects.reverse();
        let rebuilt = build_log(parts, log.mode()).unwrap();
        prop_assert_eq!(&rebuilt, &log);
        prop_assert_eq!(validate(&rebuilt, Strictness::Strict).to_json_pretty(), validate(&log, Strictness::Strict).to_json_pretty());
        prop_assert_eq!(log_stats(&rebuilt), log_stats(&log));
        for case_type in log.object_types().keys() {
            prop_assert_eq!(flatten(&rebuilt, case_type).unwrap(), flatten(&log, case_type).unwrap());
        }
        let keys: Vec<(Timestamp, &EventId)> = log.events().iter().map(Event::order_key).collect();
        prop_assert!(keys.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn refined_format_round_trips(log in log()) {
        prop_assert_eq!(read_rocel(&write_rocel(&log)).unwrap(), log);
    }

    #[test]
    fn every_codec_is_stable_after_one_pass(log in log()) {
        for format in FormatId::ALL {
            let (first, _) = formats::write(format, &log);
            let (decoded, _) = formats::read(format, &first).unwrap();
            let (second, _) = formats::write(format, &decoded);
            let (again, _) = formats::read(format, &second).unwrap();
            prop_assert_eq!(&again, &decoded, "{}", format);
            let (third, _) = formats::write(format, &again);
            prop_assert_eq!(&third, &second, "{}", format);
        }
    }

    #[test]
    fn conversions_stay_within_the_preview_and_restore(log in log()) {
        for source in FormatId::ALL {
            let (input, _) = formats::write(source, &log);
            for target in FormatId::ALL {
                let conversion = convert(&input, source, target).unwrap();
                let preview = loss_preview_ids(source, target);
                prop_assert!(conversion.loss.keys().is_subset(&preview), "{} -> {}: {:?}", source, target, conversion.loss.keys());
                let (decoded, _) = formats::read(target, &conversion.output).unwrap();
                prop_assert_eq!(conversion.loss.restore(&decoded).unwrap(), conversion.decoded, "{} -> {}", source, target);
            }
        }
    }

    #[test]
    fn funnel_through_the_refined_format(log in log()) {
        for format in FormatId::ALL {
            let (input, _) = formats::write(format, &log);
            let (direct, _) = formats::read(format, &input).unwrap();
            let there = convert(&input, format, FormatId::RocelJson).unwrap();
            prop_assert!(there.loss.is_lossless());
            let back = convert(&there.output, FormatId::RocelJson, format).unwrap();
            let (reread, _) = formats::read(format, &back.output).unwrap();
            prop_assert_eq!(reread, direct, "{}", format);
        }
    }

    #[test]
    fn unrepresentable_content_is_reported(log in log()) {
        let relations = log.relations().count();
        let changes: usize = log.objects().iter().map(|o| o.changes.len()).sum();
        let (_, ocel1) = formats::write(FormatId::Ocel1Json, &log);
        prop_assert_eq!(ocel1.count(SpecId::S9), relations);
        prop_assert_eq!(ocel1.count(SpecId::S8), changes);
        let scoped = log.relations().filter(|r| r.is_time_scoped() || r.change_cause.is_some()).count();
        let (_, ocel2) = formats::write(FormatId::Ocel2Json, &log);
        prop_assert_eq!(ocel2.count(SpecId::S11), scoped);
        let subtypes = log.object_types().values().filter(|t| t.parent.is_some()).count();
        prop_assert_eq!(ocel2.count(SpecId::S12), subtypes);
    }

    #[test]
    fn findings_cite_existing_ids(log in log()) {
        let report = validate(&log, Strictness::Strict);
        for spec in SpecId::ALL {
            for finding in report.findings(spec) {
                let exists = match &finding.location {
                    Location::Event { event } => log.event(event.as_str()).is_some(),
                    Location::Object { object } | Location::Change { object, .. } => log.object(object.as_str()).is_some(),
                    Location::ObjectType { object_type } => log.object_types().contains_key(object_type),
                    Location::Relation { source, target, .. } => {
                        log.object(source.as_str()).is_some() && log.object(target.as_str()).is_some()
                    }
                };
                prop_assert!(exists, "{:?}", finding);
            }
        }
    }

    #[test]
    fn adding_a_cause_never_adds_ambiguity(log in log(), pick in any::<Index>()) {
        let uncaused: Vec<(usize, usize)> = log.objects().iter().enumerate()
            .flat_map(|(i, o)| o.changes.iter().enumerate().filter(|(_, c)| c.cause.is_none()).map(move |(j, _)| (i, j)))
            .collect();
        prop_assume!(!uncaused.is_empty());
        let (i, j) = uncaused[pick.index(uncaused.len())];
        let obj = &log.objects()[i];
        let candidates = candidate_events(&log, obj.id.as_str(), obj.changes[j].at);
        prop_assume!(!candidates.is_empty());
        let mut parts = log.to_parts();
        parts.objects[i].changes[j].cause = Some(candidates[0].clone());
        let linked = build_log(parts, log.mode()).unwrap();
        prop_assert!(find_ambiguous_changes(&linked).len() <= find_ambiguous_changes(&log).len());
    }

    #[test]
    fn keying_changes_is_idempotent_and_keeps_causes(log in log()) {
        let once = key_changes_by_event(&log);
        let twice = key_changes_by_event(&once.log);
        prop_assert_eq!(&twice.log, &once.log);
        prop_assert_eq!(twice.resolved, 0);
        for (before, after) in log.objects().iter().zip(once.log.objects()) {
            for (b, a) in before.changes.iter().zip(&after.changes) {
                if b.cause.is_some() {
                    prop_assert_eq!(&a.cause, &b.cause);
                }
            }
        }
        let report = validate(&once.log, Strictness::Lax);
        prop_assert_eq!(report.findings(SpecId::S16), &once.unresolved[..]);
    }

    #[test]
    fn relation_attributes_rebuild_the_graph(log in log()) {
        let out = relations_as_dynamic_attributes(&log);
        for t in event_times(&log) {
            prop_assert_eq!(reconstruct_graph_at(&out.log, t), log.object_graph_at(t));
        }
    }

    #[test]
    fn refinements_compose_and_round_trip(log in log()) {
        let keyed = key_changes_by_event(&log).log;
        let reified = reify_relations(&keyed, None);
        for q in reified.log.relations().map(|r| r.qualifier.clone()).collect::<BTreeSet<_>>() {
            prop_assert_ne!(infer_cardinality(&reified.log, &q).unwrap(), Cardinality::ManyToMany);
        }
        let refined = relations_as_dynamic_attributes(&reified.log).log;
        prop_assert_eq!(read_rocel(&write_rocel(&refined)).unwrap(), refined);
    }

    #[test]
    fn traces_cover_linked_events(log in log()) {
        let mut covered = BTreeSet::new();
        for obj in log.objects() {
            covered.extend(trace_of(&log, obj.id.as_str()).unwrap().steps.into_iter().map(|s| s.event));
        }
        let linked: BTreeSet<EventId> = log.events().iter().filter(|e| !e.e2o.is_empty()).map(|e| e.id.clone()).collect();
        prop_assert_eq!(covered, linked);
    }

    #[test]
    fn deduplicated_cases_recover_touching_events(log in log()) {
        for case_type in log.object_types().keys() {
            let result = flatten(&log, case_type).unwrap();
            let recovered: BTreeSet<&EventId> = result.cases.values().flatten().collect();
            let touching: BTreeSet<&EventId> = log
                .events()
                .iter()
                .filter(|e| e.e2o.iter().any(|l| {
                    log.object(l.object.as_str()).is_some_and(|o| log.is_subtype_of(&o.object_type, case_type))
                }))
                .map(|e| &e.id)
                .collect();
            prop_assert_eq!(recovered, touching);
        }
    }

    #[test]
    fn generation_is_reproducible_and_mode_follows_orphans(config in config()) {
        let log = generate(&config).unwrap();
        prop_assert_eq!(write_rocel(&generate(&config).unwrap()), write_rocel(&log));
        let orphans = config.orphan_objects || config.orphan_events;
        prop_assert_eq!(log.mode() == Strictness::Strict, !orphans);
        prop_assert!(build_log(log.to_parts(), Strictness::Lax).is_ok());
        prop_assert_eq!(build_log(log.to_parts(), Strictness::Strict).is_ok(), !orphans);
    }

    #[test]
    fn features_appear_iff_enabled(config in config()) {
        let log = generate(&config).unwrap();
        let caused_changes = log.objects().iter().flat_map(|o| &o.changes).any(|c| c.cause.is_some());
        prop_assert_eq!(caused_changes, config.dynamic_attrs);
        let nm = infer_cardinality(&log, "contains").unwrap() == Cardinality::ManyToMany;
        prop_assert_eq!(nm, config.nm_relations);
        prop_assert_eq!(log.relations().any(|r| r.is_time_scoped()), config.schema_evolution);
        prop_assert_eq!(log.object_types().values().any(|t| t.parent.is_some()), config.inheritance);
        prop_assert_eq!(!find_ambiguous_changes(&log).is_empty(), config.simultaneous_events);
        let orphan_objects = log.objects().iter().any(|o| log.events_of(o.id.as_str()).next().is_none());
        prop_assert_eq!(orphan_objects, config.orphan_objects);
        prop_assert_eq!(log.events().iter().any(|e| e.e2o.is_empty()), config.orphan_events);
    }
}

#[test]
fn warnings_survive_an_unrelated_event() {
    let log = generate(&GenConfig::full_feature(7)).unwrap();
    let (bytes, _) = formats::write(FormatId::Ocel2Json, &log);
    let mut doc: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    // restate the first event's time with a non-UTC offset
    let events = doc["events"].as_array_mut().unwrap();
    let time = events[0]["time"].as_str().unwrap();
    let shifted = chrono::DateTime::parse_from_rfc3339(time)
        .unwrap()
        .with_timezone(&chrono::FixedOffset::east_opt(2 * 3600).unwrap())
        .to_rfc3339();
    events[0]["time"] = shifted.into();
    let mut extra = events[0].clone();
    extra["id"] = "unrelated".into();
    extra["relationships"] = serde_json::json!([]);
    let before = formats::read(FormatId::Ocel2Json, &serde_json::to_vec(&doc).unwrap())
        .unwrap()
        .1;
    assert!(!before.is_empty());
    doc["events"].as_array_mut().unwrap().push(extra);
    let after = formats::read(FormatId::Ocel2Json, &serde_json::to_vec(&doc).unwrap())
        .unwrap()
        .1;
    let after: BTreeSet<_> = after.into_iter().collect();
    assert!(before.iter().all(|w| after.contains(w)));
}

#[test]
fn qualified_links_survive_only_where_supported() {
    let log = generate(&GenConfig::full_feature(11)).unwrap();
    let (bytes, loss) = formats::write(FormatId::DocelTables, &log);
    assert!(loss.count(SpecId::S10) > 0);
    let (decoded, _) = formats::read(FormatId::DocelTables, &bytes).unwrap();
    assert!(decoded
        .events()
        .iter()
        .flat_map(|e| &e.e2o)
        .all(|l: &E2ORelation| l.qualifier.is_none()));
}
