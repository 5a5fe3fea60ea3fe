//! Deterministic synthetic logs for an order-to-delivery scenario.
//!
//! Customers place orders for items, items are packed into packages and
//! packages are handed to carriers. Every random choice draws from a
//! ChaCha8 substream dedicated to one entity kind.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::formats::write_rocel;
use crate::model::{
    AttributeChange, E2ORelation, Event, EventId, EventType, LogMeta, LogParts, O2ORelation, OCLog,
    Object, ObjectType, Strictness,
};
use crate::time::Timestamp;
use crate::value::{AttributeValue, ValueKind};

/// 2024-01-01T00:00:00Z
const BASE_MILLIS: i64 = 1_704_067_200_000;
const SECOND: i64 = 1_000;
const MINUTE: i64 = 60 * SECOND;
const HOUR: i64 = 60 * MINUTE;
const CARRIERS: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_customers: usize,
    pub n_orders: usize,
    /// Inclusive bounds on items per order.
    pub items_per_order_range: (usize, usize),
    pub n_packages: usize,
    pub dynamic_attrs: bool,
    pub nm_relations: bool,
    pub schema_evolution: bool,
    pub inheritance: bool,
    pub simultaneous_events: bool,
    pub orphan_objects: bool,
    pub orphan_events: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 1,
            n_customers: 1,
            n_orders: 1,
            items_per_order_range: (1, 1),
            n_packages: 0,
            dynamic_attrs: false,
            nm_relations: false,
            schema_evolution: false,
            inheritance: false,
            simultaneous_events: false,
            orphan_objects: false,
            orphan_events: false,
        }
    }
}

impl GenConfig {
    /// Every feature on, at a size that exercises all of them.
    pub fn full_feature(seed: u64) -> Self {
        GenConfig {
            seed,
            n_customers: 3,
            n_orders: 6,
            items_per_order_range: (1, 3),
            n_packages: 3,
            dynamic_attrs: true,
            nm_relations: true,
            schema_evolution: true,
            inheritance: true,
            simultaneous_events: true,
            orphan_objects: true,
            orphan_events: true,
        }
    }

    /// Features switched by the low bits of `seed`, sizes varied with it.
    /// Always valid; used to build test corpora.
    pub fn mixed(seed: u64) -> Self {
        let bit = |n: u32| seed >> n & 1 == 1;
        GenConfig {
            seed,
            n_customers: 1 + (seed % 3) as usize,
            n_orders: 2 + (seed % 4) as usize,
            items_per_order_range: (1, 1 + (seed % 3) as usize),
            n_packages: 2 + (seed % 2) as usize,
            dynamic_attrs: bit(0),
            nm_relations: bit(1),
            schema_evolution: bit(2),
            inheritance: bit(3),
            simultaneous_events: bit(4),
            orphan_objects: bit(5),
            orphan_events: bit(6),
        }
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self, GenError> {
        serde_json::from_slice(bytes).map_err(|e| GenError::InvalidConfig(e.to_string()))
    }

    fn check(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::InvalidConfig(m.to_string()));
        let (lo, hi) = self.items_per_order_range;
        if self.n_customers == 0 || self.n_orders == 0 {
            return bad("n_customers and n_orders must be positive");
        }
        if lo == 0 || lo > hi {
            return bad("items_per_order_range must satisfy 1 <= min <= max");
        }
        if self.nm_relations && (self.n_packages < 2 || self.n_orders * lo < 2) {
            return bad("nm_relations needs at least two packages and two items");
        }
        if self.schema_evolution && self.n_packages == 0 {
            return bad("schema_evolution needs at least one package");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Clone, Copy)]
enum Stream {
    Orders = 1,
    Items = 2,
    Packages = 3,
    Discounts = 4,
    Carriers = 5,
    Collisions = 6,
}

fn rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

fn at(millis: i64) -> Timestamp {
    Timestamp::from_millis(BASE_MILLIS + millis)
}

fn money(cents: i64) -> AttributeValue {
    AttributeValue::Real(cents as f64 / 100.0)
}

struct Builder {
    objects: Vec<Object>,
    events: Vec<Event>,
    event_types: BTreeSet<&'static str>,
}

impl Builder {
    fn event(
        &mut self,
        id: String,
        activity: &'static str,
        t: Timestamp,
        links: Vec<E2ORelation>,
    ) -> EventId {
        self.event_types.insert(activity);
        let mut ev = Event::new(id, activity, t);
        ev.e2o = links;
        let id = ev.id.clone();
        self.events.push(ev);
        id
    }
}

/// Generates the log for `config`; strict unless orphans were requested.
pub fn generate(config: &GenConfig) -> Result<OCLog, GenError> {
    config.check()?;
    let scoped = config.schema_evolution;
    let mut b = Builder {
        objects: Vec::new(),
        events: Vec::new(),
        event_types: BTreeSet::new(),
    };

    for c in 0..config.n_customers {
        let id = format!("c{c}");
        b.objects.push(
            Object::new(id.as_str(), "Customer")
                .with_attribute("name", AttributeValue::text(format!("customer {c}"))),
        );
        b.event(
            format!("register:{id}"),
            "register customer",
            at(c as i64 * SECOND),
            vec![E2ORelation::qualified(id.as_str(), "customer")],
        );
    }

    let mut orders_rng = rng(config.seed, Stream::Orders);
    let mut items_rng = rng(config.seed, Stream::Items);
    let mut discount_rng = rng(config.seed, Stream::Discounts);
    let mut collision_rng = rng(config.seed, Stream::Collisions);
    let mut items: Vec<String> = Vec::new();
    let mut weights: Vec<i64> = Vec::new();
    for k in 0..config.n_orders {
        let t_order = (k as i64 + 1) * HOUR + orders_rng.random_range(0..1_800) * SECOND;
        let customer = format!("c{}", orders_rng.random_range(0..config.n_customers));
        let express = config.inheritance && (k == 0 || orders_rng.random_bool(0.3));
        let channel = if orders_rng.random_bool(0.5) {
            "web"
        } else {
            "store"
        };
        let n_items =
            items_rng.random_range(config.items_per_order_range.0..=config.items_per_order_range.1);
        let order_id = format!("o{k}");
        let place_id = EventId::new(format!("place:{order_id}"));

        let mut order = Object::new(
            order_id.as_str(),
            if express { "ExpressOrder" } else { "Order" },
        );
        let mut placed_by = O2ORelation::new(order_id.as_str(), customer.as_str(), "placed by");
        if scoped {
            placed_by = placed_by
                .valid(Some(at(t_order)), None)
                .caused_by(place_id.clone());
        }
        order.relations.push(placed_by);
        if express {
            order.attributes.insert(
                "express_fee".into(),
                money(orders_rng.random_range(500..1_500)),
            );
        }

        let mut links = vec![
            E2ORelation::qualified(order_id.as_str(), "order"),
            E2ORelation::qualified(customer.as_str(), "customer"),
        ];
        let mut total = 0;
        for j in 0..n_items {
            let item_id = format!("i{k}_{j}");
            let price = items_rng.random_range(500..10_000);
            let weight = items_rng.random_range(100..5_000);
            total += price;
            let mut item = Object::new(item_id.as_str(), "Item")
                .with_attribute("price", money(price))
                .with_attribute("weight", AttributeValue::Real(weight as f64 / 1_000.0));

            let mut comprises = O2ORelation::new(order_id.as_str(), item_id.as_str(), "comprises");
            if scoped {
                comprises = comprises
                    .valid(Some(at(t_order)), None)
                    .caused_by(place_id.clone());
            }
            order.relations.push(comprises);
            links.push(E2ORelation::qualified(item_id.as_str(), "item"));

            if config.dynamic_attrs && ((k == 0 && j == 0) || discount_rng.random_bool(0.4)) {
                let t = t_order + 5 * MINUTE + j as i64 * SECOND;
                let discounted = price * 9 / 10;
                let ev = b.event(
                    format!("discount:{item_id}"),
                    "apply discount",
                    at(t),
                    vec![E2ORelation::qualified(item_id.as_str(), "item")],
                );
                item.changes
                    .push(AttributeChange::new("price", money(discounted), at(t)).caused_by(ev));
            }
            if config.simultaneous_events {
                if (k == 0 && j == 0) || collision_rng.random_bool(0.3) {
                    // two events at one instant and a change neither claims
                    let t = t_order + 20 * MINUTE + j as i64 * SECOND;
                    for activity in ["inspect item", "weigh item"] {
                        let verb = activity.split(' ').next().unwrap_or(activity);
                        b.event(
                            format!("{verb}:{item_id}"),
                            activity,
                            at(t),
                            vec![E2ORelation::qualified(item_id.as_str(), "item")],
                        );
                    }
                    item.changes.push(AttributeChange::new(
                        "weight",
                        AttributeValue::Real((weight + 10) as f64 / 1_000.0),
                        at(t),
                    ));
                }
                if (k == 0 && j == 0) || collision_rng.random_bool(0.3) {
                    // stamped with the placing event's instant only
                    item.changes.push(AttributeChange::new(
                        "weight",
                        AttributeValue::Real((weight + 5) as f64 / 1_000.0),
                        at(t_order),
                    ));
                }
            }
            items.push(item_id);
            weights.push(weight);
            b.objects.push(item);
        }
        order.attributes.insert("total".into(), money(total));
        b.objects.push(order);
        b.event(place_id.to_string(), "place order", at(t_order), links);
        let ev = b.events.last_mut().expect("just pushed");
        ev.attributes
            .insert("channel".into(), AttributeValue::text(channel));
    }

    if config.n_packages > 0 {
        let mut packages_rng = rng(config.seed, Stream::Packages);
        let mut carriers_rng = rng(config.seed, Stream::Carriers);
        let mut contents: Vec<Vec<usize>> = vec![Vec::new(); config.n_packages];
        for i in 0..items.len() {
            let primary = packages_rng.random_range(0..config.n_packages);
            contents[primary].push(i);
            if config.nm_relations && (i < 2 || packages_rng.random_bool(0.3)) {
                let forced = match i {
                    0 => Some(if primary == 0 { 1 } else { 0 }),
                    1 => Some(if contents[0].contains(&0) && primary != 0 {
                        0
                    } else {
                        1
                    }),
                    _ => None,
                };
                let second = forced.unwrap_or_else(|| {
                    (primary + 1 + packages_rng.random_range(0..config.n_packages - 1))
                        % config.n_packages
                });
                if second != primary && !contents[second].contains(&i) {
                    contents[second].push(i);
                }
            }
        }
        if config.schema_evolution {
            for c in 0..CARRIERS {
                b.objects.push(
                    Object::new(format!("carrier{c}"), "Carrier")
                        .with_attribute("name", AttributeValue::text(format!("carrier {c}"))),
                );
            }
        }
        let t_first_pack = (config.n_orders as i64 + 2) * HOUR;
        for (m, content) in contents.iter().enumerate() {
            let package_id = format!("p{m}");
            let t_pack = t_first_pack + m as i64 * 10 * MINUTE;
            let pack_id = EventId::new(format!("pack:{package_id}"));
            let mut package = Object::new(package_id.as_str(), "Package").with_attribute(
                "weight",
                AttributeValue::Real(
                    content.iter().map(|&i| weights[i]).sum::<i64>() as f64 / 1_000.0,
                ),
            );
            let mut links = vec![E2ORelation::qualified(package_id.as_str(), "package")];
            for &i in content {
                let mut contains =
                    O2ORelation::new(package_id.as_str(), items[i].as_str(), "contains");
                if scoped {
                    contains = contains
                        .valid(Some(at(t_pack)), None)
                        .caused_by(pack_id.clone());
                }
                package.relations.push(contains);
                links.push(E2ORelation::qualified(items[i].as_str(), "content"));
            }
            if config.schema_evolution {
                let first = carriers_rng.random_range(0..CARRIERS);
                let carrier = format!("carrier{first}");
                links.push(E2ORelation::qualified(carrier.as_str(), "carrier"));
                let mut shipped =
                    O2ORelation::new(package_id.as_str(), carrier.as_str(), "shipped by")
                        .valid(Some(at(t_pack)), None)
                        .caused_by(pack_id.clone());
                if m == 0 || carriers_rng.random_bool(0.4) {
                    let t_switch = t_pack + 5 * MINUTE;
                    let next = format!("carrier{}", (first + 1) % CARRIERS);
                    let switch = b.event(
                        format!("reassign:{package_id}"),
                        "reassign carrier",
                        at(t_switch),
                        vec![
                            E2ORelation::qualified(package_id.as_str(), "package"),
                            E2ORelation::qualified(next.as_str(), "carrier"),
                            E2ORelation::qualified(carrier.as_str(), "previous carrier"),
                        ],
                    );
                    shipped.valid_to = Some(at(t_switch));
                    package.relations.push(
                        O2ORelation::new(package_id.as_str(), next.as_str(), "shipped by")
                            .valid(Some(at(t_switch)), None)
                            .caused_by(switch),
                    );
                }
                package.relations.push(shipped);
            }
            b.event(pack_id.to_string(), "pack package", at(t_pack), links);
            b.objects.push(package);
        }
    }

    if config.orphan_objects {
        b.objects
            .push(Object::new("i_orphan", "Item").with_attribute("price", money(100)));
    }
    if config.orphan_events {
        let t = (config.n_orders as i64 + 4) * HOUR + config.n_packages as i64 * 10 * MINUTE;
        b.event("audit".into(), "audit", at(t), Vec::new());
    }

    let mut object_types = vec![
        ObjectType::new("Customer").with_attribute("name", ValueKind::Text),
        ObjectType::new("Order").with_attribute("total", ValueKind::Real),
        ObjectType::new("Item")
            .with_attribute("price", ValueKind::Real)
            .with_attribute("weight", ValueKind::Real),
    ];
    if config.inheritance {
        object_types.push(
            ObjectType::new("ExpressOrder")
                .with_parent("Order")
                .with_attribute("express_fee", ValueKind::Real),
        );
    }
    if config.n_packages > 0 {
        object_types.push(ObjectType::new("Package").with_attribute("weight", ValueKind::Real));
    }
    if config.schema_evolution {
        object_types.push(ObjectType::new("Carrier").with_attribute("name", ValueKind::Text));
    }
    let event_types = b
        .event_types
        .iter()
        .map(|&name| {
            let ty = EventType::new(name);
            if name == "place order" {
                ty.with_attribute("channel", ValueKind::Text)
            } else {
                ty
            }
        })
        .collect();
    let mode = if config.orphan_objects || config.orphan_events {
        Strictness::Lax
    } else {
        Strictness::Strict
    };
    let parts = LogParts {
        object_types,
        event_types,
        objects: b.objects,
        events: b.events,
        meta: LogMeta {
            provenance: Some(format!("generator seed {}", config.seed)),
            ..LogMeta::default()
        },
    };
    Ok(OCLog::build(parts, mode).expect("generated logs are well-formed"))
}

/// Sizes of a log stored as a full object model snapshot per relation
/// update, next to its refined serialization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XocEmulation {
    pub events: usize,
    /// Events that start or end some relation.
    pub relation_updating_events: usize,
    pub snapshot_bytes: usize,
    pub rocel_bytes: usize,
    pub emulated_bytes: usize,
}

impl XocEmulation {
    pub fn ratio(&self) -> f64 {
        self.emulated_bytes as f64 / self.rocel_bytes.max(1) as f64
    }

    pub fn rocel_bytes_per_event(&self) -> f64 {
        self.rocel_bytes as f64 / self.events.max(1) as f64
    }

    pub fn emulated_bytes_per_event(&self) -> f64 {
        self.emulated_bytes as f64 / self.events.max(1) as f64
    }
}

pub fn emulate_xoc_size(log: &OCLog) -> XocEmulation {
    let rocel = write_rocel(log);
    let doc: serde_json::Value = serde_json::from_slice(&rocel).expect("refined output is JSON");
    let snapshot_bytes = serde_json::to_vec(&doc["objects"])
        .expect("JSON values serialize")
        .len();
    let updating: BTreeSet<&EventId> = log
        .relations()
        .filter_map(|r| r.change_cause.as_ref())
        .collect();
    XocEmulation {
        events: log.events().len(),
        relation_updating_events: updating.len(),
        snapshot_bytes,
        rocel_bytes: rocel.len(),
        emulated_bytes: rocel.len() + updating.len() * snapshot_bytes,
    }
}

/// The emulation over `base` with each order count in `n_orders`.
pub fn scalability_series(
    base: &GenConfig,
    n_orders: &[usize],
) -> Result<Vec<XocEmulation>, GenError> {
    n_orders
        .iter()
        .map(|&n| {
            let config = GenConfig {
                n_orders: n,
                ..base.clone()
            };
            generate(&config).map(|log| emulate_xoc_size(&log))
        })
        .collect()
}
