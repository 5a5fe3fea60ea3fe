//! The nineteen object-centric log specifications and the static capability
//! matrix of the published formats.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::UnknownFormatName;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    E2E,
    O2O,
    E2O,
    #[serde(rename = "DQ")]
    DataQuality,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Dimension::E2E => "E2E",
            Dimension::O2O => "O2O",
            Dimension::E2O => "E2O",
            Dimension::DataQuality => "DQ",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpecId {
    S1,
    S2,
    S3,
    S4,
    S5,
    S6,
    S7,
    S8,
    S9,
    S10,
    S11,
    S12,
    S13,
    S14,
    S15,
    S16,
    S17,
    S18,
    S19,
}

impl SpecId {
    pub const ALL: [SpecId; 19] = [
        SpecId::S1,
        SpecId::S2,
        SpecId::S3,
        SpecId::S4,
        SpecId::S5,
        SpecId::S6,
        SpecId::S7,
        SpecId::S8,
        SpecId::S9,
        SpecId::S10,
        SpecId::S11,
        SpecId::S12,
        SpecId::S13,
        SpecId::S14,
        SpecId::S15,
        SpecId::S16,
        SpecId::S17,
        SpecId::S18,
        SpecId::S19,
    ];

    pub fn number(self) -> usize {
        self as usize + 1
    }

    pub fn dimension(self) -> Dimension {
        match self.number() {
            1..=4 => Dimension::E2E,
            5..=12 => Dimension::O2O,
            13..=15 => Dimension::E2O,
            _ => Dimension::DataQuality,
        }
    }

    pub fn sentence(self) -> &'static str {
        match self {
            SpecId::S1 => "An event must have a unique event ID",
            SpecId::S2 => "An event must have a timestamp",
            SpecId::S3 => "An event must have an activity",
            SpecId::S4 => "An event can have other optional attributes",
            SpecId::S5 => "An object must have object type",
            SpecId::S6 => "An object must have a unique objectID",
            SpecId::S7 => "An object can have optional object attributes",
            SpecId::S8 => "An object can change values and those are traceable",
            SpecId::S9 => "An object instance can be related to the other object instances",
            SpecId::S10 => "Supports relation qualifiers",
            SpecId::S11 => "Object relations can change over time (schema evolution)",
            SpecId::S12 => "Support object type inheritance",
            SpecId::S13 => "An event must be related to 1..N objects",
            SpecId::S14 => "An object must be related to 1..N events",
            SpecId::S15 => "The process of an individual object instance must be recoverable",
            SpecId::S16 => "Data changes must be unambiguous",
            SpecId::S17 => "Data is uniquely identifiable",
            SpecId::S18 => "Data should be minimally duplicated",
            SpecId::S19 => "Data storage should be maximally scalable",
        }
    }
}

impl fmt::Display for SpecId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S{}", self.number())
    }
}

impl FromStr for SpecId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.strip_prefix('S')
            .and_then(|n| n.parse::<usize>().ok())
            .filter(|n| (1..=19).contains(n))
            .map(|n| SpecId::ALL[n - 1])
            .ok_or_else(|| format!("unknown specification {s:?}"))
    }
}

/// One cell of the capability matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Support {
    Yes,
    No,
    /// Not supported, with a clarifying note.
    Qualified(String),
}

pub const NOT_TRACEABLE: &str = "not traceable";
pub const NOT_APPLICABLE: &str = "not applicable: metamodel only";

impl Support {
    pub fn is_supported(&self) -> bool {
        matches!(self, Support::Yes)
    }

    /// Marker used in rendered matrices.
    pub fn marker(&self) -> String {
        match self {
            Support::Yes => "✓".to_string(),
            Support::No => "X".to_string(),
            Support::Qualified(note) if note == NOT_APPLICABLE => "/".to_string(),
            Support::Qualified(note) => format!("X ({note})"),
        }
    }
}

/// How a format records attribute value changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeTracking {
    /// Whole object versions without a link to the previous version.
    ObjectVersions,
    /// Changes keyed by timestamp only.
    Timestamp,
    /// Changes in a separate table keyed by object and causing event.
    EventKey,
    /// Change records embedded in the causing event's row.
    EventEmbedded,
    /// Either a timestamp or a causing event may key a change.
    TimestampOrEvent,
}

impl ChangeTracking {
    pub fn permits_uncaused(self) -> bool {
        matches!(
            self,
            ChangeTracking::ObjectVersions
                | ChangeTracking::Timestamp
                | ChangeTracking::TimestampOrEvent
        )
    }

    pub fn requires_cause(self) -> bool {
        matches!(
            self,
            ChangeTracking::EventKey | ChangeTracking::EventEmbedded
        )
    }
}

/// Capabilities of one format over the nineteen specifications.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatDescriptor {
    pub format: String,
    pub display_name: String,
    pub support: BTreeMap<SpecId, Support>,
    pub change_tracking: ChangeTracking,
}

impl FormatDescriptor {
    pub fn supports(&self, spec: SpecId) -> bool {
        self.support.get(&spec).is_some_and(Support::is_supported)
    }
}

/// Names of the formats in the comparison matrix, in column order.
pub const MATRIX_FORMATS: [&str; 7] = ["XOC", "OCEL1", "OCEL2", "DOCEL", "ACEL", "EKG", "OCED"];

// Columns: XOC, OCEL 1.0, OCEL 2.0, DOCEL, ACEL, EKG, OCED.
// Y = yes, N = no, T = no (not traceable), / = not applicable.
const MATRIX: [&str; 19] = [
    "YYYYYYY", // S1
    "YYYYYYY", // S2
    "YYYYYYY", // S3
    "YYYYYYY", // S4
    "YYYYYYY", // S5
    "YYYYYYY", // S6
    "YYYYYYY", // S7
    "TTYYYYY", // S8
    "YNYNYYY", // S9
    "NNYNNNY", // S10
    "NNNNYNN", // S11
    "NNNNNNN", // S12
    "NYNYNNN", // S13
    "NYNYNNN", // S14
    "YYYYYYY", // S15
    "YNNYYY/", // S16
    "YNNYYY/", // S17
    "NYYYYY/", // S18
    "NYYYYY/", // S19
];

fn cell(code: u8) -> Support {
    match code {
        b'Y' => Support::Yes,
        b'N' => Support::No,
        b'T' => Support::Qualified(NOT_TRACEABLE.to_string()),
        b'/' => Support::Qualified(NOT_APPLICABLE.to_string()),
        other => unreachable!("bad matrix code {other}"),
    }
}

fn column(index: usize) -> BTreeMap<SpecId, Support> {
    SpecId::ALL
        .iter()
        .zip(MATRIX.iter())
        .map(|(spec, row)| (*spec, cell(row.as_bytes()[index])))
        .collect()
}

fn canonical_name(name: &str) -> Option<&'static str> {
    let key: String = name
        .chars()
        .filter(|c| c.is_ascii_alphanumeric())
        .collect::<String>()
        .to_ascii_uppercase();
    Some(match key.as_str() {
        "XOC" => "XOC",
        "OCEL1" | "OCEL10" | "OCEL1JSON" => "OCEL1",
        "OCEL2" | "OCEL20" | "OCEL2JSON" => "OCEL2",
        "DOCEL" | "DOCELTABLES" => "DOCEL",
        "ACEL" => "ACEL",
        "EKG" => "EKG",
        "OCED" => "OCED",
        "ROCEL" | "ROCELJSON" => "ROCEL",
        _ => return None,
    })
}

/// Capability descriptor for a format name.
///
/// Accepts the seven compared formats and the refined `ROCEL` format, which
/// supports every specification except the two cardinality restrictions.
pub fn format_capabilities(name: &str) -> Result<FormatDescriptor, UnknownFormatName> {
    let canonical = canonical_name(name).ok_or_else(|| UnknownFormatName(name.to_string()))?;
    let (display_name, change_tracking) = match canonical {
        "XOC" => ("XOC", ChangeTracking::ObjectVersions),
        "OCEL1" => ("OCEL 1.0", ChangeTracking::ObjectVersions),
        "OCEL2" => ("OCEL 2.0", ChangeTracking::Timestamp),
        "DOCEL" => ("DOCEL", ChangeTracking::EventKey),
        "ACEL" => ("ACEL", ChangeTracking::EventEmbedded),
        "EKG" => ("EKG", ChangeTracking::TimestampOrEvent),
        "OCED" => ("OCED", ChangeTracking::TimestampOrEvent),
        _ => ("ROCEL", ChangeTracking::TimestampOrEvent),
    };
    let support = match MATRIX_FORMATS.iter().position(|f| *f == canonical) {
        Some(index) => column(index),
        None => SpecId::ALL
            .iter()
            .map(|&s| {
                let cell = if matches!(s, SpecId::S13 | SpecId::S14) {
                    Support::No
                } else {
                    Support::Yes
                };
                (s, cell)
            })
            .collect(),
    };
    Ok(FormatDescriptor {
        format: canonical.to_string(),
        display_name: display_name.to_string(),
        support,
        change_tracking,
    })
}

/// All seven matrix columns in order.
pub fn matrix_descriptors() -> Vec<FormatDescriptor> {
    MATRIX_FORMATS
        .iter()
        .map(|f| format_capabilities(f).expect("matrix format names are known"))
        .collect()
}

/// Renders descriptors as a pipe table: one header row, then one row per
/// specification.
pub fn render_matrix(descriptors: &[FormatDescriptor]) -> String {
    let mut out = String::from("| Specification |");
    for d in descriptors {
        out.push_str(&format!(" {} |", d.display_name));
    }
    out.push('\n');
    for spec in SpecId::ALL {
        out.push_str(&format!("| {spec}: {} |", spec.sentence()));
        for d in descriptors {
            let marker = d
                .support
                .get(&spec)
                .map(Support::marker)
                .unwrap_or_default();
            out.push_str(&format!(" {marker} |"));
        }
        out.push('\n');
    }
    out
}
