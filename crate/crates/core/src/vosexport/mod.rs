//! VOSviewer JSON export and static bundle generation.
//!
//! A document is the VOSviewer Online interchange layout
//! (`{"network": {"items": [...], "links": [...]}}`) with build metadata under
//! a `dimnet` key, which VOSviewer ignores. JSON is written with sorted keys,
//! two-space indentation and LF line endings so reruns diff cleanly.

mod bundle;
mod schema;

use std::collections::{BTreeMap, HashSet};
use std::sync::OnceLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::netbuild::{Network, NetworkKind, NetworkParams};

pub use bundle::{
    slugify, write_bundle, BundleEntry, BundleError, BundleManifest, INDEX_FILE, MANIFEST_FILE,
    NETWORKS_DIR, VOSVIEWER_ONLINE_URL,
};
pub use schema::SchemaViolation;

/// Weight name carrying a node's publication count.
pub const DOCUMENTS_WEIGHT: &str = "Documents";

pub const ENGINE_VERSION: &str = concat!("dimnet ", env!("CARGO_PKG_VERSION"));

/// The checked-in interchange schema.
pub const SCHEMA_JSON: &str = include_str!("../../schema/vosviewer-network.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VosItem {
    pub id: u32,
    pub label: String,
    pub weights: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VosLink {
    pub source_id: u32,
    pub target_id: u32,
    pub strength: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct VosNetwork {
    pub items: Vec<VosItem>,
    pub links: Vec<VosLink>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VosMetadata {
    pub query_name: String,
    pub kind: NetworkKind,
    pub params: NetworkParams,
    pub subset_size: usize,
    pub generated_at: DateTime<Utc>,
    pub engine_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VosDocument {
    pub network: VosNetwork,
    #[serde(rename = "dimnet")]
    pub metadata: VosMetadata,
}

pub fn to_vos_json(network: &Network) -> VosDocument {
    to_vos_json_at(network, Utc::now())
}

/// Maps nodes to items `1..=N` in rank order and each edge to one link from
/// its greater key to its lesser key.
pub fn to_vos_json_at(network: &Network, generated_at: DateTime<Utc>) -> VosDocument {
    let items: Vec<VosItem> = network
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| VosItem {
            id: i as u32 + 1,
            label: n.label.clone(),
            weights: BTreeMap::from([(DOCUMENTS_WEIGHT.to_string(), u64::from(n.pubs))]),
        })
        .collect();
    let ids: std::collections::HashMap<&str, u32> = network
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.key.as_str(), i as u32 + 1))
        .collect();
    let links = network
        .edges
        .iter()
        .map(|e| VosLink {
            source_id: ids[e.a.as_str()],
            target_id: ids[e.b.as_str()],
            strength: u64::from(e.weight),
        })
        .collect();
    VosDocument {
        network: VosNetwork { items, links },
        metadata: VosMetadata {
            query_name: network.name.clone(),
            kind: network.kind,
            params: network.params,
            subset_size: network.subset_size,
            generated_at,
            engine_version: ENGINE_VERSION.to_string(),
        },
    }
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let sorted: BTreeMap<String, Value> =
                map.into_iter().map(|(k, v)| (k, sort_keys(v))).collect();
            Value::Object(sorted.into_iter().collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Canonical text of any serialisable value: sorted keys, pretty printed,
/// trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> String {
    let v = sort_keys(serde_json::to_value(value).expect("serialisable value"));
    let mut s = serde_json::to_string_pretty(&v).expect("JSON value");
    s.push('\n');
    s
}

pub fn to_json_string(doc: &VosDocument) -> String {
    canonical_json(doc)
}

#[derive(Debug, Error)]
pub enum ValidationError {
    #[error("not valid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{} problem(s): {}", .0.len(), .0.join("; "))]
    Invalid(Vec<String>),
}

fn schema() -> &'static Value {
    static SCHEMA: OnceLock<Value> = OnceLock::new();
    SCHEMA.get_or_init(|| serde_json::from_str(SCHEMA_JSON).expect("bundled schema is valid JSON"))
}

/// Checks a document against the interchange schema only.
pub fn schema_violations(instance: &Value) -> Vec<SchemaViolation> {
    schema::validate(schema(), instance)
}

/// Validates emitted JSON text: the interchange schema first, then a
/// structural pass over ids and links, then decoding.
pub fn validate_json(text: &str) -> Result<VosDocument, ValidationError> {
    let value: Value = serde_json::from_str(text)?;
    let mut problems: Vec<String> = schema_violations(&value)
        .into_iter()
        .map(|v| format!("{}: {}", v.path, v.message))
        .collect();
    if problems.is_empty() {
        problems.extend(structural_problems(&value));
    }
    if !problems.is_empty() {
        return Err(ValidationError::Invalid(problems));
    }
    Ok(serde_json::from_value(value)?)
}

/// Works on the raw JSON so it does not share code with the writer.
fn structural_problems(v: &Value) -> Vec<String> {
    let mut out = Vec::new();
    let empty = Vec::new();
    let items = v["network"]["items"].as_array().unwrap_or(&empty);
    let links = v["network"]["links"].as_array().unwrap_or(&empty);
    for (i, item) in items.iter().enumerate() {
        let want = i as u64 + 1;
        if item["id"].as_u64() != Some(want) {
            out.push(format!(
                "item {i} has id {} but ids must run 1..N (expected {want})",
                item["id"]
            ));
        }
    }
    let n = items.len() as u64;
    let min_strength = v["dimnet"]["params"]["min_edge_weight"].as_f64();
    let mut seen = HashSet::new();
    for (i, link) in links.iter().enumerate() {
        let (s, t) = (
            link["source_id"].as_u64().unwrap_or(0),
            link["target_id"].as_u64().unwrap_or(0),
        );
        if !(1..=n).contains(&s) || !(1..=n).contains(&t) {
            out.push(format!("link {i} ({s} -> {t}) references a missing item"));
        }
        if s == t {
            out.push(format!("link {i} is a self link on item {s}"));
        }
        if !seen.insert((s.min(t), s.max(t))) {
            out.push(format!("link {i} duplicates the pair ({s}, {t})"));
        }
        if let (Some(min), Some(strength)) = (min_strength, link["strength"].as_f64()) {
            if strength < min {
                out.push(format!(
                    "link {i} strength {strength} is below min_edge_weight {min}"
                ));
            }
        }
    }
    out
}

pub fn from_json_str(text: &str) -> Result<VosDocument, serde_json::Error> {
    serde_json::from_str(text)
}
