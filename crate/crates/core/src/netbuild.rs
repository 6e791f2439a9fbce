//! Co-occurrence network construction.
//!
//! Both network kinds share one pipeline over the subset's publications:
//!
//! 1. each publication contributes its *distinct* keys (organisation ids, or
//!    concepts passing the relevance gate);
//! 2. keys are ranked by the number of publications carrying them, ties
//!    broken by ascending key bytes, and cut to `max_nodes`;
//! 3. every unordered pair of distinct selected keys on a publication adds
//!    one to that pair's weight, so a weight is a distinct-publication count;
//! 4. pairs below `min_edge_weight` are dropped.
//!
//! Organisation ranking counts every listed org id, including ids with no
//! organisation record. Those ids occupy top-node slots but are left out of
//! the node list and of every edge, the same as an inner join against the
//! organisation table would.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, Publication};
use crate::subsetql::SubsetResult;

/// Publications per parallel work unit.
const CHUNK: usize = 16 * 1024;

/// Largest node count for which pair weights use a dense triangular matrix.
const DENSE_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NetworkKind {
    #[serde(rename = "org")]
    Organisation,
    #[serde(rename = "concept")]
    Concept,
}

impl NetworkKind {
    pub const ALL: [NetworkKind; 2] = [NetworkKind::Organisation, NetworkKind::Concept];

    /// Short name used in file names and on the command line.
    pub fn as_str(self) -> &'static str {
        match self {
            NetworkKind::Organisation => "org",
            NetworkKind::Concept => "concept",
        }
    }
}

impl fmt::Display for NetworkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown network kind `{0}` (expected org or concept)")]
pub struct UnknownKind(pub String);

impl FromStr for NetworkKind {
    type Err = UnknownKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "org" | "orgs" | "organisation" | "organization" => Ok(NetworkKind::Organisation),
            "concept" | "concepts" => Ok(NetworkKind::Concept),
            _ => Err(UnknownKind(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamsError {
    #[error("max_nodes must be at least 1")]
    MaxNodes,
    #[error("min_edge_weight must be at least 1")]
    MinEdgeWeight,
    #[error("concept_min_relevance must lie in [0, 1], got {0}")]
    Relevance(f64),
}

/// Size and threshold parameters of a network build.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkParams {
    pub max_nodes: usize,
    pub min_edge_weight: u32,
    /// Concept networks only: mentions below this relevance are ignored.
    pub concept_min_relevance: f64,
}

impl NetworkParams {
    pub const DEFAULT_MAX_NODES: usize = 500;
    pub const DEFAULT_MIN_EDGE_WEIGHT: u32 = 2;
    pub const DEFAULT_CONCEPT_MIN_RELEVANCE: f64 = 0.5;

    pub fn new(
        max_nodes: usize,
        min_edge_weight: u32,
        concept_min_relevance: f64,
    ) -> Result<Self, ParamsError> {
        let p = NetworkParams {
            max_nodes,
            min_edge_weight,
            concept_min_relevance,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ParamsError> {
        if self.max_nodes < 1 {
            return Err(ParamsError::MaxNodes);
        }
        if self.min_edge_weight < 1 {
            return Err(ParamsError::MinEdgeWeight);
        }
        if !(0.0..=1.0).contains(&self.concept_min_relevance) {
            return Err(ParamsError::Relevance(self.concept_min_relevance));
        }
        Ok(())
    }
}

impl Default for NetworkParams {
    fn default() -> Self {
        NetworkParams {
            max_nodes: Self::DEFAULT_MAX_NODES,
            min_edge_weight: Self::DEFAULT_MIN_EDGE_WEIGHT,
            concept_min_relevance: Self::DEFAULT_CONCEPT_MIN_RELEVANCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Node {
    pub key: String,
    pub label: String,
    /// Subset publications carrying this key.
    pub pubs: u32,
}

/// An undirected weighted edge, stored with `a > b` in byte order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub a: String,
    pub b: String,
    pub weight: u32,
}

impl Edge {
    /// Orders the endpoints canonically. Panics if they are equal.
    pub fn new(x: &str, y: &str, weight: u32) -> Edge {
        assert_ne!(x, y, "self edge");
        let (a, b) = if x > y { (x, y) } else { (y, x) };
        Edge {
            a: a.to_string(),
            b: b.to_string(),
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub kind: NetworkKind,
    pub name: String,
    pub params: NetworkParams,
    /// In rank order.
    pub nodes: Vec<Node>,
    /// By descending weight, then by `(a, b)`.
    pub edges: Vec<Edge>,
    pub subset_size: usize,
}

/// Label of an organisation node: `"{name} ({id})"`.
pub fn org_label(name: &str, id: &str) -> String {
    format!("{name} ({id})")
}

fn subset_publications<'c>(corpus: &'c Corpus, subset: &SubsetResult) -> Vec<&'c Publication> {
    subset
        .ids
        .iter()
        .filter_map(|id| corpus.publication(id))
        .collect()
}

/// Distinct keys a publication contributes, sorted.
fn publication_keys<'p>(
    p: &'p Publication,
    kind: NetworkKind,
    params: &NetworkParams,
) -> Vec<&'p str> {
    let mut keys: Vec<&str> = match kind {
        NetworkKind::Organisation => p.research_orgs.iter().map(|o| o.as_str()).collect(),
        NetworkKind::Concept => p
            .concepts
            .iter()
            .filter(|c| c.relevance >= params.concept_min_relevance)
            .map(|c| c.concept.as_str())
            .collect(),
    };
    keys.sort_unstable();
    keys.dedup();
    keys
}

fn merge_counts<'a>(a: HashMap<&'a str, u32>, b: HashMap<&'a str, u32>) -> HashMap<&'a str, u32> {
    let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    for (k, v) in small {
        *big.entry(k).or_insert(0) += v;
    }
    big
}

fn rank_keys<'c>(
    pubs: &[&'c Publication],
    kind: NetworkKind,
    params: &NetworkParams,
) -> Vec<(&'c str, u32)> {
    let counts = pubs
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut counts: HashMap<&str, u32> = HashMap::new();
            for p in chunk {
                for k in publication_keys(p, kind, params) {
                    *counts.entry(k).or_insert(0) += 1;
                }
            }
            counts
        })
        .reduce(HashMap::new, merge_counts);
    let mut ranked: Vec<(&str, u32)> = counts.into_iter().collect();
    ranked.par_sort_unstable_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(y.0)));
    ranked.truncate(params.max_nodes);
    ranked
}

/// The `max_nodes` keys with the most subset publications, ties broken by
/// ascending key.
///
/// For organisations this ranks every listed id, resolved or not; an
/// unresolved id is labelled with the bare id.
pub fn top_nodes(
    corpus: &Corpus,
    subset: &SubsetResult,
    kind: NetworkKind,
    params: &NetworkParams,
) -> Vec<Node> {
    let pubs = subset_publications(corpus, subset);
    rank_keys(&pubs, kind, params)
        .into_iter()
        .map(|(key, pubs)| {
            let label = match kind {
                NetworkKind::Organisation => match corpus.organisation(key) {
                    Some(org) => org_label(&org.name, key),
                    None => key.to_string(),
                },
                NetworkKind::Concept => key.to_string(),
            };
            Node {
                key: key.to_string(),
                label,
                pubs,
            }
        })
        .collect()
}

/// Pair weights over node indices `0..n`.
///
/// Merging is elementwise addition, which is associative and commutative, so
/// the result is independent of how publications are partitioned.
#[derive(Debug, Clone, PartialEq)]
pub enum PairCounts {
    /// Row-major strict lower triangle: pair `(i, j)` with `i > j` lives at
    /// `i * (i - 1) / 2 + j`.
    Dense { n: usize, counts: Vec<u32> },
    Sparse {
        n: usize,
        counts: HashMap<(u32, u32), u32>,
    },
}

impl PairCounts {
    pub fn new(n: usize) -> Self {
        if n <= DENSE_LIMIT {
            PairCounts::Dense {
                n,
                counts: vec![0; n * n.saturating_sub(1) / 2],
            }
        } else {
            PairCounts::Sparse {
                n,
                counts: HashMap::new(),
            }
        }
    }

    pub fn sparse(n: usize) -> Self {
        PairCounts::Sparse {
            n,
            counts: HashMap::new(),
        }
    }

    /// Adds one to the unordered pair `{x, y}`; `x != y`.
    pub fn add(&mut self, x: u32, y: u32) {
        let (i, j) = if x > y { (x, y) } else { (y, x) };
        debug_assert!(i != j);
        match self {
            PairCounts::Dense { counts, .. } => {
                let (i, j) = (i as usize, j as usize);
                counts[i * (i - 1) / 2 + j] += 1;
            }
            PairCounts::Sparse { counts, .. } => *counts.entry((i, j)).or_insert(0) += 1,
        }
    }

    pub fn merge(self, other: PairCounts) -> PairCounts {
        match (self, other) {
            (PairCounts::Dense { n, mut counts }, PairCounts::Dense { counts: rhs, .. }) => {
                for (c, r) in counts.iter_mut().zip(rhs) {
                    *c += r;
                }
                PairCounts::Dense { n, counts }
            }
            (PairCounts::Sparse { n, counts: a }, PairCounts::Sparse { counts: b, .. }) => {
                let (mut big, small) = if a.len() >= b.len() { (a, b) } else { (b, a) };
                for (k, v) in small {
                    *big.entry(k).or_insert(0) += v;
                }
                PairCounts::Sparse { n, counts: big }
            }
            (lhs, rhs) => {
                let n = lhs.node_count();
                let mut out = PairCounts::sparse(n);
                for (i, j, w) in lhs.iter().chain(rhs.iter()) {
                    if let PairCounts::Sparse { counts, .. } = &mut out {
                        *counts.entry((i, j)).or_insert(0) += w;
                    }
                }
                out
            }
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            PairCounts::Dense { n, .. } | PairCounts::Sparse { n, .. } => *n,
        }
    }

    /// Non-zero pairs as `(i, j, weight)` with `i > j`.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (u32, u32, u32)> + '_> {
        match self {
            PairCounts::Dense { n, counts } => Box::new(
                (1..*n)
                    .flat_map(move |i| (0..i).map(move |j| (i, j)))
                    .zip(counts.iter())
                    .filter(|(_, &w)| w > 0)
                    .map(|((i, j), &w)| (i as u32, j as u32, w)),
            ),
            PairCounts::Sparse { counts, .. } => {
                Box::new(counts.iter().map(|(&(i, j), &w)| (i, j, w)))
            }
        }
    }
}

/// Builds a network of the given kind over the subset.
pub fn build_network(
    corpus: &Corpus,
    subset: &SubsetResult,
    kind: NetworkKind,
    params: &NetworkParams,
) -> Network {
    let pubs = subset_publications(corpus, subset);
    let ranked = rank_keys(&pubs, kind, params);

    let mut nodes = Vec::with_capacity(ranked.len());
    for (key, count) in ranked {
        let label = match kind {
            NetworkKind::Organisation => match corpus.organisation(key) {
                Some(org) => org_label(&org.name, key),
                None => continue,
            },
            NetworkKind::Concept => key.to_string(),
        };
        nodes.push(Node {
            key: key.to_string(),
            label,
            pubs: count,
        });
    }
    let index: HashMap<&str, u32> = nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.key.as_str(), i as u32))
        .collect();

    let pairs = if nodes.len() < 2 {
        PairCounts::new(0)
    } else {
        pubs.par_chunks(CHUNK)
            .map(|chunk| {
                let mut counts = PairCounts::new(nodes.len());
                let mut selected = Vec::new();
                for p in chunk {
                    selected.clear();
                    selected.extend(
                        publication_keys(p, kind, params)
                            .into_iter()
                            .filter_map(|k| index.get(k).copied()),
                    );
                    for (x, &i) in selected.iter().enumerate() {
                        for &j in &selected[..x] {
                            counts.add(i, j);
                        }
                    }
                }
                counts
            })
            .reduce(|| PairCounts::new(nodes.len()), PairCounts::merge)
    };

    let mut edges: Vec<Edge> = pairs
        .iter()
        .filter(|&(_, _, w)| w >= params.min_edge_weight)
        .map(|(i, j, w)| Edge::new(&nodes[i as usize].key, &nodes[j as usize].key, w))
        .collect();
    edges.par_sort_unstable_by(|x, y| {
        y.weight
            .cmp(&x.weight)
            .then_with(|| (&x.a, &x.b).cmp(&(&y.a, &y.b)))
    });

    Network {
        kind,
        name: subset.query_name.clone(),
        params: *params,
        nodes,
        edges,
        subset_size: pubs.len(),
    }
}

pub fn build_org_network(
    corpus: &Corpus,
    subset: &SubsetResult,
    params: &NetworkParams,
) -> Network {
    build_network(corpus, subset, NetworkKind::Organisation, params)
}

pub fn build_concept_network(
    corpus: &Corpus,
    subset: &SubsetResult,
    params: &NetworkParams,
) -> Network {
    build_network(corpus, subset, NetworkKind::Concept, params)
}
