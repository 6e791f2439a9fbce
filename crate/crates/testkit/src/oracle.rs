//! Reference network construction by exhaustive enumeration.
//!
//! Deliberately naive: every count is recomputed by scanning the whole
//! subset, pairs are enumerated over all ordered node pairs, and nothing is
//! shared with the builder in `dimnet_core::netbuild`.

use dimnet_core::corpus::{Corpus, Publication};
use dimnet_core::netbuild::{Edge, Network, NetworkKind, NetworkParams, Node};
use dimnet_core::subsetql::SubsetResult;

fn mentions(p: &Publication, kind: NetworkKind, params: &NetworkParams, key: &str) -> bool {
    match kind {
        NetworkKind::Organisation => p.research_orgs.iter().any(|o| o.as_str() == key),
        NetworkKind::Concept => p
            .concepts
            .iter()
            .any(|c| c.concept == key && c.relevance >= params.concept_min_relevance),
    }
}

pub fn brute_force_network(
    corpus: &Corpus,
    subset: &SubsetResult,
    kind: NetworkKind,
    params: &NetworkParams,
) -> Network {
    let pubs: Vec<&Publication> = corpus
        .publications()
        .values()
        .filter(|p| subset.ids.contains(&p.id))
        .collect();

    let mut candidates: Vec<String> = Vec::new();
    for p in &pubs {
        let keys: Vec<String> = match kind {
            NetworkKind::Organisation => p.research_orgs.iter().map(|o| o.to_string()).collect(),
            NetworkKind::Concept => p
                .concepts
                .iter()
                .filter(|c| c.relevance >= params.concept_min_relevance)
                .map(|c| c.concept.clone())
                .collect(),
        };
        for k in keys {
            if !candidates.contains(&k) {
                candidates.push(k);
            }
        }
    }

    let mut ranked: Vec<(String, u32)> = candidates
        .into_iter()
        .map(|k| {
            let n = pubs
                .iter()
                .filter(|p| mentions(p, kind, params, &k))
                .count() as u32;
            (k, n)
        })
        .collect();
    ranked.sort_by(|x, y| (std::cmp::Reverse(x.1), &x.0).cmp(&(std::cmp::Reverse(y.1), &y.0)));
    ranked.truncate(params.max_nodes);

    let nodes: Vec<Node> = ranked
        .into_iter()
        .filter_map(|(key, pubs)| {
            let label = match kind {
                NetworkKind::Organisation => {
                    let org = corpus
                        .organisations()
                        .values()
                        .find(|o| o.id.as_str() == key)?;
                    format!("{} ({})", org.name, key)
                }
                NetworkKind::Concept => key.clone(),
            };
            Some(Node { key, label, pubs })
        })
        .collect();

    let mut edges = Vec::new();
    for a in &nodes {
        for b in &nodes {
            if a.key.as_bytes() <= b.key.as_bytes() {
                continue;
            }
            let weight = pubs
                .iter()
                .filter(|p| mentions(p, kind, params, &a.key) && mentions(p, kind, params, &b.key))
                .count() as u32;
            if weight >= params.min_edge_weight && weight > 0 {
                edges.push(Edge {
                    a: a.key.clone(),
                    b: b.key.clone(),
                    weight,
                });
            }
        }
    }
    edges.sort_by(|x, y| {
        (std::cmp::Reverse(x.weight), &x.a, &x.b).cmp(&(std::cmp::Reverse(y.weight), &y.a, &y.b))
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
