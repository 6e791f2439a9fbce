//! Co-occurrence networks from bibliometric publication records.
//!
//! The pipeline has three stages:
//!
//! * [`corpus`] loads publication and organisation exports;
//! * [`subsetql`] selects a subset of publications with a predicate query,
//!   and [`netbuild`] turns the subset into an organisation collaboration or
//!   concept co-occurrence network;
//! * [`vosexport`] writes VOSviewer JSON and a static browsing bundle.
//!
//! [`sqlgen`] renders the equivalent BigQuery SQL for running the same
//! extraction against the hosted dataset.

pub mod corpus;
pub mod netbuild;
pub mod sqlgen;
pub mod subsetql;
pub mod vosexport;

pub use corpus::{
    corpus_stats, ingest, Corpus, CorpusError, IngestReport, InputFormat, OrgId, Organisation,
    Publication,
};
pub use netbuild::{
    build_concept_network, build_network, build_org_network, top_nodes, Edge, Network, NetworkKind,
    NetworkParams, Node,
};
pub use sqlgen::{render_sql, RenderedSql, SqlRequest};
pub use subsetql::{eval_query, load_query_folder, parse_query, SubsetQuery, SubsetResult};
pub use vosexport::{to_vos_json, validate_json, write_bundle, BundleManifest, VosDocument};
