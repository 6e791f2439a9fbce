//! Test support for dimnet: a brute-force network oracle and generators for
//! random corpora, parameters and queries.
//!
//! Nothing here is used by the shipping crates.

pub mod gen;
pub mod oracle;

pub use gen::{random_corpus, random_expr, random_params, zipf_corpus, CorpusShape};
pub use oracle::brute_force_network;
