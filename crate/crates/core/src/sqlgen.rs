//! Parameterised BigQuery SQL for the network builds, for running against
//! the hosted dataset instead of a local export.
//!
//! The collaboration template is kept verbatim in `templates/org_network.sql`.
//! Rendering substitutes the dataset prefix into the table paths and splices
//! the user's subquery in place of `{user-provided-subquery}`; `@max_nodes`
//! and `@min_edge_weight` stay as named query parameters.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::netbuild::{NetworkKind, NetworkParams, UnknownKind};

pub const DEFAULT_DATASET_PREFIX: &str = "covid-19-dimensions-ai.data";

const SUBQUERY_SLOT: &str = "{user-provided-subquery}";
const ORG_TEMPLATE: &str = include_str!("../templates/org_network.sql");
const CONCEPT_TEMPLATE: &str = include_str!("../templates/concept_network.sql");

#[derive(Debug, Error, PartialEq)]
pub enum SqlError {
    #[error("the subquery is empty")]
    EmptySubquery,
    #[error(
        "invalid dataset prefix `{0}`: expected `project.dataset` with no spaces or backticks"
    )]
    BadPrefix(String),
    #[error(transparent)]
    UnknownKind(#[from] UnknownKind),
}

#[derive(Debug, Clone)]
pub struct SqlRequest {
    /// SQL returning an `id` column; inserted verbatim.
    pub user_subquery: String,
    pub kind: NetworkKind,
    pub params: NetworkParams,
    pub dataset_prefix: String,
}

impl SqlRequest {
    pub fn new(user_subquery: impl Into<String>, kind: NetworkKind, params: NetworkParams) -> Self {
        SqlRequest {
            user_subquery: user_subquery.into(),
            kind,
            params,
            dataset_prefix: DEFAULT_DATASET_PREFIX.to_string(),
        }
    }

    /// Like [`SqlRequest::new`] with the kind given by name.
    pub fn with_kind_name(
        user_subquery: impl Into<String>,
        kind: &str,
        params: NetworkParams,
    ) -> Result<Self, SqlError> {
        Ok(Self::new(user_subquery, kind.parse()?, params))
    }

    pub fn dataset_prefix(mut self, prefix: impl Into<String>) -> Self {
        self.dataset_prefix = prefix.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RenderedSql {
    pub sql: String,
    /// Values for the `@name` parameters left in the SQL.
    pub named_params: BTreeMap<String, Value>,
}

/// The unrendered template for `kind`.
pub fn template(kind: NetworkKind) -> &'static str {
    match kind {
        NetworkKind::Organisation => ORG_TEMPLATE,
        NetworkKind::Concept => CONCEPT_TEMPLATE,
    }
}

pub fn render_sql(req: &SqlRequest) -> Result<RenderedSql, SqlError> {
    if req.user_subquery.trim().is_empty() {
        return Err(SqlError::EmptySubquery);
    }
    let prefix = req.dataset_prefix.as_str();
    if prefix.is_empty() || prefix.contains(|c: char| c == '`' || c.is_whitespace()) {
        return Err(SqlError::BadPrefix(prefix.to_string()));
    }

    // Prefix first, so table paths inside the user's SQL are never touched.
    let with_prefix = template(req.kind).replace(
        &format!("`{DEFAULT_DATASET_PREFIX}."),
        &format!("`{prefix}."),
    );
    // Trailing line breaks would otherwise leave a blank line before `),`.
    let subquery = req.user_subquery.trim_end_matches(['\n', '\r']);
    let sql = with_prefix.replacen(SUBQUERY_SLOT, subquery, 1);

    let mut named_params = BTreeMap::new();
    named_params.insert("max_nodes".to_string(), Value::from(req.params.max_nodes));
    named_params.insert(
        "min_edge_weight".to_string(),
        Value::from(req.params.min_edge_weight),
    );
    if req.kind == NetworkKind::Concept {
        named_params.insert(
            "concept_min_relevance".to_string(),
            Value::from(req.params.concept_min_relevance),
        );
    }
    Ok(RenderedSql { sql, named_params })
}
