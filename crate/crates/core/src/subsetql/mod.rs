//! Subset queries: a small predicate language selecting publication ids.
//!
//! A query file holds one expression, e.g.
//!
//! ```text
//! # documents added in the last 30 days
//! last_days(date_inserted, 30)
//! ```
//!
//! Evaluation is pure: the result depends only on the query, the corpus and
//! the `today` date supplied by the caller.

mod ast;
mod parser;

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::corpus::Corpus;

pub use ast::{CmpOp, Expr, Field, FieldType, Literal, TypeError};
pub use parser::{parse_expr, ParseError, ParseErrorKind};

/// File extension of query files in a query folder.
pub const QUERY_EXTENSION: &str = "nql";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetQuery {
    pub name: String,
    pub source_text: String,
    pub ast: Expr,
}

impl SubsetQuery {
    pub fn new(name: impl Into<String>, text: &str) -> Result<Self, ParseError> {
        Ok(SubsetQuery {
            name: name.into(),
            source_text: text.to_string(),
            ast: parse_expr(text)?,
        })
    }
}

/// Parses a standalone query. The query is named `query`; queries loaded
/// from a folder are named after their file stem.
pub fn parse_query(text: &str) -> Result<SubsetQuery, ParseError> {
    SubsetQuery::new("query", text)
}

#[derive(Debug, Clone, Serialize)]
pub struct SubsetResult {
    pub query_name: String,
    pub ids: BTreeSet<String>,
    pub evaluated_at: DateTime<Utc>,
}

impl SubsetResult {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Every publication in the corpus.
    pub fn all(corpus: &Corpus) -> Self {
        SubsetResult {
            query_name: "all".into(),
            ids: corpus.publications().keys().cloned().collect(),
            evaluated_at: Utc::now(),
        }
    }
}

pub fn eval_query(query: &SubsetQuery, corpus: &Corpus, today: NaiveDate) -> SubsetResult {
    SubsetResult {
        query_name: query.name.clone(),
        ids: eval_expr(&query.ast, corpus, today),
        evaluated_at: Utc::now(),
    }
}

pub fn eval_expr(expr: &Expr, corpus: &Corpus, today: NaiveDate) -> BTreeSet<String> {
    let hits: Vec<&String> = corpus
        .publications()
        .par_iter()
        .filter(|(_, p)| expr.matches(p, today))
        .map(|(id, _)| id)
        .collect();
    hits.into_iter().cloned().collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct QueryFailure {
    pub path: PathBuf,
    pub name: String,
    pub error: String,
}

/// Queries loaded from a folder, plus the files that could not be parsed.
#[derive(Debug, Clone)]
pub struct QueryFolder {
    pub queries: Vec<SubsetQuery>,
    pub failures: Vec<QueryFailure>,
}

#[derive(Debug, Error)]
pub enum QueryFolderError {
    #[error("query folder {} does not exist or is not a directory", path.display())]
    Missing { path: PathBuf },
    #[error("cannot list query folder {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no runnable queries in {} ({} file(s) failed to load)", path.display(), failures.len())]
    NoRunnableQueries {
        path: PathBuf,
        failures: Vec<QueryFailure>,
    },
}

/// Loads every `*.nql` file in `dir`, sorted by file name.
pub fn load_query_folder(dir: &Path) -> Result<QueryFolder, QueryFolderError> {
    if !dir.is_dir() {
        return Err(QueryFolderError::Missing {
            path: dir.to_path_buf(),
        });
    }
    let io_err = |source| QueryFolderError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == QUERY_EXTENSION) {
            files.push(path);
        }
    }
    files.sort_by(|a, b| a.file_name().cmp(&b.file_name()));

    let mut queries = Vec::new();
    let mut failures = Vec::new();
    for path in files {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let loaded = fs::read_to_string(&path)
            .map_err(|e| format!("cannot read: {e}"))
            .and_then(|text| SubsetQuery::new(name.clone(), &text).map_err(|e| e.to_string()));
        match loaded {
            Ok(q) => queries.push(q),
            Err(error) => failures.push(QueryFailure { path, name, error }),
        }
    }
    if queries.is_empty() {
        return Err(QueryFolderError::NoRunnableQueries {
            path: dir.to_path_buf(),
            failures,
        });
    }
    Ok(QueryFolder { queries, failures })
}
