//! End-to-end batch run: ingest, evaluate every query in a folder, build each
//! requested network kind per query, and write the bundle.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDate, Utc};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use dimnet_core::corpus::{ingest, CorpusError, IngestReport, InputFormat};
use dimnet_core::netbuild::{build_network, NetworkKind, NetworkParams, ParamsError};
use dimnet_core::subsetql::{eval_query, load_query_folder, QueryFolderError};
use dimnet_core::vosexport::{canonical_json, to_vos_json, write_bundle, BundleError, VosDocument};

pub const REPORT_FILE: &str = "run_report.json";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub corpus_paths: Vec<PathBuf>,
    /// Applies to every corpus file; inferred from extensions when `None`.
    pub corpus_format: Option<InputFormat>,
    pub query_dir: PathBuf,
    pub out_dir: PathBuf,
    pub kinds: Vec<NetworkKind>,
    pub params: NetworkParams,
    /// Date `last_days` windows are measured from; defaults to the current
    /// UTC date.
    pub today: Option<NaiveDate>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), RunError> {
        if self.corpus_paths.is_empty() {
            return Err(RunError::Config("no corpus files given".into()));
        }
        if let Some(missing) = self.corpus_paths.iter().find(|p| !p.is_file()) {
            return Err(RunError::Config(format!(
                "corpus file {} does not exist",
                missing.display()
            )));
        }
        if !self.query_dir.is_dir() {
            return Err(RunError::Config(format!(
                "query folder {} does not exist",
                self.query_dir.display()
            )));
        }
        if self.kinds.is_empty() {
            return Err(RunError::Config("no network kinds requested".into()));
        }
        self.params.validate()?;
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid parameters: {0}")]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Queries(#[from] QueryFolderError),
    #[error(transparent)]
    Bundle(#[from] BundleError),
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Serialize)]
pub struct SkippedQuery {
    pub name: String,
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkRow {
    pub query: String,
    pub kind: NetworkKind,
    pub subset_size: usize,
    pub nodes: usize,
    pub edges: usize,
    pub file: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub generated_at: DateTime<Utc>,
    pub today: NaiveDate,
    pub params: NetworkParams,
    pub kinds: Vec<NetworkKind>,
    pub ingest: IngestReport,
    pub queries_loaded: usize,
    pub processed: usize,
    pub skipped: Vec<SkippedQuery>,
    pub networks: Vec<NetworkRow>,
    pub out_dir: PathBuf,
}

impl RunReport {
    /// 0 when at least one network was produced, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.networks.is_empty() {
            2
        } else {
            0
        }
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.ingest)?;
        writeln!(
            f,
            "queries: {} loaded, {} processed, {} skipped (today = {})",
            self.queries_loaded,
            self.processed,
            self.skipped.len(),
            self.today
        )?;
        for s in &self.skipped {
            writeln!(f, "  skipped {}: {}", s.name, s.reason)?;
        }
        for n in &self.networks {
            write!(
                f,
                "  {:<24} {:<8} {:>7} pubs {:>5} nodes {:>7} edges  {}",
                n.query,
                n.kind.as_str(),
                n.subset_size,
                n.nodes,
                n.edges,
                n.file
            )?;
            if let Some(flag) = &n.flag {
                write!(f, "  [{flag}]")?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{} network(s) written to {}",
            self.networks.len(),
            self.out_dir.display()
        )
    }
}

pub fn run_all(config: &RunConfig) -> Result<RunReport, RunError> {
    config.validate()?;
    let ingested = ingest(&config.corpus_paths, config.corpus_format)?;
    let corpus = &ingested.corpus;
    let folder = load_query_folder(&config.query_dir)?;
    let today = config.today.unwrap_or_else(|| Utc::now().date_naive());

    let per_query: Vec<Vec<VosDocument>> = folder
        .queries
        .par_iter()
        .map(|q| {
            let subset = eval_query(q, corpus, today);
            config
                .kinds
                .iter()
                .map(|&kind| to_vos_json(&build_network(corpus, &subset, kind, &config.params)))
                .collect()
        })
        .collect();
    let documents: Vec<VosDocument> = per_query.into_iter().flatten().collect();
    let manifest = write_bundle(&documents, &config.out_dir)?;

    let networks = manifest
        .networks
        .iter()
        .map(|e| NetworkRow {
            query: e.query_name.clone(),
            kind: e.kind,
            subset_size: e.subset_size,
            nodes: e.items,
            edges: e.links,
            file: e.file.clone(),
            flag: (e.subset_size == 0).then(|| "empty subset".to_string()),
        })
        .collect();
    let skipped: Vec<SkippedQuery> = folder
        .failures
        .iter()
        .map(|f| SkippedQuery {
            name: f.name.clone(),
            path: f.path.clone(),
            reason: f.error.clone(),
        })
        .collect();

    let report = RunReport {
        generated_at: Utc::now(),
        today,
        params: config.params,
        kinds: config.kinds.clone(),
        ingest: ingested.report,
        queries_loaded: folder.queries.len() + skipped.len(),
        processed: folder.queries.len(),
        skipped,
        networks,
        out_dir: config.out_dir.clone(),
    };
    write_report(&report, &config.out_dir)?;
    Ok(report)
}

fn write_report(report: &RunReport, out_dir: &Path) -> Result<(), RunError> {
    let path = out_dir.join(REPORT_FILE);
    fs::write(&path, canonical_json(report)).map_err(|source| RunError::Io { path, source })
}
