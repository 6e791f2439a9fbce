//! Publication and organisation records loaded from exported files.
//!
//! Input records use the field names of the publications/grid tables
//! (`id`, `research_orgs`, `concepts`, `date_inserted`, ...) so that a
//! table export loads without reshaping. Malformed records are skipped and
//! counted; only structural problems (unreadable files, duplicate ids, an
//! empty result) abort an ingest.

use std::borrow::Borrow;
use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use thiserror::Error;

/// At most this many skipped records are itemised in an [`IngestReport`].
pub const MAX_REPORTED_SKIPS: usize = 100;

/// Organisation identifier (GRID-style, e.g. `grid.38142.3c`).
///
/// Ids are shared between the organisation table and every publication that
/// lists them, so the string is reference counted rather than copied.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OrgId(Arc<str>);

impl OrgId {
    pub fn new(id: impl Into<Arc<str>>) -> Self {
        OrgId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for OrgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(&*self.0, f)
    }
}

impl fmt::Display for OrgId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl Borrow<str> for OrgId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl From<&str> for OrgId {
    fn from(s: &str) -> Self {
        OrgId::new(s)
    }
}

impl Serialize for OrgId {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for OrgId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        Ok(OrgId::new(s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DocType {
    Article,
    Preprint,
    Other,
}

impl DocType {
    pub const ALL: [DocType; 3] = [DocType::Article, DocType::Preprint, DocType::Other];

    /// Maps an exported type string; anything that is not an article or a
    /// preprint is `Other`.
    pub fn from_export(s: &str) -> DocType {
        match s.trim().to_ascii_lowercase().as_str() {
            "article" => DocType::Article,
            "preprint" => DocType::Preprint,
            _ => DocType::Other,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DocType::Article => "article",
            DocType::Preprint => "preprint",
            DocType::Other => "other",
        }
    }
}

/// A publication-level keyword with its relevance score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptMention {
    pub concept: String,
    pub relevance: f64,
}

impl ConceptMention {
    /// Normalises the concept text (trimmed, lowercase) and checks the
    /// relevance range.
    pub fn new(concept: &str, relevance: f64) -> Result<Self, String> {
        let concept = normalize_concept(concept);
        if concept.is_empty() {
            return Err("concept text is empty".into());
        }
        if !(0.0..=1.0).contains(&relevance) {
            return Err(format!("relevance {relevance} outside [0, 1]"));
        }
        Ok(ConceptMention { concept, relevance })
    }
}

pub fn normalize_concept(s: &str) -> String {
    s.trim().to_lowercase()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Publication {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub year: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date_inserted: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub journal_title: Option<String>,
    /// As exported; may contain duplicates.
    #[serde(default)]
    pub research_orgs: Vec<OrgId>,
    #[serde(default)]
    pub concepts: Vec<ConceptMention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doc_type: Option<DocType>,
}

impl Publication {
    /// A publication with only an id and organisation list set.
    pub fn with_orgs<I, S>(id: &str, orgs: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        Publication {
            id: id.to_string(),
            title: None,
            year: None,
            date_inserted: None,
            journal_title: None,
            research_orgs: orgs.into_iter().map(|o| OrgId::new(o.as_ref())).collect(),
            concepts: Vec::new(),
            doc_type: None,
        }
    }

    fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("publication id is empty".into());
        }
        for c in &self.concepts {
            if c.concept.trim().is_empty() {
                return Err("concept text is empty".into());
            }
            if !(0.0..=1.0).contains(&c.relevance) {
                return Err(format!(
                    "concept `{}` relevance {} outside [0, 1]",
                    c.concept, c.relevance
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Organisation {
    pub id: OrgId,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub country_code: Option<String>,
}

impl Organisation {
    pub fn new(id: &str, name: &str) -> Self {
        Organisation {
            id: OrgId::new(id),
            name: name.to_string(),
            country_code: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub sources: Vec<PathBuf>,
    pub ingested_at: DateTime<Utc>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("cannot infer input format of {} (expected .jsonl, .ndjson, .json or .csv)", path.display())]
    UnknownFormat { path: PathBuf },
    #[error("{}: {message}", path.display())]
    Structure { path: PathBuf, message: String },
    #[error("duplicate publication id `{id}`")]
    DuplicatePublication { id: String },
    #[error("duplicate organisation id `{id}`")]
    DuplicateOrganisation { id: String },
    #[error("invalid record `{id}`: {message}")]
    InvalidRecord { id: String, message: String },
    #[error("empty corpus: no valid publication records")]
    Empty,
}

/// An immutable, validated set of publications and organisations.
#[derive(Debug, Clone)]
pub struct Corpus {
    publications: BTreeMap<String, Publication>,
    organisations: BTreeMap<OrgId, Organisation>,
    unresolved_orgs: BTreeSet<OrgId>,
    provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus from already-parsed records, enforcing the id and
    /// relevance invariants.
    pub fn from_records(
        publications: impl IntoIterator<Item = Publication>,
        organisations: impl IntoIterator<Item = Organisation>,
    ) -> Result<Corpus, CorpusError> {
        let mut pubs = BTreeMap::new();
        for p in publications {
            p.validate().map_err(|message| CorpusError::InvalidRecord {
                id: p.id.clone(),
                message,
            })?;
            if pubs.contains_key(&p.id) {
                return Err(CorpusError::DuplicatePublication { id: p.id });
            }
            pubs.insert(p.id.clone(), p);
        }
        let mut orgs = BTreeMap::new();
        for o in organisations {
            if o.id.as_str().trim().is_empty() || o.name.trim().is_empty() {
                return Err(CorpusError::InvalidRecord {
                    id: o.id.to_string(),
                    message: "organisation id and name must be non-empty".into(),
                });
            }
            if orgs.contains_key(&o.id) {
                return Err(CorpusError::DuplicateOrganisation {
                    id: o.id.to_string(),
                });
            }
            orgs.insert(o.id.clone(), o);
        }
        let mut corpus = Corpus {
            publications: pubs,
            organisations: orgs,
            unresolved_orgs: BTreeSet::new(),
            provenance: Provenance {
                sources: Vec::new(),
                ingested_at: Utc::now(),
            },
        };
        corpus.resolve();
        Ok(corpus)
    }

    fn resolve(&mut self) {
        let orgs = &self.organisations;
        self.unresolved_orgs = self
            .publications
            .values()
            .flat_map(|p| p.research_orgs.iter())
            .filter(|id| !orgs.contains_key(*id))
            .cloned()
            .collect();
    }

    pub fn publications(&self) -> &BTreeMap<String, Publication> {
        &self.publications
    }

    pub fn publication(&self, id: &str) -> Option<&Publication> {
        self.publications.get(id)
    }

    pub fn organisations(&self) -> &BTreeMap<OrgId, Organisation> {
        &self.organisations
    }

    pub fn organisation(&self, id: &str) -> Option<&Organisation> {
        self.organisations.get(id)
    }

    /// Org ids referenced by publications but missing from the organisation
    /// table. They stay on the publications and are dropped at build time.
    pub fn unresolved_orgs(&self) -> &BTreeSet<OrgId> {
        &self.unresolved_orgs
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.publications.len()
    }

    pub fn is_empty(&self) -> bool {
        self.publications.is_empty()
    }

    /// Combines two corpora with disjoint id sets.
    pub fn merge(mut self, other: Corpus) -> Result<Corpus, CorpusError> {
        for (id, p) in other.publications {
            if self.publications.contains_key(&id) {
                return Err(CorpusError::DuplicatePublication { id });
            }
            self.publications.insert(id, p);
        }
        for (id, o) in other.organisations {
            if self.organisations.contains_key(&id) {
                return Err(CorpusError::DuplicateOrganisation { id: id.to_string() });
            }
            self.organisations.insert(id, o);
        }
        self.provenance.sources.extend(other.provenance.sources);
        self.resolve();
        Ok(self)
    }

    /// Deterministic JSON rendering of the corpus contents (provenance
    /// excluded), used to compare corpora byte for byte.
    pub fn canonical_json(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            publications: Vec<&'a Publication>,
            organisations: Vec<&'a Organisation>,
            unresolved_orgs: &'a BTreeSet<OrgId>,
        }
        let c = Canonical {
            publications: self.publications.values().collect(),
            organisations: self.organisations.values().collect(),
            unresolved_orgs: &self.unresolved_orgs,
        };
        serde_json::to_string(&c).expect("corpus serialization is infallible")
    }
}

/// Per-entity counts for a loaded corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub publications: usize,
    pub organisations: usize,
    pub concepts: usize,
    pub referenced_orgs: usize,
    pub unresolved_orgs: usize,
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Publications   {}", self.publications)?;
        writeln!(f, "Organisations  {}", self.organisations)?;
        writeln!(f, "Concepts       {}", self.concepts)?;
        writeln!(f, "Referenced org ids  {}", self.referenced_orgs)?;
        write!(f, "Unresolved org ids  {}", self.unresolved_orgs)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> StatsReport {
    let mut concepts = HashSet::new();
    let mut referenced = HashSet::new();
    for p in corpus.publications.values() {
        concepts.extend(p.concepts.iter().map(|c| c.concept.as_str()));
        referenced.extend(p.research_orgs.iter().map(OrgId::as_str));
    }
    StatsReport {
        publications: corpus.publications.len(),
        organisations: corpus.organisations.len(),
        concepts: concepts.len(),
        referenced_orgs: referenced.len(),
        unresolved_orgs: corpus.unresolved_orgs.len(),
    }
}

// ---------------------------------------------------------------------------
// Ingest

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Jsonl,
    Csv,
}

impl InputFormat {
    pub fn infer(path: &Path) -> Option<InputFormat> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "jsonl" | "ndjson" | "json" => Some(InputFormat::Jsonl),
            "csv" => Some(InputFormat::Csv),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub source: PathBuf,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FileReport {
    pub path: PathBuf,
    pub format: InputFormat,
    pub rows: u64,
    pub publications: u64,
    pub organisations: u64,
    pub skipped: u64,
}

/// Outcome of an ingest: what was loaded, what was skipped and why.
#[derive(Debug, Clone, Serialize)]
pub struct IngestReport {
    pub files: Vec<FileReport>,
    pub total_rows: u64,
    pub publications: u64,
    pub organisations: u64,
    pub skipped: u64,
    /// The first [`MAX_REPORTED_SKIPS`] skipped records.
    pub skipped_records: Vec<SkippedRecord>,
    pub unresolved_orgs: usize,
}

impl fmt::Display for IngestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "ingested {} file(s): {} rows, {} publications, {} organisations, {} skipped, {} unresolved org ids",
            self.files.len(),
            self.total_rows,
            self.publications,
            self.organisations,
            self.skipped,
            self.unresolved_orgs
        )?;
        for s in &self.skipped_records {
            writeln!(
                f,
                "  skipped {}:{}: {}",
                s.source.display(),
                s.line,
                s.reason
            )?;
        }
        if self.skipped as usize > self.skipped_records.len() {
            writeln!(
                f,
                "  ... {} more skipped records not listed",
                self.skipped as usize - self.skipped_records.len()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Ingested {
    pub corpus: Corpus,
    pub report: IngestReport,
}

enum Record {
    Publication(Publication),
    Organisation(Organisation),
}

struct FileBatch {
    report: FileReport,
    records: Vec<(u64, Record)>,
    skips: Vec<SkippedRecord>,
}

/// Loads publication and organisation records from `paths`.
///
/// `format` applies to every file; when `None` it is inferred per file from
/// the extension. Files are parsed in parallel and merged in the order given.
pub fn ingest<P: AsRef<Path> + Sync>(
    paths: &[P],
    format: Option<InputFormat>,
) -> Result<Ingested, CorpusError> {
    let batches = paths
        .par_iter()
        .map(|p| {
            let path = p.as_ref();
            let fmt = match format {
                Some(f) => f,
                None => InputFormat::infer(path).ok_or_else(|| CorpusError::UnknownFormat {
                    path: path.to_path_buf(),
                })?,
            };
            read_file(path, fmt)
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut publications: BTreeMap<String, Publication> = BTreeMap::new();
    let mut organisations: BTreeMap<OrgId, Organisation> = BTreeMap::new();
    let mut files = Vec::with_capacity(batches.len());
    let mut skipped_records = Vec::new();
    let (mut rows, mut skipped) = (0, 0);
    for batch in batches {
        for (_, record) in batch.records {
            match record {
                Record::Publication(p) => {
                    if publications.contains_key(&p.id) {
                        return Err(CorpusError::DuplicatePublication { id: p.id });
                    }
                    publications.insert(p.id.clone(), p);
                }
                Record::Organisation(o) => {
                    if organisations.contains_key(&o.id) {
                        return Err(CorpusError::DuplicateOrganisation {
                            id: o.id.to_string(),
                        });
                    }
                    organisations.insert(o.id.clone(), o);
                }
            }
        }
        rows += batch.report.rows;
        skipped += batch.report.skipped;
        let room = MAX_REPORTED_SKIPS.saturating_sub(skipped_records.len());
        skipped_records.extend(batch.skips.into_iter().take(room));
        files.push(batch.report);
    }
    if publications.is_empty() {
        return Err(CorpusError::Empty);
    }

    let mut corpus = Corpus {
        publications,
        organisations,
        unresolved_orgs: BTreeSet::new(),
        provenance: Provenance {
            sources: paths.iter().map(|p| p.as_ref().to_path_buf()).collect(),
            ingested_at: Utc::now(),
        },
    };
    corpus.resolve();
    let report = IngestReport {
        total_rows: rows,
        publications: corpus.publications.len() as u64,
        organisations: corpus.organisations.len() as u64,
        skipped,
        skipped_records,
        unresolved_orgs: corpus.unresolved_orgs.len(),
        files,
    };
    Ok(Ingested { corpus, report })
}

fn read_file(path: &Path, format: InputFormat) -> Result<FileBatch, CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut batch = FileBatch {
        report: FileReport {
            path: path.to_path_buf(),
            format,
            rows: 0,
            publications: 0,
            organisations: 0,
            skipped: 0,
        },
        records: Vec::new(),
        skips: Vec::new(),
    };
    let accept = |batch: &mut FileBatch, line: u64, parsed: Result<Record, String>| {
        batch.report.rows += 1;
        match parsed {
            Ok(r) => {
                match r {
                    Record::Publication(_) => batch.report.publications += 1,
                    Record::Organisation(_) => batch.report.organisations += 1,
                }
                batch.records.push((line, r));
            }
            Err(reason) => {
                batch.report.skipped += 1;
                if batch.skips.len() < MAX_REPORTED_SKIPS {
                    batch.skips.push(SkippedRecord {
                        source: path.to_path_buf(),
                        line,
                        reason,
                    });
                }
            }
        }
    };

    match format {
        InputFormat::Jsonl => {
            let reader = BufReader::new(file);
            for (idx, line) in reader.lines().enumerate() {
                let line = line.map_err(io_err)?;
                let trimmed = line.trim();
                if trimmed.is_empty() {
                    continue;
                }
                let parsed = serde_json::from_str::<Value>(trimmed)
                    .map_err(|e| format!("invalid JSON: {e}"))
                    .and_then(record_from_value);
                accept(&mut batch, idx as u64 + 1, parsed);
            }
        }
        InputFormat::Csv => {
            let mut reader = csv::ReaderBuilder::new()
                .flexible(true)
                .from_reader(BufReader::new(file));
            let headers = reader
                .headers()
                .map_err(|e| CorpusError::Structure {
                    path: path.to_path_buf(),
                    message: format!("unreadable CSV header: {e}"),
                })?
                .clone();
            if !headers.iter().any(|h| h.trim() == "id") {
                return Err(CorpusError::Structure {
                    path: path.to_path_buf(),
                    message: "CSV header has no `id` column".into(),
                });
            }
            for (idx, row) in reader.records().enumerate() {
                // header is line 1
                let line = idx as u64 + 2;
                let parsed = match row {
                    Ok(row) => csv_row_to_value(&headers, &row).and_then(record_from_value),
                    Err(e) => Err(format!("malformed CSV row: {e}")),
                };
                accept(&mut batch, line, parsed);
            }
        }
    }
    Ok(batch)
}

const PUBLICATION_FIELDS: &[&str] = &[
    "research_orgs",
    "concepts",
    "title",
    "year",
    "date_inserted",
    "journal_title",
    "journal",
    "doc_type",
];

fn record_from_value(value: Value) -> Result<Record, String> {
    let Value::Object(obj) = value else {
        return Err("record is not a JSON object".into());
    };
    let kind = match obj.get("record_type") {
        Some(Value::String(k)) => match k.to_ascii_lowercase().as_str() {
            "publication" => false,
            "organisation" | "organization" => true,
            other => return Err(format!("unknown record_type `{other}`")),
        },
        Some(_) => return Err("record_type must be a string".into()),
        None => {
            obj.contains_key("name") && !PUBLICATION_FIELDS.iter().any(|f| obj.contains_key(*f))
        }
    };
    if kind {
        organisation_from_object(obj).map(Record::Organisation)
    } else {
        publication_from_object(obj).map(Record::Publication)
    }
}

fn required_str(obj: &Map<String, Value>, field: &str) -> Result<String, String> {
    match obj.get(field) {
        Some(Value::String(s)) if !s.trim().is_empty() => Ok(s.trim().to_string()),
        Some(Value::String(_)) => Err(format!("field `{field}` is empty")),
        Some(Value::Number(n)) if field == "id" => Ok(n.to_string()),
        Some(_) => Err(format!("field `{field}` must be a string")),
        None => Err(format!("missing required field `{field}`")),
    }
}

fn optional_str(obj: &Map<String, Value>, field: &str) -> Result<Option<String>, String> {
    match obj.get(field) {
        None | Some(Value::Null) => Ok(None),
        Some(Value::String(s)) if s.trim().is_empty() => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(format!("field `{field}` must be a string")),
    }
}

fn organisation_from_object(obj: Map<String, Value>) -> Result<Organisation, String> {
    let id = required_str(&obj, "id")?;
    let name = required_str(&obj, "name")?;
    let mut country = optional_str(&obj, "country_code")?;
    if country.is_none() {
        if let Some(Value::Object(addr)) = obj.get("address") {
            country = optional_str(addr, "country_code")?;
        }
    }
    let country_code = match country {
        Some(c) => {
            let c = c.trim().to_ascii_uppercase();
            if c.len() != 2 || !c.bytes().all(|b| b.is_ascii_alphabetic()) {
                return Err(format!("country_code `{c}` is not a 2-letter code"));
            }
            Some(c)
        }
        None => None,
    };
    Ok(Organisation {
        id: OrgId::new(id),
        name,
        country_code,
    })
}

fn publication_from_object(obj: Map<String, Value>) -> Result<Publication, String> {
    let id = required_str(&obj, "id")?;
    let title = optional_str(&obj, "title")?;
    let year = match obj.get("year") {
        None | Some(Value::Null) => None,
        Some(Value::Number(n)) => Some(
            n.as_i64()
                .and_then(|y| i32::try_from(y).ok())
                .ok_or_else(|| format!("year {n} is not an integer"))?,
        ),
        Some(_) => return Err("field `year` must be an integer".into()),
    };
    let date_inserted = optional_str(&obj, "date_inserted")?
        .map(|s| parse_export_date(&s).ok_or_else(|| format!("unparseable date_inserted `{s}`")))
        .transpose()?;
    let mut journal_title = optional_str(&obj, "journal_title")?;
    if journal_title.is_none() {
        if let Some(Value::Object(j)) = obj.get("journal") {
            journal_title = optional_str(j, "title")?;
        }
    }
    let research_orgs = match obj.get("research_orgs") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(|v| match v {
                Value::String(s) if !s.trim().is_empty() => Ok(OrgId::new(s.trim())),
                _ => Err("research_orgs entries must be non-empty strings".to_string()),
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("field `research_orgs` must be a list".into()),
    };
    let concepts = match obj.get("concepts") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Array(items)) => items
            .iter()
            .map(concept_from_value)
            .collect::<Result<_, _>>()?,
        Some(_) => return Err("field `concepts` must be a list".into()),
    };
    let doc_type = match optional_str(&obj, "doc_type")? {
        Some(t) => Some(DocType::from_export(&t)),
        None => optional_str(&obj, "type")?.map(|t| DocType::from_export(&t)),
    };
    Ok(Publication {
        id,
        title,
        year,
        date_inserted,
        journal_title,
        research_orgs,
        concepts,
        doc_type,
    })
}

fn concept_from_value(v: &Value) -> Result<ConceptMention, String> {
    let Value::Object(o) = v else {
        return Err("concepts entries must be {concept, relevance} objects".into());
    };
    let concept = match o.get("concept") {
        Some(Value::String(s)) => s,
        _ => return Err("concept entry has no `concept` string".into()),
    };
    let relevance = match o.get("relevance") {
        Some(Value::Number(n)) => n.as_f64().unwrap_or(f64::NAN),
        _ => return Err(format!("concept `{concept}` has no numeric relevance")),
    };
    ConceptMention::new(concept, relevance)
}

/// Accepts `YYYY-MM-DD`, RFC 3339, and the `YYYY-MM-DD HH:MM:SS[.f] UTC`
/// timestamp style of table exports. Only the calendar date is kept.
pub fn parse_export_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    if let Ok(d) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        return Some(d);
    }
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc).date_naive());
    }
    let naive = s.strip_suffix(" UTC").unwrap_or(s);
    ["%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M:%S%.f"]
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(naive, f).ok())
        .map(|dt| dt.date())
}

/// Converts a CSV row into the JSON record shape. List-valued columns are
/// `;`-delimited; concepts are written `concept:relevance`.
fn csv_row_to_value(headers: &csv::StringRecord, row: &csv::StringRecord) -> Result<Value, String> {
    let mut obj = Map::new();
    for (h, v) in headers.iter().zip(row.iter()) {
        let h = h.trim();
        let v = v.trim();
        if v.is_empty() {
            continue;
        }
        let value = match h {
            "research_orgs" => Value::Array(
                split_list(v)
                    .map(|s| Value::String(s.to_string()))
                    .collect(),
            ),
            "concepts" => Value::Array(
                split_list(v)
                    .map(|item| {
                        let (c, r) = item.rsplit_once(':').ok_or_else(|| {
                            format!("concept `{item}` is not `concept:relevance`")
                        })?;
                        let r: f64 = r
                            .trim()
                            .parse()
                            .map_err(|_| format!("concept `{item}` has a non-numeric relevance"))?;
                        Ok(serde_json::json!({ "concept": c, "relevance": r }))
                    })
                    .collect::<Result<_, String>>()?,
            ),
            "year" => match v.parse::<i64>() {
                Ok(y) => Value::from(y),
                Err(_) => return Err(format!("year `{v}` is not an integer")),
            },
            _ => Value::String(v.to_string()),
        };
        obj.insert(h.to_string(), value);
    }
    Ok(Value::Object(obj))
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(';').map(str::trim).filter(|s| !s.is_empty())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let path = dir.join(name);
        let mut f = File::create(&path).unwrap();
        f.write_all(body.as_bytes()).unwrap();
        path
    }

    const THREE_PUBS: &str = r#"{"id":"p1","research_orgs":["grid.1","grid.2"],"concepts":[{"concept":"Virus","relevance":0.9}],"year":2021}
{"id":"p2","research_orgs":["grid.1"],"date_inserted":"2022-04-15 10:11:12 UTC"}
{"id":"p3","research_orgs":[],"journal":{"title":"Nature"},"type":"preprint"}
{"id":"grid.1","name":"Org One","country_code":"gb"}
{"id":"grid.2","name":"Org Two"}
"#;

    #[test]
    fn ingests_three_publications_and_two_orgs() {
        let dir = tempfile::tempdir().unwrap();
        let path = write(dir.path(), "c.jsonl", THREE_PUBS);
        let out = ingest(&[path], None).unwrap();
        assert_eq!(out.corpus.len(), 3);
        assert_eq!(out.corpus.organisations().len(), 2);
        assert_eq!(out.report.skipped, 0);
        assert_eq!(out.report.total_rows, 5);

        let p1 = out.corpus.publication("p1").unwrap();
        assert_eq!(p1.concepts[0].concept, "virus");
        let p2 = out.corpus.publication("p2").unwrap();
        assert_eq!(p2.date_inserted, NaiveDate::from_ymd_opt(2022, 4, 15));
        let p3 = out.corpus.publication("p3").unwrap();
        assert_eq!(p3.journal_title.as_deref(), Some("Nature"));
        assert_eq!(p3.doc_type, Some(DocType::Preprint));
        assert_eq!(
            out.corpus
                .organisation("grid.1")
                .unwrap()
                .country_code
                .as_deref(),
            Some("GB")
        );

        let stats = corpus_stats(&out.corpus);
        assert_eq!(stats.publications, 3);
        assert_eq!(stats.organisations, 2);
        assert_eq!(stats.concepts, 1);
    }

    #[test]
    fn out_of_range_relevance_skips_record() {
        let dir = tempfile::tempdir().unwrap();
        let body = format!(
            "{THREE_PUBS}{}\n",
            r#"{"id":"p4","concepts":[{"concept":"x","relevance":1.7}]}"#
        );
        let path = write(dir.path(), "c.jsonl", &body);
        let out = ingest(&[path], None).unwrap();
        assert_eq!(out.report.skipped, 1);
        assert_eq!(out.corpus.len(), 3);
        assert_eq!(out.report.skipped_records[0].line, 6);
        assert!(out.report.skipped_records[0].reason.contains("1.7"));
        assert_eq!(
            out.report.total_rows,
            out.report.publications + out.report.organisations + out.report.skipped
        );
    }

    #[test]
    fn duplicate_id_across_files_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let a = write(dir.path(), "a.jsonl", r#"{"id":"p1"}"#);
        let b = write(dir.path(), "b.jsonl", "{\"id\":\"p2\"}\n{\"id\":\"p1\"}\n");
        let err = ingest(&[a, b], None).unwrap_err();
        assert!(matches!(&err, CorpusError::DuplicatePublication { id } if id == "p1"));
        assert!(err.to_string().contains("p1"));
    }

    #[test]
    fn empty_and_missing_inputs_are_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let only_bad = write(dir.path(), "bad.jsonl", "not json\n{\"title\":\"no id\"}\n");
        assert!(matches!(ingest(&[only_bad], None), Err(CorpusError::Empty)));
        let missing = dir.path().join("nope.jsonl");
        assert!(matches!(
            ingest(&[missing], None),
            Err(CorpusError::Io { .. })
        ));
        let odd = write(dir.path(), "x.parquet", "");
        assert!(matches!(
            ingest(&[odd], None),
            Err(CorpusError::UnknownFormat { .. })
        ));
    }

    #[test]
    fn csv_lists_and_concepts() {
        let dir = tempfile::tempdir().unwrap();
        let pubs = write(
            dir.path(),
            "pubs.csv",
            "id,year,research_orgs,concepts,date_inserted\n\
             p1,2020,grid.1;grid.2,covid-19:0.8;sars: cov:0.4,2022-01-02\n\
             p2,twenty,grid.1,,\n\
             p3,2021,,,\n",
        );
        let orgs = write(
            dir.path(),
            "grid.csv",
            "id,name,country_code\ngrid.1,Org One,US\n",
        );
        let out = ingest(&[pubs, orgs], None).unwrap();
        assert_eq!(out.corpus.len(), 2);
        assert_eq!(out.report.skipped, 1);
        let p1 = out.corpus.publication("p1").unwrap();
        assert_eq!(
            p1.research_orgs,
            vec![OrgId::from("grid.1"), OrgId::from("grid.2")]
        );
        assert_eq!(p1.concepts[1].concept, "sars: cov");
        assert_eq!(p1.concepts[1].relevance, 0.4);
        assert_eq!(out.corpus.unresolved_orgs().len(), 1);
    }

    #[test]
    fn csv_without_id_column_is_structural() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "x.csv", "name,year\nfoo,2020\n");
        assert!(matches!(
            ingest(&[p], None),
            Err(CorpusError::Structure { .. })
        ));
    }

    #[test]
    fn unresolved_orgs_are_recorded_not_dropped() {
        let c = Corpus::from_records(
            [Publication::with_orgs("p1", ["A", "Z", "A"])],
            [Organisation::new("A", "Alpha")],
        )
        .unwrap();
        assert_eq!(
            c.unresolved_orgs()
                .iter()
                .map(OrgId::as_str)
                .collect::<Vec<_>>(),
            ["Z"]
        );
        assert_eq!(c.publication("p1").unwrap().research_orgs.len(), 3);
    }

    #[test]
    fn export_date_styles() {
        let d = NaiveDate::from_ymd_opt(2022, 4, 15);
        assert_eq!(parse_export_date("2022-04-15"), d);
        assert_eq!(parse_export_date("2022-04-15T23:10:00Z"), d);
        assert_eq!(parse_export_date("2022-04-15 23:10:00.123 UTC"), d);
        assert_eq!(parse_export_date("2022-04-15T01:00:00"), d);
        assert_eq!(parse_export_date("15/04/2022"), None);
    }
}
