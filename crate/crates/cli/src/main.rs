use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dimnet_cli::{run_all, RunConfig, StaticServer};
use dimnet_core::corpus::{corpus_stats, ingest, InputFormat};
use dimnet_core::netbuild::{NetworkKind, NetworkParams};
use dimnet_core::sqlgen::{render_sql, SqlRequest, DEFAULT_DATASET_PREFIX};
use dimnet_core::vosexport::{validate_json, BundleManifest, INDEX_FILE};

/// Build VOSviewer co-authorship and concept networks from Dimensions
/// publication exports.
#[derive(Debug, Parser)]
#[command(name = "dimnet", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Corpus export file (JSONL or CSV); repeat or comma-separate for several.
    #[arg(long, global = true, value_delimiter = ',')]
    corpus: Vec<PathBuf>,
    /// Force the corpus format instead of inferring it from file extensions.
    #[arg(long, global = true)]
    format: Option<Format>,
    /// Folder of `.nql` query files.
    #[arg(long, global = true)]
    queries: Option<PathBuf>,
    /// Bundle output directory.
    #[arg(long, global = true, default_value = "dimnet-bundle")]
    out: PathBuf,
    #[arg(long, global = true, default_value_t = NetworkParams::DEFAULT_MAX_NODES)]
    max_nodes: usize,
    #[arg(long, global = true, default_value_t = NetworkParams::DEFAULT_MIN_EDGE_WEIGHT)]
    min_edge_weight: u32,
    #[arg(long, global = true, default_value_t = NetworkParams::DEFAULT_CONCEPT_MIN_RELEVANCE)]
    concept_min_relevance: f64,
    /// Network kinds to build per query.
    #[arg(
        long,
        global = true,
        value_delimiter = ',',
        default_value = "org,concept"
    )]
    kinds: Vec<NetworkKind>,
    /// Reference date for `last_days(...)` (YYYY-MM-DD); defaults to today in UTC.
    #[arg(long, global = true)]
    today: Option<NaiveDate>,
    /// Port for `serve`.
    #[arg(long, global = true, env = "DIMNET_PORT", default_value_t = 8000)]
    port: u16,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Format {
    Jsonl,
    Csv,
}

impl From<Format> for InputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Jsonl => InputFormat::Jsonl,
            Format::Csv => InputFormat::Csv,
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the corpus and print an ingest report and corpus statistics.
    Ingest,
    /// Run every query and write the network bundle.
    Build,
    /// Print the BigQuery SQL for one subquery.
    Sql {
        #[arg(long, default_value = "org")]
        kind: NetworkKind,
        /// File holding SQL that returns an `id` column.
        #[arg(long)]
        query_file: PathBuf,
        #[arg(long, default_value = DEFAULT_DATASET_PREFIX)]
        dataset_prefix: String,
        /// Write the named parameter values here instead of stderr.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Serve a bundle directory over HTTP on 127.0.0.1.
    Serve {
        /// Bundle directory; defaults to --out.
        dir: Option<PathBuf>,
    },
    /// Check every network file of a bundle against the schema.
    Validate {
        /// Bundle directory; defaults to --out.
        dir: Option<PathBuf>,
    },
}

impl Global {
    fn params(&self) -> Result<NetworkParams> {
        Ok(NetworkParams::new(
            self.max_nodes,
            self.min_edge_weight,
            self.concept_min_relevance,
        )?)
    }

    fn corpus_paths(&self) -> Result<&[PathBuf]> {
        if self.corpus.is_empty() {
            bail!("--corpus is required");
        }
        Ok(&self.corpus)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp_secs()
        .init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cli: Cli) -> Result<u8> {
    let g = &cli.global;
    match &cli.command {
        Command::Ingest => cmd_ingest(g),
        Command::Build => cmd_build(g),
        Command::Sql {
            kind,
            query_file,
            dataset_prefix,
            params_out,
        } => cmd_sql(g, *kind, query_file, dataset_prefix, params_out.as_deref()),
        Command::Serve { dir } => cmd_serve(g, dir.as_deref().unwrap_or(&g.out)),
        Command::Validate { dir } => cmd_validate(dir.as_deref().unwrap_or(&g.out)),
    }
}

fn cmd_ingest(g: &Global) -> Result<u8> {
    let ingested = ingest(g.corpus_paths()?, g.format.map(Into::into))?;
    print!("{}", ingested.report);
    println!("{}", corpus_stats(&ingested.corpus));
    Ok(0)
}

fn cmd_build(g: &Global) -> Result<u8> {
    let Some(query_dir) = &g.queries else {
        bail!("--queries is required");
    };
    let config = RunConfig {
        corpus_paths: g.corpus_paths()?.to_vec(),
        corpus_format: g.format.map(Into::into),
        query_dir: query_dir.clone(),
        out_dir: g.out.clone(),
        kinds: g.kinds.clone(),
        params: g.params()?,
        today: g.today,
    };
    let report = run_all(&config)?;
    println!("{report}");
    if report.exit_code() != 0 {
        eprintln!("error: no networks were produced");
    }
    Ok(report.exit_code())
}

fn cmd_sql(
    g: &Global,
    kind: NetworkKind,
    query_file: &Path,
    prefix: &str,
    params_out: Option<&Path>,
) -> Result<u8> {
    let subquery = fs::read_to_string(query_file)
        .with_context(|| format!("cannot read {}", query_file.display()))?;
    let rendered =
        render_sql(&SqlRequest::new(subquery, kind, g.params()?).dataset_prefix(prefix))?;
    let params = serde_json::to_string_pretty(&rendered.named_params)? + "\n";
    std::io::stdout().write_all(rendered.sql.as_bytes())?;
    match params_out {
        Some(path) => {
            fs::write(path, params).with_context(|| format!("cannot write {}", path.display()))?
        }
        None => eprint!("{params}"),
    }
    Ok(0)
}

fn cmd_serve(g: &Global, dir: &Path) -> Result<u8> {
    let server = StaticServer::bind(dir, ("127.0.0.1", g.port))?;
    println!(
        "serving {} at http://{}/",
        server.root().display(),
        server.local_addr()
    );
    server.run();
    Ok(0)
}

fn cmd_validate(dir: &Path) -> Result<u8> {
    let manifest = BundleManifest::read(dir)
        .with_context(|| format!("cannot read bundle manifest in {}", dir.display()))?;
    let mut bad = 0;
    for entry in &manifest.networks {
        let path = dir.join(&entry.file);
        let outcome = fs::read_to_string(&path)
            .map_err(anyhow::Error::from)
            .and_then(|text| validate_json(&text).map_err(anyhow::Error::from));
        match outcome {
            Ok(doc)
                if doc.network.items.len() == entry.items
                    && doc.network.links.len() == entry.links =>
            {
                println!("ok       {}", entry.file)
            }
            Ok(_) => {
                bad += 1;
                println!("mismatch {}: counts differ from the manifest", entry.file);
            }
            Err(e) => {
                bad += 1;
                println!("invalid  {}: {e:#}", entry.file);
            }
        }
    }
    if !dir.join(INDEX_FILE).is_file() {
        bad += 1;
        println!("missing  {INDEX_FILE}");
    }
    if bad > 0 {
        bail!("{bad} problem(s) in bundle {}", dir.display());
    }
    println!("{} network(s) valid", manifest.networks.len());
    Ok(0)
}
