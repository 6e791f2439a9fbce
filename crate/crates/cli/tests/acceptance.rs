//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`harness = false`) so the report reads top to bottom; the process
//! fails if any criterion fails.

mod common;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader};
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::{Child, Command, Stdio};
use std::time::{Duration, Instant};

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use dimnet_cli::{run_all, RunConfig};
use dimnet_core::corpus::{ingest, Corpus, Publication};
use dimnet_core::netbuild::{
    build_concept_network, build_network, build_org_network, NetworkKind, NetworkParams,
};
use dimnet_core::sqlgen::{render_sql, SqlRequest};
use dimnet_core::subsetql::{eval_expr, eval_query, parse_expr, parse_query, SubsetResult};
use dimnet_core::vosexport::{
    canonical_json, to_vos_json, validate_json, BundleManifest, INDEX_FILE,
};
use dimnet_core::Organisation;
use dimnet_testkit::{
    brute_force_network, random_corpus, random_expr, random_params, zipf_corpus, CorpusShape,
};

use common::{fixture, http_get_with_headers};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

const GOLDEN_SQL: &str =
    include_str!("../../core/tests/fixtures/collaboration_template.golden.sql");
const RECENT_SQL: &str = include_str!("../../core/tests/fixtures/recent_30_days.sql");
const SPLICE: &str = "{user-provided-subquery}";

fn today() -> NaiveDate {
    NaiveDate::from_ymd_opt(2022, 5, 1).unwrap()
}

fn random_subset(rng: &mut impl Rng, corpus: &Corpus) -> SubsetResult {
    let mut s = SubsetResult::all(corpus);
    if rng.random_bool(0.7) {
        let keep = rng.random_range(0.0..=1.0);
        s.ids.retain(|_| rng.random_bool(keep));
    }
    s
}

fn oracle_equivalence() -> Outcome {
    const CORPORA: u64 = 1_000;
    let started = Instant::now();
    let failures: Vec<u64> = (0..CORPORA)
        .into_par_iter()
        .filter(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = random_corpus(&mut rng, CorpusShape::default());
            let subset = random_subset(&mut rng, &corpus);
            let params = random_params(&mut rng);
            build_org_network(&corpus, &subset, &params)
                != brute_force_network(&corpus, &subset, NetworkKind::Organisation, &params)
                || build_concept_network(&corpus, &subset, &params)
                    != brute_force_network(&corpus, &subset, NetworkKind::Concept, &params)
        })
        .collect();
    let elapsed = started.elapsed();
    ensure!(
        failures.is_empty(),
        "{} mismatching corpora, first seeds {:?}",
        failures.len(),
        &failures[..failures.len().min(5)]
    );
    ensure!(
        elapsed < Duration::from_secs(60),
        "took {elapsed:.1?}, limit 60 s"
    );
    Ok(format!(
        "{CORPORA} corpora x 2 kinds identical to brute force in {elapsed:.1?}"
    ))
}

fn template_fidelity() -> Outcome {
    let at = GOLDEN_SQL
        .find(SPLICE)
        .ok_or("golden file lacks the splice site")?;
    let (head, tail) = (&GOLDEN_SQL[..at], &GOLDEN_SQL[at + SPLICE.len()..]);
    let params = NetworkParams::default();
    let out = render_sql(&SqlRequest::new(
        RECENT_SQL,
        NetworkKind::Organisation,
        params,
    ))
    .map_err(|e| e.to_string())?;
    ensure!(out.sql.starts_with(head), "text before the splice differs");
    ensure!(out.sql.ends_with(tail), "text after the splice differs");
    ensure!(
        &out.sql[head.len()..out.sql.len() - tail.len()] == RECENT_SQL.trim_end_matches('\n'),
        "subquery not spliced verbatim"
    );
    for line in [
        "AND org1_id > org2_id -- to prevent dupes",
        "WHERE collabs >= @min_edge_weight",
    ] {
        ensure!(
            out.sql.lines().any(|l| l.trim() == line),
            "missing line `{line}`"
        );
    }
    let moved = render_sql(
        &SqlRequest::new(RECENT_SQL, NetworkKind::Organisation, params).dataset_prefix("proj.ds"),
    )
    .map_err(|e| e.to_string())?;
    let relocate = |s: &str| s.replace("`covid-19-dimensions-ai.data.", "`proj.ds.");
    ensure!(
        moved.sql.starts_with(&relocate(head)) && moved.sql.ends_with(&relocate(tail)),
        "dataset prefix changed more than table paths"
    );
    Ok(format!(
        "{} template bytes identical outside the splice",
        head.len() + tail.len()
    ))
}

fn worked_pair_example() -> Outcome {
    let corpus = Corpus::from_records(
        [
            Publication::with_orgs("p1", ["A", "B", "C"]),
            Publication::with_orgs("p2", ["A", "B"]),
            Publication::with_orgs("p3", ["A"]),
        ],
        ["A", "B", "C"].map(|id| Organisation::new(id, &format!("Org {id}"))),
    )
    .map_err(|e| e.to_string())?;
    let all = SubsetResult::all(&corpus);
    let edges = |min_edge_weight| -> BTreeSet<(String, String, u32)> {
        let params = NetworkParams::new(500, min_edge_weight, 0.5).unwrap();
        build_org_network(&corpus, &all, &params)
            .edges
            .into_iter()
            .map(|e| (e.a, e.b, e.weight))
            .collect()
    };
    let expect = |pairs: &[(&str, &str, u32)]| -> BTreeSet<(String, String, u32)> {
        pairs
            .iter()
            .map(|&(a, b, w)| (a.to_string(), b.to_string(), w))
            .collect()
    };
    let at1 = edges(1);
    ensure!(
        at1 == expect(&[("B", "A", 2), ("C", "A", 1), ("C", "B", 1)]),
        "min_edge_weight=1 gave {at1:?}"
    );
    let at2 = edges(2);
    ensure!(
        at2 == expect(&[("B", "A", 2)]),
        "min_edge_weight=2 gave {at2:?}"
    );
    Ok("{(A,B):2, (A,C):1, (B,C):1} at 1 and {(A,B):2} at 2".into())
}

fn monotonicity_trial(seed: u64) -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let corpus = random_corpus(&mut rng, CorpusShape::default());
    let subset = random_subset(&mut rng, &corpus);
    let kind = if rng.random_bool(0.5) {
        NetworkKind::Organisation
    } else {
        NetworkKind::Concept
    };
    let params = random_params(&mut rng);
    let base = build_network(&corpus, &subset, kind, &params);
    ensure!(base.nodes.len() <= params.max_nodes, "cap exceeded");

    let raised = NetworkParams {
        min_edge_weight: params.min_edge_weight + rng.random_range(1..4),
        ..params
    };
    let higher = build_network(&corpus, &subset, kind, &raised);
    let base_edges: HashSet<_> = base.edges.iter().collect();
    ensure!(
        higher.edges.iter().all(|e| base_edges.contains(e)),
        "raising the threshold added or reweighted an edge"
    );

    let uncapped = NetworkParams {
        max_nodes: usize::MAX,
        ..params
    };
    let full = build_network(&corpus, &subset, kind, &uncapped);
    let full_nodes: HashSet<_> = full.nodes.iter().collect();
    let full_edges: HashSet<_> = full.edges.iter().collect();
    ensure!(
        base.nodes.iter().all(|n| full_nodes.contains(n)),
        "uncapped network lost a node"
    );
    ensure!(
        base.edges.iter().all(|e| full_edges.contains(e)),
        "uncapped network lost an edge"
    );

    let weights: std::collections::HashMap<&str, u32> = base
        .nodes
        .iter()
        .map(|n| (n.key.as_str(), n.pubs))
        .collect();
    for e in &base.edges {
        ensure!(
            e.weight <= weights[e.a.as_str()].min(weights[e.b.as_str()]),
            "edge heavier than an endpoint"
        );
    }
    Ok(())
}

fn monotonicity() -> Outcome {
    const TRIALS: u64 = 10_000;
    let failures: Vec<(u64, String)> = (0..TRIALS)
        .into_par_iter()
        .filter_map(|i| {
            let seed = 1_000_000 + i;
            monotonicity_trial(seed).err().map(|e| (seed, e))
        })
        .collect();
    ensure!(
        failures.is_empty(),
        "{} counterexamples, first {:?}",
        failures.len(),
        failures[0]
    );
    Ok(format!("{TRIALS} trials, no counterexample"))
}

fn dsl_laws() -> Outcome {
    const PAIRS: u64 = 1_000;
    let shape = CorpusShape {
        max_pubs: 200,
        ..CorpusShape::default()
    };
    let failures: Vec<(u64, String)> = (0..PAIRS)
        .into_par_iter()
        .filter_map(|i| {
            let seed = 2_000_000 + i;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = random_corpus(&mut rng, shape);
            let (a, b) = (random_expr(&mut rng, 4), random_expr(&mut rng, 4));
            let check = || -> Result<(), String> {
                for e in [&a, &b] {
                    let text = e.to_string();
                    ensure!(
                        parse_expr(&text).as_ref() == Ok(e),
                        "round trip failed for `{text}`"
                    );
                }
                let lhs = eval_expr(&a.clone().or(b.clone()).not(), &corpus, today());
                let rhs = eval_expr(&a.clone().not().and(b.clone().not()), &corpus, today());
                ensure!(lhs == rhs, "De Morgan failed for `{a}` / `{b}`");
                let narrowed = eval_expr(&a.clone().and(b.clone()), &corpus, today());
                ensure!(
                    narrowed.is_subset(&eval_expr(&a, &corpus, today())),
                    "AND widened `{a}`"
                );
                Ok(())
            };
            check().err().map(|e| (seed, e))
        })
        .collect();
    ensure!(
        failures.is_empty(),
        "{} failures, first {:?}",
        failures.len(),
        failures[0]
    );

    let ingested = ingest(&[fixture("recent_20.jsonl")], None).map_err(|e| e.to_string())?;
    ensure!(
        ingested.corpus.len() == 20,
        "fixture loaded {} records",
        ingested.corpus.len()
    );
    let query = parse_query("last_days(date_inserted, 30)").map_err(|e| e.to_string())?;
    let got: Vec<String> = eval_query(&query, &ingested.corpus, today())
        .ids
        .into_iter()
        .collect();
    // cutoff 2022-04-01 inclusive, no upper bound, undated records excluded
    let expected = [
        "r05", "r06", "r07", "r08", "r09", "r10", "r11", "r15", "r17", "r19",
    ];
    ensure!(got == expected, "30-day sample selected {got:?}");
    Ok(format!(
        "{PAIRS} (query, corpus) pairs hold all laws; 30-day sample selects {} of 20",
        expected.len()
    ))
}

fn read_tree(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(dir).unwrap().display().to_string();
                out.insert(rel, fs::read_to_string(&path).unwrap());
            }
        }
    }
    out
}

fn without_timestamps(text: &str) -> String {
    text.lines()
        .filter(|l| !l.trim_start().starts_with("\"generated_at\""))
        .collect::<Vec<_>>()
        .join("\n")
}

fn export_validity() -> Outcome {
    const NETWORKS: u64 = 300;
    let failures: Vec<(u64, String)> = (0..NETWORKS)
        .into_par_iter()
        .filter_map(|i| {
            let seed = 3_000_000 + i;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let corpus = random_corpus(&mut rng, CorpusShape::default());
            let subset = random_subset(&mut rng, &corpus);
            let params = random_params(&mut rng);
            NetworkKind::ALL.into_iter().find_map(|kind| {
                let doc = to_vos_json(&build_network(&corpus, &subset, kind, &params));
                match validate_json(&canonical_json(&doc)) {
                    Ok(back) if back == doc => None,
                    Ok(_) => Some((seed, "round trip changed the document".to_string())),
                    Err(e) => Some((seed, e.to_string())),
                }
            })
        })
        .collect();
    ensure!(
        failures.is_empty(),
        "{} failures, first {:?}",
        failures.len(),
        failures[0]
    );

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = RunConfig {
        corpus_paths: vec![fixture("corpus_200.jsonl")],
        corpus_format: None,
        query_dir: fixture("queries"),
        out_dir: dir.path().join("bundle"),
        kinds: NetworkKind::ALL.to_vec(),
        params: NetworkParams::new(500, 1, 0.5).unwrap(),
        today: Some(today()),
    };
    run_all(&config).map_err(|e| e.to_string())?;
    let first = read_tree(&config.out_dir);
    std::thread::sleep(Duration::from_millis(5));
    run_all(&config).map_err(|e| e.to_string())?;
    let second = read_tree(&config.out_dir);
    ensure!(
        first.keys().eq(second.keys()),
        "re-run wrote a different file set"
    );
    for (name, text) in &first {
        ensure!(
            without_timestamps(text) == without_timestamps(&second[name]),
            "{name} differs beyond generated_at"
        );
    }
    Ok(format!(
        "{} networks valid and round-trip; re-run of {} files identical modulo generated_at",
        2 * NETWORKS,
        first.len()
    ))
}

struct KillOnDrop(Child);

impl Drop for KillOnDrop {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn end_to_end() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_dimnet");
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let out = dir.path().join("bundle");
    let started = Instant::now();
    let build = Command::new(bin)
        .arg("build")
        .arg("--corpus")
        .arg(fixture("corpus_200.jsonl"))
        .arg("--queries")
        .arg(fixture("queries"))
        .arg("--out")
        .arg(&out)
        .args(["--today", "2022-05-01"])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(
        build.status.success(),
        "build failed: {}",
        String::from_utf8_lossy(&build.stderr)
    );
    ensure!(elapsed < Duration::from_secs(5), "build took {elapsed:.1?}");

    let manifest = BundleManifest::read(&out).map_err(|e| format!("manifest: {e}"))?;
    ensure!(
        manifest.networks.len() == 6,
        "{} networks in the manifest",
        manifest.networks.len()
    );
    for entry in &manifest.networks {
        let text = fs::read_to_string(out.join(&entry.file)).map_err(|e| e.to_string())?;
        validate_json(&text).map_err(|e| format!("{}: {e}", entry.file))?;
    }
    let index = fs::read_to_string(out.join(INDEX_FILE)).map_err(|e| e.to_string())?;
    ensure!(
        manifest.networks.iter().all(|e| index.contains(&e.file)),
        "index does not link every network"
    );

    let mut child = KillOnDrop(
        Command::new(bin)
            .arg("serve")
            .arg(&out)
            .args(["--port", "0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| e.to_string())?,
    );
    let mut banner = String::new();
    BufReader::new(child.0.stdout.take().unwrap())
        .read_line(&mut banner)
        .map_err(|e| e.to_string())?;
    let addr = banner
        .split("http://")
        .nth(1)
        .and_then(|s| s.trim().trim_end_matches('/').parse().ok())
        .ok_or_else(|| format!("no address in `{}`", banner.trim()))?;

    let (status, head, body) = http_get_with_headers(addr, "/networks/recent__org.json");
    ensure!(status == 200, "network file answered {status}");
    ensure!(
        head.contains("content-type: application/json"),
        "network file served as {head}"
    );
    ensure!(
        body == fs::read(out.join("networks/recent__org.json")).unwrap(),
        "network body differs from file"
    );
    let (status, head, _) = http_get_with_headers(addr, "/");
    ensure!(
        status == 200 && head.contains("content-type: text/html"),
        "`/` answered {status}"
    );
    let (status, _, _) = http_get_with_headers(addr, "/../etc/hosts");
    ensure!(status == 404, "traversal answered {status}");
    Ok(format!(
        "6 networks + manifest + index in {elapsed:.2?}; serve answered 200/200/404"
    ))
}

fn peak_rss_kib() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    line.split_whitespace().nth(1)?.parse().ok()
}

fn scale() -> Outcome {
    const PUBS: usize = 1_000_000;
    let generated = Instant::now();
    let corpus = zipf_corpus(PUBS, 50_000, 1.1, 2022);
    let gen_time = generated.elapsed();
    let subset = SubsetResult::all(&corpus);
    let params = NetworkParams::new(500, 2, 0.5).unwrap();
    let started = Instant::now();
    let net = build_org_network(&corpus, &subset, &params);
    let elapsed = started.elapsed();
    ensure!(
        net.nodes.len() <= 500 && !net.edges.is_empty(),
        "implausible network: {} nodes, {} edges",
        net.nodes.len(),
        net.edges.len()
    );
    ensure!(
        elapsed < Duration::from_secs(60),
        "build took {elapsed:.1?}, limit 60 s"
    );
    let rss = peak_rss_kib().map_or("unknown".to_string(), |k| format!("{} MiB", k / 1024));
    Ok(format!(
        "{PUBS} pubs -> {} nodes, {} edges in {elapsed:.2?} (corpus generated in {gen_time:.1?}; peak RSS {rss}, {} threads)",
        net.nodes.len(),
        net.edges.len(),
        rayon::current_num_threads()
    ))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("collaboration template fidelity", template_fidelity),
        ("worked pair example", worked_pair_example),
        ("threshold and cap monotonicity", monotonicity),
        ("query language laws", dsl_laws),
        ("export validity", export_validity),
        ("end to end build and serve", end_to_end),
        ("scale sanity", scale),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let started = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {}. {name} [{secs:.1}s]: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name} [{secs:.1}s]: {detail}", i + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
