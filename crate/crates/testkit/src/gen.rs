//! Random corpora, parameters and queries.

use chrono::{Duration, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Zipf};

use dimnet_core::corpus::{ConceptMention, Corpus, DocType, OrgId, Organisation, Publication};
use dimnet_core::netbuild::NetworkParams;
use dimnet_core::subsetql::{CmpOp, Expr, Field, Literal};

/// Upper bounds for [`random_corpus`].
#[derive(Debug, Clone, Copy)]
pub struct CorpusShape {
    pub max_pubs: usize,
    pub max_orgs: usize,
    pub max_concepts: usize,
}

impl Default for CorpusShape {
    fn default() -> Self {
        CorpusShape {
            max_pubs: 500,
            max_orgs: 40,
            max_concepts: 60,
        }
    }
}

pub const JOURNALS: &[&str] = &["Nature", "Science", "The Lancet", "BMJ", "eLife"];
pub const BASE_DATE: (i32, u32, u32) = (2021, 1, 1);
const DATE_SPAN_DAYS: i64 = 600;

pub fn base_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(BASE_DATE.0, BASE_DATE.1, BASE_DATE.2).unwrap()
}

fn org_id_pool(rng: &mut impl Rng, n: usize) -> Vec<String> {
    // mixed widths so byte order differs from numeric order
    let mut ids: Vec<String> = Vec::with_capacity(n);
    while ids.len() < n {
        let id = format!(
            "grid.{}.{}",
            rng.random_range(0..200),
            rng.random_range(0..10)
        );
        if !ids.contains(&id) {
            ids.push(id);
        }
    }
    ids
}

fn concept_pool(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("concept {}", i * 7 % 101)).collect()
}

/// Picks from `pool` with a bias towards early entries, which produces both
/// heavy hitters and count ties.
fn skewed<'a, T>(rng: &mut impl Rng, pool: &'a [T]) -> &'a T {
    let u: f64 = rng.random();
    &pool[((u * u) * pool.len() as f64) as usize % pool.len()]
}

pub fn random_corpus(rng: &mut impl Rng, shape: CorpusShape) -> Corpus {
    let n_orgs = rng.random_range(1..=shape.max_orgs);
    let n_concepts = rng.random_range(1..=shape.max_concepts);
    let n_pubs = rng.random_range(1..=shape.max_pubs);
    let org_ids = org_id_pool(rng, n_orgs);
    let concepts = concept_pool(n_concepts);

    let organisations: Vec<Organisation> = org_ids
        .iter()
        .enumerate()
        .filter(|_| rng.random_bool(0.85))
        .map(|(i, id)| Organisation::new(id, &format!("Institute {i}")))
        .collect();

    let publications = (0..n_pubs).map(|i| {
        let mut p = Publication::with_orgs(&format!("pub.{i:04}"), Vec::<&str>::new());
        for _ in 0..rng.random_range(0..=6) {
            let id = skewed(rng, &org_ids);
            p.research_orgs.push(OrgId::new(id.as_str()));
            if rng.random_bool(0.1) {
                p.research_orgs.push(OrgId::new(id.as_str()));
            }
        }
        for _ in 0..rng.random_range(0..=6) {
            let c = skewed(rng, &concepts);
            let relevance = f64::from(rng.random_range(0..=10u8)) / 10.0;
            p.concepts.push(ConceptMention::new(c, relevance).unwrap());
        }
        if rng.random_bool(0.9) {
            p.year = Some(rng.random_range(2015..=2023));
        }
        if rng.random_bool(0.9) {
            p.date_inserted =
                Some(base_date() + Duration::days(rng.random_range(0..DATE_SPAN_DAYS)));
        }
        if rng.random_bool(0.8) {
            p.journal_title = Some(JOURNALS.choose(rng).unwrap().to_string());
        }
        if rng.random_bool(0.8) {
            p.doc_type = Some(*DocType::ALL.choose(rng).unwrap());
        }
        p
    });
    let publications: Vec<Publication> = publications.collect();
    Corpus::from_records(publications, organisations).expect("generated corpus is valid")
}

pub fn random_params(rng: &mut impl Rng) -> NetworkParams {
    NetworkParams::new(
        rng.random_range(1..=50),
        rng.random_range(1..=4),
        f64::from(rng.random_range(0..=10u8)) / 10.0,
    )
    .unwrap()
}

fn random_literal(rng: &mut impl Rng, field: Field) -> Literal {
    match field {
        Field::Year => Literal::Int(rng.random_range(2014..=2024)),
        Field::DateInserted => {
            Literal::Date(base_date() + Duration::days(rng.random_range(-10..DATE_SPAN_DAYS + 10)))
        }
        Field::JournalTitle => Literal::Str(JOURNALS.choose(rng).unwrap().to_string()),
        Field::DocType => Literal::Str(DocType::ALL.choose(rng).unwrap().as_str().to_string()),
        Field::Id => Literal::Str(format!("pub.{:04}", rng.random_range(0..520))),
        Field::ResearchOrgs => Literal::Str(format!(
            "grid.{}.{}",
            rng.random_range(0..200),
            rng.random_range(0..10)
        )),
        Field::Concept => Literal::Str(format!("concept {}", rng.random_range(0..101))),
    }
}

fn random_leaf(rng: &mut impl Rng) -> Expr {
    let field = *Field::ALL.choose(rng).unwrap();
    match rng.random_range(0..10) {
        0 => Expr::Ids(
            (0..rng.random_range(1..4))
                .map(|_| format!("pub.{:04}", rng.random_range(0..520)))
                .collect(),
        ),
        1 => Expr::LastDays {
            field: Field::DateInserted,
            days: rng.random_range(0..700),
        },
        2 | 3 => Expr::In {
            field,
            values: (0..rng.random_range(1..4))
                .map(|_| random_literal(rng, field))
                .collect(),
        },
        _ => {
            let op = match field {
                Field::DocType | Field::ResearchOrgs | Field::Concept => {
                    *[CmpOp::Eq, CmpOp::Ne].choose(rng).unwrap()
                }
                _ => *CmpOp::ALL.choose(rng).unwrap(),
            };
            Expr::Compare {
                field,
                op,
                value: random_literal(rng, field),
            }
        }
    }
}

/// A well-typed random expression of at most `depth` operator levels.
pub fn random_expr(rng: &mut impl Rng, depth: u32) -> Expr {
    if depth == 0 || rng.random_bool(0.3) {
        return random_leaf(rng);
    }
    match rng.random_range(0..3) {
        0 => random_expr(rng, depth - 1).and(random_expr(rng, depth - 1)),
        1 => random_expr(rng, depth - 1).or(random_expr(rng, depth - 1)),
        _ => random_expr(rng, depth - 1).not(),
    }
}

/// A large synthetic corpus whose organisation lists follow a Zipf law, as
/// affiliation frequencies do in practice. About 1% of org ids have no
/// organisation record.
pub fn zipf_corpus(n_pubs: usize, n_orgs: usize, exponent: f64, seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zipf = Zipf::new(n_orgs as f64, exponent).expect("valid Zipf parameters");
    let ids: Vec<OrgId> = (0..n_orgs)
        .map(|i| OrgId::new(format!("grid.{i}.{}", i % 7)))
        .collect();
    let organisations: Vec<Organisation> = ids
        .iter()
        .enumerate()
        .filter(|(i, _)| i % 100 != 99)
        .map(|(i, id)| Organisation {
            id: id.clone(),
            name: format!("Institute {i}"),
            country_code: None,
        })
        .collect();
    let publications: Vec<Publication> = (0..n_pubs)
        .map(|i| {
            // 1..=8 affiliations, short lists most likely
            let len = 1 + (rng.random::<f64>().powi(2) * 8.0) as usize;
            let mut p = Publication::with_orgs(&format!("pub.{i}"), Vec::<&str>::new());
            p.research_orgs = (0..len.min(8))
                .map(|_| ids[zipf.sample(&mut rng) as usize - 1].clone())
                .collect();
            p
        })
        .collect();
    Corpus::from_records(publications, organisations).expect("generated corpus is valid")
}
