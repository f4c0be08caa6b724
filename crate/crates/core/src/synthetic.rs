//! Seeded generators for test worlds: a small bibliographic corpus with
//! grants and side tables, a vocabulary-overlap ladder, random and planted
//! citation graphs, and synthetic funding and author-unit tables.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};

use crate::analytics::{BinInput, StudyInput};
use crate::bm25::TopicSimilarity;
use crate::citegraph::CitationGraph;
use crate::clusterer::{Partition, TopicId};
use crate::corpus::{
    save_views, AuthorRef, Document, DocumentSet, FieldMap, Grant, GrantSet, JournalMetric, JournalMetrics,
    ViewRecord, DEFAULT_FIELDS,
};
use crate::error::{Error, Result};

const SYLLABLES: [&str; 16] = [
    "ka", "lo", "mi", "ne", "ru", "ta", "vo", "zi", "pe", "sa", "do", "fu", "gri", "ba", "xo", "qu",
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `count` distinct pseudo-words not already in `taken`.
fn pseudo_words(r: &mut ChaCha8Rng, count: usize, taken: &mut BTreeSet<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let word: String = (0..3).map(|_| *SYLLABLES.choose(r).unwrap()).collect();
        if taken.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub grants: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Probability that a reference stays inside the citing document's topic.
    pub within_topic: f64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        CorpusSpec {
            topics: 10,
            docs_per_topic: 50,
            grants: 200,
            first_year: 2004,
            last_year: 2013,
            within_topic: 0.92,
        }
    }
}

pub const COUNTRIES: [(&str, f64); 5] = [("US", 0.40), ("GB", 0.15), ("DE", 0.15), ("CN", 0.15), ("JP", 0.10)];
const FUNDERS: [(&str, &str); 5] = [("NIH", "US"), ("NSF", "US"), ("DOE", "US"), ("UKRI", "GB"), ("DFG", "DE")];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Source documents only; unresolved references point at cited-only items.
    pub docs: Vec<Document>,
    pub grants: Vec<Grant>,
    pub metrics: Vec<JournalMetric>,
    pub field_map: FieldMap,
    pub views: Vec<ViewRecord>,
    /// Generating topic of every source document, in generator numbering;
    /// [`SyntheticCorpus::planted_partition`] renumbers into canonical ids.
    pub truth: BTreeMap<String, TopicId>,
    /// Generating topic of every grant with text, in generator numbering.
    pub grant_truth: BTreeMap<String, TopicId>,
}

impl SyntheticCorpus {
    pub fn document_set(&self) -> Result<DocumentSet> {
        DocumentSet::new(self.docs.clone())
    }

    pub fn grant_set(&self) -> Result<GrantSet> {
        GrantSet::new(self.grants.clone())
    }

    pub fn journal_metrics(&self) -> Result<JournalMetrics> {
        JournalMetrics::new(self.metrics.clone())
    }

    /// The generating topics as a partition over the source documents.
    pub fn planted_partition(&self) -> Result<Partition> {
        let labels: Vec<(String, Option<TopicId>)> =
            self.truth.iter().map(|(d, &t)| (d.clone(), Some(t))).collect();
        Ok(Partition::from_groups(labels))
    }

    /// Writes documents.jsonl, grants.jsonl, journal_metrics.csv,
    /// field_map.csv and views.csv into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.document_set()?.save(&dir.join("documents.jsonl"))?;
        self.grant_set()?.save(&dir.join("grants.jsonl"))?;
        self.journal_metrics()?.save(&dir.join("journal_metrics.csv"))?;
        self.field_map.save(&dir.join("field_map.csv"))?;
        save_views(&dir.join("views.csv"), &self.views)
    }
}

fn draw_text(r: &mut ChaCha8Rng, len: usize, own: &[String], general: &[String], own_share: f64) -> String {
    (0..len)
        .map(|_| {
            if r.random_bool(own_share) {
                own.choose(r).unwrap().as_str()
            } else {
                general.choose(r).unwrap().as_str()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn draw_country(r: &mut ChaCha8Rng) -> Option<String> {
    let mut u: f64 = r.random();
    for (c, p) in COUNTRIES {
        if u < p {
            return Some(c.to_string());
        }
        u -= p;
    }
    None
}

/// A planted-topic corpus: documents cite mostly within their topic, share
/// topic vocabulary, publish in topic journals, and grants are written in the
/// vocabulary of one topic each.
pub fn synthetic_corpus(seed: u64, spec: &CorpusSpec) -> Result<SyntheticCorpus> {
    if spec.topics == 0 || spec.docs_per_topic == 0 || spec.first_year > spec.last_year {
        return Err(Error::InvalidParameter("corpus spec needs topics, documents and a year range".into()));
    }
    let mut r = rng(seed);
    let mut taken = BTreeSet::new();
    let general = pseudo_words(&mut r, 60, &mut taken);
    let vocab: Vec<Vec<String>> = (0..spec.topics).map(|_| pseudo_words(&mut r, 40, &mut taken)).collect();

    let n = spec.topics * spec.docs_per_topic;
    let mut topic_of: Vec<TopicId> = (0..n).map(|i| (i % spec.topics) as TopicId).collect();
    topic_of.shuffle(&mut r);
    let years: Vec<i32> = (0..n).map(|_| r.random_range(spec.first_year..=spec.last_year)).collect();
    let id = |i: usize| format!("D{:04}", i + 1);

    // journals: three per topic; the third is left out of the field map
    let mut field_map = FieldMap::default();
    let journal = |t: usize, k: usize| format!("J{t:02}{k}");
    for t in 0..spec.topics {
        let field = DEFAULT_FIELDS[t % DEFAULT_FIELDS.len()];
        let other = DEFAULT_FIELDS[(t + 5) % DEFAULT_FIELDS.len()];
        field_map.insert(&journal(t, 0), field)?;
        field_map.insert(&journal(t, 1), if t % 3 == 0 { other } else { field })?;
    }

    let mut by_topic_year: Vec<Vec<usize>> = vec![Vec::new(); spec.topics];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (years[i], i));
    for &i in &order {
        by_topic_year[topic_of[i] as usize].push(i);
    }

    let view_dist = Poisson::new(30.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut docs = Vec::with_capacity(n);
    let mut views = Vec::new();
    let mut truth = BTreeMap::new();
    for i in 0..n {
        let t = topic_of[i] as usize;
        let mut refs = BTreeSet::new();
        let n_refs = r.random_range(3..=8);
        for _ in 0..n_refs {
            let topic = if r.random_bool(spec.within_topic) || spec.topics == 1 {
                t
            } else {
                (t + r.random_range(1..spec.topics)) % spec.topics
            };
            let earlier: Vec<usize> = by_topic_year[topic]
                .iter()
                .copied()
                .filter(|&j| years[j] < years[i])
                .collect();
            if let Some(&j) = earlier.choose(&mut r) {
                refs.insert(id(j));
            }
        }
        // cited-only classics of the topic
        for _ in 0..r.random_range(0..=2) {
            refs.insert(format!("X{:02}{:02}", t, r.random_range(0..12)));
        }
        let (title, abstract_text) = if r.random_bool(0.03) {
            (String::new(), String::new())
        } else {
            (
                draw_text(&mut r, 6, &vocab[t], &general, 0.7),
                draw_text(&mut r, 30, &vocab[t], &general, 0.7),
            )
        };
        let authors = (0..r.random_range(1..=6))
            .map(|_| AuthorRef {
                author_id: format!("A{:04}", r.random_range(0..1500)),
                country: draw_country(&mut r),
            })
            .collect();
        let journal_id = Some(journal(t, r.random_range(0..3)));
        for y in years[i]..=spec.last_year {
            views.push(ViewRecord {
                doc_id: id(i),
                year: y,
                view_count: Distribution::<f64>::sample(&view_dist, &mut r).floor(),
            });
        }
        truth.insert(id(i), t as TopicId);
        docs.push(Document {
            doc_id: id(i),
            year: years[i],
            title,
            abstract_text,
            references: refs.into_iter().collect(),
            authors,
            journal_id,
            is_source: true,
        });
    }

    let mut metrics = Vec::new();
    for t in 0..spec.topics {
        for k in 0..3 {
            let base: f64 = r.random_range(0.5..8.0);
            for y in spec.first_year..=spec.last_year {
                metrics.push(JournalMetric {
                    journal_id: journal(t, k),
                    year: y,
                    citescore: (base * r.random_range(0.9..1.1) * 1000.0).round() / 1000.0,
                });
            }
        }
    }

    let amount = LogNormal::new(-0.5, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut grants = Vec::with_capacity(spec.grants);
    let mut grant_truth = BTreeMap::new();
    let grant_first = (spec.last_year - 5).max(spec.first_year);
    for g in 0..spec.grants {
        let t = r.random_range(0..spec.topics);
        let (funder, country) = *FUNDERS.choose(&mut r).unwrap();
        let grant_id = format!("G{:05}", g + 1);
        let (title, abstract_text) = if r.random_bool(0.06) {
            (String::new(), String::new())
        } else {
            grant_truth.insert(grant_id.clone(), t as TopicId);
            (
                draw_text(&mut r, 8, &vocab[t], &general, 0.85),
                draw_text(&mut r, 40, &vocab[t], &general, 0.85),
            )
        };
        grants.push(Grant {
            grant_id,
            funder: funder.to_string(),
            funder_country: country.to_string(),
            fiscal_year: r.random_range(grant_first..=spec.last_year),
            amount: (Distribution::<f64>::sample(&amount, &mut r) * 1e4).round() / 1e4,
            title,
            abstract_text,
        });
    }

    Ok(SyntheticCorpus {
        docs,
        grants,
        metrics,
        field_map,
        views,
        truth,
        grant_truth,
    })
}

/// The bundled demonstration corpus: 500 documents in 10 topics.
pub fn bundled_corpus() -> Result<SyntheticCorpus> {
    synthetic_corpus(500, &CorpusSpec::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct LadderRung {
    pub overlap: f64,
    pub docs: DocumentSet,
    pub partition: Partition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LadderSpec {
    pub topics: usize,
    pub docs_per_topic: usize,
    pub vocabulary: usize,
    pub tokens_per_doc: usize,
}

impl Default for LadderSpec {
    fn default() -> Self {
        LadderSpec {
            topics: 8,
            docs_per_topic: 40,
            vocabulary: 40,
            tokens_per_doc: 8,
        }
    }
}

/// Corpora whose topic vocabularies overlap by the given shares.
///
/// Every topic has `vocabulary` word slots; at overlap `o` the first
/// `round(o · vocabulary)` slots hold words common to all topics. Documents draw
/// the same slot sequence at every rung, so raising the overlap only turns
/// distinctive words into shared ones.
pub fn overlap_ladder(seed: u64, levels: &[f64], spec: &LadderSpec) -> Result<Vec<LadderRung>> {
    if levels.iter().any(|o| !(0.0..=1.0).contains(o)) {
        return Err(Error::InvalidParameter("overlap levels must lie in [0, 1]".into()));
    }
    let mut r = rng(seed);
    let slots: Vec<Vec<Vec<usize>>> = (0..spec.topics)
        .map(|_| {
            (0..spec.docs_per_topic)
                .map(|_| (0..spec.tokens_per_doc).map(|_| r.random_range(0..spec.vocabulary)).collect())
                .collect()
        })
        .collect();
    levels
        .iter()
        .map(|&overlap| {
            let shared = (overlap * spec.vocabulary as f64).round() as usize;
            let mut docs = Vec::new();
            let mut labels = Vec::new();
            for (t, topic_docs) in slots.iter().enumerate() {
                for (k, doc_slots) in topic_docs.iter().enumerate() {
                    let words: Vec<String> = doc_slots
                        .iter()
                        .map(|&s| if s < shared { format!("c{s}") } else { format!("t{t}w{s}") })
                        .collect();
                    let doc_id = format!("T{t:02}D{k:03}");
                    labels.push((doc_id.clone(), Some(t as TopicId)));
                    docs.push(Document {
                        doc_id,
                        year: 2010,
                        title: String::new(),
                        abstract_text: words.join(" "),
                        references: Vec::new(),
                        authors: Vec::new(),
                        journal_id: None,
                        is_source: true,
                    });
                }
            }
            Ok(LadderRung {
                overlap,
                docs: DocumentSet::new(docs)?,
                partition: Partition::from_groups(labels),
            })
        })
        .collect()
}

fn node_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("n{i:04}")).collect()
}

/// Each ordered pair `i → j` (i ≠ j) is an edge with probability `p`.
pub fn random_graph(seed: u64, nodes: usize, p: f64) -> CitationGraph {
    let mut r = rng(seed);
    let mut edges = Vec::new();
    for i in 0..nodes {
        for j in 0..nodes {
            if i != j && r.random_bool(p) {
                edges.push((i as u32, j as u32));
            }
        }
    }
    CitationGraph::from_edges(node_ids(nodes), edges)
}

/// Sparse random graph with about `mean_out` references per node.
pub fn sparse_random_graph(seed: u64, nodes: usize, mean_out: f64) -> CitationGraph {
    random_graph(seed, nodes, (mean_out / nodes.saturating_sub(1).max(1) as f64).min(1.0))
}

/// `count` cliques of `size` nodes (newer nodes cite all older ones), with
/// one citation from clique `k + 1` to clique `k` when `bridged`.
pub fn planted_cliques(count: usize, size: usize, bridged: bool) -> CitationGraph {
    let mut edges = Vec::new();
    for c in 0..count {
        let base = (c * size) as u32;
        for i in 0..size as u32 {
            for j in 0..i {
                edges.push((base + i, base + j));
            }
        }
        if bridged && c > 0 {
            edges.push((base, base - size as u32));
        }
    }
    CitationGraph::from_edges(node_ids(count * size), edges)
}

/// Topic similarities for two groups of `size` topics: strong within a group,
/// a single weak link between them.
pub fn two_cluster_similarities(seed: u64, size: usize) -> Vec<TopicSimilarity> {
    let mut r = rng(seed);
    let mut sims = Vec::new();
    for group in 0..2u32 {
        let base = group * size as u32;
        for a in 0..size as u32 {
            for b in (a + 1)..size as u32 {
                sims.push(TopicSimilarity {
                    topic_a: base + a,
                    topic_b: base + b,
                    sim: r.random_range(5.0..10.0),
                });
            }
        }
    }
    sims.push(TopicSimilarity {
        topic_a: 0,
        topic_b: size as u32,
        sim: 0.5,
    });
    sims
}

/// Late funding is `exp(a + b·P + ε) − offset` so that its log is affine in
/// prominence with signal share `signal_share` of the variance.
pub fn funding_world(seed: u64, topics: usize, signal_share: f64) -> Result<StudyInput> {
    if !(0.0..1.0).contains(&signal_share) || topics < 10 {
        return Err(Error::InvalidParameter("need 0 ≤ share < 1 and at least 10 topics".into()));
    }
    let mut r = rng(seed);
    let std = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let b = signal_share.sqrt();
    let noise = (1.0 - signal_share).sqrt();
    let offset = crate::analytics::FUNDING_LOG_OFFSET;
    let mut input = StudyInput::default();
    for t in 0..topics {
        let p: f64 = std.sample(&mut r);
        let log_late = 1.0 + b * p + noise * std.sample(&mut r);
        let log_early = 0.8 * log_late + 0.6 * std.sample(&mut r);
        input.topics.push(t as TopicId);
        input.prominence.push(p);
        input.late_funding.push(log_late.exp() - offset);
        input.early_funding.push(log_early.exp() - offset);
        input.vitality.push(r.random_range(0.05..0.5));
        input.log_authors.push(r.random_range(1.0f64..8.0).ln_1p());
    }
    Ok(input)
}

/// Topics whose author-units (multiples of 1/6) sum exactly to `total`.
/// Roughly a fifth of the topics carry no funding.
pub fn author_unit_topics(seed: u64, topics: usize, total: f64) -> Result<Vec<BinInput>> {
    if topics == 0 || !(total > 0.0) {
        return Err(Error::InvalidParameter("need topics and a positive total".into()));
    }
    let mut r = rng(seed);
    let raw: Vec<f64> = (0..topics).map(|_| r.random_range(1.0..3.0f64)).collect();
    let raw_sum: f64 = raw.iter().sum();
    let mut units: Vec<f64> = raw.iter().map(|x| (x / raw_sum * total * 6.0).floor() / 6.0).collect();
    let assigned: f64 = units.iter().sum();
    units[topics - 1] += total - assigned;
    let amount = LogNormal::new(0.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok(units
        .into_iter()
        .enumerate()
        .map(|(t, authors)| BinInput {
            topic_id: t as TopicId,
            prominence: r.random_range(-2.0..2.0),
            authors,
            funding: if r.random_bool(0.2) { 0.0 } else { amount.sample(&mut r) },
        })
        .collect())
}

/// Rows with a planted one-factor structure: `x_j = λ_j·f + √(1 − λ_j²)·e_j`.
pub fn one_factor_rows(seed: u64, rows: usize, loadings: &[f64]) -> Result<Vec<Vec<f64>>> {
    if loadings.iter().any(|l| !(l.abs() < 1.0)) {
        return Err(Error::InvalidParameter("loadings must lie in (-1, 1)".into()));
    }
    let mut r = rng(seed);
    let std = Normal::new(0.0, 1.0).map_err(|e| Error::InvalidParameter(e.to_string()))?;
    Ok((0..rows)
        .map(|_| {
            let f: f64 = std.sample(&mut r);
            loadings
                .iter()
                .map(|&l| l * f + (1.0 - l * l).sqrt() * std.sample(&mut r))
                .collect()
        })
        .collect())
}
