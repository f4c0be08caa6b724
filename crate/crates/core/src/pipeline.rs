//! End-to-end orchestration: configuration, file-to-file stages with
//! digest-based skipping, run manifests and the per-topic report.
//!
//! Every stage reads its inputs from disk and writes its artifacts into the
//! output directory, so single CLI commands and full pipeline runs share the
//! same code. A stage is skipped when the digest of its inputs and settings
//! matches the previous run and its outputs are still present.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analytics::{self, BinInput, StudyInput};
use crate::assigner::{self, Assignment, DocAssignOptions, FundingTable, GrantAssignOptions};
use crate::bm25::{self, Bm25Params, ProfileIndex, Tokenizer};
use crate::citegraph::{self, CitationGraph};
use crate::clusterer::{self, Partition, TopicId};
use crate::corpus::{self, Document, DocumentSet, FieldMap, IngestOptions, JournalMetrics, UsageTable};
use crate::error::{Error, Result};
use crate::maplayout::{self, LayoutOptions};
use crate::prominence::{self, ProminenceWeights, TopicYearStats};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const STAGES: [&str; 9] = [
    "ingest",
    "graph",
    "cluster",
    "profiles",
    "assign-docs",
    "assign-grants",
    "prominence",
    "analyze",
    "layout",
];

/// Artifact file names inside the output directory.
pub mod artifacts {
    pub const CORPUS: &str = "corpus.jsonl";
    pub const INGEST_REPORT: &str = "ingest_report.json";
    pub const GRAPH: &str = "graph.bin";
    pub const GRAPH_STATS: &str = "graph_stats.json";
    pub const PARTITION: &str = "partition.csv";
    pub const CLUSTER_REPORT: &str = "cluster_report.json";
    pub const PROFILES: &str = "profiles.bin";
    pub const PROFILE_REPORT: &str = "profile_report.json";
    pub const SIMILARITIES: &str = "topic_similarity.csv";
    pub const SELF_ASSIGNMENT: &str = "self_assignment.csv";
    pub const DOC_ASSIGNMENTS: &str = "doc_assignments.csv";
    pub const EXTENDED_PARTITION: &str = "partition_extended.csv";
    pub const ASSIGNMENTS: &str = "assignments.csv";
    pub const FUNDING: &str = "funding_by_topic.csv";
    pub const FUNDERS: &str = "funder_summary.json";
    pub const GRANT_REPORT: &str = "grant_report.json";
    pub const PROMINENCE: &str = "prominence.csv";
    pub const TOPIC_STATS: &str = "topic_stats.json";
    pub const FACTOR_ANALYSIS: &str = "factor_analysis.json";
    pub const STUDY_REPORT: &str = "study_report.json";
    pub const CORRELATIONS: &str = "correlations.csv";
    pub const REGRESSIONS: &str = "regressions.csv";
    pub const BINS: &str = "bins.csv";
    pub const MAP: &str = "map.csv";
    pub const MANIFEST: &str = "manifest.json";
    pub const STAGE_KEYS: &str = "stage_keys.json";
}

use artifacts as a;

/// Every tunable of the pipeline. Loaded from a flat TOML key-value file;
/// relative paths resolve against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub docs: Option<PathBuf>,
    pub grants: Option<PathBuf>,
    pub journal_metrics: Option<PathBuf>,
    pub field_map: Option<PathBuf>,
    pub views: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    /// Documents to classify into the model after clustering.
    pub new_docs: Option<PathBuf>,
    pub out_dir: PathBuf,

    pub strict: bool,
    pub min_noncite: usize,
    pub resolution: f64,
    pub seed: u64,
    pub min_size: usize,
    pub max_iterations: usize,
    pub top_terms: Option<usize>,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    pub weighted_query: bool,
    pub doc_min_refs: usize,
    pub grant_threshold: f64,
    pub grant_top: usize,
    pub country: String,
    pub prominence_year: i32,
    pub weights: String,
    pub derive_weights: bool,
    pub early: String,
    pub late: String,
    pub bin_target: f64,
    pub top_n: usize,
    pub layout_iterations: usize,
    pub edge_cut: f64,
    pub threads: Option<usize>,
}

impl Default for Config {
    fn default() -> Self {
        let w = ProminenceWeights::default();
        Config {
            docs: None,
            grants: None,
            journal_metrics: None,
            field_map: None,
            views: None,
            stopwords: None,
            new_docs: None,
            out_dir: PathBuf::from("out"),
            strict: false,
            min_noncite: 2,
            resolution: clusterer::REFERENCE_RESOLUTION,
            seed: 1,
            min_size: clusterer::DEFAULT_MIN_SIZE,
            max_iterations: 10,
            top_terms: None,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            weighted_query: false,
            doc_min_refs: 1,
            grant_threshold: assigner::DEFAULT_GRANT_THRESHOLD,
            grant_top: assigner::DEFAULT_TOP_TOPICS,
            country: "US".into(),
            prominence_year: 2010,
            weights: format!("{},{},{}", w.citations, w.views, w.citescore),
            derive_weights: false,
            early: "2008:2010".into(),
            late: "2011:2013".into(),
            bin_target: 25_000.0,
            top_n: maplayout::DEFAULT_TOP_N,
            layout_iterations: 500,
            edge_cut: 0.0,
            threads: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Config = toml::from_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    /// Makes relative paths relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.docs,
            &mut self.grants,
            &mut self.journal_metrics,
            &mut self.field_map,
            &mut self.views,
            &mut self.stopwords,
            &mut self.new_docs,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        fix(&mut self.out_dir);
    }

    pub fn ingest_options(&self) -> IngestOptions {
        IngestOptions {
            strict: self.strict,
            min_noncite: self.min_noncite,
        }
    }

    pub fn bm25_params(&self) -> Bm25Params {
        Bm25Params {
            k1: self.bm25_k1,
            b: self.bm25_b,
            weighted_query: self.weighted_query,
        }
    }

    pub fn prominence_weights(&self) -> Result<ProminenceWeights> {
        ProminenceWeights::parse(&self.weights)
    }

    pub fn early_years(&self) -> Result<RangeInclusive<i32>> {
        parse_year_range(&self.early)
    }

    pub fn late_years(&self) -> Result<RangeInclusive<i32>> {
        parse_year_range(&self.late)
    }

    pub fn tokenizer(&self) -> Result<Tokenizer> {
        match &self.stopwords {
            Some(p) => Tokenizer::from_stopword_file(p),
            None => Ok(Tokenizer::default()),
        }
    }

    fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// Parses `2008:2010` (or a single year) into an inclusive range.
pub fn parse_year_range(text: &str) -> Result<RangeInclusive<i32>> {
    let bad = || Error::InvalidParameter(format!("expected a year range like 2008:2010, got {text:?}"));
    let (lo, hi) = match text.split_once(':') {
        Some((lo, hi)) => (lo.trim(), hi.trim()),
        None => (text.trim(), text.trim()),
    };
    let lo: i32 = lo.parse().map_err(|_| bad())?;
    let hi: i32 = hi.parse().map_err(|_| bad())?;
    if lo > hi {
        return Err(bad());
    }
    Ok(lo..=hi)
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub key: String,
    pub skipped: bool,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: Config,
    /// Input path → SHA-256.
    pub input_digests: BTreeMap<String, String>,
    /// Seed used by each randomized stage.
    pub stage_seeds: BTreeMap<String, u64>,
    pub stages: Vec<StageRecord>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub error: Option<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &Config) -> Self {
        let mut stage_seeds = BTreeMap::new();
        stage_seeds.insert("cluster".to_string(), config.seed);
        stage_seeds.insert("layout".to_string(), config.seed);
        RunManifest {
            command: command.to_string(),
            version: VERSION.to_string(),
            config: config.clone(),
            input_digests: BTreeMap::new(),
            stage_seeds,
            stages: Vec::new(),
            started_unix: unix_now(),
            finished_unix: 0,
            error: None,
        }
    }

    /// Records digests of every configured input file that exists.
    pub fn digest_inputs(&mut self, config: &Config) {
        for p in [
            &config.docs,
            &config.grants,
            &config.journal_metrics,
            &config.field_map,
            &config.views,
            &config.stopwords,
            &config.new_docs,
        ]
        .into_iter()
        .flatten()
        {
            if let Ok(d) = file_digest(p) {
                self.input_digests.insert(p.display().to_string(), d);
            }
        }
    }

    pub fn save(&mut self, path: &Path) -> Result<()> {
        self.finished_unix = unix_now();
        write_json(path, self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

/// Reads a JSON-lines documents file as is, without ingest normalization.
pub fn read_jsonl_documents(path: &Path) -> Result<Vec<Document>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        docs.push(serde_json::from_str(&line).map_err(|e| Error::Malformed {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(docs)
}

fn required<'c>(path: &'c Option<PathBuf>, what: &str) -> Result<&'c Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidParameter(format!("no {what} file configured")))
}

/// Inputs, settings and outputs of one stage, for digest-based skipping.
struct StagePlan {
    name: &'static str,
    inputs: Vec<PathBuf>,
    settings: serde_json::Value,
    outputs: Vec<&'static str>,
}

fn stage_plan(cfg: &Config, name: &'static str) -> Result<StagePlan> {
    use serde_json::json;
    let out = |n: &str| cfg.out(n);
    let plan = match name {
        "ingest" => StagePlan {
            name,
            inputs: vec![required(&cfg.docs, "documents")?.to_path_buf()],
            settings: json!({ "strict": cfg.strict, "min_noncite": cfg.min_noncite }),
            outputs: vec![a::CORPUS, a::INGEST_REPORT],
        },
        "graph" => StagePlan {
            name,
            inputs: vec![out(a::CORPUS)],
            settings: json!({}),
            outputs: vec![a::GRAPH, a::GRAPH_STATS],
        },
        "cluster" => StagePlan {
            name,
            inputs: vec![out(a::GRAPH)],
            settings: json!({
                "resolution": cfg.resolution, "seed": cfg.seed,
                "min_size": cfg.min_size, "max_iterations": cfg.max_iterations,
            }),
            outputs: vec![a::PARTITION, a::CLUSTER_REPORT],
        },
        "profiles" => {
            let mut inputs = vec![out(a::CORPUS), out(a::PARTITION)];
            inputs.extend(cfg.stopwords.clone());
            StagePlan {
                name,
                inputs,
                settings: json!({ "bm25": cfg.bm25_params(), "top_terms": cfg.top_terms }),
                outputs: vec![a::PROFILES, a::PROFILE_REPORT, a::SIMILARITIES, a::SELF_ASSIGNMENT],
            }
        }
        "assign-docs" => {
            let mut inputs = vec![out(a::CORPUS), out(a::PARTITION), out(a::PROFILES)];
            inputs.extend(cfg.new_docs.clone());
            inputs.extend(cfg.stopwords.clone());
            StagePlan {
                name,
                inputs,
                settings: json!({ "doc_min_refs": cfg.doc_min_refs }),
                outputs: vec![a::DOC_ASSIGNMENTS, a::EXTENDED_PARTITION],
            }
        }
        "assign-grants" => {
            let mut inputs = vec![
                required(&cfg.grants, "grants")?.to_path_buf(),
                out(a::CORPUS),
                out(a::EXTENDED_PARTITION),
                out(a::PROFILES),
                out(a::DOC_ASSIGNMENTS),
            ];
            inputs.extend(cfg.new_docs.clone());
            inputs.extend(cfg.stopwords.clone());
            StagePlan {
                name,
                inputs,
                settings: json!({
                    "strict": cfg.strict, "grant_threshold": cfg.grant_threshold, "grant_top": cfg.grant_top,
                }),
                outputs: vec![a::ASSIGNMENTS, a::FUNDING, a::FUNDERS, a::GRANT_REPORT],
            }
        }
        "prominence" => {
            let mut inputs = vec![out(a::CORPUS), out(a::EXTENDED_PARTITION)];
            inputs.extend(cfg.new_docs.clone());
            inputs.push(required(&cfg.views, "views")?.to_path_buf());
            inputs.push(required(&cfg.journal_metrics, "journal metrics")?.to_path_buf());
            let mut outputs = vec![a::PROMINENCE, a::TOPIC_STATS];
            if cfg.derive_weights {
                outputs.push(a::FACTOR_ANALYSIS);
            }
            StagePlan {
                name,
                inputs,
                settings: json!({
                    "prominence_year": cfg.prominence_year, "country": cfg.country,
                    "weights": cfg.weights, "derive_weights": cfg.derive_weights,
                }),
                outputs,
            }
        }
        "analyze" => StagePlan {
            name,
            inputs: vec![out(a::FUNDING), out(a::PROMINENCE), out(a::TOPIC_STATS)],
            settings: json!({ "early": cfg.early, "late": cfg.late, "bin_target": cfg.bin_target }),
            outputs: vec![a::STUDY_REPORT, a::CORRELATIONS, a::REGRESSIONS, a::BINS],
        },
        "layout" => {
            let mut inputs = vec![out(a::SIMILARITIES), out(a::CORPUS), out(a::EXTENDED_PARTITION)];
            inputs.extend(cfg.new_docs.clone());
            inputs.push(required(&cfg.field_map, "field map")?.to_path_buf());
            StagePlan {
                name,
                inputs,
                settings: json!({
                    "top_n": cfg.top_n, "seed": cfg.seed,
                    "layout_iterations": cfg.layout_iterations, "edge_cut": cfg.edge_cut,
                }),
                outputs: vec![a::MAP],
            }
        }
        other => return Err(Error::InvalidParameter(format!("unknown stage {other:?}"))),
    };
    Ok(plan)
}

fn stage_key(plan: &StagePlan) -> Result<String> {
    let mut h = Sha256::new();
    h.update(plan.name.as_bytes());
    h.update(VERSION.as_bytes());
    h.update(plan.settings.to_string().as_bytes());
    for input in &plan.inputs {
        h.update(input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default());
        h.update(file_digest(input)?.as_bytes());
    }
    Ok(hex::encode(h.finalize()))
}

/// Runs one stage of the pipeline against `cfg.out_dir`.
pub fn run_stage(cfg: &Config, stage: &str) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    match stage {
        "ingest" => stage_ingest(cfg),
        "graph" => stage_graph(cfg),
        "cluster" => stage_cluster(cfg),
        "profiles" => stage_profiles(cfg),
        "assign-docs" => stage_assign_docs(cfg),
        "assign-grants" => stage_assign_grants(cfg),
        "prominence" => stage_prominence(cfg),
        "analyze" => stage_analyze(cfg),
        "layout" => stage_layout(cfg),
        other => Err(Error::InvalidParameter(format!("unknown stage {other:?}"))),
    }
}

fn stage_ingest(cfg: &Config) -> Result<()> {
    let (docs, report) = corpus::load_corpus(required(&cfg.docs, "documents")?, &cfg.ingest_options())?;
    log::info!(
        "ingested {} documents ({} materialized)",
        report.documents,
        report.materialized_non_source
    );
    docs.save(&cfg.out(a::CORPUS))?;
    write_json(&cfg.out(a::INGEST_REPORT), &report)
}

/// Re-reads the normalized corpus; it is already clean, so nothing is dropped.
fn load_normalized(cfg: &Config) -> Result<DocumentSet> {
    DocumentSet::new(read_jsonl_documents(&cfg.out(a::CORPUS))?)
}

/// The normalized corpus plus any configured new documents.
fn load_all_documents(cfg: &Config) -> Result<DocumentSet> {
    let mut docs = read_jsonl_documents(&cfg.out(a::CORPUS))?;
    if let Some(path) = &cfg.new_docs {
        let known: std::collections::BTreeSet<String> = docs.iter().map(|d| d.doc_id.clone()).collect();
        docs.extend(read_jsonl_documents(path)?.into_iter().filter(|d| !known.contains(&d.doc_id)));
    }
    DocumentSet::new(docs)
}

fn stage_graph(cfg: &Config) -> Result<()> {
    let docs = load_normalized(cfg)?;
    let g = citegraph::build_graph(&docs);
    g.save(&cfg.out(a::GRAPH))?;
    write_json(&cfg.out(a::GRAPH_STATS), &citegraph::graph_stats(&g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub resolution: f64,
    pub seed: u64,
    pub quality: f64,
    pub topics_before_min_size: usize,
    pub min_size: usize,
    pub min_size_report: clusterer::MinSizeReport,
}

fn stage_cluster(cfg: &Config) -> Result<()> {
    let g = CitationGraph::load(&cfg.out(a::GRAPH))?;
    let p = clusterer::cluster(&g, cfg.resolution, cfg.seed, cfg.max_iterations)?;
    let (kept, report) = clusterer::apply_min_size(&p, cfg.min_size)?;
    kept.save(&cfg.out(a::PARTITION))?;
    write_json(
        &cfg.out(a::CLUSTER_REPORT),
        &ClusterReport {
            resolution: cfg.resolution,
            seed: cfg.seed,
            quality: p.quality.unwrap_or(f64::NAN),
            topics_before_min_size: p.topic_count(),
            min_size: cfg.min_size,
            min_size_report: report,
        },
    )
}

fn stage_profiles(cfg: &Config) -> Result<()> {
    let docs = load_normalized(cfg)?;
    let p = Partition::load(&cfg.out(a::PARTITION))?;
    let tokenizer = cfg.tokenizer()?;
    let (idx, report) = bm25::build_profiles(&docs, &p, &tokenizer, cfg.bm25_params(), cfg.top_terms);
    idx.save(&cfg.out(a::PROFILES))?;
    write_json(&cfg.out(a::PROFILE_REPORT), &report)?;
    maplayout::save_similarities(&cfg.out(a::SIMILARITIES), &idx.topic_topic_similarity())?;
    let table = bm25::self_assignment_experiment(&docs, &p, &idx, &tokenizer, bm25::DEFAULT_BAND_EDGES);
    let mut w = csv::Writer::from_path(cfg.out(a::SELF_ASSIGNMENT))?;
    w.write_record(["lower", "upper", "documents", "correct", "accuracy"])?;
    for b in &table.bands {
        w.write_record([
            b.lower.to_string(),
            b.upper.map(|u| u.to_string()).unwrap_or_default(),
            b.documents.to_string(),
            b.correct.to_string(),
            b.accuracy.map(|x| x.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(cfg.out(a::SELF_ASSIGNMENT), e))
}

fn stage_assign_docs(cfg: &Config) -> Result<()> {
    let docs = load_all_documents(cfg)?;
    let p = Partition::load(&cfg.out(a::PARTITION))?;
    let idx = ProfileIndex::load(&cfg.out(a::PROFILES))?;
    let opts = DocAssignOptions {
        min_refs: cfg.doc_min_refs,
    };
    let (assignments, extended) = assigner::assign_documents(&docs, &p, &idx, &cfg.tokenizer()?, &opts)?;
    assigner::save_assignments(&cfg.out(a::DOC_ASSIGNMENTS), &assignments)?;
    extended.save(&cfg.out(a::EXTENDED_PARTITION))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrantStageReport {
    pub ingest: corpus::GrantReport,
    pub total: f64,
    pub assigned: f64,
    pub unassigned: f64,
    pub assigned_grants: usize,
}

fn stage_assign_grants(cfg: &Config) -> Result<()> {
    let (grants, ingest) = corpus::load_grants(required(&cfg.grants, "grants")?, cfg.strict)?;
    let docs = load_all_documents(cfg)?;
    let p = Partition::load(&cfg.out(a::EXTENDED_PARTITION))?;
    let idx = ProfileIndex::load(&cfg.out(a::PROFILES))?;
    let opts = GrantAssignOptions {
        threshold: cfg.grant_threshold,
        top_m: cfg.grant_top,
    };
    let grant_rows = assigner::assign_grants(&grants, &docs, &p, &idx, &cfg.tokenizer()?, &opts);
    let funding = assigner::allocate_funding(&grants, &grant_rows);
    let mut rows: Vec<Assignment> = assigner::load_assignments(&cfg.out(a::DOC_ASSIGNMENTS))?;
    let assigned_grants = grant_rows.iter().filter(|r| !r.allocations.is_empty()).count();
    rows.extend(grant_rows.iter().cloned());
    assigner::save_assignments(&cfg.out(a::ASSIGNMENTS), &rows)?;
    funding.save(&cfg.out(a::FUNDING))?;
    write_json(&cfg.out(a::FUNDERS), &assigner::funder_summary(&grants, &grant_rows))?;
    write_json(
        &cfg.out(a::GRANT_REPORT),
        &GrantStageReport {
            ingest,
            total: funding.total,
            assigned: funding.assigned_total(),
            unassigned: funding.unassigned_total(),
            assigned_grants,
        },
    )
}

fn stage_prominence(cfg: &Config) -> Result<()> {
    let docs = load_all_documents(cfg)?;
    let p = Partition::load(&cfg.out(a::EXTENDED_PARTITION))?;
    let views = UsageTable::load(required(&cfg.views, "views")?)?;
    let metrics = JournalMetrics::load(required(&cfg.journal_metrics, "journal metrics")?)?;
    let stats = prominence::compute_stats(&docs, &p, &views, &metrics, cfg.prominence_year, &cfg.country);
    let weights = if cfg.derive_weights {
        let rows: Vec<Vec<f64>> = prominence::candidate_matrix(&stats).iter().map(|r| r.to_vec()).collect();
        let fa = prominence::derive_weights(&rows, &prominence::CANDIDATE_NAMES, &[0, 1, 2])?;
        write_json(&cfg.out(a::FACTOR_ANALYSIS), &fa)?;
        fa.weights()
            .ok_or_else(|| Error::InvalidParameter("factor analysis gave no composite weights".into()))?
    } else {
        cfg.prominence_weights()?
    };
    let scores = prominence::prominence(&stats, &weights)?;
    prominence::save_prominence(&cfg.out(a::PROMINENCE), &stats, &scores)?;
    write_json(&cfg.out(a::TOPIC_STATS), &stats)
}

/// Assembles the study inputs and the binning table from stage artifacts.
pub fn study_inputs(
    funding: &FundingTable,
    prominence_rows: &[prominence::ProminenceRow],
    stats: &[TopicYearStats],
    early: RangeInclusive<i32>,
    late: RangeInclusive<i32>,
) -> (StudyInput, Vec<BinInput>) {
    let early_totals = funding.period_totals(early);
    let late_totals = funding.period_totals(late.clone());
    let late_years = f64::from(late.end() - late.start() + 1);
    let stats_by_topic: BTreeMap<TopicId, &TopicYearStats> = stats.iter().map(|s| (s.topic_id, s)).collect();
    let mut input = StudyInput::default();
    let mut bins = Vec::new();
    for row in prominence_rows {
        let Some(s) = stats_by_topic.get(&row.topic_id) else {
            continue;
        };
        let late_total = late_totals.get(&row.topic_id).copied().unwrap_or(0.0);
        input.topics.push(row.topic_id);
        input.early_funding.push(early_totals.get(&row.topic_id).copied().unwrap_or(0.0));
        input.late_funding.push(late_total);
        input.prominence.push(row.p);
        input.vitality.push(s.vitality);
        input.log_authors.push(s.authors_per_paper.ln_1p());
        bins.push(BinInput {
            topic_id: row.topic_id,
            prominence: row.p,
            authors: s.country_authors_frac,
            funding: late_total / late_years,
        });
    }
    (input, bins)
}

fn stage_analyze(cfg: &Config) -> Result<()> {
    let funding = FundingTable::load(&cfg.out(a::FUNDING))?;
    let rows = prominence::load_prominence(&cfg.out(a::PROMINENCE))?;
    let stats: Vec<TopicYearStats> = read_json(&cfg.out(a::TOPIC_STATS))?;
    let (input, bin_items) = study_inputs(&funding, &rows, &stats, cfg.early_years()?, cfg.late_years()?);
    let report = analytics::funding_prediction_study(&input)?;
    let bins = analytics::bin_by_prominence(&bin_items, cfg.bin_target)?;
    write_json(&cfg.out(a::STUDY_REPORT), &report)?;
    analytics::save_correlations(&cfg.out(a::CORRELATIONS), &report.variables, &report.correlations)?;
    analytics::save_regressions(&cfg.out(a::REGRESSIONS), &report.models)?;
    analytics::save_bins(&cfg.out(a::BINS), &bins)
}

/// Publication counts of each topic's source documents.
pub fn topic_sizes(docs: &DocumentSet, p: &Partition) -> BTreeMap<TopicId, usize> {
    let mut sizes: BTreeMap<TopicId, usize> = p.topics().map(|t| (t, 0)).collect();
    for d in docs.iter().filter(|d| d.is_source) {
        if let Some(t) = p.topic_of(&d.doc_id) {
            *sizes.entry(t).or_insert(0) += 1;
        }
    }
    sizes
}

fn stage_layout(cfg: &Config) -> Result<()> {
    let sims = maplayout::load_similarities(&cfg.out(a::SIMILARITIES))?;
    let docs = load_all_documents(cfg)?;
    let p = Partition::load(&cfg.out(a::EXTENDED_PARTITION))?;
    let field_map = FieldMap::load(required(&cfg.field_map, "field map")?)?;
    let graph = maplayout::build_similarity_graph(&sims, p.topics(), cfg.top_n)?;
    let layout = maplayout::layout(
        &graph,
        &LayoutOptions {
            seed: cfg.seed,
            iterations: cfg.layout_iterations,
            edge_cut: cfg.edge_cut,
        },
    )?;
    let fields = maplayout::assign_fields(&docs, &p, &field_map);
    let nodes = maplayout::map_nodes(&layout, &fields, &topic_sizes(&docs, &p));
    maplayout::save_map(&cfg.out(a::MAP), &nodes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    pub manifest: RunManifest,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
}

/// Runs `stages` in order, skipping those whose inputs and settings are
/// unchanged since the last run. Writes the manifest even when a stage fails.
pub fn run_stages(cfg: &Config, command: &str, stages: &[&'static str]) -> Result<PipelineOutcome> {
    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    let mut manifest = RunManifest::new(command, cfg);
    manifest.digest_inputs(cfg);
    let keys_path = cfg.out(a::STAGE_KEYS);
    let mut keys: BTreeMap<String, String> = read_json(&keys_path).unwrap_or_default();
    let mut executed = Vec::new();
    let mut skipped = Vec::new();

    for &stage in stages {
        let attempt = (|| -> Result<StageRecord> {
            let plan = stage_plan(cfg, stage)?;
            let key = stage_key(&plan)?;
            let fresh = keys.get(stage) == Some(&key) && plan.outputs.iter().all(|o| cfg.out(o).exists());
            if !fresh {
                run_stage(cfg, stage)?;
            }
            Ok(StageRecord {
                stage: stage.to_string(),
                key,
                skipped: fresh,
                outputs: plan.outputs.iter().map(|s| s.to_string()).collect(),
            })
        })();
        match attempt {
            Ok(record) => {
                if record.skipped {
                    log::info!("stage {stage}: inputs unchanged, skipped");
                    skipped.push(stage.to_string());
                } else {
                    log::info!("stage {stage}: done");
                    executed.push(stage.to_string());
                }
                keys.insert(stage.to_string(), record.key.clone());
                manifest.stages.push(record);
            }
            Err(e) => {
                keys.remove(stage);
                write_json(&keys_path, &keys)?;
                let err = Error::Stage {
                    stage: stage.to_string(),
                    inner: Box::new(e),
                };
                manifest.error = Some(err.to_string());
                manifest.save(&cfg.out(&manifest_name(command)))?;
                return Err(err);
            }
        }
    }
    write_json(&keys_path, &keys)?;
    manifest.save(&cfg.out(&manifest_name(command)))?;
    Ok(PipelineOutcome {
        manifest,
        executed,
        skipped,
    })
}

/// `manifest.json` for full runs, `manifest-<command>.json` otherwise.
pub fn manifest_name(command: &str) -> String {
    if command == "pipeline" {
        a::MANIFEST.to_string()
    } else {
        format!("manifest-{command}.json")
    }
}

pub fn run_pipeline(cfg: &Config) -> Result<PipelineOutcome> {
    run_stages(cfg, "pipeline", &STAGES)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicReport {
    pub topic_id: TopicId,
    pub size: usize,
    pub top_terms: Vec<(String, u64)>,
    pub top_journals: Vec<(String, usize)>,
    pub publications_by_year: BTreeMap<i32, usize>,
    pub prominence: Option<f64>,
    pub percentile: Option<f64>,
    pub funding_by_year: BTreeMap<i32, f64>,
}

/// Summary of one topic from the artifacts in `out_dir`. Prominence and
/// funding are filled in when their artifacts exist.
pub fn topic_report(out_dir: &Path, topic: i64, years: Option<RangeInclusive<i32>>) -> Result<TopicReport> {
    if topic == clusterer::RESIDUAL_LABEL {
        return Err(Error::ResidualTopic(topic.to_string()));
    }
    let partition_path = [a::EXTENDED_PARTITION, a::PARTITION]
        .iter()
        .map(|n| out_dir.join(n))
        .find(|p| p.exists())
        .unwrap_or_else(|| out_dir.join(a::PARTITION));
    let p = Partition::load(&partition_path)?;
    let topic_id = TopicId::try_from(topic)
        .ok()
        .filter(|&t| (t as usize) < p.topic_count())
        .ok_or_else(|| Error::UnknownTopic(topic.to_string()))?;
    let idx = ProfileIndex::load(&out_dir.join(a::PROFILES))?;
    let docs = DocumentSet::new(read_jsonl_documents(&out_dir.join(a::CORPUS))?)?;

    let mut journals: BTreeMap<String, usize> = BTreeMap::new();
    let mut by_year: BTreeMap<i32, usize> = BTreeMap::new();
    if let Some(range) = &years {
        for y in range.clone() {
            by_year.insert(y, 0);
        }
    }
    for d in docs.iter().filter(|d| d.is_source && p.topic_of(&d.doc_id) == Some(topic_id)) {
        if let Some(j) = &d.journal_id {
            *journals.entry(j.clone()).or_insert(0) += 1;
        }
        if years.as_ref().is_none_or(|r| r.contains(&d.year)) {
            *by_year.entry(d.year).or_insert(0) += 1;
        }
    }
    if years.is_none() {
        if let (Some(&lo), Some(&hi)) = (by_year.keys().next(), by_year.keys().next_back()) {
            for y in lo..=hi {
                by_year.entry(y).or_insert(0);
            }
        }
    }
    let mut top_journals: Vec<(String, usize)> = journals.into_iter().collect();
    top_journals.sort_by(|x, y| y.1.cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
    top_journals.truncate(10);

    let (prominence, percentile) = match prominence::load_prominence(&out_dir.join(a::PROMINENCE)) {
        Ok(rows) => rows
            .iter()
            .find(|r| r.topic_id == topic_id)
            .map_or((None, None), |r| (Some(r.p), Some(r.percentile))),
        Err(_) => (None, None),
    };
    let funding_by_year = match FundingTable::load(&out_dir.join(a::FUNDING)) {
        Ok(table) => table
            .by_topic_year
            .iter()
            .filter(|((t, y), _)| *t == topic_id && years.as_ref().is_none_or(|r| r.contains(y)))
            .map(|(&(_, y), &amount)| (y, amount))
            .collect(),
        Err(_) => BTreeMap::new(),
    };

    Ok(TopicReport {
        topic_id,
        size: p.topic_size(topic_id),
        top_terms: idx
            .top_terms(topic_id, 20)
            .into_iter()
            .map(|(t, f)| (t.to_string(), f))
            .collect(),
        top_journals,
        publications_by_year: by_year,
        prominence,
        percentile,
        funding_by_year,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn year_ranges() {
        assert_eq!(parse_year_range("2008:2010").unwrap(), 2008..=2010);
        assert_eq!(parse_year_range("2010").unwrap(), 2010..=2010);
        assert!(parse_year_range("2011:2009").is_err());
        assert!(parse_year_range("soon").is_err());
    }

    #[test]
    fn config_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "docs = \"documents.jsonl\"\nresolution = 0.001\nout_dir = \"out\"\n").unwrap();
        let cfg = Config::load(&path).unwrap();
        assert_eq!(cfg.docs.unwrap(), dir.path().join("documents.jsonl"));
        assert_eq!(cfg.out_dir, dir.path().join("out"));
        assert_eq!(cfg.resolution, 0.001);
        assert_eq!(cfg.min_noncite, 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        std::fs::write(&path, "resolutoin = 0.1\n").unwrap();
        let err = Config::load(&path).unwrap_err();
        assert!(err.is_input_error());
    }
}
