mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use topicforge_core::analytics;
use topicforge_core::assigner::{self, DocAssignOptions, FundingTable, GrantAssignOptions};
use topicforge_core::bm25::{self, ProfileIndex};
use topicforge_core::citegraph::{self, CitationGraph};
use topicforge_core::clusterer::{self, Partition};
use topicforge_core::corpus::{self, DocumentSet, FieldMap, GrantSet, JournalMetrics, UsageTable};
use topicforge_core::maplayout::{self, LayoutOptions};
use topicforge_core::pipeline::{self, artifacts, Config, RunManifest};
use topicforge_core::prominence::{self, TopicYearStats};
use topicforge_core::Error;

use crate::args::{Cli, Command, GraphAction, ProfilesAction};

/// Prints to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage mistakes are input errors
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 1 for problems with the inputs, 2 when a stage fails on valid input.
fn exit_code(e: &anyhow::Error) -> u8 {
    e.chain()
        .find_map(|cause| cause.downcast_ref::<Error>())
        .map_or(2, |core| if core.is_input_error() { 1 } else { 2 })
}

fn need<'a>(path: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    path.as_deref()
        .ok_or_else(|| Error::InvalidParameter(format!("{flag} is required (flag or config)")).into())
}

fn beside(path: &Path, name: &str) -> PathBuf {
    path.parent().unwrap_or(Path::new(".")).join(name)
}

fn load_docs(path: &Path) -> Result<DocumentSet> {
    Ok(DocumentSet::new(pipeline::read_jsonl_documents(path)?)?)
}

/// What a command read and where its manifest belongs.
struct Done {
    inputs: Vec<PathBuf>,
    out_dir: PathBuf,
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(threads) = cli.threads.or(cfg.threads) {
        cfg.threads = Some(threads);
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }

    let name = command_name(&cli.command);
    let done = match cli.command {
        Command::Pipeline(args) => {
            if let Some(out) = args.out {
                cfg.out_dir = out;
            }
            let outcome = pipeline::run_pipeline(&cfg)?;
            say!(
                "pipeline finished: {} stages run, {} skipped; outputs in {}",
                outcome.executed.len(),
                outcome.skipped.len(),
                cfg.out_dir.display()
            );
            return Ok(());
        }
        Command::Ingest(args) => ingest(&mut cfg, args)?,
        Command::Graph(args) => graph(args)?,
        Command::Cluster(args) => cluster(&mut cfg, args)?,
        Command::Profiles(args) => profiles(&mut cfg, args)?,
        Command::Score(args) => score(&mut cfg, args)?,
        Command::AssignDocs(args) => assign_docs(&mut cfg, args)?,
        Command::AssignGrants(args) => assign_grants(&mut cfg, args)?,
        Command::Prominence(args) => prominence_cmd(&mut cfg, args)?,
        Command::Analyze(args) => analyze(&mut cfg, args)?,
        Command::Layout(args) => layout(&mut cfg, args)?,
        Command::Report(args) => report(args)?,
    };

    let mut manifest = RunManifest::new(name, &cfg);
    for input in &done.inputs {
        manifest
            .input_digests
            .insert(input.display().to_string(), pipeline::file_digest(input)?);
    }
    let path = cli
        .manifest
        .unwrap_or_else(|| done.out_dir.join(pipeline::manifest_name(name)));
    manifest.save(&path)?;
    Ok(())
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Ingest(_) => "ingest",
        Command::Graph(_) => "graph",
        Command::Cluster(_) => "cluster",
        Command::Profiles(_) => "profiles",
        Command::Score(_) => "score",
        Command::AssignDocs(_) => "assign-docs",
        Command::AssignGrants(_) => "assign-grants",
        Command::Prominence(_) => "prominence",
        Command::Analyze(_) => "analyze",
        Command::Layout(_) => "layout",
        Command::Report(_) => "report",
        Command::Pipeline(_) => "pipeline",
    }
}

fn ingest(cfg: &mut Config, args: args::IngestArgs) -> Result<Done> {
    macro_rules! take {
        ($($field:ident),*) => { $( if args.$field.is_some() { cfg.$field = args.$field.clone(); } )* };
    }
    take!(docs, grants, journal_metrics, field_map, views);
    if let Some(out) = args.out {
        cfg.out_dir = out;
    }
    cfg.strict |= args.strict;
    if let Some(m) = args.min_noncite {
        cfg.min_noncite = m;
    }
    let docs_path = need(&cfg.docs, "--docs")?.to_path_buf();
    pipeline::run_stage(cfg, "ingest")?;
    let report: corpus::IngestReport = pipeline::read_json(&cfg.out_dir.join(artifacts::INGEST_REPORT))?;
    say!(
        "documents: {} ({} source, {} materialized), {} malformed lines skipped",
        report.documents,
        report.source_documents,
        report.materialized_non_source,
        report.malformed.len()
    );

    let mut inputs = vec![docs_path];
    if let Some(path) = &cfg.grants {
        let (grants, report) = corpus::load_grants(path, cfg.strict)?;
        grants.save(&cfg.out_dir.join("grants.jsonl"))?;
        pipeline::write_json(&cfg.out_dir.join("grant_ingest_report.json"), &report)?;
        say!(
            "grants: {} ({} without text, {} rejected)",
            report.grants,
            report.text_insufficient,
            report.rejected.len()
        );
        inputs.push(path.clone());
    }
    if let Some(path) = &cfg.journal_metrics {
        say!("journal metrics: {} rows", JournalMetrics::load(path)?.len());
        inputs.push(path.clone());
    }
    if let Some(path) = &cfg.field_map {
        say!("field map: {} journals", FieldMap::load(path)?.len());
        inputs.push(path.clone());
    }
    if let Some(path) = &cfg.views {
        UsageTable::load(path)?;
        inputs.push(path.clone());
    }
    Ok(Done {
        inputs,
        out_dir: cfg.out_dir.clone(),
    })
}

fn graph(args: args::GraphArgs) -> Result<Done> {
    if let Some(GraphAction::Export { graph, format: _, out }) = args.action {
        CitationGraph::load(&graph)?.export_edgelist(&out)?;
        return Ok(Done {
            inputs: vec![graph],
            out_dir: beside(&out, ""),
        });
    }
    let corpus_path = need(&args.corpus, "--corpus")?;
    let out = need(&args.out, "--out")?;
    let g = citegraph::build_graph(&load_docs(corpus_path)?);
    g.save(out)?;
    let stats = citegraph::graph_stats(&g);
    pipeline::write_json(&beside(out, artifacts::GRAPH_STATS), &stats)?;
    say!(
        "graph: {} nodes, {} edges, {} components",
        stats.nodes, stats.edges, stats.components
    );
    Ok(Done {
        inputs: vec![corpus_path.to_path_buf()],
        out_dir: beside(out, ""),
    })
}

fn cluster(cfg: &mut Config, args: args::ClusterArgs) -> Result<Done> {
    if let Some(r) = args.resolution {
        cfg.resolution = r;
    }
    if let Some(m) = args.min_size {
        cfg.min_size = m;
    }
    if let Some(m) = args.max_iter {
        cfg.max_iterations = m;
    }
    let g = CitationGraph::load(&args.graph)?;
    let p = clusterer::cluster(&g, cfg.resolution, cfg.seed, cfg.max_iterations)?;
    let (kept, report) = clusterer::apply_min_size(&p, cfg.min_size)?;
    kept.save(&args.out)?;
    let summary = pipeline::ClusterReport {
        resolution: cfg.resolution,
        seed: cfg.seed,
        quality: p.quality.unwrap_or(f64::NAN),
        topics_before_min_size: p.topic_count(),
        min_size: cfg.min_size,
        min_size_report: report,
    };
    pipeline::write_json(&beside(&args.out, artifacts::CLUSTER_REPORT), &summary)?;
    say!(
        "{} topics (of {} clusters), {} residual documents ({:.2}%)",
        summary.min_size_report.topics_kept,
        summary.topics_before_min_size,
        summary.min_size_report.residual_docs,
        100.0 * summary.min_size_report.residual_fraction
    );
    Ok(Done {
        inputs: vec![args.graph],
        out_dir: beside(&args.out, ""),
    })
}

fn profiles(cfg: &mut Config, args: args::ProfilesArgs) -> Result<Done> {
    if let Some(ProfilesAction::Export { index, format: _, out }) = args.action {
        ProfileIndex::load(&index)?.export_csv(&out)?;
        return Ok(Done {
            inputs: vec![index],
            out_dir: beside(&out, ""),
        });
    }
    if args.stopwords.is_some() {
        cfg.stopwords = args.stopwords;
    }
    if args.top_terms.is_some() {
        cfg.top_terms = args.top_terms;
    }
    if let Some(k1) = args.k1 {
        cfg.bm25_k1 = k1;
    }
    if let Some(b) = args.b {
        cfg.bm25_b = b;
    }
    let docs_path = need(&args.docs, "--docs")?;
    let partition_path = need(&args.partition, "--partition")?;
    let out = need(&args.out, "--out")?;
    let docs = load_docs(docs_path)?;
    let p = Partition::load(partition_path)?;
    let (idx, report) = bm25::build_profiles(&docs, &p, &cfg.tokenizer()?, cfg.bm25_params(), cfg.top_terms);
    idx.save(out)?;
    maplayout::save_similarities(&beside(out, artifacts::SIMILARITIES), &idx.topic_topic_similarity())?;
    pipeline::write_json(&beside(out, artifacts::PROFILE_REPORT), &report)?;
    say!(
        "{} topic profiles, {} distinct terms, {} empty",
        report.topics,
        report.vocabulary,
        report.empty_topics.len()
    );
    let mut inputs = vec![docs_path.to_path_buf(), partition_path.to_path_buf()];
    inputs.extend(cfg.stopwords.clone());
    Ok(Done {
        inputs,
        out_dir: beside(out, ""),
    })
}

fn score(cfg: &mut Config, args: args::ScoreArgs) -> Result<Done> {
    if args.stopwords.is_some() {
        cfg.stopwords = args.stopwords;
    }
    let idx = ProfileIndex::load(&args.index)?;
    let tokens = cfg.tokenizer()?.tokenize(&args.text);
    say!("topic_id,score");
    for s in idx.score_text(&tokens, Some(args.top_k))? {
        say!("{},{}", s.topic_id, s.score);
    }
    let mut inputs = vec![args.index.clone()];
    inputs.extend(cfg.stopwords.clone());
    Ok(Done {
        inputs,
        out_dir: beside(&args.index, ""),
    })
}

fn assign_docs(cfg: &mut Config, args: args::AssignDocsArgs) -> Result<Done> {
    if let Some(m) = args.min_refs {
        cfg.doc_min_refs = m;
    }
    if args.stopwords.is_some() {
        cfg.stopwords = args.stopwords;
    }
    let docs = load_docs(&args.docs)?;
    let p = Partition::load(&args.partition)?;
    let idx = ProfileIndex::load(&args.index)?;
    let opts = DocAssignOptions {
        min_refs: cfg.doc_min_refs,
    };
    let (rows, extended) = assigner::assign_documents(&docs, &p, &idx, &cfg.tokenizer()?, &opts)?;
    assigner::save_assignments(&args.out, &rows)?;
    let partition_out = args
        .partition_out
        .unwrap_or_else(|| beside(&args.out, artifacts::EXTENDED_PARTITION));
    extended.save(&partition_out)?;
    let assigned = rows.iter().filter(|r| r.topic().is_some()).count();
    say!("{} documents assigned, {} left unassigned", assigned, rows.len() - assigned);
    Ok(Done {
        inputs: vec![args.docs, args.partition, args.index],
        out_dir: beside(&args.out, ""),
    })
}

fn assign_grants(cfg: &mut Config, args: args::AssignGrantsArgs) -> Result<Done> {
    if args.grants.is_some() {
        cfg.grants = args.grants;
    }
    if let Some(t) = args.threshold {
        cfg.grant_threshold = t;
    }
    if let Some(m) = args.top {
        cfg.grant_top = m;
    }
    if args.stopwords.is_some() {
        cfg.stopwords = args.stopwords;
    }
    cfg.strict |= args.strict;
    let grants_path = need(&cfg.grants, "--grants")?.to_path_buf();
    let (mut grants, _) = corpus::load_grants(&grants_path, cfg.strict)?;
    if let Some(country) = &args.country {
        cfg.country = country.clone();
        let mut rows = grants.as_slice().to_vec();
        for g in &mut rows {
            g.funder_country = country.clone();
        }
        grants = GrantSet::new(rows)?;
    }
    let docs = load_docs(&args.docs)?;
    let p = Partition::load(&args.partition)?;
    let idx = ProfileIndex::load(&args.index)?;
    let opts = GrantAssignOptions {
        threshold: cfg.grant_threshold,
        top_m: cfg.grant_top,
    };
    let rows = assigner::assign_grants(&grants, &docs, &p, &idx, &cfg.tokenizer()?, &opts);
    let funding = assigner::allocate_funding(&grants, &rows);
    assigner::save_assignments(&args.out, &rows)?;
    funding.save(&beside(&args.out, artifacts::FUNDING))?;
    pipeline::write_json(
        &beside(&args.out, artifacts::FUNDERS),
        &assigner::funder_summary(&grants, &rows),
    )?;
    say!(
        "funding: {:.4} assigned + {:.4} unassigned = {:.4} million",
        funding.assigned_total(),
        funding.unassigned_total(),
        funding.total
    );
    Ok(Done {
        inputs: vec![grants_path, args.docs, args.partition, args.index],
        out_dir: beside(&args.out, ""),
    })
}

fn prominence_cmd(cfg: &mut Config, args: args::ProminenceArgs) -> Result<Done> {
    if let Some(y) = args.year {
        cfg.prominence_year = y;
    }
    if let Some(w) = args.weights {
        cfg.weights = w;
        cfg.derive_weights = false;
    }
    cfg.derive_weights |= args.derive_weights;
    if args.views.is_some() {
        cfg.views = args.views;
    }
    if args.journal_metrics.is_some() {
        cfg.journal_metrics = args.journal_metrics;
    }
    if let Some(c) = args.country {
        cfg.country = c;
    }
    let views_path = need(&cfg.views, "--views")?.to_path_buf();
    let metrics_path = need(&cfg.journal_metrics, "--journal-metrics")?.to_path_buf();
    let docs = load_docs(&args.docs)?;
    let p = Partition::load(&args.partition)?;
    let views = UsageTable::load(&views_path)?;
    let metrics = JournalMetrics::load(&metrics_path)?;
    let stats = prominence::compute_stats(&docs, &p, &views, &metrics, cfg.prominence_year, &cfg.country);
    let weights = if cfg.derive_weights {
        let rows: Vec<Vec<f64>> = prominence::candidate_matrix(&stats).iter().map(|r| r.to_vec()).collect();
        let fa = prominence::derive_weights(&rows, &prominence::CANDIDATE_NAMES, &[0, 1, 2])?;
        pipeline::write_json(&beside(&args.out, artifacts::FACTOR_ANALYSIS), &fa)?;
        say!(
            "first-factor eigenvalue {:.3}; derived weights {:?}",
            fa.eigenvalues[0], fa.coefficients
        );
        let w = fa
            .weights()
            .ok_or_else(|| Error::InvalidParameter("factor analysis gave no composite weights".into()))?;
        cfg.weights = format!("{},{},{}", w.citations, w.views, w.citescore);
        w
    } else {
        cfg.prominence_weights()?
    };
    let scores = prominence::prominence(&stats, &weights)?;
    prominence::save_prominence(&args.out, &stats, &scores)?;
    pipeline::write_json(&beside(&args.out, artifacts::TOPIC_STATS), &stats)?;
    say!("prominence for {} topics in {}", scores.len(), cfg.prominence_year);
    Ok(Done {
        inputs: vec![args.docs, args.partition, views_path, metrics_path],
        out_dir: beside(&args.out, ""),
    })
}

fn analyze(cfg: &mut Config, args: args::AnalyzeArgs) -> Result<Done> {
    if let Some(e) = args.early {
        cfg.early = e;
    }
    if let Some(l) = args.late {
        cfg.late = l;
    }
    if let Some(y) = args.prominence_year {
        cfg.prominence_year = y;
    }
    if let Some(t) = args.bin_target {
        cfg.bin_target = t;
    }
    let funding = FundingTable::load(&args.funding)?;
    let rows: Vec<_> = prominence::load_prominence(&args.prominence)?
        .into_iter()
        .filter(|r| r.year == cfg.prominence_year)
        .collect();
    if rows.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "{} has no rows for {}",
            args.prominence.display(),
            cfg.prominence_year
        ))
        .into());
    }
    let stats: Vec<TopicYearStats> = pipeline::read_json(&args.stats)?;
    let (input, bin_items) = pipeline::study_inputs(&funding, &rows, &stats, cfg.early_years()?, cfg.late_years()?);
    let report = analytics::funding_prediction_study(&input)?;
    let bins = analytics::bin_by_prominence(&bin_items, cfg.bin_target)?;
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    pipeline::write_json(&args.out.join(artifacts::STUDY_REPORT), &report)?;
    analytics::save_correlations(&args.out.join(artifacts::CORRELATIONS), &report.variables, &report.correlations)?;
    analytics::save_regressions(&args.out.join(artifacts::REGRESSIONS), &report.models)?;
    analytics::save_bins(&args.out.join(artifacts::BINS), &bins)?;
    for m in &report.models {
        say!("{:<32} R² = {:.3}", m.name, m.result.r_squared);
    }
    say!("{} prominence bins", bins.len());
    Ok(Done {
        inputs: vec![args.funding, args.prominence, args.stats],
        out_dir: args.out,
    })
}

fn layout(cfg: &mut Config, args: args::LayoutArgs) -> Result<Done> {
    if let Some(n) = args.top_n {
        cfg.top_n = n;
    }
    if let Some(n) = args.iters {
        cfg.layout_iterations = n;
    }
    if let Some(c) = args.edge_cut {
        cfg.edge_cut = c;
    }
    if args.field_map.is_some() {
        cfg.field_map = args.field_map;
    }
    let sims = maplayout::load_similarities(&args.sims)?;
    let docs = load_docs(&args.docs)?;
    let p = Partition::load(&args.partition)?;
    let field_map = match &cfg.field_map {
        Some(path) => FieldMap::load(path)?,
        None => FieldMap::default(),
    };
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
    let nodes = maplayout::map_nodes(&layout, &fields, &pipeline::topic_sizes(&docs, &p));
    maplayout::save_map(&args.out, &nodes)?;
    say!("{} topics placed, {} similarity edges", nodes.len(), graph.edges.len());
    let mut inputs = vec![args.sims, args.docs, args.partition];
    inputs.extend(cfg.field_map.clone());
    Ok(Done {
        inputs,
        out_dir: beside(&args.out, ""),
    })
}

fn report(args: args::ReportArgs) -> Result<Done> {
    let years = args.years.as_deref().map(pipeline::parse_year_range).transpose()?;
    let report = pipeline::topic_report(&args.dir, args.topic, years)?;
    say!("{}", serde_json::to_string_pretty(&report)?);
    Ok(Done {
        inputs: Vec::new(),
        out_dir: args.dir,
    })
}
