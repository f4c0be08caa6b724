use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Map research topics from a citation corpus, score their prominence and
/// relate them to grant funding.
#[derive(Debug, Parser)]
#[command(name = "topicforge", version, about)]
pub struct Cli {
    /// Key-value TOML configuration; command-line flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Where to write the run manifest (default: next to the command's outputs).
    #[arg(long, global = true)]
    pub manifest: Option<PathBuf>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate and normalize the input tables.
    Ingest(IngestArgs),
    /// Build the citation graph, or export it.
    Graph(GraphArgs),
    /// Cluster the citation graph into topics.
    Cluster(ClusterArgs),
    /// Build per-topic BM25 word profiles, or export them.
    Profiles(ProfilesArgs),
    /// Score free text against the topic profiles.
    Score(ScoreArgs),
    /// Assign documents outside the partition to topics.
    AssignDocs(AssignDocsArgs),
    /// Distribute grants over eligible topics.
    AssignGrants(AssignGrantsArgs),
    /// Compute yearly topic indicators and prominence.
    Prominence(ProminenceArgs),
    /// Correlations, funding regressions and prominence bins.
    Analyze(AnalyzeArgs),
    /// Lay out the topic-similarity map.
    Layout(LayoutArgs),
    /// Summarize one topic from pipeline artifacts.
    Report(ReportArgs),
    /// Run every stage in order, skipping unchanged ones.
    Pipeline(PipelineArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub docs: Option<PathBuf>,
    #[arg(long)]
    pub grants: Option<PathBuf>,
    #[arg(long)]
    pub journal_metrics: Option<PathBuf>,
    #[arg(long)]
    pub field_map: Option<PathBuf>,
    #[arg(long)]
    pub views: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Fail on the first malformed record instead of skipping it.
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub min_noncite: Option<usize>,
}

#[derive(Debug, Args)]
pub struct GraphArgs {
    #[command(subcommand)]
    pub action: Option<GraphAction>,
    /// Normalized corpus (corpus.jsonl) or raw documents file.
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum GraphAction {
    /// Write the graph as `citing,cited,a_ij` rows.
    Export {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value_t = GraphFormat::Edgelist)]
        format: GraphFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GraphFormat {
    Edgelist,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub min_size: Option<usize>,
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Partition CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfilesArgs {
    #[command(subcommand)]
    pub action: Option<ProfilesAction>,
    #[arg(long)]
    pub docs: Option<PathBuf>,
    #[arg(long)]
    pub partition: Option<PathBuf>,
    /// Profile index to write.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Keep only each topic's most frequent terms.
    #[arg(long)]
    pub top_terms: Option<usize>,
    #[arg(long)]
    pub k1: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum ProfilesAction {
    /// Write `topic_id,term,freq` rows.
    Export {
        #[arg(long)]
        index: PathBuf,
        #[arg(long, value_enum, default_value_t = ProfileFormat::Csv)]
        format: ProfileFormat,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ProfileFormat {
    Csv,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub text: String,
    #[arg(long, default_value_t = 5)]
    pub top_k: usize,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignDocsArgs {
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    /// Assignments CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Extended partition to write (default: partition_extended.csv beside --out).
    #[arg(long)]
    pub partition_out: Option<PathBuf>,
    #[arg(long)]
    pub min_refs: Option<usize>,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AssignGrantsArgs {
    #[arg(long)]
    pub grants: Option<PathBuf>,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub top: Option<usize>,
    /// Eligibility country for every grant (default: each grant's funder country).
    #[arg(long)]
    pub country: Option<String>,
    /// Assignments CSV to write; funding_by_topic.csv and funder_summary.json go beside it.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub strict: bool,
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProminenceArgs {
    #[arg(long)]
    pub year: Option<i32>,
    /// Composite weights for citations, views and CiteScore.
    #[arg(long, conflicts_with = "derive_weights")]
    pub weights: Option<String>,
    /// Derive the weights from a factor analysis of the candidate indicators.
    #[arg(long)]
    pub derive_weights: bool,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub views: Option<PathBuf>,
    #[arg(long)]
    pub journal_metrics: Option<PathBuf>,
    /// Country whose fractional author counts are reported.
    #[arg(long)]
    pub country: Option<String>,
    /// prominence.csv to write; topic_stats.json goes beside it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub early: Option<String>,
    #[arg(long)]
    pub late: Option<String>,
    #[arg(long)]
    pub prominence_year: Option<i32>,
    #[arg(long)]
    pub bin_target: Option<f64>,
    #[arg(long)]
    pub funding: PathBuf,
    #[arg(long)]
    pub prominence: PathBuf,
    /// topic_stats.json written by the prominence command.
    #[arg(long)]
    pub stats: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct LayoutArgs {
    #[arg(long)]
    pub sims: PathBuf,
    #[arg(long)]
    pub top_n: Option<usize>,
    #[arg(long)]
    pub iters: Option<usize>,
    #[arg(long)]
    pub edge_cut: Option<f64>,
    #[arg(long)]
    pub docs: PathBuf,
    #[arg(long)]
    pub partition: PathBuf,
    #[arg(long)]
    pub field_map: Option<PathBuf>,
    /// map.csv to write.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Pipeline output directory.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    pub topic: i64,
    /// Restrict the yearly series, e.g. 2008:2013.
    #[arg(long)]
    pub years: Option<String>,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Output directory (overrides the configured one).
    #[arg(long)]
    pub out: Option<PathBuf>,
}
