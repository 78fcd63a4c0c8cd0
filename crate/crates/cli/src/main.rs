use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use crossmap::report::ReportFormat;
use crossmap::{
    load_corpus, load_matrix, save_matrix, similarity_matrix, Corpus, CrosswalkTable,
    EmbeddingMatrix, ForestConfig, ImportanceRanking, Side, SimilarityKind,
};
use crossmap_cli::config::{load_standards, Config, StandardsDomains};
use crossmap_cli::pipeline::{
    build_report, embed_both, rankings_json, regress_all, run_pipeline, select_all,
    similarity_csv, SPECIFICATIONS_EMBEDDINGS, STANDARDS_EMBEDDINGS,
};
use crossmap_cli::server;

#[derive(Parser)]
#[command(name = "crossmap", version, about = "Crosswalk content standards onto item specifications")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed both corpora named in a config and write the matrices as CSV.
    Fetch {
        #[arg(long)]
        config: PathBuf,
        /// Directory for embeddings_standards.csv and embeddings_specifications.csv.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compute the standards-by-specifications similarity matrix.
    Similarity {
        #[command(flatten)]
        matrices: Matrices,
        #[arg(long, default_value = "cosine")]
        kind: SimilarityKind,
        /// Standards corpus JSON, for row ids.
        #[arg(long)]
        std_corpus: Option<PathBuf>,
        /// Specifications corpus JSON, for column ids.
        #[arg(long)]
        spec_corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rank specifications for each standard by forest permutation importance.
    Select {
        #[command(flatten)]
        matrices: Matrices,
        #[command(flatten)]
        forest: ForestArgs,
        /// Standard refs to process (default: all).
        #[arg(long, value_delimiter = ',')]
        refs: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the nested zero-intercept regressions over each ranking's selection.
    Regress {
        #[command(flatten)]
        matrices: Matrices,
        #[arg(long)]
        ranking: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate a crosswalk table by domain and write a report.
    Report {
        #[arg(long)]
        table: PathBuf,
        /// Standards corpus JSON supplying the standards-side domains.
        #[arg(long)]
        ccss_scheme: PathBuf,
        /// Specifications corpus JSON supplying the specification-side domains.
        #[arg(long)]
        naep_link: PathBuf,
        /// Assign standards to domains by id prefix instead of the corpus field.
        #[arg(long)]
        prefix_domains: bool,
        #[arg(long, default_value = "markdown")]
        format: ReportFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the review API over a run's artifacts.
    Serve {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Built review UI assets, served under /ui/.
        #[arg(long)]
        ui_dir: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Matrices {
    /// Standards embedding matrix (headerless CSV, rows = attributes).
    #[arg(long)]
    std: PathBuf,
    /// Specifications embedding matrix.
    #[arg(long)]
    spec: PathBuf,
}

impl Matrices {
    fn load(&self) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
        let a = load_matrix(&self.std, Side::Standard)
            .with_context(|| format!("loading {}", self.std.display()))?;
        let b = load_matrix(&self.spec, Side::Specification)
            .with_context(|| format!("loading {}", self.spec.display()))?;
        Ok((a, b))
    }
}

#[derive(Args)]
struct ForestArgs {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    min_leaf: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
}

impl ForestArgs {
    fn config(&self) -> ForestConfig {
        let d = ForestConfig::default();
        ForestConfig {
            n_trees: self.trees.unwrap_or(d.n_trees),
            mtry: self.mtry.unwrap_or(d.mtry),
            n_replications: self.reps.unwrap_or(d.n_replications),
            min_leaf: self.min_leaf.unwrap_or(d.min_leaf),
            seed: self.seed.unwrap_or(d.seed),
            top_k: self.top_k.unwrap_or(d.top_k),
        }
    }
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn optional_corpus(path: Option<&Path>, side: Side) -> Result<Option<Corpus>> {
    path.map(|p| load_corpus(p, side).with_context(|| format!("loading {}", p.display())))
        .transpose()
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match Cli::parse().command {
        Command::Fetch { config, out_dir } => {
            let cfg = Config::load(&config)?;
            let (std_corpus, spec_corpus) = cfg.load_corpora()?;
            let (std, spec) = embed_both(&cfg.embedding, &std_corpus, &spec_corpus)?;
            fs::create_dir_all(&out_dir)?;
            save_matrix(&std, out_dir.join(STANDARDS_EMBEDDINGS))?;
            save_matrix(&spec, out_dir.join(SPECIFICATIONS_EMBEDDINGS))?;
        }
        Command::Similarity {
            matrices,
            kind,
            std_corpus,
            spec_corpus,
            out,
        } => {
            let (std, spec) = matrices.load()?;
            let sim = similarity_matrix(&std, &spec, kind)?;
            let a = optional_corpus(std_corpus.as_deref(), Side::Standard)?;
            let b = optional_corpus(spec_corpus.as_deref(), Side::Specification)?;
            write(&out, &similarity_csv(&sim, a.as_ref(), b.as_ref()))?;
        }
        Command::Select {
            matrices,
            forest,
            refs,
            out,
        } => {
            let (std, spec) = matrices.load()?;
            let refs = if refs.is_empty() {
                std.refs().to_vec()
            } else {
                refs
            };
            let rankings = select_all(&std, &spec, &refs, &forest.config())?;
            write(&out, &rankings_json(&rankings))?;
        }
        Command::Regress {
            matrices,
            ranking,
            out,
        } => {
            let (std, spec) = matrices.load()?;
            let text = fs::read_to_string(&ranking)
                .with_context(|| format!("reading {}", ranking.display()))?;
            let rankings: Vec<ImportanceRanking> = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", ranking.display()))?;
            write(&out, &regress_all(&std, &spec, &rankings)?.to_csv_string())?;
        }
        Command::Report {
            table,
            ccss_scheme,
            naep_link,
            prefix_domains,
            format,
            out,
        } => {
            let domains = if prefix_domains {
                StandardsDomains::Prefix
            } else {
                StandardsDomains::Corpus
            };
            let std = load_standards(&ccss_scheme, domains)?;
            let spec = load_corpus(&naep_link, Side::Specification)
                .with_context(|| format!("loading {}", naep_link.display()))?;
            let table = CrosswalkTable::load_csv(&table)?;
            write(&out, &build_report(table, &std, &spec)?.render(format))?;
        }
        Command::Run { config, out } => {
            let cfg = Config::load(&config)?;
            let dir = run_pipeline(&cfg, out.as_deref())?;
            println!("artifacts written to {}", dir.display());
        }
        Command::Serve {
            artifacts,
            bind,
            ui_dir,
        } => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(server::serve(&artifacts, bind, ui_dir))?;
        }
    }
    Ok(())
}
