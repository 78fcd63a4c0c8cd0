//! The full `fetch → similarity → select → regress → report` run and the
//! per-stage helpers the individual subcommands share.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use crossmap::report::ReportFormat;
use crossmap::{
    fetch_embeddings, hierarchical_fit, load_matrix_for, make_dataset, save_matrix, select_top_k,
    similarity_matrix, Corpus, CrosswalkReport, CrosswalkTable, EmbeddingConfig, EmbeddingMatrix,
    ForestConfig, ImportanceRanking, SimilarityKind, SimilarityMatrix,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, CorpusSection, EmbeddingSection, SimilaritySection};

pub const STANDARDS_CORPUS: &str = "standards.json";
pub const SPECIFICATIONS_CORPUS: &str = "specifications.json";
pub const STANDARDS_EMBEDDINGS: &str = "embeddings_standards.csv";
pub const SPECIFICATIONS_EMBEDDINGS: &str = "embeddings_specifications.csv";
pub const SIMILARITY: &str = "similarity.csv";
pub const RANKINGS: &str = "rankings.json";
pub const TABLE: &str = "table1.csv";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const REPORT_CSV: &str = "report.csv";
pub const MANIFEST: &str = "manifest.json";

/// Artifacts written by a run, in write order; all but the manifest are hashed into it.
pub const ARTIFACTS: &[&str] = &[
    STANDARDS_CORPUS,
    SPECIFICATIONS_CORPUS,
    STANDARDS_EMBEDDINGS,
    SPECIFICATIONS_EMBEDDINGS,
    SIMILARITY,
    RANKINGS,
    TABLE,
    REPORT_JSON,
    REPORT_MD,
    REPORT_CSV,
];

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Embeds one corpus, from a precomputed matrix when given, else via the service.
pub fn embed_corpus(
    corpus: &Corpus,
    service: &EmbeddingConfig,
    matrix: Option<&Path>,
) -> Result<EmbeddingMatrix> {
    let side = corpus.side();
    match matrix {
        Some(path) => load_matrix_for(path, corpus)
            .with_context(|| format!("loading {side} embeddings from {}", path.display())),
        None => fetch_embeddings(corpus, service)
            .with_context(|| format!("fetching {side} embeddings")),
    }
}

pub fn embed_both(
    cfg: &EmbeddingSection,
    std: &Corpus,
    spec: &Corpus,
) -> Result<(EmbeddingMatrix, EmbeddingMatrix)> {
    let a = embed_corpus(std, &cfg.service, cfg.standards_matrix.as_deref())?;
    let b = embed_corpus(spec, &cfg.service, cfg.specifications_matrix.as_deref())?;
    if a.n_dims() != b.n_dims() {
        bail!(
            "standards have {} embedding dimensions, specifications have {}",
            a.n_dims(),
            b.n_dims()
        );
    }
    for m in [&a, &b] {
        let off = m.off_center_columns();
        if !off.is_empty() {
            log::warn!(
                "{} embeddings: {} columns have |mean| above 0.01; cosine and Pearson may differ",
                m.side(),
                off.len()
            );
        }
    }
    Ok((a, b))
}

fn id_list(corpus: Option<&Corpus>, refs: &[usize]) -> Vec<String> {
    refs.iter()
        .map(|&r| {
            corpus
                .and_then(|c| c.statement(r).ok())
                .map_or_else(|| r.to_string(), |s| s.id.clone())
        })
        .collect()
}

/// Similarity matrix as CSV: a header row of specification ids and one row per
/// standard led by its id. Ref numbers stand in for ids when no corpus is given.
pub fn similarity_csv(sim: &SimilarityMatrix, std: Option<&Corpus>, spec: Option<&Corpus>) -> String {
    let mut out = String::from("standard");
    for id in id_list(spec, &sim.col_refs) {
        write!(out, ",{id}").unwrap();
    }
    out.push('\n');
    for (i, id) in id_list(std, &sim.row_refs).into_iter().enumerate() {
        out.push_str(&id);
        for v in sim.row(i) {
            write!(out, ",{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Reads [`similarity_csv`] output back, mapping ids to refs through the corpora.
pub fn parse_similarity_csv(
    text: &str,
    kind: SimilarityKind,
    std: &Corpus,
    spec: &Corpus,
) -> Result<SimilarityMatrix> {
    let ref_of = |c: &Corpus, id: &str| -> Result<usize> {
        c.statements()
            .iter()
            .find(|s| s.id == id)
            .map(|s| s.ref_num)
            .or_else(|| id.parse().ok())
            .with_context(|| format!("unknown {} id `{id}`", c.side()))
    };
    let mut lines = text.lines();
    let header = lines.next().context("similarity CSV is empty")?;
    let col_refs = header
        .split(',')
        .skip(1)
        .map(|id| ref_of(spec, id))
        .collect::<Result<Vec<_>>>()?;
    let mut row_refs = Vec::new();
    let mut values = Vec::new();
    for (n, line) in lines.enumerate() {
        let mut cells = line.split(',');
        row_refs.push(ref_of(std, cells.next().unwrap_or(""))?);
        let row: Vec<f64> = cells
            .map(|c| c.parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("similarity CSV line {}", n + 2))?;
        if row.len() != col_refs.len() {
            bail!("similarity CSV line {} has {} values, expected {}", n + 2, row.len(), col_refs.len());
        }
        values.extend(row);
    }
    Ok(SimilarityMatrix {
        kind,
        row_refs,
        col_refs,
        values,
    })
}

/// Ranks predictors for each standard ref in order.
pub fn select_all(
    std: &EmbeddingMatrix,
    spec: &EmbeddingMatrix,
    refs: &[usize],
    cfg: &ForestConfig,
) -> Result<Vec<ImportanceRanking>> {
    refs.iter()
        .map(|&r| {
            log::info!("select: standard ref {r}");
            let data = make_dataset(std, spec, r)?;
            select_top_k(&data, cfg).map_err(anyhow::Error::from)
        }
        .with_context(|| format!("stage `select`, standard ref {r}")))
        .collect()
}

pub fn regress_all(
    std: &EmbeddingMatrix,
    spec: &EmbeddingMatrix,
    rankings: &[ImportanceRanking],
) -> Result<CrosswalkTable> {
    let results = rankings
        .iter()
        .map(|rk| {
            let data = make_dataset(std, spec, rk.target_ref)?;
            hierarchical_fit(&data, rk).map_err(anyhow::Error::from)
        }
        .with_context(|| format!("stage `regress`, standard ref {}", rk.target_ref)))
        .collect::<Result<Vec<_>>>()?;
    Ok(CrosswalkTable::from_results(results))
}

pub fn build_report(table: CrosswalkTable, std: &Corpus, spec: &Corpus) -> Result<CrosswalkReport> {
    let table = table.with_ids(|r| std.statement(r).ok().map(|s| s.id.clone()));
    CrosswalkReport::build(table, std.scheme(), spec.scheme()).context("stage `report`")
}

pub fn rankings_json(rankings: &[ImportanceRanking]) -> String {
    let mut s = serde_json::to_string_pretty(rankings).expect("rankings serialize");
    s.push('\n');
    s
}

/// Configuration snapshot recorded in the manifest (output location excluded).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub corpus: CorpusSection,
    pub embedding: EmbeddingSection,
    pub similarity: SimilaritySection,
    pub forest: ForestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub config: ConfigSnapshot,
    /// Input label to content hash.
    pub inputs: BTreeMap<String, String>,
    /// Artifact file name to content hash.
    pub artifacts: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

/// Runs every stage for `cfg`, writing artifacts into `out` (or the configured
/// output directory). Returns the directory written.
pub fn run_pipeline(cfg: &Config, out: Option<&Path>) -> Result<PathBuf> {
    let started_at = Utc::now();
    let dir = out.map_or_else(|| cfg.output.dir.clone(), Path::to_path_buf);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;

    let (std_corpus, spec_corpus) = cfg.load_corpora().context("stage `corpus`")?;
    let mut inputs = BTreeMap::new();
    inputs.insert(
        "corpus.standards".into(),
        sha256_file(&cfg.corpus.standards)?,
    );
    inputs.insert(
        "corpus.specifications".into(),
        sha256_file(&cfg.corpus.specifications)?,
    );
    if let (Some(a), Some(b)) = (
        &cfg.embedding.standards_matrix,
        &cfg.embedding.specifications_matrix,
    ) {
        inputs.insert("embedding.standards_matrix".into(), sha256_file(a)?);
        inputs.insert("embedding.specifications_matrix".into(), sha256_file(b)?);
    }

    write(&dir, STANDARDS_CORPUS, &std_corpus.to_json_string())?;
    write(&dir, SPECIFICATIONS_CORPUS, &spec_corpus.to_json_string())?;

    let (std, spec) =
        embed_both(&cfg.embedding, &std_corpus, &spec_corpus).context("stage `fetch`")?;
    save_matrix(&std, dir.join(STANDARDS_EMBEDDINGS))?;
    save_matrix(&spec, dir.join(SPECIFICATIONS_EMBEDDINGS))?;

    let sim = similarity_matrix(&std, &spec, cfg.similarity.kind).context("stage `similarity`")?;
    write(
        &dir,
        SIMILARITY,
        &similarity_csv(&sim, Some(&std_corpus), Some(&spec_corpus)),
    )?;

    let rankings = select_all(&std, &spec, &std_corpus.refs(), &cfg.forest)?;
    write(&dir, RANKINGS, &rankings_json(&rankings))?;

    let table = regress_all(&std, &spec, &rankings)?;
    write(&dir, TABLE, &table.to_csv_string())?;

    let report = build_report(table, &std_corpus, &spec_corpus)?;
    write(&dir, REPORT_JSON, &report.render(ReportFormat::Json))?;
    write(&dir, REPORT_MD, &report.render(ReportFormat::Markdown))?;
    write(&dir, REPORT_CSV, &report.render(ReportFormat::Csv))?;

    let artifacts = ARTIFACTS
        .iter()
        .map(|name| Ok((name.to_string(), sha256_file(&dir.join(name))?)))
        .collect::<Result<_>>()?;
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").into(),
        started_at,
        finished_at: Utc::now(),
        config: ConfigSnapshot {
            corpus: cfg.corpus.clone(),
            embedding: cfg.embedding.clone(),
            similarity: cfg.similarity.clone(),
            forest: cfg.forest,
        },
        inputs,
        artifacts,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(&dir, MANIFEST, &text)?;
    Ok(dir)
}
