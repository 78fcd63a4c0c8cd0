//! Pipeline configuration file (TOML). Relative paths resolve against the
//! directory containing the config file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use crossmap::corpus::CCSS_G4_PREFIXES;
use crossmap::{load_corpus, Corpus, EmbeddingConfig, ForestConfig, Side, SimilarityKind};
use serde::{Deserialize, Serialize};

/// How standards are assigned to domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StandardsDomains {
    /// The domain field stored in the corpus file.
    #[default]
    Corpus,
    /// Derived from the statement id prefix (`4.OA`, `4.NBT`, ...).
    Prefix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSection {
    pub standards: PathBuf,
    pub specifications: PathBuf,
    #[serde(default)]
    pub standards_domains: StandardsDomains,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSection {
    #[serde(flatten)]
    pub service: EmbeddingConfig,
    /// Precomputed standards matrix; skips the embedding service when both are set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standards_matrix: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub specifications_matrix: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilaritySection {
    #[serde(default = "default_kind")]
    pub kind: SimilarityKind,
}

fn default_kind() -> SimilarityKind {
    SimilarityKind::Cosine
}

impl Default for SimilaritySection {
    fn default() -> Self {
        Self {
            kind: default_kind(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_output_dir")]
    pub dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("artifacts")
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: default_output_dir(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub corpus: CorpusSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub similarity: SimilaritySection,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default)]
    pub output: OutputSection,
}

impl Config {
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: Config = toml::from_str(text).context("parsing config")?;
        cfg.resolve(base);
        if cfg.embedding.standards_matrix.is_some() != cfg.embedding.specifications_matrix.is_some()
        {
            bail!("embedding.standards_matrix and embedding.specifications_matrix must be set together");
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml_str(&text, base).with_context(|| format!("in {}", path.display()))
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.corpus.standards);
        fix(&mut self.corpus.specifications);
        fix(&mut self.embedding.service.cache_dir);
        self.embedding.standards_matrix.as_mut().map(fix);
        self.embedding.specifications_matrix.as_mut().map(fix);
        fix(&mut self.output.dir);
    }

    pub fn offline(&self) -> bool {
        self.embedding.standards_matrix.is_some()
    }

    pub fn load_corpora(&self) -> Result<(Corpus, Corpus)> {
        let std = load_standards(&self.corpus.standards, self.corpus.standards_domains)?;
        let spec = load_corpus(&self.corpus.specifications, Side::Specification)
            .with_context(|| format!("loading {}", self.corpus.specifications.display()))?;
        Ok((std, spec))
    }
}

pub fn load_standards(path: &Path, domains: StandardsDomains) -> Result<Corpus> {
    let corpus = load_corpus(path, Side::Standard)
        .with_context(|| format!("loading {}", path.display()))?;
    Ok(match domains {
        StandardsDomains::Corpus => corpus,
        StandardsDomains::Prefix => corpus.with_prefix_domains(CCSS_G4_PREFIXES)?,
    })
}
