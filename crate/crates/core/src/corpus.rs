//! Statement corpora: loading, validation and the domain partition on each side.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Which corpus a statement belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Standard,
    Specification,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Standard => f.write_str("standard"),
            Side::Specification => f.write_str("specification"),
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("corpus declares side `{found}` but `{expected}` was requested")]
    SideMismatch { expected: Side, found: Side },
    #[error("duplicate ref {0}")]
    DuplicateRef(usize),
    #[error("refs must be contiguous 1..{count}; ref {missing} is missing")]
    NonContiguousRefs { count: usize, missing: usize },
    #[error("ref must be a positive integer (statement `{id}`)")]
    ZeroRef { id: String },
    #[error("statement ref {ref_num} names undeclared domain {domain}")]
    UnknownDomain { ref_num: usize, domain: usize },
    #[error("duplicate domain id {0}")]
    DuplicateDomain(usize),
    #[error("domain partition violated: {0}")]
    Partition(String),
    #[error("statement ref {0} has empty text")]
    EmptyText(usize),
    #[error("ref {ref_num} is out of range 1..={count}")]
    RefOutOfRange { ref_num: usize, count: usize },
    #[error("statement id `{0}` matches no domain prefix")]
    UnmatchedPrefix(String),
}

/// One standard or specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub ref_num: usize,
    pub side: Side,
    pub domain_id: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub id: usize,
    pub name: String,
    /// Ascending ref numbers of the statements in this domain.
    pub members: Vec<usize>,
}

/// Partition of one side's ref numbers into named domains.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainScheme {
    pub side: Side,
    pub domains: Vec<Domain>,
}

impl DomainScheme {
    /// Builds a scheme from an ordered `(id, name)` list and a per-ref domain
    /// assignment (`assignment[k]` is the domain of ref `k + 1`).
    pub fn from_assignment(
        side: Side,
        declared: &[(usize, String)],
        assignment: &[usize],
    ) -> Result<Self, CorpusError> {
        let mut domains: Vec<Domain> = Vec::with_capacity(declared.len());
        for (id, name) in declared {
            if domains.iter().any(|d| d.id == *id) {
                return Err(CorpusError::DuplicateDomain(*id));
            }
            domains.push(Domain {
                id: *id,
                name: name.clone(),
                members: Vec::new(),
            });
        }
        for (k, &domain) in assignment.iter().enumerate() {
            let r = k + 1;
            let d = domains
                .iter_mut()
                .find(|d| d.id == domain)
                .ok_or(CorpusError::UnknownDomain { ref_num: r, domain })?;
            d.members.push(r);
        }
        let scheme = Self { side, domains };
        scheme.check_partition(assignment.len())?;
        Ok(scheme)
    }

    /// Every ref in `1..=count` belongs to exactly one domain.
    pub fn check_partition(&self, count: usize) -> Result<(), CorpusError> {
        let mut seen = vec![false; count];
        for d in &self.domains {
            for &r in &d.members {
                if r == 0 || r > count {
                    return Err(CorpusError::Partition(format!(
                        "domain {} lists ref {r} outside 1..={count}",
                        d.id
                    )));
                }
                if std::mem::replace(&mut seen[r - 1], true) {
                    return Err(CorpusError::Partition(format!(
                        "ref {r} appears in more than one domain"
                    )));
                }
            }
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(CorpusError::Partition(format!(
                "ref {} belongs to no domain",
                k + 1
            )));
        }
        Ok(())
    }

    pub fn statement_count(&self) -> usize {
        self.domains.iter().map(|d| d.members.len()).sum()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.domains.iter().map(|d| d.members.len()).collect()
    }

    pub fn domain(&self, id: usize) -> Option<&Domain> {
        self.domains.iter().find(|d| d.id == id)
    }

    /// Domain containing `ref_num`.
    pub fn domain_of(&self, ref_num: usize) -> Result<usize, CorpusError> {
        self.domains
            .iter()
            .find(|d| d.members.binary_search(&ref_num).is_ok())
            .map(|d| d.id)
            .ok_or(CorpusError::RefOutOfRange {
                ref_num,
                count: self.statement_count(),
            })
    }
}

/// A validated, immutable corpus: statements sorted by ref plus the domain scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    side: Side,
    statements: Vec<Statement>,
    scheme: DomainScheme,
}

/// On-disk layout of a corpus file.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct CorpusFile {
    side: Side,
    domains: Vec<DomainEntry>,
    statements: Vec<StatementEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DomainEntry {
    id: usize,
    name: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct StatementEntry {
    id: String,
    #[serde(rename = "ref")]
    ref_num: usize,
    domain: usize,
    text: String,
}

/// Collapses whitespace runs to single spaces and trims the ends.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

impl Corpus {
    /// Validates and assembles a corpus. Statements may arrive in any order.
    pub fn new(
        side: Side,
        domains: &[(usize, String)],
        statements: Vec<Statement>,
    ) -> Result<Self, CorpusError> {
        let mut by_ref: BTreeMap<usize, Statement> = BTreeMap::new();
        for mut s in statements {
            if s.ref_num == 0 {
                return Err(CorpusError::ZeroRef { id: s.id });
            }
            s.text = normalize_text(&s.text);
            if s.text.is_empty() {
                return Err(CorpusError::EmptyText(s.ref_num));
            }
            s.side = side;
            let r = s.ref_num;
            if by_ref.insert(r, s).is_some() {
                return Err(CorpusError::DuplicateRef(r));
            }
        }
        let count = by_ref.len();
        if let Some(missing) = (1..=count).find(|r| !by_ref.contains_key(r)) {
            return Err(CorpusError::NonContiguousRefs { count, missing });
        }
        let statements: Vec<Statement> = by_ref.into_values().collect();
        let assignment: Vec<usize> = statements.iter().map(|s| s.domain_id).collect();
        let scheme = DomainScheme::from_assignment(side, domains, &assignment)?;
        Ok(Self {
            side,
            statements,
            scheme,
        })
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn statements(&self) -> &[Statement] {
        &self.statements
    }

    pub fn scheme(&self) -> &DomainScheme {
        &self.scheme
    }

    pub fn len(&self) -> usize {
        self.statements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.statements.is_empty()
    }

    pub fn refs(&self) -> Vec<usize> {
        (1..=self.statements.len()).collect()
    }

    pub fn statement(&self, ref_num: usize) -> Result<&Statement, CorpusError> {
        ref_num
            .checked_sub(1)
            .and_then(|k| self.statements.get(k))
            .ok_or(CorpusError::RefOutOfRange {
                ref_num,
                count: self.len(),
            })
    }

    pub fn domain_of(&self, ref_num: usize) -> Result<usize, CorpusError> {
        Ok(self.statement(ref_num)?.domain_id)
    }

    /// Reassigns every statement to a domain chosen by the longest matching id
    /// prefix, e.g. `("4.MD", 4)` sends `4.MD.A.1` to domain 4.
    pub fn with_prefix_domains(&self, prefixes: &[(&str, usize)]) -> Result<Self, CorpusError> {
        let mut statements = self.statements.clone();
        for s in &mut statements {
            let (_, domain) = prefixes
                .iter()
                .filter(|(p, _)| {
                    s.id.starts_with(p)
                        && matches!(s.id.as_bytes().get(p.len()), None | Some(b'.'))
                })
                .max_by_key(|(p, _)| p.len())
                .ok_or_else(|| CorpusError::UnmatchedPrefix(s.id.clone()))?;
            s.domain_id = *domain;
        }
        let domains = self.declared_domains();
        Self::new(self.side, &domains, statements)
    }

    fn declared_domains(&self) -> Vec<(usize, String)> {
        self.scheme
            .domains
            .iter()
            .map(|d| (d.id, d.name.clone()))
            .collect()
    }

    pub fn from_json_str(text: &str) -> Result<Self, CorpusError> {
        let file: CorpusFile = serde_json::from_str(text).map_err(|e| CorpusError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let domains: Vec<(usize, String)> =
            file.domains.into_iter().map(|d| (d.id, d.name)).collect();
        let statements = file
            .statements
            .into_iter()
            .map(|s| Statement {
                id: s.id,
                ref_num: s.ref_num,
                side: file.side,
                domain_id: s.domain,
                text: s.text,
            })
            .collect();
        Self::new(file.side, &domains, statements)
    }

    pub fn to_json_string(&self) -> String {
        let file = CorpusFile {
            side: self.side,
            domains: self
                .scheme
                .domains
                .iter()
                .map(|d| DomainEntry {
                    id: d.id,
                    name: d.name.clone(),
                })
                .collect(),
            statements: self
                .statements
                .iter()
                .map(|s| StatementEntry {
                    id: s.id.clone(),
                    ref_num: s.ref_num,
                    domain: s.domain_id,
                    text: s.text.clone(),
                })
                .collect(),
        };
        let mut out = serde_json::to_string_pretty(&file).expect("corpus serializes");
        out.push('\n');
        out
    }
}

/// Loads a corpus file and checks that it declares the requested side.
pub fn load_corpus(path: impl AsRef<Path>, side: Side) -> Result<Corpus, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let corpus = Corpus::from_json_str(&text)?;
    if corpus.side != side {
        return Err(CorpusError::SideMismatch {
            expected: side,
            found: corpus.side,
        });
    }
    Ok(corpus)
}

/// Id prefixes of the grade-4 CCSS mathematics domains, used by the
/// name-derived alternative to the bundled domain vector.
pub const CCSS_G4_PREFIXES: &[(&str, usize)] = &[
    ("4.OA", 1),
    ("4.NBT", 2),
    ("4.NF", 3),
    ("4.MD", 4),
    ("4.G", 5),
];
