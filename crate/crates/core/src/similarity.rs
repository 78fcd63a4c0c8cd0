//! Univariate similarity between standards and specifications, and the
//! attributes-as-cases regression dataset for one standard.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embed::EmbeddingMatrix;

/// Entrywise |cosine - pearson| below this is treated as negligible.
pub const COSINE_PEARSON_TOLERANCE: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum SimilarityError {
    #[error("vector lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("zero-norm vector")]
    ZeroNorm,
    #[error("constant vector has zero variance")]
    ZeroVariance,
    #[error("matrices disagree on embedding dimensionality ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("unknown ref {0}")]
    UnknownRef(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimilarityKind {
    Cosine,
    Pearson,
}

impl std::str::FromStr for SimilarityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cosine" => Ok(Self::Cosine),
            "pearson" => Ok(Self::Pearson),
            other => Err(format!("unknown similarity kind `{other}`")),
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch(u.len(), v.len()));
    }
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(SimilarityError::ZeroNorm);
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0))
}

/// Pearson correlation: the cosine of the mean-centered vectors.
pub fn pearson(u: &[f64], v: &[f64]) -> Result<f64, SimilarityError> {
    if u.len() != v.len() {
        return Err(SimilarityError::LengthMismatch(u.len(), v.len()));
    }
    let center = |x: &[f64]| {
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|a| a - mean).collect::<Vec<_>>()
    };
    let (cu, cv) = (center(u), center(v));
    let su = dot(&cu, &cu);
    let sv = dot(&cv, &cv);
    if su == 0.0 || sv == 0.0 {
        return Err(SimilarityError::ZeroVariance);
    }
    Ok((dot(&cu, &cv) / (su.sqrt() * sv.sqrt())).clamp(-1.0, 1.0))
}

/// Standards (rows) by specifications (columns) similarity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMatrix {
    pub kind: SimilarityKind,
    pub row_refs: Vec<usize>,
    pub col_refs: Vec<usize>,
    /// Row-major values.
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn n_rows(&self) -> usize {
        self.row_refs.len()
    }

    pub fn n_cols(&self) -> usize {
        self.col_refs.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_cols();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn row_for(&self, ref_num: usize) -> Result<&[f64], SimilarityError> {
        let i = self
            .row_refs
            .iter()
            .position(|&r| r == ref_num)
            .ok_or(SimilarityError::UnknownRef(ref_num))?;
        Ok(self.row(i))
    }

    /// Largest entrywise absolute difference from another matrix of the same shape.
    pub fn max_abs_difference(&self, other: &SimilarityMatrix) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

pub fn similarity_matrix(
    std: &EmbeddingMatrix,
    spec: &EmbeddingMatrix,
    kind: SimilarityKind,
) -> Result<SimilarityMatrix, SimilarityError> {
    if std.n_dims() != spec.n_dims() {
        return Err(SimilarityError::DimensionMismatch(
            std.n_dims(),
            spec.n_dims(),
        ));
    }
    let f = match kind {
        SimilarityKind::Cosine => cosine,
        SimilarityKind::Pearson => pearson,
    };
    let mut values = Vec::with_capacity(std.m_statements() * spec.m_statements());
    for u in std.columns() {
        for v in spec.columns() {
            values.push(f(u, v)?);
        }
    }
    Ok(SimilarityMatrix {
        kind,
        row_refs: std.refs().to_vec(),
        col_refs: spec.refs().to_vec(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub spec_ref: usize,
    pub similarity: f64,
}

/// All specifications for one standard, most similar first; ties go to the lower ref.
pub fn rank_candidates(
    sim: &SimilarityMatrix,
    standard_ref: usize,
) -> Result<Vec<Candidate>, SimilarityError> {
    let row = sim.row_for(standard_ref)?;
    let mut out: Vec<Candidate> = sim
        .col_refs
        .iter()
        .zip(row)
        .map(|(&spec_ref, &similarity)| Candidate {
            spec_ref,
            similarity,
        })
        .collect();
    out.sort_by(|a, b| {
        b.similarity
            .partial_cmp(&a.similarity)
            .unwrap_or(Ordering::Equal)
            .then(a.spec_ref.cmp(&b.spec_ref))
    });
    Ok(out)
}

/// One standard's response vector and every specification as a predictor,
/// with embedding attributes as cases.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDataset {
    pub target_ref: usize,
    pub response: Vec<f64>,
    /// Predictor columns, each of length `n_cases()`.
    pub predictors: Vec<Vec<f64>>,
    /// Spec ref of each predictor column.
    pub predictor_refs: Vec<usize>,
}

impl RegressionDataset {
    pub fn n_cases(&self) -> usize {
        self.response.len()
    }

    pub fn n_predictors(&self) -> usize {
        self.predictors.len()
    }

    pub fn predictor(&self, spec_ref: usize) -> Option<&[f64]> {
        self.predictor_refs
            .iter()
            .position(|&r| r == spec_ref)
            .map(|j| self.predictors[j].as_slice())
    }
}

pub fn make_dataset(
    std: &EmbeddingMatrix,
    spec: &EmbeddingMatrix,
    standard_ref: usize,
) -> Result<RegressionDataset, SimilarityError> {
    if std.n_dims() != spec.n_dims() {
        return Err(SimilarityError::DimensionMismatch(
            std.n_dims(),
            spec.n_dims(),
        ));
    }
    let response = std
        .column_for(standard_ref)
        .ok_or(SimilarityError::UnknownRef(standard_ref))?
        .to_vec();
    let mut order: Vec<usize> = (0..spec.m_statements()).collect();
    order.sort_by_key(|&j| spec.refs()[j]);
    Ok(RegressionDataset {
        target_ref: standard_ref,
        response,
        predictors: order.iter().map(|&j| spec.column(j).to_vec()).collect(),
        predictor_refs: order.iter().map(|&j| spec.refs()[j]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Side;
    use proptest::prelude::*;

    #[test]
    fn cosine_identity_antipodal_orthogonal() {
        let v = [0.3, -0.4, 0.5];
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine(&v, &neg).unwrap() + 1.0).abs() < 1e-15);
        assert_eq!(cosine(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn cosine_errors() {
        assert_eq!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(SimilarityError::ZeroNorm)
        );
        assert_eq!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(SimilarityError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn pearson_affine_invariance_and_constant_error() {
        let v = [0.1, 0.7, -0.2, 0.4];
        let w: Vec<f64> = v.iter().map(|x| 3.0 * x + 2.0).collect();
        assert!((pearson(&v, &w).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            pearson(&v, &[2.0, 2.0, 2.0, 2.0]),
            Err(SimilarityError::ZeroVariance)
        );
    }

    #[test]
    fn pearson_equals_cosine_for_zero_mean_unit_vectors() {
        let u = [0.5, -0.5, 0.5, -0.5];
        let v = [0.5, 0.5, -0.5, -0.5];
        assert_eq!(pearson(&u, &v).unwrap(), cosine(&u, &v).unwrap());
    }

    fn unit_matrix(cols: Vec<Vec<f64>>) -> EmbeddingMatrix {
        let refs = (1..=cols.len()).collect();
        EmbeddingMatrix::normalized(Side::Standard, refs, cols).unwrap()
    }

    #[test]
    fn hand_case_two_by_one() {
        let a = unit_matrix(vec![vec![1.0, 0.0]]);
        let b = unit_matrix(vec![vec![0.0, 1.0]]);
        let s = similarity_matrix(&a, &b, SimilarityKind::Cosine).unwrap();
        assert_eq!(s.values, vec![0.0]);
    }

    #[test]
    fn self_similarity_diagonal_is_one() {
        let a = unit_matrix(vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 2.0]]);
        let s = similarity_matrix(&a, &a, SimilarityKind::Pearson).unwrap();
        for i in 0..2 {
            assert!((s.get(i, i) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ranking_ties_prefer_lower_ref() {
        let sim = SimilarityMatrix {
            kind: SimilarityKind::Cosine,
            row_refs: vec![1],
            col_refs: vec![1, 2, 3, 4],
            values: vec![0.2, 0.5, 0.2, 0.9],
        };
        let order: Vec<usize> = rank_candidates(&sim, 1)
            .unwrap()
            .iter()
            .map(|c| c.spec_ref)
            .collect();
        assert_eq!(order, vec![4, 2, 1, 3]);
        assert_eq!(
            rank_candidates(&sim, 9),
            Err(SimilarityError::UnknownRef(9))
        );
    }

    #[test]
    fn dataset_projects_columns() {
        let std = unit_matrix(vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
        let spec = unit_matrix(vec![vec![1.0, 1.0, 0.0]]);
        let d = make_dataset(&std, &spec, 2).unwrap();
        assert_eq!(d.response, std.column(1));
        assert_eq!(d.predictor_refs, vec![1]);
        assert_eq!((d.n_cases(), d.n_predictors()), (3, 1));
        assert_eq!(
            make_dataset(&std, &spec, 3),
            Err(SimilarityError::UnknownRef(3))
        );
    }

    fn vec_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(-1.0f64..1.0, n),
                prop::collection::vec(-1.0f64..1.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn symmetric_and_scale_invariant((u, v) in vec_pair(), a in 0.01f64..100.0) {
            prop_assume!(u.iter().any(|x| x.abs() > 1e-6) && v.iter().any(|x| x.abs() > 1e-6));
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine(&v, &u).unwrap()).abs() < 1e-15);
            let scaled: Vec<f64> = u.iter().map(|x| a * x).collect();
            prop_assert!((c - cosine(&scaled, &v).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
            if let (Ok(p), Ok(q)) = (pearson(&u, &v), pearson(&v, &u)) {
                prop_assert!((p - q).abs() < 1e-15);
            }
        }

        #[test]
        fn ranking_is_a_permutation(values in prop::collection::vec(-1.0f64..1.0, 1..60)) {
            let m = values.len();
            let sim = SimilarityMatrix {
                kind: SimilarityKind::Cosine,
                row_refs: vec![1],
                col_refs: (1..=m).collect(),
                values,
            };
            let ranked = rank_candidates(&sim, 1).unwrap();
            let mut refs: Vec<usize> = ranked.iter().map(|c| c.spec_ref).collect();
            prop_assert!(ranked.windows(2).all(|w| w[0].similarity >= w[1].similarity));
            prop_assert_eq!(&ranked, &rank_candidates(&sim, 1).unwrap());
            refs.sort_unstable();
            prop_assert_eq!(refs, (1..=m).collect::<Vec<_>>());
        }
    }
}
