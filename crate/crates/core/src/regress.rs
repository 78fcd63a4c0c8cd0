//! Zero-intercept least squares and the nested (hierarchical) sequence over
//! the selected predictors.
//!
//! R² uses the uncentered total sum of squares, `1 - SS_res / Σy²`, which is the
//! convention for models fit without an intercept.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forest::ImportanceRanking;
use crate::similarity::RegressionDataset;

/// A column whose condition-number estimate against the columns already
/// accepted exceeds this is treated as collinear and dropped.
pub const COLLINEARITY_CONDITION: f64 = 1e10;

#[derive(Debug, Error, PartialEq)]
pub enum RegressError {
    #[error("at least one predictor is required")]
    NoPredictors,
    #[error("predictor {column} has {found} cases, response has {expected}")]
    LengthMismatch {
        column: usize,
        found: usize,
        expected: usize,
    },
    #[error("response vector is zero; R² is undefined")]
    ZeroResponse,
    #[error("non-finite value in regression inputs")]
    NonFinite,
    #[error("selected spec ref {0} is not a predictor in the dataset")]
    UnknownRef(usize),
}

/// Least-squares fit of `y` on the columns of `X` without an intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// One coefficient per input column; dropped columns get 0.
    pub coefficients: Vec<f64>,
    pub r2: f64,
    /// Input column indices dropped as collinear with earlier columns.
    pub dropped: Vec<usize>,
}

/// Householder QR built one column at a time, carrying `Qᵀy` along.
struct IncrementalQr {
    n: usize,
    /// Householder vectors (acting on rows `k..n` for reflector `k`) and their scale.
    reflectors: Vec<(Vec<f64>, f64)>,
    /// Columns of R for accepted predictors (length = rank at acceptance).
    r_cols: Vec<Vec<f64>>,
    max_diag: f64,
    qty: Vec<f64>,
}

impl IncrementalQr {
    fn new(y: &[f64]) -> Self {
        Self {
            n: y.len(),
            reflectors: Vec::new(),
            r_cols: Vec::new(),
            max_diag: 0.0,
            qty: y.to_vec(),
        }
    }

    fn rank(&self) -> usize {
        self.reflectors.len()
    }

    fn reflect(v: &[f64], beta: f64, target: &mut [f64]) {
        let s: f64 = v.iter().zip(target.iter()).map(|(a, b)| a * b).sum();
        let f = beta * s;
        target.iter_mut().zip(v).for_each(|(t, a)| *t -= f * a);
    }

    /// Appends a column; returns false (leaving the factorization unchanged)
    /// when it is numerically dependent on the accepted columns.
    fn push(&mut self, x: &[f64]) -> bool {
        let k = self.rank();
        let mut a = x.to_vec();
        for (i, (v, beta)) in self.reflectors.iter().enumerate() {
            Self::reflect(v, *beta, &mut a[i..]);
        }
        let col_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let tail_norm = if k < self.n {
            a[k..].iter().map(|v| v * v).sum::<f64>().sqrt()
        } else {
            0.0
        };
        let scale = self.max_diag.max(col_norm);
        if col_norm == 0.0 || tail_norm * COLLINEARITY_CONDITION <= scale {
            return false;
        }
        let alpha = if a[k] > 0.0 { -tail_norm } else { tail_norm };
        let mut v = a[k..].to_vec();
        v[0] -= alpha;
        let vv: f64 = v.iter().map(|t| t * t).sum();
        let beta = 2.0 / vv;
        Self::reflect(&v, beta, &mut self.qty[k..]);
        let mut r = a[..k].to_vec();
        r.push(alpha);
        self.max_diag = self.max_diag.max(alpha.abs());
        self.r_cols.push(r);
        self.reflectors.push((v, beta));
        true
    }

    /// Solves R β = (Qᵀy)[..rank] by back substitution.
    fn coefficients(&self) -> Vec<f64> {
        let p = self.rank();
        let mut beta = vec![0.0; p];
        for i in (0..p).rev() {
            let s = (i + 1..p).fold(self.qty[i], |s, j| s - self.r_cols[j][i] * beta[j]);
            beta[i] = s / self.r_cols[i][i];
        }
        beta
    }
}

fn check_inputs(y: &[f64], x: &[&[f64]]) -> Result<f64, RegressError> {
    if x.is_empty() {
        return Err(RegressError::NoPredictors);
    }
    for (j, col) in x.iter().enumerate() {
        if col.len() != y.len() {
            return Err(RegressError::LengthMismatch {
                column: j,
                found: col.len(),
                expected: y.len(),
            });
        }
    }
    if y.iter().chain(x.iter().flat_map(|c| c.iter())).any(|v| !v.is_finite()) {
        return Err(RegressError::NonFinite);
    }
    let yy: f64 = y.iter().map(|v| v * v).sum();
    if yy == 0.0 {
        return Err(RegressError::ZeroResponse);
    }
    Ok(yy)
}

/// Per-column share of Σy² explained as each column enters, in input order;
/// dropped columns explain nothing.
fn entry_increments(y: &[f64], x: &[&[f64]]) -> Result<(IncrementalQr, Vec<f64>, Vec<usize>), RegressError> {
    let yy = check_inputs(y, x)?;
    let mut qr = IncrementalQr::new(y);
    let mut increments = Vec::with_capacity(x.len());
    let mut dropped = Vec::new();
    for (j, col) in x.iter().enumerate() {
        if qr.push(col) {
            let z = qr.qty[qr.rank() - 1];
            increments.push(z * z / yy);
        } else {
            increments.push(0.0);
            dropped.push(j);
        }
    }
    Ok((qr, increments, dropped))
}

/// Fits `y ≈ Xβ` with no intercept by orthogonal decomposition.
///
/// Columns nearly dependent on earlier ones (see [`COLLINEARITY_CONDITION`]) are
/// dropped in input order and reported in [`OlsFit::dropped`].
pub fn ols_no_intercept(y: &[f64], x: &[&[f64]]) -> Result<OlsFit, RegressError> {
    let (qr, increments, dropped) = entry_increments(y, x)?;
    let solved = qr.coefficients();
    let mut kept = solved.into_iter();
    let coefficients = (0..x.len())
        .map(|j| {
            if dropped.contains(&j) {
                0.0
            } else {
                kept.next().expect("one coefficient per kept column")
            }
        })
        .collect();
    Ok(OlsFit {
        coefficients,
        r2: increments.iter().sum(),
        dropped,
    })
}

/// R² at each step of the nested sequence and the unique variance each step adds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub target_ref: usize,
    /// Spec refs in order of entry.
    pub steps: Vec<usize>,
    /// Cumulative R² after each step.
    pub r2: Vec<f64>,
    /// `r2[0]`, then `r2[k] - r2[k-1]`.
    pub increments: Vec<f64>,
    /// Last-step R² minus first-step R².
    pub step13_increase: f64,
    /// Step refs dropped as collinear with earlier steps.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub collinear: Vec<usize>,
}

impl StepwiseResult {
    /// Builds a result from reported cumulative R² values (e.g. a published table).
    pub fn from_cumulative(target_ref: usize, steps: Vec<usize>, r2: Vec<f64>) -> Self {
        let increments = r2
            .iter()
            .enumerate()
            .map(|(k, v)| if k == 0 { *v } else { v - r2[k - 1] })
            .collect();
        Self::assemble(target_ref, steps, r2, increments, Vec::new())
    }

    fn assemble(
        target_ref: usize,
        steps: Vec<usize>,
        r2: Vec<f64>,
        increments: Vec<f64>,
        collinear: Vec<usize>,
    ) -> Self {
        let step13_increase = match (r2.first(), r2.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        Self {
            target_ref,
            steps,
            r2,
            increments,
            step13_increase,
            collinear,
        }
    }

    pub fn final_r2(&self) -> Option<f64> {
        self.r2.last().copied()
    }
}

/// Fits the nested models {s₁}, {s₁,s₂}, … over `steps` in the given order.
///
/// All prefixes share one QR factorization, so each step's R² is the previous
/// step's plus a nonnegative increment: the sequence is monotone and the
/// increments sum exactly (left to right) to the final R².
pub fn hierarchical_fit_steps(
    data: &RegressionDataset,
    steps: &[usize],
) -> Result<StepwiseResult, RegressError> {
    let cols: Vec<&[f64]> = steps
        .iter()
        .map(|&r| data.predictor(r).ok_or(RegressError::UnknownRef(r)))
        .collect::<Result<_, _>>()?;
    let (_, increments, dropped) = entry_increments(&data.response, &cols)?;
    let mut r2 = Vec::with_capacity(increments.len());
    let mut acc = 0.0;
    for inc in &increments {
        acc += inc;
        r2.push(acc);
    }
    let collinear = dropped.iter().map(|&j| steps[j]).collect();
    Ok(StepwiseResult::assemble(
        data.target_ref,
        steps.to_vec(),
        r2,
        increments,
        collinear,
    ))
}

pub fn hierarchical_fit(
    data: &RegressionDataset,
    ranking: &ImportanceRanking,
) -> Result<StepwiseResult, RegressError> {
    hierarchical_fit_steps(data, &ranking.selected)
}
