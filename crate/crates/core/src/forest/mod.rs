//! Predictor selection by random-forest permutation importance.
//!
//! Each standard's dataset is fit by `n_replications` independent forests;
//! importances are averaged across replications and the `top_k` predictors
//! are kept in importance order.

mod importance;
mod seed;
mod tree;

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::similarity::RegressionDataset;

pub use importance::{grow_forest, permutation_importance, Forest, ForestTree};
pub use tree::{fit_tree, Node, RegressionTree, TreeParams};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ForestError {
    #[error("invalid forest config: {0}")]
    Config(String),
    #[error("dataset has no cases")]
    EmptyDataset,
    #[error("dataset shape: {0}")]
    Shape(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub mtry: usize,
    pub n_replications: usize,
    pub min_leaf: usize,
    pub seed: u64,
    pub top_k: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        Self {
            n_trees: 500,
            mtry: 6,
            n_replications: 25,
            min_leaf: 5,
            seed: 20_240_601,
            top_k: 3,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self, n_predictors: usize) -> Result<(), ForestError> {
        let positive = [
            ("n_trees", self.n_trees),
            ("mtry", self.mtry),
            ("n_replications", self.n_replications),
            ("min_leaf", self.min_leaf),
            ("top_k", self.top_k),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(ForestError::Config(format!("{name} must be positive")));
        }
        if self.mtry > n_predictors {
            return Err(ForestError::Config(format!(
                "mtry {} exceeds the {n_predictors} available predictors",
                self.mtry
            )));
        }
        if self.top_k > n_predictors {
            return Err(ForestError::Config(format!(
                "top_k {} exceeds the {n_predictors} available predictors",
                self.top_k
            )));
        }
        Ok(())
    }

    fn tree_params(&self) -> TreeParams {
        TreeParams {
            mtry: self.mtry,
            min_leaf: self.min_leaf,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceScore {
    pub spec_ref: usize,
    pub mean_importance: f64,
    /// Standard deviation across replications (0 with a single replication).
    pub importance_sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRanking {
    pub target_ref: usize,
    /// Every predictor, most important first; ties go to the lower ref.
    pub scores: Vec<ImportanceScore>,
    /// The first `top_k` refs of `scores`.
    pub selected: Vec<usize>,
}

const PERMUTATION_STREAM: u64 = 0x7065_726d;

/// Ranks every predictor by replication-averaged permutation importance and
/// keeps the first `cfg.top_k`. The result is a pure function of `data` and `cfg`.
pub fn select_top_k(
    data: &RegressionDataset,
    cfg: &ForestConfig,
) -> Result<ImportanceRanking, ForestError> {
    cfg.validate(data.n_predictors())?;
    if data.n_cases() == 0 {
        return Err(ForestError::EmptyDataset);
    }
    if let Some(j) = data
        .predictors
        .iter()
        .position(|c| c.len() != data.n_cases())
    {
        return Err(ForestError::Shape(format!(
            "predictor {} has {} cases, response has {}",
            data.predictor_refs[j],
            data.predictors[j].len(),
            data.n_cases()
        )));
    }

    let params = cfg.tree_params();
    let replications: Vec<Vec<f64>> = (0..cfg.n_replications as u64)
        .into_par_iter()
        .map(|r| {
            let rep_seed = seed::derive(cfg.seed, r);
            let forest = grow_forest(data, cfg.n_trees, &params, rep_seed);
            permutation_importance(&forest, data, seed::derive(rep_seed, PERMUTATION_STREAM))
        })
        .collect();

    let reps = replications.len() as f64;
    let mut scores: Vec<ImportanceScore> = data
        .predictor_refs
        .iter()
        .enumerate()
        .map(|(j, &spec_ref)| {
            let mean = replications.iter().map(|r| r[j]).sum::<f64>() / reps;
            let sd = if replications.len() > 1 {
                let ss: f64 = replications.iter().map(|r| (r[j] - mean).powi(2)).sum();
                (ss / (reps - 1.0)).sqrt()
            } else {
                0.0
            };
            ImportanceScore {
                spec_ref,
                mean_importance: mean,
                importance_sd: sd,
            }
        })
        .collect();
    scores.sort_by(|a, b| {
        b.mean_importance
            .partial_cmp(&a.mean_importance)
            .unwrap_or(Ordering::Equal)
            .then(a.spec_ref.cmp(&b.spec_ref))
    });
    let selected = scores.iter().take(cfg.top_k).map(|s| s.spec_ref).collect();
    Ok(ImportanceRanking {
        target_ref: data.target_ref,
        scores,
        selected,
    })
}
