use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use super::seed;
use super::tree::{fit_tree, RegressionTree, TreeParams};
use crate::similarity::RegressionDataset;

/// A tree together with the cases left out of its bootstrap sample.
#[derive(Debug, Clone)]
pub struct ForestTree {
    pub tree: RegressionTree,
    /// Out-of-bag case indices, ascending.
    pub oob: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Forest {
    pub trees: Vec<ForestTree>,
}

/// Draws `n` cases with replacement; returns the sample and the out-of-bag cases.
fn bootstrap(n: usize, rng: &mut impl Rng) -> (Vec<usize>, Vec<usize>) {
    let mut in_bag = vec![false; n];
    let sample: Vec<usize> = (0..n)
        .map(|_| {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            i
        })
        .collect();
    let oob = (0..n).filter(|&i| !in_bag[i]).collect();
    (sample, oob)
}

/// Grows `n_trees` bootstrap trees. Tree `t` uses generator stream `t` of `seed`,
/// so the result does not depend on how the work is scheduled.
pub fn grow_forest(
    data: &RegressionDataset,
    n_trees: usize,
    params: &TreeParams,
    seed: u64,
) -> Forest {
    let n = data.n_cases();
    let trees = (0..n_trees as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(seed::derive(seed, t));
            let (sample, oob) = if n == 0 {
                (Vec::new(), Vec::new())
            } else {
                bootstrap(n, &mut rng)
            };
            let tree = fit_tree(data, &sample, params, &mut rng);
            ForestTree { tree, oob }
        })
        .collect();
    Forest { trees }
}

/// Out-of-bag permutation importance per predictor column.
///
/// For each tree, the importance of predictor `j` is the increase in OOB mean
/// squared error when column `j` is shuffled among the OOB cases. Scores are
/// averaged over trees that have OOB cases. A predictor a tree never splits on
/// contributes exactly zero for that tree. The shuffle for (tree `t`, predictor
/// ref `r`) comes from its own stream of `seed`.
pub fn permutation_importance(forest: &Forest, data: &RegressionDataset, seed: u64) -> Vec<f64> {
    let p = data.n_predictors();
    let per_tree: Vec<Option<Vec<f64>>> = forest
        .trees
        .par_iter()
        .enumerate()
        .map(|(t, ft)| tree_importance(ft, data, seed::derive(seed, t as u64)))
        .collect();
    let mut total = vec![0.0; p];
    let mut counted = 0usize;
    for imp in per_tree.into_iter().flatten() {
        counted += 1;
        total.iter_mut().zip(imp).for_each(|(a, b)| *a += b);
    }
    if counted > 0 {
        total.iter_mut().for_each(|v| *v /= counted as f64);
    }
    total
}

fn tree_importance(ft: &ForestTree, data: &RegressionDataset, seed: u64) -> Option<Vec<f64>> {
    let oob = &ft.oob;
    if oob.is_empty() {
        return None;
    }
    let y = &data.response;
    let mse = |pred: &dyn Fn(usize) -> f64| {
        oob.iter()
            .enumerate()
            .map(|(k, &i)| {
                let e = y[i] - pred(k);
                e * e
            })
            .sum::<f64>()
            / oob.len() as f64
    };
    let baseline_pred: Vec<f64> = oob.iter().map(|&i| ft.tree.predict_case(data, i)).collect();
    let baseline = mse(&|k| baseline_pred[k]);

    let mut imp = vec![0.0; data.n_predictors()];
    let mut perm: Vec<usize> = (0..oob.len()).collect();
    for j in ft.tree.used_features() {
        let mut rng = seed::rng(seed::derive(seed, data.predictor_refs[j] as u64));
        perm.iter_mut().enumerate().for_each(|(k, v)| *v = k);
        perm.shuffle(&mut rng);
        let xj = &data.predictors[j];
        let permuted = |k: usize| {
            let i = oob[k];
            let shuffled = xj[oob[perm[k]]];
            ft.tree
                .predict_with(|f| if f == j { shuffled } else { data.predictors[f][i] })
        };
        imp[j] = mse(&permuted) - baseline;
    }
    Some(imp)
}
