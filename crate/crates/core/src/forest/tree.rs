use std::cmp::Ordering;

use rand::RngCore;

use super::seed::mix;
use crate::similarity::RegressionDataset;

/// Growth limits for one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TreeParams {
    /// Candidate predictors drawn (without replacement) at each node.
    pub mtry: usize,
    /// Minimum cases in a leaf; nodes smaller than twice this are not split.
    pub min_leaf: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Leaf {
        value: f64,
        n_cases: usize,
    },
    Split {
        /// Predictor column index in the training dataset.
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// Binary regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn is_single_leaf(&self) -> bool {
        self.nodes.len() == 1
    }

    /// Sorted, deduplicated predictor columns used by any split.
    pub fn used_features(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }

    /// Predicts from a feature accessor: `x(j)` is the value of predictor column `j`.
    pub fn predict_with(&self, x: impl Fn(usize) -> f64) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x(*feature) <= *threshold { *left } else { *right },
            }
        }
    }

    /// Prediction for case `i` of `data`.
    pub fn predict_case(&self, data: &RegressionDataset, i: usize) -> f64 {
        self.predict_with(|j| data.predictors[j][i])
    }
}

/// Grows a CART regression tree on the (possibly repeated) case indices in `sample`.
///
/// At each node `mtry` candidate predictors are drawn without replacement and the
/// (predictor, midpoint) pair minimizing the summed child squared error wins.
/// Candidate draws and tie-breaks depend on predictor refs, not column
/// positions, so reordering the predictor columns yields the same tree.
pub fn fit_tree(
    data: &RegressionDataset,
    sample: &[usize],
    params: &TreeParams,
    rng: &mut dyn RngCore,
) -> RegressionTree {
    let mut tree = RegressionTree { nodes: Vec::new() };
    if sample.is_empty() {
        tree.nodes.push(Node::Leaf {
            value: 0.0,
            n_cases: 0,
        });
        return tree;
    }
    // Column indices sorted by ref, and per-column ref hashes.
    let mut by_ref: Vec<usize> = (0..data.n_predictors()).collect();
    by_ref.sort_by_key(|&j| data.predictor_refs[j]);
    let ref_hash: Vec<u64> = data
        .predictor_refs
        .iter()
        .map(|&r| mix(r as u64 ^ 0x5bd1_e995_u64.rotate_left(17)))
        .collect();
    let mut grower = Grower {
        data,
        params,
        by_ref,
        ref_hash,
        tree: &mut tree,
    };
    grower.grow(sample.to_vec(), rng);
    tree
}

struct Grower<'a> {
    data: &'a RegressionDataset,
    params: &'a TreeParams,
    by_ref: Vec<usize>,
    ref_hash: Vec<u64>,
    tree: &'a mut RegressionTree,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

impl Grower<'_> {
    fn grow(&mut self, cases: Vec<usize>, rng: &mut dyn RngCore) -> usize {
        let y = &self.data.response;
        let n = cases.len();
        let sum: f64 = cases.iter().map(|&i| y[i]).sum();
        let mean = sum / n as f64;
        let id = self.tree.nodes.len();
        self.tree.nodes.push(Node::Leaf {
            value: mean,
            n_cases: n,
        });

        let first = y[cases[0]];
        let constant = cases.iter().all(|&i| y[i] == first);
        let min_leaf = self.params.min_leaf.max(1);
        if constant || n < 2 * min_leaf || self.data.n_predictors() == 0 {
            return id;
        }

        let node_seed = rng.next_u64();
        let candidates = self.draw_candidates(node_seed);
        let Some(best) = self.best_split(&cases, &candidates, sum) else {
            return id;
        };

        let x = &self.data.predictors[best.feature];
        let (left, right): (Vec<usize>, Vec<usize>) =
            cases.into_iter().partition(|&i| x[i] <= best.threshold);
        let l = self.grow(left, rng);
        let r = self.grow(right, rng);
        self.tree.nodes[id] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: l,
            right: r,
        };
        id
    }

    /// The `mtry` columns with the smallest per-node priority, in ref order.
    fn draw_candidates(&self, node_seed: u64) -> Vec<usize> {
        let mut keyed: Vec<(u64, usize)> = self
            .by_ref
            .iter()
            .map(|&j| (mix(node_seed ^ self.ref_hash[j]), j))
            .collect();
        let k = self.params.mtry.clamp(1, keyed.len());
        keyed.select_nth_unstable_by(k - 1, |a, b| {
            a.0.cmp(&b.0)
                .then(self.data.predictor_refs[a.1].cmp(&self.data.predictor_refs[b.1]))
        });
        let mut chosen: Vec<usize> = keyed[..k].iter().map(|&(_, j)| j).collect();
        chosen.sort_by_key(|&j| self.data.predictor_refs[j]);
        chosen
    }

    fn best_split(&self, cases: &[usize], candidates: &[usize], sum: f64) -> Option<BestSplit> {
        let y = &self.data.response;
        let n = cases.len();
        let min_leaf = self.params.min_leaf.max(1);
        let parent = sum * sum / n as f64;
        let mut best: Option<BestSplit> = None;
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &j in candidates {
            let x = &self.data.predictors[j];
            pairs.clear();
            pairs.extend(cases.iter().map(|&i| (x[i], y[i])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal));
            let mut left_sum = 0.0;
            for k in 1..n {
                left_sum += pairs[k - 1].1;
                if k < min_leaf || n - k < min_leaf || pairs[k - 1].0 >= pairs[k].0 {
                    continue;
                }
                let right_sum = sum - left_sum;
                // Maximizing this minimizes the summed child squared error.
                let score =
                    left_sum * left_sum / k as f64 + right_sum * right_sum / (n - k) as f64;
                if score > parent && best.as_ref().is_none_or(|b| score > b.score) {
                    best = Some(BestSplit {
                        feature: j,
                        threshold: 0.5 * (pairs[k - 1].0 + pairs[k].0),
                        score,
                    });
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn dataset(response: Vec<f64>, predictors: Vec<Vec<f64>>) -> RegressionDataset {
        let refs = (1..=predictors.len()).collect();
        RegressionDataset {
            target_ref: 1,
            response,
            predictors,
            predictor_refs: refs,
        }
    }

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn constant_response_gives_one_leaf() {
        let d = dataset(vec![0.25; 20], vec![(0..20).map(f64::from).collect()]);
        let params = TreeParams {
            mtry: 1,
            min_leaf: 1,
        };
        let t = fit_tree(&d, &all(20), &params, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(t.is_single_leaf());
        assert_eq!(t.predict_case(&d, 3), 0.25);
    }

    #[test]
    fn single_case_gives_one_leaf() {
        let d = dataset(vec![0.7, 0.1], vec![vec![1.0, 2.0]]);
        let params = TreeParams {
            mtry: 1,
            min_leaf: 1,
        };
        let t = fit_tree(&d, &[1], &params, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(t.is_single_leaf());
        assert_eq!(t.predict_case(&d, 0), 0.1);
    }

    #[test]
    fn small_nodes_are_not_split() {
        let d = dataset(vec![0.0, 1.0, 2.0], vec![vec![0.0, 1.0, 2.0]]);
        let params = TreeParams {
            mtry: 1,
            min_leaf: 2,
        };
        let t = fit_tree(&d, &all(3), &params, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(t.is_single_leaf());
    }

    #[test]
    fn step_function_is_found_at_the_midpoint() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v < 4.5 { -1.0 } else { 1.0 }).collect();
        let d = dataset(y, vec![x]);
        let params = TreeParams {
            mtry: 1,
            min_leaf: 1,
        };
        let t = fit_tree(&d, &all(10), &params, &mut ChaCha8Rng::seed_from_u64(1));
        match t.root() {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 4.5);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(t.n_leaves(), 2);
    }

    #[test]
    fn children_respect_min_leaf() {
        let x: Vec<f64> = (0..12).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let d = dataset(y, vec![x]);
        let params = TreeParams {
            mtry: 1,
            min_leaf: 3,
        };
        let t = fit_tree(&d, &all(12), &params, &mut ChaCha8Rng::seed_from_u64(9));
        for node in t.nodes() {
            if let Node::Leaf { n_cases, .. } = node {
                assert!(*n_cases >= 3);
            }
        }
    }
}
