//! CART regression trees and bagged forests grown by variance reduction.

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Predictor;

/// One node of a regression tree. `cover` is the number of training rows
/// (with bootstrap multiplicity) that reached the node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        cover: usize,
    },
    Leaf {
        value: f64,
        cover: usize,
    },
}

/// A single CART regression tree; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeModel {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeHyper {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for TreeHyper {
    fn default() -> Self {
        TreeHyper {
            max_depth: None,
            min_samples_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyper {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    /// Features drawn per split; `None` means ceil(p / 3).
    pub feature_subsample: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestHyper {
    fn default() -> Self {
        ForestHyper {
            n_trees: 300,
            max_depth: None,
            min_samples_leaf: 2,
            feature_subsample: None,
            bootstrap: true,
        }
    }
}

/// Bagged ensemble; prediction is the arithmetic mean over trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<TreeModel>,
    pub hyper: ForestHyper,
    pub seed: u64,
}

impl Predictor for TreeModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut node = 0usize;
        loop {
            match &self.nodes[node] {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

impl Predictor for ForestModel {
    fn n_features(&self) -> usize {
        self.trees.first().map(|t| t.n_features).unwrap_or(0)
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut sum = 0.0;
        for tree in &self.trees {
            sum += tree.predict_row(row);
        }
        sum / self.trees.len() as f64
    }
}

struct Growth<'a> {
    x: &'a [Vec<f64>],
    y: &'a [f64],
    max_depth: Option<usize>,
    min_samples_leaf: usize,
    feature_subsample: Option<usize>,
    p: usize,
}

impl Growth<'_> {
    fn grow(&self, indices: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng, nodes: &mut Vec<TreeNode>) -> usize {
        let cover = indices.len();
        let mean = indices.iter().map(|&i| self.y[i]).sum::<f64>() / cover as f64;
        let depth_ok = self.max_depth.map_or(true, |d| depth < d);
        if !depth_ok || cover < 2 * self.min_samples_leaf {
            nodes.push(TreeNode::Leaf { value: mean, cover });
            return nodes.len() - 1;
        }

        let candidates = self.candidate_features(rng);
        let Some((feature, threshold)) = self.best_split(&indices, &candidates) else {
            nodes.push(TreeNode::Leaf { value: mean, cover });
            return nodes.len() - 1;
        };

        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
            .into_iter()
            .partition(|&i| self.x[i][feature] <= threshold);

        let id = nodes.len();
        nodes.push(TreeNode::Leaf { value: mean, cover }); // placeholder
        let left = self.grow(left_idx, depth + 1, rng, nodes);
        let right = self.grow(right_idx, depth + 1, rng, nodes);
        nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            cover,
        };
        id
    }

    fn candidate_features(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match self.feature_subsample {
            None => (0..self.p).collect(),
            Some(m) if m >= self.p => (0..self.p).collect(),
            Some(m) => {
                // partial Fisher-Yates draw of m distinct features, then
                // sorted so tie-breaks go to the lowest feature index
                let mut pool: Vec<usize> = (0..self.p).collect();
                for i in 0..m {
                    let j = rng.gen_range(i..pool.len());
                    pool.swap(i, j);
                }
                let mut chosen = pool[..m].to_vec();
                chosen.sort_unstable();
                chosen
            }
        }
    }

    /// Best (feature, threshold) by variance reduction, or None when no
    /// split improves on the parent. Ties keep the first candidate in
    /// (feature, threshold) iteration order.
    fn best_split(&self, indices: &[usize], candidates: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len();
        let min_leaf = self.min_samples_leaf;
        let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let sum_sq: f64 = indices.iter().map(|&i| self.y[i] * self.y[i]).sum();
        let parent_sse = sum_sq - sum * sum / n as f64;

        let mut best: Option<(f64, usize, f64)> = None; // (child sse, feature, threshold)
        let mut pairs: Vec<(f64, f64)> = Vec::with_capacity(n);
        for &feature in candidates {
            pairs.clear();
            pairs.extend(indices.iter().map(|&i| (self.x[i][feature], self.y[i])));
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite feature values"));

            let mut left_sum = 0.0;
            let mut left_sq = 0.0;
            for split_at in 1..n {
                let (xv, yv) = pairs[split_at - 1];
                left_sum += yv;
                left_sq += yv * yv;
                if split_at < min_leaf || n - split_at < min_leaf {
                    continue;
                }
                let next_x = pairs[split_at].0;
                if xv == next_x {
                    continue;
                }
                let nl = split_at as f64;
                let nr = (n - split_at) as f64;
                let right_sum = sum - left_sum;
                let right_sq = sum_sq - left_sq;
                let sse = (left_sq - left_sum * left_sum / nl)
                    + (right_sq - right_sum * right_sum / nr);
                let better = match best {
                    None => true,
                    Some((b, _, _)) => sse < b,
                };
                if better {
                    best = Some((sse, feature, (xv + next_x) / 2.0));
                }
            }
        }

        best.and_then(|(sse, feature, threshold)| {
            if parent_sse - sse > 1e-12 {
                Some((feature, threshold))
            } else {
                None
            }
        })
    }
}

fn check_train_input(train: &DomainDataset) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if train.is_empty() {
        return Err(Error::Invalid("cannot train on an empty dataset".into()));
    }
    Ok((train.matrix(), train.targets()))
}

/// Grow a single CART regression tree on the full training set.
pub fn train_tree(train: &DomainDataset, hp: &TreeHyper, seed: u64) -> Result<TreeModel> {
    let (x, y) = check_train_input(train)?;
    let growth = Growth {
        x: &x,
        y: &y,
        max_depth: hp.max_depth,
        min_samples_leaf: hp.min_samples_leaf,
        feature_subsample: None,
        p: train.schema.p(),
    };
    let mut nodes = Vec::new();
    let mut rng = stream_rng(seed, Stream::TreeGrowth, 0);
    growth.grow((0..x.len()).collect(), 0, &mut rng, &mut nodes);
    Ok(TreeModel {
        nodes,
        n_features: train.schema.p(),
        seed,
    })
}

/// Train a bagged forest. Each tree owns RNG streams derived from the seed,
/// so the result is identical at any thread count.
pub fn train_forest(train: &DomainDataset, hp: &ForestHyper, seed: u64) -> Result<ForestModel> {
    if hp.n_trees == 0 {
        return Err(Error::Invalid("forest needs at least one tree".into()));
    }
    let (x, y) = check_train_input(train)?;
    let p = train.schema.p();
    let subsample = hp.feature_subsample.unwrap_or_else(|| p.div_ceil(3));
    let n = x.len();

    let trees: Vec<TreeModel> = (0..hp.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut grow_rng = stream_rng(seed, Stream::TreeGrowth, t as u64);
            let indices: Vec<usize> = if hp.bootstrap {
                let mut boot_rng = stream_rng(seed, Stream::Bootstrap, t as u64);
                (0..n).map(|_| boot_rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            let growth = Growth {
                x: &x,
                y: &y,
                max_depth: hp.max_depth,
                min_samples_leaf: hp.min_samples_leaf,
                feature_subsample: Some(subsample),
                p,
            };
            let mut nodes = Vec::new();
            growth.grow(indices, 0, &mut grow_rng, &mut nodes);
            TreeModel {
                nodes,
                n_features: p,
                seed,
            }
        })
        .collect();

    Ok(ForestModel {
        trees,
        hyper: *hp,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::toy_dataset;

    #[test]
    fn two_samples_perfect_split() {
        let ds = toy_dataset(&[(vec![0], 0), (vec![10], 4)]);
        let hp = TreeHyper {
            min_samples_leaf: 1,
            ..Default::default()
        };
        let tree = train_tree(&ds, &hp, 0).unwrap();
        assert_eq!(tree.predict_row(&[0.0]), 0.0);
        assert_eq!(tree.predict_row(&[10.0]), 4.0);
        assert_eq!(tree.nodes.len(), 3);
    }

    #[test]
    fn constant_targets_single_leaf() {
        let ds = toy_dataset(&[(vec![0], 7), (vec![1], 7), (vec![2], 7), (vec![3], 7)]);
        let tree = train_tree(&ds, &TreeHyper::default(), 0).unwrap();
        assert_eq!(tree.nodes.len(), 1);
        assert_eq!(tree.predict_row(&[5.0]), 7.0);
    }

    #[test]
    fn cover_invariant_holds() {
        let ds = toy_dataset(&[
            (vec![0, 5], 0),
            (vec![1, 4], 1),
            (vec![2, 3], 4),
            (vec![3, 2], 5),
            (vec![4, 1], 9),
            (vec![5, 0], 9),
        ]);
        let tree = train_tree(
            &ds,
            &TreeHyper {
                min_samples_leaf: 1,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        for node in &tree.nodes {
            if let TreeNode::Split {
                left, right, cover, ..
            } = node
            {
                let cov = |i: usize| match &tree.nodes[i] {
                    TreeNode::Split { cover, .. } => *cover,
                    TreeNode::Leaf { cover, .. } => *cover,
                };
                assert_eq!(*cover, cov(*left) + cov(*right));
                assert!(*cover >= 1);
            }
        }
    }

    #[test]
    fn degenerate_forest_matches_single_tree() {
        let ds = toy_dataset(&[
            (vec![0, 9], 0),
            (vec![1, 8], 2),
            (vec![2, 7], 2),
            (vec![3, 6], 5),
            (vec![4, 5], 8),
            (vec![9, 1], 9),
        ]);
        let hp = ForestHyper {
            n_trees: 1,
            bootstrap: false,
            feature_subsample: Some(2),
            min_samples_leaf: 1,
            max_depth: None,
        };
        let forest = train_forest(&ds, &hp, 3).unwrap();
        let tree = train_tree(
            &ds,
            &TreeHyper {
                min_samples_leaf: 1,
                max_depth: None,
            },
            3,
        )
        .unwrap();
        for row in ds.matrix() {
            assert_eq!(forest.predict_row(&row), tree.predict_row(&row));
        }
    }

    #[test]
    fn same_seed_identical_forest() {
        let ds = toy_dataset(&[
            (vec![0, 1], 0),
            (vec![1, 3], 2),
            (vec![2, 0], 3),
            (vec![3, 9], 5),
            (vec![4, 2], 4),
            (vec![8, 8], 9),
        ]);
        let hp = ForestHyper {
            n_trees: 12,
            ..Default::default()
        };
        let a = train_forest(&ds, &hp, 42).unwrap();
        let b = train_forest(&ds, &hp, 42).unwrap();
        assert_eq!(a, b);
        let c = train_forest(&ds, &hp, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forest_prediction_is_mean_of_trees() {
        let ds = toy_dataset(&[
            (vec![0, 1], 0),
            (vec![2, 3], 2),
            (vec![4, 0], 3),
            (vec![6, 9], 5),
            (vec![8, 2], 4),
        ]);
        let forest = train_forest(
            &ds,
            &ForestHyper {
                n_trees: 7,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let row = [3.0, 2.0];
        let mean = forest
            .trees
            .iter()
            .map(|t| t.predict_row(&row))
            .sum::<f64>()
            / forest.trees.len() as f64;
        assert_eq!(forest.predict_row(&row), mean);
    }

    #[test]
    fn prediction_constant_between_thresholds() {
        let ds = toy_dataset(&[
            (vec![0, 0], 0),
            (vec![10, 0], 4),
            (vec![0, 10], 1),
            (vec![10, 10], 6),
        ]);
        let tree = train_tree(
            &ds,
            &TreeHyper {
                min_samples_leaf: 1,
                ..Default::default()
            },
            0,
        )
        .unwrap();
        // thresholds all sit at 5.0; nudges on either side of a row stay put
        for row in [[0.0, 0.0], [10.0, 10.0]] {
            let base = tree.predict_row(&row);
            assert_eq!(tree.predict_row(&[row[0] + 4.9, row[1]]), base);
            assert_eq!(tree.predict_row(&[row[0], row[1] + 4.9]), base);
        }
    }

    #[test]
    fn empty_training_set_errors() {
        let mut ds = toy_dataset(&[(vec![0], 0)]);
        ds.samples.clear();
        assert!(train_tree(&ds, &TreeHyper::default(), 0).is_err());
        assert!(train_forest(&ds, &ForestHyper::default(), 0).is_err());
    }
}
