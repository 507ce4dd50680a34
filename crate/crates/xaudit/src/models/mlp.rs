//! Multilayer perceptron for tabular regression, trained with
//! moment-adapted gradient descent and early stopping on validation MAE.
//!
//! Inputs are standardized with training-set statistics; trees are
//! scale-invariant so only the MLP standardizes. Training is sequential and
//! seeded, so identical (data, hyperparameters, seed) give identical weights.

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Predictor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpHyper {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden: vec![64, 32],
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 500,
            patience: 25,
        }
    }
}

/// Weights and biases, one entry per layer; `weights[l]` is out x in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct MlpParams {
    pub weights: Vec<Vec<Vec<f64>>>,
    pub biases: Vec<Vec<f64>>,
}

impl MlpParams {
    fn zeros_like(&self) -> MlpParams {
        MlpParams {
            weights: self
                .weights
                .iter()
                .map(|w| w.iter().map(|row| vec![0.0; row.len()]).collect())
                .collect(),
            biases: self.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .flatten()
            .flatten()
            .chain(self.biases.iter().flatten())
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub layer_sizes: Vec<usize>,
    pub(crate) params: MlpParams,
    pub activation: Activation,
    pub input_mean: Vec<f64>,
    /// Training-set standard deviation with zeros replaced by 1.
    pub input_std: Vec<f64>,
    pub seed: u64,
}

impl MlpModel {
    /// Build a model from explicit parameters (used for hand-constructed
    /// models in analyses and tests). Dimensions must chain from p to 1 and
    /// all values must be finite.
    pub fn from_parts(
        input_mean: Vec<f64>,
        input_std: Vec<f64>,
        weights: Vec<Vec<Vec<f64>>>,
        biases: Vec<Vec<f64>>,
        seed: u64,
    ) -> Result<MlpModel> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Invalid("mlp needs matching weight/bias layers".into()));
        }
        let p = input_mean.len();
        if input_std.len() != p {
            return Err(Error::Invalid("input mean/std length mismatch".into()));
        }
        let mut sizes = vec![p];
        for (w, b) in weights.iter().zip(&biases) {
            let out = w.len();
            if out == 0 || b.len() != out {
                return Err(Error::Invalid("mlp layer with empty or mismatched bias".into()));
            }
            let expect_in = *sizes.last().unwrap();
            if w.iter().any(|row| row.len() != expect_in) {
                return Err(Error::Invalid(format!(
                    "mlp layer expects input width {expect_in}"
                )));
            }
            sizes.push(out);
        }
        if *sizes.last().unwrap() != 1 {
            return Err(Error::Invalid("mlp output layer must have width 1".into()));
        }
        let params = MlpParams { weights, biases };
        if !params.is_finite() || !input_mean.iter().chain(&input_std).all(|v| v.is_finite()) {
            return Err(Error::Numeric("mlp parameters must be finite".into()));
        }
        let input_std = input_std
            .into_iter()
            .map(|s| if s == 0.0 { 1.0 } else { s })
            .collect();
        Ok(MlpModel {
            layer_sizes: sizes,
            params,
            activation: Activation::Relu,
            input_mean,
            input_std,
            seed,
        })
    }

    fn standardize(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.input_mean.iter().zip(&self.input_std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }
}

impl Predictor for MlpModel {
    fn n_features(&self) -> usize {
        self.layer_sizes[0]
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        forward(&self.params, &self.standardize(row))
    }
}

fn forward(params: &MlpParams, input: &[f64]) -> f64 {
    let n_layers = params.weights.len();
    let mut h = input.to_vec();
    for l in 0..n_layers {
        let w = &params.weights[l];
        let b = &params.biases[l];
        let mut out = vec![0.0; w.len()];
        for (o, (row, bias)) in out.iter_mut().zip(w.iter().zip(b)) {
            let mut acc = *bias;
            for (wi, hi) in row.iter().zip(&h) {
                acc += wi * hi;
            }
            *o = if l + 1 < n_layers { acc.max(0.0) } else { acc };
        }
        h = out;
    }
    h[0]
}

/// Mean squared-error loss (halved) over a batch of standardized rows.
pub(crate) fn batch_loss(params: &MlpParams, rows: &[Vec<f64>], targets: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (row, &y) in rows.iter().zip(targets) {
        let d = forward(params, row) - y;
        loss += 0.5 * d * d;
    }
    loss / rows.len() as f64
}

/// Backpropagated gradient of `batch_loss` in the same shapes as the params.
pub(crate) fn batch_grad(params: &MlpParams, rows: &[Vec<f64>], targets: &[f64]) -> MlpParams {
    let n_layers = params.weights.len();
    let mut grad = params.zeros_like();
    let scale = 1.0 / rows.len() as f64;

    for (row, &y) in rows.iter().zip(targets) {
        // forward pass keeping activations per layer
        let mut acts: Vec<Vec<f64>> = Vec::with_capacity(n_layers + 1);
        acts.push(row.clone());
        for l in 0..n_layers {
            let w = &params.weights[l];
            let b = &params.biases[l];
            let prev = &acts[l];
            let mut out = vec![0.0; w.len()];
            for (o, (wrow, bias)) in out.iter_mut().zip(w.iter().zip(b)) {
                let mut acc = *bias;
                for (wi, hi) in wrow.iter().zip(prev) {
                    acc += wi * hi;
                }
                *o = if l + 1 < n_layers { acc.max(0.0) } else { acc };
            }
            acts.push(out);
        }

        // backward pass; hidden activations are ReLU so act > 0 gates flow
        let mut delta = vec![(acts[n_layers][0] - y) * scale];
        for l in (0..n_layers).rev() {
            let prev = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                grad.biases[l][o] += d;
                for (i, hi) in prev.iter().enumerate() {
                    grad.weights[l][o][i] += d * hi;
                }
            }
            if l > 0 {
                let mut prev_delta = vec![0.0; prev.len()];
                for (o, d) in delta.iter().enumerate() {
                    for (i, pd) in prev_delta.iter_mut().enumerate() {
                        *pd += params.weights[l][o][i] * d;
                    }
                }
                for (pd, a) in prev_delta.iter_mut().zip(prev) {
                    if *a <= 0.0 {
                        *pd = 0.0;
                    }
                }
                delta = prev_delta;
            }
        }
    }
    grad
}

struct Adam {
    m: MlpParams,
    v: MlpParams,
    t: u64,
    lr: f64,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(shape: &MlpParams, lr: f64) -> Adam {
        Adam {
            m: shape.zeros_like(),
            v: shape.zeros_like(),
            t: 0,
            lr,
        }
    }

    fn step(&mut self, params: &mut MlpParams, grad: &MlpParams) {
        self.t += 1;
        let bc1 = 1.0 - Self::BETA1.powi(self.t as i32);
        let bc2 = 1.0 - Self::BETA2.powi(self.t as i32);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64| {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            let mhat = *m / bc1;
            let vhat = *v / bc2;
            *p -= lr * mhat / (vhat.sqrt() + Self::EPS);
        };
        for l in 0..params.weights.len() {
            for o in 0..params.weights[l].len() {
                for i in 0..params.weights[l][o].len() {
                    update(
                        &mut params.weights[l][o][i],
                        grad.weights[l][o][i],
                        &mut self.m.weights[l][o][i],
                        &mut self.v.weights[l][o][i],
                        self.lr,
                    );
                }
                update(
                    &mut params.biases[l][o],
                    grad.biases[l][o],
                    &mut self.m.biases[l][o],
                    &mut self.v.biases[l][o],
                    self.lr,
                );
            }
        }
    }
}

/// Train an MLP with early stopping on validation MAE; the best-validation
/// weights are restored before returning.
pub fn train_mlp(
    train: &DomainDataset,
    val: &DomainDataset,
    hp: &MlpHyper,
    seed: u64,
) -> Result<MlpModel> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Invalid("mlp training needs non-empty train and val sets".into()));
    }
    if hp.batch_size == 0 || hp.max_epochs == 0 {
        return Err(Error::Invalid("mlp batch size and epochs must be positive".into()));
    }
    let p = train.schema.p();
    let stats = crate::dataset::compute_stats(train)?;
    let input_std: Vec<f64> = stats
        .sigma
        .iter()
        .map(|&s| if s == 0.0 { 1.0 } else { s })
        .collect();
    let standardize = |rows: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
        rows.into_iter()
            .map(|row| {
                row.iter()
                    .zip(stats.mu.iter().zip(&input_std))
                    .map(|(x, (m, s))| (x - m) / s)
                    .collect()
            })
            .collect()
    };
    let x_train = standardize(train.matrix());
    let y_train = train.targets();
    let x_val = standardize(val.matrix());
    let y_val = val.targets();

    // He-uniform initialization per layer
    let mut sizes = vec![p];
    sizes.extend(&hp.hidden);
    sizes.push(1);
    let mut init_rng = stream_rng(seed, Stream::MlpInit, 0);
    let mut weights = Vec::with_capacity(sizes.len() - 1);
    let mut biases = Vec::with_capacity(sizes.len() - 1);
    for l in 0..sizes.len() - 1 {
        let fan_in = sizes[l];
        let limit = (6.0 / fan_in as f64).sqrt();
        weights.push(
            (0..sizes[l + 1])
                .map(|_| (0..fan_in).map(|_| init_rng.gen_range(-limit..limit)).collect())
                .collect::<Vec<Vec<f64>>>(),
        );
        biases.push(vec![0.0; sizes[l + 1]]);
    }
    let mut params = MlpParams { weights, biases };
    let mut adam = Adam::new(&params, hp.learning_rate);
    let mut shuffle_rng = stream_rng(seed, Stream::MlpShuffle, 0);

    let mut best_params = params.clone();
    let mut best_mae = f64::INFINITY;
    let mut epochs_since_best = 0usize;

    let val_mae = |params: &MlpParams| -> f64 {
        let mut sum = 0.0;
        for (row, &y) in x_val.iter().zip(&y_val) {
            sum += (forward(params, row) - y).abs();
        }
        sum / x_val.len() as f64
    };

    let mut order: Vec<usize> = (0..x_train.len()).collect();
    for epoch in 0..hp.max_epochs {
        order.shuffle(&mut shuffle_rng);
        for chunk in order.chunks(hp.batch_size) {
            let rows: Vec<Vec<f64>> = chunk.iter().map(|&i| x_train[i].clone()).collect();
            let ys: Vec<f64> = chunk.iter().map(|&i| y_train[i]).collect();
            let loss = batch_loss(&params, &rows, &ys);
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
            }
            let grad = batch_grad(&params, &rows, &ys);
            adam.step(&mut params, &grad);
        }
        if !params.is_finite() {
            return Err(Error::Numeric(format!("training diverged at epoch {epoch}")));
        }
        let mae = val_mae(&params);
        if mae + 1e-12 < best_mae {
            best_mae = mae;
            best_params = params.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= hp.patience {
                break;
            }
        }
    }

    let mut sizes_out = vec![p];
    for w in &best_params.weights {
        sizes_out.push(w.len());
    }
    Ok(MlpModel {
        layer_sizes: sizes_out,
        params: best_params,
        activation: Activation::Relu,
        input_mean: stats.mu,
        input_std,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::tests::toy_dataset;
    use rand::Rng as _;

    fn small_hp() -> MlpHyper {
        MlpHyper {
            hidden: vec![8],
            learning_rate: 5e-3,
            batch_size: 8,
            max_epochs: 200,
            patience: 20,
        }
    }

    #[test]
    fn zero_target_trains_to_near_zero() {
        let rows: Vec<(Vec<u32>, i64)> = (0..40).map(|i| (vec![i % 7, (i * 3) % 5], 0)).collect();
        let ds = toy_dataset(&rows);
        let model = train_mlp(&ds, &ds, &small_hp(), 0).unwrap();
        let eval = crate::models::evaluate(&model, &ds).unwrap();
        assert!(eval.mae < 0.05, "val MAE {} too high", eval.mae);
    }

    #[test]
    fn same_seed_identical_weights() {
        let rows: Vec<(Vec<u32>, i64)> =
            (0..30).map(|i| (vec![i, i * 2 % 11], (i % 5) as i64)).collect();
        let ds = toy_dataset(&rows);
        let a = train_mlp(&ds, &ds, &small_hp(), 9).unwrap();
        let b = train_mlp(&ds, &ds, &small_hp(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_weights_predict_bias() {
        let p = 3;
        let model = MlpModel::from_parts(
            vec![0.0; p],
            vec![1.0; p],
            vec![vec![vec![0.0; p]; 4], vec![vec![0.0; 4]]],
            vec![vec![0.0; 4], vec![2.5]],
            0,
        )
        .unwrap();
        assert_eq!(model.predict_row(&[9.0, -4.0, 2.0]), 2.5);
    }

    #[test]
    fn from_parts_rejects_bad_shapes() {
        assert!(MlpModel::from_parts(
            vec![0.0; 2],
            vec![1.0; 2],
            vec![vec![vec![0.0; 3]]], // expects input width 2
            vec![vec![0.0]],
            0
        )
        .is_err());
        assert!(MlpModel::from_parts(
            vec![0.0],
            vec![1.0],
            vec![vec![vec![f64::NAN]]],
            vec![vec![0.0]],
            0
        )
        .is_err());
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        let mut rng = crate::rng::stream_rng(5, crate::rng::Stream::MlpInit, 99);
        let sizes = [4usize, 5, 3, 1];
        let weights: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|l| {
                (0..sizes[l + 1])
                    .map(|_| (0..sizes[l]).map(|_| rng.gen_range(-0.8..0.8)).collect())
                    .collect()
            })
            .collect();
        let biases: Vec<Vec<f64>> = (0..3)
            .map(|l| (0..sizes[l + 1]).map(|_| rng.gen_range(-0.3..0.3)).collect())
            .collect();
        let params = MlpParams { weights, biases };
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let targets: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();

        let analytic = batch_grad(&params, &rows, &targets);
        let h = 1e-5;
        let mut checked = 0usize;
        for l in 0..params.weights.len() {
            for o in 0..params.weights[l].len() {
                for i in 0..params.weights[l][o].len() {
                    let mut plus = params.clone();
                    plus.weights[l][o][i] += h;
                    let mut minus = params.clone();
                    minus.weights[l][o][i] -= h;
                    let fd = (batch_loss(&plus, &rows, &targets)
                        - batch_loss(&minus, &rows, &targets))
                        / (2.0 * h);
                    let an = analytic.weights[l][o][i];
                    let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                    assert!(rel < 1e-4, "weight[{l}][{o}][{i}]: {an} vs {fd}");
                    checked += 1;
                }
                let mut plus = params.clone();
                plus.biases[l][o] += h;
                let mut minus = params.clone();
                minus.biases[l][o] -= h;
                let fd = (batch_loss(&plus, &rows, &targets)
                    - batch_loss(&minus, &rows, &targets))
                    / (2.0 * h);
                let an = analytic.biases[l][o];
                let rel = (an - fd).abs() / an.abs().max(fd.abs()).max(1e-6);
                assert!(rel < 1e-4, "bias[{l}][{o}]: {an} vs {fd}");
            }
        }
        assert!(checked > 30);
    }
}
