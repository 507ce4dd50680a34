//! From-scratch regression models: CART tree, random forest, and MLP, with
//! seeded training, MAE/RMSE evaluation, and lossless JSON serialization.
//!
//! All training is deterministic given (data, hyperparameters, seed) and
//! independent of thread count: each tree owns an RNG stream derived from
//! the training seed, and reductions run in fixed order.

mod mlp;
mod tree;

pub use mlp::{train_mlp, MlpHyper, MlpModel};
pub use tree::{train_forest, train_tree, ForestHyper, ForestModel, TreeHyper, TreeModel, TreeNode};

use crate::dataset::DomainDataset;
use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Anything that maps a feature row to a prediction.
pub trait Predictor {
    fn n_features(&self) -> usize;

    fn predict_row(&self, row: &[f64]) -> f64;

    /// Batched prediction; dimension mismatches are reported once up front.
    fn predict(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
        for row in rows {
            if row.len() != self.n_features() {
                return Err(Error::Invalid(format!(
                    "prediction input has {} features, model expects {}",
                    row.len(),
                    self.n_features()
                )));
            }
        }
        Ok(rows.iter().map(|r| self.predict_row(r)).collect())
    }
}

/// A trained model of any family, tagged with its training seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Model {
    Tree(TreeModel),
    Forest(ForestModel),
    Mlp(MlpModel),
}

impl Model {
    pub fn seed(&self) -> u64 {
        match self {
            Model::Tree(m) => m.seed,
            Model::Forest(m) => m.seed,
            Model::Mlp(m) => m.seed,
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Model::Tree(_) => "dt",
            Model::Forest(_) => "rf",
            Model::Mlp(_) => "mlp",
        }
    }
}

impl Predictor for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Tree(m) => m.n_features(),
            Model::Forest(m) => m.n_features(),
            Model::Mlp(m) => m.n_features(),
        }
    }

    fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            Model::Tree(m) => m.predict_row(row),
            Model::Forest(m) => m.predict_row(row),
            Model::Mlp(m) => m.predict_row(row),
        }
    }
}

/// MAE/RMSE for one trained model on one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeedEval {
    pub seed: u64,
    pub mae: f64,
    pub rmse: f64,
}

/// Per-seed metrics plus mean and sample standard deviation across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub entries: Vec<SeedEval>,
    pub mae_mean: f64,
    pub mae_std: f64,
    pub rmse_mean: f64,
    pub rmse_std: f64,
}

/// Evaluate a model on a test set: MAE and RMSE over its samples.
pub fn evaluate<M: Predictor + ?Sized>(model: &M, test: &DomainDataset) -> Result<SeedEval>
where
    M: Seeded,
{
    evaluate_with_seed(model, test, model.training_seed())
}

/// Seed accessor for evaluation bookkeeping.
pub trait Seeded {
    fn training_seed(&self) -> u64;
}

impl Seeded for Model {
    fn training_seed(&self) -> u64 {
        self.seed()
    }
}

impl Seeded for TreeModel {
    fn training_seed(&self) -> u64 {
        self.seed
    }
}

impl Seeded for ForestModel {
    fn training_seed(&self) -> u64 {
        self.seed
    }
}

impl Seeded for MlpModel {
    fn training_seed(&self) -> u64 {
        self.seed
    }
}

pub fn evaluate_with_seed<M: Predictor + ?Sized>(
    model: &M,
    test: &DomainDataset,
    seed: u64,
) -> Result<SeedEval> {
    if test.is_empty() {
        return Err(Error::Invalid("cannot evaluate on an empty test set".into()));
    }
    let preds = model.predict(&test.matrix())?;
    let targets = test.targets();
    let n = preds.len() as f64;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    for (p, y) in preds.iter().zip(&targets) {
        let r = p - y;
        abs_sum += r.abs();
        sq_sum += r * r;
    }
    Ok(SeedEval {
        seed,
        mae: abs_sum / n,
        rmse: (sq_sum / n).sqrt(),
    })
}

/// Aggregate per-seed entries into mean and sample standard deviation
/// (divisor n-1; zero for a single seed).
pub fn aggregate_eval(entries: Vec<SeedEval>) -> Result<EvalReport> {
    if entries.is_empty() {
        return Err(Error::Invalid("no evaluation entries to aggregate".into()));
    }
    let maes: Vec<f64> = entries.iter().map(|e| e.mae).collect();
    let rmses: Vec<f64> = entries.iter().map(|e| e.rmse).collect();
    let (mae_mean, mae_std) = mean_sample_std(&maes);
    let (rmse_mean, rmse_std) = mean_sample_std(&rmses);
    Ok(EvalReport {
        entries,
        mae_mean,
        mae_std,
        rmse_mean,
        rmse_std,
    })
}

fn mean_sample_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Serialize a model as self-describing JSON. `serde_json` prints floats via
/// the shortest decimal that round-trips bit-exactly, so a load gives back a
/// model with identical predictions.
pub fn save_model(path: &std::path::Path, model: &Model) -> Result<()> {
    #[derive(Serialize)]
    struct Envelope<'a> {
        format_version: u32,
        model: &'a Model,
    }
    let payload = serde_json::to_string_pretty(&Envelope {
        format_version: 1,
        model,
    })?;
    std::fs::write(path, payload).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_model(path: &std::path::Path) -> Result<Model> {
    #[derive(Deserialize)]
    struct Envelope {
        format_version: u32,
        model: Model,
    }
    let raw =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let env: Envelope = serde_json::from_str(&raw)?;
    if env.format_version != 1 {
        return Err(Error::Schema(format!(
            "unsupported model format version {}",
            env.format_version
        )));
    }
    Ok(env.model)
}
