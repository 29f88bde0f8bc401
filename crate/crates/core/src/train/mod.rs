//! Training: Adam, dataset splits, ROC-AUC and the epoch loop.
//!
//! The loss of a batch is the mean over its graphs of the summed masked
//! binary cross-entropy of each graph. Model selection keeps the parameters
//! with the best validation macro ROC-AUC, ties broken by lower validation
//! loss. When the validation fold cannot be scored (one class in every task)
//! the validation loss alone is used, and with no validation fold the last
//! epoch is kept.

mod adam;
mod metrics;
mod split;

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use metrics::{macro_roc_auc, roc_auc, MacroAuc};
pub use split::{random_split, SplitProvenance, SplitSpec, DEFAULT_RATIOS};

use crate::error::{Error, Result};
use crate::model::{ModelConfig, Variant, DEFAULT_HIDDEN_DIM};
use crate::model::Model;
use crate::molgraph::{EdgeKind, Label, MolecularGraph, DEFAULT_CUTOFF};
use crate::params::Params;
use crate::rng::derived_rng;

pub const DEFAULT_PATIENCE: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    #[serde(rename = "K")]
    pub harmonics: usize,
    pub n_layers: usize,
    /// Å; used when molecules are featurized for this run.
    pub cutoff: f64,
    pub epochs: usize,
    pub seed: u64,
    pub variant: Variant,
    #[serde(default = "default_beta1")]
    pub beta1: f64,
    #[serde(default = "default_beta2")]
    pub beta2: f64,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_hidden")]
    pub hidden_dim: usize,
    /// Epochs without validation improvement before stopping.
    #[serde(default = "default_patience")]
    pub patience: usize,
}

fn default_beta1() -> f64 {
    0.9
}
fn default_beta2() -> f64 {
    0.999
}
fn default_eps() -> f64 {
    1e-8
}
fn default_hidden() -> usize {
    DEFAULT_HIDDEN_DIM
}
fn default_patience() -> usize {
    DEFAULT_PATIENCE
}

impl Default for TrainConfig {
    /// The BBBP configuration: batch 128, LR 1e-4, K=2, one layer.
    fn default() -> Self {
        Self {
            batch_size: 128,
            learning_rate: 1e-4,
            harmonics: 2,
            n_layers: 1,
            cutoff: DEFAULT_CUTOFF,
            epochs: 1000,
            seed: 0,
            variant: Variant::KaGnn,
            beta1: default_beta1(),
            beta2: default_beta2(),
            eps: default_eps(),
            hidden_dim: DEFAULT_HIDDEN_DIM,
            patience: DEFAULT_PATIENCE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: String| Err(Error::InvalidArgument(format!("{field}: {why}")));
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive".into());
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate", format!("must be positive and finite, got {}", self.learning_rate));
        }
        if self.harmonics == 0 {
            return bad("K", "must be positive".into());
        }
        if self.n_layers == 0 {
            return bad("n_layers", "must be positive".into());
        }
        if !(self.cutoff >= 0.0 && self.cutoff.is_finite()) {
            return bad("cutoff", format!("must be finite and >= 0, got {}", self.cutoff));
        }
        for (field, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(field, format!("must lie in [0, 1), got {b}"));
            }
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return bad("eps", format!("must be positive, got {}", self.eps));
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be positive".into());
        }
        if self.patience == 0 {
            return bad("patience", "must be positive".into());
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn model_config(&self, n_tasks: usize) -> ModelConfig {
        let mut c = ModelConfig::new(self.variant, self.n_layers, self.harmonics, n_tasks);
        c.hidden_dim = self.hidden_dim;
        c.cutoff = self.cutoff;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_graphs: usize,
    pub n_tasks: usize,
    pub covalent_edges: usize,
    pub cutoff_edges: usize,
}

impl DatasetSummary {
    pub fn of(graphs: &[MolecularGraph]) -> Self {
        Self {
            n_graphs: graphs.len(),
            n_tasks: graphs.first().map_or(0, |g| g.n_tasks()),
            covalent_edges: graphs.iter().map(|g| g.count_edges(EdgeKind::Covalent)).sum(),
            cutoff_edges: graphs.iter().map(|g| g.count_edges(EdgeKind::Cutoff)).sum(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_auc: Option<f64>,
    pub valid_loss: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    ValidAuc,
    ValidLoss,
    LastEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub config: TrainConfig,
    pub split_provenance: SplitProvenance,
    /// Train, valid and test sizes.
    pub split_sizes: [usize; 3],
    pub dataset: DatasetSummary,
    pub parameter_count: usize,
    pub epochs: Vec<EpochRecord>,
    pub selection: Selection,
    /// Epoch whose parameters were evaluated on test; 0 means untrained.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub test_auc: f64,
    pub test_auc_per_task: Vec<Option<f64>>,
    /// Kept out of the JSON so reports are byte-reproducible.
    #[serde(skip)]
    pub wall_clock: Duration,
}

impl RunReport {
    /// Flat per-epoch CSV: `epoch,train_loss,valid_auc,valid_loss`.
    pub fn epochs_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
        let mut out = String::from("epoch,train_loss,valid_auc,valid_loss\n");
        for e in &self.epochs {
            out.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, opt(e.valid_auc), opt(e.valid_loss)));
        }
        out
    }
}

pub struct TrainOutcome {
    pub report: RunReport,
    /// Parameters selected for the test evaluation.
    pub model: Model,
}

fn subset<'a>(graphs: &'a [MolecularGraph], idx: &[usize]) -> Vec<&'a MolecularGraph> {
    idx.iter().map(|&i| &graphs[i]).collect()
}

/// Masked macro ROC-AUC of `model` on `graphs`.
pub fn evaluate(model: &Model, graphs: &[&MolecularGraph]) -> Result<MacroAuc> {
    let preds = model.predict(graphs)?;
    let labels: Vec<&[Label]> = graphs.iter().map(|g| g.labels.as_slice()).collect();
    macro_roc_auc(&preds, &labels)
}

fn mean_loss(model: &Model, graphs: &[&MolecularGraph]) -> Result<f64> {
    Ok(model.batch_loss(graphs)? / graphs.len() as f64)
}

/// Minibatch Adam training with best-validation model selection.
pub fn train_loop(graphs: &[MolecularGraph], config: &TrainConfig, split: &SplitSpec) -> Result<TrainOutcome> {
    let start = Instant::now();
    config.validate()?;
    split.validate(graphs.len())?;
    let dataset = DatasetSummary::of(graphs);
    let mut model = Model::init(&config.model_config(dataset.n_tasks), config.seed)?;
    let (valid, test) = (subset(graphs, &split.valid), subset(graphs, &split.test));
    let adam = config.adam();
    let mut state = AdamState::new(&model);
    let mut rng = derived_rng(config.seed, 0x73687566);
    let mut order = split.train.clone();

    let mut records = Vec::new();
    let mut best: Option<((f64, f64), usize, Model)> = None;
    let mut selection = Selection::LastEpoch;
    let mut since_best = 0;
    let mut stopped_early = false;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = subset(graphs, chunk);
            let (loss, mut grad) = model.batch_loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss {loss} at epoch {epoch}, batch {b}")));
            }
            total += loss;
            let scale = 1.0 / batch.len() as f64;
            for g in grad.params_mut() {
                g.iter_mut().for_each(|v| *v *= scale);
            }
            adam_step(&mut model, &grad, &mut state, config.learning_rate, &adam)
                .map_err(|e| Error::Numeric(format!("epoch {epoch}, batch {b}: {e}")))?;
        }
        let train_loss = total / order.len() as f64;

        let (valid_auc, valid_loss) = if valid.is_empty() {
            (None, None)
        } else {
            let auc = match evaluate(&model, &valid) {
                Ok(m) => Some(m.mean),
                Err(Error::Evaluation(_)) => None,
                Err(e) => return Err(e),
            };
            (auc, Some(mean_loss(&model, &valid)?))
        };
        records.push(EpochRecord {
            epoch,
            train_loss,
            valid_auc,
            valid_loss,
        });

        // ranked by (AUC, -loss) lexicographically; AUC often saturates on small folds
        let (score, sel) = match (valid_auc, valid_loss) {
            (Some(a), Some(l)) => ((a, -l), Selection::ValidAuc),
            (None, Some(l)) => ((0.0, -l), Selection::ValidLoss),
            _ => ((0.0, 0.0), Selection::LastEpoch),
        };
        selection = sel;
        let improved = sel == Selection::LastEpoch || best.as_ref().is_none_or(|(s, _, _)| score > *s);
        if improved {
            best = Some((score, epoch, model.clone()));
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.patience {
                stopped_early = true;
                log::info!("early stop at epoch {epoch}; best epoch {}", best.as_ref().map_or(0, |b| b.1));
                break;
            }
        }
    }

    let (best_epoch, model) = match best {
        Some((_, e, m)) => (e, m),
        None => (0, model),
    };
    let test_eval = evaluate(&model, &test)?;
    let report = RunReport {
        config: config.clone(),
        split_provenance: split.provenance,
        split_sizes: [split.train.len(), split.valid.len(), split.test.len()],
        dataset,
        parameter_count: model.parameter_count(),
        epochs: records,
        selection,
        best_epoch,
        stopped_early,
        test_auc: test_eval.mean,
        test_auc_per_task: test_eval.per_task,
        wall_clock: start.elapsed(),
    };
    Ok(TrainOutcome { report, model })
}

#[derive(Debug, Clone)]
pub enum SplitSource {
    /// A fresh seeded split per repeat.
    Random { ratios: (f64, f64, f64) },
    /// The same split for every repeat.
    Fixed(SplitSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatedReport {
    pub runs: Vec<RunReport>,
    pub test_auc_mean: f64,
    /// Population standard deviation over the runs.
    pub test_auc_std: f64,
    /// Whether the split changed between repeats (initialization always does).
    pub split_varies: bool,
}

/// Runs `repeats` trainings with seeds `seed, seed + 1, ...`.
pub fn train_repeated(
    graphs: &[MolecularGraph],
    config: &TrainConfig,
    source: &SplitSource,
    repeats: usize,
) -> Result<(RepeatedReport, Vec<Model>)> {
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats: must be positive".into()));
    }
    let mut runs = Vec::with_capacity(repeats);
    let mut models = Vec::with_capacity(repeats);
    for r in 0..repeats {
        let mut cfg = config.clone();
        cfg.seed = config.seed.wrapping_add(r as u64);
        let split = match source {
            SplitSource::Random { ratios } => random_split(graphs.len(), *ratios, cfg.seed)?,
            SplitSource::Fixed(s) => s.clone(),
        };
        let out = train_loop(graphs, &cfg, &split)?;
        runs.push(out.report);
        models.push(out.model);
    }
    let aucs: Vec<f64> = runs.iter().map(|r| r.test_auc).collect();
    let (mean, std) = mean_std(&aucs);
    Ok((
        RepeatedReport {
            runs,
            test_auc_mean: mean,
            test_auc_std: std,
            split_varies: matches!(source, SplitSource::Random { .. }),
        },
        models,
    ))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
