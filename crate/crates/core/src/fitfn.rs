//! Univariate function fitting: a single Fourier KAN layer against a
//! one-hidden-layer tanh MLP.
//!
//! Training points are stratified over the domain (one uniform draw per
//! equal-width cell); the test grid is the midpoints of 1000 equal cells.
//! Both arms minimize the mean squared error with full-batch Adam. The
//! learning rate is halved whenever the training loss fails to improve by a
//! relative `1e-4` for [`PLATEAU_STEPS`] consecutive steps.

use std::f64::consts::PI;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fkan::{FourierBasis, FourierKanLayer};
use crate::params::{prefixed, Affine, Params};
use crate::rng::derived_rng;
use crate::train::{adam_step, AdamConfig, AdamState};

pub const DEFAULT_STEPS: usize = 5000;
pub const DEFAULT_LEARNING_RATE: f64 = 1e-2;
pub const DEFAULT_MLP_HIDDEN: usize = 64;
pub const PLATEAU_STEPS: usize = 100;
pub const TEST_POINTS: usize = 1000;
const PLATEAU_RELATIVE: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Target {
    /// `ln x`
    Logarithmic,
    /// `sin 2x + cos 3x`
    SinPlusCos,
    /// `2x - 1`
    Linear,
    /// `sin x`
    Sin,
    /// `x³ - 2x² + x`
    Polynomial,
    /// `eˣ`
    Exponential,
    /// `0`
    Zero,
    /// `sin(k x) + cos(k x)`
    Harmonic { k: u32 },
}

impl Target {
    pub const STANDARD_TARGETS: [Target; 6] = [
        Target::Logarithmic,
        Target::SinPlusCos,
        Target::Linear,
        Target::Sin,
        Target::Polynomial,
        Target::Exponential,
    ];

    pub fn eval(self, x: f64) -> f64 {
        match self {
            Target::Logarithmic => x.ln(),
            Target::SinPlusCos => (2.0 * x).sin() + (3.0 * x).cos(),
            Target::Linear => 2.0 * x - 1.0,
            Target::Sin => x.sin(),
            Target::Polynomial => x * x * x - 2.0 * x * x + x,
            Target::Exponential => x.exp(),
            Target::Zero => 0.0,
            Target::Harmonic { k } => (k as f64 * x).sin() + (k as f64 * x).cos(),
        }
    }

    pub fn default_domain(self) -> (f64, f64) {
        match self {
            Target::Logarithmic => (0.1, 4.0),
            Target::Polynomial => (-2.0, 2.0),
            Target::Exponential => (0.0, 2.0),
            _ => (0.0, 2.0 * PI),
        }
    }

    /// Default harmonic count for each target.
    pub fn reference_k(self) -> usize {
        match self {
            Target::Logarithmic => 100,
            Target::SinPlusCos => 10,
            Target::Linear => 200,
            Target::Sin => 10,
            Target::Polynomial => 500,
            Target::Exponential => 120,
            Target::Zero => 1,
            Target::Harmonic { k } => k.max(1) as usize,
        }
    }

    /// Test-MSE threshold for the standard targets at their reference K.
    pub fn threshold(self) -> Option<f64> {
        match self {
            Target::Sin | Target::SinPlusCos => Some(1e-3),
            Target::Linear | Target::Exponential | Target::Logarithmic | Target::Polynomial => Some(1e-2),
            _ => None,
        }
    }

    pub fn name(self) -> String {
        match self {
            Target::Logarithmic => "logarithmic".into(),
            Target::SinPlusCos => "sin_plus_cos".into(),
            Target::Linear => "linear".into(),
            Target::Sin => "sin".into(),
            Target::Polynomial => "polynomial".into(),
            Target::Exponential => "exponential".into(),
            Target::Zero => "zero".into(),
            Target::Harmonic { k } => format!("harmonic{k}"),
        }
    }
}

impl std::str::FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "logarithmic" | "log" => Target::Logarithmic,
            "sin_plus_cos" | "sinpluscos" | "sincos" => Target::SinPlusCos,
            "linear" => Target::Linear,
            "sin" => Target::Sin,
            "polynomial" | "poly" => Target::Polynomial,
            "exponential" | "exp" => Target::Exponential,
            "zero" => Target::Zero,
            other => match other.strip_prefix("harmonic").and_then(|k| k.parse().ok()) {
                Some(k) => Target::Harmonic { k },
                None => return Err(Error::InvalidArgument(format!("unknown target {s:?}"))),
            },
        };
        Ok(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arm {
    FourierKan,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitTask {
    pub target: Target,
    pub domain: (f64, f64),
    pub n_samples: usize,
    #[serde(rename = "K")]
    pub harmonics: usize,
    pub mlp_hidden: usize,
    pub noise_std: f64,
    pub steps: usize,
    pub learning_rate: f64,
}

/// `max(256, 4K)` training points.
pub fn default_samples(harmonics: usize) -> usize {
    256.max(4 * harmonics)
}

impl FitTask {
    pub fn new(target: Target, harmonics: usize) -> Self {
        Self {
            target,
            domain: target.default_domain(),
            n_samples: default_samples(harmonics),
            harmonics,
            mlp_hidden: DEFAULT_MLP_HIDDEN,
            noise_std: 0.0,
            steps: DEFAULT_STEPS,
            learning_rate: DEFAULT_LEARNING_RATE,
        }
    }

    /// The target at its reference K.
    pub fn reference(target: Target) -> Self {
        Self::new(target, target.reference_k())
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidArgument(format!("domain: need finite lo < hi, got ({lo}, {hi})")));
        }
        if self.target == Target::Logarithmic && lo <= 0.0 {
            return Err(Error::Domain(format!("domain: ln x needs a positive domain, got ({lo}, {hi})")));
        }
        if self.n_samples < 16 {
            return Err(Error::InvalidArgument(format!("n_samples: need at least 16, got {}", self.n_samples)));
        }
        if self.harmonics == 0 {
            return Err(Error::InvalidArgument("K: must be positive".into()));
        }
        if self.mlp_hidden == 0 {
            return Err(Error::InvalidArgument("mlp_hidden: must be positive".into()));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise_std: must be >= 0, got {}", self.noise_std)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate: must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }

    /// Stratified training inputs and (possibly noisy) targets.
    pub fn samples(&self, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = derived_rng(seed, 0x6669_7464);
        let (lo, hi) = self.domain;
        let width = (hi - lo) / self.n_samples as f64;
        let xs: Vec<f64> = (0..self.n_samples)
            .map(|i| lo + width * (i as f64 + rng.random::<f64>()))
            .collect();
        let noise = Normal::new(0.0, self.noise_std.max(f64::MIN_POSITIVE)).expect("valid std");
        let ys = xs
            .iter()
            .map(|&x| {
                let y = self.target.eval(x);
                if self.noise_std > 0.0 {
                    y + noise.sample(&mut rng)
                } else {
                    y
                }
            })
            .collect();
        (xs, ys)
    }

    pub fn test_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.domain;
        let width = (hi - lo) / TEST_POINTS as f64;
        (0..TEST_POINTS).map(|i| lo + width * (i as f64 + 0.5)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub x: f64,
    pub target: f64,
    pub prediction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub task: FitTask,
    pub arm: Arm,
    pub seed: u64,
    pub train_mse: f64,
    pub test_mse: f64,
    /// On the test grid.
    pub predictions: Vec<PredictionPoint>,
    pub parameter_count: usize,
    pub epochs: usize,
    pub final_learning_rate: f64,
}

impl FitResult {
    /// `x,target,prediction` rows on the test grid.
    pub fn predictions_csv(&self) -> String {
        let mut out = String::from("x,target,prediction\n");
        for p in &self.predictions {
            out.push_str(&format!("{},{},{}\n", p.x, p.target, p.prediction));
        }
        out
    }
}

/// `1 -> hidden -> 1` with tanh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    pub hidden: Affine,
    pub output: Affine,
}

impl Mlp {
    /// Standard normal-scaled weights; hidden biases place each unit's
    /// transition at a uniform point of the domain.
    pub fn init<R: Rng + ?Sized>(width: usize, domain: (f64, f64), rng: &mut R) -> Result<Self> {
        let mut hidden = Affine::init(1, width, rng)?;
        for j in 0..width {
            let c = domain.0 + (domain.1 - domain.0) * rng.random::<f64>();
            hidden.bias[j] = -hidden.weight[[j, 0]] * c;
        }
        Ok(Self {
            hidden,
            output: Affine::init(width, 1, rng)?,
        })
    }

    fn forward_cache(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, Array2<f64>)> {
        let a = self.hidden.forward(x)?.mapv(f64::tanh);
        let y = self.output.forward(a.view())?;
        Ok((a, y))
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cache(x)?.1)
    }
}

impl Params for Mlp {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = prefixed("hidden", self.hidden.params());
        v.extend(prefixed("output", self.output.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.hidden.params_mut();
        v.extend(self.output.params_mut());
        v
    }
}

enum Fitter {
    Kan { layer: FourierKanLayer, basis: FourierBasis },
    Mlp { mlp: Mlp, x: Array2<f64> },
}

impl Fitter {
    fn predict(&self) -> Result<Array1<f64>> {
        let out = match self {
            Fitter::Kan { layer, basis } => layer.forward_basis(basis),
            Fitter::Mlp { mlp, x } => mlp.forward(x.view())?,
        };
        Ok(out.index_axis_move(Axis(1), 0))
    }

    /// MSE and one Adam step.
    fn step(&mut self, y: &Array1<f64>, state: &mut AdamState, lr: f64) -> Result<f64> {
        let n = y.len() as f64;
        let adam = AdamConfig::default();
        match self {
            Fitter::Kan { layer, basis } => {
                let resid = layer.forward_basis(basis).index_axis_move(Axis(1), 0) - y;
                let upstream = (&resid * (2.0 / n)).insert_axis(Axis(1));
                let mut grad = layer.zeros_like();
                layer.backward_basis(basis, upstream.view(), &mut grad, false)?;
                adam_step(layer, &grad, state, lr, &adam)?;
                Ok(resid.mapv(|r| r * r).sum() / n)
            }
            Fitter::Mlp { mlp, x } => {
                let (a, out) = mlp.forward_cache(x.view())?;
                let resid = out.index_axis_move(Axis(1), 0) - y;
                let upstream = (&resid * (2.0 / n)).insert_axis(Axis(1));
                let mut grad = Mlp {
                    hidden: mlp.hidden.zeros_like(),
                    output: mlp.output.zeros_like(),
                };
                let da = mlp.output.backward(a.view(), upstream.view(), &mut grad.output);
                let dz = da * a.mapv(|t| 1.0 - t * t);
                mlp.hidden.backward(x.view(), dz.view(), &mut grad.hidden);
                adam_step(mlp, &grad, state, lr, &adam)?;
                Ok(resid.mapv(|r| r * r).sum() / n)
            }
        }
    }

    fn parameter_count(&self) -> usize {
        match self {
            Fitter::Kan { layer, .. } => layer.parameter_count(),
            Fitter::Mlp { mlp, .. } => mlp.parameter_count(),
        }
    }

    fn adam_state(&self) -> AdamState {
        match self {
            Fitter::Kan { layer, .. } => AdamState::new(layer),
            Fitter::Mlp { mlp, .. } => AdamState::new(mlp),
        }
    }

    fn with_inputs(&self, xs: &[f64]) -> Result<Fitter> {
        let x = Array2::from_shape_vec((xs.len(), 1), xs.to_vec()).expect("column");
        Ok(match self {
            Fitter::Kan { layer, .. } => Fitter::Kan {
                basis: layer.basis(x.view())?,
                layer: layer.clone(),
            },
            Fitter::Mlp { mlp, .. } => Fitter::Mlp { mlp: mlp.clone(), x },
        })
    }
}

fn mse(a: &Array1<f64>, b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, t)| (p - t).powi(2)).sum::<f64>() / b.len() as f64
}

/// Trains one arm on `task` and evaluates it on the test grid.
pub fn run_fit(task: &FitTask, arm: Arm, seed: u64) -> Result<FitResult> {
    task.validate()?;
    let (xs, ys) = task.samples(seed);
    let x = Array2::from_shape_vec((xs.len(), 1), xs).expect("column");
    let y = Array1::from(ys);
    let mut rng = derived_rng(seed, 0x696e_6974);
    let mut fitter = match arm {
        Arm::FourierKan => {
            let layer = FourierKanLayer::init(1, 1, task.harmonics, true, &mut rng)?;
            Fitter::Kan {
                basis: layer.basis(x.view())?,
                layer,
            }
        }
        Arm::Mlp => Fitter::Mlp {
            mlp: Mlp::init(task.mlp_hidden, task.domain, &mut rng)?,
            x,
        },
    };

    let mut state = fitter.adam_state();
    let mut lr = task.learning_rate;
    let (mut best, mut stale) = (f64::INFINITY, 0);
    for step in 0..task.steps {
        let loss = fitter
            .step(&y, &mut state, lr)
            .map_err(|e| Error::Numeric(format!("{} {arm:?} step {step} (lr {lr}): {e}", task.target.name())))?;
        if !loss.is_finite() {
            return Err(Error::Numeric(format!(
                "{} {arm:?} diverged at step {step} (lr {lr}, previous best loss {best})",
                task.target.name()
            )));
        }
        if loss < best * (1.0 - PLATEAU_RELATIVE) {
            best = loss;
            stale = 0;
        } else {
            stale += 1;
            if stale >= PLATEAU_STEPS {
                lr *= 0.5;
                stale = 0;
            }
        }
    }

    let train_mse = mse(&fitter.predict()?, y.as_slice().expect("contiguous"));
    let grid = task.test_grid();
    let truth: Vec<f64> = grid.iter().map(|&x| task.target.eval(x)).collect();
    let pred = fitter.with_inputs(&grid)?.predict()?;
    let test_mse = mse(&pred, &truth);
    let predictions = grid
        .iter()
        .zip(&truth)
        .zip(pred.iter())
        .map(|((&x, &t), &p)| PredictionPoint {
            x,
            target: t,
            prediction: p,
        })
        .collect();
    Ok(FitResult {
        task: task.clone(),
        arm,
        seed,
        train_mse,
        test_mse,
        predictions,
        parameter_count: fitter.parameter_count(),
        epochs: task.steps,
        final_learning_rate: lr,
    })
}

/// One KAN fit per K on shared samples and seed, ordered by K.
pub fn sweep_k(task: &FitTask, k_list: &[usize], seed: u64) -> Result<Vec<FitResult>> {
    if k_list.is_empty() {
        return Err(Error::InvalidArgument("sweep_k needs at least one K".into()));
    }
    let mut ks = k_list.to_vec();
    ks.sort_unstable();
    let runs: Vec<FitTask> = ks
        .iter()
        .map(|&k| FitTask {
            harmonics: k,
            ..task.clone()
        })
        .collect();
    crate::parallel::try_map(&runs, |t| run_fit(t, Arm::FourierKan, seed))
}
