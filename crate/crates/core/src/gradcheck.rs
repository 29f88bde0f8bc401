//! Finite-difference checks of every analytic gradient in the crate.
//!
//! Layer checks (Fourier KAN, affine) compare against central differences
//! of a separately written naive objective `sum(upstream ⊙ forward(x))`,
//! evaluated in double-double arithmetic so that gradient entries close to
//! zero are resolved; one Richardson step removes the `h²` term. Model
//! checks perturb every parameter of a small KA-GNN / KA-GAT and take
//! Richardson-extrapolated central differences of the summed loss in plain
//! `f64`.
//!
//! Errors are `|a - n| / max(|a|, |n|, 1e-8)`.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fkan::FourierKanLayer;
use crate::model::{Model, ModelConfig, Variant};
use crate::molgraph::{build_graph, Atom, Bond, BondDirection, BondType, MolecularGraph, Molecule};
use crate::params::{Affine, Params};
use crate::rng::derived_rng;

pub const LAYER_TOLERANCE: f64 = 1e-6;
pub const MODEL_TOLERANCE: f64 = 1e-5;
const LAYER_STEP: f64 = 1e-5;
/// Base step for the end-to-end check; refined twice by Richardson extrapolation.
const MODEL_STEP: f64 = 4e-3;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckConfig {
    pub seed: u64,
    /// Random Fourier KAN (layer, input, upstream) triples.
    pub layer_cases: usize,
    pub affine_cases: usize,
    /// Random small graphs per model variant.
    pub graphs: usize,
    #[serde(rename = "K")]
    pub harmonics: usize,
    pub hidden_dim: usize,
    pub n_layers: usize,
    pub n_tasks: usize,
    /// Entries checked per parameter tensor and graph, drawn at random;
    /// 0 checks every entry.
    #[serde(default = "default_coords")]
    pub coords_per_tensor: usize,
    /// Test hook: perturbs every analytic gradient entry of the first case
    /// so the check must fail.
    #[serde(default)]
    pub corrupt: bool,
}

impl Default for GradcheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            layer_cases: 100,
            affine_cases: 20,
            graphs: 10,
            harmonics: 2,
            hidden_dim: 6,
            n_layers: 2,
            n_tasks: 2,
            coords_per_tensor: DEFAULT_COORDS,
            corrupt: false,
        }
    }
}

const DEFAULT_COORDS: usize = 64;

fn default_coords() -> usize {
    DEFAULT_COORDS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupResult {
    pub group: String,
    pub checked: usize,
    pub max_relative_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub groups: Vec<GroupResult>,
    pub passed: bool,
}

impl GradcheckReport {
    pub fn table(&self) -> String {
        let mut s = format!("{:<32} {:>8} {:>12} {:>10}  status\n", "group", "checked", "max_rel_err", "tol");
        for g in &self.groups {
            s.push_str(&format!(
                "{:<32} {:>8} {:>12.3e} {:>10.0e}  {}\n",
                g.group,
                g.checked,
                g.max_relative_error,
                g.tolerance,
                if g.passed { "ok" } else { "FAIL" }
            ));
        }
        s
    }
}

#[derive(Default)]
struct Groups {
    stats: BTreeMap<String, (usize, f64, f64)>,
}

impl Groups {
    fn record(&mut self, group: &str, tolerance: f64, analytic: f64, numeric: f64) {
        let e = relative_error(analytic, numeric);
        let entry = self.stats.entry(group.to_string()).or_insert((0, 0.0, tolerance));
        entry.0 += 1;
        // NaN compares false, so keep it explicitly
        if e > entry.1 || e.is_nan() {
            entry.1 = e;
        }
    }

    fn into_results(self) -> Vec<GroupResult> {
        self.stats
            .into_iter()
            .map(|(group, (checked, max, tol))| GroupResult {
                group,
                checked,
                max_relative_error: max,
                tolerance: tol,
                passed: max < tol,
            })
            .collect()
    }
}

pub fn run(config: &GradcheckConfig) -> Result<GradcheckReport> {
    let mut groups = Groups::default();
    check_fkan_layers(config, &mut groups)?;
    check_affine_layers(config, &mut groups)?;
    for variant in [Variant::KaGnn, Variant::KaGat] {
        check_model(config, variant, &mut groups)?;
    }
    let groups = groups.into_results();
    let passed = groups.iter().all(|g| g.passed);
    Ok(GradcheckReport { groups, passed })
}

// Double-double arithmetic for the layer oracles.

#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    fn new(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }

    fn two_sum(a: f64, b: f64) -> Self {
        let s = a + b;
        let bb = s - a;
        Dd {
            hi: s,
            lo: (a - (s - bb)) + (b - bb),
        }
    }

    fn renorm(hi: f64, lo: f64) -> Self {
        let s = hi + lo;
        Dd { hi: s, lo: lo - (s - hi) }
    }

    fn add(self, o: Dd) -> Dd {
        let s = Dd::two_sum(self.hi, o.hi);
        Dd::renorm(s.hi, s.lo + self.lo + o.lo)
    }

    fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.hi * o.hi;
        let e = self.hi.mul_add(o.hi, -p);
        Dd::renorm(p, e + self.hi * o.lo + self.lo * o.hi)
    }

    fn to_f64(self) -> f64 {
        self.hi + self.lo
    }
}

/// `cos(k (x + delta))` and `sin(k (x + delta))` in double-double, via the
/// angle-addition formulas around the `f64` angle `k x`.
fn shifted_cos_sin(k: f64, x: f64, delta: f64) -> (Dd, Dd) {
    let (s, c) = (k * x).sin_cos();
    if delta == 0.0 {
        return (Dd::new(c), Dd::new(s));
    }
    let (sd, cd) = (k * delta).sin_cos();
    let cos = Dd::new(c).mul(Dd::new(cd)).add(Dd::new(s).mul(Dd::new(sd)).neg());
    let sin = Dd::new(s).mul(Dd::new(cd)).add(Dd::new(c).mul(Dd::new(sd)));
    (cos, sin)
}

#[derive(Clone, Copy)]
enum Perturb {
    Cos(usize, usize, usize, f64),
    Sin(usize, usize, usize, f64),
    Bias(usize, f64),
    Input(usize, usize, f64),
}

struct KanTensors {
    a: Array3<f64>,
    b: Array3<f64>,
    bias: Option<Array1<f64>>,
}

/// Naive `sum_{b,j} up[b,j] * out[b,j]` with one perturbed entry.
fn kan_objective(t: &KanTensors, x: &Array2<f64>, up: &Array2<f64>, p: Perturb) -> Dd {
    let (kk, n_out, n_in) = t.a.dim();
    let mut total = Dd::default();
    for b in 0..x.nrows() {
        for j in 0..n_out {
            let mut out = Dd::default();
            for i in 0..n_in {
                let dx = match p {
                    Perturb::Input(pb, pi, d) if pb == b && pi == i => d,
                    _ => 0.0,
                };
                for k in 0..kk {
                    let (c, s) = shifted_cos_sin((k + 1) as f64, x[[b, i]], dx);
                    let mut a = Dd::new(t.a[[k, j, i]]);
                    let mut bb = Dd::new(t.b[[k, j, i]]);
                    match p {
                        Perturb::Cos(pk, pj, pi, d) if (pk, pj, pi) == (k, j, i) => a = a.add(Dd::new(d)),
                        Perturb::Sin(pk, pj, pi, d) if (pk, pj, pi) == (k, j, i) => bb = bb.add(Dd::new(d)),
                        _ => {}
                    }
                    out = out.add(a.mul(c)).add(bb.mul(s));
                }
            }
            if let Some(bias) = &t.bias {
                let mut v = Dd::new(bias[j]);
                if let Perturb::Bias(pj, d) = p {
                    if pj == j {
                        v = v.add(Dd::new(d));
                    }
                }
                out = out.add(v);
            }
            total = total.add(Dd::new(up[[b, j]]).mul(out));
        }
    }
    total
}

/// Central difference with one Richardson step, evaluated in double-double.
fn richardson_dd(h: f64, f: impl Fn(f64) -> Dd) -> f64 {
    let central = |h: f64| f(h).add(f(-h).neg()).to_f64() / (2.0 * h);
    let (d1, d2) = (central(h), central(h / 2.0));
    (4.0 * d2 - d1) / 3.0
}

fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || scale * rng.sample::<f64, _>(StandardNormal))
}

fn check_fkan_layers(config: &GradcheckConfig, groups: &mut Groups) -> Result<()> {
    let mut rng = derived_rng(config.seed, 1);
    for case in 0..config.layer_cases {
        let n_in = rng.random_range(1..=5);
        let n_out = rng.random_range(1..=5);
        let k = rng.random_range(1..=4);
        let batch = rng.random_range(1..=6);
        let with_bias = case % 2 == 0;
        let mut layer = FourierKanLayer::init(n_in, n_out, k, with_bias, &mut rng)?;
        if let Some(b) = layer.bias_mut() {
            b.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
        }
        let x = Array2::from_shape_simple_fn((batch, n_in), || rng.random_range(-3.0..3.0));
        let up = random_matrix(batch, n_out, 1.0, &mut rng);
        let mut g = layer.backward(x.view(), up.view())?;
        if config.corrupt && case == 0 {
            g.input[[0, 0]] += 1e-3 * (1.0 + g.input[[0, 0]].abs());
            g.params.set_cos_coeff(1, 0, 0, g.params.cos_coeff(1, 0, 0) * 1.01 + 1e-3);
        }
        let t = KanTensors {
            a: layer.cos_tensor(),
            b: layer.sin_tensor(),
            bias: layer.bias().cloned(),
        };
        let (da, db) = (g.d_cos(), g.d_sin());
        for ((kk, j, i), &a) in da.indexed_iter() {
            let n = richardson_dd(LAYER_STEP, |d| kan_objective(&t, &x, &up, Perturb::Cos(kk, j, i, d)));
            groups.record("fkan.dA", LAYER_TOLERANCE, a, n);
            let n = richardson_dd(LAYER_STEP, |d| kan_objective(&t, &x, &up, Perturb::Sin(kk, j, i, d)));
            groups.record("fkan.dB", LAYER_TOLERANCE, db[[kk, j, i]], n);
        }
        if let Some(dbias) = g.d_bias() {
            for (j, &a) in dbias.indexed_iter() {
                let n = richardson_dd(LAYER_STEP, |d| kan_objective(&t, &x, &up, Perturb::Bias(j, d)));
                groups.record("fkan.dBias", LAYER_TOLERANCE, a, n);
            }
        }
        for ((b, i), &a) in g.input.indexed_iter() {
            let n = richardson_dd(LAYER_STEP, |d| kan_objective(&t, &x, &up, Perturb::Input(b, i, d)));
            groups.record("fkan.dX", LAYER_TOLERANCE, a, n);
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum AffinePerturb {
    Weight(usize, usize, f64),
    Bias(usize, f64),
    Input(usize, usize, f64),
}

fn affine_objective(a: &Affine, x: &Array2<f64>, up: &Array2<f64>, p: AffinePerturb) -> Dd {
    let mut total = Dd::default();
    for b in 0..x.nrows() {
        for o in 0..a.n_out {
            let mut out = Dd::new(a.bias[o]);
            if let AffinePerturb::Bias(po, d) = p {
                if po == o {
                    out = out.add(Dd::new(d));
                }
            }
            for i in 0..a.n_in {
                let mut w = Dd::new(a.weight[[o, i]]);
                let mut xi = Dd::new(x[[b, i]]);
                match p {
                    AffinePerturb::Weight(po, pi, d) if (po, pi) == (o, i) => w = w.add(Dd::new(d)),
                    AffinePerturb::Input(pb, pi, d) if (pb, pi) == (b, i) => xi = xi.add(Dd::new(d)),
                    _ => {}
                }
                out = out.add(w.mul(xi));
            }
            total = total.add(Dd::new(up[[b, o]]).mul(out));
        }
    }
    total
}

fn check_affine_layers(config: &GradcheckConfig, groups: &mut Groups) -> Result<()> {
    let mut rng = derived_rng(config.seed, 2);
    for _ in 0..config.affine_cases {
        let n_in = rng.random_range(1..=6);
        let n_out = rng.random_range(1..=6);
        let batch = rng.random_range(1..=5);
        let mut a = Affine::init(n_in, n_out, &mut rng)?;
        a.bias.mapv_inplace(|_| rng.sample::<f64, _>(StandardNormal));
        let x = random_matrix(batch, n_in, 1.0, &mut rng);
        let up = random_matrix(batch, n_out, 1.0, &mut rng);
        let mut g = Affine::zeros(n_in, n_out);
        let dx = a.backward(x.view(), up.view(), &mut g);
        for ((o, i), &v) in g.weight.indexed_iter() {
            let n = richardson_dd(LAYER_STEP, |d| affine_objective(&a, &x, &up, AffinePerturb::Weight(o, i, d)));
            groups.record("affine.dW", LAYER_TOLERANCE, v, n);
        }
        for (o, &v) in g.bias.indexed_iter() {
            let n = richardson_dd(LAYER_STEP, |d| affine_objective(&a, &x, &up, AffinePerturb::Bias(o, d)));
            groups.record("affine.dBias", LAYER_TOLERANCE, v, n);
        }
        for ((b, i), &v) in dx.indexed_iter() {
            let n = richardson_dd(LAYER_STEP, |d| affine_objective(&a, &x, &up, AffinePerturb::Input(b, i, d)));
            groups.record("affine.dX", LAYER_TOLERANCE, v, n);
        }
    }
    Ok(())
}

const GRAPH_ELEMENTS: [&str; 6] = ["C", "N", "O", "S", "F", "H"];

/// A random 3-6 atom molecule with a bonded chain, optional ring closure,
/// random charges and `n_tasks` labels (the last one sometimes missing).
pub fn random_small_graph<R: Rng + ?Sized>(rng: &mut R, n_tasks: usize, id: usize) -> Result<MolecularGraph> {
    let n = rng.random_range(3..=6);
    let atoms = (0..n)
        .map(|a| {
            let sym = GRAPH_ELEMENTS[rng.random_range(0..GRAPH_ELEMENTS.len())];
            let pos = [
                1.3 * a as f64 + rng.random_range(-0.2..0.2),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ];
            Atom::new(sym, pos, rng.random_range(-0.5..0.5))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut bonds: Vec<Bond> = (1..n)
        .map(|j| Bond {
            i: j - 1,
            j,
            bond_type: BondType::ALL[rng.random_range(0..4)],
            direction: BondDirection::ALL[rng.random_range(0..7)],
            in_ring: false,
        })
        .collect();
    if n >= 4 && rng.random_bool(0.5) {
        bonds.push(Bond {
            i: 0,
            j: n - 1,
            bond_type: BondType::Aromatic,
            direction: BondDirection::None,
            in_ring: true,
        });
        bonds.iter_mut().for_each(|b| b.in_ring = true);
    }
    let labels = (0..n_tasks)
        .map(|t| (t + 1 < n_tasks || rng.random_bool(0.7)).then(|| rng.random_bool(0.5)))
        .collect();
    let mol = Molecule {
        id: format!("g{id}"),
        atoms,
        bonds,
        labels,
    };
    build_graph(&mol, 3.0)
}

/// Richardson-extrapolated (two steps) central difference in `f64`.
fn richardson_f64(h: f64, mut f: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    let mut central = |h: f64| -> Result<f64> { Ok((f(h)? - f(-h)?) / (2.0 * h)) };
    let (d1, d2) = (central(h)?, central(h / 2.0)?);
    let r1 = (4.0 * d2 - d1) / 3.0;
    let d3 = central(h / 4.0)?;
    let r2 = (4.0 * d3 - d2) / 3.0;
    Ok((16.0 * r2 - r1) / 15.0)
}

fn check_model(config: &GradcheckConfig, variant: Variant, groups: &mut Groups) -> Result<()> {
    let mut rng = derived_rng(config.seed, 3 + variant as u64);
    let mut pick_rng = derived_rng(config.seed, 5 + variant as u64);
    let model_config = ModelConfig {
        hidden_dim: config.hidden_dim,
        kan_bias: true,
        ..ModelConfig::new(variant, config.n_layers, config.harmonics, config.n_tasks)
    };
    for case in 0..config.graphs {
        let graph = random_small_graph(&mut rng, config.n_tasks, case)?;
        let mut model = Model::init(&model_config, config.seed.wrapping_add(case as u64))?;
        // random bias values so their gradients are exercised away from zero
        perturb_biases(&mut model, &mut rng);
        let (_, mut grad) = model.graph_loss_and_grad(&graph)?;
        if config.corrupt && case == 0 {
            for p in grad.params_mut() {
                p.iter_mut().for_each(|v| *v = *v * 1.01 + 1e-3);
            }
        }
        let names: Vec<String> = grad.params().into_iter().map(|(n, _)| group_name(variant, &n)).collect();
        let analytic: Vec<Vec<f64>> = grad.params().into_iter().map(|(_, p)| p.to_vec()).collect();
        for (t, values) in analytic.iter().enumerate() {
            let mut picked: Vec<usize> = match config.coords_per_tensor {
                0 => (0..values.len()).collect(),
                k if k >= values.len() => (0..values.len()).collect(),
                k => rand::seq::index::sample(&mut pick_rng, values.len(), k).into_vec(),
            };
            picked.sort_unstable();
            for i in picked {
                let a = values[i];
                let original = model.params()[t].1[i];
                let numeric = richardson_f64(MODEL_STEP, |d| {
                    model.params_mut()[t][i] = original + d;
                    let loss = model.graph_loss(&graph);
                    model.params_mut()[t][i] = original;
                    loss
                })?;
                if !numeric.is_finite() {
                    return Err(Error::Numeric(format!("finite difference for {} is not finite", names[t])));
                }
                groups.record(&names[t], MODEL_TOLERANCE, a, numeric);
            }
        }
    }
    Ok(())
}

fn perturb_biases<R: Rng + ?Sized>(model: &mut Model, rng: &mut R) {
    let names: Vec<String> = model.params().into_iter().map(|(n, _)| n).collect();
    let normal = StandardNormal;
    for (name, p) in names.iter().zip(model.params_mut()) {
        if name.ends_with("bias") {
            for v in p.iter_mut() {
                *v = 0.3 * Distribution::<f64>::sample(&normal, rng);
            }
        }
    }
}

/// `kagnn.mp.1.A` -> `kagnn.mp.A`: layer indices are merged into one group.
fn group_name(variant: Variant, param: &str) -> String {
    let parts: Vec<&str> = param.split('.').filter(|p| p.parse::<usize>().is_err()).collect();
    format!("{variant}.{}", parts.join("."))
}
