//! Fourier-series Kolmogorov–Arnold layers.
//!
//! A layer maps `x` of width `n_in` to width `n_out` with
//!
//! ```text
//! out[b, j] = sum_i sum_{k=1..K} A[k, j, i] cos(k x[b, i]) + B[k, j, i] sin(k x[b, i])  (+ bias[j])
//! ```
//!
//! Coefficients are stored as two `[n_out, K * n_in]` matrices whose column
//! `(k - 1) * n_in + i` holds harmonic `k` of input `i`. With the basis laid
//! out the same way the forward pass is two matrix products. The public
//! tensor view (and the JSON format) uses the `[K][n_out][n_in]` ordering.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{prefixed, slice_of, slice_of_mut, Params};

/// `cos(k x)` and `sin(k x)` for every input entry and harmonic.
#[derive(Debug, Clone)]
pub struct FourierBasis {
    harmonics: usize,
    n_in: usize,
    cos: Array2<f64>,
    sin: Array2<f64>,
}

impl FourierBasis {
    pub fn new(x: ArrayView2<f64>, harmonics: usize) -> Result<Self> {
        if let Some(bad) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite layer input {bad}")));
        }
        let (batch, n_in) = x.dim();
        let width = harmonics * n_in;
        let mut cos = Array2::zeros((batch, width));
        let mut sin = Array2::zeros((batch, width));
        for b in 0..batch {
            for i in 0..n_in {
                // harmonics by repeated rotation: one sin_cos per entry
                let (s1, c1) = x[[b, i]].sin_cos();
                let (mut s, mut c) = (s1, c1);
                for h in 0..harmonics {
                    cos[[b, h * n_in + i]] = c;
                    sin[[b, h * n_in + i]] = s;
                    (s, c) = (s * c1 + c * s1, c * c1 - s * s1);
                }
            }
        }
        Ok(Self {
            harmonics,
            n_in,
            cos,
            sin,
        })
    }

    pub fn batch(&self) -> usize {
        self.cos.nrows()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LayerRecord", into = "LayerRecord")]
pub struct FourierKanLayer {
    n_in: usize,
    n_out: usize,
    harmonics: usize,
    cos_coeffs: Array2<f64>,
    sin_coeffs: Array2<f64>,
    bias: Option<Array1<f64>>,
}

/// Gradients of a scalar loss with respect to a layer's coefficients and input.
#[derive(Debug, Clone)]
pub struct LayerGradients {
    /// Coefficient gradients, shaped like the owning layer.
    pub params: FourierKanLayer,
    /// dL/dx, shaped `[batch, n_in]`.
    pub input: Array2<f64>,
}

impl LayerGradients {
    /// dL/dA as a `[K, n_out, n_in]` tensor.
    pub fn d_cos(&self) -> Array3<f64> {
        self.params.cos_tensor()
    }

    pub fn d_sin(&self) -> Array3<f64> {
        self.params.sin_tensor()
    }

    pub fn d_bias(&self) -> Option<&Array1<f64>> {
        self.params.bias()
    }
}

impl FourierKanLayer {
    /// Coefficients drawn i.i.d. from N(0, 1 / (n_out * K)); bias (if any) zero.
    pub fn init<R: Rng + ?Sized>(
        n_in: usize,
        n_out: usize,
        harmonics: usize,
        with_bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        check_dims(n_in, n_out, harmonics)?;
        let std = (1.0 / (n_out * harmonics) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("positive std");
        let cols = harmonics * n_in;
        let cos_coeffs = Array2::from_shape_simple_fn((n_out, cols), || normal.sample(rng));
        let sin_coeffs = Array2::from_shape_simple_fn((n_out, cols), || normal.sample(rng));
        Ok(Self {
            n_in,
            n_out,
            harmonics,
            cos_coeffs,
            sin_coeffs,
            bias: with_bias.then(|| Array1::zeros(n_out)),
        })
    }

    /// Convenience wrapper around [`FourierKanLayer::init`] with a fresh seeded generator.
    pub fn seeded(n_in: usize, n_out: usize, harmonics: usize, seed: u64, with_bias: bool) -> Result<Self> {
        Self::init(n_in, n_out, harmonics, with_bias, &mut crate::rng::seeded_rng(seed))
    }

    pub fn zeros(n_in: usize, n_out: usize, harmonics: usize, with_bias: bool) -> Result<Self> {
        check_dims(n_in, n_out, harmonics)?;
        Ok(Self {
            n_in,
            n_out,
            harmonics,
            cos_coeffs: Array2::zeros((n_out, harmonics * n_in)),
            sin_coeffs: Array2::zeros((n_out, harmonics * n_in)),
            bias: with_bias.then(|| Array1::zeros(n_out)),
        })
    }

    /// Builds a layer from `[K, n_out, n_in]` coefficient tensors.
    pub fn from_tensors(cos: Array3<f64>, sin: Array3<f64>, bias: Option<Array1<f64>>) -> Result<Self> {
        if cos.dim() != sin.dim() {
            return Err(Error::Shape(format!(
                "cosine coefficients {:?} and sine coefficients {:?} differ",
                cos.dim(),
                sin.dim()
            )));
        }
        let (harmonics, n_out, n_in) = cos.dim();
        check_dims(n_in, n_out, harmonics)?;
        if let Some(b) = &bias {
            if b.len() != n_out {
                return Err(Error::Shape(format!("bias has length {}, expected {n_out}", b.len())));
            }
        }
        let finite = cos.iter().chain(sin.iter()).chain(bias.iter().flatten()).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Domain("layer coefficients must be finite".into()));
        }
        let pack = |t: &Array3<f64>| {
            Array2::from_shape_fn((n_out, harmonics * n_in), |(j, c)| t[[c / n_in, j, c % n_in]])
        };
        Ok(Self {
            n_in,
            n_out,
            harmonics,
            cos_coeffs: pack(&cos),
            sin_coeffs: pack(&sin),
            bias,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn harmonics(&self) -> usize {
        self.harmonics
    }

    pub fn bias(&self) -> Option<&Array1<f64>> {
        self.bias.as_ref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut Array1<f64>> {
        self.bias.as_mut()
    }

    /// Cosine coefficient of harmonic `k` (1-based) from input `i` to output `j`.
    pub fn cos_coeff(&self, k: usize, j: usize, i: usize) -> f64 {
        self.cos_coeffs[[j, (k - 1) * self.n_in + i]]
    }

    pub fn sin_coeff(&self, k: usize, j: usize, i: usize) -> f64 {
        self.sin_coeffs[[j, (k - 1) * self.n_in + i]]
    }

    pub fn set_cos_coeff(&mut self, k: usize, j: usize, i: usize, value: f64) {
        self.cos_coeffs[[j, (k - 1) * self.n_in + i]] = value;
    }

    pub fn set_sin_coeff(&mut self, k: usize, j: usize, i: usize, value: f64) {
        self.sin_coeffs[[j, (k - 1) * self.n_in + i]] = value;
    }

    pub fn cos_tensor(&self) -> Array3<f64> {
        self.unpack(&self.cos_coeffs)
    }

    pub fn sin_tensor(&self) -> Array3<f64> {
        self.unpack(&self.sin_coeffs)
    }

    fn unpack(&self, packed: &Array2<f64>) -> Array3<f64> {
        Array3::from_shape_fn((self.harmonics, self.n_out, self.n_in), |(h, j, i)| {
            packed[[j, h * self.n_in + i]]
        })
    }

    fn check_input(&self, x: ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.n_in {
            return Err(Error::Shape(format!(
                "layer expects {} input columns, got {}",
                self.n_in,
                x.ncols()
            )));
        }
        Ok(())
    }

    pub fn basis(&self, x: ArrayView2<f64>) -> Result<FourierBasis> {
        self.check_input(x)?;
        FourierBasis::new(x, self.harmonics)
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let basis = self.basis(x)?;
        Ok(self.forward_basis(&basis))
    }

    /// Forward pass from a precomputed basis (must come from [`Self::basis`]).
    pub fn forward_basis(&self, basis: &FourierBasis) -> Array2<f64> {
        debug_assert_eq!((basis.harmonics, basis.n_in), (self.harmonics, self.n_in));
        let mut out = basis.cos.dot(&self.cos_coeffs.t());
        ndarray::linalg::general_mat_mul(1.0, &basis.sin, &self.sin_coeffs.t(), 1.0, &mut out);
        if let Some(bias) = &self.bias {
            out += bias;
        }
        out
    }

    pub fn backward(&self, x: ArrayView2<f64>, upstream: ArrayView2<f64>) -> Result<LayerGradients> {
        let basis = self.basis(x)?;
        let mut params = self.zeros_like();
        let input = self.backward_basis(&basis, upstream, &mut params, true)?;
        Ok(LayerGradients {
            params,
            input: input.expect("input gradient requested"),
        })
    }

    /// Accumulates coefficient gradients into `grad` and, if requested,
    /// returns dL/dx.
    pub fn backward_basis(
        &self,
        basis: &FourierBasis,
        upstream: ArrayView2<f64>,
        grad: &mut FourierKanLayer,
        need_input_grad: bool,
    ) -> Result<Option<Array2<f64>>> {
        if upstream.dim() != (basis.batch(), self.n_out) {
            return Err(Error::Shape(format!(
                "upstream gradient is {:?}, expected ({}, {})",
                upstream.dim(),
                basis.batch(),
                self.n_out
            )));
        }
        ndarray::linalg::general_mat_mul(1.0, &upstream.t(), &basis.cos, 1.0, &mut grad.cos_coeffs);
        ndarray::linalg::general_mat_mul(1.0, &upstream.t(), &basis.sin, 1.0, &mut grad.sin_coeffs);
        if let (Some(gb), Some(_)) = (grad.bias.as_mut(), self.bias.as_ref()) {
            *gb += &upstream.sum_axis(Axis(0));
        }
        if !need_input_grad {
            return Ok(None);
        }
        // d/dx [A cos(kx) + B sin(kx)] = k (B cos(kx) - A sin(kx))
        let through_cos = upstream.dot(&self.cos_coeffs);
        let through_sin = upstream.dot(&self.sin_coeffs);
        let mut dx = Array2::zeros((basis.batch(), self.n_in));
        let n_in = self.n_in;
        for h in 0..self.harmonics {
            let freq = (h + 1) as f64;
            let cols = ndarray::s![.., h * n_in..(h + 1) * n_in];
            Zip::from(&mut dx)
                .and(&basis.cos.slice(cols))
                .and(&basis.sin.slice(cols))
                .and(&through_cos.slice(cols))
                .and(&through_sin.slice(cols))
                .for_each(|d, &c, &s, &ga, &gb| *d += freq * (c * gb - s * ga));
        }
        Ok(Some(dx))
    }
}

fn check_dims(n_in: usize, n_out: usize, harmonics: usize) -> Result<()> {
    if n_in == 0 || n_out == 0 || harmonics == 0 {
        return Err(Error::InvalidArgument(format!(
            "layer dimensions must be positive (n_in={n_in}, n_out={n_out}, K={harmonics})"
        )));
    }
    Ok(())
}

impl Params for FourierKanLayer {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = vec![
            ("A".to_string(), slice_of(&self.cos_coeffs)),
            ("B".to_string(), slice_of(&self.sin_coeffs)),
        ];
        if let Some(b) = &self.bias {
            v.push(("bias".to_string(), slice_of(b)));
        }
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = vec![slice_of_mut(&mut self.cos_coeffs), slice_of_mut(&mut self.sin_coeffs)];
        if let Some(b) = &mut self.bias {
            v.push(slice_of_mut(b));
        }
        v
    }
}

/// JSON form: `{"n_in", "n_out", "K", "bias"?, "A": [K][n_out][n_in], "B": ...}`.
#[derive(Serialize, Deserialize)]
struct LayerRecord {
    n_in: usize,
    n_out: usize,
    #[serde(rename = "K")]
    harmonics: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    bias: Option<Vec<f64>>,
    #[serde(rename = "A")]
    cos: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    sin: Vec<Vec<Vec<f64>>>,
}

fn nested_to_tensor(name: &str, nested: Vec<Vec<Vec<f64>>>, dims: (usize, usize, usize)) -> Result<Array3<f64>> {
    let (k, o, i) = dims;
    let ok = nested.len() == k && nested.iter().all(|m| m.len() == o && m.iter().all(|r| r.len() == i));
    if !ok {
        return Err(Error::Shape(format!("{name} must be nested [{k}][{o}][{i}]")));
    }
    let flat: Vec<f64> = nested.into_iter().flatten().flatten().collect();
    Ok(Array3::from_shape_vec(dims, flat).expect("length checked"))
}

impl TryFrom<LayerRecord> for FourierKanLayer {
    type Error = Error;

    fn try_from(r: LayerRecord) -> Result<Self> {
        let dims = (r.harmonics, r.n_out, r.n_in);
        let cos = nested_to_tensor("A", r.cos, dims)?;
        let sin = nested_to_tensor("B", r.sin, dims)?;
        FourierKanLayer::from_tensors(cos, sin, r.bias.map(Array1::from))
    }
}

impl From<FourierKanLayer> for LayerRecord {
    fn from(l: FourierKanLayer) -> Self {
        let nest = |t: Array3<f64>| -> Vec<Vec<Vec<f64>>> {
            t.outer_iter()
                .map(|m| m.outer_iter().map(|r| r.to_vec()).collect())
                .collect()
        };
        LayerRecord {
            n_in: l.n_in,
            n_out: l.n_out,
            harmonics: l.harmonics,
            bias: l.bias.as_ref().map(|b| b.to_vec()),
            cos: nest(l.cos_tensor()),
            sin: nest(l.sin_tensor()),
        }
    }
}

/// A composition `KAN_L ∘ … ∘ KAN_0` of Fourier layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FourierKanLayer>", into = "Vec<FourierKanLayer>")]
pub struct KanStack {
    layers: Vec<FourierKanLayer>,
}

/// Intermediate bases recorded by [`KanStack::forward_trace`].
#[derive(Debug, Clone)]
pub struct StackTrace {
    bases: Vec<FourierBasis>,
    pub output: Array2<f64>,
}

impl KanStack {
    pub fn new(layers: Vec<FourierKanLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidArgument("a KAN stack needs at least one layer".into()));
        }
        for (t, pair) in layers.windows(2).enumerate() {
            if pair[0].n_out != pair[1].n_in {
                return Err(Error::Shape(format!(
                    "layer {t} outputs {} but layer {} expects {}",
                    pair[0].n_out,
                    t + 1,
                    pair[1].n_in
                )));
            }
        }
        Ok(Self { layers })
    }

    /// Seeded stack through the given widths, e.g. `[64, 64, 2]`.
    pub fn init<R: Rng + ?Sized>(widths: &[usize], harmonics: usize, with_bias: bool, rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::InvalidArgument("a KAN stack needs at least two widths".into()));
        }
        let layers = widths
            .windows(2)
            .map(|w| FourierKanLayer::init(w[0], w[1], harmonics, with_bias, rng))
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[FourierKanLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FourierKanLayer] {
        &mut self.layers
    }

    pub fn n_in(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn n_out(&self) -> usize {
        self.layers[self.layers.len() - 1].n_out
    }

    pub fn forward(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward_trace(x)?.output)
    }

    pub fn forward_trace(&self, x: ArrayView2<f64>) -> Result<StackTrace> {
        let mut bases = Vec::with_capacity(self.layers.len());
        let mut current = x.to_owned();
        for layer in &self.layers {
            let basis = layer.basis(current.view())?;
            current = layer.forward_basis(&basis);
            bases.push(basis);
        }
        Ok(StackTrace { bases, output: current })
    }

    /// Accumulates gradients into `grad` and returns dL/dx.
    pub fn backward(&self, trace: &StackTrace, upstream: ArrayView2<f64>, grad: &mut KanStack) -> Result<Array2<f64>> {
        let mut up = upstream.to_owned();
        for (t, layer) in self.layers.iter().enumerate().rev() {
            up = layer
                .backward_basis(&trace.bases[t], up.view(), &mut grad.layers[t], true)?
                .expect("input gradient requested");
        }
        Ok(up)
    }
}

impl TryFrom<Vec<FourierKanLayer>> for KanStack {
    type Error = Error;
    fn try_from(layers: Vec<FourierKanLayer>) -> Result<Self> {
        KanStack::new(layers)
    }
}

impl From<KanStack> for Vec<FourierKanLayer> {
    fn from(s: KanStack) -> Self {
        s.layers
    }
}

impl Params for KanStack {
    fn params(&self) -> Vec<(String, &[f64])> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(t, l)| prefixed(&t.to_string(), l.params()))
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array};
    use std::f64::consts::PI;

    fn scalar_layer(a: f64, b: f64) -> FourierKanLayer {
        FourierKanLayer::from_tensors(
            Array::from_elem((1, 1, 1), a),
            Array::from_elem((1, 1, 1), b),
            None,
        )
        .unwrap()
    }

    #[test]
    fn cosine_at_pi() {
        let out = scalar_layer(1.0, 0.0).forward(array![[PI]].view()).unwrap();
        assert!((out[[0, 0]] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn sine_at_half_pi() {
        let out = scalar_layer(0.0, 1.0).forward(array![[PI / 2.0]].view()).unwrap();
        assert!((out[[0, 0]] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_zero_dims() {
        for (i, o, k) in [(0, 1, 1), (1, 0, 1), (1, 1, 0)] {
            assert!(matches!(
                FourierKanLayer::seeded(i, o, k, 0, false),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn bias_starts_at_zero() {
        let l = FourierKanLayer::seeded(1, 1, 1, 0, true).unwrap();
        assert_eq!(l.bias().unwrap().to_vec(), vec![0.0]);
        assert_eq!(l.parameter_count(), 3);
    }

    #[test]
    fn seeding_is_deterministic() {
        let a = FourierKanLayer::seeded(4, 64, 2, 7, false).unwrap();
        let b = FourierKanLayer::seeded(4, 64, 2, 7, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.parameter_count(), 1024);
        let c = FourierKanLayer::seeded(4, 64, 2, 8, false).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn forward_rejects_bad_input() {
        let l = FourierKanLayer::seeded(3, 2, 2, 0, false).unwrap();
        assert!(matches!(l.forward(Array2::zeros((2, 4)).view()), Err(Error::Shape(_))));
        let mut x = Array2::zeros((1, 3));
        x[[0, 1]] = f64::NAN;
        assert!(matches!(l.forward(x.view()), Err(Error::Domain(_))));
    }

    #[test]
    fn backward_at_origin() {
        let g = scalar_layer(1.0, 0.0)
            .backward(array![[0.0]].view(), array![[1.0]].view())
            .unwrap();
        assert_eq!(g.input[[0, 0]], 0.0);
        assert_eq!(g.d_cos()[[0, 0, 0]], 1.0);
        assert_eq!(g.d_sin()[[0, 0, 0]], 0.0);
    }

    #[test]
    fn backward_zero_upstream_is_zero() {
        let l = FourierKanLayer::seeded(3, 4, 3, 11, true).unwrap();
        let x = Array2::from_shape_fn((5, 3), |(b, i)| (b as f64) * 0.3 - i as f64);
        let g = l.backward(x.view(), Array2::zeros((5, 4)).view()).unwrap();
        assert!(g.params.params().iter().all(|(_, p)| p.iter().all(|v| *v == 0.0)));
        assert!(g.input.iter().all(|v| *v == 0.0));
        assert_eq!(g.d_bias().unwrap().to_vec(), vec![0.0; 4]);
    }

    #[test]
    fn backward_rejects_bad_upstream() {
        let l = FourierKanLayer::seeded(3, 4, 1, 0, false).unwrap();
        let r = l.backward(Array2::zeros((2, 3)).view(), Array2::zeros((2, 3)).view());
        assert!(matches!(r, Err(Error::Shape(_))));
    }

    #[test]
    fn tensor_view_round_trips() {
        let l = FourierKanLayer::seeded(3, 2, 4, 5, true).unwrap();
        let back = FourierKanLayer::from_tensors(l.cos_tensor(), l.sin_tensor(), l.bias().cloned()).unwrap();
        assert_eq!(l, back);
        assert_eq!(l.cos_coeff(3, 1, 2), l.cos_tensor()[[2, 1, 2]]);
    }

    #[test]
    fn json_layout_is_k_out_in() {
        let mut l = FourierKanLayer::zeros(2, 1, 2, false).unwrap();
        l.set_cos_coeff(2, 0, 1, 5.0);
        let v: serde_json::Value = serde_json::to_value(&l).unwrap();
        assert_eq!(v["K"], 2);
        assert_eq!(v["A"][1][0][1], 5.0);
        assert!(v.get("bias").is_none());
        let back: FourierKanLayer = serde_json::from_value(v).unwrap();
        assert_eq!(back, l);
    }

    #[test]
    fn json_rejects_ragged_tensor() {
        let bad = r#"{"n_in":2,"n_out":1,"K":1,"A":[[[1.0]]],"B":[[[1.0,2.0]]]}"#;
        assert!(serde_json::from_str::<FourierKanLayer>(bad).is_err());
    }

    #[test]
    fn stack_checks_widths() {
        let a = FourierKanLayer::seeded(3, 4, 1, 0, false).unwrap();
        let b = FourierKanLayer::seeded(5, 2, 1, 0, false).unwrap();
        assert!(matches!(KanStack::new(vec![a, b]), Err(Error::Shape(_))));
        assert!(KanStack::new(vec![]).is_err());
    }

    #[test]
    fn single_layer_stack_matches_layer() {
        let l = FourierKanLayer::seeded(3, 2, 2, 9, false).unwrap();
        let x = Array2::from_shape_fn((4, 3), |(b, i)| 0.1 * (b * 3 + i) as f64 - 0.5);
        let s = KanStack::new(vec![l.clone()]).unwrap();
        assert_eq!(s.forward(x.view()).unwrap(), l.forward(x.view()).unwrap());
    }

    #[test]
    fn zero_second_layer_gives_zero_output() {
        let a = FourierKanLayer::seeded(3, 4, 2, 1, false).unwrap();
        let b = FourierKanLayer::zeros(4, 2, 2, false).unwrap();
        let s = KanStack::new(vec![a, b]).unwrap();
        let x = Array2::from_shape_fn((3, 3), |(b, i)| (b + i) as f64);
        assert!(s.forward(x.view()).unwrap().iter().all(|v| *v == 0.0));
    }
}
