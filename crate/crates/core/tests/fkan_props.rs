use std::f64::consts::PI;

use kagnn::fkan::FourierKanLayer;
use kagnn::rng::seeded_rng;
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::Rng;

/// Triple loop straight from the layer definition.
fn naive_forward(layer: &FourierKanLayer, x: &Array2<f64>) -> Array2<f64> {
    let (batch, n_in) = x.dim();
    let mut out = Array2::zeros((batch, layer.n_out()));
    for b in 0..batch {
        for j in 0..layer.n_out() {
            let mut acc = layer.bias().map_or(0.0, |bias| bias[j]);
            for i in 0..n_in {
                for k in 1..=layer.harmonics() {
                    let kx = k as f64 * x[[b, i]];
                    acc += layer.cos_coeff(k, j, i) * kx.cos() + layer.sin_coeff(k, j, i) * kx.sin();
                }
            }
            out[[b, j]] = acc;
        }
    }
    out
}

fn random_layer(n_in: usize, n_out: usize, k: usize, bias: bool, seed: u64) -> FourierKanLayer {
    let mut layer = FourierKanLayer::seeded(n_in, n_out, k, seed, bias).unwrap();
    if let Some(b) = layer.bias_mut() {
        let mut rng = seeded_rng(seed ^ 0xb1a5);
        b.mapv_inplace(|_| rng.random_range(-1.0..1.0));
    }
    layer
}

fn random_input(batch: usize, n_in: usize, scale: f64, seed: u64) -> Array2<f64> {
    let mut rng = seeded_rng(seed);
    Array2::from_shape_simple_fn((batch, n_in), || rng.random_range(-scale..scale))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn forward_matches_triple_loop(
        n_in in 1usize..=8, n_out in 1usize..=8, k in 1usize..=5, batch in 1usize..=8,
        bias: bool, seed: u64,
    ) {
        let layer = random_layer(n_in, n_out, k, bias, seed);
        let x = random_input(batch, n_in, 4.0, seed.wrapping_add(1));
        let fast = layer.forward(x.view()).unwrap();
        let slow = naive_forward(&layer, &x);
        for (a, b) in fast.iter().zip(slow.iter()) {
            prop_assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn forward_is_two_pi_periodic(
        n_in in 1usize..=6, n_out in 1usize..=6, k in 1usize..=5, batch in 1usize..=6, seed: u64,
        shifts in proptest::collection::vec(-3i32..=3, 36),
    ) {
        let layer = random_layer(n_in, n_out, k, true, seed);
        let x = random_input(batch, n_in, PI, seed.wrapping_add(7));
        let shifted = Array2::from_shape_fn(x.dim(), |(b, i)| x[[b, i]] + 2.0 * PI * shifts[b * n_in + i] as f64);
        let y0 = layer.forward(x.view()).unwrap();
        let y1 = layer.forward(shifted.view()).unwrap();
        for (a, b) in y0.iter().zip(y1.iter()) {
            prop_assert!((a - b).abs() <= 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn zero_coefficients_give_zero_output(
        n_in in 1usize..=8, n_out in 1usize..=8, k in 1usize..=5, batch in 1usize..=8, seed: u64,
    ) {
        let layer = FourierKanLayer::zeros(n_in, n_out, k, false).unwrap();
        let x = random_input(batch, n_in, 100.0, seed);
        prop_assert!(layer.forward(x.view()).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn seeding_and_passes_are_deterministic(
        n_in in 1usize..=6, n_out in 1usize..=6, k in 1usize..=4, seed: u64,
    ) {
        let a = FourierKanLayer::seeded(n_in, n_out, k, seed, true).unwrap();
        let b = FourierKanLayer::seeded(n_in, n_out, k, seed, true).unwrap();
        prop_assert_eq!(&a, &b);
        let x = random_input(3, n_in, 2.0, seed);
        let up = random_input(3, n_out, 1.0, seed.wrapping_add(3));
        prop_assert_eq!(a.forward(x.view()).unwrap(), b.forward(x.view()).unwrap());
        let ga = a.backward(x.view(), up.view()).unwrap();
        let gb = a.backward(x.view(), up.view()).unwrap();
        prop_assert_eq!(ga.d_cos(), gb.d_cos());
        prop_assert_eq!(ga.d_sin(), gb.d_sin());
        prop_assert_eq!(&ga.input, &gb.input);
    }
}

#[test]
fn initialization_variance() {
    for &(n_in, n_out, k) in &[(100, 25, 2), (64, 64, 3), (700, 8, 1)] {
        let layer = FourierKanLayer::seeded(n_in, n_out, k, 11, false).unwrap();
        let values: Vec<f64> = layer.cos_tensor().iter().chain(layer.sin_tensor().iter()).copied().collect();
        assert!(values.len() >= 10_000);
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = 1.0 / (n_out * k) as f64;
        assert!((0.9 * expected..=1.1 * expected).contains(&var), "{n_in}x{n_out}x{k}: {var} vs {expected}");
    }
}

#[test]
fn single_harmonic_hand_example() {
    // out = 2 cos(x) - 0.5 sin(x) + 0.25 at x = pi/3.
    let cos = ndarray::Array3::from_elem((1, 1, 1), 2.0);
    let sin = ndarray::Array3::from_elem((1, 1, 1), -0.5);
    let layer = FourierKanLayer::from_tensors(cos, sin, Some(Array1::from_elem(1, 0.25))).unwrap();
    let y = layer.forward(Array2::from_elem((1, 1), PI / 3.0).view()).unwrap();
    let expected = 2.0 * 0.5 - 0.5 * 3f64.sqrt() / 2.0 + 0.25;
    assert!((y[[0, 0]] - expected).abs() < 1e-15);
}
