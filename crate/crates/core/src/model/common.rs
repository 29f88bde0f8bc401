use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::fkan::{KanStack, StackTrace};
use crate::molgraph::{MolecularGraph, EDGE_DIM, NODE_DIM};

/// Probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]` inside the loss.
pub const PROB_CLAMP: f64 = 1e-7;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy summed over the unmasked entries.
pub fn bce_loss(probabilities: &[f64], labels: &[f64], mask: &[bool]) -> f64 {
    debug_assert!(probabilities.len() == labels.len() && labels.len() == mask.len());
    let mut loss = 0.0;
    let mut any = false;
    for ((&p, &y), &m) in probabilities.iter().zip(labels).zip(mask) {
        if !m {
            continue;
        }
        any = true;
        let p = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * p.ln() + (1.0 - y) * (1.0 - p).ln();
    }
    if !any {
        log::debug!("degenerate batch: every label is masked");
    }
    loss
}

/// dL/dz for `p = sigmoid(z)`: `p - y` on unmasked entries, 0 where masked
/// or where the clamp is active.
pub fn bce_logit_grad(probabilities: &[f64], labels: &[f64], mask: &[bool]) -> Vec<f64> {
    probabilities
        .iter()
        .zip(labels)
        .zip(mask)
        .map(|((&p, &y), &m)| {
            if !m || !(PROB_CLAMP..=1.0 - PROB_CLAMP).contains(&p) {
                0.0
            } else {
                p - y
            }
        })
        .collect()
}

/// `f_v ⊕ mean_{u ∈ N(v)} f_uv` for every node, `[n, 113]`. Edge features are
/// oriented into `v`; nodes without neighbors get a zero mean.
pub(crate) fn initial_inputs(graph: &MolecularGraph) -> Array2<f64> {
    let n = graph.n_nodes();
    let mut x = Array2::zeros((n, NODE_DIM + EDGE_DIM));
    x.slice_mut(ndarray::s![.., ..NODE_DIM]).assign(&graph.node_features);
    for v in 0..n {
        let nbrs = &graph.neighbors[v];
        if nbrs.is_empty() {
            continue;
        }
        let mut row = x.row_mut(v);
        for nb in nbrs {
            let f = graph.incoming_features(v, *nb);
            for (c, val) in f.iter().enumerate() {
                row[NODE_DIM + c] += val;
            }
        }
        let inv = 1.0 / nbrs.len() as f64;
        row.slice_mut(ndarray::s![NODE_DIM..]).mapv_inplace(|t| t * inv);
    }
    x
}

/// Row `v` is the mean of `h` over the neighbors of `v` (zero if none).
pub(crate) fn neighbor_mean(graph: &MolecularGraph, h: ArrayView2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(h.dim());
    for (v, nbrs) in graph.neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let mut row = out.row_mut(v);
        for nb in nbrs {
            row += &h.row(nb.node);
        }
        row /= nbrs.len() as f64;
    }
    out
}

/// Adjoint of [`neighbor_mean`]: accumulates into `dh`.
pub(crate) fn neighbor_mean_backward(graph: &MolecularGraph, d_mean: ArrayView2<f64>, dh: &mut Array2<f64>) {
    for (v, nbrs) in graph.neighbors.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let scaled = &d_mean.row(v) / nbrs.len() as f64;
        for nb in nbrs {
            let mut row = dh.row_mut(nb.node);
            row += &scaled;
        }
    }
}

pub(crate) struct Readout {
    pub pooled: Array1<f64>,
    pub trace: StackTrace,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
}

/// Mean pool over nodes, then the KAN head and a sigmoid.
pub(crate) fn readout(head: &KanStack, states: &Array2<f64>) -> Result<Readout> {
    let pooled = states
        .mean_axis(Axis(0))
        .ok_or_else(|| Error::InvalidArgument("readout of an empty graph".into()))?;
    let trace = head.forward_trace(pooled.view().insert_axis(Axis(0)))?;
    let logits = trace.output.row(0).to_owned();
    let probabilities = logits.mapv(sigmoid);
    Ok(Readout {
        pooled,
        trace,
        logits,
        probabilities,
    })
}

/// Gradient of the loss with respect to every final node state.
pub(crate) fn readout_backward(
    head: &KanStack,
    trace: &StackTrace,
    d_logits: &Array1<f64>,
    n_nodes: usize,
    grad: &mut KanStack,
) -> Result<Array2<f64>> {
    let d_pooled = head.backward(trace, d_logits.view().insert_axis(Axis(0)), grad)?;
    let per_node = d_pooled.row(0).mapv(|v| v / n_nodes as f64);
    Ok(per_node.broadcast((n_nodes, per_node.len())).expect("row broadcast").to_owned())
}
