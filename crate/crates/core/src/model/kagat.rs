//! KA-GAT: attention-weighted message passing over directed edge states.
//!
//! Every undirected edge `e = (u, v)` yields two directed edges: `2e` for
//! `u -> v` and `2e + 1` for `v -> u`. Per layer `l`:
//!
//! ```text
//! h_uv^(0) = W_dst f_v + W_edge f_uv + W_src f_u      (f_uv oriented u -> v)
//! z_v      = node_proj_l(h_v),  z_u = nbr_proj_l(h_u)
//! α_uv[c]  = softmax over u ∈ N(v) of h_uv^(l)[c]     (per destination, per channel)
//! m_v      = z_v + Σ_{u ∈ N(v)} z_u ⊙ α_uv
//! h_v^(l+1)  = KAN_l(m_v)
//! h_uv^(l+1) = EdgeKAN_l(h_uv^(l))
//! ```
//!
//! Edge states after the last layer feed nothing, so the model holds
//! `L - 1` edge KAN layers. These never carry a bias: the softmax is
//! invariant to a per-channel shift of the edge states it normalizes.

use ndarray::{Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{initial_inputs, readout, readout_backward};
use super::{affine_component, kan_component, named, Cache, Component, ForwardTrace, ModelConfig};
use crate::error::{Error, Result};
use crate::fkan::{FourierBasis, FourierKanLayer, KanStack};
use crate::molgraph::featurize::reversed;
use crate::molgraph::{MolecularGraph, EDGE_DIM, NODE_DIM};
use crate::params::{Affine, Params};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaGatModel {
    pub config: ModelConfig,
    /// `113 -> hidden`, produces `h^(0)` as in KA-GNN.
    pub kan_ini: FourierKanLayer,
    /// Projection of the destination node features, `92 -> hidden`.
    pub edge_dst_proj: Affine,
    /// Projection of the edge features, `21 -> hidden`.
    pub edge_attr_proj: Affine,
    /// Projection of the source node features, `92 -> hidden`.
    pub edge_src_proj: Affine,
    pub node_proj: Vec<Affine>,
    pub nbr_proj: Vec<Affine>,
    pub mp_kan: Vec<FourierKanLayer>,
    pub edge_kan: Vec<FourierKanLayer>,
    pub readout: KanStack,
}

/// Directed view of a graph's edges.
#[derive(Debug, Clone)]
pub struct Directed {
    pub src: Vec<usize>,
    pub dst: Vec<usize>,
    /// Directed edge ids entering each node.
    pub incoming: Vec<Vec<usize>>,
}

impl Directed {
    pub fn new(graph: &MolecularGraph) -> Self {
        let m = graph.edges.len();
        let mut src = Vec::with_capacity(2 * m);
        let mut dst = Vec::with_capacity(2 * m);
        let mut incoming = vec![Vec::new(); graph.n_nodes()];
        for e in &graph.edges {
            for (s, t) in [(e.u, e.v), (e.v, e.u)] {
                incoming[t].push(src.len());
                src.push(s);
                dst.push(t);
            }
        }
        Self { src, dst, incoming }
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }
}

#[derive(Debug, Clone)]
struct EdgeInputs {
    dst: Array2<f64>,
    attr: Array2<f64>,
    src: Array2<f64>,
}

fn edge_inputs(graph: &MolecularGraph, dir: &Directed) -> EdgeInputs {
    let mut attr = Array2::zeros((dir.len(), EDGE_DIM));
    for (e, edge) in graph.edges.iter().enumerate() {
        attr.row_mut(2 * e).assign(&ndarray::ArrayView1::from(&edge.features));
        attr.row_mut(2 * e + 1).assign(&ndarray::ArrayView1::from(&reversed(&edge.features)));
    }
    EdgeInputs {
        dst: graph.node_features.select(Axis(0), &dir.dst),
        attr,
        src: graph.node_features.select(Axis(0), &dir.src),
    }
}

#[derive(Debug, Clone)]
struct LayerCache {
    zu: Array2<f64>,
    m_basis: FourierBasis,
    e_basis: Option<FourierBasis>,
}

#[derive(Debug, Clone)]
pub(crate) struct GatCache {
    ini: FourierBasis,
    dir: Directed,
    inputs: EdgeInputs,
    layers: Vec<LayerCache>,
}

/// Per-destination, per-channel softmax of the edge states.
pub fn attention(dir: &Directed, edge_states: &Array2<f64>) -> Array2<f64> {
    let mut alpha = Array2::zeros(edge_states.dim());
    for inc in &dir.incoming {
        if inc.is_empty() {
            continue;
        }
        for c in 0..edge_states.ncols() {
            let max = inc.iter().map(|&d| edge_states[[d, c]]).fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for &d in inc {
                let w = (edge_states[[d, c]] - max).exp();
                alpha[[d, c]] = w;
                sum += w;
            }
            for &d in inc {
                alpha[[d, c]] /= sum;
            }
        }
    }
    alpha
}

fn aggregate(dir: &Directed, zv: &Array2<f64>, zu: &Array2<f64>, alpha: &Array2<f64>) -> Array2<f64> {
    let mut m = zv.clone();
    for d in 0..dir.len() {
        let mut row = m.row_mut(dir.dst[d]);
        row.zip_mut_with(&(&zu.row(dir.src[d]) * &alpha.row(d)), |a, b| *a += b);
    }
    m
}

impl KaGatModel {
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (h, k, bias) = (config.hidden_dim, config.harmonics, config.kan_bias);
        let l = config.n_layers;
        let kan_ini = FourierKanLayer::init(NODE_DIM + EDGE_DIM, h, k, bias, rng)?;
        let edge_dst_proj = Affine::init(NODE_DIM, h, rng)?;
        let edge_attr_proj = Affine::init(EDGE_DIM, h, rng)?;
        let edge_src_proj = Affine::init(NODE_DIM, h, rng)?;
        let mut node_proj = Vec::with_capacity(l);
        let mut nbr_proj = Vec::with_capacity(l);
        let mut mp_kan = Vec::with_capacity(l);
        for _ in 0..l {
            node_proj.push(Affine::init(h, h, rng)?);
            nbr_proj.push(Affine::init(h, h, rng)?);
            mp_kan.push(FourierKanLayer::init(h, h, k, bias, rng)?);
        }
        let edge_kan = (0..l.saturating_sub(1))
            .map(|_| FourierKanLayer::init(h, h, k, false, rng))
            .collect::<Result<_>>()?;
        let readout = KanStack::init(&config.readout_widths(), k, bias, rng)?;
        Ok(Self {
            config: config.clone(),
            kan_ini,
            edge_dst_proj,
            edge_attr_proj,
            edge_src_proj,
            node_proj,
            nbr_proj,
            mp_kan,
            edge_kan,
            readout,
        })
    }

    pub fn components(&self) -> Vec<Component> {
        let mut c = vec![
            kan_component("kan_ini", &self.kan_ini),
            affine_component("edge_dst_proj", &self.edge_dst_proj),
            affine_component("edge_attr_proj", &self.edge_attr_proj),
            affine_component("edge_src_proj", &self.edge_src_proj),
        ];
        for l in 0..self.mp_kan.len() {
            c.push(affine_component(&format!("node_proj.{l}"), &self.node_proj[l]));
            c.push(affine_component(&format!("nbr_proj.{l}"), &self.nbr_proj[l]));
            c.push(kan_component(&format!("mp_kan.{l}"), &self.mp_kan[l]));
        }
        c.extend(self.edge_kan.iter().enumerate().map(|(l, m)| kan_component(&format!("edge_kan.{l}"), m)));
        c.extend(
            self.readout
                .layers()
                .iter()
                .enumerate()
                .map(|(t, m)| kan_component(&format!("readout.{t}"), m)),
        );
        c
    }

    pub fn init_node_states(&self, graph: &MolecularGraph) -> Result<Array2<f64>> {
        self.kan_ini.forward(initial_inputs(graph).view())
    }

    /// `h_uv^(0)` for every directed edge (see [`Directed`]), `[2m, hidden]`.
    pub fn init_edges(&self, graph: &MolecularGraph) -> Result<Array2<f64>> {
        self.edge_states_from(&edge_inputs(graph, &Directed::new(graph)))
    }

    fn edge_states_from(&self, x: &EdgeInputs) -> Result<Array2<f64>> {
        Ok(self.edge_dst_proj.forward(x.dst.view())?
            + self.edge_attr_proj.forward(x.attr.view())?
            + self.edge_src_proj.forward(x.src.view())?)
    }

    /// Layer `l` applied to node and edge states. Edge states are returned
    /// unchanged by the last layer, which has no edge KAN.
    pub fn message_pass(
        &self,
        l: usize,
        h: &Array2<f64>,
        edges: &Array2<f64>,
        graph: &MolecularGraph,
    ) -> Result<(Array2<f64>, Array2<f64>)> {
        if l >= self.mp_kan.len() {
            return Err(Error::InvalidArgument(format!("layer {l} out of range for {} layers", self.mp_kan.len())));
        }
        let dir = Directed::new(graph);
        let alpha = attention(&dir, edges);
        let zv = self.node_proj[l].forward(h.view())?;
        let zu = self.nbr_proj[l].forward(h.view())?;
        let h_next = self.mp_kan[l].forward(aggregate(&dir, &zv, &zu, &alpha).view())?;
        let e_next = match self.edge_kan.get(l) {
            Some(k) => k.forward(edges.view())?,
            None => edges.clone(),
        };
        Ok((h_next, e_next))
    }

    pub fn forward(&self, graph: &MolecularGraph) -> Result<ForwardTrace> {
        let dir = Directed::new(graph);
        let inputs = edge_inputs(graph, &dir);
        let ini = self.kan_ini.basis(initial_inputs(graph).view())?;
        let mut h = self.kan_ini.forward_basis(&ini);
        let mut e = self.edge_states_from(&inputs)?;
        let n_layers = self.mp_kan.len();
        let mut node_states = Vec::with_capacity(n_layers + 1);
        let mut edge_states = Vec::with_capacity(n_layers);
        let mut attn = Vec::with_capacity(n_layers);
        let mut layers = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let alpha = attention(&dir, &e);
            let zv = self.node_proj[l].forward(h.view())?;
            let zu = self.nbr_proj[l].forward(h.view())?;
            let m_basis = self.mp_kan[l].basis(aggregate(&dir, &zv, &zu, &alpha).view())?;
            let h_next = self.mp_kan[l].forward_basis(&m_basis);
            let (e_basis, e_next) = match self.edge_kan.get(l) {
                Some(k) => {
                    let b = k.basis(e.view())?;
                    let out = k.forward_basis(&b);
                    (Some(b), Some(out))
                }
                None => (None, None),
            };
            node_states.push(std::mem::replace(&mut h, h_next));
            attn.push(alpha);
            layers.push(LayerCache { zu, m_basis, e_basis });
            if let Some(next) = e_next {
                edge_states.push(std::mem::replace(&mut e, next));
            } else {
                edge_states.push(e.clone());
            }
        }
        let r = readout(&self.readout, &h)?;
        node_states.push(h);
        Ok(ForwardTrace {
            node_states,
            edge_states,
            attention: attn,
            pooled: r.pooled,
            logits: r.logits,
            probabilities: r.probabilities,
            readout: r.trace,
            cache: Cache::Gat(GatCache {
                ini,
                dir,
                inputs,
                layers,
            }),
        })
    }

    pub(crate) fn backward(
        &self,
        graph: &MolecularGraph,
        trace: &ForwardTrace,
        d_logits: &Array1<f64>,
        grad: &mut KaGatModel,
    ) -> Result<()> {
        let Cache::Gat(cache) = &trace.cache else {
            return Err(Error::InvalidArgument("trace was not produced by a KA-GAT model".into()));
        };
        let dir = &cache.dir;
        let hidden = self.config.hidden_dim;
        let mut dh = readout_backward(&self.readout, &trace.readout, d_logits, graph.n_nodes(), &mut grad.readout)?;
        // gradient with respect to the edge states leaving the current layer
        let mut de = Array2::zeros((dir.len(), hidden));
        for l in (0..self.mp_kan.len()).rev() {
            let lc = &cache.layers[l];
            let alpha = &trace.attention[l];
            if let Some(b) = &lc.e_basis {
                de = self.edge_kan[l]
                    .backward_basis(b, de.view(), &mut grad.edge_kan[l], true)?
                    .expect("input gradient requested");
            }
            let dm = self.mp_kan[l]
                .backward_basis(&lc.m_basis, dh.view(), &mut grad.mp_kan[l], true)?
                .expect("input gradient requested");
            let mut dzu = Array2::zeros(dm.dim());
            let mut dalpha = Array2::zeros((dir.len(), hidden));
            for d in 0..dir.len() {
                let (s, t) = (dir.src[d], dir.dst[d]);
                let mut row = dzu.row_mut(s);
                row += &(&dm.row(t) * &alpha.row(d));
                dalpha.row_mut(d).assign(&(&dm.row(t) * &lc.zu.row(s)));
            }
            for inc in &dir.incoming {
                for c in 0..hidden {
                    let dot: f64 = inc.iter().map(|&d| alpha[[d, c]] * dalpha[[d, c]]).sum();
                    for &d in inc {
                        de[[d, c]] += alpha[[d, c]] * (dalpha[[d, c]] - dot);
                    }
                }
            }
            let h_in = trace.node_states[l].view();
            dh = self.node_proj[l].backward(h_in, dm.view(), &mut grad.node_proj[l]);
            dh += &self.nbr_proj[l].backward(h_in, dzu.view(), &mut grad.nbr_proj[l]);
        }
        let x = &cache.inputs;
        self.edge_dst_proj.backward(x.dst.view(), de.view(), &mut grad.edge_dst_proj);
        self.edge_attr_proj.backward(x.attr.view(), de.view(), &mut grad.edge_attr_proj);
        self.edge_src_proj.backward(x.src.view(), de.view(), &mut grad.edge_src_proj);
        self.kan_ini.backward_basis(&cache.ini, dh.view(), &mut grad.kan_ini, false)?;
        Ok(())
    }
}

impl Params for KaGatModel {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = named("kan_ini".into(), &self.kan_ini);
        v.extend(named("edge_dst_proj".into(), &self.edge_dst_proj));
        v.extend(named("edge_attr_proj".into(), &self.edge_attr_proj));
        v.extend(named("edge_src_proj".into(), &self.edge_src_proj));
        for l in 0..self.mp_kan.len() {
            v.extend(named(format!("node_proj.{l}"), &self.node_proj[l]));
            v.extend(named(format!("nbr_proj.{l}"), &self.nbr_proj[l]));
            v.extend(named(format!("mp_kan.{l}"), &self.mp_kan[l]));
        }
        for (l, k) in self.edge_kan.iter().enumerate() {
            v.extend(named(format!("edge_kan.{l}"), k));
        }
        v.extend(named("readout".into(), &self.readout));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.kan_ini.params_mut();
        v.extend(self.edge_dst_proj.params_mut());
        v.extend(self.edge_attr_proj.params_mut());
        v.extend(self.edge_src_proj.params_mut());
        for ((np, nb), mk) in self.node_proj.iter_mut().zip(&mut self.nbr_proj).zip(&mut self.mp_kan) {
            v.extend(np.params_mut());
            v.extend(nb.params_mut());
            v.extend(mk.params_mut());
        }
        for k in &mut self.edge_kan {
            v.extend(k.params_mut());
        }
        v.extend(self.readout.params_mut());
        v
    }
}
