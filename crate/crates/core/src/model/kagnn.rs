//! KA-GNN: residual message passing
//! `h_v^(l+1) = h_v^(l) + KAN_l(h_v^(l) ⊕ mean_{u ∈ N(v)} h_u^(l))`.

use ndarray::{concatenate, s, Array1, Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::common::{initial_inputs, neighbor_mean, neighbor_mean_backward, readout, readout_backward};
use super::{kan_component, named, Cache, Component, ForwardTrace, ModelConfig};
use crate::error::{Error, Result};
use crate::fkan::{FourierKanLayer, KanStack};
use crate::molgraph::{MolecularGraph, EDGE_DIM, NODE_DIM};
use crate::params::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaGnnModel {
    pub config: ModelConfig,
    /// `113 -> hidden`.
    pub kan_ini: FourierKanLayer,
    /// `2 hidden -> hidden`, one per message-passing layer.
    pub mp_layers: Vec<FourierKanLayer>,
    pub readout: KanStack,
}

impl KaGnnModel {
    pub fn init<R: Rng + ?Sized>(config: &ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (h, k, bias) = (config.hidden_dim, config.harmonics, config.kan_bias);
        let kan_ini = FourierKanLayer::init(NODE_DIM + EDGE_DIM, h, k, bias, rng)?;
        let mp_layers = (0..config.n_layers)
            .map(|_| FourierKanLayer::init(2 * h, h, k, bias, rng))
            .collect::<Result<_>>()?;
        let readout = KanStack::init(&config.readout_widths(), k, bias, rng)?;
        Ok(Self {
            config: config.clone(),
            kan_ini,
            mp_layers,
            readout,
        })
    }

    pub fn components(&self) -> Vec<Component> {
        let mut c = vec![kan_component("kan_ini", &self.kan_ini)];
        c.extend(self.mp_layers.iter().enumerate().map(|(l, m)| kan_component(&format!("mp.{l}"), m)));
        c.extend(
            self.readout
                .layers()
                .iter()
                .enumerate()
                .map(|(t, m)| kan_component(&format!("readout.{t}"), m)),
        );
        c
    }

    /// `h^(0)`, shape `[n, hidden]`.
    pub fn init_node_states(&self, graph: &MolecularGraph) -> Result<Array2<f64>> {
        self.kan_ini.forward(initial_inputs(graph).view())
    }

    /// One residual message-passing step with layer `l`.
    pub fn message_pass(&self, l: usize, h: &Array2<f64>, graph: &MolecularGraph) -> Result<Array2<f64>> {
        let layer = self.layer(l)?;
        let z = concatenate![Axis(1), h.view(), neighbor_mean(graph, h.view()).view()];
        Ok(h + &layer.forward(z.view())?)
    }

    fn layer(&self, l: usize) -> Result<&FourierKanLayer> {
        self.mp_layers
            .get(l)
            .ok_or_else(|| Error::InvalidArgument(format!("layer {l} out of range for {} layers", self.mp_layers.len())))
    }

    pub fn forward(&self, graph: &MolecularGraph) -> Result<ForwardTrace> {
        let ini = self.kan_ini.basis(initial_inputs(graph).view())?;
        let mut h = self.kan_ini.forward_basis(&ini);
        let mut node_states = Vec::with_capacity(self.mp_layers.len() + 1);
        let mut mp = Vec::with_capacity(self.mp_layers.len());
        for layer in &self.mp_layers {
            let z = concatenate![Axis(1), h.view(), neighbor_mean(graph, h.view()).view()];
            let basis = layer.basis(z.view())?;
            let next = &h + &layer.forward_basis(&basis);
            node_states.push(h);
            mp.push(basis);
            h = next;
        }
        let r = readout(&self.readout, &h)?;
        node_states.push(h);
        Ok(ForwardTrace {
            node_states,
            edge_states: Vec::new(),
            attention: Vec::new(),
            pooled: r.pooled,
            logits: r.logits,
            probabilities: r.probabilities,
            readout: r.trace,
            cache: Cache::Gnn { ini, mp },
        })
    }

    pub(crate) fn backward(
        &self,
        graph: &MolecularGraph,
        trace: &ForwardTrace,
        d_logits: &Array1<f64>,
        grad: &mut KaGnnModel,
    ) -> Result<()> {
        let Cache::Gnn { ini, mp } = &trace.cache else {
            return Err(Error::InvalidArgument("trace was not produced by a KA-GNN model".into()));
        };
        let h = self.config.hidden_dim;
        let mut dh = readout_backward(&self.readout, &trace.readout, d_logits, graph.n_nodes(), &mut grad.readout)?;
        for l in (0..self.mp_layers.len()).rev() {
            let dz = self.mp_layers[l]
                .backward_basis(&mp[l], dh.view(), &mut grad.mp_layers[l], true)?
                .expect("input gradient requested");
            // residual path plus the self half of the concatenation
            dh += &dz.slice(s![.., ..h]);
            neighbor_mean_backward(graph, dz.slice(s![.., h..]), &mut dh);
        }
        self.kan_ini.backward_basis(ini, dh.view(), &mut grad.kan_ini, false)?;
        Ok(())
    }
}

impl Params for KaGnnModel {
    fn params(&self) -> Vec<(String, &[f64])> {
        let mut v = named("kan_ini".into(), &self.kan_ini);
        for (l, m) in self.mp_layers.iter().enumerate() {
            v.extend(named(format!("mp.{l}"), m));
        }
        v.extend(named("readout".into(), &self.readout));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = self.kan_ini.params_mut();
        for m in &mut self.mp_layers {
            v.extend(m.params_mut());
        }
        v.extend(self.readout.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::{path_graph, small_config};
    use crate::model::Variant;
    use crate::rng::seeded_rng;

    fn model(layers: usize) -> KaGnnModel {
        let config = ModelConfig {
            n_layers: layers,
            ..small_config(Variant::KaGnn, 1)
        };
        KaGnnModel::init(&config, &mut seeded_rng(11)).unwrap()
    }

    #[test]
    fn isolated_node_uses_zero_edge_mean() {
        let m = model(1);
        let g = path_graph(1, vec![Some(true)]);
        let mut x = Array2::zeros((1, NODE_DIM + EDGE_DIM));
        x.slice_mut(s![.., ..NODE_DIM]).assign(&g.node_features);
        assert_eq!(m.init_node_states(&g).unwrap(), m.kan_ini.forward(x.view()).unwrap());
    }

    #[test]
    fn single_neighbor_mean_is_that_edge() {
        let m = model(1);
        let g = path_graph(2, vec![Some(true)]);
        let x = initial_inputs(&g);
        assert_eq!(x.slice(s![1, NODE_DIM..]).to_vec(), g.edges[0].features.to_vec());
        assert_eq!(m.init_node_states(&g).unwrap().row(1), m.kan_ini.forward(x.view()).unwrap().row(1));
    }

    #[test]
    fn zero_layer_is_identity() {
        let mut m = model(1);
        m.mp_layers[0].fill(0.0);
        let g = path_graph(4, vec![Some(true)]);
        let h0 = m.init_node_states(&g).unwrap();
        assert_eq!(m.message_pass(0, &h0, &g).unwrap(), h0);
    }

    #[test]
    fn forward_matches_manual_chain() {
        let m = model(2);
        let g = path_graph(4, vec![Some(false)]);
        let trace = m.forward(&g).unwrap();
        let mut h = m.init_node_states(&g).unwrap();
        for l in 0..2 {
            assert_eq!(trace.node_states[l], h);
            h = m.message_pass(l, &h, &g).unwrap();
        }
        assert_eq!(trace.node_states[2], h);
        let pooled = h.mean_axis(Axis(0)).unwrap();
        let logits = m.readout.forward(pooled.view().insert_axis(Axis(0))).unwrap();
        assert_eq!(trace.logits.to_vec(), logits.row(0).to_vec());
    }

    #[test]
    fn zero_layers_reads_out_initial_states() {
        let m = model(0);
        let g = path_graph(3, vec![Some(true)]);
        let t = m.forward(&g).unwrap();
        assert_eq!(t.node_states.len(), 1);
        assert_eq!(t.pooled, m.init_node_states(&g).unwrap().mean_axis(Axis(0)).unwrap());
    }
}
