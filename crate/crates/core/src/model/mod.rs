//! KA-GNN and KA-GAT graph classifiers built from Fourier KAN layers.
//!
//! Both variants share the node-state initialization
//! `h_v^(0) = KAN_ini(f_v ⊕ mean_{u ∈ N(v)} f_uv)`, mean-pool readout into a
//! KAN head, sigmoid outputs and a masked binary cross-entropy summed over
//! tasks and graphs. They differ in the message-passing layers; see
//! [`kagnn`] and [`kagat`].

mod common;
pub mod kagat;
pub mod kagnn;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fkan::{FourierBasis, StackTrace};
use crate::molgraph::MolecularGraph;
use crate::parallel;
use crate::params::{prefixed, Params};

pub use common::{bce_logit_grad, bce_loss, sigmoid, PROB_CLAMP};
pub use kagat::KaGatModel;
pub use kagnn::KaGnnModel;

pub const CHECKPOINT_SCHEMA: &str = "kagnn-checkpoint/v1";
pub const DEFAULT_HIDDEN_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    KaGnn,
    KaGat,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kagnn" | "ka-gnn" => Ok(Variant::KaGnn),
            "kagat" | "ka-gat" => Ok(Variant::KaGat),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}, expected kagnn or kagat"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::KaGnn => "kagnn",
            Variant::KaGat => "kagat",
        })
    }
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub variant: Variant,
    /// Number of message-passing layers `L` (0 allowed).
    pub n_layers: usize,
    #[serde(rename = "K")]
    pub harmonics: usize,
    pub hidden_dim: usize,
    pub n_tasks: usize,
    /// 1 or 2 readout layers.
    pub readout_layers: usize,
    /// Bias term on every Fourier KAN layer of the model.
    #[serde(default)]
    pub kan_bias: bool,
    /// Cutoff (Å) the training graphs were built with; recorded for checkpoints.
    pub cutoff: f64,
}

impl ModelConfig {
    pub fn new(variant: Variant, n_layers: usize, harmonics: usize, n_tasks: usize) -> Self {
        Self {
            variant,
            n_layers,
            harmonics,
            hidden_dim: DEFAULT_HIDDEN_DIM,
            n_tasks,
            readout_layers: default_readout_layers(n_tasks),
            kan_bias: false,
            cutoff: crate::molgraph::DEFAULT_CUTOFF,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, why: &str| Err(Error::InvalidArgument(format!("model config field {field}: {why}")));
        if self.harmonics == 0 {
            return bad("K", "must be positive");
        }
        if self.hidden_dim == 0 {
            return bad("hidden_dim", "must be positive");
        }
        if self.n_tasks == 0 {
            return bad("n_tasks", "must be positive");
        }
        if !(1..=2).contains(&self.readout_layers) {
            return bad("readout_layers", "must be 1 or 2");
        }
        if !(self.cutoff >= 0.0 && self.cutoff.is_finite()) {
            return bad("cutoff", "must be finite and >= 0");
        }
        Ok(())
    }

    /// Widths of the readout head, e.g. `[64, 1]` or `[64, 64, 12]`.
    pub fn readout_widths(&self) -> Vec<usize> {
        let mut w = vec![self.hidden_dim; self.readout_layers];
        w.push(self.n_tasks);
        w
    }
}

/// One readout layer for a single task, two otherwise.
pub fn default_readout_layers(n_tasks: usize) -> usize {
    if n_tasks == 1 {
        1
    } else {
        2
    }
}

/// Shape of one trainable component, for parameter accounting.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    Kan {
        name: String,
        n_in: usize,
        n_out: usize,
        harmonics: usize,
        bias: bool,
    },
    Affine {
        name: String,
        n_in: usize,
        n_out: usize,
    },
}

/// Everything recorded by a forward pass over one graph.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    /// Node states `h^(0) .. h^(L)`, each `[n, hidden_dim]`.
    pub node_states: Vec<Array2<f64>>,
    /// KA-GAT only: directed edge states `h_uv^(0) .. h_uv^(L-1)`, each `[2m, hidden_dim]`.
    pub edge_states: Vec<Array2<f64>>,
    /// KA-GAT only: attention weights per layer, `[2m, hidden_dim]`.
    pub attention: Vec<Array2<f64>>,
    pub pooled: Array1<f64>,
    pub logits: Array1<f64>,
    pub probabilities: Array1<f64>,
    pub(crate) readout: StackTrace,
    pub(crate) cache: Cache,
}

#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub(crate) enum Cache {
    Gnn {
        ini: FourierBasis,
        mp: Vec<FourierBasis>,
    },
    Gat(kagat::GatCache),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)]
pub enum Model {
    KaGnn(KaGnnModel),
    KaGat(KaGatModel),
}

impl Model {
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::derived_rng(seed, 0x6d6f_64656c);
        Ok(match config.variant {
            Variant::KaGnn => Model::KaGnn(KaGnnModel::init(config, &mut rng)?),
            Variant::KaGat => Model::KaGat(KaGatModel::init(config, &mut rng)?),
        })
    }

    pub fn config(&self) -> &ModelConfig {
        match self {
            Model::KaGnn(m) => &m.config,
            Model::KaGat(m) => &m.config,
        }
    }

    pub fn components(&self) -> Vec<Component> {
        match self {
            Model::KaGnn(m) => m.components(),
            Model::KaGat(m) => m.components(),
        }
    }

    pub fn forward(&self, graph: &MolecularGraph) -> Result<ForwardTrace> {
        match self {
            Model::KaGnn(m) => m.forward(graph),
            Model::KaGat(m) => m.forward(graph),
        }
    }

    /// Probabilities for each graph, `[n_graphs][n_tasks]`.
    pub fn predict(&self, graphs: &[&MolecularGraph]) -> Result<Vec<Array1<f64>>> {
        parallel::try_map(graphs, |g| self.forward(g).map(|t| t.probabilities))
    }

    fn check_labels(&self, graph: &MolecularGraph) -> Result<()> {
        let t = self.config().n_tasks;
        if graph.n_tasks() != t {
            return Err(Error::Shape(format!(
                "graph {:?} has {} labels, model predicts {t} tasks",
                graph.id,
                graph.n_tasks()
            )));
        }
        Ok(())
    }

    /// Summed masked BCE of one graph.
    pub fn graph_loss(&self, graph: &MolecularGraph) -> Result<f64> {
        self.check_labels(graph)?;
        let trace = self.forward(graph)?;
        Ok(bce_loss(
            trace.probabilities.as_slice().expect("contiguous"),
            &graph.label_values(),
            &graph.label_mask(),
        ))
    }

    /// Summed loss of one graph and its parameter gradient.
    pub fn graph_loss_and_grad(&self, graph: &MolecularGraph) -> Result<(f64, Model)> {
        self.check_labels(graph)?;
        let trace = self.forward(graph)?;
        let probs = trace.probabilities.as_slice().expect("contiguous");
        let (labels, mask) = (graph.label_values(), graph.label_mask());
        let loss = bce_loss(probs, &labels, &mask);
        let d_logits = Array1::from(bce_logit_grad(probs, &labels, &mask));
        let mut grad = self.zeros_like();
        self.backward(graph, &trace, &d_logits, &mut grad)?;
        Ok((loss, grad))
    }

    /// Backpropagates `dL/dlogits` through a completed trace, accumulating into `grad`.
    pub fn backward(
        &self,
        graph: &MolecularGraph,
        trace: &ForwardTrace,
        d_logits: &Array1<f64>,
        grad: &mut Model,
    ) -> Result<()> {
        match (self, grad) {
            (Model::KaGnn(m), Model::KaGnn(g)) => m.backward(graph, trace, d_logits, g),
            (Model::KaGat(m), Model::KaGat(g)) => m.backward(graph, trace, d_logits, g),
            _ => Err(Error::InvalidArgument("gradient container has the wrong variant".into())),
        }
    }

    /// Loss summed over `graphs`.
    pub fn batch_loss(&self, graphs: &[&MolecularGraph]) -> Result<f64> {
        parallel::map_reduce(graphs, |g| self.graph_loss(g), |a, b| Ok(a? + b?)).unwrap_or(Ok(0.0))
    }

    /// Loss summed over `graphs` and the summed gradient. The reduction order
    /// is fixed, so the result does not depend on the thread count.
    pub fn batch_loss_and_grad(&self, graphs: &[&MolecularGraph]) -> Result<(f64, Model)> {
        let reduced = parallel::map_reduce(
            graphs,
            |g| self.graph_loss_and_grad(g),
            |a, b| {
                let (la, mut ga) = a?;
                let (lb, gb) = b?;
                ga.add_assign_params(&gb);
                Ok((la + lb, ga))
            },
        );
        reduced.unwrap_or_else(|| Ok((0.0, self.zeros_like())))
    }

    /// Checks that every tensor agrees with the configuration.
    pub fn validate(&self) -> Result<()> {
        self.config().validate()?;
        let expected = match self {
            Model::KaGnn(m) => KaGnnModel::init(&m.config, &mut crate::rng::seeded_rng(0))?.components(),
            Model::KaGat(m) => KaGatModel::init(&m.config, &mut crate::rng::seeded_rng(0))?.components(),
        };
        let actual = self.components();
        if actual != expected {
            return Err(Error::Shape("checkpoint tensors do not match the recorded configuration".into()));
        }
        let variant_ok = matches!(
            (self, self.config().variant),
            (Model::KaGnn(_), Variant::KaGnn) | (Model::KaGat(_), Variant::KaGat)
        );
        if !variant_ok {
            return Err(Error::InvalidArgument("checkpoint variant disagrees with its config".into()));
        }
        if self.params().iter().any(|(_, p)| p.iter().any(|v| !v.is_finite())) {
            return Err(Error::Numeric("checkpoint contains non-finite parameters".into()));
        }
        Ok(())
    }

    pub fn to_checkpoint_json(&self) -> String {
        let doc = CheckpointRef {
            schema: CHECKPOINT_SCHEMA,
            model: self,
        };
        serde_json::to_string(&doc).expect("model serializes")
    }

    pub fn from_checkpoint_json(bytes: &[u8]) -> Result<Self> {
        let doc: Checkpoint = serde_json::from_slice(bytes)
            .map_err(|e| Error::parse(format!("checkpoint line {} column {}", e.line(), e.column()), e.to_string()))?;
        if doc.schema != CHECKPOINT_SCHEMA {
            return Err(Error::parse(
                "checkpoint",
                format!("unsupported schema {:?}, expected {CHECKPOINT_SCHEMA:?}", doc.schema),
            ));
        }
        doc.model.validate()?;
        Ok(doc.model)
    }
}

#[derive(Serialize)]
struct CheckpointRef<'a> {
    schema: &'a str,
    model: &'a Model,
}

#[derive(Deserialize)]
struct Checkpoint {
    schema: String,
    model: Model,
}

impl Params for Model {
    fn params(&self) -> Vec<(String, &[f64])> {
        match self {
            Model::KaGnn(m) => m.params(),
            Model::KaGat(m) => m.params(),
        }
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        match self {
            Model::KaGnn(m) => m.params_mut(),
            Model::KaGat(m) => m.params_mut(),
        }
    }
}

pub(crate) fn kan_component(name: &str, l: &crate::fkan::FourierKanLayer) -> Component {
    Component::Kan {
        name: name.to_string(),
        n_in: l.n_in(),
        n_out: l.n_out(),
        harmonics: l.harmonics(),
        bias: l.bias().is_some(),
    }
}

pub(crate) fn affine_component(name: &str, a: &crate::params::Affine) -> Component {
    Component::Affine {
        name: name.to_string(),
        n_in: a.n_in,
        n_out: a.n_out,
    }
}

pub(crate) fn named<P: Params>(prefix: String, p: &P) -> Vec<(String, &[f64])> {
    prefixed(&prefix, p.params())
}
