use std::collections::{HashMap, HashSet};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::featurize::{featurize_edge, featurize_node, reversed, EDGE_DIM, NODE_DIM};
use super::molecule::{distance, labels_from_ints, labels_to_ints, Label, Molecule};
use crate::error::{Error, Result};

pub const DEFAULT_CUTOFF: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Covalent,
    Cutoff,
}

/// Undirected edge, stored once. `features` are oriented from `u` to `v`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub kind: EdgeKind,
    pub features: [f64; EDGE_DIM],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Neighbor {
    pub node: usize,
    pub edge: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MolecularGraph {
    pub id: String,
    /// `[n_atoms, 92]`.
    pub node_features: Array2<f64>,
    pub edges: Vec<Edge>,
    /// Neighbors of every node over the union of covalent and cutoff edges.
    pub neighbors: Vec<Vec<Neighbor>>,
    pub labels: Vec<Label>,
}

impl MolecularGraph {
    pub fn from_parts(id: String, node_features: Array2<f64>, edges: Vec<Edge>, labels: Vec<Label>) -> Result<Self> {
        let n = node_features.nrows();
        if n == 0 {
            return Err(Error::InvalidArgument(format!("graph {id:?} has no nodes")));
        }
        if node_features.ncols() != NODE_DIM {
            return Err(Error::Shape(format!(
                "graph {id:?}: node features have width {}, expected {NODE_DIM}",
                node_features.ncols()
            )));
        }
        let mut neighbors = vec![Vec::new(); n];
        for (e, edge) in edges.iter().enumerate() {
            if edge.u >= n || edge.v >= n || edge.u == edge.v {
                return Err(Error::InvalidArgument(format!(
                    "graph {id:?}: edge {e} ({}, {}) invalid for {n} nodes",
                    edge.u, edge.v
                )));
            }
            neighbors[edge.v].push(Neighbor { node: edge.u, edge: e });
            neighbors[edge.u].push(Neighbor { node: edge.v, edge: e });
        }
        Ok(Self {
            id,
            node_features,
            edges,
            neighbors,
            labels,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.node_features.nrows()
    }

    pub fn n_tasks(&self) -> usize {
        self.labels.len()
    }

    /// Features of the message travelling from `nb.node` into `target`.
    pub fn incoming_features(&self, target: usize, nb: Neighbor) -> [f64; EDGE_DIM] {
        let edge = &self.edges[nb.edge];
        if edge.v == target {
            edge.features
        } else {
            reversed(&edge.features)
        }
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn label_values(&self) -> Vec<f64> {
        self.labels.iter().map(|l| if *l == Some(true) { 1.0 } else { 0.0 }).collect()
    }

    pub fn label_mask(&self) -> Vec<bool> {
        self.labels.iter().map(Option::is_some).collect()
    }
}

/// Builds the molecular graph: every covalent bond becomes a covalent edge
/// and every non-bonded pair with distance `<= cutoff` becomes a cutoff
/// edge. `cutoff == 0` yields covalent edges only.
pub fn build_graph(mol: &Molecule, cutoff: f64) -> Result<MolecularGraph> {
    if !(cutoff >= 0.0 && cutoff.is_finite()) {
        return Err(Error::InvalidArgument(format!("cutoff must be finite and >= 0, got {cutoff}")));
    }
    mol.validate()?;
    let n = mol.atoms.len();
    let mut node_features = Array2::zeros((n, NODE_DIM));
    for (a, atom) in mol.atoms.iter().enumerate() {
        let f = featurize_node(atom)?;
        node_features.row_mut(a).assign(&ndarray::ArrayView1::from(&f));
    }

    let mut edges = Vec::with_capacity(mol.bonds.len());
    let mut bonded = HashSet::with_capacity(mol.bonds.len());
    for bond in &mol.bonds {
        bonded.insert(ordered(bond.i, bond.j));
        edges.push(Edge {
            u: bond.i,
            v: bond.j,
            kind: EdgeKind::Covalent,
            features: featurize_edge(mol, bond.i, bond.j, Some(bond))?,
        });
    }
    if cutoff > 0.0 {
        let positions: Vec<[f64; 3]> = mol.atoms.iter().map(|a| a.position).collect();
        for (u, v) in pairs_within(&positions, cutoff) {
            if bonded.contains(&(u, v)) {
                continue;
            }
            edges.push(Edge {
                u,
                v,
                kind: EdgeKind::Cutoff,
                features: featurize_edge(mol, u, v, None)?,
            });
        }
    }
    MolecularGraph::from_parts(mol.id.clone(), node_features, edges, mol.labels.clone())
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// All pairs `(i, j)`, `i < j`, with `distance <= cutoff`, sorted.
///
/// Uses a uniform cell grid with cell edge `cutoff`, so only the 27 cells
/// around each point are searched.
pub fn pairs_within(positions: &[[f64; 3]], cutoff: f64) -> Vec<(usize, usize)> {
    if positions.is_empty() || cutoff <= 0.0 {
        return Vec::new();
    }
    let mut origin = positions[0];
    for p in positions {
        for k in 0..3 {
            origin[k] = origin[k].min(p[k]);
        }
    }
    let cell_of = |p: &[f64; 3]| -> [i64; 3] {
        let mut c = [0i64; 3];
        for k in 0..3 {
            c[k] = ((p[k] - origin[k]) / cutoff).floor() as i64;
        }
        c
    };
    let mut grid: HashMap<[i64; 3], Vec<usize>> = HashMap::new();
    for (i, p) in positions.iter().enumerate() {
        grid.entry(cell_of(p)).or_default().push(i);
    }
    let mut pairs = Vec::new();
    for (i, p) in positions.iter().enumerate() {
        let c = cell_of(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(members) = grid.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) else {
                        continue;
                    };
                    for &j in members {
                        if j > i && distance(p, &positions[j]) <= cutoff {
                            pairs.push((i, j));
                        }
                    }
                }
            }
        }
    }
    pairs.sort_unstable();
    pairs
}

/// Featurized-graph dump, one JSON object per line:
///
/// ```text
/// {"id": str, "n_atoms": int,
///  "node_features": [[92 floats], ...],
///  "edges": [{"u": int, "v": int, "kind": "covalent|cutoff", "features": [21 floats]}],
///  "labels": [0 | 1 | null, ...]}
/// ```
#[derive(Serialize, Deserialize)]
struct GraphRecord {
    id: String,
    n_atoms: usize,
    node_features: Vec<Vec<f64>>,
    edges: Vec<Edge>,
    #[serde(default)]
    labels: Vec<Option<u8>>,
}

pub fn graph_to_json(g: &MolecularGraph) -> String {
    let record = GraphRecord {
        id: g.id.clone(),
        n_atoms: g.n_nodes(),
        node_features: g.node_features.outer_iter().map(|r| r.to_vec()).collect(),
        edges: g.edges.clone(),
        labels: labels_to_ints(&g.labels),
    };
    serde_json::to_string(&record).expect("graph serializes")
}

pub fn parse_graph_json(bytes: &[u8]) -> Result<MolecularGraph> {
    let r: GraphRecord = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    if r.node_features.len() != r.n_atoms || r.node_features.iter().any(|row| row.len() != NODE_DIM) {
        return Err(Error::parse(
            format!("graph {:?}", r.id),
            format!("node_features must be [{}][{NODE_DIM}]", r.n_atoms),
        ));
    }
    let flat: Vec<f64> = r.node_features.into_iter().flatten().collect();
    let nodes = Array2::from_shape_vec((r.n_atoms, NODE_DIM), flat).expect("checked shape");
    let labels = labels_from_ints(&r.id, r.labels)?;
    MolecularGraph::from_parts(r.id, nodes, r.edges, labels).map_err(|e| Error::parse("featurized graph", e.to_string()))
}

/// Parses a featurized-graph JSON-lines stream.
pub fn parse_graph_jsonl(text: &str) -> Result<Vec<MolecularGraph>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            parse_graph_json(l.as_bytes()).map_err(|e| Error::parse(format!("line {}", n + 1), e.to_string()))
        })
        .collect()
}
