//! Molecules, their parsers, and featurized graphs.

pub mod elements;
pub mod featurize;
pub mod graph;
pub mod molecule;
pub mod rings;
pub mod sdf;

pub use featurize::{EDGE_DIM, NODE_DIM};
pub use graph::{
    build_graph, graph_to_json, parse_graph_json, parse_graph_jsonl, Edge, EdgeKind, MolecularGraph, Neighbor, DEFAULT_CUTOFF,
};
pub use molecule::{
    molecule_to_json, parse_molecule_json, parse_molecule_jsonl, Atom, Bond, BondDirection, BondType, Label, Molecule,
};
pub use sdf::parse_sdf_v2000;
