//! Synthetic node-count parity task.
//!
//! Each molecule is a carbon chain of `n` atoms, `n` drawn uniformly from
//! `min_atoms..=max_atoms`, laid out as a random walk with fixed step
//! `bond_length` whose direction turns by at most `max_turn` radians per
//! step. Consecutive atoms are bonded. The single label is `n` odd.

use rand::Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::molgraph::{build_graph, Atom, Bond, BondDirection, BondType, MolecularGraph, Molecule, DEFAULT_CUTOFF};
use crate::rng::derived_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParityOptions {
    pub min_atoms: usize,
    pub max_atoms: usize,
    pub bond_length: f64,
    pub max_turn: f64,
    pub cutoff: f64,
}

impl Default for ParityOptions {
    fn default() -> Self {
        Self {
            min_atoms: 4,
            max_atoms: 7,
            bond_length: 1.5,
            max_turn: 0.6,
            cutoff: DEFAULT_CUTOFF,
        }
    }
}

fn unit(v: [f64; 3]) -> [f64; 3] {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] / n, v[1] / n, v[2] / n]
}

fn chain<R: Rng + ?Sized>(id: String, n: usize, opts: &ParityOptions, rng: &mut R) -> Result<Molecule> {
    let mut dir: [f64; 3] = UnitSphere.sample(rng);
    let mut pos = [0.0; 3];
    let mut atoms = Vec::with_capacity(n);
    for i in 0..n {
        if i > 0 {
            // perturb the heading, then renormalize
            let kick: [f64; 3] = UnitSphere.sample(rng);
            let s = opts.max_turn * rng.random::<f64>();
            dir = unit([dir[0] + s * kick[0], dir[1] + s * kick[1], dir[2] + s * kick[2]]);
            for (p, d) in pos.iter_mut().zip(dir) {
                *p += opts.bond_length * d;
            }
        }
        atoms.push(Atom::new("C", pos, 0.0)?);
    }
    let bonds = (1..n)
        .map(|j| Bond {
            i: j - 1,
            j,
            bond_type: BondType::Single,
            direction: BondDirection::None,
            in_ring: false,
        })
        .collect();
    Ok(Molecule {
        id,
        atoms,
        bonds,
        labels: vec![Some(n % 2 == 1)],
    })
}

pub fn parity_molecules(count: usize, seed: u64, opts: &ParityOptions) -> Result<Vec<Molecule>> {
    let mut rng = derived_rng(seed, 0x7061_7269_7479);
    (0..count)
        .map(|k| {
            let n = rng.random_range(opts.min_atoms..=opts.max_atoms);
            chain(format!("parity{k}"), n, opts, &mut rng)
        })
        .collect()
}

pub fn parity_dataset(count: usize, seed: u64, opts: &ParityOptions) -> Result<Vec<MolecularGraph>> {
    parity_molecules(count, seed, opts)?
        .iter()
        .map(|m| build_graph(m, opts.cutoff))
        .collect()
}
