//! Node and edge feature vectors.
//!
//! Node vector (92): three one-hot blocks
//!
//! | slots  | content                                                     |
//! |--------|-------------------------------------------------------------|
//! | 0..64  | atomic number Z in 1..=64 (Z > 64 clips to the last bin)    |
//! | 64..78 | covalent radius, 14 uniform bins over [0.25, 2.10] Å        |
//! | 78..92 | Pauling electronegativity, 14 uniform bins over [0.7, 4.0]  |
//!
//! Edge vector (21):
//!
//! | slots  | content                                   | covalent | cutoff |
//! |--------|-------------------------------------------|----------|--------|
//! | 0..7   | direction one-hot                         | yes      | 0      |
//! | 7..11  | bond type one-hot                         | yes      | 0      |
//! | 11..13 | (d, d²)                                   | yes      | yes    |
//! | 13..15 | in-ring one-hot (not in ring, in ring)    | yes      | 0      |
//! | 15..18 | (q_u, q_v, q_u·q_v)                       | yes      | yes    |
//! | 18..21 | (1/d, 1/d⁶, 1/d¹²)                        | yes      | yes    |

use super::elements;
use super::molecule::{Atom, Bond, Molecule};
use crate::error::{Error, Result};

pub const NODE_DIM: usize = 92;
pub const EDGE_DIM: usize = 21;

pub const Z_BINS: usize = 64;
pub const RADIUS_BINS: usize = 14;
pub const RADIUS_RANGE: (f64, f64) = (0.25, 2.10);
pub const EN_BINS: usize = 14;
pub const EN_RANGE: (f64, f64) = (0.7, 4.0);

pub const DIRECTION_SLOT: usize = 0;
pub const BOND_TYPE_SLOT: usize = 7;
pub const LENGTH_SLOT: usize = 11;
pub const RING_SLOT: usize = 13;
pub const CHARGE_SLOT: usize = 15;
pub const INVERSE_DISTANCE_SLOT: usize = 18;

/// Uniform bin index of `value` over `[lo, hi]`, clamped to the end bins.
pub fn uniform_bin(value: f64, (lo, hi): (f64, f64), bins: usize) -> usize {
    let t = (value - lo) / (hi - lo) * bins as f64;
    if t <= 0.0 {
        0
    } else {
        (t.floor() as usize).min(bins - 1)
    }
}

pub fn featurize_node(atom: &Atom) -> Result<[f64; NODE_DIM]> {
    let props = elements::properties(atom.atomic_number)
        .ok_or_else(|| Error::Featurize(format!("no featurization data for element {}", atom.element)))?;
    let mut f = [0.0; NODE_DIM];
    let z_bin = (atom.atomic_number as usize).clamp(1, Z_BINS) - 1;
    f[z_bin] = 1.0;
    f[Z_BINS + uniform_bin(props.covalent_radius, RADIUS_RANGE, RADIUS_BINS)] = 1.0;
    f[Z_BINS + RADIUS_BINS + uniform_bin(props.electronegativity, EN_RANGE, EN_BINS)] = 1.0;
    Ok(f)
}

/// Edge features for the pair `(u, v)`. `bond` is the covalent bond joining
/// them, or `None` for a cutoff edge.
pub fn featurize_edge(mol: &Molecule, u: usize, v: usize, bond: Option<&Bond>) -> Result<[f64; EDGE_DIM]> {
    let n = mol.atoms.len();
    if u >= n || v >= n {
        return Err(Error::Featurize(format!("edge ({u}, {v}) out of range for {n} atoms")));
    }
    let (a, b) = (&mol.atoms[u], &mol.atoms[v]);
    let d = a.distance(b);
    if d == 0.0 {
        return Err(Error::Featurize(format!(
            "atoms {u} and {v} of {:?} are coincident",
            mol.id
        )));
    }
    let mut f = [0.0; EDGE_DIM];
    if let Some(bond) = bond {
        f[DIRECTION_SLOT + bond.direction.index()] = 1.0;
        f[BOND_TYPE_SLOT + bond.bond_type.index()] = 1.0;
        f[RING_SLOT + usize::from(bond.in_ring)] = 1.0;
    }
    f[LENGTH_SLOT] = d;
    f[LENGTH_SLOT + 1] = d * d;
    let (qu, qv) = (a.partial_charge, b.partial_charge);
    f[CHARGE_SLOT] = qu;
    f[CHARGE_SLOT + 1] = qv;
    f[CHARGE_SLOT + 2] = qu * qv;
    let inv = 1.0 / d;
    let inv6 = inv.powi(6);
    f[INVERSE_DISTANCE_SLOT] = inv;
    f[INVERSE_DISTANCE_SLOT + 1] = inv6;
    f[INVERSE_DISTANCE_SLOT + 2] = inv6 * inv6;
    Ok(f)
}

/// Features of the same edge seen from the other endpoint (charges swapped).
pub fn reversed(features: &[f64; EDGE_DIM]) -> [f64; EDGE_DIM] {
    let mut r = *features;
    r.swap(CHARGE_SLOT, CHARGE_SLOT + 1);
    r
}
