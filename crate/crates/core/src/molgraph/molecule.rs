use serde::{Deserialize, Serialize};

use super::elements;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BondType {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondType {
    pub const ALL: [BondType; 4] = [BondType::Single, BondType::Double, BondType::Triple, BondType::Aromatic];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Bond stereo annotation. The first three names follow common toolkit
/// usage; the remaining four are this crate's naming.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondDirection {
    #[default]
    None,
    BeginWedge,
    BeginDash,
    EndDownRight,
    EndUpRight,
    EitherDouble,
    Unknown,
}

impl BondDirection {
    pub const ALL: [BondDirection; 7] = [
        BondDirection::None,
        BondDirection::BeginWedge,
        BondDirection::BeginDash,
        BondDirection::EndDownRight,
        BondDirection::EndUpRight,
        BondDirection::EitherDouble,
        BondDirection::Unknown,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub element: String,
    pub atomic_number: u8,
    /// Cartesian position in Å.
    pub position: [f64; 3],
    pub partial_charge: f64,
}

impl Atom {
    pub fn new(element: &str, position: [f64; 3], partial_charge: f64) -> Result<Self> {
        let atomic_number = elements::atomic_number(element)
            .ok_or_else(|| Error::parse("atom", format!("unknown element symbol {element:?}")))?;
        Ok(Self {
            element: elements::symbol(atomic_number).expect("valid number").to_string(),
            atomic_number,
            position,
            partial_charge,
        })
    }

    pub fn distance(&self, other: &Atom) -> f64 {
        distance(&self.position, &other.position)
    }
}

pub fn distance(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub bond_type: BondType,
    pub direction: BondDirection,
    pub in_ring: bool,
}

/// Per-task binary label; `None` marks a missing measurement.
pub type Label = Option<bool>;

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub id: String,
    pub atoms: Vec<Atom>,
    pub bonds: Vec<Bond>,
    pub labels: Vec<Label>,
}

impl Molecule {
    /// Checks the structural invariants: at least one atom, finite
    /// positions and charges, bond indices in range, no self-bonds.
    pub fn validate(&self) -> Result<()> {
        let ctx = || format!("molecule {:?}", self.id);
        if self.atoms.is_empty() {
            return Err(Error::parse(ctx(), "molecule has no atoms"));
        }
        for (a, atom) in self.atoms.iter().enumerate() {
            if !atom.position.iter().all(|v| v.is_finite()) || !atom.partial_charge.is_finite() {
                return Err(Error::parse(ctx(), format!("atom {a}: non-finite position or charge")));
            }
        }
        let n = self.atoms.len();
        for (b, bond) in self.bonds.iter().enumerate() {
            for (name, idx) in [("i", bond.i), ("j", bond.j)] {
                if idx >= n {
                    return Err(Error::parse(
                        ctx(),
                        format!("bond {b}: index {name}={idx} out of range for {n} atoms"),
                    ));
                }
            }
            if bond.i == bond.j {
                return Err(Error::parse(ctx(), format!("bond {b}: self-bond on atom {}", bond.i)));
            }
        }
        Ok(())
    }
}

// JSON schema

#[derive(Serialize, Deserialize)]
struct AtomRecord {
    element: String,
    xyz: [f64; 3],
    #[serde(default)]
    charge: f64,
}

#[derive(Serialize, Deserialize)]
struct BondRecord {
    i: usize,
    j: usize,
    #[serde(rename = "type")]
    bond_type: BondType,
    #[serde(default)]
    direction: BondDirection,
    #[serde(default)]
    in_ring: bool,
}

#[derive(Serialize, Deserialize)]
struct MoleculeRecord {
    id: String,
    atoms: Vec<AtomRecord>,
    #[serde(default)]
    bonds: Vec<BondRecord>,
    #[serde(default)]
    labels: Vec<Option<u8>>,
}

pub(crate) fn labels_from_ints(id: &str, raw: Vec<Option<u8>>) -> Result<Vec<Label>> {
    raw.into_iter()
        .enumerate()
        .map(|(t, l)| match l {
            None => Ok(None),
            Some(0) => Ok(Some(false)),
            Some(1) => Ok(Some(true)),
            Some(v) => Err(Error::parse(
                format!("molecule {id:?}"),
                format!("labels[{t}] = {v}, expected 0, 1 or null"),
            )),
        })
        .collect()
}

pub(crate) fn labels_to_ints(labels: &[Label]) -> Vec<Option<u8>> {
    labels.iter().map(|l| l.map(u8::from)).collect()
}

/// Parses one molecule in the canonical JSON format.
///
/// ```text
/// {"id": str,
///  "atoms": [{"element": str, "xyz": [f, f, f], "charge": f}],
///  "bonds": [{"i": int, "j": int, "type": "single|double|triple|aromatic",
///             "direction": str, "in_ring": bool}],
///  "labels": [0 | 1 | null, ...]}
/// ```
///
/// `charge`, `bonds`, `labels`, `direction` and `in_ring` are optional.
/// Unknown fields are ignored.
pub fn parse_molecule_json(bytes: &[u8]) -> Result<Molecule> {
    let record: MoleculeRecord = serde_json::from_slice(bytes)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    let id = record.id;
    let atoms = record
        .atoms
        .into_iter()
        .enumerate()
        .map(|(a, r)| {
            Atom::new(&r.element, r.xyz, r.charge).map_err(|_| {
                Error::parse(format!("molecule {id:?} atom {a}"), format!("unknown element symbol {:?}", r.element))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let bonds = record
        .bonds
        .into_iter()
        .map(|b| Bond {
            i: b.i,
            j: b.j,
            bond_type: b.bond_type,
            direction: b.direction,
            in_ring: b.in_ring,
        })
        .collect();
    let labels = labels_from_ints(&id, record.labels)?;
    let mol = Molecule { id, atoms, bonds, labels };
    mol.validate()?;
    Ok(mol)
}

/// Parses a JSON-lines stream, one molecule per non-blank line. Errors carry
/// the 1-based line number.
pub fn parse_molecule_jsonl(text: &str) -> Result<Vec<Molecule>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, line)| {
            parse_molecule_json(line.as_bytes()).map_err(|e| match e {
                Error::Parse { context, message } => Error::parse(format!("line {}: {context}", n + 1), message),
                other => other,
            })
        })
        .collect()
}

pub fn molecule_to_json(mol: &Molecule) -> String {
    let record = MoleculeRecord {
        id: mol.id.clone(),
        atoms: mol
            .atoms
            .iter()
            .map(|a| AtomRecord {
                element: a.element.clone(),
                xyz: a.position,
                charge: a.partial_charge,
            })
            .collect(),
        bonds: mol
            .bonds
            .iter()
            .map(|b| BondRecord {
                i: b.i,
                j: b.j,
                bond_type: b.bond_type,
                direction: b.direction,
                in_ring: b.in_ring,
            })
            .collect(),
        labels: labels_to_ints(&mol.labels),
    };
    serde_json::to_string(&record).expect("molecule serializes")
}
