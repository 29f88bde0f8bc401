//! Periodic-table lookups and the per-element property table used for
//! node featurization (`data/elements.csv`).

use std::collections::HashMap;
use std::sync::OnceLock;

const SYMBOLS: [&str; 118] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y",
    "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce",
    "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir",
    "Pt", "Au", "Hg", "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm",
    "Bk", "Cf", "Es", "Fm", "Md", "No", "Lr", "Rf", "Db", "Sg", "Bh", "Hs", "Mt", "Ds", "Rg", "Cn", "Nh", "Fl", "Mc",
    "Lv", "Ts", "Og",
];

/// Atomic number for an element symbol. Matching is case-insensitive
/// (`"CL"` and `"cl"` both resolve to chlorine).
pub fn atomic_number(symbol: &str) -> Option<u8> {
    let s = symbol.trim();
    SYMBOLS
        .iter()
        .position(|e| e.eq_ignore_ascii_case(s))
        .map(|p| (p + 1) as u8)
}

pub fn symbol(atomic_number: u8) -> Option<&'static str> {
    SYMBOLS.get((atomic_number as usize).checked_sub(1)?).copied()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementProperties {
    pub atomic_number: u8,
    pub covalent_radius: f64,
    pub electronegativity: f64,
}

static TABLE: OnceLock<HashMap<u8, ElementProperties>> = OnceLock::new();

fn table() -> &'static HashMap<u8, ElementProperties> {
    TABLE.get_or_init(|| {
        include_str!("../../data/elements.csv")
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'))
            .map(|line| {
                let f: Vec<&str> = line.split(',').map(str::trim).collect();
                let z: u8 = f[1].parse().expect("atomic number in element table");
                debug_assert_eq!(symbol(z), Some(f[0]));
                let props = ElementProperties {
                    atomic_number: z,
                    covalent_radius: f[2].parse().expect("radius in element table"),
                    electronegativity: f[3].parse().expect("electronegativity in element table"),
                };
                (z, props)
            })
            .collect()
    })
}

/// Featurization properties, or `None` for elements outside the table
/// (noble gases without a Pauling electronegativity, most f-block metals).
pub fn properties(atomic_number: u8) -> Option<ElementProperties> {
    table().get(&atomic_number).copied()
}
