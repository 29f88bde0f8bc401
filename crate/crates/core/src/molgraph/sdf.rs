//! Reader for the V2000 connection-table subset of MDL SD files.
//!
//! Per record: three header lines (the first is used as the molecule id),
//! the counts line, the atom block (x, y, z, symbol, charge code), the bond
//! block (i, j, type, stereo) and the property block up to `M  END`. Of the
//! properties only `M  CHG` is read. Two data items are recognized after
//! `M  END`: `<partial_charges>` (one value per atom, overriding formal
//! charges) and `<labels>` (`0`, `1` or `null`/`nan`/empty per task).

use super::molecule::{Atom, Bond, BondDirection, BondType, Label, Molecule};
use super::rings::ring_bonds;
use crate::error::{Error, Result};

/// Splits an SD file into records and parses each one.
pub fn parse_sdf_v2000(bytes: &[u8]) -> Result<Vec<Molecule>> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::parse("sdf", format!("input is not UTF-8: {e}")))?;
    let lines: Vec<&str> = text.lines().collect();
    let mut molecules = Vec::new();
    let mut start = 0;
    let mut record = 0;
    while start < lines.len() {
        let end = lines[start..]
            .iter()
            .position(|l| l.trim_end() == "$$$$")
            .map_or(lines.len(), |p| start + p);
        let block = &lines[start..end];
        if block.iter().any(|l| !l.trim().is_empty()) {
            record += 1;
            molecules.push(parse_record(block, record, start + 1)?);
        }
        start = end + 1;
    }
    Ok(molecules)
}

fn column(line: &str, from: usize, to: usize) -> &str {
    let to = to.min(line.len());
    if from >= to {
        return "";
    }
    line.get(from..to).unwrap_or("").trim()
}

struct RecordCtx {
    record: usize,
    first_line: usize,
}

impl RecordCtx {
    fn err(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::parse(format!("record {} (line {})", self.record, self.first_line + offset), message)
    }
}

fn parse_counts(line: &str) -> Option<(usize, usize)> {
    let fixed = (column(line, 0, 3).parse().ok(), column(line, 3, 6).parse().ok());
    if let (Some(a), Some(b)) = fixed {
        return Some((a, b));
    }
    let mut it = line.split_whitespace();
    Some((it.next()?.parse().ok()?, it.next()?.parse().ok()?))
}

struct AtomLine {
    position: [f64; 3],
    symbol: String,
    charge_code: i32,
}

fn parse_atom_line(line: &str) -> Option<AtomLine> {
    let fixed = || -> Option<AtomLine> {
        let position = [
            column(line, 0, 10).parse().ok()?,
            column(line, 10, 20).parse().ok()?,
            column(line, 20, 30).parse().ok()?,
        ];
        let symbol = column(line, 31, 34);
        if symbol.is_empty() {
            return None;
        }
        let charge_code = column(line, 36, 39).parse().unwrap_or(0);
        Some(AtomLine {
            position,
            symbol: symbol.to_string(),
            charge_code,
        })
    };
    fixed().or_else(|| {
        let t: Vec<&str> = line.split_whitespace().collect();
        if t.len() < 4 {
            return None;
        }
        Some(AtomLine {
            position: [t[0].parse().ok()?, t[1].parse().ok()?, t[2].parse().ok()?],
            symbol: t[3].to_string(),
            charge_code: t.get(5).and_then(|c| c.parse().ok()).unwrap_or(0),
        })
    })
}

fn formal_charge(code: i32) -> f64 {
    match code {
        1 => 3.0,
        2 => 2.0,
        3 => 1.0,
        5 => -1.0,
        6 => -2.0,
        7 => -3.0,
        _ => 0.0,
    }
}

fn parse_bond_line(line: &str) -> Option<(usize, usize, i32, i32)> {
    let fixed = || -> Option<(usize, usize, i32, i32)> {
        Some((
            column(line, 0, 3).parse().ok()?,
            column(line, 3, 6).parse().ok()?,
            column(line, 6, 9).parse().ok()?,
            column(line, 9, 12).parse().unwrap_or(0),
        ))
    };
    fixed().or_else(|| {
        let t: Vec<&str> = line.split_whitespace().collect();
        Some((
            t.first()?.parse().ok()?,
            t.get(1)?.parse().ok()?,
            t.get(2)?.parse().ok()?,
            t.get(3).and_then(|s| s.parse().ok()).unwrap_or(0),
        ))
    })
}

fn bond_direction(bond_type: BondType, stereo: i32) -> BondDirection {
    match (bond_type, stereo) {
        (BondType::Single, 1) => BondDirection::BeginWedge,
        (BondType::Single, 6) => BondDirection::BeginDash,
        (BondType::Single, 4) => BondDirection::Unknown,
        (BondType::Double, 3) => BondDirection::EitherDouble,
        _ => BondDirection::None,
    }
}

fn parse_record(lines: &[&str], record: usize, first_line: usize) -> Result<Molecule> {
    let ctx = RecordCtx { record, first_line };
    if lines.len() < 4 {
        return Err(ctx.err(0, "truncated header: expected three header lines and a counts line"));
    }
    let counts = lines[3];
    if counts.contains("V3000") {
        return Err(ctx.err(3, "V3000 connection tables are not supported"));
    }
    let (n_atoms, n_bonds) = parse_counts(counts).ok_or_else(|| ctx.err(3, format!("malformed counts line {counts:?}")))?;
    if lines.len() < 4 + n_atoms + n_bonds {
        return Err(ctx.err(
            lines.len(),
            format!("truncated block: counts line announces {n_atoms} atoms and {n_bonds} bonds"),
        ));
    }

    let mut atoms = Vec::with_capacity(n_atoms);
    for a in 0..n_atoms {
        let off = 4 + a;
        let line = parse_atom_line(lines[off]).ok_or_else(|| ctx.err(off, format!("malformed atom line {:?}", lines[off])))?;
        let atom = Atom::new(&line.symbol, line.position, formal_charge(line.charge_code))
            .map_err(|_| ctx.err(off, format!("unknown element symbol {:?}", line.symbol)))?;
        atoms.push(atom);
    }

    let mut raw_bonds = Vec::with_capacity(n_bonds);
    for b in 0..n_bonds {
        let off = 4 + n_atoms + b;
        let (i, j, t, stereo) =
            parse_bond_line(lines[off]).ok_or_else(|| ctx.err(off, format!("malformed bond line {:?}", lines[off])))?;
        if i == 0 || j == 0 || i > n_atoms || j > n_atoms || i == j {
            return Err(ctx.err(off, format!("bond {} joins invalid atoms {i} and {j}", b + 1)));
        }
        let bond_type = match t {
            1 => BondType::Single,
            2 => BondType::Double,
            3 => BondType::Triple,
            4 => BondType::Aromatic,
            other => return Err(ctx.err(off, format!("unsupported bond type {other}"))),
        };
        raw_bonds.push((i - 1, j - 1, bond_type, bond_direction(bond_type, stereo)));
    }

    let mut rest = 4 + n_atoms + n_bonds;
    let mut chg_seen = false;
    while rest < lines.len() {
        let line = lines[rest];
        rest += 1;
        if line.starts_with("M  END") {
            break;
        }
        if let Some(body) = line.strip_prefix("M  CHG") {
            if !chg_seen {
                // M  CHG supersedes atom-block charges
                atoms.iter_mut().for_each(|a| a.partial_charge = 0.0);
                chg_seen = true;
            }
            let t: Vec<&str> = body.split_whitespace().collect();
            let count: usize = t.first().and_then(|c| c.parse().ok()).ok_or_else(|| ctx.err(rest - 1, "malformed M  CHG line"))?;
            for k in 0..count {
                let (idx, val) = t
                    .get(1 + 2 * k)
                    .zip(t.get(2 + 2 * k))
                    .and_then(|(a, v)| Some((a.parse::<usize>().ok()?, v.parse::<f64>().ok()?)))
                    .ok_or_else(|| ctx.err(rest - 1, "malformed M  CHG entry"))?;
                let atom = atoms
                    .get_mut(idx.wrapping_sub(1))
                    .ok_or_else(|| ctx.err(rest - 1, format!("M  CHG references atom {idx}")))?;
                atom.partial_charge = val;
            }
        }
    }

    let mut labels: Vec<Label> = Vec::new();
    while rest < lines.len() {
        let header = lines[rest].trim();
        rest += 1;
        let Some(name) = header.strip_prefix('>').and_then(|h| {
            let s = h.find('<')?;
            let e = h[s..].find('>')?;
            Some(h[s + 1..s + e].to_string())
        }) else {
            continue;
        };
        let value_start = rest;
        while rest < lines.len() && !lines[rest].trim().is_empty() {
            rest += 1;
        }
        let values: Vec<&str> = lines[value_start..rest].iter().flat_map(|l| l.split_whitespace()).collect();
        match name.to_ascii_lowercase().as_str() {
            "partial_charges" => {
                if values.len() != atoms.len() {
                    return Err(ctx.err(
                        value_start,
                        format!("partial_charges has {} values for {} atoms", values.len(), atoms.len()),
                    ));
                }
                for (atom, v) in atoms.iter_mut().zip(&values) {
                    atom.partial_charge = v
                        .parse()
                        .map_err(|_| ctx.err(value_start, format!("bad partial charge {v:?}")))?;
                }
            }
            "labels" => {
                labels = values
                    .iter()
                    .map(|v| match v.to_ascii_lowercase().as_str() {
                        "0" => Ok(Some(false)),
                        "1" => Ok(Some(true)),
                        "null" | "nan" | "na" | "-" => Ok(None),
                        other => Err(ctx.err(value_start, format!("bad label {other:?}"))),
                    })
                    .collect::<Result<_>>()?;
            }
            _ => {}
        }
    }

    let pairs: Vec<(usize, usize)> = raw_bonds.iter().map(|b| (b.0, b.1)).collect();
    let rings = ring_bonds(atoms.len(), &pairs);
    let bonds = raw_bonds
        .into_iter()
        .zip(rings)
        .map(|((i, j, bond_type, direction), in_ring)| Bond {
            i,
            j,
            bond_type,
            direction,
            in_ring,
        })
        .collect();
    let name = lines[0].trim();
    let mol = Molecule {
        id: if name.is_empty() { format!("record{record}") } else { name.to_string() },
        atoms,
        bonds,
        labels,
    };
    mol.validate().map_err(|e| ctx.err(0, e.to_string()))?;
    Ok(mol)
}
