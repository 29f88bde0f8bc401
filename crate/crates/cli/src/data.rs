use std::path::{Path, PathBuf};

use kagnn::molgraph::{build_graph, parse_graph_json, parse_molecule_json, parse_sdf_v2000, MolecularGraph, Molecule};

use crate::CliError;

/// Resolves `path` against `data_dir` when it does not exist as given.
pub fn resolve(path: &Path, data_dir: Option<&Path>) -> PathBuf {
    match data_dir {
        Some(dir) if path.is_relative() && !path.exists() => dir.join(path),
        _ => path.to_path_buf(),
    }
}

pub fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Sdf,
}

impl Format {
    pub fn infer(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("sdf") || e.eq_ignore_ascii_case("mol") => Format::Sdf,
            _ => Format::Json,
        }
    }
}

/// `record N (line L)` inside an SDF parse error becomes `path:L`.
fn sdf_line(message: &str) -> Option<usize> {
    let start = message.find("(line ")? + "(line ".len();
    let digits: String = message[start..].chars().take_while(char::is_ascii_digit).collect();
    digits.parse().ok()
}

pub fn load_molecules(path: &Path, format: Format) -> Result<Vec<Molecule>, CliError> {
    let bytes = read(path)?;
    match format {
        Format::Sdf => parse_sdf_v2000(&bytes).map_err(|e| {
            let msg = e.to_string();
            match sdf_line(&msg) {
                Some(line) => CliError::Data(format!("{}:{line}: {msg}", path.display())),
                None => CliError::Data(format!("{}: {msg}", path.display())),
            }
        }),
        Format::Json => {
            let text = String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            text.lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
                .map(|(n, l)| {
                    parse_molecule_json(l.as_bytes())
                        .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), n + 1)))
                })
                .collect()
        }
    }
}

fn featurize_all(mols: &[Molecule], cutoff: f64, path: &Path) -> Result<Vec<MolecularGraph>, CliError> {
    kagnn::parallel::try_map(mols, |m| build_graph(m, cutoff))
        .map_err(|e| CliError::from_core(e).context(&path.display().to_string()))
}

pub fn featurize(path: &Path, format: Format, cutoff: f64) -> Result<Vec<MolecularGraph>, CliError> {
    let mols = load_molecules(path, format)?;
    featurize_all(&mols, cutoff, path)
}

/// What a dataset file held.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Molecules,
    Graphs,
}

/// Loads a training dataset: SDF or molecule JSON-lines are featurized at
/// `cutoff`; featurized-graph JSON-lines (lines with `node_features`) are
/// used as they are.
pub fn load_dataset(path: &Path, cutoff: f64) -> Result<(Vec<MolecularGraph>, Source), CliError> {
    let format = Format::infer(path);
    if format == Format::Sdf {
        return Ok((featurize(path, format, cutoff)?, Source::Molecules));
    }
    let bytes = read(path)?;
    let text = String::from_utf8(bytes).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    let first = text.lines().find(|l| !l.trim().is_empty());
    let is_graphs = first.is_some_and(|l| {
        serde_json::from_str::<serde_json::Value>(l).is_ok_and(|v| v.get("node_features").is_some())
    });
    if !is_graphs {
        return Ok((featurize(path, Format::Json, cutoff)?, Source::Molecules));
    }
    let graphs = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| {
            parse_graph_json(l.as_bytes()).map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), n + 1)))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((graphs, Source::Graphs))
}
