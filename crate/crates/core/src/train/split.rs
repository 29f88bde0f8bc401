use std::collections::HashSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::derived_rng;

pub const DEFAULT_RATIOS: (f64, f64, f64) = (0.8, 0.1, 0.1);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitProvenance {
    RandomSeeded,
    ExternalFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
    pub provenance: SplitProvenance,
}

#[derive(Deserialize, Serialize)]
struct SplitFile {
    train: Vec<usize>,
    valid: Vec<usize>,
    test: Vec<usize>,
}

/// Seeded shuffle of `0..n`, then `⌊r0·n⌋` train, `⌊r1·n⌋` valid and the rest test.
pub fn random_split(n: usize, ratios: (f64, f64, f64), seed: u64) -> Result<SplitSpec> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("random_split needs n >= 3, got {n}")));
    }
    let (r0, r1, r2) = ratios;
    if [r0, r1, r2].iter().any(|r| !(r.is_finite() && *r >= 0.0)) || (r0 + r1 + r2 - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios {ratios:?} must be non-negative and sum to 1")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derived_rng(seed, 0x73706c6974));
    // the epsilon keeps products like 0.1 * 30 from flooring one short
    let n_train = ((r0 * n as f64) + 1e-9).floor() as usize;
    let n_valid = (((r1 * n as f64) + 1e-9).floor() as usize).min(n - n_train);
    let test = idx.split_off(n_train + n_valid);
    let valid = idx.split_off(n_train);
    Ok(SplitSpec {
        train: idx,
        valid,
        test,
        provenance: SplitProvenance::RandomSeeded,
    })
}

impl SplitSpec {
    /// Checks that the three lists partition `0..n` exactly.
    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = HashSet::with_capacity(n);
        for (name, list) in [("train", &self.train), ("valid", &self.valid), ("test", &self.test)] {
            for &i in list.iter() {
                if i >= n {
                    return Err(Error::InvalidArgument(format!("split {name} index {i} out of range for {n} graphs")));
                }
                if !seen.insert(i) {
                    return Err(Error::InvalidArgument(format!("split index {i} appears more than once")));
                }
            }
        }
        if seen.len() != n {
            return Err(Error::InvalidArgument(format!(
                "split covers {} of {n} graphs; every graph must be assigned",
                seen.len()
            )));
        }
        if self.train.is_empty() {
            return Err(Error::InvalidArgument("split has an empty train list".into()));
        }
        Ok(())
    }

    /// Parses `{"train": [..], "valid": [..], "test": [..]}`.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let f: SplitFile = serde_json::from_slice(bytes)
            .map_err(|e| Error::parse(format!("split file line {} column {}", e.line(), e.column()), e.to_string()))?;
        Ok(Self {
            train: f.train,
            valid: f.valid,
            test: f.test,
            provenance: SplitProvenance::ExternalFile,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&SplitFile {
            train: self.train.clone(),
            valid: self.valid.clone(),
            test: self.test.clone(),
        })
        .expect("split serializes")
    }
}
