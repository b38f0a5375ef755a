//! Deterministic dataset splitting.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let r = SplitRatios { train, val, test };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        let sum = self.train + self.val + self.test;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios sum to {sum}, not 1")));
        }
        if self.train <= 0.0 || self.val <= 0.0 || self.test <= 0.0 {
            return Err(Error::Config("all split ratios must be positive".into()));
        }
        Ok(())
    }
}

/// Named ratio presets: the standard 70/15/15 split, the 60/20/20 split used
/// when benchmarking structure-based graph models, and the 72/8/20 split
/// used by composition-only comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPreset {
    Standard,
    MatbenchGnn,
    MatbenchComposition,
}

impl SplitPreset {
    pub fn ratios(self) -> SplitRatios {
        match self {
            SplitPreset::Standard => SplitRatios {
                train: 0.70,
                val: 0.15,
                test: 0.15,
            },
            SplitPreset::MatbenchGnn => SplitRatios {
                train: 0.60,
                val: 0.20,
                test: 0.20,
            },
            SplitPreset::MatbenchComposition => SplitRatios {
                train: 0.72,
                val: 0.08,
                test: 0.20,
            },
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        match text {
            "standard" => Ok(SplitPreset::Standard),
            "matbench-gnn" => Ok(SplitPreset::MatbenchGnn),
            "matbench-composition" => Ok(SplitPreset::MatbenchComposition),
            other => Err(Error::Config(format!("unknown split preset '{other}'"))),
        }
    }
}

/// Disjoint, exhaustive index split: a seeded shuffle followed by
/// floor-sized train and validation parts, the remainder becoming test.
pub fn split_indices(
    n: usize,
    ratios: &SplitRatios,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    ratios.validate()?;
    if n == 0 {
        return Err(Error::Config("cannot split an empty dataset".into()));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let n_train = (n as f64 * ratios.train).floor() as usize;
    let n_val = (n as f64 * ratios.val).floor() as usize;
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(Error::Config(format!(
            "split of {n} samples leaves an empty part"
        )));
    }
    let train = indices[..n_train].to_vec();
    let val = indices[n_train..n_train + n_val].to_vec();
    let test = indices[n_train + n_val..].to_vec();
    Ok((train, val, test))
}

/// Plain k-fold partition: a seeded shuffle dealt into k contiguous folds,
/// returned as (train, test) index pairs where fold i is the held-out test
/// part. Folds are disjoint and exhaustive; sizes differ by at most one.
pub fn k_fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || n < k {
        return Err(Error::Config(format!(
            "k-fold needs 2 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 0..k {
        let len = base + usize::from(i < extra);
        folds.push(indices[start..start + len].to_vec());
        start += len;
    }
    Ok((0..k)
        .map(|i| {
            let test = folds[i].clone();
            let train = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            (train, test)
        })
        .collect())
}
