//! Z-score target normalization fitted on training data only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training-set mean and standard deviation. Spectra share a single global
/// pair across all grid points, preserving relative resonance amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: f64,
    pub std: f64,
}

impl Normalizer {
    pub fn fit(values: impl Iterator<Item = f64>) -> Result<Self> {
        let mut n = 0usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for v in values {
            n += 1;
            sum += v;
            sum_sq += v * v;
        }
        if n == 0 {
            return Err(Error::Config("cannot fit a normalizer on no targets".into()));
        }
        let mean = sum / n as f64;
        let var = (sum_sq / n as f64 - mean * mean).max(0.0);
        let std = var.sqrt();
        if std <= 0.0 {
            return Err(Error::Config(
                "target standard deviation is zero; targets are constant".into(),
            ));
        }
        Ok(Normalizer { mean, std })
    }

    pub fn from_constants(mean: f64, std: f64) -> Result<Self> {
        if std <= 0.0 {
            return Err(Error::Config(format!("normalizer std must be positive, got {std}")));
        }
        Ok(Normalizer { mean, std })
    }

    pub fn normalize(&self, x: f64) -> f64 {
        (x - self.mean) / self.std
    }

    pub fn denormalize(&self, x: f64) -> f64 {
        x * self.std + self.mean
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let n = Normalizer::fit([1.0, 2.0, 3.0, 10.0].into_iter()).unwrap();
        for x in [-7.5, 0.0, 1.0, 123.456] {
            assert!((n.denormalize(n.normalize(x)) - x).abs() < 1e-12);
        }
    }

    #[test]
    fn fitted_stats_are_population_moments() {
        let n = Normalizer::fit([2.0, 4.0, 6.0, 8.0].into_iter()).unwrap();
        assert!((n.mean - 5.0).abs() < 1e-12);
        assert!((n.std - 5.0f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn constant_targets_are_rejected() {
        assert!(Normalizer::fit([3.0, 3.0, 3.0].into_iter()).is_err());
        assert!(Normalizer::fit(std::iter::empty()).is_err());
        assert!(Normalizer::from_constants(0.0, 0.0).is_err());
    }
}
