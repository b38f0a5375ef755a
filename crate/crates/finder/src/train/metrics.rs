//! Evaluation metrics and the log-log power-law fit for sample-efficiency
//! sweeps.

use crate::error::{Error, Result};

/// Per-sample row of the parity-plot table.
#[derive(Debug, Clone)]
pub struct SampleError {
    pub id: String,
    pub abs_error: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone)]
pub struct Metrics {
    pub mae: f64,
    pub rmse: f64,
    pub r2: f64,
    /// Mean absolute deviation of the test targets over the model MAE;
    /// a scale-free skill score where 1 means no skill.
    pub mad_mae: f64,
    pub per_sample: Vec<SampleError>,
}

/// Metrics in original units over flattened outputs (spectra contribute all
/// their grid points). `uncertainties` are per-sample aleatoric scales.
pub fn compute_metrics(
    ids: &[String],
    truth: &[Vec<f64>],
    predictions: &[Vec<f64>],
    uncertainties: &[f64],
) -> Result<Metrics> {
    if truth.is_empty() || truth.len() != predictions.len() {
        return Err(Error::Config(format!(
            "metrics need matching non-empty truth/prediction lists, got {} and {}",
            truth.len(),
            predictions.len()
        )));
    }
    let mut n = 0usize;
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut y_sum = 0.0;
    for (t, p) in truth.iter().zip(predictions) {
        if t.len() != p.len() {
            return Err(Error::Config("ragged prediction width".into()));
        }
        for (yt, yp) in t.iter().zip(p) {
            n += 1;
            let d = yt - yp;
            abs_sum += d.abs();
            sq_sum += d * d;
            y_sum += yt;
        }
    }
    let mae = abs_sum / n as f64;
    let rmse = (sq_sum / n as f64).sqrt();
    let y_mean = y_sum / n as f64;
    let mut ss_tot = 0.0;
    let mut mad_sum = 0.0;
    for t in truth {
        for yt in t {
            ss_tot += (yt - y_mean) * (yt - y_mean);
            mad_sum += (yt - y_mean).abs();
        }
    }
    let r2 = if ss_tot > 0.0 { 1.0 - sq_sum / ss_tot } else { 0.0 };
    let mad_mae = if mae > 0.0 {
        (mad_sum / n as f64) / mae
    } else {
        f64::INFINITY
    };
    let per_sample = truth
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (t, p))| {
            let err: f64 =
                t.iter().zip(p).map(|(a, b)| (a - b).abs()).sum::<f64>() / t.len() as f64;
            SampleError {
                id: ids.get(i).cloned().unwrap_or_else(|| i.to_string()),
                abs_error: err,
                uncertainty: uncertainties.get(i).copied().unwrap_or(f64::NAN),
            }
        })
        .collect();
    Ok(Metrics {
        mae,
        rmse,
        r2,
        mad_mae,
        per_sample,
    })
}

/// Least-squares fit of `ln(mae) = intercept + slope * ln(size)`, the
/// power-law view of error versus training-set size.
pub fn fit_power_law(sizes: &[f64], maes: &[f64]) -> Result<(f64, f64)> {
    if sizes.len() != maes.len() || sizes.len() < 2 {
        return Err(Error::Config(
            "power-law fit needs at least two (size, mae) points".into(),
        ));
    }
    if sizes.iter().chain(maes).any(|&v| v <= 0.0) {
        return Err(Error::Config("power-law fit needs positive values".into()));
    }
    let n = sizes.len() as f64;
    let xs: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = maes.iter().map(|v| v.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - x_mean) * (y - y_mean);
        den += (x - x_mean) * (x - x_mean);
    }
    if den == 0.0 {
        return Err(Error::Config("power-law fit needs distinct sizes".into()));
    }
    let slope = num / den;
    let intercept = y_mean - slope * x_mean;
    Ok((slope, intercept))
}
