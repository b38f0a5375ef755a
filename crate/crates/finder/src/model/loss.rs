//! Robust L1 loss: Laplace negative log-likelihood with a learned
//! per-output aleatoric scale.

use crate::error::{Error, Result};
use crate::model::OutputVars;
use crate::tensor::{Scalar, Tape, Var};

/// Mean over the batch of `sqrt(2)·|y - mu|·exp(-s) + s`, with spectra
/// additionally averaged over their grid points. Targets are in normalized
/// units. The weight-decay term of the training objective is added
/// analytically by the trainer (see `ParamSet::add_decay_grads`).
pub fn robust_loss<'p, T: Scalar>(
    tape: &Tape<'p, T>,
    outputs: &[OutputVars],
    targets: &[Vec<T>],
) -> Result<Var> {
    if outputs.is_empty() || outputs.len() != targets.len() {
        return Err(Error::InvalidValue(format!(
            "robust_loss needs matching non-empty outputs and targets, got {} and {}",
            outputs.len(),
            targets.len()
        )));
    }
    let sqrt2 = T::from_f64(std::f64::consts::SQRT_2);
    let mut total: Option<Var> = None;
    for (out, target) in outputs.iter().zip(targets) {
        let width = target.len();
        if target.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "robust_loss target".into(),
            });
        }
        let y = tape.constant_from(vec![1, width], target.clone())?;
        let diff = tape.abs(tape.sub(y, out.mean)?)?;
        let inv_scale = tape.exp(tape.neg(out.log_scale)?)?;
        let term = tape.add(
            tape.mul(tape.mul_scalar(diff, sqrt2)?, inv_scale)?,
            out.log_scale,
        )?;
        let sample = tape.mean_axis(term, 1)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, sample)?,
            None => sample,
        });
    }
    let loss = tape.mul_scalar(
        total.expect("non-empty batch"),
        T::from_f64(1.0 / outputs.len() as f64),
    )?;
    let finite = tape.with_data(loss, |_, data| data[0].is_finite());
    if !finite {
        return Err(Error::NonFinite {
            context: "robust_loss value".into(),
        });
    }
    Ok(loss)
}
