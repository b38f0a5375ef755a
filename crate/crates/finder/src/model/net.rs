//! Linear and MLP building blocks registered on a parameter set.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::tensor::{ParamId, ParamSet, Scalar, Tape, Tensor, Var};

/// Glorot-uniform matrix; draws happen in f64 so the same seed produces the
/// same weights at either precision.
fn glorot<T: Scalar>(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor<T> {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data: Vec<T> = (0..rows * cols)
        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::new(vec![rows, cols], data).expect("sized data")
}

/// `x @ w (+ b)` with linear activation.
#[derive(Debug, Clone)]
pub struct Linear {
    w: ParamId,
    b: Option<ParamId>,
}

impl Linear {
    pub fn new<T: Scalar>(
        ps: &mut ParamSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
    ) -> Result<Self> {
        let w = ps.register(format!("{name}.w"), glorot(rng, in_dim, out_dim))?;
        let b = if bias {
            Some(ps.register(format!("{name}.b"), Tensor::zeros(vec![out_dim]))?)
        } else {
            None
        };
        Ok(Linear { w, b })
    }

    pub fn apply<'p, T: Scalar>(
        &self,
        tape: &Tape<'p, T>,
        ps: &'p ParamSet<T>,
        x: Var,
    ) -> Result<Var> {
        let h = tape.matmul(x, tape.leaf(self.w, ps.get(self.w)))?;
        match self.b {
            Some(b) => tape.add(h, tape.leaf(b, ps.get(b))),
            None => Ok(h),
        }
    }
}

/// Dense stack with relu on hidden layers and a linear output layer.
#[derive(Debug, Clone)]
pub struct Mlp {
    layers: Vec<Linear>,
}

impl Mlp {
    pub fn new<T: Scalar>(
        ps: &mut ParamSet<T>,
        rng: &mut ChaCha8Rng,
        name: &str,
        widths: &[usize],
    ) -> Result<Self> {
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for i in 0..widths.len() - 1 {
            layers.push(Linear::new(
                ps,
                rng,
                &format!("{name}.{i}"),
                widths[i],
                widths[i + 1],
                true,
            )?);
        }
        Ok(Mlp { layers })
    }

    pub fn apply<'p, T: Scalar>(
        &self,
        tape: &Tape<'p, T>,
        ps: &'p ParamSet<T>,
        x: Var,
    ) -> Result<Var> {
        let last = self.layers.len() - 1;
        let mut h = x;
        for (i, layer) in self.layers.iter().enumerate() {
            h = layer.apply(tape, ps, h)?;
            if i != last {
                h = tape.relu(h)?;
            }
        }
        Ok(h)
    }
}
