//! Recording tape for reverse-mode differentiation.
//!
//! Every primitive appends one node holding the output value and enough
//! metadata to replay its adjoint. `backward` walks the record once in
//! reverse order and returns the gradient of every parameter leaf reachable
//! from the loss. Parameter data is borrowed, never copied, so a forward
//! pass allocates only its intermediates.

use std::cell::RefCell;
use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::param::{GradMap, Param, ParamId};
use crate::tensor::{Scalar, Tensor};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Storage<'p, T> {
    Owned(Vec<T>),
    Borrowed(&'p [T]),
}

impl<T> Storage<'_, T> {
    fn data(&self) -> &[T] {
        match self {
            Storage::Owned(v) => v,
            Storage::Borrowed(s) => s,
        }
    }
}

enum Op<T> {
    /// Constant or gradient-stopped value; never visited by backward.
    Const,
    Leaf(ParamId),
    Matmul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    AddScalar(Var),
    MulScalar(Var, T),
    Exp(Var),
    Relu(Var),
    SumAxis(Var, usize),
    MeanAxis(Var, usize),
    ConcatLast(Vec<Var>),
    GatherRows(Var, Vec<usize>),
    SegmentMean {
        input: Var,
        ids: Vec<usize>,
        counts: Vec<usize>,
    },
    Conv1d {
        input: Var,
        kernel: Var,
    },
    Reshape(Var),
}

struct Node<'p, T: Scalar> {
    shape: Vec<usize>,
    storage: Storage<'p, T>,
    op: Op<T>,
    requires_grad: bool,
}

/// Single-threaded computation record. `'p` is the lifetime of the parameter
/// set the leaves borrow from; independent tapes may run on separate threads.
pub struct Tape<'p, T: Scalar> {
    nodes: RefCell<Vec<Node<'p, T>>>,
    leaves: RefCell<HashMap<ParamId, Var>>,
    grad_enabled: bool,
    strict: bool,
}

impl<'p, T: Scalar> Tape<'p, T> {
    /// Tape that records adjoints for parameter leaves.
    pub fn new() -> Self {
        Tape {
            nodes: RefCell::new(Vec::new()),
            leaves: RefCell::new(HashMap::new()),
            grad_enabled: true,
            strict: false,
        }
    }

    /// Tape for evaluation only: leaves are treated as constants and
    /// `backward` is unavailable.
    pub fn inference() -> Self {
        Tape {
            grad_enabled: false,
            ..Tape::new()
        }
    }

    /// Fail any primitive whose input contains a non-finite value.
    pub fn with_strict_checks(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }

    pub fn op_count(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn shape_of(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].shape.clone()
    }

    /// Copy a recorded value out of the tape.
    pub fn value(&self, v: Var) -> Tensor<T> {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        Tensor::new(n.shape.clone(), n.storage.data().to_vec()).expect("tape node is consistent")
    }

    /// Read a recorded value without copying.
    pub fn with_data<R>(&self, v: Var, f: impl FnOnce(&[usize], &[T]) -> R) -> R {
        let nodes = self.nodes.borrow();
        let n = &nodes[v.0];
        f(&n.shape, n.storage.data())
    }

    fn push(&self, shape: Vec<usize>, storage: Storage<'p, T>, op: Op<T>, requires_grad: bool) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        let keep_grad = self.grad_enabled && requires_grad;
        nodes.push(Node {
            shape,
            storage,
            op: if keep_grad { op } else { Op::Const },
            requires_grad: keep_grad,
        });
        Var(nodes.len() - 1)
    }

    /// Record a constant (no gradient flows into it).
    pub fn constant(&self, t: &Tensor<T>) -> Var {
        self.push(
            t.shape().to_vec(),
            Storage::Owned(t.data().to_vec()),
            Op::Const,
            false,
        )
    }

    pub fn constant_from(&self, shape: Vec<usize>, data: Vec<T>) -> Result<Var> {
        let t = Tensor::new(shape, data)?;
        Ok(self.constant(&t))
    }

    /// Lift a parameter onto the tape, borrowing its data. Lifting the same
    /// parameter twice returns the original leaf.
    pub fn leaf(&self, id: ParamId, param: &'p Param<T>) -> Var {
        if let Some(&v) = self.leaves.borrow().get(&id) {
            return v;
        }
        let t = param.tensor();
        let v = self.push(
            t.shape().to_vec(),
            Storage::Borrowed(t.data()),
            Op::Leaf(id),
            t.requires_grad(),
        );
        self.leaves.borrow_mut().insert(id, v);
        v
    }

    fn check_finite(&self, op: &'static str, vars: &[Var]) -> Result<()> {
        if !self.strict {
            return Ok(());
        }
        let nodes = self.nodes.borrow();
        for v in vars {
            if nodes[v.0].storage.data().iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("input of {op}"),
                });
            }
        }
        Ok(())
    }

    fn requires(&self, vars: &[Var]) -> bool {
        let nodes = self.nodes.borrow();
        vars.iter().any(|v| nodes[v.0].requires_grad)
    }

    // ---- primitives -------------------------------------------------------

    /// 2-D matrix product `[m,k] @ [k,n] -> [m,n]`.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        self.check_finite("matmul", &[a, b])?;
        let (out_shape, out) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            if na.shape.len() != 2 || nb.shape.len() != 2 || na.shape[1] != nb.shape[0] {
                return Err(Error::ShapeMismatch {
                    op: "matmul",
                    lhs: na.shape.clone(),
                    rhs: nb.shape.clone(),
                });
            }
            let (m, k, n) = (na.shape[0], na.shape[1], nb.shape[1]);
            let mut out = vec![T::zero(); m * n];
            matmul_nn(na.storage.data(), nb.storage.data(), m, k, n, &mut out);
            (vec![m, n], out)
        };
        let rg = self.requires(&[a, b]);
        Ok(self.push(out_shape, Storage::Owned(out), Op::Matmul(a, b), rg))
    }

    fn binary(
        &self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(T, T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        self.check_finite(name, &[a, b])?;
        let (out_shape, out) = {
            let nodes = self.nodes.borrow();
            let (na, nb) = (&nodes[a.0], &nodes[b.0]);
            let out_shape =
                broadcast_shape(&na.shape, &nb.shape).ok_or_else(|| Error::ShapeMismatch {
                    op: name,
                    lhs: na.shape.clone(),
                    rhs: nb.shape.clone(),
                })?;
            let ad = na.storage.data();
            let bd = nb.storage.data();
            let out = if na.shape == nb.shape {
                ad.iter().zip(bd).map(|(&x, &y)| f(x, y)).collect()
            } else {
                let mut out = Vec::with_capacity(out_shape.iter().product());
                let mut walker = BroadcastWalker::new(&na.shape, &nb.shape, &out_shape);
                for _ in 0..out_shape.iter().product() {
                    let (ia, ib) = walker.step();
                    out.push(f(ad[ia], bd[ib]));
                }
                out
            };
            (out_shape, out)
        };
        let rg = self.requires(&[a, b]);
        Ok(self.push(out_shape, Storage::Owned(out), op, rg))
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, Op::Add(a, b))
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, Op::Sub(a, b))
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, Op::Mul(a, b))
    }

    pub fn div(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("div", a, b, |x, y| x / y, Op::Div(a, b))
    }

    fn unary(
        &self,
        name: &'static str,
        a: Var,
        f: impl Fn(T) -> T,
        op: Op<T>,
    ) -> Result<Var> {
        self.check_finite(name, &[a])?;
        let (shape, out) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            (
                na.shape.clone(),
                na.storage.data().iter().map(|&x| f(x)).collect(),
            )
        };
        let rg = self.requires(&[a]);
        Ok(self.push(shape, Storage::Owned(out), op, rg))
    }

    pub fn add_scalar(&self, a: Var, c: T) -> Result<Var> {
        self.unary("add_scalar", a, |x| x + c, Op::AddScalar(a))
    }

    pub fn mul_scalar(&self, a: Var, c: T) -> Result<Var> {
        self.unary("mul_scalar", a, |x| x * c, Op::MulScalar(a, c))
    }

    pub fn neg(&self, a: Var) -> Result<Var> {
        self.mul_scalar(a, -T::one())
    }

    pub fn exp(&self, a: Var) -> Result<Var> {
        self.unary("exp", a, |x| x.exp(), Op::Exp(a))
    }

    /// relu with subgradient 0 at the origin.
    pub fn relu(&self, a: Var) -> Result<Var> {
        self.unary(
            "relu",
            a,
            |x| if x > T::zero() { x } else { T::zero() },
            Op::Relu(a),
        )
    }

    /// `|x|` composed from the primitive set.
    pub fn abs(&self, a: Var) -> Result<Var> {
        let n = self.relu(self.neg(a)?)?;
        let p = self.relu(a)?;
        self.add(p, n)
    }

    fn reduce_axis(&self, name: &'static str, a: Var, axis: usize, mean: bool) -> Result<Var> {
        self.check_finite(name, &[a])?;
        let (shape, out) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            if axis >= na.shape.len() {
                return Err(Error::ShapeMismatch {
                    op: name,
                    lhs: na.shape.clone(),
                    rhs: vec![axis],
                });
            }
            let mut shape = na.shape.clone();
            let n_axis = shape[axis];
            shape[axis] = 1;
            let (outer, inner) = split_at_axis(&na.shape, axis);
            let data = na.storage.data();
            let mut out = vec![T::zero(); outer * inner];
            for o in 0..outer {
                for j in 0..n_axis {
                    let base = (o * n_axis + j) * inner;
                    for i in 0..inner {
                        out[o * inner + i] = out[o * inner + i] + data[base + i];
                    }
                }
            }
            if mean {
                let inv = T::one() / T::from_f64(n_axis as f64);
                for v in out.iter_mut() {
                    *v = *v * inv;
                }
            }
            (shape, out)
        };
        let rg = self.requires(&[a]);
        let op = if mean {
            Op::MeanAxis(a, axis)
        } else {
            Op::SumAxis(a, axis)
        };
        Ok(self.push(shape, Storage::Owned(out), op, rg))
    }

    /// Sum over one axis, keeping it as a singleton.
    pub fn sum_axis(&self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis("sum_axis", a, axis, false)
    }

    /// Mean over one axis, keeping it as a singleton.
    pub fn mean_axis(&self, a: Var, axis: usize) -> Result<Var> {
        self.reduce_axis("mean_axis", a, axis, true)
    }

    /// Concatenate rank-2 values along the last axis.
    pub fn concat_last(&self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::InvalidValue("concat_last of zero parts".into()));
        }
        self.check_finite("concat_last", parts)?;
        let (shape, out) = {
            let nodes = self.nodes.borrow();
            let rows = nodes[parts[0].0].shape[0];
            let mut widths = Vec::with_capacity(parts.len());
            for p in parts {
                let s = &nodes[p.0].shape;
                if s.len() != 2 || s[0] != rows {
                    return Err(Error::ShapeMismatch {
                        op: "concat_last",
                        lhs: nodes[parts[0].0].shape.clone(),
                        rhs: s.clone(),
                    });
                }
                widths.push(s[1]);
            }
            let total: usize = widths.iter().sum();
            let mut out = Vec::with_capacity(rows * total);
            for r in 0..rows {
                for (p, w) in parts.iter().zip(&widths) {
                    let d = nodes[p.0].storage.data();
                    out.extend_from_slice(&d[r * w..(r + 1) * w]);
                }
            }
            (vec![rows, total], out)
        };
        let rg = self.requires(parts);
        Ok(self.push(
            shape,
            Storage::Owned(out),
            Op::ConcatLast(parts.to_vec()),
            rg,
        ))
    }

    /// Gather rows of a rank-2 value by index list.
    pub fn gather_rows(&self, a: Var, indices: &[usize]) -> Result<Var> {
        if indices.is_empty() {
            return Err(Error::InvalidValue("gather_rows with no indices".into()));
        }
        self.check_finite("gather_rows", &[a])?;
        let (shape, out) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            if na.shape.len() != 2 {
                return Err(Error::ShapeMismatch {
                    op: "gather_rows",
                    lhs: na.shape.clone(),
                    rhs: vec![indices.len()],
                });
            }
            let (rows, cols) = (na.shape[0], na.shape[1]);
            if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
                return Err(Error::InvalidValue(format!(
                    "gather_rows index {bad} out of range for {rows} rows"
                )));
            }
            let data = na.storage.data();
            let mut out = Vec::with_capacity(indices.len() * cols);
            for &i in indices {
                out.extend_from_slice(&data[i * cols..(i + 1) * cols]);
            }
            (vec![indices.len(), cols], out)
        };
        let rg = self.requires(&[a]);
        Ok(self.push(
            shape,
            Storage::Owned(out),
            Op::GatherRows(a, indices.to_vec()),
            rg,
        ))
    }

    /// Mean of rows grouped by segment id. Ids must lie in
    /// `0..num_segments`; an empty segment yields a zero row.
    pub fn segment_mean(&self, a: Var, ids: &[usize], num_segments: usize) -> Result<Var> {
        self.check_finite("segment_mean", &[a])?;
        if num_segments == 0 {
            return Err(Error::InvalidValue("segment_mean with zero segments".into()));
        }
        let (shape, out, counts) = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            if na.shape.len() != 2 || na.shape[0] != ids.len() {
                return Err(Error::ShapeMismatch {
                    op: "segment_mean",
                    lhs: na.shape.clone(),
                    rhs: vec![ids.len()],
                });
            }
            if let Some(&bad) = ids.iter().find(|&&s| s >= num_segments) {
                return Err(Error::InvalidValue(format!(
                    "segment id {bad} out of range 0..{num_segments}"
                )));
            }
            let cols = na.shape[1];
            let data = na.storage.data();
            let mut counts = vec![0usize; num_segments];
            let mut out = vec![T::zero(); num_segments * cols];
            for (r, &s) in ids.iter().enumerate() {
                counts[s] += 1;
                for c in 0..cols {
                    out[s * cols + c] = out[s * cols + c] + data[r * cols + c];
                }
            }
            for (s, &cnt) in counts.iter().enumerate() {
                if cnt > 1 {
                    let inv = T::one() / T::from_f64(cnt as f64);
                    for c in 0..cols {
                        out[s * cols + c] = out[s * cols + c] * inv;
                    }
                }
            }
            (vec![num_segments, cols], out, counts)
        };
        let rg = self.requires(&[a]);
        Ok(self.push(
            shape,
            Storage::Owned(out),
            Op::SegmentMean {
                input: a,
                ids: ids.to_vec(),
                counts,
            },
            rg,
        ))
    }

    /// 1-D convolution, stride 1, same (zero) padding, odd kernel size.
    /// Input `[L, c_in]`, kernel `[k, c_in, c_out]`, output `[L, c_out]`.
    pub fn conv1d(&self, input: Var, kernel: Var) -> Result<Var> {
        self.check_finite("conv1d", &[input, kernel])?;
        let (shape, out) = {
            let nodes = self.nodes.borrow();
            let ni = &nodes[input.0];
            let nk = &nodes[kernel.0];
            let ok = ni.shape.len() == 2
                && nk.shape.len() == 3
                && nk.shape[1] == ni.shape[1]
                && nk.shape[0] % 2 == 1;
            if !ok {
                return Err(Error::ShapeMismatch {
                    op: "conv1d",
                    lhs: ni.shape.clone(),
                    rhs: nk.shape.clone(),
                });
            }
            let (len, c_in) = (ni.shape[0], ni.shape[1]);
            let (k, c_out) = (nk.shape[0], nk.shape[2]);
            let pad = (k - 1) / 2;
            let x = ni.storage.data();
            let w = nk.storage.data();
            let mut out = vec![T::zero(); len * c_out];
            for l in 0..len {
                for kk in 0..k {
                    let m = l + kk;
                    if m < pad || m - pad >= len {
                        continue;
                    }
                    let m = m - pad;
                    for ci in 0..c_in {
                        let xv = x[m * c_in + ci];
                        let wbase = (kk * c_in + ci) * c_out;
                        let obase = l * c_out;
                        for co in 0..c_out {
                            out[obase + co] = out[obase + co] + xv * w[wbase + co];
                        }
                    }
                }
            }
            (vec![len, c_out], out)
        };
        let rg = self.requires(&[input, kernel]);
        Ok(self.push(shape, Storage::Owned(out), Op::Conv1d { input, kernel }, rg))
    }

    /// Same-numel view with a new shape (row-major data unchanged).
    pub fn reshape(&self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let data = {
            let nodes = self.nodes.borrow();
            let na = &nodes[a.0];
            if shape.iter().product::<usize>() != na.storage.data().len() {
                return Err(Error::ShapeMismatch {
                    op: "reshape",
                    lhs: na.shape.clone(),
                    rhs: shape,
                });
            }
            na.storage.data().to_vec()
        };
        let rg = self.requires(&[a]);
        Ok(self.push(shape, Storage::Owned(data), Op::Reshape(a), rg))
    }

    // ---- backward ---------------------------------------------------------

    /// Compute gradients of a scalar loss for every reachable parameter leaf.
    /// Adjoints are replayed in reverse record order, visiting each op once.
    pub fn backward(&self, loss: Var) -> Result<GradMap<T>> {
        if !self.grad_enabled {
            return Err(Error::InvalidValue(
                "backward called on an inference tape".into(),
            ));
        }
        let nodes = self.nodes.borrow();
        let lnode = &nodes[loss.0];
        if lnode.shape.iter().product::<usize>() != 1 {
            return Err(Error::NotScalar {
                op: "backward",
                shape: lnode.shape.clone(),
            });
        }

        let mut grads: Vec<Option<Vec<T>>> = vec![None; nodes.len()];
        grads[loss.0] = Some(vec![T::one()]);
        let mut param_grads: GradMap<T> = HashMap::new();

        for id in (0..=loss.0).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            match &node.op {
                Op::Const => {}
                Op::Leaf(pid) => {
                    accumulate_param(&mut param_grads, *pid, &g);
                }
                Op::Matmul(a, b) => {
                    let (na, nb) = (&nodes[a.0], &nodes[b.0]);
                    let (m, k, n) = (na.shape[0], na.shape[1], nb.shape[1]);
                    if nodes[a.0].requires_grad {
                        let mut da = vec![T::zero(); m * k];
                        matmul_nt(&g, nb.storage.data(), m, n, k, &mut da);
                        acc(&mut grads, a.0, da);
                    }
                    if nodes[b.0].requires_grad {
                        let mut db = vec![T::zero(); k * n];
                        matmul_tn(na.storage.data(), &g, m, k, n, &mut db);
                        acc(&mut grads, b.0, db);
                    }
                }
                Op::Add(a, b) => {
                    self.backward_binary(&nodes, &mut grads, &g, &node.shape, *a, *b, |_, _, go| {
                        (go, go)
                    });
                }
                Op::Sub(a, b) => {
                    self.backward_binary(&nodes, &mut grads, &g, &node.shape, *a, *b, |_, _, go| {
                        (go, -go)
                    });
                }
                Op::Mul(a, b) => {
                    self.backward_binary(&nodes, &mut grads, &g, &node.shape, *a, *b, |x, y, go| {
                        (go * y, go * x)
                    });
                }
                Op::Div(a, b) => {
                    self.backward_binary(&nodes, &mut grads, &g, &node.shape, *a, *b, |x, y, go| {
                        (go / y, -go * x / (y * y))
                    });
                }
                Op::AddScalar(a) => acc(&mut grads, a.0, g),
                Op::MulScalar(a, c) => {
                    let c = *c;
                    acc(&mut grads, a.0, g.iter().map(|&v| v * c).collect());
                }
                Op::Exp(a) => {
                    let out = node.storage.data();
                    acc(
                        &mut grads,
                        a.0,
                        g.iter().zip(out).map(|(&go, &o)| go * o).collect(),
                    );
                }
                Op::Relu(a) => {
                    let x = nodes[a.0].storage.data();
                    acc(
                        &mut grads,
                        a.0,
                        g.iter()
                            .zip(x)
                            .map(|(&go, &xi)| if xi > T::zero() { go } else { T::zero() })
                            .collect(),
                    );
                }
                Op::SumAxis(a, axis) | Op::MeanAxis(a, axis) => {
                    let in_shape = &nodes[a.0].shape;
                    let n_axis = in_shape[*axis];
                    let scale = if matches!(node.op, Op::MeanAxis(..)) {
                        T::one() / T::from_f64(n_axis as f64)
                    } else {
                        T::one()
                    };
                    let (outer, inner) = split_at_axis(in_shape, *axis);
                    let mut da = vec![T::zero(); outer * n_axis * inner];
                    for o in 0..outer {
                        for j in 0..n_axis {
                            let base = (o * n_axis + j) * inner;
                            for i in 0..inner {
                                da[base + i] = g[o * inner + i] * scale;
                            }
                        }
                    }
                    acc(&mut grads, a.0, da);
                }
                Op::ConcatLast(parts) => {
                    let rows = node.shape[0];
                    let total = node.shape[1];
                    let mut offset = 0;
                    for p in parts {
                        let w = nodes[p.0].shape[1];
                        if nodes[p.0].requires_grad {
                            let mut dp = vec![T::zero(); rows * w];
                            for r in 0..rows {
                                dp[r * w..(r + 1) * w]
                                    .copy_from_slice(&g[r * total + offset..r * total + offset + w]);
                            }
                            acc(&mut grads, p.0, dp);
                        }
                        offset += w;
                    }
                }
                Op::GatherRows(a, indices) => {
                    let in_shape = &nodes[a.0].shape;
                    let cols = in_shape[1];
                    let mut da = vec![T::zero(); in_shape[0] * cols];
                    for (r, &i) in indices.iter().enumerate() {
                        for c in 0..cols {
                            da[i * cols + c] = da[i * cols + c] + g[r * cols + c];
                        }
                    }
                    acc(&mut grads, a.0, da);
                }
                Op::SegmentMean { input, ids, counts } => {
                    let cols = node.shape[1];
                    let rows = ids.len();
                    let mut da = vec![T::zero(); rows * cols];
                    for (r, &s) in ids.iter().enumerate() {
                        let inv = T::one() / T::from_f64(counts[s] as f64);
                        for c in 0..cols {
                            da[r * cols + c] = g[s * cols + c] * inv;
                        }
                    }
                    acc(&mut grads, input.0, da);
                }
                Op::Conv1d { input, kernel } => {
                    let ni = &nodes[input.0];
                    let nk = &nodes[kernel.0];
                    let (len, c_in) = (ni.shape[0], ni.shape[1]);
                    let (k, c_out) = (nk.shape[0], nk.shape[2]);
                    let pad = (k - 1) / 2;
                    let x = ni.storage.data();
                    let w = nk.storage.data();
                    let want_in = ni.requires_grad;
                    let want_ker = nk.requires_grad;
                    let mut dx = vec![T::zero(); len * c_in];
                    let mut dw = vec![T::zero(); k * c_in * c_out];
                    for l in 0..len {
                        for kk in 0..k {
                            let m = l + kk;
                            if m < pad || m - pad >= len {
                                continue;
                            }
                            let m = m - pad;
                            for ci in 0..c_in {
                                let wbase = (kk * c_in + ci) * c_out;
                                let xv = x[m * c_in + ci];
                                let mut dxv = T::zero();
                                for co in 0..c_out {
                                    let go = g[l * c_out + co];
                                    dxv = dxv + w[wbase + co] * go;
                                    dw[wbase + co] = dw[wbase + co] + xv * go;
                                }
                                dx[m * c_in + ci] = dx[m * c_in + ci] + dxv;
                            }
                        }
                    }
                    if want_in {
                        acc(&mut grads, input.0, dx);
                    }
                    if want_ker {
                        acc(&mut grads, kernel.0, dw);
                    }
                }
                Op::Reshape(a) => acc(&mut grads, a.0, g),
            }
        }
        Ok(param_grads)
    }

    #[allow(clippy::too_many_arguments)]
    fn backward_binary(
        &self,
        nodes: &[Node<'p, T>],
        grads: &mut [Option<Vec<T>>],
        g: &[T],
        out_shape: &[usize],
        a: Var,
        b: Var,
        f: impl Fn(T, T, T) -> (T, T),
    ) {
        let (na, nb) = (&nodes[a.0], &nodes[b.0]);
        let ad = na.storage.data();
        let bd = nb.storage.data();
        let want_a = na.requires_grad;
        let want_b = nb.requires_grad;
        let mut da = vec![T::zero(); ad.len()];
        let mut db = vec![T::zero(); bd.len()];
        if na.shape == nb.shape {
            for i in 0..g.len() {
                let (ga, gb) = f(ad[i], bd[i], g[i]);
                da[i] = da[i] + ga;
                db[i] = db[i] + gb;
            }
        } else {
            let mut walker = BroadcastWalker::new(&na.shape, &nb.shape, out_shape);
            for &go in g {
                let (ia, ib) = walker.step();
                let (ga, gb) = f(ad[ia], bd[ib], go);
                da[ia] = da[ia] + ga;
                db[ib] = db[ib] + gb;
            }
        }
        if want_a {
            acc(grads, a.0, da);
        }
        if want_b {
            acc(grads, b.0, db);
        }
    }
}

impl<T: Scalar> Default for Tape<'_, T> {
    fn default() -> Self {
        Tape::new()
    }
}

fn accumulate_param<T: Scalar>(map: &mut GradMap<T>, pid: ParamId, g: &[T]) {
    match map.get_mut(&pid) {
        Some(acc) => {
            for (a, &v) in acc.iter_mut().zip(g) {
                *a = *a + v;
            }
        }
        None => {
            map.insert(pid, g.to_vec());
        }
    }
}

fn acc<T: Scalar>(grads: &mut [Option<Vec<T>>], id: usize, delta: Vec<T>) {
    match &mut grads[id] {
        Some(existing) => {
            for (e, d) in existing.iter_mut().zip(delta) {
                *e = *e + d;
            }
        }
        slot @ None => *slot = Some(delta),
    }
}

/// `(product of dims before axis, product of dims after axis)`.
fn split_at_axis(shape: &[usize], axis: usize) -> (usize, usize) {
    let outer: usize = shape[..axis].iter().product();
    let inner: usize = shape[axis + 1..].iter().product();
    (outer, inner)
}

/// Right-aligned singleton broadcasting, numpy style.
fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0usize; rank];
    for i in 0..rank {
        let da = dim_from_right(a, rank, i);
        let db = dim_from_right(b, rank, i);
        if da == db || da == 1 || db == 1 {
            out[i] = da.max(db);
        } else {
            return None;
        }
    }
    Some(out)
}

fn dim_from_right(shape: &[usize], rank: usize, i: usize) -> usize {
    let pad = rank - shape.len();
    if i < pad {
        1
    } else {
        shape[i - pad]
    }
}

/// Odometer over an output shape yielding flat indices into two broadcast
/// operands without per-element division.
struct BroadcastWalker {
    dims: Vec<usize>,
    coords: Vec<usize>,
    stride_a: Vec<usize>,
    stride_b: Vec<usize>,
    ia: usize,
    ib: usize,
    first: bool,
}

impl BroadcastWalker {
    fn new(a: &[usize], b: &[usize], out: &[usize]) -> Self {
        let rank = out.len();
        let mk = |shape: &[usize]| {
            let mut strides = vec![0usize; rank];
            let mut acc = 1usize;
            for i in (0..rank).rev() {
                let d = dim_from_right(shape, rank, i);
                strides[i] = if d == 1 { 0 } else { acc };
                acc *= d;
            }
            strides
        };
        BroadcastWalker {
            dims: out.to_vec(),
            coords: vec![0; rank],
            stride_a: mk(a),
            stride_b: mk(b),
            ia: 0,
            ib: 0,
            first: true,
        }
    }

    fn step(&mut self) -> (usize, usize) {
        if self.first {
            self.first = false;
            return (self.ia, self.ib);
        }
        for i in (0..self.dims.len()).rev() {
            self.coords[i] += 1;
            self.ia += self.stride_a[i];
            self.ib += self.stride_b[i];
            if self.coords[i] < self.dims[i] {
                break;
            }
            self.ia -= self.stride_a[i] * self.dims[i];
            self.ib -= self.stride_b[i] * self.dims[i];
            self.coords[i] = 0;
        }
        (self.ia, self.ib)
    }
}

/// C += A[m,k] @ B[k,n]
fn matmul_nn<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, c: &mut [T]) {
    for i in 0..m {
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b[p * n..(p + 1) * n];
            let crow = &mut c[i * n..(i + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + aip * brow[j];
            }
        }
    }
}

/// C += A[m,n] @ B[k,n]^T  (result [m,k])
fn matmul_nt<T: Scalar>(a: &[T], b: &[T], m: usize, n: usize, k: usize, c: &mut [T]) {
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for p in 0..k {
            let brow = &b[p * n..(p + 1) * n];
            let mut s = T::zero();
            for j in 0..n {
                s = s + arow[j] * brow[j];
            }
            c[i * k + p] = c[i * k + p] + s;
        }
    }
}

/// C += A[m,k]^T @ B[m,n]  (result [k,n])
fn matmul_tn<T: Scalar>(a: &[T], b: &[T], m: usize, k: usize, n: usize, c: &mut [T]) {
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip == T::zero() {
                continue;
            }
            let crow = &mut c[p * n..(p + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + aip * brow[j];
            }
        }
    }
}
