//! Model construction, the forward pass over a formula graph, and
//! edge-attribute export.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{Domain, FormulaGraph, GAUSSIAN_CENTERS};
use crate::model::net::{Linear, Mlp};
use crate::model::FinderConfig;
use crate::tensor::{ParamId, ParamSet, Scalar, Tape, Tensor, Var};

/// Output vars on a tape: prediction mean and log aleatoric scale, each
/// `[1, W]` where W is 1 for scalar targets and 3000 for spectra.
#[derive(Debug, Clone, Copy)]
pub struct OutputVars {
    pub mean: Var,
    pub log_scale: Var,
}

/// Evaluated output in normalized units.
#[derive(Debug, Clone)]
pub struct RobustOutput<T: Scalar> {
    pub mean: Vec<T>,
    pub log_scale: Vec<T>,
}

/// Intermediate values captured during a traced forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<T: Scalar> {
    /// Node states after each message-passing layer, `[N, D]`.
    pub layer_states: Vec<Tensor<T>>,
    /// Predicted edge attributes per layer (formula domain only), `[E, 20]`.
    pub layer_edge_attrs: Vec<Option<Tensor<T>>>,
    /// Pooled vector per probe, `[1, D]`.
    pub pooled: Vec<Tensor<T>>,
    /// Combined material embedding, `[1, D]`.
    pub embedding: Tensor<T>,
}

enum Attention {
    /// Element-wise self-attention: query/key/value projections.
    Element {
        f_q: Linear,
        f_k: Linear,
        f_v: Linear,
    },
    /// Scalar softmax gating over each node's neighbors.
    SoftScalar { gate: Linear },
    Off,
}

struct MpLayer {
    w_int: ParamId,
    phi_e: Option<Mlp>,
    phi_m: Mlp,
    attention: Attention,
}

struct PoolLayer {
    /// None under the sum_pool ablation.
    gate: Option<Mlp>,
    transform: Mlp,
}

enum Skip {
    Identity,
    Project(Linear),
    Off,
}

struct DenseBlock {
    lin: Linear,
    skip: Skip,
}

struct PostNet {
    kernel: ParamId,
    bias: ParamId,
    blocks: Vec<DenseBlock>,
}

pub struct FinderModel<T: Scalar> {
    config: FinderConfig,
    seed: u64,
    params: ParamSet<T>,
    layers: Vec<MpLayer>,
    pools: Vec<PoolLayer>,
    post: Option<PostNet>,
    head_mean: Linear,
    head_scale: Linear,
}

impl<T: Scalar> FinderModel<T> {
    pub fn new(config: FinderConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let d = config.state_dim;
        let (h1, h2) = config.phi_hidden;

        let mut layers = Vec::with_capacity(config.message_passes);
        for r in 0..config.message_passes {
            let in_dim = if r == 0 { config.embed_dim } else { d };
            let w_int = params.register(
                format!("layer{r}.w_int"),
                glorot_shaped(&mut rng, in_dim, d, vec![in_dim, d]),
            )?;
            let phi_e = match config.domain {
                Domain::Formula => Some(Mlp::new(
                    &mut params,
                    &mut rng,
                    &format!("layer{r}.phi_e"),
                    &[2 * in_dim, h1, h2, GAUSSIAN_CENTERS],
                )?),
                Domain::Crystal => None,
            };
            let phi_m = Mlp::new(
                &mut params,
                &mut rng,
                &format!("layer{r}.phi_m"),
                &[in_dim + GAUSSIAN_CENTERS, h1, h2, d],
            )?;
            let attention = if config.ablation.no_self_attention {
                Attention::Off
            } else if config.ablation.soft_attention {
                Attention::SoftScalar {
                    gate: Linear::new(
                        &mut params,
                        &mut rng,
                        &format!("layer{r}.soft_gate"),
                        2 * in_dim,
                        1,
                        false,
                    )?,
                }
            } else {
                Attention::Element {
                    f_q: Linear::new(&mut params, &mut rng, &format!("layer{r}.f_q"), in_dim, d, false)?,
                    f_k: Linear::new(&mut params, &mut rng, &format!("layer{r}.f_k"), in_dim, d, false)?,
                    f_v: Linear::new(&mut params, &mut rng, &format!("layer{r}.f_v"), in_dim, d, false)?,
                }
            };
            layers.push(MpLayer {
                w_int,
                phi_e,
                phi_m,
                attention,
            });
        }

        let pool_count = if config.ablation.no_residuals {
            1
        } else {
            config.message_passes
        };
        let mut pools = Vec::with_capacity(pool_count);
        for p in 0..pool_count {
            let gate = if config.ablation.sum_pool {
                None
            } else {
                Some(Mlp::new(
                    &mut params,
                    &mut rng,
                    &format!("pool{p}.gate"),
                    &[d, config.pool_hidden, 1],
                )?)
            };
            let transform = Mlp::new(
                &mut params,
                &mut rng,
                &format!("pool{p}.transform"),
                &[d, config.pool_hidden, d],
            )?;
            pools.push(PoolLayer { gate, transform });
        }

        let (post, head_in) = if config.ablation.no_post_net {
            (None, d)
        } else {
            let k = config.conv_kernel;
            let f = config.conv_filters;
            let kernel = params.register(
                "post.conv.kernel",
                glorot_shaped(&mut rng, k, k * f, vec![k, 1, f]),
            )?;
            let bias = params.register("post.conv.bias", Tensor::zeros(vec![f]))?;
            let mut blocks = Vec::with_capacity(config.post_dense.len());
            let mut prev = d * f;
            for (i, &w) in config.post_dense.iter().enumerate() {
                let lin = Linear::new(&mut params, &mut rng, &format!("post.dense{i}"), prev, w, true)?;
                let skip = if config.ablation.no_residuals {
                    Skip::Off
                } else if prev == w {
                    Skip::Identity
                } else {
                    Skip::Project(Linear::new(
                        &mut params,
                        &mut rng,
                        &format!("post.skip{i}"),
                        prev,
                        w,
                        false,
                    )?)
                };
                blocks.push(DenseBlock { lin, skip });
                prev = w;
            }
            (
                Some(PostNet {
                    kernel,
                    bias,
                    blocks,
                }),
                prev,
            )
        };

        let out_w = config.target.output_width();
        let head_mean = Linear::new(&mut params, &mut rng, "head.mean", head_in, out_w, true)?;
        let head_scale = Linear::new(&mut params, &mut rng, "head.scale", head_in, out_w, true)?;

        Ok(FinderModel {
            config,
            seed,
            params,
            layers,
            pools,
            post,
            head_mean,
            head_scale,
        })
    }

    pub fn config(&self) -> &FinderConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn params(&self) -> &ParamSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet<T> {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.scalar_count()
    }

    /// Overwrite parameters by name, e.g. from a checkpoint.
    pub fn load_params(&mut self, entries: &[(String, Tensor<T>)]) -> Result<()> {
        for (name, tensor) in entries {
            let id = self.params.id_of(name).ok_or_else(|| {
                Error::Checkpoint(format!("checkpoint entry '{name}' has no matching parameter"))
            })?;
            let current = self.params.get(id).tensor();
            if current.shape() != tensor.shape() {
                return Err(Error::Checkpoint(format!(
                    "parameter '{name}' has shape {:?}, checkpoint holds {:?}",
                    current.shape(),
                    tensor.shape()
                )));
            }
            self.params
                .get_mut(id)
                .tensor_mut()
                .data_mut()
                .copy_from_slice(tensor.data());
        }
        Ok(())
    }

    pub fn forward<'p>(&'p self, tape: &Tape<'p, T>, graph: &FormulaGraph<T>) -> Result<OutputVars> {
        Ok(self.forward_impl(tape, graph, false)?.0)
    }

    pub fn forward_traced<'p>(
        &'p self,
        tape: &Tape<'p, T>,
        graph: &FormulaGraph<T>,
    ) -> Result<(OutputVars, ForwardTrace<T>)> {
        let (out, trace) = self.forward_impl(tape, graph, true)?;
        Ok((out, trace.expect("trace requested")))
    }

    /// Convenience inference pass returning evaluated outputs.
    pub fn predict(&self, graph: &FormulaGraph<T>) -> Result<RobustOutput<T>> {
        let tape = Tape::inference();
        let out = self.forward(&tape, graph)?;
        Ok(RobustOutput {
            mean: tape.value(out.mean).data().to_vec(),
            log_scale: tape.value(out.log_scale).data().to_vec(),
        })
    }

    fn forward_impl<'p>(
        &'p self,
        tape: &Tape<'p, T>,
        graph: &FormulaGraph<T>,
        want_trace: bool,
    ) -> Result<(OutputVars, Option<ForwardTrace<T>>)> {
        let n = graph.node_count();
        if graph.domain != self.config.domain {
            return Err(Error::Config(format!(
                "graph domain {} does not match model domain {}",
                graph.domain, self.config.domain
            )));
        }
        if n > self.config.node_cap {
            return Err(Error::NodeCapExceeded {
                needed: n,
                cap: self.config.node_cap,
            });
        }
        if graph.node_features.shape()[1] != self.config.embed_dim {
            return Err(Error::ShapeMismatch {
                op: "forward",
                lhs: graph.node_features.shape().to_vec(),
                rhs: vec![n, self.config.embed_dim],
            });
        }

        let src: Vec<usize> = graph.edges.iter().map(|&(i, _)| i).collect();
        let dst: Vec<usize> = graph.edges.iter().map(|&(_, j)| j).collect();

        let mut states = tape.constant(&graph.node_features);
        let mut layer_states = Vec::new();
        let mut layer_edge_attrs = Vec::new();
        let mut pooled_vars: Vec<Var> = Vec::new();

        for (r, layer) in self.layers.iter().enumerate() {
            let (next, edge_attr) = self.layer_forward(tape, layer, states, graph, &src, &dst, n)?;
            states = next;
            if want_trace {
                layer_states.push(tape.value(states));
                layer_edge_attrs.push(edge_attr.map(|e| tape.value(e)));
            }
            if !self.config.ablation.no_residuals {
                pooled_vars.push(self.pool_forward(tape, &self.pools[r], states)?);
            } else if r + 1 == self.layers.len() {
                pooled_vars.push(self.pool_forward(tape, &self.pools[0], states)?);
            }
        }

        let mut combined = pooled_vars[0];
        for &p in &pooled_vars[1..] {
            combined = tape.add(combined, p)?;
        }

        let features = match &self.post {
            Some(post) => self.post_forward(tape, post, combined)?,
            None => combined,
        };
        let out = OutputVars {
            mean: self.head_mean.apply(tape, &self.params, features)?,
            log_scale: self.head_scale.apply(tape, &self.params, features)?,
        };
        let trace = want_trace.then(|| ForwardTrace {
            layer_states,
            layer_edge_attrs,
            pooled: pooled_vars.iter().map(|&v| tape.value(v)).collect(),
            embedding: tape.value(combined),
        });
        Ok((out, trace))
    }

    #[allow(clippy::too_many_arguments)]
    fn layer_forward<'p>(
        &'p self,
        tape: &Tape<'p, T>,
        layer: &'p MpLayer,
        states: Var,
        graph: &FormulaGraph<T>,
        src: &[usize],
        dst: &[usize],
        n: usize,
    ) -> Result<(Var, Option<Var>)> {
        let ps = &self.params;
        let through = tape.matmul(states, tape.leaf(layer.w_int, ps.get(layer.w_int)))?;
        if src.is_empty() {
            // isolated nodes: the aggregated message is the zero vector
            return Ok((through, None));
        }

        let vi = tape.gather_rows(states, src)?;
        let vj = tape.gather_rows(states, dst)?;
        let pair = tape.mul_scalar(tape.add(vi, vj)?, T::from_f64(0.5))?;

        let (edge_attr, traced_attr) = match self.config.domain {
            Domain::Formula => {
                let phi_e = layer.phi_e.as_ref().expect("formula layers carry phi_e");
                // context: mean of pair terms over each source's neighborhood
                let ctx_nodes = tape.segment_mean(pair, src, n)?;
                let ctx = tape.gather_rows(ctx_nodes, src)?;
                let e = phi_e.apply(tape, ps, tape.concat_last(&[pair, ctx])?)?;
                (e, Some(e))
            }
            Domain::Crystal => {
                let feats = graph
                    .edge_features
                    .as_ref()
                    .expect("crystal graph with edges has features");
                (tape.constant(feats), None)
            }
        };

        let raw_msg = layer
            .phi_m
            .apply(tape, ps, tape.concat_last(&[pair, edge_attr])?)?;

        let messages = match &layer.attention {
            Attention::Element { f_q, f_k, f_v } => {
                let a = self.alignment(tape, f_q, f_k, f_v, states, src, dst, n)?;
                tape.mul(raw_msg, a)?
            }
            Attention::SoftScalar { gate } => {
                let w = self.soft_weights(tape, gate, vi, vj, src, n)?;
                tape.mul(raw_msg, w)?
            }
            Attention::Off => raw_msg,
        };

        let agg = tape.segment_mean(messages, src, n)?;
        Ok((tape.add(through, agg)?, traced_attr))
    }

    /// Element-wise alignment scores: exponentiated query-key products
    /// normalized per component over all N nodes, times the value vectors.
    #[allow(clippy::too_many_arguments)]
    fn alignment<'p>(
        &'p self,
        tape: &Tape<'p, T>,
        f_q: &Linear,
        f_k: &Linear,
        f_v: &Linear,
        states: Var,
        src: &[usize],
        dst: &[usize],
        n: usize,
    ) -> Result<Var> {
        let ps = &self.params;
        let d = self.config.key_dim();
        let q = f_q.apply(tape, ps, states)?;
        let k = f_k.apply(tape, ps, states)?;
        let v = f_v.apply(tape, ps, states)?;

        // all ordered node pairs (i, l), including l = i: the normalization
        // runs over every node of the graph
        let mut ii = Vec::with_capacity(n * n);
        let mut ll = Vec::with_capacity(n * n);
        for i in 0..n {
            for l in 0..n {
                ii.push(i);
                ll.push(l);
            }
        }
        let qi = tape.gather_rows(q, &ii)?;
        let kl = tape.gather_rows(k, &ll)?;
        let scale = T::from_f64(1.0 / (d as f64).sqrt());
        let raw = tape.mul_scalar(tape.mul(qi, kl)?, scale)?;

        // per-(node, component) maximum over l, subtracted before exp; the
        // normalized ratio is exactly invariant under this shift
        let maxima = tape.with_data(raw, |_, data| {
            let mut m = vec![T::from_f64(f64::NEG_INFINITY); n * d];
            for i in 0..n {
                for l in 0..n {
                    let row = (i * n + l) * d;
                    for c in 0..d {
                        let x = data[row + c];
                        if x > m[i * d + c] {
                            m[i * d + c] = x;
                        }
                    }
                }
            }
            m
        });
        let max_const = tape.constant_from(vec![n, d], maxima)?;
        let shifted = tape.sub(raw, tape.gather_rows(max_const, &ii)?)?;
        let ex = tape.exp(shifted)?;
        let denom = tape.mul_scalar(tape.segment_mean(ex, &ii, n)?, T::from_f64(n as f64))?;

        let pos: Vec<usize> = src.iter().zip(dst).map(|(&i, &j)| i * n + j).collect();
        let w = tape.div(tape.gather_rows(ex, &pos)?, tape.gather_rows(denom, src)?)?;
        tape.mul(w, tape.gather_rows(v, dst)?)
    }

    /// Scalar gating softmax-normalized over each source's neighbors.
    fn soft_weights<'p>(
        &'p self,
        tape: &Tape<'p, T>,
        gate: &Linear,
        vi: Var,
        vj: Var,
        src: &[usize],
        n: usize,
    ) -> Result<Var> {
        let ps = &self.params;
        let scores = gate.apply(tape, ps, tape.concat_last(&[vi, vj])?)?;
        let maxima = tape.with_data(scores, |_, data| {
            let mut m = vec![T::zero(); n];
            let mut seen = vec![false; n];
            for (e, &i) in src.iter().enumerate() {
                if !seen[i] || data[e] > m[i] {
                    m[i] = data[e];
                    seen[i] = true;
                }
            }
            m
        });
        let max_const = tape.constant_from(vec![n, 1], maxima)?;
        let ex = tape.exp(tape.sub(scores, tape.gather_rows(max_const, src)?)?)?;
        let mut counts = vec![T::zero(); n];
        for &i in src {
            counts[i] = counts[i] + T::one();
        }
        let counts = tape.constant_from(vec![n, 1], counts)?;
        let sums = tape.mul(tape.segment_mean(ex, src, n)?, counts)?;
        tape.div(ex, tape.gather_rows(sums, src)?)
    }

    /// Permutation-invariant pooling: softmax-gated sum of transformed node
    /// states, or a plain sum under the sum_pool ablation.
    fn pool_forward<'p>(&'p self, tape: &Tape<'p, T>, pool: &'p PoolLayer, states: Var) -> Result<Var> {
        let ps = &self.params;
        let transformed = pool.transform.apply(tape, ps, states)?;
        match &pool.gate {
            Some(gate) => {
                let scores = gate.apply(tape, ps, states)?;
                let max = tape.with_data(scores, |_, data| {
                    let mut m = data[0];
                    for &x in &data[1..] {
                        if x > m {
                            m = x;
                        }
                    }
                    m
                });
                let shifted = tape.add_scalar(scores, -max)?;
                let ex = tape.exp(shifted)?;
                let total = tape.sum_axis(ex, 0)?;
                let w = tape.div(ex, total)?;
                tape.sum_axis(tape.mul(w, transformed)?, 0)
            }
            None => tape.sum_axis(transformed, 0),
        }
    }

    /// Convolution over the embedding treated as a length-D single-channel
    /// signal, then the dense stack with additive skips (projected when the
    /// consecutive widths differ).
    fn post_forward<'p>(&'p self, tape: &Tape<'p, T>, post: &'p PostNet, x: Var) -> Result<Var> {
        let ps = &self.params;
        let d = self.config.state_dim;
        let f = self.config.conv_filters;
        let signal = tape.reshape(x, vec![d, 1])?;
        let conv = tape.conv1d(signal, tape.leaf(post.kernel, ps.get(post.kernel)))?;
        let conv = tape.add(conv, tape.leaf(post.bias, ps.get(post.bias)))?;
        let conv = tape.relu(conv)?;
        let mut h = tape.reshape(conv, vec![1, d * f])?;
        for block in &post.blocks {
            let lin = tape.relu(block.lin.apply(tape, ps, h)?)?;
            h = match &block.skip {
                Skip::Identity => tape.add(lin, h)?,
                Skip::Project(p) => tape.add(lin, p.apply(tape, ps, h)?)?,
                Skip::Off => lin,
            };
        }
        Ok(h)
    }

    /// Edge attribute matrix: entry (i, j) is the mean over the 20 components
    /// of the predicted e_ij at the chosen message-passing layer; the
    /// diagonal is zero. Formula domain only.
    pub fn export_eam(&self, graph: &FormulaGraph<T>, layer_index: usize) -> Result<Tensor<T>> {
        if self.config.domain != Domain::Formula || graph.domain != Domain::Formula {
            return Err(Error::Config(
                "edge attributes are model-predicted only in the formula domain".into(),
            ));
        }
        if layer_index >= self.layers.len() {
            return Err(Error::Config(format!(
                "layer index {layer_index} out of range for {} layers",
                self.layers.len()
            )));
        }
        let tape = Tape::inference();
        let (_, trace) = self.forward_traced(&tape, graph)?;
        let n = graph.node_count();
        let mut matrix = vec![T::zero(); n * n];
        if let Some(e) = &trace.layer_edge_attrs[layer_index] {
            let width = e.shape()[1];
            let inv = T::from_f64(1.0 / width as f64);
            for (idx, &(i, j)) in graph.edges.iter().enumerate() {
                let mut s = T::zero();
                for &v in e.row(idx) {
                    s = s + v;
                }
                matrix[i * n + j] = s * inv;
            }
        }
        Tensor::new(vec![n, n], matrix)
    }
}

/// Glorot-uniform init with explicit fan-in/fan-out for non-matrix shapes.
fn glorot_shaped<T: Scalar>(
    rng: &mut ChaCha8Rng,
    fan_in: usize,
    fan_out: usize,
    shape: Vec<usize>,
) -> Tensor<T> {
    use rand::Rng;
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let numel = shape.iter().product();
    let data: Vec<T> = (0..numel)
        .map(|_| T::from_f64(rng.gen_range(-limit..limit)))
        .collect();
    Tensor::new(shape, data).expect("sized data")
}
