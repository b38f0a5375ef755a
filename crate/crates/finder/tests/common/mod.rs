//! Shared test support: an independent straight-line re-implementation of
//! the message-passing equations using plain nested loops over `Vec<f64>`,
//! plus random graph generators. The naive path reads the same weights as
//! the model but never touches the tape, so agreement between the two is
//! evidence for both.

#![allow(dead_code)]

use finder::chem::Element;
use finder::graph::{build_crystal_graph, CrystalStructure, Domain, FormulaGraph};
use finder::model::FinderModel;
use finder::tensor::{ParamSet, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn weight(ps: &ParamSet<f64>, name: &str) -> (Vec<usize>, Vec<f64>) {
    let p = ps
        .by_name(name)
        .unwrap_or_else(|| panic!("missing parameter {name}"));
    (p.tensor().shape().to_vec(), p.tensor().data().to_vec())
}

fn matvec(shape: &[usize], w: &[f64], x: &[f64]) -> Vec<f64> {
    let (rows, cols) = (shape[0], shape[1]);
    assert_eq!(rows, x.len());
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        for c in 0..cols {
            out[c] += x[r] * w[r * cols + c];
        }
    }
    out
}

fn add(mut a: Vec<f64>, b: &[f64]) -> Vec<f64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn relu(mut v: Vec<f64>) -> Vec<f64> {
    for x in v.iter_mut() {
        if *x < 0.0 {
            *x = 0.0;
        }
    }
    v
}

/// Apply a named MLP (relu hidden, linear output) to one vector.
pub fn naive_mlp(ps: &ParamSet<f64>, name: &str, layers: usize, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    for i in 0..layers {
        let (ws, w) = weight(ps, &format!("{name}.{i}.w"));
        let (_, b) = weight(ps, &format!("{name}.{i}.b"));
        h = add(matvec(&ws, &w, &h), &b);
        if i + 1 != layers {
            h = relu(h);
        }
    }
    h
}

pub struct NaiveTrace {
    pub layer_states: Vec<Vec<Vec<f64>>>,
    pub layer_edges: Vec<Vec<Vec<f64>>>,
    pub pooled: Vec<Vec<f64>>,
    pub embedding: Vec<f64>,
}

/// Straight-line evaluation of the message-passing stack on one graph:
/// learned pairwise edge attributes with the neighborhood context term (or
/// the graph's fixed distance expansions), exponentiated query-key products
/// normalized per component over all nodes, gated messages, mean
/// aggregation plus the linear pass-through, and softmax attention pooling
/// after every layer.
pub fn naive_forward(model: &FinderModel<f64>, graph: &FormulaGraph<f64>) -> NaiveTrace {
    let ps = model.params();
    let cfg = model.config();
    let n = graph.node_count();
    let d = cfg.state_dim;
    let mut states: Vec<Vec<f64>> = (0..n).map(|i| graph.node_features.row(i).to_vec()).collect();

    let mut trace = NaiveTrace {
        layer_states: Vec::new(),
        layer_edges: Vec::new(),
        pooled: Vec::new(),
        embedding: vec![0.0; d],
    };

    for r in 0..cfg.message_passes {
        let (wints, wint) = weight(ps, &format!("layer{r}.w_int"));
        let neighbors: Vec<Vec<usize>> = {
            let mut nb = vec![Vec::new(); n];
            for &(i, j) in &graph.edges {
                nb[i].push(j);
            }
            nb
        };

        // context term of the edge-predictive function
        let context: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut c = vec![0.0; states[0].len()];
                if neighbors[i].is_empty() {
                    return c;
                }
                for &k in &neighbors[i] {
                    for (cc, val) in c.iter_mut().zip(
                        states[i]
                            .iter()
                            .zip(&states[k])
                            .map(|(a, b)| 0.5 * (a + b)),
                    ) {
                        *cc += val;
                    }
                }
                for v in c.iter_mut() {
                    *v /= neighbors[i].len() as f64;
                }
                c
            })
            .collect();

        let mut edge_attrs: Vec<Vec<f64>> = Vec::with_capacity(graph.edges.len());
        for (idx, &(i, j)) in graph.edges.iter().enumerate() {
            let pair: Vec<f64> = states[i]
                .iter()
                .zip(&states[j])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let e = match graph.domain {
                Domain::Formula => {
                    let mut input = pair.clone();
                    input.extend_from_slice(&context[i]);
                    naive_mlp(ps, &format!("layer{r}.phi_e"), 3, &input)
                }
                Domain::Crystal => graph
                    .edge_features
                    .as_ref()
                    .expect("crystal edges carry features")
                    .row(idx)
                    .to_vec(),
            };
            edge_attrs.push(e);
        }

        // element-wise self-attention, normalized over all N nodes
        let (fqs, fq) = weight(ps, &format!("layer{r}.f_q.w"));
        let (fks, fk) = weight(ps, &format!("layer{r}.f_k.w"));
        let (fvs, fv) = weight(ps, &format!("layer{r}.f_v.w"));
        let q: Vec<Vec<f64>> = states.iter().map(|s| matvec(&fqs, &fq, s)).collect();
        let k: Vec<Vec<f64>> = states.iter().map(|s| matvec(&fks, &fk, s)).collect();
        let v: Vec<Vec<f64>> = states.iter().map(|s| matvec(&fvs, &fv, s)).collect();
        let sqrt_dk = (d as f64).sqrt();
        let qk = |i: usize, l: usize, c: usize| ((q[i][c] * k[l][c]) / sqrt_dk).exp();

        let mut messages: Vec<Vec<f64>> = Vec::with_capacity(graph.edges.len());
        for (idx, &(i, j)) in graph.edges.iter().enumerate() {
            let pair: Vec<f64> = states[i]
                .iter()
                .zip(&states[j])
                .map(|(a, b)| 0.5 * (a + b))
                .collect();
            let mut input = pair;
            input.extend_from_slice(&edge_attrs[idx]);
            let m_raw = naive_mlp(ps, &format!("layer{r}.phi_m"), 3, &input);
            let mut m = vec![0.0; d];
            for c in 0..d {
                let denom: f64 = (0..n).map(|l| qk(i, l, c)).sum();
                let a = qk(i, j, c) / denom * v[j][c];
                m[c] = m_raw[c] * a;
            }
            messages.push(m);
        }

        let mut new_states: Vec<Vec<f64>> = Vec::with_capacity(n);
        for i in 0..n {
            let mut agg = vec![0.0; d];
            let mut count = 0usize;
            for (idx, &(a, _)) in graph.edges.iter().enumerate() {
                if a == i {
                    for (s, m) in agg.iter_mut().zip(&messages[idx]) {
                        *s += m;
                    }
                    count += 1;
                }
            }
            if count > 0 {
                for s in agg.iter_mut() {
                    *s /= count as f64;
                }
            }
            new_states.push(add(matvec(&wints, &wint, &states[i]), &agg));
        }
        states = new_states;
        trace.layer_states.push(states.clone());
        trace.layer_edges.push(edge_attrs);

        let pool_index = if cfg.ablation.no_residuals {
            if r + 1 != cfg.message_passes {
                continue;
            }
            0
        } else {
            r
        };
        let gates: Vec<f64> = states
            .iter()
            .map(|s| naive_mlp(ps, &format!("pool{pool_index}.gate"), 2, s)[0])
            .collect();
        let total: f64 = gates.iter().map(|g| g.exp()).sum();
        let mut pooled = vec![0.0; d];
        for (i, s) in states.iter().enumerate() {
            let w = gates[i].exp() / total;
            let t = naive_mlp(ps, &format!("pool{pool_index}.transform"), 2, s);
            for (p, tv) in pooled.iter_mut().zip(&t) {
                *p += w * tv;
            }
        }
        trace.pooled.push(pooled);
    }

    for p in &trace.pooled {
        for (e, v) in trace.embedding.iter_mut().zip(p) {
            *e += v;
        }
    }
    trace
}

/// Random fully connected formula-domain graph with arbitrary features.
pub fn random_formula_graph(rng: &mut ChaCha8Rng, max_nodes: usize, dim: usize) -> FormulaGraph<f64> {
    let n = rng.gen_range(1..=max_nodes);
    let data: Vec<f64> = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut edges = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push((i, j));
            }
        }
    }
    FormulaGraph {
        domain: Domain::Formula,
        node_features: Tensor::new(vec![n, dim], data).unwrap(),
        node_elements: vec![Element::from_symbol("Fe").unwrap(); n],
        edges,
        edge_features: None,
        warning: None,
    }
}

/// Random small crystal graph through the real builder, with a random
/// low-dimensional embedding table.
pub fn random_crystal_graph(rng: &mut ChaCha8Rng, max_sites: usize, dim: usize) -> FormulaGraph<f64> {
    let table = random_embedding(rng, dim);
    loop {
        let mut lattice = [[0.0; 3]; 3];
        for (k, row) in lattice.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = if c == k {
                    rng.gen_range(2.5..5.0)
                } else {
                    rng.gen_range(-0.4..0.4)
                };
            }
        }
        let n = rng.gen_range(1..=max_sites);
        let sites: Vec<_> = (0..n)
            .map(|k| {
                (
                    Element::from_atomic_number((k % 8 + 1) as u8).unwrap(),
                    [rng.gen::<f64>(), rng.gen::<f64>(), rng.gen::<f64>()],
                )
            })
            .collect();
        let s = CrystalStructure::new(lattice, sites).unwrap();
        let g = build_crystal_graph::<f64>(&s, &table, 4.0).unwrap();
        if g.edge_count() > 0 {
            return g;
        }
    }
}

pub fn random_embedding(rng: &mut ChaCha8Rng, dim: usize) -> finder::chem::ElementEmbeddingTable {
    let rows: Vec<(Element, Vec<f64>)> = (1..=8u8)
        .map(|z| {
            (
                Element::from_atomic_number(z).unwrap(),
                (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
        })
        .collect();
    finder::chem::ElementEmbeddingTable::from_rows(rows).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Training objective at fixed inputs: robust loss plus the weight-decay
/// term, as a plain function of the parameters.
pub fn loss_value(model: &FinderModel<f64>, graph: &FormulaGraph<f64>, target: &[f64]) -> f64 {
    let tape = finder::tensor::Tape::inference();
    let out = model.forward(&tape, graph).unwrap();
    let loss = finder::model::robust_loss(&tape, &[out], &[target.to_vec()]).unwrap();
    let data = tape.value(loss).data()[0];
    data + model.config().weight_decay * model.params().squared_norm()
}

/// Analytic gradient of the same objective for every parameter.
pub fn analytic_grads(
    model: &mut FinderModel<f64>,
    graph: &FormulaGraph<f64>,
    target: &[f64],
) -> Vec<Vec<f64>> {
    let grads = {
        let tape = finder::tensor::Tape::new();
        let out = model.forward(&tape, graph).unwrap();
        let loss = finder::model::robust_loss(&tape, &[out], &[target.to_vec()]).unwrap();
        tape.backward(loss).unwrap()
    };
    let decay = model.config().weight_decay;
    model.params_mut().zero_grad();
    model.params_mut().accumulate(&grads).unwrap();
    model.params_mut().add_decay_grads(decay).unwrap();
    (0..model.params().len())
        .map(|id| {
            model
                .params()
                .get(id)
                .tensor()
                .grad()
                .map(|g| g.to_vec())
                .unwrap_or_else(|| vec![0.0; model.params().get(id).tensor().numel()])
        })
        .collect()
}

/// Max relative error between analytic gradients and central finite
/// differences over every parameter of the model.
pub fn full_model_gradcheck(
    model: &mut FinderModel<f64>,
    graph: &FormulaGraph<f64>,
    target: &[f64],
    h: f64,
) -> f64 {
    let analytic = analytic_grads(model, graph, target);
    let mut worst = 0.0f64;
    for id in 0..model.params().len() {
        for k in 0..model.params().get(id).tensor().numel() {
            let orig = model.params().get(id).tensor().data()[k];
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig + h;
            let up = loss_value(model, graph, target);
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig - h;
            let down = loss_value(model, graph, target);
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[id][k];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}

/// Move every parameter to a generic point by adding small uniform noise.
/// Zero-initialized biases otherwise leave relu pre-activations sitting
/// exactly on the kink, where the subgradient convention (zero) and central
/// differences legitimately disagree.
pub fn jitter_params(model: &mut FinderModel<f64>, rng: &mut ChaCha8Rng, amplitude: f64) {
    for id in 0..model.params().len() {
        for v in model.params_mut().get_mut(id).tensor_mut().data_mut() {
            *v += rng.gen_range(-amplitude..amplitude);
        }
    }
}
