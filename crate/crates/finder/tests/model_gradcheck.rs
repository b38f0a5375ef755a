//! Full-model gradient verification: analytic gradients of the robust loss
//! (weight decay included) against central finite differences at f64.

mod common;

use common::{full_model_gradcheck, jitter_params, random_crystal_graph, random_formula_graph, seeded};
use finder::graph::Domain;
use finder::model::{Ablation, FinderConfig, FinderModel, TargetKind};

fn tiny_config(domain: Domain, embed_dim: usize) -> FinderConfig {
    FinderConfig {
        message_passes: 2,
        state_dim: 6,
        embed_dim,
        phi_hidden: (5, 4),
        pool_hidden: 5,
        conv_filters: 2,
        conv_kernel: 3,
        post_dense: vec![8, 8],
        node_cap: 64,
        weight_decay: 1e-6,
        domain,
        target: TargetKind::Scalar,
        ablation: Ablation::default(),
    }
}

#[test]
fn formula_model_gradients_match_finite_differences() {
    let mut model = FinderModel::<f64>::new(tiny_config(Domain::Formula, 5), 311).unwrap();
    let mut rng = seeded(71);
    jitter_params(&mut model, &mut rng, 0.05);
    let graph = loop {
        let g = random_formula_graph(&mut rng, 3, 5);
        if g.node_count() == 3 {
            break g;
        }
    };
    let worst = full_model_gradcheck(&mut model, &graph, &[0.37], 1e-5);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn crystal_model_gradients_match_finite_differences() {
    let mut model = FinderModel::<f64>::new(tiny_config(Domain::Crystal, 5), 303).unwrap();
    let mut rng = seeded(63);
    jitter_params(&mut model, &mut rng, 0.05);
    let graph = loop {
        let g = random_crystal_graph(&mut rng, 2, 5);
        if g.node_count() == 2 {
            break g;
        }
    };
    let worst = full_model_gradcheck(&mut model, &graph, &[-0.8], 1e-5);
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn ablated_model_gradients_match_finite_differences() {
    // every structural variant takes its own forward path; check each
    for (i, flag) in [
        "soft_attention",
        "no_self_attention",
        "no_residuals",
        "sum_pool",
        "no_post_net",
    ]
    .iter()
    .enumerate()
    {
        let mut cfg = tiny_config(Domain::Formula, 5);
        Ablation::parse_flag(flag).unwrap()(&mut cfg.ablation);
        let mut model = FinderModel::<f64>::new(cfg, 305 + i as u64).unwrap();
        let mut rng = seeded(79 + i as u64);
        jitter_params(&mut model, &mut rng, 0.05);
        let graph = random_formula_graph(&mut rng, 3, 5);
        let worst = full_model_gradcheck(&mut model, &graph, &[0.1], 1e-5);
        assert!(worst < 1e-4, "{flag}: max relative error {worst}");
    }
}

#[test]
fn spectrum_model_gradients_match_on_sampled_params() {
    // the spectrum head is wide; check a slice of parameters end to end
    let mut cfg = tiny_config(Domain::Formula, 5);
    cfg.target = TargetKind::Spectrum;
    let mut model = FinderModel::<f64>::new(cfg, 304).unwrap();
    let mut rng = seeded(73);
    jitter_params(&mut model, &mut rng, 0.05);
    let graph = random_formula_graph(&mut rng, 3, 5);
    let target: Vec<f64> = (0..3000).map(|i| ((i as f64) * 0.01).sin()).collect();

    let analytic = common::analytic_grads(&mut model, &graph, &target);
    let h = 1e-5;
    let mut checked = 0;
    for id in 0..model.params().len() {
        let numel = model.params().get(id).tensor().numel();
        for k in (0..numel).step_by(numel / 4 + 1) {
            let orig = model.params().get(id).tensor().data()[k];
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig + h;
            let up = common::loss_value(&model, &graph, &target);
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig - h;
            let down = common::loss_value(&model, &graph, &target);
            model.params_mut().get_mut(id).tensor_mut().data_mut()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[id][k];
            // gradients below 1e-4 are compared absolutely; central
            // differences carry ~1e-10 cancellation noise at this h
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-4);
            assert!(rel < 1e-4, "param {id}[{k}]: {a} vs {numeric}");
            checked += 1;
        }
    }
    assert!(checked > 50);
}
