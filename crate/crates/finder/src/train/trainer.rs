//! The training loop: shuffled mini-batches, robust loss with weight decay,
//! gradient clipping, Adam with per-iteration learning-rate decay,
//! validation-MAE model selection and early stopping.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Domain, FormulaGraph};
use crate::model::{robust_loss, FinderModel};
use crate::par;
use crate::tensor::{AdamConfig, AdamState, Scalar, Tape};
use crate::train::metrics::{compute_metrics, Metrics};
use crate::train::normalize::Normalizer;
use crate::train::split::{SplitPreset, SplitRatios};

/// One material ready for the model: graph plus target in original units.
#[derive(Debug, Clone)]
pub struct Sample<T: Scalar> {
    pub id: String,
    pub graph: FormulaGraph<T>,
    pub target: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Early-stopping patience on validation MAE, in epochs.
    pub patience: usize,
    pub adam: AdamConfig,
    pub clip_threshold: f64,
    pub seed: u64,
    pub split: SplitRatios,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            max_epochs: 500,
            patience: 50,
            adam: AdamConfig::default(),
            clip_threshold: 1.0,
            seed: 0,
            split: SplitPreset::Standard.ratios(),
        }
    }
}

impl TrainConfig {
    /// Domain defaults: structure-based models take about twice the epochs
    /// to converge.
    pub fn for_domain(domain: Domain) -> Self {
        TrainConfig {
            max_epochs: match domain {
                Domain::Formula => 500,
                Domain::Crystal => 1000,
            },
            ..TrainConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxEpochs,
    EarlyStop,
    /// Training aborted on a non-finite loss; the best checkpoint so far is
    /// retained in the model.
    NonFiniteLoss,
}

#[derive(Debug, Clone, Copy)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mae: f64,
    pub lr: f64,
}

#[derive(Debug)]
pub struct TrainResult {
    pub history: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_mae: f64,
    pub stop: StopReason,
}

/// Train in place; on return the model holds the parameters of the epoch
/// with the lowest validation MAE.
pub fn train<T: Scalar>(
    model: &mut FinderModel<T>,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    normalizer: &Normalizer,
    cfg: &TrainConfig,
) -> Result<TrainResult> {
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::Config("train and validation sets must be non-empty".into()));
    }
    if cfg.batch_size == 0 || cfg.max_epochs == 0 {
        return Err(Error::Config("batch_size and max_epochs must be positive".into()));
    }
    let decay = model.config().weight_decay;
    let width = model.config().target.output_width();
    for s in train_set.iter().chain(val_set) {
        if s.target.len() != width {
            return Err(Error::Config(format!(
                "sample '{}' target width {} does not match model output width {width}",
                s.id,
                s.target.len()
            )));
        }
    }

    let mut adam = AdamState::new(model.params(), cfg.adam);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut history = Vec::new();
    let mut best_snapshot = snapshot(model);
    let mut best_val_mae = f64::INFINITY;
    let mut best_epoch = 0usize;
    let mut stop = StopReason::MaxEpochs;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    'training: for epoch in 0..cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            // per-sample forward/backward passes run on independent tapes,
            // possibly in parallel; gradients reduce in index order so the
            // step is identical with and without the parallel feature
            let inv_b = T::from_f64(1.0 / batch.len() as f64);
            let mut data_term = 0.0;
            model.params_mut().zero_grad();
            let mut aborted = false;
            for sub in batch.chunks(crate::par::width().max(1)) {
                let shards = par::map(sub, |&i| -> Result<(crate::tensor::GradMap<T>, f64)> {
                    let s = &train_set[i];
                    let tape = Tape::new();
                    let out = model.forward(&tape, &s.graph)?;
                    let target: Vec<T> = s
                        .target
                        .iter()
                        .map(|&y| T::from_f64(normalizer.normalize(y)))
                        .collect();
                    let loss = robust_loss(&tape, &[out], &[target])?;
                    let value = tape.value(loss).data()[0].as_f64();
                    let grads = tape.backward(loss)?;
                    Ok((grads, value))
                });
                for shard in shards {
                    match shard {
                        Ok((grads, value)) => {
                            data_term += value;
                            model.params_mut().accumulate_scaled(&grads, inv_b)?;
                        }
                        Err(Error::NonFinite { .. }) => {
                            aborted = true;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if aborted {
                    break;
                }
            }
            if aborted {
                stop = StopReason::NonFiniteLoss;
                break 'training;
            }
            let batch_loss = data_term / batch.len() as f64
                + decay * model.params().squared_norm().as_f64();
            if !batch_loss.is_finite() {
                stop = StopReason::NonFiniteLoss;
                break 'training;
            }
            model.params_mut().add_decay_grads(T::from_f64(decay))?;
            model.params_mut().clip_gradients(T::from_f64(cfg.clip_threshold));
            adam.step(model.params_mut())?;
            loss_sum += batch_loss * batch.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let val_mae = validation_mae(model, val_set, normalizer);
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_mae,
            lr: adam.effective_lr(),
        });
        if val_mae < best_val_mae {
            best_val_mae = val_mae;
            best_epoch = epoch;
            best_snapshot = snapshot(model);
        } else if epoch - best_epoch >= cfg.patience {
            stop = StopReason::EarlyStop;
            break;
        }
    }

    restore(model, &best_snapshot);
    Ok(TrainResult {
        history,
        best_epoch,
        best_val_mae,
        stop,
    })
}

fn snapshot<T: Scalar>(model: &FinderModel<T>) -> Vec<Vec<T>> {
    model
        .params()
        .iter()
        .map(|(_, p)| p.tensor().data().to_vec())
        .collect()
}

fn restore<T: Scalar>(model: &mut FinderModel<T>, snapshot: &[Vec<T>]) {
    for (id, data) in snapshot.iter().enumerate() {
        model
            .params_mut()
            .get_mut(id)
            .tensor_mut()
            .data_mut()
            .copy_from_slice(data);
    }
}

/// Mean absolute error in original units. Per-sample forwards run in
/// parallel; the reduction happens sequentially in index order so the value
/// is identical with and without the parallel feature.
pub fn validation_mae<T: Scalar>(
    model: &FinderModel<T>,
    samples: &[Sample<T>],
    normalizer: &Normalizer,
) -> f64 {
    let errors = par::map(samples, |s| {
        let out = model.predict(&s.graph).expect("validated sample");
        let mut err = 0.0;
        for (k, &y) in s.target.iter().enumerate() {
            let pred = normalizer.denormalize(out.mean[k].as_f64());
            err += (y - pred).abs();
        }
        err / s.target.len() as f64
    });
    errors.iter().sum::<f64>() / samples.len() as f64
}

/// Full test-set evaluation with denormalized predictions and per-sample
/// aleatoric uncertainties in original units.
pub fn evaluate<T: Scalar>(
    model: &FinderModel<T>,
    test_set: &[Sample<T>],
    normalizer: &Normalizer,
) -> Result<Metrics> {
    if test_set.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty test set".into()));
    }
    let rows = par::map(test_set, |s| {
        let out = model.predict(&s.graph).expect("validated sample");
        let preds: Vec<f64> = out
            .mean
            .iter()
            .map(|&m| normalizer.denormalize(m.as_f64()))
            .collect();
        let uncertainty = out
            .log_scale
            .iter()
            .map(|&s| s.as_f64().exp() * normalizer.std)
            .sum::<f64>()
            / out.log_scale.len() as f64;
        (preds, uncertainty)
    });
    let ids: Vec<String> = test_set.iter().map(|s| s.id.clone()).collect();
    let truth: Vec<Vec<f64>> = test_set.iter().map(|s| s.target.clone()).collect();
    let preds: Vec<Vec<f64>> = rows.iter().map(|(p, _)| p.clone()).collect();
    let unc: Vec<f64> = rows.iter().map(|(_, u)| *u).collect();
    compute_metrics(&ids, &truth, &preds, &unc)
}

/// History file: delimited text with one row per epoch.
pub fn write_history(path: &std::path::Path, history: &[EpochRecord]) -> Result<()> {
    let mut out = String::from("epoch,train_loss,val_mae,lr\n");
    for r in history {
        out.push_str(&format!("{},{},{},{}\n", r.epoch, r.train_loss, r.val_mae, r.lr));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// One point of the sample-efficiency sweep.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub train_size: usize,
    pub test_mae: f64,
}

/// Train a fresh model per training-set size (seeded subsample of the full
/// training set) and evaluate each on the same test set. Returns the points
/// and the fitted log-log slope when at least two sizes are given.
pub fn sample_efficiency_sweep<T: Scalar>(
    config: &crate::model::FinderConfig,
    model_seed: u64,
    train_set: &[Sample<T>],
    val_set: &[Sample<T>],
    test_set: &[Sample<T>],
    sizes: &[usize],
    cfg: &TrainConfig,
) -> Result<(Vec<SweepPoint>, Option<f64>)> {
    let mut points = Vec::with_capacity(sizes.len());
    for (k, &size) in sizes.iter().enumerate() {
        if size == 0 || size > train_set.len() {
            return Err(Error::Config(format!(
                "sweep size {size} outside 1..={}",
                train_set.len()
            )));
        }
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(k as u64));
        order.shuffle(&mut rng);
        let subset: Vec<Sample<T>> = order[..size].iter().map(|&i| train_set[i].clone()).collect();
        let normalizer = fit_target_normalizer(&subset)?;
        let mut model = FinderModel::<T>::new(config.clone(), model_seed)?;
        train(&mut model, &subset, val_set, &normalizer, cfg)?;
        let metrics = evaluate(&model, test_set, &normalizer)?;
        points.push(SweepPoint {
            train_size: size,
            test_mae: metrics.mae,
        });
    }
    let slope = if points.len() >= 2 {
        let sizes: Vec<f64> = points.iter().map(|p| p.train_size as f64).collect();
        let maes: Vec<f64> = points.iter().map(|p| p.test_mae).collect();
        crate::train::metrics::fit_power_law(&sizes, &maes)
            .ok()
            .map(|(m, _)| m)
    } else {
        None
    };
    Ok((points, slope))
}

/// Normalizer over every target entry of the given samples.
pub fn fit_target_normalizer<T: Scalar>(samples: &[Sample<T>]) -> Result<Normalizer> {
    Normalizer::fit(samples.iter().flat_map(|s| s.target.iter().copied()))
}
