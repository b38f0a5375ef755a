//! The train subcommand: single runs and sample-efficiency sweeps, with a
//! fully resolved config written next to the artifacts so any run can be
//! reproduced bit-for-bit from its directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use finder::chem::ElementEmbeddingTable;
use finder::dataset::{load_dataset, prepare_samples, PrepareOptions};
use finder::error::{Error, Result};
use finder::graph::Domain;
use finder::model::{save_bundle, Ablation, FinderConfig, FinderModel, TargetKind};
use finder::tensor::AdamConfig;
use finder::train::{
    evaluate, fit_target_normalizer, sample_efficiency_sweep, split_indices, train,
    write_history, Sample, SplitPreset, SplitRatios, StopReason, TrainConfig,
};

use crate::cli::TrainArgs;
use crate::io::write_metrics;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrepareConfig {
    pub max_denominator: u64,
    pub node_cap: usize,
    pub cutoff: f64,
}

/// Everything a run depends on; serialized as `config.json` in the run
/// directory and accepted back via `train --config`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// "one-hot" or a path to an embedding table file.
    pub embedding: String,
    pub model: FinderConfig,
    pub seed: u64,
    pub train: TrainConfig,
    pub prepare: PrepareConfig,
    pub train_sizes: Option<Vec<usize>>,
    pub format: String,
}

fn parse_domain(text: &str) -> Result<Domain> {
    match text {
        "formula" => Ok(Domain::Formula),
        "crystal" => Ok(Domain::Crystal),
        other => Err(Error::Config(format!("unknown domain '{other}'"))),
    }
}

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("bad {what} entry '{t}'")))
        })
        .collect()
}

fn load_embedding(spec: &str) -> Result<ElementEmbeddingTable> {
    if spec == "one-hot" {
        Ok(ElementEmbeddingTable::one_hot())
    } else {
        ElementEmbeddingTable::load(Path::new(spec))
    }
}

fn resolve(args: &TrainArgs) -> Result<RunConfig> {
    let domain = parse_domain(&args.domain)?;
    let dataset = args
        .dataset
        .clone()
        .ok_or_else(|| Error::Config("--dataset is required".into()))?;

    // the target kind comes from the data
    let records = load_dataset(&dataset)?;
    if records.is_empty() {
        return Err(Error::Config("dataset has no records".into()));
    }
    let target = match records[0].target {
        finder::dataset::TargetValue::Scalar(_) => TargetKind::Scalar,
        finder::dataset::TargetValue::Vector(_) => TargetKind::Spectrum,
    };

    let table = load_embedding(&args.embedding)?;
    let mut model = if args.compact {
        FinderConfig::compact(domain, target, table.dim())
    } else {
        FinderConfig::defaults(domain, target, table.dim())
    };
    model.message_passes = args.layers;
    if !args.compact {
        model.state_dim = args.state_dim;
    }
    model.node_cap = args.node_cap;
    if let Some(flags) = &args.ablation {
        for flag in flags.split(',').filter(|f| !f.trim().is_empty()) {
            Ablation::parse_flag(flag.trim())?(&mut model.ablation);
        }
    }
    model.validate()?;

    let split = match &args.split {
        Some(text) => {
            let parts: Vec<f64> = parse_list(text, "split ratio")?;
            if parts.len() != 3 {
                return Err(Error::Config("--split needs three ratios".into()));
            }
            SplitRatios::new(parts[0], parts[1], parts[2])?
        }
        None => SplitPreset::parse(&args.split_preset)?.ratios(),
    };

    let train = TrainConfig {
        batch_size: args.batch_size,
        max_epochs: args
            .max_epochs
            .unwrap_or(TrainConfig::for_domain(domain).max_epochs),
        patience: args.patience,
        adam: AdamConfig {
            base_lr: args.base_lr,
            decay: args.lr_decay,
            ..AdamConfig::default()
        },
        clip_threshold: args.clip,
        seed: args.seed,
        split,
    };

    let train_sizes = match &args.train_sizes {
        Some(text) => Some(parse_list::<usize>(text, "train size")?),
        None => None,
    };

    Ok(RunConfig {
        dataset,
        embedding: args.embedding.clone(),
        model,
        seed: args.seed,
        train,
        prepare: PrepareConfig {
            max_denominator: args.max_denominator,
            node_cap: args.node_cap,
            cutoff: args.cutoff,
        },
        train_sizes,
        format: match args.format.as_str() {
            "csv" | "json" => args.format.clone(),
            other => return Err(Error::Config(format!("unknown format '{other}'"))),
        },
    })
}

pub fn run(args: &TrainArgs) -> Result<i32> {
    let config = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("bad config file: {e}")))?
        }
        None => resolve(args)?,
    };
    std::fs::create_dir_all(&args.run_dir)?;
    std::fs::write(
        args.run_dir.join("config.json"),
        serde_json::to_string_pretty(&config).expect("config serializes"),
    )?;

    let records = load_dataset(&config.dataset)?;
    let table = load_embedding(&config.embedding)?;
    let options = PrepareOptions {
        domain: config.model.domain,
        max_denominator: config.prepare.max_denominator,
        node_cap: config.prepare.node_cap,
        cutoff: config.prepare.cutoff,
    };
    let base_dir = config
        .dataset
        .parent()
        .unwrap_or(Path::new("."))
        .to_path_buf();
    let samples: Vec<Sample<f32>> = prepare_samples(&records, &table, &options, &base_dir)?;

    let (tr, va, te) = split_indices(samples.len(), &config.train.split, config.seed)?;
    let train_set: Vec<Sample<f32>> = tr.iter().map(|&i| samples[i].clone()).collect();
    let val_set: Vec<Sample<f32>> = va.iter().map(|&i| samples[i].clone()).collect();
    let test_set: Vec<Sample<f32>> = te.iter().map(|&i| samples[i].clone()).collect();

    if let Some(sizes) = &config.train_sizes {
        let (points, slope) = sample_efficiency_sweep(
            &config.model,
            config.seed,
            &train_set,
            &val_set,
            &test_set,
            sizes,
            &config.train,
        )?;
        let mut out = String::from("train_size,test_mae\n");
        for p in &points {
            out.push_str(&format!("{},{}\n", p.train_size, p.test_mae));
        }
        std::fs::write(args.run_dir.join("sweep.csv"), out)?;
        let summary = match slope {
            Some(m) => {
                std::fs::write(args.run_dir.join("sweep_slope.txt"), format!("{m}\n"))?;
                format!("sweep complete: {} points, log-log slope {m:.4}", points.len())
            }
            None => format!("sweep complete: {} points", points.len()),
        };
        std::fs::write(args.run_dir.join("run.log"), format!("{summary}\n"))?;
        println!("{summary}");
        return Ok(0);
    }

    let normalizer = fit_target_normalizer(&train_set)?;
    let mut model = FinderModel::<f32>::new(config.model.clone(), config.seed)?;
    let result = train(&mut model, &train_set, &val_set, &normalizer, &config.train)?;
    write_history(&args.run_dir.join("history.csv"), &result.history)?;
    save_bundle(
        &args.run_dir.join("checkpoint.ck"),
        &model,
        &table,
        Some((normalizer.mean, normalizer.std)),
    )?;
    let metrics = evaluate(&model, &test_set, &normalizer)?;
    let json = config.format == "json";
    write_metrics(
        &args.run_dir.join(if json { "metrics.json" } else { "metrics.csv" }),
        &metrics,
        json,
    )?;
    let flags = config.model.ablation.active_flags();
    let summary = format!(
        "domain {} target {:?}{}; trained {} epochs (best epoch {}, val MAE {:.6}); test MAE {:.6}, RMSE {:.6}, R2 {:.4}, MAD:MAE {:.2}",
        config.model.domain,
        config.model.target,
        if flags.is_empty() {
            String::new()
        } else {
            format!(" ablations [{}]", flags.join(","))
        },
        result.history.len(),
        result.best_epoch,
        result.best_val_mae,
        metrics.mae,
        metrics.rmse,
        metrics.r2,
        metrics.mad_mae
    );
    std::fs::write(args.run_dir.join("run.log"), format!("{summary}\n"))?;
    println!("{summary}");
    if result.stop == StopReason::NonFiniteLoss {
        eprintln!("error: training aborted on a non-finite loss; best checkpoint retained");
        return Ok(3);
    }
    Ok(0)
}
