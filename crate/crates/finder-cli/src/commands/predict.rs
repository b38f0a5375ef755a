//! The predict subcommand: per-row predictions with denormalized means and
//! aleatoric uncertainties; bad rows warn and are skipped.

use finder::chem::{parse_formula, to_integer_formula};
use finder::error::{Error, Result};
use finder::graph::{build_crystal_graph, build_formula_graph, CrystalStructure, Domain};
use finder::model::{load_bundle, ModelBundle, TargetKind};
use finder::tensor::Tape;
use finder::train::Normalizer;

use crate::cli::PredictArgs;
use crate::io::read_prediction_rows;

pub fn run(args: &PredictArgs) -> Result<i32> {
    let bundle: ModelBundle<f32> = load_bundle(&args.checkpoint)?;
    let normalizer = bundle
        .normalizer
        .map(|(m, s)| Normalizer::from_constants(m, s))
        .transpose()?
        .ok_or_else(|| Error::Config("checkpoint carries no normalizer constants".into()))?;
    let (rows, has_structures) = read_prediction_rows(&args.input)?;
    let base_dir = args.input.parent().unwrap_or(std::path::Path::new("."));
    let cfg = bundle.model.config();
    if cfg.domain == Domain::Crystal && !has_structures {
        return Err(Error::Config(
            "crystal-domain checkpoint needs input with a structure_file column".into(),
        ));
    }

    let mut out = String::new();
    let mut emb_out = String::new();
    match cfg.target {
        TargetKind::Scalar => out.push_str("composition,prediction,uncertainty\n"),
        TargetKind::Spectrum => out.push_str("composition,part,values\n"),
    }
    emb_out.push_str("composition,embedding\n");

    let mut ok_rows = 0usize;
    for row in &rows {
        let graph = match cfg.domain {
            Domain::Formula => parse_formula(&row.composition)
                .and_then(|c| to_integer_formula(&c, 12, cfg.node_cap))
                .and_then(|f| build_formula_graph::<f32>(&f, &bundle.embedding)),
            Domain::Crystal => match &row.structure_file {
                Some(rel) => CrystalStructure::load(&base_dir.join(rel))
                    .and_then(|s| build_crystal_graph::<f32>(&s, &bundle.embedding, 4.0)),
                None => Err(Error::Config(format!(
                    "crystal-domain checkpoint needs a structure_file for '{}'",
                    row.composition
                ))),
            },
        };
        let graph = match graph {
            Ok(g) => g,
            Err(e) => {
                eprintln!("warning: skipping '{}': {e}", row.composition);
                continue;
            }
        };
        let tape = Tape::inference();
        let (output, trace) = match bundle.model.forward_traced(&tape, &graph) {
            Ok(x) => x,
            Err(e) => {
                eprintln!("warning: skipping '{}': {e}", row.composition);
                continue;
            }
        };
        let mean = tape.value(output.mean);
        let log_scale = tape.value(output.log_scale);
        match cfg.target {
            TargetKind::Scalar => {
                let pred = normalizer.denormalize(mean.data()[0] as f64);
                let unc = (log_scale.data()[0] as f64).exp() * normalizer.std;
                out.push_str(&format!("{},{},{}\n", row.composition, pred, unc));
            }
            TargetKind::Spectrum => {
                let preds: Vec<String> = mean
                    .data()
                    .iter()
                    .map(|&m| normalizer.denormalize(m as f64).to_string())
                    .collect();
                let uncs: Vec<String> = log_scale
                    .data()
                    .iter()
                    .map(|&s| ((s as f64).exp() * normalizer.std).to_string())
                    .collect();
                out.push_str(&format!("{},mean,{}\n", row.composition, preds.join(";")));
                out.push_str(&format!(
                    "{},uncertainty,{}\n",
                    row.composition,
                    uncs.join(";")
                ));
            }
        }
        if args.embeddings_out.is_some() {
            let emb: Vec<String> = trace
                .embedding
                .data()
                .iter()
                .map(|v| v.to_string())
                .collect();
            emb_out.push_str(&format!("{},{}\n", row.composition, emb.join(";")));
        }
        ok_rows += 1;
    }

    std::fs::write(&args.out, out)?;
    if let Some(path) = &args.embeddings_out {
        std::fs::write(path, emb_out)?;
    }
    println!("predicted {ok_rows} of {} rows", rows.len());
    Ok(0)
}
