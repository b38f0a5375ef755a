//! The screen-enz subcommand: predict (or ingest) dielectric spectra per
//! candidate, apply the crossover/loss/stability filters and write the
//! sorted report plus the element co-occurrence network.

use std::path::Path;

use finder::chem::parse_formula;
use finder::error::{Error, Result};
use finder::graph::{build_formula_graph, Domain};
use finder::model::{load_bundle, ModelBundle, TargetKind};
use finder::spectra::{cooccurrence, resample, screen, ScreenInput, Spectrum, SpectrumKind};
use finder::train::Normalizer;

use crate::cli::ScreenArgs;
use crate::io::{read_candidates, read_raw_spectrum, CandidateRow};

fn spectrum_model(path: &Path) -> Result<(ModelBundle<f32>, Normalizer)> {
    let bundle: ModelBundle<f32> = load_bundle(path)?;
    if bundle.model.config().target != TargetKind::Spectrum {
        return Err(Error::Config(format!(
            "{} is not a spectrum model",
            path.display()
        )));
    }
    if bundle.model.config().domain != Domain::Formula {
        return Err(Error::Config(
            "screening predicts from composition; use a formula-domain checkpoint".into(),
        ));
    }
    let normalizer = bundle
        .normalizer
        .map(|(m, s)| Normalizer::from_constants(m, s))
        .transpose()?
        .ok_or_else(|| Error::Config("spectrum checkpoint carries no normalizer".into()))?;
    Ok((bundle, normalizer))
}

fn predicted_spectrum(
    bundle: &ModelBundle<f32>,
    normalizer: &Normalizer,
    kind: SpectrumKind,
    composition: &str,
) -> Result<Spectrum> {
    let comp = parse_formula(composition)?;
    let formula =
        finder::chem::to_integer_formula(&comp, 12, bundle.model.config().node_cap)?;
    let graph = build_formula_graph::<f32>(&formula, &bundle.embedding)?;
    let out = bundle.model.predict(&graph)?;
    let values: Vec<f64> = out
        .mean
        .iter()
        .map(|&m| normalizer.denormalize(m as f64))
        .collect();
    Spectrum::new(kind, values)
}

pub fn run(args: &ScreenArgs) -> Result<i32> {
    let rows = read_candidates(&args.candidates)?;
    let base_dir = args.candidates.parent().unwrap_or(Path::new("."));

    let models = if args.use_provided_spectra {
        None
    } else {
        let re = args
            .re_checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("--re-checkpoint is required".into()))?;
        let im = args
            .im_checkpoint
            .as_ref()
            .ok_or_else(|| Error::Config("--im-checkpoint is required".into()))?;
        Some((spectrum_model(re)?, spectrum_model(im)?))
    };

    let mut inputs = Vec::with_capacity(rows.len());
    for row in &rows {
        match build_input(row, base_dir, &models) {
            Ok(input) => inputs.push(input),
            Err(e) => eprintln!("warning: skipping '{}': {e}", row.composition),
        }
    }

    let report = screen(&inputs);
    for skipped in &report.skipped_missing_ehull {
        eprintln!("warning: '{skipped}' skipped: no e_hull_meV value");
    }

    let json = match args.format.as_str() {
        "csv" => false,
        "json" => true,
        other => return Err(Error::Config(format!("unknown format '{other}'"))),
    };
    if json {
        let cands: Vec<serde_json::Value> = report
            .candidates
            .iter()
            .map(|c| {
                serde_json::json!({
                    "composition": c.label,
                    "crossover_ev": c.crossover_ev,
                    "eps_im_at_crossover": c.eps_im_at_crossover,
                    "e_hull_meV": c.e_hull_mev,
                    "extra_crossings": c.extra_crossings,
                })
            })
            .collect();
        std::fs::write(
            &args.out,
            serde_json::to_string_pretty(&serde_json::json!({ "candidates": cands })).unwrap(),
        )?;
    } else {
        let mut out = String::from("composition,crossover_ev,eps_im_at_crossover,e_hull_meV\n");
        for c in &report.candidates {
            out.push_str(&format!(
                "{},{},{},{}\n",
                c.label, c.crossover_ev, c.eps_im_at_crossover, c.e_hull_mev
            ));
        }
        std::fs::write(&args.out, out)?;
    }

    let comps: Vec<finder::chem::Composition> = report
        .candidates
        .iter()
        .map(|c| c.composition.clone())
        .collect();
    let network = cooccurrence(&comps, args.min_pair_count);
    if let Some(path) = &args.cooccurrence_out {
        let mut out = String::from("element_a,element_b,count\n");
        for ((a, b), count) in network.edges() {
            out.push_str(&format!("{},{},{}\n", a.symbol(), b.symbol(), count));
        }
        std::fs::write(path, out)?;
    }

    println!(
        "screened {} candidates: {} pass, {} skipped, {} element pairs at min count {}",
        rows.len(),
        report.candidates.len(),
        report.skipped_missing_ehull.len(),
        network.len(),
        args.min_pair_count
    );
    Ok(0)
}

fn build_input(
    row: &CandidateRow,
    base_dir: &Path,
    models: &Option<((ModelBundle<f32>, Normalizer), (ModelBundle<f32>, Normalizer))>,
) -> Result<ScreenInput> {
    let composition = parse_formula(&row.composition)?;
    let (eps_re, eps_im) = match models {
        Some(((re_bundle, re_norm), (im_bundle, im_norm))) => (
            predicted_spectrum(re_bundle, re_norm, SpectrumKind::EpsRe, &row.composition)?,
            predicted_spectrum(im_bundle, im_norm, SpectrumKind::EpsIm, &row.composition)?,
        ),
        None => {
            let re_path = row.eps_re_file.as_ref().ok_or_else(|| {
                Error::Config("provided-spectra mode needs an eps_re_file column".into())
            })?;
            let im_path = row.eps_im_file.as_ref().ok_or_else(|| {
                Error::Config("provided-spectra mode needs an eps_im_file column".into())
            })?;
            (
                resample(SpectrumKind::EpsRe, &read_raw_spectrum(&base_dir.join(re_path))?)?,
                resample(SpectrumKind::EpsIm, &read_raw_spectrum(&base_dir.join(im_path))?)?,
            )
        }
    };
    Ok(ScreenInput {
        label: row.composition.clone(),
        composition,
        eps_re,
        eps_im,
        e_hull_mev: row.e_hull_mev,
    })
}
