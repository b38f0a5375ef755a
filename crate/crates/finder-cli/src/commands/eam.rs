//! The export-eam subcommand: write the per-pair edge-attribute summary
//! matrix of one composition.

use finder::chem::{parse_formula, to_integer_formula};
use finder::error::Result;
use finder::graph::build_formula_graph;
use finder::model::{load_bundle, ModelBundle};

use crate::cli::EamArgs;

pub fn run(args: &EamArgs) -> Result<i32> {
    let bundle: ModelBundle<f32> = load_bundle(&args.checkpoint)?;
    let cfg = bundle.model.config();
    let comp = parse_formula(&args.composition)?;
    let formula = to_integer_formula(&comp, 12, cfg.node_cap)?;
    let graph = build_formula_graph::<f32>(&formula, &bundle.embedding)?;
    let layer = args.layer.unwrap_or(cfg.message_passes - 1);
    let eam = bundle.model.export_eam(&graph, layer)?;

    let n = graph.node_count();
    let labels: Vec<&str> = graph.node_elements.iter().map(|e| e.symbol()).collect();
    let mut out = format!("# nodes: {}\n", labels.join(" "));
    for i in 0..n {
        let row: Vec<String> = eam.row(i).iter().map(|v| v.to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(&args.out, out)?;
    println!(
        "wrote {n}x{n} edge attribute matrix for {} (layer {layer})",
        args.composition
    );
    Ok(0)
}
