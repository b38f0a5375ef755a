//! The compare subcommand: pooled two-sample t-test between two sets of
//! per-run metric values.

use finder::error::Result;
use finder::train::{summarize_runs, two_sample_t_test};

use crate::cli::CompareArgs;
use crate::io::read_run_values;

pub fn run(args: &CompareArgs) -> Result<i32> {
    let a = read_run_values(&args.runs_a)?;
    let b = read_run_values(&args.runs_b)?;
    let (mean_a, std_a, n_a) = summarize_runs(&a)?;
    let (mean_b, std_b, n_b) = summarize_runs(&b)?;
    let result = two_sample_t_test(mean_a, std_a, n_a, mean_b, std_b, n_b)?;
    if let Some(w) = &result.warning {
        eprintln!("warning: {w}");
    }
    match args.format.as_str() {
        "json" => {
            let doc = serde_json::json!({
                "t": result.t,
                "p": result.p,
                "group_a": { "mean": mean_a, "std": std_a, "n": n_a },
                "group_b": { "mean": mean_b, "std": std_b, "n": n_b },
            });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        _ => {
            println!("t,p,mean_a,std_a,n_a,mean_b,std_b,n_b");
            println!(
                "{},{},{},{},{},{},{},{}",
                result.t, result.p, mean_a, std_a, n_a, mean_b, std_b, n_b
            );
        }
    }
    Ok(0)
}
