//! Write a synthetic scalar dataset (composition-weighted mean
//! electronegativity targets) in the standard dataset format.
//!
//! Usage: cargo run -p finder --example gen_dataset -- <out.csv> [count] [seed]

fn main() {
    let mut args = std::env::args().skip(1);
    let out = args.next().unwrap_or_else(|| "en.csv".to_string());
    let count: usize = args.next().map(|v| v.parse().expect("count")).unwrap_or(2000);
    let seed: u64 = args.next().map(|v| v.parse().expect("seed")).unwrap_or(7);
    finder::synth::write_en_dataset(std::path::Path::new(&out), count, seed).unwrap();
    println!("wrote {count} samples to {out}");
}
