//! Deterministic synthetic data generators for benchmarks and smoke tests.
//!
//! The scalar task ties the target to a closed-form property (composition-
//! weighted mean electronegativity) so learnability is a property of the
//! model rather than of any external dataset. The dielectric generator emits
//! Drude-like spectra with composition-derived parameters.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chem::Element;
use crate::error::Result;
use crate::spectra::{grid_energy, SPECTRUM_POINTS};

/// Pauling electronegativities for a palette of common elements.
pub const ELECTRONEGATIVITY: &[(&str, f64)] = &[
    ("H", 2.20),
    ("Li", 0.98),
    ("Be", 1.57),
    ("B", 2.04),
    ("C", 2.55),
    ("N", 3.04),
    ("O", 3.44),
    ("F", 3.98),
    ("Na", 0.93),
    ("Mg", 1.31),
    ("Al", 1.61),
    ("Si", 1.90),
    ("P", 2.19),
    ("S", 2.58),
    ("Cl", 3.16),
    ("K", 0.82),
    ("Ca", 1.00),
    ("Ti", 1.54),
    ("V", 1.63),
    ("Cr", 1.66),
    ("Mn", 1.55),
    ("Fe", 1.83),
    ("Co", 1.88),
    ("Ni", 1.91),
    ("Cu", 1.90),
    ("Zn", 1.65),
    ("Ga", 1.81),
    ("Ge", 2.01),
    ("Sr", 0.95),
    ("Zr", 1.33),
    ("Nb", 1.60),
    ("Ag", 1.93),
    ("Sn", 1.96),
    ("Ba", 0.89),
    ("W", 2.36),
    ("Pb", 2.33),
];

pub fn electronegativity(el: Element) -> Option<f64> {
    ELECTRONEGATIVITY
        .iter()
        .find(|(s, _)| *s == el.symbol())
        .map(|(_, v)| *v)
}

/// Random small compositions (2..=4 distinct elements, counts 1..=3) with
/// target = composition-weighted mean electronegativity.
pub fn random_en_compositions(n: usize, seed: u64) -> Vec<(String, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let k = rng.gen_range(2..=4usize);
        let mut palette: Vec<usize> = (0..ELECTRONEGATIVITY.len()).collect();
        palette.shuffle(&mut rng);
        let mut formula = String::new();
        let mut weighted = 0.0;
        let mut atoms = 0.0;
        let mut picks: Vec<usize> = palette[..k].to_vec();
        picks.sort_unstable();
        for &p in &picks {
            let (sym, en) = ELECTRONEGATIVITY[p];
            let count = rng.gen_range(1..=3u32);
            formula.push_str(sym);
            if count > 1 {
                formula.push_str(&count.to_string());
            }
            weighted += en * count as f64;
            atoms += count as f64;
        }
        out.push((formula, weighted / atoms));
    }
    out
}

/// Single-oscillator Lorentzian dielectric pair with composition-derived
/// resonance, damping and strength:
/// `eps_re = 1 + S (w0^2 - w^2) / ((w0^2 - w^2)^2 + g^2 w^2)`,
/// `eps_im = S g w / ((w0^2 - w^2)^2 + g^2 w^2)`.
/// Bounded everywhere (like interband dielectric data) and strong enough
/// that the real part dips below zero above the resonance.
pub fn synthetic_dielectric(formula: &str) -> (Vec<f64>, Vec<f64>) {
    let mut hash = 1469598103934665603u64;
    for b in formula.bytes() {
        hash ^= b as u64;
        hash = hash.wrapping_mul(1099511628211);
    }
    let unit = |shift: u64| ((hash >> shift) % 997) as f64 / 997.0;
    let w0 = 2.0 + unit(0) * 6.0;
    let g = 0.3 + unit(10) * 0.9;
    let strength = (8.0 + unit(20) * 14.0) * w0 * g;
    let mut re = Vec::with_capacity(SPECTRUM_POINTS);
    let mut im = Vec::with_capacity(SPECTRUM_POINTS);
    for i in 0..SPECTRUM_POINTS {
        let w = grid_energy(i);
        let dw = w0 * w0 - w * w;
        let denom = dw * dw + g * g * w * w;
        re.push(1.0 + strength * dw / denom);
        im.push(strength * g * w / denom);
    }
    (re, im)
}

/// Write a scalar synthetic dataset in the standard dataset format.
pub fn write_en_dataset(path: &std::path::Path, n: usize, seed: u64) -> Result<()> {
    let mut out = String::from("composition,target\n");
    for (formula, target) in random_en_compositions(n, seed) {
        out.push_str(&format!("{formula},{target}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}
