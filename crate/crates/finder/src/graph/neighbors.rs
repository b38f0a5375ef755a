//! Periodic neighbor list under a cutoff radius.

use crate::error::Result;
use crate::graph::structure::{frac_to_cart, inverse, CrystalStructure};

/// All ordered site pairs `(i, j, d_ij)` with `0 < d_ij < cutoff`, counting
/// every periodic image of `j` separately (multi-edges are kept). The image
/// search spans every lattice translation whose offset could fall inside the
/// cutoff; the bound comes from the rows of the inverse lattice.
pub fn neighbor_list(s: &CrystalStructure, cutoff: f64) -> Result<Vec<(usize, usize, f64)>> {
    let lattice = s.lattice();
    let inv = inverse(lattice)?;
    // |n_k| <= cutoff * ||column k of L^-1|| + 1 for any in-cell pair
    let mut range = [0i64; 3];
    for k in 0..3 {
        let norm = (inv[0][k] * inv[0][k] + inv[1][k] * inv[1][k] + inv[2][k] * inv[2][k]).sqrt();
        range[k] = (cutoff * norm + 1.0).floor() as i64;
    }

    let carts: Vec<[f64; 3]> = (0..s.site_count()).map(|i| s.cartesian(i)).collect();
    let cutoff2 = cutoff * cutoff;
    let mut pairs = Vec::new();
    for (i, ri) in carts.iter().enumerate() {
        for (j, rj) in carts.iter().enumerate() {
            for na in -range[0]..=range[0] {
                for nb in -range[1]..=range[1] {
                    for nc in -range[2]..=range[2] {
                        let shift =
                            frac_to_cart(lattice, &[na as f64, nb as f64, nc as f64]);
                        let dx = rj[0] + shift[0] - ri[0];
                        let dy = rj[1] + shift[1] - ri[1];
                        let dz = rj[2] + shift[2] - ri[2];
                        let d2 = dx * dx + dy * dy + dz * dz;
                        if d2 > 0.0 && d2 < cutoff2 {
                            pairs.push((i, j, d2.sqrt()));
                        }
                    }
                }
            }
        }
    }
    Ok(pairs)
}
