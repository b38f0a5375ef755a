//! Gaussian expansion of interatomic distances.

/// Number of basis centers (also the crystal edge-attribute width).
pub const GAUSSIAN_CENTERS: usize = 20;

/// Upper end of the center range in angstroms.
pub const GAUSSIAN_SPAN: f64 = 5.0;

/// Basis width sigma.
pub const GAUSSIAN_SIGMA: f64 = 0.5;

/// Center `k` at `5k/19` for `k = 0..19`.
pub fn gaussian_center(k: usize) -> f64 {
    GAUSSIAN_SPAN * k as f64 / (GAUSSIAN_CENTERS - 1) as f64
}

/// Expand a distance into `exp(-(d - r0_k)^2 / sigma^2)` over the 20
/// equidistant centers.
pub fn gaussian_expand(d: f64) -> [f64; GAUSSIAN_CENTERS] {
    let mut out = [0.0; GAUSSIAN_CENTERS];
    let inv_s2 = 1.0 / (GAUSSIAN_SIGMA * GAUSSIAN_SIGMA);
    for (k, v) in out.iter_mut().enumerate() {
        let delta = d - gaussian_center(k);
        *v = (-delta * delta * inv_s2).exp();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn peaks_exactly_one_at_each_center() {
        for k in 0..GAUSSIAN_CENTERS {
            let v = gaussian_expand(gaussian_center(k));
            assert_eq!(v[k], 1.0);
        }
        assert_eq!(gaussian_expand(0.0)[0], 1.0);
        assert_eq!(gaussian_expand(5.0)[19], 1.0);
    }

    #[test]
    fn values_stay_in_unit_interval() {
        let mut d = 0.0;
        while d <= 6.0 {
            for v in gaussian_expand(d) {
                assert!(v > 0.0 && v <= 1.0);
            }
            d += 0.013;
        }
    }

    #[test]
    fn mid_basis_value_matches_direct_evaluation() {
        // d = 2.5 against the nearest center 5*9/19
        let c = gaussian_center(9);
        let expect = (-(2.5 - c) * (2.5 - c) / 0.25).exp();
        let got = gaussian_expand(2.5)[9];
        assert!((got - expect).abs() < 1e-15);
        assert!((got - 0.933).abs() < 1e-3);
    }

    #[test]
    fn derivative_bounded_by_gaussian_slope_maximum() {
        // max |d/dx exp(-x^2/s^2)| = 2 / (s * sqrt(2e))
        let bound = 2.0 / (GAUSSIAN_SIGMA * (2.0 * std::f64::consts::E).sqrt());
        let h = 1e-6;
        let mut d = 0.0;
        while d <= 6.0 {
            let hi = gaussian_expand(d + h);
            let lo = gaussian_expand(d - h);
            for k in 0..GAUSSIAN_CENTERS {
                let slope = (hi[k] - lo[k]) / (2.0 * h);
                assert!(slope.abs() <= bound + 1e-6);
            }
            d += 0.017;
        }
    }
}
