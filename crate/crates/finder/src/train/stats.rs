//! Two-sample t-test with pooled standard error and an exact t-distribution
//! CDF via the regularized incomplete beta function.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct TTest {
    pub t: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub warning: Option<String>,
}

/// Pooled-variance two-sample t-test from summary statistics (sample
/// standard deviations). Exact t CDF rather than a normal approximation:
/// group sizes of three are common here.
pub fn two_sample_t_test(
    mean1: f64,
    std1: f64,
    n1: usize,
    mean2: f64,
    std2: f64,
    n2: usize,
) -> Result<TTest> {
    if n1 < 2 || n2 < 2 {
        return Err(Error::Config(format!(
            "t-test needs at least two samples per group, got {n1} and {n2}"
        )));
    }
    let df = (n1 + n2 - 2) as f64;
    let pooled_var = ((n1 - 1) as f64 * std1 * std1 + (n2 - 1) as f64 * std2 * std2) / df;
    let se = (pooled_var * (1.0 / n1 as f64 + 1.0 / n2 as f64)).sqrt();
    if se == 0.0 {
        return Ok(if mean1 == mean2 {
            TTest {
                t: 0.0,
                p: 1.0,
                warning: None,
            }
        } else {
            TTest {
                t: if mean1 > mean2 {
                    f64::INFINITY
                } else {
                    f64::NEG_INFINITY
                },
                p: 0.0,
                warning: Some("zero standard error with unequal means".into()),
            }
        });
    }
    let t = (mean1 - mean2) / se;
    let p = two_tailed_p(t, df);
    Ok(TTest {
        t,
        p,
        warning: None,
    })
}

/// Sample mean, sample standard deviation (ddof = 1) and count.
pub fn summarize_runs(values: &[f64]) -> Result<(f64, f64, usize)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Config(format!(
            "need at least two run values, got {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Ok((mean, var.sqrt(), n))
}

/// `P(|T_df| >= |t|) = I_{df/(df+t^2)}(df/2, 1/2)`.
pub fn two_tailed_p(t: f64, df: f64) -> f64 {
    if t == 0.0 {
        return 1.0;
    }
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(0.5 * df, 0.5, x)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = COEFFS[0];
    let t = x + 7.5;
    for (i, &c) in COEFFS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued-fraction expansion (modified Lentz).
fn betacf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 200;
    const EPS: f64 = 3e-16;
    const FPMIN: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// `I_x(a, b)` for `0 <= x <= 1`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let bt = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        bt * betacf(a, b, x) / a
    } else {
        1.0 - bt * betacf(b, a, 1.0 - x) / b
    }
}
