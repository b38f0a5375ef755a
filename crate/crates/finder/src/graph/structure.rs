//! Crystal structures as an explicit lattice plus fractional sites.
//!
//! File format (text):
//! ```text
//! lattice: a11 a12 a13 ; a21 a22 a23 ; a31 a32 a33
//! site: <symbol> fx fy fz
//! site: ...
//! ```
//! Lattice rows are in angstroms; fractional coordinates are wrapped into
//! `[0, 1)` on construction.

use std::path::Path;

use crate::chem::Element;
use crate::error::{Error, Result};

pub type Lattice = [[f64; 3]; 3];

#[derive(Debug, Clone)]
pub struct CrystalStructure {
    lattice: Lattice,
    sites: Vec<(Element, [f64; 3])>,
}

impl CrystalStructure {
    pub fn new(lattice: Lattice, sites: Vec<(Element, [f64; 3])>) -> Result<Self> {
        if determinant(&lattice).abs() < 1e-12 {
            return Err(Error::SingularLattice);
        }
        if sites.is_empty() {
            return Err(Error::InvalidValue("structure has no sites".into()));
        }
        let sites = sites
            .into_iter()
            .map(|(el, f)| (el, [wrap(f[0]), wrap(f[1]), wrap(f[2])]))
            .collect();
        Ok(CrystalStructure { lattice, sites })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn sites(&self) -> &[(Element, [f64; 3])] {
        &self.sites
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    /// Cartesian coordinates of site `i`.
    pub fn cartesian(&self, i: usize) -> [f64; 3] {
        frac_to_cart(&self.lattice, &self.sites[i].1)
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut lattice: Option<Lattice> = None;
        let mut sites = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let data_err = |message: String| Error::Data {
                path: origin.to_string(),
                line: lineno + 1,
                message,
            };
            if let Some(rest) = line.strip_prefix("lattice:") {
                let rows: Vec<&str> = rest.split(';').collect();
                if rows.len() != 3 {
                    return Err(data_err("lattice needs three ';'-separated rows".into()));
                }
                let mut l = [[0.0; 3]; 3];
                for (r, row) in rows.iter().enumerate() {
                    let vals: std::result::Result<Vec<f64>, _> =
                        row.split_whitespace().map(|v| v.parse::<f64>()).collect();
                    let vals = vals.map_err(|e| data_err(format!("bad lattice value: {e}")))?;
                    if vals.len() != 3 {
                        return Err(data_err("lattice row needs three values".into()));
                    }
                    l[r].copy_from_slice(&vals);
                }
                lattice = Some(l);
            } else if let Some(rest) = line.strip_prefix("site:") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 4 {
                    return Err(data_err("site needs a symbol and three coordinates".into()));
                }
                let el = Element::from_symbol(parts[0])
                    .map_err(|_| data_err(format!("unknown element '{}'", parts[0])))?;
                let mut f = [0.0; 3];
                for (k, p) in parts[1..].iter().enumerate() {
                    f[k] = p
                        .parse()
                        .map_err(|e| data_err(format!("bad coordinate: {e}")))?;
                }
                sites.push((el, f));
            } else {
                return Err(data_err(format!("unrecognized line '{line}'")));
            }
        }
        let lattice = lattice.ok_or_else(|| Error::Data {
            path: origin.to_string(),
            line: 0,
            message: "missing lattice line".into(),
        })?;
        CrystalStructure::new(lattice, sites)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn wrap(f: f64) -> f64 {
    let w = f - f.floor();
    if w >= 1.0 {
        0.0
    } else {
        w
    }
}

pub(crate) fn frac_to_cart(lattice: &Lattice, f: &[f64; 3]) -> [f64; 3] {
    let mut r = [0.0; 3];
    for c in 0..3 {
        r[c] = f[0] * lattice[0][c] + f[1] * lattice[1][c] + f[2] * lattice[2][c];
    }
    r
}

pub(crate) fn determinant(l: &Lattice) -> f64 {
    l[0][0] * (l[1][1] * l[2][2] - l[1][2] * l[2][1])
        - l[0][1] * (l[1][0] * l[2][2] - l[1][2] * l[2][0])
        + l[0][2] * (l[1][0] * l[2][1] - l[1][1] * l[2][0])
}

/// Inverse of the lattice matrix; columns bound how many cells a cutoff
/// sphere can span along each axis.
pub(crate) fn inverse(l: &Lattice) -> Result<Lattice> {
    let det = determinant(l);
    if det.abs() < 1e-12 {
        return Err(Error::SingularLattice);
    }
    let inv_det = 1.0 / det;
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            let (c, d) = ((j + 1) % 3, (j + 2) % 3);
            // cofactor transpose
            inv[j][i] = (l[a][c] * l[b][d] - l[a][d] * l[b][c]) * inv_det;
        }
    }
    Ok(inv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_wrap() {
        let text = "lattice: 3 0 0 ; 0 3 0 ; 0 0 3\nsite: Fe 0.5 -0.25 1.0\n";
        let s = CrystalStructure::parse(text, "test").unwrap();
        assert_eq!(s.site_count(), 1);
        let f = s.sites()[0].1;
        assert_eq!(f, [0.5, 0.75, 0.0]);
        assert_eq!(s.cartesian(0), [1.5, 2.25, 0.0]);
    }

    #[test]
    fn singular_lattice_rejected() {
        let err = CrystalStructure::new(
            [[1.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 0.0, 1.0]],
            vec![(Element::from_symbol("Fe").unwrap(), [0.0; 3])],
        );
        assert!(matches!(err, Err(Error::SingularLattice)));
    }

    #[test]
    fn inverse_times_lattice_is_identity() {
        let l = [[3.1, 0.2, 0.0], [0.1, 4.0, 0.3], [0.0, 0.5, 5.2]];
        let inv = inverse(&l).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..3 {
                    s += l[i][k] * inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s - expect).abs() < 1e-12);
            }
        }
    }
}
