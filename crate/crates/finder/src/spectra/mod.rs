//! Fixed-grid dielectric spectra and the epsilon-near-zero screening
//! pipeline.
//!
//! Every spectrum lives on one implicit grid: `SPECTRUM_POINTS` photon
//! energies equally spaced over 0..=30 eV. Screening keeps compositions whose
//! real permittivity crosses zero inside the NIR-to-UV window with low loss
//! (interpolated imaginary part below 2) and plausible stability (energy
//! above hull below 25 meV/atom).

use std::collections::BTreeMap;

use crate::chem::{Composition, Element};
use crate::error::{Error, Result};
use crate::par;

pub const SPECTRUM_POINTS: usize = 3000;
pub const SPECTRUM_MAX_EV: f64 = 30.0;

/// Screening window in photon energy (NIR to UV).
pub const ENZ_WINDOW: (f64, f64) = (0.5, 12.4);
/// Loss ceiling: imaginary permittivity at the crossover, strict.
pub const ENZ_MAX_EPS_IM: f64 = 2.0;
/// Stability ceiling: energy above convex hull in meV/atom, strict.
pub const ENZ_MAX_EHULL_MEV: f64 = 25.0;

/// Grid energy of point `i`.
pub fn grid_energy(i: usize) -> f64 {
    SPECTRUM_MAX_EV * i as f64 / (SPECTRUM_POINTS - 1) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    EpsRe,
    EpsIm,
}

/// A dielectric-function component sampled on the fixed grid.
#[derive(Debug, Clone)]
pub struct Spectrum {
    kind: SpectrumKind,
    values: Vec<f64>,
}

impl Spectrum {
    pub fn new(kind: SpectrumKind, values: Vec<f64>) -> Result<Self> {
        if values.len() != SPECTRUM_POINTS {
            return Err(Error::InvalidValue(format!(
                "spectrum needs {} points, got {}",
                SPECTRUM_POINTS,
                values.len()
            )));
        }
        Ok(Spectrum { kind, values })
    }

    pub fn kind(&self) -> SpectrumKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Linear interpolation at an arbitrary energy inside the grid.
    pub fn at(&self, energy: f64) -> f64 {
        let step = SPECTRUM_MAX_EV / (SPECTRUM_POINTS - 1) as f64;
        if energy <= 0.0 {
            return self.values[0];
        }
        if energy >= SPECTRUM_MAX_EV {
            return self.values[SPECTRUM_POINTS - 1];
        }
        let pos = energy / step;
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        self.values[i] * (1.0 - frac) + self.values[i + 1] * frac
    }
}

/// Resample raw `(energy, value)` points onto the fixed grid by linear
/// interpolation with constant extrapolation at both ends.
pub fn resample(kind: SpectrumKind, points: &[(f64, f64)]) -> Result<Spectrum> {
    if points.len() < 2 {
        return Err(Error::InvalidValue(
            "resample needs at least two points".into(),
        ));
    }
    if points.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidValue(
            "resample energies must be strictly increasing".into(),
        ));
    }
    let mut values = Vec::with_capacity(SPECTRUM_POINTS);
    let mut seg = 0usize;
    for i in 0..SPECTRUM_POINTS {
        let e = grid_energy(i);
        if e <= points[0].0 {
            values.push(points[0].1);
            continue;
        }
        if e >= points[points.len() - 1].0 {
            values.push(points[points.len() - 1].1);
            continue;
        }
        while points[seg + 1].0 < e {
            seg += 1;
        }
        let (e0, v0) = points[seg];
        let (e1, v1) = points[seg + 1];
        values.push(v0 + (v1 - v0) * (e - e0) / (e1 - e0));
    }
    Spectrum::new(kind, values)
}

/// Every zero crossing of the real part inside `window`, by scanning
/// consecutive grid values for sign changes (or exact zeros) and refining
/// with linear interpolation.
pub fn crossings(s: &Spectrum, window: (f64, f64)) -> Vec<f64> {
    debug_assert_eq!(s.kind(), SpectrumKind::EpsRe);
    let v = s.values();
    let mut out = Vec::new();
    for i in 0..SPECTRUM_POINTS {
        let e = grid_energy(i);
        if v[i] == 0.0 {
            if e >= window.0 && e <= window.1 {
                out.push(e);
            }
            continue;
        }
        if i + 1 < SPECTRUM_POINTS && v[i + 1] != 0.0 && (v[i] < 0.0) != (v[i + 1] < 0.0) {
            let e1 = grid_energy(i + 1);
            let root = e + (e1 - e) * v[i] / (v[i] - v[i + 1]);
            if root >= window.0 && root <= window.1 {
                out.push(root);
            }
        }
    }
    out
}

/// The crossover energy: smallest zero crossing of the real permittivity
/// inside the window, if any.
pub fn find_crossover(s: &Spectrum, window: (f64, f64)) -> Option<f64> {
    crossings(s, window).into_iter().next()
}

/// Maximal intervals where `|eps_re| < 1`, endpoints refined by linear
/// interpolation against the crossed unit level.
pub fn enz_region(s: &Spectrum) -> Vec<(f64, f64)> {
    debug_assert_eq!(s.kind(), SpectrumKind::EpsRe);
    let v = s.values();
    let inside = |x: f64| x.abs() < 1.0;
    let mut out: Vec<(f64, f64)> = Vec::new();
    let mut start: Option<f64> = None;
    for i in 0..SPECTRUM_POINTS {
        let e = grid_energy(i);
        if inside(v[i]) {
            if start.is_none() {
                let left = if i == 0 {
                    0.0
                } else {
                    refine_unit_crossing(grid_energy(i - 1), v[i - 1], e, v[i])
                };
                start = Some(left);
            }
            if i == SPECTRUM_POINTS - 1 {
                out.push((start.take().unwrap(), SPECTRUM_MAX_EV));
            }
        } else if let Some(left) = start.take() {
            let right = refine_unit_crossing(grid_energy(i - 1), v[i - 1], e, v[i]);
            out.push((left, right));
        }
    }
    out
}

/// Where the segment from (e0,v0) to (e1,v1) crosses |v| = 1.
fn refine_unit_crossing(e0: f64, v0: f64, e1: f64, v1: f64) -> f64 {
    // one endpoint is inside (-1,1), the other outside; find the crossing of
    // the level the outside value violates
    let level = if v0.max(v1) > 1.0 { 1.0 } else { -1.0 };
    if (v1 - v0).abs() < f64::EPSILON {
        return e0;
    }
    e0 + (e1 - e0) * (level - v0) / (v1 - v0)
}

/// One screening input: spectra plus stability metadata. `label` is the
/// composition text as supplied by the caller and is echoed in reports.
#[derive(Debug, Clone)]
pub struct ScreenInput {
    pub label: String,
    pub composition: Composition,
    pub eps_re: Spectrum,
    pub eps_im: Spectrum,
    pub e_hull_mev: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct EnzCandidate {
    pub label: String,
    pub composition: Composition,
    /// Crossover photon energy in eV.
    pub crossover_ev: f64,
    /// Interpolated imaginary permittivity at the crossover.
    pub eps_im_at_crossover: f64,
    pub e_hull_mev: f64,
    /// Further zero crossings inside the window, diagnostic only.
    pub extra_crossings: Vec<f64>,
}

#[derive(Debug, Default)]
pub struct ScreenReport {
    /// Candidates passing all three predicates, ascending by loss.
    pub candidates: Vec<EnzCandidate>,
    /// Compositions skipped for missing stability metadata.
    pub skipped_missing_ehull: Vec<String>,
}

/// Keep a composition iff the real part crosses zero inside the window, the
/// interpolated imaginary part there is strictly below 2, and the energy
/// above hull is strictly below 25 meV/atom. Missing hull data skips the
/// candidate with a warning rather than silently keeping it.
pub fn screen(inputs: &[ScreenInput]) -> ScreenReport {
    let evaluated = par::map(inputs, |input| {
        let all = crossings(&input.eps_re, ENZ_WINDOW);
        let Some(&crossover) = all.first() else {
            return (None, None);
        };
        let Some(e_hull) = input.e_hull_mev else {
            return (None, Some(input.label.clone()));
        };
        let loss = input.eps_im.at(crossover);
        if loss < ENZ_MAX_EPS_IM && e_hull < ENZ_MAX_EHULL_MEV {
            (
                Some(EnzCandidate {
                    label: input.label.clone(),
                    composition: input.composition.clone(),
                    crossover_ev: crossover,
                    eps_im_at_crossover: loss,
                    e_hull_mev: e_hull,
                    extra_crossings: all[1..].to_vec(),
                }),
                None,
            )
        } else {
            (None, None)
        }
    });
    let mut report = ScreenReport::default();
    for (cand, skipped) in evaluated {
        if let Some(c) = cand {
            report.candidates.push(c);
        }
        if let Some(s) = skipped {
            report.skipped_missing_ehull.push(s);
        }
    }
    report
        .candidates
        .sort_by(|a, b| a.eps_im_at_crossover.total_cmp(&b.eps_im_at_crossover));
    report
}

/// Element-pair co-occurrence counts over candidate compositions; each
/// unordered pair counts once per composition and pairs below `min_count`
/// are dropped.
#[derive(Debug, Clone, Default)]
pub struct CooccurrenceNetwork {
    edges: BTreeMap<(Element, Element), usize>,
}

impl CooccurrenceNetwork {
    pub fn edges(&self) -> impl Iterator<Item = ((Element, Element), usize)> + '_ {
        self.edges.iter().map(|(k, v)| (*k, *v))
    }

    pub fn count(&self, a: Element, b: Element) -> usize {
        let key = if a < b { (a, b) } else { (b, a) };
        self.edges.get(&key).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }
}

pub fn cooccurrence(compositions: &[Composition], min_count: usize) -> CooccurrenceNetwork {
    let mut edges: BTreeMap<(Element, Element), usize> = BTreeMap::new();
    for c in compositions {
        let els: Vec<Element> = c.elements().collect();
        for i in 0..els.len() {
            for j in i + 1..els.len() {
                let key = if els[i] < els[j] {
                    (els[i], els[j])
                } else {
                    (els[j], els[i])
                };
                *edges.entry(key).or_insert(0) += 1;
            }
        }
    }
    edges.retain(|_, count| *count >= min_count);
    CooccurrenceNetwork { edges }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_formula;

    /// Drude-form real permittivity `1 - (wp/w)^2` on the grid; the w = 0
    /// point reuses the first finite grid energy to stay finite.
    pub(crate) fn drude_re(wp: f64) -> Spectrum {
        let values: Vec<f64> = (0..SPECTRUM_POINTS)
            .map(|i| {
                let w = grid_energy(i.max(1));
                1.0 - (wp / w).powi(2)
            })
            .collect();
        Spectrum::new(SpectrumKind::EpsRe, values).unwrap()
    }

    fn constant(kind: SpectrumKind, v: f64) -> Spectrum {
        Spectrum::new(kind, vec![v; SPECTRUM_POINTS]).unwrap()
    }

    #[test]
    fn grid_is_inclusive_with_2999_steps() {
        assert_eq!(grid_energy(0), 0.0);
        assert_eq!(grid_energy(SPECTRUM_POINTS - 1), 30.0);
        let step = grid_energy(1);
        assert!((step - 30.0 / 2999.0).abs() < 1e-15);
    }

    #[test]
    fn resample_identity_on_grid_points() {
        let pts: Vec<(f64, f64)> = (0..SPECTRUM_POINTS)
            .map(|i| (grid_energy(i), (i as f64 * 0.37).sin()))
            .collect();
        let s = resample(SpectrumKind::EpsRe, &pts).unwrap();
        for (i, &(_, v)) in pts.iter().enumerate() {
            assert!((s.values()[i] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_two_point_line_reproduces_grid_energies() {
        let s = resample(SpectrumKind::EpsRe, &[(0.0, 0.0), (30.0, 30.0)]).unwrap();
        for i in 0..SPECTRUM_POINTS {
            assert!((s.values()[i] - grid_energy(i)).abs() < 1e-9);
        }
    }

    #[test]
    fn resample_matches_pointwise_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut energy = -2.0;
        let mut pts = Vec::new();
        for _ in 0..40 {
            energy += rng.gen_range(0.2..1.8);
            pts.push((energy, rng.gen_range(-5.0..5.0)));
        }
        let s = resample(SpectrumKind::EpsIm, &pts).unwrap();
        for i in (0..SPECTRUM_POINTS).step_by(271) {
            let e = grid_energy(i);
            // brute-force per-point interpolation
            let want = if e <= pts[0].0 {
                pts[0].1
            } else if e >= pts.last().unwrap().0 {
                pts.last().unwrap().1
            } else {
                let k = (0..pts.len() - 1)
                    .find(|&k| pts[k].0 <= e && e <= pts[k + 1].0)
                    .unwrap();
                pts[k].1 + (pts[k + 1].1 - pts[k].1) * (e - pts[k].0) / (pts[k + 1].0 - pts[k].0)
            };
            assert!((s.values()[i] - want).abs() < 1e-12);
        }
    }

    #[test]
    fn resample_rejects_non_monotone_energies() {
        assert!(resample(SpectrumKind::EpsRe, &[(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(resample(SpectrumKind::EpsRe, &[(1.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(resample(SpectrumKind::EpsRe, &[(1.0, 1.0)]).is_err());
    }

    #[test]
    fn drude_crossover_lands_at_plasma_energy() {
        let s = drude_re(3.0);
        let co = find_crossover(&s, ENZ_WINDOW).unwrap();
        assert!((co - 3.0).abs() < 0.02, "crossover {co}");
    }

    #[test]
    fn constant_positive_spectrum_has_no_crossover() {
        let s = constant(SpectrumKind::EpsRe, 4.0);
        assert!(find_crossover(&s, ENZ_WINDOW).is_none());
    }

    #[test]
    fn exact_zero_at_grid_point_is_returned_as_is() {
        let mut values = vec![2.0; SPECTRUM_POINTS];
        values[500] = 0.0;
        let s = Spectrum::new(SpectrumKind::EpsRe, values).unwrap();
        let co = find_crossover(&s, ENZ_WINDOW).unwrap();
        assert_eq!(co, grid_energy(500));
    }

    #[test]
    fn crossover_is_bracketed_by_opposite_signs() {
        let s = drude_re(7.5);
        let co = find_crossover(&s, ENZ_WINDOW).unwrap();
        let step = 30.0 / 2999.0;
        let i = (co / step).floor() as usize;
        let (a, b) = (s.values()[i], s.values()[i + 1]);
        assert!(a == 0.0 || b == 0.0 || (a < 0.0) != (b < 0.0));
    }

    #[test]
    fn enz_region_for_constant_half_is_full_range() {
        let s = constant(SpectrumKind::EpsRe, 0.5);
        assert_eq!(enz_region(&s), vec![(0.0, 30.0)]);
    }

    #[test]
    fn enz_region_for_constant_four_is_empty() {
        let s = constant(SpectrumKind::EpsRe, 4.0);
        assert!(enz_region(&s).is_empty());
    }

    #[test]
    fn drude_enz_region_left_edge_is_sqrt_four_point_five() {
        let s = drude_re(3.0);
        let regions = enz_region(&s);
        assert_eq!(regions.len(), 1);
        let (left, right) = regions[0];
        assert!((left - 4.5f64.sqrt()).abs() < 0.02, "left edge {left}");
        assert_eq!(right, 30.0);
        // the crossover lies inside the region containing it
        let co = find_crossover(&s, ENZ_WINDOW).unwrap();
        assert!(left <= co && co <= right);
    }

    #[test]
    fn screen_enforces_strict_boundaries() {
        let make = |eps_im: f64, e_hull: Option<f64>| ScreenInput {
            label: "SrVO3".to_string(),
            composition: parse_formula("SrVO3").unwrap(),
            eps_re: drude_re(3.0),
            eps_im: constant(SpectrumKind::EpsIm, eps_im),
            e_hull_mev: e_hull,
        };
        // boundary values are rejected (strict <)
        assert!(screen(&[make(2.0, Some(10.0))]).candidates.is_empty());
        assert!(screen(&[make(1.0, Some(25.0))]).candidates.is_empty());
        // inside both bounds passes
        let ok = screen(&[make(1.0, Some(10.0))]);
        assert_eq!(ok.candidates.len(), 1);
        assert!((ok.candidates[0].crossover_ev - 3.0).abs() < 0.02);
        // missing hull is skipped with a warning
        let skipped = screen(&[make(1.0, None)]);
        assert!(skipped.candidates.is_empty());
        assert_eq!(skipped.skipped_missing_ehull.len(), 1);
    }

    #[test]
    fn screen_returns_subset_sorted_by_loss() {
        let inputs: Vec<ScreenInput> = [("CaVO3", 1.5), ("SrVO3", 0.5), ("NaCl", 1.0)]
            .iter()
            .map(|&(f, im)| ScreenInput {
                label: f.to_string(),
                composition: parse_formula(f).unwrap(),
                eps_re: drude_re(2.5),
                eps_im: constant(SpectrumKind::EpsIm, im),
                e_hull_mev: Some(5.0),
            })
            .collect();
        let report = screen(&inputs);
        let losses: Vec<f64> = report
            .candidates
            .iter()
            .map(|c| c.eps_im_at_crossover)
            .collect();
        assert_eq!(losses.len(), 3);
        assert!(losses.windows(2).all(|w| w[0] <= w[1]));
        // every survivor re-satisfies the predicates
        for c in &report.candidates {
            assert!(c.crossover_ev >= ENZ_WINDOW.0 && c.crossover_ev <= ENZ_WINDOW.1);
            assert!(c.eps_im_at_crossover < ENZ_MAX_EPS_IM);
            assert!(c.e_hull_mev < ENZ_MAX_EHULL_MEV);
        }
    }

    #[test]
    fn cooccurrence_counts_unordered_pairs_once_per_composition() {
        let comps: Vec<Composition> = ["FeO", "FeO", "FeS"]
            .iter()
            .map(|f| parse_formula(f).unwrap())
            .collect();
        let net = cooccurrence(&comps, 2);
        assert_eq!(net.len(), 1);
        let fe = crate::chem::Element::from_symbol("Fe").unwrap();
        let o = crate::chem::Element::from_symbol("O").unwrap();
        let s = crate::chem::Element::from_symbol("S").unwrap();
        assert_eq!(net.count(fe, o), 2);
        assert_eq!(net.count(o, fe), 2);
        assert_eq!(net.count(fe, s), 0);
    }

    #[test]
    fn cooccurrence_of_empty_list_is_empty() {
        assert!(cooccurrence(&[], 1).is_empty());
    }

    #[test]
    fn cooccurrence_matches_brute_force_enumeration() {
        let comps: Vec<Composition> = [
            "LiFePO4", "LiCoO2", "NaFePO4", "LiMn2O4", "FeO", "CoO", "LiNiO2", "NaCoO2",
            "KFeO2", "LiFeO2",
        ]
        .iter()
        .map(|f| parse_formula(f).unwrap())
        .collect();
        let net = cooccurrence(&comps, 1);
        // brute force: count every unordered pair independently
        let mut want: BTreeMap<(Element, Element), usize> = BTreeMap::new();
        for c in &comps {
            let els: Vec<Element> = c.elements().collect();
            for a in 0..els.len() {
                for b in 0..els.len() {
                    if a < b {
                        let key = if els[a] < els[b] {
                            (els[a], els[b])
                        } else {
                            (els[b], els[a])
                        };
                        *want.entry(key).or_insert(0) += 1;
                    }
                }
            }
        }
        let got: BTreeMap<(Element, Element), usize> = net.edges().collect();
        assert_eq!(got, want);
    }
}
