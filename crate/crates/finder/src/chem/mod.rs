//! Chemical formulas: parsing, fractional-to-integer reduction, element
//! embeddings.

mod element;
mod embedding;
mod parse;

pub use element::{Element, ELEMENT_COUNT, SYMBOLS};
pub use embedding::{ElementEmbeddingTable, EmbeddingSource, DEFAULT_EMBED_DIM};
pub use parse::parse_formula;

use std::collections::BTreeMap;

use num_integer::Integer;
use num_rational::Ratio;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};

type Amount = Ratio<i64>;

pub const DEFAULT_MAX_DENOMINATOR: u64 = 12;
pub const DEFAULT_NODE_CAP: usize = 64;

/// Map from element to positive rational amount. Canonical: one entry per
/// element, iteration ordered by atomic number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Composition {
    amounts: BTreeMap<Element, Amount>,
}

impl Composition {
    /// Build from (element, amount) pairs; repeated elements accumulate.
    pub fn from_amounts(pairs: impl IntoIterator<Item = (Element, Amount)>) -> Result<Self> {
        let mut amounts: BTreeMap<Element, Amount> = BTreeMap::new();
        for (el, amt) in pairs {
            *amounts.entry(el).or_insert_with(Amount::zero) += amt;
        }
        if amounts.is_empty() {
            return Err(Error::InvalidValue("empty composition".into()));
        }
        if let Some((el, _)) = amounts.iter().find(|(_, a)| !a.is_positive()) {
            return Err(Error::InvalidValue(format!(
                "non-positive amount for element {el}"
            )));
        }
        Ok(Composition { amounts })
    }

    pub fn from_f64_amounts(pairs: &[(&str, f64)]) -> Result<Self> {
        let mut v = Vec::with_capacity(pairs.len());
        for &(sym, x) in pairs {
            let el = Element::from_symbol(sym)?;
            let r = f64_to_ratio(x).ok_or_else(|| {
                Error::InvalidValue(format!("amount {x} for {sym} is not representable"))
            })?;
            v.push((el, r));
        }
        Composition::from_amounts(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Element, &Amount)> {
        self.amounts.iter().map(|(e, a)| (*e, a))
    }

    pub fn element_count(&self) -> usize {
        self.amounts.len()
    }

    pub fn amount(&self, el: Element) -> Option<Amount> {
        self.amounts.get(&el).copied()
    }

    pub fn contains(&self, el: Element) -> bool {
        self.amounts.contains_key(&el)
    }

    pub fn elements(&self) -> impl Iterator<Item = Element> + '_ {
        self.amounts.keys().copied()
    }

    /// Canonical text form that reparses to an equal composition. Elements
    /// are ordered alphabetically by symbol; amounts print as exact decimals
    /// (parseable amounts always have 10-smooth denominators).
    pub fn format(&self) -> String {
        let mut syms: Vec<Element> = self.amounts.keys().copied().collect();
        syms.sort_by_key(|e| e.symbol());
        let mut out = String::new();
        for el in syms {
            out.push_str(el.symbol());
            out.push_str(&format_amount(self.amounts[&el]));
        }
        out
    }
}

/// Map from element to positive integer count with gcd 1.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegerFormula {
    counts: BTreeMap<Element, u32>,
    total_atoms: usize,
}

impl IntegerFormula {
    pub fn counts(&self) -> impl Iterator<Item = (Element, u32)> + '_ {
        self.counts.iter().map(|(e, c)| (*e, *c))
    }

    pub fn total_atoms(&self) -> usize {
        self.total_atoms
    }

    pub fn count(&self, el: Element) -> u32 {
        self.counts.get(&el).copied().unwrap_or(0)
    }

    /// Atom list ordered alphabetically by symbol, each element repeated by
    /// its count; the canonical node ordering of a formula graph.
    pub fn atom_list(&self) -> Vec<Element> {
        let mut syms: Vec<Element> = self.counts.keys().copied().collect();
        syms.sort_by_key(|e| e.symbol());
        let mut out = Vec::with_capacity(self.total_atoms);
        for el in syms {
            for _ in 0..self.counts[&el] {
                out.push(el);
            }
        }
        out
    }

    pub fn format(&self) -> String {
        let mut syms: Vec<Element> = self.counts.keys().copied().collect();
        syms.sort_by_key(|e| e.symbol());
        let mut out = String::new();
        for el in syms {
            out.push_str(el.symbol());
            let c = self.counts[&el];
            if c != 1 {
                out.push_str(&c.to_string());
            }
        }
        out
    }
}

/// Reduce a composition to its integer formula.
///
/// The amounts are first turned into fractions of the total (making the
/// result invariant to an overall scale), each fraction is replaced by its
/// best rational approximation with denominator at most `max_denominator`,
/// and the approximations are scaled by the lcm of their denominators and
/// divided by their gcd.
pub fn to_integer_formula(
    c: &Composition,
    max_denominator: u64,
    node_cap: usize,
) -> Result<IntegerFormula> {
    let total: Amount = c.iter().map(|(_, a)| *a).sum();
    let mut approx: Vec<(Element, Amount)> = Vec::with_capacity(c.element_count());
    for (el, a) in c.iter() {
        let frac = a / total;
        let best = limit_denominator(frac, max_denominator as i64);
        if best.is_zero() {
            return Err(Error::AmountUnderflow {
                symbol: el.symbol().to_string(),
                max_denominator,
            });
        }
        approx.push((el, best));
    }
    let lcm = approx
        .iter()
        .fold(1i64, |acc, (_, r)| acc.lcm(r.denom()));
    let mut raw: Vec<(Element, i64)> = approx
        .iter()
        .map(|(el, r)| (*el, r.numer() * (lcm / r.denom())))
        .collect();
    let gcd = raw.iter().fold(0i64, |acc, (_, n)| acc.gcd(n));
    let mut counts = BTreeMap::new();
    let mut total_atoms = 0usize;
    for (el, n) in raw.drain(..) {
        let count = (n / gcd) as u32;
        total_atoms += count as usize;
        counts.insert(el, count);
    }
    if total_atoms > node_cap {
        return Err(Error::NodeCapExceeded {
            needed: total_atoms,
            cap: node_cap,
        });
    }
    Ok(IntegerFormula {
        counts,
        total_atoms,
    })
}

/// Best rational approximation with denominator bounded by `max_den`,
/// via continued-fraction convergents and the final semiconvergent.
fn limit_denominator(r: Amount, max_den: i64) -> Amount {
    if *r.denom() <= max_den {
        return r;
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i64, 1i64, 1i64, 0i64);
    let (mut n, mut d) = (*r.numer(), *r.denom());
    loop {
        let a = n.div_euclid(d);
        let q2 = q0 + a * q1;
        if q2 > max_den {
            break;
        }
        let p2 = p0 + a * p1;
        p0 = p1;
        q0 = q1;
        p1 = p2;
        q1 = q2;
        let rem = n - a * d;
        n = d;
        d = rem;
        if d == 0 {
            break;
        }
    }
    let k = (max_den - q0) / q1;
    let bound1 = Amount::new(p0 + k * p1, q0 + k * q1);
    let bound2 = Amount::new(p1, q1);
    if (bound2 - r).abs() <= (bound1 - r).abs() {
        bound2
    } else {
        bound1
    }
}

/// Exact rational for an f64 that carries at most 9 decimal places.
fn f64_to_ratio(x: f64) -> Option<Amount> {
    if !x.is_finite() {
        return None;
    }
    let scaled = x * 1e9;
    let rounded = scaled.round();
    if (scaled - rounded).abs() > 1e-3 || rounded.abs() > 9e17 {
        return None;
    }
    Some(Amount::new(rounded as i64, 1_000_000_000))
}

/// Exact decimal text for ratios with 10-smooth denominators, otherwise a
/// 12-digit approximation.
fn format_amount(a: Amount) -> String {
    if *a.denom() == 1 {
        let n = *a.numer();
        return if n == 1 { String::new() } else { n.to_string() };
    }
    let mut den = *a.denom();
    let mut twos = 0u32;
    let mut fives = 0u32;
    while den % 2 == 0 {
        den /= 2;
        twos += 1;
    }
    while den % 5 == 0 {
        den /= 5;
        fives += 1;
    }
    if den != 1 {
        return format!("{:.12}", *a.numer() as f64 / *a.denom() as f64);
    }
    let point = twos.max(fives) as usize;
    let mult = 2i64.pow(point as u32 - twos) * 5i64.pow(point as u32 - fives);
    let digits = (a.numer() * mult).to_string();
    let s = if digits.len() <= point {
        format!("0.{}{}", "0".repeat(point - digits.len()), digits)
    } else {
        let (int, frac) = digits.split_at(digits.len() - point);
        format!("{int}.{frac}")
    };
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn comp(pairs: &[(&str, (i64, i64))]) -> Composition {
        Composition::from_amounts(
            pairs
                .iter()
                .map(|&(s, (n, d))| (Element::from_symbol(s).unwrap(), Amount::new(n, d))),
        )
        .unwrap()
    }

    #[test]
    fn fractional_formula_reduces_to_integers() {
        // 0.33 : 0.67 is recognized as 1 : 2
        let c = comp(&[("Sr", (33, 100)), ("Ti", (67, 100))]);
        let f = to_integer_formula(&c, 12, 64).unwrap();
        assert_eq!(f.count(Element::from_symbol("Sr").unwrap()), 1);
        assert_eq!(f.count(Element::from_symbol("Ti").unwrap()), 2);
        assert_eq!(f.total_atoms(), 3);
    }

    #[test]
    fn integral_composition_is_unchanged() {
        let c = comp(&[("Sr", (1, 1)), ("Ti", (1, 1)), ("O", (3, 1))]);
        let f = to_integer_formula(&c, 12, 64).unwrap();
        assert_eq!(f.format(), "O3SrTi");
        assert_eq!(f.total_atoms(), 5);
    }

    #[test]
    fn exact_rationals_reduce_by_gcd() {
        let c = comp(&[("Na", (1, 2)), ("Cl", (1, 4))]);
        let f = to_integer_formula(&c, 12, 64).unwrap();
        assert_eq!(f.count(Element::from_symbol("Na").unwrap()), 2);
        assert_eq!(f.count(Element::from_symbol("Cl").unwrap()), 1);
    }

    #[test]
    fn scale_invariance() {
        let a = comp(&[("Fe", (33, 100)), ("O", (67, 100))]);
        let b = comp(&[("Fe", (99, 100)), ("O", (201, 100))]);
        let c = comp(&[("Fe", (33, 700)), ("O", (67, 700))]);
        let fa = to_integer_formula(&a, 12, 64).unwrap();
        let fb = to_integer_formula(&b, 12, 64).unwrap();
        let fc = to_integer_formula(&c, 12, 64).unwrap();
        assert_eq!(fa, fb);
        assert_eq!(fa, fc);
    }

    #[test]
    fn node_cap_is_enforced() {
        let c = comp(&[("Fe", (5, 12)), ("O", (7, 12))]);
        match to_integer_formula(&c, 12, 8) {
            Err(Error::NodeCapExceeded { needed: 12, cap: 8 }) => {}
            other => panic!("expected node cap error, got {other:?}"),
        }
    }

    #[test]
    fn tiny_doping_fraction_underflows() {
        let c = comp(&[("Fe", (1, 1000)), ("O", (999, 1000))]);
        match to_integer_formula(&c, 12, 64) {
            Err(Error::AmountUnderflow { symbol, .. }) => assert_eq!(symbol, "Fe"),
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn format_parse_round_trip() {
        for text in ["Cu2Ag2O3", "Fe", "Ba4LiCu(CO5)2", "K0.5Na0.5NbO3", "Li0.33La0.57TiO3"] {
            let c = parse_formula(text).unwrap();
            let again = parse_formula(&c.format()).unwrap();
            assert_eq!(c, again, "round trip failed for {text}");
        }
    }

    #[test]
    fn limit_denominator_matches_known_values() {
        assert_eq!(limit_denominator(Amount::new(33, 100), 12), Amount::new(1, 3));
        assert_eq!(limit_denominator(Amount::new(67, 100), 12), Amount::new(2, 3));
        assert_eq!(limit_denominator(Amount::new(5, 12), 12), Amount::new(5, 12));
        // pi to 10^-6: 355/113 needs q > 12, best with q <= 12 is 22/7
        assert_eq!(
            limit_denominator(Amount::new(3_141_593, 1_000_000), 12),
            Amount::new(22, 7)
        );
    }
}
