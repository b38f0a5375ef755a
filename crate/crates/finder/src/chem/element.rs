//! Periodic table up to Z = 103.

use crate::error::{Error, Result};

pub const ELEMENT_COUNT: usize = 103;

/// Symbols indexed by atomic number minus one.
pub const SYMBOLS: [&str; ELEMENT_COUNT] = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne", "Na", "Mg", "Al", "Si", "P", "S", "Cl",
    "Ar", "K", "Ca", "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn", "Ga", "Ge", "As",
    "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr", "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In",
    "Sn", "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd", "Pm", "Sm", "Eu", "Gd", "Tb",
    "Dy", "Ho", "Er", "Tm", "Yb", "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg", "Tl",
    "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th", "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk",
    "Cf", "Es", "Fm", "Md", "No", "Lr",
];

/// A periodic-table element, ordered by atomic number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(u8);

impl Element {
    pub fn from_symbol(symbol: &str) -> Result<Element> {
        SYMBOLS
            .iter()
            .position(|&s| s == symbol)
            .map(|i| Element(i as u8 + 1))
            .ok_or_else(|| Error::UnknownElement {
                symbol: symbol.to_string(),
            })
    }

    pub fn from_atomic_number(z: u8) -> Result<Element> {
        if z == 0 || z as usize > ELEMENT_COUNT {
            return Err(Error::UnknownElement {
                symbol: format!("Z={z}"),
            });
        }
        Ok(Element(z))
    }

    pub fn atomic_number(self) -> u8 {
        self.0
    }

    pub fn symbol(self) -> &'static str {
        SYMBOLS[self.0 as usize - 1]
    }
}

impl std::fmt::Display for Element {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.symbol())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_lookup_round_trips() {
        for (i, &s) in SYMBOLS.iter().enumerate() {
            let e = Element::from_symbol(s).unwrap();
            assert_eq!(e.atomic_number() as usize, i + 1);
            assert_eq!(e.symbol(), s);
        }
        assert!(Element::from_symbol("Xx").is_err());
        assert!(Element::from_symbol("").is_err());
    }
}
