//! Chemical formula parser: element symbols, integer or decimal subscripts,
//! arbitrarily nested parentheses with multipliers.

use num_rational::Ratio;

use crate::chem::{Composition, Element};
use crate::error::{Error, Result};

pub(crate) type Amount = Ratio<i64>;

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::FormulaParse {
            position: self.pos,
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// formula := term+ ; term := element count? | '(' formula ')' count?
    fn formula(&mut self, depth: usize) -> Result<Composition> {
        let mut acc: Vec<(Element, Amount)> = Vec::new();
        let start = self.pos;
        loop {
            match self.peek() {
                Some(b'(') => {
                    self.pos += 1;
                    let inner = self.formula(depth + 1)?;
                    if self.peek() != Some(b')') {
                        return self.fail("unbalanced parentheses: expected ')'");
                    }
                    self.pos += 1;
                    let mult = self.count()?;
                    for (el, amt) in inner.iter() {
                        acc.push((el, amt * mult));
                    }
                }
                Some(b')') if depth > 0 => break,
                Some(b')') => return self.fail("unbalanced parentheses: unexpected ')'"),
                Some(c) if c.is_ascii_uppercase() => {
                    let el = self.element()?;
                    let amt = self.count()?;
                    acc.push((el, amt));
                }
                Some(c) => {
                    return self.fail(format!("unexpected character '{}'", c as char));
                }
                None => break,
            }
        }
        if self.pos == start {
            return self.fail("empty formula group");
        }
        Composition::from_amounts(acc)
    }

    fn element(&mut self) -> Result<Element> {
        let start = self.pos;
        self.pos += 1;
        while matches!(self.peek(), Some(c) if c.is_ascii_lowercase()) {
            self.pos += 1;
        }
        let symbol = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        Element::from_symbol(symbol).map_err(|_| Error::FormulaParse {
            position: start,
            message: format!("unknown element symbol '{symbol}'"),
        })
    }

    /// Optional subscript; defaults to 1. Must be strictly positive.
    fn count(&mut self) -> Result<Amount> {
        let start = self.pos;
        let mut int_digits = 0usize;
        while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
            int_digits += 1;
        }
        let mut frac_digits = 0usize;
        if self.peek() == Some(b'.') {
            self.pos += 1;
            while matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
                frac_digits += 1;
            }
            if frac_digits == 0 {
                return self.fail("decimal point without digits");
            }
        }
        if int_digits == 0 && frac_digits == 0 {
            return Ok(Amount::from_integer(1));
        }
        if int_digits + frac_digits > 15 {
            return self.fail("subscript has too many digits");
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).expect("ascii");
        let digits: String = text.chars().filter(|c| *c != '.').collect();
        let numer: i64 = digits.parse().map_err(|_| Error::FormulaParse {
            position: start,
            message: format!("invalid subscript '{text}'"),
        })?;
        let denom = 10i64.pow(frac_digits as u32);
        let amount = Amount::new(numer, denom);
        if amount <= Amount::from_integer(0) {
            return Err(Error::FormulaParse {
                position: start,
                message: format!("subscript must be positive, got '{text}'"),
            });
        }
        Ok(amount)
    }
}

/// Parse a formula string such as `Cu2Ag2O3` or `Ba4LiCu(CO5)2` into a
/// composition. Amounts accumulate across repeated symbols and parentheses
/// expand multiplicatively.
pub fn parse_formula(text: &str) -> Result<Composition> {
    if !text.is_ascii() {
        return Err(Error::FormulaParse {
            position: 0,
            message: "formula must be ASCII".into(),
        });
    }
    let mut p = Parser {
        bytes: text.as_bytes(),
        pos: 0,
    };
    let c = p.formula(0)?;
    if p.pos != p.bytes.len() {
        return p.fail("trailing input after formula");
    }
    Ok(c)
}
