//! Per-element embedding vectors.
//!
//! Two sources: a pretrained table loaded from a text file (one row per
//! element: symbol followed by whitespace-separated decimals, 200-dim in the
//! reference asset) and the always-available one-hot fallback over the full
//! periodic table in atomic-number order.

use std::collections::HashMap;
use std::path::Path;

use crate::chem::element::{Element, ELEMENT_COUNT};
use crate::error::{Error, Result};

pub const DEFAULT_EMBED_DIM: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    Pretrained,
    OneHot,
}

#[derive(Debug, Clone)]
pub struct ElementEmbeddingTable {
    dim: usize,
    vectors: HashMap<Element, Vec<f64>>,
    source: EmbeddingSource,
}

impl ElementEmbeddingTable {
    /// Orthonormal one-hot rows: element Z maps to basis vector Z-1.
    pub fn one_hot() -> Self {
        let mut vectors = HashMap::with_capacity(ELEMENT_COUNT);
        for z in 1..=ELEMENT_COUNT as u8 {
            let mut v = vec![0.0; ELEMENT_COUNT];
            v[z as usize - 1] = 1.0;
            vectors.insert(Element::from_atomic_number(z).unwrap(), v);
        }
        ElementEmbeddingTable {
            dim: ELEMENT_COUNT,
            vectors,
            source: EmbeddingSource::OneHot,
        }
    }

    pub fn from_rows(rows: Vec<(Element, Vec<f64>)>) -> Result<Self> {
        let dim = rows.first().map(|(_, v)| v.len()).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidValue("empty embedding table".into()));
        }
        let mut vectors = HashMap::with_capacity(rows.len());
        for (el, v) in rows {
            if v.len() != dim {
                return Err(Error::InvalidValue(format!(
                    "embedding for {el} has dimension {}, expected {dim}",
                    v.len()
                )));
            }
            if vectors.insert(el, v).is_some() {
                return Err(Error::InvalidValue(format!("duplicate embedding row for {el}")));
            }
        }
        Ok(ElementEmbeddingTable {
            dim,
            vectors,
            source: EmbeddingSource::Pretrained,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let symbol = parts.next().unwrap();
            let el = Element::from_symbol(symbol).map_err(|_| Error::Data {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("unknown element '{symbol}'"),
            })?;
            let values: std::result::Result<Vec<f64>, _> =
                parts.map(|p| p.parse::<f64>()).collect();
            let values = values.map_err(|e| Error::Data {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad embedding value: {e}"),
            })?;
            rows.push((el, values));
        }
        Self::from_rows(rows)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn source(&self) -> EmbeddingSource {
        self.source
    }

    pub fn covered(&self) -> usize {
        self.vectors.len()
    }

    pub fn covers(&self, el: Element) -> bool {
        self.vectors.contains_key(&el)
    }

    /// The stored vector, unchanged.
    pub fn embed(&self, el: Element) -> Result<&[f64]> {
        self.vectors
            .get(&el)
            .map(|v| v.as_slice())
            .ok_or_else(|| Error::EmbeddingMiss {
                symbol: el.symbol().to_string(),
                covered: self.vectors.len(),
                total: ELEMENT_COUNT,
            })
    }

    /// Table rows in atomic-number order, for checkpoint serialization.
    pub fn rows(&self) -> Vec<(Element, &[f64])> {
        let mut out: Vec<(Element, &[f64])> = self
            .vectors
            .iter()
            .map(|(e, v)| (*e, v.as_slice()))
            .collect();
        out.sort_by_key(|(e, _)| e.atomic_number());
        out
    }
}
