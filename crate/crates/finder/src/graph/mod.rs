//! Formula-graph construction for both representation domains.
//!
//! Formula domain: every atom of the reduced integer formula is a node in a
//! fully connected directed graph (all ordered pairs, no self-loops); edge
//! attributes are predicted by the model. Crystal domain: nodes are the
//! unit-cell sites, edges connect sites within a cutoff radius (each periodic
//! image separately), and edge attributes are fixed Gaussian expansions of
//! the distance. Both produce the same structure so one message-passing code
//! path serves both.

mod gaussian;
mod neighbors;
mod structure;

pub use gaussian::{gaussian_center, gaussian_expand, GAUSSIAN_CENTERS, GAUSSIAN_SIGMA, GAUSSIAN_SPAN};
pub use neighbors::neighbor_list;
pub use structure::{CrystalStructure, Lattice};

use serde::{Deserialize, Serialize};

use crate::chem::{Element, ElementEmbeddingTable, IntegerFormula};
use crate::error::Result;
use crate::tensor::{Scalar, Tensor};

pub const DEFAULT_CUTOFF: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Formula,
    Crystal,
}

impl std::fmt::Display for Domain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Domain::Formula => "formula",
            Domain::Crystal => "crystal",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphWarning {
    /// No site pair fell inside the cutoff; the graph is kept rather than
    /// discarded and message passing degenerates to per-node updates.
    NoEdges,
}

/// Unified graph representation consumed by the model.
#[derive(Debug, Clone)]
pub struct FormulaGraph<T: Scalar> {
    pub domain: Domain,
    /// N x D node attribute matrix; row i belongs to atom i.
    pub node_features: Tensor<T>,
    pub node_elements: Vec<Element>,
    /// Ordered pairs (i, j), i != j; multi-edges allowed in the crystal
    /// domain.
    pub edges: Vec<(usize, usize)>,
    /// E x 20 Gaussian distance expansions; crystal domain only.
    pub edge_features: Option<Tensor<T>>,
    pub warning: Option<GraphWarning>,
}

impl<T: Scalar> FormulaGraph<T> {
    pub fn node_count(&self) -> usize {
        self.node_elements.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Relabel nodes by `perm` (new index of old node i is `perm[i]`),
    /// rewriting edges consistently. Used by invariance tests.
    pub fn permuted(&self, perm: &[usize]) -> FormulaGraph<T> {
        let n = self.node_count();
        assert_eq!(perm.len(), n);
        let d = self.node_features.shape()[1];
        let mut features = vec![T::zero(); n * d];
        let mut elements = vec![self.node_elements[0]; n];
        for (old, &new) in perm.iter().enumerate() {
            features[new * d..(new + 1) * d].copy_from_slice(self.node_features.row(old));
            elements[new] = self.node_elements[old];
        }
        FormulaGraph {
            domain: self.domain,
            node_features: Tensor::new(vec![n, d], features).expect("same size"),
            node_elements: elements,
            edges: self
                .edges
                .iter()
                .map(|&(i, j)| (perm[i], perm[j]))
                .collect(),
            edge_features: self.edge_features.clone(),
            warning: self.warning,
        }
    }
}

fn embed_rows<T: Scalar>(
    elements: &[Element],
    table: &ElementEmbeddingTable,
) -> Result<Tensor<T>> {
    let d = table.dim();
    let mut data = Vec::with_capacity(elements.len() * d);
    for &el in elements {
        data.extend(table.embed(el)?.iter().map(|&v| T::from_f64(v)));
    }
    Tensor::new(vec![elements.len(), d], data)
}

/// Fully connected directed graph over the atoms of an integer formula.
/// Node order is canonical: elements sorted by symbol, repeated by count.
pub fn build_formula_graph<T: Scalar>(
    formula: &IntegerFormula,
    table: &ElementEmbeddingTable,
) -> Result<FormulaGraph<T>> {
    let elements = formula.atom_list();
    let n = elements.len();
    let node_features = embed_rows(&elements, table)?;
    let mut edges = Vec::with_capacity(n.saturating_sub(1) * n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                edges.push((i, j));
            }
        }
    }
    Ok(FormulaGraph {
        domain: Domain::Formula,
        node_features,
        node_elements: elements,
        edges,
        edge_features: None,
        warning: None,
    })
}

/// Cutoff-radius graph over the unit-cell sites with Gaussian-expanded
/// distances as fixed edge attributes.
pub fn build_crystal_graph<T: Scalar>(
    structure: &CrystalStructure,
    table: &ElementEmbeddingTable,
    cutoff: f64,
) -> Result<FormulaGraph<T>> {
    let elements: Vec<Element> = structure.sites().iter().map(|(el, _)| *el).collect();
    let node_features = embed_rows(&elements, table)?;
    let pairs = neighbor_list(structure, cutoff)?;
    let mut edges = Vec::with_capacity(pairs.len());
    let mut feat = Vec::with_capacity(pairs.len() * GAUSSIAN_CENTERS);
    for &(i, j, d) in &pairs {
        edges.push((i, j));
        feat.extend(gaussian_expand(d).iter().map(|&v| T::from_f64(v)));
    }
    let warning = if edges.is_empty() {
        Some(GraphWarning::NoEdges)
    } else {
        None
    };
    let edge_features = if edges.is_empty() {
        None
    } else {
        Some(Tensor::new(vec![edges.len(), GAUSSIAN_CENTERS], feat)?)
    };
    Ok(FormulaGraph {
        domain: Domain::Crystal,
        node_features,
        node_elements: elements,
        edges,
        edge_features,
        warning,
    })
}
