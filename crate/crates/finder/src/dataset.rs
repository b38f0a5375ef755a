//! Delimited-text dataset ingestion.
//!
//! Comma-separated with a header row. Recognized columns: `composition`
//! (formula string), `target` (scalar) or `target_vector` (semicolon-
//! separated values on the 3000-point grid), optional `structure_file`
//! (path relative to the dataset file) and optional `e_hull_meV`.

use std::path::{Path, PathBuf};

use crate::chem::{parse_formula, to_integer_formula, ElementEmbeddingTable};
use crate::error::{Error, Result};
use crate::graph::{build_crystal_graph, build_formula_graph, CrystalStructure, Domain};
use crate::par;
use crate::spectra::SPECTRUM_POINTS;
use crate::tensor::Scalar;
use crate::train::Sample;

#[derive(Debug, Clone)]
pub enum TargetValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl TargetValue {
    pub fn as_vec(&self) -> Vec<f64> {
        match self {
            TargetValue::Scalar(v) => vec![*v],
            TargetValue::Vector(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetRecord {
    pub composition: String,
    pub target: TargetValue,
    pub structure_file: Option<PathBuf>,
    pub e_hull_mev: Option<f64>,
}

/// Options controlling how records become model-ready samples.
#[derive(Debug, Clone, Copy)]
pub struct PrepareOptions {
    pub domain: Domain,
    pub max_denominator: u64,
    pub node_cap: usize,
    pub cutoff: f64,
}

impl Default for PrepareOptions {
    fn default() -> Self {
        PrepareOptions {
            domain: Domain::Formula,
            max_denominator: crate::chem::DEFAULT_MAX_DENOMINATOR,
            node_cap: crate::chem::DEFAULT_NODE_CAP,
            cutoff: crate::graph::DEFAULT_CUTOFF,
        }
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<DatasetRecord>> {
    let text = std::fs::read_to_string(path)?;
    let origin = path.display().to_string();
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Data {
        path: origin.clone(),
        line: 0,
        message: "empty dataset file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| columns.iter().position(|c| *c == name);
    let col_comp = find("composition").ok_or_else(|| Error::Data {
        path: origin.clone(),
        line: 1,
        message: "header needs a 'composition' column".into(),
    })?;
    let col_target = find("target");
    let col_vector = find("target_vector");
    if col_target.is_none() && col_vector.is_none() {
        return Err(Error::Data {
            path: origin,
            line: 1,
            message: "header needs a 'target' or 'target_vector' column".into(),
        });
    }
    let col_structure = find("structure_file");
    let col_ehull = find("e_hull_meV");

    let mut records = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let data_err = |message: String| Error::Data {
            path: path.display().to_string(),
            line: lineno + 1,
            message,
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |col: usize| -> Result<&str> {
            fields
                .get(col)
                .copied()
                .ok_or_else(|| data_err(format!("missing column {col}")))
        };
        let composition = get(col_comp)?.to_string();
        if composition.is_empty() {
            return Err(data_err("empty composition".into()));
        }
        let target = if let Some(c) = col_vector {
            let raw = get(c)?;
            let values: std::result::Result<Vec<f64>, _> =
                raw.split(';').map(|v| v.trim().parse::<f64>()).collect();
            let values = values.map_err(|e| data_err(format!("bad target_vector value: {e}")))?;
            if values.len() != SPECTRUM_POINTS {
                return Err(data_err(format!(
                    "target_vector needs {SPECTRUM_POINTS} values, got {}",
                    values.len()
                )));
            }
            TargetValue::Vector(values)
        } else {
            let raw = get(col_target.unwrap())?;
            TargetValue::Scalar(
                raw.parse()
                    .map_err(|e| data_err(format!("bad target value '{raw}': {e}")))?,
            )
        };
        let structure_file = match col_structure {
            Some(c) => {
                let raw = fields.get(c).copied().unwrap_or("");
                if raw.is_empty() {
                    None
                } else {
                    Some(PathBuf::from(raw))
                }
            }
            None => None,
        };
        let e_hull_mev = match col_ehull {
            Some(c) => {
                let raw = fields.get(c).copied().unwrap_or("");
                if raw.is_empty() {
                    None
                } else {
                    Some(
                        raw.parse()
                            .map_err(|e| data_err(format!("bad e_hull_meV '{raw}': {e}")))?,
                    )
                }
            }
            None => None,
        };
        records.push(DatasetRecord {
            composition,
            target,
            structure_file,
            e_hull_mev,
        });
    }
    Ok(records)
}

/// Build one sample: parse, reduce, embed and wire the graph.
pub fn prepare_sample<T: Scalar>(
    record: &DatasetRecord,
    table: &ElementEmbeddingTable,
    options: &PrepareOptions,
    base_dir: &Path,
) -> Result<Sample<T>> {
    let graph = match options.domain {
        Domain::Formula => {
            let comp = parse_formula(&record.composition)?;
            let formula = to_integer_formula(&comp, options.max_denominator, options.node_cap)?;
            build_formula_graph::<T>(&formula, table)?
        }
        Domain::Crystal => {
            let rel = record.structure_file.as_ref().ok_or_else(|| {
                Error::InvalidValue(format!(
                    "crystal-domain sample '{}' has no structure_file",
                    record.composition
                ))
            })?;
            let structure = CrystalStructure::load(&base_dir.join(rel))?;
            build_crystal_graph::<T>(&structure, table, options.cutoff)?
        }
    };
    Ok(Sample {
        id: record.composition.clone(),
        graph,
        target: record.target.as_vec(),
    })
}

/// Prepare all records in parallel, failing on the first bad record.
pub fn prepare_samples<T: Scalar>(
    records: &[DatasetRecord],
    table: &ElementEmbeddingTable,
    options: &PrepareOptions,
    base_dir: &Path,
) -> Result<Vec<Sample<T>>> {
    par::map(records, |r| prepare_sample::<T>(r, table, options, base_dir))
        .into_iter()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_scalar_dataset_with_optional_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(
            &path,
            "composition,target,e_hull_meV\nSrTiO3,-3.55,12\nFe2O3,-2.8,\n",
        )
        .unwrap();
        let recs = load_dataset(&path).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0].composition, "SrTiO3");
        assert!(matches!(recs[0].target, TargetValue::Scalar(v) if v == -3.55));
        assert_eq!(recs[0].e_hull_mev, Some(12.0));
        assert_eq!(recs[1].e_hull_mev, None);
    }

    #[test]
    fn vector_targets_must_be_grid_sized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "composition,target_vector\nNaCl,1;2;3\n").unwrap();
        match load_dataset(&path) {
            Err(Error::Data { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn prepares_formula_samples() {
        let rec = DatasetRecord {
            composition: "Cu2Ag2O3".into(),
            target: TargetValue::Scalar(1.0),
            structure_file: None,
            e_hull_mev: None,
        };
        let table = ElementEmbeddingTable::one_hot();
        let s: Sample<f32> =
            prepare_sample(&rec, &table, &PrepareOptions::default(), Path::new(".")).unwrap();
        assert_eq!(s.graph.node_count(), 7);
        assert_eq!(s.graph.edge_count(), 42);
        assert_eq!(s.target, vec![1.0]);
    }

    #[test]
    fn crystal_samples_resolve_structures_relative_to_dataset() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(
            dir.path().join("fe.struct"),
            "lattice: 3 0 0 ; 0 3 0 ; 0 0 3\nsite: Fe 0 0 0\n",
        )
        .unwrap();
        let rec = DatasetRecord {
            composition: "Fe".into(),
            target: TargetValue::Scalar(0.0),
            structure_file: Some(PathBuf::from("fe.struct")),
            e_hull_mev: None,
        };
        let table = ElementEmbeddingTable::one_hot();
        let opts = PrepareOptions {
            domain: Domain::Crystal,
            ..PrepareOptions::default()
        };
        let s: Sample<f32> = prepare_sample(&rec, &table, &opts, dir.path()).unwrap();
        assert_eq!(s.graph.node_count(), 1);
        assert_eq!(s.graph.edge_count(), 6);
    }

    #[test]
    fn missing_header_column_is_a_data_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        std::fs::write(&path, "formula,target\nNaCl,1\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Data { .. })));
    }
}
