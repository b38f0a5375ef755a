//! Model bundles: checkpoint container plus a JSON manifest holding the
//! architecture, the embedding table metadata, and normalizer constants.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chem::{Element, ElementEmbeddingTable, EmbeddingSource};
use crate::error::{Error, Result};
use crate::model::{FinderConfig, FinderModel};
use crate::tensor::{read_checkpoint, write_checkpoint, Scalar, Tensor};

const EMBED_ENTRY: &str = "embedding.table";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelManifest {
    pub schema: u32,
    pub config: FinderConfig,
    pub key_dim: usize,
    pub seed: u64,
    pub embedding_source: String,
    pub embedding_dim: usize,
    /// Symbols covered by the stored table, in stored row order; empty for
    /// the rebuilt one-hot table.
    pub embedding_symbols: Vec<String>,
    pub normalizer_mean: Option<f64>,
    pub normalizer_std: Option<f64>,
}

pub struct ModelBundle<T: Scalar> {
    pub model: FinderModel<T>,
    pub embedding: ElementEmbeddingTable,
    pub normalizer: Option<(f64, f64)>,
    pub manifest: ModelManifest,
}

pub fn save_bundle<T: Scalar>(
    path: &Path,
    model: &FinderModel<T>,
    embedding: &ElementEmbeddingTable,
    normalizer: Option<(f64, f64)>,
) -> Result<()> {
    let mut symbols = Vec::new();
    let mut entries: Vec<(String, &Tensor<T>)> = model
        .params()
        .iter()
        .map(|(_, p)| (p.name().to_string(), p.tensor()))
        .collect();
    let embed_tensor;
    if embedding.source() == EmbeddingSource::Pretrained {
        let rows = embedding.rows();
        let dim = embedding.dim();
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (el, v) in &rows {
            symbols.push(el.symbol().to_string());
            data.extend(v.iter().map(|&x| T::from_f64(x)));
        }
        embed_tensor = Tensor::new(vec![rows.len(), dim], data)?;
        entries.push((EMBED_ENTRY.to_string(), &embed_tensor));
    }
    let manifest = ModelManifest {
        schema: 1,
        config: model.config().clone(),
        key_dim: model.config().key_dim(),
        seed: model.seed(),
        embedding_source: match embedding.source() {
            EmbeddingSource::OneHot => "one-hot".to_string(),
            EmbeddingSource::Pretrained => "pretrained".to_string(),
        },
        embedding_dim: embedding.dim(),
        embedding_symbols: symbols,
        normalizer_mean: normalizer.map(|(m, _)| m),
        normalizer_std: normalizer.map(|(_, s)| s),
    };
    let manifest_json = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Error::Checkpoint(format!("manifest serialization: {e}")))?;
    write_checkpoint(path, &manifest_json, &entries)
}

pub fn load_bundle<T: Scalar>(path: &Path) -> Result<ModelBundle<T>> {
    let (manifest_json, entries) = read_checkpoint::<T>(path)?;
    let manifest: ModelManifest = serde_json::from_str(&manifest_json)
        .map_err(|e| Error::Checkpoint(format!("manifest parse: {e}")))?;
    let mut model = FinderModel::<T>::new(manifest.config.clone(), manifest.seed)?;

    let mut params = Vec::new();
    let mut embed_entry = None;
    for e in entries {
        if e.name == EMBED_ENTRY {
            embed_entry = Some(e.tensor);
        } else {
            params.push((e.name, e.tensor));
        }
    }
    model.load_params(&params)?;

    let embedding = match manifest.embedding_source.as_str() {
        "one-hot" => ElementEmbeddingTable::one_hot(),
        "pretrained" => {
            let table = embed_entry.ok_or_else(|| {
                Error::Checkpoint("pretrained bundle is missing the embedding table".into())
            })?;
            let dim = manifest.embedding_dim;
            let mut rows = Vec::with_capacity(manifest.embedding_symbols.len());
            for (r, sym) in manifest.embedding_symbols.iter().enumerate() {
                let el = Element::from_symbol(sym)?;
                rows.push((el, table.row(r)[..dim].iter().map(|v| v.as_f64()).collect()));
            }
            ElementEmbeddingTable::from_rows(rows)?
        }
        other => {
            return Err(Error::Checkpoint(format!(
                "unknown embedding source '{other}'"
            )))
        }
    };
    let normalizer = match (manifest.normalizer_mean, manifest.normalizer_std) {
        (Some(m), Some(s)) => Some((m, s)),
        _ => None,
    };
    Ok(ModelBundle {
        model,
        embedding,
        normalizer,
        manifest,
    })
}
