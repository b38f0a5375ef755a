//! Small readers and report writers shared by the subcommands.

use std::path::{Path, PathBuf};

use finder::error::{Error, Result};
use finder::train::Metrics;

/// One metric value per non-empty line.
pub fn read_run_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        out.push(line.parse().map_err(|e| Error::Data {
            path: path.display().to_string(),
            line: lineno + 1,
            message: format!("bad metric value '{line}': {e}"),
        })?);
    }
    Ok(out)
}

pub struct PredictionRow {
    pub composition: String,
    pub structure_file: Option<PathBuf>,
}

/// Prediction input: a header with a `composition` column and an optional
/// `structure_file` column; other columns are ignored. The flag reports
/// whether the structure column exists at all, so a crystal-domain
/// checkpoint can reject composition-only input up front.
pub fn read_prediction_rows(path: &Path) -> Result<(Vec<PredictionRow>, bool)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Data {
        path: path.display().to_string(),
        line: 0,
        message: "empty input file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let col_comp = columns
        .iter()
        .position(|c| *c == "composition")
        .ok_or_else(|| Error::Data {
            path: path.display().to_string(),
            line: 1,
            message: "header needs a 'composition' column".into(),
        })?;
    let col_structure = columns.iter().position(|c| *c == "structure_file");
    let mut rows = Vec::new();
    for (_, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let composition = fields.get(col_comp).copied().unwrap_or("").to_string();
        let structure_file = col_structure
            .and_then(|c| fields.get(c))
            .filter(|s| !s.is_empty())
            .map(PathBuf::from);
        rows.push(PredictionRow {
            composition,
            structure_file,
        });
    }
    Ok((rows, col_structure.is_some()))
}

pub struct CandidateRow {
    pub composition: String,
    pub e_hull_mev: Option<f64>,
    pub eps_re_file: Option<PathBuf>,
    pub eps_im_file: Option<PathBuf>,
}

pub fn read_candidates(path: &Path) -> Result<Vec<CandidateRow>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Data {
        path: path.display().to_string(),
        line: 0,
        message: "empty candidates file".into(),
    })?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| columns.iter().position(|c| *c == name);
    let col_comp = find("composition").ok_or_else(|| Error::Data {
        path: path.display().to_string(),
        line: 1,
        message: "header needs a 'composition' column".into(),
    })?;
    let col_hull = find("e_hull_meV");
    let col_re = find("eps_re_file");
    let col_im = find("eps_im_file");
    let mut rows = Vec::new();
    for (lineno, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let get_path = |col: Option<usize>| {
            col.and_then(|c| fields.get(c))
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
        };
        let e_hull_mev = match col_hull.and_then(|c| fields.get(c)).filter(|s| !s.is_empty()) {
            Some(raw) => Some(raw.parse().map_err(|e| Error::Data {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad e_hull_meV '{raw}': {e}"),
            })?),
            None => None,
        };
        rows.push(CandidateRow {
            composition: fields.get(col_comp).copied().unwrap_or("").to_string(),
            e_hull_mev,
            eps_re_file: get_path(col_re),
            eps_im_file: get_path(col_im),
        });
    }
    Ok(rows)
}

/// Raw spectrum points: one "energy value" pair per line.
pub fn read_raw_spectrum(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<f64> {
            tok.ok_or_else(|| Error::Data {
                path: path.display().to_string(),
                line: lineno + 1,
                message: "need 'energy value' per line".into(),
            })?
            .parse()
            .map_err(|e| Error::Data {
                path: path.display().to_string(),
                line: lineno + 1,
                message: format!("bad number: {e}"),
            })
        };
        let e = parse(parts.next())?;
        let v = parse(parts.next())?;
        out.push((e, v));
    }
    Ok(out)
}

/// Metrics report: summary block plus the per-sample parity table.
pub fn write_metrics(path: &Path, metrics: &Metrics, json: bool) -> Result<()> {
    if json {
        let per_sample: Vec<serde_json::Value> = metrics
            .per_sample
            .iter()
            .map(|r| {
                serde_json::json!({
                    "id": r.id,
                    "abs_error": r.abs_error,
                    "uncertainty": r.uncertainty,
                })
            })
            .collect();
        let doc = serde_json::json!({
            "mae": metrics.mae,
            "rmse": metrics.rmse,
            "r2": metrics.r2,
            "mad_mae": metrics.mad_mae,
            "per_sample": per_sample,
        });
        std::fs::write(path, serde_json::to_string_pretty(&doc).unwrap())?;
    } else {
        let mut out = String::from("mae,rmse,r2,mad_mae\n");
        out.push_str(&format!(
            "{},{},{},{}\n\n",
            metrics.mae, metrics.rmse, metrics.r2, metrics.mad_mae
        ));
        out.push_str("composition,abs_error,uncertainty\n");
        for r in &metrics.per_sample {
            out.push_str(&format!("{},{},{}\n", r.id, r.abs_error, r.uncertainty));
        }
        std::fs::write(path, out)?;
    }
    Ok(())
}
