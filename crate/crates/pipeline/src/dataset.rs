//! Dataset file format: one record per line with the scene file and the
//! `(c_t, c_goal, c_next)` configuration triple, floats printed with 17
//! significant digits so files are byte-stable. `#` lines carry metadata.

use crate::config::ConfigError;
use mnp_core::geometry::Scene;
use mnp_core::nets::{Dataset, TrainingSample};
use mnp_core::robots::Configuration;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {0}: {1}")]
    Line(usize, String),
    #[error("scene file {0}: {1}")]
    Scene(String, String),
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// A dataset record before scene resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub scene_file: String,
    pub c_t: Vec<f64>,
    pub c_goal: Vec<f64>,
    pub c_next: Vec<f64>,
}

pub fn write_records(records: &[Record], dim: usize, header: &[(String, String)]) -> String {
    let mut out = String::new();
    out.push_str("# dataset v1\n");
    let _ = writeln!(out, "# config_dim: {dim}");
    for (k, v) in header {
        let _ = writeln!(out, "# {k}: {v}");
    }
    out.push_str("# columns: scene_file c_t c_goal c_next\n");
    for r in records {
        out.push_str(&r.scene_file);
        for v in r.c_t.iter().chain(&r.c_goal).chain(&r.c_next) {
            out.push(' ');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    out
}

pub fn parse_records(text: &str) -> Result<(Vec<Record>, usize), DatasetError> {
    let mut dim = 0usize;
    let mut records = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if let Some(v) = rest.trim().strip_prefix("config_dim:") {
                dim = v
                    .trim()
                    .parse()
                    .map_err(|_| DatasetError::Line(lineno + 1, "bad config_dim".into()))?;
            }
            continue;
        }
        if dim == 0 {
            return Err(DatasetError::Line(lineno + 1, "config_dim header missing".into()));
        }
        let mut parts = line.split_whitespace();
        let scene_file = parts
            .next()
            .ok_or_else(|| DatasetError::Line(lineno + 1, "missing scene file".into()))?
            .to_string();
        let floats: Result<Vec<f64>, _> = parts.map(str::parse::<f64>).collect();
        let floats =
            floats.map_err(|e| DatasetError::Line(lineno + 1, format!("bad float: {e}")))?;
        if floats.len() != 3 * dim {
            return Err(DatasetError::Line(
                lineno + 1,
                format!("expected {} floats, got {}", 3 * dim, floats.len()),
            ));
        }
        records.push(Record {
            scene_file,
            c_t: floats[..dim].to_vec(),
            c_goal: floats[dim..2 * dim].to_vec(),
            c_next: floats[2 * dim..].to_vec(),
        });
    }
    Ok((records, dim))
}

/// Load a dataset file and the scenes it references (paths are relative to
/// `base_dir`). Scenes are deduplicated in first-appearance order.
pub fn load_dataset(path: &Path, base_dir: &Path) -> Result<Dataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    let (records, _) = parse_records(&text)?;

    let mut scene_ids: BTreeMap<String, usize> = BTreeMap::new();
    let mut scenes: Vec<Scene> = Vec::new();
    let mut samples = Vec::with_capacity(records.len());
    for r in records {
        let scene_id = match scene_ids.get(&r.scene_file) {
            Some(id) => *id,
            None => {
                let full = base_dir.join(&r.scene_file);
                let text = std::fs::read_to_string(&full)
                    .map_err(|e| DatasetError::Scene(r.scene_file.clone(), e.to_string()))?;
                let scene = Scene::from_json_str(&text)
                    .map_err(|e| DatasetError::Scene(r.scene_file.clone(), e.to_string()))?;
                let id = scenes.len();
                scenes.push(scene);
                scene_ids.insert(r.scene_file.clone(), id);
                id
            }
        };
        samples.push(TrainingSample {
            scene_id,
            c_t: Configuration(r.c_t),
            c_goal: Configuration(r.c_goal),
            c_next: Configuration(r.c_next),
        });
    }
    Ok(Dataset { scenes, samples })
}

impl From<DatasetError> for ConfigError {
    fn from(e: DatasetError) -> Self {
        ConfigError::Invalid(e.to_string())
    }
}
