pub mod compare;
pub mod evaluate;
pub mod export_pairs;
pub mod phantom;
pub mod simulate;
pub mod snapshot;

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use slicesim_core::io::{read_volume, ElementType, HuWindow};
use slicesim_core::metrics::SliceSample;
use slicesim_core::{serde_inf, Volume};

use crate::error::{CliError, CliResult};

/// Settings shared by every command.
pub struct Context {
    pub hu_window: HuWindow,
    pub max_i: f64,
    pub tol_mm: f64,
    pub generated_at: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputType {
    /// 32-bit float.
    Float,
    /// 16-bit signed integer (HU volumes only).
    Short,
}

impl From<OutputType> for ElementType {
    fn from(t: OutputType) -> Self {
        match t {
            OutputType::Float => ElementType::Float32,
            OutputType::Short => ElementType::Int16,
        }
    }
}

pub fn load(path: &Path) -> CliResult<Volume> {
    read_volume(path).map_err(|e| match CliError::from(e) {
        CliError::Io(m) if !m.contains(&*path.to_string_lossy()) => {
            CliError::Io(format!("{}: {m}", path.display()))
        }
        other => other,
    })
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::io(path, e))?;
    text.push('\n');
    create_parent(path)?;
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn create_parent(path: &Path) -> CliResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => {
            fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
        }
        _ => Ok(()),
    }
}

pub fn require_positive(flag: &str, value: f64) -> CliResult<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(CliError::Usage(format!(
            "{flag} must be a finite positive number, got {value}"
        )))
    }
}

pub fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into())
}

pub fn is_volume_file(path: &Path) -> bool {
    path.is_file()
        && matches!(
            path.extension()
                .and_then(|e| e.to_str())
                .map(str::to_ascii_lowercase)
                .as_deref(),
            Some("mhd" | "mha")
        )
}

/// Volume files directly inside `dir`, sorted by name.
pub fn list_volumes(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| CliError::io(dir, e))?.path();
        if is_volume_file(&path) {
            paths.push(path);
        }
    }
    paths.sort();
    Ok(paths)
}

pub const SLICE_CSV_HEADER: [&str; 5] =
    ["pair_id", "slice_index", "location_mm", "rmse", "psnr_db"];

pub fn slice_record(s: &SliceSample) -> [String; 5] {
    [
        s.pair_id.clone(),
        s.slice_index.to_string(),
        s.location_mm.to_string(),
        s.rmse.to_string(),
        serde_inf::format(s.psnr_db),
    ]
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    create_parent(path)?;
    csv::Writer::from_path(path).map_err(|e| CliError::io(path, e))
}

/// `mean ± std` for terminal output.
pub fn mean_std(mean: f64, std: f64) -> String {
    if mean.is_finite() {
        format!("{mean:.4} ± {std:.4}")
    } else {
        serde_inf::format(mean)
    }
}
