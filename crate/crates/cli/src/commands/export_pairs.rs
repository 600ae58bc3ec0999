use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use log::info;
use slicesim_core::compare::{plan_method, Method};
use slicesim_core::degrade::degrade;
use slicesim_core::io::{write_volume, ElementType};
use slicesim_core::report::{ManifestEntry, PairManifest};
use slicesim_core::ThickGeometry;

use super::{file_stem, list_volumes, load, require_positive, write_json, Context};
use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct ExportPairsArgs {
    /// Directory of thin-slice volumes.
    #[arg(long)]
    input_dir: PathBuf,
    /// Directory receiving the thick volumes.
    #[arg(long)]
    output_dir: PathBuf,
    /// Methods used to generate thick counterparts.
    #[arg(long, value_delimiter = ',', default_value = "proposed")]
    methods: Vec<Method>,
    /// Target slice thickness in mm.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    thickness: f64,
    /// Target slice increment in mm.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    increment: f64,
    /// Manifest path (defaults to `manifest.json` in the output directory).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Regenerate thick volumes that already exist.
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true")]
    overwrite: bool,
}

pub fn run(ctx: &Context, args: ExportPairsArgs) -> CliResult {
    let geometry = ThickGeometry::new(
        require_positive("--thickness", args.thickness)?,
        require_positive("--increment", args.increment)?,
    )?;
    let mut methods = args.methods.clone();
    methods.sort();
    methods.dedup();

    let thin_paths = list_volumes(&args.input_dir)?;
    if thin_paths.is_empty() {
        return Err(CliError::Io(format!(
            "no volumes found in {}",
            args.input_dir.display()
        )));
    }
    fs::create_dir_all(&args.output_dir).map_err(|e| CliError::io(&args.output_dir, e))?;
    let manifest_path = args
        .manifest
        .clone()
        .unwrap_or_else(|| args.output_dir.join("manifest.json"));
    let mut manifest = read_manifest(&manifest_path)?;

    let (mut written, mut skipped) = (0usize, 0usize);
    let mut entries = Vec::new();
    for thin_path in &thin_paths {
        let thin = load(thin_path)?;
        let stem = file_stem(thin_path);
        for &method in &methods {
            let plan = plan_method(method, &thin, geometry, None)?;
            let thick_path = args.output_dir.join(format!("{stem}_{method}.mha"));
            if thick_path.exists() && !args.overwrite {
                info!("keeping existing {}", thick_path.display());
                skipped += 1;
            } else {
                let degraded = degrade(&thin, &plan.spec)?;
                write_volume(&degraded.volume, &thick_path, ElementType::Float32)?;
                written += 1;
            }
            entries.push(ManifestEntry {
                pair_id: format!("{stem}__{method}"),
                thin_path: absolute(thin_path)?,
                thick_path: absolute(&thick_path)?,
                method: method.label().to_string(),
                method_params: plan.spec,
                thickness_mm: geometry.thickness_mm,
                increment_mm: geometry.increment_mm,
                hu_window: ctx.hu_window,
            });
        }
    }
    manifest.merge(entries);
    manifest.generated_at = ctx.generated_at.clone();
    write_json(&manifest_path, &manifest)?;
    println!(
        "{} entries in {} ({written} written, {skipped} kept)",
        manifest.entries.len(),
        manifest_path.display()
    );
    Ok(())
}

fn read_manifest(path: &Path) -> CliResult<PairManifest> {
    if !path.exists() {
        return Ok(PairManifest::default());
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| CliError::io(path, e))
}

fn absolute(path: &Path) -> CliResult<String> {
    let p = fs::canonicalize(path).map_err(|e| CliError::io(path, e))?;
    Ok(p.display().to_string())
}
