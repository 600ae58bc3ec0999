use std::path::{Path, PathBuf};

use clap::Args;
use log::warn;
use serde::Serialize;
use slicesim_core::compare::{plan_method, slices_for_length, Method, ROUNDING_WARN_FRACTION};
use slicesim_core::degrade::{degrade, DegradationSpec, DegradeError, Provenance};
use slicesim_core::io::write_volume;
use slicesim_core::report::{FORMAT_VERSION, TOOL_VERSION};
use slicesim_core::{SliceGrid, ThickGeometry, Volume};

use super::{load, require_positive, write_json, Context, OutputType};
use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct SimulateArgs {
    /// Thin-slice input volume (.mhd or .mha).
    #[arg(long)]
    input: PathBuf,
    /// Output volume; `.mha` writes a single file, anything else a header plus `.raw`.
    #[arg(long)]
    output: PathBuf,
    /// proposed, simple, gaussian or downsample.
    #[arg(long, default_value = "proposed")]
    method: Method,
    /// Target slice thickness in mm.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    thickness: f64,
    /// Target slice increment in mm.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    increment: f64,
    /// First target location (proposed; defaults to the first thin location).
    #[arg(long, allow_negative_numbers = true)]
    start: Option<f64>,
    /// Last target location (proposed; defaults to the last thin location).
    #[arg(long, allow_negative_numbers = true)]
    end: Option<f64>,
    /// Averaging window in slices (simple; defaults to round(thickness / spacing)).
    #[arg(long)]
    window: Option<usize>,
    /// Output stride in slices (baselines; defaults to round(increment / spacing)).
    #[arg(long)]
    stride: Option<usize>,
    /// Index of the first slice used by the baselines.
    #[arg(long, default_value_t = 0)]
    offset: usize,
    /// Gaussian FWHM in mm (gaussian; defaults to the thickness).
    #[arg(long, allow_negative_numbers = true)]
    fwhm: Option<f64>,
    /// Voxel type of the output volume.
    #[arg(long, value_enum, default_value_t = OutputType::Float)]
    element_type: OutputType,
}

#[derive(Serialize)]
struct SimulationRecord<'a> {
    format_version: u32,
    tool_version: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    generated_at: Option<&'a str>,
    input: String,
    output: String,
    method: &'static str,
    thickness_mm: f64,
    increment_mm: f64,
    input_slices: usize,
    output_slices: usize,
    output_locations_mm: &'a [f64],
    provenance: &'a Provenance,
    warnings: &'a [String],
}

/// `thick.mhd` -> `thick.provenance.json`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    output.with_extension("provenance.json")
}

pub fn run(ctx: &Context, args: SimulateArgs) -> CliResult {
    require_positive("--thickness", args.thickness)?;
    require_positive("--increment", args.increment)?;
    if let Some(f) = args.fwhm {
        require_positive("--fwhm", f)?;
    }
    if args.window == Some(0) {
        return Err(CliError::Usage("--window must be at least 1".into()));
    }
    if args.stride == Some(0) {
        return Err(CliError::Usage("--stride must be at least 1".into()));
    }

    let thin = load(&args.input)?;
    let (spec, warnings) = build_spec(&args, &thin)?;
    for w in &warnings {
        warn!("{w}");
    }
    let degraded = degrade(&thin, &spec)?;
    write_volume(&degraded.volume, &args.output, args.element_type.into())?;

    let record = SimulationRecord {
        format_version: FORMAT_VERSION,
        tool_version: TOOL_VERSION,
        generated_at: ctx.generated_at.as_deref(),
        input: args.input.display().to_string(),
        output: args.output.display().to_string(),
        method: spec.label(),
        thickness_mm: args.thickness,
        increment_mm: args.increment,
        input_slices: thin.n_slices(),
        output_slices: degraded.volume.n_slices(),
        output_locations_mm: degraded.volume.slice_locations_mm(),
        provenance: &degraded.provenance,
        warnings: &warnings,
    };
    write_json(&sidecar_path(&args.output), &record)?;
    println!(
        "{} -> {} ({} -> {} slices, {})",
        args.input.display(),
        args.output.display(),
        thin.n_slices(),
        degraded.volume.n_slices(),
        spec.label()
    );
    Ok(())
}

fn build_spec(args: &SimulateArgs, thin: &Volume) -> CliResult<(DegradationSpec, Vec<String>)> {
    let geometry = ThickGeometry::new(args.thickness, args.increment)?;
    let locs = thin.slice_locations_mm();
    if args.method == Method::Proposed {
        let grid = if args.start.is_some() || args.end.is_some() {
            let start = args.start.unwrap_or(locs[0]);
            let end = args.end.unwrap_or(locs[locs.len() - 1]);
            Some(
                SliceGrid::new(start, end, args.increment)
                    .map_err(|e| CliError::Usage(format!("--start/--end: {e}")))?,
            )
        } else {
            None
        };
        let plan = plan_method(Method::Proposed, thin, geometry, grid)?;
        return Ok((plan.spec, plan.warnings));
    }

    if thin.n_slices() < 2 {
        return Err(DegradeError::TooFewSlices {
            needed: 2,
            actual: thin.n_slices(),
        }
        .into());
    }
    let dz = thin
        .uniform_increment_mm()
        .ok_or(DegradeError::NonUniformSpacing)?
        .abs();
    let mut warnings = Vec::new();
    let mut derive = |flag: &str, explicit: Option<usize>, name: &str, length: f64| {
        explicit.unwrap_or_else(|| {
            let c = slices_for_length(length, dz);
            if c.relative_error > ROUNDING_WARN_FRACTION {
                warnings.push(format!(
                    "{name} {length} mm rounds to {} slices of {dz} mm ({:.1}% off); set {flag} to override",
                    c.slices,
                    100.0 * c.relative_error
                ));
            }
            c.slices
        })
    };
    let spec = match args.method {
        Method::SimpleAverage => {
            let window = derive("--window", args.window, "thickness", args.thickness);
            let stride = derive("--stride", args.stride, "increment", args.increment);
            DegradationSpec::simple_average(window, stride)?
        }
        Method::GaussianAverage => {
            let stride = derive("--stride", args.stride, "increment", args.increment);
            DegradationSpec::gaussian_average(args.fwhm.unwrap_or(args.thickness), stride)?
        }
        Method::DirectDownsample => {
            let stride = derive("--stride", args.stride, "increment", args.increment);
            DegradationSpec::direct_downsample(stride, 0)?
        }
        Method::Proposed => unreachable!(),
    };
    Ok((spec.with_offset(args.offset), warnings))
}
