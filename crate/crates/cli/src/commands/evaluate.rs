use std::path::PathBuf;

use clap::Args;
use slicesim_core::evaluate::{evaluate_aligned, MetricPairSummary};
use slicesim_core::io::ensure_normalized;
use slicesim_core::report::{EvaluationReport, ReportMeta};
use slicesim_core::Volume;

use super::{
    csv_writer, file_stem, load, mean_std, slice_record, write_json, Context, SLICE_CSV_HEADER,
};
use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct EvaluateArgs {
    /// Volume under test.
    #[arg(long)]
    prediction: PathBuf,
    /// Reference volume.
    #[arg(long)]
    reference: PathBuf,
    /// Identifier written to every row (defaults to the prediction file stem).
    #[arg(long)]
    pair_id: Option<String>,
    /// Per-slice metrics CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Summary JSON (printed to stdout when omitted).
    #[arg(long)]
    json: Option<PathBuf>,
    /// Compare raw intensities instead of normalizing HU volumes first.
    #[arg(long)]
    no_normalize: bool,
}

pub fn run(ctx: &Context, args: EvaluateArgs) -> CliResult {
    let pair_id = args
        .pair_id
        .clone()
        .unwrap_or_else(|| file_stem(&args.prediction));
    let prepare = |v: Volume| -> CliResult<Volume> {
        if args.no_normalize {
            Ok(v)
        } else {
            Ok(ensure_normalized(&v, ctx.hu_window)?)
        }
    };
    let pred = prepare(load(&args.prediction)?)?;
    let reference = prepare(load(&args.reference)?)?;
    let eval = evaluate_aligned(&pair_id, &pred, &reference, ctx.max_i, ctx.tol_mm)?;

    if let Some(path) = &args.csv {
        let mut w = csv_writer(path)?;
        w.write_record(SLICE_CSV_HEADER)
            .map_err(|e| CliError::io(path, e))?;
        for s in &eval.slices {
            w.write_record(slice_record(s))
                .map_err(|e| CliError::io(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }

    let mut meta = ReportMeta::new(
        ctx.max_i,
        ctx.tol_mm,
        (!args.no_normalize).then_some(ctx.hu_window),
    );
    meta.generated_at = ctx.generated_at.clone();
    let report = EvaluationReport {
        meta,
        pair_id,
        prediction: args.prediction.display().to_string(),
        reference: args.reference.display().to_string(),
        n_matched_slices: eval.slices.len(),
        slice_summary: MetricPairSummary::from_slices(&eval.slices)
            .map_err(|e| CliError::Domain(e.to_string()))?,
        volume: eval.volume,
    };
    match &args.json {
        Some(path) => {
            write_json(path, &report)?;
            println!(
                "{} matched slices: PSNR {} dB, RMSE {}",
                report.n_matched_slices,
                mean_std(
                    report.slice_summary.psnr_db.mean,
                    report.slice_summary.psnr_db.std
                ),
                mean_std(
                    report.slice_summary.rmse.mean,
                    report.slice_summary.rmse.std
                ),
            );
        }
        None => {
            let text =
                serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
            println!("{text}");
        }
    }
    Ok(())
}
