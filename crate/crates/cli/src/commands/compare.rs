use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use log::{info, warn};
use slicesim_core::compare::{compare_methods, ComparisonConfig, ComparisonInput, Method};
use slicesim_core::ThickGeometry;

use super::{
    csv_writer, file_stem, list_volumes, load, mean_std, require_positive, slice_record,
    write_json, Context, SLICE_CSV_HEADER,
};
use crate::error::{CliError, CliResult};

#[derive(Args)]
pub struct CompareArgs {
    /// Thin-slice volume, or a directory of them.
    #[arg(long)]
    thin: PathBuf,
    /// True thick-slice volume, or a directory paired with `--thin` by file stem.
    #[arg(long)]
    reference: PathBuf,
    /// Target slice thickness in mm.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    thickness: f64,
    /// Target slice increment in mm.
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    increment: f64,
    /// Methods to run; must include proposed.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "proposed,simple,gaussian,downsample"
    )]
    methods: Vec<Method>,
    /// Label recorded in the report.
    #[arg(long, default_value = "unlabeled")]
    label: String,
    /// Report JSON.
    #[arg(long)]
    json: PathBuf,
    /// Per-slice metrics of every method.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Compare raw intensities instead of normalizing HU volumes first.
    #[arg(long)]
    no_normalize: bool,
}

pub fn run(ctx: &Context, args: CompareArgs) -> CliResult {
    let geometry = ThickGeometry::new(
        require_positive("--thickness", args.thickness)?,
        require_positive("--increment", args.increment)?,
    )?;
    let pairs = collect_pairs(&args.thin, &args.reference)?;
    let mut inputs = Vec::with_capacity(pairs.len());
    for (pair_id, thin, reference) in &pairs {
        info!("loading pair {pair_id}");
        inputs.push(ComparisonInput {
            pair_id: pair_id.clone(),
            thin: load(thin)?,
            reference: load(reference)?,
        });
    }
    let config = ComparisonConfig {
        dataset_label: args.label.clone(),
        geometry,
        methods: args.methods.clone(),
        max_i: ctx.max_i,
        tol_mm: ctx.tol_mm,
        hu_window: (!args.no_normalize).then_some(ctx.hu_window),
    };
    let mut outcome = compare_methods(&inputs, &config)?;
    outcome.report.meta.generated_at = ctx.generated_at.clone();
    for m in &outcome.report.methods {
        for run in &m.runs {
            for w in &run.warnings {
                warn!("{} / {}: {w}", run.pair_id, m.method);
            }
        }
    }

    write_json(&args.json, &outcome.report)?;
    if let Some(path) = &args.csv {
        let mut w = csv_writer(path)?;
        let header: Vec<&str> = std::iter::once("method").chain(SLICE_CSV_HEADER).collect();
        w.write_record(&header).map_err(|e| CliError::io(path, e))?;
        for row in &outcome.rows {
            let record = slice_record(&row.sample);
            w.write_record(
                std::iter::once(row.method.label()).chain(record.iter().map(String::as_str)),
            )
            .map_err(|e| CliError::io(path, e))?;
        }
        w.flush().map_err(|e| CliError::io(path, e))?;
    }

    let report = &outcome.report;
    println!(
        "{} pairs, {} mm / {} mm, slice-level mean ± std (* p < {} vs proposed)",
        report.n_pairs, report.thickness_mm, report.increment_mm, report.significance_level
    );
    for m in &report.methods {
        let flags = m.significant_vs_proposed;
        let mark = |f: Option<bool>| if f == Some(true) { "*" } else { " " };
        println!(
            "  {:<18} PSNR {:>20}{}  RMSE {:>18}{}",
            m.method,
            mean_std(m.slice.psnr_db.mean, m.slice.psnr_db.std),
            mark(flags.map(|f| f.psnr_db)),
            mean_std(m.slice.rmse.mean, m.slice.rmse.std),
            mark(flags.map(|f| f.rmse)),
        );
    }
    Ok(())
}

/// `(pair_id, thin, reference)` triples from two files or two directories.
fn collect_pairs(thin: &Path, reference: &Path) -> CliResult<Vec<(String, PathBuf, PathBuf)>> {
    match (thin.is_dir(), reference.is_dir()) {
        (false, false) => Ok(vec![(
            file_stem(thin),
            thin.to_path_buf(),
            reference.to_path_buf(),
        )]),
        (true, true) => {
            let refs: BTreeMap<String, PathBuf> = list_volumes(reference)?
                .into_iter()
                .map(|p| (file_stem(&p), p))
                .collect();
            let mut pairs = Vec::new();
            for t in list_volumes(thin)? {
                let id = file_stem(&t);
                match refs.get(&id) {
                    Some(r) => pairs.push((id, t, r.clone())),
                    None => warn!("no reference volume for {}", t.display()),
                }
            }
            if pairs.is_empty() {
                return Err(CliError::Io(format!(
                    "no volume pairs found in {} and {}",
                    thin.display(),
                    reference.display()
                )));
            }
            Ok(pairs)
        }
        _ => Err(CliError::Usage(
            "--thin and --reference must both be files or both be directories".into(),
        )),
    }
}
