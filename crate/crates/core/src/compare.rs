//! Method planning and the four-way method comparison.
//!
//! Physical targets (thickness and increment in mm) are turned into method
//! parameters here, so that `simulate`, `compare` and `export-pairs` derive
//! identical settings from identical flags.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::degrade::{degrade, DegradationSpec, DegradeError};
use crate::evaluate::{evaluate_aligned, EvaluateError, MetricPairSummary};
use crate::geometry::SliceGrid;
use crate::io::{ensure_normalized, match_locations, HuWindow};
use crate::metrics::{MetricSample, SliceSample};
use crate::report::{
    ComparisonReport, MethodReport, PairProvenance, ReportMeta, SignificanceEntry,
    SignificanceFlags, SIGNIFICANCE_LEVEL,
};
use crate::stats::{wilcoxon_signed_rank, StatsError};
use crate::volume::{uniform_increment, Volume, VolumeError};

/// Relative rounding error above which derived slice counts trigger a warning.
pub const ROUNDING_WARN_FRACTION: f64 = 0.10;

#[derive(Debug, Error)]
pub enum CompareError {
    #[error("pair `{pair_id}`, method {method}: {source}")]
    Degrade {
        pair_id: String,
        method: &'static str,
        #[source]
        source: DegradeError,
    },
    #[error("pair `{pair_id}`, method {method}: {source}")]
    Evaluate {
        pair_id: String,
        method: &'static str,
        #[source]
        source: EvaluateError,
    },
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("comparison needs at least one thin/reference pair")]
    NoPairs,
    #[error("comparison needs the proposed method and at least one other method")]
    TooFewMethods,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Proposed,
    SimpleAverage,
    GaussianAverage,
    DirectDownsample,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::Proposed,
        Method::SimpleAverage,
        Method::GaussianAverage,
        Method::DirectDownsample,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::SimpleAverage => "simple_average",
            Method::GaussianAverage => "gaussian_average",
            Method::DirectDownsample => "direct_downsample",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "proposed" | "weighted" => Ok(Method::Proposed),
            "simple" | "simple_average" => Ok(Method::SimpleAverage),
            "gaussian" | "gaussian_average" => Ok(Method::GaussianAverage),
            "downsample" | "direct_downsample" => Ok(Method::DirectDownsample),
            other => Err(format!(
                "unknown method `{other}` (expected proposed, simple, gaussian or downsample)"
            )),
        }
    }
}

/// Target thick-slice geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThickGeometry {
    pub thickness_mm: f64,
    pub increment_mm: f64,
}

impl ThickGeometry {
    /// 3 mm thickness, 2 mm increment.
    pub const LDCT_THICK: ThickGeometry = ThickGeometry {
        thickness_mm: 3.0,
        increment_mm: 2.0,
    };
    /// 1 mm thickness, 0.8 mm increment.
    pub const LDCT_THIN: ThickGeometry = ThickGeometry {
        thickness_mm: 1.0,
        increment_mm: 0.8,
    };

    pub fn new(thickness_mm: f64, increment_mm: f64) -> Result<Self, DegradeError> {
        for (name, v) in [("thickness", thickness_mm), ("increment", increment_mm)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(DegradeError::InvalidParameter {
                    name,
                    reason: format!("must be a finite positive length in mm, got {v}"),
                });
            }
        }
        Ok(Self {
            thickness_mm,
            increment_mm,
        })
    }
}

/// A physical length expressed as a whole number of thin slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceCount {
    pub slices: usize,
    /// `|slices * spacing - length| / length`.
    pub relative_error: f64,
}

pub fn slices_for_length(length_mm: f64, spacing_mm: f64) -> SliceCount {
    let slices = ((length_mm / spacing_mm).round() as usize).max(1);
    SliceCount {
        slices,
        relative_error: (slices as f64 * spacing_mm - length_mm).abs() / length_mm,
    }
}

/// A method spec plus any warnings raised while deriving it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecPlan {
    pub spec: DegradationSpec,
    pub warnings: Vec<String>,
}

/// Default parameters for `method` on `thin`.
///
/// The proposed method targets `grid` when given, otherwise a grid from the
/// first to the last thin location with the geometry's increment. Baselines
/// use `window = round(thickness / dz)`, `stride = round(increment / dz)`
/// and a Gaussian FWHM equal to the thickness.
pub fn plan_method(
    method: Method,
    thin: &Volume,
    geometry: ThickGeometry,
    grid: Option<SliceGrid>,
) -> Result<SpecPlan, DegradeError> {
    let locs = thin.slice_locations_mm();
    if method == Method::Proposed {
        let grid = match grid {
            Some(g) => g,
            None => SliceGrid::new(locs[0], locs[locs.len() - 1], geometry.increment_mm).map_err(
                |e| DegradeError::InvalidParameter {
                    name: "increment",
                    reason: e.to_string(),
                },
            )?,
        };
        return Ok(SpecPlan {
            spec: DegradationSpec::proposed(geometry.thickness_mm, grid)?,
            warnings: Vec::new(),
        });
    }

    if thin.n_slices() < 2 {
        return Err(DegradeError::TooFewSlices {
            needed: 2,
            actual: thin.n_slices(),
        });
    }
    let dz = thin
        .uniform_increment_mm()
        .ok_or(DegradeError::NonUniformSpacing)?
        .abs();
    let mut warnings = Vec::new();
    let mut count = |name: &str, length: f64| {
        let c = slices_for_length(length, dz);
        if c.relative_error > ROUNDING_WARN_FRACTION {
            warnings.push(format!(
                "{name} {length} mm rounds to {} slices of {dz} mm ({:.1}% off)",
                c.slices,
                100.0 * c.relative_error
            ));
        }
        c.slices
    };
    let spec = match method {
        Method::SimpleAverage => {
            let window = count("thickness", geometry.thickness_mm);
            let stride = count("increment", geometry.increment_mm);
            DegradationSpec::simple_average(window, stride)?
        }
        Method::GaussianAverage => {
            let stride = count("increment", geometry.increment_mm);
            DegradationSpec::gaussian_average(geometry.thickness_mm, stride)?
        }
        Method::DirectDownsample => {
            let stride = count("increment", geometry.increment_mm);
            DegradationSpec::direct_downsample(stride, 0)?
        }
        Method::Proposed => unreachable!(),
    };
    Ok(SpecPlan { spec, warnings })
}

/// Plan `method` so its output slices land on `reference_locations`.
///
/// The proposed method targets the reference grid directly when it is
/// uniform. Baselines keep their derived window and stride and pick the
/// starting slice whose output locations match the most reference slices
/// within `tol_mm` (then the smallest total distance, then the smallest
/// offset). Only geometry enters the choice, never voxel values.
pub fn plan_against_reference(
    method: Method,
    thin: &Volume,
    reference_locations: &[f64],
    geometry: ThickGeometry,
    tol_mm: f64,
) -> Result<SpecPlan, DegradeError> {
    if method == Method::Proposed {
        let grid = reference_grid(reference_locations, geometry.increment_mm);
        return plan_method(method, thin, geometry, grid);
    }
    let plan = plan_method(method, thin, geometry, None)?;
    let (stride, _) = plan
        .spec
        .stride_offset()
        .expect("baselines are index based");
    let n = thin.n_slices();
    let mut best: Option<(usize, f64, usize)> = None;
    for offset in 0..stride.min(n) {
        let candidate = plan.spec.clone().with_offset(offset);
        let out = candidate.output_locations(thin);
        if out.is_empty() {
            continue;
        }
        let matches = match_locations(&out, reference_locations, tol_mm);
        let distance: f64 = matches
            .iter()
            .map(|m| (m.a_location_mm - m.b_location_mm).abs())
            .sum();
        let better = match best {
            None => true,
            Some((count, dist, _)) => {
                matches.len() > count || (matches.len() == count && distance < dist - 1e-12)
            }
        };
        if better {
            best = Some((matches.len(), distance, offset));
        }
    }
    let offset = best.map_or(0, |(_, _, o)| o);
    Ok(SpecPlan {
        spec: plan.spec.with_offset(offset),
        warnings: plan.warnings,
    })
}

fn reference_grid(locations: &[f64], fallback_increment: f64) -> Option<SliceGrid> {
    let first = *locations.first()?;
    let last = *locations.last()?;
    let increment = if locations.len() == 1 {
        fallback_increment
    } else {
        uniform_increment(locations)?.abs()
    };
    SliceGrid::new(first, last, increment).ok()
}

/// One thin volume and its true thick counterpart.
#[derive(Debug, Clone)]
pub struct ComparisonInput {
    pub pair_id: String,
    pub thin: Volume,
    pub reference: Volume,
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub dataset_label: String,
    pub geometry: ThickGeometry,
    pub methods: Vec<Method>,
    pub max_i: f64,
    pub tol_mm: f64,
    /// Window for HU inputs; `None` evaluates raw intensities.
    pub hu_window: Option<HuWindow>,
}

impl Default for ComparisonConfig {
    fn default() -> Self {
        Self {
            dataset_label: "unlabeled".into(),
            geometry: ThickGeometry::LDCT_THICK,
            methods: Method::ALL.to_vec(),
            max_i: 1.0,
            tol_mm: crate::io::DEFAULT_TOL_MM,
            hu_window: Some(HuWindow::default()),
        }
    }
}

/// Per-slice metrics of one method on one pair.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodRow {
    pub method: Method,
    pub sample: SliceSample,
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub report: ComparisonReport,
    pub rows: Vec<MethodRow>,
}

/// Degrade and evaluate one method on one pair, the way `simulate` followed by
/// `evaluate` would: degrade in the input domain, then normalize both sides.
pub fn run_method_on_pair(
    input: &ComparisonInput,
    spec: &DegradationSpec,
    config: &ComparisonConfig,
) -> Result<(crate::evaluate::PairEvaluation, crate::degrade::Provenance), CompareError> {
    let method = spec.label();
    let degraded = degrade(&input.thin, spec).map_err(|source| CompareError::Degrade {
        pair_id: input.pair_id.clone(),
        method,
        source,
    })?;
    let (pred, reference) = match config.hu_window {
        Some(w) => (
            ensure_normalized(&degraded.volume, w)?,
            ensure_normalized(&input.reference, w)?,
        ),
        None => (degraded.volume, input.reference.clone()),
    };
    let eval = evaluate_aligned(
        &input.pair_id,
        &pred,
        &reference,
        config.max_i,
        config.tol_mm,
    )
    .map_err(|source| CompareError::Evaluate {
        pair_id: input.pair_id.clone(),
        method,
        source,
    })?;
    Ok((eval, degraded.provenance))
}

/// Run every configured method on every pair, summarize, and test each
/// baseline against the proposed method with paired Wilcoxon tests.
pub fn compare_methods(
    inputs: &[ComparisonInput],
    config: &ComparisonConfig,
) -> Result<ComparisonOutcome, CompareError> {
    if inputs.is_empty() {
        return Err(CompareError::NoPairs);
    }
    let mut methods = config.methods.clone();
    methods.sort();
    methods.dedup();
    if methods.len() < 2 || methods[0] != Method::Proposed {
        return Err(CompareError::TooFewMethods);
    }

    let mut slices: BTreeMap<Method, Vec<SliceSample>> = BTreeMap::new();
    let mut volumes: BTreeMap<Method, Vec<MetricSample>> = BTreeMap::new();
    let mut runs: BTreeMap<Method, Vec<PairProvenance>> = BTreeMap::new();
    let mut rows = Vec::new();

    for input in inputs {
        for &method in &methods {
            let plan = plan_against_reference(
                method,
                &input.thin,
                input.reference.slice_locations_mm(),
                config.geometry,
                config.tol_mm,
            )
            .map_err(|source| CompareError::Degrade {
                pair_id: input.pair_id.clone(),
                method: method.label(),
                source,
            })?;
            let (eval, provenance) = run_method_on_pair(input, &plan.spec, config)?;
            rows.extend(eval.slices.iter().map(|s| MethodRow {
                method,
                sample: s.clone(),
            }));
            slices.entry(method).or_default().extend(eval.slices);
            volumes.entry(method).or_default().push(eval.volume);
            runs.entry(method).or_default().push(PairProvenance {
                pair_id: input.pair_id.clone(),
                provenance,
                warnings: plan.warnings,
            });
        }
    }

    let mut significance = Vec::new();
    let mut flags = BTreeMap::new();
    let proposed_slices = &slices[&Method::Proposed];
    let proposed_volumes = &volumes[&Method::Proposed];
    for &method in &methods[1..] {
        let psnr = slice_test(proposed_slices, &slices[&method], method, "psnr_db", |s| {
            s.psnr_db
        });
        let rmse = slice_test(proposed_slices, &slices[&method], method, "rmse", |s| {
            s.rmse
        });
        flags.insert(
            method,
            SignificanceFlags {
                psnr_db: psnr.significant,
                rmse: rmse.significant,
            },
        );
        significance.push(psnr);
        significance.push(rmse);
        significance.push(volume_test(
            proposed_volumes,
            &volumes[&method],
            method,
            "psnr_db",
            |s| s.psnr_db,
        ));
        significance.push(volume_test(
            proposed_volumes,
            &volumes[&method],
            method,
            "rmse",
            |s| s.rmse,
        ));
    }

    let mut method_reports = Vec::new();
    for &method in &methods {
        method_reports.push(MethodReport {
            method: method.label().to_string(),
            n_slices: slices[&method].len(),
            n_volumes: volumes[&method].len(),
            slice: MetricPairSummary::from_slices(&slices[&method])?,
            volume: MetricPairSummary::from_volumes(&volumes[&method])?,
            significant_vs_proposed: flags.get(&method).copied(),
            runs: runs.remove(&method).unwrap_or_default(),
        });
    }

    let mut ranking_psnr: Vec<&MethodReport> = method_reports.iter().collect();
    ranking_psnr.sort_by(|a, b| b.slice.psnr_db.mean.total_cmp(&a.slice.psnr_db.mean));
    let mut ranking_rmse: Vec<&MethodReport> = method_reports.iter().collect();
    ranking_rmse.sort_by(|a, b| a.slice.rmse.mean.total_cmp(&b.slice.rmse.mean));
    let ranking_psnr = ranking_psnr.iter().map(|m| m.method.clone()).collect();
    let ranking_rmse = ranking_rmse.iter().map(|m| m.method.clone()).collect();

    let mut meta = ReportMeta::new(config.max_i, config.tol_mm, config.hu_window);
    meta.generated_at = None;
    let report = ComparisonReport {
        meta,
        dataset_label: config.dataset_label.clone(),
        thickness_mm: config.geometry.thickness_mm,
        increment_mm: config.geometry.increment_mm,
        n_pairs: inputs.len(),
        zero_difference_handling: "wilcox".into(),
        significance_level: SIGNIFICANCE_LEVEL,
        methods: method_reports,
        significance,
        ranking_psnr,
        ranking_rmse,
    };
    Ok(ComparisonOutcome { report, rows })
}

/// Wilcoxon test on slices matched by `(pair_id, reference slice index)`.
fn slice_test(
    proposed: &[SliceSample],
    baseline: &[SliceSample],
    method: Method,
    metric: &str,
    value: impl Fn(&SliceSample) -> f64,
) -> SignificanceEntry {
    let keyed: BTreeMap<(&str, usize), f64> = baseline
        .iter()
        .map(|s| ((s.pair_id.as_str(), s.slice_index), value(s)))
        .collect();
    let (x, y): (Vec<f64>, Vec<f64>) = proposed
        .iter()
        .filter_map(|s| {
            let b = *keyed.get(&(s.pair_id.as_str(), s.slice_index))?;
            let a = value(s);
            (a.is_finite() && b.is_finite()).then_some((a, b))
        })
        .unzip();
    paired_entry(method, metric, "slice", &x, &y)
}

fn volume_test(
    proposed: &[MetricSample],
    baseline: &[MetricSample],
    method: Method,
    metric: &str,
    value: impl Fn(&MetricSample) -> f64,
) -> SignificanceEntry {
    let (x, y): (Vec<f64>, Vec<f64>) = proposed
        .iter()
        .zip(baseline)
        .map(|(a, b)| (value(a), value(b)))
        .filter(|(a, b)| a.is_finite() && b.is_finite())
        .unzip();
    paired_entry(method, metric, "volume", &x, &y)
}

fn paired_entry(
    method: Method,
    metric: &str,
    granularity: &str,
    x: &[f64],
    y: &[f64],
) -> SignificanceEntry {
    let mut entry = SignificanceEntry {
        baseline: method.label().to_string(),
        reference: Method::Proposed.label().to_string(),
        metric: metric.to_string(),
        granularity: granularity.to_string(),
        n_paired: x.len(),
        p_value: None,
        significant: false,
        wilcoxon: None,
        note: None,
    };
    match wilcoxon_signed_rank(x, y) {
        Ok(result) => {
            entry.p_value = Some(result.p_value);
            entry.significant = result.p_value < SIGNIFICANCE_LEVEL;
            entry.wilcoxon = Some(result);
        }
        Err(StatsError::AllZeroDifferences) => {
            entry.note = Some("all paired differences are zero".into());
        }
        Err(StatsError::EmptyInput) => {
            entry.note = Some("no paired finite samples".into());
        }
        Err(e) => entry.note = Some(e.to_string()),
    }
    entry
}
