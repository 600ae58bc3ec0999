//! Slice-wise evaluation of a prediction against a reference volume.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::io::{align_volumes, AlignError, SlicePair};
use crate::metrics::{mse, MetricError, MetricSample, SliceSample};
use crate::stats::{summarize, MetricSummary, StatsError};
use crate::volume::Volume;

#[derive(Debug, Error)]
pub enum EvaluateError {
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Metrics of one prediction/reference pair after slice alignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairEvaluation {
    pub pair_id: String,
    pub slices: Vec<SliceSample>,
    /// RMSE and PSNR over every voxel of the matched slices.
    pub volume: MetricSample,
    pub pairs: Vec<SlicePair>,
}

/// Align `pred` to `reference` and compute per-slice and whole-volume metrics.
///
/// Slice indices and locations in the result refer to the reference volume.
pub fn evaluate_aligned(
    pair_id: &str,
    pred: &Volume,
    reference: &Volume,
    max_i: f64,
    tol_mm: f64,
) -> Result<PairEvaluation, EvaluateError> {
    if !(max_i.is_finite() && max_i > 0.0) {
        return Err(MetricError::BadMaxI(max_i).into());
    }
    let pairs = align_volumes(pred, reference, tol_mm)?;
    let mut slices = Vec::with_capacity(pairs.len());
    let mut mse_sum = 0.0;
    for pair in &pairs {
        let slice_mse = mse(&pred.slice(pair.a_index), &reference.slice(pair.b_index))?;
        mse_sum += slice_mse;
        let sample = MetricSample::from_rmse(pair_id, slice_mse.sqrt(), max_i);
        slices.push(SliceSample {
            pair_id: pair_id.to_string(),
            slice_index: pair.b_index,
            location_mm: pair.b_location_mm,
            rmse: sample.rmse,
            psnr_db: sample.psnr_db,
        });
    }
    // Every slice has the same voxel count, so the volume MSE is the mean slice MSE.
    let volume_rmse = (mse_sum / pairs.len() as f64).sqrt();
    Ok(PairEvaluation {
        pair_id: pair_id.to_string(),
        slices,
        volume: MetricSample::from_rmse(pair_id, volume_rmse, max_i),
        pairs,
    })
}

/// PSNR and RMSE summaries of a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricPairSummary {
    pub psnr_db: MetricSummary,
    pub rmse: MetricSummary,
}

impl MetricPairSummary {
    pub fn from_slices<'a>(
        samples: impl IntoIterator<Item = &'a SliceSample> + Clone,
    ) -> Result<Self, StatsError> {
        let psnr: Vec<f64> = samples.clone().into_iter().map(|s| s.psnr_db).collect();
        let rmse: Vec<f64> = samples.into_iter().map(|s| s.rmse).collect();
        Self::from_values(&psnr, &rmse)
    }

    pub fn from_volumes<'a>(
        samples: impl IntoIterator<Item = &'a MetricSample> + Clone,
    ) -> Result<Self, StatsError> {
        let psnr: Vec<f64> = samples.clone().into_iter().map(|s| s.psnr_db).collect();
        let rmse: Vec<f64> = samples.into_iter().map(|s| s.rmse).collect();
        Self::from_values(&psnr, &rmse)
    }

    fn from_values(psnr: &[f64], rmse: &[f64]) -> Result<Self, StatsError> {
        Ok(Self {
            psnr_db: summarize_psnr(psnr)?,
            rmse: summarize("rmse", rmse)?,
        })
    }
}

/// Like [`summarize`], but a sample made only of `+inf` values (identical
/// inputs) yields a summary with `mean = +inf`, `std = 0` and `n = 0`.
pub fn summarize_psnr(samples: &[f64]) -> Result<MetricSummary, StatsError> {
    match summarize("psnr_db", samples) {
        Err(StatsError::NoFiniteSamples { excluded }) if excluded > 0 => Ok(MetricSummary {
            metric_name: "psnr_db".into(),
            mean: f64::INFINITY,
            std: 0.0,
            n: 0,
            excluded_infinite: excluded,
        }),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::IntensityDomain;
    use ndarray::Array3;

    fn vol(values: &[f32], locations: Vec<f64>) -> Volume {
        let voxels = Array3::from_shape_fn((values.len(), 3, 3), |(z, _, _)| values[z]);
        Volume::new(voxels, (1.0, 1.0), locations, IntensityDomain::Normalized01).unwrap()
    }

    #[test]
    fn identical_volumes() {
        let v = vol(&[0.1, 0.2, 0.3], vec![0.0, 1.0, 2.0]);
        let eval = evaluate_aligned("p", &v, &v, 1.0, 0.1).unwrap();
        assert_eq!(eval.slices.len(), 3);
        assert_eq!(eval.volume.rmse, 0.0);
        let summary = MetricPairSummary::from_slices(&eval.slices).unwrap();
        assert_eq!(summary.psnr_db.mean, f64::INFINITY);
        assert_eq!(summary.rmse.mean, 0.0);
    }

    #[test]
    fn constant_offset_on_partial_overlap() {
        let pred = vol(&[0.5, 0.6, 0.7], vec![0.0, 2.0, 4.0]);
        let reference = vol(&[0.4, 0.5, 0.9], vec![0.05, 2.05, 9.0]);
        let eval = evaluate_aligned("p", &pred, &reference, 1.0, 0.1).unwrap();
        assert_eq!(eval.slices.len(), 2);
        assert_eq!(eval.slices[1].slice_index, 1);
        assert_eq!(eval.slices[1].location_mm, 2.05);
        for s in &eval.slices {
            assert!((s.rmse - 0.1).abs() < 1e-6);
            assert!((s.psnr_db - 20.0).abs() < 1e-4);
        }
        assert!((eval.volume.psnr_db - 20.0).abs() < 1e-4);
    }

    #[test]
    fn disjoint_ranges_fail() {
        let a = vol(&[0.5, 0.6], vec![0.0, 1.0]);
        let b = vol(&[0.5, 0.6], vec![10.0, 11.0]);
        assert!(matches!(
            evaluate_aligned("p", &a, &b, 1.0, 0.1),
            Err(EvaluateError::Align(AlignError::NoOverlap { .. }))
        ));
    }
}
