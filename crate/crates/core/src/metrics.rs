//! Image-quality metrics: MSE, RMSE and PSNR.
//!
//! All sums run in `f64` over every element of the inputs, so a 3-D volume
//! is treated as one flattened image. PSNR of identical inputs is
//! `f64::INFINITY`.

use ndarray::{ArrayBase, Data, Dimension, Zip};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::serde_inf;
use crate::volume::Volume;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("MAX_I must be a finite positive number, got {0}")]
    BadMaxI(f64),
    #[error("cannot compute metrics over zero elements")]
    Empty,
}

fn check_shapes<S, T, D>(a: &ArrayBase<S, D>, b: &ArrayBase<T, D>) -> Result<(), MetricError>
where
    S: Data<Elem = f32>,
    T: Data<Elem = f32>,
    D: Dimension,
{
    if a.shape() != b.shape() {
        return Err(MetricError::ShapeMismatch {
            left: a.shape().to_vec(),
            right: b.shape().to_vec(),
        });
    }
    if a.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Mean of squared element-wise differences.
pub fn mse<S, T, D>(a: &ArrayBase<S, D>, b: &ArrayBase<T, D>) -> Result<f64, MetricError>
where
    S: Data<Elem = f32>,
    T: Data<Elem = f32>,
    D: Dimension,
{
    check_shapes(a, b)?;
    let mut sum = 0.0f64;
    Zip::from(a).and(b).for_each(|&x, &y| {
        let d = f64::from(x) - f64::from(y);
        sum += d * d;
    });
    Ok(sum / a.len() as f64)
}

pub fn rmse<S, T, D>(a: &ArrayBase<S, D>, b: &ArrayBase<T, D>) -> Result<f64, MetricError>
where
    S: Data<Elem = f32>,
    T: Data<Elem = f32>,
    D: Dimension,
{
    mse(a, b).map(f64::sqrt)
}

/// `20 log10(max_i / rmse)`, or `+inf` when the inputs are identical.
pub fn psnr<S, T, D>(
    a: &ArrayBase<S, D>,
    b: &ArrayBase<T, D>,
    max_i: f64,
) -> Result<f64, MetricError>
where
    S: Data<Elem = f32>,
    T: Data<Elem = f32>,
    D: Dimension,
{
    check_max_i(max_i)?;
    Ok(psnr_from_rmse(rmse(a, b)?, max_i))
}

pub fn psnr_from_rmse(rmse: f64, max_i: f64) -> f64 {
    if rmse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (max_i / rmse).log10()
    }
}

fn check_max_i(max_i: f64) -> Result<(), MetricError> {
    if max_i.is_finite() && max_i > 0.0 {
        Ok(())
    } else {
        Err(MetricError::BadMaxI(max_i))
    }
}

/// PSNR and RMSE of one prediction/reference pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub pair_id: String,
    #[serde(with = "serde_inf")]
    pub psnr_db: f64,
    pub rmse: f64,
}

impl MetricSample {
    pub fn from_rmse(pair_id: impl Into<String>, rmse: f64, max_i: f64) -> Self {
        Self {
            pair_id: pair_id.into(),
            psnr_db: psnr_from_rmse(rmse, max_i),
            rmse,
        }
    }
}

/// Metrics for one aligned slice pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSample {
    pub pair_id: String,
    /// Index into the reference volume.
    pub slice_index: usize,
    pub location_mm: f64,
    pub rmse: f64,
    #[serde(with = "serde_inf")]
    pub psnr_db: f64,
}

/// Whole-volume metrics for two volumes already on the same slice grid.
pub fn evaluate_pair(
    pred: &Volume,
    reference: &Volume,
    max_i: f64,
) -> Result<MetricSample, MetricError> {
    check_max_i(max_i)?;
    let rmse = rmse(pred.voxels(), reference.voxels())?;
    Ok(MetricSample::from_rmse("", rmse, max_i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::IntensityDomain;
    use ndarray::{arr1, Array3};

    #[test]
    fn mse_examples() {
        let a = arr1(&[0.0f32, 1.0]);
        let b = arr1(&[1.0f32, 1.0]);
        assert_eq!(mse(&a, &b).unwrap(), 0.5);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let z = Array3::<f32>::zeros((2, 3, 4));
        let c = Array3::<f32>::from_elem((2, 3, 4), 0.1);
        assert!((mse(&z, &c).unwrap() - 0.01).abs() < 1e-7);
        assert!((rmse(&z, &c).unwrap() - 0.1).abs() < 1e-7);
    }

    #[test]
    fn psnr_examples() {
        assert!((psnr_from_rmse(0.1, 1.0) - 20.0).abs() < 1e-12);
        let a = arr1(&[0.25f32, 0.5]);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn shape_mismatch() {
        let a = arr1(&[0.0f32, 1.0]);
        let b = arr1(&[0.0f32, 1.0, 2.0]);
        assert!(matches!(
            mse(&a, &b),
            Err(MetricError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn evaluate_pair_cases() {
        let mk = |v: f32, n: usize| {
            Volume::with_uniform_spacing(
                Array3::from_elem((n, 4, 4), v),
                (1.0, 1.0),
                0.0,
                1.0,
                IntensityDomain::Normalized01,
            )
            .unwrap()
        };
        let same = evaluate_pair(&mk(0.3, 3), &mk(0.3, 3), 1.0).unwrap();
        assert_eq!(same.rmse, 0.0);
        assert_eq!(same.psnr_db, f64::INFINITY);

        let off = evaluate_pair(&mk(0.4, 3), &mk(0.3, 3), 1.0).unwrap();
        assert!((off.rmse - 0.1).abs() < 1e-6);
        assert!((off.psnr_db - 20.0).abs() < 1e-4);

        assert!(matches!(
            evaluate_pair(&mk(0.4, 3), &mk(0.3, 4), 1.0),
            Err(MetricError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn sample_serializes_infinity_as_string() {
        let s = MetricSample::from_rmse("a", 0.0, 1.0);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"{"pair_id":"a","psnr_db":"inf","rmse":0.0}"#);
        let back: MetricSample = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
