//! Thick-slice degradation methods.
//!
//! [`simulate_weighted_thick`] places thick slices on an arbitrary target grid
//! and forms each one as a triangular-profile weighted mean of the thin slices
//! around it. The three baselines ([`simulate_simple_average`],
//! [`simulate_gaussian_average`], [`simulate_direct_downsample`]) reproduce
//! the degradations commonly used to build super-resolution training pairs.
//! [`degrade`] dispatches over all four through a [`DegradationSpec`].

mod baseline;
mod weighted;

use std::collections::BTreeMap;
use std::num::NonZeroUsize;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{SliceGrid, SliceProfile};
use crate::volume::{Volume, VolumeError};

pub use baseline::{
    gaussian_kernel, simulate_direct_downsample, simulate_gaussian_average,
    simulate_gaussian_average_from, simulate_simple_average, simulate_simple_average_from,
    GaussianKernel, FWHM_PER_SIGMA,
};
pub use weighted::{simulate_weighted_thick, slice_weights};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DegradeError {
    #[error(
        "no thin slice contributes to the target slice at {location_mm} mm (total weight is zero)"
    )]
    ZeroTotalWeight { location_mm: f64 },
    #[error("window of {window} slices exceeds the {available} slices available")]
    WindowTooLarge { window: usize, available: usize },
    #[error("offset {offset} is out of range for a volume with {slices} slices")]
    OffsetOutOfRange { offset: usize, slices: usize },
    #[error("thin slice spacing is not uniform; this method requires a uniform slice increment")]
    NonUniformSpacing,
    #[error("method needs at least {needed} slices, volume has {actual}")]
    TooFewSlices { needed: usize, actual: usize },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error(transparent)]
    Volume(#[from] VolumeError),
}

/// Positive length in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct PositiveMm(f64);

impl PositiveMm {
    pub fn new(name: &'static str, value: f64) -> Result<Self, DegradeError> {
        if value.is_finite() && value > 0.0 {
            Ok(Self(value))
        } else {
            Err(DegradeError::InvalidParameter {
                name,
                reason: format!("must be a finite positive length in mm, got {value}"),
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for PositiveMm {
    type Error = DegradeError;

    fn try_from(value: f64) -> Result<Self, Self::Error> {
        PositiveMm::new("length_mm", value)
    }
}

impl From<PositiveMm> for f64 {
    fn from(v: PositiveMm) -> f64 {
        v.0
    }
}

/// Which degradation to apply, with its parameters.
///
/// Zero strides and windows are unrepresentable; non-positive lengths are
/// rejected by the constructors and by deserialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum DegradationSpec {
    /// Triangular slice-profile weighted sum onto an explicit target grid.
    Proposed {
        thickness_mm: SliceProfile,
        grid: SliceGrid,
    },
    SimpleAverage {
        window_slices: NonZeroUsize,
        stride_slices: NonZeroUsize,
        #[serde(default)]
        offset_slices: usize,
    },
    GaussianAverage {
        fwhm_mm: PositiveMm,
        stride_slices: NonZeroUsize,
        #[serde(default)]
        offset_slices: usize,
    },
    DirectDownsample {
        stride_slices: NonZeroUsize,
        #[serde(default)]
        offset_slices: usize,
    },
}

fn nonzero(name: &'static str, v: usize) -> Result<NonZeroUsize, DegradeError> {
    NonZeroUsize::new(v).ok_or(DegradeError::InvalidParameter {
        name,
        reason: "must be at least 1".into(),
    })
}

impl DegradationSpec {
    pub fn proposed(thickness_mm: f64, grid: SliceGrid) -> Result<Self, DegradeError> {
        let profile =
            SliceProfile::new(thickness_mm).map_err(|e| DegradeError::InvalidParameter {
                name: "thickness",
                reason: e.to_string(),
            })?;
        Ok(Self::Proposed {
            thickness_mm: profile,
            grid,
        })
    }

    pub fn simple_average(window: usize, stride: usize) -> Result<Self, DegradeError> {
        Ok(Self::SimpleAverage {
            window_slices: nonzero("window", window)?,
            stride_slices: nonzero("stride", stride)?,
            offset_slices: 0,
        })
    }

    pub fn gaussian_average(fwhm_mm: f64, stride: usize) -> Result<Self, DegradeError> {
        Ok(Self::GaussianAverage {
            fwhm_mm: PositiveMm::new("fwhm", fwhm_mm)?,
            stride_slices: nonzero("stride", stride)?,
            offset_slices: 0,
        })
    }

    pub fn direct_downsample(stride: usize, offset: usize) -> Result<Self, DegradeError> {
        Ok(Self::DirectDownsample {
            stride_slices: nonzero("stride", stride)?,
            offset_slices: offset,
        })
    }

    /// Same method with a different starting slice. No-op for `Proposed`.
    pub fn with_offset(mut self, offset: usize) -> Self {
        match &mut self {
            Self::Proposed { .. } => {}
            Self::SimpleAverage { offset_slices, .. }
            | Self::GaussianAverage { offset_slices, .. }
            | Self::DirectDownsample { offset_slices, .. } => *offset_slices = offset,
        }
        self
    }

    /// Stable snake_case label used in reports and file names.
    pub fn label(&self) -> &'static str {
        match self {
            Self::Proposed { .. } => "proposed",
            Self::SimpleAverage { .. } => "simple_average",
            Self::GaussianAverage { .. } => "gaussian_average",
            Self::DirectDownsample { .. } => "direct_downsample",
        }
    }

    /// `(stride, offset)` for the slice-index based methods.
    pub fn stride_offset(&self) -> Option<(usize, usize)> {
        match *self {
            Self::Proposed { .. } => None,
            Self::SimpleAverage {
                stride_slices,
                offset_slices,
                ..
            }
            | Self::GaussianAverage {
                stride_slices,
                offset_slices,
                ..
            }
            | Self::DirectDownsample {
                stride_slices,
                offset_slices,
            } => Some((stride_slices.get(), offset_slices)),
        }
    }

    /// Slice locations this spec would produce on `thin`, without touching voxels.
    pub fn output_locations(&self, thin: &Volume) -> Vec<f64> {
        let locs = thin.slice_locations_mm();
        let n = locs.len();
        match *self {
            Self::Proposed { grid, .. } => grid.locations(),
            Self::SimpleAverage {
                window_slices,
                stride_slices,
                offset_slices,
            } => {
                let w = window_slices.get();
                (offset_slices..)
                    .step_by(stride_slices.get())
                    .take_while(|&i| i + w <= n)
                    .map(|i| locs[i..i + w].iter().sum::<f64>() / w as f64)
                    .collect()
            }
            Self::GaussianAverage {
                stride_slices,
                offset_slices,
                ..
            }
            | Self::DirectDownsample {
                stride_slices,
                offset_slices,
            } => (offset_slices..n)
                .step_by(stride_slices.get())
                .map(|i| locs[i])
                .collect(),
        }
    }
}

/// Method, parameters and derived quantities behind a degraded volume.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: DegradationSpec,
    pub derived: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Degraded {
    pub volume: Volume,
    pub provenance: Provenance,
}

/// Apply `spec` to `thin`.
pub fn degrade(thin: &Volume, spec: &DegradationSpec) -> Result<Degraded, DegradeError> {
    let mut derived = BTreeMap::new();
    let mut notes = Vec::new();
    derived.insert("input_slices".to_string(), thin.n_slices() as f64);
    let volume = match *spec {
        DegradationSpec::Proposed { thickness_mm, grid } => {
            notes
                .push("weights max(0, 1 - |p - l| / thickness), normalized by total weight".into());
            simulate_weighted_thick(thin, &grid, thickness_mm)?
        }
        DegradationSpec::SimpleAverage {
            window_slices,
            stride_slices,
            offset_slices,
        } => simulate_simple_average_from(
            thin,
            window_slices.get(),
            stride_slices.get(),
            offset_slices,
        )?,
        DegradationSpec::GaussianAverage {
            fwhm_mm,
            stride_slices,
            offset_slices,
        } => {
            let kernel = gaussian_kernel(thin, fwhm_mm.get())?;
            derived.insert("sigma_mm".into(), fwhm_mm.get() / FWHM_PER_SIGMA);
            derived.insert("sigma_slices".into(), kernel.sigma_slices);
            derived.insert("kernel_radius_slices".into(), kernel.radius() as f64);
            notes.push(format!(
                "sigma = fwhm / {FWHM_PER_SIGMA:.4}; kernel truncated at +/-4 sigma, \
                 unit-sum, half-sample symmetric padding"
            ));
            simulate_gaussian_average_from(thin, fwhm_mm.get(), stride_slices.get(), offset_slices)?
        }
        DegradationSpec::DirectDownsample {
            stride_slices,
            offset_slices,
        } => simulate_direct_downsample(thin, stride_slices.get(), offset_slices)?,
    };
    derived.insert("output_slices".to_string(), volume.n_slices() as f64);
    Ok(Degraded {
        volume,
        provenance: Provenance {
            spec: spec.clone(),
            derived,
            notes,
        },
    })
}

/// Reject thin volumes whose slice increment is not uniform.
pub(crate) fn require_uniform(thin: &Volume) -> Result<(), DegradeError> {
    if thin.n_slices() >= 2 && thin.uniform_increment_mm().is_none() {
        return Err(DegradeError::NonUniformSpacing);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::IntensityDomain;
    use ndarray::Array3;

    fn ramp(n: usize) -> Volume {
        let voxels = Array3::from_shape_fn((n, 2, 3), |(z, _, _)| z as f32 + 1.0);
        Volume::with_uniform_spacing(voxels, (0.7, 0.7), 0.0, 1.0, IntensityDomain::Hu).unwrap()
    }

    #[test]
    fn constructors_reject_malformed_specs() {
        assert!(DegradationSpec::direct_downsample(0, 0).is_err());
        assert!(DegradationSpec::simple_average(0, 1).is_err());
        assert!(DegradationSpec::simple_average(3, 0).is_err());
        assert!(DegradationSpec::gaussian_average(0.0, 1).is_err());
        assert!(DegradationSpec::gaussian_average(f64::NAN, 1).is_err());
        let grid = SliceGrid::new(0.0, 1.0, 1.0).unwrap();
        let err = DegradationSpec::proposed(-1.0, grid).unwrap_err();
        assert!(err.to_string().contains("thickness"));
    }

    #[test]
    fn deserialization_rejects_zero_stride() {
        let bad = r#"{"method":"direct_downsample","stride_slices":0,"offset_slices":0}"#;
        assert!(serde_json::from_str::<DegradationSpec>(bad).is_err());
        let bad = r#"{"method":"gaussian_average","fwhm_mm":-3,"stride_slices":2}"#;
        assert!(serde_json::from_str::<DegradationSpec>(bad).is_err());
        let ok = r#"{"method":"direct_downsample","stride_slices":3}"#;
        let spec: DegradationSpec = serde_json::from_str(ok).unwrap();
        assert_eq!(spec, DegradationSpec::direct_downsample(3, 0).unwrap());
    }

    #[test]
    fn dispatch_matches_direct_calls() {
        let thin = ramp(9);
        let grid = SliceGrid::new(0.0, 8.0, 2.0).unwrap();
        let profile = SliceProfile::new(3.0).unwrap();
        let via_spec = degrade(&thin, &DegradationSpec::proposed(3.0, grid).unwrap()).unwrap();
        assert_eq!(
            via_spec.volume,
            simulate_weighted_thick(&thin, &grid, profile).unwrap()
        );

        let via_spec = degrade(&thin, &DegradationSpec::direct_downsample(3, 0).unwrap()).unwrap();
        assert_eq!(
            via_spec.volume,
            simulate_direct_downsample(&thin, 3, 0).unwrap()
        );
        assert_eq!(via_spec.provenance.spec.label(), "direct_downsample");
        assert_eq!(via_spec.provenance.derived["output_slices"], 3.0);
    }

    #[test]
    fn gaussian_provenance_records_sigma() {
        let thin = ramp(9);
        let out = degrade(&thin, &DegradationSpec::gaussian_average(3.0, 2).unwrap()).unwrap();
        let sigma = out.provenance.derived["sigma_mm"];
        assert!((sigma - 3.0 / 2.3548).abs() < 1e-4);
        let json = serde_json::to_string(&out.provenance).unwrap();
        assert!(json.contains("\"method\":\"gaussian_average\""));
    }

    #[test]
    fn output_locations_match_degraded_volumes() {
        let thin = ramp(11);
        let grid = SliceGrid::new(0.0, 10.0, 2.0).unwrap();
        let specs = [
            DegradationSpec::proposed(3.0, grid).unwrap(),
            DegradationSpec::simple_average(3, 2)
                .unwrap()
                .with_offset(1),
            DegradationSpec::gaussian_average(3.0, 2)
                .unwrap()
                .with_offset(1),
            DegradationSpec::direct_downsample(3, 2).unwrap(),
        ];
        for spec in &specs {
            let out = degrade(&thin, spec).unwrap();
            assert_eq!(
                out.volume.slice_locations_mm(),
                spec.output_locations(&thin).as_slice()
            );
        }
    }
}
