use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::{IntensityDomain, Volume, VolumeError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WindowError {
    #[error("HU window needs finite lo < hi, got ({lo}, {hi})")]
    Invalid { lo: f64, hi: f64 },
}

/// HU range mapped linearly onto `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HuWindow {
    lo_hu: f64,
    hi_hu: f64,
}

impl Default for HuWindow {
    /// The full 12-bit CT range, `[-1024, 3071]`.
    fn default() -> Self {
        Self {
            lo_hu: -1024.0,
            hi_hu: 3071.0,
        }
    }
}

impl HuWindow {
    pub fn new(lo_hu: f64, hi_hu: f64) -> Result<Self, WindowError> {
        if lo_hu.is_finite() && hi_hu.is_finite() && lo_hu < hi_hu {
            Ok(Self { lo_hu, hi_hu })
        } else {
            Err(WindowError::Invalid {
                lo: lo_hu,
                hi: hi_hu,
            })
        }
    }

    pub fn lo_hu(&self) -> f64 {
        self.lo_hu
    }

    pub fn hi_hu(&self) -> f64 {
        self.hi_hu
    }

    #[inline]
    pub fn apply(&self, hu: f32) -> f32 {
        let t = (f64::from(hu) - self.lo_hu) / (self.hi_hu - self.lo_hu);
        (t as f32).clamp(0.0, 1.0)
    }
}

/// `clamp((hu - lo) / (hi - lo), 0, 1)` voxel-wise; the result is `Normalized01`.
pub fn normalize_hu(volume: &Volume, window: HuWindow) -> Result<Volume, VolumeError> {
    volume.map_voxels(IntensityDomain::Normalized01, |v| window.apply(v))
}

/// Normalize HU volumes, pass `Normalized01` ones through untouched.
pub fn ensure_normalized(volume: &Volume, window: HuWindow) -> Result<Volume, VolumeError> {
    match volume.intensity_domain() {
        IntensityDomain::Hu => normalize_hu(volume, window),
        IntensityDomain::Normalized01 => Ok(volume.clone()),
    }
}
