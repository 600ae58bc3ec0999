//! In-memory CT volume with explicit per-slice z locations.

use ndarray::{Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance for treating consecutive slice increments as equal.
pub const UNIFORM_SPACING_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum IntensityDomain {
    /// Hounsfield units.
    #[serde(rename = "HU")]
    Hu,
    /// Intensities in `[0, 1]`.
    Normalized01,
}

impl std::fmt::Display for IntensityDomain {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntensityDomain::Hu => f.write_str("HU"),
            IntensityDomain::Normalized01 => f.write_str("Normalized01"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VolumeError {
    #[error("volume must contain at least one slice, row and column (got {0:?})")]
    Empty((usize, usize, usize)),
    #[error("{locations} slice locations given for {slices} slices")]
    LocationCount { slices: usize, locations: usize },
    #[error("slice locations must be finite and strictly monotonic (violated at index {index})")]
    NotMonotonic { index: usize },
    #[error("pixel spacing must be finite and positive, got ({0}, {1})")]
    BadPixelSpacing(f64, f64),
    #[error("non-finite voxel value at (slice {0}, row {1}, col {2})")]
    NonFiniteVoxel(usize, usize, usize),
    #[error(
        "normalized voxel value {value} outside [0, 1] at (slice {slice}, row {row}, col {col})"
    )]
    OutOfUnitRange {
        value: f32,
        slice: usize,
        row: usize,
        col: usize,
    },
}

/// A stack of equally sized slices indexed `(slice, row, col)`.
///
/// Voxels are stored as `f32`. Slice locations may be non-uniform, and may
/// run in either direction as long as they are strictly monotonic.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    voxels: Array3<f32>,
    pixel_spacing_mm: (f64, f64),
    slice_locations_mm: Vec<f64>,
    intensity_domain: IntensityDomain,
}

impl Volume {
    pub fn new(
        voxels: Array3<f32>,
        pixel_spacing_mm: (f64, f64),
        slice_locations_mm: Vec<f64>,
        intensity_domain: IntensityDomain,
    ) -> Result<Self, VolumeError> {
        let dim = voxels.dim();
        if dim.0 == 0 || dim.1 == 0 || dim.2 == 0 {
            return Err(VolumeError::Empty(dim));
        }
        if slice_locations_mm.len() != dim.0 {
            return Err(VolumeError::LocationCount {
                slices: dim.0,
                locations: slice_locations_mm.len(),
            });
        }
        check_monotonic(&slice_locations_mm)?;
        let (sr, sc) = pixel_spacing_mm;
        if !(sr.is_finite() && sr > 0.0 && sc.is_finite() && sc > 0.0) {
            return Err(VolumeError::BadPixelSpacing(sr, sc));
        }
        for ((z, y, x), &v) in voxels.indexed_iter() {
            if !v.is_finite() {
                return Err(VolumeError::NonFiniteVoxel(z, y, x));
            }
            if intensity_domain == IntensityDomain::Normalized01 && !(0.0..=1.0).contains(&v) {
                return Err(VolumeError::OutOfUnitRange {
                    value: v,
                    slice: z,
                    row: y,
                    col: x,
                });
            }
        }
        Ok(Self {
            voxels,
            pixel_spacing_mm,
            slice_locations_mm,
            intensity_domain,
        })
    }

    /// Volume whose slices sit at `first_mm + i * increment_mm`.
    pub fn with_uniform_spacing(
        voxels: Array3<f32>,
        pixel_spacing_mm: (f64, f64),
        first_mm: f64,
        increment_mm: f64,
        intensity_domain: IntensityDomain,
    ) -> Result<Self, VolumeError> {
        let n = voxels.dim().0;
        let locations = (0..n).map(|i| first_mm + i as f64 * increment_mm).collect();
        Self::new(voxels, pixel_spacing_mm, locations, intensity_domain)
    }

    pub fn voxels(&self) -> &Array3<f32> {
        &self.voxels
    }

    pub fn into_voxels(self) -> Array3<f32> {
        self.voxels
    }

    pub fn slice(&self, index: usize) -> ArrayView2<'_, f32> {
        self.voxels.index_axis(Axis(0), index)
    }

    pub fn n_slices(&self) -> usize {
        self.voxels.dim().0
    }

    /// `(rows, cols)` of every slice.
    pub fn in_plane_dims(&self) -> (usize, usize) {
        let (_, r, c) = self.voxels.dim();
        (r, c)
    }

    /// `(row, col)` pixel spacing in millimetres.
    pub fn pixel_spacing_mm(&self) -> (f64, f64) {
        self.pixel_spacing_mm
    }

    pub fn slice_locations_mm(&self) -> &[f64] {
        &self.slice_locations_mm
    }

    pub fn intensity_domain(&self) -> IntensityDomain {
        self.intensity_domain
    }

    /// The signed slice increment if all consecutive increments agree to
    /// within [`UNIFORM_SPACING_RTOL`]; `None` otherwise or for single-slice
    /// volumes.
    pub fn uniform_increment_mm(&self) -> Option<f64> {
        uniform_increment(&self.slice_locations_mm)
    }

    /// Min and max voxel value.
    pub fn value_range(&self) -> (f32, f32) {
        self.voxels
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Same geometry, new voxel data and domain. Used by intensity transforms.
    pub fn map_voxels(
        &self,
        domain: IntensityDomain,
        f: impl Fn(f32) -> f32,
    ) -> Result<Volume, VolumeError> {
        Volume::new(
            self.voxels.mapv(f),
            self.pixel_spacing_mm,
            self.slice_locations_mm.clone(),
            domain,
        )
    }

    /// Sub-volume made of the given slice indices, in order.
    pub fn select_slices(&self, indices: &[usize]) -> Result<Volume, VolumeError> {
        let voxels = self.voxels.select(Axis(0), indices);
        let locations = indices
            .iter()
            .map(|&i| self.slice_locations_mm[i])
            .collect();
        Volume::new(
            voxels,
            self.pixel_spacing_mm,
            locations,
            self.intensity_domain,
        )
    }
}

/// Signed increment of `locations` when uniform (see [`Volume::uniform_increment_mm`]).
pub fn uniform_increment(locations: &[f64]) -> Option<f64> {
    if locations.len() < 2 {
        return None;
    }
    let first = locations[1] - locations[0];
    let uniform = locations.windows(2).all(|w| {
        let step = w[1] - w[0];
        (step - first).abs() <= UNIFORM_SPACING_RTOL * first.abs()
    });
    if !uniform {
        return None;
    }
    // Average over the whole span to avoid picking up rounding in the first step.
    Some((locations[locations.len() - 1] - locations[0]) / (locations.len() - 1) as f64)
}

fn check_monotonic(locations: &[f64]) -> Result<(), VolumeError> {
    if let Some(i) = locations.iter().position(|l| !l.is_finite()) {
        return Err(VolumeError::NotMonotonic { index: i });
    }
    if locations.len() < 2 {
        return Ok(());
    }
    let increasing = locations[1] > locations[0];
    for (i, w) in locations.windows(2).enumerate() {
        let ok = if increasing { w[1] > w[0] } else { w[1] < w[0] };
        if !ok {
            return Err(VolumeError::NotMonotonic { index: i + 1 });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    #[test]
    fn accepts_decreasing_locations() {
        let v = Volume::new(
            Array3::zeros((3, 2, 2)),
            (1.0, 1.0),
            vec![4.0, 2.0, 0.0],
            IntensityDomain::Hu,
        )
        .unwrap();
        assert_eq!(v.uniform_increment_mm(), Some(-2.0));
    }

    #[test]
    fn rejects_invariant_violations() {
        let z = || Array3::<f32>::zeros((3, 2, 2));
        assert!(matches!(
            Volume::new(z(), (1.0, 1.0), vec![0.0, 1.0], IntensityDomain::Hu),
            Err(VolumeError::LocationCount { .. })
        ));
        assert!(matches!(
            Volume::new(z(), (1.0, 1.0), vec![0.0, 1.0, 1.0], IntensityDomain::Hu),
            Err(VolumeError::NotMonotonic { index: 2 })
        ));
        assert!(matches!(
            Volume::new(z(), (1.0, 1.0), vec![0.0, 2.0, 1.0], IntensityDomain::Hu),
            Err(VolumeError::NotMonotonic { index: 2 })
        ));
        assert!(matches!(
            Volume::new(z(), (0.0, 1.0), vec![0.0, 1.0, 2.0], IntensityDomain::Hu),
            Err(VolumeError::BadPixelSpacing(..))
        ));
        let mut bad = z();
        bad[[1, 0, 1]] = f32::NAN;
        assert!(matches!(
            Volume::new(bad, (1.0, 1.0), vec![0.0, 1.0, 2.0], IntensityDomain::Hu),
            Err(VolumeError::NonFiniteVoxel(1, 0, 1))
        ));
        let mut hot = z();
        hot[[0, 0, 0]] = 1.5;
        assert!(matches!(
            Volume::new(
                hot,
                (1.0, 1.0),
                vec![0.0, 1.0, 2.0],
                IntensityDomain::Normalized01
            ),
            Err(VolumeError::OutOfUnitRange { .. })
        ));
        assert!(Volume::new(
            Array3::zeros((0, 2, 2)),
            (1.0, 1.0),
            vec![],
            IntensityDomain::Hu
        )
        .is_err());
    }

    #[test]
    fn uniform_increment_detection() {
        assert_eq!(uniform_increment(&[0.0]), None);
        assert!(uniform_increment(&[0.0, 0.8, 1.6, 2.4]).is_some());
        assert_eq!(uniform_increment(&[0.0, 1.0, 2.5]), None);
    }
}
