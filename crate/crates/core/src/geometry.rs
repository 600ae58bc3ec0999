//! Slice geometry: target slice grids and the triangular slice profile.
//!
//! A thick slice centred at `p` collects tissue from thin slices at `l` with
//! weight `max(0, 1 - |p - l| / s)`, where `s` is the slice thickness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative tolerance used when deciding whether a generated location still
/// lies inside the `[start, end]` range.
pub const ENDPOINT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("slice increment must be a finite positive number, got {0}")]
    NonPositiveIncrement(f64),
    #[error("grid bounds must be finite (start = {start}, end = {end})")]
    NonFiniteBounds { start: f64, end: f64 },
    #[error("slice thickness must be a finite positive number, got {0}")]
    NonPositiveThickness(f64),
}

/// Start / end / increment triple describing where thick slices are placed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSliceGrid")]
pub struct SliceGrid {
    start_mm: f64,
    end_mm: f64,
    increment_mm: f64,
}

#[derive(Deserialize)]
struct RawSliceGrid {
    start_mm: f64,
    end_mm: f64,
    increment_mm: f64,
}

impl TryFrom<RawSliceGrid> for SliceGrid {
    type Error = GeometryError;

    fn try_from(raw: RawSliceGrid) -> Result<Self, Self::Error> {
        SliceGrid::new(raw.start_mm, raw.end_mm, raw.increment_mm)
    }
}

impl SliceGrid {
    pub fn new(start_mm: f64, end_mm: f64, increment_mm: f64) -> Result<Self, GeometryError> {
        if !start_mm.is_finite() || !end_mm.is_finite() {
            return Err(GeometryError::NonFiniteBounds {
                start: start_mm,
                end: end_mm,
            });
        }
        if !(increment_mm.is_finite() && increment_mm > 0.0) {
            return Err(GeometryError::NonPositiveIncrement(increment_mm));
        }
        Ok(Self {
            start_mm,
            end_mm,
            increment_mm,
        })
    }

    pub fn start_mm(&self) -> f64 {
        self.start_mm
    }

    pub fn end_mm(&self) -> f64 {
        self.end_mm
    }

    pub fn increment_mm(&self) -> f64 {
        self.increment_mm
    }

    /// Shorthand for [`slice_locations`].
    pub fn locations(&self) -> Vec<f64> {
        slice_locations(self)
    }
}

/// Slice sensitivity profile: a triangle of half-width `thickness_mm`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct SliceProfile {
    thickness_mm: f64,
}

impl TryFrom<f64> for SliceProfile {
    type Error = GeometryError;

    fn try_from(thickness_mm: f64) -> Result<Self, Self::Error> {
        SliceProfile::new(thickness_mm)
    }
}

impl From<SliceProfile> for f64 {
    fn from(profile: SliceProfile) -> f64 {
        profile.thickness_mm
    }
}

impl SliceProfile {
    pub fn new(thickness_mm: f64) -> Result<Self, GeometryError> {
        if thickness_mm.is_finite() && thickness_mm > 0.0 {
            Ok(Self { thickness_mm })
        } else {
            Err(GeometryError::NonPositiveThickness(thickness_mm))
        }
    }

    pub fn thickness_mm(&self) -> f64 {
        self.thickness_mm
    }

    /// Weight of a thin slice at `thin_mm` for a thick slice centred at `thick_mm`.
    #[inline]
    pub fn weight(&self, thick_mm: f64, thin_mm: f64) -> f64 {
        triangular_weight(thick_mm, thin_mm, *self)
    }
}

/// Locations of the thick slices covered by `grid`.
///
/// Walks from `start` towards `end` in steps of the increment. A start equal
/// to the end yields that single location. Locations are computed as
/// `start + k * D * d` for integer `k`, so no rounding error accumulates, and
/// the end point is kept when it is reached up to [`ENDPOINT_TOLERANCE`].
pub fn slice_locations(grid: &SliceGrid) -> Vec<f64> {
    let (s, e, d) = (grid.start_mm, grid.end_mm, grid.increment_mm);
    if s == e {
        return vec![s];
    }
    let direction = (e - s).signum();
    let span = (e - s).abs();
    let slack = ENDPOINT_TOLERANCE * span.max(1.0);

    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let offset = k as f64 * d;
        if offset > span + slack {
            break;
        }
        out.push(s + direction * offset);
        k += 1;
    }
    out
}

/// Triangular weight `max(0, 1 - |p - l| / s)` for thick location `p` and
/// thin location `l`.
#[inline]
pub fn triangular_weight(thick_mm: f64, thin_mm: f64, profile: SliceProfile) -> f64 {
    (1.0 - (thick_mm - thin_mm).abs() / profile.thickness_mm).max(0.0)
}
