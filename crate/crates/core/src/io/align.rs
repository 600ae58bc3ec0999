use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::volume::Volume;

/// Default slice-matching tolerance in mm.
pub const DEFAULT_TOL_MM: f64 = 0.1;

const IN_PLANE_SPACING_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AlignError {
    #[error(
        "in-plane geometry differs: {a_dims:?} @ {a_spacing:?} mm vs {b_dims:?} @ {b_spacing:?} mm"
    )]
    InPlaneMismatch {
        a_dims: (usize, usize),
        b_dims: (usize, usize),
        a_spacing: (f64, f64),
        b_spacing: (f64, f64),
    },
    #[error("no slice locations match within {tol_mm} mm")]
    NoOverlap { tol_mm: f64 },
    #[error("alignment tolerance must be finite and non-negative, got {0}")]
    BadTolerance(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePair {
    pub a_index: usize,
    pub b_index: usize,
    pub a_location_mm: f64,
    pub b_location_mm: f64,
}

/// Pair slices of `a` and `b` whose locations differ by at most `tol_mm`.
///
/// Candidate pairs are taken greedily in order of increasing distance (ties
/// broken by index), each slice used at most once. The result is ordered by
/// the location of the `a` slice.
pub fn align_volumes(a: &Volume, b: &Volume, tol_mm: f64) -> Result<Vec<SlicePair>, AlignError> {
    if !(tol_mm.is_finite() && tol_mm >= 0.0) {
        return Err(AlignError::BadTolerance(tol_mm));
    }
    let (sa, sb) = (a.pixel_spacing_mm(), b.pixel_spacing_mm());
    let spacing_close = |x: f64, y: f64| (x - y).abs() <= IN_PLANE_SPACING_TOL * x.abs().max(1.0);
    if a.in_plane_dims() != b.in_plane_dims()
        || !spacing_close(sa.0, sb.0)
        || !spacing_close(sa.1, sb.1)
    {
        return Err(AlignError::InPlaneMismatch {
            a_dims: a.in_plane_dims(),
            b_dims: b.in_plane_dims(),
            a_spacing: sa,
            b_spacing: sb,
        });
    }
    let pairs = match_locations(a.slice_locations_mm(), b.slice_locations_mm(), tol_mm);
    if pairs.is_empty() {
        return Err(AlignError::NoOverlap { tol_mm });
    }
    Ok(pairs)
}

/// Greedy nearest matching on bare location lists (see [`align_volumes`]).
pub fn match_locations(a: &[f64], b: &[f64], tol_mm: f64) -> Vec<SlicePair> {
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for (i, &la) in a.iter().enumerate() {
        for (j, &lb) in b.iter().enumerate() {
            let d = (la - lb).abs();
            if d <= tol_mm {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));

    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut pairs = Vec::new();
    for (_, i, j) in candidates {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            pairs.push(SlicePair {
                a_index: i,
                b_index: j,
                a_location_mm: a[i],
                b_location_mm: b[j],
            });
        }
    }
    pairs.sort_by(|x, y| x.a_location_mm.total_cmp(&y.a_location_mm));
    pairs
}
