use ndarray::{Array2, Array3, Axis, Zip};
use rayon::prelude::*;

use super::DegradeError;
use crate::geometry::{slice_locations, triangular_weight, SliceGrid, SliceProfile};
use crate::volume::Volume;

/// Non-zero `(thin_index, weight)` pairs for a thick slice at `thick_mm`,
/// in thin-slice order.
pub fn slice_weights(
    thin_locations: &[f64],
    thick_mm: f64,
    profile: SliceProfile,
) -> Vec<(usize, f64)> {
    thin_locations
        .iter()
        .enumerate()
        .filter_map(|(i, &l)| {
            let w = triangular_weight(thick_mm, l, profile);
            (w > 0.0).then_some((i, w))
        })
        .collect()
}

/// Simulate thick slices on `grid` as triangular-profile weighted means of
/// the thin slices.
///
/// Each output slice is `sum(w * thin) / sum(w)` over thin slices with
/// non-zero weight, accumulated in `f64` in thin-slice order. Thin spacing
/// may be non-uniform. Target slices with truncated support are kept; a
/// target with no support at all is an error.
pub fn simulate_weighted_thick(
    thin: &Volume,
    grid: &SliceGrid,
    profile: SliceProfile,
) -> Result<Volume, DegradeError> {
    let targets = slice_locations(grid);
    let thin_locations = thin.slice_locations_mm();

    let plans = targets
        .iter()
        .map(|&p| {
            let weights = slice_weights(thin_locations, p, profile);
            let total: f64 = weights.iter().map(|&(_, w)| w).sum();
            if total > 0.0 {
                Ok((weights, total))
            } else {
                Err(DegradeError::ZeroTotalWeight { location_mm: p })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;

    let (rows, cols) = thin.in_plane_dims();
    let slices: Vec<Array2<f32>> = plans
        .par_iter()
        .map(|(weights, total)| {
            let mut acc = Array2::<f64>::zeros((rows, cols));
            for &(i, w) in weights {
                Zip::from(&mut acc)
                    .and(&thin.slice(i))
                    .for_each(|a, &v| *a += w * f64::from(v));
            }
            acc.mapv(|a| (a / total) as f32)
        })
        .collect();

    let mut voxels = Array3::<f32>::zeros((targets.len(), rows, cols));
    for (mut dst, src) in voxels.axis_iter_mut(Axis(0)).zip(&slices) {
        dst.assign(src);
    }
    Ok(Volume::new(
        voxels,
        thin.pixel_spacing_mm(),
        targets,
        thin.intensity_domain(),
    )?)
}
