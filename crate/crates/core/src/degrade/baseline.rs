//! Baseline degradations: slab averaging, z-axis Gaussian smoothing followed
//! by decimation, and plain slice decimation. All three work in slice-index
//! space and need a uniform thin increment.

use ndarray::{Array2, Array3, Axis, Zip};

use super::{require_uniform, DegradeError};
use crate::volume::Volume;

/// Ratio between the full width at half maximum and the standard deviation
/// of a Gaussian, `2 * sqrt(2 ln 2)`.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

/// Below this many slices the sampled Gaussian is replaced by the identity.
const MIN_SIGMA_SLICES: f64 = 0.5;

/// Symmetric, unit-sum discrete Gaussian along z.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianKernel {
    pub sigma_slices: f64,
    /// Taps for offsets `-radius..=radius`.
    pub weights: Vec<f64>,
}

impl GaussianKernel {
    /// Kernel sampled at integer offsets `|k| <= 4 sigma`, renormalized to
    /// unit sum. Sigma below half a slice gives the identity kernel.
    pub fn from_sigma_slices(sigma_slices: f64) -> Self {
        if sigma_slices < MIN_SIGMA_SLICES {
            return Self {
                sigma_slices,
                weights: vec![1.0],
            };
        }
        let radius = (4.0 * sigma_slices + 1e-9).floor() as i64;
        let denom = 2.0 * sigma_slices * sigma_slices;
        let raw: Vec<f64> = (-radius..=radius)
            .map(|k| (-((k * k) as f64) / denom).exp())
            .collect();
        let sum: f64 = raw.iter().sum();
        Self {
            sigma_slices,
            weights: raw.into_iter().map(|w| w / sum).collect(),
        }
    }

    pub fn radius(&self) -> usize {
        self.weights.len() / 2
    }
}

/// Kernel for a thin volume and a FWHM in millimetres.
pub fn gaussian_kernel(thin: &Volume, fwhm_mm: f64) -> Result<GaussianKernel, DegradeError> {
    if !(fwhm_mm.is_finite() && fwhm_mm > 0.0) {
        return Err(DegradeError::InvalidParameter {
            name: "fwhm",
            reason: format!("must be a finite positive length in mm, got {fwhm_mm}"),
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
    Ok(GaussianKernel::from_sigma_slices(
        fwhm_mm / FWHM_PER_SIGMA / dz,
    ))
}

/// Mean of `window` consecutive thin slices every `stride` slices.
///
/// Output slice `j` averages thin slices `[j*stride, j*stride + window)` and
/// sits at the mean of their locations. Only full windows are produced.
pub fn simulate_simple_average(
    thin: &Volume,
    window: usize,
    stride: usize,
) -> Result<Volume, DegradeError> {
    simulate_simple_average_from(thin, window, stride, 0)
}

/// [`simulate_simple_average`] with windows starting at thin slice `offset`.
pub fn simulate_simple_average_from(
    thin: &Volume,
    window: usize,
    stride: usize,
    offset: usize,
) -> Result<Volume, DegradeError> {
    check_stride(stride)?;
    if window == 0 {
        return Err(DegradeError::InvalidParameter {
            name: "window",
            reason: "must be at least 1".into(),
        });
    }
    let n = thin.n_slices();
    if offset >= n {
        return Err(DegradeError::OffsetOutOfRange { offset, slices: n });
    }
    if window > n - offset {
        return Err(DegradeError::WindowTooLarge {
            window,
            available: n - offset,
        });
    }
    require_uniform(thin)?;

    let starts: Vec<usize> = (offset..)
        .step_by(stride)
        .take_while(|&i| i + window <= n)
        .collect();
    let (rows, cols) = thin.in_plane_dims();
    let locs = thin.slice_locations_mm();
    let mut voxels = Array3::<f32>::zeros((starts.len(), rows, cols));
    let mut locations = Vec::with_capacity(starts.len());
    for (mut dst, &start) in voxels.axis_iter_mut(Axis(0)).zip(&starts) {
        let mut acc = Array2::<f64>::zeros((rows, cols));
        for i in start..start + window {
            Zip::from(&mut acc)
                .and(&thin.slice(i))
                .for_each(|a, &v| *a += f64::from(v));
        }
        Zip::from(&mut dst)
            .and(&acc)
            .for_each(|d, &a| *d = (a / window as f64) as f32);
        locations.push(locs[start..start + window].iter().sum::<f64>() / window as f64);
    }
    Ok(Volume::new(
        voxels,
        thin.pixel_spacing_mm(),
        locations,
        thin.intensity_domain(),
    )?)
}

/// Gaussian smoothing along z (sigma from the FWHM in mm), then every
/// `stride`-th slice from index 0.
pub fn simulate_gaussian_average(
    thin: &Volume,
    fwhm_mm: f64,
    stride: usize,
) -> Result<Volume, DegradeError> {
    simulate_gaussian_average_from(thin, fwhm_mm, stride, 0)
}

/// [`simulate_gaussian_average`] keeping slices `offset, offset + stride, ...`.
pub fn simulate_gaussian_average_from(
    thin: &Volume,
    fwhm_mm: f64,
    stride: usize,
    offset: usize,
) -> Result<Volume, DegradeError> {
    check_stride(stride)?;
    let kernel = gaussian_kernel(thin, fwhm_mm)?;
    let n = thin.n_slices();
    if offset >= n {
        return Err(DegradeError::OffsetOutOfRange { offset, slices: n });
    }
    let radius = kernel.radius() as i64;
    let kept: Vec<usize> = (offset..n).step_by(stride).collect();
    let (rows, cols) = thin.in_plane_dims();
    let mut voxels = Array3::<f32>::zeros((kept.len(), rows, cols));
    for (mut dst, &center) in voxels.axis_iter_mut(Axis(0)).zip(&kept) {
        let mut acc = Array2::<f64>::zeros((rows, cols));
        for (tap, &w) in kernel.weights.iter().enumerate() {
            let src = reflect_index(center as i64 + tap as i64 - radius, n);
            Zip::from(&mut acc)
                .and(&thin.slice(src))
                .for_each(|a, &v| *a += w * f64::from(v));
        }
        Zip::from(&mut dst)
            .and(&acc)
            .for_each(|d, &a| *d = a as f32);
    }
    let locs = thin.slice_locations_mm();
    Ok(Volume::new(
        voxels,
        thin.pixel_spacing_mm(),
        kept.iter().map(|&i| locs[i]).collect(),
        thin.intensity_domain(),
    )?)
}

/// Thin slices `offset, offset + stride, ...`, copied unchanged.
pub fn simulate_direct_downsample(
    thin: &Volume,
    stride: usize,
    offset: usize,
) -> Result<Volume, DegradeError> {
    check_stride(stride)?;
    let n = thin.n_slices();
    if offset >= n {
        return Err(DegradeError::OffsetOutOfRange { offset, slices: n });
    }
    require_uniform(thin)?;
    let kept: Vec<usize> = (offset..n).step_by(stride).collect();
    Ok(thin.select_slices(&kept)?)
}

fn check_stride(stride: usize) -> Result<(), DegradeError> {
    if stride == 0 {
        return Err(DegradeError::InvalidParameter {
            name: "stride",
            reason: "must be at least 1".into(),
        });
    }
    Ok(())
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m < n { m } else { period - 1 - m }) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::IntensityDomain;

    fn slices(values: &[f32]) -> Volume {
        let voxels = Array3::from_shape_fn((values.len(), 2, 2), |(z, _, _)| values[z]);
        Volume::with_uniform_spacing(voxels, (1.0, 1.0), 0.0, 1.0, IntensityDomain::Hu).unwrap()
    }

    fn column(v: &Volume) -> Vec<f32> {
        (0..v.n_slices()).map(|z| v.voxels()[[z, 1, 0]]).collect()
    }

    #[test]
    fn reflect_matches_half_sample_symmetry() {
        let got: Vec<usize> = (-4..8).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect_index(-9, 2), 0);
    }

    #[test]
    fn simple_average_examples() {
        let v = slices(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = simulate_simple_average(&v, 3, 3).unwrap();
        assert_eq!(column(&out), vec![2.0, 5.0]);
        assert_eq!(out.slice_locations_mm(), &[1.0, 4.0]);

        assert_eq!(simulate_simple_average(&v, 1, 1).unwrap(), v);

        let five = slices(&[1.0, 2.0, 3.0, 4.0, 10.0]);
        let out = simulate_simple_average(&five, 5, 5).unwrap();
        assert_eq!(column(&out), vec![4.0]);
        assert_eq!(out.slice_locations_mm(), &[2.0]);

        assert_eq!(
            simulate_simple_average(&five, 6, 1).unwrap_err(),
            DegradeError::WindowTooLarge {
                window: 6,
                available: 5
            }
        );
    }

    #[test]
    fn simple_average_with_offset() {
        let v = slices(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        let out = simulate_simple_average_from(&v, 3, 2, 1).unwrap();
        assert_eq!(column(&out), vec![3.0, 5.0]);
        assert_eq!(out.slice_locations_mm(), &[2.0, 4.0]);
    }

    #[test]
    fn downsample_examples() {
        let six = slices(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
        assert_eq!(
            column(&simulate_direct_downsample(&six, 3, 0).unwrap()),
            vec![0.0, 3.0]
        );
        assert_eq!(simulate_direct_downsample(&six, 1, 0).unwrap(), six);
        let seven = slices(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let out = simulate_direct_downsample(&seven, 3, 1).unwrap();
        assert_eq!(column(&out), vec![1.0, 4.0]);
        assert_eq!(out.slice_locations_mm(), &[1.0, 4.0]);
        assert!(matches!(
            simulate_direct_downsample(&seven, 3, 7),
            Err(DegradeError::OffsetOutOfRange { .. })
        ));
    }

    #[test]
    fn gaussian_impulse_matches_direct_kernel_sum() {
        let mut values = vec![0.0f32; 21];
        values[10] = 1.0;
        let v = slices(&values);
        // sigma = 1 slice on a 1 mm grid.
        let out = simulate_gaussian_average(&v, FWHM_PER_SIGMA, 1).unwrap();
        let norm: f64 = (-4..=4).map(|k: i32| (-(k * k) as f64 / 2.0).exp()).sum();
        assert!((out.voxels()[[10, 0, 0]] as f64 - 1.0 / norm).abs() < 1e-7);
        let k1 = (-0.5f64).exp() / norm;
        assert!((out.voxels()[[11, 0, 0]] as f64 - k1).abs() < 1e-7);
        assert_eq!(out.voxels()[[15, 0, 0]], 0.0);
    }

    #[test]
    fn gaussian_small_sigma_is_identity() {
        let v = slices(&[3.0, 1.0, 4.0, 1.0, 5.0]);
        let out = simulate_gaussian_average(&v, 0.5, 1).unwrap();
        assert_eq!(out, v);
    }

    #[test]
    fn gaussian_constant_and_stride() {
        let v = slices(&[2.5; 9]);
        let out = simulate_gaussian_average(&v, 3.0, 4).unwrap();
        assert_eq!(out.slice_locations_mm(), &[0.0, 4.0, 8.0]);
        assert!(out.voxels().iter().all(|&x| (x - 2.5).abs() < 1e-6));
    }

    #[test]
    fn gaussian_needs_two_uniform_slices() {
        assert!(matches!(
            simulate_gaussian_average(&slices(&[1.0]), 3.0, 1),
            Err(DegradeError::TooFewSlices { .. })
        ));
        let voxels = Array3::zeros((3, 2, 2));
        let uneven =
            Volume::new(voxels, (1.0, 1.0), vec![0.0, 1.0, 3.0], IntensityDomain::Hu).unwrap();
        assert_eq!(
            simulate_gaussian_average(&uneven, 3.0, 1).unwrap_err(),
            DegradeError::NonUniformSpacing
        );
        assert_eq!(
            simulate_simple_average(&uneven, 2, 1).unwrap_err(),
            DegradeError::NonUniformSpacing
        );
        assert_eq!(
            simulate_direct_downsample(&uneven, 2, 0).unwrap_err(),
            DegradeError::NonUniformSpacing
        );
    }

    #[test]
    fn kernel_truncation_radius() {
        assert_eq!(GaussianKernel::from_sigma_slices(1.0).radius(), 4);
        assert_eq!(GaussianKernel::from_sigma_slices(1.0 - 1e-15).radius(), 4);
        assert_eq!(GaussianKernel::from_sigma_slices(0.4).radius(), 0);
        let k = GaussianKernel::from_sigma_slices(2.3);
        assert_eq!(k.radius(), 9);
        assert!((k.weights.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }
}
