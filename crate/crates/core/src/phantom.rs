//! Seeded analytic phantoms with known thin and thick acquisitions.
//!
//! A phantom is a continuous intensity field in `[0, 1]`: a smooth gradient,
//! Gaussian blobs and boxes whose z edges fall between slice positions. Any
//! slice is acquired by integrating the field along z against a triangular
//! profile on a fine grid, so thin and "true" thick volumes come from the
//! same object without going through any of the degradation code.

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::volume::{IntensityDomain, Volume, VolumeError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomConfig {
    pub seed: u64,
    /// In-plane size `(rows, cols)`.
    pub dims: (usize, usize),
    pub pixel_mm: f64,
    /// Range of z in mm occupied by structures.
    pub z_extent_mm: (f64, f64),
    pub n_blobs: usize,
    pub n_boxes: usize,
    /// Step of the fine z grid used for profile integration.
    pub fine_step_mm: f64,
}

impl Default for PhantomConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            dims: (32, 32),
            pixel_mm: 1.0,
            z_extent_mm: (0.0, 40.0),
            n_blobs: 8,
            n_boxes: 4,
            fine_step_mm: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Blob {
    center: [f64; 3],
    sigma: [f64; 3],
    amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
struct Cuboid {
    lo: [f64; 3],
    hi: [f64; 3],
    amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Phantom {
    config: PhantomConfig,
    base: f64,
    gradient: [f64; 3],
    blobs: Vec<Blob>,
    boxes: Vec<Cuboid>,
}

impl Phantom {
    pub fn new(config: PhantomConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (ny, nx) = config.dims;
        let (h, w) = (ny as f64 * config.pixel_mm, nx as f64 * config.pixel_mm);
        let (z0, z1) = config.z_extent_mm;
        let depth = z1 - z0;

        let base = rng.random_range(0.3..0.5);
        let gradient = [
            rng.random_range(-0.1..0.1) / depth.max(1.0),
            rng.random_range(-0.1..0.1) / h.max(1.0),
            rng.random_range(-0.1..0.1) / w.max(1.0),
        ];
        let blobs = (0..config.n_blobs)
            .map(|_| Blob {
                center: [
                    rng.random_range(z0..z1),
                    rng.random_range(0.0..h),
                    rng.random_range(0.0..w),
                ],
                sigma: [
                    rng.random_range(1.0..4.0),
                    rng.random_range(2.0..6.0),
                    rng.random_range(2.0..6.0),
                ],
                amplitude: rng.random_range(-0.25..0.35),
            })
            .collect();
        let boxes = (0..config.n_boxes)
            .map(|_| {
                let zc = rng.random_range(z0..z1);
                let zl = rng.random_range(1.5..8.0);
                let yc = rng.random_range(0.0..h);
                let xc = rng.random_range(0.0..w);
                let yl = rng.random_range(3.0..h.max(4.0) / 2.0);
                let xl = rng.random_range(3.0..w.max(4.0) / 2.0);
                Cuboid {
                    lo: [zc - zl / 2.0, yc - yl / 2.0, xc - xl / 2.0],
                    hi: [zc + zl / 2.0, yc + yl / 2.0, xc + xl / 2.0],
                    amplitude: rng.random_range(-0.3..0.3),
                }
            })
            .collect();
        Self {
            config,
            base,
            gradient,
            blobs,
            boxes,
        }
    }

    pub fn config(&self) -> &PhantomConfig {
        &self.config
    }

    /// Field value at `(z, y, x)` in mm, clamped to `[0, 1]`.
    pub fn value(&self, z: f64, y: f64, x: f64) -> f64 {
        let (z0, _) = self.config.z_extent_mm;
        let mut v =
            self.base + self.gradient[0] * (z - z0) + self.gradient[1] * y + self.gradient[2] * x;
        for b in &self.blobs {
            let dz = (z - b.center[0]) / b.sigma[0];
            let dy = (y - b.center[1]) / b.sigma[1];
            let dx = (x - b.center[2]) / b.sigma[2];
            v += b.amplitude * (-0.5 * (dz * dz + dy * dy + dx * dx)).exp();
        }
        for c in &self.boxes {
            let p = [z, y, x];
            if (0..3).all(|i| p[i] >= c.lo[i] && p[i] < c.hi[i]) {
                v += c.amplitude;
            }
        }
        v.clamp(0.0, 1.0)
    }

    /// Acquire slices centred at `locations_mm` with a triangular profile of
    /// FWHM `thickness_mm` (support `±thickness_mm`).
    pub fn acquire(&self, locations_mm: &[f64], thickness_mm: f64) -> Result<Volume, VolumeError> {
        let (ny, nx) = self.config.dims;
        let px = self.config.pixel_mm;
        let step = self.config.fine_step_mm;
        let mut voxels = Array3::<f32>::zeros((locations_mm.len(), ny, nx));
        let mut plane = vec![0.0f64; ny * nx];
        for (k, &loc) in locations_mm.iter().enumerate() {
            plane.iter_mut().for_each(|p| *p = 0.0);
            // Fine samples on the global grid z = m * step inside the support.
            let m_lo = ((loc - thickness_mm) / step).ceil() as i64;
            let m_hi = ((loc + thickness_mm) / step).floor() as i64;
            let mut total = 0.0;
            for m in m_lo..=m_hi {
                let z = m as f64 * step;
                let w = (1.0 - (z - loc).abs() / thickness_mm).max(0.0);
                if w == 0.0 {
                    continue;
                }
                total += w;
                for r in 0..ny {
                    let y = (r as f64 + 0.5) * px;
                    for c in 0..nx {
                        let x = (c as f64 + 0.5) * px;
                        plane[r * nx + c] += w * self.value(z, y, x);
                    }
                }
            }
            for r in 0..ny {
                for c in 0..nx {
                    voxels[[k, r, c]] = (plane[r * nx + c] / total) as f32;
                }
            }
        }
        Volume::new(
            voxels,
            (px, px),
            locations_mm.to_vec(),
            IntensityDomain::Normalized01,
        )
    }

    /// [`acquire`](Self::acquire) plus independent Gaussian noise of standard
    /// deviation `noise_std`, drawn from a stream keyed by `noise_seed`.
    pub fn acquire_noisy(
        &self,
        locations_mm: &[f64],
        thickness_mm: f64,
        noise_std: f64,
        noise_seed: u64,
    ) -> Result<Volume, VolumeError> {
        let clean = self.acquire(locations_mm, thickness_mm)?;
        if noise_std == 0.0 {
            return Ok(clean);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed ^ noise_seed.rotate_left(32));
        let mut voxels = clean.voxels().clone();
        for v in voxels.iter_mut() {
            let n: f64 = StandardNormal.sample(&mut rng);
            *v = (*v as f64 + noise_std * n).clamp(0.0, 1.0) as f32;
        }
        Volume::new(
            voxels,
            clean.pixel_spacing_mm(),
            locations_mm.to_vec(),
            IntensityDomain::Normalized01,
        )
    }
}

/// Evenly spaced locations `start, start + step, ...` up to and including `end`.
pub fn uniform_locations(start_mm: f64, end_mm: f64, step_mm: f64) -> Vec<f64> {
    let n = ((end_mm - start_mm) / step_mm + 1e-9).floor() as usize + 1;
    (0..n).map(|k| start_mm + k as f64 * step_mm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> Phantom {
        Phantom::new(PhantomConfig {
            seed,
            dims: (8, 8),
            z_extent_mm: (0.0, 10.0),
            n_blobs: 3,
            n_boxes: 2,
            fine_step_mm: 0.1,
            ..PhantomConfig::default()
        })
    }

    #[test]
    fn seeded_and_bounded() {
        let a = small(7).acquire(&[0.0, 1.0, 2.0], 1.0).unwrap();
        let b = small(7).acquire(&[0.0, 1.0, 2.0], 1.0).unwrap();
        let c = small(8).acquire(&[0.0, 1.0, 2.0], 1.0).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        let (lo, hi) = a.value_range();
        assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn thin_profile_tends_to_point_sample() {
        let p = small(3);
        let v = p.acquire(&[5.0], 0.1).unwrap();
        // Three fine samples with weights 0, 1, 0 leave the centre value.
        let expected = p.value(5.0, 0.5, 0.5) as f32;
        assert!((v.voxels()[[0, 0, 0]] - expected).abs() < 1e-6);
    }

    #[test]
    fn locations_helper() {
        assert_eq!(uniform_locations(0.0, 4.0, 2.0), vec![0.0, 2.0, 4.0]);
        assert_eq!(uniform_locations(0.0, 1.0, 0.3).len(), 4);
    }
}
