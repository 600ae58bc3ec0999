use ndarray::Array3;
use proptest::prelude::*;
use slicesim_core::degrade::{degrade, DegradationSpec, GaussianKernel, FWHM_PER_SIGMA};
use slicesim_core::geometry::ENDPOINT_TOLERANCE;
use slicesim_core::io::{match_locations, normalize_hu, HuWindow};
use slicesim_core::metrics::{mse, psnr, rmse};
use slicesim_core::{
    slice_locations, triangular_weight, IntensityDomain, SliceGrid, SliceProfile, Volume,
};

fn volume(nz: usize, ny: usize, nx: usize, values: &[f32], dz: f64) -> Volume {
    let voxels = Array3::from_shape_vec((nz, ny, nx), values.to_vec()).unwrap();
    Volume::with_uniform_spacing(voxels, (0.7, 0.7), -3.0, dz, IntensityDomain::Hu).unwrap()
}

/// Random uniform volume plus a spec for one of the four methods that is valid on it.
fn volume_and_spec() -> impl Strategy<Value = (Volume, DegradationSpec)> {
    (2usize..24, 1usize..4, 1usize..4, 0.3f64..2.0, 0usize..4)
        .prop_flat_map(|(nz, ny, nx, dz, method)| {
            let values = prop::collection::vec(-1000f32..3000f32, nz * ny * nx);
            let params = (
                1usize..=nz,
                1usize..5,
                0usize..nz,
                0.2f64..8.0,
                0.0f64..1.0,
                0.0f64..1.0,
            );
            (Just((nz, ny, nx, dz, method)), values, params)
        })
        .prop_map(
            |((nz, ny, nx, dz, method), values, (window, stride, offset, len, a, b))| {
                let v = volume(nz, ny, nx, &values, dz);
                let first = -3.0;
                let last = first + (nz - 1) as f64 * dz;
                let spec = match method {
                    0 => {
                        let start = first + a * (last - first);
                        let end = first + b * (last - first);
                        let grid = SliceGrid::new(start, end, len.max(dz) / 2.0).unwrap();
                        // Thickness at least dz keeps every target inside the support.
                        DegradationSpec::proposed(len.max(dz), grid).unwrap()
                    }
                    1 => DegradationSpec::simple_average(window, stride)
                        .unwrap()
                        .with_offset(offset.min(nz - window)),
                    2 => DegradationSpec::gaussian_average(len, stride)
                        .unwrap()
                        .with_offset(offset),
                    _ => DegradationSpec::direct_downsample(stride, offset).unwrap(),
                };
                (v, spec)
            },
        )
}

/// Thin indices that feed output slice `j`, by the method's definition.
fn contributors(thin: &Volume, spec: &DegradationSpec, j: usize, out_loc: f64) -> Vec<usize> {
    let n = thin.n_slices();
    match spec {
        DegradationSpec::Proposed { thickness_mm, .. } => (0..n)
            .filter(|&i| {
                triangular_weight(out_loc, thin.slice_locations_mm()[i], *thickness_mm) > 0.0
            })
            .collect(),
        DegradationSpec::SimpleAverage {
            window_slices,
            stride_slices,
            offset_slices,
        } => {
            let s = offset_slices + j * stride_slices.get();
            (s..s + window_slices.get()).collect()
        }
        DegradationSpec::GaussianAverage {
            fwhm_mm,
            stride_slices,
            offset_slices,
        } => {
            let dz = thin.uniform_increment_mm().unwrap().abs();
            let r = GaussianKernel::from_sigma_slices(fwhm_mm.get() / FWHM_PER_SIGMA / dz).radius()
                as i64;
            let c = (offset_slices + j * stride_slices.get()) as i64;
            // Reflection only revisits slices inside the volume.
            (c - r..=c + r)
                .map(|k| {
                    let period = 2 * n as i64;
                    let m = k.rem_euclid(period);
                    (if m < n as i64 { m } else { period - 1 - m }) as usize
                })
                .collect()
        }
        DegradationSpec::DirectDownsample {
            stride_slices,
            offset_slices,
        } => vec![offset_slices + j * stride_slices.get()],
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn locations_are_evenly_spaced(s in -500f64..500.0, span in -200f64..200.0, d in 0.05f64..10.0) {
        let e = s + span;
        let grid = SliceGrid::new(s, e, d).unwrap();
        let locs = slice_locations(&grid);
        prop_assert_eq!(locs[0], s);
        let dir = if e >= s { 1.0 } else { -1.0 };
        let tol = ENDPOINT_TOLERANCE * span.abs().max(1.0);
        for (k, l) in locs.iter().enumerate() {
            prop_assert_eq!(*l, s + k as f64 * dir * d);
            prop_assert!((l - s) * dir <= span.abs() + tol);
        }
        // The next location would overshoot the end.
        let next = s + locs.len() as f64 * dir * d;
        prop_assert!((next - s) * dir > span.abs() + tol || s == e);
        let expected = if s == e { 1 } else { ((span.abs() + tol) / d).floor() as usize + 1 };
        prop_assert_eq!(locs.len(), expected);
    }

    #[test]
    fn reversed_grid_mirrors_locations(s in -100f64..100.0, k in 0usize..50, d in 0.25f64..4.0) {
        let e = s + k as f64 * d;
        let fwd = slice_locations(&SliceGrid::new(s, e, d).unwrap());
        let bwd = slice_locations(&SliceGrid::new(e, s, d).unwrap());
        prop_assert_eq!(fwd.len(), bwd.len());
        for (a, b) in fwd.iter().zip(bwd.iter().rev()) {
            prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn weight_is_a_symmetric_bounded_tent(p in -50f64..50.0, l in -50f64..50.0, s in 0.1f64..10.0) {
        let profile = SliceProfile::new(s).unwrap();
        let w = triangular_weight(p, l, profile);
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert_eq!(w, triangular_weight(l, p, profile));
        prop_assert_eq!(triangular_weight(p, p, profile), 1.0);
        prop_assert!(triangular_weight(p, p + s, profile) <= 1e-12);
        // Moving further away never increases the weight.
        let further = if l >= p { l + 0.3 } else { l - 0.3 };
        prop_assert!(triangular_weight(p, further, profile) <= w);
        if (p - l).abs() >= s {
            prop_assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn constant_volumes_stay_constant((v, spec) in volume_and_spec(), c in -1000f32..3000f32) {
        let flat = v.map_voxels(IntensityDomain::Hu, |_| c).unwrap();
        let out = degrade(&flat, &spec).unwrap().volume;
        for &x in out.voxels() {
            prop_assert!((x - c).abs() <= 1e-6 * c.abs().max(1.0), "{} vs {}", x, c);
        }
    }

    #[test]
    fn outputs_stay_within_contributing_range((v, spec) in volume_and_spec()) {
        let out = degrade(&v, &spec).unwrap().volume;
        let (ny, nx) = v.in_plane_dims();
        for (j, &loc) in out.slice_locations_mm().iter().enumerate() {
            let idx = contributors(&v, &spec, j, loc);
            prop_assert!(!idx.is_empty());
            for r in 0..ny {
                for c in 0..nx {
                    let vals = idx.iter().map(|&i| v.voxels()[[i, r, c]]);
                    let lo = vals.clone().fold(f32::INFINITY, f32::min);
                    let hi = vals.fold(f32::NEG_INFINITY, f32::max);
                    let x = out.voxels()[[j, r, c]];
                    let slack = 1e-6 * lo.abs().max(hi.abs()).max(1.0);
                    prop_assert!(x >= lo - slack && x <= hi + slack, "{} not in [{}, {}]", x, lo, hi);
                }
            }
        }
    }

    #[test]
    fn degradation_is_linear((v, spec) in volume_and_spec(), a in -2f32..2.0, b in -2f32..2.0) {
        let w = v.map_voxels(IntensityDomain::Hu, |x| (x * 0.37).sin() * 500.0).unwrap();
        let combo = Volume::new(
            v.voxels() * a + w.voxels() * b,
            v.pixel_spacing_mm(),
            v.slice_locations_mm().to_vec(),
            IntensityDomain::Hu,
        )
        .unwrap();
        let dv = degrade(&v, &spec).unwrap().volume;
        let dw = degrade(&w, &spec).unwrap().volume;
        let dc = degrade(&combo, &spec).unwrap().volume;
        for ((x, y), z) in dv.voxels().iter().zip(dw.voxels()).zip(dc.voxels()) {
            let expected = a * x + b * y;
            prop_assert!((z - expected).abs() <= 1e-3 * (1.0 + expected.abs()), "{} vs {}", z, expected);
        }
    }

    #[test]
    fn metric_relations(
        values in prop::collection::vec((-1f32..1.0, -1f32..1.0), 1..200),
        max_i in 0.1f64..4096.0,
        k in 0.1f32..10.0,
    ) {
        let (a, b): (Vec<f32>, Vec<f32>) = values.into_iter().unzip();
        let (a, b) = (ndarray::arr1(&a), ndarray::arr1(&b));
        let m = mse(&a, &b).unwrap();
        prop_assert_eq!(m, mse(&b, &a).unwrap());
        prop_assert!(m >= 0.0);
        prop_assert!((rmse(&a, &b).unwrap() - m.sqrt()).abs() <= 1e-12);
        if m > 0.0 {
            let expected = 10.0 * (max_i * max_i / m).log10();
            prop_assert!((psnr(&a, &b, max_i).unwrap() - expected).abs() <= 1e-9);
        }
        // Scaling both inputs by k scales MSE by k^2.
        let (ka, kb) = (a.mapv(|x| x * k), b.mapv(|x| x * k));
        let km = mse(&ka, &kb).unwrap();
        prop_assert!((km - (k as f64).powi(2) * m).abs() <= 1e-5 * km.max(1e-12));
    }

    #[test]
    fn normalization_is_monotone_and_idempotent(
        mut hu in prop::collection::vec(-3000f32..5000.0, 2..100),
        lo in -2000f64..0.0,
        width in 1f64..5000.0,
    ) {
        hu.sort_by(f32::total_cmp);
        let n = hu.len();
        let v = Volume::new(
            Array3::from_shape_vec((1, 1, n), hu).unwrap(),
            (1.0, 1.0),
            vec![0.0],
            IntensityDomain::Hu,
        )
        .unwrap();
        let window = HuWindow::new(lo, lo + width).unwrap();
        let norm = normalize_hu(&v, window).unwrap();
        let out: Vec<f32> = norm.voxels().iter().copied().collect();
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(out.iter().all(|x| (0.0..=1.0).contains(x)));
        let as_hu = norm.map_voxels(IntensityDomain::Hu, |x| x).unwrap();
        let again = normalize_hu(&as_hu, HuWindow::new(0.0, 1.0).unwrap()).unwrap();
        prop_assert_eq!(again.voxels(), norm.voxels());
    }

    #[test]
    fn alignment_invariants(
        a in prop::collection::btree_set(-200i32..200, 1..40),
        b in prop::collection::btree_set(-200i32..200, 1..40),
        jitter in -0.2f64..0.2,
        tol in 0.0f64..1.5,
    ) {
        let a: Vec<f64> = a.into_iter().map(|x| x as f64 * 0.5).collect();
        let b: Vec<f64> = b.into_iter().map(|x| x as f64 * 0.5 + jitter).collect();
        let pairs = match_locations(&a, &b, tol);
        prop_assert!(pairs.len() <= a.len().min(b.len()));
        let mut seen_a = std::collections::HashSet::new();
        let mut seen_b = std::collections::HashSet::new();
        for p in &pairs {
            prop_assert!((p.a_location_mm - p.b_location_mm).abs() <= tol);
            prop_assert!(seen_a.insert(p.a_index) && seen_b.insert(p.b_index));
        }
        prop_assert!(pairs.windows(2).all(|w| w[0].a_location_mm < w[1].a_location_mm));
    }
}
