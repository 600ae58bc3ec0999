use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use slicesim_core::io::{read_volume, write_volume, ElementType, VolumeHeader};
use slicesim_core::{IntensityDomain, Volume};

fn random_volume(rng: &mut ChaCha8Rng, domain: IntensityDomain) -> Volume {
    let dims = (
        rng.random_range(1..12),
        rng.random_range(1..9),
        rng.random_range(1..9),
    );
    let voxels = Array3::from_shape_simple_fn(dims, || match domain {
        IntensityDomain::Hu => rng.random_range(-1024.0f32..3071.0),
        IntensityDomain::Normalized01 => rng.random_range(0.0f32..=1.0),
    });
    let spacing = (rng.random_range(0.3..1.5), rng.random_range(0.3..1.5));
    let dz = rng.random_range(0.5..3.0) * if rng.random_bool(0.3) { -1.0 } else { 1.0 };
    Volume::with_uniform_spacing(voxels, spacing, rng.random_range(-300.0..300.0), dz, domain)
        .unwrap()
}

fn assert_same_geometry(a: &Volume, b: &Volume) {
    assert_eq!(a.voxels().dim(), b.voxels().dim());
    assert_eq!(a.pixel_spacing_mm(), b.pixel_spacing_mm());
    assert_eq!(a.intensity_domain(), b.intensity_domain());
    for (x, y) in a.slice_locations_mm().iter().zip(b.slice_locations_mm()) {
        assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()), "{x} vs {y}");
    }
}

#[test]
fn float32_round_trip_is_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..100 {
        let domain = if i % 3 == 0 {
            IntensityDomain::Normalized01
        } else {
            IntensityDomain::Hu
        };
        let v = random_volume(&mut rng, domain);
        let path = dir.path().join(if i % 2 == 0 {
            format!("v{i}.mha")
        } else {
            format!("v{i}.mhd")
        });
        write_volume(&v, &path, ElementType::Float32).unwrap();
        let back = read_volume(&path).unwrap();
        assert_same_geometry(&v, &back);
        for (a, b) in v.voxels().iter().zip(back.voxels()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn int16_round_trip_within_half_hu() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for i in 0..100 {
        let v = random_volume(&mut rng, IntensityDomain::Hu);
        let path = dir.path().join(format!("s{i}.mhd"));
        write_volume(&v, &path, ElementType::Int16).unwrap();
        let back = read_volume(&path).unwrap();
        assert_same_geometry(&v, &back);
        for (a, b) in v.voxels().iter().zip(back.voxels()) {
            assert!((a - b).abs() <= 0.5, "{a} vs {b}");
        }
    }
}

#[test]
fn header_text_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    let v = random_volume(&mut rng, IntensityDomain::Hu);
    let path = dir.path().join("h.mhd");
    write_volume(&v, &path, ElementType::Float32).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let header = VolumeHeader::parse(&text).unwrap();
    assert_eq!(header.to_text(), text);
    assert!(text.trim_end().ends_with("ElementDataFile = h.raw"));
    assert!(dir.path().join("h.raw").exists());
}

#[test]
fn foreign_header_without_domain_key() {
    let dir = tempfile::tempdir().unwrap();
    let raw: Vec<u8> = [0.25f32, 0.5, 0.75, 1.0]
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect();
    std::fs::write(dir.path().join("f.raw"), &raw).unwrap();
    std::fs::write(
        dir.path().join("f.mhd"),
        "ObjectType = Image\nNDims = 3\nDimSize = 2 1 2\nElementSpacing = 0.5 0.5 2\n\
         Offset = 0 0 -4\nElementType = MET_FLOAT\nElementDataFile = f.raw\n",
    )
    .unwrap();
    let v = read_volume(dir.path().join("f.mhd")).unwrap();
    assert_eq!(v.voxels().dim(), (2, 1, 2));
    assert_eq!(v.slice_locations_mm(), &[-4.0, -2.0]);
    assert_eq!(v.voxels()[[1, 0, 1]], 1.0);
    assert_eq!(v.intensity_domain(), IntensityDomain::Normalized01);
}
