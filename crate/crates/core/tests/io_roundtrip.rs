use hyperdetect::io::{
    load_endmembers, load_ground_truth, load_image, load_mix_labels, save_endmembers, save_ground_truth, save_image,
};
use hyperdetect::mixing::{generate_scene, material_library, AbundanceMode, FamilyMix, MixingFamily, SceneConfig};
use hyperdetect::scene::SceneImage;
use hyperdetect::Error;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn image_round_trip_is_float32_exact() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let px = DMatrix::from_fn(10, 50, |_, _| rng.random_range(0.0..1.0));
    let image = SceneImage::with_layout(px.clone(), 10, 5).unwrap();
    let path = dir.path().join("img.hdr");
    save_image(&image, &path).unwrap();
    let back = load_image(&path).unwrap();
    assert_eq!((back.width(), back.height()), (10, 5));
    for (a, b) in px.iter().zip(back.pixels().iter()) {
        assert_eq!(*b, *a as f32 as f64);
    }
}

#[test]
fn minimal_header_reads_two_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let hdr = dir.path().join("x.hdr");
    std::fs::write(&hdr, "samples: 2\nbands: 3\ndata_type: float32\nbyte_order: little\ninterleave: bsq\n").unwrap();
    let values: Vec<u8> = (0..6).flat_map(|k| (k as f32).to_le_bytes()).collect();
    std::fs::write(hdr.with_extension("raw"), &values).unwrap();
    let image = load_image(&hdr).unwrap();
    assert_eq!((image.band_count(), image.pixel_count()), (3, 2));
    // band-sequential: band 0 holds both pixels first
    assert_eq!(image.pixel(1).as_slice(), &[1.0, 3.0, 5.0]);

    std::fs::write(hdr.with_extension("raw"), &values[..20]).unwrap();
    assert!(matches!(load_image(&hdr), Err(Error::SizeMismatch { .. })));
}

#[test]
fn tables_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let m = material_library(40, 3).unwrap();
    let scene = generate_scene(&SceneConfig {
        pixels: 30,
        endmembers: m.clone(),
        mix: FamilyMix::linear_nonlinear(0.5, MixingFamily::Pnmm),
        eta_d: 0.4,
        xi: 3.0,
        noise_variance: 1e-4,
        abundance: AbundanceMode::Uniform,
        seed: 2,
    })
    .unwrap();
    let gt = scene.ground_truth.as_ref().unwrap();
    save_endmembers(&m, dir.path().join("m.csv")).unwrap();
    save_ground_truth(gt, dir.path().join("gt.csv")).unwrap();
    let m_back = load_endmembers(dir.path().join("m.csv")).unwrap();
    assert_eq!(m_back, m);
    let gt_back = load_ground_truth(dir.path().join("gt.csv"), m_back).unwrap();
    assert_eq!(&gt_back, gt);
    assert_eq!(load_mix_labels(dir.path().join("gt.csv")).unwrap(), gt.labels);
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(load_endmembers(dir.path().join("none.csv")).unwrap_err().is_io());
    assert!(load_image(dir.path().join("none.hdr")).unwrap_err().is_io());
}
