mod common;

use common::{code, json, num, ok, run};
use hyperdetect::io::{save_endmembers, save_image};
use hyperdetect::mixing::{generate_scene, material_library, AbundanceMode, FamilyMix, MixingFamily, SceneConfig};
use hyperdetect::scene::SceneImage;

const SMALL: &str = "pixels = 300\nbands = 60\nendmember_count = 3\nnonlinear_fraction = 0.5\nsnr_db = 25\n";

#[test]
fn empty_scene_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&run("generate", dir.path(), "pixels = 0\n", &["--seed", "1"])), 1);
}

#[test]
fn bad_invocations_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&run("generate", d, SMALL, &[])), 1, "seed is mandatory");
    assert_eq!(code(&run("generate", d, "colour = red\n", &["--seed", "1"])), 1);
    assert_eq!(code(&run("generate", d, SMALL, &["--seed", "1", "--preset", "nope"])), 1);
    assert_eq!(code(&run("generate", d, SMALL, &["--seed", "x"])), 1);
    assert_eq!(code(&run("generate", d, "pixels = 10\nabundance = fixed\n", &["--seed", "1"])), 1);
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok("generate", d, SMALL, &["--seed", "1"]);
    let o = run("detect", d, "endmembers = /no/such/endmembers.csv\n", &["--seed", "1"]);
    assert_eq!(code(&o), 2);
    std::fs::write(d.join("scene.raw"), b"short").unwrap();
    assert_eq!(code(&run("detect", d, "", &["--seed", "1"])), 2);
}

#[test]
fn identical_pixels_fail_numerically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        "generate",
        d,
        "pixels = 50\nbands = 40\nabundance = fixed\nalpha = 0.2,0.3,0.5\nnonlinear_fraction = 0\n",
        &["--seed", "1"],
    );
    assert_eq!(code(&run("extract", d, "method = vca\n", &["--seed", "1"])), 3);
}

#[test]
fn generate_echoes_config_and_repeats_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let o = ok("generate", &a, SMALL, &["--seed", "7"]);
    ok("generate", &b, SMALL, &["--seed", "7", "--threads", "2"]);
    let echo = String::from_utf8(o.stdout).unwrap();
    assert!(echo.contains("pixels = 300") && echo.contains("seed = 7"));
    for f in ["scene.hdr", "scene.raw", "endmembers.csv", "ground_truth.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let c = dir.path().join("c");
    ok("generate", &c, SMALL, &["--seed", "8"]);
    assert_ne!(std::fs::read(a.join("scene.raw")).unwrap(), std::fs::read(c.join("scene.raw")).unwrap());
}

#[test]
fn preset_pins_main_scene() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok("generate", d, "", &["--seed", "1", "--preset", "paper-main"]);
    let truth = std::fs::read_to_string(d.join("ground_truth.csv")).unwrap();
    let nonlinear = truth.lines().filter(|l| l.contains(",nonlinear,")).count();
    let linear = truth.lines().filter(|l| l.contains(",linear,")).count();
    assert_eq!((linear, nonlinear), (4000, 4000));
    let header = std::fs::read_to_string(d.join("scene.hdr")).unwrap();
    assert!(header.contains("bands: 276"), "{header}");
}

#[test]
fn noiseless_linear_scene_keeps_false_alarms_low() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        "generate",
        d,
        "pixels = 1000\nbands = 100\nnonlinear_fraction = 0\nfamily = lmm\n",
        &["--seed", "3"],
    );
    ok("detect", d, "pfa = 0.01\n", &["--seed", "3"]);
    let cal = json(d.join("calibration.json"));
    let flagged = num(&cal, "flagged") / num(&cal, "pixels");
    assert!(flagged <= 0.02, "flagged fraction {flagged}");
}

#[test]
fn shuffled_labels_give_chance_auc() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok("generate", d, "pixels = 2000\nbands = 60\nsnr_db = 25\n", &["--seed", "2"]);
    ok("detect", d, "", &["--seed", "2"]);
    let det = format!("detection = {}\n", d.join("detection.csv").display());
    ok("roc", d, &det, &[]);
    assert!(num(&json(d.join("roc.json")), "auc") > 0.6);
    let runs = 20;
    let mean: f64 = (0..runs)
        .map(|s| {
            ok("roc", d, &format!("{det}shuffle_labels = true\n"), &["--seed", &s.to_string()]);
            num(&json(d.join("roc.json")), "auc")
        })
        .sum::<f64>()
        / runs as f64;
    assert!((mean - 0.5).abs() <= 0.02, "mean shuffled auc {mean}");
}

fn pure_pixel_dir(d: &std::path::Path) {
    let m = material_library(80, 3).unwrap();
    let scene = generate_scene(&SceneConfig {
        pixels: 400,
        endmembers: m.clone(),
        mix: FamilyMix::linear_nonlinear(0.0, MixingFamily::Lmm),
        eta_d: 0.0,
        xi: 3.0,
        noise_variance: 0.0,
        abundance: AbundanceMode::Uniform,
        seed: 4,
    })
    .unwrap();
    let mut px = scene.pixels().clone();
    for k in 0..3 {
        px.set_column(50 + 100 * k, &m.matrix().column(k));
    }
    save_image(&SceneImage::new(px).unwrap(), d.join("scene.hdr")).unwrap();
    save_endmembers(&m, d.join("endmembers.csv")).unwrap();
}

#[test]
fn vca_recovers_pure_pixels() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    pure_pixel_dir(d);
    ok("extract", d, "method = vca\n", &["--seed", "5"]);
    let summary = json(d.join("extract.json"));
    assert!(num(&summary, "max_sam") <= 1e-6, "{summary}");
}

#[test]
fn mves_trace_never_grows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok("generate", d, "pixels = 500\nbands = 50\nnonlinear_fraction = 0\nabundance = capped\ncap = 0.8\n", &["--seed", "6"]);
    ok("extract", d, "method = mves\n", &[]);
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    let v: Vec<f64> = trace.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(v.len() >= 2);
    assert!(v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "{v:?}");
    assert!(num(&json(d.join("extract.json")), "max_sam") < 0.05);
}

#[test]
fn iterative_extraction_beats_vca_on_nonlinear_scene() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok("generate", d, "", &["--seed", "11", "--preset", "paper-roc"]);
    let vca_dir = d.join("vca");
    let shared = format!(
        "image = {}\nreference = {}\nground_truth = {}\n",
        d.join("scene.hdr").display(),
        d.join("endmembers.csv").display(),
        d.join("ground_truth.csv").display()
    );
    ok("extract", &vca_dir, &format!("{shared}method = vca\n"), &["--seed", "11"]);
    ok("extract", d, &format!("{shared}method = iterative\n"), &["--seed", "11"]);
    let it = num(&json(d.join("extract.json")), "mean_sam");
    let base = num(&json(vca_dir.join("extract.json")), "mean_sam");
    assert!(it < base, "iterative {it} vs vca {base}");
    let trace = std::fs::read_to_string(d.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iteration,surviving_pixels,discarded,tau_r,sam_to_reference\n"));
}
