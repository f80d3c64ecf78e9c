use std::path::{Path, PathBuf};

use hyperdetect::detector::{
    calibrate_threshold, detect_image, format_detection_csv, format_roc_csv, ks_test, roc_curve, Detector,
    Orientation,
};
use hyperdetect::extraction::{
    format_trace_csv, iterative_endmember_estimation, match_endmembers, mves, vca, IterativeParams,
};
use hyperdetect::gp::{GpSettings, HyperparameterMode};
use hyperdetect::io::{
    load_endmembers, load_ground_truth, load_image, load_mix_labels, save_detection_map, save_endmembers,
    save_ground_truth, save_image, Decimate,
};
use hyperdetect::mixing::{
    generate_scene, material_library, noise_variance_for_snr, synthetic_library, AbundanceMode, FamilyMix,
    MixingFamily, SceneConfig, LIBRARY_SEED,
};
use hyperdetect::rng::Seed;
use hyperdetect::scene::{AbundanceVector, DetectionMap, EndmemberMatrix, MixLabel, SceneImage};
use hyperdetect::unmix::{fcls_everywhere, format_abundance_csv, gp_everywhere, pipeline_metrics, unmix_with};
use hyperdetect::Error;
use rand::Rng;
use serde_json::{json, Value};

use crate::{CliError, Context};

const GP_KEYS: [&str; 2] = ["gp_mode", "gp_subsample"];

fn keys<'a>(own: &[&'a str], gp: bool) -> Vec<&'a str> {
    let mut all = own.to_vec();
    all.push("seed");
    if gp {
        all.extend(GP_KEYS);
    }
    all
}

fn write(ctx: &Context, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = ctx.out.join(name);
    std::fs::write(&path, bytes).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    ctx.log(format!("wrote {}", path.display()));
    Ok(path)
}

fn write_json(ctx: &Context, name: &str, value: &Value) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("json values serialize");
    text.push('\n');
    write(ctx, name, text.as_bytes())
}

fn input(ctx: &Context, key: &str, default: &str) -> PathBuf {
    match ctx.config.str(key) {
        Some(p) => PathBuf::from(p),
        None => ctx.out.join(default),
    }
}

/// Explicit path, or the default file when it happens to exist.
fn optional_input(ctx: &Context, key: &str, default: &str) -> Option<PathBuf> {
    match ctx.config.str(key) {
        Some(p) => Some(PathBuf::from(p)),
        None => Some(ctx.out.join(default)).filter(|p| p.exists()),
    }
}

fn gp_settings(ctx: &Context, seed: u64) -> Result<GpSettings, CliError> {
    let defaults = GpSettings::default();
    Ok(GpSettings {
        mode: ctx.config.get_or("gp_mode", HyperparameterMode::Shared)?,
        subsample: ctx.config.get_or("gp_subsample", defaults.subsample)?,
        seed,
        ..defaults
    })
}

fn scene_with_truth(image: SceneImage, truth: Option<&Path>, m: &EndmemberMatrix) -> Result<SceneImage, CliError> {
    match truth {
        Some(p) => Ok(image.with_ground_truth(load_ground_truth(p, m.clone())?)?),
        None => Ok(image),
    }
}

fn finite(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}

pub fn generate(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.config;
    c.check_keys(&keys(
        &[
            "pixels",
            "bands",
            "decimate",
            "endmember_count",
            "library",
            "endmember_file",
            "nonlinear_fraction",
            "family",
            "eta_d",
            "xi",
            "noise_variance",
            "snr_db",
            "abundance",
            "alpha",
            "cap",
            "width",
            "height",
        ],
        false,
    ))?;
    let seed = ctx.seed()?;
    let pixels: usize = c.get("pixels")?.ok_or_else(|| CliError::Usage("missing `pixels`".into()))?;
    let decimate: usize = c.get_or("decimate", 1)?;
    let count: usize = c.get_or("endmember_count", 3)?;

    let full = match c.str("endmember_file") {
        Some(p) => load_endmembers(p)?,
        None => {
            let bands: usize = c.get_or("bands", 100)?;
            match c.str("library").unwrap_or("materials") {
                "materials" => material_library(bands, count)?,
                "synthetic" => synthetic_library(bands, count, LIBRARY_SEED)?,
                other => return Err(CliError::Usage(format!("unknown library `{other}`"))),
            }
        }
    };
    let endmembers = full.decimate_bands(decimate)?;
    let r = endmembers.endmember_count();

    let abundance = match c.str("abundance").unwrap_or("uniform") {
        "uniform" => AbundanceMode::Uniform,
        "fixed" => {
            let alpha = c
                .floats("alpha")?
                .ok_or_else(|| CliError::Usage("fixed abundances need `alpha`".into()))?;
            if alpha.len() != r {
                return Err(CliError::Usage(format!("`alpha` has {} entries for {r} endmembers", alpha.len())));
            }
            AbundanceMode::Fixed(AbundanceVector::normalized(&alpha)?)
        }
        "capped" => AbundanceMode::Capped(
            c.get("cap")?
                .ok_or_else(|| CliError::Usage("capped abundances need `cap`".into()))?,
        ),
        other => return Err(CliError::Usage(format!("unknown abundance mode `{other}`"))),
    };
    let noise_variance = match (c.get::<f64>("noise_variance")?, c.get::<f64>("snr_db")?) {
        (Some(_), Some(_)) => {
            return Err(CliError::Usage("give `noise_variance` or `snr_db`, not both".into()))
        }
        (Some(v), None) => v,
        (None, Some(snr)) => noise_variance_for_snr(&endmembers, &abundance, snr)?,
        (None, None) => 0.0,
    };
    let family: MixingFamily = c.get_or("family", MixingFamily::Gbm)?;
    let config = SceneConfig {
        pixels,
        endmembers: endmembers.clone(),
        mix: FamilyMix::linear_nonlinear(c.get_or("nonlinear_fraction", 0.5)?, family),
        eta_d: c.get_or("eta_d", 0.5)?,
        xi: c.get_or("xi", 3.0)?,
        noise_variance,
        abundance,
        seed,
    };
    ctx.log(format!(
        "generating {pixels} pixels, {} bands, noise variance {noise_variance:e}",
        endmembers.band_count()
    ));
    let scene = generate_scene(&config)?;
    let (width, height) = match (c.get::<usize>("width")?, c.get::<usize>("height")?) {
        (Some(w), Some(h)) => (w, h),
        (None, None) => (pixels, 1),
        _ => return Err(CliError::Usage("give both `width` and `height`".into())),
    };
    let truth = scene.ground_truth.clone().expect("generated scenes carry ground truth");
    let scene = SceneImage::with_layout(scene.pixels().clone(), width, height)?.with_ground_truth(truth)?;

    save_image(&scene, ctx.out.join("scene.hdr"))?;
    save_endmembers(&endmembers, ctx.out.join("endmembers.csv"))?;
    save_ground_truth(scene.ground_truth.as_ref().expect("attached above"), ctx.out.join("ground_truth.csv"))?;
    let mut resolved = ctx.config.clone();
    resolved.set("noise_variance_resolved", noise_variance);
    let echo = resolved.render();
    write(ctx, "config.txt", echo.as_bytes())?;
    print!("{echo}");
    Ok(())
}

pub fn detect(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.config;
    c.check_keys(&keys(&["image", "endmembers", "pfa"], true))?;
    let seed = ctx.seed()?;
    let image = load_image(input(ctx, "image", "scene.hdr"))?;
    let m = load_endmembers(input(ctx, "endmembers", "endmembers.csv"))?;
    let pfa: f64 = c.get_or("pfa", 0.05)?;
    let settings = gp_settings(ctx, seed)?;

    let detector = Detector::new(&m, &image, &settings)?;
    let hyper = detector.hyperparameters();
    ctx.log(format!(
        "bandwidth {:e}, noise variance {:e}",
        hyper.bandwidth, hyper.noise_variance
    ));
    let cal = calibrate_threshold(&detector, &image, pfa)?;
    let map = detect_image(&detector, &image, cal.tau)?;
    ctx.log(format!("tau {}, {} of {} flagged", cal.tau, map.nonlinear_count(), map.len()));

    write(ctx, "detection.csv", format_detection_csv(&map).as_bytes())?;
    save_detection_map(&map, image.width(), image.height(), ctx.out.join("detection.pgm"))?;
    let ks = ks_test(&cal.h0_samples, cal.beta)?;
    write_json(
        ctx,
        "calibration.json",
        &json!({
            "pfa": cal.pfa,
            "tau": cal.tau,
            "beta_alpha": cal.beta.alpha,
            "beta_beta": cal.beta.beta,
            "noise_variance": cal.noise_variance,
            "bandwidth": hyper.bandwidth,
            "h0_samples": cal.h0_samples.len(),
            "ks_statistic": ks.statistic,
            "ks_p_value": ks.p_value,
            "pixels": map.len(),
            "flagged": map.nonlinear_count(),
        }),
    )?;
    Ok(())
}

fn parse_statistics(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let format = |line: usize, message: String| Error::Format {
        context: path.display().to_string(),
        line,
        message,
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let field = line
            .split(',')
            .nth(1)
            .ok_or_else(|| format(i + 1, "missing statistic column".into()))?;
        let t: f64 = field
            .trim()
            .parse()
            .map_err(|e| format(i + 1, format!("bad statistic `{field}`: {e}")))?;
        out.push(t);
    }
    Ok(out)
}

pub fn roc(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.config;
    c.check_keys(&keys(&["detection", "image", "endmembers", "ground_truth", "shuffle_labels"], true))?;
    let shuffle: bool = c.get_or("shuffle_labels", false)?;
    let statistics = match c.str("detection") {
        Some(p) => parse_statistics(Path::new(p))?,
        None => {
            let seed = ctx.seed()?;
            let image = load_image(input(ctx, "image", "scene.hdr"))?;
            let m = load_endmembers(input(ctx, "endmembers", "endmembers.csv"))?;
            let detector = Detector::new(&m, &image, &gp_settings(ctx, seed)?)?;
            detector
                .statistics(image.pixels())?
                .into_iter()
                .map(|t| t.map_or(f64::NAN, |t| t.value))
                .collect()
        }
    };
    let mut labels = load_mix_labels(input(ctx, "ground_truth", "ground_truth.csv"))?;
    if shuffle {
        let mut rng = Seed(ctx.seed()?).derive("shuffle").rng();
        for i in (1..labels.len()).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
    }
    let curve = roc_curve(&statistics, &labels, Orientation::Below)?;
    let positives = labels.iter().filter(|l| **l == MixLabel::Nonlinear).count();
    ctx.log(format!("auc {}", curve.auc));
    write(ctx, "roc.csv", format_roc_csv(&curve).as_bytes())?;
    write_json(
        ctx,
        "roc.json",
        &json!({
            "auc": curve.auc,
            "pd_at_pfa_0.1": curve.pd_at(0.1),
            "pixels": labels.len(),
            "nonlinear": positives,
            "shuffled_labels": shuffle,
        }),
    )?;
    Ok(())
}

pub fn extract(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.config;
    c.check_keys(&keys(
        &[
            "image",
            "method",
            "endmember_count",
            "reference",
            "ground_truth",
            "pfa",
            "max_iterations",
            "epsilon",
            "relax",
        ],
        true,
    ))?;
    let r: usize = c.get_or("endmember_count", 3)?;
    let method = c.str("method").unwrap_or("mves").to_string();
    let reference = optional_input(ctx, "reference", "endmembers.csv")
        .map(load_endmembers)
        .transpose()?;
    let mut image = load_image(input(ctx, "image", "scene.hdr"))?;
    if let Some(m) = &reference {
        image = scene_with_truth(image, optional_input(ctx, "ground_truth", "ground_truth.csv").as_deref(), m)?;
    }

    let mut summary = json!({
        "method": method,
        "endmember_count": r,
        "pixels": image.pixel_count(),
        "bands": image.band_count(),
    });
    let estimate = match method.as_str() {
        "vca" => vca(&image, r, ctx.seed()?)?,
        "mves" => {
            let res = mves(&image, r)?;
            let mut trace = String::from("sweep,volume\n");
            for (k, v) in res.volume_trace.iter().enumerate() {
                trace.push_str(&format!("{k},{v}\n"));
            }
            write(ctx, "trace.csv", trace.as_bytes())?;
            summary["sweeps"] = json!(res.sweeps);
            summary["volume"] = json!(res.volume());
            summary["min_barycentric"] = json!(res.min_barycentric);
            res.endmembers
        }
        "iterative" => {
            let mut params = IterativeParams::with_relaxation(
                c.get_or("max_iterations", IterativeParams::default().max_iterations)?,
                c.get_or("relax", IterativeParams::default().relax_initial)?,
            )?;
            params.epsilon = c.get_or("epsilon", params.epsilon)?;
            params.pfa = c.get_or("pfa", params.pfa)?;
            let settings = gp_settings(ctx, ctx.seed()?)?;
            match iterative_endmember_estimation(&image, r, &params, &settings) {
                Ok(res) => {
                    write(ctx, "trace.csv", format_trace_csv(&res.trace).as_bytes())?;
                    summary["tau"] = json!(res.tau);
                    summary["iterations"] = json!(res.trace.len());
                    summary["survivors"] = json!(res.survivors.len());
                    res.endmembers
                }
                Err(e) => {
                    write(ctx, "trace.csv", format_trace_csv(&e.trace).as_bytes())?;
                    return Err(CliError::Core(e.into()));
                }
            }
        }
        other => return Err(CliError::Usage(format!("unknown extraction method `{other}`"))),
    };
    if let Some(m) = &reference {
        let mm = match_endmembers(&estimate, m)?;
        ctx.log(format!("mean spectral angle {}", mm.mean_angle()));
        summary["mean_sam"] = json!(mm.mean_angle());
        summary["max_sam"] = json!(mm.max_angle());
        summary["angles"] = json!(mm.angles);
        summary["order"] = json!(mm.order);
    }
    save_endmembers(&estimate, ctx.out.join("endmembers_est.csv"))?;
    write_json(ctx, "extract.json", &summary)?;
    Ok(())
}

pub fn pipeline(ctx: &Context) -> Result<(), CliError> {
    let c = &ctx.config;
    c.check_keys(&keys(&["image", "endmembers", "ground_truth", "pfa"], true))?;
    let seed = ctx.seed()?;
    let m = load_endmembers(input(ctx, "endmembers", "endmembers.csv"))?;
    let image = scene_with_truth(
        load_image(input(ctx, "image", "scene.hdr"))?,
        optional_input(ctx, "ground_truth", "ground_truth.csv").as_deref(),
        &m,
    )?;
    let pfa: f64 = c.get_or("pfa", 0.01)?;
    let detector = Detector::new(&m, &image, &gp_settings(ctx, seed)?)?;
    let cal = calibrate_threshold(&detector, &image, pfa)?;
    let result = unmix_with(&detector, &image, cal)?;
    let (fcls_a, fcls_rec) = fcls_everywhere(&m, &image)?;
    let gp_rec = gp_everywhere(&detector, &image)?;
    let metrics = pipeline_metrics(&image, &result, &fcls_a, &fcls_rec, &gp_rec)?;
    ctx.log(format!("{metrics:?}"));

    let map = DetectionMap::new(result.labels.clone(), result.statistics.clone())?;
    write(ctx, "abundances.csv", format_abundance_csv(&result, m.endmember_count()).as_bytes())?;
    write(ctx, "detection.csv", format_detection_csv(&map).as_bytes())?;
    write_json(
        ctx,
        "metrics.json",
        &json!({
            "pfa": pfa,
            "tau": metrics.tau,
            "linear_count": metrics.linear_count,
            "nonlinear_count": metrics.nonlinear_count,
            "unclassified_count": metrics.unclassified_count,
            "rmse_full_reconstruction": metrics.rmse_full_reconstruction,
            "rmse_fcls_reconstruction": metrics.rmse_fcls_reconstruction,
            "rmse_gp_reconstruction": metrics.rmse_gp_reconstruction,
            "rmse_linear_subset": metrics.rmse_linear_subset.map(finite),
            "rmse_linear_subset_fcls": metrics.rmse_linear_subset_fcls.map(finite),
        }),
    )?;
    Ok(())
}
