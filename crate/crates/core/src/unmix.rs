//! Abundance estimation, GP reconstruction and the Detect-then-Unmix pipeline.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::detector::{build_linear_model, calibrate_threshold, CalibrationResult, Detector};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, GpPrior, GpSettings, KernelSpec};
use crate::scene::{AbundanceVector, DetectionLabel, EndmemberMatrix, MixLabel, SceneImage};

/// Unconstrained least-squares abundances `(M'M)^-1 M' r`.
pub fn ls_abundances(m: &EndmemberMatrix, r: &DVector<f64>) -> Result<AbundanceVector> {
    let lm = build_linear_model(m.matrix())?;
    AbundanceVector::unconstrained(lm.abundances(r)?)
}

/// KKT violation of `alpha` for `min |r - M alpha|^2, alpha >= 0, 1'alpha = 1`.
///
/// Maximum of the primal infeasibility, the dual infeasibility and the
/// complementarity gap, with the multiplier of the sum constraint taken as
/// the alpha-weighted mean gradient.
pub fn fcls_kkt_residual(m: &DMatrix<f64>, r: &DVector<f64>, alpha: &DVector<f64>) -> f64 {
    let g = m.transpose() * (m * alpha - r);
    let mu = -alpha.dot(&g) / alpha.sum();
    let mut worst = (alpha.sum() - 1.0).abs();
    for i in 0..alpha.len() {
        let lambda = g[i] + mu;
        worst = worst
            .max(-alpha[i])
            .max(-lambda)
            .max((alpha[i].max(0.0) * lambda).abs());
    }
    worst
}

/// Fully constrained least squares by a primal active-set method.
pub fn fcls(m: &EndmemberMatrix, r: &DVector<f64>) -> Result<AbundanceVector> {
    let mm = m.matrix();
    if r.len() != mm.nrows() {
        return Err(Error::Dimension(format!(
            "pixel has {} bands, endmembers {}",
            r.len(),
            mm.nrows()
        )));
    }
    build_linear_model(mm)?;
    let n = mm.ncols();
    let q = mm.transpose() * mm;
    let b = mm.transpose() * r;
    let scale = q.diagonal().amax().max(f64::MIN_POSITIVE);

    // start at the best single endmember
    let start = (0..n)
        .min_by(|&i, &j| {
            let ei = (r - mm.column(i)).norm_squared();
            let ej = (r - mm.column(j)).norm_squared();
            ei.total_cmp(&ej)
        })
        .unwrap();
    let mut alpha = DVector::zeros(n);
    alpha[start] = 1.0;
    let mut active: Vec<bool> = (0..n).map(|i| i != start).collect();

    for _ in 0..100 * n {
        let free: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let g = &q * &alpha - &b;
        let k = free.len();
        let mut kkt = DMatrix::zeros(k + 1, k + 1);
        let mut rhs = DVector::zeros(k + 1);
        for (a, &i) in free.iter().enumerate() {
            for (c, &j) in free.iter().enumerate() {
                kkt[(a, c)] = q[(i, j)];
            }
            kkt[(a, k)] = 1.0;
            kkt[(k, a)] = 1.0;
            rhs[a] = -g[i];
        }
        let sol = kkt
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical("singular FCLS subproblem".into()))?;
        let step = sol.rows(0, k);
        let mu = sol[k];

        if step.amax() <= 1e-13 * alpha.amax().max(1.0) {
            // multipliers of the active bounds
            let mut drop = None;
            let mut most = -1e-12 * scale;
            for i in (0..n).filter(|&i| active[i]) {
                let lambda = g[i] + mu;
                if lambda < most {
                    most = lambda;
                    drop = Some(i);
                }
            }
            match drop {
                Some(i) => active[i] = false,
                None => return finish(alpha),
            }
            continue;
        }

        let mut t = 1.0;
        let mut blocking = None;
        for (a, &i) in free.iter().enumerate() {
            if step[a] < 0.0 {
                let limit = -alpha[i] / step[a];
                if limit < t {
                    t = limit;
                    blocking = Some(i);
                }
            }
        }
        for (a, &i) in free.iter().enumerate() {
            alpha[i] += t * step[a];
        }
        if let Some(i) = blocking {
            alpha[i] = 0.0;
            active[i] = true;
        }
    }
    Err(Error::Numerical(format!("FCLS did not converge in {} iterations", 100 * n)))
}

fn finish(mut alpha: DVector<f64>) -> Result<AbundanceVector> {
    for v in alpha.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let s = alpha.sum();
    alpha /= s;
    AbundanceVector::simplex(alpha)
}

/// GP predictive mean at the training inputs with hyperparameters fitted to
/// this pixel alone.
pub fn gp_reconstruct(m: &EndmemberMatrix, r: &DVector<f64>, settings: &GpSettings) -> Result<DVector<f64>> {
    let targets = DMatrix::from_column_slice(r.len(), 1, r.as_slice());
    let fit = fit_hyperparameters(m.matrix(), &targets, &settings.fit)?;
    let prior = GpPrior::new(KernelSpec::gaussian(fit.params.bandwidth)?, fit.params.noise_variance, m.matrix())?;
    Ok(r - prior.residual(r)?)
}

/// Reconstruction of a pixel under the detector's GP smoother.
pub fn gp_reconstruct_with(detector: &Detector, r: &DVector<f64>) -> Result<DVector<f64>> {
    Ok(r - detector.gp_residual(r)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmixResult {
    pub labels: Vec<DetectionLabel>,
    pub statistics: Vec<f64>,
    /// FCLS abundances for pixels sent to the linear branch.
    pub abundances: Vec<Option<AbundanceVector>>,
    /// `L x N` reconstruction driven by each pixel's branch.
    pub reconstruction: DMatrix<f64>,
    pub squared_errors: Vec<f64>,
    pub calibration: CalibrationResult,
}

impl UnmixResult {
    /// `R x N` abundances with NaN columns where the GP branch was used.
    pub fn abundance_matrix(&self, r: usize) -> DMatrix<f64> {
        let mut out = DMatrix::from_element(r, self.abundances.len(), f64::NAN);
        for (k, a) in self.abundances.iter().enumerate() {
            if let Some(a) = a {
                out.set_column(k, a.weights());
            }
        }
        out
    }
}

/// Calibrate, detect, then unmix linear pixels by FCLS and reconstruct
/// nonlinear ones with the GP.
pub fn detect_then_unmix(
    image: &SceneImage,
    m: &EndmemberMatrix,
    pfa: f64,
    settings: &GpSettings,
) -> Result<UnmixResult> {
    let detector = Detector::new(m, image, settings)?;
    let calibration = calibrate_threshold(&detector, image, pfa)?;
    unmix_with(&detector, image, calibration)
}

/// The unmixing half of [`detect_then_unmix`] with a ready detector and threshold.
pub fn unmix_with(detector: &Detector, image: &SceneImage, calibration: CalibrationResult) -> Result<UnmixResult> {
    let m = EndmemberMatrix::new(detector.shared_prior().inputs().clone())?;
    let tau = calibration.tau;
    let per_pixel: Vec<(DetectionLabel, f64, Option<AbundanceVector>, DVector<f64>)> = (0..image.pixel_count())
        .into_par_iter()
        .map(|n| {
            let r = image.pixel(n);
            let (label, t) = match detector.statistic(&r) {
                Ok(t) if t.is_nonlinear(tau) => (DetectionLabel::Nonlinear, t.value),
                Ok(t) => (DetectionLabel::Linear, t.value),
                Err(Error::Degenerate(_)) => (DetectionLabel::Unclassified, f64::NAN),
                Err(e) => return Err(e),
            };
            if label == DetectionLabel::Nonlinear {
                Ok((label, t, None, gp_reconstruct_with(detector, &r)?))
            } else {
                let a = fcls(&m, &r)?;
                let rec = m.matrix() * a.weights();
                Ok((label, t, Some(a), rec))
            }
        })
        .collect::<Result<_>>()?;

    let mut labels = Vec::with_capacity(per_pixel.len());
    let mut statistics = Vec::with_capacity(per_pixel.len());
    let mut abundances = Vec::with_capacity(per_pixel.len());
    let mut cols = Vec::with_capacity(per_pixel.len());
    for (label, t, a, rec) in per_pixel {
        labels.push(label);
        statistics.push(t);
        abundances.push(a);
        cols.push(rec);
    }
    let reconstruction = if cols.is_empty() {
        DMatrix::zeros(image.band_count(), 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    let squared_errors = (0..image.pixel_count())
        .map(|n| (image.pixels().column(n) - reconstruction.column(n)).norm_squared())
        .collect();
    Ok(UnmixResult {
        labels,
        statistics,
        abundances,
        reconstruction,
        squared_errors,
        calibration,
    })
}

/// FCLS on every pixel: `R x N` abundances and the `L x N` reconstruction.
pub fn fcls_everywhere(m: &EndmemberMatrix, image: &SceneImage) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cols: Vec<DVector<f64>> = (0..image.pixel_count())
        .into_par_iter()
        .map(|n| fcls(m, &image.pixel(n)).map(|a| a.weights().clone()))
        .collect::<Result<_>>()?;
    let a = DMatrix::from_columns(&cols);
    let rec = m.matrix() * &a;
    Ok((a, rec))
}

/// GP reconstruction of every pixel under the detector's smoother.
pub fn gp_everywhere(detector: &Detector, image: &SceneImage) -> Result<DMatrix<f64>> {
    let cols: Vec<DVector<f64>> = (0..image.pixel_count())
        .into_par_iter()
        .map(|n| gp_reconstruct_with(detector, &image.pixel(n)))
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// `sqrt(sum |a_n - a_hat_n|^2 / (N R))` over `R x N` matrices.
pub fn abundance_rmse(truth: &DMatrix<f64>, estimate: &DMatrix<f64>) -> Result<f64> {
    if truth.shape() != estimate.shape() {
        return Err(Error::Dimension(format!(
            "abundance shapes {:?} and {:?} differ",
            truth.shape(),
            estimate.shape()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Argument("no abundances to compare".into()));
    }
    Ok(((truth - estimate).norm_squared() / truth.len() as f64).sqrt())
}

/// `sqrt(sum |r_n - r_hat_n|^2 / (N L))` over `L x N` matrices.
pub fn reconstruction_rmse(image: &DMatrix<f64>, reconstruction: &DMatrix<f64>) -> Result<f64> {
    if image.shape() != reconstruction.shape() {
        return Err(Error::Dimension(format!(
            "image {:?} and reconstruction {:?} differ",
            image.shape(),
            reconstruction.shape()
        )));
    }
    if image.is_empty() {
        return Err(Error::Argument("empty image".into()));
    }
    Ok(((image - reconstruction).norm_squared() / image.len() as f64).sqrt())
}

/// Summary figures of one pipeline run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineMetrics {
    /// Abundance RMSE of the linear branch over truly linear pixels it handled.
    pub rmse_linear_subset: Option<f64>,
    /// FCLS-everywhere abundance RMSE over the same pixels.
    pub rmse_linear_subset_fcls: Option<f64>,
    pub rmse_full_reconstruction: f64,
    pub rmse_fcls_reconstruction: f64,
    pub rmse_gp_reconstruction: f64,
    pub linear_count: usize,
    pub nonlinear_count: usize,
    pub unclassified_count: usize,
    pub tau: f64,
}

/// Compare the pipeline with both single-strategy baselines.
pub fn pipeline_metrics(
    image: &SceneImage,
    result: &UnmixResult,
    fcls_abundances: &DMatrix<f64>,
    fcls_reconstruction: &DMatrix<f64>,
    gp_reconstruction: &DMatrix<f64>,
) -> Result<PipelineMetrics> {
    let count = |l: DetectionLabel| result.labels.iter().filter(|&&x| x == l).count();
    let (mut sub, mut sub_fcls) = (None, None);
    if let Some(gt) = &image.ground_truth {
        let idx: Vec<usize> = (0..image.pixel_count())
            .filter(|&n| gt.labels[n] == MixLabel::Linear && result.abundances[n].is_some())
            .collect();
        if !idx.is_empty() {
            let pick = |a: &DMatrix<f64>| DMatrix::from_columns(&idx.iter().map(|&n| a.column(n)).collect::<Vec<_>>());
            let truth = pick(&gt.abundances);
            let r = gt.abundances.nrows();
            sub = Some(abundance_rmse(&truth, &pick(&result.abundance_matrix(r)))?);
            sub_fcls = Some(abundance_rmse(&truth, &pick(fcls_abundances))?);
        }
    }
    Ok(PipelineMetrics {
        rmse_linear_subset: sub,
        rmse_linear_subset_fcls: sub_fcls,
        rmse_full_reconstruction: reconstruction_rmse(image.pixels(), &result.reconstruction)?,
        rmse_fcls_reconstruction: reconstruction_rmse(image.pixels(), fcls_reconstruction)?,
        rmse_gp_reconstruction: reconstruction_rmse(image.pixels(), gp_reconstruction)?,
        linear_count: count(DetectionLabel::Linear),
        nonlinear_count: count(DetectionLabel::Nonlinear),
        unclassified_count: count(DetectionLabel::Unclassified),
        tau: result.calibration.tau,
    })
}

/// `pixel_index,a1,..,aR,label`; abundance fields are empty for GP-branch pixels.
pub fn format_abundance_csv(result: &UnmixResult, r: usize) -> String {
    let mut out = String::from("pixel_index");
    for k in 1..=r {
        let _ = write!(out, ",a{k}");
    }
    out.push_str(",label\n");
    for (n, (a, label)) in result.abundances.iter().zip(&result.labels).enumerate() {
        let _ = write!(out, "{n}");
        for k in 0..r {
            match a {
                Some(a) => {
                    let _ = write!(out, ",{:.12e}", a.weights()[k]);
                }
                None => out.push(','),
            }
        }
        let _ = writeln!(out, ",{label}");
    }
    out
}
