//! Linear-versus-GP hypothesis test for nonlinear mixing.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gp::{fit_shared, fit_hyperparameters, GpPrior, GpSettings, HyperparameterMode, Hyperparameters, KernelSpec};
use crate::rng::Seed;
use crate::scene::{DetectionLabel, DetectionMap, EndmemberMatrix, MixLabel, SceneImage};
use crate::special::{beta_quantile, beta_reg, digamma, kolmogorov_survival, trigamma};

/// Orthogonal-complement projector of `span(M)`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    /// Orthonormal basis of `span(M)`, `L x R`.
    q: DMatrix<f64>,
    /// Upper-triangular QR factor, `R x R`.
    r: DMatrix<f64>,
    rank: usize,
}

impl LinearModel {
    pub fn projector(&self) -> DMatrix<f64> {
        let l = self.q.nrows();
        DMatrix::identity(l, l) - &self.q * self.q.transpose()
    }

    /// `L - R`.
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn band_count(&self) -> usize {
        self.q.nrows()
    }

    fn check(&self, r: &DVector<f64>) -> Result<()> {
        if r.len() != self.q.nrows() {
            return Err(Error::Dimension(format!(
                "pixel has {} bands, model {}",
                r.len(),
                self.q.nrows()
            )));
        }
        Ok(())
    }

    /// `P r`.
    pub fn residual(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(r)?;
        Ok(r - &self.q * (self.q.transpose() * r))
    }

    /// Unconstrained least-squares abundances `R^{-1} Q^T r`.
    pub fn abundances(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        self.check(r)?;
        let mut a = self.q.transpose() * r;
        if !self.r.solve_upper_triangular_mut(&mut a) {
            return Err(Error::Numerical("singular triangular factor".into()));
        }
        Ok(a)
    }
}

/// QR-based projector onto the orthogonal complement of the endmembers.
pub fn build_linear_model(m: &DMatrix<f64>) -> Result<LinearModel> {
    let (l, r) = m.shape();
    if r == 0 || l <= r {
        return Err(Error::Dimension(format!("need L > R, got {l} x {r}")));
    }
    let qr = m.clone().qr();
    let q = qr.q();
    let rf = qr.r();
    let scale = rf.diagonal().amax();
    let min = rf.diagonal().iter().fold(f64::INFINITY, |a, d| a.min(d.abs()));
    if !(scale > 0.0) || min <= 1e-12 * scale * (l as f64) {
        return Err(Error::Numerical("endmember matrix is rank deficient".into()));
    }
    Ok(LinearModel { q, r: rf, rank: l - r })
}

/// `P r` for a fitted linear model.
pub fn linear_residual(lm: &LinearModel, r: &DVector<f64>) -> Result<DVector<f64>> {
    lm.residual(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestStatistic {
    pub value: f64,
    pub e_lin_sq: f64,
    pub e_nlin_sq: f64,
}

impl TestStatistic {
    pub fn from_energies(e_nlin_sq: f64, e_lin_sq: f64) -> Result<Self> {
        let total = e_nlin_sq + e_lin_sq;
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Degenerate("both residuals are zero".into()));
        }
        let value = (2.0 * e_nlin_sq / total).clamp(0.0, 2.0);
        Ok(TestStatistic { value, e_lin_sq, e_nlin_sq })
    }

    /// Nonlinear iff `T < tau`; ties stay linear.
    pub fn is_nonlinear(&self, tau: f64) -> bool {
        self.value < tau
    }
}

/// `T = 2 |e_nlin|^2 / (|e_nlin|^2 + |e_lin|^2)`.
pub fn test_statistic(e_nlin: &DVector<f64>, e_lin: &DVector<f64>) -> Result<TestStatistic> {
    TestStatistic::from_energies(e_nlin.norm_squared(), e_lin.norm_squared())
}

/// Shape parameters of the null beta law of `T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaParams {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
            return Err(Error::Argument(format!("beta shapes must be positive, got ({alpha}, {beta})")));
        }
        Ok(BetaParams { alpha, beta })
    }

    pub fn cdf(&self, x: f64) -> f64 {
        beta_reg(self.alpha, self.beta, x)
    }
}

/// Maximum-likelihood beta fit to values already on `(0, 1)`.
pub fn fit_beta_unit(samples: &[f64]) -> Result<BetaParams> {
    if samples.len() < 30 {
        return Err(Error::Argument(format!("need at least 30 samples, got {}", samples.len())));
    }
    if let Some(bad) = samples.iter().find(|x| !(**x > 0.0 && **x < 1.0)) {
        return Err(Error::Validation(format!("sample {bad} outside the open unit interval")));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if var <= 1e-14 * mean * mean {
        return Err(Error::Degenerate("samples have zero variance".into()));
    }
    let s1 = samples.iter().map(|x| x.ln()).sum::<f64>() / n;
    let s2 = samples.iter().map(|x| (1.0 - x).ln()).sum::<f64>() / n;

    let c = mean * (1.0 - mean) / var - 1.0;
    let (mut a, mut b) = if c > 0.0 { (mean * c, (1.0 - mean) * c) } else { (1.0, 1.0) };
    for _ in 0..100 {
        let dab = digamma(a + b);
        let f1 = digamma(a) - dab - s1;
        let f2 = digamma(b) - dab - s2;
        let tab = trigamma(a + b);
        let j11 = trigamma(a) - tab;
        let j22 = trigamma(b) - tab;
        let j12 = -tab;
        let det = j11 * j22 - j12 * j12;
        if !(det.is_finite() && det != 0.0) {
            return Err(Error::Numerical("singular Jacobian in beta fit".into()));
        }
        let da = (j22 * f1 - j12 * f2) / det;
        let db = (j11 * f2 - j12 * f1) / det;
        let mut t = 1.0;
        while a - t * da <= 0.0 || b - t * db <= 0.0 {
            t *= 0.5;
        }
        a -= t * da;
        b -= t * db;
        if (t * da).abs().max((t * db).abs()) < 1e-10 * a.max(b).max(1.0) {
            break;
        }
    }
    BetaParams::new(a, b)
}

/// Beta law of `T` under the null hypothesis.
///
/// Statistics must lie in `(0, 2)`. The beta law lives on `(0, 1)`, where the
/// linear residual dominates the GP residual; the rare values at or above 1
/// are left out of the fit and have null CDF 1.
pub fn fit_beta(samples: &[f64]) -> Result<BetaParams> {
    if let Some(bad) = samples.iter().find(|t| !(**t > 0.0 && **t < 2.0)) {
        return Err(Error::Validation(format!("statistic {bad} outside (0, 2)")));
    }
    let inside: Vec<f64> = samples.iter().copied().filter(|t| *t < 1.0).collect();
    fit_beta_unit(&inside)
}

pub fn beta_inverse_cdf(params: BetaParams, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Argument(format!("probability must be in (0, 1), got {p}")));
    }
    Ok(beta_quantile(params.alpha, params.beta, p))
}

/// One-sample Kolmogorov-Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// KS test of samples against a beta law (CDF 1 at and above 1).
pub fn ks_test(samples: &[f64], params: BetaParams) -> Result<KsResult> {
    if samples.is_empty() {
        return Err(Error::Argument("no samples".into()));
    }
    let mut x = samples.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, v) in x.iter().enumerate() {
        let f = params.cdf(*v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    Ok(KsResult {
        statistic: d,
        p_value: kolmogorov_survival(lambda),
    })
}

/// Linear projector plus GP smoother for one endmember matrix.
#[derive(Debug, Clone)]
pub struct Detector {
    inputs: DMatrix<f64>,
    linear: LinearModel,
    hyper: Hyperparameters,
    prior: GpPrior,
    settings: GpSettings,
}

impl Detector {
    /// Fits the shared hyperparameters on `image` (they also supply the noise estimate).
    pub fn new(m: &EndmemberMatrix, image: &SceneImage, settings: &GpSettings) -> Result<Self> {
        check_image(m, image)?;
        let fit = fit_shared(settings, m.matrix(), image.pixels())?;
        Self::with_hyperparameters(m, fit.params, settings)
    }

    pub fn with_hyperparameters(m: &EndmemberMatrix, hyper: Hyperparameters, settings: &GpSettings) -> Result<Self> {
        let inputs = m.matrix().clone();
        let linear = build_linear_model(&inputs)?;
        let prior = GpPrior::new(KernelSpec::gaussian(hyper.bandwidth)?, hyper.noise_variance, &inputs)?;
        Ok(Detector {
            inputs,
            linear,
            hyper,
            prior,
            settings: settings.clone(),
        })
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        self.hyper
    }

    /// GP-estimated noise variance.
    pub fn noise_variance(&self) -> f64 {
        self.hyper.noise_variance
    }

    pub fn linear_model(&self) -> &LinearModel {
        &self.linear
    }

    pub fn shared_prior(&self) -> &GpPrior {
        &self.prior
    }

    pub fn settings(&self) -> &GpSettings {
        &self.settings
    }

    /// GP fitting error for one pixel under the configured hyperparameter mode.
    pub fn gp_residual(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        match self.settings.mode {
            HyperparameterMode::Shared => self.prior.residual(r),
            HyperparameterMode::PerPixel => {
                let targets = DMatrix::from_column_slice(r.len(), 1, r.as_slice());
                let fit = fit_hyperparameters(&self.inputs, &targets, &self.settings.fit)?;
                GpPrior::new(KernelSpec::gaussian(fit.params.bandwidth)?, fit.params.noise_variance, &self.inputs)?
                    .residual(r)
            }
        }
    }

    pub fn statistic(&self, r: &DVector<f64>) -> Result<TestStatistic> {
        let e_lin = self.linear.residual(r)?;
        let e_nlin = self.gp_residual(r)?;
        test_statistic(&e_nlin, &e_lin)
    }

    /// Statistic per pixel column; degenerate pixels give `None`.
    pub fn statistics(&self, pixels: &DMatrix<f64>) -> Result<Vec<Option<TestStatistic>>> {
        (0..pixels.ncols())
            .into_par_iter()
            .map(|n| match self.statistic(&pixels.column(n).into_owned()) {
                Ok(t) => Ok(Some(t)),
                Err(Error::Degenerate(_)) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    }
}

fn check_image(m: &EndmemberMatrix, image: &SceneImage) -> Result<()> {
    if image.pixel_count() == 0 {
        return Err(Error::Argument("image has no pixels".into()));
    }
    if image.band_count() != m.band_count() {
        return Err(Error::Dimension(format!(
            "image has {} bands, endmembers {}",
            image.band_count(),
            m.band_count()
        )));
    }
    Ok(())
}

/// Threshold calibrated on a synthetic linear image.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub beta: BetaParams,
    pub tau: f64,
    pub pfa: f64,
    pub noise_variance: f64,
    pub h0_samples: Vec<f64>,
}

/// Linear surrogate of the image, `M A_ls` plus white noise at the detector's
/// noise estimate.
pub fn synthetic_linear_image(detector: &Detector, image: &SceneImage, seed: u64) -> Result<DMatrix<f64>> {
    let sd = detector.noise_variance().sqrt();
    let noise = Normal::new(0.0, sd).map_err(|e| Error::Numerical(e.to_string()))?;
    let base = Seed(seed).derive("calibration");
    let cols: Vec<DVector<f64>> = (0..image.pixel_count())
        .into_par_iter()
        .map(|n| {
            let r = image.pixel(n);
            let a = detector.linear.abundances(&r)?;
            let mut s = &detector.inputs * a;
            let mut rng = base.stream(n as u64);
            for v in s.iter_mut() {
                *v += noise.sample(&mut rng);
            }
            Ok(s)
        })
        .collect::<Result<_>>()?;
    Ok(DMatrix::from_columns(&cols))
}

/// Fit the null distribution of `T` on a linear surrogate of `image` and
/// return the threshold for the requested false-alarm rate.
pub fn calibrate_threshold(detector: &Detector, image: &SceneImage, pfa: f64) -> Result<CalibrationResult> {
    if !(pfa > 0.0 && pfa < 1.0) {
        return Err(Error::Argument(format!("pfa must be in (0, 1), got {pfa}")));
    }
    let synthetic = synthetic_linear_image(detector, image, detector.settings.seed)?;
    let h0_samples: Vec<f64> = detector
        .statistics(&synthetic)?
        .into_iter()
        .flatten()
        .map(|t| t.value)
        .collect();
    let beta = fit_beta(&h0_samples)?;
    let tau = beta_inverse_cdf(beta, pfa)?;
    Ok(CalibrationResult {
        beta,
        tau,
        pfa,
        noise_variance: detector.noise_variance(),
        h0_samples,
    })
}

/// Label every pixel: nonlinear iff `T < tau`.
pub fn detect_image(detector: &Detector, image: &SceneImage, tau: f64) -> Result<DetectionMap> {
    if image.band_count() != detector.linear.band_count() {
        return Err(Error::Dimension("image and endmember band counts differ".into()));
    }
    let stats = detector.statistics(image.pixels())?;
    let mut labels = Vec::with_capacity(stats.len());
    let mut values = Vec::with_capacity(stats.len());
    for s in stats {
        match s {
            Some(t) => {
                labels.push(if t.is_nonlinear(tau) { DetectionLabel::Nonlinear } else { DetectionLabel::Linear });
                values.push(t.value);
            }
            None => {
                labels.push(DetectionLabel::Unclassified);
                values.push(f64::NAN);
            }
        }
    }
    DetectionMap::new(labels, values)
}

/// Which side of the threshold counts as a detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// Nonlinear iff `T < tau`.
    Below,
    /// Nonlinear iff `T > tau`.
    Above,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub pfa: f64,
    pub pd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

impl RocCurve {
    /// Best detection probability among thresholds whose false-alarm rate is at most `pfa`.
    pub fn pd_at(&self, pfa: f64) -> f64 {
        self.points
            .iter()
            .filter(|p| p.pfa <= pfa + 1e-12)
            .map(|p| p.pd)
            .fold(0.0, f64::max)
    }
}

/// Threshold sweep over the distinct statistic values.
pub fn roc_curve(statistics: &[f64], labels: &[MixLabel], orientation: Orientation) -> Result<RocCurve> {
    if statistics.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} statistics for {} labels",
            statistics.len(),
            labels.len()
        )));
    }
    let mut pairs: Vec<(f64, bool)> = statistics
        .iter()
        .zip(labels)
        .filter(|(t, _)| t.is_finite())
        .map(|(t, l)| (*t, *l == MixLabel::Nonlinear))
        .collect();
    let pos = pairs.iter().filter(|p| p.1).count();
    let neg = pairs.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Validation("ROC needs both linear and nonlinear pixels".into()));
    }
    match orientation {
        Orientation::Below => pairs.sort_by(|a, b| a.0.total_cmp(&b.0)),
        Orientation::Above => pairs.sort_by(|a, b| b.0.total_cmp(&a.0)),
    }
    let (pos, neg) = (pos as f64, neg as f64);
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < pairs.len() {
        let t = pairs[i].0;
        // everything strictly beyond t is flagged
        points.push(RocPoint {
            threshold: t,
            pfa: fp as f64 / neg,
            pd: tp as f64 / pos,
        });
        while i < pairs.len() && pairs[i].0 == t {
            if pairs[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
    }
    points.push(RocPoint {
        threshold: match orientation {
            Orientation::Below => f64::INFINITY,
            Orientation::Above => f64::NEG_INFINITY,
        },
        pfa: 1.0,
        pd: 1.0,
    });
    let auc = points
        .windows(2)
        .map(|w| (w[1].pfa - w[0].pfa) * (w[1].pd + w[0].pd) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

/// `pixel_index,T,label` rows.
pub fn format_detection_csv(map: &DetectionMap) -> String {
    let mut out = String::from("pixel_index,T,label\n");
    for (i, (t, l)) in map.statistics.iter().zip(&map.labels).enumerate() {
        out.push_str(&format!("{i},{t},{l}\n"));
    }
    out
}

/// `threshold,pfa,pd` rows.
pub fn format_roc_csv(roc: &RocCurve) -> String {
    let mut out = String::from("threshold,pfa,pd\n");
    for p in &roc.points {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.pfa, p.pd));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::Beta;

    fn random_m(l: usize, r: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(l, r, |_, _| rng.random_range(0.05..1.0))
    }

    #[test]
    fn projector_invariants() {
        let m = random_m(20, 4, 1);
        let lm = build_linear_model(&m).unwrap();
        let p = lm.projector();
        assert!((&p * &p - &p).amax() <= 1e-10);
        assert!((&p * &m).amax() <= 1e-10);
        assert!((p.trace() - 16.0).abs() <= 1e-8);
    }

    #[test]
    fn orthonormal_columns_give_identity_minus_outer() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let p = build_linear_model(&m).unwrap().projector();
        let expected = DMatrix::identity(3, 3) - &m * m.transpose();
        assert!((p - expected).amax() <= 1e-12);
    }

    #[test]
    fn rank_deficient_is_rejected() {
        let mut m = random_m(10, 3, 2);
        let c = m.column(0) * 2.0;
        m.set_column(2, &c);
        assert!(build_linear_model(&m).is_err());
    }

    #[test]
    fn residual_cases() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        let lm = build_linear_model(&m).unwrap();
        let r = DVector::from_vec(vec![0.0, 0.0, 0.7]);
        assert!((lm.residual(&r).unwrap() - &r).amax() < 1e-15);
        let inside = &m * DVector::from_vec(vec![0.3, 0.7]);
        assert!(lm.residual(&inside).unwrap().norm() <= 1e-10);
        assert!((lm.abundances(&inside).unwrap() - DVector::from_vec(vec![0.3, 0.7])).amax() < 1e-12);
        assert!(lm.residual(&DVector::zeros(4)).is_err());
    }

    #[test]
    fn statistic_arithmetic() {
        let t = TestStatistic::from_energies(1.0, 1.0).unwrap();
        assert_eq!(t.value, 1.0);
        assert_eq!(TestStatistic::from_energies(0.0, 2.0).unwrap().value, 0.0);
        assert_eq!(TestStatistic::from_energies(1.0, 3.0).unwrap().value, 0.5);
        assert!(matches!(TestStatistic::from_energies(0.0, 0.0), Err(Error::Degenerate(_))));
        assert!(!t.is_nonlinear(1.0));
        assert!(t.is_nonlinear(1.0 + 1e-12));
    }

    #[test]
    fn beta_fit_recovers_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let d = Beta::new(2.0, 5.0).unwrap();
        let x: Vec<f64> = (0..100_000).map(|_| d.sample(&mut rng)).collect();
        let p = fit_beta_unit(&x).unwrap();
        assert!((p.alpha - 2.0).abs() < 0.1 && (p.beta - 5.0).abs() < 0.1, "{p:?}");
        let u: Vec<f64> = (0..100_000).map(|_| rng.random_range(1e-12..1.0)).collect();
        let p = fit_beta_unit(&u).unwrap();
        assert!((p.alpha - 1.0).abs() < 0.05 && (p.beta - 1.0).abs() < 0.05, "{p:?}");
    }

    #[test]
    fn beta_fit_errors() {
        assert!(matches!(fit_beta(&[0.8; 40]), Err(Error::Degenerate(_))));
        let mut x = vec![0.5; 40];
        x[3] = 2.0;
        assert!(matches!(fit_beta(&x), Err(Error::Validation(_))));
        assert!(fit_beta(&[0.5; 10]).is_err());
    }

    #[test]
    fn beta_fit_ignores_statistics_above_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = Beta::new(20.0, 2.0).unwrap();
        let x: Vec<f64> = (0..5000).map(|_| d.sample(&mut rng)).collect();
        let mut y = x.clone();
        y.extend([1.0005, 1.2, 1.9]);
        assert_eq!(fit_beta(&x).unwrap(), fit_beta(&y).unwrap());
    }

    #[test]
    fn inverse_cdf_cases() {
        let u = BetaParams::new(1.0, 1.0).unwrap();
        assert!((beta_inverse_cdf(u, 0.3).unwrap() - 0.3).abs() < 1e-10);
        let s = BetaParams::new(2.0, 2.0).unwrap();
        assert!((beta_inverse_cdf(s, 0.5).unwrap() - 0.5).abs() < 1e-10);
        assert!(beta_inverse_cdf(s, 0.0).is_err());
        assert!(beta_inverse_cdf(s, 1.0).is_err());
    }

    #[test]
    fn beta_quantile_matches_quadrature() {
        // Simpson integration of the Beta(2, 5) density up to the quantile
        let p = BetaParams::new(2.0, 5.0).unwrap();
        let q = beta_inverse_cdf(p, 0.05).unwrap();
        let n = 20_000;
        let h = q / n as f64;
        let f = |x: f64| 30.0 * x * (1.0 - x).powi(4);
        let mut s = f(0.0) + f(q);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 0.05).abs() < 1e-8);
    }

    #[test]
    fn ks_accepts_own_law_and_rejects_other() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = Beta::new(3.0, 4.0).unwrap();
        let x: Vec<f64> = (0..4000).map(|_| d.sample(&mut rng)).collect();
        let good = ks_test(&x, BetaParams::new(3.0, 4.0).unwrap()).unwrap();
        assert!(good.p_value > 0.01);
        let bad = ks_test(&x, BetaParams::new(4.0, 3.0).unwrap()).unwrap();
        assert!(bad.p_value < 1e-6);
    }

    #[test]
    fn roc_separated_and_reversed() {
        let t = [0.1, 0.2, 0.3, 1.2, 1.5, 1.7];
        let labels = [
            MixLabel::Nonlinear,
            MixLabel::Nonlinear,
            MixLabel::Nonlinear,
            MixLabel::Linear,
            MixLabel::Linear,
            MixLabel::Linear,
        ];
        let roc = roc_curve(&t, &labels, Orientation::Below).unwrap();
        assert_eq!(roc.auc, 1.0);
        assert_eq!(roc.pd_at(0.0), 1.0);
        let rev = roc_curve(&t, &labels, Orientation::Above).unwrap();
        assert_eq!(rev.auc, 0.0);
        assert!(roc_curve(&t, &[MixLabel::Linear; 6], Orientation::Below).is_err());
    }

    #[test]
    fn roc_with_ties_is_antisymmetric() {
        let t = [0.5, 0.5, 0.7, 0.7, 0.2, 0.9, 0.5];
        let l = [
            MixLabel::Nonlinear,
            MixLabel::Linear,
            MixLabel::Nonlinear,
            MixLabel::Linear,
            MixLabel::Linear,
            MixLabel::Nonlinear,
            MixLabel::Linear,
        ];
        let a = roc_curve(&t, &l, Orientation::Below).unwrap().auc;
        let b = roc_curve(&t, &l, Orientation::Above).unwrap().auc;
        assert!((a + b - 1.0).abs() < 1e-15);
    }
}
