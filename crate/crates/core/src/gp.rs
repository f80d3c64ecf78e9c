//! Gaussian-process regression over endmember-space inputs.
//!
//! The training inputs are the `L` rows of the endmember matrix (one
//! `R`-vector per band) and the targets are the reflectances of a pixel.
//! The prior is zero-mean with either a Gaussian or a linear kernel and
//! white observation noise.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Relative jitter added to the Gram diagonal before factorization.
pub const JITTER: f64 = 1e-10;

/// Covariance function of the prior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// `exp(-|x - y|^2 / (2 s^2))`.
    Gaussian { bandwidth: f64 },
    /// `x . y`.
    Linear,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Result<Self> {
        if !(bandwidth.is_finite() && bandwidth > 0.0) {
            return Err(Error::Argument(format!("bandwidth must be positive, got {bandwidth}")));
        }
        Ok(KernelSpec::Gaussian { bandwidth })
    }

    fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Gaussian { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(format!("{what} contain non-finite values")));
    }
    Ok(())
}

/// Kernel evaluated between every pair of rows of `inputs`.
pub fn gram_matrix(kernel: &KernelSpec, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if inputs.nrows() == 0 {
        return Err(Error::Argument("gram matrix needs at least one input".into()));
    }
    check_finite(inputs, "kernel inputs")?;
    let xs = rows(inputs);
    let n = xs.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = if i == j && matches!(kernel, KernelSpec::Gaussian { .. }) {
                1.0
            } else {
                kernel.eval(&xs[i], &xs[j])
            };
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}

/// Kernel between rows of `a` (result rows) and rows of `b` (result columns).
pub fn cross_gram(kernel: &KernelSpec, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::Dimension(format!(
            "inputs have {} columns, training inputs {}",
            a.ncols(),
            b.ncols()
        )));
    }
    check_finite(a, "kernel inputs")?;
    let xa = rows(a);
    let xb = rows(b);
    Ok(DMatrix::from_fn(xa.len(), xb.len(), |i, j| kernel.eval(&xa[i], &xb[j])))
}

fn jitter_for(gram: &DMatrix<f64>) -> f64 {
    JITTER * gram.trace() / gram.nrows() as f64
}

fn factor(c: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(c).ok_or_else(|| {
        Error::Numerical(
            "Cholesky factorization of K + noise*I failed; increase the noise variance or the jitter".into(),
        )
    })
}

/// Prior over a fixed input set, factored once: `C = K + (jitter + noise) I = L L^T`.
#[derive(Debug, Clone)]
pub struct GpPrior {
    kernel: KernelSpec,
    noise_variance: f64,
    jitter: f64,
    inputs: DMatrix<f64>,
    gram: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl GpPrior {
    pub fn new(kernel: KernelSpec, noise_variance: f64, inputs: &DMatrix<f64>) -> Result<Self> {
        if !(noise_variance.is_finite() && noise_variance >= 0.0) {
            return Err(Error::Argument(format!("noise variance must be >= 0, got {noise_variance}")));
        }
        let gram = gram_matrix(&kernel, inputs)?;
        let jitter = jitter_for(&gram);
        let mut c = gram.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter + noise_variance;
        }
        let chol = factor(c)?;
        Ok(GpPrior {
            kernel,
            noise_variance,
            jitter,
            inputs: inputs.clone(),
            gram,
            chol,
        })
    }

    pub fn kernel(&self) -> KernelSpec {
        self.kernel
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    /// Noise plus jitter: the diagonal loading actually factored.
    pub fn effective_noise(&self) -> f64 {
        self.noise_variance + self.jitter
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn band_count(&self) -> usize {
        self.gram.nrows()
    }

    /// `C^{-1} r`.
    pub fn solve(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        if r.len() != self.band_count() {
            return Err(Error::Dimension(format!(
                "target has {} bands, model {}",
                r.len(),
                self.band_count()
            )));
        }
        Ok(self.chol.solve(r))
    }

    /// Fitting error of the posterior mean at the training inputs, `r - K C^{-1} r`,
    /// evaluated as `noise * C^{-1} r`.
    pub fn residual(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(self.solve(r)? * self.effective_noise())
    }

    pub fn condition(self, targets: DVector<f64>) -> Result<GpModel> {
        let weights = self.solve(&targets)?;
        Ok(GpModel {
            prior: self,
            targets,
            weights,
        })
    }
}

/// Posterior of a GP given one pixel's reflectances.
#[derive(Debug, Clone)]
pub struct GpModel {
    prior: GpPrior,
    targets: DVector<f64>,
    weights: DVector<f64>,
}

impl GpModel {
    pub fn fit(
        kernel: KernelSpec,
        noise_variance: f64,
        inputs: &DMatrix<f64>,
        targets: DVector<f64>,
    ) -> Result<Self> {
        GpPrior::new(kernel, noise_variance, inputs)?.condition(targets)
    }

    pub fn prior(&self) -> &GpPrior {
        &self.prior
    }

    pub fn targets(&self) -> &DVector<f64> {
        &self.targets
    }

    /// `(K + noise I)^{-1} r`.
    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    /// Posterior mean at the rows of `test_inputs`.
    pub fn predictive_mean(&self, test_inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
        let ks = cross_gram(&self.prior.kernel, test_inputs, &self.prior.inputs)?;
        Ok(ks * &self.weights)
    }

    /// Posterior covariance at the rows of `test_inputs`.
    pub fn predictive_cov(&self, test_inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let ks = cross_gram(&self.prior.kernel, test_inputs, &self.prior.inputs)?;
        let kss = gram_matrix(&self.prior.kernel, test_inputs)?;
        let mut v = ks.transpose();
        self.prior.chol.l().solve_lower_triangular_mut(&mut v);
        let mut cov = kss - v.transpose() * v;
        // exact symmetry
        let n = cov.nrows();
        for i in 0..n {
            for j in 0..i {
                let m = 0.5 * (cov[(i, j)] + cov[(j, i)]);
                cov[(i, j)] = m;
                cov[(j, i)] = m;
            }
        }
        Ok(cov)
    }

    /// `r - mean(M)`: the nonlinear fitting error at the training inputs.
    pub fn fitting_residual(&self) -> DVector<f64> {
        &self.weights * self.prior.effective_noise()
    }
}

/// Kernel width and noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hyperparameters {
    pub bandwidth: f64,
    pub noise_variance: f64,
}

impl Hyperparameters {
    pub fn to_log(self) -> [f64; 2] {
        [self.bandwidth.ln(), self.noise_variance.ln()]
    }

    pub fn from_log(theta: [f64; 2]) -> Self {
        Hyperparameters {
            bandwidth: theta[0].exp(),
            noise_variance: theta[1].exp(),
        }
    }
}

/// Negative log marginal likelihood of one or more independent target
/// vectors (columns of `targets`) sharing the same hyperparameters.
///
/// Includes the `L/2 log(2 pi)` constant per column.
#[derive(Debug, Clone)]
pub struct MarginalLikelihood {
    gaussian: bool,
    sq_dist: DMatrix<f64>,
    linear_gram: DMatrix<f64>,
    targets: DMatrix<f64>,
}

impl MarginalLikelihood {
    pub fn gaussian(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        Self::build(true, inputs, targets)
    }

    pub fn linear(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        Self::build(false, inputs, targets)
    }

    fn build(gaussian: bool, inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Result<Self> {
        check_finite(inputs, "kernel inputs")?;
        check_finite(targets, "targets")?;
        if targets.nrows() != inputs.nrows() {
            return Err(Error::Dimension(format!(
                "{} targets per column for {} inputs",
                targets.nrows(),
                inputs.nrows()
            )));
        }
        let xs = rows(inputs);
        let n = xs.len();
        let sq_dist = DMatrix::from_fn(n, n, |i, j| {
            xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b) * (a - b)).sum()
        });
        let linear_gram = gram_matrix(&KernelSpec::Linear, inputs)?;
        Ok(MarginalLikelihood {
            gaussian,
            sq_dist,
            linear_gram,
            targets: targets.clone(),
        })
    }

    fn gram(&self, bandwidth: f64) -> DMatrix<f64> {
        if self.gaussian {
            let w = -0.5 / (bandwidth * bandwidth);
            self.sq_dist.map(|d| (d * w).exp())
        } else {
            self.linear_gram.clone()
        }
    }

    fn covariance(&self, p: Hyperparameters) -> (DMatrix<f64>, DMatrix<f64>) {
        let k = self.gram(p.bandwidth);
        let jitter = jitter_for(&k);
        let mut c = k.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter + p.noise_variance;
        }
        (k, c)
    }

    fn constant(&self) -> f64 {
        0.5 * (self.targets.nrows() * self.targets.ncols()) as f64 * (2.0 * PI).ln()
    }

    pub fn value(&self, p: Hyperparameters) -> Result<f64> {
        let (_, c) = self.covariance(p);
        let chol = factor(c)?;
        let a = chol.solve(&self.targets);
        let fit = 0.5 * self.targets.component_mul(&a).sum();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        Ok(fit + 0.5 * self.targets.ncols() as f64 * log_det + self.constant())
    }

    /// Value and gradient with respect to `(ln s, ln noise)`.
    /// The bandwidth component is zero for the linear kernel.
    pub fn value_and_gradient(&self, p: Hyperparameters) -> Result<(f64, [f64; 2])> {
        let (k, c) = self.covariance(p);
        let chol = factor(c)?;
        let a = chol.solve(&self.targets);
        let fit = 0.5 * self.targets.component_mul(&a).sum();
        let log_det: f64 = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
        let cols = self.targets.ncols() as f64;
        let value = fit + 0.5 * cols * log_det + self.constant();

        // W = P C^{-1} - A A^T ; dNLML/dtheta = 1/2 tr(W dC/dtheta)
        let w = chol.inverse() * cols - &a * a.transpose();
        let g_noise = 0.5 * p.noise_variance * w.trace();
        let g_width = if self.gaussian {
            let inv_s2 = 1.0 / (p.bandwidth * p.bandwidth);
            0.5 * w
                .iter()
                .zip(k.iter())
                .zip(self.sq_dist.iter())
                .map(|((wij, kij), dij)| wij * kij * dij * inv_s2)
                .sum::<f64>()
        } else {
            0.0
        };
        Ok((value, [g_width, g_noise]))
    }

    /// Split of the noise-gradient into its data-fit and log-determinant parts.
    pub fn noise_gradient_terms(&self, p: Hyperparameters) -> Result<(f64, f64)> {
        let (_, c) = self.covariance(p);
        let chol = factor(c)?;
        let a = chol.solve(&self.targets);
        let fit = -0.5 * p.noise_variance * a.norm_squared();
        let complexity = 0.5 * p.noise_variance * self.targets.ncols() as f64 * chol.inverse().trace();
        Ok((fit, complexity))
    }
}

fn single(r: &DVector<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(r.len(), 1, r.as_slice())
}

/// Gaussian-kernel negative log marginal likelihood of one pixel.
pub fn negative_log_marginal_likelihood(
    p: Hyperparameters,
    inputs: &DMatrix<f64>,
    r: &DVector<f64>,
) -> Result<f64> {
    check_params(p)?;
    MarginalLikelihood::gaussian(inputs, &single(r))?.value(p)
}

/// Gradient of [`negative_log_marginal_likelihood`] with respect to `(ln s, ln noise)`.
pub fn nlml_gradient(p: Hyperparameters, inputs: &DMatrix<f64>, r: &DVector<f64>) -> Result<[f64; 2]> {
    check_params(p)?;
    Ok(MarginalLikelihood::gaussian(inputs, &single(r))?
        .value_and_gradient(p)?
        .1)
}

fn check_params(p: Hyperparameters) -> Result<()> {
    if !(p.bandwidth > 0.0 && p.noise_variance > 0.0 && p.bandwidth.is_finite() && p.noise_variance.is_finite()) {
        return Err(Error::Argument(format!("hyperparameters must be positive: {p:?}")));
    }
    Ok(())
}

/// Controls for the marginal-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    /// Explicit starting points; `None` uses the default 2 x 2 grid.
    pub starts: Option<Vec<Hyperparameters>>,
    pub max_iterations: usize,
    /// Stop when the projected gradient's infinity norm falls below this.
    pub gradient_tolerance: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            starts: None,
            max_iterations: 200,
            gradient_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitResult {
    pub params: Hyperparameters,
    pub nlml: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Median distance between distinct input rows (1 when all coincide).
pub fn median_pairwise_distance(inputs: &DMatrix<f64>) -> f64 {
    let xs = rows(inputs);
    let mut d = Vec::with_capacity(xs.len() * xs.len().saturating_sub(1) / 2);
    for i in 0..xs.len() {
        for j in 0..i {
            d.push(xs[i].iter().zip(&xs[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt());
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let m = d[d.len() / 2];
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Box in log-parameter space and the default starting grid for a data set.
#[derive(Debug, Clone, Copy)]
struct SearchSpace {
    lower: [f64; 2],
    upper: [f64; 2],
    median_distance: f64,
    target_variance: f64,
}

impl SearchSpace {
    fn for_data(inputs: &DMatrix<f64>, targets: &DMatrix<f64>) -> Self {
        let median_distance = median_pairwise_distance(inputs);
        let n = targets.len() as f64;
        let mean = targets.sum() / n;
        let second = targets.norm_squared() / n;
        let mut target_variance = targets.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let scale = if second > 0.0 { second } else { 1.0 };
        if target_variance <= 1e-12 * scale {
            target_variance = scale;
        }
        SearchSpace {
            lower: [(median_distance * 1e-3).ln(), (1e-9 * scale).ln()],
            upper: [(median_distance * 1e3).ln(), (10.0 * scale).ln()],
            median_distance,
            target_variance,
        }
    }

    fn default_starts(&self) -> Vec<Hyperparameters> {
        let mut out = Vec::with_capacity(4);
        for s in [self.median_distance, 3.0 * self.median_distance] {
            for f in [1e-2, 1e-4] {
                out.push(Hyperparameters {
                    bandwidth: s,
                    noise_variance: f * self.target_variance,
                });
            }
        }
        out
    }

    fn clamp(&self, x: [f64; 2]) -> [f64; 2] {
        [
            x[0].clamp(self.lower[0], self.upper[0]),
            x[1].clamp(self.lower[1], self.upper[1]),
        ]
    }
}

/// Maximize the marginal likelihood of the Gaussian-kernel GP from several
/// starts and keep the best optimum.
///
/// `targets` holds one pixel per column; several columns share the
/// hyperparameters (their likelihoods add).
pub fn fit_hyperparameters(
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
    options: &FitOptions,
) -> Result<FitResult> {
    if inputs.nrows() <= inputs.ncols() {
        return Err(Error::Argument(format!(
            "need more bands ({}) than endmembers ({})",
            inputs.nrows(),
            inputs.ncols()
        )));
    }
    if targets.ncols() == 0 {
        return Err(Error::Argument("no targets to fit".into()));
    }
    let objective = MarginalLikelihood::gaussian(inputs, targets)?;
    let space = SearchSpace::for_data(inputs, targets);
    let starts = options.starts.clone().unwrap_or_else(|| space.default_starts());
    let mut best: Option<FitResult> = None;
    for start in starts {
        let x0 = space.clamp(start.to_log());
        if let Some(result) = minimize_box_bfgs(&objective, &space, x0, options) {
            if best.is_none_or(|b| result.nlml < b.nlml) {
                best = Some(result);
            }
        }
    }
    best.ok_or_else(|| {
        Error::Numerical("hyperparameter fit failed: Cholesky failed at every start".into())
    })
}

fn projected_gradient(x: [f64; 2], g: [f64; 2], space: &SearchSpace) -> [f64; 2] {
    let mut pg = g;
    for i in 0..2 {
        if (x[i] <= space.lower[i] && g[i] > 0.0) || (x[i] >= space.upper[i] && g[i] < 0.0) {
            pg[i] = 0.0;
        }
    }
    pg
}

fn inf_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Projected BFGS with Armijo backtracking in log-parameter space.
fn minimize_box_bfgs(
    objective: &MarginalLikelihood,
    space: &SearchSpace,
    x0: [f64; 2],
    options: &FitOptions,
) -> Option<FitResult> {
    let eval = |x: [f64; 2]| objective.value_and_gradient(Hyperparameters::from_log(x)).ok();
    let (mut f, mut g) = eval(x0)?;
    let mut x = x0;
    let mut h = [[1.0, 0.0], [0.0, 1.0]];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        let pg = projected_gradient(x, g, space);
        if inf_norm(pg) <= options.gradient_tolerance {
            converged = true;
            break;
        }
        iterations += 1;
        let mut d = [
            -(h[0][0] * g[0] + h[0][1] * g[1]),
            -(h[1][0] * g[0] + h[1][1] * g[1]),
        ];
        for i in 0..2 {
            if (x[i] <= space.lower[i] && d[i] < 0.0) || (x[i] >= space.upper[i] && d[i] > 0.0) {
                d[i] = 0.0;
            }
        }
        if d[0] * pg[0] + d[1] * pg[1] >= 0.0 {
            d = [-pg[0], -pg[1]];
            h = [[1.0, 0.0], [0.0, 1.0]];
        }
        // at most two e-folds per step
        let len = inf_norm(d);
        if len > 2.0 {
            d = [d[0] * 2.0 / len, d[1] * 2.0 / len];
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let xn = space.clamp([x[0] + t * d[0], x[1] + t * d[1]]);
            let step = [xn[0] - x[0], xn[1] - x[1]];
            let decrease = g[0] * step[0] + g[1] * step[1];
            if let Some((fnew, gnew)) = eval(xn) {
                if fnew <= f + 1e-4 * decrease && fnew.is_finite() {
                    accepted = Some((xn, fnew, gnew));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            break;
        };
        let s = [xn[0] - x[0], xn[1] - x[1]];
        let y = [gnew[0] - g[0], gnew[1] - g[1]];
        let sy = s[0] * y[0] + s[1] * y[1];
        if sy > 1e-12 {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let hy = [h[0][0] * y[0] + h[0][1] * y[1], h[1][0] * y[0] + h[1][1] * y[1]];
            let yhy = y[0] * hy[0] + y[1] * hy[1];
            for i in 0..2 {
                for j in 0..2 {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let stalled = (f - fnew).abs() <= 1e-15 * f.abs().max(1.0) && inf_norm(s) < 1e-14;
        x = xn;
        f = fnew;
        g = gnew;
        if stalled {
            break;
        }
    }
    if !converged {
        converged = inf_norm(projected_gradient(x, g, space)) <= options.gradient_tolerance;
    }
    Some(FitResult {
        params: Hyperparameters::from_log(x),
        nlml: f,
        iterations,
        converged,
    })
}

/// Whether hyperparameters are fitted once per image or once per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HyperparameterMode {
    Shared,
    PerPixel,
}

impl std::str::FromStr for HyperparameterMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared" => Ok(HyperparameterMode::Shared),
            "per-pixel" | "per_pixel" => Ok(HyperparameterMode::PerPixel),
            other => Err(Error::Argument(format!("unknown gp mode `{other}`"))),
        }
    }
}

/// How the detector obtains GP hyperparameters for an image.
#[derive(Debug, Clone, PartialEq)]
pub struct GpSettings {
    pub mode: HyperparameterMode,
    /// Pixels whose joint likelihood drives the shared fit.
    pub subsample: usize,
    pub seed: u64,
    pub fit: FitOptions,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            mode: HyperparameterMode::Shared,
            subsample: 256,
            seed: 0,
            fit: FitOptions::default(),
        }
    }
}

/// Seeded subsample of pixel columns, in increasing index order.
pub fn subsample_indices(n: usize, count: usize, seed: u64) -> Vec<usize> {
    if count >= n {
        return (0..n).collect();
    }
    let mut rng = Seed(seed).derive("gp-subsample").rng();
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..count {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut out = idx[..count].to_vec();
    out.sort_unstable();
    out
}

/// One hyperparameter set for a whole image, from the joint likelihood of a
/// seeded pixel subsample.
pub fn fit_shared(settings: &GpSettings, inputs: &DMatrix<f64>, pixels: &DMatrix<f64>) -> Result<FitResult> {
    if pixels.ncols() == 0 {
        return Err(Error::Argument("image has no pixels".into()));
    }
    let idx = subsample_indices(pixels.ncols(), settings.subsample.max(1), settings.seed);
    let cols: Vec<_> = idx.iter().map(|&i| pixels.column(i)).collect();
    fit_hyperparameters(inputs, &DMatrix::from_columns(&cols), &settings.fit)
}
