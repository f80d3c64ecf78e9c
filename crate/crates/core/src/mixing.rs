//! Linear and nonlinear pixel generators with energy-preserving control of
//! the degree of nonlinearity, and seeded synthetic scene generation.
//!
//! A nonlinear pixel is `k * M a + gamma * nu`, where `nu` is the bilinear
//! (GBM) or post-nonlinear (PNMM) term. For a requested degree of
//! nonlinearity `eta`, `k = sqrt(1 - eta)` and `gamma` is the positive root
//! that keeps `||r||^2 = ||M a||^2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, Uniform};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::Seed;
use crate::scene::{AbundanceVector, EndmemberMatrix, GroundTruth, MixLabel, SceneImage, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixingFamily {
    Lmm,
    Gbm,
    Pnmm,
}

impl std::str::FromStr for MixingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lmm" | "linear" => Ok(MixingFamily::Lmm),
            "gbm" => Ok(MixingFamily::Gbm),
            "pnmm" => Ok(MixingFamily::Pnmm),
            other => Err(Error::Argument(format!("unknown mixing family `{other}`"))),
        }
    }
}

/// Mixing family with its degree of nonlinearity and PNMM exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    pub family: MixingFamily,
    pub eta_d: f64,
    pub xi: f64,
}

impl MixtureSpec {
    pub fn new(family: MixingFamily, eta_d: f64, xi: f64) -> Result<Self> {
        check_eta(eta_d)?;
        if !xi.is_finite() || xi <= 0.0 {
            return Err(Error::Argument(format!("PNMM exponent must be positive, got {xi}")));
        }
        Ok(MixtureSpec { family, eta_d, xi })
    }

    pub fn gbm(eta_d: f64) -> Result<Self> {
        Self::new(MixingFamily::Gbm, eta_d, 3.0)
    }

    pub fn pnmm(eta_d: f64, xi: f64) -> Result<Self> {
        Self::new(MixingFamily::Pnmm, eta_d, xi)
    }

    /// Linear scaling factor `k = sqrt(1 - eta_d)`.
    pub fn k(&self) -> f64 {
        (1.0 - self.eta_d).sqrt()
    }
}

/// White Gaussian noise of variance `variance` per band.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub variance: f64,
    pub seed: u64,
}

impl NoiseModel {
    pub fn new(variance: f64, seed: u64) -> Result<Self> {
        if !variance.is_finite() || variance < 0.0 {
            return Err(Error::Argument(format!("noise variance must be >= 0, got {variance}")));
        }
        Ok(NoiseModel { variance, seed })
    }
}

fn check_eta(eta_d: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eta_d) {
        return Err(Error::Argument(format!("degree of nonlinearity {eta_d} outside [0, 1)")));
    }
    Ok(())
}

fn check_dims(m: &EndmemberMatrix, alpha: &AbundanceVector) -> Result<()> {
    if alpha.len() != m.endmember_count() {
        return Err(Error::Dimension(format!(
            "{} abundances for {} endmembers",
            alpha.len(),
            m.endmember_count()
        )));
    }
    Ok(())
}

/// Draw abundances uniformly on the `(R-1)`-simplex (flat Dirichlet).
pub fn sample_abundance_uniform<G: Rng + ?Sized>(r: usize, rng: &mut G) -> Result<AbundanceVector> {
    if r < 2 {
        return Err(Error::Argument(format!("need at least 2 endmembers, got {r}")));
    }
    let unit = Uniform::new(0.0f64, 1.0).expect("valid range");
    // normalized i.i.d. Exp(1) variates
    let e: Vec<f64> = (0..r).map(|_| -(1.0 - unit.sample(rng)).ln()).collect();
    AbundanceVector::normalized(&e)
}

/// Uniform draw restricted to `max(a) <= cap` by rejection.
pub fn sample_abundance_capped<G: Rng + ?Sized>(r: usize, cap: f64, rng: &mut G) -> Result<AbundanceVector> {
    if cap * r as f64 <= 1.0 || cap > 1.0 {
        return Err(Error::Argument(format!("abundance cap {cap} infeasible for {r} endmembers")));
    }
    loop {
        let a = sample_abundance_uniform(r, rng)?;
        if a.weights().max() <= cap {
            return Ok(a);
        }
    }
}

/// Noiseless linear mixture `M a`.
pub fn lmm_pixel(m: &EndmemberMatrix, alpha: &AbundanceVector) -> Result<Spectrum> {
    check_dims(m, alpha)?;
    Spectrum::new(m.matrix() * alpha.weights())
}

/// Bilinear term `sum_{i<j} a_i a_j (m_i .* m_j)`.
pub fn gbm_nonlinear_term(m: &EndmemberMatrix, alpha: &AbundanceVector) -> Result<Spectrum> {
    check_dims(m, alpha)?;
    let mm = m.matrix();
    let a = alpha.weights();
    let mut nu = DVector::zeros(mm.nrows());
    for i in 0..mm.ncols() {
        for j in i + 1..mm.ncols() {
            let w = a[i] * a[j];
            if w != 0.0 {
                nu += mm.column(i).component_mul(&mm.column(j)) * w;
            }
        }
    }
    Spectrum::new(nu)
}

/// Post-nonlinear term `(M a)^xi`, entrywise.
pub fn pnmm_nonlinear_term(m: &EndmemberMatrix, alpha: &AbundanceVector, xi: f64) -> Result<Spectrum> {
    let lin = lmm_pixel(m, alpha)?;
    let integral = xi.fract() == 0.0;
    if !integral && lin.iter().any(|v| *v < 0.0) {
        return Err(Error::Argument(
            "negative linear mixture raised to a fractional power".into(),
        ));
    }
    let nu = if integral && xi.abs() <= i32::MAX as f64 {
        lin.map(|v| v.powi(xi as i32))
    } else {
        lin.map(|v| v.powf(xi))
    };
    Spectrum::new(nu)
}

/// Scaling factors `(k, gamma)` giving degree of nonlinearity `eta_d` at constant energy.
pub fn solve_scaling(eta_d: f64, linear: &DVector<f64>, nu: &DVector<f64>) -> Result<(f64, f64)> {
    check_eta(eta_d)?;
    if linear.len() != nu.len() {
        return Err(Error::Dimension("linear and nonlinear terms differ in length".into()));
    }
    if eta_d == 0.0 {
        return Ok((1.0, 0.0));
    }
    let k = (1.0 - eta_d).sqrt();
    let a = nu.norm_squared();
    if a == 0.0 {
        return Err(Error::Degenerate(
            "nonlinear term vanishes; requested degree of nonlinearity unreachable".into(),
        ));
    }
    // gamma^2 a + 2 b gamma - c = 0
    let b = k * nu.dot(linear);
    let c = (1.0 - k * k) * linear.norm_squared();
    let disc = (b * b + a * c).sqrt();
    let gamma = if b >= 0.0 { c / (b + disc) } else { (disc - b) / a };
    Ok((k, gamma))
}

/// Fraction of a pixel's energy due to its nonlinear component.
pub fn degree_of_nonlinearity(r_lin: &DVector<f64>, r_nlin: &DVector<f64>) -> Result<f64> {
    if r_lin.len() != r_nlin.len() {
        return Err(Error::Dimension("components differ in length".into()));
    }
    let total = (r_lin + r_nlin).norm_squared();
    if total == 0.0 {
        return Err(Error::Degenerate("pixel has zero energy".into()));
    }
    Ok((2.0 * r_lin.dot(r_nlin) + r_nlin.norm_squared()) / total)
}

/// A noiseless mixed pixel with its decomposition.
#[derive(Debug, Clone)]
pub struct MixedPixel {
    pub linear: DVector<f64>,
    pub nonlinear: DVector<f64>,
    pub k: f64,
    pub gamma: f64,
}

impl MixedPixel {
    pub fn pixel(&self) -> DVector<f64> {
        &self.linear * self.k + &self.nonlinear * self.gamma
    }
}

/// Mix `alpha` under `spec` without noise.
pub fn mix(m: &EndmemberMatrix, alpha: &AbundanceVector, spec: &MixtureSpec) -> Result<MixedPixel> {
    let linear = lmm_pixel(m, alpha)?.into_inner();
    let nonlinear = match spec.family {
        MixingFamily::Lmm => DVector::zeros(linear.len()),
        MixingFamily::Gbm => gbm_nonlinear_term(m, alpha)?.into_inner(),
        MixingFamily::Pnmm => pnmm_nonlinear_term(m, alpha, spec.xi)?.into_inner(),
    };
    let (k, gamma) = match spec.family {
        MixingFamily::Lmm => (1.0, 0.0),
        _ => solve_scaling(spec.eta_d, &linear, &nonlinear)?,
    };
    Ok(MixedPixel {
        linear,
        nonlinear,
        k,
        gamma,
    })
}

/// How abundances are drawn for generated pixels.
#[derive(Debug, Clone, PartialEq)]
pub enum AbundanceMode {
    Uniform,
    /// Uniform on the simplex with every weight at most the cap.
    Capped(f64),
    Fixed(AbundanceVector),
}

/// Fractions of pixels produced by each family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FamilyMix {
    pub lmm: f64,
    pub gbm: f64,
    pub pnmm: f64,
}

impl FamilyMix {
    pub fn linear_nonlinear(nonlinear_fraction: f64, family: MixingFamily) -> Self {
        let mut mix = FamilyMix {
            lmm: 1.0 - nonlinear_fraction,
            gbm: 0.0,
            pnmm: 0.0,
        };
        match family {
            MixingFamily::Gbm => mix.gbm = nonlinear_fraction,
            MixingFamily::Pnmm => mix.pnmm = nonlinear_fraction,
            MixingFamily::Lmm => mix.lmm = 1.0,
        }
        mix
    }
}

/// Everything needed to reproduce a synthetic scene.
#[derive(Debug, Clone)]
pub struct SceneConfig {
    pub pixels: usize,
    pub endmembers: EndmemberMatrix,
    pub mix: FamilyMix,
    pub eta_d: f64,
    pub xi: f64,
    pub noise_variance: f64,
    pub abundance: AbundanceMode,
    pub seed: u64,
}

impl SceneConfig {
    fn validate(&self) -> Result<()> {
        if self.pixels == 0 {
            return Err(Error::Argument("scene needs at least one pixel".into()));
        }
        let FamilyMix { lmm, gbm, pnmm } = self.mix;
        if [lmm, gbm, pnmm].iter().any(|p| !(0.0..=1.0).contains(p)) || (lmm + gbm + pnmm - 1.0).abs() > 1e-9 {
            return Err(Error::Argument("family proportions must be in [0, 1] and sum to 1".into()));
        }
        check_eta(self.eta_d)?;
        NoiseModel::new(self.noise_variance, self.seed)?;
        if let AbundanceMode::Fixed(a) = &self.abundance {
            if a.len() != self.endmembers.endmember_count() || !a.is_constrained() {
                return Err(Error::Argument("fixed abundance vector must match R and lie on the simplex".into()));
            }
        }
        Ok(())
    }

    /// Per-pixel family assignment: exact counts, shuffled with the scene seed.
    fn families(&self) -> Vec<MixingFamily> {
        let n = self.pixels;
        let n_gbm = (self.mix.gbm * n as f64).round() as usize;
        let n_pnmm = ((self.mix.pnmm * n as f64).round() as usize).min(n - n_gbm);
        let mut fam = vec![MixingFamily::Lmm; n - n_gbm - n_pnmm];
        fam.extend(std::iter::repeat_n(MixingFamily::Gbm, n_gbm));
        fam.extend(std::iter::repeat_n(MixingFamily::Pnmm, n_pnmm));
        let mut rng = Seed(self.seed).derive("families").rng();
        // Fisher-Yates
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            fam.swap(i, j);
        }
        fam
    }
}

/// Generate a scene with ground truth. Identical for a given config at any thread count.
pub fn generate_scene(config: &SceneConfig) -> Result<SceneImage> {
    config.validate()?;
    let m = &config.endmembers;
    let r = m.endmember_count();
    let families = config.families();
    let pixel_seed = Seed(config.seed).derive("pixel");
    let noise = if config.noise_variance > 0.0 {
        Some(Normal::new(0.0, config.noise_variance.sqrt()).map_err(|e| Error::Argument(e.to_string()))?)
    } else {
        None
    };

    let columns: Vec<(DVector<f64>, DVector<f64>, f64)> = families
        .par_iter()
        .enumerate()
        .map(|(n, family)| {
            let mut rng = pixel_seed.stream(n as u64);
            let alpha = match &config.abundance {
                AbundanceMode::Uniform => sample_abundance_uniform(r, &mut rng)?,
                AbundanceMode::Capped(cap) => sample_abundance_capped(r, *cap, &mut rng)?,
                AbundanceMode::Fixed(a) => a.clone(),
            };
            let spec = MixtureSpec::new(*family, config.eta_d, config.xi)?;
            let mixed = mix(m, &alpha, &spec)?;
            let mut px = mixed.pixel();
            if let Some(dist) = &noise {
                for v in px.iter_mut() {
                    *v += dist.sample(&mut rng);
                }
            }
            let eta = if *family == MixingFamily::Lmm { 0.0 } else { config.eta_d };
            Ok((px, alpha.weights().clone(), eta))
        })
        .collect::<Result<_>>()?;

    let l = m.band_count();
    let n = config.pixels;
    let mut pixels = DMatrix::zeros(l, n);
    let mut abundances = DMatrix::zeros(r, n);
    let mut eta = Vec::with_capacity(n);
    for (i, (px, a, e)) in columns.into_iter().enumerate() {
        pixels.set_column(i, &px);
        abundances.set_column(i, &a);
        eta.push(e);
    }
    let labels = families
        .iter()
        .map(|f| if *f == MixingFamily::Lmm { MixLabel::Linear } else { MixLabel::Nonlinear })
        .collect();
    SceneImage::new(pixels)?.with_ground_truth(GroundTruth {
        labels,
        abundances,
        endmembers: m.clone(),
        eta,
    })
}

/// `10 log10(mean ||r||^2 / (L sigma^2))` over noiseless pixels; infinite without noise.
pub fn empirical_snr_db(noiseless: &DMatrix<f64>, noise_variance: f64) -> f64 {
    let l = noiseless.nrows() as f64;
    let mean_energy = noiseless.column_iter().map(|c| c.norm_squared()).sum::<f64>() / noiseless.ncols() as f64;
    10.0 * (mean_energy / (l * noise_variance)).log10()
}

/// Seed of the bundled endmember library.
pub const LIBRARY_SEED: u64 = 0x5EED_2016;

/// Smooth synthetic reflectance spectra sampled at `bands` wavelengths over
/// 0.4-2.5 um: a sloped baseline plus 3-5 Gaussian absorption/reflection bumps.
pub fn synthetic_library(bands: usize, count: usize, seed: u64) -> Result<EndmemberMatrix> {
    if bands < 2 {
        return Err(Error::Argument("library needs at least 2 bands".into()));
    }
    let wavelengths: Vec<f64> = (0..bands)
        .map(|i| 0.4 + 2.1 * i as f64 / (bands - 1) as f64)
        .collect();
    let mut rng = Seed(seed).derive("library").rng();
    let mut cols = Vec::with_capacity(count);
    for _ in 0..count {
        let base = rng.random_range(0.05..0.35);
        let slope = rng.random_range(-0.1..0.1);
        let bumps = rng.random_range(3..=5);
        let params: Vec<(f64, f64, f64)> = (0..bumps)
            .map(|_| {
                (
                    rng.random_range(-0.2..0.5),
                    rng.random_range(0.4..2.5),
                    rng.random_range(0.08..0.4),
                )
            })
            .collect();
        let col = DVector::from_iterator(
            bands,
            wavelengths.iter().map(|&w| {
                let mut v = base + slope * (w - 1.45);
                for &(amp, centre, width) in &params {
                    v += amp * (-(w - centre).powi(2) / (2.0 * width * width)).exp();
                }
                v.clamp(0.01, 1.2)
            }),
        );
        cols.push(col);
    }
    EndmemberMatrix::new(DMatrix::from_columns(&cols))
}

/// Noise variance giving `snr_db` for the expected pixel energy under the
/// abundance mode (energy is conserved by every mixing family).
pub fn noise_variance_for_snr(m: &EndmemberMatrix, abundance: &AbundanceMode, snr_db: f64) -> Result<f64> {
    let g = m.matrix().transpose() * m.matrix();
    let r = m.endmember_count();
    let energy = match abundance {
        AbundanceMode::Fixed(a) => (a.weights().transpose() * &g * a.weights())[(0, 0)],
        // E[a_i a_j] = (1 + delta_ij) / (R (R + 1)) for the flat Dirichlet
        AbundanceMode::Uniform => (g.sum() + g.trace()) / (r * (r + 1)) as f64,
        AbundanceMode::Capped(_) => {
            return Err(Error::Argument("SNR-based noise needs uniform or fixed abundances".into()))
        }
    };
    Ok(energy / (m.band_count() as f64 * 10f64.powf(snr_db / 10.0)))
}

/// Names of the bundled material archetypes, in library column order.
pub const MATERIALS: [&str; 6] = [
    "green grass",
    "olive green paint",
    "galvanized steel",
    "dry soil",
    "concrete",
    "clear water",
];

fn gauss(w: f64, centre: f64, width: f64) -> f64 {
    (-(w - centre).powi(2) / (2.0 * width * width)).exp()
}

fn sigmoid(w: f64, centre: f64, width: f64) -> f64 {
    1.0 / (1.0 + (-(w - centre) / width).exp())
}

/// Multiplicative absorption band of fractional `depth`.
fn band(w: f64, centre: f64, width: f64, depth: f64) -> f64 {
    1.0 - depth * gauss(w, centre, width)
}

fn material_reflectance(index: usize, w: f64) -> f64 {
    match index {
        0 => {
            let visible = 0.03 + 0.06 * gauss(w, 0.55, 0.03) - 0.012 * gauss(w, 0.67, 0.02);
            // leaf plateau stepping down where liquid water absorbs
            let plateau = 0.5 - 0.1 * (w - 0.9).max(0.0) - 0.14 * sigmoid(w, 1.38, 0.03) - 0.13 * sigmoid(w, 1.88, 0.03);
            let water = band(w, 0.97, 0.03, 0.07)
                * band(w, 1.19, 0.04, 0.14)
                * band(w, 1.45, 0.06, 0.75)
                * band(w, 1.94, 0.07, 0.85)
                * (1.0 - 0.6 * sigmoid(w, 2.42, 0.05));
            visible + plateau.max(0.0) * sigmoid(w, 0.715, 0.014) * water
        }
        1 => {
            let visible = 0.05 + 0.045 * gauss(w, 0.55, 0.04) - 0.02 * gauss(w, 0.64, 0.03);
            let ir = 0.34 * sigmoid(w, 0.75, 0.03) + 0.04 * (w - 1.0).max(0.0);
            (visible + ir)
                * band(w, 1.21, 0.02, 0.08)
                * band(w, 1.42, 0.03, 0.1)
                * band(w, 1.73, 0.025, 0.25)
                * band(w, 1.93, 0.04, 0.12)
                * band(w, 2.31, 0.025, 0.35)
                * band(w, 2.36, 0.02, 0.25)
        }
        2 => 0.3 + 0.1 * (1.0 - (-(w - 0.4) / 0.6).exp()) - 0.025 * gauss(w, 0.9, 0.15),
        3 => {
            let rise = 0.08 + 0.32 * sigmoid(w, 0.75, 0.25);
            rise * band(w, 1.41, 0.04, 0.15) * band(w, 1.91, 0.05, 0.25) * band(w, 2.2, 0.03, 0.2)
        }
        4 => (0.22 + 0.08 * sigmoid(w, 0.6, 0.1) + 0.03 * (w - 0.4)) * band(w, 2.33, 0.04, 0.15),
        _ => 0.01 + 0.07 * (-(w - 0.4) / 0.15).exp(),
    }
}

/// Reflectance spectra of material archetypes sampled at `bands` wavelengths
/// uniformly spread over 0.4-2.5 um. Columns follow [`MATERIALS`].
pub fn material_library(bands: usize, count: usize) -> Result<EndmemberMatrix> {
    if bands < 2 {
        return Err(Error::Argument("library needs at least 2 bands".into()));
    }
    if count == 0 || count > MATERIALS.len() {
        return Err(Error::Argument(format!(
            "library holds {} materials, {count} requested",
            MATERIALS.len()
        )));
    }
    let m = DMatrix::from_fn(bands, count, |i, j| {
        let w = 0.4 + 2.1 * i as f64 / (bands - 1) as f64;
        material_reflectance(j, w).max(0.005)
    });
    EndmemberMatrix::new(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    fn small_m() -> EndmemberMatrix {
        EndmemberMatrix::new(DMatrix::from_row_slice(
            4,
            3,
            &[0.2, 0.5, 0.9, 0.4, 0.1, 0.3, 0.7, 0.6, 0.2, 0.3, 0.8, 0.5],
        ))
        .unwrap()
    }

    #[test]
    fn unit_abundance_selects_column() {
        let m = small_m();
        let e1 = AbundanceVector::simplex(DVector::from_vec(vec![1.0, 0.0, 0.0])).unwrap();
        assert_eq!(*lmm_pixel(&m, &e1).unwrap(), m.matrix().column(0).into_owned());
        assert!(gbm_nonlinear_term(&m, &e1).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn uniform_abundance_gives_column_mean() {
        let m = small_m();
        let a = AbundanceVector::normalized(&[1.0, 1.0, 1.0]).unwrap();
        let p = lmm_pixel(&m, &a).unwrap();
        for l in 0..4 {
            assert!((p[l] - m.matrix().row(l).mean()).abs() < 1e-15);
        }
    }

    #[test]
    fn two_endmember_bilinear_term() {
        let m = EndmemberMatrix::new(DMatrix::from_row_slice(3, 2, &[0.2, 0.4, 0.6, 0.5, 0.9, 0.1])).unwrap();
        let a = AbundanceVector::simplex(DVector::from_vec(vec![0.5, 0.5])).unwrap();
        let nu = gbm_nonlinear_term(&m, &a).unwrap();
        for l in 0..3 {
            assert!((nu[l] - 0.25 * m.matrix()[(l, 0)] * m.matrix()[(l, 1)]).abs() < 1e-16);
        }
    }

    #[test]
    fn pnmm_special_cases() {
        let m = small_m();
        let a = AbundanceVector::normalized(&[0.2, 0.3, 0.5]).unwrap();
        assert_eq!(pnmm_nonlinear_term(&m, &a, 1.0).unwrap(), lmm_pixel(&m, &a).unwrap());
        // all-ones mixture from two distinct columns
        let m2 = EndmemberMatrix::new(DMatrix::from_row_slice(3, 2, &[0.5, 1.5, 1.5, 0.5, 1.0, 1.0])).unwrap();
        let half = AbundanceVector::normalized(&[1.0, 1.0]).unwrap();
        for xi in [0.5, 2.0, 3.7] {
            let nu = pnmm_nonlinear_term(&m2, &half, xi).unwrap();
            assert!(nu.iter().all(|v| (v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn fractional_power_of_negative_mixture_fails() {
        // negative entries can only come from an estimated matrix
        let m = EndmemberMatrix::new(DMatrix::from_row_slice(3, 2, &[-0.5, 0.1, 0.2, 0.4, 0.3, 0.9])).unwrap();
        let a = AbundanceVector::normalized(&[1.0, 0.0]).unwrap();
        assert!(matches!(pnmm_nonlinear_term(&m, &a, 2.5), Err(Error::Argument(_))));
        assert!(pnmm_nonlinear_term(&m, &a, 3.0).is_ok());
    }

    #[test]
    fn scaling_closed_forms() {
        let lin = DVector::from_vec(vec![0.3, 0.5, 0.2]);
        let nu = DVector::from_vec(vec![0.1, 0.05, 0.2]);
        assert_eq!(solve_scaling(0.0, &lin, &nu).unwrap(), (1.0, 0.0));
        let (k, _) = solve_scaling(0.5, &lin, &nu).unwrap();
        assert_eq!(k, 0.7071067811865476);
        assert!(matches!(solve_scaling(1.0, &lin, &nu), Err(Error::Argument(_))));
        assert!(matches!(solve_scaling(-0.1, &lin, &nu), Err(Error::Argument(_))));
        assert!(matches!(
            solve_scaling(0.3, &lin, &DVector::zeros(3)),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn degree_of_nonlinearity_limits() {
        let v = DVector::from_vec(vec![0.3, 0.5]);
        let z = DVector::zeros(2);
        assert_eq!(degree_of_nonlinearity(&v, &z).unwrap(), 0.0);
        assert_eq!(degree_of_nonlinearity(&z, &v).unwrap(), 1.0);
        assert!(degree_of_nonlinearity(&z, &z).is_err());
    }

    #[test]
    fn abundance_sampling_rejects_single_endmember() {
        let mut rng = Seed(1).rng();
        assert!(sample_abundance_uniform(1, &mut rng).is_err());
        let a = sample_abundance_uniform(5, &mut rng).unwrap();
        assert!((a.weights().sum() - 1.0).abs() <= 1e-12);
        assert!(sample_abundance_capped(3, 0.3, &mut rng).is_err());
        let c = sample_abundance_capped(3, 0.8, &mut rng).unwrap();
        assert!(c.weights().max() <= 0.8);
    }

    #[test]
    fn library_is_smooth_and_valid() {
        let m = synthetic_library(100, 3, LIBRARY_SEED).unwrap();
        assert_eq!(m.matrix().shape(), (100, 3));
        assert!(m.matrix().iter().all(|v| (0.0..=1.5).contains(v)));
        let svd = m.matrix().clone().svd(false, false);
        let s = svd.singular_values;
        assert!(s.min() / s.max() > 1e-3, "library columns nearly collinear: {s}");
    }

    #[test]
    fn scene_config_validation() {
        let base = SceneConfig {
            pixels: 10,
            endmembers: small_m(),
            mix: FamilyMix::linear_nonlinear(0.5, MixingFamily::Gbm),
            eta_d: 0.5,
            xi: 3.0,
            noise_variance: 0.0,
            abundance: AbundanceMode::Uniform,
            seed: 3,
        };
        assert!(generate_scene(&base).is_ok());
        assert!(generate_scene(&SceneConfig { pixels: 0, ..base.clone() }).is_err());
        assert!(generate_scene(&SceneConfig {
            mix: FamilyMix { lmm: 0.5, gbm: 0.6, pnmm: 0.0 },
            ..base.clone()
        })
        .is_err());
        assert!(generate_scene(&SceneConfig { noise_variance: -1.0, ..base }).is_err());
    }
}
