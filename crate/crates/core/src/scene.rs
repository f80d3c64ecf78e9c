//! Spectra, endmember matrices, abundance vectors and images.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Reflectances of one pixel over `L` bands.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum(DVector<f64>);

impl Spectrum {
    pub fn new(values: DVector<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("spectrum must have at least one band".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("spectrum contains non-finite values".into()));
        }
        Ok(Spectrum(values))
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self> {
        Self::new(DVector::from_vec(values))
    }

    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }
}

impl Deref for Spectrum {
    type Target = DVector<f64>;

    fn deref(&self) -> &DVector<f64> {
        &self.0
    }
}

/// `L x R` matrix whose columns are endmember spectra.
///
/// Requires `R >= 2`, `L > R`, finite entries and pairwise distinct columns.
/// Estimated matrices may carry small negative entries, so nonnegativity is
/// checked by the file loader rather than here.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatrix(DMatrix<f64>);

impl EndmemberMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        let (bands, count) = entries.shape();
        if count < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 endmembers, got {count}"
            )));
        }
        if bands <= count {
            return Err(Error::Validation(format!(
                "band count {bands} must exceed endmember count {count}"
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("endmember matrix has non-finite entries".into()));
        }
        for i in 0..count {
            for j in i + 1..count {
                let diff = (entries.column(i) - entries.column(j)).amax();
                let scale = entries.column(i).amax().max(entries.column(j).amax()).max(1.0);
                if diff <= 1e-14 * scale {
                    return Err(Error::Validation(format!(
                        "endmember columns {i} and {j} are identical"
                    )));
                }
            }
        }
        Ok(EndmemberMatrix(entries))
    }

    pub fn band_count(&self) -> usize {
        self.0.nrows()
    }

    pub fn endmember_count(&self) -> usize {
        self.0.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    /// Copy with columns reordered as `order[k]` -> new column `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.endmember_count() {
            return Err(Error::Dimension("permutation length".into()));
        }
        let cols: Vec<_> = order.iter().map(|&k| self.0.column(k).into_owned()).collect();
        Self::new(DMatrix::from_columns(&cols))
    }
}

/// Mixing proportions of `R` endmembers.
#[derive(Debug, Clone, PartialEq)]
pub struct AbundanceVector {
    weights: DVector<f64>,
    constrained: bool,
}

impl AbundanceVector {
    /// Abundances on the probability simplex (nonnegative, summing to one within 1e-12).
    pub fn simplex(weights: DVector<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Validation("abundances must be finite and nonnegative".into()));
        }
        let sum = weights.sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("abundances sum to {sum}, not 1")));
        }
        Ok(AbundanceVector {
            weights,
            constrained: true,
        })
    }

    /// Unconstrained least-squares coefficients; only finiteness is required.
    pub fn unconstrained(weights: DVector<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Validation("abundances must be finite".into()));
        }
        Ok(AbundanceVector {
            weights,
            constrained: false,
        })
    }

    /// Rescale nonnegative weights to sum to one.
    pub fn normalized(weights: &[f64]) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
            return Err(Error::Validation("cannot normalize abundance weights".into()));
        }
        let mut v = DVector::from_iterator(weights.len(), weights.iter().map(|w| w / sum));
        // absorb the last rounding error so the sum is 1 within a few ulps
        let drift = v.sum() - 1.0;
        let imax = v.imax();
        v[imax] -= drift;
        Self::simplex(v)
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// How a pixel was actually mixed (ground truth).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MixLabel {
    Linear,
    Nonlinear,
}

impl MixLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            MixLabel::Linear => "linear",
            MixLabel::Nonlinear => "nonlinear",
        }
    }
}

impl fmt::Display for MixLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MixLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear" => Ok(MixLabel::Linear),
            "nonlinear" => Ok(MixLabel::Nonlinear),
            other => Err(Error::Argument(format!("unknown mixing label `{other}`"))),
        }
    }
}

/// Known generative parameters of a synthetic scene.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub labels: Vec<MixLabel>,
    /// `R x N`, one column per pixel.
    pub abundances: DMatrix<f64>,
    pub endmembers: EndmemberMatrix,
    pub eta: Vec<f64>,
}

/// `N` pixels of `L` bands, stored band-major (`L x N`, one column per pixel).
#[derive(Debug, Clone, PartialEq)]
pub struct SceneImage {
    pixels: DMatrix<f64>,
    width: usize,
    height: usize,
    pub ground_truth: Option<GroundTruth>,
}

impl SceneImage {
    /// Image from an `L x N` matrix laid out as a single row of `N` pixels.
    pub fn new(pixels: DMatrix<f64>) -> Result<Self> {
        let n = pixels.ncols();
        Self::with_layout(pixels, n, 1)
    }

    pub fn with_layout(pixels: DMatrix<f64>, width: usize, height: usize) -> Result<Self> {
        if pixels.nrows() == 0 {
            return Err(Error::Validation("image needs at least one band".into()));
        }
        if width * height != pixels.ncols() {
            return Err(Error::Argument(format!(
                "layout {width}x{height} does not hold {} pixels",
                pixels.ncols()
            )));
        }
        if pixels.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("image contains non-finite values".into()));
        }
        Ok(SceneImage {
            pixels,
            width,
            height,
            ground_truth: None,
        })
    }

    pub fn with_ground_truth(mut self, truth: GroundTruth) -> Result<Self> {
        let n = self.pixel_count();
        if truth.labels.len() != n || truth.abundances.ncols() != n || truth.eta.len() != n {
            return Err(Error::Dimension(format!(
                "ground truth arrays must have length {n}"
            )));
        }
        if truth.endmembers.band_count() != self.band_count()
            || truth.abundances.nrows() != truth.endmembers.endmember_count()
        {
            return Err(Error::Dimension("ground truth endmember shape".into()));
        }
        self.ground_truth = Some(truth);
        Ok(self)
    }

    pub fn pixel_count(&self) -> usize {
        self.pixels.ncols()
    }

    pub fn band_count(&self) -> usize {
        self.pixels.nrows()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &DMatrix<f64> {
        &self.pixels
    }

    pub fn pixel(&self, n: usize) -> DVector<f64> {
        self.pixels.column(n).into_owned()
    }

    /// Subset of pixels (in the given order) as a new single-row image, ground truth included.
    pub fn select(&self, indices: &[usize]) -> SceneImage {
        let cols: Vec<_> = indices.iter().map(|&i| self.pixels.column(i)).collect();
        let pixels = if cols.is_empty() {
            DMatrix::zeros(self.band_count(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        let ground_truth = self.ground_truth.as_ref().map(|gt| GroundTruth {
            labels: indices.iter().map(|&i| gt.labels[i]).collect(),
            abundances: if indices.is_empty() {
                DMatrix::zeros(gt.abundances.nrows(), 0)
            } else {
                DMatrix::from_columns(
                    &indices.iter().map(|&i| gt.abundances.column(i)).collect::<Vec<_>>(),
                )
            },
            endmembers: gt.endmembers.clone(),
            eta: indices.iter().map(|&i| gt.eta[i]).collect(),
        });
        SceneImage {
            width: indices.len(),
            height: 1,
            pixels,
            ground_truth,
        }
    }
}

/// Per-pixel detector decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectionLabel {
    Linear,
    Nonlinear,
    /// No decision possible (both residuals vanished).
    Unclassified,
}

impl DetectionLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectionLabel::Linear => "linear",
            DetectionLabel::Nonlinear => "nonlinear",
            DetectionLabel::Unclassified => "unclassified",
        }
    }

    pub fn pgm_level(self) -> u8 {
        match self {
            DetectionLabel::Linear => 255,
            DetectionLabel::Nonlinear => 0,
            DetectionLabel::Unclassified => 128,
        }
    }
}

impl fmt::Display for DetectionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Labels and test statistics for every pixel of an image.
///
/// Statistics of classified pixels lie in `[0, 2]`; unclassified pixels carry NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionMap {
    pub labels: Vec<DetectionLabel>,
    pub statistics: Vec<f64>,
}

impl DetectionMap {
    pub fn new(labels: Vec<DetectionLabel>, statistics: Vec<f64>) -> Result<Self> {
        if labels.len() != statistics.len() {
            return Err(Error::Dimension("labels and statistics differ in length".into()));
        }
        for (l, t) in labels.iter().zip(&statistics) {
            let ok = match l {
                DetectionLabel::Unclassified => true,
                _ => (0.0..=2.0).contains(t),
            };
            if !ok {
                return Err(Error::Validation(format!("statistic {t} outside [0, 2]")));
            }
        }
        Ok(DetectionMap { labels, statistics })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn nonlinear_count(&self) -> usize {
        self.labels
            .iter()
            .filter(|l| **l == DetectionLabel::Nonlinear)
            .count()
    }
}

/// Angle in radians between two spectra.
pub fn spectral_angle(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let cos = a.dot(b) / (a.norm() * b.norm());
    cos.clamp(-1.0, 1.0).acos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn endmember_invariants() {
        assert!(EndmemberMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.5, 0.5])).is_ok());
        // L must exceed R
        assert!(EndmemberMatrix::new(DMatrix::identity(2, 2)).is_err());
        // single endmember
        assert!(EndmemberMatrix::new(DMatrix::from_element(4, 1, 0.5)).is_err());
        // duplicated column
        assert!(EndmemberMatrix::new(DMatrix::from_element(4, 2, 0.5)).is_err());
    }

    #[test]
    fn abundance_constraints() {
        assert!(AbundanceVector::simplex(DVector::from_vec(vec![0.5, 0.5])).is_ok());
        assert!(AbundanceVector::simplex(DVector::from_vec(vec![0.6, 0.5])).is_err());
        assert!(AbundanceVector::simplex(DVector::from_vec(vec![1.5, -0.5])).is_err());
        assert!(AbundanceVector::unconstrained(DVector::from_vec(vec![1.5, -0.5])).is_ok());
        let a = AbundanceVector::normalized(&[0.6, 0.4, 0.1]).unwrap();
        assert!((a.weights().sum() - 1.0).abs() <= 1e-15);
        assert!((a.weights()[0] - 0.6 / 1.1).abs() < 1e-15);
    }

    #[test]
    fn detection_map_rejects_out_of_range() {
        assert!(DetectionMap::new(vec![DetectionLabel::Linear], vec![2.5]).is_err());
        assert!(DetectionMap::new(vec![DetectionLabel::Unclassified], vec![f64::NAN]).is_ok());
        assert!(DetectionMap::new(vec![DetectionLabel::Linear], vec![]).is_err());
    }

    #[test]
    fn angle_between_orthogonal_spectra() {
        let a = DVector::from_vec(vec![1.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 2.0]);
        assert!((spectral_angle(&a, &b) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        assert_eq!(spectral_angle(&a, &a), 0.0);
    }
}
