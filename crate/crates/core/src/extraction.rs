//! Endmember estimation: affine reduction, VCA, MVES and the detector-guided
//! iterative extraction.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error as ThisError;

use crate::detector::{calibrate_threshold, Detector};
use crate::error::{Error, Result};
use crate::gp::GpSettings;
use crate::lp::{solve_lp, LpProblem, Relation, Sense};
use crate::rng::Seed;
use crate::scene::{spectral_angle, EndmemberMatrix, SceneImage};

/// Data expressed in the `(R-1)`-dimensional affine set that best fits it.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedData {
    /// `N x (R-1)`, one row per pixel.
    pub projected: DMatrix<f64>,
    /// `L x (R-1)` with orthonormal columns.
    pub basis: DMatrix<f64>,
    pub centroid: DVector<f64>,
    /// Eigenvalues of the scatter matrix, descending.
    pub spectrum: Vec<f64>,
}

impl ReducedData {
    /// Lift reduced coordinates (one column per point) back to band space.
    pub fn lift(&self, coords: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = &self.basis * coords;
        for mut c in out.column_iter_mut() {
            c += &self.centroid;
        }
        out
    }

    /// Reduced coordinates of band-space points (one column per point).
    pub fn project(&self, points: &DMatrix<f64>) -> DMatrix<f64> {
        let mut centered = points.clone();
        for mut c in centered.column_iter_mut() {
            c -= &self.centroid;
        }
        self.basis.transpose() * centered
    }
}

fn centered(pixels: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let n = pixels.ncols() as f64;
    let mean = pixels.column_sum() / n;
    let mut x = pixels.clone();
    for mut c in x.column_iter_mut() {
        c -= &mean;
    }
    (x, mean)
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
fn sorted_eigen(s: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = s.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>(),
    );
    (values, vectors)
}

/// Flip each column so that its largest-magnitude entry is positive.
fn fix_signs(basis: &mut DMatrix<f64>) {
    for mut c in basis.column_iter_mut() {
        let mut best = 0usize;
        for i in 1..c.len() {
            if c[i].abs() > c[best].abs() {
                best = i;
            }
        }
        if c[best] < 0.0 {
            c.neg_mut();
        }
    }
}

fn check_counts(image: &SceneImage, r: usize) -> Result<()> {
    if r < 2 {
        return Err(Error::Argument(format!("need at least 2 endmembers, got {r}")));
    }
    if image.pixel_count() < r {
        return Err(Error::Argument(format!(
            "{} pixels cannot determine {r} endmembers",
            image.pixel_count()
        )));
    }
    if image.band_count() <= r {
        return Err(Error::Argument(format!(
            "{} bands cannot hold {r} endmembers",
            image.band_count()
        )));
    }
    Ok(())
}

/// Centroid plus the top `R-1` principal directions of the pixels.
pub fn affine_reduce(image: &SceneImage, r: usize) -> Result<ReducedData> {
    check_counts(image, r)?;
    let (x, centroid) = centered(image.pixels());
    let (spectrum, vectors) = sorted_eigen(&x * x.transpose());
    let mut basis = vectors.columns(0, r - 1).into_owned();
    fix_signs(&mut basis);
    let projected = (basis.transpose() * &x).transpose();
    Ok(ReducedData {
        projected,
        basis,
        centroid,
        spectrum,
    })
}

/// Fails when the centred data span fewer than `R-1` directions.
fn check_rank(spectrum: &[f64], r: usize) -> Result<()> {
    let top = spectrum.first().copied().unwrap_or(0.0);
    let needed = spectrum.get(r - 2).copied().unwrap_or(0.0);
    if !(top > 0.0) || needed <= 1e-14 * top {
        return Err(Error::Extraction(format!(
            "data span fewer than {} affine directions",
            r - 1
        )));
    }
    Ok(())
}

/// Vertex component analysis: `R` observed pixels picked as extreme
/// projections onto random directions orthogonal to those already chosen.
pub fn vca(image: &SceneImage, r: usize, seed: u64) -> Result<EndmemberMatrix> {
    check_counts(image, r)?;
    let y = image.pixels();
    let (l, n) = y.shape();
    let nf = n as f64;
    let (x0, mean) = centered(y);
    let (spectrum, vectors) = sorted_eigen(&x0 * x0.transpose() / nf);
    check_rank(&spectrum, r)?;

    let ud = vectors.columns(0, r).into_owned();
    let xp = ud.transpose() * &x0;
    let p_y = y.norm_squared() / nf;
    let p_x = xp.norm_squared() / nf + mean.norm_squared();
    let num = p_x - r as f64 / l as f64 * p_y;
    let den = p_y - p_x;
    let snr = if den <= 0.0 {
        f64::INFINITY
    } else if num <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (num / den).log10()
    };
    let snr_threshold = 15.0 + 10.0 * (r as f64).log10();

    let proj: DMatrix<f64> = if snr < snr_threshold {
        let xd = xp.rows(0, r - 1).into_owned();
        let c = xd.column_iter().map(|col| col.norm()).fold(0.0, f64::max);
        let mut out = DMatrix::from_element(r, n, c);
        out.rows_mut(0, r - 1).copy_from(&xd);
        out
    } else {
        let (_, vectors) = sorted_eigen(y * y.transpose() / nf);
        let ud = vectors.columns(0, r).into_owned();
        let xp = ud.transpose() * y;
        let u = xp.column_sum() / nf;
        let mut out = xp.clone();
        for (k, mut col) in out.column_iter_mut().enumerate() {
            let s = u.dot(&xp.column(k));
            if s.abs() <= f64::MIN_POSITIVE {
                return Err(Error::Extraction(format!("pixel {k} projects onto the origin")));
            }
            col /= s;
        }
        out
    };

    let mut rng = Seed(seed).derive("vca").rng();
    let mut a = DMatrix::<f64>::zeros(r, r);
    a[(r - 1, 0)] = 1.0;
    let mut picked = Vec::with_capacity(r);
    for i in 0..r {
        let w = DVector::from_fn(r, |_, _| StandardNormal.sample(&mut rng));
        let pinv = a
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(e.to_string()))?;
        let mut f = &w - &a * (pinv * &w);
        let norm = f.norm();
        if !(norm > 0.0) {
            return Err(Error::Extraction("random direction collapsed".into()));
        }
        f /= norm;
        let v = f.transpose() * &proj;
        let idx = v.transpose().iamax();
        if picked.contains(&idx) {
            return Err(Error::Extraction(format!(
                "pixel {idx} selected twice; data look degenerate"
            )));
        }
        picked.push(idx);
        a.set_column(i, &proj.column(idx));
    }
    let cols: Vec<_> = picked.iter().map(|&k| y.column(k)).collect();
    EndmemberMatrix::new(DMatrix::from_columns(&cols))
        .map_err(|e| Error::Extraction(format!("selected pixels unusable: {e}")))
}

/// Master seed of the VCA runs that initialise MVES.
pub const MVES_INIT_SEED: u64 = 0x4D56_4553;
/// Number of VCA initialisations; the smallest final simplex wins.
pub const MVES_STARTS: u64 = 4;
const MVES_MAX_SWEEPS: usize = 50;
const MVES_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct MvesResult {
    pub endmembers: EndmemberMatrix,
    /// Simplex volume in reduced coordinates: initial, then after each sweep.
    pub volume_trace: Vec<f64>,
    pub sweeps: usize,
    /// Smallest barycentric coordinate of any pixel in the final simplex.
    pub min_barycentric: f64,
}

impl MvesResult {
    pub fn volume(&self) -> f64 {
        *self.volume_trace.last().expect("trace holds the initial volume")
    }
}

/// Simplex `{x : H x - g >= 0, 1 - 1'(H x - g) >= 0}` in reduced coordinates.
#[derive(Debug, Clone)]
struct InverseSimplex {
    h: DMatrix<f64>,
    g: DVector<f64>,
}

impl InverseSimplex {
    fn from_vertices(v: &DMatrix<f64>) -> Result<Self> {
        let d = v.nrows();
        let last = v.column(d).into_owned();
        let mut b = DMatrix::zeros(d, d);
        for i in 0..d {
            b.set_column(i, &(v.column(i) - &last));
        }
        let h = b
            .try_inverse()
            .ok_or_else(|| Error::Extraction("initial vertices are affinely dependent".into()))?;
        let g = &h * last;
        Ok(InverseSimplex { h, g })
    }

    fn vertices(&self) -> Result<DMatrix<f64>> {
        let d = self.h.nrows();
        let b = self
            .h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("simplex collapsed".into()))?;
        let last = &b * &self.g;
        let mut v = DMatrix::zeros(d, d + 1);
        for i in 0..d {
            v.set_column(i, &(b.column(i) + &last));
        }
        v.set_column(d, &last);
        Ok(v)
    }

    /// `R x N` barycentric coordinates of the columns of `x`.
    fn barycentric(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let d = self.h.nrows();
        let mut s = &self.h * x;
        for mut c in s.column_iter_mut() {
            c -= &self.g;
        }
        let mut out = DMatrix::zeros(d + 1, x.ncols());
        out.rows_mut(0, d).copy_from(&s);
        for k in 0..x.ncols() {
            out[(d, k)] = 1.0 - s.column(k).sum();
        }
        out
    }

    fn volume(&self) -> f64 {
        let d = self.h.nrows();
        let fact: f64 = (1..=d).map(|k| k as f64).product();
        1.0 / (self.h.determinant().abs() * fact)
    }
}

/// Cofactors of row `i`, so that `det H = sum_j h_ij c_j`.
fn cofactors(h: &DMatrix<f64>, i: usize) -> DVector<f64> {
    let d = h.nrows();
    if d == 1 {
        return DVector::from_element(1, 1.0);
    }
    DVector::from_fn(d, |j, _| {
        let minor = h.clone().remove_row(i).remove_column(j);
        let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
        sign * minor.determinant()
    })
}

/// `argmax a'z` over `{z : 0 <= z'(x_n, -1) <= b_n}` via its dual
/// `min b'y2 s.t. sum_n (y2_n - y1_n)(x_n, -1) = a, y >= 0`, whose constraint
/// multipliers are the maximiser.
fn row_lp(x: &DMatrix<f64>, b: &[f64], a: &DVector<f64>) -> Result<DVector<f64>> {
    let (d, n) = x.shape();
    let mut objective = vec![0.0; 2 * n];
    objective[n..].copy_from_slice(b);
    let mut problem = LpProblem::new(Sense::Minimize, objective);
    for k in 0..=d {
        let mut row = vec![0.0; 2 * n];
        for j in 0..n {
            let v = if k < d { x[(k, j)] } else { -1.0 };
            row[j] = -v;
            row[n + j] = v;
        }
        problem = problem.constrain(row, Relation::Eq, a[k]);
    }
    let sol = solve_lp(&problem).map_err(|e| Error::Extraction(format!("MVES subproblem: {e}")))?;
    Ok(DVector::from_vec(sol.duals))
}

/// One pass of row-wise LP updates, each maximising `|det H|` over a single
/// row of `(H, g)` with the others held fixed.
fn update_rows(simplex: &mut InverseSimplex, x: &DMatrix<f64>) -> Result<()> {
    let d = simplex.h.nrows();
    for i in 0..d {
        let c = cofactors(&simplex.h, i);
        let mut a = DVector::zeros(d + 1);
        a.rows_mut(0, d).copy_from(&c);
        let others: Vec<f64> = (0..x.ncols())
            .map(|k| {
                let mut s = 0.0;
                for j in (0..d).filter(|&j| j != i) {
                    s += simplex.h.row(j).dot(&x.column(k).transpose()) - simplex.g[j];
                }
                1.0 - s
            })
            .collect();
        let z_max = row_lp(x, &others, &a)?;
        let z_min = row_lp(x, &others, &(-&a))?;
        let z = if a.dot(&z_max).abs() >= a.dot(&z_min).abs() { z_max } else { z_min };
        let mut current = DVector::zeros(d + 1);
        current.rows_mut(0, d).copy_from(&simplex.h.row(i).transpose());
        current[d] = simplex.g[i];
        if a.dot(&z).abs() > a.dot(&current).abs() {
            for j in 0..d {
                simplex.h[(i, j)] = z[j];
            }
            simplex.g[i] = z[d];
        }
    }
    Ok(())
}

/// Minimum-volume simplex enclosing the pixels, found by alternating
/// row-wise linear programs on the inverse vertex matrix from several VCA
/// starts.
pub fn mves(image: &SceneImage, r: usize) -> Result<MvesResult> {
    let reduced = affine_reduce(image, r)?;
    check_rank(&reduced.spectrum, r)?;
    let mut best: Option<MvesResult> = None;
    for k in 0..MVES_STARTS {
        let init = vca(image, r, Seed(MVES_INIT_SEED).child(k).0)?;
        let res = mves_reduced(&reduced, &init)?;
        if best.as_ref().is_none_or(|b| res.volume() < b.volume()) {
            best = Some(res);
        }
    }
    Ok(best.expect("at least one start"))
}

/// MVES started from the given vertices, inflated about their centroid until
/// they enclose the data.
pub fn mves_from(image: &SceneImage, init: &EndmemberMatrix) -> Result<MvesResult> {
    let r = init.endmember_count();
    if init.band_count() != image.band_count() {
        return Err(Error::Dimension("initial endmembers and image band counts differ".into()));
    }
    let reduced = affine_reduce(image, r)?;
    check_rank(&reduced.spectrum, r)?;
    mves_reduced(&reduced, init)
}

fn mves_reduced(reduced: &ReducedData, init: &EndmemberMatrix) -> Result<MvesResult> {
    let r = init.endmember_count();
    let x = reduced.projected.transpose();
    let mut verts = reduced.project(init.matrix());
    let mut simplex = InverseSimplex::from_vertices(&verts)?;
    let worst = simplex.barycentric(&x).min();
    let lambda = (1.0 - r as f64 * worst).max(1.0);
    let center = verts.column_sum() / r as f64;
    for mut c in verts.column_iter_mut() {
        let shifted = (&c - &center) * lambda + &center;
        c.copy_from(&shifted);
    }
    simplex = InverseSimplex::from_vertices(&verts)?;

    let mut volume_trace = vec![simplex.volume()];
    let mut sweeps = 0;
    while sweeps < MVES_MAX_SWEEPS {
        sweeps += 1;
        // each vertex takes a turn as the reference, so every facet gets moved
        for reference in (0..r).rev() {
            let mut order: Vec<usize> = (0..r).filter(|&k| k != reference).collect();
            order.push(reference);
            let cols: Vec<_> = order.iter().map(|&k| verts.column(k)).collect();
            let mut rotated = InverseSimplex::from_vertices(&DMatrix::from_columns(&cols))?;
            update_rows(&mut rotated, &x)?;
            let moved = rotated.vertices()?;
            for (pos, &k) in order.iter().enumerate() {
                verts.set_column(k, &moved.column(pos));
            }
        }
        simplex = InverseSimplex::from_vertices(&verts)?;
        let vol = simplex.volume();
        let prev = *volume_trace.last().unwrap();
        volume_trace.push(vol);
        if (prev - vol).abs() <= MVES_TOLERANCE * prev {
            break;
        }
    }

    let min_barycentric = simplex.barycentric(&x).min();
    let endmembers = EndmemberMatrix::new(reduced.lift(&simplex.vertices()?))
        .map_err(|e| Error::Extraction(format!("MVES vertices unusable: {e}")))?;
    Ok(MvesResult {
        endmembers,
        volume_trace,
        sweeps,
        min_barycentric,
    })
}

/// Volume of the simplex spanned by the columns of `m` inside their own affine hull.
pub fn simplex_volume(m: &DMatrix<f64>) -> f64 {
    let r = m.ncols();
    let last = m.column(r - 1).into_owned();
    let mut e = DMatrix::zeros(m.nrows(), r - 1);
    for i in 0..r - 1 {
        e.set_column(i, &(m.column(i) - &last));
    }
    let gram = e.transpose() * &e;
    let fact: f64 = (1..r).map(|k| k as f64).product();
    gram.determinant().max(0.0).sqrt() / fact
}

/// Best one-to-one pairing of estimated and reference endmembers.
#[derive(Debug, Clone, PartialEq)]
pub struct EndmemberMatch {
    /// `order[k]` is the estimated column paired with reference column `k`.
    pub order: Vec<usize>,
    pub angles: Vec<f64>,
}

impl EndmemberMatch {
    pub fn mean_angle(&self) -> f64 {
        self.angles.iter().sum::<f64>() / self.angles.len() as f64
    }

    pub fn max_angle(&self) -> f64 {
        self.angles.iter().copied().fold(0.0, f64::max)
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Pairing that minimises the summed spectral angle, by exhaustive search.
pub fn match_endmembers(estimate: &EndmemberMatrix, reference: &EndmemberMatrix) -> Result<EndmemberMatch> {
    let r = reference.endmember_count();
    if estimate.endmember_count() != r || estimate.band_count() != reference.band_count() {
        return Err(Error::Dimension("estimated and reference endmember shapes differ".into()));
    }
    if r > 8 {
        return Err(Error::Argument(format!("exhaustive matching supports R <= 8, got {r}")));
    }
    let angle = DMatrix::from_fn(r, r, |k, j| {
        spectral_angle(
            &reference.matrix().column(k).into_owned(),
            &estimate.matrix().column(j).into_owned(),
        )
    });
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(r) {
        let cost: f64 = p.iter().enumerate().map(|(k, &j)| angle[(k, j)]).sum();
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, p));
        }
    }
    let order = best.unwrap().1;
    let angles = order.iter().enumerate().map(|(k, &j)| angle[(k, j)]).collect();
    Ok(EndmemberMatch { order, angles })
}

/// Settings of the detector-guided extraction loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeParams {
    pub max_iterations: usize,
    pub epsilon: f64,
    pub relax_initial: f64,
    pub relax_increment: f64,
    pub pfa: f64,
}

impl Default for IterativeParams {
    fn default() -> Self {
        IterativeParams {
            max_iterations: 10,
            epsilon: 0.05,
            relax_initial: 0.9,
            relax_increment: 0.01,
            pfa: 0.05,
        }
    }
}

impl IterativeParams {
    /// Increment `(1 - r_f) / N_max`, so the relaxed threshold reaches `tau` at the last pass.
    pub fn with_relaxation(max_iterations: usize, relax_initial: f64) -> Result<Self> {
        let p = IterativeParams {
            max_iterations,
            relax_initial,
            relax_increment: (1.0 - relax_initial) / max_iterations.max(1) as f64,
            ..Self::default()
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(Error::Argument("max_iterations must be positive".into()));
        }
        if !(self.relax_initial > 0.0 && self.relax_initial <= 1.0) {
            return Err(Error::Argument(format!(
                "relaxing factor must be in (0, 1], got {}",
                self.relax_initial
            )));
        }
        if !(self.relax_increment >= 0.0 && self.relax_increment.is_finite()) {
            return Err(Error::Argument("relaxing increment must be finite and >= 0".into()));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Argument("epsilon must be finite and >= 0".into()));
        }
        if !(self.pfa > 0.0 && self.pfa < 1.0) {
            return Err(Error::Argument(format!("pfa must be in (0, 1), got {}", self.pfa)));
        }
        Ok(())
    }
}

/// State after one pass of the loop (pass 0 is the initial MVES on all pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub surviving: usize,
    pub discarded: usize,
    /// Threshold used for removal in this pass.
    pub tau_r: f64,
    /// Range of `T` over the survivors, when computed.
    pub t_range: Option<(f64, f64)>,
    pub endmembers: EndmemberMatrix,
    pub sam_to_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterativeResult {
    pub endmembers: EndmemberMatrix,
    pub tau: f64,
    pub trace: Vec<IterationRecord>,
    /// Original indices of the pixels left at the end.
    pub survivors: Vec<usize>,
}

/// Failure of the iterative extraction together with the passes completed.
#[derive(Debug, ThisError)]
#[error("iterative extraction stopped after {} passes: {source}", trace.len())]
pub struct IterativeError {
    #[source]
    pub source: Error,
    pub trace: Vec<IterationRecord>,
}

impl From<IterativeError> for Error {
    fn from(e: IterativeError) -> Self {
        Error::Extraction(e.to_string())
    }
}

fn reference_sam(image: &SceneImage, m: &EndmemberMatrix) -> Option<f64> {
    let gt = image.ground_truth.as_ref()?;
    match_endmembers(m, &gt.endmembers).ok().map(|mm| mm.mean_angle())
}

/// Alternate MVES with removal of pixels the detector flags as nonlinear
/// under a relaxed threshold that tightens each pass.
pub fn iterative_endmember_estimation(
    image: &SceneImage,
    r: usize,
    params: &IterativeParams,
    gp: &GpSettings,
) -> std::result::Result<IterativeResult, IterativeError> {
    let mut trace = Vec::new();
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(source) => return Err(IterativeError { source, trace }),
            }
        };
    }
    bail!(params.validate());
    if image.pixel_count() == 0 {
        return Err(IterativeError {
            source: Error::Argument("image has no pixels".into()),
            trace,
        });
    }

    let mut survivors: Vec<usize> = (0..image.pixel_count()).collect();
    let mut m_hat = bail!(mves(image, r)).endmembers;
    let detector = bail!(Detector::new(&m_hat, image, gp));
    let tau = bail!(calibrate_threshold(&detector, image, params.pfa)).tau;
    let mut relax = params.relax_initial;
    let mut tau_r = relax * tau;
    trace.push(IterationRecord {
        iteration: 0,
        surviving: survivors.len(),
        discarded: 0,
        tau_r,
        t_range: None,
        sam_to_reference: reference_sam(image, &m_hat),
        endmembers: m_hat.clone(),
    });

    let (mut t_max, mut t_min) = (1.0f64, 0.0f64);
    let mut cc = 1usize;
    let mut current = image.clone();
    while t_max - t_min > params.epsilon && cc < params.max_iterations {
        let detector = bail!(Detector::new(&m_hat, &current, gp));
        let stats = bail!(detector.statistics(current.pixels()));
        let used_tau = tau_r;
        let mut kept = Vec::new();
        let mut kept_t = Vec::new();
        for (k, s) in stats.iter().enumerate() {
            match s {
                Some(t) if t.value <= used_tau => {}
                Some(t) => {
                    kept.push(k);
                    kept_t.push(t.value);
                }
                None => kept.push(k),
            }
        }
        let discarded = survivors.len() - kept.len();
        survivors = kept.iter().map(|&k| survivors[k]).collect();
        current = image.select(&survivors);
        relax += params.relax_increment;
        tau_r = relax * tau;
        if kept_t.is_empty() {
            t_max = 0.0;
            t_min = 0.0;
        } else {
            t_max = kept_t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            t_min = kept_t.iter().copied().fold(f64::INFINITY, f64::min);
        }
        cc += 1;
        if survivors.len() < 5 * r {
            return Err(IterativeError {
                source: Error::Extraction(format!(
                    "only {} pixels survive, fewer than {}",
                    survivors.len(),
                    5 * r
                )),
                trace,
            });
        }
        m_hat = bail!(mves(&current, r)).endmembers;
        trace.push(IterationRecord {
            iteration: cc - 1,
            surviving: survivors.len(),
            discarded,
            tau_r: used_tau,
            t_range: (!kept_t.is_empty()).then_some((t_min, t_max)),
            sam_to_reference: reference_sam(image, &m_hat),
            endmembers: m_hat.clone(),
        });
    }

    Ok(IterativeResult {
        endmembers: m_hat,
        tau,
        trace,
        survivors,
    })
}

/// `iteration,surviving_pixels,discarded,tau_r,sam_to_reference`; the last
/// field is empty without ground truth.
pub fn format_trace_csv(trace: &[IterationRecord]) -> String {
    let mut out = String::from("iteration,surviving_pixels,discarded,tau_r,sam_to_reference\n");
    for rec in trace {
        let sam = rec.sam_to_reference.map(|s| format!("{s:.9e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{:.12e},{}",
            rec.iteration, rec.surviving, rec.discarded, rec.tau_r, sam
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixing::{material_library, sample_abundance_capped, sample_abundance_uniform};

    fn lmm_image(m: &EndmemberMatrix, n: usize, cap: Option<f64>, seed: u64) -> (SceneImage, DMatrix<f64>) {
        let mut rng = Seed(seed).rng();
        let r = m.endmember_count();
        let a = DMatrix::from_columns(
            &(0..n)
                .map(|_| match cap {
                    Some(c) => sample_abundance_capped(r, c, &mut rng).unwrap().weights().clone(),
                    None => sample_abundance_uniform(r, &mut rng).unwrap().weights().clone(),
                })
                .collect::<Vec<_>>(),
        );
        (SceneImage::new(m.matrix() * &a).unwrap(), a)
    }

    #[test]
    fn reduction_reproduces_noiseless_data() {
        let m = material_library(60, 4).unwrap();
        let (img, _) = lmm_image(&m, 300, None, 1);
        let red = affine_reduce(&img, 4).unwrap();
        let back = red.lift(&red.projected.transpose());
        assert!((back - img.pixels()).amax() <= 1e-10);
        let gram = red.basis.transpose() * &red.basis;
        assert!((gram - DMatrix::identity(3, 3)).amax() <= 1e-12);
        for c in red.basis.column_iter() {
            assert!(c[c.iamax()] > 0.0);
        }
    }

    #[test]
    fn two_endmembers_give_segment_direction() {
        let m = material_library(30, 2).unwrap();
        let (img, _) = lmm_image(&m, 50, None, 2);
        let red = affine_reduce(&img, 2).unwrap();
        let dir = m.matrix().column(0) - m.matrix().column(1);
        let cos = red.basis.column(0).dot(&dir).abs() / dir.norm();
        assert!((cos - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reduction_needs_enough_pixels() {
        let img = SceneImage::new(DMatrix::from_element(10, 2, 0.3)).unwrap();
        assert!(matches!(affine_reduce(&img, 3), Err(Error::Argument(_))));
    }

    #[test]
    fn vca_finds_pure_pixels() {
        let m = material_library(50, 4).unwrap();
        let (mut img, _) = lmm_image(&m, 400, None, 3);
        let mut pixels = img.pixels().clone();
        for (k, col) in [(17, 0), (101, 1), (250, 2), (399, 3)] {
            pixels.set_column(k, &m.matrix().column(col));
        }
        img = SceneImage::new(pixels).unwrap();
        let est = vca(&img, 4, 9).unwrap();
        let mm = match_endmembers(&est, &m).unwrap();
        assert!(mm.max_angle() <= 1e-6, "{:?}", mm.angles);
        assert_eq!(est, vca(&img, 4, 9).unwrap());
    }

    #[test]
    fn vca_rejects_identical_pixels() {
        let img = SceneImage::new(DMatrix::from_element(10, 20, 0.3)).unwrap();
        assert!(matches!(vca(&img, 3, 0), Err(Error::Extraction(_))));
    }

    #[test]
    fn mves_returns_vertices_of_a_minimal_point_set() {
        let m = material_library(40, 3).unwrap();
        let img = SceneImage::new(m.matrix().clone()).unwrap();
        let res = mves(&img, 3).unwrap();
        let mm = match_endmembers(&res.endmembers, &m).unwrap();
        for (k, &j) in mm.order.iter().enumerate() {
            let diff = (res.endmembers.matrix().column(j) - m.matrix().column(k)).amax();
            assert!(diff < 1e-8, "vertex {k} off by {diff}");
        }
        assert!(res.min_barycentric >= -1e-6);
    }

    #[test]
    fn mves_encloses_and_shrinks() {
        let m = material_library(40, 3).unwrap();
        let (img, _) = lmm_image(&m, 500, Some(0.8), 4);
        let res = mves(&img, 3).unwrap();
        assert!(res.min_barycentric >= -1e-6);
        for w in res.volume_trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        let mm = match_endmembers(&res.endmembers, &m).unwrap();
        assert!(mm.max_angle() < 0.05, "{:?}", mm.angles);
    }

    #[test]
    fn mves_with_pure_pixels_never_exceeds_true_volume() {
        let m = material_library(40, 3).unwrap();
        let (img, _) = lmm_image(&m, 300, None, 5);
        let mut pixels = img.pixels().clone();
        for k in 0..3 {
            pixels.set_column(10 * k, &m.matrix().column(k));
        }
        let img = SceneImage::new(pixels).unwrap();
        let res = mves(&img, 3).unwrap();
        assert!(res.min_barycentric >= -1e-6);
        assert!(simplex_volume(res.endmembers.matrix()) <= simplex_volume(m.matrix()) + 1e-6);
    }

    #[test]
    fn simplex_volume_of_unit_triangle() {
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!((simplex_volume(&m) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn matching_undoes_permutation() {
        let m = material_library(30, 4).unwrap();
        let p = m.permuted(&[2, 0, 3, 1]).unwrap();
        let mm = match_endmembers(&p, &m).unwrap();
        assert_eq!(mm.order, vec![1, 3, 0, 2]);
        assert!(mm.max_angle() < 1e-7);
    }

    #[test]
    fn default_params_follow_listing() {
        let p = IterativeParams::default();
        assert_eq!(p.max_iterations, 10);
        assert_eq!(p.relax_initial, 0.9);
        assert!((p.relax_increment - 0.1 / 10.0).abs() < 1e-15);
        let q = IterativeParams::with_relaxation(10, 0.8).unwrap();
        assert!((q.relax_increment - 0.02).abs() < 1e-15);
        assert!(IterativeParams::with_relaxation(10, 1.2).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let m = material_library(20, 2).unwrap();
        let rec = IterationRecord {
            iteration: 0,
            surviving: 10,
            discarded: 0,
            tau_r: 0.5,
            t_range: None,
            endmembers: m,
            sam_to_reference: None,
        };
        let csv = format_trace_csv(&[rec]);
        assert_eq!(csv.lines().count(), 2);
        assert!(csv.lines().nth(1).unwrap().ends_with(','));
    }
}
