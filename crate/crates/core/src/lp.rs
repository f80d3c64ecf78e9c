//! Dense two-phase simplex method.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coefficients: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Linear program with per-variable bounds (infinite bounds allowed).
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

impl LpProblem {
    /// Problem over `x >= 0` with no constraints yet.
    pub fn new(sense: Sense, objective: Vec<f64>) -> Self {
        let n = objective.len();
        LpProblem {
            sense,
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn constrain(mut self, coefficients: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        self.constraints.push(Constraint {
            coefficients,
            relation,
            rhs,
        });
        self
    }

    pub fn bound(mut self, var: usize, lower: f64, upper: f64) -> Self {
        self.bounds[var] = (lower, upper);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.objective.len();
        if n == 0 {
            return Err(Error::Argument("LP has no variables".into()));
        }
        if self.bounds.len() != n {
            return Err(Error::Dimension(format!("{} bounds for {n} variables", self.bounds.len())));
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return Err(Error::Validation("non-finite objective coefficient".into()));
        }
        for (i, c) in self.constraints.iter().enumerate() {
            if c.coefficients.len() != n {
                return Err(Error::Dimension(format!(
                    "constraint {i} has {} coefficients for {n} variables",
                    c.coefficients.len()
                )));
            }
            if !c.rhs.is_finite() || c.coefficients.iter().any(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("constraint {i} has non-finite entries")));
            }
        }
        for (j, &(lo, hi)) in self.bounds.iter().enumerate() {
            if lo.is_nan() || hi.is_nan() || lo > hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(Error::Validation(format!("variable {j} has invalid bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// Sensitivity of the optimal objective to each constraint's right-hand side.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

/// How an original variable maps onto nonnegative standard-form columns.
#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// `x = lo + col`
    Shifted { col: usize, lo: f64 },
    /// `x = hi - col`
    Mirrored { col: usize, hi: f64 },
    /// `x = pos - neg`
    Split { pos: usize, neg: usize },
}

const EPS: f64 = 1e-9;

struct Tableau {
    /// `m` constraint rows then the objective row; last column is the rhs.
    t: DMatrix<f64>,
    basis: Vec<usize>,
    iterations: usize,
}

impl Tableau {
    fn rows(&self) -> usize {
        self.t.nrows() - 1
    }

    fn rhs_col(&self) -> usize {
        self.t.ncols() - 1
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[(row, col)];
        let width = self.t.ncols();
        for j in 0..width {
            self.t[(row, j)] /= p;
        }
        for i in 0..self.t.nrows() {
            if i == row {
                continue;
            }
            let f = self.t[(i, col)];
            if f != 0.0 {
                for j in 0..width {
                    let v = self.t[(row, j)];
                    if v != 0.0 {
                        self.t[(i, j)] -= f * v;
                    }
                }
                self.t[(i, col)] = 0.0;
            }
        }
        self.basis[row] = col;
        self.iterations += 1;
    }

    /// Bland's rule over the columns in `allowed`. Returns `Err(Unbounded)` if
    /// an improving column has no positive entry.
    fn run(&mut self, allowed: usize, limit: usize) -> Result<()> {
        let m = self.rows();
        let rhs = self.rhs_col();
        loop {
            if self.iterations > limit {
                return Err(Error::Numerical("simplex iteration limit reached".into()));
            }
            let Some(col) = (0..allowed).find(|&j| self.t[(m, j)] < -EPS) else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.t[(i, col)];
                if a > EPS {
                    let ratio = self.t[(i, rhs)] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - EPS || (ratio <= br + EPS && self.basis[i] < self.basis[bi]) {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            let Some((row, _)) = best else {
                return Err(Error::Unbounded);
            };
            self.pivot(row, col);
        }
    }
}

/// Solve by the two-phase simplex method with Bland's anti-cycling rule.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    problem.validate()?;
    let n = problem.objective.len();

    // standard-form columns for the original variables
    let mut maps = Vec::with_capacity(n);
    let mut cols = 0usize;
    let mut extra_rows: Vec<(usize, f64)> = Vec::new();
    for &(lo, hi) in &problem.bounds {
        if lo.is_finite() {
            maps.push(VarMap::Shifted { col: cols, lo });
            if hi.is_finite() {
                extra_rows.push((cols, hi - lo));
            }
            cols += 1;
        } else if hi.is_finite() {
            maps.push(VarMap::Mirrored { col: cols, hi });
            cols += 1;
        } else {
            maps.push(VarMap::Split { pos: cols, neg: cols + 1 });
            cols += 2;
        }
    }
    let structural = cols;

    // rows: coefficients over structural columns, relation, rhs
    let mut rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
    for c in &problem.constraints {
        let mut a = vec![0.0; structural];
        let mut b = c.rhs;
        for (j, &v) in c.coefficients.iter().enumerate() {
            match maps[j] {
                VarMap::Shifted { col, lo } => {
                    a[col] += v;
                    b -= v * lo;
                }
                VarMap::Mirrored { col, hi } => {
                    a[col] -= v;
                    b -= v * hi;
                }
                VarMap::Split { pos, neg } => {
                    a[pos] += v;
                    a[neg] -= v;
                }
            }
        }
        rows.push((a, c.relation, b));
    }
    for &(col, width) in &extra_rows {
        let mut a = vec![0.0; structural];
        a[col] = 1.0;
        rows.push((a, Relation::Le, width));
    }

    // minimize c_std . x_std
    let sign = if problem.sense == Sense::Maximize { -1.0 } else { 1.0 };
    let mut c_std = vec![0.0; structural];
    for (j, &v) in problem.objective.iter().enumerate() {
        let v = sign * v;
        match maps[j] {
            VarMap::Shifted { col, .. } => c_std[col] += v,
            VarMap::Mirrored { col, .. } => c_std[col] -= v,
            VarMap::Split { pos, neg } => {
                c_std[pos] += v;
                c_std[neg] -= v;
            }
        }
    }

    // nonnegative right-hand sides
    let mut flipped = vec![false; rows.len()];
    for (i, (a, rel, b)) in rows.iter_mut().enumerate() {
        if *b < 0.0 {
            a.iter_mut().for_each(|v| *v = -*v);
            *b = -*b;
            *rel = match *rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
            flipped[i] = true;
        }
    }

    let m = rows.len();
    let slack_count = rows.iter().filter(|r| r.1 != Relation::Eq).count();
    let art_rows: Vec<usize> = (0..m).filter(|&i| rows[i].1 != Relation::Le).collect();
    let first_slack = structural;
    let first_art = structural + slack_count;
    let total = first_art + art_rows.len();

    let mut t = DMatrix::zeros(m + 1, total + 1);
    let mut basis = vec![0usize; m];
    let mut slack = first_slack;
    let mut art = first_art;
    for (i, (a, rel, b)) in rows.iter().enumerate() {
        for (j, v) in a.iter().enumerate() {
            t[(i, j)] = *v;
        }
        t[(i, total)] = *b;
        match rel {
            Relation::Le => {
                t[(i, slack)] = 1.0;
                basis[i] = slack;
                slack += 1;
            }
            Relation::Ge => {
                t[(i, slack)] = -1.0;
                slack += 1;
                t[(i, art)] = 1.0;
                basis[i] = art;
                art += 1;
            }
            Relation::Eq => {
                t[(i, art)] = 1.0;
                basis[i] = art;
                art += 1;
            }
        }
    }
    let mut tab = Tableau { t, basis, iterations: 0 };
    let limit = 50 * (m + total) + 1000;

    if !art_rows.is_empty() {
        // phase 1: minimize the sum of artificials
        for j in first_art..total {
            tab.t[(m, j)] = 1.0;
        }
        for &i in &art_rows {
            for j in 0..=total {
                let v = tab.t[(i, j)];
                tab.t[(m, j)] -= v;
            }
        }
        tab.run(total, limit)?;
        let infeas = -tab.t[(m, total)];
        let scale = 1.0 + rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max);
        if infeas > 1e-8 * scale {
            return Err(Error::Infeasible);
        }
        // drive artificials out of the basis
        let mut redundant = Vec::new();
        for i in 0..m {
            if tab.basis[i] >= first_art {
                match (0..first_art).find(|&j| tab.t[(i, j)].abs() > EPS) {
                    Some(j) => tab.pivot(i, j),
                    None => redundant.push(i),
                }
            }
        }
        if !redundant.is_empty() {
            let keep: Vec<usize> = (0..=m).filter(|i| !redundant.contains(i)).collect();
            let mut t2 = DMatrix::zeros(keep.len(), tab.t.ncols());
            for (r, &i) in keep.iter().enumerate() {
                t2.set_row(r, &tab.t.row(i));
            }
            tab.basis = keep[..keep.len() - 1].iter().map(|&i| tab.basis[i]).collect();
            tab.t = t2;
        }
    }

    // phase 2 over structural and slack columns
    let m2 = tab.rows();
    for j in 0..=total {
        tab.t[(m2, j)] = 0.0;
    }
    for (j, v) in c_std.iter().enumerate() {
        tab.t[(m2, j)] = *v;
    }
    for i in 0..m2 {
        let cb = if tab.basis[i] < structural { c_std[tab.basis[i]] } else { 0.0 };
        if cb != 0.0 {
            for j in 0..=total {
                let v = tab.t[(i, j)];
                tab.t[(m2, j)] -= cb * v;
            }
        }
    }
    for j in first_art..total {
        tab.t[(m2, j)] = 0.0;
    }
    tab.run(first_art, limit)?;

    let mut x_std = vec![0.0; total];
    for i in 0..m2 {
        x_std[tab.basis[i]] = tab.t[(i, total)];
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shifted { col, lo } => lo + x_std[col],
            VarMap::Mirrored { col, hi } => hi - x_std[col],
            VarMap::Split { pos, neg } => x_std[pos] - x_std[neg],
        })
        .collect();
    let objective = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();

    let duals = constraint_duals(&rows, &flipped, &c_std, &tab.basis, structural, first_slack, sign, problem.constraints.len());
    Ok(LpSolution {
        x,
        objective,
        duals,
        iterations: tab.iterations,
    })
}

/// Solve `B^T pi = c_B` over the full standard-form rows and map the
/// multipliers back to the caller's sense and row orientation.
#[allow(clippy::too_many_arguments)]
fn constraint_duals(
    rows: &[(Vec<f64>, Relation, f64)],
    flipped: &[bool],
    c_std: &[f64],
    basis: &[usize],
    structural: usize,
    first_slack: usize,
    sign: f64,
    user_rows: usize,
) -> Vec<f64> {
    let m = rows.len();
    if m == 0 || user_rows == 0 {
        return vec![0.0; user_rows];
    }
    // column j of the standard-form matrix, artificials excluded
    let mut slack_of = vec![None; m];
    let mut s = first_slack;
    for (i, r) in rows.iter().enumerate() {
        if r.1 != Relation::Eq {
            slack_of[i] = Some((s, if r.1 == Relation::Le { 1.0 } else { -1.0 }));
            s += 1;
        }
    }
    let column = |j: usize| -> DVector<f64> {
        if j < structural {
            DVector::from_iterator(m, rows.iter().map(|r| r.0[j]))
        } else {
            DVector::from_iterator(
                m,
                slack_of.iter().map(|so| match so {
                    Some((col, v)) if *col == j => *v,
                    _ => 0.0,
                }),
            )
        }
    };
    if basis.len() != m || basis.iter().any(|&j| j >= s) {
        // redundant rows were dropped; duals are not unique
        let mut b = DMatrix::zeros(m, basis.len());
        let mut cb = DVector::zeros(basis.len());
        for (k, &j) in basis.iter().enumerate() {
            if j < s {
                b.set_column(k, &column(j));
                cb[k] = if j < structural { c_std[j] } else { 0.0 };
            }
        }
        let pi = b
            .transpose()
            .svd(true, true)
            .solve(&cb, 1e-12)
            .unwrap_or_else(|_| DVector::zeros(m));
        return finish_duals(&pi, flipped, sign, user_rows);
    }
    let mut b = DMatrix::zeros(m, m);
    let mut cb = DVector::zeros(m);
    for (k, &j) in basis.iter().enumerate() {
        b.set_column(k, &column(j));
        cb[k] = if j < structural { c_std[j] } else { 0.0 };
    }
    let pi = b.transpose().lu().solve(&cb).unwrap_or_else(|| DVector::zeros(m));
    finish_duals(&pi, flipped, sign, user_rows)
}

fn finish_duals(pi: &DVector<f64>, flipped: &[bool], sign: f64, user_rows: usize) -> Vec<f64> {
    (0..user_rows)
        .map(|i| {
            let v = if flipped[i] { -pi[i] } else { pi[i] };
            sign * v
        })
        .collect()
}
