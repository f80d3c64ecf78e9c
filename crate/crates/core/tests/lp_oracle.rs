//! The dense solver checked against two independent references: a plain
//! Dantzig-rule tableau for `max c'x, Ax <= b, b >= 0, x >= 0`, and
//! exhaustive vertex enumeration on tiny problems with mixed relations.

use hyperdetect::lp::{solve_lp, LpProblem, Relation, Sense};
use hyperdetect::Error;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Textbook tableau simplex starting from the slack basis.
fn textbook_max(a: &DMatrix<f64>, b: &[f64], c: &[f64]) -> Option<f64> {
    let (m, n) = a.shape();
    let width = n + m + 1;
    let mut t = DMatrix::<f64>::zeros(m + 1, width);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, width - 1)] = b[i];
    }
    for j in 0..n {
        t[(m, j)] = -c[j];
    }
    for _ in 0..10_000 {
        let mut col = None;
        let mut most = -1e-11;
        for j in 0..width - 1 {
            if t[(m, j)] < most {
                most = t[(m, j)];
                col = Some(j);
            }
        }
        let Some(col) = col else {
            return Some(t[(m, width - 1)]);
        };
        let mut row = None;
        let mut ratio = f64::INFINITY;
        for i in 0..m {
            if t[(i, col)] > 1e-11 {
                let q = t[(i, width - 1)] / t[(i, col)];
                if q < ratio {
                    ratio = q;
                    row = Some(i);
                }
            }
        }
        let row = row?;
        let p = t[(row, col)];
        for j in 0..width {
            t[(row, j)] /= p;
        }
        for i in 0..=m {
            if i != row {
                let f = t[(i, col)];
                if f != 0.0 {
                    for j in 0..width {
                        t[(i, j)] -= f * t[(row, j)];
                    }
                }
            }
        }
    }
    None
}

#[test]
fn random_instances_match_textbook_tableau() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for trial in 0..40 {
        let (n, m) = (20, 30);
        let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-0.5..1.0));
        let b: Vec<f64> = (0..m).map(|_| rng.random_range(1.0..10.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..2.0)).collect();
        // keep the region bounded
        let mut a = a.insert_row(m, 1.0);
        let mut b = b;
        b.push(50.0);
        a.row_mut(m).fill(1.0);

        let oracle = textbook_max(&a, &b, &c).expect("oracle converged");
        let mut lp = LpProblem::new(Sense::Maximize, c.clone());
        for i in 0..a.nrows() {
            lp = lp.constrain(a.row(i).iter().copied().collect(), Relation::Le, b[i]);
        }
        let sol = solve_lp(&lp).unwrap();
        assert!(
            (sol.objective - oracle).abs() <= 1e-7 * oracle.abs().max(1.0),
            "trial {trial}: {} vs {oracle}",
            sol.objective
        );
        let x = DVector::from_vec(sol.x.clone());
        let ax = &a * &x;
        for i in 0..a.nrows() {
            assert!(ax[i] <= b[i] + 1e-8);
        }
        assert!(x.iter().all(|&v| v >= -1e-9));
    }
}

/// All subsets of `n` tight rows among equalities, inequalities and `x >= 0`.
fn enumerate_vertices(rows: &[(Vec<f64>, Relation, f64)], c: &[f64], n: usize) -> Option<f64> {
    let mut all: Vec<(Vec<f64>, Relation, f64)> = rows.to_vec();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        all.push((e, Relation::Ge, 0.0));
    }
    let k = all.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = DMatrix::from_fn(n, n, |i, j| all[idx[i]].0[j]);
        let rhs = DVector::from_fn(n, |i, _| all[idx[i]].2);
        if a.determinant().abs() > 1e-10 {
            if let Some(x) = a.lu().solve(&rhs) {
                let feasible = all.iter().all(|(row, rel, b)| {
                    let v: f64 = row.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                    match rel {
                        Relation::Le => v <= b + 1e-9,
                        Relation::Ge => v >= b - 1e-9,
                        Relation::Eq => (v - b).abs() <= 1e-9,
                    }
                });
                if feasible {
                    let obj: f64 = c.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
                    best = Some(best.map_or(obj, |b: f64| b.min(obj)));
                }
            }
        }
        // next combination
        let mut i = n;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < k - n + i {
                idx[i] += 1;
                for j in i + 1..n {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn tiny_mixed_problems_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut checked = 0;
    for trial in 0..300 {
        let n = 3;
        let mut rows = Vec::new();
        for _ in 0..4 {
            let coeffs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..3.0)).collect();
            let rel = match rng.random_range(0..3) {
                0 => Relation::Le,
                1 => Relation::Ge,
                _ => Relation::Eq,
            };
            rows.push((coeffs, rel, rng.random_range(-2.0..5.0)));
        }
        // bounded box so every feasible problem has an optimum
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            rows.push((e, Relation::Le, 4.0));
        }
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let oracle = enumerate_vertices(&rows, &c, n);
        let mut lp = LpProblem::new(Sense::Minimize, c.clone());
        for (coeffs, rel, b) in &rows {
            lp = lp.constrain(coeffs.clone(), *rel, *b);
        }
        match (solve_lp(&lp), oracle) {
            (Ok(sol), Some(best)) => {
                assert!((sol.objective - best).abs() <= 1e-7, "trial {trial}: {} vs {best}", sol.objective);
                checked += 1;
            }
            (Err(Error::Infeasible), None) => {}
            (got, want) => panic!("trial {trial}: solver {got:?}, enumeration {want:?}"),
        }
    }
    assert!(checked > 30, "only {checked} feasible instances");
}
