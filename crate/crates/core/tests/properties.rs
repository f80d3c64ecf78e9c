use hyperdetect::detector::{build_linear_model, TestStatistic};
use hyperdetect::extraction::{match_endmembers, mves, vca};
use hyperdetect::gp::{gram_matrix, KernelSpec};
use hyperdetect::mixing::{
    degree_of_nonlinearity, generate_scene, material_library, mix, AbundanceMode, FamilyMix, MixingFamily,
    MixtureSpec, SceneConfig,
};
use hyperdetect::scene::{AbundanceVector, EndmemberMatrix};
use hyperdetect::unmix::{fcls, fcls_kkt_residual};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn endmembers(l: usize, r: usize) -> impl Strategy<Value = EndmemberMatrix> {
    prop::collection::vec(0.02f64..1.0, l * r)
        .prop_map(move |v| DMatrix::from_vec(l, r, v))
        .prop_filter("well conditioned", |m| {
            let s = m.clone().svd(false, false).singular_values;
            s.min() > 1e-3 * s.max()
        })
        .prop_map(|m| EndmemberMatrix::new(m).unwrap())
}

fn abundances(r: usize) -> impl Strategy<Value = AbundanceVector> {
    prop::collection::vec(0.001f64..1.0, r).prop_map(|w| AbundanceVector::normalized(&w).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn mixing_conserves_energy(
        (m, a) in (2usize..5).prop_flat_map(|r| (endmembers(30, r), abundances(r))),
        eta in 0.0f64..0.95,
        pnmm in any::<bool>(),
    ) {
        let spec = if pnmm { MixtureSpec::pnmm(eta, 3.0) } else { MixtureSpec::gbm(eta) }.unwrap();
        let px = mix(&m, &a, &spec).unwrap();
        let lin = &px.linear;
        let total = px.pixel();
        let rel = (total.norm_squared() - lin.norm_squared()).abs() / lin.norm_squared();
        prop_assert!(rel <= 1e-9, "energy drift {rel}");
        let measured = degree_of_nonlinearity(&(lin * px.k), &(&px.nonlinear * px.gamma)).unwrap();
        prop_assert!((measured - eta).abs() <= 1e-9, "eta {measured} vs {eta}");
    }

    #[test]
    fn gaussian_gram_is_symmetric_positive_definite(
        m in (2usize..5).prop_flat_map(|r| endmembers(20, r)),
        s in 0.05f64..5.0,
    ) {
        let k = gram_matrix(&KernelSpec::gaussian(s).unwrap(), m.matrix()).unwrap();
        prop_assert!((&k - k.transpose()).amax() == 0.0);
        prop_assert!(k.diagonal().iter().all(|d| (*d - 1.0).abs() < 1e-15));
        let eig = k.symmetric_eigenvalues();
        prop_assert!(eig.min() > -1e-10 * eig.max(), "min eigenvalue {}", eig.min());
    }

    #[test]
    fn projector_is_orthogonal_complement(m in (2usize..6).prop_flat_map(|r| endmembers(25, r))) {
        let lm = build_linear_model(m.matrix()).unwrap();
        let p = lm.projector();
        prop_assert!((&p * &p - &p).amax() < 1e-12);
        prop_assert!((&p - p.transpose()).amax() < 1e-12);
        prop_assert!((&p * m.matrix()).amax() < 1e-12);
        prop_assert!((p.trace() - lm.rank() as f64).abs() < 1e-10);
    }

    #[test]
    fn fcls_is_feasible_and_stationary(
        (m, r) in (2usize..6).prop_flat_map(|k| (endmembers(40, k), prop::collection::vec(0.0f64..1.2, 40))),
    ) {
        let r = DVector::from_vec(r);
        let a = fcls(&m, &r).unwrap();
        let w = a.weights();
        prop_assert!((w.sum() - 1.0).abs() <= 1e-9);
        prop_assert!(w.iter().all(|&v| v >= -1e-9));
        let kkt = fcls_kkt_residual(m.matrix(), &r, w);
        prop_assert!(kkt <= 1e-8, "kkt {kkt}");
    }

    #[test]
    fn statistic_stays_in_range(e_nl in 0.0f64..10.0, e_lin in 1e-9f64..10.0) {
        let t = TestStatistic::from_energies(e_nl, e_lin).unwrap();
        prop_assert!((0.0..=2.0).contains(&t.value));
    }
}

fn pure_pixel_scene(seed: u64) -> hyperdetect::scene::SceneImage {
    let m = material_library(60, 3).unwrap();
    let mut scene = generate_scene(&SceneConfig {
        pixels: 300,
        endmembers: m.clone(),
        mix: FamilyMix::linear_nonlinear(0.0, MixingFamily::Lmm),
        eta_d: 0.0,
        xi: 3.0,
        noise_variance: 0.0,
        abundance: AbundanceMode::Uniform,
        seed,
    })
    .unwrap()
    .pixels()
    .clone();
    for k in 0..3 {
        scene.set_column(k * 100, &m.matrix().column(k));
    }
    hyperdetect::scene::SceneImage::new(scene).unwrap()
}

/// Largest entrywise difference after pairing columns.
fn column_gap(a: &EndmemberMatrix, b: &EndmemberMatrix) -> f64 {
    let order = match_endmembers(a, b).unwrap().order;
    (a.permuted(&order).unwrap().matrix() - b.matrix()).amax()
}

#[test]
fn extraction_ignores_pixel_order() {
    let image = pure_pixel_scene(5);
    let n = image.pixel_count();
    let order: Vec<usize> = (0..n).map(|i| (i * 37 + 11) % n).collect();
    let shuffled = image.select(&order);

    let a = mves(&image, 3).unwrap().endmembers;
    let b = mves(&shuffled, 3).unwrap().endmembers;
    assert!(column_gap(&a, &b) < 1e-9);

    let a = vca(&image, 3, 9).unwrap();
    let b = vca(&shuffled, 3, 9).unwrap();
    assert!(column_gap(&a, &b) < 1e-12);
}

#[test]
fn extraction_follows_endmember_relabelling() {
    let m = material_library(60, 3).unwrap();
    let image = pure_pixel_scene(6);
    let est = mves(&image, 3).unwrap().endmembers;
    let base = match_endmembers(&est, &m).unwrap().order;
    for order in [[1, 2, 0], [2, 0, 1], [0, 2, 1]] {
        let permuted = m.permuted(&order).unwrap();
        let mm = match_endmembers(&est, &permuted).unwrap();
        assert!(mm.max_angle() < 1e-6);
        for k in 0..3 {
            assert_eq!(mm.order[k], base[order[k]]);
        }
    }
}
