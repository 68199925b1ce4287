//! Property tests for the formula layer: smoothing invariants, neighborhood
//! geometry, projections, and the file format round trip.

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use lpreg::matrix::{self, CsrMatrix, Matrix};
use lpreg::problem::project_to_rowspace;
use lpreg::{homotopy, smoothing, LpProblem};

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.25), Just(1.5), Just(2.0), Just(3.0), Just(4.0), Just(8.0)]
}

proptest! {
    #[test]
    fn smoothing_is_c1_across_the_kink(p in exponent(), t in 1e-3f64..1e3) {
        let eps = 1e-9 * t;
        let inner = smoothing::eval(t, p, t - eps);
        let outer = smoothing::eval(t, p, t + eps);
        let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + a.abs().max(b.abs()));
        prop_assert!(rel(inner.value, outer.value) < 1e-7);
        prop_assert!(rel(inner.first, outer.first) < 1e-7);
    }

    #[test]
    fn smoothing_brackets_the_power(p in exponent(), t in 1e-2f64..1e2, frac in 0.0f64..4.0) {
        let s = frac * t;
        let value = smoothing::eval(t, p, s).value;
        let power = s.abs().powf(p);
        let slack = 1e-11 * (1.0 + value.abs() + power.abs());
        let gap = smoothing::uniform_gap(t, p);
        prop_assert!((value - power).abs() <= gap + slack);
        if p >= 2.0 {
            prop_assert!(value >= power - slack);
        } else {
            prop_assert!(value <= power + slack);
        }
    }

    #[test]
    fn extension_is_convex_and_matches_inside(
        p in exponent(),
        t in 0.05f64..20.0,
        lo in 0.0f64..3.0,
        width in 0.0f64..3.0,
        s in -8.0f64..8.0,
    ) {
        let hi = lo + width;
        let ext = smoothing::eval_extended(t, p, lo, hi, s).unwrap();
        prop_assert!(ext.second >= 0.0, "second derivative {} at s={s}", ext.second);
        if s >= lo && s <= hi {
            let plain = smoothing::eval(t, p, s);
            prop_assert_eq!(plain.value, ext.value);
            prop_assert_eq!(plain.first, ext.first);
            prop_assert_eq!(plain.second, ext.second);
        }
    }

    #[test]
    fn intervals_always_bracket_the_reference(
        p in exponent(),
        gamma in 0.0f64..10.0,
        coords in prop::collection::vec(-6.0f64..6.0, 1..8),
    ) {
        let s = DVector::from_vec(coords);
        for (&(lo, hi), &si) in smoothing::build_intervals(&s, gamma, p).iter().zip(s.iter()) {
            prop_assert!(0.0 <= lo && lo <= hi + 1e-15);
            prop_assert!(lo <= si.abs() + 1e-12 && si.abs() <= hi + 1e-12);
        }
    }

    #[test]
    fn neighborhood_contains_self_and_is_symmetric(
        p in exponent(),
        gamma in 0.0f64..5.0,
        coords in prop::collection::vec(-4.0f64..4.0, 1..6),
        other in prop::collection::vec(-4.0f64..4.0, 1..6),
    ) {
        let s = DVector::from_vec(coords);
        prop_assert!(homotopy::in_neighborhood(&s, &s, gamma, p).unwrap());
        if other.len() == s.len() {
            let o = DVector::from_vec(other);
            let ab = homotopy::in_neighborhood(&o, &s, gamma, p).unwrap();
            let ba = homotopy::in_neighborhood(&s, &o, gamma, p).unwrap();
            prop_assert_eq!(ab, ba);
        }
    }

    #[test]
    fn projection_is_idempotent_and_contractive(
        rows in 2usize..8,
        cols in 1usize..5,
        seed in 0u64..500,
        scale in 0.1f64..5.0,
    ) {
        let n = rows.max(cols);
        let prob = LpProblem::generate_random(n, cols, 2.0, 1.0, seed).unwrap();
        let v = DVector::from_fn(cols, |i, _| scale * ((i * 7 + 1) as f64 - 2.0));
        let once = project_to_rowspace(prob.matrix(), &v);
        let twice = project_to_rowspace(prob.matrix(), &once);
        prop_assert!((&twice - &once).norm() <= 1e-10 * (1.0 + once.norm()));
        prop_assert!(once.norm() <= v.norm() * (1.0 + 1e-12));
    }

    #[test]
    fn residual_power_term_is_nonnegative(
        seed in 0u64..200,
        p in exponent(),
        coords in prop::collection::vec(-3.0f64..3.0, 3),
    ) {
        let prob = LpProblem::generate_random(9, 3, p, 1.0, seed).unwrap();
        let x = DVector::from_vec(coords);
        prop_assert!(prob.objective(&x) >= prob.c().dot(&x) - 1e-12);
    }

    #[test]
    fn matrix_market_roundtrip_is_entry_exact(
        entries in prop::collection::vec((0usize..12, 0usize..9, -1e6f64..1e6), 0..14),
    ) {
        let csr = CsrMatrix::from_triplets(12, 9, entries);
        let original = Matrix::Sparse(csr);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roundtrip.mtx");
        matrix::write_matrix_market(&path, &original).unwrap();
        let back = matrix::read_matrix_market(&path).unwrap();
        prop_assert_eq!(back.to_dense(), original.to_dense());
    }

    #[test]
    fn termination_radius_is_monotone(
        eps in 1e-9f64..1e-2,
        n in 1usize..5000,
        p in exponent(),
    ) {
        let base = homotopy::termination_t(eps, n, p);
        prop_assert!(homotopy::termination_t(eps, n * 2, p) < base);
        prop_assert!(homotopy::termination_t(eps * 2.0, n, p) > base);
    }
}

#[test]
fn coordinatewise_curvature_sandwich_inside_the_band() {
    // for residuals whose |.|^{p/2} value stays within gamma of the
    // reference, the extended loss curvature at radius (1-h)t lies between
    // the phase diagonal and kappa times it, coordinate by coordinate
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
    for &p in &[1.5f64, 3.0, 4.0, 8.0] {
        let h = homotopy::phase_step(p);
        let n = 10usize;
        let t = 1.3f64;
        let s_ref = DVector::from_fn(n, |i, _| (i as f64 * 0.6 - 2.0) * t);
        let gamma = homotopy::gamma(t, p, h, n).unwrap();
        let kappa = homotopy::kappa(p, h, n);
        let d = homotopy::diag_dt(&s_ref, t, p, gamma);
        let intervals = smoothing::build_intervals(&s_ref, gamma, p);
        let loss = smoothing::SmoothedLoss::with_intervals(t, p, intervals).unwrap();
        for _ in 0..250 {
            let i = rng.random_range(0..n);
            let m_ref = s_ref[i].abs().powf(0.5 * p);
            let band = (m_ref - gamma).max(0.0)..=(m_ref + gamma);
            let m = rng.random_range(band);
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let s = sign * m.powf(2.0 / p);
            let second = loss.tilde_coord(h, i, s).second;
            assert!(
                second >= d[i] * (1.0 - 1e-9),
                "p={p}: curvature {second} below D_i={} at s={s}",
                d[i]
            );
            assert!(
                second <= kappa * d[i] * (1.0 + 1e-9),
                "p={p}: curvature {second} above kappa D_i={} at s={s}",
                kappa * d[i]
            );
        }
    }
}

#[test]
fn path_velocity_matches_the_finite_difference_oracle() {
    // 1-D instance whose path is computable by bisection at every radius
    let prob = LpProblem::new(
        Matrix::Dense(DMatrix::from_element(1, 1, 1.0)),
        DVector::from_vec(vec![1.0]),
        DVector::from_vec(vec![0.1]),
        4.0,
    )
    .unwrap();
    // in the quadratic region the path moves; compare against central
    // differences of the bisection path
    for &t in &[0.5f64, 0.8, 1.5] {
        let x = lpreg::validation::smoothed_path_point_1d(&prob, t).unwrap();
        let v = homotopy::path_velocity(&prob, t, &DVector::from_element(1, x));
        let delta = 1e-4;
        let x_hi = lpreg::validation::smoothed_path_point_1d(&prob, t * (1.0 + delta)).unwrap();
        let x_lo = lpreg::validation::smoothed_path_point_1d(&prob, t * (1.0 - delta)).unwrap();
        let fd = (x_hi - x_lo) / (2.0 * t * delta);
        assert!(
            (v[0] - fd).abs() <= 1e-3 * (1.0 + fd.abs()),
            "t={t}: analytic {} vs fd {fd}",
            v[0]
        );
    }
}

#[test]
fn vector_file_roundtrip_is_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("v.txt");
    let v = DVector::from_vec(vec![1.0, -2.5e-17, 0.1, 123456.789]);
    matrix::write_vector(&path, &v).unwrap();
    let back = matrix::read_vector(&path).unwrap();
    assert_eq!(v, back);
}

#[test]
fn objective_matches_extended_precision_summation() {
    // the crate sums |s_i|^p in ascending row order; compare against a
    // Kahan-compensated sum of the same terms
    let prob = LpProblem::generate_random(500, 8, 3.0, 1.0, 77).unwrap();
    let x = DVector::from_fn(8, |i, _| ((i as f64) - 3.5) * 0.25);
    let s = prob.matrix().matvec(&x) - prob.b();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 0..s.len() {
        let term = s[i].abs().powf(prob.p());
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    let expected = prob.c().dot(&x) + sum;
    let got = prob.objective(&x);
    assert!((got - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
}

#[test]
fn dense_and_sparse_storage_agree_on_the_objective() {
    let sp = LpProblem::generate_random(64, 6, 2.5, 0.2, 5).unwrap();
    assert!(sp.matrix().is_sparse());
    let de = LpProblem::new(
        Matrix::Dense(sp.matrix().to_dense()),
        sp.b().clone(),
        sp.c().clone(),
        sp.p(),
    )
    .unwrap();
    for k in 0..20 {
        let x = DVector::from_fn(6, |i, _| ((i + k) as f64 * 0.37).sin());
        let (a, b) = (sp.objective(&x), de.objective(&x));
        assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs())));
    }
}
