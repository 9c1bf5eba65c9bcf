//! Property-based invariants.

use lipbatch::acquisition::{ei, log_transform, norm_cdf, transform, Transform};
use lipbatch::gp::{eq_kernel, BoxDomain, Dataset, GpPosterior, Hyperparams};
use lipbatch::penalization::PenalizerParams;
use proptest::prelude::*;

fn point(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, d)
}

fn hyper() -> impl Strategy<Value = Hyperparams> {
    (0.1..5.0f64, 0.05..10.0f64, 1e-8..1e-1f64).prop_map(|(t, g, n)| Hyperparams::new(t, g, n).unwrap())
}

proptest! {
    #[test]
    fn kernel_is_symmetric_and_bounded(a in point(3), b in point(3), h in hyper()) {
        let k = eq_kernel(&a, &b, &h);
        prop_assert_eq!(k, eq_kernel(&b, &a, &h));
        prop_assert!(k >= 0.0);
        prop_assert!(k <= h.theta);
        prop_assert_eq!(eq_kernel(&a, &a, &h), h.theta);
    }

    #[test]
    fn posterior_variance_is_non_negative_and_below_prior(
        xs in prop::collection::vec(point(2), 1..12),
        q in point(2),
        h in hyper(),
    ) {
        let domain = BoxDomain::cube(2, -3.0, 3.0).unwrap();
        let y = xs.iter().map(|p| p[0].sin() + p[1]).collect();
        let gp = GpPosterior::new(Dataset::new(xs, y, domain).unwrap(), h).unwrap();
        let (m, v) = gp.mean_var(&q);
        prop_assert!(m.is_finite());
        prop_assert!(v >= 0.0);
        prop_assert!(v <= h.theta * (1.0 + 1e-12));
    }

    #[test]
    fn penalizer_is_a_probability(
        mu in -5.0..5.0f64, sigma in 1e-3..5.0f64, l in 1e-3..100.0f64, m in -5.0..5.0f64, r in 0.0..10.0f64,
    ) {
        let p = PenalizerParams::new(vec![0.0], mu, sigma, l, m);
        let v = p.value(&[r]);
        prop_assert!((0.0..=1.0).contains(&v));
        prop_assert!(p.ln_value(&[r]) <= 0.0);
    }

    #[test]
    fn penalizer_monotone_in_distance_lipschitz_and_mean(
        mu in -3.0..3.0f64, sigma in 0.05..3.0f64, l in 0.1..20.0f64, m in -3.0..3.0f64,
        r in 0.0..3.0f64, dr in 0.0..1.0f64, dl in 0.0..5.0f64, dmu in 0.0..1.0f64,
    ) {
        let base = PenalizerParams::new(vec![0.0], mu, sigma, l, m);
        let v = base.value(&[r]);
        prop_assert!(base.value(&[r + dr]) >= v);
        prop_assert!(PenalizerParams::new(vec![0.0], mu, sigma, l + dl, m).value(&[r]) >= v);
        prop_assert!(PenalizerParams::new(vec![0.0], mu + dmu, sigma, l, m).value(&[r]) >= v);
        // same ordering in log space, which the maximizer works in
        prop_assert!(base.ln_value(&[r + dr]) >= base.ln_value(&[r]));
    }

    #[test]
    fn transforms_preserve_order(a in -50.0..50.0f64, b in -50.0..50.0f64) {
        prop_assume!(a < b);
        for t in [Transform::Softplus, Transform::Exp] {
            prop_assert!(transform(t, a) <= transform(t, b));
            prop_assert!(transform(t, a) > 0.0);
            prop_assert!(log_transform(t, a) < log_transform(t, b));
        }
    }

    #[test]
    fn transform_keeps_the_argmax(values in prop::collection::vec(-40.0..40.0f64, 2..30)) {
        let argmax = |f: &dyn Fn(f64) -> f64| {
            values.iter().enumerate().fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if f(v) > acc.1 { (i, f(v)) } else { acc }).0
        };
        let raw = argmax(&|v| v);
        prop_assert_eq!(argmax(&|v| transform(Transform::Softplus, v)), raw);
        prop_assert_eq!(argmax(&|v| log_transform(Transform::Softplus, v)), raw);
        prop_assert_eq!(argmax(&|v| transform(Transform::Exp, v)), raw);
    }

    #[test]
    fn ei_grows_with_uncertainty_and_mean(mu in -3.0..3.0f64, s in 1e-3..3.0f64, ds in 0.0..2.0f64, best in -3.0..3.0f64) {
        let e = ei(mu, s, best);
        prop_assert!(e >= 0.0);
        prop_assert!(ei(mu, s + ds, best) >= e - 1e-15);
        prop_assert!(ei(mu + ds, s, best) >= e - 1e-15);
        // bounded below by the plain improvement
        prop_assert!(e >= (mu - best).max(0.0) - 1e-12);
    }

    #[test]
    fn normal_cdf_symmetry(u in -10.0..10.0f64) {
        prop_assert!((norm_cdf(u) + norm_cdf(-u) - 1.0).abs() < 1e-15);
    }
}
