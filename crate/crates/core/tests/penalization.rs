//! Local penalizers against Monte-Carlo and finite-difference oracles, and
//! the penalized acquisition maximizer.

mod common;

use common::{central_diff, distance, penalizer_diff, rel_vec_err};
use lipbatch::acquisition::{Acquisition, AcquisitionSpec, Transform};
use lipbatch::design::{latin_hypercube, uniform_point};
use lipbatch::gp::{fit_gp, BoxDomain, Dataset};
use lipbatch::penalization::{maximize_penalized, penalized_value, MaximizeOptions, PenalizedAcquisition, PenalizerParams, L_FLOOR, SIGMA_FLOOR};
use lipbatch::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

#[test]
fn value_is_exclusion_probability() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..10 {
        let (l, m, mu, sigma, d) = (rng.random_range(0.5..10.0), rng.random_range(-1.0..1.0), rng.random_range(-2.0..1.0), rng.random_range(0.05..1.0), rng.random_range(0.0..1.0));
        let normal = Normal::new(mu, sigma).unwrap();
        let n = 200_000;
        let hits = (0..n).filter(|_| (m - normal.sample(&mut rng)) / l <= d).count();
        let p = PenalizerParams::new(vec![0.0, 0.0], mu, sigma, l, m);
        // distance enters only through its norm
        let x = [d * 0.6, d * 0.8];
        assert!((p.value(&x) - hits as f64 / n as f64).abs() < 5e-3);
    }
}

#[test]
fn reference_points() {
    // z = (L r - M + mu) / (sqrt(2) sigma); at r = (M - mu)/L the value is 1/2
    let p = PenalizerParams::new(vec![1.0], 0.0, 0.5, 4.0, 1.0);
    assert!((p.value(&[1.25]) - 0.5).abs() < 1e-15);
    assert!((p.exclusion_radius() - 0.25).abs() < 1e-15);
    // one sigma beyond the radius: Phi(1)
    assert!((p.value(&[1.375]) - 0.841_344_746_068_543).abs() < 1e-12);
    assert!((p.ln_value(&[1.375]) - 0.841_344_746_068_543f64.ln()).abs() < 1e-12);
}

#[test]
fn floors_apply() {
    let p = PenalizerParams::new(vec![0.0], 0.0, 0.0, 0.0, 1.0);
    assert_eq!(p.sigma_c(), SIGMA_FLOOR);
    assert_eq!(p.lipschitz(), L_FLOOR);
    let p = PenalizerParams::new(vec![0.0], 0.0, f64::NAN, f64::NAN, 1.0);
    assert_eq!(p.sigma_c(), SIGMA_FLOOR);
    assert_eq!(p.lipschitz(), L_FLOOR);
}

#[test]
fn log_value_survives_deep_tails() {
    // value underflows to zero but its logarithm stays finite and ordered
    let p = PenalizerParams::new(vec![0.0], -50.0, 0.1, 1.0, 0.0);
    assert_eq!(p.value(&[0.0]), 0.0);
    let (a, b) = (p.ln_value(&[0.0]), p.ln_value(&[1.0]));
    assert!(a.is_finite() && b.is_finite() && a < b);
    // asymptotically ln Phi(-w) ~ -w^2/2 - ln(w sqrt(2 pi))
    let w: f64 = 50.0 / 0.1;
    let asym = -0.5 * w * w - (w * (2.0 * std::f64::consts::PI).sqrt()).ln();
    assert!((a - asym).abs() / asym.abs() < 1e-9);
}

#[test]
fn gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..200 {
        let d = rng.random_range(1..=4);
        let center: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        let p = PenalizerParams::new(center.clone(), rng.random_range(-1.0..1.0), rng.random_range(0.05..1.0), rng.random_range(0.5..20.0), rng.random_range(-1.0..1.0));
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        if distance(&x, &center) < 1e-4 {
            continue;
        }
        assert!(rel_vec_err(&p.grad(&x), &penalizer_diff(&p, &x, 1e-7), 1e-10) < 1e-5);
        // ln phi is smooth and of moderate size, plain differences suffice
        let fd = central_diff(|q| p.ln_value(q), &x, 1e-6);
        assert!(rel_vec_err(&p.ln_grad(&x), &fd, 1e-8) < 1e-5, "{p:?} x={x:?} z={} {:?} vs {fd:?}", common::penalizer_z(&p, &x), p.ln_grad(&x));
    }
}

fn fitted_gp(seed: u64) -> lipbatch::GpPosterior {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let domain = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    let x = latin_hypercube(&domain, 12, &mut rng);
    let y = x.iter().map(|p| common::test_surface(p)).collect();
    fit_gp(&Dataset::new(x, y, domain).unwrap(), 5, &mut rng).unwrap()
}

#[test]
fn penalized_product_matches_log_form() {
    let gp = fitted_gp(23);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let acq = Acquisition::new(&gp, AcquisitionSpec::ucb(1.5).unwrap());
    let pens: Vec<PenalizerParams> = (0..3)
        .map(|_| {
            let c = uniform_point(gp.domain(), &mut rng);
            let (mu, var) = gp.mean_var(&c);
            PenalizerParams::new(c, mu, var.sqrt(), 3.0, gp.dataset().best_y())
        })
        .collect();
    let pa = PenalizedAcquisition::with_penalizers(acq, pens.clone());
    for _ in 0..100 {
        let x = uniform_point(gp.domain(), &mut rng);
        let direct = acq.transformed(&x) * pens.iter().map(|p| p.value(&x)).product::<f64>();
        assert!((penalized_value(&pa, &x) - direct).abs() <= 1e-12 * direct.abs().max(1e-300));
        if direct > 1e-300 {
            assert!((pa.log_value(&x) - direct.ln()).abs() < 1e-9);
        }
        let (v, g) = pa.log_value_grad(&x).unwrap();
        assert_eq!(v, pa.log_value(&x));
        assert!(rel_vec_err(&g, &central_diff(|q| pa.log_value(q), &x, 1e-6), 1e-8) < 1e-5);
    }
}

#[test]
fn identity_transform_rejects_non_positive_values() {
    let gp = fitted_gp(25);
    // far above the incumbent's reach: EI underflows to zero
    let acq = Acquisition::with_incumbent(&gp, AcquisitionSpec::ei(), 1e6);
    assert_eq!(acq.spec().transform(), Transform::Identity);
    let pa = PenalizedAcquisition::new(acq);
    assert!(matches!(pa.log_grad(&[0.5, 0.5]), Err(Error::NonPositiveValue(_))));
    assert_eq!(pa.log_value(&[0.5, 0.5]), f64::NEG_INFINITY);
}

#[test]
fn maximizer_finds_unpenalized_optimum_and_respects_penalty() {
    let gp = fitted_gp(26);
    let domain = gp.domain().clone();
    let spec = AcquisitionSpec::ucb(1.0).unwrap();
    let acq = Acquisition::new(&gp, spec);
    let mut rng = ChaCha8Rng::seed_from_u64(27);

    // dense grid oracle for the unpenalized acquisition
    let (grid_best, _) = common::grid_max_2d(|p| acq.value(p), &domain, 401);
    let x1 = maximize_penalized(&PenalizedAcquisition::new(acq), &domain, 10, &mut rng);
    assert!(domain.contains(&x1));
    assert!(acq.value(&x1) >= grid_best - 1e-6, "{} vs grid {}", acq.value(&x1), grid_best);

    // a hard penalizer at the optimum pushes the next point out of its ball
    let (mu, var) = gp.mean_var(&x1);
    let p = PenalizerParams::new(x1.clone(), mu, var.sqrt().max(1e-3), 1.0, mu + 0.1);
    let radius = p.exclusion_radius();
    let pa = PenalizedAcquisition::with_penalizers(acq, vec![p]);
    let x2 = pa.maximize(&domain, &MaximizeOptions::default(), &mut rng).x;
    assert!(distance(&x1, &x2) > 0.5 * radius, "moved {} of radius {}", distance(&x1, &x2), radius);
}
