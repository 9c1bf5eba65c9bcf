//! Space-filling and uniform point sets over a box.

use rand::Rng;
use rand::seq::SliceRandom;

use crate::gp::BoxDomain;

/// Latin hypercube sample of `n` points: every axis is cut into `n` equal
/// strata and each stratum holds exactly one point.
pub fn latin_hypercube<R: Rng + ?Sized>(domain: &BoxDomain, n: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let d = domain.dim();
    let mut points = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..d {
        perm.shuffle(rng);
        let (lo, hi) = (domain.lower()[k], domain.upper()[k]);
        for (i, p) in points.iter_mut().enumerate() {
            let u = (perm[i] as f64 + rng.random::<f64>()) / n as f64;
            p[k] = lo + u * (hi - lo);
        }
    }
    points
}

pub fn uniform_point<R: Rng + ?Sized>(domain: &BoxDomain, rng: &mut R) -> Vec<f64> {
    domain
        .lower()
        .iter()
        .zip(domain.upper())
        .map(|(&lo, &hi)| lo + rng.random::<f64>() * (hi - lo))
        .collect()
}
