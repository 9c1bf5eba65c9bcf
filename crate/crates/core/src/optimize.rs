//! Bounded local ascent routines shared by the GP fit and the acquisition
//! optimizers. Both maximize; the callback returns `(value, gradient)` and a
//! non-finite value marks an infeasible point.

#[derive(Debug, Clone, Copy)]
pub struct AscentOptions {
    pub max_iter: usize,
    /// Stop once the projected gradient norm falls below this.
    pub grad_tol: f64,
    /// Stop once an accepted step improves the value by less than this (relative).
    pub value_tol: f64,
}

impl Default for AscentOptions {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-6,
            value_tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone)]
pub struct AscentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((xi, &lo), &hi) in x.iter_mut().zip(lower).zip(upper) {
        *xi = xi.clamp(lo, hi);
    }
}

/// Gradient components that would push a variable through an active bound are zeroed.
fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&lo, &hi))| {
            if (xi <= lo && gi < 0.0) || (xi >= hi && gi > 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected gradient ascent with Armijo backtracking. The step length is
/// carried between iterations and doubled after every accepted step.
pub fn projected_gradient_ascent<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &AscentOptions,
) -> AscentResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return AscentResult { x, value: fx, iterations: 0 };
    }
    let diam = lower
        .iter()
        .zip(upper)
        .map(|(lo, hi)| (hi - lo) * (hi - lo))
        .sum::<f64>()
        .sqrt();
    let mut step = f64::NAN;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        let gnorm = norm(&pg);
        if !(gnorm > opts.grad_tol) {
            break;
        }
        if !step.is_finite() {
            step = 0.1 * diam / gnorm;
        }
        iterations += 1;
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&g).map(|(xi, gi)| xi + step * gi).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if norm(&moved) == 0.0 {
                break;
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft >= fx + 1e-4 * decrease {
                let gain = ft - fx;
                x = trial;
                fx = ft;
                g = gt;
                step *= 2.0;
                accepted = true;
                if gain <= opts.value_tol * (1.0 + fx.abs()) {
                    return AscentResult { x, value: fx, iterations };
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    AscentResult { x, value: fx, iterations }
}

/// Projected quasi-Newton ascent for small problems (the GP hyperparameters).
/// BFGS on the free variables; the inverse Hessian is reset whenever the
/// direction stops being an ascent direction.
pub fn projected_bfgs_ascent<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    opts: &AscentOptions,
) -> AscentResult
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() {
        return AscentResult { x, value: fx, iterations: 0 };
    }
    let identity = |n: usize| {
        let mut h = vec![vec![0.0; n]; n];
        for (i, row) in h.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        h
    };
    let mut h = identity(n);
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let pg = projected_gradient(&x, &g, lower, upper);
        if !(norm(&pg) > opts.grad_tol) {
            break;
        }
        iterations += 1;
        let free: Vec<bool> = pg.iter().map(|&v| v != 0.0).collect();
        let mut dir: Vec<f64> = (0..n)
            .map(|i| {
                if !free[i] {
                    return 0.0;
                }
                (0..n).filter(|&j| free[j]).map(|j| h[i][j] * g[j]).sum()
            })
            .collect();
        if dot(&dir, &pg) <= 0.0 {
            h = identity(n);
            dir = pg.clone();
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..50 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + t * di).collect();
            project(&mut trial, lower, upper);
            let moved: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            if norm(&moved) == 0.0 {
                break;
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && ft >= fx + 1e-4 * dot(&g, &moved) {
                accepted = Some((trial, ft, gt, moved));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, ft, gt, s)) = accepted else {
            if h != identity(n) {
                h = identity(n);
                continue;
            }
            break;
        };
        // minimizing -f: y = -(g_new - g_old)
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| b - a).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        let gain = ft - fx;
        x = trial;
        fx = ft;
        g = gt;
        if gain <= opts.value_tol * (1.0 + fx.abs()) {
            break;
        }
    }
    AscentResult { x, value: fx, iterations }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn neg_rosenbrock(x: &[f64]) -> (f64, Vec<f64>) {
        let (a, b) = (x[0], x[1]);
        let v = -((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2));
        let g = vec![
            2.0 * (1.0 - a) + 400.0 * a * (b - a * a),
            -200.0 * (b - a * a),
        ];
        (v, g)
    }

    #[test]
    fn bfgs_finds_rosenbrock_optimum() {
        let opts = AscentOptions { max_iter: 500, grad_tol: 1e-8, value_tol: 0.0 };
        let r = projected_bfgs_ascent(neg_rosenbrock, &[-1.2, 1.0], &[-2.0, -2.0], &[2.0, 2.0], &opts);
        assert!((r.x[0] - 1.0).abs() < 1e-4 && (r.x[1] - 1.0).abs() < 1e-4, "{:?}", r);
    }

    #[test]
    fn bound_constrained_quadratic() {
        // max -(x-3)^2 - (y+1)^2 on [0,1]^2 -> (1, 0)
        let f = |x: &[f64]| {
            (
                -(x[0] - 3.0).powi(2) - (x[1] + 1.0).powi(2),
                vec![-2.0 * (x[0] - 3.0), -2.0 * (x[1] + 1.0)],
            )
        };
        let opts = AscentOptions::default();
        for r in [
            projected_gradient_ascent(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &opts),
            projected_bfgs_ascent(f, &[0.5, 0.5], &[0.0, 0.0], &[1.0, 1.0], &opts),
        ] {
            assert!((r.x[0] - 1.0).abs() < 1e-9 && r.x[1].abs() < 1e-9, "{:?}", r);
        }
    }

    #[test]
    fn ascent_never_decreases_value() {
        let f = |x: &[f64]| ((3.0 * x[0]).sin() * x[1].cos(), vec![3.0 * (3.0 * x[0]).cos() * x[1].cos(), -(3.0 * x[0]).sin() * x[1].sin()]);
        for start in [[0.1, 0.2], [-1.0, 1.5], [2.0, -2.0]] {
            let v0 = f(&start).0;
            let r = projected_gradient_ascent(f, &start, &[-2.0, -2.0], &[2.0, 2.0], &AscentOptions::default());
            assert!(r.value >= v0);
        }
    }
}
