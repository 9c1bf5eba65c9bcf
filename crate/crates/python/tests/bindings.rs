//! Drive the bindings through an embedded interpreter.

use pyo3::ffi::c_str;
use pyo3::prelude::*;
use std::sync::Once;

fn python<F: FnOnce(Python<'_>)>(f: F) {
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        pyo3::append_to_inittab!(lipbatch_py);
        Python::initialize();
    });
    Python::attach(f);
}

use lipbatch_py::lipbatch_py;

fn run(py: Python<'_>, code: &std::ffi::CStr) {
    if let Err(e) = py.run(code, None, None) {
        e.display(py);
        panic!("python snippet failed");
    }
}

#[test]
fn gp_matches_the_core_crate() {
    python(|py| {
        run(
            py,
            c_str!(
                r#"
import math
import lipbatch_py as lb
assert abs(lb.eq_kernel([0.0], [0.3], gamma=5.0) - math.exp(-0.45)) < 1e-15
xs = [[0.0], [0.3], [0.7], [1.0]]
ys = [0.0, 1.0, -1.0, 0.5]
gp = lb.Gp(xs, ys, [0.0], [1.0], theta=1.0, gamma=5.0, noise_var=1e-6)
assert gp.hyperparameters == (1.0, 5.0, 1e-6)
assert len(gp) == 4 and gp.dim == 1
m, v = gp.predict([0.3])
assert abs(m - 1.0) < 1e-3 and 0.0 <= v < 1e-4, (m, v)
mean, cov = gp.gradient([0.5])
assert mean == gp.mean_grad([0.5]) and len(cov) == 1 and cov[0][0] > 0.0
assert gp.local_lipschitz([0.5]) == abs(mean[0])
assert gp.incumbent() == 1.0
"#
            ),
        );
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    python(|py| {
        run(
            py,
            c_str!(
                r#"
import lipbatch_py as lb
def raises(exc, f, *a, **k):
    try:
        f(*a, **k)
    except exc:
        return
    raise AssertionError(f"{f} did not raise {exc}")
raises(ValueError, lb.Gp, [[0.0]], [1.0], [1.0], [0.0])
raises(ValueError, lb.Gp, [[0.0]], [1.0], [0.0], [1.0], theta=-1.0)
raises(ValueError, lb.Benchmark, "nope")
raises(ValueError, lb.propose_batch, [[0.1]], [1.0], [0.0], [1.0], strategy="qei")
raises(ValueError, lb.run_bbo, lambda x: x[0], [0.0], [1.0], acquisition="ucb", transform="identity")
raises(RuntimeError, lb.run_bbo, lambda x: float("nan"), [0.0], [1.0], iterations=2)
raises(ZeroDivisionError, lb.run_bbo, lambda x: 1 / 0, [0.0], [1.0], iterations=2)
"#
            ),
        );
    });
}

#[test]
fn run_is_reproducible_and_respects_the_goal() {
    python(|py| {
        run(
            py,
            c_str!(
                r#"
import lipbatch_py as lb
b = lb.Benchmark("cosines")
assert b.goal == "max"
kw = dict(strategy="lp", batch_size=2, iterations=3, goal="max", seed=9, record_timing=False)
a = lb.run_bbo(b, b.lower, b.upper, **kw)
c = lb.run_bbo(b, b.lower, b.upper, **kw)
assert a == c
ys = [r["y"] for r in a["rows"]]
assert a["best"] == max(ys) and a["rows"][-1]["best_so_far"] == max(ys)
assert len(a["rows"]) == 5 + 3 * 2
"#
            ),
        );
    });
}
