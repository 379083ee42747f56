import subprocess
import sys

import numpy as np
import pytest

from negsamp import _kernels_py

try:
    from negsamp import _core
except ImportError:
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled core not built")


def _random_problem(rng, n=500, d=4):
    x = rng.normal(size=(n, d))
    y = (rng.random(n) < 0.3).astype(np.int8)
    alpha = rng.normal()
    beta = rng.normal(size=d)
    w = rng.uniform(0.5, 20.0, size=n)
    l = rng.normal(size=n)
    return x, y, alpha, beta, w, l


@needs_core
def test_backends_agree_on_elementwise_kernels():
    rng = np.random.default_rng(0)
    g = np.concatenate([rng.uniform(-800, 800, 4000), [0.0, -0.0, 1e-9, 36.7, -36.7]])
    np.testing.assert_allclose(_core.sigmoid(g), _kernels_py.sigmoid(g), rtol=1e-14, atol=0)
    np.testing.assert_allclose(_core.log1pexp(g), _kernels_py.log1pexp(g), rtol=1e-13, atol=1e-300)


@needs_core
def test_backends_agree_on_objective_gradient_information():
    rng = np.random.default_rng(1)
    for _ in range(5):
        x, y, alpha, beta, w, l = _random_problem(rng)
        oc, gc, hc = _core.logistic_obj_grad_hess(x, y, alpha, beta, w, l)
        op, gp, hp = _kernels_py.logistic_obj_grad_hess(x, y, alpha, beta, w, l)
        assert oc == pytest.approx(op, rel=1e-12)
        np.testing.assert_allclose(gc, gp, rtol=1e-10, atol=1e-9)
        np.testing.assert_allclose(hc, hp, rtol=1e-10, atol=1e-9)


@needs_core
def test_backends_agree_on_weighted_gram():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(300, 3))
    w = rng.uniform(0.0, 5.0, size=300)
    np.testing.assert_allclose(
        _core.weighted_gram(x, w), _kernels_py.weighted_gram(x, w), rtol=1e-12, atol=1e-10
    )


def test_sigmoid_saturates_cleanly():
    g = np.array([-1000.0, -40.0, 0.0, 40.0, 1000.0])
    p = _kernels_py.sigmoid(g)
    assert np.all(np.isfinite(p))
    assert p[0] >= 0.0 and p[-1] <= 1.0
    assert p[2] == 0.5


def test_log1pexp_tails():
    g = np.array([-800.0, -50.0, 0.0, 50.0, 800.0])
    v = _kernels_py.log1pexp(g)
    assert np.all(np.isfinite(v))
    assert v[2] == pytest.approx(np.log(2.0), rel=1e-15)
    assert v[3] == pytest.approx(50.0, rel=1e-15)
    assert v[4] == 800.0
    assert v[0] == pytest.approx(np.exp(-800.0), abs=1e-300)


def test_gradient_matches_finite_differences_python_backend():
    rng = np.random.default_rng(3)
    x, y, alpha, beta, w, l = _random_problem(rng, n=120, d=3)

    def obj(t):
        return _kernels_py.logistic_obj_grad_hess(x, y, t[0], t[1:], w, l)[0]

    t0 = np.concatenate([[alpha], beta])
    _, grad, _ = _kernels_py.logistic_obj_grad_hess(x, y, alpha, beta, w, l)
    h = 1e-6
    for k in range(t0.size):
        e = np.zeros_like(t0)
        e[k] = h
        fd = (obj(t0 + e) - obj(t0 - e)) / (2 * h)
        assert grad[k] == pytest.approx(fd, rel=2e-6, abs=1e-7)


def test_weighted_gram_equals_direct_sum():
    rng = np.random.default_rng(4)
    x = rng.normal(size=(50, 2))
    w = rng.uniform(0, 3, size=50)
    aug = np.hstack([np.ones((50, 1)), x])
    direct = aug.T @ (aug * w[:, None])
    np.testing.assert_allclose(_kernels_py.weighted_gram(x, w), direct, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("forced", ["python", "c"])
def test_backend_env_override(forced):
    if forced == "c" and _core is None:
        pytest.skip("compiled core not built")
    code = "import negsamp; print(negsamp.BACKEND)"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "NEGSAMP_BACKEND": forced},
    )
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == forced


def test_backend_env_rejects_unknown_value():
    code = "import negsamp"
    out = subprocess.run(
        [sys.executable, "-c", code],
        capture_output=True,
        text=True,
        env={"PATH": "/usr/bin:/bin", "NEGSAMP_BACKEND": "fortran"},
    )
    assert out.returncode != 0
    assert "NEGSAMP_BACKEND" in out.stderr or "fortran" in out.stderr
