import numpy as np
import pytest

from mse_adjust import _backend
from mse_adjust import _kernels_py

try:
    from mse_adjust import _kernels as compiled
except ImportError:
    compiled = None

needs_compiled = pytest.mark.skipif(compiled is None, reason="extension not built")


def random_problem(seed, n=200, k=3):
    rng = np.random.default_rng(seed)
    cov = rng.normal(size=(n, k))
    a = cov @ rng.normal(size=k) + rng.normal(size=n)
    y = 2.0 * a + cov @ rng.normal(size=k) + rng.normal(size=n)
    return np.ascontiguousarray(cov), a, y


def test_selected_backend_is_known():
    assert _backend.BACKEND in ("compiled", "python")
    assert "python" in _backend.available_backends()


@needs_compiled
@pytest.mark.parametrize("k", [0, 1, 4])
def test_single_fit_parity(k):
    cov, a, y = random_problem(3, n=150, k=max(k, 1))
    cov = cov[:, :k]
    t1, ry1, ra1, ok1 = _kernels_py.ols_tau_rss(cov, a, y)
    t2, ry2, ra2, ok2 = compiled.ols_tau_rss(cov, a, y)
    assert ok1 and ok2
    assert t1 == pytest.approx(t2, rel=1e-10)
    assert ry1 == pytest.approx(ry2, rel=1e-10)
    assert ra1 == pytest.approx(ra2, rel=1e-10)


@needs_compiled
def test_bootstrap_parity():
    cov, a, y = random_problem(11, n=120, k=2)
    rng = np.random.default_rng(4)
    idx = rng.integers(0, 120, size=(64, 120))
    counts = np.stack([np.bincount(row, minlength=120) for row in idx]).astype(float)
    t1, ok1 = _kernels_py.boot_taus(cov, a, y, counts)
    t2, ok2 = compiled.boot_taus(cov, a, y, counts)
    assert np.array_equal(ok1, ok2)
    assert np.allclose(t1[ok1], t2[ok2], rtol=1e-9)


@needs_compiled
def test_degenerate_input_flagged_by_both():
    n = 30
    a = np.ones(n)  # constant treatment: no residual variation
    y = np.arange(n, dtype=float)
    cov = np.empty((n, 0))
    _, _, _, ok_py = _kernels_py.ols_tau_rss(cov, a, y)
    _, _, _, ok_cy = compiled.ols_tau_rss(cov, a, y)
    assert not ok_py and not ok_cy

    counts = np.zeros((3, n))
    counts[:, 0] = n  # every resample repeats one row
    cov1 = np.ascontiguousarray(np.arange(n, dtype=float).reshape(n, 1))
    a2 = np.arange(n, dtype=float)
    _, okb_py = _kernels_py.boot_taus(cov1, a2, y, counts)
    _, okb_cy = compiled.boot_taus(cov1, a2, y, counts)
    assert not okb_py.any() and not okb_cy.any()
