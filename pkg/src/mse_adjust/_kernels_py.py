"""Pure-numpy implementations of the inner-loop kernels.

Both backends expose the same two functions with identical semantics:

``ols_tau_rss``: intercept-included least squares of the outcome on
[1, treatment, covariates], returning the treatment coefficient, the
residual sum of squares of that regression, and the residual sum of squares
of the treatment on [1, covariates].

``boot_taus``: the treatment coefficient of the same regression under many
row-weightings at once (multinomial bootstrap counts), one result per row of
``counts``.

Everything is computed from Gram matrices: with M the Gram of [1, C] and
s_a, s_y the cross products, the projected-out quantities are
r_aa = a.a - s_a' M^-1 s_a (the treatment RSS), r_ay and r_yy likewise, and
tau = r_ay / r_aa, rss_y = r_yy - r_ay^2 / r_aa.
"""

from __future__ import annotations

import numpy as np

# A fit is flagged degenerate when the residual treatment variation is this
# small relative to the raw second moment (or the Gram factorization fails).
RANK_RTOL = 1e-12

BACKEND_NAME = "python"


def _assemble(cov: np.ndarray, a: np.ndarray, y: np.ndarray):
    n, k = cov.shape
    m = np.empty((k + 1, k + 1))
    m[0, 0] = n
    m[0, 1:] = cov.sum(axis=0)
    m[1:, 0] = m[0, 1:]
    m[1:, 1:] = cov.T @ cov
    sa = np.empty(k + 1)
    sa[0] = a.sum()
    sa[1:] = cov.T @ a
    sy = np.empty(k + 1)
    sy[0] = y.sum()
    sy[1:] = cov.T @ y
    return m, sa, sy


def ols_tau_rss(cov: np.ndarray, a: np.ndarray, y: np.ndarray):
    """Return (tau, rss_y, rss_a, ok) for the intercept-included fit."""
    cov = np.ascontiguousarray(cov, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    m, sa, sy = _assemble(cov, a, y)
    try:
        va = np.linalg.solve(m, sa)
        vy = np.linalg.solve(m, sy)
    except np.linalg.LinAlgError:
        return float("nan"), float("nan"), float("nan"), False
    saa = float(a @ a)
    r_aa = saa - float(sa @ va)
    r_ay = float(a @ y) - float(sy @ va)
    r_yy = float(y @ y) - float(sy @ vy)
    if not np.isfinite(r_aa) or r_aa <= RANK_RTOL * max(saa, 1.0):
        return float("nan"), float("nan"), float("nan"), False
    tau = r_ay / r_aa
    rss_y = max(r_yy - r_ay * r_ay / r_aa, 0.0)
    return float(tau), rss_y, max(r_aa, 0.0), True


def boot_taus(cov: np.ndarray, a: np.ndarray, y: np.ndarray, counts: np.ndarray):
    """Treatment coefficients under row weightings; (taus, ok) per resample."""
    cov = np.ascontiguousarray(cov, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    counts = np.ascontiguousarray(counts, dtype=np.float64)
    n, k = cov.shape
    nb = counts.shape[0]
    z = np.concatenate([cov, a[:, None], y[:, None]], axis=1)
    p = k + 2
    pair = (z[:, :, None] * z[:, None, :]).reshape(n, p * p)
    gram = (counts @ pair).reshape(nb, p, p)
    colsum = counts @ z
    wsum = counts.sum(axis=1)

    m = np.empty((nb, k + 1, k + 1))
    m[:, 0, 0] = wsum
    m[:, 0, 1:] = colsum[:, :k]
    m[:, 1:, 0] = colsum[:, :k]
    m[:, 1:, 1:] = gram[:, :k, :k]
    sa = np.concatenate([colsum[:, k : k + 1], gram[:, :k, k]], axis=1)
    sy = np.concatenate([colsum[:, k + 1 : k + 2], gram[:, :k, k + 1]], axis=1)
    saa = gram[:, k, k]
    say = gram[:, k, k + 1]

    taus = np.full(nb, np.nan)
    ok = np.zeros(nb, dtype=bool)
    try:
        va = np.linalg.solve(m, sa[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError:
        for b in range(nb):
            taus[b], _, _, good = _weighted_single(m[b], sa[b], sy[b], saa[b], say[b])
            ok[b] = good
        return taus, ok
    r_aa = saa - np.einsum("bi,bi->b", sa, va)
    r_ay = say - np.einsum("bi,bi->b", sy, va)
    good = np.isfinite(r_aa) & (r_aa > RANK_RTOL * np.maximum(saa, 1.0))
    taus[good] = r_ay[good] / r_aa[good]
    ok[:] = good
    return taus, ok


def _weighted_single(m, sa, sy, saa, say):
    try:
        va = np.linalg.solve(m, sa)
    except np.linalg.LinAlgError:
        return float("nan"), float("nan"), float("nan"), False
    r_aa = saa - float(sa @ va)
    r_ay = say - float(sy @ va)
    if not np.isfinite(r_aa) or r_aa <= RANK_RTOL * max(saa, 1.0):
        return float("nan"), float("nan"), float("nan"), False
    return r_ay / r_aa, float("nan"), r_aa, True
