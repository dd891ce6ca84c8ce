"""Dense symmetric linear algebra and scalar special functions."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy import special

from .errors import ConvergenceError, InfeasibleError, NotPSDError, ValidationError

# eigenvalues in [-PSD_FAIL_RTOL * ||m||, 0) are treated as roundoff and clipped;
# below -PSD_FAIL_RTOL * ||m|| the input is rejected outright
PSD_FAIL_RTOL = 1e-6


class EigenPair(NamedTuple):
    value: float
    vector: NDArray[np.float64]


def as_symmetric(m: ArrayLike, name: str = "matrix") -> NDArray[np.float64]:
    """Return ``m`` as a float array, checking it is square and exactly symmetric.

    Tiny asymmetries from roundoff (relative 1e-12) are removed by averaging
    with the transpose; anything larger is an error.
    """
    a = np.array(m, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValidationError(f"{name} must be a non-empty square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise ValidationError(f"{name} is not symmetric")
    return 0.5 * (a + a.T)


def top_eigenpair(m: ArrayLike, tol: float = 1e-10) -> EigenPair:
    """Largest eigenvalue of a symmetric matrix and a unit eigenvector.

    Uses a full symmetric eigendecomposition, then checks the residual
    ``||m u - lam u|| <= tol * max(1, |lam|)``.
    """
    if tol <= 0:
        raise ValidationError("tol must be positive")
    a = as_symmetric(m)
    vals, vecs = np.linalg.eigh(a)
    lam = float(vals[-1])
    u = vecs[:, -1]
    u = u / np.linalg.norm(u)
    # deterministic sign: first non-negligible entry positive
    k = int(np.argmax(np.abs(u) > 1e-8))
    if u[k] < 0:
        u = -u
    resid = float(np.linalg.norm(a @ u - lam * u))
    if resid > tol * max(1.0, abs(lam)):
        raise ConvergenceError(
            f"eigensolver residual {resid:.3e} exceeds tolerance {tol:.1e}", residual=resid
        )
    return EigenPair(lam, u)


def lambda_max(m: ArrayLike) -> float:
    """Largest eigenvalue of a symmetric matrix (no residual check)."""
    a = np.asarray(m, dtype=float)
    return float(np.linalg.eigvalsh(0.5 * (a + a.T))[-1])


def _clipped_eigh(m: ArrayLike, name: str) -> tuple[NDArray, NDArray]:
    a = as_symmetric(m, name)
    vals, vecs = np.linalg.eigh(a)
    norm = float(np.max(np.abs(vals)))
    if vals[0] < -PSD_FAIL_RTOL * norm:
        raise NotPSDError(
            f"{name} is not positive semidefinite: min eigenvalue {vals[0]:.6g} "
            f"(norm {norm:.6g})"
        )
    return np.clip(vals, 0.0, None), vecs


def psd_sqrt(m: ArrayLike) -> NDArray[np.float64]:
    """Symmetric PSD square root, clipping roundoff-negative eigenvalues to zero."""
    vals, vecs = _clipped_eigh(m, "matrix")
    s = (vecs * np.sqrt(vals)) @ vecs.T
    return 0.5 * (s + s.T)


def psd_pinv_sqrt(m: ArrayLike, rtol: float = 1e-12) -> NDArray[np.float64]:
    """Pseudo-inverse of the PSD square root (eigenvalues below ``rtol*max`` dropped)."""
    vals, vecs = _clipped_eigh(m, "matrix")
    cut = rtol * max(float(vals[-1]), 0.0)
    inv = np.zeros_like(vals)
    keep = vals > cut
    inv[keep] = 1.0 / np.sqrt(vals[keep])
    return (vecs * inv) @ vecs.T


def project_capped_simplex(v: ArrayLike, cap: float) -> NDArray[np.float64]:
    """Euclidean projection onto ``{w : 0 <= w_t <= cap, sum(w) = 1}``.

    The projection is ``clip(v - theta, 0, cap)`` for the unique shift
    ``theta`` making the entries sum to one. The sum is piecewise linear and
    non-increasing in ``theta`` with breakpoints at ``v_t`` and ``v_t - cap``,
    so sorting the breakpoints locates the active segment exactly.
    """
    x = np.asarray(v, dtype=float).ravel()
    t = x.size
    if t == 0:
        raise ValidationError("cannot project an empty vector")
    if not cap > 0:
        raise ValidationError("cap must be positive")
    if cap * t < 1.0 - 1e-12:
        raise InfeasibleError(f"capped simplex is empty: cap*len(v) = {cap * t:.6g} < 1")
    cap = min(cap, 1.0)
    if cap * t <= 1.0 + 1e-12:
        return np.full(t, 1.0 / t)

    def total(theta: float) -> float:
        return float(np.clip(x - theta, 0.0, cap).sum())

    bps = np.unique(np.concatenate([x, x - cap]))
    sums = np.array([total(b) for b in bps])
    # sums is non-increasing along bps; find the segment where it crosses 1
    idx = int(np.searchsorted(-sums, -1.0, side="left"))
    if idx == 0:
        lo, hi = bps[0] - 1.0, bps[0]
    elif idx >= bps.size:
        lo, hi = bps[-1], bps[-1] + 1.0
    else:
        lo, hi = bps[idx - 1], bps[idx]
    s_lo, s_hi = total(lo), total(hi)
    if s_lo == s_hi:
        theta = lo
    else:
        theta = lo + (s_lo - 1.0) * (hi - lo) / (s_lo - s_hi)
    w = np.clip(x - theta, 0.0, cap)
    # distribute the last roundoff onto free coordinates
    free = (w > 0) & (w < cap)
    if free.any():
        w[free] += (1.0 - w.sum()) / free.sum()
    return w


def chi2_cdf(x: float, d: int) -> float:
    if x <= 0:
        return 0.0
    return float(special.gammainc(0.5 * d, 0.5 * x))


def chi2_pdf(x: float, d: int) -> float:
    if x <= 0:
        return 0.0
    k = 0.5 * d
    return math.exp((k - 1.0) * math.log(x) - 0.5 * x - k * math.log(2.0) - math.lgamma(k))


def chi2_inv_cdf(d: int, p: float, tol: float = 1e-12) -> float:
    """Quantile of the chi-square distribution with ``d`` degrees of freedom.

    Newton iteration on the regularized lower incomplete gamma function,
    started from the Wilson-Hilferty approximation and safeguarded by a
    bisection bracket.
    """
    if int(d) != d or d < 1:
        raise ValidationError("degrees of freedom must be a positive integer")
    if not 0.0 < p < 1.0:
        raise ValidationError(f"probability must lie in (0, 1), got {p!r}")
    d = int(d)
    z = float(special.ndtri(p))
    h = 2.0 / (9.0 * d)
    x = d * max(1.0 - h + z * math.sqrt(h), 1e-3) ** 3
    lo, hi = 0.0, max(2.0 * x, 1.0)
    while chi2_cdf(hi, d) < p:
        hi *= 2.0
    for _ in range(200):
        f = chi2_cdf(x, d) - p
        if abs(f) <= tol:
            return x
        if f > 0:
            hi = x
        else:
            lo = x
        dens = chi2_pdf(x, d)
        step = f / dens if dens > 0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        x = x_new
    raise ConvergenceError(f"chi2 quantile did not converge for d={d}, p={p}")
