"""Gram matrices encoding the class of admissible conditional-mean vectors."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import NotPSDError, ValidationError
from .numerics import as_symmetric

KERNEL_KINDS = ("linear", "polynomial", "gaussian", "singleton", "cr_reference")
OMEGA_KINDS = ("identity", "inverse_covariance", "explicit")


@dataclass(frozen=True)
class CovariateMatrix:
    """``n x d`` pre-treatment covariates with column names."""

    x: NDArray[np.float64]
    column_names: tuple[str, ...] = ()

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2:
            raise ValidationError("covariates must be a 2-d array")
        n, d = x.shape
        if n < 4 or n % 2:
            raise ValidationError(f"number of units must be even and at least 4, got {n}")
        if d < 1:
            raise ValidationError("need at least one covariate column")
        if not np.all(np.isfinite(x)):
            raise ValidationError("covariates contain missing or non-finite entries")
        names = tuple(self.column_names) or tuple(f"x{j + 1}" for j in range(d))
        if len(names) != d:
            raise ValidationError(f"{len(names)} column names for {d} columns")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class OmegaSpec:
    kind: str = "identity"
    matrix: NDArray[np.float64] | None = None

    def __post_init__(self):
        if self.kind not in OMEGA_KINDS:
            raise ValidationError(f"unknown omega kind {self.kind!r}; expected one of {OMEGA_KINDS}")
        if self.kind == "explicit":
            if self.matrix is None:
                raise ValidationError("explicit omega needs a matrix")
            m = as_symmetric(np.atleast_2d(np.asarray(self.matrix, dtype=float)), "omega")
            ev = np.linalg.eigvalsh(m)
            if ev[0] <= 1e-12 * np.trace(m) / m.shape[0]:
                raise ValidationError("explicit omega must be positive definite")
            object.__setattr__(self, "matrix", m)
        elif self.matrix is not None:
            raise ValidationError(f"omega kind {self.kind!r} does not take a matrix")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "linear"
    omega: OmegaSpec = field(default_factory=OmegaSpec)
    degree: int = 2
    mu0: NDArray[np.float64] | None = None
    ridge: float = 0.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValidationError(f"unknown kernel kind {self.kind!r}; expected one of {KERNEL_KINDS}")
        if not self.ridge >= 0:
            raise ValidationError("ridge must be nonnegative")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValidationError("polynomial degree must be a positive integer")
        if self.kind == "singleton":
            if self.mu0 is None:
                raise ValidationError("singleton kernel needs mu0")
            object.__setattr__(self, "mu0", np.asarray(self.mu0, dtype=float).ravel())


@dataclass(frozen=True)
class GramMatrix:
    k: NDArray[np.float64]
    spec: KernelSpec

    @property
    def n(self) -> int:
        return self.k.shape[0]


def resolve_omega(spec: OmegaSpec, x: CovariateMatrix) -> NDArray[np.float64]:
    """Concrete ``d x d`` scaling matrix for ``spec`` given the covariates."""
    d = x.d
    if spec.kind == "identity":
        return np.eye(d)
    if spec.kind == "explicit":
        if spec.matrix.shape != (d, d):
            raise ValidationError(f"omega is {spec.matrix.shape}, covariates have d={d}")
        return spec.matrix.copy()
    cov = np.atleast_2d(np.cov(x.x, rowvar=False, ddof=1))
    cond = np.linalg.cond(cov)
    if not np.isfinite(cond) or cond >= 1e12:
        raise ValidationError(
            "sample covariance is singular (condition number "
            f"{cond:.3g}); use omega kind 'identity' or an explicit ridge-regularized matrix"
        )
    inv = np.linalg.inv(cov)
    return 0.5 * (inv + inv.T)


def _check_psd(k: NDArray, label: str) -> None:
    n = k.shape[0]
    tr = float(np.trace(k))
    lo = float(np.linalg.eigvalsh(k)[0])
    if lo < -1e-8 * max(tr / n, np.finfo(float).tiny):
        raise NotPSDError(f"{label} Gram matrix has eigenvalue {lo:.3g}")


def build_gram(x: CovariateMatrix | None, spec: KernelSpec, n: int | None = None) -> GramMatrix:
    """Gram matrix ``K_ij = kernel(X_i, X_j)`` plus ``ridge * I``.

    ``singleton`` and ``cr_reference`` kernels ignore the covariates; for those
    ``x`` may be ``None`` provided ``n`` is given (or implied by ``mu0``).
    """
    if x is not None:
        n = x.n
    elif spec.kind == "singleton" and n is None:
        n = spec.mu0.size
    if n is None:
        raise ValidationError(f"{spec.kind} kernel needs covariates")

    if spec.kind in ("linear", "polynomial", "gaussian"):
        if x is None:
            raise ValidationError(f"{spec.kind} kernel needs covariates")
        omega = resolve_omega(spec.omega, x)
        if spec.kind == "gaussian":
            diff = x.x[:, None, :] - x.x[None, :, :]
            k = np.exp(-np.einsum("ijk,kl,ijl->ij", diff, omega, diff))
        else:
            k = x.x @ omega @ x.x.T
            if spec.kind == "polynomial":
                k = (1.0 + k) ** int(spec.degree)
    elif spec.kind == "singleton":
        mu = spec.mu0
        if mu.size != n:
            raise ValidationError(f"mu0 has length {mu.size}, expected {n}")
        mu = mu - mu.mean()
        k = np.outer(mu, mu)
    else:
        k = (n - 1) / n * np.eye(n)

    k = 0.5 * (k + k.T)
    if spec.ridge > 0:
        k = k + spec.ridge * np.eye(n)
    _check_psd(k, spec.kind)
    k.setflags(write=False)
    return GramMatrix(k, spec)


def gram_from_matrix(k: ArrayLike) -> GramMatrix:
    """Wrap an arbitrary PSD matrix (tests, user-supplied Grams)."""
    m = as_symmetric(k, "gram")
    _check_psd(m, "explicit")
    m.setflags(write=False)
    return GramMatrix(m, KernelSpec(kind="linear"))


def cr_reference(n: int) -> GramMatrix:
    """Gram matrix whose class equals the complete-randomization unit ball."""
    return build_gram(None, KernelSpec(kind="cr_reference"), n=n)


def singleton(mu0: ArrayLike, ridge: float = 0.0) -> GramMatrix:
    return build_gram(None, KernelSpec(kind="singleton", mu0=np.asarray(mu0, float), ridge=ridge))


# --------------------------------------------------------------------------- I/O


def read_covariates_csv(path: str | Path) -> CovariateMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty covariate file")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        x = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric covariate entry ({exc})") from None
    if x.ndim != 2 or x.shape[1] != len(header):
        raise ValidationError(f"{path}: ragged rows or header/column mismatch")
    return CovariateMatrix(x, tuple(h.strip() for h in header))


def write_covariates_csv(cov: CovariateMatrix, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(cov.column_names)
    for row in cov.x:
        w.writerow([repr(float(v)) for v in row])


def _read_vector(path: str | Path) -> NDArray[np.float64]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r]
    try:
        float(rows[0][0])
    except ValueError:
        rows = rows[1:]
    return np.array([float(r[0]) for r in rows])


def kernel_spec_from_dict(cfg: dict[str, Any], base_dir: str | Path = ".") -> KernelSpec:
    """Build a :class:`KernelSpec` from a config block.

    Keys: ``kind``, ``omega`` (string or ``{kind, matrix}``), ``degree``,
    ``mu0`` (inline list) or ``mu0_file``, ``ridge``.
    """
    om = cfg.get("omega", "identity")
    if isinstance(om, str):
        om = {"kind": om}
    matrix = om.get("matrix")
    omega = OmegaSpec(om.get("kind", "identity"), None if matrix is None else np.asarray(matrix, float))
    mu0: Sequence[float] | None = cfg.get("mu0")
    if mu0 is None and cfg.get("mu0_file"):
        mu0 = _read_vector(Path(base_dir) / cfg["mu0_file"])
    return KernelSpec(
        kind=cfg.get("kind", "linear"),
        omega=omega,
        degree=int(cfg.get("degree", 2)),
        mu0=None if mu0 is None else np.asarray(mu0, float),
        ridge=float(cfg.get("ridge", 0.0)),
    )
