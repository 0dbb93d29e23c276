"""Estimation primitives: uncentered variance, OLS, MSE split, Lagrangian lasso.

Everything here is intercept-free: the model is zero-mean, so second moments
are taken around zero (``sum(y**2) / m``), not around the sample mean.

The lasso minimizes

    (1 / (2m)) * sum_j (y_j - <beta, x_j>)^2 + lam * ||beta||_1

note the 1/(2m) data-fit scaling; to compare against a formulation using
1/2 instead, multiply lam by m.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidParams, RankDeficient

# relative singular-value threshold on X^T X below which a design is
# declared degenerate; exhaustive learners probe nearly collinear subsets
RANK_RTOL = 1e-10

LASSO_TOL = 1e-7
LASSO_MAX_ITER = 10_000


@dataclass(frozen=True)
class RegressionResult:
    """Coefficients over a named column subset plus the empirical MSE."""

    columns: Tuple[int, ...]
    coefficients: np.ndarray
    mse: float

    def __post_init__(self):
        coef = np.asarray(self.coefficients, dtype=float)
        if coef.ndim != 1 or coef.shape[0] != len(self.columns):
            raise InvalidParams("coefficients must align with columns")
        coef.setflags(write=False)
        object.__setattr__(self, "coefficients", coef)
        object.__setattr__(self, "columns", tuple(int(c) for c in self.columns))

    def coefficient_for(self, column: int) -> float:
        return float(self.coefficients[self.columns.index(column)])


@dataclass(frozen=True)
class LassoResult(RegressionResult):
    """Lasso solution; ``converged`` is False when the sweep budget ran out
    with the subgradient residual still above 10 * tol."""

    converged: bool = True
    sweeps: int = 0
    kkt_residual: float = 0.0


@dataclass(frozen=True)
class MseDecomposition:
    """Split of an empirical MSE around a reference coefficient vector.

    variance_error + beta_error + cross equals the total MSE by construction;
    Cauchy-Schwarz bounds |cross| by 2 * sqrt(VE * BE).
    """

    variance_error: float
    beta_error: float
    cross: float

    @property
    def total(self) -> float:
        return self.variance_error + self.beta_error + self.cross


def empirical_variance(y: np.ndarray) -> float:
    """Uncentered second moment (1/m) * sum(y^2)."""
    y = np.asarray(y, dtype=float)
    if y.size < 1:
        raise InvalidParams("need at least one observation")
    return float(y @ y / y.size)


def ols(
    x: np.ndarray, y: np.ndarray, columns: Optional[Sequence[int]] = None
) -> RegressionResult:
    """Least squares of y on the columns of x, with the empirical MSE.

    A zero-column design returns empty coefficients and
    ``mse = empirical_variance(y)``.  The design is rank-checked through the
    singular values of X^T X (relative threshold 1e-10); a degenerate sample
    raises RankDeficient and the caller decides what to do.
    """
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, k = x.shape if x.size else (y.size, 0)
    if x.size and m != y.size:
        raise InvalidParams(f"x has {m} rows but y has {y.size}")
    cols = tuple(columns) if columns is not None else tuple(range(k))
    if len(cols) != k:
        raise InvalidParams("columns must name every design column")
    if k == 0:
        return RegressionResult(columns=(), coefficients=np.zeros(0), mse=empirical_variance(y))
    if m < k:
        raise InvalidParams(f"need m >= k, got m={m}, k={k}")
    coef, _, _, sv = np.linalg.lstsq(x, y, rcond=None)
    if sv[0] <= 0 or (sv[-1] / sv[0]) ** 2 < RANK_RTOL:
        raise RankDeficient(
            f"gram matrix of columns {cols} is numerically singular", columns=cols
        )
    resid = y - x @ coef
    return RegressionResult(columns=cols, coefficients=coef, mse=float(resid @ resid / m))


def mse_decomposition(
    x: np.ndarray, y: np.ndarray, beta_hat: np.ndarray, beta_star: np.ndarray
) -> MseDecomposition:
    """Split mean((y - X beta_hat)^2) around the reference beta_star."""
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if x.shape != (y.size, beta_hat.size) or beta_hat.size != beta_star.size:
        raise InvalidParams("shapes of x, y, beta_hat, beta_star disagree")
    r_star = y - x @ beta_star
    drift = x @ (beta_hat - beta_star)
    ve = float(r_star @ r_star / y.size)
    be = float(drift @ drift / y.size)
    cross = float(-2.0 * (r_star @ drift) / y.size)
    return MseDecomposition(variance_error=ve, beta_error=be, cross=cross)


# -- lasso ----------------------------------------------------------------------


def _soft(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def lasso_gram(
    gram: np.ndarray,
    gy: np.ndarray,
    yy: float,
    lam: float,
    tol: float = LASSO_TOL,
    max_iter: int = LASSO_MAX_ITER,
) -> Tuple[np.ndarray, float, bool, int, float]:
    """Cyclic coordinate descent on second moments.

    ``gram = X^T X / m``, ``gy = X^T y / m``, ``yy = y^T y / m``.  Starts from
    zero, visits coordinates cyclically, and between full sweeps iterates on
    the active set only (identical fixpoint, fewer passes).  Convergence is
    declared when a full sweep moves no coordinate by tol or more AND the KKT
    subgradient residual is within 10 * tol.

    Returns (beta, unpenalized mse, converged, full sweeps, kkt residual).
    """
    k = gy.size
    beta = np.zeros(k)
    if k == 0:
        return beta, max(yy, 0.0), True, 0, 0.0
    diag = np.diag(gram).copy()
    q = np.zeros(k)  # gram @ beta, maintained incrementally

    def cycle(indices) -> float:
        biggest = 0.0
        for t in indices:
            if diag[t] <= 0.0:
                continue
            rho = gy[t] - q[t] + diag[t] * beta[t]
            new = _soft(rho, lam) / diag[t]
            delta = new - beta[t]
            if delta != 0.0:
                q += gram[:, t] * delta
                beta[t] = new
                biggest = max(biggest, abs(delta))
        return biggest

    def kkt_residual() -> float:
        grad = q - gy
        worst = 0.0
        for t in range(k):
            if beta[t] != 0.0:
                worst = max(worst, abs(grad[t] + lam * math.copysign(1.0, beta[t])))
            else:
                worst = max(worst, max(abs(grad[t]) - lam, 0.0))
        return worst

    sweeps = 0
    converged = False
    kkt = math.inf
    every = range(k)
    while sweeps < max_iter:
        moved = cycle(every)
        sweeps += 1
        if moved < tol:
            kkt = kkt_residual()
            if kkt <= 10.0 * tol:
                converged = True
            break
        active = [t for t in range(k) if beta[t] != 0.0]
        while sweeps < max_iter and active:
            inner = cycle(active)
            sweeps += 1
            if inner < tol:
                break
    if not converged:
        kkt = kkt_residual()
        converged = kkt <= 10.0 * tol
    mse = max(yy - 2.0 * float(beta @ gy) + float(beta @ q), 0.0)
    return beta, mse, converged, sweeps, kkt


def lasso(
    x: np.ndarray,
    y: np.ndarray,
    lam: float,
    tol: float = LASSO_TOL,
    max_iter: int = LASSO_MAX_ITER,
    columns: Optional[Sequence[int]] = None,
) -> LassoResult:
    """Lagrangian lasso of y on x; returns the plain (unpenalized) MSE.

    ``lam = 0`` reduces to coordinate-descent least squares.  A result is
    always returned; a run that exhausts ``max_iter`` with subgradient
    residual above 10 * tol comes back flagged ``converged=False``.
    """
    if lam < 0:
        raise InvalidParams(f"lam must be >= 0, got {lam}")
    y = np.asarray(y, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m, k = x.shape if x.size else (y.size, 0)
    if x.size and m != y.size:
        raise InvalidParams(f"x has {m} rows but y has {y.size}")
    if y.size < 1:
        raise InvalidParams("need at least one observation")
    cols = tuple(columns) if columns is not None else tuple(range(k))
    if len(cols) != k:
        raise InvalidParams("columns must name every design column")
    gram = x.T @ x / y.size if k else np.zeros((0, 0))
    gy = x.T @ y / y.size if k else np.zeros(0)
    beta, mse, converged, sweeps, kkt = lasso_gram(
        gram, gy, empirical_variance(y), lam, tol=tol, max_iter=max_iter
    )
    return LassoResult(
        columns=cols,
        coefficients=beta,
        mse=mse,
        converged=converged,
        sweeps=sweeps,
        kkt_residual=kkt,
    )
