"""Closed-form solvers for the ridge family used in angle-based transfer.

Every estimator here minimises

    (1/n) ||Y - X b||^2 + lam ||b||^2 - 2 eta w^T b

whose minimiser is ``(X^T X + n lam I)^{-1} (X^T Y + n eta w)``. The target-only
ridge is ``eta = 0`` and the distance-penalised estimator is ``eta = lam``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._backend import kernels
from .core import (
    ConditioningError,
    Dataset,
    DegenerateError,
    FitResult,
    ParameterError,
    ShapeError,
    SourceEstimate,
    validate_pairing,
)

#: Systems with a condition number above this are refused.
MAX_CONDITION = 1e14


@dataclass(frozen=True)
class PenaltyConfig:
    """Ridge strength ``lambda_`` and angle-penalty strength ``eta``."""

    lambda_: float
    eta: float = 0.0

    def __post_init__(self):
        lam = float(self.lambda_)
        if not np.isfinite(lam) or lam <= 0:
            raise ParameterError(f"lambda must be > 0, got {self.lambda_!r}")
        if not np.isfinite(float(self.eta)):
            raise ParameterError(f"eta must be finite, got {self.eta!r}")
        object.__setattr__(self, "lambda_", lam)
        object.__setattr__(self, "eta", float(self.eta))


def method_name(lambda_: float, eta: float) -> str:
    """Label a penalty pair by the estimator it reduces to."""
    if eta == 0:
        return "target_only"
    if eta == lambda_:
        return "distTL"
    return "angleTL"


def objective(data: Dataset, w_hat, beta, lambda_: float, eta: float) -> float:
    w = _wvec(w_hat, data.p)
    r = data.Y - data.X @ beta
    return float(r @ r / data.n + lambda_ * beta @ beta - 2.0 * eta * w @ beta)


def objective_gradient(data: Dataset, w_hat, beta, lambda_: float, eta: float) -> np.ndarray:
    w = _wvec(w_hat, data.p)
    return 2.0 / data.n * data.X.T @ (data.X @ beta - data.Y) + 2.0 * lambda_ * beta - 2.0 * eta * w


def _wvec(w_hat, p: int) -> np.ndarray:
    if w_hat is None:
        return np.zeros(p)
    return w_hat.w_hat if isinstance(w_hat, SourceEstimate) else np.asarray(w_hat, dtype=np.float64)


def _condition(X: np.ndarray, c: float) -> float:
    s = np.linalg.svd(X, compute_uv=False)
    smax2 = float(s[0] ** 2)
    smin2 = float(s[-1] ** 2) if X.shape[1] <= X.shape[0] else 0.0
    return (smax2 + c) / (smin2 + c)


def solve_regularized(X: np.ndarray, z: np.ndarray, c: float, path: str = "auto") -> tuple[np.ndarray, str]:
    """Solve ``(X^T X + c I) b = z``.

    ``path="primal"`` factorises the p x p system; ``path="dual"`` applies the
    matrix-inversion identity ``(X^T X + cI)^{-1} = (I - X^T (X X^T + cI)^{-1} X) / c``
    and only factorises an n x n matrix. ``"auto"`` picks the smaller one.
    """
    n, p = X.shape
    if path == "auto":
        path = "primal" if p <= n else "dual"
    if path == "primal":
        A = X.T @ X
        A[np.diag_indices_from(A)] += c
        return cho_solve(cho_factor(A, lower=True), z), path
    if path == "dual":
        K = X @ X.T
        K[np.diag_indices_from(K)] += c
        inner = cho_solve(cho_factor(K, lower=True), X @ z)
        return (z - X.T @ inner) / c, path
    raise ParameterError(f"unknown solve path {path!r}")


def fit_angle_tl(data: Dataset, w_hat: SourceEstimate | None, cfg: PenaltyConfig,
                 path: str = "auto") -> FitResult:
    """Angle-penalised ridge fit in closed form.

    Parameters
    ----------
    data : Dataset
        Target design and response.
    w_hat : SourceEstimate or None
        Source coefficients; ``None`` is treated as the zero vector.
    cfg : PenaltyConfig
        ``lambda_ > 0`` and any real ``eta``.
    path : {"auto", "primal", "dual"}
        Linear-solve route, see :func:`solve_regularized`.

    Raises
    ------
    ConditioningError
        If ``X^T X + n lambda I`` has condition number above ``MAX_CONDITION``.
    """
    bundle = validate_pairing(data.X, data.Y, w_hat)
    data = bundle.data
    n = data.n
    w = _wvec(bundle.source, data.p)
    c = n * cfg.lambda_
    cond = _condition(data.X, c)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise ConditioningError(f"regularised system condition number {cond:.3g} exceeds {MAX_CONDITION:g}")
    rhs = data.X.T @ data.Y + n * cfg.eta * w
    beta, used = solve_regularized(data.X, rhs, c, path)
    return FitResult(
        beta_hat=beta,
        lambda_=cfg.lambda_,
        eta=cfg.eta,
        objective_value=objective(data, w, beta, cfg.lambda_, cfg.eta),
        method=method_name(cfg.lambda_, cfg.eta),
        diagnostics={"solver": used, "condition": cond},
    )


def fit_target_only(data: Dataset, lambda_: float, path: str = "auto") -> FitResult:
    """Plain ridge regression on the target data."""
    return fit_angle_tl(data, None, PenaltyConfig(lambda_, 0.0), path)


def fit_dist_tl(data: Dataset, w_hat: SourceEstimate, lambda_: float, path: str = "auto") -> FitResult:
    """Ridge shrinking towards ``w_hat``: the ``eta = lambda`` special case.

    ``objective_value`` is the angle-penalised objective; the distance form
    ``(1/n)||Y - Xb||^2 + lam ||b - w||^2`` differs from it by the constant
    ``lam ||w||^2`` and is reported in ``diagnostics["dist_objective"]``.
    """
    res = fit_angle_tl(data, w_hat, PenaltyConfig(lambda_, lambda_), path)
    w = _wvec(w_hat, data.p)
    res.diagnostics["dist_objective"] = res.objective_value + res.lambda_ * float(w @ w)
    return res


def rescale_source(data: Dataset, w_hat: SourceEstimate) -> FitResult:
    """Best scalar multiple ``c * w_hat`` in least squares on the target data.

    The result has ``lambda_ = 0`` and ``eta = NaN`` (no angle penalty);
    the fitted scale is ``diagnostics["scale"]``.
    """
    bundle = validate_pairing(data.X, data.Y, w_hat)
    data = bundle.data
    w = bundle.source.w_hat
    xw = data.X @ w
    denom = float(xw @ xw)
    if denom == 0.0:
        raise DegenerateError("X @ w_hat is identically zero; the source direction is degenerate")
    c = float(xw @ data.Y) / denom
    beta = c * w
    r = data.Y - data.X @ beta
    return FitResult(
        beta_hat=beta,
        lambda_=0.0,
        eta=float("nan"),
        objective_value=float(r @ r / data.n),
        method="source_rescaled",
        diagnostics={"scale": c},
    )


def predict(beta_hat, X_new) -> np.ndarray:
    beta_hat = np.asarray(beta_hat, dtype=np.float64).reshape(-1)
    X_new = np.atleast_2d(np.asarray(X_new, dtype=np.float64))
    if X_new.shape[1] != beta_hat.shape[0]:
        raise ShapeError(f"cols(X_new)={X_new.shape[1]} != len(beta_hat)={beta_hat.shape[0]}")
    return X_new @ beta_hat


class RidgePath:
    """One thin SVD of the training design, reused across many (lam, eta) pairs.

    After the O(n p min(n, p)) factorisation each coefficient vector costs
    O(p min(n, p)) and each held-out error evaluation O(m min(n, p)).
    """

    def __init__(self, X: np.ndarray, Y: np.ndarray):
        X = np.asarray(X, dtype=np.float64)
        self.n, self.p = X.shape
        U, s, Vt = np.linalg.svd(X, full_matrices=False)
        self.V = Vt.T
        self.s2 = s * s
        # V^T X^T Y = diag(s) U^T Y
        self.t_y = s * (U.T @ np.asarray(Y, dtype=np.float64))

    def coef(self, lambda_: float, eta: float, w) -> np.ndarray:
        c = self.n * lambda_
        w = np.zeros(self.p) if w is None else np.asarray(w, dtype=np.float64)
        t_w = self.V.T @ w
        inv = 1.0 / (self.s2 + c)
        beta = self.V @ (inv * self.t_y)
        # distinct handling of the component of w outside the row space of X
        b = self.V @ (inv * t_w) + (w - self.V @ t_w) / c
        return beta + self.n * eta * b

    def heldout_mse(self, X_te, y_te, w, lambdas, etas) -> np.ndarray:
        """Mean squared prediction error on ``(X_te, y_te)``.

        ``etas`` is either a 1-D array (same eta values for every lambda)
        or an array of shape (len(lambdas), E).
        """
        lambdas = np.asarray(lambdas, dtype=np.float64).reshape(-1)
        etas = np.asarray(etas, dtype=np.float64)
        if etas.ndim == 1:
            etas = np.broadcast_to(etas, (lambdas.size, etas.size))
        X_te = np.asarray(X_te, dtype=np.float64)
        w = np.zeros(self.p) if w is None else np.asarray(w, dtype=np.float64)
        G = X_te @ self.V
        t_w = self.V.T @ w
        h_w = X_te @ w - G @ t_w
        return kernels.heldout_mse(G, self.s2, self.t_y, t_w, h_w,
                                   np.asarray(y_te, dtype=np.float64), self.n, lambdas, etas)
