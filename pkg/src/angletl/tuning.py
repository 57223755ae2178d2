"""K-fold cross-validation over a (lambda, eta) grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, ParameterError, PlanError, SourceEstimate, validate_pairing, write_table_csv
from .estimators import PenaltyConfig, RidgePath, fit_angle_tl

MODES = ("angle", "dist", "target_only")


def default_lambdas(n: int = 50, low: float = 1e-4, high: float = 1e4) -> np.ndarray:
    return np.logspace(np.log10(low), np.log10(high), n)


def default_ratios() -> np.ndarray:
    """eta/lambda ratios: 21 linear steps over [-1, 3] plus exact 0 and 1."""
    r = np.round(np.linspace(-1.0, 3.0, 21), 12)
    return np.unique(np.concatenate([r, [0.0, 1.0]]))


@dataclass(frozen=True)
class TuneGrid:
    """Search grid.

    ``etas`` are given either as ratios to lambda (``eta_ratios``, the
    default) or as absolute values (``etas``). ``mode`` restricts the grid:
    ``"dist"`` keeps only ``eta = lambda`` and ``"target_only"`` only
    ``eta = 0``.
    """

    lambdas: np.ndarray
    eta_ratios: np.ndarray | None = None
    etas: np.ndarray | None = None
    mode: str = "angle"

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=np.float64).reshape(-1)
        if lam.size == 0:
            raise ParameterError("lambda grid is empty")
        if np.any(~np.isfinite(lam)) or np.any(lam <= 0):
            raise ParameterError("lambdas must be finite and strictly positive")
        if np.any(np.diff(lam) <= 0):
            raise ParameterError("lambdas must be strictly increasing")
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.eta_ratios is not None and self.etas is not None:
            raise ParameterError("give eta_ratios or etas, not both")
        object.__setattr__(self, "lambdas", lam)
        for name in ("eta_ratios", "etas"):
            val = getattr(self, name)
            if val is not None:
                val = np.asarray(val, dtype=np.float64).reshape(-1)
                if val.size == 0 or np.any(~np.isfinite(val)):
                    raise ParameterError(f"{name} must be a non-empty finite vector")
                object.__setattr__(self, name, val)
        if self.mode == "angle" and self.eta_ratios is None and self.etas is None:
            object.__setattr__(self, "eta_ratios", default_ratios())

    @classmethod
    def default(cls, mode: str = "angle") -> "TuneGrid":
        return cls(default_lambdas(), mode=mode)

    @classmethod
    def from_dict(cls, d: dict) -> "TuneGrid":
        if "lambdas" in d:
            lambdas = d["lambdas"]
        else:
            lambdas = default_lambdas(int(d.get("n_lambdas", 50)), float(d.get("lambda_min", 1e-4)),
                                      float(d.get("lambda_max", 1e4)))
        return cls(lambdas, eta_ratios=d.get("eta_ratios"), etas=d.get("etas"),
                   mode=d.get("mode", "angle"))

    def eta_matrix(self) -> np.ndarray:
        """Array of shape (L, E): eta values paired with each lambda."""
        lam = self.lambdas
        if self.mode == "target_only":
            return np.zeros((lam.size, 1))
        if self.mode == "dist":
            return lam[:, None].copy()
        if self.etas is not None:
            return np.broadcast_to(self.etas, (lam.size, self.etas.size)).copy()
        return lam[:, None] * self.eta_ratios[None, :]


@dataclass(frozen=True)
class CvPlan:
    """Fold plan.

    Assignment: ``perm = numpy.random.Generator(PCG64(seed)).permutation(n)``,
    then sample ``perm[i]`` goes to fold ``i % n_folds``. PCG64 output is
    specified bit-for-bit, so the assignment is platform independent.
    """

    n_folds: int = 3
    seed: int = 0

    def __post_init__(self):
        if int(self.n_folds) != self.n_folds or self.n_folds < 2:
            raise PlanError(f"n_folds must be an integer >= 2, got {self.n_folds!r}")

    def assignment(self, n: int) -> np.ndarray:
        if n < self.n_folds:
            raise PlanError(f"n={n} samples cannot fill {self.n_folds} folds")
        perm = np.random.Generator(np.random.PCG64(self.seed)).permutation(n)
        folds = np.empty(n, dtype=np.int64)
        folds[perm] = np.arange(n) % self.n_folds
        return folds


@dataclass(frozen=True)
class CvResult:
    best: PenaltyConfig
    best_error: float
    lambdas: np.ndarray
    etas: np.ndarray  # (L, E)
    errors: np.ndarray  # (L, E) mean held-out MSE

    def surface_rows(self):
        """(lambda, eta, cv_mse) rows in grid order, duplicates removed."""
        seen = set()
        for i, lam in enumerate(self.lambdas):
            for j in range(self.etas.shape[1]):
                key = (float(lam), float(self.etas[i, j]))
                if key in seen:
                    continue
                seen.add(key)
                yield {"lambda": key[0], "eta": key[1], "cv_mse": float(self.errors[i, j])}


def select_best(lambdas, etas, errors) -> tuple[int, int]:
    """Index of the minimum error with deterministic tie-breaking.

    Ties go to the smallest lambda, then the smallest |eta|, then eta >= 0.
    """
    L, E = errors.shape
    lam = np.broadcast_to(np.asarray(lambdas)[:, None], (L, E)).ravel()
    eta = np.asarray(etas).ravel()
    err = errors.ravel()
    # lexsort: last key is primary
    order = np.lexsort((eta < 0, np.abs(eta), lam, err))
    k = int(order[0])
    return k // E, k % E


def fold_error_surfaces(data: Dataset, w, grid: TuneGrid, plan: CvPlan) -> np.ndarray:
    """Per-fold held-out MSE, shape (n_folds, L, E)."""
    folds = plan.assignment(data.n)
    etas = grid.eta_matrix()
    out = np.empty((plan.n_folds,) + etas.shape)
    for k in range(plan.n_folds):
        train = folds != k
        test = ~train
        if not train.any():
            raise PlanError(f"fold {k} leaves an empty training set")
        path = RidgePath(data.X[train], data.Y[train])
        out[k] = path.heldout_mse(data.X[test], data.Y[test], w, grid.lambdas, etas)
    return out


def cross_validate(data: Dataset, w_hat: SourceEstimate | None, grid: TuneGrid, plan: CvPlan) -> CvResult:
    """Pick (lambda, eta) minimising the held-out squared error.

    The CV error of a grid point is the mean over all held-out samples
    (folds weighted by their size).
    """
    bundle = validate_pairing(data.X, data.Y, w_hat)
    data = bundle.data
    w = None if bundle.source is None else bundle.source.w_hat
    folds = plan.assignment(data.n)
    sizes = np.bincount(folds, minlength=plan.n_folds)
    per_fold = fold_error_surfaces(data, w, grid, plan)
    errors = np.tensordot(sizes / data.n, per_fold, axes=1)
    etas = grid.eta_matrix()
    i, j = select_best(grid.lambdas, etas, errors)
    best = PenaltyConfig(float(grid.lambdas[i]), float(etas[i, j]))
    return CvResult(best, float(errors[i, j]), grid.lambdas, etas, errors)


def out_of_fold_predictions(data: Dataset, w_hat, cfg: PenaltyConfig, plan: CvPlan) -> np.ndarray:
    """Prediction for every sample from the model trained without its fold."""
    folds = plan.assignment(data.n)
    w = None if w_hat is None else (w_hat.w_hat if isinstance(w_hat, SourceEstimate) else np.asarray(w_hat))
    pred = np.empty(data.n)
    for k in range(plan.n_folds):
        train = folds != k
        path = RidgePath(data.X[train], data.Y[train])
        pred[~train] = data.X[~train] @ path.coef(cfg.lambda_, cfg.eta, w)
    return pred


def refit_best(data: Dataset, w_hat: SourceEstimate | None, best: PenaltyConfig):
    """Fit on all target samples at the selected configuration."""
    return fit_angle_tl(data, w_hat, best)


def write_surface_csv(path, result: CvResult) -> None:
    write_table_csv(path, ["lambda", "eta", "cv_mse"], result.surface_rows())
