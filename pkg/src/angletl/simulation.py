"""Seeded synthetic-data generators and the experiment runners behind ``angletl simulate``.

Replicate ``r`` of grid point ``g`` in figure ``f`` draws all of its random
numbers from ``SeedSequence([master_seed, f, g, r, stream])``; results do not
depend on execution order or thread count.
"""

from __future__ import annotations

import datetime as _dt
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rmt
from .aggregation import SourceBundle, aggregate_spectral, aggregate_validation, cosine, similarity_diagnostics
from .core import Dataset, NumericalError, ParameterError, ShapeError, SourceEstimate, SpectralDistribution
from .estimators import PenaltyConfig, RidgePath
from .tuning import CvPlan, TuneGrid, fold_error_surfaces, select_best

FIGURES = {
    "fig2_noiseless_risk": 2,
    "fig3_bounded_risk": 3,
    "fig4_single_source": 4,
    "fig5_multi_source": 5,
}
PAPER_REPLICATES = {
    "fig2_noiseless_risk": 500,
    "fig3_bounded_risk": 500,
    "fig4_single_source": 200,
    "fig5_multi_source": 1000,
}
DESK_REPLICATES = 100


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def replicate_rng(master_seed: int, figure: str, grid_index: int, replicate: int, stream: int = 0):
    code = FIGURES.get(figure, 0)
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([int(master_seed), code, int(grid_index), int(replicate), int(stream)])))


# ---------------------------------------------------------------------------
# generators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CoefPairConfig:
    p: int
    alpha_t: float
    alpha_s: float
    rho: float
    seed: int | None = None

    def __post_init__(self):
        if self.p < 1:
            raise ParameterError("p must be >= 1")
        if not -1 <= self.rho <= 1:
            raise ParameterError("rho must lie in [-1, 1]")
        if self.alpha_t <= 0 or self.alpha_s <= 0:
            raise ParameterError("alpha_t and alpha_s must be > 0")


def gen_coef_pair(cfg: CoefPairConfig, rng=None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``(w_j, beta_j)`` i.i.d. bivariate normal with covariance
    ``(1/p) [[a_s^2, rho a_s a_t], [rho a_s a_t, a_t^2]]``.
    """
    rng = _rng(cfg.seed if rng is None else rng)
    z = rng.standard_normal((2, cfg.p))
    scale = 1.0 / np.sqrt(cfg.p)
    w = cfg.alpha_s * scale * z[0]
    beta = cfg.alpha_t * scale * (cfg.rho * z[0] + np.sqrt(1.0 - cfg.rho ** 2) * z[1])
    return w, beta


def gen_coef_multi(p: int, alpha_t: float, alpha_s: float, rhos, rng) -> tuple[np.ndarray, np.ndarray]:
    """K source coefficient vectors, the k-th correlated ``rhos[k]`` with beta.

    Sources are conditionally independent given beta, so corr(w_i, w_j) = rho_i rho_j.
    """
    rng = _rng(rng)
    rhos = np.asarray(rhos, dtype=np.float64)
    zb = rng.standard_normal(p)
    Z = rng.standard_normal((rhos.size, p))
    beta = alpha_t / np.sqrt(p) * zb
    W = alpha_s / np.sqrt(p) * (rhos[:, None] * zb[None, :] + np.sqrt(1.0 - rhos[:, None] ** 2) * Z)
    return W, beta


def _parse_covariance(covariance) -> float:
    if covariance in (None, "identity"):
        return 0.0
    if isinstance(covariance, (tuple, list)) and len(covariance) == 2 and covariance[0] == "exchangeable":
        return float(covariance[1])
    if isinstance(covariance, (int, float)):
        return float(covariance)
    raise ParameterError(f"unknown covariance {covariance!r}")


def exchangeable_matrix(p: int, c: float, variances=None) -> np.ndarray:
    R = np.full((p, p), c)
    np.fill_diagonal(R, 1.0)
    if variances is not None:
        d = np.sqrt(np.asarray(variances, dtype=np.float64))
        R = d[:, None] * R * d[None, :]
    return R


def gen_design(n: int, p: int, covariance="identity", seed=None) -> np.ndarray:
    """n x p Gaussian design with unit variances and exchangeable correlation ``c``.

    ``covariance`` is ``"identity"``, a float ``c`` or ``("exchangeable", c)``.
    For ``c >= 0`` rows are ``sqrt(c) f 1 + sqrt(1-c) e`` (one common factor
    ``f`` per row); for ``-1/(p-1) < c < 0`` they are
    ``sqrt(1-c) (I + k/p 11^T) e`` with ``k = sqrt(1 + p c/(1-c)) - 1``.
    """
    c = _parse_covariance(covariance)
    if not -1 < c < 1:
        raise ParameterError(f"exchangeable correlation must lie in (-1, 1), got {c}")
    rng = _rng(seed)
    E = rng.standard_normal((n, p))
    if c == 0:
        return E
    if c > 0:
        f = rng.standard_normal((n, 1))
        return np.sqrt(c) * f + np.sqrt(1.0 - c) * E
    if p > 1 and c <= -1.0 / (p - 1):
        raise ParameterError(f"correlation {c} is not positive definite for p={p}")
    k = np.sqrt(1.0 + p * c / (1.0 - c)) - 1.0
    return np.sqrt(1.0 - c) * (E + k * E.mean(axis=1, keepdims=True))


def gen_response(X, beta, sigma_sq: float, seed=None) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if X.shape[1] != beta.shape[0]:
        raise ShapeError(f"cols(X)={X.shape[1]} != len(beta)={beta.shape[0]}")
    if sigma_sq < 0:
        raise ParameterError("sigma_sq must be >= 0")
    mean = X @ beta
    if sigma_sq == 0:
        return mean
    return mean + np.sqrt(sigma_sq) * _rng(seed).standard_normal(X.shape[0])


@dataclass(frozen=True)
class NoiseConfig:
    """Source-error covariance recipe.

    ``exchangeable``: ``Sigma_delta = D^{1/2} R D^{1/2}`` with ``R`` exchangeable
    (``correlation``) and diagonal variances drawn uniformly from
    ``variance_range``. The error itself is ``delta ~ N(0, Sigma_delta / p)``.
    """

    structure: str = "none"
    correlation: float = 0.0
    variance_range: tuple = (0.0, 0.0)
    seed: int | None = None

    def __post_init__(self):
        if self.structure not in ("none", "exchangeable", "isotropic"):
            raise ParameterError(f"unknown noise structure {self.structure!r}")
        lo, hi = self.variance_range
        if lo < 0 or hi < lo:
            raise ParameterError("variance_range must be 0 <= low <= high")


@dataclass(frozen=True)
class NoiseCovariance:
    matrix: np.ndarray
    variances: np.ndarray
    correlation: float
    c_lower: float
    c_upper: float

    @property
    def mean_eigenvalue(self) -> float:
        return float(np.mean(self.variances))

    def sample(self, rng) -> np.ndarray:
        """One draw of delta ~ N(0, Sigma_delta / p), via a one-factor representation."""
        rng = _rng(rng)
        p = self.variances.size
        c = self.correlation
        z = rng.standard_normal(p)
        if c > 0:
            z = np.sqrt(1.0 - c) * z + np.sqrt(c) * rng.standard_normal()
        elif c < 0:
            k = np.sqrt(1.0 + p * c / (1.0 - c)) - 1.0
            z = np.sqrt(1.0 - c) * (z + k * z.mean())
        return np.sqrt(self.variances / p) * z


def noise_covariance(p: int, cfg: NoiseConfig, rng=None) -> NoiseCovariance:
    """Build Sigma_delta and its eigenvalue range ``[C_L, C_U]``."""
    rng = _rng(cfg.seed if rng is None else rng)
    if cfg.structure == "none":
        var = np.zeros(p)
        corr = 0.0
    else:
        lo, hi = cfg.variance_range
        var = rng.uniform(lo, hi, size=p) if hi > lo else np.full(p, float(lo))
        corr = cfg.correlation if cfg.structure == "exchangeable" else 0.0
    M = exchangeable_matrix(p, corr, var)
    eig = np.linalg.eigvalsh(M)
    if eig[0] < -1e-10:
        raise ParameterError(f"noise covariance is not positive semidefinite (min eigenvalue {eig[0]:.3g})")
    eig = np.clip(eig, 0.0, None)
    return NoiseCovariance(M, var, corr, float(eig[0]), float(eig[-1]))


def gen_source_estimate(w, noise: NoiseCovariance | None = None, rng=None) -> SourceEstimate:
    """``w_hat = w + delta`` with ``delta ~ N(0, Sigma_delta / p)``."""
    w = np.asarray(w, dtype=np.float64)
    if noise is None or not np.any(noise.variances):
        return SourceEstimate(w.copy())
    return SourceEstimate(w + noise.sample(rng))


def gen_source_estimate_ols(w, n_source: int, covariance=0.2, sigma_sq: float = 0.5,
                            rng=None, ridge: float | None = None) -> SourceEstimate:
    """Fit least squares on a freshly generated source dataset.

    Raises :class:`NumericalError` if the source Gram matrix is singular and no
    ``ridge`` fallback strength was declared.
    """
    rng = _rng(rng)
    w = np.asarray(w, dtype=np.float64)
    p = w.size
    Xs = gen_design(n_source, p, covariance, rng)
    Ys = gen_response(Xs, w, sigma_sq, rng)
    if ridge is not None:
        A = Xs.T @ Xs + n_source * ridge * np.eye(p)
        return SourceEstimate(np.linalg.solve(A, Xs.T @ Ys), label="ridge")
    coef, _, rank, _ = np.linalg.lstsq(Xs, Ys, rcond=None)
    if rank < p:
        raise NumericalError(
            f"source design has rank {rank} < p={p}; least squares is not unique, pass ridge= instead")
    return SourceEstimate(coef, label="ols")


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentSpec:
    figure: str
    replicates: int | None = None
    scale: str = "desk"
    master_seed: int = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure not in FIGURES:
            raise ParameterError(f"unknown figure {self.figure!r}; expected one of {sorted(FIGURES)}")
        if self.scale not in ("desk", "paper"):
            raise ParameterError("scale must be 'desk' or 'paper'")
        if self.replicates is not None and self.replicates < 1:
            raise ParameterError("replicates must be >= 1")

    @property
    def n_replicates(self) -> int:
        if self.replicates is not None:
            return int(self.replicates)
        return PAPER_REPLICATES[self.figure] if self.scale == "paper" else DESK_REPLICATES

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        if "figure" not in d:
            raise ParameterError("experiment spec needs a 'figure' field")
        return cls(figure=d["figure"], replicates=d.get("replicates"), scale=d.get("scale", "desk"),
                   master_seed=int(d.get("master_seed", 0)), params=dict(d.get("params", {})))


@dataclass
class ExperimentResult:
    figure: str
    columns: list
    rows: list
    manifest: dict


COLUMNS = {
    "fig2_noiseless_risk": ["panel", "rho", "ratio", "gamma", "n", "p", "grid_index", "lambda", "method",
                            "eta", "emp_risk", "emp_se", "theory_risk", "lambda_star"],
    "fig3_bounded_risk": ["panel", "rho", "ratio", "gamma", "n", "p", "c_lower", "c_upper", "grid_index",
                          "lambda", "method", "eta", "emp_risk", "emp_se", "theory_lower", "theory_upper"],
    "fig4_single_source": ["panel", "ratio", "p", "gamma", "rho", "method", "mean_rmse", "se_rmse",
                           "replicates"],
    "fig5_multi_source": ["config", "rhos", "method", "mean_rmse", "se_rmse", "replicates"],
}

RISK_PANELS = [(rho, ratio, gamma) for ratio, gamma in ((2.0, 2.0), (10.0 / 9.0, 0.5))
               for rho in (0.3, 0.6, 0.9)]


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


def _mean_se(samples: np.ndarray):
    m = samples.mean(axis=0)
    if samples.shape[0] > 1:
        se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    else:
        se = np.zeros_like(m)
    return m, se


def _risk_lambdas(params) -> np.ndarray:
    if "lambdas" in params:
        return np.asarray(params["lambdas"], dtype=np.float64)
    return np.logspace(np.log10(params.get("lambda_min", 0.01)), np.log10(params.get("lambda_max", 100.0)),
                       int(params.get("n_lambdas", 100)))


def _risk_figure(spec: ExperimentSpec, threads: int, noisy: bool) -> list:
    prm = spec.params
    panels = [tuple(x) for x in prm.get("panels", RISK_PANELS)]
    n = int(prm.get("n", 50))
    n_test = int(prm.get("n_test", 100))
    alpha_t = float(prm.get("alpha_t", 1.0))
    sigma_sq = float(prm.get("sigma_sq", 0.5))
    lambdas = _risk_lambdas(prm)
    noise_cfg = NoiseConfig("exchangeable", float(prm.get("noise_correlation", 0.1)),
                            tuple(prm.get("noise_variance_range", (0.0, 0.05))))
    methods = ["target_only", "distTL", "angleTL"]
    R = spec.n_replicates
    rows = []
    for g, (rho, ratio, gamma) in enumerate(panels):
        p = int(round(gamma * n))
        alpha_s = alpha_t / ratio
        if noisy:
            cov = noise_covariance(p, noise_cfg, replicate_rng(spec.master_seed, spec.figure, g, 0, stream=1))
            c_lo, c_hi, c_bar = cov.c_lower, cov.c_upper, cov.mean_eigenvalue
        else:
            cov, c_lo, c_hi, c_bar = None, 0.0, 0.0, 0.0
        scen = rmt.RiskScenario(p / n, alpha_t ** 2, alpha_s ** 2, rho, sigma_sq, c_lo, c_hi)
        ratios = np.array([0.0, 1.0, scen.optimal_ratio(c_bar)])
        etas = lambdas[:, None] * ratios[None, :]

        def one(r, g=g, p=p, rho=rho, alpha_s=alpha_s, cov=cov, etas=etas):
            rng = replicate_rng(spec.master_seed, spec.figure, g, r)
            w, beta = gen_coef_pair(CoefPairConfig(p, alpha_t, alpha_s, rho), rng)
            w_hat = gen_source_estimate(w, cov, rng).w_hat
            X = gen_design(n, p, "identity", rng)
            Y = gen_response(X, beta, sigma_sq, rng)
            Xt = gen_design(n_test, p, "identity", rng)
            Yt = gen_response(Xt, beta, sigma_sq, rng)
            return RidgePath(X, Y).heldout_mse(Xt, Yt, w_hat, lambdas, etas)

        samples = np.stack(_map(one, range(R), threads))
        mean, se = _mean_se(samples)
        lo = rmt.risk(scen, lambdas[:, None], etas, c_lo)
        hi = rmt.risk(scen, lambdas[:, None], etas, c_hi)
        lam_star = {
            "target_only": rmt.minimize_along(scen, c_bar, "zero")[0],
            "distTL": rmt.minimize_along(scen, c_bar, "dist")[0],
            "angleTL": rmt.optimal_lambda(scen, c_bar),
        }
        for j, method in enumerate(methods):
            for i, lam in enumerate(lambdas):
                row = {"panel": g, "rho": rho, "ratio": ratio, "gamma": p / n, "n": n, "p": p,
                       "grid_index": i, "lambda": float(lam), "method": method, "eta": float(etas[i, j]),
                       "emp_risk": float(mean[i, j]), "emp_se": float(se[i, j])}
                if noisy:
                    row.update(c_lower=c_lo, c_upper=c_hi, theory_lower=float(lo[i, j]),
                               theory_upper=float(hi[i, j]))
                else:
                    row.update(theory_risk=float(lo[i, j]), lambda_star=float(lam_star[method]))
                rows.append(row)
    return rows


class _CvSurfaces:
    """Angle-grid CV once; the eta = 0 and eta = lambda restrictions are sub-columns."""

    def __init__(self, data: Dataset, w, plan: CvPlan, grid: TuneGrid | None = None):
        self.grid = grid or TuneGrid.default()
        folds = plan.assignment(data.n)
        sizes = np.bincount(folds, minlength=plan.n_folds)
        per_fold = fold_error_surfaces(data, w, self.grid, plan)
        self.errors = np.tensordot(sizes / data.n, per_fold, axes=1)
        self.etas = self.grid.eta_matrix()

    def best(self, mode: str) -> PenaltyConfig:
        r = self.grid.eta_ratios
        cols = {"angle": np.arange(r.size), "dist": np.flatnonzero(r == 1.0),
                "target_only": np.flatnonzero(r == 0.0)}[mode]
        i, j = select_best(self.grid.lambdas, self.etas[:, cols], self.errors[:, cols])
        return PenaltyConfig(float(self.grid.lambdas[i]), float(self.etas[i, cols[j]]))


def _rmse(X, Y, beta) -> float:
    r = Y - X @ beta
    return float(np.sqrt(r @ r / r.size))


def _fit(data: Dataset, w, cfg: PenaltyConfig) -> np.ndarray:
    return RidgePath(data.X, data.Y).coef(cfg.lambda_, cfg.eta, w)


def _fig4(spec: ExperimentSpec, threads: int) -> list:
    prm = spec.params
    ratios = [float(x) for x in prm.get("ratios", (0.5, 1.0, 2.0))]
    ps = [int(x) for x in prm.get("ps", (25, 50, 100))]
    rhos = [float(x) for x in prm.get("rhos", (0.3, 0.5, 0.7, 0.9, 0.95))]
    n = int(prm.get("n", 50))
    n_source = int(prm.get("n_source", 5000))
    n_test = int(prm.get("n_test", 200))
    folds = int(prm.get("folds", 3))
    alpha_t = float(prm.get("alpha_t", 1.0))
    sigma_sq = float(prm.get("sigma_sq", 0.5))
    c_src = float(prm.get("source_correlation", 0.2))
    c_tgt = float(prm.get("target_correlation", 0.1))
    methods = ["target_only", "source_only", "distTL", "angleTL"]
    R = spec.n_replicates
    rows = []
    g = 0
    for ratio in ratios:
        for p in ps:
            for rho in rhos:
                alpha_s = alpha_t / ratio

                def one(r, g=g, p=p, rho=rho, alpha_s=alpha_s):
                    rng = replicate_rng(spec.master_seed, spec.figure, g, r)
                    w, beta = gen_coef_pair(CoefPairConfig(p, alpha_t, alpha_s, rho), rng)
                    w_hat = gen_source_estimate_ols(w, n_source, c_src, sigma_sq, rng).w_hat
                    X = gen_design(n, p, c_tgt, rng)
                    data = Dataset(X, gen_response(X, beta, sigma_sq, rng))
                    Xt = gen_design(n_test, p, c_tgt, rng)
                    Yt = gen_response(Xt, beta, sigma_sq, rng)
                    plan = CvPlan(folds, int(rng.integers(2 ** 63)))
                    cv = _CvSurfaces(data, w_hat, plan)
                    return [
                        _rmse(Xt, Yt, _fit(data, None, cv.best("target_only"))),
                        _rmse(Xt, Yt, w_hat),
                        _rmse(Xt, Yt, _fit(data, w_hat, cv.best("dist"))),
                        _rmse(Xt, Yt, _fit(data, w_hat, cv.best("angle"))),
                    ]

                samples = np.array(_map(one, range(R), threads))
                mean, se = _mean_se(samples)
                for j, method in enumerate(methods):
                    rows.append({"panel": g, "ratio": ratio, "p": p, "gamma": p / n, "rho": rho,
                                 "method": method, "mean_rmse": float(mean[j]), "se_rmse": float(se[j]),
                                 "replicates": R})
                g += 1
    return rows


FIG5_CONFIGS = ((0.4, 0.45, 0.5, 0.55, 0.6), (0.1, 0.3, 0.5, 0.7, 0.9))


def _fig5(spec: ExperimentSpec, threads: int) -> list:
    prm = spec.params
    configs = [tuple(float(x) for x in c) for c in prm.get("configs", FIG5_CONFIGS)]
    n = int(prm.get("n", 100))
    p = int(prm.get("p", 100))
    n_source = int(prm.get("n_source", 5000))
    n_test = int(prm.get("n_test", 200))
    folds = int(prm.get("folds", 3))
    reserve = float(prm.get("reserve_fraction", 0.3))
    alpha_t = float(prm.get("alpha_t", 1.0))
    alpha_s = float(prm.get("alpha_s", 1.0))
    sigma_sq = float(prm.get("sigma_sq", 0.5))
    c_src = float(prm.get("source_correlation", 0.2))
    c_tgt = float(prm.get("target_correlation", 0.1))
    methods = ["target_only", "angleTL_best_single", "angleTL_multi1", "angleTL_multi2"]
    R = spec.n_replicates
    rows = []
    for g, rhos in enumerate(configs):
        best_k = int(np.argmax(rhos))

        def one(r, g=g, rhos=rhos, best_k=best_k):
            rng = replicate_rng(spec.master_seed, spec.figure, g, r)
            W, beta = gen_coef_multi(p, alpha_t, alpha_s, rhos, rng)
            bundle = SourceBundle([gen_source_estimate_ols(w, n_source, c_src, sigma_sq, rng) for w in W])
            X = gen_design(n, p, c_tgt, rng)
            data = Dataset(X, gen_response(X, beta, sigma_sq, rng))
            Xt = gen_design(n_test, p, c_tgt, rng)
            Yt = gen_response(Xt, beta, sigma_sq, rng)
            plan = CvPlan(folds, int(rng.integers(2 ** 63)))
            order = rng.permutation(n)
            n_val = int(round(reserve * n))
            val, train = data.subset(order[:n_val]), data.subset(np.sort(order[n_val:]))

            cv0 = _CvSurfaces(data, None, plan)
            out = [_rmse(Xt, Yt, _fit(data, None, cv0.best("target_only")))]
            w_best = bundle.estimates[best_k].w_hat
            out.append(_rmse(Xt, Yt, _fit(data, w_best, _CvSurfaces(data, w_best, plan).best("angle"))))
            w1 = aggregate_validation(bundle, val).w_agg
            out.append(_rmse(Xt, Yt, _fit(train, w1, _CvSurfaces(train, w1, plan).best("angle"))))
            w2 = aggregate_spectral(bundle).w_agg
            out.append(_rmse(Xt, Yt, _fit(data, w2, _CvSurfaces(data, w2, plan).best("angle"))))
            return out

        samples = np.array(_map(one, range(R), threads))
        mean, se = _mean_se(samples)
        for j, method in enumerate(methods):
            rows.append({"config": g, "rhos": " ".join(f"{x:g}" for x in rhos), "method": method,
                         "mean_rmse": float(mean[j]), "se_rmse": float(se[j]), "replicates": R})
    return rows


def run_experiment(spec: ExperimentSpec, threads: int = 1) -> ExperimentResult:
    """Run one figure's simulation and return its result table and manifest."""
    from . import __version__
    from ._backend import BACKEND

    if spec.figure == "fig2_noiseless_risk":
        rows = _risk_figure(spec, threads, noisy=False)
    elif spec.figure == "fig3_bounded_risk":
        rows = _risk_figure(spec, threads, noisy=True)
    elif spec.figure == "fig4_single_source":
        rows = _fig4(spec, threads)
    else:
        rows = _fig5(spec, threads)
    manifest = {
        "figure": spec.figure,
        "master_seed": spec.master_seed,
        "replicates": spec.n_replicates,
        "scale": spec.scale,
        "params": spec.params,
        "software_version": __version__,
        "kernel_backend": BACKEND,
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    return ExperimentResult(spec.figure, COLUMNS[spec.figure], rows, manifest)


def result_filename(figure: str) -> str:
    return figure.split("_", 1)[0] + "_results.csv"


def spectral_consistency_study(K: int = 5, p: int = 500, rhos=(0.4, 0.45, 0.5, 0.55, 0.6),
                               noise_ratio: float = 2.0, alpha_t: float = 1.0, alpha_s: float = 1.0,
                               replicates: int = 200, master_seed: int = 0) -> dict:
    """Monte Carlo check of the spectral aggregation guarantees.

    Each source error is ``delta_k ~ N(0, noise_ratio * alpha_s^2 I / p)``, so
    ``tr(Sigma_delta)/p = noise_ratio * alpha_s^2``. Reports the replicate
    means of cos(s_hat, s), cos(w_agg, beta) and max_k cos(w_hat_k, beta).
    """
    rhos = tuple(rhos)
    if len(rhos) != K:
        raise ParameterError("need one rho per source")
    cs, ca, cm = [], [], []
    for r in range(replicates):
        rng = replicate_rng(master_seed, "spectral_study", 0, r)
        W, beta = gen_coef_multi(p, alpha_t, alpha_s, rhos, rng)
        W_hat = W + np.sqrt(noise_ratio * alpha_s ** 2 / p) * rng.standard_normal(W.shape)
        bundle = SourceBundle(list(W_hat))
        s = similarity_diagnostics(bundle, beta)
        agg = aggregate_spectral(bundle)
        cs.append(cosine(agg.weights, s))
        ca.append(cosine(agg.w_agg, beta))
        cm.append(float(s.max()))
    cs, ca, cm = map(np.asarray, (cs, ca, cm))
    return {
        "cos_s_hat_s": float(cs.mean()),
        "cos_w_agg_beta": float(ca.mean()),
        "max_cos_single": float(cm.mean()),
        "se_diff": float(np.std(ca - cm, ddof=1) / np.sqrt(replicates)) if replicates > 1 else 0.0,
        "replicates": replicates,
    }
