"""Random-matrix limits of the angle-penalised ridge risk.

``v(z)`` is the Stieltjes transform of the limiting eigenvalue law of
``X X^T / n`` (the companion of the population spectrum ``F``). On the
negative real axis ``z = -lam`` it is the unique positive root of

    v * (lam + gamma * int t / (1 + t v) dF(t)) = 1,

and ``v'(z)`` follows from implicit differentiation of the same equation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar

from ._backend import kernels
from .core import NumericalError, ParameterError, RegimeError, SpectralDistribution

TOL = 1e-12
MAX_ITER = 100_000


@dataclass(frozen=True)
class RiskScenario:
    """Asymptotic parameters.

    ``gamma`` is p/n, ``alpha_t_sq``/``alpha_s_sq`` the target/source signal
    strengths, ``rho`` the coefficient correlation, ``sigma_sq`` the noise
    variance and ``[c_lower, c_upper]`` the eigenvalue range of the
    source-error covariance (scaled so that ``E[delta delta^T] = Sigma_delta / p``).
    """

    gamma: float
    alpha_t_sq: float
    alpha_s_sq: float
    rho: float
    sigma_sq: float
    c_lower: float = 0.0
    c_upper: float = 0.0
    spectrum: SpectralDistribution = SpectralDistribution.identity()

    def __post_init__(self):
        checks = [
            (self.gamma > 0, "gamma must be > 0"),
            (self.alpha_t_sq > 0, "alpha_t_sq must be > 0"),
            (self.alpha_s_sq >= 0, "alpha_s_sq must be >= 0"),
            (-1 <= self.rho <= 1, "rho must lie in [-1, 1]"),
            (self.sigma_sq > 0, "sigma_sq must be > 0"),
            (0 <= self.c_lower <= self.c_upper, "need 0 <= c_lower <= c_upper"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ParameterError(msg)
        for name in ("gamma", "alpha_t_sq", "alpha_s_sq", "rho", "sigma_sq", "c_lower", "c_upper"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def alpha_t(self) -> float:
        return float(np.sqrt(self.alpha_t_sq))

    @property
    def alpha_s(self) -> float:
        return float(np.sqrt(self.alpha_s_sq))

    def effective_signal(self, c: float) -> float:
        """alpha_t^2 (1 - rho^2 alpha_s^2 / (alpha_s^2 + C)): signal left after using the source."""
        denom = self.alpha_s_sq + c
        frac = 0.0 if denom == 0 else self.rho ** 2 * self.alpha_s_sq / denom
        return self.alpha_t_sq * (1.0 - frac)

    def optimal_ratio(self, c: float) -> float:
        """eta*/lambda* = rho alpha_t alpha_s / (alpha_s^2 + C)."""
        denom = self.alpha_s_sq + c
        return 0.0 if denom == 0 else self.rho * self.alpha_t * self.alpha_s / denom

    @classmethod
    def from_dict(cls, d: dict) -> "RiskScenario":
        try:
            spec = SpectralDistribution.from_dict(d.get("spectrum", "identity"))
            return cls(
                gamma=float(d["gamma"]),
                alpha_t_sq=float(d["alpha_t_sq"]),
                alpha_s_sq=float(d["alpha_s_sq"]),
                rho=float(d["rho"]),
                sigma_sq=float(d["sigma_sq"]),
                c_lower=float(d.get("c_lower", 0.0)),
                c_upper=float(d.get("c_upper", d.get("c_lower", 0.0))),
                spectrum=spec,
            )
        except KeyError as exc:
            raise ParameterError(f"scenario is missing field {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise ParameterError(f"scenario has an invalid value: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "gamma": self.gamma, "alpha_t_sq": self.alpha_t_sq, "alpha_s_sq": self.alpha_s_sq,
            "rho": self.rho, "sigma_sq": self.sigma_sq, "c_lower": self.c_lower,
            "c_upper": self.c_upper, "spectrum": self.spectrum.to_dict(),
        }


def _solve(spectrum: SpectralDistribution, gamma: float, lambdas):
    lam = np.atleast_1d(np.asarray(lambdas, dtype=np.float64))
    if np.any(~(lam > 0)):
        raise ParameterError("lambda must be > 0")
    v, vp, _, resid, failed = kernels.stieltjes_solve(
        spectrum.eigenvalues, spectrum.weights, float(gamma), lam, TOL, MAX_ITER)
    failed = np.asarray(failed, dtype=bool)
    if failed.any():
        k = int(np.flatnonzero(failed)[0])
        raise NumericalError(
            f"Stieltjes fixed point did not converge at lambda={lam[k]:g} within {MAX_ITER} iterations",
            residual=float(resid[k]))
    return v, vp


def _scalar_or_array(x, like):
    return float(x[0]) if np.ndim(like) == 0 else x


def stieltjes_v(spectrum: SpectralDistribution, gamma: float, lambda_):
    """v(-lambda) for scalar or array ``lambda_``."""
    v, _ = _solve(spectrum, gamma, lambda_)
    return _scalar_or_array(v, lambda_)


def stieltjes_v_prime(spectrum: SpectralDistribution, gamma: float, lambda_):
    """v'(-lambda) by implicit differentiation."""
    _, vp = _solve(spectrum, gamma, lambda_)
    return _scalar_or_array(vp, lambda_)


def stieltjes_v_prime_fd(spectrum: SpectralDistribution, gamma: float, lambda_: float) -> float:
    """Central finite difference of v at -lambda, step 1e-6 * max(1, lambda)."""
    h = 1e-6 * max(1.0, lambda_)
    lo, hi = _solve(spectrum, gamma, [lambda_ - h, lambda_ + h])[0]
    # v'(z) = dv/dz and z = -lambda
    return float((lo - hi) / (2.0 * h))


def v_at_zero(spectrum: SpectralDistribution, gamma: float) -> float:
    """v(0) for gamma > 1, Richardson-extrapolated from lambda in {1e-8, 1e-9, 1e-10}."""
    if gamma <= 1:
        raise RegimeError(f"v(0) is finite only for gamma > 1 (got gamma={gamma:g})")
    xs = np.array([1e-8, 1e-9, 1e-10])
    ys = _solve(spectrum, gamma, xs)[0]
    # Neville's scheme evaluated at 0
    p = ys.copy()
    for k in range(1, 3):
        for i in range(3 - k):
            p[i] = (xs[i + k] * p[i] - xs[i] * p[i + 1]) / (xs[i + k] - xs[i])
    return float(p[0])


@dataclass(frozen=True)
class RiskEvaluation:
    lambda_: float
    eta: float
    risk_lower: float
    risk_upper: float
    v_value: float
    v_prime: float


def _risk_from_v(s: RiskScenario, lam, eta, c, v, vp):
    lam = np.asarray(lam, dtype=np.float64)
    eta = np.asarray(eta, dtype=np.float64)
    bias_weight = (lam ** 2 * s.alpha_t_sq + eta ** 2 * (s.alpha_s_sq + c)
                   - 2.0 * lam * eta * s.rho * s.alpha_t * s.alpha_s)
    lv = lam * v
    return bias_weight * (v - lam * vp) / (s.gamma * lv * lv) + s.sigma_sq * vp / (v * v)


def risk(s: RiskScenario, lambda_, eta, c: float):
    """Limiting prediction risk R(lambda, eta, C); broadcasts over arrays.

    ``eta`` may have an extra trailing axis relative to ``lambda_`` (pass
    ``lambda_[:, None]``) to evaluate a whole (lambda, eta) surface with one
    Stieltjes solve per lambda.
    """
    lam = np.asarray(lambda_, dtype=np.float64)
    v, vp = _solve(s.spectrum, s.gamma, lam.ravel())
    v = v.reshape(lam.shape)
    vp = vp.reshape(lam.shape)
    out = _risk_from_v(s, lam, eta, c, v, vp)
    return float(out) if np.ndim(out) == 0 else out


def risk_bounds(s: RiskScenario, lambda_: float, eta: float) -> RiskEvaluation:
    v, vp = _solve(s.spectrum, s.gamma, [lambda_])
    lo = float(_risk_from_v(s, lambda_, eta, s.c_lower, v[0], vp[0]))
    hi = float(_risk_from_v(s, lambda_, eta, s.c_upper, v[0], vp[0]))
    return RiskEvaluation(float(lambda_), float(eta), lo, hi, float(v[0]), float(vp[0]))


def noiseless_risk(s: RiskScenario, lambda_, eta):
    """Risk when the source estimate carries no estimation error (C = 0)."""
    if s.c_lower != 0 or s.c_upper != 0:
        raise ParameterError("noiseless risk requires c_lower = c_upper = 0")
    return risk(s, lambda_, eta, 0.0)


def optimal_lambda(s: RiskScenario, c: float) -> float:
    eff = s.effective_signal(c)
    if eff <= 0:
        raise ParameterError(
            "1 - rho^2 alpha_s^2/(alpha_s^2 + C) <= 0: perfectly correlated noiseless source; "
            "the risk is minimised in the limit lambda -> infinity with eta = lambda * alpha_t/alpha_s")
    return s.gamma * s.sigma_sq / eff


@dataclass(frozen=True)
class OptimalTuning:
    lambda_lower: float  # lambda* using C_L
    lambda_upper: float  # lambda* using C_U
    eta_lower: float
    eta_upper: float
    risk_interval: tuple

    def to_dict(self) -> dict:
        return {
            "lambda_star_lower": self.lambda_lower, "lambda_star_upper": self.lambda_upper,
            "eta_star_lower": self.eta_lower, "eta_star_upper": self.eta_upper,
            "minimal_risk_interval": [float(x) for x in self.risk_interval],
        }


def optimal_tuning(s: RiskScenario) -> OptimalTuning:
    """Risk-optimal (lambda*, eta*) for each bound and the minimal-risk interval.

    The interval is ``[sigma^2/(lam_L v(-lam_L)), sigma^2/(lam_U v(-lam_U))]``.
    Because more source error shrinks the usable signal, ``lam_L >= lam_U``.
    """
    lam_l = optimal_lambda(s, s.c_lower)
    lam_u = optimal_lambda(s, s.c_upper)
    v = _solve(s.spectrum, s.gamma, [lam_l, lam_u])[0]
    interval = (float(s.sigma_sq / (lam_l * v[0])), float(s.sigma_sq / (lam_u * v[1])))
    return OptimalTuning(lam_l, lam_u, lam_l * s.optimal_ratio(s.c_lower),
                         lam_u * s.optimal_ratio(s.c_upper), interval)


def minimal_risk(s: RiskScenario, c: float) -> float:
    """sigma^2 / (lam* v(-lam*)) for a precise source-error level C."""
    lam = optimal_lambda(s, c)
    return s.sigma_sq / (lam * stieltjes_v(s.spectrum, s.gamma, lam))


def target_only_minimal_risk(s: RiskScenario) -> float:
    """Minimal risk of plain ridge, attained at lam = gamma sigma^2 / alpha_t^2."""
    lam = s.gamma * s.sigma_sq / s.alpha_t_sq
    return s.sigma_sq / (lam * stieltjes_v(s.spectrum, s.gamma, lam))


def minimize_along(s: RiskScenario, c: float, rule: str = "optimal",
                   bounds: tuple = (1e-6, 1e6)) -> tuple[float, float, float]:
    """Minimise R(lam, eta(lam), C) over lam for a fixed eta rule.

    ``rule``: ``"optimal"`` (eta = lam rho alpha_t alpha_s/(alpha_s^2+C)),
    ``"dist"`` (eta = lam) or ``"zero"`` (eta = 0). Bounded Brent search in
    log lambda. Returns ``(lam, eta, risk)``.
    """
    ratio = {"optimal": s.optimal_ratio(c), "dist": 1.0, "zero": 0.0}[rule]

    def f(loglam):
        lam = float(np.exp(loglam))
        return risk(s, lam, ratio * lam, c)

    res = minimize_scalar(f, bounds=(np.log(bounds[0]), np.log(bounds[1])), method="bounded",
                          options={"xatol": 1e-10, "maxiter": 500})
    lam = float(np.exp(res.x))
    return lam, ratio * lam, float(res.fun)


def grid_minimum(s: RiskScenario, lambdas, etas, c: float) -> tuple[float, float, float]:
    """Brute-force minimum of R over a lambda x eta grid."""
    lambdas = np.asarray(lambdas, dtype=np.float64)
    R = risk(s, lambdas[:, None], np.asarray(etas, dtype=np.float64)[None, :], c)
    i, j = np.unravel_index(int(np.argmin(R)), R.shape)
    return float(lambdas[i]), float(np.asarray(etas)[j]), float(R[i, j])


def risk_surface_rows(s: RiskScenario, lambdas, eta_matrix):
    lambdas = np.asarray(lambdas, dtype=np.float64)
    eta_matrix = np.asarray(eta_matrix, dtype=np.float64)
    lo = risk(s, lambdas[:, None], eta_matrix, s.c_lower)
    hi = risk(s, lambdas[:, None], eta_matrix, s.c_upper)
    seen = set()
    for i, lam in enumerate(lambdas):
        for j, eta in enumerate(eta_matrix[i]):
            key = (float(lam), float(eta))
            if key in seen:
                continue
            seen.add(key)
            yield {"lambda": key[0], "eta": key[1], "risk_lower": float(lo[i, j]), "risk_upper": float(hi[i, j])}


def limit_checks(s: RiskScenario, big: float = 1e6, small: float = 1e-6) -> dict:
    """Compare the minimal risk at extreme signal strengths against closed-form limits.

    * strong signal, gamma < 1: R* -> sigma^2 / (1 - gamma)
    * strong signal, gamma > 1: R* ~ a_eff / (gamma v(0)), with
      a_eff = alpha_t^2 (1 - rho^2 alpha_s^2/(alpha_s^2 + C))
    * weak signal: (R* - sigma^2) / alpha_t^2 -> (a_eff / alpha_t^2) * T,
      T the mean population eigenvalue

    Each entry carries the computed value, the limit and the relative
    deviation; both C bounds are reported.
    """
    T = s.spectrum.mean
    report = {"T": T, "gamma": s.gamma, "bounds": {}}
    if s.gamma > 1:
        v0 = v_at_zero(s.spectrum, s.gamma)
        report["v0"] = v0
        if s.spectrum.eigenvalues.size == 1 and s.spectrum.eigenvalues[0] == 1.0:
            expected = 1.0 / (s.gamma - 1.0)
            report["v0_identity_check"] = {"value": v0, "expected": expected,
                                           "rel_dev": abs(v0 - expected) / expected}
    for label, c in (("lower", s.c_lower), ("upper", s.c_upper)):
        entry = {}
        strong = replace(s, alpha_t_sq=big)
        r_strong = minimal_risk(strong, c)
        if s.gamma < 1:
            lim = s.sigma_sq / (1.0 - s.gamma)
            entry["strong_signal"] = {"alpha_t_sq": big, "value": r_strong, "limit": lim,
                                      "rel_dev": abs(r_strong - lim) / lim}
        elif s.gamma > 1:
            lim = strong.effective_signal(c) / (s.gamma * report["v0"])
            entry["strong_signal"] = {"alpha_t_sq": big, "value": r_strong, "limit": lim,
                                      "rel_dev": abs(r_strong - lim) / lim}
        weak = replace(s, alpha_t_sq=small)
        if weak.effective_signal(c) > 0:
            r_weak = minimal_risk(weak, c)
            slope = (r_weak - s.sigma_sq) / small
            lim = weak.effective_signal(c) / small * T
            entry["weak_signal"] = {"alpha_t_sq": small, "slope": slope, "limit": lim,
                                    "rel_dev": abs(slope - lim) / lim if lim else abs(slope)}
        report["bounds"][label] = entry
    return report
