import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from angletl import rmt
from angletl.core import NumericalError, ParameterError, RegimeError, SpectralDistribution

IDENTITY = SpectralDistribution.identity()
TWO_POINT = SpectralDistribution.uniform_atoms([0.5, 2.0])

mp.mp.dps = 40


def mp_v(spec, gamma, lam):
    t = [mp.mpf(x) for x in spec.eigenvalues]
    w = [mp.mpf(x) for x in spec.weights]

    def f(v):
        return v * (lam + gamma * sum(wi * ti / (1 + ti * v) for wi, ti in zip(w, t))) - 1

    return mp.findroot(f, (mp.mpf(0), mp.mpf(1) / lam), solver="anderson")


def mp_v_prime(spec, gamma, lam):
    # v'(z) at z = -lam equals -d/dlam v(-lam)
    return -mp.diff(lambda x: mp_v(spec, gamma, x), mp.mpf(lam))


@pytest.mark.parametrize("spec", [IDENTITY, TWO_POINT], ids=["identity", "two_point"])
@pytest.mark.parametrize("gamma", [0.3, 1.0, 2.0, 5.0])
@pytest.mark.parametrize("lam", [1e-3, 0.1, 1.0, 10.0, 1e3])
def test_v_against_high_precision(spec, gamma, lam):
    v = rmt.stieltjes_v(spec, gamma, lam)
    assert v == pytest.approx(float(mp_v(spec, gamma, lam)), rel=1e-11)


@pytest.mark.parametrize("gamma", [0.5, 2.0])
@pytest.mark.parametrize("lam", [0.01, 1.0, 100.0])
def test_v_prime_against_high_precision(gamma, lam):
    got = rmt.stieltjes_v_prime(TWO_POINT, gamma, lam)
    assert got == pytest.approx(float(mp_v_prime(TWO_POINT, gamma, lam)), rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.05, 10.0), st.floats(1e-4, 1e4))
def test_identity_closed_form(gamma, lam):
    # v solves lam v^2 + (lam + gamma - 1) v - 1 = 0 for the identity spectrum
    b = lam + gamma - 1.0
    expected = 2.0 / (b + np.sqrt(b * b + 4.0 * lam))
    assert rmt.stieltjes_v(IDENTITY, gamma, lam) == pytest.approx(expected, rel=1e-11)


def test_vectorised_matches_scalar():
    lams = np.array([0.01, 0.3, 7.0])
    vec = rmt.stieltjes_v(TWO_POINT, 1.5, lams)
    assert vec.shape == (3,)
    for lam, v in zip(lams, vec):
        assert v == rmt.stieltjes_v(TWO_POINT, 1.5, float(lam))


def test_v_prime_fd_agreement():
    for gamma in (0.5, 2.0):
        for lam in (0.1, 1.0, 10.0):
            a = rmt.stieltjes_v_prime(TWO_POINT, gamma, lam)
            b = rmt.stieltjes_v_prime_fd(TWO_POINT, gamma, lam)
            assert abs(a - b) <= 1e-6 * abs(a)


def test_lambda_must_be_positive():
    with pytest.raises(ParameterError):
        rmt.stieltjes_v(IDENTITY, 2.0, 0.0)


def test_non_convergence_reports_residual(monkeypatch):
    monkeypatch.setattr(rmt, "MAX_ITER", 1)
    with pytest.raises(NumericalError) as exc:
        rmt.stieltjes_v(TWO_POINT, 3.0, 1e-6)
    assert exc.value.residual is not None and exc.value.residual > 0


class TestVAtZero:
    @pytest.mark.parametrize("gamma", [1.5, 2.0, 4.0])
    def test_identity(self, gamma):
        assert rmt.v_at_zero(IDENTITY, gamma) == pytest.approx(1.0 / (gamma - 1.0), rel=1e-9)

    def test_two_point(self):
        # at lam -> 0 the equation reduces to gamma * v * int t/(1+tv) dF = 1
        f = lambda v: 2.0 * v * (0.5 * 0.5 / (1 + 0.5 * v) + 0.5 * 2.0 / (1 + 2.0 * v)) - 1  # noqa: E731
        expected = float(mp.findroot(f, 1.0))
        assert rmt.v_at_zero(TWO_POINT, 2.0) == pytest.approx(expected, rel=1e-8)

    def test_regime(self):
        with pytest.raises(RegimeError):
            rmt.v_at_zero(IDENTITY, 0.8)


class TestScenario:
    def test_validation(self):
        with pytest.raises(ParameterError):
            rmt.RiskScenario(2.0, 1.0, 1.0, 1.5, 0.5)
        with pytest.raises(ParameterError):
            rmt.RiskScenario(2.0, 1.0, 1.0, 0.5, 0.5, c_lower=0.2, c_upper=0.1)

    def test_from_dict_missing(self):
        with pytest.raises(ParameterError, match="rho"):
            rmt.RiskScenario.from_dict({"gamma": 2, "alpha_t_sq": 1, "alpha_s_sq": 1, "sigma_sq": 1})

    def test_round_trip(self):
        s = rmt.RiskScenario(2.0, 1.0, 0.5, 0.3, 0.5, 0.01, 0.02, TWO_POINT)
        t = rmt.RiskScenario.from_dict(s.to_dict())
        assert t.to_dict() == s.to_dict()


def test_zero_covariance_risk_is_noise():
    s = rmt.RiskScenario(2.0, 1.0, 1.0, 0.5, 0.7, spectrum=SpectralDistribution.point_mass(0.0))
    for lam, eta in [(0.1, 0.0), (1.0, 3.0)]:
        assert rmt.risk(s, lam, eta, 0.0) == pytest.approx(0.7, rel=1e-12)


def test_eta_one_way_limit():
    # eta -> 0 with lam -> infinity leaves only the null predictor: risk alpha_t^2 T + sigma^2
    s = rmt.RiskScenario(2.0, 1.3, 1.0, 0.5, 0.7, spectrum=TWO_POINT)
    assert rmt.risk(s, 1e9, 0.0, 0.0) == pytest.approx(1.3 * TWO_POINT.mean + 0.7, rel=1e-7)


def mc_conditional_risk(gamma, n, a_t, a_s, rho, sigma_sq, lam, eta, c_delta, reps, seed):
    """Exact conditional risk ||beta_hat - beta||^2 + sigma^2 averaged over draws (identity design)."""
    rng = np.random.default_rng(seed)
    p = int(gamma * n)
    out = []
    for _ in range(reps):
        z1, z2 = rng.standard_normal((2, p))
        w = a_s * z1 / np.sqrt(p)
        beta = a_t * (rho * z1 + np.sqrt(1 - rho ** 2) * z2) / np.sqrt(p)
        w_hat = w + np.sqrt(c_delta / p) * rng.standard_normal(p)
        X = rng.standard_normal((n, p))
        Y = X @ beta + np.sqrt(sigma_sq) * rng.standard_normal(n)
        A = X.T @ X + n * lam * np.eye(p)
        b = np.linalg.solve(A, X.T @ Y + n * eta * w_hat)
        out.append(np.sum((b - beta) ** 2) + sigma_sq)
    out = np.array(out)
    return out.mean(), out.std(ddof=1) / np.sqrt(reps)


@pytest.mark.slow
@pytest.mark.parametrize("gamma,lam,eta,c", [(2.0, 0.5, 0.2, 0.0), (0.5, 0.2, 0.3, 0.0), (2.0, 1.0, 0.8, 0.3)])
def test_risk_monte_carlo(gamma, lam, eta, c):
    mc, se = mc_conditional_risk(gamma, 150, 1.0, 1.0, 0.6, 0.5, lam, eta, c, 60, seed=int(100 * gamma + 10 * lam))
    s = rmt.RiskScenario(gamma, 1.0, 1.0, 0.6, 0.5, c, c)
    th = rmt.risk(s, lam, eta, c)
    # finite-n bias is O(1/n); allow 4 se plus 2%
    assert abs(mc - th) < 4 * se + 0.02 * th


class TestOptimalTuning:
    def test_analytic_optimum_matches_search(self):
        s = rmt.RiskScenario(1.7, 1.2, 0.8, 0.6, 0.4, spectrum=TWO_POINT)
        lam, eta, r = rmt.minimize_along(s, 0.0, "optimal")
        assert lam == pytest.approx(rmt.optimal_lambda(s, 0.0), rel=1e-5)
        assert r == pytest.approx(rmt.minimal_risk(s, 0.0), rel=1e-10)

    def test_minimal_risk_identity(self):
        s = rmt.RiskScenario(2.0, 1.0, 1.0, 0.9, 0.5)
        lam = rmt.optimal_lambda(s, 0.0)
        assert lam == pytest.approx(2.0 * 0.5 / 0.19)
        assert rmt.minimal_risk(s, 0.0) == pytest.approx(rmt.risk(s, lam, lam * 0.9, 0.0), rel=1e-12)

    def test_rho_zero_gives_zero_eta(self):
        t = rmt.optimal_tuning(rmt.RiskScenario(2.0, 1.0, 1.0, 0.0, 0.5))
        assert t.eta_lower == 0.0 and t.eta_upper == 0.0

    def test_bound_ordering(self):
        s = rmt.RiskScenario(2.0, 1.0, 1.0, 0.8, 0.5, c_lower=0.05, c_upper=0.4)
        t = rmt.optimal_tuning(s)
        # a larger source error leaves more residual signal, so a smaller lambda is optimal
        assert t.lambda_lower >= t.lambda_upper
        assert t.risk_interval[0] <= t.risk_interval[1]
        assert t.risk_interval[0] == pytest.approx(rmt.minimal_risk(s, 0.05), rel=1e-12)

    def test_no_negative_transfer(self):
        for rho in (-0.9, -0.3, 0.0, 0.4, 0.95):
            s = rmt.RiskScenario(1.5, 1.0, 2.0, rho, 0.5, 0.2, 0.2)
            assert rmt.minimal_risk(s, 0.2) <= rmt.target_only_minimal_risk(s) * (1 + 1e-12)

    def test_perfect_source_rejected(self):
        s = rmt.RiskScenario(2.0, 1.0, 1.0, 1.0, 0.5)
        with pytest.raises(ParameterError):
            rmt.optimal_lambda(s, 0.0)

    def test_grid_cannot_beat_optimum(self):
        s = rmt.RiskScenario(0.7, 1.0, 0.5, 0.5, 0.3)
        _, _, r = rmt.grid_minimum(s, np.logspace(-2, 1, 60), np.linspace(-1, 3, 60), 0.0)
        assert r >= rmt.minimal_risk(s, 0.0) * (1 - 1e-12)


class TestLimitChecks:
    @pytest.mark.parametrize("gamma", [0.5, 2.0])
    def test_identity(self, gamma):
        rep = rmt.limit_checks(rmt.RiskScenario(gamma, 1.0, 1.0, 0.6, 0.5, 0.1, 0.3))
        for b in rep["bounds"].values():
            assert b["strong_signal"]["rel_dev"] < 1e-3
            assert b["weak_signal"]["rel_dev"] < 1e-3
        if gamma > 1:
            assert rep["v0_identity_check"]["rel_dev"] < 1e-9

    def test_weak_signal_slope_has_no_noise_factor(self):
        # sigma^2 = 0.3 separates the slope T (1 - rho^2 a_s^2/(a_s^2 + C)) from sigma^2 times it
        s = rmt.RiskScenario(1.5, 1.0, 1.0, 0.7, 0.3, spectrum=TWO_POINT)
        w = rmt.limit_checks(s)["bounds"]["lower"]["weak_signal"]
        assert w["slope"] == pytest.approx((1 - 0.49) * TWO_POINT.mean, rel=1e-3)
        assert abs(w["slope"] - 0.3 * (1 - 0.49) * TWO_POINT.mean) > 0.1

    def test_json_ready(self):
        import json

        json.dumps(rmt.limit_checks(rmt.RiskScenario(3.0, 1.0, 1.0, 0.2, 1.0)))


def test_surface_rows():
    s = rmt.RiskScenario(2.0, 1.0, 1.0, 0.5, 0.5, 0.0, 0.1)
    rows = list(rmt.risk_surface_rows(s, [0.5, 1.0], np.array([[0.0, 0.5], [0.0, 1.0]])))
    assert len(rows) == 4 and all(r["risk_lower"] <= r["risk_upper"] for r in rows)
