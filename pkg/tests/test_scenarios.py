import numpy as np
import pytest
from scipy import stats

from ndigvix.fracts import ArfimaParams, FigarchParams, acf
from ndigvix.levy import NDIGParams, ndig_moments
from ndigvix.ratios import RatioConfig
from ndigvix.scenarios import (ScenarioConfig, refiltered_innovations, shock_whiteness, signal_noise_panel,
                               simulate_scenarios, standardized_innovations, whiteness_tests, write_panel_csv,
                               write_panel_summary)

ARMA = ArfimaParams(0.5, -0.2, 0.0, 0.1)
GARCH = FigarchParams(0.05, 0.5, 0.7, 0.0)
LONG = ArfimaParams(0.3, -0.2, 0.268, 0.0)
FIG = FigarchParams(0.05, 0.3, 0.5, 0.01)
SKEWED = NDIGParams.from_vector(0.0, 1.0, -0.7, 0.0, 5.0, 5.0)
SYMMETRIC = NDIGParams.from_vector(0.0, 1.0, 0.0, 0.0, 2.0, 2.0)


def arma_garch_reference(rng, S, n, burn, a, f):
    """Path-vectorized loop: z_t = mu + w_t, w_t = phi w_{t-1} + e_t + theta e_{t-1}."""
    alpha = f.phi_v - f.beta
    h = np.full(S, f.omega / (1 - f.beta - alpha))
    e2 = h.copy()
    w = np.zeros(S)
    e = np.zeros(S)
    out = np.empty((S, n))
    for t in range(n + burn):
        h = f.omega + alpha * e2 + f.beta * h
        e_new = np.sqrt(h) * rng.standard_normal(S)
        w = a.phi * w + e_new + a.theta * e
        e, e2 = e_new, e_new**2
        if t >= burn:
            out[:, t - burn] = a.mu + w
    return out


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(n_scenarios=0), dict(horizon=10), dict(burn=-1)])
    def test_validation(self, kw):
        base = dict(arfima=ARMA, figarch=GARCH, horizon=100)
        with pytest.raises(ValueError):
            ScenarioConfig(**{**base, **kw})


class TestInnovations:
    def test_standardized(self):
        x = standardized_innovations(SKEWED, 400_000, 3)
        n = x.size
        assert abs(x.mean()) < 3 / np.sqrt(n)
        assert abs(x.var() - 1) < 0.02
        # shape survives the affine map
        assert stats.skew(x) == pytest.approx(ndig_moments(SKEWED)[2], abs=0.05)

    def test_gaussian_default(self):
        x = standardized_innovations(None, 1000, 4)
        np.testing.assert_array_equal(x, np.random.default_rng(4).standard_normal(1000))

    def test_driver_acf(self):
        # lags pooled over scenarios: one path alone meets the 95% share only about 2 times in 3
        n = 10_000
        sc = simulate_scenarios(ScenarioConfig(LONG, FIG, horizon=n, n_scenarios=200,
                                               innovation_model=SKEWED, seed=5))
        r = np.array([acf(row, 100)[1:] for row in sc.innovations])
        assert np.mean(np.abs(r) < 2 / np.sqrt(n)) >= 0.95
        assert np.abs(r.mean(axis=0)).max() < 4 / np.sqrt(n * 200)


class TestSimulation:
    def test_deterministic(self):
        cfg = ScenarioConfig(LONG, FIG, horizon=200, n_scenarios=20, innovation_model=SKEWED, seed=9, burn=100)
        a, b = simulate_scenarios(cfg), simulate_scenarios(cfg)
        assert np.array_equal(a.z, b.z) and np.array_equal(a.sigma2, b.sigma2)

    def test_per_scenario_seeds(self):
        # scenario i does not depend on how many others are simulated
        small = simulate_scenarios(ScenarioConfig(ARMA, GARCH, horizon=100, n_scenarios=3, seed=1, burn=50))
        large = simulate_scenarios(ScenarioConfig(ARMA, GARCH, horizon=100, n_scenarios=1200, seed=1, burn=50))
        np.testing.assert_array_equal(small.z, large.z[:3])
        assert large.z.shape == (1200, 100)

    def test_slices_match_full_run(self):
        cfg = ScenarioConfig(ARMA, GARCH, horizon=100, n_scenarios=1200, seed=1, burn=50)
        full = simulate_scenarios(cfg)
        part = simulate_scenarios(cfg, 999, 1003)
        np.testing.assert_array_equal(part.z, full.z[999:1003])
        with pytest.raises(ValueError):
            simulate_scenarios(cfg, 5, 5)

    def test_gaussian_reduction(self):
        S, n, burn = 2000, 100, 500
        sc = simulate_scenarios(ScenarioConfig(ARMA, GARCH, horizon=n, n_scenarios=S, seed=2, burn=burn))
        ref = arma_garch_reference(np.random.default_rng(99), S, n, burn, ARMA, GARCH)
        # one value per path keeps the KS samples independent
        for t in (0, n // 2, n - 1):
            assert stats.ks_2samp(sc.z[:, t], ref[:, t]).pvalue > 0.01

    def test_innovations_recovered(self):
        sc = simulate_scenarios(ScenarioConfig(LONG, FIG, horizon=1500, n_scenarios=3, innovation_model=SKEWED,
                                               seed=3, burn=0))
        # with no burn-in the filter sees the same presample as the simulator
        np.testing.assert_allclose(refiltered_innovations(sc)[:, 1100:], sc.innovations[:, 1100:], atol=1e-6)


@pytest.fixture(scope="module")
def scenarios():
    return simulate_scenarios(ScenarioConfig(ARMA, GARCH, horizon=500, n_scenarios=10_000,
                                             innovation_model=SYMMETRIC, seed=1, burn=200))


class TestPanel:
    def test_symmetric_median(self, scenarios):
        panel = signal_noise_panel(scenarios.innovations[:2000], RatioConfig(window=250))
        assert 0.8 <= panel.summary()["rachev"][2] <= 1.25

    def test_reorder_invariant(self, scenarios):
        x = scenarios.innovations[:300]
        perm = np.random.default_rng(0).permutation(300)
        a = signal_noise_panel(x).summary()
        b = signal_noise_panel(x[perm]).summary()
        np.testing.assert_array_equal(a["rachev"], b["rachev"])
        np.testing.assert_array_equal(a["starr"], b["starr"])

    def test_monte_carlo_convergence(self, scenarios):
        cfg = RatioConfig(window=250)
        half = signal_noise_panel(scenarios.innovations[:5000], cfg).summary()
        full = signal_noise_panel(scenarios.innovations, cfg).summary()
        assert np.all(np.abs(half["rachev"] / full["rachev"] - 1) < 0.02)
        # STARR quantiles sit at 0 by the positive-part convention; compare against the panel spread
        spread = full["starr"][-1] - full["starr"][0]
        assert np.all(np.abs(half["starr"] - full["starr"]) < 0.02 * spread)

    def test_short_horizon(self):
        with pytest.raises(ValueError):
            signal_noise_panel(np.zeros((2, 100)), RatioConfig(window=250))

    def test_csv(self, scenarios, tmp_path):
        panel = signal_noise_panel(scenarios.innovations[:10])
        write_panel_csv(tmp_path / "p.csv", panel)
        write_panel_summary(tmp_path / "q.csv", panel)
        rows = (tmp_path / "p.csv").read_text().splitlines()
        assert rows[0] == "scenario_id,rachev,starr" and len(rows) == 11
        assert (tmp_path / "q.csv").read_text().splitlines()[0] == "quantile,rachev,starr"


class TestWhiteness:
    def test_size(self):
        rejections = 0
        for seed in range(1000):
            rep = whiteness_tests(np.random.default_rng(seed).standard_normal(10_000), lags=(20,))
            rejections += not rep.white
        # binomial(1000, 0.05) has standard deviation 0.0069
        assert 0.029 <= rejections / 1000 <= 0.071

    def test_power(self):
        rejections = 0
        for seed in range(200):
            nu = np.random.default_rng(seed).standard_normal(10_000)
            x = np.empty_like(nu)
            x[0] = nu[0]
            for t in range(1, nu.size):
                x[t] = 0.3 * x[t - 1] + nu[t]
            rejections += not whiteness_tests(x).white
        assert rejections / 200 > 0.95

    def test_constant_flagged(self):
        rep = whiteness_tests(np.full(500, 2.0))
        assert rep.degenerate and not rep.white and rep.notes == ["constant series"]

    def test_length_requirement(self):
        with pytest.raises(ValueError):
            whiteness_tests(np.random.default_rng(0).standard_normal(100))

    def test_report_fields(self):
        rep = whiteness_tests(np.random.default_rng(0).standard_normal(1000))
        assert rep.lags == (10, 20) and len(rep.stats) == 2 and all(0 <= p <= 1 for p in rep.pvalues)

    def test_shock_whiteness_shape(self):
        x = np.random.default_rng(1).standard_normal((4, 3000))
        pv = shock_whiteness(x, RatioConfig(window=50, step=50), lag=10)
        assert pv.shape == (4, 2) and np.all((pv >= 0) & (pv <= 1))
