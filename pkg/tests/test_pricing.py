import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ndigvix import pricing
from ndigvix.levy import NDIGParams, cgf, ndig_sample_x
from ndigvix.pricing import (ArbitrageError, DampingError, OptionQuote, PricerConfig, PricingError, a_max,
                             bs_price, carr_madan_call, effective_a, exact_damping_limit, implied_vol,
                             price_surface, put_from_parity, read_option_grid, write_option_grid)

BSM = NDIGParams.from_vector(0.0, 0.2, 0.0, 0.0, 1e10, 1e10)
GENERIC = NDIGParams.from_vector(0.05, 0.2, -0.3, 0.1, 2.0, 3.0)


class TestDamping:
    def test_scalar_evaluations(self):
        assert a_max(NDIGParams.from_vector(0, 0.2, 0, 0, 1, 1)) == pytest.approx(25 * math.sqrt(0.99) - 1, abs=1e-12)
        assert a_max(NDIGParams.from_vector(0, 1, 0, 0, 1, 1)) == pytest.approx(math.sqrt(0.75) - 1, abs=1e-12)

    def test_no_positive_a(self):
        # a_max < 0: the pricer refuses rather than picking a damping value
        with pytest.raises(DampingError):
            effective_a(NDIGParams.from_vector(0, 1, 0, 0, 1, 1))

    def test_negative_radicand(self):
        with pytest.raises(DampingError):
            a_max(NDIGParams.from_vector(0, 1, 0, 0, 0.1, 10))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0.05, 0.5), st.floats(-0.3, 0.3), st.floats(-0.3, 0.3), st.floats(0.5, 50), st.floats(0.5, 50))
    def test_effective_a_below_one(self, s, g, r, lt, lu):
        p = NDIGParams.from_vector(0.0, s, g, r, lt, lu)
        try:
            a = effective_a(p)
        except DampingError:
            return
        assert 0 < a < 1
        assert a < a_max(p) and a < exact_damping_limit(p)

    def test_explicit_a_validated(self):
        with pytest.raises(DampingError):
            PricerConfig(a=1.2)
        p = NDIGParams.from_vector(0, 1, 0, 0, 4, 4)
        bound = min(a_max(p), exact_damping_limit(p))
        assert 0 < bound < 1
        assert effective_a(p, PricerConfig(a=0.5 * bound)) == 0.5 * bound
        with pytest.raises(DampingError):
            effective_a(p, PricerConfig(a=min(0.999, 1.01 * bound)))

    def test_a_sensitivity(self):
        prices = [carr_madan_call(GENERIC, PricerConfig(a=a), [80.0, 100.0, 120.0], 0.5) for a in (0.3, 0.5, 0.7)]
        np.testing.assert_allclose(prices[0], prices[2], rtol=1e-6)


class TestCarrMadan:
    def test_black_scholes_limit(self):
        c = carr_madan_call(BSM, PricerConfig(), [100.0], 1.0)[0]
        assert c == pytest.approx(7.966, abs=0.01)
        assert c == pytest.approx(bs_price(100, 100, 0, 1, 0.2), abs=1e-8)

    def test_black_scholes_strip_with_rate(self):
        cfg = PricerConfig(r=0.03)
        step = 2 * np.pi / (cfg.n_grid * cfg.eta)
        # strikes on log-strike nodes need no interpolation
        on_grid = 100 * np.exp(step * np.arange(-20, 21, 4))
        c = carr_madan_call(BSM, cfg, on_grid, 0.5)
        np.testing.assert_allclose(c, bs_price(100, on_grid, 0.03, 0.5, 0.2), atol=1e-7)
        # between nodes the monotone cubic costs about 1e-4 at this node spacing
        off = np.linspace(70, 140, 15)
        c = carr_madan_call(BSM, cfg, off, 0.5)
        np.testing.assert_allclose(c, bs_price(100, off, 0.03, 0.5, 0.2), atol=5e-4)

    def test_small_strike(self):
        # K -> 0 leaves the forward: E^Q[e^{X}] = S0 e^{r tau}
        c = carr_madan_call(GENERIC, PricerConfig(r=0.02), [1e-3], 1.0)[0]
        assert c == pytest.approx(100 - 1e-3 * math.exp(-0.02), rel=1e-4)

    def test_monte_carlo(self):
        x = ndig_sample_x(GENERIC, 400_000, seed=21, t=0.5)
        ST = 100 * np.exp(x - 0.5 * cgf(1.0, GENERIC))
        K = np.array([85.0, 100.0, 115.0])
        pay = np.maximum(ST[:, None] - K, 0)
        z = np.abs(carr_madan_call(GENERIC, PricerConfig(), K, 0.5) - pay.mean(0)) / (pay.std(0) / np.sqrt(x.size))
        assert np.all(z < 3)

    def test_shape_constraints(self):
        K = np.linspace(60, 160, 101)
        c = carr_madan_call(GENERIC, PricerConfig(), K, 0.25)
        assert np.all(c >= 0)
        assert np.all(np.diff(c) <= 1e-12)
        assert np.all(c[:-2] - 2 * c[1:-1] + c[2:] >= -1e-8)

    def test_truncation_control(self):
        base = carr_madan_call(GENERIC, PricerConfig(), [100.0], 1.0)[0]
        wide = carr_madan_call(GENERIC, PricerConfig(n_grid=32768), [100.0], 1.0)[0]
        assert abs(wide / base - 1) < 1e-6

    def test_nan_cf_reported(self, monkeypatch):
        monkeypatch.setattr(pricing, "log_cf", lambda v, p: np.full(np.shape(v), np.nan + 0j))
        with pytest.raises(PricingError, match="v="):
            carr_madan_call(GENERIC, PricerConfig(), [100.0], 1.0)

    def test_nonpositive_strike(self):
        with pytest.raises(ValueError):
            carr_madan_call(GENERIC, PricerConfig(), [0.0, 100.0], 1.0)


class TestParity:
    def test_atm_zero_rate(self):
        assert put_from_parity(7.966, 100, 100, 0, 1) == pytest.approx(7.966, abs=1e-12)

    def test_zero_strike(self):
        assert put_from_parity(100.0, 100, 0.0, 0.03, 1) == 0.0

    def test_violation(self):
        with pytest.raises(ArbitrageError):
            put_from_parity(1.0, 100, 90, 0, 1)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(50, 150), st.floats(50, 150), st.floats(0, 0.08), st.floats(0.05, 3), st.floats(0.05, 1))
    def test_identity(self, S, K, r, tau, sig):
        c = float(bs_price(S, K, r, tau, sig))
        p = put_from_parity(c, S, K, r, tau)
        assert abs(c - p - S + K * math.exp(-r * tau)) < 1e-10
        assert p == pytest.approx(float(bs_price(S, K, r, tau, sig, "put")), abs=1e-9)


class TestImpliedVol:
    @pytest.mark.parametrize("K,kind", [(80, "call"), (100, "call"), (120, "put"), (95, "put")])
    def test_round_trip(self, K, kind):
        price = float(bs_price(100, K, 0.01, 0.75, 0.2, kind))
        assert implied_vol(OptionQuote(K, 0.75, kind, price), 100, 0.01) == pytest.approx(0.2, abs=1e-8)

    def test_lower_bound(self):
        lower = 100 - 90 * math.exp(-0.01)
        assert implied_vol(OptionQuote(90, 1.0, "call", lower), 100, 0.01) <= 1e-6

    def test_outside_bounds(self):
        with pytest.raises(ValueError):
            implied_vol(OptionQuote(90, 1.0, "call", 101.0), 100, 0.0)

    def test_ndig_smile_finite(self):
        K = np.linspace(70, 130, 13)
        surf = price_surface(GENERIC, PricerConfig(), K, [0.25, 1.0])
        assert np.all(np.isfinite(surf.implied_vols)) and np.all(surf.implied_vols > 0)


class TestSurface:
    K = np.linspace(80, 125, 10)

    def test_flat_in_black_scholes_limit(self):
        surf = price_surface(BSM, PricerConfig(), self.K, [0.25, 0.5, 1.0])
        # off-node strikes carry the interpolation error, about 1e-5 in vol
        np.testing.assert_allclose(surf.implied_vols, 0.2, atol=1e-4)

    def test_heavy_tails_curve_the_smile(self):
        heavy = NDIGParams.from_vector(0.0, 0.2, 0.0, 0.0, 0.2, 1.0)
        k = np.log(self.K / 100)

        def curvature(p):
            iv = price_surface(p, PricerConfig(), self.K, [0.25]).implied_vols[0]
            return np.polyfit(k, iv, 2)[0]

        assert curvature(heavy) > curvature(BSM) + 1e-3

    def test_reproducible_and_monotone(self, tmp_path):
        a = price_surface(GENERIC, PricerConfig(), self.K, [0.5])
        b = price_surface(GENERIC, PricerConfig(), self.K, [0.5])
        assert np.array_equal(a.call_prices, b.call_prices) and np.array_equal(a.implied_vols, b.implied_vols)
        assert np.all(np.diff(a.call_prices[0]) < 0)
        path = tmp_path / "grid.csv"
        write_option_grid(path, a)
        rows = read_option_grid(path)
        assert len(rows) == 2 * self.K.size
        q, iv = rows[0]
        assert q.kind == "call" and q.price == a.call_prices[0, 0] and iv == a.implied_vols[0, 0]
