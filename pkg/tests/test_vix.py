import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ndigvix import vix
from ndigvix.calibration import CalibrationResult
from ndigvix.levy import NDIGParams
from ndigvix.pricing import OptionQuote, PricerConfig, bs_price, carr_madan_call, implied_vol, put_from_parity

FINE = dict(n_grid=32768, eta=0.05)


def tau_of(days):
    return days * vix.MINUTES_PER_DAY / vix.MINUTES_PER_YEAR


def strip_from_prices(days, K, calls, puts, r):
    tau = tau_of(days)
    quotes = [OptionQuote(k, tau, "call", float(c)) for k, c in zip(K, calls)]
    quotes += [OptionQuote(k, tau, "put", float(max(p, 0.0))) for k, p in zip(K, puts)]
    return vix.TermStrip(days, quotes, r)


def bsm_strip(days, sigma, r=0.01, dK=0.5, lo=40.0, hi=250.0):
    K = np.arange(lo, hi + dK / 2, dK)
    tau = tau_of(days)
    return strip_from_prices(days, K, bs_price(100, K, r, tau, sigma), bs_price(100, K, r, tau, sigma, "put"), r)


def ndig_strip(p, days, r=0.01, dK=0.5, periods_per_year=1.0):
    K = np.arange(40.0, 250.0 + dK / 2, dK)
    tau = tau_of(days)
    cfg = PricerConfig(r=r, periods_per_year=periods_per_year, **FINE)
    calls = carr_madan_call(p, cfg, K, tau)
    puts = put_from_parity(calls, 100.0, K, r, tau, tol=1e-8 * 100)
    return strip_from_prices(days, K, calls, puts, r)


def result(p, i=0):
    return CalibrationResult(p, 0.0, (0.0,) * 5, True, 0, np.datetime64("2015-01-01") + i)


class TestVixValue:
    @pytest.mark.parametrize("w1,s1,w2,s2,expected", [
        (1.0, 0.2, 0.0, 0.0, 20.0),
        (0.5, 0.2, 0.5, 0.2, 20.0),
        (0.6, 0.2, 0.4, 0.3, 100 * math.sqrt(0.06)),
    ])
    def test_examples(self, w1, s1, w2, s2, expected):
        assert vix.vix_value(vix.VixInputs(w1, w2, s1, s2)) == pytest.approx(expected, abs=1e-12)

    def test_last_example_rounded(self):
        assert round(vix.vix_value(vix.VixInputs(0.6, 0.4, 0.2, 0.3)), 3) == 24.495

    @pytest.mark.parametrize("w1,w2", [(0.7, 0.4), (-0.1, 1.1), (1.2, -0.2)])
    def test_bad_weights(self, w1, w2):
        with pytest.raises(ValueError):
            vix.VixInputs(w1, w2, 0.2, 0.2)

    @given(st.floats(0, 1), st.floats(0.01, 1), st.floats(0.01, 1), st.floats(0.001, 0.1))
    def test_monotone_and_swap(self, w1, s1, s2, bump):
        w2 = 1.0 - w1
        base = vix.vix_value(vix.VixInputs(w1, w2, s1, s2))
        assert vix.vix_value(vix.VixInputs(w1, w2, s1 + bump, s2)) >= base
        assert vix.vix_value(vix.VixInputs(w1, w2, s1, s2 + bump)) >= base
        assert vix.vix_value(vix.VixInputs(w2, w1, s2, s1)) == pytest.approx(base, rel=1e-14)

    def test_interpolation_weights(self):
        day = vix.MINUTES_PER_DAY
        assert vix.interpolation_weights(28 * day, 35 * day) == pytest.approx((5 / 7, 2 / 7))
        assert vix.interpolation_weights(30 * day, 37 * day) == (1.0, 0.0)
        with pytest.raises(ValueError):
            vix.interpolation_weights(31 * day, 35 * day)


class TestTermVariance:
    def test_black_scholes_strip(self):
        assert vix.term_variance(bsm_strip(30, 0.2)) == pytest.approx(0.04, abs=2e-4)

    def test_refinement(self):
        a = vix.term_variance(bsm_strip(30, 0.2, dK=0.5))
        b = vix.term_variance(bsm_strip(30, 0.2, dK=0.25))
        assert abs(a - b) < 1e-4

    def test_forward_from_parity(self):
        F, K0 = vix.forward_level(bsm_strip(30, 0.2, r=0.03))
        assert F == pytest.approx(100 * math.exp(0.03 * tau_of(30)), rel=1e-10)
        assert K0 <= F < K0 + 0.5

    def test_heavy_tails_raise_variance(self):
        heavy = NDIGParams.from_vector(0.0, 0.15, 0.0, 0.0, 0.2, 1.0)
        strip = ndig_strip(heavy, 30)
        F, K0 = vix.forward_level(strip)
        atm = [q for q in strip.quotes if q.strike == K0 and q.kind == "call"][0]
        sigma = implied_vol(atm, 100.0, 0.01)
        assert vix.term_variance(strip) > vix.term_variance(bsm_strip(30, sigma)) + 1e-3

    def test_too_few_quotes(self):
        tau = tau_of(30)
        K = [95.0, 100.0, 105.0, 110.0, 115.0]
        quotes = [OptionQuote(k, tau, kind, float(bs_price(100, k, 0, tau, 0.2, kind)))
                  for k in K for kind in ("call", "put")]
        with pytest.raises(ValueError, match="3 OTM"):
            vix.term_variance(vix.TermStrip(30, quotes, 0.0))

    def test_zero_bid_cut_off(self):
        strip = bsm_strip(30, 0.2, dK=5.0)
        bids = {(q.strike, q.kind): (0.0 if q.strike >= 150 else 1.0) for q in strip.quotes}
        cut = vix.term_variance(vix.TermStrip(30, strip.quotes, strip.r, bids))
        assert cut < vix.term_variance(strip)

    def test_expiry_window(self):
        with pytest.raises(ValueError):
            vix.TermStrip(20, (), 0.0)


class TestIndexFromStrips:
    def test_flat_world(self):
        assert vix.vix_from_strips(bsm_strip(28, 0.2), bsm_strip(35, 0.2)) == pytest.approx(20.0, abs=0.05)

    def test_agrees_with_ndig_volatility_in_bsm_limit(self):
        daily = NDIGParams.from_vector(0.0, 0.01, 0.0, 0.0, 1e10, 1e10)
        level = vix.vix_from_strips(ndig_strip(daily, 28, periods_per_year=252),
                                    ndig_strip(daily, 35, periods_per_year=252))
        model = vix.ndig_vvix_series([result(daily)]).values[0]
        assert level / 100 == pytest.approx(model, rel=0.02)


class TestVVIX:
    def test_bsm_limit_daily(self):
        s = vix.ndig_vvix_series([result(NDIGParams.from_vector(0.0, 0.01, 0.0, 0.0, 1e10, 1e10))])
        assert s.values[0] == pytest.approx(0.01 * math.sqrt(252), rel=1e-6)
        assert round(s.values[0], 4) == 0.1587

    def test_constant_params_flat(self):
        p = NDIGParams.from_vector(0.0, 0.01, -0.003, 0.0, 5, 5)
        s = vix.ndig_vvix_series([result(p, i) for i in range(10)])
        assert np.ptp(s.values) == 0

    def test_jump_at_break(self):
        lo = NDIGParams.from_vector(0.0, 0.01, -0.003, 0.0, 5, 5)
        hi = NDIGParams.from_vector(0.0, 0.02, -0.006, 0.0, 5, 5)
        s = vix.ndig_vvix_series([result(lo if i < 6 else hi, i) for i in range(12)])
        assert int(np.argmax(np.diff(s.values))) == 5

    def test_failed_windows_skipped(self):
        bad = CalibrationResult(NDIGParams(), float("nan"), (float("nan"),) * 5, False, 0,
                                np.datetime64("2015-01-02"), "boom")
        s = vix.ndig_vvix_series([result(NDIGParams()), bad])
        assert len(s) == 1 and s.skipped[0][1] == "boom"


class TestNormalize:
    @given(st.lists(st.floats(-1e3, 1e3).map(lambda v: round(v, 6)), min_size=2, max_size=200))
    def test_definition_and_idempotence(self, xs):
        x = np.array(xs)
        if np.ptp(x) < 1e-6 * max(1.0, np.abs(x).max()):
            return
        series = vix.VolSeries(np.datetime64("2020-01-01") + np.arange(x.size), x)
        z = vix.normalize(series)
        assert abs(z.values.mean()) <= 1e-12 and abs(z.values.var() - 1) <= 1e-12
        np.testing.assert_allclose(z.raw_values(), x, atol=1e-9 * max(1.0, np.abs(x).max()))
        zz = vix.normalize(vix.VolSeries(z.dates, z.values))
        np.testing.assert_allclose(zz.values, z.values, atol=1e-12)
        assert np.argmax(z.values) == np.argmax(x)

    def test_zero_variance(self):
        with pytest.raises(ValueError):
            vix.normalize(vix.VolSeries(np.datetime64("2020-01-01") + np.arange(3), [1.0, 1.0, 1.0]))


class TestHistoricalVol:
    def test_constant_growth(self):
        x = np.exp(0.01 * np.arange(40))
        h = vix.historical_vol(x, window=10)
        assert np.all(np.isnan(h[:10])) and np.allclose(h[10:], 0, atol=1e-6)

    def test_matches_direct(self):
        x = np.exp(np.cumsum(np.random.default_rng(0).normal(0, 0.05, 60)))
        h = vix.historical_vol(x, window=20)
        d = np.diff(np.log(x))
        direct = [np.std(d[i - 20:i], ddof=1) * math.sqrt(252) for i in range(20, 60)]
        np.testing.assert_allclose(h[20:], direct, rtol=1e-9)


class TestChainCSV:
    def test_bad_kind_reports_line(self, tmp_path):
        path = tmp_path / "chain.csv"
        path.write_text("date,expiry_date,strike,kind,bid,ask,mid\n"
                        "2020-01-02,2020-01-30,100,call,1,1.2,1.1\n"
                        "2020-01-02,2020-01-30,100,straddle,1,1.2,1.1\n")
        with pytest.raises(ValueError, match=":3:"):
            vix.read_chain(path)

    def test_series_from_chain(self, tmp_path):
        d = np.datetime64("2020-01-02")
        rows = {}
        for days in (28, 35):
            strip = bsm_strip(days, 0.25, r=0.0, dK=1.0)
            rows[d + days] = [(q.strike, q.kind, q.price * 0.95, q.price) for q in strip.quotes]
        s = vix.vix_series_from_chain({d: rows}, {d: 0.0})
        assert len(s) == 1 and s.values[0] == pytest.approx(25.0, abs=0.1)

    def test_missing_expiry_skipped(self):
        d = np.datetime64("2020-01-02")
        s = vix.vix_series_from_chain({d: {d + 28: []}}, {})
        assert len(s) == 0 and s.skipped
