import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import lambertw

from fdivreg.divergences import BUILTIN_NAMES, DivergenceSpec, builtin, f_divergence, lambert_w0, lambert_w0_exp
from fdivreg.errors import ConfigurationError, DomainError


def _grid(spec):
    x = np.logspace(-6, 6, 241)
    y = spec.fdot(x)
    return x[np.isfinite(y)]


class TestBuiltins:
    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_f_vanishes_at_one(self, name):
        assert builtin(name).f(1.0) == pytest.approx(0.0, abs=1e-15)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_round_trip(self, name):
        spec = builtin(name)
        x = _grid(spec)
        back = spec.fdot_inv(spec.fdot(x))
        np.testing.assert_allclose(back, x, rtol=1e-10)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_fdot_strictly_increasing(self, name):
        spec = builtin(name)
        assert np.all(np.diff(spec.fdot(_grid(spec))) > 0)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_inverse_positive_and_increasing(self, name):
        spec = builtin(name)
        lo, hi = spec.positive_range
        lo = max(lo, -50.0)
        hi = min(hi, 50.0)
        y = np.linspace(lo, hi, 402)[1:-1]
        inv = spec.fdot_inv(y)
        assert np.all(inv > 0)
        assert np.all(np.diff(inv) > 0)

    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_midpoint_convexity(self, name):
        spec = builtin(name)
        rng = np.random.default_rng(3)
        a, b = rng.uniform(0.01, 20, size=(2, 500))
        assert np.all(spec.f((a + b) / 2) <= (spec.f(a) + spec.f(b)) / 2 + 1e-12)

    def test_nonneg_flags(self):
        flags = {n: builtin(n).fdot_inv_nonneg for n in BUILTIN_NAMES}
        assert {n for n, v in flags.items() if v} == {"kl", "jeffrey", "hellinger"}

    def test_fzero_limits(self):
        expected = {"kl": 0.0, "reverse_kl": math.inf, "jeffrey": math.inf, "hellinger": 1.0,
                    "jensen_shannon": math.log(2), "chi2": 1.0}
        for name, val in expected.items():
            assert builtin(name).f_zero == pytest.approx(val)
            if math.isfinite(val):
                assert builtin(name).f(1e-20) == pytest.approx(val, abs=1e-9)

    def test_documented_values(self):
        assert builtin("kl").fdot(1.0) == pytest.approx(1.0)
        assert builtin("hellinger").fdot(1.0) == pytest.approx(0.0)
        j = builtin("jeffrey")
        assert j.fdot_inv(j.fdot(3.7)) == pytest.approx(3.7, abs=1e-10)

    def test_closed_forms(self):
        y = np.linspace(-3, 0.6, 7)
        np.testing.assert_allclose(builtin("kl").fdot_inv(y), np.exp(y - 1))
        np.testing.assert_allclose(builtin("hellinger").fdot_inv(y), (1 - y) ** -2)
        np.testing.assert_allclose(builtin("jensen_shannon").fdot_inv(y), np.exp(y) / (2 - np.exp(y)))
        np.testing.assert_allclose(builtin("chi2").fdot_inv(y), y / 2 + 1)
        np.testing.assert_allclose(builtin("reverse_kl").fdot_inv(y[y < 0]), -1 / y[y < 0])

    def test_unknown_name(self):
        with pytest.raises(ConfigurationError):
            builtin("total_variation")

    def test_bad_user_range(self):
        with pytest.raises(ConfigurationError):
            DivergenceSpec("bad", f=abs, fdot=abs, fdot_inv=abs, y_range=(1.0, 0.0),
                           fdot_inv_nonneg=False, f_zero=0.0)


class TestLambertW:
    def test_documented_values(self):
        assert lambert_w0(0.0) == 0.0
        assert lambert_w0(math.e) == pytest.approx(1.0, abs=1e-14)
        assert lambert_w0(5 * math.exp(5)) == pytest.approx(5.0, abs=1e-10)

    @pytest.mark.parametrize("x", [0.1, 1.0, 5.0, 20.0])
    def test_inverts_w_exp_w(self, x):
        assert abs(lambert_w0(x * math.exp(x)) - x) <= 1e-10

    def test_matches_scipy(self):
        x = np.concatenate([[0.0], np.logspace(-300, 300, 400)])
        np.testing.assert_allclose(lambert_w0(x), lambertw(x).real, rtol=1e-13)

    def test_residual(self):
        x = np.logspace(-10, 200, 300)
        w = lambert_w0(x)
        np.testing.assert_allclose(w * np.exp(w), x, rtol=1e-12)

    def test_exp_form_large_arguments(self):
        a = np.array([10.0, 700.0, 1e4, 1e8])
        w = lambert_w0_exp(a)
        # w + log w = a
        np.testing.assert_allclose(w + np.log(w), a, rtol=1e-14)
        assert lambert_w0_exp(1.0) == pytest.approx(1.0)

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            lambert_w0(-0.1)
        with pytest.raises(DomainError):
            lambert_w0(np.array([1.0, np.nan]))


class TestFDivergence:
    def test_documented_values(self):
        q = np.array([0.5, 0.5])
        for name in BUILTIN_NAMES:
            assert f_divergence(q, q, builtin(name)) == pytest.approx(0.0, abs=1e-15)
        kl = f_divergence([0.75, 0.25], q, builtin("kl"))
        assert kl == pytest.approx(0.75 * math.log(1.5) + 0.25 * math.log(0.5), abs=1e-12)
        # ratios 1.25 and 0.75 give f = 0.0625 on both atoms
        assert f_divergence([0.625, 0.375], q, builtin("chi2")) == pytest.approx(0.0625, abs=1e-15)

    def test_zero_mass(self):
        q = np.array([0.5, 0.5])
        p = np.array([1.0, 0.0])
        assert f_divergence(p, q, builtin("reverse_kl")) == math.inf
        assert f_divergence(p, q, builtin("kl")) == pytest.approx(math.log(2))
        assert f_divergence(p, q, builtin("hellinger")) == pytest.approx(0.5 * (1 - math.sqrt(2)) ** 2 + 0.5)

    @pytest.mark.parametrize("p,q", [
        ([0.5, 0.5], [0.2, 0.3, 0.5]),
        ([0.5, 0.5], [1.0, 0.0]),
        ([0.6, 0.6], [0.5, 0.5]),
    ])
    def test_invalid_inputs(self, p, q):
        with pytest.raises(ConfigurationError):
            f_divergence(p, q, builtin("kl"))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 2**32 - 1), st.sampled_from(BUILTIN_NAMES))
    def test_nonnegative_and_discriminating(self, n, seed, name):
        rng = np.random.default_rng(seed)
        p, q = rng.dirichlet(np.ones(n), size=2)
        q = np.maximum(q, 1e-6)
        q /= q.sum()
        d = f_divergence(p, q, builtin(name))
        assert d >= -1e-12
        assert (d < 1e-12) == (np.max(np.abs(p - q)) < 1e-6)
