import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate

from fdivreg.errors import ConfigurationError, DomainError
from fdivreg.measures import (DiscreteMeasure, QuadratureMeasure, RiskSpec, empirical_risk, example1_gamma,
                              integrate, integrate_with_error, measure_from_dict, measure_to_dict,
                              refinement_sequence, risk_from_dict, tabulated_density, uniform_density)


def inv_sq(t):
    return 1.0 / np.ravel(t) ** 2


class TestDiscreteMeasure:
    def test_valid(self):
        q = DiscreteMeasure([[0.0, 1.0], [2.0, 3.0]], [0.25, 0.75])
        assert q.dim == 2
        assert len(q) == 2
        np.testing.assert_array_equal(q.weights, [0.25, 0.75])

    def test_uniform(self):
        q = DiscreteMeasure.uniform([[0.0], [1.0], [2.0], [3.0]])
        np.testing.assert_allclose(q.masses, 0.25)

    @pytest.mark.parametrize("atoms,masses", [
        ([[0.0], [1.0]], [0.5, 0.6]),
        ([[0.0], [1.0]], [1.0, 0.0]),
        ([[0.0], [0.0]], [0.5, 0.5]),
        ([[0.0], [1.0]], [1.0]),
        ([[0.0], [1.0]], [np.nan, 1.0]),
    ])
    def test_rejects_invalid(self, atoms, masses):
        with pytest.raises(ConfigurationError):
            DiscreteMeasure(atoms, masses)


class TestQuadrature:
    def test_example1_mass(self):
        q = example1_gamma()
        # raw rule before renormalization plus the analytic tail
        assert q.raw_mass + q.tail_mass == pytest.approx(1.0, abs=1e-8)
        assert q.weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert q.tail_mass < 1e-10

    def test_example1_moments_against_scipy(self):
        q = example1_gamma()
        for k in range(4):
            ref, _ = sp_integrate.quad(lambda t: t ** k * 4 * t * t * math.exp(-2 * t), 0, math.inf)
            assert integrate(q, lambda t: np.ravel(t) ** k) == pytest.approx(ref, rel=1e-10)

    def test_uniform_and_tabulated(self):
        u = uniform_density(-1.0, 3.0, panels=8)
        assert integrate(u, lambda t: np.ravel(t)) == pytest.approx(1.0, abs=1e-13)
        tab = tabulated_density([0.0, 1.0, 2.0], [0.0, 2.0, 0.0], panels=32)
        assert integrate(tab, lambda t: np.ravel(t)) == pytest.approx(1.0, abs=1e-12)

    def test_rejects_bad_density(self):
        with pytest.raises(ConfigurationError):
            QuadratureMeasure(density=lambda t: -np.ones_like(t), domain=(0.0, 1.0))
        with pytest.raises(ConfigurationError):
            QuadratureMeasure(density=lambda t: np.ones_like(t), domain=(0.0, 2.0))

    def test_to_discrete(self):
        d = uniform_density(0.0, 1.0, panels=2).to_discrete()
        assert len(d) == 32
        assert d.masses.sum() == pytest.approx(1.0)

    def test_refinement_error_estimate(self):
        q = example1_gamma(panels=16)
        value, err = integrate_with_error(q, lambda t: np.cos(np.ravel(t)))
        ref, _ = sp_integrate.quad(lambda t: math.cos(t) * 4 * t * t * math.exp(-2 * t), 0, math.inf)
        assert abs(value - ref) <= max(err, 1e-12)


class TestIntegrate:
    def test_discrete_constant(self):
        q = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        assert integrate(q, lambda t: np.ones(len(t))) == 1.0

    def test_example1_inverse_square(self):
        q = example1_gamma()
        assert integrate(q, inv_sq, singular_points=[0.0]) == pytest.approx(2.0, abs=1e-3)
        assert integrate(q, inv_sq, singular_points=[0.0]) == pytest.approx(2.0, abs=1e-12)

    def test_example2_diverges(self):
        q = example1_gamma()
        res = refinement_sequence(q, lambda t: 1.0 / (np.ravel(t) - 1.0) ** 2, [1.0])
        assert res.verdict == "divergent"
        assert res.sums[-1] > 1e9
        assert np.all(np.diff(res.sums) >= 0)
        assert np.all(np.diff(res.sums[-5:]) > 0)
        assert integrate(q, lambda t: 1.0 / (np.ravel(t) - 1.0) ** 2, singular_points=[1.0]) == math.inf

    def test_infinite_on_atom(self):
        q = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        assert integrate(q, lambda t: np.array([1.0, np.inf])) == math.inf

    def test_nan_rejected(self):
        q = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        with pytest.raises(DomainError):
            integrate(q, lambda t: np.array([1.0, np.nan]))


class TestRisk:
    @pytest.mark.parametrize("theta,data,expected", [
        (2.0, [(1, 0)], 4.0),
        (1.0, [(1, 1)], 0.0),
        (1.0, [(1, 0), (2, 0)], 2.5),
    ])
    def test_empirical_risk(self, theta, data, expected):
        assert empirical_risk(theta, data) == pytest.approx(expected)

    def test_empirical_risk_errors(self):
        with pytest.raises(ConfigurationError):
            empirical_risk(1.0, [])
        with pytest.raises(ConfigurationError):
            empirical_risk(1.0, [(1, 0)], loss="hinge")
        with pytest.raises(ConfigurationError):
            empirical_risk(1.0, [(1, 0)], predictor="tree")

    def test_multidimensional_dataset(self):
        risk = RiskSpec.from_dataset([([1.0, 2.0], 1.0), ([0.0, 1.0], -1.0)])
        theta = np.array([[1.0, 0.0], [0.0, -1.0]])
        np.testing.assert_allclose(risk.risk_fn(theta), [(0 + 1) / 2, (9 + 0) / 2])

    def test_bounds_unbounded_support(self):
        q = example1_gamma()
        lo, hi = RiskSpec.from_dataset([(1, 1)]).bounds(q)
        assert lo == 0.0 and hi == math.inf
        np.testing.assert_allclose(RiskSpec.from_dataset([(1, 1)]).argmin_points(q), [1.0])

    def test_bounds_bracket_values(self):
        q = uniform_density(-2.0, 3.0, panels=4)
        risk = RiskSpec.from_dataset([(1, 0.5), (2, 0.0)])
        lo, hi = risk.bounds(q)
        vals = risk.values_on(q)
        assert lo <= vals.min() and vals.max() <= hi

    def test_tabulated(self):
        q = DiscreteMeasure([[0.0], [1.0], [2.0]], [0.2, 0.3, 0.5])
        risk = RiskSpec.tabulated([0.5, 0.1, 0.9])
        assert risk.bounds(q) == (0.1, 0.9)
        with pytest.raises(ConfigurationError):
            RiskSpec.tabulated([-1.0, 0.0])
        with pytest.raises(ConfigurationError):
            RiskSpec.tabulated([0.0, 1.0]).values_on(q)
        assert RiskSpec.tabulated([-1.0, 0.0], allow_negative=True).values.min() == -1.0


class TestSchema:
    def test_round_trip_discrete(self):
        d = {"type": "discrete", "atoms": [[0.0], [1.0]], "masses": [0.25, 0.75]}
        q = measure_from_dict(d)
        assert measure_to_dict(q) == d

    def test_density(self):
        q = measure_from_dict({"type": "density1d", "name": "example1_gamma", "panels": 8})
        assert q.panels == 8
        q = measure_from_dict({"type": "density1d", "name": "uniform", "domain": [0, 2]}, panels=4)
        assert q.panels == 4 and q.domain == (0.0, 2.0)

    def test_risk(self):
        r = risk_from_dict({"type": "dataset", "loss": "squared", "predictor": "linear", "data": [[1, 0]]})
        assert r.risk_fn([3.0])[0] == pytest.approx(9.0)
        assert risk_from_dict({"type": "values", "values": [1, 2]}).values.tolist() == [1.0, 2.0]

    @pytest.mark.parametrize("d", [
        {"type": "mixture"},
        {"type": "discrete", "atoms": [[0.0]]},
        {"type": "density1d", "name": "cauchy"},
        {"type": "density1d", "name": "uniform"},
    ])
    def test_bad_measures(self, d):
        with pytest.raises(ConfigurationError):
            measure_from_dict(d)

    @pytest.mark.parametrize("d", [
        {"type": "formula"},
        {"type": "dataset", "data": []},
        {"type": "dataset", "loss": "absolute", "data": [[1, 0]]},
    ])
    def test_bad_risks(self, d):
        with pytest.raises(ConfigurationError):
            risk_from_dict(d)
