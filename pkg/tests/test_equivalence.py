import itertools

import numpy as np
import pytest

from fdivreg.divergences import BUILTIN_NAMES, builtin
from fdivreg.equivalence import risk_transform, solve_equivalent, verify_equivalence
from fdivreg.errors import NoFeasibleBeta
from fdivreg.measures import DiscreteMeasure, RiskSpec, example1_gamma
from fdivreg.oracle import random_instance


@pytest.fixture
def two_atoms():
    return DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5]), RiskSpec.tabulated([0.0, 1.0])


@pytest.fixture(scope="module")
def eight_atoms():
    return random_instance(np.random.default_rng(8), 8)


class TestTransform:
    @pytest.mark.parametrize("name", BUILTIN_NAMES)
    def test_identity_pair_is_shift(self, name, eight_atoms):
        q, risk = eight_atoms
        spec = builtin(name)
        v = risk_transform(spec, spec, 1.0, q, risk)
        np.testing.assert_allclose(v(risk.values), risk.values + v.n_f, atol=1e-12)

    def test_example4_closed_form(self, two_atoms):
        q, risk = two_atoms
        lam = 0.7
        v = risk_transform(builtin("kl"), builtin("reverse_kl"), lam, q, risk)
        L = risk.values
        z = np.dot(q.masses, np.exp(-L / lam))
        np.testing.assert_allclose(v(L), lam * np.exp(L / lam) * z, rtol=1e-12)

    @pytest.mark.parametrize("f,g", list(itertools.permutations(BUILTIN_NAMES, 2)))
    def test_monotone(self, f, g, eight_atoms):
        q, risk = eight_atoms
        v = risk_transform(builtin(f), builtin(g), 1.0, q, risk)
        # increasing: a larger risk stays a larger risk after the transform
        assert v.is_monotone(np.linspace(0.0, 1.0, 101))
        assert np.all(np.diff(v(np.linspace(0.0, 1.0, 101))) > 0)

    def test_negative_transformed_risk_accepted(self, two_atoms):
        q, risk = two_atoms
        res = solve_equivalent(builtin("chi2"), builtin("kl"), 1.0, q, risk)
        assert np.all(np.asarray(res.transform(risk.values)) < 0)
        assert res.gap <= 1e-10

    def test_infeasible_f_problem(self):
        # chi2 has no feasible multiplier on the unbounded continuum
        q, risk = example1_gamma(), RiskSpec.from_dataset([(1, 0)])
        with pytest.raises(NoFeasibleBeta) as info:
            risk_transform(builtin("chi2"), builtin("kl"), 1.0, q, risk)
        assert info.value.reason == "empty"


class TestVerify:
    def test_documented(self, two_atoms):
        q, risk = two_atoms
        assert verify_equivalence(builtin("kl"), builtin("reverse_kl"), 1.0, q, risk) <= 1e-8
        assert verify_equivalence(builtin("hellinger"), builtin("hellinger"), 1.0, q, risk) <= 1e-10
        res = solve_equivalent(builtin("kl"), builtin("chi2"), 1.0, q, risk)
        np.testing.assert_allclose(res.g_posterior.masses, [0.731059, 0.268941], atol=1e-6)

    @pytest.mark.parametrize("f,g", list(itertools.permutations(BUILTIN_NAMES, 2)))
    def test_all_pairs(self, f, g, eight_atoms):
        q, risk = eight_atoms
        assert verify_equivalence(builtin(f), builtin(g), 1.0, q, risk) <= 1e-6

    @pytest.mark.parametrize("f,g", [("kl", "jeffrey"), ("reverse_kl", "chi2"), ("jensen_shannon", "hellinger")])
    def test_quadrature(self, f, g):
        q, risk = example1_gamma(), RiskSpec.from_dataset([(1, 0)])
        assert verify_equivalence(builtin(f), builtin(g), 1.0, q, risk) <= 1e-6

    @pytest.mark.parametrize("c", [-3.0, 0.5, 40.0])
    def test_shift_absorbed(self, c, eight_atoms):
        q, risk = eight_atoms
        base = solve_equivalent(builtin("jeffrey"), builtin("jensen_shannon"), 1.0, q, risk)
        moved = solve_equivalent(builtin("jeffrey"), builtin("jensen_shannon"), 1.0, q, risk, shift=c)
        np.testing.assert_allclose(moved.g_posterior.rn, base.g_posterior.rn, atol=1e-10)
        assert moved.g_posterior.beta == pytest.approx(base.g_posterior.beta - c, abs=1e-9)
