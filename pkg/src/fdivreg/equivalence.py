"""Trading one f-divergence regularizer for another by reshaping the risk.

Given the solution of the f-regularized problem at factor ``lam``, the risk
transform

    v(t) = -lam * gdot(fdot_inv(-(N_f + t) / lam))

makes the g-regularized problem on ``v(L)`` return the same measure.  Any
constant added to ``v`` is absorbed by the g-problem's own normalization
constant, so none is added here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .divergences import DivergenceSpec
from .errors import NoFeasibleBeta
from .measures import Measure, RiskSpec
from .solver import Posterior, _inverse, default_tol, posterior, solve_beta


@dataclass(frozen=True)
class RiskTransform:
    f_spec: DivergenceSpec
    g_spec: DivergenceSpec
    lam: float
    n_f: float
    shift: float = 0.0

    def __call__(self, t):
        inner = _inverse(self.f_spec, -(self.n_f + np.asarray(t, dtype=float)) / self.lam)
        return -self.lam * self.g_spec.fdot(inner) + self.shift

    def shifted(self, c: float) -> "RiskTransform":
        return RiskTransform(self.f_spec, self.g_spec, self.lam, self.n_f, self.shift + c)

    def transformed_risk(self, measure: Measure, risk: RiskSpec) -> RiskSpec:
        """Tabulated ``v(L)`` on the support of ``measure``; may be negative."""
        v = np.asarray(self(risk.values_on(measure)), dtype=float)
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NoFeasibleBeta(
                f"transformed risk is not finite at support point {measure.points[bad]!r}; "
                f"the {self.g_spec.name} problem is infeasible at lambda={self.lam!r}",
                reason="empty",
            )
        return RiskSpec.tabulated(v, allow_negative=True)

    def is_monotone(self, grid) -> bool:
        vals = np.asarray(self(grid), dtype=float)
        d = np.diff(vals)
        return bool(np.all(d >= 0) or np.all(d <= 0))


def risk_transform(f_spec: DivergenceSpec, g_spec: DivergenceSpec, lam: float,
                   measure: Measure, risk: RiskSpec, tol: float | None = None) -> RiskTransform:
    """Build ``v`` from the f-problem's normalization constant at ``lam``."""
    n_f = solve_beta(f_spec, measure, risk, lam, tol)
    return RiskTransform(f_spec, g_spec, float(lam), n_f)


@dataclass
class EquivalenceResult:
    transform: RiskTransform
    f_posterior: Posterior
    g_posterior: Posterior

    @property
    def gap(self) -> float:
        return float(np.max(np.abs(self.f_posterior.rn - self.g_posterior.rn)))


def solve_equivalent(f_spec: DivergenceSpec, g_spec: DivergenceSpec, lam: float,
                     measure: Measure, risk: RiskSpec, tol: float | None = None,
                     shift: float = 0.0) -> EquivalenceResult:
    """Solve the f-problem on ``L`` and the g-problem on ``v(L) + shift``."""
    tol = default_tol(measure) if tol is None else tol
    post_f = posterior(f_spec, measure, risk, lam, tol)
    transform = RiskTransform(f_spec, g_spec, float(lam), post_f.beta, shift)
    post_g = posterior(g_spec, measure, transform.transformed_risk(measure, risk), lam, tol)
    return EquivalenceResult(transform, post_f, post_g)


def verify_equivalence(f_spec: DivergenceSpec, g_spec: DivergenceSpec, lam: float,
                       measure: Measure, risk: RiskSpec, tol: float | None = None) -> float:
    """Sup-norm gap between the f-posterior and the g-posterior on ``v(L)``.

    Only the densities are compared; the two optimal objective values live
    in different coordinates.
    """
    return solve_equivalent(f_spec, g_spec, lam, measure, risk, tol).gap
