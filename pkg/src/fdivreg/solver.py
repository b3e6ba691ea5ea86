"""Closed-form solution of empirical risk minimization with f-divergence
regularization, and the analysis of when that solution exists.

The minimizer has density ``fdot_inv(-(beta + L) / lam)`` with respect to
the reference measure, where ``beta`` is the unique root of the strictly
decreasing constraint integral

    k(t) = int fdot_inv(-(t + L) / lam) dQ  =  1

over the set of multipliers keeping the density positive.  Everything here
is a pure function of immutable inputs.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .divergences import DivergenceSpec, f_divergence
from .errors import (
    DivergentIntegral,
    Inconclusive,
    InfeasiblePointError,
    NoFeasibleBeta,
    NonConvergence,
    PreconditionError,
)
from .measures import (
    DIVERGENCE_THRESHOLD,
    DiscreteMeasure,
    Measure,
    QuadratureMeasure,
    RefinementResult,
    RiskSpec,
    integrate,
    refinement_sequence,
)

log = logging.getLogger(__name__)

MAX_BISECTIONS = 200
MAX_BRACKET_STEPS = 200
EPS_PROBES = tuple(10.0 ** -k for k in range(2, 9))


def default_tol(measure: Measure) -> float:
    return 1e-6 if isinstance(measure, QuadratureMeasure) else 1e-10


# ---------------------------------------------------------------------------
# Result types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BetaInterval:
    """Open interval ``(lo, hi)`` of multipliers; empty when ``lo >= hi``."""

    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return not self.lo < self.hi

    def __contains__(self, t) -> bool:
        return self.lo < t < self.hi

    def closure_contains(self, t) -> bool:
        return not self.empty and self.lo <= t <= self.hi


@dataclass(eq=False)
class Posterior:
    """Solved problem: multiplier, regularization factor and density values.

    ``rn`` holds ``dP/dQ`` at ``measure.points``.
    """

    spec: DivergenceSpec
    lam: float
    beta: float
    rn: np.ndarray
    measure: Measure
    risk_values: np.ndarray
    constraint_value: float = 1.0
    iterations: int = 0

    @property
    def masses(self) -> np.ndarray:
        return self.rn * self.measure.weights

    def normalization(self) -> float:
        return integrate(self.measure, lambda _: self.rn)


@dataclass(frozen=True)
class AdmissibleSet:
    """Interval of regularization factors ``{lo, inf)`` with a closed or open left end."""

    lo: float = 0.0
    lo_closed: bool = False
    hi: float = math.inf

    def __contains__(self, lam) -> bool:
        above = lam >= self.lo if self.lo_closed else lam > self.lo
        return above and lam < self.hi

    def describe(self) -> str:
        return f"{'[' if self.lo_closed else '('}{self.lo!r}, {self.hi!r})"


@dataclass(eq=False)
class BoundaryReport:
    """Shape of the feasible multiplier set and the admissible factors.

    ``t_star`` is the infimum of the multiplier set at unit regularization
    factor.  ``boundary`` is one of ``closed_left``, ``open_left``,
    ``all_reals``, ``open_right`` (finite end on the right, as for chi2)
    or ``empty``.
    """

    t_star: float | None
    boundary: str
    admissible_lambda: AdmissibleSet | None
    lambda_star: float | None = None
    t_sup: float | None = None
    orientation: str | None = None
    probe: list[float] = field(default_factory=list)
    eps_probes: list[tuple[float, float]] = field(default_factory=list)


# ---------------------------------------------------------------------------
# Feasible multipliers and the constraint integral
# ---------------------------------------------------------------------------

def feasible_beta_interval(spec: DivergenceSpec, risk_bounds: Sequence[float], lam: float) -> BetaInterval:
    """Multipliers ``t`` keeping ``-(t + L)/lam`` where ``fdot_inv`` is positive."""
    if not lam > 0:
        raise ValueError(f"regularization factor must be positive, got {lam!r}")
    lmin, lmax = (float(v) for v in risk_bounds)
    if lmin > lmax:
        raise ValueError(f"risk bounds out of order: {risk_bounds}")
    plo, phi = spec.positive_range
    lo = -math.inf if math.isinf(phi) else -lmin - lam * phi
    hi = math.inf if math.isinf(plo) else -lmax - lam * plo
    return BetaInterval(lo, hi)


def _inverse(spec: DivergenceSpec, y):
    """``fdot_inv`` with the limits at the ends of its range filled in."""
    y = np.asarray(y, dtype=float)
    ylo, yhi = spec.y_range
    top = y >= yhi
    bottom = y <= ylo
    inside = ~(top | bottom)
    out = np.empty_like(y)
    with np.errstate(over="ignore", divide="ignore"):
        out[inside] = spec.fdot_inv(y[inside])
    out[top] = math.inf
    out[bottom] = 0.0
    return out


class _Instance:
    """Risk values, bounds and minimizers of one (spec, measure, risk) triple."""

    def __init__(self, spec: DivergenceSpec, measure: Measure, risk: RiskSpec):
        self.spec = spec
        self.measure = measure
        self.risk = risk
        self.L = risk.values_on(measure)
        self.bounds = risk.bounds(measure)
        self.refinable = isinstance(measure, QuadratureMeasure) and risk.has_function
        self.argmin = risk.argmin_points(measure) if self.refinable else None

    def interval(self, lam: float) -> BetaInterval:
        return feasible_beta_interval(self.spec, self.bounds, lam)

    def k(self, t: float, lam: float) -> float:
        spec = self.spec
        B = self.interval(lam)
        if not B.empty and t == B.lo:
            return self.left_boundary(lam).value
        y = -(t + self.L) / lam
        ylo, yhi = spec.y_range
        outside = (y >= yhi) | (y <= ylo)
        if np.any(outside) and not B.closure_contains(t):
            i = int(np.flatnonzero(outside)[0])
            raise InfeasiblePointError(
                f"argument {y[i]!r} leaves the range of the inverse derivative at "
                f"support point {self.measure.points[i]!r} (t={t!r}, lambda={lam!r})",
                point=self.measure.points[i], index=i,
            )
        return integrate(self.measure, lambda _: _inverse(spec, y))

    def left_boundary(self, lam: float) -> RefinementResult:
        """Constraint integral at the left end of the multiplier set."""
        spec = self.spec
        phi = spec.positive_range[1]
        lmin = self.bounds[0]
        if self.bounds[1] == lmin:
            return RefinementResult([math.inf], "divergent", math.inf)

        def integrand_of(L):
            return _inverse(spec, phi - (L - lmin) / lam)

        if self.refinable and self.argmin.size:
            return refinement_sequence(self.measure, lambda th: integrand_of(self.risk.risk_fn(th)), self.argmin)
        total = integrate(self.measure, lambda _: integrand_of(self.L))
        if total > DIVERGENCE_THRESHOLD:
            return RefinementResult([total], "divergent", math.inf)
        return RefinementResult([total], "converged", total)

    def right_boundary(self, lam: float) -> float:
        """Constraint integral at the right end of the multiplier set."""
        spec = self.spec
        plo = spec.positive_range[0]
        lmax = self.bounds[1]
        return integrate(self.measure, lambda _: _inverse(spec, plo + (lmax - self.L) / lam))


def constraint_integral(t: float, lam: float, spec: DivergenceSpec, measure: Measure, risk: RiskSpec) -> float:
    """``int fdot_inv(-(t + L)/lam) dQ``; ``inf`` where it diverges at the boundary.

    Raises:
        InfeasiblePointError: if ``t`` lies outside the closure of the
            feasible multiplier set and the argument leaves the range of
            ``fdot_inv`` at some support point.
    """
    return _Instance(spec, measure, risk).k(t, lam)


# ---------------------------------------------------------------------------
# Normalization constant
# ---------------------------------------------------------------------------

def _weighted_median(values, weights) -> float:
    keep = weights > 0
    v, w = values[keep], weights[keep]
    order = np.argsort(v)
    c = np.cumsum(w[order])
    return float(v[order][min(np.searchsorted(c, 0.5 * c[-1]), len(v) - 1)])


def _mid(a: float, b: float) -> float:
    """Midpoint, switching to a log scale when the bracket spans many decades."""
    lo, hi = min(abs(a), abs(b)), max(abs(a), abs(b))
    if a * b > 0 and hi > 1e6 * max(lo, 1.0):
        return math.copysign(math.sqrt(max(lo, 1.0) * hi), a)
    if a * b < 0 and hi > 1e6:
        # straddles zero with one huge end: pull that end in first
        return math.copysign(math.sqrt(hi), a if abs(a) > abs(b) else b)
    return 0.5 * (a + b)


def _solve(inst: _Instance, lam: float, tol: float, max_iter: int = MAX_BISECTIONS) -> tuple[float, float, int]:
    spec = inst.spec
    if not lam > 0:
        raise ValueError(f"regularization factor must be positive, got {lam!r}")
    B = inst.interval(lam)
    if B.empty:
        raise NoFeasibleBeta(
            f"{spec.name}: the feasible multiplier set is empty at lambda={lam!r} "
            f"(risk bounds {inst.bounds})",
            reason="empty",
        )
    lmin, lmax = inst.bounds
    fdot1 = float(spec.fdot(1.0))
    if lmin == lmax:
        # constant risk: fdot_inv(fdot(1)) = 1 pointwise
        return -lmin - lam * fdot1, 1.0, 0

    def k(t):
        return inst.k(t, lam)

    # The pointwise argument is <= fdot(1) at t_hi and >= fdot(1) at t_lo, so
    # k(t_hi) <= 1 <= k(t_lo) whenever those points are feasible.
    t_hi = -lmin - lam * fdot1
    t_lo = -lmax - lam * fdot1
    # a weighted median ignores risks that are huge on negligible mass
    seed = -_weighted_median(inst.L, inst.measure.weights) - lam * fdot1
    if seed not in B:
        if math.isfinite(B.lo) and math.isfinite(B.hi):
            seed = 0.5 * (B.lo + B.hi)
        elif math.isfinite(B.lo):
            seed = B.lo + max(1.0, abs(B.lo))
        else:
            seed = B.hi - max(1.0, abs(B.hi))
    ks = k(seed)
    evals = 1
    if abs(ks - 1.0) <= tol:
        return seed, ks, evals

    if ks > 1.0:
        a, ka = seed, ks
        if math.isfinite(B.hi):
            kb = inst.right_boundary(lam)
            evals += 1
            if abs(kb - 1.0) <= tol:
                # root within tolerance of the edge, e.g. a risk built so that
                # the exact multiplier sits on it
                return B.hi, kb, evals
            if kb > 1.0:
                raise NoFeasibleBeta(
                    f"{spec.name}: constraint integral stays above 1 on the feasible set "
                    f"at lambda={lam!r} (value {kb!r} at the right end)",
                    reason="below_threshold",
                )
            b = B.hi
        else:
            width = 1.0
            for _ in range(MAX_BRACKET_STEPS):
                b = min(seed + width, t_hi)
                kb = k(b)
                evals += 1
                if kb <= 1.0:
                    break
                a, ka = b, kb
                width *= 4.0
            else:
                if math.isinf(ka):
                    raise DivergentIntegral(f"{spec.name}: every probe of the constraint integral is infinite")
                raise NoFeasibleBeta(
                    f"{spec.name}: constraint integral never drops below 1 at lambda={lam!r}",
                )
    else:
        b, kb = seed, ks
        if math.isfinite(B.lo):
            ka = k(B.lo)
            evals += 1
            if abs(ka - 1.0) <= tol:
                return B.lo, ka, evals
            if ka < 1.0:
                raise NoFeasibleBeta(
                    f"{spec.name}: constraint integral only reaches {ka!r} < 1 on the feasible "
                    f"set at lambda={lam!r}; the regularization factor is too small",
                    reason="below_threshold",
                )
            a = B.lo
        else:
            width = 1.0
            for _ in range(MAX_BRACKET_STEPS):
                a = max(seed - width, t_lo)
                ka = k(a)
                evals += 1
                if ka >= 1.0:
                    break
                b, kb = a, ka
                width *= 4.0
            else:
                raise NoFeasibleBeta(f"{spec.name}: constraint integral never exceeds 1 at lambda={lam!r}")

    # Bisection; keep going past tol toward a tighter target so the density
    # values inherit close to machine precision.
    target = tol * 1e-3
    best_t, best_k = (seed, ks)
    for _ in range(max_iter):
        m = _mid(a, b)
        if m <= a or m >= b:
            break
        km = k(m)
        evals += 1
        if abs(km - 1.0) < abs(best_k - 1.0):
            best_t, best_k = m, km
        if abs(km - 1.0) <= target:
            break
        if km > 1.0:
            a = m
        else:
            b = m
    if abs(best_k - 1.0) <= tol:
        return best_t, best_k, evals
    raise NonConvergence(
        f"{spec.name}: bisection stopped at |k - 1| = {abs(best_k - 1.0)!r} > tol={tol!r} "
        f"after {evals} evaluations (lambda={lam!r})"
    )


def solve_beta(spec: DivergenceSpec, measure: Measure, risk: RiskSpec, lam: float,
               tol: float | None = None) -> float:
    """Normalization constant ``beta`` with ``|k(beta) - 1| <= tol``.

    Raises:
        NoFeasibleBeta: empty feasible set, or the constraint integral never
            reaches one on it (factor below the minimum).
        DivergentIntegral: every probe of the constraint integral is infinite.
        NonConvergence: the bisection budget ran out.
    """
    tol = default_tol(measure) if tol is None else tol
    beta, _, _ = _solve(_Instance(spec, measure, risk), lam, tol)
    return beta + 0.0


def normalization_function(spec: DivergenceSpec, measure: Measure, risk: RiskSpec, lam: float,
                           tol: float | None = None) -> float:
    """The map from regularization factor to normalization constant.

    Its slope is ``-E_w[fdot(dP/dQ)]`` with weights ``w = 1/f''(dP/dQ)``, so
    the direction depends on the divergence: increasing for reverse_kl,
    ``-(1 + KL(P||Q)) < 0`` for kl, identically zero for chi2.  See
    ``scaled_normalization`` for the multiplier that always increases.
    """
    return solve_beta(spec, measure, risk, lam, tol)


def scaled_normalization(spec: DivergenceSpec, measure: Measure, risk: RiskSpec, lam: float,
                         tol: float | None = None) -> float:
    """``beta / lam``: the multiplier in unit-factor scaling.

    Solves ``int fdot_inv(-s - L/lam) dQ = 1`` for ``s``.  Raising ``lam``
    raises ``-L/lam``, so ``s`` must rise; strictly increasing for every
    divergence whenever the risk is nonnegative and not identically zero.
    """
    return solve_beta(spec, measure, risk, lam, tol) / lam


def posterior(spec: DivergenceSpec, measure: Measure, risk: RiskSpec, lam: float,
              tol: float | None = None) -> Posterior:
    tol = default_tol(measure) if tol is None else tol
    inst = _Instance(spec, measure, risk)
    beta, kval, evals = _solve(inst, lam, tol)
    beta += 0.0  # no negative zero in reports
    rn = _inverse(spec, -(beta + inst.L) / lam)
    if not np.all(rn >= 0) or not np.all(np.isfinite(rn)):
        bad = int(np.flatnonzero(~((rn >= 0) & np.isfinite(rn)))[0])
        raise NonConvergence(
            f"{spec.name}: density value {rn[bad]!r} at support point {measure.points[bad]!r} "
            "is not positive and finite"
        )
    if not np.all(rn > 0):
        # exact density is positive; these values are below double precision
        log.info("%s: density underflows to 0 at %d support points", spec.name, int(np.sum(rn == 0)))
    log.debug("posterior %s lambda=%g beta=%.17g after %d evaluations", spec.name, lam, beta, evals)
    return Posterior(spec=spec, lam=float(lam), beta=float(beta), rn=rn, measure=measure,
                     risk_values=inst.L, constraint_value=kval, iterations=evals)


def objective(p, measure: Measure, risk: RiskSpec | None, lam: float, spec: DivergenceSpec) -> float:
    """Expected empirical risk plus ``lam`` times the f-divergence.

    ``p`` is a ``Posterior``, a mass vector (discrete measures) or a vector
    of density values at the quadrature nodes (quadrature measures).
    """
    if risk is None and isinstance(p, Posterior):
        L = p.risk_values
    else:
        L = risk.values_on(measure)
    w = measure.weights
    if isinstance(p, Posterior):
        rn = p.rn
    elif isinstance(measure, DiscreteMeasure):
        masses = np.asarray(p, dtype=float)
        return float(np.dot(masses, L)) + lam * f_divergence(masses, w, spec)
    else:
        rn = np.asarray(p, dtype=float)
    risk_term = float(np.dot(w, rn * L))
    div = spec.f_at(rn)
    if np.any(np.isposinf(div[w > 0])):
        return math.inf
    return risk_term + lam * float(np.dot(w, div))


def stationarity_residual(post: Posterior, risk: RiskSpec | None = None) -> float:
    """``max |L + beta + lam * fdot(dP/dQ)|`` over the support."""
    L = post.risk_values if risk is None else risk.values_on(post.measure)
    return float(np.max(np.abs(L + post.beta + post.lam * post.spec.fdot(post.rn))))


# ---------------------------------------------------------------------------
# Existence analysis
# ---------------------------------------------------------------------------

def _bisect_lambda(K, increasing: bool, tol: float, strict_target: bool = False) -> float:
    """Solve ``K(lam) = 1`` for monotone ``K`` by geometric bracketing in ``lam``."""
    def above(v):
        return v >= 1.0 if increasing else v < 1.0

    lo_lam, hi_lam = None, None
    lam = 1.0
    v = K(lam)
    if abs(v - 1.0) <= tol:
        return lam
    if above(v):
        hi_lam = lam
        for _ in range(MAX_BRACKET_STEPS):
            lam /= 4.0
            v = K(lam)
            if not above(v):
                lo_lam = lam
                break
            hi_lam = lam
    else:
        lo_lam = lam
        for _ in range(MAX_BRACKET_STEPS):
            lam *= 4.0
            v = K(lam)
            if above(v):
                hi_lam = lam
                break
            lo_lam = lam
    if lo_lam is None or hi_lam is None:
        raise NonConvergence("could not bracket the minimum regularization factor")
    for _ in range(MAX_BISECTIONS):
        mid = math.sqrt(lo_lam * hi_lam)
        if mid <= lo_lam or mid >= hi_lam:
            break
        v = K(mid)
        if abs(v - 1.0) <= tol * 1e-3:
            return mid
        if above(v):
            hi_lam = mid
        else:
            lo_lam = mid
    v = K(hi_lam)
    if abs(v - 1.0) <= tol:
        return hi_lam
    raise NonConvergence(f"minimum regularization factor bisection ended at |K - 1| = {abs(v - 1.0)!r}")


def _eps_probes(inst: _Instance, t_star: float) -> list[tuple[float, float]]:
    out = []
    for eps in EPS_PROBES:
        try:
            out.append((eps, inst.k(t_star + eps, 1.0)))
        except InfeasiblePointError:
            break
    return out


def classify_boundary(spec: DivergenceSpec, measure: Measure, risk: RiskSpec,
                      tol: float | None = None) -> BoundaryReport:
    """Classify the feasible multiplier set and derive the admissible factors.

    The left end is classified from a dyadic refinement of the constraint
    integral evaluated exactly at ``t*`` (unit regularization factor):
    divergent means the set is open there and every factor is admissible,
    convergent means it is closed and a minimum factor exists.

    Raises:
        Inconclusive: the refinement sequence neither settled nor diverged.
    """
    tol = default_tol(measure) if tol is None else tol
    inst = _Instance(spec, measure, risk)
    B1 = inst.interval(1.0)
    if B1.empty:
        return BoundaryReport(t_star=None, boundary="empty", admissible_lambda=None)

    t_star, t_sup = B1.lo + 0.0, B1.hi + 0.0
    left_finite = math.isfinite(t_star)
    right_finite = math.isfinite(t_sup)
    eps = _eps_probes(inst, t_star) if left_finite else []

    if spec.fdot_inv_nonneg:
        # every factor is admissible; a finite t* (hellinger) is kept in the
        # report but does not restrict the factor
        return BoundaryReport(
            t_star=t_star, t_sup=t_sup, boundary="all_reals",
            admissible_lambda=AdmissibleSet(0.0, False),
            orientation="left" if left_finite else None,
            eps_probes=eps,
        )

    boundary, lam_star, adm_lo, adm_closed, probe = "all_reals", None, 0.0, False, []
    orientation = None
    if left_finite:
        orientation = "left"
        res = inst.left_boundary(1.0)
        probe = res.sums
        if res.verdict == "inconclusive":
            raise Inconclusive(
                f"{spec.name}: constraint integral at t*={t_star!r} neither settles nor exceeds "
                f"{DIVERGENCE_THRESHOLD:g} after {len(res.sums) - 1} refinements "
                f"(last partial sums {res.sums[-3:]})",
                sequence=res.sums,
            )
        if res.verdict == "divergent":
            boundary = "open_left"
        else:
            boundary = "closed_left"
            lam_star = _bisect_lambda(lambda lam: inst.left_boundary(lam).value, True, tol)
            adm_lo, adm_closed = lam_star, True
    if right_finite:
        if orientation is None:
            orientation, boundary = "right", "open_right"
        if inst.bounds[1] > inst.bounds[0]:
            lam_r = _bisect_lambda(inst.right_boundary, False, tol)
            if lam_r >= adm_lo:
                adm_lo, adm_closed = lam_r, False
    return BoundaryReport(
        t_star=t_star, t_sup=t_sup, boundary=boundary,
        admissible_lambda=AdmissibleSet(adm_lo, adm_closed),
        lambda_star=lam_star, orientation=orientation, probe=probe, eps_probes=eps,
    )


def min_regularization(spec: DivergenceSpec, measure: Measure, risk: RiskSpec,
                       tol: float | None = None) -> float:
    """Smallest admissible regularization factor of a left-closed problem.

    Raises:
        PreconditionError: when the multiplier set is not closed on the left.
    """
    report = classify_boundary(spec, measure, risk, tol)
    if report.boundary != "closed_left":
        raise PreconditionError(
            f"{spec.name}: no minimum regularization factor, multiplier set is {report.boundary}"
        )
    return report.lambda_star
