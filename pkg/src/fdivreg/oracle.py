"""Brute-force check of the closed-form solution on finite supports.

The objective ``sum p L + lam * sum q f(p/q)`` is minimized directly over
the probability simplex by entropic mirror descent.  Nothing here touches
the inverse derivative or the normalization constant, so agreement with
the solver is evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .divergences import DivergenceSpec
from .errors import ConfigurationError
from .measures import DiscreteMeasure, Measure, QuadratureMeasure, RiskSpec
from .solver import classify_boundary, posterior

MASS_FLOOR = 1e-300
PLATEAU = 10
MAX_BACKTRACKS = 60


@dataclass
class OracleResult:
    masses: np.ndarray
    objective: float
    iterations: int
    converged: bool
    final_step: float
    history: list[float] = field(default_factory=list, repr=False)


@dataclass
class CertifyReport:
    mass_gap: float
    objective_gap: float
    closed_form_objective: float
    oracle_objective: float
    tol: float
    passed: bool


def _discrete_pair(measure: Measure, risk: RiskSpec):
    """Reference masses and risks, with quadrature nodes turned into atoms."""
    L = risk.values_on(measure)
    if isinstance(measure, QuadratureMeasure):
        keep = measure.weights > 0
        return measure.to_discrete().masses, L[keep]
    return measure.masses, L


def _objective(p, q, L, lam, spec):
    r = p / q
    return float(np.dot(p, L) + lam * np.dot(q, spec.f_at(r)))


def simplex_minimize(measure: Measure, risk: RiskSpec, lam: float, spec: DivergenceSpec,
                     max_iters: int = 200_000, tol: float = 1e-13,
                     keep_history: bool = False) -> OracleResult:
    """Entropic mirror descent from ``p = q`` with step ``0.5 / (1 + sqrt(k))``.

    A step that would raise the objective is halved until it does not, so
    the objective sequence is nonincreasing.  Stops once the decrease stays
    below ``tol`` for ten consecutive iterations.
    """
    if not lam > 0:
        raise ConfigurationError(f"regularization factor must be positive, got {lam!r}")
    q, L = _discrete_pair(measure, risk)
    p = q.copy()
    obj = _objective(p, q, L, lam, spec)
    history = [obj] if keep_history else []
    calm = 0
    step = 0.5
    it = 0
    for it in range(1, max_iters + 1):
        step = 0.5 / (1.0 + math.sqrt(it))
        grad = L + lam * spec.fdot(np.maximum(p, MASS_FLOOR) / q)
        grad = grad - grad.min()
        for _ in range(MAX_BACKTRACKS):
            cand = p * np.exp(-step * grad)
            cand = np.maximum(cand / cand.sum(), MASS_FLOOR)
            cand /= cand.sum()
            new = _objective(cand, q, L, lam, spec)
            if new <= obj:
                break
            step *= 0.5
        else:
            cand, new = p, obj
        decrease = obj - new
        p, obj = cand, new
        if keep_history:
            history.append(obj)
        calm = calm + 1 if decrease < tol else 0
        if calm >= PLATEAU:
            return OracleResult(p, obj, it, True, step, history)
    return OracleResult(p, obj, it, False, step, history)


def oracle_stationarity(result: OracleResult, measure: Measure, risk: RiskSpec, lam: float,
                        spec: DivergenceSpec) -> float:
    """Half-spread of ``L + lam * fdot(p/q)``: zero exactly at the optimum."""
    q, L = _discrete_pair(measure, risk)
    g = L + lam * spec.fdot(result.masses / q)
    return float(0.5 * (g.max() - g.min()))


def certify(measure: Measure, risk: RiskSpec, lam: float, spec: DivergenceSpec,
            posterior_masses, oracle_result: OracleResult, tol: float = 1e-6) -> CertifyReport:
    """Compare closed-form masses with an oracle run on the same instance.

    Passes when the closed form is no worse than the oracle by more than
    ``tol`` in objective and the masses agree within ``10 * sqrt(tol)``.
    """
    q, L = _discrete_pair(measure, risk)
    pm = np.asarray(posterior_masses, dtype=float)
    om = np.asarray(oracle_result.masses, dtype=float)
    if pm.shape != q.shape or om.shape != q.shape:
        raise ConfigurationError(
            f"dimension mismatch: posterior {pm.shape}, oracle {om.shape}, measure {q.shape}"
        )
    closed = _objective(pm, q, L, lam, spec)
    orc = _objective(om, q, L, lam, spec)
    gap = float(np.max(np.abs(pm - om)))
    ok = bool(closed <= orc + tol and gap <= 10.0 * math.sqrt(tol))
    return CertifyReport(mass_gap=gap, objective_gap=closed - orc, closed_form_objective=closed,
                         oracle_objective=orc, tol=tol, passed=ok)


def random_instance(rng: np.random.Generator, n: int):
    """Random atoms, Dirichlet reference masses and uniform risks in [0, 1]."""
    atoms = np.arange(n, dtype=float)[:, None]
    q = rng.dirichlet(np.ones(n))
    q = np.maximum(q, 1e-12)
    q /= q.sum()
    L = rng.uniform(0.0, 1.0, size=n)
    return DiscreteMeasure(atoms, q), RiskSpec.tabulated(L)


@dataclass
class BatchRow:
    divergence: str
    index: int
    atoms: int
    lam: float
    report: CertifyReport
    oracle_iterations: int
    oracle_converged: bool


def safe_lambda(spec: DivergenceSpec, measure: Measure, risk: RiskSpec) -> float:
    """A factor comfortably inside the admissible set: 1, or twice its left end."""
    adm = classify_boundary(spec, measure, risk).admissible_lambda
    lo = 0.0 if adm is None else adm.lo
    return max(1.0, 2.0 * lo)


def certify_batch(specs, count: int = 20, seed: int = 0, sizes=(3, 16),
                  tol: float = 1e-6) -> list[BatchRow]:
    """Certify ``count`` random instances per divergence, atoms drawn in ``sizes``."""
    rng = np.random.default_rng(seed)
    rows = []
    for spec in specs:
        for i in range(count):
            n = int(rng.integers(sizes[0], sizes[1] + 1))
            measure, risk = random_instance(rng, n)
            lam = safe_lambda(spec, measure, risk)
            post = posterior(spec, measure, risk, lam)
            orc = simplex_minimize(measure, risk, lam, spec)
            rep = certify(measure, risk, lam, spec, post.masses, orc, tol)
            rows.append(BatchRow(spec.name, i, n, lam, rep, orc.iterations, orc.converged))
    return rows
