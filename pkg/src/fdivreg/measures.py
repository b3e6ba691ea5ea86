"""Reference measures, empirical risks and integration against them.

Two measure types share one small interface (``points``, ``weights``,
``dim``): a finite list of atoms, and a 1-D density discretised by
composite Gauss-Legendre quadrature.  Quadrature measures can additionally
refine their rule dyadically around declared singular points, which is how
divergent integrals at the boundary of the feasible multiplier set are
detected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

DIVERGENCE_THRESHOLD = 1e9
MAX_REFINEMENT_LEVELS = 40
DEFAULT_PANELS = 64
DEFAULT_ORDER = 16


# ---------------------------------------------------------------------------
# Measures
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure.

    Atoms are stored as an ``(n, d)`` array; masses must be strictly
    positive and sum to one.
    """

    atoms: np.ndarray
    masses: np.ndarray

    kind = "discrete"

    def __post_init__(self):
        atoms = np.asarray(self.atoms, dtype=float)
        if atoms.ndim == 1:
            atoms = atoms[:, None]
        masses = np.asarray(self.masses, dtype=float).ravel()
        if atoms.ndim != 2 or atoms.shape[0] != masses.shape[0]:
            raise ConfigurationError(
                f"{atoms.shape[0]} atoms but {masses.shape[0]} masses"
            )
        if masses.size == 0:
            raise ConfigurationError("a discrete measure needs at least one atom")
        if np.any(~np.isfinite(masses)) or np.any(masses <= 0):
            raise ConfigurationError("masses must be finite and strictly positive")
        if abs(masses.sum() - 1.0) > 1e-9:
            raise ConfigurationError(f"masses sum to {masses.sum()!r}, not 1")
        if np.unique(atoms, axis=0).shape[0] != atoms.shape[0]:
            raise ConfigurationError("atoms must be distinct")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "masses", masses)

    @classmethod
    def uniform(cls, atoms) -> "DiscreteMeasure":
        atoms = np.asarray(atoms, dtype=float)
        n = atoms.shape[0]
        return cls(atoms, np.full(n, 1.0 / n))

    @property
    def points(self) -> np.ndarray:
        return self.atoms

    @property
    def weights(self) -> np.ndarray:
        return self.masses

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    def __len__(self):
        return self.masses.size


def _gamma3_tail(t: float) -> float:
    # P(X > t) for density 4 x^2 exp(-2x)
    return math.exp(-2.0 * t) * (1.0 + 2.0 * t + 2.0 * t * t)


@dataclass(frozen=True, eq=False)
class QuadratureMeasure:
    """1-D probability measure with a density, truncated to ``domain``.

    The rule is composite Gauss-Legendre with ``panels`` equal panels of
    ``order`` nodes.  Weights are multiplied by the density and rescaled so
    they sum to one, which folds the truncated tail back in.

    Attributes:
        density: callable on arrays of abscissae.
        domain: truncation interval ``[a, b]``.
        support: closed support of the untruncated density (may extend to
            infinity); risk bounds are taken over this set.
        tail_mass: analytic mass outside ``domain`` (0 for compact support).
    """

    density: Callable
    domain: tuple[float, float]
    panels: int = DEFAULT_PANELS
    order: int = DEFAULT_ORDER
    support: tuple[float, float] | None = None
    tail_mass: float = 0.0
    name: str = "density"
    params: dict = field(default_factory=dict)
    normalized: bool = True

    kind = "density1d"

    def __post_init__(self):
        a, b = (float(v) for v in self.domain)
        if not (math.isfinite(a) and math.isfinite(b) and a < b):
            raise ConfigurationError(f"bad quadrature domain {self.domain}")
        if self.panels < 1 or self.order < 1:
            raise ConfigurationError("panels and order must be positive")
        object.__setattr__(self, "domain", (a, b))
        if self.support is None:
            object.__setattr__(self, "support", (a, b))
        gx, gw = np.polynomial.legendre.leggauss(self.order)
        object.__setattr__(self, "_gl", (gx, gw))
        edges = np.linspace(a, b, self.panels + 1)
        nodes, raw = self._rule(edges[:-1], edges[1:])
        dens = np.asarray(self.density(nodes), dtype=float)
        if np.any(dens < 0) or np.any(~np.isfinite(dens)):
            raise ConfigurationError(f"{self.name}: density must be finite and >= 0 at nodes")
        mass = float(np.dot(raw, dens))
        if mass <= 0:
            raise ConfigurationError(f"{self.name}: density has no mass on {self.domain}")
        if self.normalized and abs(mass + self.tail_mass - 1.0) > 1e-6:
            raise ConfigurationError(
                f"{self.name}: density integrates to {mass + self.tail_mass!r} on its support"
            )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "raw_mass", mass)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "_weights", raw * dens / mass)

    def _rule(self, lo, hi):
        gx, gw = self._gl
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = (mid[:, None] + half[:, None] * gx[None, :]).ravel()
        w = (half[:, None] * gw[None, :]).ravel()
        return nodes, w

    def piece_rule(self, lo, hi):
        """Nodes and normalized measure weights for sub-intervals ``[lo, hi]``."""
        nodes, raw = self._rule(lo, hi)
        return nodes, raw * np.asarray(self.density(nodes), dtype=float) / self.raw_mass

    @property
    def points(self) -> np.ndarray:
        return self.nodes

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def dim(self) -> int:
        return 1

    def with_panels(self, panels: int) -> "QuadratureMeasure":
        return QuadratureMeasure(
            density=self.density, domain=self.domain, panels=panels, order=self.order,
            support=self.support, tail_mass=self.tail_mass, name=self.name,
            params=self.params, normalized=self.normalized,
        )

    def to_discrete(self) -> DiscreteMeasure:
        """Nodes as atoms, normalized weights as masses (zero-weight nodes dropped)."""
        keep = self._weights > 0
        m = self._weights[keep]
        return DiscreteMeasure(self.nodes[keep], m / m.sum())

    def __len__(self):
        return self.nodes.size


def example1_gamma(panels: int = DEFAULT_PANELS, upper: float = 25.0,
                   order: int = DEFAULT_ORDER) -> QuadratureMeasure:
    """Density ``4 t^2 exp(-2 t)`` on ``[0, inf)``, truncated at ``upper``."""
    return QuadratureMeasure(
        density=lambda t: 4.0 * np.asarray(t, dtype=float) ** 2 * np.exp(-2.0 * np.asarray(t, dtype=float)),
        domain=(0.0, upper),
        panels=panels,
        order=order,
        support=(0.0, math.inf),
        tail_mass=_gamma3_tail(upper),
        name="example1_gamma",
    )


def uniform_density(a: float, b: float, panels: int = DEFAULT_PANELS,
                    order: int = DEFAULT_ORDER) -> QuadratureMeasure:
    width = float(b) - float(a)
    return QuadratureMeasure(
        density=lambda t: np.full(np.shape(t), 1.0 / width),
        domain=(a, b), panels=panels, order=order, name="uniform",
    )


def tabulated_density(x: Sequence[float], y: Sequence[float], panels: int = DEFAULT_PANELS,
                      order: int = DEFAULT_ORDER) -> QuadratureMeasure:
    """Piecewise-linear density through ``(x, y)``; normalized numerically."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
        raise ConfigurationError("tabulated density needs increasing x and matching y")
    if np.any(y < 0):
        raise ConfigurationError("tabulated density must be nonnegative")
    return QuadratureMeasure(
        density=lambda t: np.interp(t, x, y),
        domain=(x[0], x[-1]), panels=panels, order=order, name="tabulated",
        normalized=False,
    )


Measure = DiscreteMeasure | QuadratureMeasure


# ---------------------------------------------------------------------------
# Empirical risk
# ---------------------------------------------------------------------------

LOSSES = {"squared": lambda yhat, y: (yhat - y) ** 2}


def _linear(theta, x):
    # theta: (m, d), x: (n, d) -> (m, n)
    return theta @ x.T


PREDICTORS = {"linear": _linear}


def _as_dataset(dataset):
    xs, ys = [], []
    for pair in dataset:
        x, y = pair
        xs.append(np.atleast_1d(np.asarray(x, dtype=float)))
        ys.append(float(y))
    if not xs:
        raise ConfigurationError("dataset is empty")
    try:
        x = np.vstack(xs)
    except ValueError as exc:
        raise ConfigurationError("patterns must share one dimension") from exc
    return x, np.asarray(ys)


def _check_ids(loss, predictor):
    if loss not in LOSSES:
        raise ConfigurationError(f"unknown loss {loss!r}")
    if predictor not in PREDICTORS:
        raise ConfigurationError(f"unknown predictor {predictor!r}")


def empirical_risk(theta, dataset, loss: str = "squared", predictor: str = "linear") -> float:
    """Average loss of model ``theta`` over the labeled pairs in ``dataset``."""
    _check_ids(loss, predictor)
    x, y = _as_dataset(dataset)
    th = np.atleast_1d(np.asarray(theta, dtype=float))[None, :]
    if th.shape[1] != x.shape[1]:
        raise ConfigurationError(f"model has dimension {th.shape[1]}, patterns {x.shape[1]}")
    pred = PREDICTORS[predictor](th, x)
    return float(np.mean(LOSSES[loss](pred, y[None, :])))


@dataclass(frozen=True, eq=False)
class RiskSpec:
    """Empirical risk over the support of a reference measure.

    Either ``values`` (aligned with the measure's points) or a dataset with
    loss and predictor identifiers.  Values may be negative only when
    ``allow_negative`` is set; transformed risks need that.
    """

    values: np.ndarray | None = None
    x: np.ndarray | None = None
    y: np.ndarray | None = None
    loss: str = "squared"
    predictor: str = "linear"
    allow_negative: bool = False

    def __post_init__(self):
        if self.values is None and self.x is None:
            raise ConfigurationError("risk needs either values or a dataset")
        if self.values is not None:
            v = np.asarray(self.values, dtype=float).ravel()
            if np.any(np.isnan(v)):
                raise ConfigurationError("risk values contain NaN")
            if not self.allow_negative and np.any(v < 0):
                raise ConfigurationError("empirical risk values must be nonnegative")
            object.__setattr__(self, "values", v)
        else:
            _check_ids(self.loss, self.predictor)

    @classmethod
    def tabulated(cls, values, allow_negative: bool = False) -> "RiskSpec":
        return cls(values=values, allow_negative=allow_negative)

    @classmethod
    def from_dataset(cls, dataset, loss: str = "squared", predictor: str = "linear") -> "RiskSpec":
        x, y = _as_dataset(dataset)
        return cls(x=x, y=y, loss=loss, predictor=predictor)

    @property
    def has_function(self) -> bool:
        return self.x is not None

    def risk_fn(self, theta) -> np.ndarray:
        """Vectorized ``theta -> L(theta)``; ``theta`` is ``(m,)`` or ``(m, d)``."""
        if self.x is None:
            raise ConfigurationError("tabulated risk cannot be evaluated off its table")
        th = np.asarray(theta, dtype=float)
        if th.ndim <= 1:
            th = th.reshape(-1, 1)
        if th.shape[1] != self.x.shape[1]:
            raise ConfigurationError(
                f"model dimension {th.shape[1]} does not match pattern dimension {self.x.shape[1]}"
            )
        pred = PREDICTORS[self.predictor](th, self.x)
        return np.mean(LOSSES[self.loss](pred, self.y[None, :]), axis=1)

    def values_on(self, measure: Measure) -> np.ndarray:
        if self.values is not None:
            if self.values.size != len(measure):
                raise ConfigurationError(
                    f"{self.values.size} risk values for {len(measure)} support points"
                )
            return self.values
        return self.risk_fn(measure.points)

    def _quadratic(self):
        # L(t) = A t^2 - 2 B t + C for squared loss with a 1-D linear predictor
        if self.x is None or self.x.shape[1] != 1 or self.loss != "squared" or self.predictor != "linear":
            return None
        x = self.x[:, 0]
        return float(np.mean(x * x)), float(np.mean(x * self.y)), float(np.mean(self.y * self.y))

    def bounds(self, measure: Measure) -> tuple[float, float]:
        """``(inf L, sup L)`` over the support of ``measure`` (sup may be inf)."""
        vals = self.values_on(measure)
        lo, hi = float(vals.min()), float(vals.max())
        if isinstance(measure, QuadratureMeasure) and self.values is None:
            quad = self._quadratic()
            if quad is not None:
                return _quadratic_bounds(quad, measure.support)
            # no analytic form: fall back to the node grid
        return lo, hi

    def argmin_points(self, measure: Measure) -> np.ndarray:
        """Support points where the risk attains its infimum."""
        if isinstance(measure, QuadratureMeasure) and self.values is None:
            quad = self._quadratic()
            if quad is not None:
                a, b, _ = quad
                s_lo, s_hi = measure.support
                if a == 0.0:
                    return np.array([])
                v = min(max(b / a, s_lo), s_hi)
                return np.array([v]) if math.isfinite(v) else np.array([])
        vals = self.values_on(measure)
        return measure.points[vals == vals.min()]


def _quadratic_bounds(quad, support):
    a, b, c = quad
    s_lo, s_hi = support

    def at(t):
        if math.isinf(t):
            return math.inf if a > 0 else c
        return a * t * t - 2.0 * b * t + c

    if a == 0.0:
        return c, c
    vertex = min(max(b / a, s_lo), s_hi)
    lo = max(at(vertex), 0.0)
    hi = max(at(s_lo), at(s_hi))
    return lo, hi


# ---------------------------------------------------------------------------
# Integration
# ---------------------------------------------------------------------------

@dataclass
class RefinementResult:
    """Partial sums of a dyadically refined quadrature and their verdict.

    ``sums[n]`` integrates everything except the level-``n`` sub-intervals
    that still contain a singular point, so for a nonnegative integrand the
    sequence is nondecreasing.  ``verdict`` is ``"converged"``,
    ``"divergent"`` or ``"inconclusive"``; ``value`` adds the quadrature of
    the remaining sub-intervals back in (``inf`` when divergent).
    """

    sums: list[float]
    verdict: str
    value: float


def _checked(values, points):
    values = np.asarray(values, dtype=float)
    if np.any(np.isnan(values)):
        bad = np.flatnonzero(np.isnan(values))[0]
        raise DomainError(f"integrand is NaN at support point {points[bad]!r}")
    return values


def _weighted_sum(w, values):
    pos = w > 0
    if np.any(np.isposinf(values[pos])):
        return math.inf
    return float(np.dot(w[pos], values[pos]))


def refinement_sequence(measure: QuadratureMeasure, integrand: Callable, singular_points,
                        max_levels: int = MAX_REFINEMENT_LEVELS,
                        threshold: float = DIVERGENCE_THRESHOLD,
                        rtol: float = 1e-4, settle: int = 3) -> RefinementResult:
    """Refine the panels holding ``singular_points`` by repeated halving.

    At every level the sub-interval that still contains a singular point is
    split in two and the half without one is frozen into the partial sum.
    The sequence is divergent once it passes ``threshold`` and converged
    once ``settle`` consecutive relative changes fall below ``rtol``.
    """
    pts = np.atleast_1d(np.asarray(singular_points, dtype=float)).ravel()
    edges = measure.edges
    a, b = measure.domain
    pts = pts[(pts >= a) & (pts <= b)]

    def contains(lo, hi):
        return bool(np.any((pts >= lo) & (pts <= hi)))

    def piece_sum(intervals):
        x, wx = measure.piece_rule([iv[0] for iv in intervals], [iv[1] for iv in intervals])
        return _weighted_sum(wx, _checked(integrand(x), x))

    nodes, w = measure.points, measure.weights
    vals = _checked(integrand(nodes), nodes)
    active = []
    rest_mask = np.ones(nodes.size, dtype=bool)
    n_per = measure.order
    for i in range(measure.panels):
        if pts.size and contains(edges[i], edges[i + 1]):
            active.append((edges[i], edges[i + 1]))
            rest_mask[i * n_per:(i + 1) * n_per] = False
    if not active:
        total = _weighted_sum(w, vals)
        verdict = "divergent" if total > threshold else "converged"
        return RefinementResult([total], verdict, math.inf if verdict == "divergent" else total)

    frozen = _weighted_sum(w[rest_mask], vals[rest_mask])
    sums = [frozen]
    calm = 0
    for _ in range(max_levels):
        nxt, done = [], []
        for lo, hi in active:
            mid = 0.5 * (lo + hi)
            for half in ((lo, mid), (mid, hi)):
                (nxt if contains(*half) else done).append(half)
        if done:
            frozen += piece_sum(done)
        active = nxt
        prev = sums[-1]
        sums.append(frozen)
        if not math.isfinite(frozen) or frozen > threshold:
            return RefinementResult(sums, "divergent", math.inf)
        if abs(frozen - prev) <= rtol * abs(frozen):
            calm += 1
            if calm >= settle:
                return RefinementResult(sums, "converged", frozen + piece_sum(active))
        else:
            calm = 0
    return RefinementResult(sums, "inconclusive", frozen + piece_sum(active))


def integrate(measure: Measure, integrand: Callable, singular_points=None) -> float:
    """Integrate ``integrand`` (a function of support points) against ``measure``.

    Returns ``inf`` when the integrand is infinite on a point of positive
    mass, or, for quadrature measures with declared ``singular_points``,
    when dyadic refinement around them drives the partial sums past the
    divergence threshold.
    """
    if isinstance(measure, QuadratureMeasure) and singular_points is not None and np.size(singular_points):
        res = refinement_sequence(measure, integrand, singular_points)
        return res.value
    pts = measure.points
    return _weighted_sum(measure.weights, _checked(integrand(pts), pts))


def integrate_with_error(measure: Measure, integrand: Callable) -> tuple[float, float]:
    """Integral and an error estimate from one 2x panel refinement.

    The value returned is the refined one; the estimate is the change
    produced by the refinement.
    """
    coarse = integrate(measure, integrand)
    if isinstance(measure, DiscreteMeasure):
        return coarse, 0.0
    fine = integrate(measure.with_panels(2 * measure.panels), integrand)
    return fine, abs(fine - coarse)


# ---------------------------------------------------------------------------
# JSON schema
# ---------------------------------------------------------------------------

def measure_from_dict(d: dict, panels: int | None = None) -> Measure:
    """Build a measure from its JSON description."""
    kind = d.get("type")
    if kind == "discrete":
        if "atoms" not in d or "masses" not in d:
            raise ConfigurationError("discrete measure needs 'atoms' and 'masses'")
        return DiscreteMeasure(np.asarray(d["atoms"], dtype=float), np.asarray(d["masses"], dtype=float))
    if kind == "density1d":
        name = d.get("name")
        n = int(panels or d.get("panels", DEFAULT_PANELS))
        params = d.get("params", {}) or {}
        order = int(params.get("order", DEFAULT_ORDER))
        if name == "example1_gamma":
            upper = float(d.get("domain", [0.0, 25.0])[1])
            return example1_gamma(panels=n, upper=upper, order=order)
        if name == "uniform":
            if "domain" not in d:
                raise ConfigurationError("uniform density needs a 'domain'")
            a, b = d["domain"]
            return uniform_density(a, b, panels=n, order=order)
        if name == "tabulated":
            return tabulated_density(params.get("x", []), params.get("y", []), panels=n, order=order)
        raise ConfigurationError(f"unknown density {name!r}")
    raise ConfigurationError(f"unknown measure type {kind!r}")


def measure_to_dict(measure: Measure) -> dict:
    if isinstance(measure, DiscreteMeasure):
        return {"type": "discrete", "atoms": measure.atoms.tolist(), "masses": measure.masses.tolist()}
    return {"type": "density1d", "name": measure.name, "domain": list(measure.domain),
            "panels": measure.panels}


def risk_from_dict(d: dict) -> RiskSpec:
    """Build a risk specification from its JSON description."""
    kind = d.get("type")
    if kind == "values":
        return RiskSpec.tabulated(d.get("values", []))
    if kind == "dataset":
        data = d.get("data")
        if not data:
            raise ConfigurationError("dataset risk needs nonempty 'data'")
        return RiskSpec.from_dataset(data, loss=d.get("loss", "squared"),
                                     predictor=d.get("predictor", "linear"))
    raise ConfigurationError(f"unknown risk type {kind!r}")
