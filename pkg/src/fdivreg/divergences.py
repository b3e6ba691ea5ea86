"""Generators of f-divergences and the Lambert W function.

Every generator carries its derivative, the inverse of that derivative and
the open range of the derivative, since the solver works almost entirely
through the inverse derivative.  All callables accept scalars or numpy
arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import xlogy

from .errors import ConfigurationError, DomainError

LOG2 = math.log(2.0)

BUILTIN_NAMES = ("kl", "reverse_kl", "jeffrey", "hellinger", "jensen_shannon", "chi2")


# ---------------------------------------------------------------------------
# Lambert W, principal branch on [0, inf)
# ---------------------------------------------------------------------------

def lambert_w0(x):
    """Principal branch of the Lambert W function for nonnegative arguments.

    Halley iteration on ``w * exp(w) - x`` started from ``x`` for small
    arguments and from ``log x - log log x`` for large ones.

    Raises:
        DomainError: if any argument is negative or NaN.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise DomainError("lambert_w0 is only defined here for x >= 0")
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)

    big = arr > 1e300
    if np.any(big):
        out[big] = lambert_w0_exp(np.log(arr[big]))

    small = ~big
    xs = arr[small]
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(np.maximum(xs, math.e))
        w = np.where(xs < math.e, np.log1p(xs), lx - np.log(lx))
        for _ in range(100):
            ew = np.exp(w)
            r = w * ew - xs
            w1 = w + 1.0
            dw = r / (ew * w1 - (w + 2.0) * r / (2.0 * w1))
            w = w - dw
            if np.all(np.abs(dw) <= 4e-16 * (1.0 + np.abs(w))):
                break
    w = np.where(xs == 0.0, 0.0, w)
    w = np.where(np.isinf(xs), np.inf, w)
    out[small] = w
    return float(out[0]) if scalar else out


def lambert_w0_exp(a):
    """``W0(exp(a))`` without forming ``exp(a)``.

    Needed for Jeffrey's inverse derivative, whose argument is an
    exponential that overflows for moderately negative inputs.
    """
    arr = np.asarray(a, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    out = np.empty_like(arr)

    mid = arr <= 690.0
    if np.any(mid):
        out[mid] = lambert_w0(np.exp(arr[mid]))

    hi = ~mid
    if np.any(hi):
        ah = arr[hi]
        # Newton on w + log w = a; w > 600 here, so log w is harmless.
        w = ah - np.log(ah)
        for _ in range(50):
            dw = (w + np.log(w) - ah) * w / (w + 1.0)
            w = w - dw
            if np.all(np.abs(dw) <= 4e-16 * w):
                break
        out[hi] = np.where(np.isinf(ah), np.inf, w)
    return float(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Generator specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DivergenceSpec:
    """A strictly convex, differentiable generator ``f`` with ``f(1) = 0``.

    Attributes:
        name: identifier.
        f: the generator on (0, inf).
        fdot: derivative of ``f``.
        fdot_inv: inverse of ``fdot`` on ``y_range``.
        y_range: open interval on which ``fdot_inv`` is defined.
        fdot_inv_nonneg: whether the inverse derivative, extended to the
            whole real line, never goes negative.
        f_zero: ``lim_{x -> 0+} f(x)``, possibly ``inf``.
        positive_range: sub-interval of ``y_range`` where ``fdot_inv > 0``.
            Equal to the image of (0, inf) under ``fdot``. Defaults to
            ``y_range``.
    """

    name: str
    f: Callable
    fdot: Callable
    fdot_inv: Callable
    y_range: tuple[float, float]
    fdot_inv_nonneg: bool
    f_zero: float
    positive_range: tuple[float, float] = field(default=None)

    def __post_init__(self):
        lo, hi = self.y_range
        if not lo < hi:
            raise ConfigurationError(f"{self.name}: empty y_range {self.y_range}")
        if self.positive_range is None:
            object.__setattr__(self, "positive_range", (float(lo), float(hi)))
        plo, phi = self.positive_range
        if plo < lo or phi > hi or not plo < phi:
            raise ConfigurationError(
                f"{self.name}: positive_range {self.positive_range} must lie in y_range"
            )

    def f_at(self, x):
        """Generator with ``f(0)`` replaced by its right limit."""
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(x > 0, self.f(np.where(x > 0, x, 1.0)), self.f_zero)
        return val if val.ndim else float(val)

    def __repr__(self):
        return f"DivergenceSpec({self.name!r})"


def _kl():
    return DivergenceSpec(
        name="kl",
        f=lambda x: xlogy(x, x),
        fdot=lambda x: 1.0 + np.log(x),
        fdot_inv=lambda y: np.exp(np.asarray(y, dtype=float) - 1.0),
        y_range=(-math.inf, math.inf),
        fdot_inv_nonneg=True,
        f_zero=0.0,
    )


def _reverse_kl():
    return DivergenceSpec(
        name="reverse_kl",
        f=lambda x: -np.log(x),
        fdot=lambda x: -1.0 / np.asarray(x, dtype=float),
        fdot_inv=lambda y: -1.0 / np.asarray(y, dtype=float),
        y_range=(-math.inf, 0.0),
        fdot_inv_nonneg=False,
        f_zero=math.inf,
    )


def _jeffrey():
    # x = 1/w with w + log w = 1 - y, hence w = W0(exp(1 - y)).
    return DivergenceSpec(
        name="jeffrey",
        f=lambda x: (np.asarray(x, dtype=float) - 1.0) * np.log(x),
        fdot=lambda x: np.log(x) + 1.0 - 1.0 / np.asarray(x, dtype=float),
        fdot_inv=lambda y: 1.0 / lambert_w0_exp(1.0 - np.asarray(y, dtype=float)),
        y_range=(-math.inf, math.inf),
        fdot_inv_nonneg=True,
        f_zero=math.inf,
    )


def _hellinger():
    return DivergenceSpec(
        name="hellinger",
        f=lambda x: (1.0 - np.sqrt(x)) ** 2,
        fdot=lambda x: 1.0 - 1.0 / np.sqrt(x),
        fdot_inv=lambda y: (1.0 - np.asarray(y, dtype=float)) ** -2,
        y_range=(-math.inf, 1.0),
        fdot_inv_nonneg=True,
        f_zero=1.0,
    )


def _js_f(x):
    x = np.asarray(x, dtype=float)
    return xlogy(x, 2.0 * x / (x + 1.0)) + LOG2 - np.log1p(x)


def _js_fdot_inv(y):
    # exp(y) / (2 - exp(y)) rewritten to keep precision near y = log 2
    with np.errstate(over="ignore"):
        return 1.0 / np.expm1(LOG2 - np.asarray(y, dtype=float))


def _jensen_shannon():
    return DivergenceSpec(
        name="jensen_shannon",
        f=_js_f,
        fdot=lambda x: LOG2 - np.log1p(1.0 / np.asarray(x, dtype=float)),
        fdot_inv=_js_fdot_inv,
        y_range=(-math.inf, LOG2),
        fdot_inv_nonneg=False,
        f_zero=LOG2,
    )


def _chi2():
    return DivergenceSpec(
        name="chi2",
        f=lambda x: (np.asarray(x, dtype=float) - 1.0) ** 2,
        fdot=lambda x: 2.0 * (np.asarray(x, dtype=float) - 1.0),
        fdot_inv=lambda y: np.asarray(y, dtype=float) / 2.0 + 1.0,
        y_range=(-math.inf, math.inf),
        fdot_inv_nonneg=False,
        f_zero=1.0,
        positive_range=(-2.0, math.inf),
    )


_FACTORIES = {
    "kl": _kl,
    "reverse_kl": _reverse_kl,
    "jeffrey": _jeffrey,
    "hellinger": _hellinger,
    "jensen_shannon": _jensen_shannon,
    "chi2": _chi2,
}

_CACHE: dict[str, DivergenceSpec] = {}


def builtin(name: str) -> DivergenceSpec:
    """Return the builtin generator called ``name``.

    Raises:
        ConfigurationError: for names outside ``BUILTIN_NAMES``.
    """
    if name not in _FACTORIES:
        raise ConfigurationError(
            f"unknown divergence {name!r}; expected one of {', '.join(BUILTIN_NAMES)}"
        )
    if name not in _CACHE:
        _CACHE[name] = _FACTORIES[name]()
    return _CACHE[name]


def f_divergence(p, q, spec: DivergenceSpec, atol: float = 1e-9) -> float:
    """``sum_i q_i f(p_i / q_i)`` for mass vectors on a common finite support."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise ConfigurationError(f"mass vectors must be 1-D of equal length, got {p.shape} and {q.shape}")
    if np.any(q <= 0):
        raise ConfigurationError("reference masses must be strictly positive")
    if np.any(p < 0):
        raise ConfigurationError("masses must be nonnegative")
    for label, v in (("p", p), ("q", q)):
        if abs(v.sum() - 1.0) > atol:
            raise ConfigurationError(f"{label} sums to {v.sum()!r}, not 1")
    vals = spec.f_at(p / q)
    if np.any(np.isinf(vals) & (vals > 0)):
        return math.inf
    return float(np.dot(q, vals))
