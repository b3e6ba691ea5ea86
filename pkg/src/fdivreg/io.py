"""Problem files and result serialization.

A problem file is a JSON object::

    {"divergence": "reverse_kl",
     "lambda": 0.5,
     "reference": {"type": "density1d", "name": "example1_gamma"},
     "risk": {"type": "dataset", "loss": "squared", "predictor": "linear", "data": [[1, 0]]},
     "tol": 1e-6}

``divergence`` may also be ``{"module": "package.module:ATTR"}`` naming a
``DivergenceSpec`` (or a zero-argument callable returning one).  For sweeps
``lambda`` is a grid ``{"start", "stop", "count", "scale"}``.  Equivalence
runs read the second divergence from ``divergence_g``.
"""

from __future__ import annotations

import importlib
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .divergences import DivergenceSpec, builtin
from .errors import ConfigurationError
from .measures import Measure, RiskSpec, measure_from_dict, risk_from_dict

KNOWN_KEYS = {"divergence", "divergence_g", "lambda", "reference", "risk", "tol"}


# ---------------------------------------------------------------------------
# JSON output at 17 significant digits
# ---------------------------------------------------------------------------

def _num(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    if x == int(x) and abs(x) < 1e16:
        # keep integral floats readable and unambiguous as floats
        return f"{x:.1f}"
    return f"{x:.17g}"


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON with every float at 17 significant digits.

    Non-finite values are written as ``Infinity``/``NaN``, which ``json.loads``
    reads back.
    """
    return _encode(obj, indent, 0) + "\n"


def loads(text: str):
    return json.loads(text)


# ---------------------------------------------------------------------------
# Problem files
# ---------------------------------------------------------------------------

@dataclass
class Problem:
    divergence: DivergenceSpec
    measure: Measure
    risk: RiskSpec
    lam: float | None = None
    lam_grid: np.ndarray | None = None
    tol: float | None = None
    divergence_g: DivergenceSpec | None = None
    raw: dict | None = None


def load_divergence(d) -> DivergenceSpec:
    """Builtin name, ``{"name": ...}`` or ``{"module": "pkg.mod:ATTR"}``."""
    if isinstance(d, str):
        return builtin(d)
    if isinstance(d, dict):
        if "name" in d and "module" not in d:
            return builtin(d["name"])
        target = d.get("module")
        if not isinstance(target, str) or ":" not in target:
            raise ConfigurationError("user divergence needs 'module' of the form 'package.module:ATTR'")
        mod_name, attr = target.split(":", 1)
        try:
            obj = getattr(importlib.import_module(mod_name), attr)
        except (ImportError, AttributeError) as exc:
            raise ConfigurationError(f"cannot load divergence {target!r}: {exc}") from exc
        if callable(obj) and not isinstance(obj, DivergenceSpec):
            try:
                obj = obj()
            except TypeError as exc:
                raise ConfigurationError(f"{target!r} must take no arguments: {exc}") from exc
        if not isinstance(obj, DivergenceSpec):
            raise ConfigurationError(f"{target!r} is not a DivergenceSpec")
        return obj
    raise ConfigurationError(f"divergence must be a name or an object, got {type(d).__name__}")


def lambda_grid(d: dict) -> np.ndarray:
    try:
        start, stop, count = float(d["start"]), float(d["stop"]), int(d["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"lambda grid needs numeric start, stop and count: {exc}") from exc
    scale = d.get("scale", "linear")
    if count < 1 or not (start > 0 and stop > 0):
        raise ConfigurationError("lambda grid needs count >= 1 and positive end points")
    if scale == "linear":
        return np.linspace(start, stop, count)
    if scale == "log":
        return np.geomspace(start, stop, count)
    raise ConfigurationError(f"unknown grid scale {scale!r}")


def _positive(x, what: str) -> float:
    try:
        x = float(x)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"{what} must be a number, got {x!r}") from exc
    if not (x > 0 and math.isfinite(x)):
        raise ConfigurationError(f"{what} must be positive and finite, got {x!r}")
    return x


def parse_problem(d: dict, panels: int | None = None) -> Problem:
    if not isinstance(d, dict):
        raise ConfigurationError("problem file must hold a JSON object")
    unknown = set(d) - KNOWN_KEYS
    if unknown:
        raise ConfigurationError(f"unknown keys in problem file: {sorted(unknown)}")
    for key in ("divergence", "reference", "risk"):
        if key not in d:
            raise ConfigurationError(f"problem file is missing {key!r}")
    lam, grid = None, None
    raw_lam = d.get("lambda")
    if isinstance(raw_lam, dict):
        grid = lambda_grid(raw_lam)
    elif raw_lam is not None:
        lam = _positive(raw_lam, "lambda")
    tol = _positive(d["tol"], "tol") if d.get("tol") is not None else None
    if not isinstance(d["reference"], dict) or not isinstance(d["risk"], dict):
        raise ConfigurationError("'reference' and 'risk' must be objects")
    try:
        measure = measure_from_dict(d["reference"], panels=panels)
        risk = risk_from_dict(d["risk"])
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigurationError):
            raise
        raise ConfigurationError(str(exc)) from exc
    g = load_divergence(d["divergence_g"]) if "divergence_g" in d else None
    return Problem(load_divergence(d["divergence"]), measure, risk, lam, grid, tol, g, d)


def read_problem(path, panels: int | None = None) -> Problem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigurationError(f"cannot read problem file {path}: {exc}") from exc
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
    return parse_problem(d, panels=panels)
