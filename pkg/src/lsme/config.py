"""JSON model files.

A model file is one JSON object::

    {
      "family": {"kind": "studentt", "m": 5},
      "mu": [0.0, 0.0],
      "sigma": [[1.0, 0.3], [0.3, 1.0]],
      "beta": [0.0, 0.5],
      "mixing": {"kind": "gamma", "params": {"shape": 2.0, "rate": 1.0}},
      "options": {"mode": "weighted", "quadrature_nodes": 128, "tolerance": 1e-10}
    }

``family`` may also be a bare string (``"normal"``).  ``beta`` defaults to
zeros and ``options`` to the values shown.  Every error names the offending
field, e.g. ``sigma[1][0]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import mixing as mx
from .errors import LSMEError, ValidationError
from .generators import GeneratorFamily, Kind
from .model import DEFAULT_TOL, LSMEModel
from .spherical import MAX_DIM
from .univariate import Mode

__all__ = ["Options", "ModelConfig", "load_config", "parse_config", "parse_family"]

_FAMILY_ALIASES = {"t": "studentt", "student_t": "studentt", "student-t": "studentt", "gaussian": "normal"}


@dataclass(frozen=True)
class Options:
    mode: Mode = Mode.WEIGHTED
    quadrature_nodes: int = mx.DEFAULT_NODES
    tolerance: float = DEFAULT_TOL
    max_dimension: int = MAX_DIM

    def to_dict(self) -> dict:
        return {
            "mode": self.mode.value,
            "quadrature_nodes": self.quadrature_nodes,
            "tolerance": self.tolerance,
            "max_dimension": self.max_dimension,
        }


@dataclass(frozen=True)
class ModelConfig:
    model: LSMEModel
    options: Options = field(default_factory=Options)

    def to_dict(self) -> dict:
        out = self.model.to_dict()
        out["options"] = self.options.to_dict()
        return out


def _fail(path, message):
    raise ValidationError(f"{path}: {message}")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        _fail(path, "must be finite")
    return float(value)


def _vector(value, path, n=None):
    if not isinstance(value, list):
        _fail(path, "expected an array of numbers")
    if n is not None and len(value) != n:
        _fail(path, f"expected {n} entries, got {len(value)}")
    return [_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _matrix(value, path, n):
    if not isinstance(value, list) or len(value) != n:
        _fail(path, f"expected an array of {n} rows")
    return [_vector(row, f"{path}[{i}]", n) for i, row in enumerate(value)]


def parse_family(value, path="family") -> GeneratorFamily:
    if isinstance(value, str):
        value = {"kind": value}
    if not isinstance(value, dict) or "kind" not in value:
        _fail(path, "expected a family name or an object with a 'kind' field")
    name = str(value["kind"]).strip().lower()
    name = _FAMILY_ALIASES.get(name, name)
    try:
        kind = Kind(name)
    except ValueError:
        _fail(f"{path}.kind", f"unknown family {value['kind']!r}; expected one of {[k.value for k in Kind]}")
    m = value.get("m", value.get("params", {}).get("m") if isinstance(value.get("params"), dict) else None)
    if kind is Kind.STUDENT_T:
        if m is None:
            _fail(f"{path}.m", "Student-t family needs degrees of freedom 'm'")
        m = _number(m, f"{path}.m")
    elif m is not None:
        _fail(f"{path}.m", f"family {kind.value} takes no degrees of freedom")
    try:
        return GeneratorFamily(kind, m)
    except LSMEError as exc:
        _fail(path, str(exc))


def _options(value, path="options") -> Options:
    if value is None:
        return Options()
    if not isinstance(value, dict):
        _fail(path, "expected an object")
    unknown = set(value) - {"mode", "quadrature_nodes", "tolerance", "max_dimension"}
    if unknown:
        _fail(path, f"unknown option(s) {sorted(unknown)}")
    try:
        mode = Mode.parse(value.get("mode", Mode.WEIGHTED))
    except ValidationError as exc:
        _fail(f"{path}.mode", str(exc))
    nodes = value.get("quadrature_nodes", mx.DEFAULT_NODES)
    if isinstance(nodes, bool) or not isinstance(nodes, int) or nodes < 2:
        _fail(f"{path}.quadrature_nodes", f"expected an integer >= 2, got {nodes!r}")
    tol = _number(value.get("tolerance", DEFAULT_TOL), f"{path}.tolerance")
    if tol <= 0:
        _fail(f"{path}.tolerance", "must be positive")
    guard = value.get("max_dimension", MAX_DIM)
    if isinstance(guard, bool) or not isinstance(guard, int) or not 1 <= guard <= MAX_DIM:
        _fail(f"{path}.max_dimension", f"expected an integer in [1, {MAX_DIM}], got {guard!r}")
    return Options(mode, nodes, tol, guard)


def parse_config(data: dict) -> ModelConfig:
    """Validate a decoded JSON document and build the model."""
    if not isinstance(data, dict):
        _fail("<root>", "expected a JSON object")
    for key in ("family", "mu", "sigma", "mixing"):
        if key not in data:
            _fail(key, "missing required field")
    unknown = set(data) - {"family", "mu", "sigma", "beta", "mixing", "options"}
    if unknown:
        _fail("<root>", f"unknown field(s) {sorted(unknown)}")
    options = _options(data.get("options"))
    family = parse_family(data["family"])
    mu = _vector(data["mu"], "mu")
    n = len(mu)
    if n == 0:
        _fail("mu", "must not be empty")
    if n > options.max_dimension:
        _fail("mu", f"dimension {n} exceeds the configured maximum {options.max_dimension}")
    sigma = _matrix(data["sigma"], "sigma", n)
    beta = _vector(data["beta"], "beta", n) if "beta" in data else [0.0] * n
    try:
        mixing = mx.mixing_from_dict(data["mixing"])
    except ValidationError as exc:
        _fail("mixing", str(exc))
    try:
        model = LSMEModel(family, mu, np.array(sigma), beta, mixing)
    except ValidationError as exc:
        _fail("sigma" if "scale matrix" in str(exc) or "sigma" in str(exc) else "<model>", str(exc))
    return ModelConfig(model, options)


def load_config(path) -> ModelConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read model file ({exc.strerror})") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(data)
