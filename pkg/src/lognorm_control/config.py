"""JSON problem descriptions.

A config file describes one plant, optionally a controller request, and
the analysis defaults.  Matrix-valued data is written as expression
strings (see :mod:`.expr` for the grammar); ``B`` is numeric because the
gain needs its exact inverse.  Validation is strict: unknown keys are
rejected, every dimension must match ``n``, and expression errors are
reported with their entry position and byte offset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import jsonschema
import numpy as np

from .expr import (
    Expr,
    MatrixFunction,
    SourceError,
    VectorFunction,
    collect_vars,
    format_expr,
    parse,
    state_vars,
)
from .linalg import INF, ONE, TWO, LinalgError, Weighted
from .synthesis import AutoGamma, ExplicitGamma
from .system import ControllerSpec, SystemSpec

__all__ = ["ConfigError", "ControllerConfig", "LoadedConfig", "CONFIG_SCHEMA",
           "load_config", "serialize_config"]

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "lognorm-control problem description",
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "t0", "x0", "A", "B"],
    "properties": {
        "n": {"type": "integer", "minimum": 2, "maximum": 16},
        "t0": {"type": "number"},
        "x0": {"type": "array", "items": {"type": "number"}},
        "norm": {"enum": ["one", "two", "inf"]},
        "A": {"type": "array",
              "items": {"type": "array", "items": {"type": "string"}}},
        "Delta": {"type": "array",
                  "items": {"type": "array", "items": {"type": "string"}}},
        "B": {"type": "array",
              "items": {"type": "array", "items": {"type": "number"}}},
        "omega": {"type": "array", "items": {"type": "string"}},
        "omega_bound": {"type": "string"},
        "controller": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "lambda": {"type": "array", "items": {"type": "number"}},
                "gamma": {"oneOf": [{"const": "auto"},
                                    {"type": "array",
                                     "items": {"type": "string"}}]},
                "margin": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "horizon": {"type": "number"},
        "tol": {"type": "number", "exclusiveMinimum": 0},
    },
}

_NORMS = {"one": ONE, "two": TWO, "inf": INF}


class ConfigError(ValueError):
    """A config document that does not describe a valid problem."""


@dataclass
class ControllerConfig:
    """The controller request from a config: rates and a gamma rule."""
    lam: np.ndarray | None
    rule: object  # AutoGamma or ExplicitGamma

    def build(self, spec: SystemSpec) -> ControllerSpec:
        from .synthesis import synthesize
        return synthesize(spec, self.lam, self.rule)


@dataclass
class LoadedConfig:
    spec: SystemSpec
    controller: ControllerConfig | None
    horizon: float
    tol: float


def _parse_entry(text, allowed, where: str) -> Expr:
    try:
        return parse(text, allowed)
    except SourceError as exc:
        raise ConfigError(f"{where}: {exc.message} at offset {exc.offset} "
                          f"in {text!r}") from None


def _parse_square(rows, n: int, allowed, name: str) -> MatrixFunction:
    if len(rows) != n or any(len(r) != n for r in rows):
        raise ConfigError(f"{name} must be {n}x{n} to match n={n}")
    entries = [[_parse_entry(rows[i][j], allowed, f"{name}[{i + 1}][{j + 1}]")
                for j in range(n)] for i in range(n)]
    return MatrixFunction(entries, allowed)


def load_config(source) -> LoadedConfig:
    """Validate and build a problem from a dict, JSON text path or Path.

    Raises ConfigError on any structural or semantic problem; the message
    names the offending key (and for expressions, the byte offset).
    """
    if isinstance(source, (str, Path)):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    else:
        doc = source
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")

    try:
        jsonschema.validate(instance=doc, schema=CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = exc.json_path if hasattr(exc, "json_path") else "$"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None

    n = doc["n"]
    t0 = float(doc["t0"])
    x0 = doc["x0"]
    if len(x0) != n:
        raise ConfigError(f"x0 must have {n} entries, got {len(x0)}")

    A = _parse_square(doc["A"], n, ("t",), "A")
    Delta = (_parse_square(doc["Delta"], n, ("t",), "Delta")
             if "Delta" in doc else None)

    B = np.asarray(doc["B"], dtype=float)
    if B.shape != (n, n):
        raise ConfigError(f"B must be {n}x{n} to match n={n}, got {B.shape}")

    omega = None
    if "omega" in doc:
        if len(doc["omega"]) != n:
            raise ConfigError(f"omega must have {n} entries, "
                              f"got {len(doc['omega'])}")
        allowed = ("t",) + state_vars(n)
        omega = VectorFunction(
            [_parse_entry(s, allowed, f"omega[{i + 1}]")
             for i, s in enumerate(doc["omega"])], allowed)

    omega_bound = None
    if "omega_bound" in doc:
        omega_bound = _parse_entry(doc["omega_bound"], ("t",), "omega_bound")

    try:
        spec = SystemSpec(n=n, A=A, B=B, t0=t0, x0=np.asarray(x0, dtype=float),
                          Delta=Delta, omega=omega, omega_bound=omega_bound,
                          norm=_NORMS[doc.get("norm", "two")])
    except LinalgError as exc:
        raise ConfigError(str(exc)) from None

    controller = None
    if "controller" in doc:
        c = doc["controller"]
        lam = None
        if "lambda" in c:
            if len(c["lambda"]) != n:
                raise ConfigError(f"controller.lambda must have {n} entries, "
                                  f"got {len(c['lambda'])}")
            lam = np.asarray(c["lambda"], dtype=float)
        gamma = c.get("gamma", "auto")
        if gamma == "auto":
            rule = AutoGamma(margin=float(c.get("margin", 1.0)))
        else:
            if "margin" in c:
                raise ConfigError(
                    "controller.margin only applies to gamma='auto'")
            if len(gamma) != n:
                raise ConfigError(f"controller.gamma must have {n} entries, "
                                  f"got {len(gamma)}")
            rule = ExplicitGamma(tuple(
                _parse_entry(s, ("t",), f"controller.gamma[{i + 1}]")
                for i, s in enumerate(gamma)))
        controller = ControllerConfig(lam=lam, rule=rule)

    horizon = float(doc.get("horizon", t0 + 10.0))
    if not (horizon > t0):
        raise ConfigError(f"horizon {horizon} must exceed t0={t0}")
    tol = float(doc.get("tol", 1e-8))
    return LoadedConfig(spec=spec, controller=controller,
                        horizon=horizon, tol=tol)


def serialize_config(spec: SystemSpec, controller=None,
                     horizon: float | None = None,
                     tol: float | None = None) -> dict:
    """The inverse of :func:`load_config`: a JSON-ready document.

    ``controller`` may be a ControllerConfig or a ControllerSpec; a
    synthesized controller serializes with its gamma written out
    explicitly.  Weighted analysis norms have no config representation.
    """
    if isinstance(spec.norm, Weighted):
        raise ConfigError("weighted norms have no config representation")
    doc = {
        "n": spec.n,
        "t0": spec.t0,
        "x0": [float(v) for v in spec.x0],
        "norm": str(spec.norm),
        "A": spec.A.formatted(),
        "B": [[float(v) for v in row] for row in spec.B],
    }
    if spec.Delta is not None:
        doc["Delta"] = spec.Delta.formatted()
    if spec.omega is not None:
        doc["omega"] = spec.omega.formatted()
    if spec.omega_bound is not None:
        doc["omega_bound"] = format_expr(spec.omega_bound)
    if controller is not None:
        if isinstance(controller, ControllerConfig):
            c = {}
            if controller.lam is not None:
                c["lambda"] = [float(v) for v in controller.lam]
            if isinstance(controller.rule, AutoGamma):
                c["gamma"] = "auto"
                if controller.rule.margin != 1.0:
                    c["margin"] = controller.rule.margin
            else:
                c["gamma"] = [format_expr(g) for g in controller.rule.entries]
            doc["controller"] = c
        else:  # a synthesized ControllerSpec
            doc["controller"] = {
                "lambda": [float(v) for v in controller.lam],
                "gamma": [format_expr(g) for g in controller.gamma],
            }
    if horizon is not None:
        doc["horizon"] = float(horizon)
    if tol is not None:
        doc["tol"] = float(tol)
    return doc
