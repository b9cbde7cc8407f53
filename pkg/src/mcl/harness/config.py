"""Experiment configuration files and their per-kind schemas."""
from __future__ import annotations

import ast
import copy
import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from ..errors import ConfigError

KINDS = ("duality", "flow", "bvp", "forms", "reduction")

# key -> (type or tuple of types, default)
SCHEMAS: dict[str, dict[str, tuple]] = {
    "duality": {
        "map": (str, "gm"), "m": (int, 3), "powers": (list, [1, 2]), "starts": (int, 64),
        "phases": (list, [0.5, 2.0]), "entries": (list, None), "manifold": (str, "S1"),
        "u0": (list, None),
    },
    "flow": {
        "n": (int, 3), "seeds": (int, 100), "t_max": ((int, float), 20.0), "dt": ((int, float), 0.5),
        "horizon": ((int, float), 200.0), "morse_n": (int, 4), "fixed_point": (bool, True),
    },
    "bvp": {
        "system": (str, "cubic-straightened"), "epsilon": ((int, float), 0.3), "problems": (int, 1000),
        "tau_max": ((int, float), 5.0), "shooting": (int, 5), "taus": (list, [1.0, 2.0, 3.0, 4.0, 5.0]),
        "points": (list, [[0.2, 0.15], [0.1, -0.2]]), "scan_grid": (int, 64),
    },
    "forms": {"kmax": (int, 8), "wedge_trials": (int, 5)},
    "reduction": {"n": (int, 4), "N": (int, 2), "samples": (int, 1000)},
}

TOLERANCES: dict[str, dict[str, float]] = {
    "duality": {"integral": 1e-9, "difference": 1e-3},
    "flow": {"ode": 1e-6, "drift": 1e-8, "semigroup": 1e-10, "fixed_point": 1e-12, "monotone": 1e-12},
    "bvp": {"closed_form": 1e-10, "shooting": 1e-8, "identity": 1e-8, "dulac": 1e-6, "tangency": 1e-8,
            "slope": 0.05, "event": 1e-9},
    "forms": {"beta": 1e-12, "closed": 1e-4, "transgression": 1e-8, "identity": 1e-4, "unstable_k1": 1e-9,
              "unstable_k2_rel": 1e-4, "homotopy": 1e-9, "wedge": 1e-10},
    "reduction": {"unitary": 1e-9, "exact": 1e-13},
}

QUADRATURE_KEYS = {"mode": str, "order": int, "samples": int, "seed": int}


@dataclass
class ExperimentConfig:
    kind: str
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    seed: int = 0
    name: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> "ExperimentConfig":
        if self.kind not in KINDS:
            raise ConfigError(f"unknown kind {self.kind!r}; expected one of {', '.join(KINDS)}")
        schema = SCHEMAS[self.kind]
        params = {}
        for key, value in self.params.items():
            if key not in schema:
                raise ConfigError(f"unknown parameter {key!r} for kind {self.kind!r}")
            typ, _ = schema[key]
            if value is not None and (not isinstance(value, typ) or isinstance(value, bool) and typ is int):
                raise ConfigError(f"parameter {key!r} has the wrong type ({type(value).__name__})")
            params[key] = value
        for key, (_, default) in schema.items():
            params.setdefault(key, copy.deepcopy(default))
        self.params = params
        tols = dict(TOLERANCES[self.kind])
        for key, value in self.tolerances.items():
            if key not in tols:
                raise ConfigError(f"unknown tolerance {key!r} for kind {self.kind!r}")
            if not isinstance(value, (int, float)) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"tolerance {key!r} must be a nonnegative number")
            tols[key] = float(value)
        self.tolerances = tols
        for key, value in self.quadrature.items():
            if key not in QUADRATURE_KEYS or not isinstance(value, QUADRATURE_KEYS[key]):
                raise ConfigError(f"bad quadrature field {key!r}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        self._check_ranges()
        return self

    def _check_ranges(self):
        p = self.params
        positive = {"flow": ("n", "seeds", "t_max", "dt", "horizon"), "bvp": ("epsilon", "problems", "tau_max"),
                    "reduction": ("n", "samples"), "forms": ("kmax",), "duality": ("starts",)}
        for key in positive[self.kind]:
            if p[key] <= 0:
                raise ConfigError(f"parameter {key!r} must be positive")
        if self.kind == "reduction" and not 0 <= p["N"] <= p["n"]:
            raise ConfigError("need 0 <= N <= n")
        if self.kind == "duality":
            if p["map"] not in ("gm", "diag", "s3", "constant", "custom"):
                raise ConfigError(f"unknown map {p['map']!r}")
            if p["map"] == "custom" and not p["entries"]:
                raise ConfigError("custom map needs an 'entries' matrix of expressions")
        if self.kind == "bvp":
            from ..bvp import SYSTEMS

            if p["system"] not in SYSTEMS:
                raise ConfigError(f"unknown system {p['system']!r}; known: {', '.join(SYSTEMS)}")

    @classmethod
    def from_dict(cls, d: dict, name: Optional[str] = None) -> "ExperimentConfig":
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        extra = set(d) - {"kind", "params", "tolerances", "quadrature", "seed", "name"}
        if extra:
            raise ConfigError(f"unknown top-level fields: {', '.join(sorted(extra))}")
        if "kind" not in d:
            raise ConfigError("config needs a 'kind'")
        for key in ("params", "tolerances", "quadrature"):
            if not isinstance(d.get(key, {}), dict):
                raise ConfigError(f"{key!r} must be an object")
        return cls(d["kind"], dict(d.get("params", {})), dict(d.get("tolerances", {})),
                   dict(d.get("quadrature", {})), d.get("seed", 0), d.get("name", name))

    @classmethod
    def from_file(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": self.params, "tolerances": self.tolerances,
                "quadrature": self.quadrature, "seed": self.seed, "name": self.name}


# --- matrix-entry expressions ----------------------------------------------------------------

_FUNCS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "tan": np.tan, "sqrt": np.sqrt, "log": np.log,
          "conj": np.conj, "abs": np.abs, "real": np.real, "imag": np.imag}
_CONSTS = {"pi": math.pi, "e": math.e, "i": 1j, "j": 1j}
_BINOPS = {ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply, ast.Div: np.divide, ast.Pow: np.power}

CHART_VARIABLES = {"S1": ("theta",), "S2": ("theta", "phi"), "S3": ("eta", "xi1", "xi2")}


def compile_expression(text: str, variables: tuple):
    """Batched evaluator for an arithmetic expression in the chart variables (no other names)."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from exc

    def check(node):
        if isinstance(node, ast.Expression):
            return check(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return
        if isinstance(node, ast.Name) and (node.id in variables or node.id in _CONSTS):
            return
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
            return
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
            return
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS \
                and len(node.args) == 1 and not node.keywords:
            check(node.args[0])
            return
        raise ConfigError(f"disallowed element in expression {text!r}: {ast.dump(node)[:40]}")

    check(tree)

    def ev(node, env):
        if isinstance(node, ast.Constant):
            return node.value
        if isinstance(node, ast.Name):
            return env[node.id] if node.id in env else _CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp):
            v = ev(node.operand, env)
            return -v if isinstance(node.op, ast.USub) else v
        return _FUNCS[node.func.id](ev(node.args[0], env))

    def fn(pts):
        env = {name: pts[:, i].astype(complex) for i, name in enumerate(variables)}
        return np.broadcast_to(ev(tree.body, env), (len(pts),))

    return fn


def parse_complex_matrix(rows) -> np.ndarray:
    """Matrix given as nested lists of numbers or [re, im] pairs."""
    try:
        return np.array([[complex(*v) if isinstance(v, list) else complex(v) for v in row] for row in rows])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad matrix literal: {exc}") from exc


def describe_schema(kind: str) -> dict[str, Any]:
    return {k: v[1] for k, v in SCHEMAS[kind].items()}
