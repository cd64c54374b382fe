"""Run configuration: YAML file with a closed set of keys."""

from __future__ import annotations

import ast
import dataclasses
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .log_flow import STRICT_A_MIN, LogScheme
from .poly_flow import PolyScheme
from .spectral import PeriodicGrid


class ConfigError(ValueError):
    pass


_OPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_NAMES = {"pi": math.pi, "sqrt2": math.sqrt(2.0), "sqrt3": math.sqrt(3.0)}


def _eval_node(node):
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return node.value
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _OPS:
        return _OPS[type(node.op)](_eval_node(node.left), _eval_node(node.right))
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        val = _eval_node(node.operand)
        return -val if isinstance(node.op, ast.USub) else val
    raise ValueError(f"unsupported expression element {ast.dump(node)}")


def parse_number(value, name: str) -> float:
    """Accept a number or an arithmetic string such as ``'2*pi'`` or ``'1/160'``."""
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(_eval_node(ast.parse(value, mode="eval").body))
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{name}: cannot evaluate {value!r} ({exc})") from None
    raise ConfigError(f"{name}: expected a number, got {value!r}")


def _parse_int(value, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    return value


def _parse_choice(value, name: str, choices) -> str:
    if value not in choices:
        raise ConfigError(f"{name}: expected one of {list(choices)}, got {value!r}")
    return value


def _parse_list(value, name: str) -> list[float]:
    if value is None:
        return []
    if not isinstance(value, list):
        raise ConfigError(f"{name}: expected a list, got {value!r}")
    return [parse_number(v, f"{name}[{i}]") for i, v in enumerate(value)]


@dataclass
class RunConfig:
    potential: str = "polynomial"
    epsilon: float = 0.1
    theta: float = 0.25
    theta_c: float = 1.0
    a: float = STRICT_A_MIN
    tau: float = 0.01
    N: int = 128
    L: float = 2 * math.pi
    dim: int = 2
    T: float = 1.0
    initial_condition: str = "sine"
    record_every: int | None = None
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    mode: str = "strict"
    output_dir: str = "output"
    snapshot_times: list[float] = field(default_factory=list)
    invariant_policy: str = "abort"
    taus: list[float] = field(default_factory=list)
    reference_tau: float = 1e-4

    def __post_init__(self):
        if self.record_every is None:
            self.record_every = 10 if self.potential == "logarithmic" else 1

    @classmethod
    def from_dict(cls, data: dict) -> RunConfig:
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a mapping of keys to values")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kw = {}
        for key, value in data.items():
            if key in ("potential",):
                kw[key] = _parse_choice(value, key, ("polynomial", "logarithmic"))
            elif key == "mode":
                kw[key] = _parse_choice(value, key, ("strict", "solvable"))
            elif key == "invariant_policy":
                kw[key] = _parse_choice(value, key, ("abort", "warn"))
            elif key in ("N", "dim", "newton_max_iter"):
                kw[key] = _parse_int(value, key)
            elif key == "record_every":
                kw[key] = None if value is None else _parse_int(value, key)
            elif key in ("snapshot_times", "taus"):
                kw[key] = _parse_list(value, key)
            elif key in ("initial_condition", "output_dir"):
                if not isinstance(value, str):
                    raise ConfigError(f"{key}: expected a string, got {value!r}")
                kw[key] = value
            else:
                kw[key] = parse_number(value, key)
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def validate(self):
        ic = self.initial_condition
        if ic not in ("sine", "disk", "seven_circles") and not ic.startswith("file:"):
            raise ConfigError(
                f"initial_condition: expected sine, disk, seven_circles or file:<path>, got {ic!r}"
            )
        if self.record_every < 1:
            raise ConfigError(f"record_every: must be >= 1, got {self.record_every}")
        if not self.T > 0:
            raise ConfigError(f"T: must be positive, got {self.T}")
        if any(t < 0 or t > self.T for t in self.snapshot_times):
            raise ConfigError("snapshot_times: every time must lie in [0, T]")
        try:
            self.grid()
        except ValueError as exc:
            raise ConfigError(f"N/L/dim: {exc}") from None
        if ic in ("sine", "disk", "seven_circles") and self.dim != 2:
            raise ConfigError(f"initial_condition: {ic} needs dim = 2, got dim={self.dim}")
        try:
            self.scheme()
        except ValueError as exc:
            fields = "epsilon/tau" if self.potential == "polynomial" else "epsilon/tau/theta/theta_c/a/mode"
            raise ConfigError(f"{fields}: {exc}") from None
        for i, t in enumerate(self.taus):
            try:
                self.scheme(tau=t)
            except ValueError as exc:
                raise ConfigError(f"taus[{i}]: {exc}") from None

    def grid(self) -> PeriodicGrid:
        return PeriodicGrid(self.N, self.L, self.dim)

    def scheme(self, tau: float | None = None):
        tau = self.tau if tau is None else tau
        if self.potential == "polynomial":
            return PolyScheme(self.epsilon, tau)
        return LogScheme(
            self.epsilon,
            tau,
            self.theta,
            self.theta_c,
            a=self.a,
            newton_tol=self.newton_tol,
            newton_max_iter=self.newton_max_iter,
            mode=self.mode,
        )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML ({exc})") from None
    return RunConfig.from_dict(data or {})


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)
