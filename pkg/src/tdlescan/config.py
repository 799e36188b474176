"""Plain ``key = value`` configuration files.

Network configs accept the keys

    n, radius, alpha, h, k, f, omega, dt_per_period, ic_seed, ic_range

where ``ic_range`` is either ``lo, hi`` or a single half-width ``a`` meaning
``-a, a``. Lines starting with ``#`` or ``;`` are comments. Threshold files use
the same syntax with keys ``a, b, c, percentile, source_n, runs, created``.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace

from .model import NetworkSpec, NodeParams, RunOptions

_SECTION = "tdlescan"

NETWORK_KEYS = ("n", "radius", "alpha", "h", "k", "f", "omega", "dt_per_period", "ic_seed", "ic_range")


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""

    def __init__(self, key: str, message: str):
        super().__init__(f"config key '{key}': {message}")
        self.key = key


def read_keyvalue(path) -> dict[str, str]:
    with open(path) as fh:
        text = fh.read()
    return parse_keyvalue(text)


def parse_keyvalue(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str.lower
    try:
        parser.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        key = getattr(exc, "option", None) or "?"
        raise ConfigError(key, f"cannot parse ({exc.__class__.__name__})") from exc
    return dict(parser[_SECTION])


def write_keyvalue(path, values: dict, header: str | None = None) -> None:
    with open(path, "w") as fh:
        if header:
            for line in header.splitlines():
                fh.write(f"# {line}\n")
        for key, value in values.items():
            fh.write(f"{key} = {value}\n")


def _convert(key, raw, kind):
    try:
        if kind is int:
            value = float(raw)
            if value != int(value):
                raise ValueError
            return int(value)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {kind.__name__}, got {raw!r}") from None


def parse_ic_range(key, raw) -> tuple[float, float]:
    if isinstance(raw, (tuple, list)):
        parts = [str(p) for p in raw]
    else:
        parts = [p for p in str(raw).replace(":", ",").split(",") if p.strip()]
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(key, f"expected 'lo, hi' or a half-width, got {raw!r}") from None
    if len(vals) == 1:
        vals = [-abs(vals[0]), abs(vals[0])]
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise ConfigError(key, f"expected 'lo, hi' with lo < hi, got {raw!r}")
    return vals[0], vals[1]


@dataclass
class RunConfig:
    """Fully resolved network and run settings (file values plus overrides)."""

    n: int = 6
    radius: int = 1
    alpha: float = 1.0
    h: float = 0.025
    k: float = 1.0
    f: float = 7.5
    omega: float = 1.0
    dt_per_period: int = 200
    ic_seed: int | None = None
    ic_range: tuple = (-1.0, 1.0)
    extra: dict = field(default_factory=dict)

    _kinds = {"n": int, "radius": int, "alpha": float, "h": float, "k": float, "f": float,
              "omega": float, "dt_per_period": int, "ic_seed": int}

    @classmethod
    def from_mapping(cls, values: dict) -> "RunConfig":
        cfg = cls()
        return cfg.override(values)

    @classmethod
    def load(cls, path) -> "RunConfig":
        values = read_keyvalue(path)
        unknown = [k for k in values if k not in NETWORK_KEYS]
        if unknown:
            raise ConfigError(unknown[0], "unknown key")
        return cls.from_mapping(values)

    def override(self, values: dict) -> "RunConfig":
        changes = {}
        for key, raw in values.items():
            if raw is None:
                continue
            if key == "ic_range":
                changes[key] = parse_ic_range(key, raw)
            elif key in self._kinds:
                changes[key] = _convert(key, raw, self._kinds[key])
            else:
                raise ConfigError(key, "unknown key")
        out = replace(self, **changes)
        out.validate()
        return out

    def validate(self) -> None:
        try:
            NodeParams(self.h, self.k, self.f, self.omega)
        except ValueError as exc:
            key = str(exc).split()[0].lower()
            raise ConfigError(key, str(exc)) from None
        if self.n < 2:
            raise ConfigError("n", f"need at least 2 nodes, got {self.n}")
        if not 1 <= self.radius <= self.n // 2:
            raise ConfigError("radius", f"must lie in [1, {self.n // 2}] for n={self.n}, got {self.radius}")
        if self.dt_per_period < 1:
            raise ConfigError("dt_per_period", "must be a positive integer")

    def node(self) -> NodeParams:
        return NodeParams(self.h, self.k, self.f, self.omega)

    def spec(self, *, radius: int | None = None, alpha: float | None = None) -> NetworkSpec:
        return NetworkSpec(self.n, self.radius if radius is None else radius,
                           self.alpha if alpha is None else alpha, self.node())

    def run_options(self, **kw) -> RunOptions:
        return RunOptions(dt_per_period=self.dt_per_period, ic_range=tuple(self.ic_range), **kw)

    def as_dict(self) -> dict:
        return {"n": self.n, "radius": self.radius, "alpha": self.alpha, "h": self.h,
                "k": self.k, "f": self.f, "omega": self.omega,
                "dt_per_period": self.dt_per_period, "ic_seed": self.ic_seed,
                "ic_range": list(self.ic_range)}
