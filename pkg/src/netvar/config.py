"""Run configuration: plain `key = value` files with CLI overrides.

Config files are a TOML-compatible subset: one `key = value` per line,
`#` comments, bare or quoted strings, comma-separated number lists.
Custom coefficient scenarios live in the same file as
`groupK.network` / `groupK.momentum` expression lines.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .errors import InputError
from .scenarios import (
    CoefficientScenario,
    paper_scenario,
    paper_test_scenario,
    parse_coef_expr,
    parse_scenario,
)

_SCENARIO_NAMES = ("paper", "paper-test", "custom")


@dataclass(frozen=True)
class RunConfig:
    """All knobs for simulation, estimation and the Monte-Carlo harness."""

    seed: int = 1
    n: int = 100
    t_len: int = 300
    replications: int = 100
    edge_prob: float = 0.1
    error_rho: float = 0.3
    burnin: int = 200
    scenario: str = "paper"
    scenario_text: str = ""
    group_mode: str = "random"
    group_probs: tuple[float, ...] = ()
    h: float | None = None
    h1: float | None = None
    h2: float | None = None
    h3: float | None = None
    grid_size: int | None = None
    grid_trim: float | None = None
    linkage: str = "complete"
    kbar: int = 8
    rho: float | None = None
    bias_corrected: bool = False
    ci_level: float = 0.95
    alpha_levels: tuple[float, ...] = (0.01, 0.05, 0.1)
    threads: int | None = None

    def validate(self) -> "RunConfig":
        if self.n < 2:
            raise InputError(f"n must be >= 2, got {self.n}")
        if self.t_len < 10:
            raise InputError(f"t_len must be >= 10, got {self.t_len}")
        if self.replications < 1:
            raise InputError(f"replications must be >= 1, got {self.replications}")
        if not 0.0 < self.edge_prob <= 1.0:
            raise InputError(f"edge_prob must lie in (0, 1], got {self.edge_prob}")
        if not abs(self.error_rho) < 1.0:
            raise InputError(f"error_rho must satisfy |rho| < 1, got {self.error_rho}")
        if self.burnin < 0:
            raise InputError(f"burnin must be >= 0, got {self.burnin}")
        if self.scenario not in _SCENARIO_NAMES:
            raise InputError(f"scenario must be one of {_SCENARIO_NAMES}, got {self.scenario!r}")
        if self.scenario == "custom" and not self.scenario_text:
            raise InputError("scenario = custom needs groupK.network/momentum entries")
        if self.group_mode not in ("random", "fixed"):
            raise InputError(f"group_mode must be random or fixed, got {self.group_mode!r}")
        for name in ("h", "h1", "h2", "h3"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v < 1.0:
                raise InputError(f"{name} must lie in (0, 1), got {v}")
        if self.grid_size is not None and self.grid_size < 2:
            raise InputError(f"grid_size must be >= 2, got {self.grid_size}")
        if self.grid_trim is not None and not 0.0 <= self.grid_trim < 0.5:
            raise InputError(f"grid_trim must lie in [0, 0.5), got {self.grid_trim}")
        if self.linkage not in ("single", "complete", "average"):
            raise InputError(f"linkage must be single/complete/average, got {self.linkage!r}")
        if self.kbar < 1:
            raise InputError(f"kbar must be >= 1, got {self.kbar}")
        if self.rho is not None and not self.rho > 0:
            raise InputError(f"rho must be positive, got {self.rho}")
        if not 0.0 < self.ci_level < 1.0:
            raise InputError(f"ci_level must lie in (0, 1), got {self.ci_level}")
        if not self.alpha_levels or any(not 0.0 < a < 1.0 for a in self.alpha_levels):
            raise InputError(f"alpha_levels must lie in (0, 1), got {self.alpha_levels}")
        if self.threads is not None and self.threads < 1:
            raise InputError(f"threads must be >= 1, got {self.threads}")
        if self.group_probs:
            if any(p < 0 for p in self.group_probs) or abs(sum(self.group_probs) - 1.0) > 1e-9:
                raise InputError(f"group_probs must be nonnegative and sum to 1, got {self.group_probs}")
            k = self.build_scenario().k
            if len(self.group_probs) != k:
                raise InputError(
                    f"group_probs has {len(self.group_probs)} entries, scenario has {k} groups"
                )
        return self

    def build_scenario(self) -> CoefficientScenario:
        if self.scenario == "paper":
            return paper_scenario()
        if self.scenario == "paper-test":
            return paper_test_scenario()
        return parse_scenario(self.scenario_text)

    def probs(self) -> tuple[float, ...]:
        if self.group_probs:
            return self.group_probs
        k = self.build_scenario().k
        return tuple([1.0 / k] * k)

    def resolve_threads(self, cli_value: int | None = None) -> int:
        if cli_value is not None:
            return max(1, cli_value)
        if self.threads is not None:
            return self.threads
        env = os.environ.get("NETVAR_THREADS", "").strip()
        if env:
            try:
                return max(1, int(env))
            except ValueError as exc:
                raise InputError(f"NETVAR_THREADS must be an integer, got {env!r}") from exc
        return 1


_BOOL_WORDS = {"true": True, "false": False, "yes": True, "no": False, "on": True, "off": False}


def _coerce(key: str, text: str):
    raw = text.strip()
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    low = raw.lower()
    if low in _BOOL_WORDS:
        return _BOOL_WORDS[low]
    if "," in raw:
        return tuple(float(part) for part in raw.split(",") if part.strip())
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw


_INT_KEYS = {"seed", "n", "t_len", "replications", "burnin", "grid_size", "kbar", "threads"}
_FLOAT_KEYS = {
    "edge_prob",
    "error_rho",
    "h",
    "h1",
    "h2",
    "h3",
    "grid_trim",
    "rho",
    "ci_level",
}
_TUPLE_KEYS = {"group_probs", "alpha_levels"}
_STR_KEYS = {"scenario", "group_mode", "linkage"}
_BOOL_KEYS = {"bias_corrected"}


def parse_config_text(text: str, base: RunConfig | None = None) -> RunConfig:
    """Parse `key = value` lines into a RunConfig, layered over `base`."""
    cfg = base if base is not None else RunConfig()
    updates: dict = {}
    scenario_lines: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith("group") and ("." in key):
            parse_coef_expr(value.strip().strip('"'))  # fail fast with a line number
            scenario_lines.append(line)
            continue
        if key in _INT_KEYS:
            v = _coerce(key, value)
            if not isinstance(v, int) or isinstance(v, bool):
                raise InputError(f"config line {lineno}: {key} must be an integer")
        elif key in _FLOAT_KEYS:
            v = _coerce(key, value)
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise InputError(f"config line {lineno}: {key} must be a number")
            v = float(v)
        elif key in _TUPLE_KEYS:
            v = _coerce(key, value)
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                v = (float(v),)
            if not isinstance(v, tuple):
                raise InputError(f"config line {lineno}: {key} must be a number list")
        elif key in _STR_KEYS:
            v = _coerce(key, value)
            if not isinstance(v, str):
                raise InputError(f"config line {lineno}: {key} must be a string")
        elif key in _BOOL_KEYS:
            v = _coerce(key, value)
            if not isinstance(v, bool):
                raise InputError(f"config line {lineno}: {key} must be true or false")
        else:
            raise InputError(f"config line {lineno}: unknown key {key!r}")
        updates[key] = v
    if scenario_lines:
        updates["scenario_text"] = "\n".join(scenario_lines) + "\n"
        updates.setdefault("scenario", "custom")
    return replace(cfg, **updates)


def load_config(path: str, base: RunConfig | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, base)


def apply_overrides(cfg: RunConfig, **overrides) -> RunConfig:
    """Layer non-None CLI flag values over a config."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(updates) - known
    if unknown:
        raise InputError(f"unknown config overrides: {sorted(unknown)}")
    return replace(cfg, **updates)
