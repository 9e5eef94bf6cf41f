"""Group coefficient scenarios and their text serialization.

Each coefficient function is an affine combination
``a*sin(pi*t) + b*cos(pi*t) + c`` so scenarios round-trip through plain
text (config files, scenario.txt).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import InputError

_TERM_RE = re.compile(
    r"""^(?:
        (?P<coef>[0-9.eE+-]*?)\*?(?P<basis>sin|cos)\(pi\*t\)   # a*sin(pi*t)
        | (?P<const>[0-9.eE+-]+)                               # bare constant
    )$""",
    re.VERBOSE,
)


@dataclass(frozen=True)
class CoefExpr:
    """One coefficient function: sin_coef*sin(pi t) + cos_coef*cos(pi t) + const."""

    sin_coef: float = 0.0
    cos_coef: float = 0.0
    const: float = 0.0

    def __call__(self, tau):
        tau = np.asarray(tau, dtype=float)
        out = (
            self.sin_coef * np.sin(math.pi * tau)
            + self.cos_coef * np.cos(math.pi * tau)
            + self.const
        )
        return out if out.ndim else float(out)

    def is_constant(self) -> bool:
        return self.sin_coef == 0.0 and self.cos_coef == 0.0

    def text(self) -> str:
        """Canonical serialized form, parseable by `parse_coef_expr`."""
        terms = []
        if self.sin_coef:
            terms.append((self.sin_coef, "*sin(pi*t)"))
        if self.cos_coef:
            terms.append((self.cos_coef, "*cos(pi*t)"))
        if self.const or not terms:
            terms.append((self.const, ""))
        out = f"{terms[0][0]:g}{terms[0][1]}"
        for coef, suffix in terms[1:]:
            out += f" + {coef:g}{suffix}" if coef >= 0 else f" - {-coef:g}{suffix}"
        return out


def parse_coef_expr(text: str) -> CoefExpr:
    """Parse ``a*sin(pi*t) + b*cos(pi*t) + c`` (any subset of terms, any order)."""
    src = text.strip().replace(" ", "")
    if not src:
        raise InputError("empty coefficient expression")
    # Split into signed terms at +/- that start a term (not exponent signs).
    terms = re.findall(r"[+-]?(?:[eE][+-]|[^+-])+", src)
    sin_c = cos_c = const = 0.0
    seen = set()
    for term in terms:
        if not term:
            continue
        sign = -1.0 if term.startswith("-") else 1.0
        body = term.lstrip("+-")
        m = _TERM_RE.match(body)
        if m is None:
            raise InputError(f"cannot parse coefficient term {term!r} in {text!r}")
        if m.group("basis"):
            coef_text = m.group("coef")
            coef = sign * (float(coef_text) if coef_text else 1.0)
            key = m.group("basis")
            if key in seen:
                raise InputError(f"duplicate {key} term in {text!r}")
            seen.add(key)
            if key == "sin":
                sin_c = coef
            else:
                cos_c = coef
        else:
            if "const" in seen:
                raise InputError(f"duplicate constant term in {text!r}")
            seen.add("const")
            const = sign * float(m.group("const"))
    return CoefExpr(sin_c, cos_c, const)


@dataclass(frozen=True)
class CoefficientScenario:
    """Per-group functions alpha_k(tau) = (network effect, momentum effect)."""

    coefs: tuple[tuple[CoefExpr, CoefExpr], ...]

    def __post_init__(self):
        if not self.coefs:
            raise InputError("scenario needs at least one group")

    @property
    def k(self) -> int:
        return len(self.coefs)

    def alpha(self, label: int, tau):
        """Group `label` (1-based) coefficients at `tau`: shape (..., 2)."""
        net, mom = self.coefs[label - 1]
        return np.stack([np.asarray(net(tau), float), np.asarray(mom(tau), float)], axis=-1)

    def beta_matrix(self, membership: np.ndarray, tau: float) -> np.ndarray:
        """Node-level coefficients at a single tau: shape (N, 2)."""
        per_group = np.array([[net(tau), mom(tau)] for net, mom in self.coefs])
        return per_group[np.asarray(membership) - 1]

    def serialize(self) -> str:
        """Config-style text block, one `groupK.{network,momentum}` line per entry."""
        lines = []
        for g, (net, mom) in enumerate(self.coefs, start=1):
            lines.append(f"group{g}.network = {net.text()}")
            lines.append(f"group{g}.momentum = {mom.text()}")
        return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> CoefficientScenario:
    """Parse the `groupK.network = expr` / `groupK.momentum = expr` block."""
    entries: dict[tuple[int, str], CoefExpr] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"scenario line {lineno}: expected 'key = expr'")
        key, expr = (part.strip() for part in line.split("=", 1))
        m = re.fullmatch(r"group([0-9]+)\.(network|momentum)", key)
        if m is None:
            raise InputError(f"scenario line {lineno}: bad key {key!r}")
        entries[(int(m.group(1)), m.group(2))] = parse_coef_expr(expr)
    if not entries:
        raise InputError("scenario text defines no groups")
    k = max(g for g, _ in entries)
    coefs = []
    for g in range(1, k + 1):
        try:
            coefs.append((entries[(g, "network")], entries[(g, "momentum")]))
        except KeyError as exc:
            raise InputError(f"scenario is missing an entry for group {g}") from exc
    return CoefficientScenario(tuple(coefs))


def paper_scenario() -> CoefficientScenario:
    """Three-group benchmark scenario with time-varying coefficients in every group."""
    return CoefficientScenario(
        (
            (CoefExpr(sin_coef=-0.95), CoefExpr(cos_coef=-0.6, const=-0.3)),
            (CoefExpr(sin_coef=-0.7, const=0.8), CoefExpr(cos_coef=-0.5, const=0.45)),
            (CoefExpr(sin_coef=1.0, const=-0.2), CoefExpr(cos_coef=0.9)),
        )
    )


def paper_test_scenario() -> CoefficientScenario:
    """Benchmark scenario for size/power studies: group 1 constant, 2 and 3 time-varying."""
    base = paper_scenario()
    coefs = (
        (CoefExpr(const=-0.7), CoefExpr(const=-0.6)),
        base.coefs[1],
        base.coefs[2],
    )
    return CoefficientScenario(coefs)
