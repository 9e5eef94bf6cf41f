"""Generators for the locally stationary network VAR benchmark design.

The process iterates x_t = B(tau_t) x_{t-1} + eps_t with
B(tau) = diag(beta_1(tau)) Wtilde + diag(beta_2(tau)), starting from the
zero vector and discarding a burn-in stretch during which the coefficients
are frozen at the earliest scaled time (tau < 0 is undefined).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rng as rngmod
from .data import ErrorModel, GroupStructure, Network, Panel
from .errors import GenerationFailure, InputError, InstabilityError
from .linalg import spectral_radius
from .scenarios import CoefficientScenario

_MAX_ADJACENCY_ATTEMPTS = 100
_MAX_GROUP_ATTEMPTS = 1000

#: Divergence guard: the state is declared explosive beyond this magnitude.
#: Benchmark scenarios are mildly explosive near tau = 1 and their peak
#: magnitude grows with T, so the guard is generous; callers simulating very
#: long horizons can raise it further.
STATE_LIMIT = 1e80


def gen_adjacency(n: int, edge_prob: float, rng_seed: int) -> Network:
    """Directed Erdos-Renyi adjacency with no isolated nodes.

    Off-diagonal entries are independent Bernoulli(edge_prob); the whole
    matrix is resampled (up to 100 attempts) until every node has at least
    one outgoing edge.
    """
    if n < 2:
        raise InputError(f"need n >= 2, got {n}")
    if not (0.0 < edge_prob <= 1.0):
        raise InputError(f"edge_prob must lie in (0, 1], got {edge_prob}")
    gen = rngmod.generator(rng_seed, rngmod.TAG_ADJACENCY)
    for _ in range(_MAX_ADJACENCY_ATTEMPTS):
        w = (gen.random((n, n)) < edge_prob).astype(float)
        np.fill_diagonal(w, 0.0)
        if (w.sum(axis=1) > 0).all():
            return Network(w)
    raise GenerationFailure(
        f"no isolation-free adjacency in {_MAX_ADJACENCY_ATTEMPTS} attempts "
        f"(n={n}, edge_prob={edge_prob})"
    )


def assign_groups(n: int, probs, mode: str = "random", rng_seed: int = 0) -> GroupStructure:
    """Draw node labels i.i.d. from `probs`, resampling until no group is empty.

    `mode` selects the derived seed stream: 'random' is meant to receive a
    per-replication seed, 'fixed' the master seed itself, so a fixed design
    is bit-identical across replications. Both modes are deterministic in
    (n, probs, rng_seed).
    """
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size < 1:
        raise InputError("probs must be a nonempty vector")
    if (p < 0).any() or abs(p.sum() - 1.0) > 1e-12:
        raise InputError(f"probs must be nonnegative and sum to 1, got {probs}")
    k = p.size
    if n < k:
        raise InputError(f"need n >= number of groups, got n={n}, k={k}")
    if mode not in ("random", "fixed"):
        raise InputError(f"mode must be 'random' or 'fixed', got {mode!r}")
    gen = rngmod.generator(rng_seed, rngmod.TAG_GROUPS, 0 if mode == "random" else 1)
    for _ in range(_MAX_GROUP_ATTEMPTS):
        labels = gen.choice(k, size=n, p=p) + 1
        if np.bincount(labels, minlength=k + 1)[1:].all():
            return GroupStructure(k=k, membership=labels)
    raise GenerationFailure(
        f"could not draw a partition with all {k} groups nonempty "
        f"in {_MAX_GROUP_ATTEMPTS} attempts (probs={list(p)})"
    )


def gen_error_cov(n: int, rho: float) -> ErrorModel:
    """Toeplitz innovation covariance with entries rho^|i-j|."""
    if not abs(rho) < 1.0:
        raise InputError(f"need |rho| < 1, got {rho}")
    idx = np.arange(n)
    return ErrorModel(rho ** np.abs(np.subtract.outer(idx, idx)).astype(float))


def transition_matrix(
    scenario: CoefficientScenario, groups: GroupStructure, net: Network, tau: float
) -> np.ndarray:
    """B(tau) = diag(network effects) Wtilde + diag(momentum effects)."""
    beta = scenario.beta_matrix(groups.membership, tau)
    b = beta[:, 0:1] * net.wtilde
    b[np.arange(net.n), np.arange(net.n)] += beta[:, 1]
    return b


@dataclass(frozen=True)
class StabilityReport:
    """Spectral radii of B(tau) over a tau grid and the pass/fail verdict."""

    taus: np.ndarray
    radii: np.ndarray
    max_radius: float
    margin: float
    passed: bool


def stability_check(
    scenario: CoefficientScenario,
    groups: GroupStructure,
    net: Network,
    grid_size: int = 21,
    margin: float = 1e-6,
) -> StabilityReport:
    """Spectral radius of the transition matrix on an equidistant tau grid.

    Passes when the maximum radius stays below 1 - margin. Benchmark
    scenarios can fail this near tau = 1 while still producing finite,
    estimable panels; callers decide whether a failure is fatal.
    """
    if grid_size < 2:
        raise InputError(f"need grid_size >= 2, got {grid_size}")
    if groups.n != net.n:
        raise InputError(f"groups are for {groups.n} nodes, network has {net.n}")
    taus = np.linspace(0.0, 1.0, grid_size)
    radii = np.array(
        [spectral_radius(transition_matrix(scenario, groups, net, t)) for t in taus]
    )
    max_radius = float(radii.max())
    return StabilityReport(
        taus=taus,
        radii=radii,
        max_radius=max_radius,
        margin=margin,
        passed=max_radius < 1.0 - margin,
    )


def simulate_panel(
    scenario: CoefficientScenario,
    groups: GroupStructure,
    net: Network,
    errs: ErrorModel,
    t_len: int,
    burnin: int = 200,
    rng_seed: int = 0,
    state_limit: float = STATE_LIMIT,
) -> Panel:
    """Simulate the grouped time-varying network VAR panel.

    All innovations are drawn up front from the derived panel stream, so the
    result is bit-reproducible for fixed inputs and seed. Raises
    InstabilityError if the state magnitude exceeds `state_limit`.
    """
    if t_len < 10:
        raise InputError(f"need t_len >= 10, got {t_len}")
    if burnin < 0:
        raise InputError(f"need burnin >= 0, got {burnin}")
    n = net.n
    if groups.n != n or errs.n != n or scenario.k != groups.k:
        raise InputError(
            f"inconsistent sizes: net n={n}, groups n={groups.n} (k={groups.k}), "
            f"errors n={errs.n}, scenario k={scenario.k}"
        )
    gen = rngmod.generator(rng_seed, rngmod.TAG_PANEL)
    shocks = gen.standard_normal((burnin + t_len, n)) @ errs.factor.T

    # Node coefficient paths over the recorded stretch, shape (N, T, 2).
    taus = np.arange(1, t_len + 1) / t_len
    per_group = np.stack([scenario.alpha(k, taus) for k in range(1, scenario.k + 1)])
    beta = per_group[groups.membership - 1]

    x = np.zeros(n)
    wt = net.wtilde
    for m in range(burnin):
        x = beta[:, 0, 0] * (wt @ x) + beta[:, 0, 1] * x + shocks[m]
    data = np.empty((n, t_len))
    for t in range(t_len):
        x = beta[:, t, 0] * (wt @ x) + beta[:, t, 1] * x + shocks[burnin + t]
        if not np.all(np.abs(x) < state_limit):
            raise InstabilityError(
                f"state exceeded {state_limit:g} at t={t + 1}; "
                "the coefficient scenario is explosive"
            )
        data[:, t] = x
    return Panel(data)
