"""Pooled estimation over candidate partitions and group-count selection.

The information criterion is log pooled residual variance plus a per-group
penalty; the group count minimizing it along the recorded merge sequence is
the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cluster import MergeTrace
from .data import GroupStructure, Network, Panel
from .errors import InputError, InsufficientLocalDataError
from .local import gram_moments, regressors, ridge_solve


def pooled_fit(panel: Panel, net: Network, group, tau: float, h1: float) -> np.ndarray:
    """Local linear level estimate pooled over the nodes in `group`.

    Gram and moment sums accumulate over all member nodes before the solve;
    a singleton group reproduces the node-wise fit exactly.
    """
    members = np.asarray(sorted(set(int(g) for g in np.atleast_1d(group))), dtype=int)
    if members.size == 0:
        raise InputError("group must be nonempty")
    if members.min() < 0 or members.max() >= panel.n:
        raise InputError(f"group members out of range 0..{panel.n - 1}")
    z, y, tau_obs = regressors(panel, net)
    gram, mom = gram_moments(z[members], y[members], tau_obs, tau, h1)
    sol = ridge_solve(gram.sum(axis=0), mom.sum(axis=0))
    if not np.all(np.isfinite(sol)):
        raise InsufficientLocalDataError(
            f"singular pooled design at tau={tau:.6g} (group size {members.size})"
        )
    return sol[:2]


class PooledDesign:
    """Per-node local Grams at every evaluation time, reusable across partitions.

    Building the tensors once makes refitting a new partition a matter of
    summing member blocks and solving small systems, which is what the
    criterion search over K needs.
    """

    def __init__(self, panel: Panel, net: Network, h: float, eval_taus=None):
        self.panel = panel
        self.h = h
        self.eval_taus = panel.tau if eval_taus is None else np.asarray(eval_taus, float)
        z, y, tau_obs = regressors(panel, net)
        self._z, self._y = z, y
        n, l_eval = panel.n, self.eval_taus.size
        self.grams = np.empty((l_eval, n, 4, 4))
        self.moms = np.empty((l_eval, n, 4))
        for l, tau in enumerate(self.eval_taus):
            g, m = gram_moments(z, y, tau_obs, float(tau), h)
            self.grams[l] = g
            self.moms[l] = m

    def group_levels(self, members: np.ndarray) -> np.ndarray:
        """Pooled level estimates for one group at every evaluation time, (L, 2)."""
        sol = ridge_solve(
            self.grams[:, members].sum(axis=1), self.moms[:, members].sum(axis=1)
        )
        if not np.all(np.isfinite(sol)):
            bad = np.flatnonzero(~np.all(np.isfinite(sol), axis=-1))[:5]
            raise InsufficientLocalDataError(
                f"singular pooled design at evaluation indices {bad.tolist()}"
            )
        return sol[:, :2]

    def partition_levels(self, partition: GroupStructure) -> np.ndarray:
        """Per-group pooled levels, shape (K, L, 2)."""
        return np.stack(
            [self.group_levels(partition.members(k)) for k in range(1, partition.k + 1)]
        )

    def sum_squared_residuals(self, partition: GroupStructure) -> float:
        """Sum over nodes and usable times of squared pooled-fit residuals.

        Requires the evaluation grid to be the full observation axis.
        """
        if self.eval_taus.size != self.panel.t_len:
            raise InputError("residuals need fits at every observation time")
        levels = self.partition_levels(partition)
        total = 0.0
        for k in range(1, partition.k + 1):
            members = partition.members(k)
            # Fits at columns 1..T-1 align with observations y at 0..T-2.
            fitted = np.einsum("tk,ntk->nt", levels[k - 1, 1:, :], self._z[members])
            total += float(((self._y[members] - fitted) ** 2).sum())
        return total


def sigma2_nt(panel: Panel, net: Network, partition: GroupStructure, h1: float) -> float:
    """Pooled mean squared residual of a partition: SSR / (N (T-1))."""
    if partition.n != panel.n:
        raise InputError(f"partition covers {partition.n} nodes, panel has {panel.n}")
    design = PooledDesign(panel, net, h1)
    return design.sum_squared_residuals(partition) / (panel.n * (panel.t_len - 1))


def default_rho(n: int, t_len: int, h1: float) -> float:
    """Penalty log(max(N, T)) / (N T h1): a BIC-style rate for the
    effective kernel sample size."""
    if n < 1 or t_len < 1 or not h1 > 0:
        raise InputError("n, t_len must be positive integers and h1 > 0")
    return math.log(max(n, t_len)) / (n * t_len * h1)


@dataclass(frozen=True)
class ICRow:
    k: int
    sigma2: float
    ic: float


@dataclass(frozen=True)
class ICReport:
    """Criterion table over candidate group counts and the selected count."""

    k_hat: int
    table: tuple[ICRow, ...]
    rho: float
    kbar: int

    def partition_for(self, trace: MergeTrace) -> GroupStructure:
        return trace.cut(self.k_hat)


def ic_curve(
    panel: Panel,
    net: Network,
    trace: MergeTrace,
    kbar: int,
    h1: float,
    rho: float | None = None,
    design: PooledDesign | None = None,
) -> ICReport:
    """Evaluate the criterion for K = 1..kbar along the merge trace.

    Ties in the minimum resolve to the smallest K. `design` optionally
    reuses precomputed pooled tensors.
    """
    if not 1 <= kbar <= trace.n:
        raise InputError(f"kbar must lie in 1..{trace.n}, got {kbar}")
    if rho is None:
        rho = default_rho(panel.n, panel.t_len, h1)
    if not rho > 0:
        raise InputError(f"rho must be positive, got {rho}")
    if design is None:
        design = PooledDesign(panel, net, h1)
    denom = panel.n * (panel.t_len - 1)
    rows = []
    for k in range(1, kbar + 1):
        sigma2 = design.sum_squared_residuals(trace.cut(k)) / denom
        # Floor keeps log finite when a partition fits noiseless data exactly.
        rows.append(ICRow(k=k, sigma2=sigma2, ic=math.log(max(sigma2, 1e-300)) + k * rho))
    ics = np.array([r.ic for r in rows])
    return ICReport(k_hat=int(np.argmin(ics)) + 1, table=tuple(rows), rho=rho, kbar=kbar)
