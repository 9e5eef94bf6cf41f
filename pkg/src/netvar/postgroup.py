"""Post-grouping estimation, plug-in covariance and pointwise bands.

Once a partition is fixed, each group's coefficient pair is re-estimated by
pooling its members, and the plug-in sandwich covariance yields pointwise
standard errors. Bands are not bias-adjusted: the curvature term is left
unestimated, the usual undersmoothing convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .data import GroupStructure, Network, Panel
from .errors import InputError, SingularDesignError
from .kernels import Kernel, kernel_moment
from .linalg import sym_inv
from .local import CovPlugins, _delta_all_pairs, regressors
from .scenarios import CoefficientScenario
from .select import pooled_fit


def post_fit(panel: Panel, net: Network, group, tau: float, h2: float) -> np.ndarray:
    """Group-pooled local linear level at `tau` with the post-grouping bandwidth."""
    return pooled_fit(panel, net, group, tau, h2)


def _group_delta_blocks(panel, net, members, tau, h2):
    """Member-averaged regressor moments at one tau.

    Returns (delta_bar, upsilon) with delta_bar the average of own-node
    moment matrices and upsilon the member-pair average weighted by the
    residual covariance plug-in.
    """
    z, _, tau_obs = regressors(panel, net)
    deltas = _delta_all_pairs(z[members], tau_obs, tau, h2, panel.t_len)
    m = members.size
    delta_bar = deltas[np.arange(m), np.arange(m)].mean(axis=0)
    return delta_bar, deltas


def omega_hat(
    panel: Panel,
    net: Network,
    plugins: CovPlugins,
    group,
    tau: float,
    h2: float,
):
    """Plug-in asymptotic covariance of a group fit and its standard errors.

    Returns (omega, stderr): omega is the 2x2 sandwich built from moment
    matrices recomputed at bandwidth `h2` and the residual covariance held
    by `plugins`; stderr divides by the group-size-scaled effective sample
    |G| T h2 and applies to the level estimate at `tau`.
    """
    members = np.asarray(sorted(set(int(g) for g in np.atleast_1d(group))), dtype=int)
    if members.size == 0:
        raise InputError("group must be nonempty")
    delta_bar, deltas = _group_delta_blocks(panel, net, members, tau, h2)
    sig = plugins.sigma_hat[np.ix_(members, members)]
    upsilon = (sig[:, :, None, None] * deltas).sum(axis=(0, 1)) / members.size
    lam = np.linalg.eigvalsh(0.5 * (delta_bar + delta_bar.T))
    if lam[0] <= 1e-13 * max(lam[-1], 1.0):
        raise SingularDesignError(f"group moment matrix singular at tau={tau:.6g}")
    inv = sym_inv(delta_bar)
    nu0 = kernel_moment(Kernel.EPANECHNIKOV, 0, squared=True)
    omega = nu0 * (inv @ upsilon @ inv)
    omega = 0.5 * (omega + omega.T)
    scale = members.size * panel.t_len * h2
    stderr = np.sqrt(np.maximum(np.diag(omega), 0.0) / scale)
    return omega, stderr


@dataclass(frozen=True)
class GroupPath:
    """Group coefficient path with pointwise confidence bands."""

    group: int
    grid: np.ndarray
    alpha: np.ndarray
    stderr: np.ndarray
    ci_level: float

    @property
    def lower(self) -> np.ndarray:
        z = norm.ppf(0.5 + self.ci_level / 2.0)
        return self.alpha - z * self.stderr

    @property
    def upper(self) -> np.ndarray:
        z = norm.ppf(0.5 + self.ci_level / 2.0)
        return self.alpha + z * self.stderr


def group_paths(
    panel: Panel,
    net: Network,
    partition: GroupStructure,
    grid,
    h2: float,
    ci_level: float = 0.95,
    plugins: CovPlugins | None = None,
) -> list[GroupPath]:
    """Post-grouping paths and bands for every group on `grid`."""
    if not 0.0 < ci_level < 1.0:
        raise InputError(f"ci_level must lie in (0, 1), got {ci_level}")
    if partition.n != panel.n:
        raise InputError(f"partition covers {partition.n} nodes, panel has {panel.n}")
    if plugins is None:
        from .local import build_plugins

        plugins = build_plugins(panel, net, h2)
    grid = np.asarray(grid, dtype=float)
    out = []
    for k in range(1, partition.k + 1):
        members = partition.members(k)
        alpha = np.empty((grid.size, 2))
        stderr = np.empty((grid.size, 2))
        for l, tau in enumerate(grid):
            alpha[l] = pooled_fit(panel, net, members, float(tau), h2)
            _, stderr[l] = omega_hat(panel, net, plugins, members, float(tau), h2)
        out.append(
            GroupPath(group=k, grid=grid, alpha=alpha, stderr=stderr, ci_level=ci_level)
        )
    return out


def rmse(est_beta: np.ndarray, scenario: CoefficientScenario, groups: GroupStructure, grid) -> float:
    """Root mean squared coefficient error over nodes and grid times.

    `est_beta` has shape (N, L, 2) with node-level estimates (broadcast
    group estimates to members before calling for pooled variants).
    """
    grid = np.asarray(grid, dtype=float)
    est = np.asarray(est_beta, dtype=float)
    if est.shape != (groups.n, grid.size, 2):
        raise InputError(f"expected estimates of shape {(groups.n, grid.size, 2)}")
    per_group = np.stack([scenario.alpha(k, grid) for k in range(1, scenario.k + 1)])
    truth = per_group[groups.membership - 1]
    return float(np.sqrt(np.mean(np.sum((est - truth) ** 2, axis=2))))
