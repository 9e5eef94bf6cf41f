"""Node-wise local linear estimation and covariance plug-ins.

Each node is regressed on the 2-vector (neighbor average, own lag) with a
kernel-weighted local linear objective. The slope block of the design is
kept in bandwidth units, which equilibrates the 4x4 Gram matrix; the tiny
ridge applied for rank safety then perturbs well-posed fits by far less
than the target tolerances.

Fits requested with the fourth-order kernel are computed in the exact
two-bandwidth form 2*fit(h/sqrt(2)) - fit(h) of the plain kernel; the
effective observation weights of that combination are exactly the
fourth-order kernel weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Network, Panel
from .errors import InputError, InsufficientLocalDataError
from .kernels import SQRT2, Kernel, kernel_eval, kernel_moment
from .linalg import sym_inv, sym_inv_2x2_batch

#: Ridge multiplier on the trace of the (equilibrated) local Gram matrix.
RIDGE_REL = 1e-10

#: Minimum number of positive-weight observations for a local fit.
MIN_LOCAL_POINTS = 5


def regressors(panel: Panel, net: Network):
    """Lagged regressors and responses.

    Returns (z, y, tau_obs): z has shape (N, T-1, 2) holding the neighbor
    average and the own lag, y the responses x_{i,t} for t = 2..T, and
    tau_obs the corresponding scaled times.
    """
    if net.n != panel.n:
        raise InputError(f"panel has {panel.n} nodes, network has {net.n}")
    x = panel.data
    neighbor = net.wtilde @ x
    z = np.stack([neighbor[:, :-1], x[:, :-1]], axis=-1)
    return z, x[:, 1:], panel.tau[1:]


def _window(tau_obs: np.ndarray, tau: float, h: float):
    """Index range with positive kernel weight: tau - h < tau_obs < tau + h."""
    lo = int(np.searchsorted(tau_obs, tau - h, side="right"))
    hi = int(np.searchsorted(tau_obs, tau + h, side="left"))
    return lo, hi


def gram_moments(z, y, tau_obs, tau, h):
    """Per-node local Gram matrices and moment vectors at one tau.

    The design per observation is (z, z*u/h) with u = tau_obs - tau, so the
    returned solution carries the slope in bandwidth units. Shapes:
    gram (N, 4, 4), mom (N, 4). Raises when fewer than MIN_LOCAL_POINTS
    observations carry weight.
    """
    lo, hi = _window(tau_obs, tau, h)
    if hi - lo < MIN_LOCAL_POINTS:
        raise InsufficientLocalDataError(
            f"only {hi - lo} observations carry weight at tau={tau:.6g}, h={h:.6g}"
        )
    u = (tau_obs[lo:hi] - tau) / h
    w = kernel_eval(Kernel.EPANECHNIKOV, u) / h
    zw = z[:, lo:hi, :]
    r = np.concatenate([zw, zw * u[None, :, None]], axis=2)
    rw = r * w[None, :, None]
    gram = np.einsum("nta,ntb->nab", rw, r, optimize=True)
    mom = np.einsum("nta,nt->na", rw, y[:, lo:hi], optimize=True)
    return gram, mom


def ridge_solve(gram: np.ndarray, mom: np.ndarray) -> np.ndarray:
    """Solve the local systems with a trace-scaled ridge; NaN rows on failure.

    Accepts batched (..., 4, 4) grams and (..., 4) moments.
    """
    trace = np.trace(gram, axis1=-2, axis2=-1)
    reg = gram + (RIDGE_REL * trace)[..., None, None] * np.eye(gram.shape[-1])
    try:
        sol = np.linalg.solve(reg, mom[..., None])[..., 0]
    except np.linalg.LinAlgError:
        flat_g = reg.reshape(-1, *reg.shape[-2:])
        flat_m = mom.reshape(-1, mom.shape[-1])
        sol = np.full_like(flat_m, np.nan)
        for idx in range(flat_g.shape[0]):
            try:
                sol[idx] = np.linalg.solve(flat_g[idx], flat_m[idx])
            except np.linalg.LinAlgError:
                pass
        sol = sol.reshape(mom.shape)
    bad = ~np.all(np.isfinite(sol), axis=-1)
    sol[bad] = np.nan
    return sol


def _solve_plain(z, y, tau_obs, tau, h):
    """Batched plain-kernel solve: (level (N,2), slope (N,2), gram (N,4,4))."""
    gram, mom = gram_moments(z, y, tau_obs, tau, h)
    sol = ridge_solve(gram, mom)
    return sol[:, :2], sol[:, 2:] / h, gram


def _solve_at_tau(z, y, tau_obs, tau, h, kernel: Kernel):
    """Level and slope for all nodes at one tau, dispatching on the kernel."""
    if kernel is Kernel.EPANECHNIKOV:
        level, slope, _ = _solve_plain(z, y, tau_obs, tau, h)
        return level, slope
    lev_s, slo_s, _ = _solve_plain(z, y, tau_obs, tau, h / SQRT2)
    lev_h, slo_h, _ = _solve_plain(z, y, tau_obs, tau, h)
    return 2.0 * lev_s - lev_h, 2.0 * slo_s - slo_h


@dataclass(frozen=True)
class NodeFit:
    """Local linear fit for one node at one tau."""

    node: int
    tau: float
    beta: np.ndarray
    slope: np.ndarray
    cond: float


@dataclass(frozen=True)
class CoefficientPathSet:
    """Per-node coefficient paths on a tau grid.

    `beta` and `slope` have shape (N, L, 2); `ok[i, l]` is False where the
    local system was singular (the corresponding entries are NaN).
    """

    grid: np.ndarray
    beta: np.ndarray
    slope: np.ndarray
    ok: np.ndarray
    h: float
    kernel: Kernel

    @property
    def n(self) -> int:
        return self.beta.shape[0]


def _check_tau(tau: float):
    if not 0.0 < tau <= 1.0:
        raise InputError(f"tau must lie in (0, 1], got {tau}")


def fit_node(
    panel: Panel,
    net: Network,
    i: int,
    tau: float,
    h: float,
    kernel: Kernel = Kernel.EPANECHNIKOV,
) -> NodeFit:
    """Local linear estimate of node i's coefficient pair at `tau`.

    Raises InsufficientLocalDataError when fewer than five observations
    carry kernel weight or the local system is singular beyond the ridge.
    """
    if not 0 <= i < panel.n:
        raise InputError(f"node index {i} out of range")
    _check_tau(tau)
    z, y, tau_obs = regressors(panel, net)
    zi, yi = z[i : i + 1], y[i : i + 1]
    level, slope = _solve_at_tau(zi, yi, tau_obs, tau, h, kernel)
    _, _, gram = _solve_plain(zi, yi, tau_obs, tau, h)
    lam = np.linalg.eigvalsh(gram[0])
    cond = float(lam[-1] / lam[0]) if lam[0] > 0 else float("inf")
    if not np.all(np.isfinite(level)):
        raise InsufficientLocalDataError(
            f"singular local design for node {i} at tau={tau:.6g} (h={h:.6g})"
        )
    return NodeFit(node=i, tau=tau, beta=level[0], slope=slope[0], cond=cond)


def fit_node_bc(panel: Panel, net: Network, i: int, tau: float, h: float) -> NodeFit:
    """Jackknife bias-corrected fit: 2*fit(h/sqrt(2)) - fit(h)."""
    fine = fit_node(panel, net, i, tau, h / SQRT2)
    coarse = fit_node(panel, net, i, tau, h)
    return NodeFit(
        node=i,
        tau=tau,
        beta=2.0 * fine.beta - coarse.beta,
        slope=2.0 * fine.slope - coarse.slope,
        cond=max(fine.cond, coarse.cond),
    )


def fit_all_nodes(
    panel: Panel,
    net: Network,
    grid,
    h: float,
    kernel: Kernel = Kernel.EPANECHNIKOV,
) -> CoefficientPathSet:
    """Coefficient paths for every node on a tau grid.

    Per-(node, tau) failures are flagged in `ok` rather than raised, so a
    single degenerate window does not abort a whole panel fit.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise InputError("grid must be a nonempty 1-d array")
    if (grid <= 0.0).any() or (grid > 1.0).any():
        raise InputError("grid points must lie in (0, 1]")
    z, y, tau_obs = regressors(panel, net)
    n = panel.n
    beta = np.empty((n, grid.size, 2))
    slope = np.empty((n, grid.size, 2))
    for l, tau in enumerate(grid):
        lev, slo = _solve_at_tau(z, y, tau_obs, float(tau), h, kernel)
        beta[:, l, :] = lev
        slope[:, l, :] = slo
    ok = np.all(np.isfinite(beta), axis=2)
    return CoefficientPathSet(grid=grid, beta=beta, slope=slope, ok=ok, h=h, kernel=kernel)


def residuals(panel: Panel, net: Network, paths) -> np.ndarray:
    """One-step-ahead residuals under fitted paths, as an N x T matrix.

    `paths` must supply beta at every observation time: either a
    CoefficientPathSet whose grid equals panel.tau, or an (N, T, 2) array.
    Column t=1 has no lag and is filled with zeros; downstream averages
    divide by T-1.
    """
    if isinstance(paths, CoefficientPathSet):
        if paths.grid.shape != panel.tau.shape or not np.allclose(
            paths.grid, panel.tau, atol=1e-12
        ):
            raise InputError("paths must be evaluated at every observation time")
        beta = paths.beta
    else:
        beta = np.asarray(paths, dtype=float)
    if beta.shape != (panel.n, panel.t_len, 2):
        raise InputError(f"expected paths of shape {(panel.n, panel.t_len, 2)}")
    z, y, _ = regressors(panel, net)
    eps = np.zeros((panel.n, panel.t_len))
    eps[:, 1:] = y - np.einsum("ntk,ntk->nt", beta[:, 1:, :], z)
    return eps


def delta_hat(panel: Panel, net: Network, i: int, j: int, tau: float, h: float) -> np.ndarray:
    """Kernel-weighted regressor cross-moment (1/T) sum_t z_i z_j' K_h."""
    _check_tau(tau)
    z, _, tau_obs = regressors(panel, net)
    lo, hi = _window(tau_obs, tau, h)
    u = (tau_obs[lo:hi] - tau) / h
    w = kernel_eval(Kernel.EPANECHNIKOV, u) / h
    return (z[i, lo:hi, :] * w[:, None]).T @ z[j, lo:hi, :] / panel.t_len


def _delta_all_pairs(z: np.ndarray, tau_obs: np.ndarray, tau: float, h: float, t_len: int):
    """All-pairs cross-moments at one tau: shape (N, N, 2, 2)."""
    lo, hi = _window(tau_obs, tau, h)
    u = (tau_obs[lo:hi] - tau) / h
    w = kernel_eval(Kernel.EPANECHNIKOV, u) / h
    zw = z[:, lo:hi, :] * w[None, :, None]
    zs = z[:, lo:hi, :]
    out = np.empty((z.shape[0], z.shape[0], 2, 2))
    for a in range(2):
        for b in range(2):
            out[:, :, a, b] = zw[:, :, a] @ zs[:, :, b].T
    return out / t_len


@dataclass(frozen=True)
class CovPlugins:
    """Covariance plug-ins built from preliminary fits.

    `sigma_hat` is the residual covariance estimate; `delta` and
    `sigma_pair` evaluate the regressor cross-moments and the covariance of
    pairwise fit differences on demand. `nu0` is the squared-kernel mass of
    the effective smoothing kernel.
    """

    h: float
    nu0: float
    sigma_hat: np.ndarray
    z: np.ndarray
    tau_obs: np.ndarray
    t_len: int

    def delta(self, i: int, j: int, tau: float) -> np.ndarray:
        _check_tau(tau)
        lo, hi = _window(self.tau_obs, tau, self.h)
        u = (self.tau_obs[lo:hi] - tau) / self.h
        w = kernel_eval(Kernel.EPANECHNIKOV, u) / self.h
        return (self.z[i, lo:hi, :] * w[:, None]).T @ self.z[j, lo:hi, :] / self.t_len

    def sigma_pair(self, i: int, j: int, tau: float) -> np.ndarray:
        """Plug-in covariance of the difference of node i and j fits at tau.

        Exactly zero for i == j: the variance and cross terms cancel.
        """
        inv_i = sym_inv(self.delta(i, i, tau))
        inv_j = sym_inv(self.delta(j, j, tau))
        p = inv_i @ self.delta(i, j, tau) @ inv_j
        star = self.sigma_hat[i, j] * (p + p.T)
        out = self.nu0 * (
            self.sigma_hat[i, i] * inv_i + self.sigma_hat[j, j] * inv_j - star
        )
        return 0.5 * (out + out.T)

    def sigma_pair_all(self, tau: float) -> np.ndarray:
        """All-pairs difference covariances at one tau: shape (N, N, 2, 2)."""
        _check_tau(tau)
        deltas = _delta_all_pairs(self.z, self.tau_obs, tau, self.h, self.t_len)
        n = deltas.shape[0]
        inv = sym_inv_2x2_batch(deltas[np.arange(n), np.arange(n)])
        p = np.einsum("iab,ijbc,jcd->ijad", inv, deltas, inv, optimize=True)
        star = self.sigma_hat[:, :, None, None] * (p + np.swapaxes(p, 2, 3))
        var = np.diagonal(self.sigma_hat)
        out = self.nu0 * (
            (var[:, None, None, None] * inv[:, None])
            + (var[None, :, None, None] * inv[None, :])
            - star
        )
        return 0.5 * (out + np.swapaxes(out, 2, 3))


def sigma_pair_hat(plugins: CovPlugins, i: int, j: int, tau: float) -> np.ndarray:
    """Module-level alias for CovPlugins.sigma_pair."""
    return plugins.sigma_pair(i, j, tau)


def build_plugins(
    panel: Panel,
    net: Network,
    h: float,
    kernel: Kernel = Kernel.EPANECHNIKOV,
    paths: CoefficientPathSet | None = None,
) -> CovPlugins:
    """Residual covariance and cross-moment plug-ins at bandwidth `h`.

    Residuals always come from plain local linear paths at every
    observation time (computed here unless supplied); `kernel` only selects
    the squared-kernel constant entering the difference covariance.
    """
    if paths is None:
        paths = fit_all_nodes(panel, net, panel.tau, h, Kernel.EPANECHNIKOV)
    if not paths.ok.all():
        bad = np.argwhere(~paths.ok)[:5].tolist()
        raise InsufficientLocalDataError(f"failed preliminary fits at (node, grid): {bad}")
    eps = residuals(panel, net, paths)
    used = eps[:, 1:]
    sigma_hat = used @ used.T / used.shape[1]
    z, _, tau_obs = regressors(panel, net)
    return CovPlugins(
        h=h,
        nu0=kernel_moment(kernel, 0, squared=True),
        sigma_hat=sigma_hat,
        z=z,
        tau_obs=tau_obs,
        t_len=panel.t_len,
    )
