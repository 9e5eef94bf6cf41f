"""Normalized distance matrix between nodes and agglomerative clustering.

The distance between two nodes averages, over an interior tau grid, the
quadratic form of their coefficient-path difference weighted by the inverse
of its estimated covariance, so magnitudes are comparable across pairs.
Clustering then merges the closest clusters bottom-up; the full merge
sequence is recorded so any group count can be cut without recomputation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import GroupStructure, Network, Panel
from .errors import InputError, InsufficientLocalDataError
from .kernels import Kernel, rule_of_thumb
from .linalg import sym_inv, sym_inv_2x2_batch
from .local import CoefficientPathSet, CovPlugins, build_plugins, fit_all_nodes

LINKAGES = ("single", "complete", "average")


def grid_points(grid_size: int) -> np.ndarray:
    """Equidistant interior grid l/(L+1), l = 1..L."""
    if grid_size < 2:
        raise InputError(f"need grid_size >= 2, got {grid_size}")
    return np.arange(1, grid_size + 1) / (grid_size + 1)


def trimmed_grid(t_len: int, h: float, grid_size: int | None = None, trim: float | None = None) -> np.ndarray:
    """Distance-evaluation grid: l/(L+1) spacing mapped into [trim, 1 - trim].

    The default trim equals the bandwidth, keeping evaluation inside the
    interior region where the difference-covariance plug-in is valid; the
    default size is min(T, 100).
    """
    if trim is None:
        trim = h
    if not 0.0 <= trim < 0.5:
        raise InputError(f"trim must lie in [0, 0.5), got {trim}")
    size = min(t_len, 100) if grid_size is None else grid_size
    return trim + (1.0 - 2.0 * trim) * grid_points(size)


@dataclass(frozen=True)
class DistanceMatrix:
    """Symmetric nonnegative node distance matrix with zero diagonal."""

    d: np.ndarray
    grid: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise InputError("distance matrix must be square")
        if not np.all(np.isfinite(d)):
            raise InputError("distance matrix has non-finite entries")
        if np.diag(d).any():
            raise InputError("distance matrix diagonal must be zero")
        if not np.array_equal(d, d.T):
            raise InputError("distance matrix must be symmetric")
        if (d < 0).any():
            raise InputError("distance matrix entries must be nonnegative")
        object.__setattr__(self, "d", d)

    @property
    def n(self) -> int:
        return self.d.shape[0]


def pair_distance(paths: CoefficientPathSet, plugins: CovPlugins, i: int, j: int, grid=None) -> float:
    """Average normalized squared path difference between nodes i and j.

    Reference per-pair implementation; `distance_matrix` computes the same
    values batched. A grid point where the path difference is exactly zero
    contributes exactly zero, however ill-conditioned its covariance.
    """
    if i == j:
        raise InputError("pair distance needs two distinct nodes")
    grid = paths.grid if grid is None else np.asarray(grid, dtype=float)
    if grid.shape != paths.grid.shape or not np.allclose(grid, paths.grid, atol=1e-12):
        raise InputError("grid must match the grid the paths were fitted on")
    total = 0.0
    for l, tau in enumerate(grid):
        diff = paths.beta[i, l] - paths.beta[j, l]
        if diff[0] == 0.0 and diff[1] == 0.0:
            continue
        total += float(diff @ sym_inv(plugins.sigma_pair(i, j, float(tau))) @ diff)
    return max(total / grid.size, 0.0)


def distance_matrix(
    paths: CoefficientPathSet,
    plugins: CovPlugins,
    grid=None,
    bias_corrected: bool = False,
) -> DistanceMatrix:
    """All-pairs normalized distances on the paths' grid.

    `bias_corrected` documents which path flavor is expected and is
    validated against the paths' kernel.
    """
    expected = Kernel.FOURTH_ORDER_EPANECHNIKOV if bias_corrected else Kernel.EPANECHNIKOV
    if paths.kernel is not expected:
        raise InputError(
            f"paths were fitted with {paths.kernel.value}; expected {expected.value}"
        )
    grid = paths.grid if grid is None else np.asarray(grid, dtype=float)
    if grid.shape != paths.grid.shape or not np.allclose(grid, paths.grid, atol=1e-12):
        raise InputError("grid must match the grid the paths were fitted on")
    if not paths.ok.all():
        bad = np.argwhere(~paths.ok)[:5].tolist()
        raise InsufficientLocalDataError(f"flagged path entries at (node, grid): {bad}")
    n = paths.n
    acc = np.zeros((n, n))
    for l, tau in enumerate(grid):
        sinv = sym_inv_2x2_batch(plugins.sigma_pair_all(float(tau)))
        beta = paths.beta[:, l, :]
        diff = beta[:, None, :] - beta[None, :, :]
        acc += np.einsum("ija,ijab,ijb->ij", diff, sinv, diff, optimize=True)
    acc /= grid.size
    acc = np.maximum(0.5 * (acc + acc.T), 0.0)
    np.fill_diagonal(acc, 0.0)
    return DistanceMatrix(d=acc, grid=grid)


@dataclass(frozen=True)
class MergeStep:
    """One agglomeration step: clusters are named by their smallest member node."""

    step: int
    cluster_a: int
    cluster_b: int
    distance: float


@dataclass(frozen=True)
class MergeTrace:
    """Full merge sequence from N singletons down to one cluster."""

    n: int
    linkage: str
    steps: tuple[MergeStep, ...]

    def cut(self, k: int) -> GroupStructure:
        """Partition obtained by stopping when k clusters remain.

        Labels are renumbered 1..k by each cluster's smallest member node.
        """
        if not 1 <= k <= self.n:
            raise InputError(f"cut level must lie in 1..{self.n}, got {k}")
        parent = np.arange(self.n)

        def find(x: int) -> int:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for step in self.steps[: self.n - k]:
            ra, rb = find(step.cluster_a), find(step.cluster_b)
            lo, hi = min(ra, rb), max(ra, rb)
            parent[hi] = lo
        roots = np.array([find(i) for i in range(self.n)])
        labels = {root: lab for lab, root in enumerate(sorted(set(roots)), start=1)}
        return GroupStructure(k=k, membership=np.array([labels[r] for r in roots]))


def build_merge_trace(dist: DistanceMatrix, rule: str = "complete") -> MergeTrace:
    """Run the agglomeration to completion, recording every merge.

    At each step the pair of clusters at smallest linkage distance merges;
    ties break on the lexicographically smallest pair of cluster names
    (names are smallest member node indices, so the scan order of the
    distance table realizes the tie-break).
    """
    if rule not in LINKAGES:
        raise InputError(f"linkage must be one of {LINKAGES}, got {rule!r}")
    n = dist.n
    work = dist.d.astype(float).copy()
    np.fill_diagonal(work, np.inf)
    sizes = np.ones(n)
    steps = []
    for step in range(1, n):
        flat = int(np.argmin(work))
        a, b = divmod(flat, n)
        if a > b:
            a, b = b, a
        d = float(work[a, b])
        steps.append(MergeStep(step=step, cluster_a=a, cluster_b=b, distance=d))
        if rule == "single":
            merged = np.minimum(work[a], work[b])
        elif rule == "complete":
            merged = np.maximum(work[a], work[b])
        else:
            merged = (sizes[a] * work[a] + sizes[b] * work[b]) / (sizes[a] + sizes[b])
        work[a, :] = merged
        work[:, a] = merged
        work[a, a] = np.inf
        work[b, :] = np.inf
        work[:, b] = np.inf
        sizes[a] += sizes[b]
    return MergeTrace(n=n, linkage=rule, steps=tuple(steps))


def agglomerate(dist: DistanceMatrix, target_k: int, rule: str = "complete") -> GroupStructure:
    """Merge clusters bottom-up until `target_k` remain."""
    if not 1 <= target_k <= dist.n:
        raise InputError(f"target_k must lie in 1..{dist.n}, got {target_k}")
    return build_merge_trace(dist, rule).cut(target_k)


@dataclass(frozen=True)
class ClusterPipeline:
    """Everything the clustering stage produces in one pass."""

    paths: CoefficientPathSet
    plugins: CovPlugins
    distances: DistanceMatrix
    trace: MergeTrace


def full_pipeline(
    panel: Panel,
    net: Network,
    h: float | None = None,
    grid_size: int | None = None,
    trim: float | None = None,
    linkage: str = "complete",
    bias_corrected: bool = False,
    paths_at_obs: CoefficientPathSet | None = None,
) -> ClusterPipeline:
    """Fit paths on the trimmed interior grid, build plug-ins and distances,
    and record the full merge sequence so any group count cuts for free.

    `paths_at_obs` optionally supplies plain-kernel paths at every
    observation time (reused for the residual covariance).
    """
    if h is None:
        h = rule_of_thumb(panel.t_len, "preliminary")
    kernel = Kernel.FOURTH_ORDER_EPANECHNIKOV if bias_corrected else Kernel.EPANECHNIKOV
    grid = trimmed_grid(panel.t_len, h, grid_size, trim)
    paths = fit_all_nodes(panel, net, grid, h, kernel)
    plugins = build_plugins(panel, net, h, kernel=kernel, paths=paths_at_obs)
    dist = distance_matrix(paths, plugins, bias_corrected=bias_corrected)
    trace = build_merge_trace(dist, linkage)
    return ClusterPipeline(paths=paths, plugins=plugins, distances=dist, trace=trace)
