"""Shared data model: network, group partition, panel, error model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Network:
    """Binary adjacency `w` with zero diagonal and its row-normalized form.

    Construction rejects isolated nodes: every node must have at least one
    outgoing edge so the neighbor-average regressor is defined.
    """

    w: np.ndarray
    wtilde: np.ndarray = field(init=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError(f"adjacency must be square, got shape {w.shape}")
        if w.shape[0] < 2:
            raise InputError("network needs at least 2 nodes")
        if not np.isin(w, (0.0, 1.0)).all():
            raise InputError("adjacency entries must be 0 or 1")
        if np.diag(w).any():
            raise InputError("adjacency diagonal must be zero")
        deg = w.sum(axis=1)
        if (deg == 0).any():
            isolated = np.flatnonzero(deg == 0)
            raise InputError(f"isolated node(s): {isolated.tolist()}")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "wtilde", w / deg[:, None])

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class GroupStructure:
    """Partition of nodes 0..N-1 into groups labelled 1..K.

    `membership[i]` is the 1-based group label of node i; every label in
    1..k must occur at least once.
    """

    k: int
    membership: np.ndarray

    def __post_init__(self):
        mem = np.asarray(self.membership, dtype=np.int64)
        if mem.ndim != 1:
            raise InputError("membership must be a 1-d label vector")
        if self.k < 1:
            raise InputError(f"group count must be >= 1, got {self.k}")
        if mem.min(initial=1) < 1 or mem.max(initial=self.k) > self.k:
            raise InputError("membership labels must lie in 1..k")
        counts = np.bincount(mem, minlength=self.k + 1)[1:]
        if (counts == 0).any():
            empty = (np.flatnonzero(counts == 0) + 1).tolist()
            raise InputError(f"empty group label(s): {empty}")
        object.__setattr__(self, "membership", mem)

    @property
    def n(self) -> int:
        return self.membership.shape[0]

    def members(self, label: int) -> np.ndarray:
        """Node indices of group `label` (1-based), ascending."""
        return np.flatnonzero(self.membership == label)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.k + 1)[1:]


@dataclass(frozen=True)
class Panel:
    """N x T observation matrix with the scaled time axis tau_t = t/T.

    Column s (0-based) holds the observations at scaled time (s+1)/T; the
    first column has no lag available and is excluded from all estimation
    sums.
    """

    data: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.data, dtype=float)
        if x.ndim != 2:
            raise InputError("panel must be an N x T matrix")
        if x.shape[1] < 10:
            raise InputError(f"panel needs at least 10 time points, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise InputError("panel has non-finite entries")
        object.__setattr__(self, "data", x)

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def t_len(self) -> int:
        return self.data.shape[1]

    @property
    def tau(self) -> np.ndarray:
        t = self.data.shape[1]
        return np.arange(1, t + 1) / t


@dataclass(frozen=True)
class ErrorModel:
    """Zero-mean Gaussian innovations with covariance `sigma_eps`.

    Validated symmetric with positive diagonal; the factor F (with
    F F' = sigma_eps) is computed at construction, via Cholesky when
    positive definite and an eigenvalue factorization when merely
    positive semidefinite.
    """

    sigma_eps: np.ndarray
    factor: np.ndarray = field(init=False)

    def __post_init__(self):
        s = np.asarray(self.sigma_eps, dtype=float)
        if s.ndim != 2 or s.shape[0] != s.shape[1]:
            raise InputError("error covariance must be square")
        if not np.all(np.isfinite(s)):
            raise InputError("error covariance has non-finite entries")
        if not np.allclose(s, s.T, atol=1e-12, rtol=1e-10):
            raise InputError("error covariance must be symmetric")
        if s.shape[0] and (np.diag(s) < 0).any():
            raise InputError("error covariance diagonal must be nonnegative")
        try:
            f = np.linalg.cholesky(s)
        except np.linalg.LinAlgError:
            lam, vec = np.linalg.eigh(0.5 * (s + s.T))
            floor = -1e-10 * max(1.0, float(np.abs(lam).max()))
            if lam.min(initial=0.0) < floor:
                raise InputError("error covariance is not positive semidefinite") from None
            f = vec * np.sqrt(np.maximum(lam, 0.0))
        object.__setattr__(self, "sigma_eps", s)
        object.__setattr__(self, "factor", f)

    @property
    def n(self) -> int:
        return self.sigma_eps.shape[0]
