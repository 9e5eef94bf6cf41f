"""Monte-Carlo harness: replications, group-recovery and test metrics.

Each replication draws its own streams from seeds derived off the master
seed, so results are identical whether replications run serially or in a
worker pool. Estimation never sees the true partition; oracle metrics are
computed in a separate pass of the same replication.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from multiprocessing import get_context

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import rng as rngmod
from .cluster import build_merge_trace, distance_matrix, trimmed_grid
from .config import RunConfig
from .data import GroupStructure
from .errors import NetvarError
from .kernels import Kernel, rule_of_thumb
from .local import build_plugins, fit_all_nodes
from .postgroup import rmse
from .select import PooledDesign, ic_curve
from .simulate import assign_groups, gen_adjacency, gen_error_cov, simulate_panel
from .spectest import TestResult, fit_constant_null, null_residuals, q_statistic, standardize


def purity(estimated: GroupStructure, truth: GroupStructure) -> float:
    """Fraction of nodes covered by each estimated cluster's dominant true group."""
    if estimated.n != truth.n:
        raise ValueError("partitions cover different node counts")
    agree = 0
    true_sets = [set(truth.members(j).tolist()) for j in range(1, truth.k + 1)]
    for k in range(1, estimated.k + 1):
        est = set(estimated.members(k).tolist())
        agree += max(len(est & ts) for ts in true_sets)
    return agree / truth.n


def match_to_truth(estimated: GroupStructure, truth: GroupStructure) -> dict[int, int]:
    """Overlap-maximizing assignment of estimated labels to true labels.

    Only defined when the group counts agree; returns {true_label: est_label}.
    """
    if estimated.k != truth.k:
        raise ValueError("matching needs equal group counts")
    overlap = np.zeros((estimated.k, truth.k))
    for a in range(1, estimated.k + 1):
        est = set(estimated.members(a).tolist())
        for b in range(1, truth.k + 1):
            overlap[a - 1, b - 1] = len(est & set(truth.members(b).tolist()))
    rows, cols = linear_sum_assignment(-overlap)
    return {int(c) + 1: int(r) + 1 for r, c in zip(rows, cols)}


@dataclass(frozen=True)
class GroupTest:
    q_std: float
    p_value: float
    h3: float


@dataclass(frozen=True)
class RepOutcome:
    """Everything one replication contributes to the summary tables."""

    rep: int
    status: str
    message: str = ""
    k_hat: int = 0
    purity: float = math.nan
    rmse_pre: float = math.nan
    rmse_post: float = math.nan
    rmse_ora: float = math.nan
    tests_est: tuple[GroupTest | None, ...] = ()
    tests_ora: tuple[GroupTest | None, ...] = ()


def _group_test(panel, net, members) -> GroupTest:
    null = fit_constant_null(panel, net, members)
    resid = null_residuals(panel, net, members, null)
    scale = float(np.sqrt(np.mean(resid**2)))
    h3 = rule_of_thumb(panel.t_len, "test", sigma=scale)
    q = q_statistic(resid, panel.tau[1:], h3)
    res: TestResult = standardize(q, resid, h3)
    return GroupTest(q_std=res.q_std, p_value=res.p_value, h3=h3)


def run_replication(cfg: RunConfig, rep: int) -> RepOutcome:
    """Simulate, estimate blind, then score against the truth."""
    scen = cfg.build_scenario()
    k0 = scen.k
    try:
        rep_seed = rngmod.derive(cfg.seed, rngmod.TAG_REPLICATION, rep)
        if cfg.group_mode == "fixed":
            groups = assign_groups(cfg.n, cfg.probs(), "fixed", cfg.seed)
        else:
            groups = assign_groups(cfg.n, cfg.probs(), "random", rep_seed)
        net = gen_adjacency(cfg.n, cfg.edge_prob, rep_seed)
        errs = gen_error_cov(cfg.n, cfg.error_rho)
        panel = simulate_panel(
            scen, groups, net, errs, cfg.t_len, burnin=cfg.burnin, rng_seed=rep_seed
        )

        h = cfg.h if cfg.h is not None else rule_of_thumb(cfg.t_len, "preliminary")
        h1 = cfg.h1 if cfg.h1 is not None else rule_of_thumb(cfg.t_len, "pooled", n=cfg.n)
        h2 = cfg.h2 if cfg.h2 is not None else h1

        # Estimation pass: the true partition is not consulted.
        paths_obs = fit_all_nodes(panel, net, panel.tau, h)
        kernel = Kernel.FOURTH_ORDER_EPANECHNIKOV if cfg.bias_corrected else Kernel.EPANECHNIKOV
        plugins = build_plugins(panel, net, h, kernel=kernel, paths=paths_obs)
        grid = trimmed_grid(cfg.t_len, h, cfg.grid_size, cfg.grid_trim)
        dist_paths = fit_all_nodes(panel, net, grid, h, kernel)
        dist = distance_matrix(dist_paths, plugins, bias_corrected=cfg.bias_corrected)
        trace = build_merge_trace(dist, cfg.linkage)
        design1 = PooledDesign(panel, net, h1)
        report = ic_curve(panel, net, trace, kbar=min(cfg.kbar, cfg.n), h1=h1, rho=cfg.rho, design=design1)
        part = trace.cut(report.k_hat)
        design2 = design1 if h2 == h1 else PooledDesign(panel, net, h2)
        est_levels = design2.partition_levels(part)
        est_tests = [
            _group_test(panel, net, part.members(g)) for g in range(1, part.k + 1)
        ]

        # Scoring pass: truth enters only here.
        pur = purity(part, groups)
        r_pre = rmse(paths_obs.beta, scen, groups, panel.tau)
        r_post = rmse(est_levels[part.membership - 1], scen, groups, panel.tau)
        ora_levels = design2.partition_levels(groups)
        r_ora = rmse(ora_levels[groups.membership - 1], scen, groups, panel.tau)
        tests_ora = tuple(
            _group_test(panel, net, groups.members(g)) for g in range(1, k0 + 1)
        )
        if report.k_hat == k0:
            matched = match_to_truth(part, groups)
            tests_est: tuple[GroupTest | None, ...] = tuple(
                est_tests[matched[g] - 1] for g in range(1, k0 + 1)
            )
        else:
            tests_est = tuple([None] * k0)
        return RepOutcome(
            rep=rep,
            status="ok",
            k_hat=report.k_hat,
            purity=pur,
            rmse_pre=r_pre,
            rmse_post=r_post,
            rmse_ora=r_ora,
            tests_est=tests_est,
            tests_ora=tests_ora,
        )
    except (NetvarError, np.linalg.LinAlgError) as exc:
        return RepOutcome(rep=rep, status="failed", message=f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class McSummary:
    """Aggregated Monte-Carlo metrics."""

    replications: int
    completed: int
    failed: int
    k0: int
    ep_correct: float
    ep_over: float
    ep_under: float
    purity: float
    rmse_pre: float
    rmse_pre_sd: float
    rmse_post: float
    rmse_post_sd: float
    rmse_ora: float
    rmse_ora_sd: float
    conditioned: int
    alpha_levels: tuple[float, ...]
    trr_est: tuple[tuple[float, ...], ...]
    trr_ora: tuple[tuple[float, ...], ...]

    def as_dict(self) -> dict:
        out = {
            "replications": self.replications,
            "completed": self.completed,
            "failed": self.failed,
            "k0": self.k0,
            "ep_correct": self.ep_correct,
            "ep_over": self.ep_over,
            "ep_under": self.ep_under,
            "purity": self.purity,
            "rmse_pre": self.rmse_pre,
            "rmse_pre_sd": self.rmse_pre_sd,
            "rmse_post": self.rmse_post,
            "rmse_post_sd": self.rmse_post_sd,
            "rmse_ora": self.rmse_ora,
            "rmse_ora_sd": self.rmse_ora_sd,
            "conditioned": self.conditioned,
            "alpha_levels": list(self.alpha_levels),
            "trr_est": [list(row) for row in self.trr_est],
            "trr_ora": [list(row) for row in self.trr_ora],
        }
        return out


def summarize(outcomes: list[RepOutcome], cfg: RunConfig) -> McSummary:
    """Collapse per-replication outcomes into the summary tables.

    Estimated-partition rejection rates condition on a correctly estimated
    group count; oracle rates average over all completed replications.
    """
    k0 = cfg.build_scenario().k
    done = [o for o in outcomes if o.status == "ok"]
    failed = len(outcomes) - len(done)
    if not done:
        raise NetvarError("all replications failed")
    k_hats = np.array([o.k_hat for o in done])
    cond = [o for o in done if o.k_hat == k0]
    alphas = cfg.alpha_levels

    def rates(selector, pool):
        rows = []
        for g in range(k0):
            ps = [selector(o)[g].p_value for o in pool if selector(o)[g] is not None]
            rows.append(
                tuple(
                    float(np.mean([p < a for p in ps])) if ps else math.nan for a in alphas
                )
            )
        return tuple(rows)

    def mean_sd(values):
        arr = np.array(values, dtype=float)
        sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        return float(arr.mean()), sd

    rmse_pre, rmse_pre_sd = mean_sd([o.rmse_pre for o in done])
    rmse_post, rmse_post_sd = mean_sd([o.rmse_post for o in done])
    rmse_ora, rmse_ora_sd = mean_sd([o.rmse_ora for o in done])
    return McSummary(
        replications=len(outcomes),
        completed=len(done),
        failed=failed,
        k0=k0,
        ep_correct=float(np.mean(k_hats == k0)),
        ep_over=float(np.mean(k_hats > k0)),
        ep_under=float(np.mean(k_hats < k0)),
        purity=float(np.mean([o.purity for o in done])),
        rmse_pre=rmse_pre,
        rmse_pre_sd=rmse_pre_sd,
        rmse_post=rmse_post,
        rmse_post_sd=rmse_post_sd,
        rmse_ora=rmse_ora,
        rmse_ora_sd=rmse_ora_sd,
        conditioned=len(cond),
        alpha_levels=alphas,
        trr_est=rates(lambda o: o.tests_est, cond),
        trr_ora=rates(lambda o: o.tests_ora, done),
    )


def _worker(args) -> RepOutcome:
    cfg, rep = args
    return run_replication(cfg, rep)


def run_mc(cfg: RunConfig, threads: int = 1) -> list[RepOutcome]:
    """Run all replications, serially or in a spawn-based process pool.

    Outcomes are returned in replication order regardless of scheduling.
    """
    reps = list(range(1, cfg.replications + 1))
    if threads <= 1 or cfg.replications == 1:
        return [run_replication(cfg, r) for r in reps]
    workers = min(threads, cfg.replications)
    with ProcessPoolExecutor(max_workers=workers, mp_context=get_context("spawn")) as pool:
        outcomes = list(pool.map(_worker, [(cfg, r) for r in reps], chunksize=1))
    return sorted(outcomes, key=lambda o: o.rep)
