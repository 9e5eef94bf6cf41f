"""Command line interface.

Subcommands: `simulate` (write a synthetic panel), `fit` (full estimation
pipeline on supplied files), `mc` (Monte-Carlo harness), `ingest`
(standardize a raw panel), `test` (specification test on a supplied
partition). Exit codes: 0 success, 2 input/validation error, 3 numerical
failure, 4 explosive simulation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .cluster import build_merge_trace, distance_matrix, trimmed_grid
from .config import RunConfig, apply_overrides, load_config
from .data import GroupStructure, Network, Panel
from .errors import (
    DegenerateResidualsError,
    GenerationFailure,
    InputError,
    InstabilityError,
    InsufficientLocalDataError,
    NetvarError,
    SingularDesignError,
)
from .kernels import Kernel, rule_of_thumb
from .local import build_plugins, fit_all_nodes
from .mc import run_mc, summarize
from .postgroup import group_paths
from .select import PooledDesign, ic_curve
from .simulate import assign_groups, gen_adjacency, gen_error_cov, simulate_panel, stability_check
from .spectest import run_test
from . import tabular

EXIT_INPUT = 2
EXIT_NUMERIC = 3
EXIT_UNSTABLE = 4


def _ensure_outdir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _build_config(args) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        cfg = load_config(args.config, cfg)
    overrides = {}
    for key in (
        "seed",
        "n",
        "t_len",
        "replications",
        "linkage",
        "kbar",
        "scenario",
        "ci_level",
    ):
        if hasattr(args, key):
            overrides[key] = getattr(args, key)
    if getattr(args, "bias_corrected", False):
        overrides["bias_corrected"] = True
    cfg = apply_overrides(cfg, **overrides)
    return cfg.validate()


def _load_inputs(panel_path: str, adjacency_path: str):
    node_ids, _, data = tabular.read_panel(panel_path)
    ids, w = tabular.read_adjacency(adjacency_path, node_ids)
    return node_ids, Panel(data), Network(w)


def cmd_simulate(args) -> int:
    cfg = _build_config(args)
    out = _ensure_outdir(args.out)
    scen = cfg.build_scenario()
    if cfg.group_mode == "fixed":
        groups = assign_groups(cfg.n, cfg.probs(), "fixed", cfg.seed)
    else:
        groups = assign_groups(cfg.n, cfg.probs(), "random", cfg.seed)
    net = gen_adjacency(cfg.n, cfg.edge_prob, cfg.seed)
    errs = gen_error_cov(cfg.n, cfg.error_rho)
    report = stability_check(scen, groups, net)
    panel = simulate_panel(scen, groups, net, errs, cfg.t_len, burnin=cfg.burnin, rng_seed=cfg.seed)

    node_ids = [str(i) for i in range(cfg.n)]
    tabular.write_panel(os.path.join(out, "panel.csv"), node_ids, panel.data)
    tabular.write_matrix(os.path.join(out, "adjacency.csv"), node_ids, net.w.astype(int))
    tabular.write_groups(os.path.join(out, "groups.csv"), node_ids, groups.membership)
    with open(os.path.join(out, "scenario.txt"), "w", encoding="utf-8") as fh:
        fh.write(scen.serialize())
    tabular.write_csv(
        os.path.join(out, "stability.csv"),
        ["tau", "spectral_radius"],
        zip(report.taus.tolist(), report.radii.tolist()),
    )
    verdict = "passes" if report.passed else "fails"
    print(
        f"simulated N={cfg.n} T={cfg.t_len} seed={cfg.seed}; "
        f"stability check {verdict} (max radius {report.max_radius:.4f})"
    )
    return 0


def _fit_pipeline(cfg: RunConfig, panel: Panel, net: Network):
    """Shared estimation pipeline: fits, distances, trace, IC, partition."""
    h = cfg.h if cfg.h is not None else rule_of_thumb(panel.t_len, "preliminary")
    h1 = cfg.h1 if cfg.h1 is not None else rule_of_thumb(panel.t_len, "pooled", n=panel.n)
    h2 = cfg.h2 if cfg.h2 is not None else h1
    paths_obs = fit_all_nodes(panel, net, panel.tau, h)
    kernel = Kernel.FOURTH_ORDER_EPANECHNIKOV if cfg.bias_corrected else Kernel.EPANECHNIKOV
    plugins = build_plugins(panel, net, h, kernel=kernel, paths=paths_obs)
    grid = trimmed_grid(panel.t_len, h, cfg.grid_size, cfg.grid_trim)
    dist_paths = fit_all_nodes(panel, net, grid, h, kernel)
    dist = distance_matrix(dist_paths, plugins, bias_corrected=cfg.bias_corrected)
    trace = build_merge_trace(dist, cfg.linkage)
    design = PooledDesign(panel, net, h1)
    report = ic_curve(
        panel, net, trace, kbar=min(cfg.kbar, panel.n), h1=h1, rho=cfg.rho, design=design
    )
    partition = trace.cut(report.k_hat)
    return h, h1, h2, plugins, grid, dist, trace, report, partition


def cmd_fit(args) -> int:
    cfg = _build_config(args)
    out = _ensure_outdir(args.out)
    node_ids, panel, net = _load_inputs(args.panel, args.adjacency)
    h, h1, h2, plugins, grid, dist, trace, report, partition = _fit_pipeline(cfg, panel, net)

    tabular.write_groups(os.path.join(out, "groups_est.csv"), node_ids, partition.membership)
    tabular.write_csv(
        os.path.join(out, "ic_table.csv"),
        ["K", "sigma2", "ic"],
        ((row.k, row.sigma2, row.ic) for row in report.table),
    )
    tabular.write_matrix(os.path.join(out, "distance.csv"), node_ids, dist.d)
    tabular.write_csv(
        os.path.join(out, "merges.csv"),
        ["step", "cluster_a", "cluster_b", "linkage_distance"],
        ((s.step, node_ids[s.cluster_a], node_ids[s.cluster_b], s.distance) for s in trace.steps),
    )
    paths = group_paths(panel, net, partition, grid, h2, ci_level=cfg.ci_level, plugins=plugins)
    path_rows = []
    for gp in paths:
        for l, tau in enumerate(gp.grid):
            path_rows.append(
                (gp.group, tau, gp.alpha[l, 0], gp.alpha[l, 1], gp.stderr[l, 0], gp.stderr[l, 1])
            )
    tabular.write_csv(
        os.path.join(out, "paths.csv"),
        ["group", "tau", "alpha1", "alpha2", "se1", "se2"],
        path_rows,
    )
    test_rows = []
    for g in range(1, partition.k + 1):
        res = run_test(panel, net, partition, g, h3=cfg.h3)
        test_rows.append((res.group, res.q_raw, res.q_std, res.p_value, res.h3, res.n_group))
    tabular.write_csv(
        os.path.join(out, "tests.csv"),
        ["group", "q_raw", "q_std", "p_value", "h3", "n_group"],
        test_rows,
    )
    print(
        f"fitted N={panel.n} T={panel.t_len}: K_hat={report.k_hat} "
        f"(h={h:.4f}, h1={h1:.4f}, h2={h2:.4f}, linkage={cfg.linkage})"
    )
    return 0


def cmd_mc(args) -> int:
    cfg = _build_config(args)
    out = _ensure_outdir(args.out)
    threads = cfg.resolve_threads(args.threads)
    outcomes = run_mc(cfg, threads=threads)
    summary = summarize(outcomes, cfg)
    k0 = summary.k0

    detail_header = ["rep", "status", "k_hat", "purity", "rmse_pre", "rmse_post", "rmse_ora"]
    for g in range(1, k0 + 1):
        detail_header += [f"q_est_g{g}", f"p_est_g{g}", f"q_ora_g{g}", f"p_ora_g{g}"]
    detail_header.append("message")
    detail_rows = []
    for o in outcomes:
        row = [o.rep, o.status]
        if o.status == "ok":
            row += [o.k_hat, o.purity, o.rmse_pre, o.rmse_post, o.rmse_ora]
            for g in range(k0):
                te = o.tests_est[g]
                to = o.tests_ora[g]
                row += [
                    te.q_std if te else None,
                    te.p_value if te else None,
                    to.q_std if to else None,
                    to.p_value if to else None,
                ]
        else:
            row += [None] * (5 + 4 * k0)
        row.append(o.message)
        detail_rows.append(row)
    tabular.write_csv(os.path.join(out, "mc_detail.csv"), detail_header, detail_rows)

    summary_rows = [
        ("replications", "", "", summary.replications),
        ("completed", "", "", summary.completed),
        ("failed", "", "", summary.failed),
        ("k0", "", "", summary.k0),
        ("ep_correct", "", "", summary.ep_correct),
        ("ep_over", "", "", summary.ep_over),
        ("ep_under", "", "", summary.ep_under),
        ("purity", "", "", summary.purity),
        ("rmse_pre", "", "", summary.rmse_pre),
        ("rmse_pre_sd", "", "", summary.rmse_pre_sd),
        ("rmse_post", "", "", summary.rmse_post),
        ("rmse_post_sd", "", "", summary.rmse_post_sd),
        ("rmse_ora", "", "", summary.rmse_ora),
        ("rmse_ora_sd", "", "", summary.rmse_ora_sd),
        ("conditioned", "", "", summary.conditioned),
    ]
    for g in range(1, k0 + 1):
        for a_idx, alpha in enumerate(summary.alpha_levels):
            summary_rows.append(("trr_est", g, alpha, summary.trr_est[g - 1][a_idx]))
    for g in range(1, k0 + 1):
        for a_idx, alpha in enumerate(summary.alpha_levels):
            summary_rows.append(("trr_ora", g, alpha, summary.trr_ora[g - 1][a_idx]))
    tabular.write_csv(
        os.path.join(out, "mc_summary.csv"), ["metric", "group", "alpha", "value"], summary_rows
    )
    with open(os.path.join(out, "mc_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary.as_dict(), fh, sort_keys=True, indent=2)
        fh.write("\n")
    print(
        f"mc: R={summary.replications} completed={summary.completed} "
        f"ep_correct={summary.ep_correct:.3f} purity={summary.purity:.4f} "
        f"rmse pre/post/ora = {summary.rmse_pre:.4f}/{summary.rmse_post:.4f}/{summary.rmse_ora:.4f}"
    )
    return 0


def cmd_ingest(args) -> int:
    out = _ensure_outdir(args.out)
    node_ids, times, data = tabular.read_panel(args.raw)
    if args.standardize:
        means = data.mean(axis=1)
        stds = data.std(axis=1)  # divisor T
        flat = np.flatnonzero(stds == 0.0)
        if flat.size:
            raise InputError(
                f"{args.raw}: constant series for node {node_ids[int(flat[0])]!r}; "
                "cannot standardize"
            )
        data = (data - means[:, None]) / stds[:, None]
    tabular.write_panel(os.path.join(out, "panel.csv"), node_ids, data, times=times)
    if args.adjacency:
        ids, w = tabular.read_adjacency(args.adjacency, node_ids)
        net = Network(w)  # validates binary, zero diagonal, no isolated nodes
        tabular.write_matrix(os.path.join(out, "adjacency.csv"), ids, net.w.astype(int))
    print(f"ingested {len(node_ids)} nodes x {data.shape[1]} times -> {out}/panel.csv")
    return 0


def cmd_test(args) -> int:
    cfg = _build_config(args)
    out = _ensure_outdir(args.out)
    node_ids, panel, net = _load_inputs(args.panel, args.adjacency)
    membership = tabular.read_groups(args.groups, node_ids)
    k = int(membership.max())
    partition = GroupStructure(k=k, membership=membership)
    rows = []
    for g in range(1, k + 1):
        res = run_test(panel, net, partition, g, h3=cfg.h3)
        rows.append((res.group, res.q_raw, res.q_std, res.p_value, res.h3, res.n_group))
        print(
            f"group {g}: q_std={res.q_std:.4f} p={res.p_value:.4g} "
            f"h3={res.h3:.4f} |G|={res.n_group}"
        )
    tabular.write_csv(
        os.path.join(out, "tests.csv"),
        ["group", "q_raw", "q_std", "p_value", "h3", "n_group"],
        rows,
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netvar",
        description="Grouped time-varying network VAR: simulate, estimate, test.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int, default=None, help="master RNG seed")
        p.add_argument("--out", required=True, help="output directory")

    p_sim = sub.add_parser("simulate", help="simulate a benchmark panel")
    common(p_sim)
    p_sim.add_argument("--n", type=int, default=None)
    p_sim.add_argument("--t-len", dest="t_len", type=int, default=None)
    p_sim.add_argument("--scenario", choices=("paper", "paper-test"), default=None)

    p_fit = sub.add_parser("fit", help="full estimation pipeline on CSV inputs")
    common(p_fit)
    p_fit.add_argument("--panel", required=True)
    p_fit.add_argument("--adjacency", required=True)
    p_fit.add_argument("--linkage", choices=("single", "complete", "average"), default=None)
    p_fit.add_argument("--kbar", type=int, default=None)
    p_fit.add_argument("--bias-corrected", dest="bias_corrected", action="store_true")

    p_mc = sub.add_parser("mc", help="Monte-Carlo harness")
    common(p_mc)
    p_mc.add_argument("--replications", type=int, default=None)
    p_mc.add_argument("--threads", type=int, default=None)
    p_mc.add_argument("--scenario", choices=("paper", "paper-test"), default=None)
    p_mc.add_argument("--linkage", choices=("single", "complete", "average"), default=None)
    p_mc.add_argument("--kbar", type=int, default=None)
    p_mc.add_argument("--bias-corrected", dest="bias_corrected", action="store_true")

    p_ing = sub.add_parser("ingest", help="standardize a raw panel CSV")
    p_ing.add_argument("--raw", required=True)
    p_ing.add_argument("--adjacency", default=None)
    p_ing.add_argument("--out", required=True)
    p_ing.add_argument(
        "--no-standardize", dest="standardize", action="store_false", default=True
    )

    p_test = sub.add_parser("test", help="specification test on a supplied partition")
    common(p_test)
    p_test.add_argument("--panel", required=True)
    p_test.add_argument("--adjacency", required=True)
    p_test.add_argument("--groups", required=True)

    return parser


_HANDLERS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "mc": cmd_mc,
    "ingest": cmd_ingest,
    "test": cmd_test,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _HANDLERS[args.command](args)
    except InstabilityError as exc:
        print(f"error (instability): {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except (InsufficientLocalDataError, SingularDesignError, DegenerateResidualsError) as exc:
        print(f"error (numerical): {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, GenerationFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NetvarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
