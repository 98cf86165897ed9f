"""Command line interface: ``fit``, ``detect``, ``simulate`` and ``benchmark``.

Every subcommand takes ``--config <path>`` (a flat ``key = value`` file) and
``--out-dir <path>``. Exit status is 0 on success, 1 on a runtime or
numerical failure and 2 on invalid input or configuration.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import itertools
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .basis import TimeWindow, gamma_values, time_denormalize, time_normalize
from .detection import NONE_REJECTED, decide, select_eta
from .estimation import ObservationSet, OptimizerConfig, default_bic_grid, select_model
from .exceptions import ConfigError, DomainError, GGSPError, InvalidInputError
from .graph import Graph, build_knn_graph, graph_fourier_basis, graph_from_edges, laplacian, ring_graph
from .model import UNIFORM, lfdr
from .simulation import (
    DEFAULT_ALPHAS,
    ScenarioConfig,
    generate_observations,
    random_xi,
    run_benchmark,
    trial_seed,
)

logger = logging.getLogger("ggsp_mht")

REQ = io.REQUIRED

OPTIMIZER_KEYS = {
    "box_bound": (io.parse_float, 10.0),
    "step_init": (io.parse_float, 1.0),
    "backtrack": (io.parse_float, 0.5),
    "armijo_c": (io.parse_float, 1e-4),
    "max_iters": (io.parse_int, 500),
    "grad_tol": (io.parse_float, 1e-6),
    "restarts": (io.parse_int, 5),
}

FIT_SCHEMA = {
    "nodes": (io.parse_str, REQ),
    "edges": (io.parse_str, None),
    "k": (io.parse_int, 3),
    "observations": (io.parse_str, REQ),
    "t_start": (io.parse_float, None),
    "t_end": (io.parse_float, None),
    "null_density": (io.parse_str, None),
    "bic_k1": (io.parse_int_list, None),
    "bic_k2": (io.parse_int_list, [1, 3, 5, 7, 9]),
    "seed": (io.parse_int, 0),
    **OPTIMIZER_KEYS,
}

DETECT_SCHEMA = {
    "fit_report": (io.parse_str, REQ),
    "observations": (io.parse_str, REQ),
    "alpha": (io.parse_float, 0.1),
}

SCENARIO_SCHEMA = {
    "graph": (io.parse_str, "ring"),
    "n": (io.parse_int, 16),
    "nodes": (io.parse_str, None),
    "edges": (io.parse_str, None),
    "k": (io.parse_int, 3),
    "T": (io.parse_int, 60),
    "t_start": (io.parse_float, 0.0),
    "t_end": (io.parse_float, None),
    "true_k1": (io.parse_int, 2),
    "true_k2": (io.parse_int, 3),
    "xi": (io.parse_float_list, None),
    "xi_scale": (io.parse_float, 0.5),
    "null_density": (io.parse_str, None),
    "sampling": (io.parse_str, "grid"),
    "n_samples": (io.parse_int, None),
    "alphas": (io.parse_float_list, list(DEFAULT_ALPHAS)),
    "trials": (io.parse_int, 20),
    "bic_k1": (io.parse_int_list, None),
    "bic_k2": (io.parse_int_list, [1, 3, 5, 7, 9]),
    "fit_k1": (io.parse_int, None),
    "fit_k2": (io.parse_int, None),
    **OPTIMIZER_KEYS,
}

SIMULATE_SCHEMA = {**SCENARIO_SCHEMA, "seed": (io.parse_int, 0)}
BENCHMARK_SCHEMA = {**SCENARIO_SCHEMA, "seed": (io.parse_int, REQ)}


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _optimizer(cfg):
    return OptimizerConfig(
        step_init=cfg["step_init"], backtrack=cfg["backtrack"], armijo_c=cfg["armijo_c"],
        max_iters=cfg["max_iters"], grad_tol=cfg["grad_tol"], restarts=cfg["restarts"],
    )


def _null(base, cfg):
    path = io.resolve(base, cfg["null_density"])
    return UNIFORM if path is None else io.read_null_table(path)


def _load_graph(base, cfg):
    ids, coords = io.read_nodes(io.resolve(base, cfg["nodes"]))
    if cfg["edges"]:
        edges = io.read_edges(io.resolve(base, cfg["edges"]), ids)
        return graph_from_edges(edges, ids)
    return build_knn_graph(coords, cfg["k"], vertex_ids=ids)


def _bic_grid(cfg, n):
    if cfg["bic_k1"] is None:
        k1s = sorted({k1 for k1, _ in default_bic_grid(n)})
    else:
        k1s = cfg["bic_k1"]
    return list(itertools.product(k1s, cfg["bic_k2"]))


def _echo(cfg):
    return {k: v for k, v in cfg.items() if v is not None}


def cmd_fit(config: Path, out_dir: Path) -> int:
    cfg = io.read_config(config, FIT_SCHEMA)
    base = config.parent
    graph = _load_graph(base, cfg)
    basis = graph_fourier_basis(laplacian(graph))
    data = io.read_observations(io.resolve(base, cfg["observations"]), graph.vertex_ids)
    t_start = cfg["t_start"] if cfg["t_start"] is not None else float(data["times"].min())
    t_end = cfg["t_end"] if cfg["t_end"] is not None else float(data["times"].max())
    window = TimeWindow(t_start, t_end)
    obs = ObservationSet(data["vertices"], time_normalize(data["times"], window), data["pvalues"])
    null = _null(base, cfg)
    grid = _bic_grid(cfg, graph.n_vertices)

    best, table = select_model(obs, basis, grid, box_bound=cfg["box_bound"],
                               config=_optimizer(cfg), seed=cfg["seed"])
    for row in table:
        if row["bic"] is not None and not row["converged"]:
            logger.warning("fit (K1=%d, K2=%d) stopped before convergence", row["K1"], row["K2"])
    report = {
        "format": "ggsp-mht-fit/1",
        "created_utc": _now(),
        "vertex_ids": list(graph.vertex_ids),
        "graph_connected": graph.connected,
        "K1": best.K1,
        "K2": best.K2,
        "xi": best.xi.tolist(),
        "phi": basis.eigenvectors[:, : best.K1].tolist(),
        "eigenvalues": basis.eigenvalues[: best.K1].tolist(),
        "log_likelihood": best.log_likelihood,
        "bic": next(r["bic"] for r in table if (r["K1"], r["K2"]) == (best.K1, best.K2)),
        "iterations": best.iterations,
        "converged": best.converged,
        "n_samples": obs.M,
        "box_bound": cfg["box_bound"],
        "window": {"t_start": window.t_start, "t_end": window.t_end},
        "null_density": io.null_to_json(null),
        "bic_grid": [list(c) for c in grid],
        "bic_table": table,
        "seed": cfg["seed"],
        "config": _echo(cfg),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_json(out_dir / "fit_report.json", report)
    io.write_table(out_dir / "bic_table.csv",
                   ["K1", "K2", "log_likelihood", "bic", "converged", "error"], table)
    print(f"selected K1={best.K1} K2={best.K2} log-likelihood={best.log_likelihood:.6g}")
    return 0


def cmd_detect(config: Path, out_dir: Path) -> int:
    cfg = io.read_config(config, DETECT_SCHEMA)
    if not 0 < cfg["alpha"] < 1:
        raise ConfigError(f"{config}: alpha must lie in (0, 1), got {cfg['alpha']}")
    base = config.parent
    report = io.read_json(io.resolve(base, cfg["fit_report"]))
    try:
        ids = report["vertex_ids"]
        xi = np.array(report["xi"], dtype=float)
        phi = np.array(report["phi"], dtype=float)
        window = TimeWindow(report["window"]["t_start"], report["window"]["t_end"])
        null = io.null_from_json(report["null_density"])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"fit report is missing field {exc}") from None
    data = io.read_observations(io.resolve(base, cfg["observations"]), ids)
    try:
        t = time_normalize(data["times"], window)
    except DomainError as exc:
        raise InvalidInputError(f"observations: {exc}") from None
    obs = ObservationSet(data["vertices"], t, data["pvalues"])
    gam = gamma_values(xi, obs.vertices, obs.times, phi)
    lf = np.atleast_1d(lfdr(obs.pvalues, gam, null))
    eta = select_eta(lf, cfg["alpha"])
    dec = decide(lf, eta)

    out_dir.mkdir(parents=True, exist_ok=True)
    rows = [
        {"vertex_id": r["vertex_id"], "time": r["time"], "p_value": r["p_value"],
         "lfdr": float(lf[m]), "decision": int(dec[m])}
        for m, r in enumerate(data["rows"])
    ]
    io.write_table(out_dir / "decisions.csv",
                   ["vertex_id", "time", "p_value", "lfdr", "decision"], rows)
    summary = {
        "created_utc": _now(),
        "alpha": cfg["alpha"],
        "eta_hat": None if eta is NONE_REJECTED else eta,
        "none_rejected": eta is NONE_REJECTED,
        "n_rejected": int(dec.sum()),
        "n_samples": obs.M,
        "fit_report": cfg["fit_report"],
    }
    io.write_json(out_dir / "detection_summary.json", summary)
    print(f"rejected {int(dec.sum())} of {obs.M} hypotheses at alpha={cfg['alpha']}")
    return 0


def _ring_coords(n):
    ang = 2 * math.pi * np.arange(n) / n
    return np.column_stack([np.sin(ang), np.cos(ang)])


def _scenario(config: Path, cfg) -> tuple:
    base = config.parent
    kind = cfg["graph"]
    if kind == "ring":
        graph = ring_graph(cfg["n"])
        ids = [str(i) for i in range(cfg["n"])]
        coords = _ring_coords(cfg["n"])
        graph = Graph(graph.adjacency, vertex_ids=ids)
    elif kind in ("knn", "edges"):
        if cfg["nodes"] is None:
            raise ConfigError(f"{config}: missing required key 'nodes' for graph = {kind}")
        if kind == "edges" and cfg["edges"] is None:
            raise ConfigError(f"{config}: missing required key 'edges' for graph = edges")
        if kind == "knn":
            cfg = {**cfg, "edges": None}
        ids, coords = io.read_nodes(io.resolve(base, cfg["nodes"]))
        graph = _load_graph(base, cfg)
    else:
        raise ConfigError(f"{config}: graph must be ring, knn or edges, got {kind!r}")

    k1, k2 = cfg["true_k1"], cfg["true_k2"]
    if cfg["xi"] is not None:
        if len(cfg["xi"]) != k1 * k2:
            raise ConfigError(f"{config}: 'xi' needs true_k1*true_k2 = {k1 * k2} values")
        xi = np.array(cfg["xi"]).reshape(k1, k2)
    else:
        xi = random_xi(k1, k2, cfg["box_bound"], cfg["seed"], cfg["xi_scale"])
    if (cfg["fit_k1"] is None) != (cfg["fit_k2"] is None):
        raise ConfigError(f"{config}: set both fit_k1 and fit_k2, or neither")
    bandwidth = None if cfg["fit_k1"] is None else (cfg["fit_k1"], cfg["fit_k2"])
    scenario = ScenarioConfig(
        graph=graph,
        true_xi=xi,
        T=cfg["T"],
        box_bound=cfg["box_bound"],
        null=_null(base, cfg),
        alphas=tuple(cfg["alphas"]),
        trials=cfg["trials"],
        seed=cfg["seed"],
        bic_grid=_bic_grid(cfg, graph.n_vertices),
        bandwidth=bandwidth,
        optimizer=_optimizer(cfg),
        sampling=cfg["sampling"],
        n_samples=cfg["n_samples"],
    )
    return scenario, coords


def cmd_simulate(config: Path, out_dir: Path) -> int:
    cfg = io.read_config(config, SIMULATE_SCHEMA)
    scenario, coords = _scenario(config, cfg)
    window = TimeWindow(cfg["t_start"], cfg["t_end"] if cfg["t_end"] is not None
                        else cfg["t_start"] + cfg["T"])
    seed = trial_seed(scenario.seed, 0)
    obs = generate_observations(scenario, seed)
    ids = list(scenario.graph.vertex_ids)

    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_nodes(out_dir / "nodes.csv", ids, coords)
    io.write_edges(out_dir / "edges.csv", scenario.graph)
    io.write_observations(out_dir / "observations.csv", ids, obs, time_denormalize(obs.times, window))
    io.write_json(out_dir / "truth.json", {
        "created_utc": _now(),
        "seed": scenario.seed,
        "trial_seed": seed,
        "K1": int(scenario.true_xi.shape[0]),
        "K2": int(scenario.true_xi.shape[1]),
        "xi": scenario.true_xi.tolist(),
        "n_alternatives": int(obs.theta.sum()),
        "n_samples": obs.M,
        "window": {"t_start": window.t_start, "t_end": window.t_end},
        "config": _echo(cfg),
    })
    fit_cfg = [
        "nodes = nodes.csv",
        "edges = edges.csv",
        "observations = observations.csv",
        f"t_start = {window.t_start!r}",
        f"t_end = {window.t_end!r}",
        f"box_bound = {cfg['box_bound']!r}",
        f"seed = {cfg['seed']}",
    ]
    (out_dir / "fit.cfg").write_text("\n".join(fit_cfg) + "\n")
    print(f"wrote {obs.M} observations ({int(obs.theta.sum())} alternatives) to {out_dir}")
    return 0


def cmd_benchmark(config: Path, out_dir: Path) -> int:
    cfg = io.read_config(config, BENCHMARK_SCHEMA)
    scenario, _ = _scenario(config, cfg)
    result = run_benchmark(scenario)
    out_dir.mkdir(parents=True, exist_ok=True)
    io.write_table(out_dir / "benchmark.csv",
                   ["alpha", "method", "mean_fdr", "se_fdr", "mean_power", "se_power", "trials_used"],
                   result.rows)
    io.write_json(out_dir / "manifest.json", {
        "created_utc": _now(),
        "config": _echo(cfg),
        "true_xi": scenario.true_xi.tolist(),
        "seed_rule": "splitmix64(master_seed), trial i uses output i+1",
        "trial_seeds": [t["seed"] for t in result.trials],
        "selected_bandwidths": [t["K"] and list(t["K"]) for t in result.trials],
        "failures": result.failures,
    })
    if result.failures:
        logger.warning("%d plug-in fits failed and were excluded", len(result.failures))
    print(f"wrote {len(result.rows)} rows to {out_dir / 'benchmark.csv'}")
    return 0


COMMANDS = {
    "fit": cmd_fit,
    "detect": cmd_detect,
    "simulate": cmd_simulate,
    "benchmark": cmd_benchmark,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="ggsp-mht", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, type=Path)
        p.add_argument("--out-dir", default=Path("."), type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args.config, args.out_dir)
    except (InvalidInputError, DomainError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GGSPError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
