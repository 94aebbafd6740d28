"""Command-line runner: ``contact-lab <command> [lemma] [--key value ...]``.

Every command writes ``<out>.csv`` whose header comments carry the tool
version, the full config echo and the seed. Exit status is 0 on success,
2 when a verdict comes back Violated and 1 on any error, with a single
``error: <Kind>: <message>`` line on standard error.
"""

from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from contact_lab import __version__, exact
from contact_lab import experiments as ex
from contact_lab.config import COMMANDS, LEMMAS, SCHEMA, ConfigError, RunConfig, parse_config
from contact_lab.errors import ContactLabError
from contact_lab.graphs import (
    BuildBudget,
    Graph,
    Line,
    build_interval,
    build_star,
    build_sv_tree,
    estar,
    format_edgelist,
    split_at_estar,
)
from contact_lab.randomness import EventLog, replica_seed
from contact_lab.simulate import StopRule, run_direct, run_from_log
from contact_lab.svg import format_trace, render_space_time

THREADS_ENV = "CONTACT_LAB_THREADS"


# -- helpers -----------------------------------------------------------------


def build_graph(cfg: RunConfig) -> Graph:
    family = cfg["graph"]
    if family == "interval":
        return build_interval(cfg["n"], cfg.get("pad", 0))
    if family == "star":
        return build_star(cfg["n"])
    g = build_sv_tree(cfg["i_max"], BuildBudget(cfg["budget"]))
    if family == "sv_tree":
        return g
    minus, plus = split_at_estar(g)
    return plus if family == "sv_plus" else minus


def parse_init(spec: Optional[str], g: Graph, family: str) -> tuple[int, ...]:
    """``all``, ``hub`` (star centre) or ``line:z1,z2,...``.

    ``None`` means all vertices on stars and intervals, line position 1 on
    the tree families.
    """
    if spec is None:
        spec = "all" if family in ("star", "interval") else "line:1"
    if spec == "all":
        return tuple(range(len(g)))
    if spec == "hub":
        if family != "star":
            raise ValueError("init = hub only applies to the star family")
        return (0,)
    if spec.startswith("line:"):
        zs = [int(x) for x in spec[5:].split(",") if x.strip()]
        if not zs:
            raise ValueError("init = line: needs at least one position")
        return tuple(sorted({g.vertex_of(Line(z)) for z in zs}))
    raise ValueError(f"bad init spec {spec!r}")


def _init_for(cfg: RunConfig, g: Graph) -> tuple[int, ...]:
    if cfg.get("init") is None and cfg["graph"] == "interval":
        # padding vertices start healthy
        return tuple(g.vertex_of(Line(z)) for z in range(1, cfg["n"] + 1))
    return parse_init(cfg.get("init"), g, cfg["graph"])


def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x)


def header(cfg: RunConfig, extra: Sequence[str] = ()) -> str:
    lines = [f"# contact_lab {__version__}"]
    lines += [f"# {item}" for item in cfg.echo()]
    lines += [f"# {item}" for item in extra]
    return "\n".join(lines) + "\n"


def write_csv(cfg: RunConfig, columns: Sequence[str], rows: Sequence[Sequence[Any]], extra: Sequence[str] = ()) -> Path:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(x) for x in row])
    path = Path(cfg["out"] + ".csv")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(header(cfg, extra) + buf.getvalue())
    return path


def _write_text(cfg: RunConfig, suffix: str, text: str) -> Path:
    path = Path(cfg["out"] + suffix)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


# -- commands ----------------------------------------------------------------


def cmd_build(cfg: RunConfig) -> int:
    g = build_graph(cfg)
    _write_text(cfg, ".edges", format_edgelist(g))
    n_edges = sum(g.degree(v) for v in range(len(g))) // 2
    write_csv(cfg, ["graph", "vertices", "edges", "max_degree"], [[cfg["graph"], len(g), n_edges, g.max_degree()]])
    return 0


def cmd_simulate(cfg: RunConfig) -> int:
    g = build_graph(cfg)
    lam = cfg["lambda"]
    init = _init_for(cfg, g)
    stop = StopRule(horizon=cfg["horizon"], event_budget=cfg["budget"])
    edge = estar(g) if cfg["graph"] == "sv_tree" else None
    trace: Optional[list] = [] if cfg["trace"] else None
    if cfg["method"] == "replay":
        log = EventLog(g, lam if lam > 0 else 1.0, cfg["horizon"], cfg["seed"])
        out = run_from_log(g, log, lam, init, stop, designated_edge=edge, trace=trace)
    else:
        out = run_direct(g, lam, init, stop, cfg["seed"], designated_edge=edge, trace=trace)
    columns = ["stop_reason", "stop_time", "extinct", "peak_infected", "total_events", "estar_crossings"]
    write_csv(cfg, columns, [[out.stop_reason, out.stop_time, out.extinct, out.peak_infected,
                              out.total_events, out.estar_crossings]])
    if trace is not None:
        _write_text(cfg, ".trace", format_trace(trace))
        _write_text(cfg, ".svg", render_space_time(g, trace, out.stop_time))
    return 0


def cmd_estimate(cfg: RunConfig) -> int:
    g = build_graph(cfg)
    lam, horizon = cfg["lambda"], cfg["horizon"]
    init = _init_for(cfg, g)
    trial = ex.SurvivalTrial(g, lam, init, horizon)
    est = ex.estimate_event(trial, cfg["n_runs"], cfg["seed"], cfg["threads"], cfg["ci"])
    oracle = None
    if len(g) <= exact.DEFAULT_CAP:
        oracle = exact.ctmc_survival(g, lam, init, [horizon]).probabilities[0]
    columns = ["graph", "vertices", "lambda", "horizon", "n_runs", "p_hat", "ci_low", "ci_high", "oracle"]
    write_csv(cfg, columns, [[cfg["graph"], len(g), lam, horizon, est.n_runs, est.p_hat, est.ci_low, est.ci_high, oracle]])
    return 0


def cmd_sweep(cfg: RunConfig) -> int:
    """Survival curves per lambda; one batch of extinction times serves all t."""
    g = build_graph(cfg)
    init = _init_for(cfg, g)
    times = sorted(cfg["times"])
    horizon = max(times)
    n_runs = cfg["n_runs"]
    rows = []
    for k, lam in enumerate(cfg["lambdas"]):
        seed = replica_seed(cfg["seed"], k)
        ext = ex.run_trials(ex.ExtinctionTimeTrial(g, lam, init, horizon), n_runs, seed, cfg["threads"]) if horizon > 0 else [0.0] * n_runs
        for t in times:
            alive = sum(1 for x in ext if x > t) if t > 0 else n_runs
            est = ex.make_estimate(alive, n_runs, seed, cfg["ci"])
            rows.append([lam, t, n_runs, alive, est.p_hat, est.ci_low, est.ci_high])
    write_csv(cfg, ["lambda", "t", "n_runs", "survivors", "p_hat", "ci_low", "ci_high"], rows)
    return 0


def cmd_oracle(cfg: RunConfig) -> int:
    g = build_graph(cfg)
    init = _init_for(cfg, g)
    curve = exact.ctmc_survival(g, cfg["lambda"], init, cfg["times"])
    write_csv(cfg, ["time", "probability"], list(zip(curve.times, curve.probabilities)))
    return 0


def cmd_schedule(cfg: RunConfig) -> int:
    s = ex.compute_proof_schedule(cfg["i"], cfg["lambda"])
    columns = ["i", "lambda", "even_leaf_sum", "log_tau", "t1", "L", "hub_gap"]
    write_csv(cfg, columns, [[s.i, s.lam, s.even_leaf_sum, s.log_tau, s.t1, s.L, s.hub_gap]])
    return 0


def _verdict_status(verdicts: Sequence[ex.Verdict]) -> int:
    return 2 if any(v.kind == ex.VerdictKind.VIOLATED for v in verdicts) else 0


def _estimate_cells(est: ex.Estimate) -> list:
    return [est.n_runs, est.p_hat, est.ci_low, est.ci_high]


def cmd_verify(cfg: RunConfig) -> int:
    lemma = cfg["lemma"]
    threads, method, seed = cfg["threads"], cfg["ci"], cfg["seed"]
    est_cols = ["n_runs", "p_hat", "ci_low", "ci_high"]

    if lemma == "rw_interval":
        pad = cfg.get("pad")
        v = ex.verify_rw_interval(cfg["n"], cfg["lambda"], cfg["n_runs"], seed, threads, pad, method)
        write_csv(cfg, ["n", "lambda", *est_cols, "bound", "verdict"],
                  [[cfg["n"], cfg["lambda"], *_estimate_cells(v.estimate), v.bound_value, v.kind.value]],
                  [f"pad={v.params['pad']}", f"oracle={fmt(v.oracle)}"])
        return _verdict_status([v])

    if lemma == "biased_walk":
        v = ex.verify_biased_walk(cfg["lambda"], cfg["n_runs"], seed, threads)
        write_csv(cfg, ["lambda", "depth", *est_cols, "bound", "verdict"],
                  [[cfg["lambda"], v.params["depth"], *_estimate_cells(v.estimate), v.bound_value, v.kind.value]])
        return _verdict_status([v])

    if lemma == "star_extinction":
        v = ex.verify_star_extinction(cfg["n"], cfg["lambda"], cfg["n_runs"], seed, threads, method)
        write_csv(cfg, ["n", "lambda", "t1", *est_cols, "bound", "oracle", "verdict"],
                  [[cfg["n"], cfg["lambda"], v.params["t1"], *_estimate_cells(v.estimate), v.bound_value,
                    v.oracle, v.kind.value]])
        return _verdict_status([v])

    if lemma == "tree_extinction":
        g = build_graph(cfg) if "graph" in cfg.values else build_interval(cfg["n"])
        vs = ex.verify_tree_extinction(g, cfg["lambda"], cfg["times"], cfg["n_runs"], seed, threads, method)
        rows = [[len(g), cfg["lambda"], v.params["t"], *_estimate_cells(v.estimate), v.bound_value, v.oracle, v.kind.value]
                for v in vs]
        write_csv(cfg, ["size", "lambda", "t", *est_cols, "bound", "oracle", "verdict"], rows)
        return _verdict_status(vs)

    if lemma == "path_transmission":
        v = ex.verify_path_transmission(cfg["length"], cfg["lambda"], cfg["t"], cfg["n_runs"], seed, threads, method)
        write_csv(cfg, ["length", "lambda", "t", *est_cols, "bound", "oracle", "verdict"],
                  [[cfg["length"], cfg["lambda"], cfg["t"], *_estimate_cells(v.estimate), v.bound_value,
                    v.oracle, v.kind.value]])
        return _verdict_status([v])

    if lemma == "star_survival":
        rep = ex.star_survival_scaling(cfg["lambdas"], cfg["sizes"], cfg["n_runs"], seed, cfg["horizon"],
                                       cfg["include_hub"], threads)
        rows = [[c.lam, c.size, c.hub_infected, c.n_initial_leaves, c.x, c.regime, c.median_time,
                 c.censored_fraction] for c in rep.cells]
        columns = ["lambda", "size", "hub_infected", "initial_leaves", "x", "regime", "median_time",
                   "censored_fraction"]
        write_csv(cfg, columns, rows, [f"slope={fmt(rep.slope)}", f"increasing_in_size={fmt(rep.all_increasing)}"])
        return 0

    if lemma == "relay":
        g = build_sv_tree(cfg["i_max"], BuildBudget(cfg["budget"]))
        ests = ex.relay_experiment(g, cfg["lambda"], cfg["hops"], cfg["n_runs"], seed, cfg["horizon"], threads)
        rows = [[hop, cfg["lambda"], *_estimate_cells(e)] for hop, e in enumerate(ests, start=1)]
        write_csv(cfg, ["hop", "lambda", *est_cols], rows)
        return 0

    if lemma == "edge_removal":
        rep = ex.edge_removal_experiment(cfg["i_max"], cfg["lambda"], cfg["horizon"], cfg["n_runs"], seed,
                                         BuildBudget(cfg["budget"]), threads)
        columns = ["i_max", "lambda", "horizon", "n_runs", "survival_full", "survival_full_ci_low",
                   "survival_full_ci_high", "survival_plus", "survival_plus_ci_low", "survival_plus_ci_high",
                   "median_time_full", "median_time_plus", "coupling_violations", "median_crossings"]
        f, p = rep.survival_full, rep.survival_plus
        write_csv(cfg, columns, [[rep.i_max, rep.lam, rep.horizon, f.n_runs, f.p_hat, f.ci_low, f.ci_high,
                                  p.p_hat, p.ci_low, p.ci_high, rep.time_quantiles_full[2],
                                  rep.time_quantiles_plus[2], rep.coupling_violations, rep.median_crossings]])
        return 2 if rep.coupling_violations else 0

    raise ValueError(f"unknown lemma {lemma!r}")


HANDLERS = {
    "build": cmd_build,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
    "schedule": cmd_schedule,
}


def run(cfg: RunConfig) -> int:
    """Execute one validated config; returns the process exit status."""
    try:
        return HANDLERS[cfg.command](cfg)
    except (ContactLabError, ConfigError, ValueError, OSError) as exc:
        report_error(exc)
        return 1


def report_error(exc: BaseException) -> None:
    msg = " ".join(str(exc).split())
    print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)


# -- argument handling --------------------------------------------------------


def _overrides(extra: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    k = 0
    while k < len(extra):
        tok = extra[k]
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key, eq, value = tok[2:].partition("=")
        key = key.replace("-", "_")
        if not eq:
            if k + 1 >= len(extra):
                raise ConfigError(f"flag --{key} needs a value")
            value = extra[k + 1]
            k += 1
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        out[key] = value
        k += 1
    return out


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2, which the exit contract reserves for Violated
    def error(self, message: str):
        raise ConfigError(message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="contact-lab", description=__doc__.splitlines()[0],
                                epilog="Any config key can also be given as --key value.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("lemma", nargs="?", choices=LEMMAS)
    p.add_argument("--config", type=Path)
    p.add_argument("--seed")
    p.add_argument("--out")
    p.add_argument("--threads")
    p.add_argument("--budget")
    p.add_argument("--version", action="version", version=f"contact-lab {__version__}")
    return p


def config_from_args(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args, extra = make_parser().parse_known_args(argv)
    overrides = _overrides(extra)
    for key in ("seed", "out", "threads", "budget"):
        val = getattr(args, key)
        if val is not None:
            overrides[key] = val
    if args.lemma is not None:
        overrides["lemma"] = args.lemma
    text = args.config.read_text() if args.config else ""
    if "threads" not in overrides and os.environ.get(THREADS_ENV):
        if "threads" not in parse_config(text, args.command, overrides).explicit:
            overrides["threads"] = os.environ[THREADS_ENV]
    return parse_config(text, args.command, overrides)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        cfg = config_from_args(argv)
    except (ConfigError, ContactLabError, OSError, ValueError) as exc:
        report_error(exc)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
