"""Command-line entry point ``pairrank``.

Every subcommand accepts ``--config FILE``: a flat ``key = value`` file whose
keys are the long option names (dashes or underscores).  Options given on
the command line take precedence over the file.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace

import numpy as np

from . import analysis, dataio, estimators, experiments
from .errors import (
    ConfigurationError,
    DataError,
    DisconnectedGraphError,
    DomainError,
    GraphGenerationError,
    NumericalError,
)
from .models import PreferenceModel

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("pairrank")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse would exit with status 2
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


def _list(kind):
    def parse(text: str):
        parts = [p for p in text.replace(",", " ").split() if p]
        if not parts:
            raise argparse.ArgumentTypeError("empty list")
        return [kind(p) for p in parts]

    return parse


def _common(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("global options")
    g.add_argument("--config", help="flat key=value file with option defaults")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", help="output CSV path (default: stdout)")
    g.add_argument("--model", choices=("thurstone", "btl"), default="thurstone")
    g.add_argument("--sigma", type=float, default=0.4, help="Thurstone noise scale")
    g.add_argument("--chi", type=float, default=estimators.DEFAULT_CHI, help="probability clamp")
    g.add_argument("-v", "--verbose", action="store_true")


def _experiment_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=50, help="number of objects")
    p.add_argument("--qualities", choices=("equal", "uniform"), default="equal")
    p.add_argument("--graph", default="regular", help="regular, complete, star, hub, wheel, path or file:<path>")
    p.add_argument("--degree", type=int, default=6)
    p.add_argument("--graph-seed", type=int, help="fix one graph for all trials")
    p.add_argument("--budgets", type=_list(float), help="per-object budgets C/N")
    p.add_argument("--w", type=int, help="comparisons per edge (instead of --budgets)")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--algos", type=_list(str), default=["ls", "wls", "ml"])
    p.add_argument("--eps", type=float, default=0.04)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--reference", type=int, help="1-based reference object (default: last)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--trials-out", help="also write per-trial metrics to this CSV")


def build_parser() -> _Parser:
    parser = _Parser(prog="pairrank", description="Ranking from noisy pairwise comparisons.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("simulate", help="error-probability curves on synthetic data")
    _common(p)
    _experiment_opts(p)

    p = sub.add_parser("adaptive", help="two-stage scheme curves on synthetic data")
    _common(p)
    _experiment_opts(p)
    p.add_argument("--rho2", type=int, default=6, help="second-stage neighbours per object")
    p.add_argument("--stage2-w", type=int, help="comparisons per second-stage edge (default: same as stage 1)")
    p.add_argument("--fresh-stage2", action="store_true", help="do not pool stage-1 counts on shared edges")
    p.add_argument("--baseline", action="store_true", help="also emit the single-stage curve")
    p.set_defaults(algos=["wls"])

    p = sub.add_parser("estimate", help="estimate qualities from a counts CSV")
    _common(p)
    p.add_argument("--counts", required=True, help="CSV with header i,j,w,k")
    p.add_argument("--n", type=int, help="number of objects (default: largest index)")
    p.add_argument("--algo", choices=estimators.ALGORITHMS, default="wls")
    p.add_argument("--reference", type=int, help="1-based reference object (default: last)")
    p.add_argument("--max-iter", type=int, default=100, help="ML Newton iterations")
    p.add_argument("--tol", type=float, default=1e-8, help="ML gradient tolerance")

    p = sub.add_parser("analyze", help="random-walk diagnostics of a graph")
    _common(p)
    p.add_argument("--graph", required=True, help="graph CSV with header i,j[,w_ij]")
    p.add_argument("--n", type=int)
    p.add_argument("--reference", type=int, help="1-based reference object (default: last)")
    p.add_argument("--w", type=float, default=1.0, help="comparisons per edge for the bound")
    p.add_argument("--c", type=float, default=1.0, help="bound constant (unscaled shape when 1)")

    p = sub.add_parser("ingest", help="turn match results into a counts CSV")
    _common(p)
    p.add_argument("--matches", required=True, help="CSV with header home,away,home_goals,away_goals")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--teams-out", help="write the team of each object index to this file")

    p = sub.add_parser("rank-real", help="rank teams from match results against final standings")
    _common(p)
    p.add_argument("--matches", required=True)
    p.add_argument("--standings", required=True, help="one team per line, best first")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--algo", choices=estimators.ALGORITHMS, default="wls")
    return parser


# ---------------------------------------------------------------------------
# config files


def read_config(path: str) -> dict[str, str]:
    out: dict[str, str] = {}
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{line_no}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def _apply_config(sub: _Parser, path: str) -> None:
    """Install the file's values as defaults of the subcommand parser."""
    values = read_config(path)
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, text in values.items():
        if key in ("config", "help") or key not in actions:
            raise UsageError(f"{path}: unknown option {key!r}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            if text.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"{path}: {key} expects true or false")
            defaults[key] = text.lower() in ("true", "1", "yes")
            continue
        try:
            val = act.type(text) if act.type else text
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"{path}: bad value for {key}: {exc}") from None
        if act.choices is not None and val not in act.choices:
            raise UsageError(f"{path}: {key} must be one of {', '.join(map(str, act.choices))}")
        defaults[key] = val
    sub.set_defaults(**defaults)
    for act in sub._actions:
        if act.required and act.dest in defaults:
            act.required = False


# ---------------------------------------------------------------------------
# commands


def _model(ns) -> PreferenceModel:
    return PreferenceModel.from_name(ns.model, ns.sigma)


def _reference(ns, n: int) -> int | None:
    if ns.reference is None:
        return None
    if not 1 <= ns.reference <= n:
        raise ConfigurationError(f"reference must lie in 1..{n}")
    return ns.reference - 1


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _experiment_config(ns, **extra) -> experiments.ExperimentConfig:
    if (ns.budgets is None) == (ns.w is None):
        raise ConfigurationError("give exactly one of --budgets and --w")
    return experiments.ExperimentConfig(
        n=ns.n,
        qualities=ns.qualities,
        model=_model(ns),
        graph=ns.graph,
        degree=ns.degree,
        graph_seed=ns.graph_seed,
        budget_per_object=None if ns.budgets is None else ns.budgets[0],
        w_per_edge=ns.w,
        eps=ns.eps,
        delta=ns.delta,
        trials=ns.trials,
        seed=ns.seed,
        algos=tuple(a.lower() for a in ns.algos),
        chi=ns.chi,
        reference=_reference(ns, ns.n),
        **extra,
    )


def _curve(cfg: experiments.ExperimentConfig, ns) -> tuple[list, list]:
    rows: list = []
    if ns.budgets is not None:
        points = experiments.sweep(cfg, ns.budgets, workers=ns.workers, per_trial=rows)
    else:
        results = experiments.run_point(cfg, 0, ns.workers)
        points = experiments.summarize(cfg, results, float("nan"))
        for t, r in enumerate(results):
            for algo, o in r.outcomes.items():
                rows.append((t, algo, r.budget[algo] / cfg.n, int(o.epsilon_error), o.kendall_tau, o.mse_aligned, o.mse_raw))
    return points, rows


def cmd_simulate(ns) -> int:
    cfg = _experiment_config(ns)
    points, rows = _curve(cfg, ns)
    _write(experiments.curve_csv(points), ns.out)
    if ns.trials_out:
        _write(experiments.trials_csv(rows), ns.trials_out)
    return EXIT_OK


def cmd_adaptive(ns) -> int:
    if ns.rho2 < 1:
        raise ConfigurationError("--rho2 must be at least 1")
    cfg = _experiment_config(ns, rho2=ns.rho2, stage2_w=ns.stage2_w, fresh_stage2=ns.fresh_stage2)
    points, rows = _curve(cfg, ns)
    text = experiments.curve_csv(points, suffix="+2stage")
    if ns.baseline:
        base, _ = _curve(replace(cfg, rho2=0, stage2_w=None, fresh_stage2=False), ns)
        text += experiments.curve_csv(base).split("\n", 1)[1]
    _write(text, ns.out)
    if ns.trials_out:
        _write(experiments.trials_csv(rows), ns.trials_out)
    log.info("stage-2 comparisons per edge: %s", "same as stage 1" if ns.stage2_w is None else ns.stage2_w)
    return EXIT_OK


def cmd_estimate(ns) -> int:
    counts = dataio.read_counts(ns.counts, ns.n)
    est = estimators.estimate(
        counts,
        _model(ns),
        ns.algo,
        chi=ns.chi,
        reference=_reference(ns, counts.n),
        ml_options={"max_iter": ns.max_iter, "tol": ns.tol},
    )
    _write(dataio.write_estimate(est), ns.out)
    if ns.algo == "ml" and not est.converged:
        log.error("Newton iterations did not converge (gradient norm %.3g)", est.diagnostics["grad_norm"])
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_analyze(ns) -> int:
    g = dataio.read_graph(ns.graph, ns.n)
    weights = g.budget if g.budget is not None else None
    wa = analysis.walk_analysis(g, weights, _reference(ns, g.n))
    bound = analysis.mse_bound(wa, ns.w, ns.c)
    lines = ["object,theta_row_sum,rho,lambda_c_max,inf_norm_m_inv,rho_inf,mse_bound"]
    sums = wa.theta.sum(axis=1)
    for v in range(g.n):
        lines.append(
            f"{v + 1},{sums[v]:.12g},{wa.rho[v]:.12g},{wa.lambda_c_max:.12g},"
            f"{wa.inf_norm_m_inv:.12g},{wa.rho_inf:.12g},{bound:.12g}"
        )
    _write("\n".join(lines) + "\n", ns.out)
    return EXIT_OK


def _ingest(ns) -> dataio.IngestResult:
    return dataio.matches_to_counts(dataio.load_matches(ns.matches), ns.alpha, ns.beta)


def cmd_ingest(ns) -> int:
    res = _ingest(ns)
    _write(dataio.write_counts(res.counts), ns.out)
    if ns.teams_out:
        _write("".join(f"{t}\n" for t in res.teams), ns.teams_out)
    return EXIT_OK


def cmd_rank_real(ns) -> int:
    res = _ingest(ns)
    standings = dataio.load_standings(ns.standings)
    rr = dataio.rank_real(res.counts, _model(ns), ns.algo, standings, res.teams, chi=ns.chi)
    _write(dataio.write_estimate(rr.estimate, labels=res.teams), ns.out)
    print(f"kendall_tau={rr.kendall_tau}", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "simulate": cmd_simulate,
    "adaptive": cmd_adaptive,
    "estimate": cmd_estimate,
    "analyze": cmd_analyze,
    "ingest": cmd_ingest,
    "rank-real": cmd_rank_real,
}


def _config_path(argv: Sequence[str]) -> tuple[str | None, str | None]:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    return known.command, known.config


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        command, config = _config_path(argv)
        if config and command in COMMANDS:
            sub = parser._subparsers._group_actions[0].choices[command]
            _apply_config(sub, config)
        ns = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
        return COMMANDS[ns.command](ns)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except ConfigurationError as exc:
        print(f"pairrank: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, DomainError, DisconnectedGraphError, OSError) as exc:
        print(f"pairrank: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (NumericalError, GraphGenerationError, np.linalg.LinAlgError) as exc:
        print(f"pairrank: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
