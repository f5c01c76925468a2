"""Monte-Carlo harness for the synthetic experiments.

Every trial draws its randomness from a stream keyed by
``(seed, point index, trial index)``, so results do not depend on the order
in which trials run or on how many worker processes execute them.
"""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import dataio, estimators, graphs, metrics
from .errors import ConfigurationError
from .estimators import ComparisonCounts, QualityEstimate
from .graphs import ComparisonGraph
from .metrics import RankingOutcome
from .models import PreferenceModel


@dataclass(frozen=True)
class ExperimentConfig:
    """One synthetic setting.

    Exactly one of ``budget_per_object`` (``C/N``) and ``w_per_edge`` fixes
    the number of comparisons.  ``rho2 > 0`` switches on the two-stage scheme,
    whose first stage runs on the ``degree``-regular graph.
    """

    n: int = 50
    qualities: str = "equal"
    explicit_q: tuple[float, ...] | None = None
    model: PreferenceModel = field(default_factory=PreferenceModel)
    graph: str = "regular"
    degree: int = 6
    graph_seed: int | None = None
    budget_per_object: float | None = None
    w_per_edge: int | None = None
    eps: float = 0.04
    delta: float = 0.1
    trials: int = 1000
    seed: int = 0
    algos: tuple[str, ...] = ("ls", "wls", "ml")
    chi: float = estimators.DEFAULT_CHI
    reference: int | None = None
    rho2: int = 0
    stage2_w: int | None = None
    fresh_stage2: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ConfigurationError("trials must be at least 1")
        if (self.budget_per_object is None) == (self.w_per_edge is None):
            raise ConfigurationError("set exactly one of budget_per_object and w_per_edge")
        for a in self.algos:
            if a not in estimators.ALGORITHMS:
                raise ConfigurationError(f"unknown algorithm {a!r}")
        if self.qualities not in ("equal", "uniform", "explicit"):
            raise ConfigurationError(f"unknown quality spec {self.qualities!r}")
        if self.qualities == "explicit" and (self.explicit_q is None or len(self.explicit_q) != self.n):
            raise ConfigurationError("explicit qualities need one value per object")

    @property
    def ref(self) -> int:
        return self.n - 1 if self.reference is None else self.reference


@dataclass(frozen=True)
class TrialResult:
    outcomes: dict[str, RankingOutcome]
    budget: dict[str, float]
    w_per_edge: int


@dataclass(frozen=True)
class CurvePoint:
    algo: str
    budget_per_object: float
    error_prob: float
    stderr: float
    mse_aligned: float
    budget_requested: float
    trials: int


def trial_rng(seed: int, point: int, trial: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point, trial)))


def draw_qualities(cfg: ExperimentConfig, rng: np.random.Generator) -> np.ndarray:
    if cfg.qualities == "equal":
        return np.arange(cfg.n) / cfg.n
    if cfg.qualities == "uniform":
        return rng.random(cfg.n)
    return np.asarray(cfg.explicit_q, dtype=float)


def make_graph(cfg: ExperimentConfig, rng: np.random.Generator, degree: int | None = None) -> ComparisonGraph:
    if cfg.graph.startswith("file:"):
        return dataio.read_graph(cfg.graph[5:], cfg.n)
    if cfg.graph_seed is not None:
        rng = np.random.default_rng(cfg.graph_seed)
    return graphs.build_graph(cfg.graph, cfg.n, rng, degree=cfg.degree if degree is None else degree)


def resolve_w(cfg: ExperimentConfig, n_edges: int) -> int:
    """Comparisons per edge: ``floor(C / |E|)`` with ``C = N * budget_per_object``."""
    if cfg.w_per_edge is not None:
        w = int(cfg.w_per_edge)
    else:
        w = math.floor(cfg.budget_per_object * cfg.n / n_edges + 1e-9)
    if w < 1:
        raise ConfigurationError(f"budget resolves to W={w} comparisons per edge")
    return w


def _estimate_all(cfg: ExperimentConfig, counts: ComparisonCounts) -> dict[str, QualityEstimate]:
    out: dict[str, QualityEstimate] = {}
    for algo in cfg.algos:
        if algo == "ml" and "wls" in out:
            est = estimators.ml_estimate(counts, cfg.model, out["wls"], reference=cfg.ref)
        else:
            est = estimators.estimate(counts, cfg.model, algo, chi=cfg.chi, reference=cfg.ref)
        out[algo] = est
    return out


def run_trial(cfg: ExperimentConfig, rng: np.random.Generator) -> TrialResult:
    """Draw one instance and score every configured estimator on it."""
    if cfg.rho2 > 0:
        return run_adaptive_trial(cfg, rng)
    q = draw_qualities(cfg, rng)
    g = make_graph(cfg, rng)
    w = resolve_w(cfg, g.n_edges)
    counts = estimators.sample_counts(g, q, cfg.model, w, rng)
    ests = _estimate_all(cfg, counts)
    outcomes = {a: metrics.score(q, e.q_hat, cfg.eps, cfg.ref) for a, e in ests.items()}
    return TrialResult(outcomes, {a: counts.total for a in ests}, w)


# ---------------------------------------------------------------------------
# two-stage scheme


@dataclass(frozen=True)
class TwoStageResult:
    estimate: QualityEstimate
    stage1: QualityEstimate
    counts: ComparisonCounts
    graph1: ComparisonGraph
    graph2: ComparisonGraph
    budget: float
    w_stage1: int
    w_stage2: int


def refine_two_stage(
    q: np.ndarray,
    g1: ComparisonGraph,
    counts1: ComparisonCounts,
    cfg: ExperimentConfig,
    algo: str,
    w2: int,
    rng: np.random.Generator,
) -> TwoStageResult:
    """Refine a first-stage estimate with comparisons between close neighbours.

    The second-stage graph joins each object to its ``rho2`` closest objects
    under the first-stage estimate; ``w2`` fresh comparisons are drawn on each
    of its edges.  The final estimate runs on the union of both graphs.  Edges
    sampled in both stages pool their counts unless ``fresh_stage2`` is set,
    in which case only the second-stage counts are used there.  The budget
    always includes every comparison drawn.
    """
    stage1 = estimators.estimate(counts1, cfg.model, algo, chi=cfg.chi, reference=cfg.ref)
    if cfg.rho2 <= 0:
        return TwoStageResult(stage1, stage1, counts1, g1, ComparisonGraph(g1.n, np.empty((0, 2), np.int64)), counts1.total, int(counts1.trials[0]), 0)
    g2 = graphs.knn_quality_graph(stage1.q_hat, cfg.rho2)
    counts2 = estimators.sample_counts(g2, q, cfg.model, w2, rng)
    if cfg.fresh_stage2:
        shared = {tuple(e) for e in g2.edges.tolist()}
        keep = np.array([tuple(e) not in shared for e in counts1.edges.tolist()], dtype=bool)
        base = ComparisonCounts(counts1.n, counts1.edges[keep], counts1.trials[keep], counts1.wins[keep])
        pooled = ComparisonCounts.combine(base, counts2)
    else:
        pooled = ComparisonCounts.combine(counts1, counts2)
    final = estimators.estimate(pooled, cfg.model, algo, chi=cfg.chi, reference=cfg.ref)
    budget = counts1.total + counts2.total
    return TwoStageResult(final, stage1, pooled, g1, g2, budget, int(counts1.trials[0]), w2)


def two_stage(cfg: ExperimentConfig, rng: np.random.Generator, algo: str = "wls") -> tuple[TwoStageResult, np.ndarray]:
    """Draw qualities, the first-stage graph and counts, then refine.

    Returns the two-stage result and the true qualities it was run on.
    """
    q = draw_qualities(cfg, rng)
    g1 = make_graph(cfg, rng)
    w1, w2 = stage_w(cfg, g1.n_edges)
    counts1 = estimators.sample_counts(g1, q, cfg.model, w1, rng)
    return refine_two_stage(q, g1, counts1, cfg, algo, w2, rng), q


def stage_w(cfg: ExperimentConfig, n_edges1: int) -> tuple[int, int]:
    """Per-edge W for both stages.

    From a per-object budget, ``C`` is split so both stages use the same W,
    estimating the second-stage edge count as ``ceil(N rho2 / 2)``.
    """
    if cfg.w_per_edge is not None:
        w1 = int(cfg.w_per_edge)
    else:
        est_edges = n_edges1 + math.ceil(cfg.n * cfg.rho2 / 2)
        w1 = math.floor(cfg.budget_per_object * cfg.n / est_edges + 1e-9)
    w2 = w1 if cfg.stage2_w is None else int(cfg.stage2_w)
    if w1 < 1 or w2 < 1:
        raise ConfigurationError(f"budget resolves to W=({w1}, {w2}) comparisons per edge")
    return w1, w2


def run_adaptive_trial(cfg: ExperimentConfig, rng: np.random.Generator) -> TrialResult:
    q = draw_qualities(cfg, rng)
    g1 = make_graph(cfg, rng)
    w1, w2 = stage_w(cfg, g1.n_edges)
    counts1 = estimators.sample_counts(g1, q, cfg.model, w1, rng)
    stage2_seeds = rng.spawn(len(cfg.algos))
    outcomes, budget = {}, {}
    for algo, sub in zip(cfg.algos, stage2_seeds):
        res = refine_two_stage(q, g1, counts1, cfg, algo, w2, sub)
        outcomes[algo] = metrics.score(q, res.estimate.q_hat, cfg.eps, cfg.ref)
        budget[algo] = res.budget
    return TrialResult(outcomes, budget, w1)


# ---------------------------------------------------------------------------
# sweeps


def _run_block(args: tuple[ExperimentConfig, int, int, int]) -> list[TrialResult]:
    cfg, point, start, stop = args
    return [run_trial(cfg, trial_rng(cfg.seed, point, t)) for t in range(start, stop)]


def run_point(cfg: ExperimentConfig, point: int = 0, workers: int = 1) -> list[TrialResult]:
    """All trials of one configuration, in trial-index order."""
    if workers <= 1:
        return _run_block((cfg, point, 0, cfg.trials))
    edges = np.linspace(0, cfg.trials, 4 * workers + 1).astype(int)
    blocks = [(cfg, point, a, b) for a, b in zip(edges[:-1], edges[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return [r for chunk in pool.map(_run_block, blocks) for r in chunk]


def summarize(cfg: ExperimentConfig, results: Sequence[TrialResult], requested: float) -> list[CurvePoint]:
    points = []
    n_trials = len(results)
    for algo in cfg.algos:
        errs = np.array([r.outcomes[algo].epsilon_error for r in results], dtype=float)
        mse = np.array([r.outcomes[algo].mse_aligned for r in results])
        spent = np.array([r.budget[algo] for r in results])
        p = float(errs.mean())
        points.append(
            CurvePoint(
                algo,
                float(spent.mean() / cfg.n),
                p,
                math.sqrt(p * (1.0 - p) / n_trials),
                float(mse.mean()),
                requested,
                n_trials,
            )
        )
    return points


def sweep(cfg: ExperimentConfig, budgets: Sequence[float], workers: int = 1, per_trial: list | None = None) -> list[CurvePoint]:
    """Error-probability curve over per-object budgets ``C/N``.

    Each budget is an independent point with its own trial streams.  When
    ``per_trial`` is a list, per-trial rows are appended to it.
    """
    if not budgets:
        raise ConfigurationError("need at least one budget")
    out = []
    for point, b in enumerate(budgets):
        c = replace(cfg, budget_per_object=float(b), w_per_edge=None)
        results = run_point(c, point, workers)
        out.extend(summarize(c, results, float(b)))
        if per_trial is not None:
            for t, r in enumerate(results):
                for algo, o in r.outcomes.items():
                    per_trial.append((t, algo, r.budget[algo] / c.n, int(o.epsilon_error), o.kendall_tau, o.mse_aligned, o.mse_raw))
    return out


CURVE_HEADER = ("algo", "budget_per_object", "error_prob", "stderr", "mse_aligned", "budget_requested", "trials")
TRIAL_HEADER = ("trial", "algo", "budget_per_object", "eps_error", "kendall", "mse_aligned", "mse_raw")


def curve_csv(points: Sequence[CurvePoint], suffix: str = "") -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    for p in points:
        w.writerow(
            (p.algo + suffix, f"{p.budget_per_object:.6g}", f"{p.error_prob:.6g}", f"{p.stderr:.6g}",
             f"{p.mse_aligned:.6g}", f"{p.budget_requested:.6g}", p.trials)
        )
    return buf.getvalue()


def trials_csv(rows: Sequence[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRIAL_HEADER)
    for t, algo, b, e, k, ma, mr in rows:
        w.writerow((t, algo, f"{b:.6g}", e, k, f"{ma:.10g}", f"{mr:.10g}"))
    return buf.getvalue()


def budget_to_reach(points: Sequence[CurvePoint], target: float) -> float:
    """Smallest budget at which the curve crosses ``target``.

    Linear interpolation of the error probability against ``log C/N`` between
    the bracketing points; ``inf`` if the curve never gets that low.
    """
    pts = sorted(points, key=lambda p: p.budget_per_object)
    if pts and pts[0].error_prob <= target:
        return pts[0].budget_per_object
    for a, b in zip(pts, pts[1:]):
        if a.error_prob > target >= b.error_prob:
            la_, lb = math.log(a.budget_per_object), math.log(b.budget_per_object)
            f = (a.error_prob - target) / (a.error_prob - b.error_prob)
            return math.exp(la_ + f * (lb - la_))
    return math.inf
