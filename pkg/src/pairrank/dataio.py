"""File formats and the match-score ingestion path.

All files are CSV with a header row.  Object indices in files are 1-based;
in memory they are 0-based.

* graph:    ``i,j[,w_ij]`` with ``i > j``
* counts:   ``i,j,w,k`` with ``i > j`` and ``k`` the wins of ``i``
* estimate: ``object,q_hat,rank``
* matches:  ``home,away,home_goals,away_goals``, one fixture per row
* standings: one team per line (optionally under a ``team`` header), best first
"""

from __future__ import annotations

import csv
import io
import logging
import math
import os
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from . import estimators, graphs, metrics
from .errors import DataError
from .estimators import ComparisonCounts, QualityEstimate
from .graphs import ComparisonGraph
from .models import PreferenceModel

log = logging.getLogger(__name__)

PathLike = str | os.PathLike


def _read_rows(path: PathLike, header: Sequence[str], optional: Sequence[str] = ()) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise DataError(f"{path}: empty file")
        names = [f.strip() for f in reader.fieldnames]
        missing = [h for h in header if h not in names]
        extra = [f for f in names if f not in header and f not in optional]
        if missing or extra:
            raise DataError(f"{path}: expected header {','.join(header)}, got {','.join(names)}")
        reader.fieldnames = names
        rows = []
        for line, row in enumerate(reader, start=2):
            if None in row or any(row.get(h) is None for h in header):
                raise DataError(f"{path}:{line}: wrong number of fields")
            rows.append({k: v.strip() for k, v in row.items() if v is not None})
            rows[-1]["_line"] = str(line)
        return rows


def _int(row: dict[str, str], key: str, where: str) -> int:
    try:
        return int(row[key])
    except ValueError:
        raise DataError(f"{where}: {key}={row[key]!r} is not an integer") from None


def _float(row: dict[str, str], key: str, where: str) -> float:
    try:
        v = float(row[key])
    except ValueError:
        raise DataError(f"{where}: {key}={row[key]!r} is not a number") from None
    if not math.isfinite(v):
        raise DataError(f"{where}: {key} must be finite")
    return v


# ---------------------------------------------------------------------------
# graphs, counts, estimates


def read_graph(path: PathLike, n: int | None = None) -> ComparisonGraph:
    """Read a graph CSV; ``n`` defaults to the largest index present."""
    rows = _read_rows(path, ("i", "j"), optional=("w_ij",))
    if not rows:
        raise DataError(f"{path}: no edges")
    pairs, weights = [], []
    for r in rows:
        where = f"{path}:{r['_line']}"
        i, j = _int(r, "i", where), _int(r, "j", where)
        if i <= j:
            raise DataError(f"{where}: edges must be listed with i > j")
        if j < 1:
            raise DataError(f"{where}: indices are 1-based")
        pairs.append((i - 1, j - 1))
        if r.get("w_ij", "") != "":
            weights.append(_float(r, "w_ij", where))
    if weights and len(weights) != len(pairs):
        raise DataError(f"{path}: w_ij must be given on every row or none")
    if len(set(pairs)) != len(pairs):
        raise DataError(f"{path}: duplicate edge")
    n = max(i for i, _ in pairs) + 1 if n is None else n
    budget = dict(zip(pairs, weights)) if weights else None
    return ComparisonGraph.from_edges(n, pairs, budget)


def write_graph(g: ComparisonGraph, path: PathLike | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if g.budget is None:
        w.writerow(("i", "j"))
        w.writerows((i + 1, j + 1) for i, j in g.edges.tolist())
    else:
        w.writerow(("i", "j", "w_ij"))
        w.writerows((i + 1, j + 1, f"{b:.17g}") for (i, j), b in zip(g.edges.tolist(), g.budget.tolist()))
    return _emit(buf.getvalue(), path)


def read_counts(path: PathLike, n: int | None = None) -> ComparisonCounts:
    rows = _read_rows(path, ("i", "j", "w", "k"))
    if not rows:
        raise DataError(f"{path}: no comparisons")
    ii, jj, ww, kk = [], [], [], []
    for r in rows:
        where = f"{path}:{r['_line']}"
        i, j = _int(r, "i", where), _int(r, "j", where)
        w, k = _float(r, "w", where), _float(r, "k", where)
        if i <= j or j < 1:
            raise DataError(f"{where}: need 1-based indices with i > j")
        if w < 0 or not 0 <= k <= w:
            raise DataError(f"{where}: need 0 <= k <= w")
        ii.append(i - 1); jj.append(j - 1); ww.append(w); kk.append(k)
    n = max(ii) + 1 if n is None else n
    return ComparisonCounts.from_records(n, ii, jj, ww, kk)


def _num(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else f"{x:.17g}"


def write_counts(counts: ComparisonCounts, path: PathLike | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("i", "j", "w", "k"))
    for (i, j), t, k in zip(counts.edges.tolist(), counts.trials.tolist(), counts.wins.tolist()):
        w.writerow((i + 1, j + 1, _num(t), _num(k)))
    return _emit(buf.getvalue(), path)


def write_estimate(est: QualityEstimate, path: PathLike | None = None, labels: Sequence[str] | None = None) -> str:
    """``object,q_hat,rank``; rank 1 is the best object."""
    order = estimators.rank_from_qualities(est.q_hat)
    rank = np.empty(len(order), dtype=np.int64)
    rank[order] = np.arange(1, len(order) + 1)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("object", "q_hat", "rank"))
    for v in range(len(order)):
        name = labels[v] if labels is not None else v + 1
        w.writerow((name, f"{est.q_hat[v]:.12g}", rank[v]))
    return _emit(buf.getvalue(), path)


def _emit(text: str, path: PathLike | None) -> str:
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------------------
# match results


@dataclass(frozen=True)
class MatchRecord:
    """Goals between two teams summed over every fixture they played."""

    team_i: str
    team_j: str
    goals_ij: int
    goals_ji: int
    legs: int = 1


def load_matches(path: PathLike) -> list[MatchRecord]:
    """Aggregate fixtures per unordered pair of teams.

    Each pair may meet at most twice, and a team may host a given opponent
    only once.  Records come out sorted by team name.
    """
    rows = _read_rows(path, ("home", "away", "home_goals", "away_goals"))
    seen_home: set[tuple[str, str]] = set()
    agg: dict[tuple[str, str], list[int]] = {}
    for r in rows:
        where = f"{path}:{r['_line']}"
        h, a = r["home"], r["away"]
        if not h or not a:
            raise DataError(f"{where}: empty team name")
        if h == a:
            raise DataError(f"{where}: a team cannot play itself")
        gh, ga = _int(r, "home_goals", where), _int(r, "away_goals", where)
        if gh < 0 or ga < 0:
            raise DataError(f"{where}: goals must be non-negative")
        if (h, a) in seen_home:
            raise DataError(f"{where}: fixture {h} vs {a} listed twice")
        seen_home.add((h, a))
        key = (min(h, a), max(h, a))
        rec = agg.setdefault(key, [0, 0, 0])
        if rec[2] >= 2:
            raise DataError(f"{where}: {key[0]} and {key[1]} meet more than twice")
        if h == key[0]:
            rec[0] += gh; rec[1] += ga
        else:
            rec[0] += ga; rec[1] += gh
        rec[2] += 1
    return [MatchRecord(i, j, gi, gj, legs) for (i, j), (gi, gj, legs) in sorted(agg.items())]


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class IngestResult:
    counts: ComparisonCounts
    teams: tuple[str, ...]
    dropped_teams: tuple[str, ...]
    dropped_edges: int


def matches_to_counts(records: Iterable[MatchRecord], alpha: float = 1.0, beta: float = 1.0) -> IngestResult:
    """Turn aggregated scores into comparison counts.

    Team ``i`` collects ``K_ij = round(alpha * x_ij + beta)`` wins over ``j``
    (halves round up) and the pair gets ``W_ij = K_ij + K_ji`` comparisons.
    Pairs with ``W_ij = 0`` carry no edge.  If the remaining graph is
    disconnected, only its largest component is kept (ties go to the
    component holding the alphabetically first team) and a warning is logged.
    """
    if not alpha > 0:
        raise DataError("alpha must be positive")
    if beta < 0:
        raise DataError("beta must be non-negative")
    records = list(records)
    teams = sorted({r.team_i for r in records} | {r.team_j for r in records})
    if len(teams) < 2:
        raise DataError("need at least two teams")
    idx = {t: v for v, t in enumerate(teams)}
    ii, jj, ww, kk = [], [], [], []
    empty = 0
    for r in records:
        k_ij = round_half_up(alpha * r.goals_ij + beta)
        k_ji = round_half_up(alpha * r.goals_ji + beta)
        if k_ij + k_ji == 0:
            empty += 1
            continue
        ii.append(idx[r.team_i]); jj.append(idx[r.team_j]); ww.append(k_ij + k_ji); kk.append(k_ij)
    if not ii:
        raise DataError("no pair of teams produced any comparison")
    counts = ComparisonCounts.from_records(len(teams), ii, jj, ww, kk)
    labels = graphs.components(counts.graph())
    sizes = np.bincount(labels)
    if len(sizes) == 1:
        return IngestResult(counts, tuple(teams), (), empty)
    keep = labels == int(np.argmax(sizes))
    sub, old = counts.restrict(keep)
    dropped = tuple(teams[v] for v in np.flatnonzero(~keep))
    log.warning(
        "comparison graph is disconnected (%d components); keeping %d of %d teams, dropping %s",
        len(sizes), len(old), len(teams), ", ".join(dropped),
    )
    return IngestResult(sub, tuple(teams[v] for v in old), dropped, empty)


def load_standings(path: PathLike) -> list[str]:
    """Final table, best team first, one name per line."""
    with open(path, newline="") as fh:
        names = [row[0].strip() for row in csv.reader(fh) if row and row[0].strip()]
    if names and names[0].lower() == "team":
        names = names[1:]
    if len(set(names)) != len(names):
        raise DataError(f"{path}: standings list a team twice")
    if not names:
        raise DataError(f"{path}: no teams")
    return names


@dataclass(frozen=True)
class RealRanking:
    order: tuple[str, ...]
    kendall_tau: int
    estimate: QualityEstimate


def rank_real(
    counts: ComparisonCounts,
    model: PreferenceModel,
    algo: str,
    standings: Sequence[str],
    teams: Sequence[str],
    *,
    chi: float = estimators.DEFAULT_CHI,
) -> RealRanking:
    """Estimate team strengths and count inversions against the standings.

    ``teams[v]`` names object ``v`` of ``counts``.  Teams absent from the
    counts (for instance dropped with a disconnected component) are removed
    from the standings before comparing.
    """
    if len(teams) != counts.n:
        raise DataError("need one team name per object")
    missing = set(teams) - set(standings)
    if missing:
        raise DataError(f"standings lack {', '.join(sorted(missing))}")
    est = estimators.estimate(counts, model, algo, chi=chi)
    order = tuple(teams[v] for v in estimators.rank_from_qualities(est.q_hat))
    truth = [t for t in standings if t in set(teams)]
    return RealRanking(order, metrics.kendall_tau(truth, list(order)), est)
