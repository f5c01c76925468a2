"""Ranking quality measures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .estimators import rank_from_qualities

# float slack on the quality-gap test, so that e.g. q = i/N spaced by exactly
# eps is not counted as exceeding eps through rounding
GAP_SLACK = 1e-12


@dataclass(frozen=True)
class RankingOutcome:
    order: np.ndarray
    epsilon_error: bool
    kendall_tau: int
    mse_aligned: float
    mse_raw: float


def true_order(q: np.ndarray) -> np.ndarray:
    return rank_from_qualities(q)


def epsilon_error(q_true: np.ndarray, order: np.ndarray, eps: float) -> bool:
    """True if some object placed ahead of another is worse by more than ``eps``."""
    if eps < 0:
        raise DataError("eps must be non-negative")
    q = np.asarray(q_true, dtype=float)[np.asarray(order)]
    if q.size < 2:
        return False
    # best quality among everything placed after position a
    later_max = np.maximum.accumulate(q[::-1])[::-1][1:]
    return bool(np.any(later_max > q[:-1] + eps + GAP_SLACK))


def _count_inversions(seq: list[int]) -> tuple[list[int], int]:
    if len(seq) < 2:
        return seq, 0
    mid = len(seq) // 2
    left, a = _count_inversions(seq[:mid])
    right, b = _count_inversions(seq[mid:])
    merged, inv = [], a + b
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def kendall_tau(order_a, order_b) -> int:
    """Number of object pairs ranked in opposite order by the two permutations."""
    a = list(order_a)
    b = list(order_b)
    if len(a) != len(b):
        raise DataError(f"orders have different lengths ({len(a)} vs {len(b)})")
    pos = {obj: k for k, obj in enumerate(b)}
    if len(pos) != len(b) or set(a) != set(pos):
        raise DataError("orders must be permutations of the same set")
    return _count_inversions([pos[obj] for obj in a])[1]


def aligned_mse(q_hat: np.ndarray, q_true: np.ndarray) -> float:
    """``min_c ||q_hat + c - q_true||^2``, attained at ``c = mean(q_true - q_hat)``."""
    q_hat = np.asarray(q_hat, dtype=float)
    q_true = np.asarray(q_true, dtype=float)
    if q_hat.shape != q_true.shape:
        raise DataError("quality vectors differ in length")
    r = q_true - q_hat
    r = r - r.mean()
    return float(r @ r)


def raw_mse(q_hat: np.ndarray, q_true: np.ndarray, reference: int) -> float:
    """Squared error against the truth shifted so that the reference is zero."""
    q_true = np.asarray(q_true, dtype=float)
    r = np.asarray(q_hat, dtype=float) - (q_true - q_true[reference])
    return float(r @ r)


def score(q_true: np.ndarray, q_hat: np.ndarray, eps: float, reference: int) -> RankingOutcome:
    order = rank_from_qualities(q_hat)
    return RankingOutcome(
        order,
        epsilon_error(q_true, order, eps),
        kendall_tau(true_order(q_true).tolist(), order.tolist()),
        aligned_mse(q_hat, q_true),
        raw_mse(q_hat, q_true, reference),
    )
