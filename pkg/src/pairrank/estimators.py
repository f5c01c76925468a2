"""Quality estimation from pairwise comparison counts.

Three estimators share one data path:

* ``ls``  -- least squares on the graph with unit edge weights;
* ``wls`` -- least squares weighted by the inverse of the estimated
  variance of each distance estimate;
* ``ml``  -- Newton-Raphson maximisation of the log-likelihood, started
  from the WLS solution.

Qualities are identified up to a common shift, so every estimate pins the
reference object to zero.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import models
from .errors import DataError, DisconnectedGraphError, DomainError, NumericalError
from .graphs import ComparisonGraph, is_connected
from .models import PreferenceModel

log = logging.getLogger(__name__)

DEFAULT_CHI = 1e-4
# probabilities below this are floored before dividing in the derivative formulas
PROB_FLOOR = 1e-150
DENSE_MAX = 64
ALGORITHMS = ("ls", "wls", "ml")


@dataclass(frozen=True, eq=False)
class ComparisonCounts:
    """Per-edge tallies: ``trials[e]`` comparisons, ``wins[e]`` won by ``edges[e, 0]``.

    Counts are stored as floats so that exact preference probabilities can be
    fed in for noiseless checks.  Edges with zero trials are dropped.
    """

    n: int
    edges: np.ndarray
    trials: np.ndarray
    wins: np.ndarray

    def __post_init__(self) -> None:
        if np.any(self.edges[:, 0] <= self.edges[:, 1]):
            raise DataError("edges must be stored with i > j")
        if np.any(self.wins < 0) or np.any(self.wins > self.trials):
            raise DataError("wins must satisfy 0 <= K <= W on every edge")

    @classmethod
    def from_records(cls, n: int, i, j, trials, wins) -> ComparisonCounts:
        """Canonicalise orientation and merge repeated pairs additively.

        A record ``(i, j, W, K)`` with ``i < j`` is stored as ``(j, i, W, W - K)``.
        """
        i = np.asarray(i, dtype=np.int64)
        j = np.asarray(j, dtype=np.int64)
        w = np.asarray(trials, dtype=float)
        k = np.asarray(wins, dtype=float)
        if np.any(i == j):
            raise DataError("a record compares an object with itself")
        if np.any((i < 0) | (i >= n) | (j < 0) | (j >= n)):
            raise DataError(f"object index outside [0, {n})")
        if np.any(k < 0) or np.any(k > w):
            raise DataError("wins must satisfy 0 <= K <= W")
        flip = i < j
        hi = np.where(flip, j, i)
        lo = np.where(flip, i, j)
        k = np.where(flip, w - k, k)
        keys, inverse = np.unique(np.column_stack([hi, lo]), axis=0, return_inverse=True)
        inverse = inverse.ravel()
        tw = np.bincount(inverse, weights=w, minlength=len(keys))
        tk = np.bincount(inverse, weights=k, minlength=len(keys))
        keep = tw > 0
        return cls(n, keys[keep].reshape(-1, 2), tw[keep], tk[keep])

    @classmethod
    def combine(cls, *parts: ComparisonCounts) -> ComparisonCounts:
        n = parts[0].n
        return cls.from_records(
            n,
            np.concatenate([p.edges[:, 0] for p in parts]),
            np.concatenate([p.edges[:, 1] for p in parts]),
            np.concatenate([p.trials for p in parts]),
            np.concatenate([p.wins for p in parts]),
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def total(self) -> float:
        return float(self.trials.sum())

    def graph(self) -> ComparisonGraph:
        return ComparisonGraph(self.n, self.edges.copy(), self.trials.copy())

    def restrict(self, keep: np.ndarray) -> tuple[ComparisonCounts, np.ndarray]:
        """Counts on the objects flagged in ``keep``, relabelled ``0..m-1``.

        Returns the new counts and the original index of each kept object.
        """
        keep = np.asarray(keep, dtype=bool)
        old = np.flatnonzero(keep)
        new_of = -np.ones(self.n, dtype=np.int64)
        new_of[old] = np.arange(len(old))
        mask = keep[self.edges[:, 0]] & keep[self.edges[:, 1]]
        e = new_of[self.edges[mask]]
        return ComparisonCounts(len(old), e, self.trials[mask], self.wins[mask]), old


def sample_counts(
    g: ComparisonGraph,
    q: np.ndarray,
    model: PreferenceModel,
    trials: int | np.ndarray,
    rng: np.random.Generator,
) -> ComparisonCounts:
    """Draw ``K_ij ~ Bin(W_ij, F(q_i - q_j))`` on every edge of ``g``."""
    w = np.broadcast_to(np.asarray(trials, dtype=np.int64), (g.n_edges,))
    delta = q[g.edges[:, 0]] - q[g.edges[:, 1]]
    k = models.sample_comparisons(model, delta, w, rng)
    return ComparisonCounts(g.n, g.edges.copy(), w.astype(float), np.asarray(k, dtype=float))


def exact_counts(g: ComparisonGraph, q: np.ndarray, model: PreferenceModel, trials: float = 1.0) -> ComparisonCounts:
    """Noiseless counts: ``K_ij = W F(q_i - q_j)`` exactly (non-integer)."""
    delta = q[g.edges[:, 0]] - q[g.edges[:, 1]]
    w = np.full(g.n_edges, float(trials))
    return ComparisonCounts(g.n, g.edges.copy(), w, w * np.asarray(models.preference_prob(model, delta)))


@dataclass(frozen=True)
class EdgeEstimates:
    """Per-edge quantities aligned with ``edges``.

    ``d_hat[e]`` estimates ``q_i - q_j`` for ``edges[e] = (i, j)``.
    """

    edges: np.ndarray
    p_hat: np.ndarray
    p_tilde: np.ndarray
    d_hat: np.ndarray
    sigma2: np.ndarray
    omega: np.ndarray

    @property
    def n_clamped(self) -> int:
        return int(np.count_nonzero(self.p_hat != self.p_tilde))


@dataclass
class QualityEstimate:
    q_hat: np.ndarray
    reference: int
    algo: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return bool(self.diagnostics.get("converged", True))


def estimate_distances(counts: ComparisonCounts, model: PreferenceModel, chi: float = DEFAULT_CHI) -> EdgeEstimates:
    """Clamp ``K/W`` into ``[chi, 1 - chi]`` and invert the link on every edge.

    Weights are left at one; see :func:`wls_weights`.
    """
    if not 0.0 < chi < 0.5:
        raise DomainError(f"chi must lie in (0, 1/2), got {chi}")
    if np.any(counts.trials <= 0):
        raise DataError("an edge with zero comparisons cannot be estimated")
    p_hat = counts.wins / counts.trials
    p_tilde = np.clip(p_hat, chi, 1.0 - chi)
    d_hat = np.asarray(models.inverse_preference(model, p_tilde), dtype=float)
    sigma2 = _variance(model, p_tilde, counts.trials)
    return EdgeEstimates(counts.edges, p_hat, p_tilde, d_hat, sigma2, np.ones_like(d_hat))


def _variance(model: PreferenceModel, p_tilde: np.ndarray, trials: np.ndarray) -> np.ndarray:
    slope = np.asarray(models.inverse_derivative(model, p_tilde), dtype=float)
    return slope**2 * p_tilde * (1.0 - p_tilde) / trials


def wls_weights(est: EdgeEstimates, model: PreferenceModel, trials: np.ndarray) -> np.ndarray:
    """Inverse estimated variance of each ``d_hat``: ``1 / sigma2_hat``."""
    return 1.0 / _variance(model, est.p_tilde, np.asarray(trials, dtype=float))


def _laplacian(n: int, edges: np.ndarray, omega: np.ndarray) -> sp.csr_matrix:
    i, j = edges[:, 0], edges[:, 1]
    off = sp.coo_matrix(
        (np.concatenate([-omega, -omega]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(n, n),
    )
    deg = np.bincount(i, weights=omega, minlength=n) + np.bincount(j, weights=omega, minlength=n)
    return (off + sp.diags(deg)).tocsr()


def ls_solve(
    g: ComparisonGraph,
    d_hat: np.ndarray,
    omega: np.ndarray | None = None,
    reference: int | None = None,
) -> QualityEstimate:
    """Minimise ``sum_e omega_e (x_i - x_j - d_hat_e)^2`` with ``x_reference = 0``.

    The normal equations are the weighted graph Laplacian restricted to the
    free coordinates; small systems go through a dense Cholesky factor and
    large ones through sparse LU.  The returned diagnostics carry the
    infinity-norm residual of ``M q = (H o D) 1``.
    """
    ref = g.n - 1 if reference is None else reference
    d_hat = np.asarray(d_hat, dtype=float)
    omega = np.ones(g.n_edges) if omega is None else np.asarray(omega, dtype=float)
    if d_hat.shape != (g.n_edges,) or omega.shape != (g.n_edges,):
        raise DataError("d_hat and omega must have one entry per edge")
    if np.any(~np.isfinite(omega)) or np.any(omega <= 0):
        raise DomainError("LS weights must be positive and finite")
    if not is_connected(g):
        raise DisconnectedGraphError("LS normal equations are singular on a disconnected graph")
    i, j = g.edges[:, 0], g.edges[:, 1]
    lap = _laplacian(g.n, g.edges, omega)
    rhs = np.bincount(i, weights=omega * d_hat, minlength=g.n) - np.bincount(j, weights=omega * d_hat, minlength=g.n)
    free = np.arange(g.n) != ref
    q = np.zeros(g.n)
    a = lap[free][:, free]
    if g.n <= DENSE_MAX:
        q[free] = la.cho_solve(la.cho_factor(a.toarray()), rhs[free])
    else:
        q[free] = spla.spsolve(a.tocsc(), rhs[free])
    if not np.all(np.isfinite(q)):
        raise NumericalError("LS solve produced non-finite qualities")
    resid = (lap @ q - rhs) / lap.diagonal()
    resid[ref] = 0.0
    return QualityEstimate(q, ref, diagnostics={"residual": float(np.max(np.abs(resid))), "iterations": 1, "converged": True})


# ---------------------------------------------------------------------------
# maximum likelihood


def _edge_terms(q: np.ndarray, counts: ComparisonCounts, model: PreferenceModel):
    # 1 - p is evaluated as F(-delta) so that it keeps full precision when p ~ 1
    delta = q[counts.edges[:, 0]] - q[counts.edges[:, 1]]
    p, d1, d2 = (np.asarray(a, dtype=float) for a in models.prob_derivatives(model, delta))
    pbar = np.asarray(models.preference_prob(model, -delta), dtype=float)
    tiny = (p < PROB_FLOOR) | (pbar < PROB_FLOOR)
    return delta, np.maximum(p, PROB_FLOOR), np.maximum(pbar, PROB_FLOOR), d1, d2, int(np.count_nonzero(tiny))


def psi_value(q: np.ndarray, counts: ComparisonCounts, model: PreferenceModel) -> float:
    """Log-likelihood ``sum_e W_e [s_e log p_e + (1 - s_e) log(1 - p_e)]``.

    Always ``<= 0``.  Both logarithms are evaluated as log-cdf values, so no
    clamping of probabilities is needed even far in the tails.
    """
    if counts.n_edges == 0:
        raise DataError("log-likelihood needs at least one compared pair")
    q = np.asarray(q, dtype=float)
    delta = q[counts.edges[:, 0]] - q[counts.edges[:, 1]]
    log_p = np.asarray(models.log_preference_prob(model, delta))
    log_pbar = np.asarray(models.log_preference_prob(model, -delta))
    losses = counts.trials - counts.wins
    # 0 * log(0) counts as 0 when a probability underflows completely
    terms = np.where(counts.wins > 0, counts.wins * log_p, 0.0) + np.where(losses > 0, losses * log_pbar, 0.0)
    return float(np.sum(terms))


def ml_derivatives(q: np.ndarray, counts: ComparisonCounts, model: PreferenceModel) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and Hessian of :func:`psi_value` with respect to ``q``.

    Per edge, with ``s = K/W``, the derivative of the summand in ``delta`` is
    ``W p' (s - p) / (p (1 - p))`` and the second derivative
    ``W [p'' (s - p) / (p (1 - p)) - p'^2 (p^2 + s (1 - 2p)) / (p (1 - p))^2]``;
    both are evaluated through the equivalent forms ``s/p - (1-s)/(1-p)`` and
    ``s/p^2 + (1-s)/(1-p)^2``, which avoid cancellation.
    """
    q = np.asarray(q, dtype=float)
    _, p, pbar, d1, d2, _ = _edge_terms(q, counts, model)
    w = counts.trials
    s = counts.wins / w
    u = s / p - (1.0 - s) / pbar
    v = s / (p * p) + (1.0 - s) / (pbar * pbar)
    g_e = w * d1 * u
    h_e = w * (d2 * u - d1 * d1 * v)
    i, j = counts.edges[:, 0], counts.edges[:, 1]
    n = counts.n
    grad = np.bincount(i, weights=g_e, minlength=n) - np.bincount(j, weights=g_e, minlength=n)
    hess = np.zeros((n, n))
    diag = np.bincount(i, weights=h_e, minlength=n) + np.bincount(j, weights=h_e, minlength=n)
    np.add.at(hess, (i, j), -h_e)
    np.add.at(hess, (j, i), -h_e)
    hess[np.diag_indices(n)] = diag
    return grad, hess


def _polish(q, psi, gf, hf, free, counts, model, damping, slack):
    """One undamped-as-possible Newton step once the gradient test has passed.

    A small gradient can still leave an error of order ``|grad| / curvature``
    on weakly curved coordinates; a single extra step removes most of it.  The
    step is kept only if it does not lower the log-likelihood or raise the
    gradient.
    """
    if not gf.size or not np.any(gf):
        return q, psi
    try:
        step = la.solve(hf - damping * np.eye(len(gf)), -gf, assume_a="sym")
    except (la.LinAlgError, ValueError):
        return q, psi
    trial = q.copy()
    trial[free] += step
    psi_new = psi_value(trial, counts, model)
    if not (np.isfinite(psi_new) and psi_new >= psi - slack):
        return q, psi
    g_new = ml_derivatives(trial, counts, model)[0][free]
    if np.max(np.abs(g_new)) > np.max(np.abs(gf)):
        return q, psi
    return trial, psi_new


def ml_estimate(
    counts: ComparisonCounts,
    model: PreferenceModel,
    init: QualityEstimate | np.ndarray | None = None,
    *,
    reference: int | None = None,
    max_iter: int = 100,
    tol: float = 1e-8,
    damping: float = 1e-8,
    max_halvings: int = 30,
) -> QualityEstimate:
    """Newton-Raphson ascent on the log-likelihood with the reference pinned.

    The reference row and column are removed from the Newton system, which is
    damped by ``damping * I`` (escalated tenfold whenever backtracking fails).
    Steps are halved until the log-likelihood does not decrease.  Stops when
    the free-coordinate gradient has infinity norm below ``tol``, after one
    final polishing Newton step; otherwise the
    best iterate is returned with ``converged=False``.
    """
    ref = counts.n - 1 if reference is None else reference
    g = counts.graph()
    if not is_connected(g):
        raise DisconnectedGraphError("maximum likelihood needs a connected comparison graph")
    if init is None:
        q = np.zeros(counts.n)
    else:
        q = np.array(init.q_hat if isinstance(init, QualityEstimate) else init, dtype=float)
        q = q - q[ref]
    free = np.arange(counts.n) != ref
    psi = psi_value(q, counts, model)
    # rounding allowance when comparing log-likelihood values
    slack = 8 * np.finfo(float).eps * (1.0 + counts.total)
    lam = damping
    converged = False
    it = 0
    gnorm = np.inf
    for it in range(max_iter + 1):
        grad, hess = ml_derivatives(q, counts, model)
        gf = grad[free]
        gnorm = float(np.max(np.abs(gf))) if gf.size else 0.0
        if gnorm < tol:
            converged = True
            q, psi = _polish(q, psi, gf, hess[np.ix_(free, free)], free, counts, model, damping, slack)
            break
        if it == max_iter:
            break
        accepted = False
        while not accepted and lam < 1e12:
            a = hess[np.ix_(free, free)] - lam * np.eye(int(free.sum()))
            try:
                step = la.solve(a, -gf, assume_a="sym")
            except (la.LinAlgError, ValueError):
                lam *= 10.0
                continue
            t = 1.0
            for _ in range(max_halvings + 1):
                trial = q.copy()
                trial[free] += t * step
                psi_new = psi_value(trial, counts, model)
                if np.isfinite(psi_new) and psi_new >= psi - slack:
                    accepted = True
                    break
                t *= 0.5
            if not accepted:
                lam *= 10.0
        if not accepted:
            log.warning("Newton step rejected at every damping level; stopping at iteration %d", it)
            break
        stalled = t * np.max(np.abs(step)) <= 1e-15 * (1.0 + np.max(np.abs(q)))
        q, psi = trial, psi_new
        lam = damping
        if stalled:
            log.info("Newton step below machine resolution at iteration %d", it)
            break
    n_floor = _edge_terms(q, counts, model)[5]
    if not converged:
        log.info("ML did not converge: |grad|_inf=%.3g after %d iterations", gnorm, it)
    return QualityEstimate(
        q,
        ref,
        "ml",
        {"iterations": it, "converged": converged, "grad_norm": gnorm, "psi": psi, "floored_edges": n_floor},
    )


# ---------------------------------------------------------------------------
# front door


def estimate(
    counts: ComparisonCounts,
    model: PreferenceModel,
    algo: str = "wls",
    *,
    chi: float = DEFAULT_CHI,
    reference: int | None = None,
    ml_options: dict | None = None,
) -> QualityEstimate:
    """Run one of ``ls``, ``wls`` or ``ml`` on the given counts."""
    algo = algo.lower()
    if algo not in ALGORITHMS:
        raise DomainError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")
    ref = counts.n - 1 if reference is None else reference
    g = counts.graph()
    est = estimate_distances(counts, model, chi)
    omega = est.omega if algo == "ls" else wls_weights(est, model, counts.trials)
    out = ls_solve(g, est.d_hat, omega, ref)
    out.diagnostics["clamped_edges"] = est.n_clamped
    if algo == "ml":
        ml = ml_estimate(counts, model, out, reference=ref, **(ml_options or {}))
        ml.diagnostics["clamped_edges"] = est.n_clamped
        return ml
    out.algo = algo
    return out


def rank_from_qualities(q_hat: np.ndarray) -> np.ndarray:
    """Objects ordered best first; equal qualities keep index order."""
    return np.argsort(-np.asarray(q_hat, dtype=float), kind="stable")


def simulation_errors(counts: ComparisonCounts, est: EdgeEstimates, q: np.ndarray, model: PreferenceModel):
    """Probability error ``y = p_hat - p`` and distance error ``z = d_hat - d`` per edge."""
    d = q[counts.edges[:, 0]] - q[counts.edges[:, 1]]
    p = np.asarray(models.preference_prob(model, d))
    return est.p_hat - p, est.d_hat - d
