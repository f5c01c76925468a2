"""Random-walk view of the least-squares estimate.

The LS estimate of object ``i`` is the mean reward collected by a random
walk that starts at ``i``, moves along edges with probability proportional
to their weight, earns ``d_hat`` on every traversed edge and stops at the
reference.  The fundamental matrix ``(I - T)^{-1}`` of that absorbing walk
gives the expected visit counts, and from them

    theta[j, i] = [(I - T)^{-1}]_{i, j} / rho_j

the expected number of traversals of each edge leaving ``j``.  Orienting
every edge from larger to smaller ``theta`` yields an acyclic graph on
which a biased walk reproduces the same estimate.  The routines here are
dense and meant as oracles and diagnostics, not as the production solver.

With non-unit weights the traversal count of edge ``j -> l`` is
``w_jl * theta[j, i]`` and the net flow is ``w_jl * (theta[j, i] - theta[l, i])``;
all formulas below use this weighted form, which reduces to the unweighted
one when every weight is one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ConfigurationError
from .graphs import ComparisonGraph, system_matrices

DENSE_CAP = 512
TIE_TOL = 1e-12


@dataclass(frozen=True)
class WalkAnalysis:
    """Dense walk quantities for one weighted graph and reference.

    Attributes:
        theta: ``n x n``; ``theta[j, i]`` is the per-edge traversal count out
            of ``j`` for the walk started at ``i``.  Row and column of the
            reference are zero.
        fundamental: ``(I - T)^{-1}`` embedded in an ``n x n`` array (zero on
            the reference row and column).
        m_inv: ``M^{-1}``.
        lambda_c_max: Largest eigenvalue of ``M^{-T} M^{-1}``.
        inf_norm_m_inv: Maximum absolute row sum of ``M^{-1}``.
        rho: Generalised degrees; ``rho_inf`` is their minimum.
    """

    graph: ComparisonGraph
    weights: np.ndarray
    reference: int
    theta: np.ndarray
    fundamental: np.ndarray
    m_inv: np.ndarray
    lambda_c_max: float
    inf_norm_m_inv: float
    rho: np.ndarray

    @property
    def rho_inf(self) -> float:
        return float(self.rho.min())


def walk_analysis(
    g: ComparisonGraph,
    weights: np.ndarray | None = None,
    reference: int | None = None,
    *,
    cap: int = DENSE_CAP,
) -> WalkAnalysis:
    if g.n > cap:
        raise ConfigurationError(
            f"dense walk analysis is limited to {cap} objects (got {g.n}); sampling-based diagnostics are not provided"
        )
    w = np.ones(g.n_edges) if weights is None else np.asarray(weights, dtype=float)
    sysm = system_matrices(g, w, reference)
    ref = sysm.reference
    free = np.arange(g.n) != ref
    t = sysm.h[np.ix_(free, free)]
    fund_small = la.inv(np.eye(g.n - 1) - t)
    fund = np.zeros((g.n, g.n))
    fund[np.ix_(free, free)] = fund_small
    # theta[j, i] = fund[i, j] / rho_j
    theta = fund.T / sysm.rho[:, None]
    m_inv = la.inv(sysm.m)
    lam = float(la.svdvals(m_inv)[0] ** 2)
    inf_norm = float(np.max(np.abs(m_inv).sum(axis=1)))
    return WalkAnalysis(g, w, ref, theta, fund, m_inv, lam, inf_norm, sysm.rho)


def mse_bound(analysis: WalkAnalysis, trials: float, c: float = 1.0) -> float:
    """Unscaled MSE bound shape ``c * lambda_C_max * N / (W * rho_inf)``.

    The constant ``c`` is not known in closed form; the default ``c = 1``
    only fixes the dependence on the graph and the budget.
    """
    if trials < 1:
        raise ConfigurationError("W must be at least 1")
    return c * analysis.lambda_c_max * analysis.graph.n / (trials * analysis.rho_inf)


@dataclass(frozen=True)
class NodeDAG:
    """Acyclic orientation of the graph seen from ``root``.

    ``arcs[k] = (j, l)`` points from larger to smaller ``theta[., root]``;
    ``flow[k]`` is the net expected traversal count ``w_jl (theta_j - theta_l)``
    and ``eta[k]`` the biased-walk probability of taking arc ``k`` out of ``j``.
    ``sign[k]`` is ``+1`` when the arc follows the stored edge orientation
    and ``-1`` otherwise, and ``edge_index[k]`` points back into the graph's
    edge list.
    """

    root: int
    reference: int
    n: int
    arcs: np.ndarray
    edge_index: np.ndarray
    sign: np.ndarray
    flow: np.ndarray
    eta: np.ndarray
    theta: np.ndarray

    def out_arcs(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.arcs[:, 0] == j)

    def in_arcs(self, j: int) -> np.ndarray:
        return np.flatnonzero(self.arcs[:, 1] == j)


def build_node_dag(analysis: WalkAnalysis, root: int, tie_tol: float = TIE_TOL) -> NodeDAG:
    """Orient the edges for the walk that starts at ``root``.

    An edge ``(j, l)`` becomes the arc ``j -> l`` if ``l`` is the reference,
    or if neither end is the reference and ``theta_j > theta_l``.  Edges whose
    ends tie within ``tie_tol`` (relative to ``theta_root``) get no arc.
    """
    ref = analysis.reference
    if root == ref:
        raise ConfigurationError("the reference object has no walk of its own")
    th = analysis.theta[:, root].copy()
    th[ref] = 0.0
    tol = tie_tol * max(1.0, th[root])
    arcs, idx, sign = [], [], []
    for e, (a, b) in enumerate(analysis.graph.edges.tolist()):
        if b == ref:
            arcs.append((a, b)); idx.append(e); sign.append(1)
        elif a == ref:
            arcs.append((b, a)); idx.append(e); sign.append(-1)
        elif th[a] - th[b] > tol:
            arcs.append((a, b)); idx.append(e); sign.append(1)
        elif th[b] - th[a] > tol:
            arcs.append((b, a)); idx.append(e); sign.append(-1)
    arcs_a = np.array(arcs, dtype=np.int64).reshape(-1, 2)
    idx_a = np.array(idx, dtype=np.int64)
    w = analysis.weights[idx_a]
    flow = w * (th[arcs_a[:, 0]] - th[arcs_a[:, 1]])
    out_total = np.bincount(arcs_a[:, 0], weights=flow, minlength=analysis.graph.n)
    out_deg = np.bincount(arcs_a[:, 0], minlength=analysis.graph.n)
    src = arcs_a[:, 0]
    with np.errstate(invalid="ignore", divide="ignore"):
        # nodes the walk never reaches carry no flow; give them uniform exits
        eta = np.where(out_total[src] > 0, flow / out_total[src], 1.0 / out_deg[src])
    return NodeDAG(root, ref, analysis.graph.n, arcs_a, idx_a, np.array(sign, dtype=np.int64), flow, eta, th)


def topological_order(dag: NodeDAG) -> list[int]:
    """Kahn's algorithm; raises if the arcs contain a cycle."""
    indeg = np.bincount(dag.arcs[:, 1], minlength=dag.n)
    out = [[] for _ in range(dag.n)]
    for a, b in dag.arcs.tolist():
        out[a].append(b)
    ready = [v for v in range(dag.n) if indeg[v] == 0]
    order = []
    while ready:
        v = ready.pop()
        order.append(v)
        for u in out[v]:
            indeg[u] -= 1
            if indeg[u] == 0:
                ready.append(u)
    if len(order) != dag.n:
        raise ConfigurationError("orientation contains a cycle")
    return order


def dag_estimate(dag: NodeDAG, d_hat: np.ndarray) -> float:
    """Expected reward of the biased walk from the root to the reference.

    Solves ``x_j = sum_{j -> l} eta_{j -> l} (x_l + d_hat_{j, l})`` backwards
    along a topological order, with ``x_reference = 0``.
    """
    d_hat = np.asarray(d_hat, dtype=float)
    x = np.full(dag.n, np.nan)
    x[dag.reference] = 0.0
    arc_d = dag.sign * d_hat[dag.edge_index]
    by_src: dict[int, list[int]] = {}
    for k, a in enumerate(dag.arcs[:, 0].tolist()):
        by_src.setdefault(a, []).append(k)
    for v in reversed(topological_order(dag)):
        if v == dag.reference or v not in by_src:
            continue
        ks = by_src[v]
        x[v] = float(np.sum(dag.eta[ks] * (x[dag.arcs[ks, 1]] + arc_d[ks])))
    return float(x[dag.root])


def flow_estimate(dag: NodeDAG, d_hat: np.ndarray) -> float:
    """Closed form ``sum over arcs of flow * d_hat`` along each arc."""
    return float(np.sum(dag.flow * dag.sign * np.asarray(d_hat, dtype=float)[dag.edge_index]))


def flow_conservation_check(dag: NodeDAG) -> float:
    """Largest violation of flow conservation over the non-reference nodes.

    Out-flow must equal 1 at the root and the in-flow everywhere else.
    """
    n = dag.n
    out_f = np.bincount(dag.arcs[:, 0], weights=dag.flow, minlength=n)
    in_f = np.bincount(dag.arcs[:, 1], weights=dag.flow, minlength=n)
    expected = in_f.copy()
    expected[dag.root] = 1.0
    viol = np.abs(out_f - expected)
    viol[dag.reference] = 0.0
    return float(viol.max())


def node_visit_probabilities(dag: NodeDAG) -> np.ndarray:
    """Probability that the biased walk passes through each node.

    Solves ``xi = xi T + T[root, .]`` over the non-root, non-reference nodes,
    where ``T`` holds the arc probabilities ``eta``.
    """
    n = dag.n
    t = np.zeros((n, n))
    t[dag.arcs[:, 0], dag.arcs[:, 1]] = dag.eta
    rest = np.array([v for v in range(n) if v not in (dag.root, dag.reference)], dtype=np.int64)
    xi = np.zeros(n)
    xi[dag.root] = 1.0
    if rest.size:
        a = np.eye(len(rest)) - t[np.ix_(rest, rest)]
        xi[rest] = la.solve(a.T, t[dag.root, rest])
    return xi


def complete_graph_estimate(n: int, d_matrix: np.ndarray, reference: int | None = None) -> np.ndarray:
    """Unweighted LS estimate on the complete graph in closed form.

    ``d_matrix`` is antisymmetric with ``d_matrix[i, j] = d_hat_{i, j}``.  For
    every non-reference ``i``

        q_i = (2/N) d_{i,r} + (1/N) sum_{j != i, r} (d_{i,j} + d_{j,r}).
    """
    r = n - 1 if reference is None else reference
    d = np.asarray(d_matrix, dtype=float)
    q = np.zeros(n)
    others = np.array([v for v in range(n) if v != r])
    for i in others:
        js = others[others != i]
        q[i] = 2.0 / n * d[i, r] + np.sum(d[i, js] + d[js, r]) / n
    return q
