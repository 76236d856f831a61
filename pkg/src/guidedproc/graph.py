"""Censoring policies on a DAG of detectors.

Generalizes the chain: after a node's symbol updates the belief, the policy
either stops (declares target-absent, paying idle costs for every detector
downstream of the node) or hands off to exactly one successor and pays that
successor's processing cost.  Terminal nodes declare.  Values are computed
on the shared belief grid in post-order, so every successor's table exists
before it is consumed.

Decision tables use node ids as actions: an internal node's entry is the
chosen successor id, or 0 for stop; a terminal node's entry is the declared
label (0 or 1).  Node ids must therefore be positive integers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cascade import StageSpec
from .errors import ModelFormatError
from .models import BeliefGrid, BeliefTable, symbol_evidence, symbol_posteriors

__all__ = [
    "DetectionGraph",
    "GraphPolicy",
    "ActivationProfile",
    "post_order",
    "downstream_off_costs",
    "solve_graph",
    "graph_activation_probabilities",
]


@dataclass(frozen=True)
class DetectionGraph:
    """DAG of censoring detectors rooted at the always-on node."""

    nodes: dict[int, StageSpec]
    edges: dict[int, tuple[int, ...]]
    root: int

    def __post_init__(self):
        if not self.nodes:
            raise ModelFormatError("graph needs at least one node")
        for i in self.nodes:
            if not (isinstance(i, int) and i > 0):
                raise ModelFormatError("node ids must be positive integers")
        if self.root not in self.nodes:
            raise ModelFormatError("root must be a node")
        edges = {}
        for i, succ in self.edges.items():
            if i not in self.nodes:
                raise ModelFormatError(f"edge source {i} is not a node")
            succ = tuple(sorted(succ))
            if len(set(succ)) != len(succ):
                raise ModelFormatError(f"duplicate successor on node {i}")
            for n in succ:
                if n not in self.nodes:
                    raise ModelFormatError(f"successor {n} of node {i} is not a node")
            if succ:
                edges[i] = succ
        object.__setattr__(self, "edges", edges)
        order = post_order(self)
        if set(order) != set(self.nodes):
            unreachable = sorted(set(self.nodes) - set(order))
            raise ModelFormatError(f"nodes unreachable from root: {unreachable}")

    def successors(self, i: int) -> tuple[int, ...]:
        return self.edges.get(i, ())

    def is_terminal(self, i: int) -> bool:
        return not self.edges.get(i, ())

    @property
    def terminal_ids(self) -> tuple[int, ...]:
        return tuple(i for i in sorted(self.nodes) if self.is_terminal(i))


def post_order(graph: DetectionGraph) -> list[int]:
    """Finish order of a DFS from the root, successors taken ascending.

    Shared nodes appear once; a back edge is a cycle and is rejected.
    """
    seen, done, order = set(), set(), []
    stack = [(graph.root, iter(graph.successors(graph.root)))]
    seen.add(graph.root)
    path = {graph.root}
    while stack:
        node, it = stack[-1]
        advanced = False
        for n in it:
            if n in path:
                raise ModelFormatError(f"cycle through node {n}")
            if n not in seen:
                seen.add(n)
                path.add(n)
                stack.append((n, iter(graph.successors(n))))
                advanced = True
                break
        if not advanced:
            stack.pop()
            path.discard(node)
            if node not in done:
                done.add(node)
                order.append(node)
    return order


def downstream_off_costs(graph: DetectionGraph) -> dict[int, float]:
    """Idle cost charged when stopping at each node: the sum of off costs
    over all distinct nodes reachable strictly below it (shared descendants
    counted once)."""
    descendants: dict[int, frozenset[int]] = {}
    for i in post_order(graph):
        acc: set[int] = set()
        for n in graph.successors(i):
            acc.add(n)
            acc |= descendants[n]
        descendants[i] = frozenset(acc)
    return {
        i: float(sum(graph.nodes[n].off_cost for n in descendants[i]))
        for i in graph.nodes
    }


@dataclass(frozen=True)
class GraphPolicy:
    grid: BeliefGrid
    order: tuple[int, ...]
    value_tables: dict[int, BeliefTable]
    decisions: dict[int, np.ndarray]
    stop_off_costs: dict[int, float]
    stop_thresholds: dict[int, float]
    miss_cost: float
    fa_cost: float
    energy_weight: float
    prior: float
    v0: float

    def decision_at(self, node: int, belief) -> np.ndarray:
        """Deployed action at an off-grid belief: the action of the largest
        grid point not above it (within a grid step the tables are constant
        between threshold crossings, so this reproduces the threshold rule)."""
        idx = self.grid.floor_index(belief)
        return self.decisions[node][idx]


def solve_graph(
    graph: DetectionGraph,
    miss_cost: float,
    fa_cost: float,
    energy_weight: float,
    prior: float,
    grid: BeliefGrid | None = None,
) -> GraphPolicy:
    """Exact-on-the-grid value iteration over the DAG.

    Terminal nodes price the two declarations; internal nodes compare
    stopping (miss risk plus weighted downstream idle energy) against each
    successor (its processing cost plus expected continuation value).  Ties
    between stop and the best successor continue; ties among successors go
    to the smallest id.
    """
    if not (miss_cost > 0.0 and fa_cost > 0.0):
        raise ModelFormatError("miss_cost and fa_cost must be positive")
    if not 0.0 <= prior <= 1.0:
        raise ModelFormatError("prior must lie in [0, 1]")
    if energy_weight < 0.0:
        raise ModelFormatError("energy_weight must be nonnegative")
    grid = BeliefGrid() if grid is None else grid
    b = grid.points
    lam = energy_weight
    dstop = downstream_off_costs(graph)
    order = post_order(graph)
    values: dict[int, np.ndarray] = {}
    tables: dict[int, BeliefTable] = {}
    decisions: dict[int, np.ndarray] = {}
    thresholds: dict[int, float] = {}

    tau_term = fa_cost / (fa_cost + miss_cost)
    for i in order:
        node = graph.nodes[i]
        succ = graph.successors(i)
        if not succ:
            declare_pos = b >= tau_term
            v = np.where(declare_pos, fa_cost * (1.0 - b), miss_cost * b)
            decisions[i] = declare_pos.astype(np.int64)
            thresholds[i] = tau_term
        else:
            stop = miss_cost * b + lam * dstop[i]
            cand = np.empty((len(succ), grid.size))
            for j, n in enumerate(succ):
                assert n in values, "post-order violated"
                nxt = graph.nodes[n]
                post = symbol_posteriors(nxt.model, b)
                ev = symbol_evidence(nxt.model, b)
                cand[j] = lam * nxt.on_cost + np.sum(ev * np.interp(post, b, values[n]), axis=0)
            best = np.argmin(cand, axis=0)  # first minimum: lowest successor id
            cont = cand[best, np.arange(grid.size)]
            go = cont <= stop
            v = np.where(go, cont, stop)
            decisions[i] = np.where(go, np.asarray(succ)[best], 0)
            hits = np.flatnonzero(go)
            thresholds[i] = float(b[hits[0]]) if hits.size else np.inf
        v = v.copy()
        v.setflags(write=False)
        values[i] = v
        tables[i] = BeliefTable(grid, v)
        decisions[i].setflags(write=False)

    root = graph.nodes[graph.root]
    post0 = symbol_posteriors(root.model, np.array([prior]))[:, 0]
    ev0 = symbol_evidence(root.model, np.array([prior]))[:, 0]
    v0 = lam * root.on_cost + float(ev0 @ np.interp(post0, b, values[graph.root]))
    return GraphPolicy(
        grid=grid,
        order=tuple(order),
        value_tables=tables,
        decisions=decisions,
        stop_off_costs=dstop,
        stop_thresholds=thresholds,
        miss_cost=miss_cost,
        fa_cost=fa_cost,
        energy_weight=lam,
        prior=prior,
        v0=v0,
    )


@dataclass(frozen=True)
class ActivationProfile:
    """Distribution over a node's actions as a function of the belief it
    is entered with."""

    node: int
    beliefs: np.ndarray
    labels: tuple[int, ...]
    probs: np.ndarray  # (n_labels, n_beliefs)

    def at(self, belief: float) -> dict[int, float]:
        j = int(np.argmin(np.abs(self.beliefs - belief)))
        return {lab: float(self.probs[k, j]) for k, lab in enumerate(self.labels)}


def _entry_interval(graph: DetectionGraph, node: int, prior: float) -> tuple[float, float]:
    if node == graph.root:
        return prior, prior
    parents = [i for i in graph.nodes if node in graph.successors(i)]
    lo = min(graph.nodes[i].bounds.lo for i in parents)
    hi = max(graph.nodes[i].bounds.hi for i in parents)
    return lo, hi


def graph_activation_probabilities(
    graph: DetectionGraph, policy: GraphPolicy, grid: BeliefGrid | None = None
) -> dict[int, ActivationProfile]:
    """Per-node action distribution over the admissible entry beliefs.

    Entry beliefs cover the union of the parents' posterior ranges (the
    root is pinned at the prior).  For each entry belief the node's symbol
    distribution is pushed through the deployed decision table; rows are
    labeled 0 for stop plus the successor ids, or {0, 1} at terminals.
    """
    grid = policy.grid if grid is None else grid
    out = {}
    for i in sorted(graph.nodes):
        node = graph.nodes[i]
        lo, hi = _entry_interval(graph, i, policy.prior)
        inside = grid.points[(grid.points >= lo) & (grid.points <= hi)]
        beliefs = np.unique(np.concatenate([inside, [lo, hi]]))
        succ = graph.successors(i)
        labels = (0, 1) if not succ else (0, *succ)
        post = symbol_posteriors(node.model, beliefs)
        ev = symbol_evidence(node.model, beliefs)
        action = policy.decisions[i][policy.grid.floor_index(post)]
        probs = np.empty((len(labels), beliefs.size))
        for k, lab in enumerate(labels):
            probs[k] = np.sum(ev * (action == lab), axis=0)
        out[i] = ActivationProfile(node=i, beliefs=beliefs, labels=labels, probs=probs)
    return out
