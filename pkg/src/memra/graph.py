"""Circuit digraph, spanning forests and reduced loop/cutset matrices.

All ranks here are computed in exact rational arithmetic.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .netlist import Circuit, DeviceClass

C = DeviceClass

# Lower rank is preferred when building the forest.
NORMAL_TREE_PRIORITY = {
    C.VSOURCE: 0,
    C.CAPACITOR: 1,
    C.QMEMRISTOR: 2,
    C.RRESISTOR: 2,
    C.GRESISTOR: 2,
    C.PHIMEMRISTOR: 2,
    C.INDUCTOR: 3,
    C.ISOURCE: 4,
}

# name -> (kind, device classes)
CONFIGURATIONS = {
    "V-loop": ("loop", frozenset({C.VSOURCE})),
    "I-cutset": ("cutset", frozenset({C.ISOURCE})),
    "VC-loop": ("loop", frozenset({C.VSOURCE, C.CAPACITOR})),
    "IL-cutset": ("cutset", frozenset({C.ISOURCE, C.INDUCTOR})),
    "VL-loop": ("loop", frozenset({C.VSOURCE, C.INDUCTOR})),
    "IC-cutset": ("cutset", frozenset({C.ISOURCE, C.CAPACITOR})),
    "VLW-loop": ("loop", frozenset({C.VSOURCE, C.INDUCTOR, C.PHIMEMRISTOR})),
    "ICM-cutset": ("cutset", frozenset({C.ISOURCE, C.CAPACITOR, C.QMEMRISTOR})),
}


@dataclass(frozen=True)
class Digraph:
    n: int
    m: int
    k: int
    tails: tuple
    heads: tuple
    classes: tuple = ()
    node_names: tuple = ()
    branch_ids: tuple = ()

    def branches_of(self, classes) -> tuple:
        classes = set(classes)
        return tuple(j for j, c in enumerate(self.classes) if c in classes)


def _components(n, tails, heads):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for t, h in zip(tails, heads):
        parent[find(t)] = find(h)
    return [find(x) for x in range(n)]


def digraph_from_edges(n, edges, classes=None) -> Digraph:
    tails = tuple(int(t) for t, _ in edges)
    heads = tuple(int(h) for _, h in edges)
    roots = _components(n, tails, heads)
    k = len(set(roots)) if n else 0
    classes = tuple(classes) if classes is not None else (C.RRESISTOR,) * len(tails)
    return Digraph(n, len(tails), k, tails, heads, classes,
                   tuple(str(i) for i in range(n)), tuple(f"b{j}" for j in range(len(tails))))


def build_digraph(circuit: Circuit) -> Digraph:
    names = circuit.nodes
    index = {name: i for i, name in enumerate(names)}
    branches = circuit.branches
    g = digraph_from_edges(len(names), [(index[d.tail], index[d.head]) for d in branches],
                           [d.cls for d in branches])
    return Digraph(g.n, g.m, g.k, g.tails, g.heads, g.classes, names, tuple(d.id for d in branches))


def spanning_forest(g: Digraph, priority: Optional[dict] = None) -> tuple:
    """Greedy maximal forest; branches with lower priority rank go first.

    Without a priority map branches are taken in canonical order. Returns the
    sorted tuple of tree branch indices.
    """
    if priority is None:
        order = range(g.m)
    else:
        order = sorted(range(g.m), key=lambda j: (priority[g.classes[j]], j))
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for j in order:
        a, b = find(g.tails[j]), find(g.heads[j])
        if a != b:
            parent[a] = b
            tree.append(j)
    return tuple(sorted(tree))


def normal_tree(g: Digraph) -> tuple:
    return spanning_forest(g, NORMAL_TREE_PRIORITY)


@dataclass(frozen=True)
class TopologyMatrices:
    graph: Digraph
    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    tree: tuple

    @property
    def cotree(self):
        tree = set(self.tree)
        return tuple(j for j in range(self.graph.m) if j not in tree)


def incidence_matrix(g: Digraph, reduced=True) -> np.ndarray:
    A = np.zeros((g.n, g.m), dtype=np.int64)
    for j, (t, h) in enumerate(zip(g.tails, g.heads)):
        if t != h:
            A[t, j] += 1
            A[h, j] -= 1
    if not reduced:
        return A
    roots = _components(g.n, g.tails, g.heads)
    drop = {min(x for x in range(g.n) if roots[x] == r) for r in set(roots)}
    return A[[i for i in range(g.n) if i not in drop]]


def _tree_adjacency(g, tree):
    adj = [[] for _ in range(g.n)]
    for j in tree:
        adj[g.tails[j]].append((g.heads[j], j))
        adj[g.heads[j]].append((g.tails[j], j))
    return adj


def _tree_path(adj, start, goal):
    """Branches (with traversal node pairs) of the unique tree path start -> goal."""
    prev = {start: None}
    queue = deque([start])
    while queue:
        x = queue.popleft()
        if x == goal:
            break
        for y, j in adj[x]:
            if y not in prev:
                prev[y] = (x, j)
                queue.append(y)
    path = []
    x = goal
    while prev[x] is not None:
        p, j = prev[x]
        path.append((p, x, j))
        x = p
    return path[::-1]


def loop_cutset_matrices(g: Digraph, forest: Optional[Sequence[int]] = None) -> TopologyMatrices:
    """Fundamental loop matrix B and cutset matrix D of ``forest``.

    Loop rows follow the orientation of their cotree branch; cutset rows the
    orientation of their tree branch.
    """
    if forest is None:
        forest = spanning_forest(g)
    tree = tuple(sorted(forest))
    if len(tree) != g.n - g.k:
        raise ValueError(f"forest has {len(tree)} branches, a spanning forest needs {g.n - g.k}")
    tree_set = set(tree)
    adj = _tree_adjacency(g, tree)
    cotree = [j for j in range(g.m) if j not in tree_set]

    B = np.zeros((len(cotree), g.m), dtype=np.int64)
    for row, c in enumerate(cotree):
        B[row, c] = 1
        for x, y, j in _tree_path(adj, g.heads[c], g.tails[c]):
            B[row, j] = 1 if (g.tails[j], g.heads[j]) == (x, y) else -1

    D = np.zeros((len(tree), g.m), dtype=np.int64)
    for row, t in enumerate(tree):
        # head side of the tree once branch t is removed
        side = {g.heads[t]}
        queue = deque([g.heads[t]])
        while queue:
            x = queue.popleft()
            for y, j in adj[x]:
                if j != t and y not in side:
                    side.add(y)
                    queue.append(y)
        for j in range(g.m):
            tin, hin = g.tails[j] in side, g.heads[j] in side
            if hin and not tin:
                D[row, j] = 1
            elif tin and not hin:
                D[row, j] = -1

    if np.any(B @ D.T):
        raise AssertionError("fundamental loop and cutset matrices are not orthogonal")
    return TopologyMatrices(g, incidence_matrix(g), B, D, tree)


def topology(circuit: Circuit, forest=None) -> TopologyMatrices:
    return loop_cutset_matrices(build_digraph(circuit), forest)


# -- exact linear algebra -----------------------------------------------------

def exact_rank(matrix) -> int:
    """Rank by Gaussian elimination over the rationals.

    Float entries are converted exactly (every double is a rational).
    """
    rows = [[Fraction(x) for x in row] for row in np.asarray(matrix, dtype=object).tolist()]
    if not rows or not rows[0]:
        return 0
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / p[col]
                rows[r] = [a - f * b for a, b in zip(rows[r], p)]
        rank += 1
        if rank == len(rows):
            break
    return rank


def exact_corank(matrix) -> int:
    """Dimension of the right kernel, exactly."""
    matrix = np.asarray(matrix)
    ncols = matrix.shape[1] if matrix.ndim == 2 else 0
    return ncols - exact_rank(matrix) if ncols else 0


def _columns(M, K):
    return M[:, sorted(set(K))]


def count_independent_k_loops(tm: TopologyMatrices, K: Iterable[int]) -> int:
    """Number of independent loops made only of branches in ``K`` (dim ker D_K)."""
    K = sorted(set(K))
    if not K:
        return 0
    return len(K) - exact_rank(_columns(tm.D, K))


def count_independent_k_cutsets(tm: TopologyMatrices, K: Iterable[int]) -> int:
    """Number of independent cutsets made only of branches in ``K`` (dim ker B_K)."""
    K = sorted(set(K))
    if not K:
        return 0
    return len(K) - exact_rank(_columns(tm.B, K))


def has_k_loop(tm: TopologyMatrices, K) -> bool:
    return count_independent_k_loops(tm, K) > 0


def has_k_cutset(tm: TopologyMatrices, K) -> bool:
    return count_independent_k_cutsets(tm, K) > 0


def configuration_count(tm: TopologyMatrices, name: str) -> int:
    """Independent count for a named configuration such as ``"VC-loop"``."""
    kind, classes = CONFIGURATIONS[name]
    K = tm.graph.branches_of(classes)
    if kind == "loop":
        return count_independent_k_loops(tm, K)
    return count_independent_k_cutsets(tm, K)


def configuration_flags(tm: TopologyMatrices) -> dict:
    return {name: configuration_count(tm, name) > 0 for name in CONFIGURATIONS}
