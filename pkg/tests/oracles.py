"""Brute-force reference implementations used to check the fast paths.

Everything here is deliberately naive (flood fills, double loops, exhaustive
triple enumeration) and shares no code with the package internals.
"""
from __future__ import annotations

import math
from itertools import combinations

import numpy as np

from topospat import GraphKind, PersistenceDiagram, SpatialGraph


def make_graph(coords, edges) -> SpatialGraph:
    """Build a SpatialGraph from an arbitrary edge list (canonicalized here)."""
    coords = np.asarray(coords, dtype=np.float64)
    if len(edges):
        e = np.sort(np.asarray(edges, dtype=np.int64), axis=1)
        e = np.unique(e[e[:, 0] != e[:, 1]], axis=0)
    else:
        e = np.zeros((0, 2), dtype=np.int64)
    return SpatialGraph(coords, e, GraphKind.EPSILON, {})


def random_graph(rng: np.random.Generator, n: int, edge_prob: float) -> SpatialGraph:
    coords = rng.random((n, 2))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < edge_prob]
    return make_graph(coords, edges)


def hex_lattice(rows: int, cols: int, pitch: float = 1.0) -> np.ndarray:
    """Rows of a hexagonal lattice; odd rows shifted by half a pitch."""
    pts = []
    for r in range(rows):
        for c in range(cols):
            pts.append((c * pitch + (r % 2) * pitch / 2.0, r * pitch * math.sqrt(3) / 2.0))
    return np.asarray(pts)


def superlevel_components(graph: SpatialGraph, values, delta: float) -> int:
    """Connected components of the subgraph on {v : values[v] >= delta}, by BFS."""
    values = np.asarray(values, dtype=np.float64)
    active = set(np.flatnonzero(values >= delta).tolist())
    adj = {v: [] for v in active}
    for i, j in graph.edges:
        i, j = int(i), int(j)
        if i in active and j in active:
            adj[i].append(j)
            adj[j].append(i)
    seen: set[int] = set()
    comps = 0
    for v in active:
        if v in seen:
            continue
        comps += 1
        stack = [v]
        seen.add(v)
        while stack:
            u = stack.pop()
            for w in adj[u]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
    return comps


def pairs_alive_at(d: PersistenceDiagram, delta: float) -> int:
    """Alive-pair count at delta under the component-count convention."""
    alive = int(np.count_nonzero((d.deaths < delta) & (delta <= d.births)))
    if delta == d.f_min:
        alive += int(np.count_nonzero(d.essential))
    return alive


def random_diagram(rng: np.random.Generator, max_pairs: int = 12,
                   allow_degenerate: bool = True) -> PersistenceDiagram:
    """Synthetic diagram with duplicates and zero-lifetime pairs mixed in."""
    m = int(rng.integers(1, max_pairs + 1))
    births = np.round(rng.uniform(-2, 5, m), 3)
    deaths = births - np.round(rng.uniform(0, 3, m), 3)
    if allow_degenerate and m > 1:
        deaths[0] = births[0]                       # a zero-lifetime pair
        if m > 2 and rng.random() < 0.5:
            births[1], deaths[1] = births[2], deaths[2]  # a duplicate pair
    f_min = float(deaths.min())
    f_max = float(births.max())
    if rng.random() < 0.3:
        f_min -= float(np.round(rng.uniform(0, 1), 3))
        f_max += float(np.round(rng.uniform(0, 1), 3))
    essential = deaths == f_min
    return PersistenceDiagram(
        births=births, deaths=deaths,
        birth_vertices=np.arange(m, dtype=np.int64),
        essential=essential, f_min=f_min, f_max=f_max,
    )


def moran_direct(graph: SpatialGraph, values) -> float:
    """Moran's I from the dense weight matrix with explicit double loops."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    w = np.zeros((n, n))
    for i, j in graph.edges:
        w[int(i), int(j)] = 1.0
        w[int(j), int(i)] = 1.0
    dev = values - values.mean()
    num = 0.0
    for i in range(n):
        for j in range(n):
            num += w[i, j] * dev[i] * dev[j]
    return (n / w.sum()) * (num / float(np.sum(dev ** 2)))


def auprc_enumeration(scores, labels) -> float:
    """Average precision by re-counting TP/PP at every distinct threshold.

    Term-for-term the same arithmetic expression as the step estimator, so
    agreement must be exact, but tp/pp come from independent brute-force
    counts rather than cumulative sums.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    total_pos = float(labels.sum())
    terms = []
    tp_prev = 0.0
    for s in sorted(set(scores.tolist()), reverse=True):
        tp = float(sum(1 for sc, lb in zip(scores, labels) if sc >= s and lb))
        pp = float(sum(1 for sc in scores if sc >= s))
        terms.append((tp - tp_prev) * tp / pp)
        tp_prev = tp
    return math.fsum(terms) / total_pos


def spearman_direct(x, y) -> float:
    """Average-rank Spearman via explicit tie groups and a scalar Pearson."""

    def ranks(v):
        order = sorted(range(len(v)), key=lambda i: v[i])
        out = [0.0] * len(v)
        i = 0
        while i < len(v):
            j = i
            while j + 1 < len(v) and v[order[j + 1]] == v[order[i]]:
                j += 1
            r = (i + j) / 2.0 + 1.0
            for k in range(i, j + 1):
                out[order[k]] = r
            i = j + 1
        return out

    rx, ry = ranks(list(x)), ranks(list(y))
    mx = sum(rx) / len(rx)
    my = sum(ry) / len(ry)
    num = sum((a - mx) * (b - my) for a, b in zip(rx, ry))
    den = math.sqrt(sum((a - mx) ** 2 for a in rx) * sum((b - my) ** 2 for b in ry))
    return num / den


# ---------------------------------------------------------------------------
# Delaunay geometry oracle
# ---------------------------------------------------------------------------

def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _incircle(a, b, c, d) -> float:
    """Positive iff d lies strictly inside the circumcircle of ccw triangle abc."""
    m = np.array([
        [a[0] - d[0], a[1] - d[1], (a[0] - d[0]) ** 2 + (a[1] - d[1]) ** 2],
        [b[0] - d[0], b[1] - d[1], (b[0] - d[0]) ** 2 + (b[1] - d[1]) ** 2],
        [c[0] - d[0], c[1] - d[1], (c[0] - d[0]) ** 2 + (c[1] - d[1]) ** 2],
    ])
    return float(np.linalg.det(m))


def empty_circumcircle_triangles(pts, tol: float = 1e-9):
    """All triples whose circumcircle contains no other point (within tol)."""
    pts = np.asarray(pts, dtype=np.float64)
    n = len(pts)
    triangles = []
    for i, j, k in combinations(range(n), 3):
        orientation = _orient(pts[i], pts[j], pts[k])
        if abs(orientation) <= tol:
            continue
        a, b, c = (i, j, k) if orientation > 0 else (i, k, j)
        empty = True
        for l in range(n):
            if l in (i, j, k):
                continue
            if _incircle(pts[a], pts[b], pts[c], pts[l]) > tol:
                empty = False
                break
        if empty:
            triangles.append((i, j, k))
    return triangles


def delaunay_edges_bruteforce(pts, tol: float = 1e-9) -> set[tuple[int, int]]:
    """Edge set of the empty-circumcircle triangles."""
    edges: set[tuple[int, int]] = set()
    for i, j, k in empty_circumcircle_triangles(pts, tol):
        edges.update({tuple(sorted((i, j))), tuple(sorted((i, k))), tuple(sorted((j, k)))})
    return edges
