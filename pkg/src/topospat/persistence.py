"""0-dimensional persistent homology of superlevel-set vertex filtrations.

The filtration threshold sweeps from the maximum to the minimum vertex value;
a vertex enters when its value is reached, an edge as soon as both endpoints
are present. For connected components, higher simplices and cubical cells
never matter, so one union-find sweep over the graph serves the simplicial
(epsilon/Delaunay/hex) and cubical (rectangular grid) constructions alike.

Conventions, fixed for determinism:
  * births and deaths are filtration (= vertex) values with birth >= death;
  * components that never merge die at the global minimum value instead of
    at -infinity;
  * equal values are processed in increasing vertex-index order, and on a
    merge between equally old components the one with the smaller birth
    vertex survives. Plateau merges therefore yield explicit zero-lifetime
    pairs; they contribute nothing to any downstream summary.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DimensionError, ValidationError
from .spatial_graph import SpatialGraph


@dataclass(frozen=True)
class PersistencePair:
    birth: float
    death: float
    birth_vertex: int
    essential: bool = False

    @property
    def lifetime(self) -> float:
        return self.birth - self.death


@dataclass(frozen=True)
class DiagramStats:
    n_pairs: int
    max_lifetime: float
    n_essential: int


@dataclass(frozen=True)
class PersistenceDiagram:
    """Multiset of (birth, death) pairs of one H0 superlevel filtration.

    Stored as parallel arrays; `essential` flags components of the full graph
    (those that never merged). f_min/f_max give the filtered value range, which
    is also the domain of every functional summary.
    """

    births: np.ndarray
    deaths: np.ndarray
    birth_vertices: np.ndarray
    essential: np.ndarray
    f_min: float
    f_max: float

    homology_dim = 0

    def __post_init__(self):
        m = len(self.births)
        if not (len(self.deaths) == len(self.birth_vertices) == len(self.essential) == m):
            raise ValidationError("diagram arrays must have equal lengths")
        if m and np.any(self.births < self.deaths):
            raise ValidationError("every pair needs birth >= death")
        if m and (self.deaths.min() < self.f_min or self.births.max() > self.f_max):
            raise ValidationError("births and deaths must lie within [f_min, f_max]")

    def __len__(self) -> int:
        return len(self.births)

    @property
    def n_pairs(self) -> int:
        return len(self.births)

    @property
    def pairs(self) -> tuple[PersistencePair, ...]:
        return tuple(
            PersistencePair(float(b), float(d), int(v), bool(e))
            for b, d, v, e in zip(self.births, self.deaths, self.birth_vertices, self.essential)
        )

    def lifetimes(self) -> np.ndarray:
        return self.births - self.deaths


def superlevel_diagram(graph: SpatialGraph, values) -> PersistenceDiagram:
    """H0 persistence diagram of the superlevel-set filtration of `values` on `graph`."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1 or len(vals) != graph.n_vertices:
        raise DimensionError(
            f"got {vals.shape} values for a graph with {graph.n_vertices} vertices"
        )
    if len(vals) and not np.all(np.isfinite(vals)):
        raise ValidationError("feature values contain NaN or infinite entries")
    if len(vals) == 0:
        empty = np.zeros(0)
        return PersistenceDiagram(empty, empty.copy(), np.zeros(0, dtype=np.int64),
                                  np.zeros(0, dtype=bool), 0.0, 0.0)

    f_min = float(vals.min())
    f_max = float(vals.max())
    births, deaths, bvs, ess = _h0_sweep(graph.neighbor_lists, vals, f_min)

    births = np.asarray(births, dtype=np.float64)
    deaths = np.asarray(deaths, dtype=np.float64)
    bvs = np.asarray(bvs, dtype=np.int64)
    ess = np.asarray(ess, dtype=bool)
    # Canonical order: birth descending, then death descending, then birth vertex.
    order = np.lexsort((bvs, -deaths, -births))
    return PersistenceDiagram(births[order], deaths[order], bvs[order], ess[order], f_min, f_max)


def _h0_sweep(neighbors: list[list[int]], vals: np.ndarray, f_min: float):
    """Union-find sweep in decreasing value order with the elder rule."""
    n = len(vals)
    order = np.lexsort((np.arange(n), -vals)).tolist()
    values = vals.tolist()

    parent = list(range(n))
    birth_val = [0.0] * n   # valid at roots only
    birth_vtx = list(range(n))
    active = bytearray(n)

    births: list[float] = []
    deaths: list[float] = []
    bvs: list[int] = []

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in order:
        val = values[v]
        roots = []
        for u in neighbors[v]:
            if active[u]:
                r = find(u)
                if r not in roots:
                    roots.append(r)
        active[v] = 1
        if not roots:
            birth_val[v] = val
            birth_vtx[v] = v
            continue
        # v joins an existing component; distinct neighbouring components merge
        # here and the younger one dies at the current value.
        elder = roots[0]
        for r in roots[1:]:
            if (birth_val[r], -birth_vtx[r]) > (birth_val[elder], -birth_vtx[elder]):
                elder = r
        for r in roots:
            if r == elder:
                continue
            births.append(birth_val[r])
            deaths.append(val)
            bvs.append(birth_vtx[r])
            parent[r] = elder
        parent[v] = elder

    ess_flags = [False] * len(births)
    for v in range(n):
        if parent[v] == v:
            births.append(birth_val[v])
            deaths.append(f_min)
            bvs.append(birth_vtx[v])
            ess_flags.append(True)
    return births, deaths, bvs, ess_flags


def sublevel_diagram(graph: SpatialGraph, values) -> PersistenceDiagram:
    """Sublevel-set variant via negation; provided for completeness.

    Births/deaths come back in negated coordinates (birth = -entry value), so
    downstream summaries treat the result exactly like a superlevel diagram.
    """
    return superlevel_diagram(graph, -np.asarray(values, dtype=np.float64))


def diagram_stats(d: PersistenceDiagram) -> DiagramStats:
    """Pair count, maximum lifetime and the number of pairs dying at f_min."""
    if len(d) == 0:
        return DiagramStats(0, 0.0, 0)
    life = d.lifetimes()
    return DiagramStats(len(d), float(life.max()), int(np.count_nonzero(d.deaths == d.f_min)))


def write_diagram(d: PersistenceDiagram, path) -> None:
    """TSV export: birth, death, birth_vertex rows under f_min/f_max comments."""
    lines = [f"# f_min={d.f_min!r}", f"# f_max={d.f_max!r}", "birth\tdeath\tbirth_vertex"]
    for b, dd, v in zip(d.births, d.deaths, d.birth_vertices):
        lines.append(f"{float(b)!r}\t{float(dd)!r}\t{int(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
