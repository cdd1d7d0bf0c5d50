"""One-sample randomized permutation test for spatial dependence.

The spatial graph and the multiset of feature values are held fixed while the
assignment of values to vertices is permuted uniformly at random. For
functional summaries (Betti curve, landscape) the test statistic of an
assignment is its L^p distance from the pointwise mean summary taken over all
permutations plus the observed assignment; for scalar summaries (total
lifetime, Moran's I) it is the absolute deviation from the analogous mean.
Deviations in either direction enlarge a distance, so the distance form
realizes a two-sided test. The p-value applies the +1/+1 pseudo-count, so it
is never exactly zero:

    p = (#{permutations with statistic >= observed} + 1) / (n_perm + 1)

Each feature draws its permutations from a counter-based stream keyed by the
global seed and a hash of the feature's values, which makes batteries
bit-reproducible regardless of feature order, execution order or worker
count.
"""
from __future__ import annotations

import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .exceptions import (
    DegenerateDataError,
    DimensionError,
    ParameterError,
    StateError,
    TopospatError,
    ValidationError,
)
from .ingest import Dataset
from .persistence import superlevel_diagram
from .spatial_graph import SpatialGraph
from .summaries import (
    _check_p,
    betti_curve,
    curve_lp_distance,
    landscape,
    landscape_lp_distance,
    mean_landscape,
    mean_step_curve,
    total_lifetime,
)


class SummaryMethod(str, Enum):
    BETTI_CURVE = "betti"
    LANDSCAPE = "landscape"
    TOTAL_LIFETIME = "total"
    MORANS_I = "moran"


_SCALAR_METHODS = (SummaryMethod.TOTAL_LIFETIME, SummaryMethod.MORANS_I)


@dataclass(frozen=True)
class TestConfig:
    __test__ = False  # not a pytest class

    method: SummaryMethod
    n_perm: int = 1000
    p: float = 2.0
    max_levels: int = 5
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "method", SummaryMethod(self.method))
        object.__setattr__(self, "p", _check_p(self.p))
        if self.n_perm < 1:
            raise ParameterError(f"n_perm must be >= 1, got {self.n_perm}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.max_levels < 1:
            raise ParameterError(f"max_levels must be >= 1, got {self.max_levels}")


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    feature_name: str
    method: str
    statistic: float
    p_value: float
    q_value: float = math.nan
    rank: int = 0
    n_perm: int = 0
    p: float = 2.0
    seed: int = 0
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


@dataclass(frozen=True)
class MoranResult:
    I: float
    feature_name: str = ""


def morans_i(graph: SpatialGraph, values) -> float:
    """Moran's I with binary adjacency weights over ordered vertex pairs."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1 or len(vals) != graph.n_vertices:
        raise DimensionError(
            f"got {vals.shape} values for a graph with {graph.n_vertices} vertices"
        )
    if not np.all(np.isfinite(vals)):
        raise ValidationError("feature values contain NaN or infinite entries")
    if graph.n_edges == 0:
        raise DegenerateDataError("graph has no edges, so all spatial weights are zero")
    dev = vals - vals.mean()
    ss = float(dev @ dev)
    if ss == 0.0:
        raise DegenerateDataError("feature is constant; spatial autocorrelation is undefined")
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    cross = 2.0 * float(dev[e0] @ dev[e1])  # both orientations of each edge
    s0 = 2.0 * graph.n_edges
    return (graph.n_vertices / s0) * (cross / ss)


def _feature_rng(seed: int, values: np.ndarray) -> np.random.Generator:
    """Counter-based stream keyed by (seed, rank pattern of the values).

    The rank pattern is invariant under feature reordering and under strictly
    increasing value transforms, so batteries are reproducible regardless of
    input order and monotone preprocessing rescales leave every feature's
    permutation draws (hence its p-value) untouched."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(len(values), dtype=np.int64)
    digest = hashlib.sha256(ranks.tobytes()).digest()
    key = tuple(int.from_bytes(digest[i:i + 8], "little") for i in range(0, 32, 8))
    seq = np.random.SeedSequence(entropy=int(seed) & (2**64 - 1), spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))


def permutation_test(graph: SpatialGraph, values, cfg: TestConfig,
                     feature_name: str = "feature") -> TestReport:
    """Test a single feature for spatial dependence; q_value and rank stay unset."""
    vals = np.asarray(values, dtype=np.float64)
    if vals.ndim != 1 or len(vals) != graph.n_vertices:
        raise DimensionError(
            f"got {vals.shape} values for a graph with {graph.n_vertices} vertices"
        )
    if not np.all(np.isfinite(vals)):
        raise ValidationError("feature values contain NaN or infinite entries")

    rng = _feature_rng(cfg.seed, vals)
    n = len(vals)
    perms = [rng.permutation(n) for _ in range(cfg.n_perm)]
    assignments = [vals] + [vals[perm] for perm in perms]

    if cfg.method in _SCALAR_METHODS:
        if cfg.method is SummaryMethod.MORANS_I:
            stats = _moran_stats(graph, vals, perms)
        else:
            stats = np.asarray(
                [total_lifetime(superlevel_diagram(graph, v)) for v in assignments]
            )
        deviations = np.abs(stats - stats.mean())
        reported = float(stats[0]) if cfg.method is SummaryMethod.MORANS_I \
            else float(deviations[0])
    elif cfg.method is SummaryMethod.BETTI_CURVE:
        curves = [betti_curve(superlevel_diagram(graph, v)) for v in assignments]
        center = mean_step_curve(curves)
        deviations = np.asarray([curve_lp_distance(c, center, cfg.p) for c in curves])
        reported = float(deviations[0])
    else:
        lands = [landscape(superlevel_diagram(graph, v), cfg.max_levels) for v in assignments]
        center = mean_landscape(lands)
        deviations = np.asarray([landscape_lp_distance(L, center, cfg.p) for L in lands])
        reported = float(deviations[0])

    count = int(np.sum(deviations[1:] >= deviations[0]))
    p_value = (count + 1) / (cfg.n_perm + 1)
    return TestReport(
        feature_name=feature_name, method=cfg.method.value, statistic=reported,
        p_value=p_value, n_perm=cfg.n_perm, p=cfg.p, seed=cfg.seed,
    )


def _moran_stats(graph: SpatialGraph, vals: np.ndarray, perms) -> np.ndarray:
    if graph.n_edges == 0:
        raise DegenerateDataError("graph has no edges, so all spatial weights are zero")
    dev = vals - vals.mean()
    ss = float(dev @ dev)
    if ss == 0.0:
        raise DegenerateDataError("feature is constant; spatial autocorrelation is undefined")
    e0, e1 = graph.edges[:, 0], graph.edges[:, 1]
    scale = graph.n_vertices / (2.0 * graph.n_edges)
    out = np.empty(len(perms) + 1)
    # same expression shape as morans_i so the observed entry matches it exactly
    out[0] = scale * (2.0 * float(dev[e0] @ dev[e1]) / ss)
    for i, perm in enumerate(perms):
        dp = dev[perm]
        out[i + 1] = scale * (2.0 * float(dp[e0] @ dp[e1]) / ss)
    return out


def benjamini_hochberg(p_values) -> np.ndarray:
    """Step-up q-values mapped back to input order; ties keep their input order."""
    ps = np.asarray(p_values, dtype=np.float64)
    if ps.ndim != 1:
        raise DimensionError("p-values must form a 1-D vector")
    if len(ps) == 0:
        return np.zeros(0)
    if np.any(~np.isfinite(ps)) or np.any(ps <= 0) or np.any(ps > 1):
        raise ValidationError("p-values must lie in (0, 1]")
    m = len(ps)
    order = np.argsort(ps, kind="stable")
    scaled = ps[order] * m / np.arange(1, m + 1)
    q_sorted = np.minimum.accumulate(scaled[::-1])[::-1]
    np.clip(q_sorted, None, 1.0, out=q_sorted)
    q = np.empty(m)
    q[order] = q_sorted
    return q


def _test_one(graph, cfg, name, values) -> TestReport:
    try:
        return permutation_test(graph, values, cfg, feature_name=name)
    except TopospatError as exc:
        return TestReport(
            feature_name=name, method=cfg.method.value, statistic=math.nan,
            p_value=math.nan, n_perm=cfg.n_perm, p=cfg.p, seed=cfg.seed,
            status=f"{type(exc).__name__}: {exc}",
        )


# worker-process state: the graph is shipped once per worker, not per feature
_WORKER_CTX: dict = {}


def _init_worker(graph, cfg):
    _WORKER_CTX["graph"] = graph
    _WORKER_CTX["cfg"] = cfg


def _pool_worker(job):
    name, values = job
    return _test_one(_WORKER_CTX["graph"], _WORKER_CTX["cfg"], name, values)


def run_battery(ds: Dataset, graph: SpatialGraph, cfg: TestConfig,
                threads: int = 1, allow_raw: bool = False) -> list[TestReport]:
    """Permutation-test every feature, BH-adjust and rank.

    Reports come back in dataset feature order. Ranks run 1..k by ascending
    p-value, ties broken by descending statistic and then by name; failed
    features sort last and keep a NaN p/q. Results are bit-identical for any
    thread count because each feature owns its random stream.
    """
    if graph.n_vertices != ds.n_locations:
        raise DimensionError(
            f"graph has {graph.n_vertices} vertices but dataset has {ds.n_locations} locations"
        )
    if not allow_raw and not all(f.transformed for f in ds.features):
        raise StateError(
            "dataset holds raw counts; transform it first or pass allow_raw=True"
        )
    if threads < 1:
        raise ParameterError(f"threads must be >= 1, got {threads}")

    jobs = [(f.name, f.values) for f in ds.features]
    if threads == 1 or len(jobs) <= 1:
        reports = [_test_one(graph, cfg, name, values) for name, values in jobs]
    else:
        lean_graph = SpatialGraph(graph.coords, graph.edges, graph.kind, graph.params)
        with ProcessPoolExecutor(max_workers=threads, initializer=_init_worker,
                                 initargs=(lean_graph, cfg)) as pool:
            reports = list(pool.map(_pool_worker, jobs,
                                    chunksize=max(1, len(jobs) // (4 * threads))))

    ok_idx = [i for i, r in enumerate(reports) if r.ok]
    if ok_idx:
        qs = benjamini_hochberg([reports[i].p_value for i in ok_idx])
        for i, q in zip(ok_idx, qs):
            reports[i].q_value = float(q)

    def sort_key(i):
        r = reports[i]
        if not r.ok:
            return (1, 0.0, 0.0, r.feature_name)
        return (0, r.p_value, -r.statistic, r.feature_name)

    for rank, i in enumerate(sorted(range(len(reports)), key=sort_key), start=1):
        reports[i].rank = rank
    return reports


def write_report(reports, path, meta: dict | None = None) -> None:
    """Report TSV (feature, method, statistic, p_value, q_value, rank, status)
    plus a JSON metadata sidecar `<path>.json`."""
    path = Path(path)
    lines = ["feature\tmethod\tstatistic\tp_value\tq_value\trank\tstatus"]
    for r in reports:
        status = r.status.replace("\t", " ").replace("\n", " ")
        lines.append(
            f"{r.feature_name}\t{r.method}\t{float(r.statistic)!r}\t{float(r.p_value)!r}"
            f"\t{float(r.q_value)!r}\t{r.rank}\t{status}"
        )
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    if reports:
        first = reports[0]
        sidecar = {"method": first.method, "n_perm": first.n_perm,
                   "p": "inf" if math.isinf(first.p) else first.p, "seed": first.seed}
    else:
        sidecar = {}
    sidecar.update(meta or {})
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2) + "\n", encoding="utf-8")


def read_report(path) -> list[TestReport]:
    """Parse a report TSV written by write_report."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    reports = []
    for line in lines[1:]:
        if not line.strip():
            continue
        name, method, stat, p_value, q_value, rank, status = line.split("\t")
        reports.append(TestReport(
            feature_name=name, method=method, statistic=float(stat),
            p_value=float(p_value), q_value=float(q_value), rank=int(rank), status=status,
        ))
    return reports
