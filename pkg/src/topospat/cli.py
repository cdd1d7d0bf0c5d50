"""Command-line entry point: simulate, test, eval and sweep subcommands.

Every subcommand resolves its full parameter set up front, hashes its inputs
and writes a manifest next to its outputs, so a result directory is
self-describing and reruns with the same flags reproduce the result tables
byte for byte. Result files are written atomically (temp file + rename).

Exit codes: 0 success, 2 usage error, 1 runtime error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import (
    EvalResult,
    auprc,
    bootstrap_sd,
    sensitivity_specificity,
    spearman,
    top_k_true_proportion,
)
from .exceptions import LoadError, TopospatError
from .ingest import (
    Dataset,
    exclude_prefixes,
    load_dataset,
    load_labels,
    qc_filter,
    shifted_log_transform,
    write_dataset,
)
from .simulate import CountDistribution, SimConfig, SpatialPattern, simulate_dataset
from .spatial_graph import (
    delaunay_graph,
    epsilon_graph,
    hex_grid_graph,
    rect_grid_graph,
)
from .spatial_stats import SummaryMethod, TestConfig, read_report, run_battery, write_report

_METHOD_NAMES = [m.value for m in SummaryMethod]
_PATTERN_NAMES = [p.value for p in SpatialPattern]


def _parse_p(text: str) -> float:
    if text == "inf":
        return math.inf
    if text in ("1", "2"):
        return float(text)
    raise argparse.ArgumentTypeError(f"p must be 1, 2 or inf, got {text!r}")


def _default_threads() -> int:
    env = os.environ.get("TOPOSPAT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path) -> str:
    h = hashlib.sha256()
    h.update(Path(path).read_bytes())
    return h.hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, params: dict, seed,
                    input_hashes: dict, timings: dict, outputs: list[str]) -> None:
    manifest = {
        "tool": "topospat",
        "version": __version__,
        "subcommand": subcommand,
        "parameters": params,
        "seed": seed,
        "input_hashes": input_hashes,
        "timings_s": {k: round(v, 6) for k, v in timings.items()},
        "outputs": outputs,
    }
    _atomic_write(out_dir / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def _fmt(value: float) -> str:
    return repr(float(value))


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _cmd_simulate(args) -> int:
    cfg = SimConfig(
        pattern=args.pattern,
        n_locations=args.n_locations,
        mu=args.mu,
        dispersion=args.dispersion,
        zero_prop=args.zero_prop,
        effect_sizes=args.effect_sizes,
        effect_scale=args.effect_scale,
        distribution=args.distribution,
        n_signal=args.n_signal,
        n_null=args.n_null,
        seed=args.seed,
        continuous_gradient=args.continuous_gradient,
    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = {}
    t0 = time.perf_counter()
    ds = simulate_dataset(cfg)
    timings["simulate"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        tmp = Path(tmp)
        write_dataset(ds, tmp / "counts.tsv", tmp / "coords.tsv", tmp / "labels.tsv")
        for name in ("counts.tsv", "coords.tsv", "labels.tsv"):
            os.replace(tmp / name, out / name)
    timings["write"] = time.perf_counter() - t0

    params = {k: (v.value if hasattr(v, "value") else list(v) if isinstance(v, tuple) else v)
              for k, v in vars(cfg).items()}
    _write_manifest(out, "simulate", params, cfg.seed, {}, timings,
                    ["counts.tsv", "coords.tsv", "labels.tsv"])
    return 0


# ---------------------------------------------------------------------------
# test
# ---------------------------------------------------------------------------

def _build_graph(args, ds: Dataset):
    if args.graph == "epsilon":
        return epsilon_graph(ds.locations, args.epsilon)
    if args.graph == "delaunay":
        return delaunay_graph(ds.locations)
    if args.graph == "hex":
        return hex_grid_graph(ds.locations, pitch=args.pitch, strict=args.strict)
    return rect_grid_graph(ds.locations)


def _run_test_pipeline(args, counts, coords):
    timings = {}
    t0 = time.perf_counter()
    ds = load_dataset(counts, coords)
    if args.exclude_prefix:
        ds = exclude_prefixes(ds, args.exclude_prefix)
    if not args.no_qc:
        ds = qc_filter(ds)
    if not args.allow_raw:
        ds = shifted_log_transform(ds)
    timings["ingest"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    graph = _build_graph(args, ds)
    timings["graph"] = time.perf_counter() - t0

    cfg = TestConfig(method=args.method, n_perm=args.n_perm, p=args.p,
                     max_levels=args.max_levels, seed=args.seed, alpha=args.alpha)
    t0 = time.perf_counter()
    reports = run_battery(ds, graph, cfg, threads=args.threads, allow_raw=args.allow_raw)
    timings["battery"] = time.perf_counter() - t0
    return ds, graph, cfg, reports, timings


def _cmd_test(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ds, graph, cfg, reports, timings = _run_test_pipeline(args, args.counts, args.coords)

    ranked = sorted(reports, key=lambda r: r.rank)
    with tempfile.TemporaryDirectory(dir=out) as tmp:
        tmp_path = Path(tmp) / "report.tsv"
        write_report(ranked, tmp_path, meta={
            "graph": graph.kind.value, "graph_params": graph.params,
            "alpha": cfg.alpha, "max_levels": cfg.max_levels,
            "n_features": ds.n_features, "n_locations": ds.n_locations,
        })
        os.replace(tmp_path, out / "report.tsv")
        os.replace(str(tmp_path) + ".json", str(out / "report.tsv") + ".json")

    params = {k: v for k, v in vars(args).items() if k not in ("func",)}
    params["p"] = "inf" if math.isinf(args.p) else args.p
    _write_manifest(out, "test", params, args.seed,
                    {"counts": _sha256(args.counts), "coords": _sha256(args.coords)},
                    timings, ["report.tsv", "report.tsv.json"])
    return 0


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _report_scores(path, labels: dict[str, bool]):
    """Join one report against the label table; returns ok-row arrays."""
    rows = [r for r in read_report(path) if r.ok]
    missing = [r.feature_name for r in rows if r.feature_name not in labels]
    if missing:
        raise LoadError(
            f"{path}: features absent from the label table: {', '.join(sorted(missing)[:5])}"
        )
    names = [r.feature_name for r in rows]
    scores = np.asarray([-r.p_value for r in rows])
    qs = np.asarray([r.q_value for r in rows])
    labs = np.asarray([labels[n] for n in names], dtype=bool)
    method = rows[0].method if rows else "unknown"
    return names, scores, qs, labs, method


def _cmd_eval(args) -> int:
    labels = load_labels(args.labels) if args.labels else {}
    results: list[EvalResult] = []
    if args.metric == "spearman":
        if len(args.report) < 2:
            raise TopospatError("--metric spearman needs at least two --report files")
        parsed = []
        for path in args.report:
            reports = {r.feature_name: r for r in read_report(path) if r.ok}
            parsed.append((path, reports))
        for i in range(len(parsed)):
            for j in range(i + 1, len(parsed)):
                (p1, r1), (p2, r2) = parsed[i], parsed[j]
                common = sorted(set(r1) & set(r2))
                mismatch = sorted(set(r1) ^ set(r2))
                if mismatch:
                    raise LoadError(
                        f"reports {p1} and {p2} disagree on features: "
                        f"{', '.join(mismatch[:5])}"
                    )
                x = [r1[n].rank for n in common]
                y = [r2[n].rank for n in common]
                m1 = next(iter(r1.values())).method
                m2 = next(iter(r2.values())).method
                results.append(EvalResult("spearman", spearman(x, y),
                                          method=f"{m1}|{m2}", params={"n": len(common)}))
    else:
        if not args.labels:
            raise TopospatError(f"--metric {args.metric} needs --labels")
        for path in args.report:
            names, scores, qs, labs, method = _report_scores(path, labels)
            if args.metric == "auprc":
                results.append(EvalResult(
                    "auprc", auprc(scores, labs), method=method,
                    bootstrap_sd=bootstrap_sd(auprc, scores, labs, n_boot=args.n_boot,
                                              seed=args.seed),
                    params={"n_boot": args.n_boot}))
            elif args.metric == "sens-spec":
                sens, spec = sensitivity_specificity(qs, labs, alpha=args.alpha)
                sd_sens = bootstrap_sd(
                    lambda q, l: sensitivity_specificity(q, l, alpha=args.alpha)[0],
                    qs, labs, n_boot=args.n_boot, seed=args.seed)
                sd_spec = bootstrap_sd(
                    lambda q, l: sensitivity_specificity(q, l, alpha=args.alpha)[1],
                    qs, labs, n_boot=args.n_boot, seed=args.seed)
                results.append(EvalResult("sensitivity", sens, method=method,
                                          bootstrap_sd=sd_sens, params={"alpha": args.alpha}))
                results.append(EvalResult("specificity", spec, method=method,
                                          bootstrap_sd=sd_spec, params={"alpha": args.alpha}))
            else:  # topk
                results.append(EvalResult(
                    "top_k_true_proportion",
                    top_k_true_proportion(scores, labs, args.k, names=names),
                    method=method, params={"k": args.k}))

    lines = ["metric\tmethod\tvalue\tsd\tparams"]
    for r in results:
        sd_text = "" if r.bootstrap_sd is None else _fmt(r.bootstrap_sd)
        params = ";".join(f"{k}={v}" for k, v in r.params.items())
        lines.append(f"{r.metric}\t{r.method}\t{_fmt(r.value)}\t{sd_text}\t{params}")
    _atomic_write(Path(args.out), "\n".join(lines) + "\n")
    return 0


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def _cmd_sweep(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    patterns = args.pattern or ["clusters"]
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in _METHOD_NAMES:
            raise TopospatError(f"unknown method {m!r}; choose from {_METHOD_NAMES}")
    values = [float(v) for v in args.values.split(",") if v.strip()]
    if not values:
        raise TopospatError("--values is empty")

    rows = []
    timings = {}
    for pat_idx, pattern in enumerate(patterns):
        for val_idx, axis_value in enumerate(values):
            cell = f"{pattern}@{axis_value:g}"
            t0 = time.perf_counter()
            cell_seed = int(np.random.SeedSequence(
                entropy=args.seed, spawn_key=(pat_idx, val_idx)).generate_state(1)[0])
            try:
                sim_kwargs = dict(
                    pattern=pattern, n_locations=args.n_locations, mu=args.mu,
                    dispersion=args.dispersion, distribution=args.distribution,
                    n_signal=args.n_signal, n_null=args.n_null, seed=cell_seed,
                )
                if args.axis == "zero-prop":
                    sim_kwargs["zero_prop"] = axis_value
                else:
                    sim_kwargs["effect_scale"] = axis_value
                    sim_kwargs["zero_prop"] = args.zero_prop
                ds = simulate_dataset(SimConfig(**sim_kwargs))
                # simulated data skips QC: every simulated feature must be scored
                ds = shifted_log_transform(ds)
                if args.graph == "epsilon":
                    graph = epsilon_graph(ds.locations, args.epsilon)
                else:
                    graph = delaunay_graph(ds.locations)
                label_of = {f.name: bool(f.label) for f in ds.features}
            except TopospatError as exc:
                for method in methods:
                    for metric in ("auprc", "sensitivity", "specificity"):
                        rows.append((pattern, args.axis, axis_value, method, metric,
                                     math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
                timings[cell] = time.perf_counter() - t0
                continue

            for method in methods:
                try:
                    cfg = TestConfig(method=method, n_perm=args.n_perm, p=args.p,
                                     max_levels=args.max_levels, seed=args.seed,
                                     alpha=args.alpha)
                    reports = [r for r in run_battery(ds, graph, cfg, threads=args.threads)
                               if r.ok]
                    scores = np.asarray([-r.p_value for r in reports])
                    qs = np.asarray([r.q_value for r in reports])
                    labs = np.asarray([label_of[r.feature_name] for r in reports])
                    val = auprc(scores, labs)
                    sd = bootstrap_sd(auprc, scores, labs, n_boot=args.n_boot,
                                      seed=args.seed)
                    sens, spec = sensitivity_specificity(qs, labs, alpha=args.alpha)
                    rows.append((pattern, args.axis, axis_value, method, "auprc",
                                 val, sd, "ok"))
                    rows.append((pattern, args.axis, axis_value, method, "sensitivity",
                                 sens, math.nan, "ok"))
                    rows.append((pattern, args.axis, axis_value, method, "specificity",
                                 spec, math.nan, "ok"))
                except TopospatError as exc:
                    for metric in ("auprc", "sensitivity", "specificity"):
                        rows.append((pattern, args.axis, axis_value, method, metric,
                                     math.nan, math.nan, f"{type(exc).__name__}: {exc}"))
            timings[cell] = time.perf_counter() - t0

    lines = ["pattern\taxis\taxis_value\tmethod\tmetric\tvalue\tsd\tstatus"]
    for pattern, axis, axis_value, method, metric, value, sd, status in rows:
        status = status.replace("\t", " ").replace("\n", " ")
        lines.append(f"{pattern}\t{axis}\t{_fmt(axis_value)}\t{method}\t{metric}"
                     f"\t{_fmt(value)}\t{_fmt(sd)}\t{status}")
    _atomic_write(out / "sweep.tsv", "\n".join(lines) + "\n")

    params = {k: v for k, v in vars(args).items() if k != "func"}
    params["p"] = "inf" if math.isinf(args.p) else args.p
    _write_manifest(out, "sweep", params, args.seed, {}, timings, ["sweep.tsv"])
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="topospat",
        description="Detect spatially variable features via persistent homology "
                    "of superlevel-set filtrations on spatial graphs.",
    )
    parser.add_argument("--version", action="version", version=f"topospat {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a labelled synthetic dataset")
    sim.add_argument("--out-dir", required=True)
    sim.add_argument("--pattern", required=True, choices=_PATTERN_NAMES)
    sim.add_argument("--n-locations", type=int, default=400)
    sim.add_argument("--mu", type=float, default=1.0)
    sim.add_argument("--dispersion", type=float, default=0.3)
    sim.add_argument("--zero-prop", type=float, default=0.0)
    sim.add_argument("--effect-sizes", type=lambda s: tuple(float(x) for x in s.split(",")),
                     default=None, metavar="E1,E2,...")
    sim.add_argument("--effect-scale", type=float, default=1.0)
    sim.add_argument("--distribution", choices=[d.value for d in CountDistribution],
                     default="negbinomial")
    sim.add_argument("--n-signal", type=int, default=50)
    sim.add_argument("--n-null", type=int, default=50)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--continuous-gradient", action="store_true")
    sim.set_defaults(func=_cmd_simulate)

    test = sub.add_parser("test", help="run the spatial-dependence battery on a dataset")
    test.add_argument("--counts", required=True)
    test.add_argument("--coords", required=True)
    test.add_argument("--out-dir", required=True)
    test.add_argument("--graph", required=True, choices=["epsilon", "delaunay", "hex", "rect"])
    test.add_argument("--epsilon", type=float, default=None)
    test.add_argument("--pitch", type=float, default=None)
    test.add_argument("--strict", action="store_true")
    test.add_argument("--method", required=True, choices=_METHOD_NAMES)
    test.add_argument("--p", type=_parse_p, default=2.0)
    test.add_argument("--n-perm", type=int, default=1000)
    test.add_argument("--max-levels", type=int, default=5)
    test.add_argument("--alpha", type=float, default=0.05)
    test.add_argument("--seed", type=int, default=0)
    test.add_argument("--exclude-prefix", action="append", default=[])
    test.add_argument("--threads", type=int, default=None)
    test.add_argument("--no-qc", action="store_true")
    test.add_argument("--allow-raw", action="store_true")
    test.set_defaults(func=_cmd_test)

    ev = sub.add_parser("eval", help="score a report against ground-truth labels")
    ev.add_argument("--report", action="append", required=True)
    ev.add_argument("--labels", default=None)
    ev.add_argument("--metric", required=True,
                    choices=["auprc", "sens-spec", "topk", "spearman"])
    ev.add_argument("--alpha", type=float, default=0.05)
    ev.add_argument("--k", type=int, default=None)
    ev.add_argument("--n-boot", type=int, default=1000)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=_cmd_eval)

    sw = sub.add_parser("sweep", help="simulate/test/evaluate over a parameter grid")
    sw.add_argument("--out-dir", required=True)
    sw.add_argument("--axis", required=True, choices=["zero-prop", "effect-scale"])
    sw.add_argument("--values", required=True, metavar="V1,V2,...")
    sw.add_argument("--methods", required=True, metavar="M1,M2,...")
    sw.add_argument("--pattern", action="append", choices=_PATTERN_NAMES)
    sw.add_argument("--n-locations", type=int, default=400)
    sw.add_argument("--mu", type=float, default=1.0)
    sw.add_argument("--dispersion", type=float, default=0.3)
    sw.add_argument("--zero-prop", type=float, default=0.1)
    sw.add_argument("--distribution", choices=[d.value for d in CountDistribution],
                    default="negbinomial")
    sw.add_argument("--n-signal", type=int, default=50)
    sw.add_argument("--n-null", type=int, default=50)
    sw.add_argument("--graph", choices=["delaunay", "epsilon"], default="delaunay")
    sw.add_argument("--epsilon", type=float, default=None)
    sw.add_argument("--p", type=_parse_p, default=2.0)
    sw.add_argument("--n-perm", type=int, default=200)
    sw.add_argument("--max-levels", type=int, default=5)
    sw.add_argument("--alpha", type=float, default=0.05)
    sw.add_argument("--n-boot", type=int, default=1000)
    sw.add_argument("--seed", type=int, default=0)
    sw.add_argument("--threads", type=int, default=None)
    sw.set_defaults(func=_cmd_sweep)
    return parser


def _validate_cross_flags(parser: argparse.ArgumentParser, args) -> None:
    if args.command in ("test", "sweep"):
        if getattr(args, "graph", None) == "epsilon" and args.epsilon is None:
            parser.error("--graph epsilon requires --epsilon")
        if args.epsilon is not None and args.epsilon <= 0:
            parser.error("--epsilon must be positive")
        if args.threads is None:
            args.threads = _default_threads()
        elif args.threads < 1:
            parser.error("--threads must be >= 1")
    if args.command == "simulate":
        if not 0.0 <= args.zero_prop < 1.0:
            parser.error("--zero-prop must lie in [0, 1)")
    if args.command == "eval":
        if args.metric == "topk":
            if args.k is None or args.k < 1:
                parser.error("--metric topk requires --k >= 1")
        if args.metric != "spearman" and not args.labels:
            parser.error(f"--metric {args.metric} requires --labels")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate_cross_flags(parser, args)
    try:
        return args.func(args)
    except TopospatError as exc:
        print(f"topospat: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"topospat: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
