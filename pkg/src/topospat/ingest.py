"""Loading, quality control and transformation of spatial feature matrices.

File formats are plain delimited text (tab by default, comma accepted):
a counts matrix of features x locations whose header row carries location
IDs and whose first column carries feature names, and a coordinate table
with columns id, x, y. Values are decimal reals in UTF-8.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import (
    DegenerateDataError,
    LoadError,
    ParameterError,
    ParseError,
    StateError,
    ValidationError,
)


@dataclass
class FeatureRecord:
    """One feature: its name, per-location values, and simulation ground truth."""

    name: str
    values: np.ndarray
    label: bool | None = None
    transformed: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 1:
            raise ValidationError(f"feature {self.name!r}: values must be a 1-D vector")
        if not np.all(np.isfinite(self.values)):
            raise ValidationError(f"feature {self.name!r}: values contain NaN or infinity")
        if not self.transformed and np.any(self.values < 0):
            raise ValidationError(f"feature {self.name!r}: raw counts must be non-negative")

    @property
    def total(self) -> float:
        return float(self.values.sum())


@dataclass
class Dataset:
    """Locations, aligned features and free-form provenance metadata."""

    locations: np.ndarray
    features: list[FeatureRecord]
    location_ids: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.locations = np.asarray(self.locations, dtype=np.float64)
        if self.locations.ndim != 2 or self.locations.shape[1] != 2:
            raise ValidationError("locations must be an (n, 2) coordinate array")
        if not np.all(np.isfinite(self.locations)):
            raise ValidationError("coordinates contain NaN or infinite values")
        if not self.location_ids:
            self.location_ids = [f"loc{i:04d}" for i in range(len(self.locations))]
        if len(self.location_ids) != len(self.locations):
            raise ValidationError("need one location ID per coordinate row")
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            dup = sorted({n for n in names if names.count(n) > 1})[0]
            raise ValidationError(f"duplicate feature name: {dup!r}")
        for f in self.features:
            if len(f.values) != len(self.locations):
                raise ValidationError(
                    f"feature {f.name!r} has {len(f.values)} values for "
                    f"{len(self.locations)} locations"
                )

    @property
    def n_locations(self) -> int:
        return len(self.locations)

    @property
    def n_features(self) -> int:
        return len(self.features)

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def transformed(self) -> bool:
        return bool(self.features) and all(f.transformed for f in self.features)


def _sniff_delimiter(first_line: str) -> str:
    return "\t" if "\t" in first_line else ","


def _read_rows(path: Path) -> list[list[str]]:
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise LoadError(f"{path}: file is empty")
    delim = _sniff_delimiter(lines[0])
    return [row for row in csv.reader(lines, delimiter=delim)]


def _parse_cell(raw: str, path: Path, row: int, col: str) -> float:
    try:
        val = float(raw)
    except ValueError:
        raise ParseError(
            f"{path}: row {row}, column {col!r}: cannot parse {raw.strip()!r} as a number"
        ) from None
    if math.isnan(val) or math.isinf(val):
        raise ParseError(f"{path}: row {row}, column {col!r}: non-finite value {raw.strip()!r}")
    return val


def load_dataset(counts_path, coords_path) -> Dataset:
    """Load a counts matrix and a coordinate table into an aligned Dataset.

    Locations are ordered as in the coordinate file and every feature is
    re-indexed to that order. The two files must cover exactly the same
    location IDs.
    """
    counts_path, coords_path = Path(counts_path), Path(coords_path)

    coord_rows = _read_rows(coords_path)
    header = [h.strip().lower() for h in coord_rows[0]]
    if header[:3] != ["id", "x", "y"]:
        raise LoadError(f"{coords_path}: expected header 'id<TAB>x<TAB>y', got {coord_rows[0]!r}")
    ids: list[str] = []
    xy = []
    for r, row in enumerate(coord_rows[1:], start=2):
        if len(row) < 3:
            raise ParseError(f"{coords_path}: row {r}: expected 3 columns, got {len(row)}")
        ids.append(row[0].strip())
        xy.append((_parse_cell(row[1], coords_path, r, "x"),
                   _parse_cell(row[2], coords_path, r, "y")))
    if len(set(ids)) != len(ids):
        dup = sorted({i for i in ids if ids.count(i) > 1})[0]
        raise LoadError(f"{coords_path}: duplicate location ID {dup!r}")

    count_rows = _read_rows(counts_path)
    count_ids = [c.strip() for c in count_rows[0][1:]]
    known = set(ids)
    for cid in count_ids:
        if cid not in known:
            raise LoadError(
                f"location ID {cid!r} appears in {counts_path} but not in {coords_path}"
            )
    in_counts = set(count_ids)
    for cid in ids:
        if cid not in in_counts:
            raise LoadError(
                f"location ID {cid!r} appears in {coords_path} but not in {counts_path}"
            )
    if len(in_counts) != len(count_ids):
        dup = sorted({i for i in count_ids if count_ids.count(i) > 1})[0]
        raise LoadError(f"{counts_path}: duplicate location ID {dup!r}")

    # column order in the counts file -> coordinate-file order
    reorder = [count_ids.index(cid) for cid in ids]
    features = []
    for r, row in enumerate(count_rows[1:], start=2):
        if len(row) != len(count_ids) + 1:
            raise ParseError(
                f"{counts_path}: row {r}: expected {len(count_ids) + 1} columns, got {len(row)}"
            )
        name = row[0].strip()
        vals = [_parse_cell(cell, counts_path, r, count_ids[c])
                for c, cell in enumerate(row[1:])]
        arr = np.asarray(vals, dtype=np.float64)[reorder]
        features.append(FeatureRecord(name=name, values=arr))

    meta = {"counts_path": str(counts_path), "coords_path": str(coords_path)}
    return Dataset(locations=np.asarray(xy), features=features,
                   location_ids=ids, metadata=meta)


def qc_filter(ds: Dataset, min_feature_total: float = 10,
              min_presence_fraction: float = 0.01,
              min_location_total: float = 10) -> Dataset:
    """Drop weak features, then weak locations.

    A feature survives when its total count reaches min_feature_total and it
    is nonzero in at least ceil(min_presence_fraction * n_locations)
    locations; afterwards a location survives when its total across the
    retained features reaches min_location_total. Dropped names/IDs are
    recorded in the returned metadata.
    """
    if ds.transformed:
        raise StateError("qc_filter expects raw counts; dataset is already transformed")
    min_presence = math.ceil(min_presence_fraction * ds.n_locations)
    kept_features, dropped_features = [], []
    for f in ds.features:
        presence = int(np.count_nonzero(f.values > 0))
        if f.total < min_feature_total or presence < min_presence:
            dropped_features.append(f.name)
        else:
            kept_features.append(f)
    if not kept_features:
        raise DegenerateDataError("QC removed every feature")

    totals = np.zeros(ds.n_locations)
    for f in kept_features:
        totals += f.values
    keep_loc = totals >= min_location_total
    if not keep_loc.any():
        raise DegenerateDataError("QC removed every location")
    dropped_locations = [ds.location_ids[i] for i in np.flatnonzero(~keep_loc)]

    features = [
        FeatureRecord(name=f.name, values=f.values[keep_loc], label=f.label,
                      transformed=f.transformed)
        for f in kept_features
    ]
    meta = dict(ds.metadata)
    meta["qc_dropped_features"] = dropped_features
    meta["qc_dropped_locations"] = dropped_locations
    return Dataset(locations=ds.locations[keep_loc], features=features,
                   location_ids=[i for i, k in zip(ds.location_ids, keep_loc) if k],
                   metadata=meta)


def shifted_log_transform(ds: Dataset, pseudo_count: float = 2.0) -> Dataset:
    """Replace every value v by ln(v + pseudo_count). Not idempotent by design."""
    if pseudo_count <= 0:
        raise ParameterError(f"pseudo_count must be positive, got {pseudo_count}")
    if any(f.transformed for f in ds.features):
        raise StateError("dataset is already transformed")
    features = [
        FeatureRecord(name=f.name, values=np.log(f.values + pseudo_count),
                      label=f.label, transformed=True)
        for f in ds.features
    ]
    meta = dict(ds.metadata)
    meta["transform"] = f"log(f+{pseudo_count:g})"
    return Dataset(locations=ds.locations, features=features,
                   location_ids=list(ds.location_ids), metadata=meta)


def exclude_prefixes(ds: Dataset, prefixes) -> Dataset:
    """Drop features whose name starts with any of the given prefixes
    (case-insensitive); the organism-specific deny-list behind --exclude-prefix."""
    prefixes = [p.lower() for p in prefixes]
    if not prefixes:
        return ds
    kept, dropped = [], []
    for f in ds.features:
        if any(f.name.lower().startswith(p) for p in prefixes):
            dropped.append(f.name)
        else:
            kept.append(f)
    if not kept:
        raise DegenerateDataError("prefix deny-list removed every feature")
    meta = dict(ds.metadata)
    meta["excluded_by_prefix"] = dropped
    return Dataset(locations=ds.locations, features=kept,
                   location_ids=list(ds.location_ids), metadata=meta)


def write_dataset(ds: Dataset, counts_path, coords_path, labels_path=None) -> None:
    """Write counts/coords (and optional labels) TSVs that load_dataset round-trips."""
    counts_path, coords_path = Path(counts_path), Path(coords_path)
    lines = ["feature\t" + "\t".join(ds.location_ids)]
    for f in ds.features:
        lines.append(f.name + "\t" + "\t".join(repr(float(v)) for v in f.values))
    counts_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    lines = ["id\tx\ty"]
    for lid, (x, y) in zip(ds.location_ids, ds.locations):
        lines.append(f"{lid}\t{float(x)!r}\t{float(y)!r}")
    coords_path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    if labels_path is not None:
        lines = ["feature\tlabel"]
        for f in ds.features:
            lines.append(f"{f.name}\t{1 if f.label else 0}")
        Path(labels_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_labels(path) -> dict[str, bool]:
    """Read a feature<TAB>label table (1/0 or true/false) into a dict."""
    path = Path(path)
    rows = _read_rows(path)
    labels: dict[str, bool] = {}
    for r, row in enumerate(rows[1:], start=2):
        if len(row) < 2:
            raise ParseError(f"{path}: row {r}: expected 2 columns, got {len(row)}")
        raw = row[1].strip().lower()
        if raw in ("1", "true"):
            labels[row[0].strip()] = True
        elif raw in ("0", "false"):
            labels[row[0].strip()] = False
        else:
            raise ParseError(f"{path}: row {r}, column 'label': cannot parse {row[1]!r}")
    return labels
