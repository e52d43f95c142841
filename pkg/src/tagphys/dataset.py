"""Tag-to-physics records: ingestion, feature vectors, stratified splits and folds."""
from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyDataset, InvalidParams, MissingScalar, SchemaError, TagPhysError, ValidationError
from .params import FOREST_GROUPS, PHYSICS_COLUMNS, PhysicsParams
from .tagparse import (
    FabricAttributes,
    FiberComposition,
    Vocabulary,
    canonicalize_fiber,
    default_vocabulary,
    parse_tag,
    validate_attributes,
)

CSV_COLUMNS = ("id", "composition", "family", "structure") + PHYSICS_COLUMNS


class DegenerateStratum(UserWarning):
    """A stratum too small to spread over train/val/test; it goes to train."""


@dataclass(frozen=True)
class T2PRecord:
    id: str
    attributes: FabricAttributes
    physics: PhysicsParams


class T2PDataset:
    """Immutable collection of records sharing one vocabulary."""

    def __init__(self, records: Iterable[T2PRecord], vocab: Vocabulary | None = None):
        self.records = tuple(records)
        self.vocab = vocab or default_vocabulary()
        ids = [r.id for r in self.records]
        if len(set(ids)) != len(ids):
            seen, dup = set(), None
            for i in ids:
                if i in seen:
                    dup = i
                    break
                seen.add(i)
            raise SchemaError(f"duplicate id {dup!r}")

    @property
    def vocab_fingerprint(self) -> str:
        return self.vocab.fingerprint

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def ids(self) -> list[str]:
        return [r.id for r in self.records]

    def subset(self, ids: Iterable[str]) -> "T2PDataset":
        wanted = set(ids)
        return T2PDataset([r for r in self.records if r.id in wanted], self.vocab)

    def scalars(self) -> np.ndarray:
        """(n, 2) array of (density, thickness)."""
        return np.array([[r.attributes.density, r.attributes.thickness] for r in self.records], dtype=float)

    def targets(self, group: str) -> np.ndarray:
        cols = FOREST_GROUPS[group]
        return np.array([[r.physics.to_flat()[c] for c in cols] for r in self.records], dtype=float).reshape(
            len(self.records), len(cols)
        )

    def features(self) -> np.ndarray:
        return feature_matrix(self.records, self.vocab)


# ---------------------------------------------------------------- ingestion


def _composition_text(value, vocab) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, list):
        parts = []
        for item in value:
            if not isinstance(item, dict) or "fiber" not in item or "percent" not in item:
                raise SchemaError("composition array items need 'fiber' and 'percent'")
            parts.append(f"{item['percent']}% {item['fiber']}")
        return ", ".join(parts)
    raise SchemaError(f"composition must be a string or array, got {type(value).__name__}")


def record_from_row(row: dict, vocab: Vocabulary | None = None) -> T2PRecord:
    """Parse one flat row; raises ValidationError(row=0, ...) on bad content."""
    vocab = vocab or default_vocabulary()
    violations = []
    attrs = physics = None
    try:
        density = float(row["density_gsm"])
        thickness = float(row["thickness_mm"])
    except (TypeError, ValueError):
        raise ValidationError(0, ["density_gsm/thickness_mm must be numeric"]) from None
    try:
        attrs = parse_tag(
            _composition_text(row["composition"], vocab),
            str(row["family"]),
            str(row["structure"]),
            density,
            thickness,
            vocab,
        )
    except TagPhysError as exc:
        violations.append(str(exc))
    if attrs is not None:
        violations.extend(validate_attributes(attrs, vocab).violations)
    try:
        flat = {c: float(row[c]) for c in PHYSICS_COLUMNS}
        physics = PhysicsParams.from_flat(flat)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidParams):
            violations.extend(str(exc).split("; "))
        else:
            violations.append(f"non-numeric physics value ({exc})")
    if violations:
        raise ValidationError(0, violations)
    return T2PRecord(str(row["id"]), attrs, physics)


def _check_columns(keys, where):
    missing = [c for c in CSV_COLUMNS if c not in keys]
    if missing:
        raise SchemaError(f"{where}: missing columns {missing}")


def load_t2p(path, format: str | None = None, vocab: Vocabulary | None = None) -> T2PDataset:
    """Load and validate a CSV or JSON tag-to-physics file.

    Row numbers in errors count data rows from 1. All invalid rows are
    collected; the raised ValidationError reports the first and keeps the
    full mapping in ``.all_rows``.
    """
    vocab = vocab or default_vocabulary()
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    text = path.read_text(encoding="utf-8")
    if fmt == "csv":
        reader = csv.DictReader(text.splitlines())
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty file or missing header")
        _check_columns(reader.fieldnames, path)
        rows = list(reader)
    elif fmt == "json":
        try:
            rows = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}") from None
        if isinstance(rows, dict) and "records" in rows:
            rows = rows["records"]
        if not isinstance(rows, list):
            raise SchemaError(f"{path}: expected a JSON array of records")
        for i, row in enumerate(rows, 1):
            if not isinstance(row, dict):
                raise SchemaError(f"{path}: row {i} is not an object")
            _check_columns(row.keys(), f"{path} row {i}")
    else:
        raise SchemaError(f"unsupported format {fmt!r}")

    seen: set[str] = set()
    records, failures = [], {}
    for i, row in enumerate(rows, 1):
        rid = str(row["id"])
        if rid in seen:
            raise SchemaError(f"duplicate id {rid!r} at row {i}")
        seen.add(rid)
        try:
            records.append(record_from_row(row, vocab))
        except ValidationError as exc:
            failures[i] = exc.violations
    if failures:
        first = min(failures)
        err = ValidationError(first, failures[first])
        err.all_rows = failures
        raise err
    return T2PDataset(records, vocab)


def record_to_row(rec: T2PRecord) -> dict:
    row = {
        "id": rec.id,
        "composition": rec.attributes.composition.render(),
        "family": rec.attributes.family,
        "structure": rec.attributes.structure,
    }
    row.update(rec.physics.to_flat())
    row["density_gsm"] = rec.attributes.density
    row["thickness_mm"] = rec.attributes.thickness
    return {c: row[c] for c in CSV_COLUMNS}


def save_t2p(ds: T2PDataset, path, format: str | None = None) -> None:
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    rows = [record_to_row(r) for r in ds.records]
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    elif fmt == "json":
        path.write_text(json.dumps(rows, indent=1) + "\n", encoding="utf-8")
    else:
        raise SchemaError(f"unsupported format {fmt!r}")


# ---------------------------------------------------------------- features


@dataclass(frozen=True)
class FeatureVector:
    fiber_fractions: np.ndarray
    family_onehot: np.ndarray
    structure_onehot: np.ndarray
    log_density: float
    log_thickness: float

    def to_array(self) -> np.ndarray:
        return np.concatenate(
            [
                self.fiber_fractions,
                self.family_onehot,
                self.structure_onehot,
                [self.log_density, self.log_thickness],
            ]
        )


def feature_names(vocab: Vocabulary | None = None) -> list[str]:
    vocab = vocab or default_vocabulary()
    return (
        [f"fiber:{f}" for f in vocab.fibers]
        + [f"family:{f}" for f in vocab.families]
        + [f"structure:{s}" for s in vocab.structures]
        + ["log1p_density", "log1p_thickness"]
    )


def featurize(attrs: FabricAttributes, vocab: Vocabulary | None = None) -> FeatureVector:
    vocab = vocab or default_vocabulary()
    if attrs.density is None or attrs.thickness is None:
        raise MissingScalar("featurize needs both density and thickness")
    if attrs.density <= 0 or attrs.thickness <= 0:
        raise MissingScalar("density and thickness must be > 0")
    fibers = np.zeros(len(vocab.fibers))
    for fiber, pct in attrs.composition.entries:
        fibers[vocab.fibers.index(canonicalize_fiber(fiber, vocab))] = pct / 100.0
    # renormalize so blends within the +/-0.5 tag tolerance still sum to one
    fibers /= fibers.sum()
    family = np.zeros(len(vocab.families))
    family[vocab.families.index(attrs.family)] = 1.0
    structure = np.zeros(len(vocab.structures))
    structure[vocab.structures.index(attrs.structure)] = 1.0
    return FeatureVector(fibers, family, structure, math.log1p(attrs.density), math.log1p(attrs.thickness))


def feature_matrix(records: Sequence, vocab: Vocabulary | None = None) -> np.ndarray:
    vocab = vocab or default_vocabulary()
    rows = [featurize(r.attributes if isinstance(r, T2PRecord) else r, vocab).to_array() for r in records]
    if not rows:
        return np.zeros((0, len(feature_names(vocab))))
    return np.vstack(rows)


# ---------------------------------------------------------------- splits

_KEYS: dict[str, Callable[[T2PRecord], object]] = {
    "structure": lambda r: r.attributes.structure,
    "family": lambda r: r.attributes.family,
    "family_structure": lambda r: (r.attributes.family, r.attributes.structure),
    "primary_fiber": lambda r: r.attributes.composition.primary,
}


def _key_fn(key):
    if callable(key):
        return key
    try:
        return _KEYS[key]
    except KeyError:
        raise ValueError(f"unknown stratification key {key!r}; choose from {sorted(_KEYS)}") from None


def _strata(ds: T2PDataset, key, seed: int) -> list[list[T2PRecord]]:
    """Shuffled strata, independent of the dataset's record order."""
    fn = _key_fn(key)
    groups: dict = {}
    for rec in ds.records:
        groups.setdefault(fn(rec), []).append(rec)
    rng = np.random.default_rng(seed)
    out = []
    for k in sorted(groups, key=repr):
        members = sorted(groups[k], key=lambda r: r.id)
        out.append([members[i] for i in rng.permutation(len(members))])
    return out


def largest_remainder(n: int, ratios: Sequence[float]) -> list[int]:
    """Integer sizes summing to ``n``; leftover units go to the largest
    fractional quotas, earlier slots first on ties."""
    fr = [Fraction(repr(float(r))) for r in ratios]
    total = sum(fr)
    quotas = [n * r / total for r in fr]
    sizes = [math.floor(q) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[: n - sum(sizes)]:
        sizes[i] += 1
    return sizes


def stratified_split(
    ds: T2PDataset,
    ratios: Sequence[float] = (0.70, 0.15, 0.15),
    key="structure",
    seed: int = 0,
) -> tuple[T2PDataset, T2PDataset, T2PDataset]:
    if len(ds) == 0:
        raise EmptyDataset("cannot split an empty dataset")
    if abs(sum(ratios) - 1.0) > 1e-9 or len(ratios) != 3:
        raise ValueError("ratios must be three numbers summing to 1")
    parts: list[list[str]] = [[], [], []]
    for members in _strata(ds, key, seed):
        if len(members) < 3:
            warnings.warn(
                f"stratum of {len(members)} record(s) assigned to train", DegenerateStratum, stacklevel=2
            )
            parts[0].extend(r.id for r in members)
            continue
        start = 0
        for part, size in zip(parts, largest_remainder(len(members), ratios)):
            part.extend(r.id for r in members[start: start + size])
            start += size
    return tuple(ds.subset(p) for p in parts)


def stratified_kfold(ds: T2PDataset, k: int = 5, key="structure", seed: int = 0) -> list[tuple[T2PDataset, T2PDataset]]:
    """k (train, holdout) pairs.

    Records are dealt round-robin, stratum after stratum, with the fold
    counter carried across strata so global fold sizes stay balanced too.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(ds) == 0:
        raise EmptyDataset("cannot fold an empty dataset")
    holdouts: list[list[str]] = [[] for _ in range(k)]
    pos = 0
    for members in _strata(ds, key, seed):
        for rec in members:
            holdouts[pos % k].append(rec.id)
            pos += 1
    out = []
    for h in holdouts:
        hs = set(h)
        out.append((ds.subset(i for i in ds.ids if i not in hs), ds.subset(hs)))
    return out
