"""Density/thickness estimation by hierarchical retrieval over measured fabrics."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dataset import T2PDataset, T2PRecord, stratified_kfold
from .errors import EmptyDataset
from .tagparse import FabricAttributes

DEFAULT_TOLERANCE = 2.0


class MatchLevel(enum.IntEnum):
    """Candidate levels, most specific first."""

    ExactComposition = 1
    MaterialSet = 2
    PrimaryFiber = 3
    StructureFallback = 4
    GlobalFallback = 5


class AggregationMode(str, enum.Enum):
    mean = "mean"
    median = "median"
    random = "random"


MODES = (AggregationMode.mean, AggregationMode.median, AggregationMode.random)


@dataclass(frozen=True)
class DensityThicknessEstimate:
    density: float
    thickness: float
    level: MatchLevel
    candidate_count: int


def _exact(query, comp, tol):
    if query.fibers != comp.fibers:
        return False
    q, c = query.as_dict(), comp.as_dict()
    return all(abs(q[f] - c[f]) <= tol for f in q)


def retrieve_candidates(
    attrs: FabricAttributes, ds: T2PDataset, tol: float = DEFAULT_TOLERANCE
) -> tuple[list[T2PRecord], MatchLevel]:
    """Most specific non-empty candidate set among records sharing
    (family, structure), relaxing to structure-only and then the whole set."""
    if len(ds) == 0:
        raise EmptyDataset("retrieval needs a non-empty dataset")
    comp = attrs.composition
    same_fs = [
        r for r in ds.records if r.attributes.family == attrs.family and r.attributes.structure == attrs.structure
    ]
    levels = (
        (MatchLevel.ExactComposition, lambda r: _exact(comp, r.attributes.composition, tol)),
        (MatchLevel.MaterialSet, lambda r: r.attributes.composition.fibers == comp.fibers),
        (MatchLevel.PrimaryFiber, lambda r: r.attributes.composition.primary == comp.primary),
    )
    for level, pred in levels:
        found = [r for r in same_fs if pred(r)]
        if found:
            return found, level
    found = [r for r in ds.records if r.attributes.structure == attrs.structure]
    if found:
        return found, MatchLevel.StructureFallback
    return list(ds.records), MatchLevel.GlobalFallback


def aggregate(candidates: list[T2PRecord], mode, seed: int = 0) -> tuple[float, float]:
    mode = AggregationMode(mode)
    if mode is AggregationMode.mean:
        rho = np.mean([r.attributes.density for r in candidates])
        t = np.mean([r.attributes.thickness for r in candidates])
        return float(rho), float(t)
    if mode is AggregationMode.median:
        # lower median by density; thickness comes from the same record
        ranked = sorted(candidates, key=lambda r: (r.attributes.density, r.id))
        pick = ranked[(len(ranked) - 1) // 2]
    else:
        ranked = sorted(candidates, key=lambda r: r.id)
        pick = ranked[int(np.random.default_rng(seed).integers(len(ranked)))]
    return pick.attributes.density, pick.attributes.thickness


def estimate_density_thickness(
    attrs: FabricAttributes,
    ds: T2PDataset,
    mode="mean",
    seed: int = 0,
    tol: float = DEFAULT_TOLERANCE,
) -> DensityThicknessEstimate:
    candidates, level = retrieve_candidates(attrs, ds, tol)
    rho, t = aggregate(candidates, mode, seed)
    return DensityThicknessEstimate(rho, t, level, len(candidates))


@dataclass
class ModeReport:
    selected: AggregationMode
    mae: dict  # mode name -> mean range-normalized validation MAE
    fold_mae: dict  # mode name -> per-fold values

    def to_dict(self) -> dict:
        return {"selected": self.selected.value, "mae": self.mae, "fold_mae": self.fold_mae}


def _range(x):
    r = float(np.max(x) - np.min(x))
    return r if r > 0 else 1.0


def select_mode_cv(
    ds: T2PDataset, k: int = 5, seed: int = 0, tol: float = DEFAULT_TOLERANCE, key="structure"
) -> tuple[AggregationMode, ModeReport]:
    """Pick the aggregation mode with the lowest k-fold validation error.

    Per fold, the density and thickness MAEs are each divided by the range of
    that scalar on the fold's training part and then averaged. Exact ties go
    to the earlier mode in (mean, median, random).
    """
    if len(ds) == 0:
        raise EmptyDataset("mode selection needs a non-empty dataset")
    folds = stratified_kfold(ds, k, key=key, seed=seed)
    per_mode = {m.value: [] for m in MODES}
    for fold_idx, (train, hold) in enumerate(folds):
        if len(train) == 0 or len(hold) == 0:
            continue
        truth = hold.scalars()
        scale = np.array([_range(train.scalars()[:, 0]), _range(train.scalars()[:, 1])])
        for mode in MODES:
            pred = np.array(
                [
                    aggregate(retrieve_candidates(r.attributes, train, tol)[0], mode, seed=hash_seed(seed, fold_idx, i))
                    for i, r in enumerate(hold.records)
                ]
            )
            err = np.mean(np.abs(pred - truth), axis=0) / scale
            per_mode[mode.value].append(float(np.mean(err)))
    mae = {m: float(np.mean(v)) for m, v in per_mode.items()}
    best = MODES[0]
    for m in MODES[1:]:
        if mae[m.value] < mae[best.value] - 1e-12 * max(1.0, abs(mae[best.value])):
            best = m
    return best, ModeReport(best, mae, per_mode)


def hash_seed(*parts: int) -> int:
    """Deterministic child seed for a (seed, fold, query) tuple."""
    return int(np.random.SeedSequence([int(p) for p in parts]).generate_state(1)[0])
