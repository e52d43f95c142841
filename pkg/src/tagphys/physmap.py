"""Assembling simulator parameters from regressors, retrieval and constants."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .dataset import T2PDataset, featurize
from .errors import InvalidBounds, ModelVocabMismatch
from .params import (
    FOREST_GROUPS,
    PHYSICS_COLUMNS,
    STIFFNESS_COLUMNS,
    PhysicsParams,
)
from .retrieval import DEFAULT_TOLERANCE, estimate_density_thickness, select_mode_cv
from .tagparse import FabricAttributes

DEFAULT_FRICTION = 0.3
DEFAULT_INTERNAL_DAMPING = 1.0
DEFAULT_MARGIN = 0.10


@dataclass(frozen=True)
class ParamBounds:
    lower: dict
    upper: dict

    def __post_init__(self):
        for col in PHYSICS_COLUMNS:
            if col not in self.lower or col not in self.upper:
                raise InvalidBounds(f"bounds missing column {col}")
            lo, hi = float(self.lower[col]), float(self.upper[col])
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise InvalidBounds(f"{col}: bounds must be finite")
            if lo < 0 or lo > hi:
                raise InvalidBounds(f"{col}: need 0 <= lower <= upper, got [{lo}, {hi}]")
        for col in ("density_gsm", "thickness_mm", "stretch_warp", "stretch_weft"):
            if self.lower[col] <= 0:
                raise InvalidBounds(f"{col}: lower bound must be > 0")

    def __contains__(self, params: PhysicsParams) -> bool:
        flat = params.to_flat()
        return all(self.lower[c] <= flat[c] <= self.upper[c] for c in PHYSICS_COLUMNS)

    def to_dict(self) -> dict:
        return {c: [self.lower[c], self.upper[c]] for c in PHYSICS_COLUMNS}

    @classmethod
    def from_dict(cls, d: dict) -> "ParamBounds":
        try:
            return cls({c: float(d[c][0]) for c in PHYSICS_COLUMNS}, {c: float(d[c][1]) for c in PHYSICS_COLUMNS})
        except KeyError as exc:
            raise InvalidBounds(f"bounds missing column {exc.args[0]}") from None

    @classmethod
    def degenerate(cls, params: PhysicsParams) -> "ParamBounds":
        flat = params.to_flat()
        return cls(dict(flat), dict(flat))


def fallback_bounds() -> ParamBounds:
    text = (resources.files("tagphys") / "data" / "default_bounds.json").read_text(encoding="utf-8")
    return ParamBounds.from_dict(json.loads(text))


def default_bounds(ds: T2PDataset | None = None, margin: float = DEFAULT_MARGIN) -> ParamBounds:
    """Per-column [min, max] over the dataset, widened by ``margin`` of the value.

    Without a dataset the shipped fallback table is returned.
    """
    if ds is None or len(ds) == 0:
        return fallback_bounds()
    flats = np.array([[r.physics.to_flat()[c] for c in PHYSICS_COLUMNS] for r in ds.records])
    lo = flats.min(axis=0) * (1 - margin)
    hi = flats.max(axis=0) * (1 + margin)
    return ParamBounds(dict(zip(PHYSICS_COLUMNS, lo.tolist())), dict(zip(PHYSICS_COLUMNS, hi.tolist())))


def sample_random_physics(bounds: ParamBounds, seed: int = 0) -> PhysicsParams:
    """Independent draw per column: log-uniform for stiffness, uniform otherwise.

    Stiffness columns with a zero lower bound fall back to uniform.
    """
    rng = np.random.default_rng(seed)
    flat = {}
    for col in PHYSICS_COLUMNS:
        lo, hi = bounds.lower[col], bounds.upper[col]
        u = rng.random()
        if lo == hi:
            flat[col] = lo
        elif col in STIFFNESS_COLUMNS and lo > 0:
            flat[col] = min(hi, max(lo, math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))))
        else:
            flat[col] = min(hi, lo + u * (hi - lo))
    return PhysicsParams.from_flat(flat)


def clamp_to_bounds(flat: dict, bounds: ParamBounds, keep=()) -> tuple[dict, list]:
    """Clip every column into ``bounds`` except those named in ``keep``.

    Returns the clipped values and one report entry per changed column.
    """
    out, report = {}, []
    for col in PHYSICS_COLUMNS:
        v = float(flat[col])
        if col in keep:
            out[col] = v
            continue
        lo, hi = bounds.lower[col], bounds.upper[col]
        c = lo if not math.isfinite(v) else min(hi, max(lo, v))
        if c != v:
            report.append({"column": col, "value": v, "clamped_to": c})
        out[col] = c
    return out, report


@dataclass
class PredictConfig:
    friction: float = DEFAULT_FRICTION
    internal_damping: float = DEFAULT_INTERNAL_DAMPING
    dt_mode: str = "mean"  # mean | median | random | cv
    dt_tol: float = DEFAULT_TOLERANCE
    seed: int = 0
    cv_folds: int = 5
    bounds: ParamBounds | None = None
    bounds_margin: float = DEFAULT_MARGIN


@dataclass
class PhysicsPrediction:
    params: PhysicsParams
    provenance: dict = field(default_factory=dict)


def predict_physics(
    attrs: FabricAttributes, models: dict, ds: T2PDataset, config: PredictConfig | None = None
) -> PhysicsPrediction:
    """Full parameter set for one garment.

    ``models`` maps each regressor group name to a fitted Forest. Missing
    density or thickness is filled by retrieval over ``ds``. Predicted and
    retrieved columns are clamped to the configured bounds and every clamp
    is reported; friction and damping are taken from ``config`` unchanged.
    """
    config = config or PredictConfig()
    missing = sorted(set(FOREST_GROUPS) - set(models))
    if missing:
        raise ModelVocabMismatch(f"missing models for groups {missing}")
    for name, forest in models.items():
        if forest.vocab_fingerprint is not None and forest.vocab_fingerprint != ds.vocab_fingerprint:
            raise ModelVocabMismatch(f"model {name!r} was trained on a different vocabulary")

    provenance: dict = {
        "model_fingerprints": {g: models[g].train_fingerprint for g in sorted(FOREST_GROUPS)},
        "vocab_fingerprint": ds.vocab_fingerprint,
    }
    if attrs.density is None or attrs.thickness is None:
        mode = config.dt_mode
        if mode == "cv":
            mode, report = select_mode_cv(ds, config.cv_folds, config.seed, config.dt_tol)
            mode = mode.value
            provenance["mode_cv"] = report.mae
        est = estimate_density_thickness(attrs, ds, mode, config.seed, config.dt_tol)
        attrs = attrs.with_scalars(
            attrs.density if attrs.density is not None else est.density,
            attrs.thickness if attrs.thickness is not None else est.thickness,
        )
        provenance["density_thickness"] = {
            "source": "retrieval",
            "mode": mode,
            "match_level": est.level.name,
            "candidate_count": est.candidate_count,
        }
    else:
        provenance["density_thickness"] = {"source": "input"}

    x = featurize(attrs, ds.vocab).to_array()
    flat = {
        "density_gsm": attrs.density,
        "thickness_mm": attrs.thickness,
        "friction": config.friction,
        "damping": config.internal_damping,
    }
    for group in FOREST_GROUPS:
        forest = models[group]
        flat.update(zip(forest.target_names, forest.predict(x).tolist()))
    bounds = config.bounds or default_bounds(ds, config.bounds_margin)
    # friction and damping are configuration, not predictions
    flat, clamps = clamp_to_bounds(flat, bounds, keep=("friction", "damping"))
    provenance["clamp_report"] = clamps
    return PhysicsPrediction(PhysicsParams.from_flat(flat), provenance)


def physics_document(attrs: FabricAttributes, prediction: PhysicsPrediction, garment_id: str) -> dict:
    """Flat output record under the dataset column names plus provenance."""
    doc = {
        "id": garment_id,
        "composition": attrs.composition.render(),
        "family": attrs.family,
        "structure": attrs.structure,
    }
    doc.update(prediction.params.to_flat())
    doc["provenance"] = prediction.provenance
    return doc
