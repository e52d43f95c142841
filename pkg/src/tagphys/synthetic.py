"""Synthetic tag-to-physics datasets with known structure.

Used for the shipped toy dataset, the demos and the test-suite. Targets are
smooth monotone functions of density, thickness and structure with
multiplicative noise.
"""
from __future__ import annotations

import numpy as np

from .dataset import T2PDataset, T2PRecord
from .params import PhysicsParams
from .tagparse import FabricAttributes, FiberComposition, Vocabulary, default_vocabulary

# (family, structure, density range g/m^2)
FAMILIES = (
    ("jersey", "knit", (120, 220)),
    ("rib knit", "knit", (180, 300)),
    ("french terry", "knit", (250, 380)),
    ("fleece", "knit", (280, 420)),
    ("denim", "woven", (280, 450)),
    ("poplin", "woven", (90, 140)),
    ("twill", "woven", (160, 260)),
    ("chiffon", "woven", (30, 70)),
    ("satin", "woven", (80, 150)),
    ("lace", "others", (15, 90)),
    ("mesh / tulle", "others", (20, 80)),
    ("stretch lining", "lining", (60, 110)),
)

BLENDS = (
    (("Cotton", 100),),
    (("Polyester", 100),),
    (("Cotton", 95), ("Elastane", 5)),
    (("Polyester", 95), ("Elastane", 5)),
    (("Cotton", 60), ("Polyester", 40)),
    (("Viscose Rayon", 70), ("Nylon", 30)),
    (("Wool", 80), ("Nylon", 20)),
    (("Nylon", 85), ("Elastane", 15)),
    (("Linen", 55), ("Cotton", 45)),
    (("Silk", 100),),
)

_STRUCT_FACTOR = {"woven": 1.6, "knit": 0.7, "others": 0.4, "lining": 1.0}


def physics_from_scalars(density: float, thickness: float, structure: str, noise=None) -> dict:
    """Noise-free (or noisy) parameter columns as monotone functions of the inputs."""
    s = _STRUCT_FACTOR[structure]
    base = {
        "stretch_warp": 180.0 * density * s,
        "stretch_weft": 150.0 * density * s,
        "shear_l": 40.0 * density * (1 + thickness),
        "shear_r": 38.0 * density * (1 + thickness),
        "bend_bias_l": 60.0 * density * thickness * s,
        "bend_bias_r": 58.0 * density * thickness * s,
        "bend_warp": 80.0 * density * thickness * s,
        "bend_weft": 70.0 * density * thickness * s,
        "buckle_stiff_bias_l": 20.0 * density * thickness * s,
        "buckle_stiff_bias_r": 19.0 * density * thickness * s,
        "buckle_stiff_warp": 30.0 * density * thickness * s,
        "buckle_stiff_weft": 25.0 * density * thickness * s,
        "buckle_ratio_bias_l": 30.0 + 40.0 * np.tanh(thickness) + 10.0 * s,
        "buckle_ratio_bias_r": 30.0 + 38.0 * np.tanh(thickness) + 10.0 * s,
        "buckle_ratio_warp": 35.0 + 35.0 * np.tanh(thickness) + 8.0 * s,
        "buckle_ratio_weft": 33.0 + 36.0 * np.tanh(thickness) + 8.0 * s,
    }
    if noise is not None:
        base = {k: float(v * (1 + noise.normal(0.0, 0.05))) for k, v in base.items()}
        base = {k: max(v, 1e-6) for k, v in base.items()}
    return base


def make_t2p(n: int = 500, seed: int = 0, noise: bool = True, vocab: Vocabulary | None = None) -> T2PDataset:
    """``n`` records over a fixed set of families and blends."""
    vocab = vocab or default_vocabulary()
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n):
        family, structure, (lo, hi) = FAMILIES[int(rng.integers(len(FAMILIES)))]
        blend = BLENDS[int(rng.integers(len(BLENDS)))]
        density = float(np.round(rng.uniform(lo, hi), 2))
        thickness = float(np.round(0.1 + density / 300.0 * rng.uniform(0.8, 1.2), 3))
        cols = physics_from_scalars(density, thickness, structure, rng if noise else None)
        cols.update(density_gsm=density, thickness_mm=thickness, friction=0.3, damping=1.0)
        attrs = FabricAttributes(FiberComposition.from_pairs(blend), family, structure, density, thickness)
        records.append(T2PRecord(f"syn-{i:05d}", attrs, PhysicsParams.from_flat(cols)))
    return T2PDataset(records, vocab)


def make_retrieval_set(
    n_groups: int = 30,
    per_group: int = 8,
    spread: float = 0.03,
    outlier_frac: float = 0.0,
    outlier_scale: float = 4.0,
    seed: int = 0,
    vocab: Vocabulary | None = None,
) -> T2PDataset:
    """Groups of records sharing (family, structure, composition).

    Within a group (density, thickness) scatter around a group centre with
    relative Gaussian ``spread``. ``outlier_frac`` of the records get their
    density and thickness multiplied by ``outlier_scale``.
    """
    vocab = vocab or default_vocabulary()
    rng = np.random.default_rng(seed)
    combos = [(f, b) for f in FAMILIES for b in BLENDS]
    picks = rng.choice(len(combos), size=n_groups, replace=False)
    records = []
    for g, ci in enumerate(picks):
        (family, structure, (lo, hi)), blend = combos[ci]
        rho0 = rng.uniform(lo, hi)
        t0 = 0.1 + rho0 / 300.0
        for m in range(per_group):
            rho = rho0 * (1 + rng.normal(0, spread))
            t = t0 * (1 + rng.normal(0, spread))
            if rng.random() < outlier_frac:
                rho, t = rho * outlier_scale, t * outlier_scale
            rho, t = float(min(rho, 1999.0)), float(min(t, 19.9))
            cols = physics_from_scalars(rho, t, structure)
            cols.update(density_gsm=rho, thickness_mm=t, friction=0.3, damping=1.0)
            attrs = FabricAttributes(FiberComposition.from_pairs(blend), family, structure, rho, t)
            records.append(T2PRecord(f"grp{g:03d}-{m:02d}", attrs, PhysicsParams.from_flat(cols)))
    return T2PDataset(records, vocab)
