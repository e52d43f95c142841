"""The simulator parameter set and its flat column naming."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParams

DIRECTIONS4 = ("bias_l", "bias_r", "warp", "weft")

# field -> flat column names, in schema order
GROUP_COLUMNS = {
    "buckling_stiffness": tuple(f"buckle_stiff_{d}" for d in DIRECTIONS4),
    "buckling_ratio": tuple(f"buckle_ratio_{d}" for d in DIRECTIONS4),
    "bending_stiffness": tuple(f"bend_{d}" for d in DIRECTIONS4),
    "shear_stiffness": ("shear_l", "shear_r"),
    "stretch_stiffness": ("stretch_warp", "stretch_weft"),
}

SCALAR_COLUMNS = {
    "density": "density_gsm",
    "thickness": "thickness_mm",
    "friction": "friction",
    "internal_damping": "damping",
}

PHYSICS_COLUMNS = (
    "density_gsm",
    "thickness_mm",
    "friction",
    "damping",
    *GROUP_COLUMNS["buckling_stiffness"],
    *GROUP_COLUMNS["buckling_ratio"],
    *GROUP_COLUMNS["bending_stiffness"],
    *GROUP_COLUMNS["shear_stiffness"],
    *GROUP_COLUMNS["stretch_stiffness"],
)

# the five regressor groups
FOREST_GROUPS = {
    "bending": GROUP_COLUMNS["bending_stiffness"],
    "shear": GROUP_COLUMNS["shear_stiffness"],
    "stretch": GROUP_COLUMNS["stretch_stiffness"],
    "buckling_stiffness": GROUP_COLUMNS["buckling_stiffness"],
    "buckling_ratio": GROUP_COLUMNS["buckling_ratio"],
}

STIFFNESS_COLUMNS = frozenset(
    GROUP_COLUMNS["buckling_stiffness"]
    + GROUP_COLUMNS["bending_stiffness"]
    + GROUP_COLUMNS["shear_stiffness"]
    + GROUP_COLUMNS["stretch_stiffness"]
)


@dataclass(frozen=True)
class PhysicsParams:
    """Full cloth parameter set.

    Units: density g/m^2, thickness mm, bending and buckling stiffness
    g*mm^2/s^2, shear and stretch stiffness g/s^2. Four-direction tuples are
    ordered (bias-left, bias-right, warp, weft); shear is (left, right) and
    stretch is (warp, weft).
    """

    density: float
    thickness: float
    friction: float
    internal_damping: float
    buckling_stiffness: tuple[float, float, float, float]
    buckling_ratio: tuple[float, float, float, float]
    bending_stiffness: tuple[float, float, float, float]
    shear_stiffness: tuple[float, float]
    stretch_stiffness: tuple[float, float]

    def __post_init__(self):
        for name, cols in GROUP_COLUMNS.items():
            value = tuple(float(x) for x in getattr(self, name))
            if len(value) != len(cols):
                raise InvalidParams(f"{name} needs {len(cols)} components, got {len(value)}")
            object.__setattr__(self, name, value)
        for name in SCALAR_COLUMNS:
            object.__setattr__(self, name, float(getattr(self, name)))
        problems = self.violations()
        if problems:
            raise InvalidParams("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        for col, value in self.to_flat().items():
            if not math.isfinite(value):
                out.append(f"{col} is not finite")
            elif value < 0:
                out.append(f"{col} < 0")
        if self.density <= 0:
            out.append("density_gsm must be > 0")
        if self.thickness <= 0:
            out.append("thickness_mm must be > 0")
        if min(self.stretch_stiffness) <= 0:
            out.append("stretch stiffness must be > 0")
        return out

    def to_flat(self) -> dict[str, float]:
        flat = {col: getattr(self, name) for name, col in SCALAR_COLUMNS.items()}
        for name, cols in GROUP_COLUMNS.items():
            flat.update(zip(cols, getattr(self, name)))
        return {c: flat[c] for c in PHYSICS_COLUMNS}

    @classmethod
    def from_flat(cls, flat) -> "PhysicsParams":
        missing = [c for c in PHYSICS_COLUMNS if c not in flat]
        if missing:
            raise InvalidParams(f"missing physics columns: {missing}")
        kwargs = {name: float(flat[col]) for name, col in SCALAR_COLUMNS.items()}
        for name, cols in GROUP_COLUMNS.items():
            kwargs[name] = tuple(float(flat[c]) for c in cols)
        return cls(**kwargs)

    def scaled_stiffness(self, factor: float) -> "PhysicsParams":
        flat = self.to_flat()
        for col in STIFFNESS_COLUMNS:
            flat[col] *= factor
        return PhysicsParams.from_flat(flat)

    def replace(self, **changes) -> "PhysicsParams":
        flat = self.to_flat()
        flat.update(changes)
        return PhysicsParams.from_flat(flat)
