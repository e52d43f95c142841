"""Named parameter sets for demos and simulator checks.

Density and thickness of the first three follow published swatch labels
(wool fleece 382.32 gsm / 1.05 mm, knit lace 16 gsm / 0.5 mm, polyester twill
195 gsm / 0.65 mm). The stiffness values are illustrative magnitudes chosen
for this simulator, not measurements.
"""
from .params import PhysicsParams

POLYESTER_TWILL = PhysicsParams(
    density=195.0,
    thickness=0.65,
    friction=0.3,
    internal_damping=1.0,
    buckling_stiffness=(6000.0, 6000.0, 8000.0, 7000.0),
    buckling_ratio=(70.0, 70.0, 70.0, 70.0),
    bending_stiffness=(16000.0, 16000.0, 20000.0, 18000.0),
    shear_stiffness=(12000.0, 12000.0),
    stretch_stiffness=(40000.0, 36000.0),
)

LACE_KNIT = PhysicsParams(
    density=16.0,
    thickness=0.5,
    friction=0.3,
    internal_damping=1.0,
    buckling_stiffness=(200.0, 200.0, 300.0, 250.0),
    buckling_ratio=(60.0, 60.0, 60.0, 60.0),
    bending_stiffness=(600.0, 600.0, 800.0, 700.0),
    shear_stiffness=(1500.0, 1500.0),
    stretch_stiffness=(6000.0, 5000.0),
)

WOOL_FLEECE = PhysicsParams(
    density=382.32,
    thickness=1.05,
    friction=0.3,
    internal_damping=1.0,
    buckling_stiffness=(15000.0, 15000.0, 20000.0, 18000.0),
    buckling_ratio=(80.0, 80.0, 80.0, 80.0),
    bending_stiffness=(50000.0, 50000.0, 60000.0, 55000.0),
    shear_stiffness=(8000.0, 8000.0),
    stretch_stiffness=(25000.0, 22000.0),
)

PRESETS = {
    "polyester_twill": POLYESTER_TWILL,
    "lace_knit": LACE_KNIT,
    "wool_fleece": WOOL_FLEECE,
}
