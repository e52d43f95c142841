"""
Does the fabric change the drape?
=================================

A 200 x 200 mm square pinned along its top edge falls for 3 s under gravity.
A dense polyester twill and a light lace end in visibly different shapes.
"""

import numpy as np

from tagphys.clothsim import ClothSpec, SimConfig, export_trajectory, simulate
from tagphys.metrics import chamfer, voxel_iou
from tagphys.presets import LACE_KNIT, POLYESTER_TWILL

spec = ClothSpec.pinned_top_edge(200.0, 200.0, 20.0)
config = SimConfig()  # 0.042 s frames, gravity 9800 mm/s^2

poly = simulate(spec, POLYESTER_TWILL, config, duration=3.0)
lace = simulate(spec, LACE_KNIT, config, duration=3.0)
print(len(poly), "frames")

# lowest point of each cloth over time
print(np.round([p[:, 2].min() for p in poly.positions[::12]], 1))
print(np.round([p[:, 2].min() for p in lace.positions[::12]], 1))

a = (poly.positions[-1], poly.faces)
b = (lace.positions[-1], lace.faces)
print("chamfer (mm):", round(chamfer(a[0], b[0]), 1))
print("voxel IoU:", round(voxel_iou(a, b, voxel=20.0), 3))

# one OBJ per frame, readable by any mesh viewer
export_trajectory(poly, "drape_polyester")
