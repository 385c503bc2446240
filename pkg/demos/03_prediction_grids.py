"""
Prediction grids and heat maps
==============================

Sweep two inputs of a rule base with the others held fixed, as in the
isolugeon sections by elevation, and write CSV plus an SVG heat map.
"""

import numpy as np

from granperm import nfis, pipeline
from granperm.plot import grid_svg

rb = nfis.published_rulebase()

for z in (1160, 1180, 1190, 1200):
    spec = pipeline.GridSpec(
        (pipeline.GridAxis("rqd", 0, 100, 11), pipeline.GridAxis("twr", 1, 5, 5)),
        {"z": z, "section_length": 4.0})
    g = pipeline.predict_grid(rb, spec)
    M = g.as_matrix()
    print(f"z={z}: lugeon {M.min():.1f}..{M.max():.1f}, underflow cells {int(g.underflow.sum())}")

# RQD against elevation at medium weathering
spec = pipeline.GridSpec(
    (pipeline.GridAxis("z", 1150, 1210, 31), pipeline.GridAxis("rqd", 0, 100, 26)),
    {"section_length": 4.0, "twr": 3})
g = pipeline.predict_grid(rb, spec)
with open("grid_z_rqd.csv", "w") as fh:
    fh.write(g.to_csv())
with open("grid_z_rqd.svg", "w") as fh:
    fh.write(grid_svg(g))

# Higher RQD, lower lugeon along this section
print(np.round(g.as_matrix()[20, ::5], 1))
