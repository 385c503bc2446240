"""
Close-open granulation on synthetic borehole data
=================================================

Generate records from the bundled four-rule fixture, granulate them with a
10x15 SOM, fit TSK rules for shrinking influence radii, and look at what
ended up in the aggregated box.
"""

import numpy as np

from granperm import core_data as cd, nfis, pipeline

# 789 intervals, noise of half a Lugeon unit
spec = cd.SyntheticSpec(nfis.published_rulebase(), 789, 0.5, cd.fixture_input_ranges(), seed=0)
data = cd.generate_synthetic(spec)
print(len(data), "records; lugeon range", data.y.min().round(1), "to", data.y.max().round(1))

# n=1, k=3, n.r=4, error level 23 are the defaults
cfg = pipeline.PipelineConfig()
best, box = pipeline.run_close_open(data, cfg)

print(pipeline.format_box_csv(box, best))
print(nfis.format_rules(best.rulebase))

# Error on the held-out split, in Lugeon units
_, test = pipeline.split_for(data, cfg)
print("held-out RMSE:", round(nfis.error_level(best.rulebase, test), 3))

# The fitted model and the generator, side by side on a few test points
pred, _ = nfis.tsk_predict(best.rulebase, test.X[:5])
truth, _ = nfis.tsk_predict(nfis.published_rulebase(), test.X[:5])
print(np.column_stack([test.X[:5], truth, pred]).round(2))
