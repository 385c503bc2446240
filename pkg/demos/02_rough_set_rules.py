"""
Rough-set rules from symbolic levels
====================================

Each attribute and the lugeon value are mapped onto five levels by a 1D SOM.
Reducts and certain rules follow from the discernibility matrix; classes
with conflicting lugeon levels get label 6.
"""

from granperm import core_data as cd, nfis, pipeline, rst

spec = cd.SyntheticSpec(nfis.published_rulebase(), 300, 0.5, cd.fixture_input_ranges(), seed=1)
data = cd.generate_synthetic(spec)

res = pipeline.run_rst_branch(data, levels=5)
for name, d in res.discretizers.items():
    print(f"{name:>15}: centers", [round(c, 2) for c in d.centers])

print("reducts:", [sorted(r) for r in res.reducts])
print(rst.format_rules(res.rules[:10]))

six = sum(r.support for r in res.rules if r.decision == rst.NONDETERMINISTIC)
print(f"{six} of {len(data)} records sit in inconsistent classes")

# A coarser view: rules over RQD and weathering only
coarse = rst.extract_decision_rules(res.table, ["rqd", "twr"])
print(rst.format_rules(coarse[:8]))

# Small hand-made table, straight from the definitions
t = rst.DecisionTable.from_values(
    {"o1": {"a": 1, "b": 1, "d": 1}, "o2": {"a": 1, "b": 2, "d": 2},
     "o3": {"a": 2, "b": 2, "d": 2}, "o4": {"a": 1, "b": 1, "d": 3}},
    ["a", "b"], "d")
m = rst.discernibility_matrix(t)
print(rst.discernibility_function(m))
X = {"o1", "o2"}
print("lower:", sorted(rst.lower_approx(t, ["a", "b"], X)), "upper:", sorted(rst.upper_approx(t, ["a", "b"], X)))
