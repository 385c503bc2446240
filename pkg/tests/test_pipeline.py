import numpy as np
import pytest

from granperm import core_data as cd
from granperm import nfis, pipeline, rst, som
from granperm.errors import DimensionMismatch, EmptyBox, NoFeasibleCandidate


def _cand(rules, err, it=0):
    rb = nfis.TskRuleBase.from_arrays(np.zeros((rules, 1)), np.ones((rules, 1)), np.zeros((rules, 2)))
    g = som.SomGrid(1, 1, np.zeros((1, 1, 1)))
    return pipeline.CandidateModel(g, rb, err, rules, (), iteration=it)


def _box(*cands, xi=23.0, nr=4):
    return pipeline.AggregatedBox(list(cands), xi, nr)


def test_select_best_cases():
    a, b = _cand(3, 20), _cand(4, 15)
    assert pipeline.select_best(_box(b, a)) is a
    c, d = _cand(4, 20), _cand(4, 18)
    assert pipeline.select_best(_box(c, d)) is d
    e, f = _cand(4, 30), _cand(4, 25)
    assert pipeline.select_best(_box(e, f)) is f
    # Equal rules and error: the earlier one wins.
    g, h = _cand(2, 10, 0), _cand(2, 10, 1)
    assert pipeline.select_best(_box(g, h)) is g
    # A 5-rule model is infeasible even with a tiny error.
    i, j = _cand(5, 1), _cand(4, 22)
    assert pipeline.select_best(_box(i, j)) is j
    with pytest.raises(EmptyBox):
        pipeline.select_best(_box())


def test_config_validation():
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(radius_schedule=(0.5, 0.7))
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(error_threshold=0)
    with pytest.raises(ValueError):
        pipeline.PipelineConfig(som_sizes=())
    cfg = pipeline.PipelineConfig.from_mapping({"max_rules": 3, "split": {"train_fraction": 0.7, "seed": 2}})
    assert cfg.max_rules == 3 and cfg.split == cd.SplitSpec(0.7, 2)
    with pytest.raises(ValueError):
        pipeline.PipelineConfig.from_mapping({"bogus": 1})


@pytest.fixture(scope="module")
def small_data():
    spec = cd.SyntheticSpec(nfis.published_rulebase(), 200, 0.5, cd.fixture_input_ranges(), seed=1)
    return cd.generate_synthetic(spec)


FAST = dict(som_sizes=((4, 5),), som_epochs=20, nfis_epochs=10)


def test_vacuous_threshold_gives_one_candidate_per_init(small_data):
    cfg = pipeline.PipelineConfig(n_random_inits=2, error_threshold=1e9, max_rules=50, **FAST)
    best, box = pipeline.run_close_open(small_data, cfg)
    assert len(box) == 2
    assert [c.iteration for c in box.candidates] == [0, 0]
    assert best.n_rules == len(best.rulebase)


def test_unreachable_threshold_raises_with_full_box(small_data):
    cfg = pipeline.PipelineConfig(n_random_inits=2, error_threshold=1e-9, **FAST)
    with pytest.raises(NoFeasibleCandidate) as info:
        pipeline.run_close_open(small_data, cfg)
    box = info.value.box
    assert len(box) == 2 * 3
    assert info.value.fallback is min(box.candidates, key=lambda c: c.error_level)


def test_box_invariants_and_early_stop(small_data):
    cfg = pipeline.PipelineConfig(n_random_inits=3, error_threshold=30.0,
                                  som_sizes=((4, 5), (3, 3)), som_epochs=20, nfis_epochs=10)
    try:
        best, box = pipeline.run_close_open(small_data, cfg)
    except NoFeasibleCandidate as err:
        box, best = err.box, None
    assert len(box) <= 3 * 3
    for init in range(3):
        mine = [c for c in box.candidates if c.init_index == init]
        assert [c.iteration for c in mine] == list(range(len(mine)))
        for c in mine[:-1]:
            assert not box.is_feasible(c)
        for c in mine:
            assert c.n_rules == len(c.rulebase)
            assert c.iteration_trace[-1][3] == c.error_level
    if best is not None:
        assert box.is_feasible(best)


def test_run_is_deterministic(small_data):
    cfg = pipeline.PipelineConfig(error_threshold=1e9, **FAST)
    a, box_a = pipeline.run_close_open(small_data, cfg)
    b, box_b = pipeline.run_close_open(small_data, cfg)
    assert nfis.dumps_rulebase(a.rulebase) == nfis.dumps_rulebase(b.rulebase)
    assert pipeline.format_box_csv(box_a, a) == pipeline.format_box_csv(box_b, b)


def test_candidate_error_matches_raw_model(small_data):
    # The reported error is measured in scaled units; the raw-unit model must agree.
    cfg = pipeline.PipelineConfig(error_threshold=1e9, **FAST)
    best, _ = pipeline.run_close_open(small_data, cfg)
    train, _ = pipeline.split_for(small_data, cfg)
    assert nfis.error_level(best.rulebase, train) == pytest.approx(best.error_level, rel=1e-9)


def test_predict_grid_small():
    rb = nfis.published_rulebase()
    spec = pipeline.GridSpec((pipeline.GridAxis("z", 1160, 1200, 2), pipeline.GridAxis("rqd", 0, 100, 2)),
                             {"section_length": 4.0, "twr": 3})
    g = pipeline.predict_grid(rb, spec)
    lines = g.to_csv().splitlines()
    assert lines[0] == "z,rqd,prediction,underflow_flag"
    assert len(lines) == 5
    for (z, q), v in zip(g.coords, g.values):
        assert v == nfis.tsk_eval(rb, [z, 4.0, q, 3])
    assert [tuple(c) for c in g.coords] == [(1160, 0), (1160, 100), (1200, 0), (1200, 100)]


def test_predict_grid_errors():
    rb = nfis.published_rulebase()
    ax = (pipeline.GridAxis("z", 1160, 1200, 3), pipeline.GridAxis("rqd", 0, 100, 3))
    with pytest.raises(DimensionMismatch):
        pipeline.predict_grid(rb, pipeline.GridSpec(ax, {"twr": 3}))
    with pytest.raises(DimensionMismatch):
        pipeline.predict_grid(rb, pipeline.GridSpec(ax, {"twr": 3, "section_length": 4, "depth": 1}))
    with pytest.raises(ValueError):
        pipeline.GridAxis("z", 0, 1, 1)


def test_rqd_sweep_is_nonincreasing_on_fixture():
    rb = nfis.published_rulebase()
    spec = pipeline.GridSpec((pipeline.GridAxis("z", 1190, 1190.5, 2), pipeline.GridAxis("rqd", 0, 100, 101)),
                             {"section_length": 4.0, "twr": 3})
    g = pipeline.predict_grid(rb, spec)
    row = g.as_matrix()[0]
    assert np.all(np.diff(row) <= 1e-12)
    assert not g.underflow.any()


def _dataset(rqd, lugeon, extra=None):
    n = len(rqd)
    rng = np.random.default_rng(0)
    cols = [rqd, rng.uniform(1150, 1210, n) if extra is None else extra]
    return cd.Dataset(np.column_stack(cols), lugeon, ("rqd", "z"))


def test_rst_step_function_of_rqd():
    rqd = np.repeat(np.linspace(5, 95, 5), 8) + np.tile(np.linspace(-2, 2, 8), 5)
    level = np.repeat(np.arange(1, 6), 8)
    lugeon = (6 - level) * 10.0
    data = _dataset(rqd, lugeon)
    res = pipeline.run_rst_branch(data, levels=5, seed=0)
    assert frozenset({"rqd"}) in res.reducts
    assert res.attributes == ("rqd",)
    assert all(r.decision != rst.NONDETERMINISTIC for r in res.rules)
    assert len(res.rules) == 5
    for i in range(len(data)):
        got = rst.classify(res.rules, dict(zip(res.table.attributes, res.table.rows[i])))
        assert got == res.table.decisions[i]


def test_rst_constant_lugeon():
    rng = np.random.default_rng(1)
    data = _dataset(rng.uniform(0, 100, 30), np.full(30, 7.0))
    res = pipeline.run_rst_branch(data)
    assert len(res.rules) == 1
    rule = res.rules[0]
    assert rule.conditions == () and rule.decision == 1 and rule.support == 30


def test_rst_inconsistent_pair():
    rqd = np.array([10.0, 10.0, 30, 50, 70, 90, 30, 50, 70, 90])
    z = np.array([1160.0, 1160, 1170, 1180, 1190, 1200, 1170, 1180, 1190, 1200])
    lugeon = np.array([1.0, 90, 20, 40, 60, 80, 20, 40, 60, 80])
    res = pipeline.run_rst_branch(_dataset(rqd, lugeon, z))
    six = [r for r in res.rules if r.decision == rst.NONDETERMINISTIC]
    assert len(six) == 1 and six[0].support == 2
