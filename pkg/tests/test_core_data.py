import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from granperm import core_data as cd
from granperm import nfis
from granperm.errors import DegenerateFeature, EmptyInput, MissingColumn, RowParseError

HEADER = "borehole_id,x,y,z,section_length,rqd,twr,lugeon\n"


def test_header_only_gives_empty_dataset():
    data = cd.parse_borehole_csv(HEADER)
    assert len(data) == 0
    assert data.X.shape == (0, 4)


def test_single_row_maps_fields():
    data = cd.parse_borehole_csv(HEADER + "B1,0,0,1180,5,80,2,12.5\n")
    assert len(data) == 1
    rec = data.records[0]
    assert (rec.z, rec.rqd, rec.lugeon) == (1180.0, 80.0, 12.5)
    assert rec.twr == 2 and isinstance(rec.twr, int)
    np.testing.assert_array_equal(data.X[0], [1180, 5, 80, 2])
    assert data.y[0] == 12.5


def test_rqd_out_of_bounds_is_rejected():
    with pytest.raises(RowParseError) as info:
        cd.parse_borehole_csv(HEADER + "B1,0,0,1180,5,150,2,12.5\n")
    err = info.value
    assert err.line_no == 2 and err.field == "rqd"
    assert "RQD" in str(err)


@pytest.mark.parametrize("row,field", [
    ("B1,0,0,1180,0,80,2,1", "section_length"),
    ("B1,0,0,1180,5,80,7,1", "twr"),
    ("B1,0,0,1180,5,80,2.5,1", "twr"),
    ("B1,0,0,1180,5,80,2,-1", "lugeon"),
    ("B1,0,0,abc,5,80,2,1", "z"),
    ("B1,0,0,,5,80,2,1", "z"),
    ("B1,0,0,nan,5,80,2,1", "z"),
])
def test_bad_rows(row, field):
    with pytest.raises(RowParseError) as info:
        cd.parse_borehole_csv(HEADER + row + "\n")
    assert info.value.field == field


def test_missing_column_and_empty_file():
    with pytest.raises(MissingColumn) as info:
        cd.parse_borehole_csv("borehole_id,x,y,z,section_length,rqd,lugeon\n")
    assert info.value.name == "twr"
    with pytest.raises(EmptyInput):
        cd.parse_borehole_csv("")


def test_column_order_is_free_and_extras_warn():
    text = "lugeon,twr,rqd,section_length,z,y,x,borehole_id,note\n3,1,50,2,1170,0,0,B7,ok\n"
    with pytest.warns(UserWarning, match="note"):
        data = cd.parse_borehole_csv(text)
    assert data.records[0].borehole_id == "B7"
    np.testing.assert_array_equal(data.X[0], [1170, 2, 50, 1])


def test_scan_collects_rejects():
    text = HEADER + "B1,0,0,1180,5,80,2,1\nB2,0,0,1180,5,180,2,1\nB3,0,0,1180,5,80,2,1\n"
    report = cd.scan_borehole_csv(text)
    assert len(report.records) == 2
    assert [e.line_no for e in report.rejected] == [3]


def _records(draw_values):
    return [cd.BoreholeRecord(f"B{i}", *v) for i, v in enumerate(draw_values)]


# Nine significant digits survive the text round trip exactly.
nine = st.floats(-1e6, 1e6, allow_nan=False).map(lambda v: float(f"{v:.9g}"))
pos9 = st.floats(1e-3, 1e3).map(lambda v: float(f"{v:.9g}"))
rec_values = st.tuples(nine, nine, nine, pos9,
                       st.floats(0, 100).map(lambda v: float(f"{v:.9g}")),
                       st.integers(1, 5), st.floats(0, 1e4).map(lambda v: float(f"{v:.9g}")))


@given(st.lists(rec_values, min_size=1, max_size=20))
@settings(max_examples=60, deadline=None)
def test_csv_round_trip(values):
    recs = _records(values)
    text = cd.format_borehole_csv(recs)
    again = cd.parse_borehole_csv(text)
    assert again.records == tuple(recs)
    assert cd.format_borehole_csv(again.records) == text


def _toy(n):
    rng = np.random.default_rng(n)
    X = rng.uniform(0, 1, size=(n, 4))
    return cd.Dataset(X, rng.uniform(0, 5, n), ids=tuple(f"r{i}" for i in range(n)))


def test_split_sizes_and_determinism():
    data = _toy(10)
    tr, te = cd.split_train_test(data, cd.SplitSpec(0.8, 3))
    assert (len(tr), len(te)) == (8, 2)
    tr2, te2 = cd.split_train_test(data, cd.SplitSpec(0.8, 3))
    assert tr.ids == tr2.ids and te.ids == te2.ids
    with pytest.raises(EmptyInput):
        cd.split_train_test(_toy(10).subset([]), cd.SplitSpec())


@given(st.integers(1, 60), st.floats(0.01, 0.99), st.integers(0, 2**31))
@settings(max_examples=80, deadline=None)
def test_split_is_partition(n, frac, seed):
    data = _toy(n)
    tr, te = cd.split_train_test(data, cd.SplitSpec(frac, seed))
    assert len(tr) + len(te) == n
    assert len(tr) == int(np.floor(frac * n + 0.5))
    assert sorted(tr.ids + te.ids) == sorted(data.ids)
    assert not set(tr.ids) & set(te.ids)


def test_split_by_borehole_keeps_holes_together():
    ids = tuple(f"B{i // 3}" for i in range(30))
    data = cd.Dataset(np.random.default_rng(0).random((30, 4)), np.zeros(30), ids=ids)
    tr, te = cd.split_train_test(data, cd.SplitSpec(0.5, 1, by_borehole=True))
    assert not set(tr.ids) & set(te.ids)
    assert len(tr) + len(te) == 30


def test_normalize_examples():
    data = cd.Dataset(np.array([[0.0], [5.0], [10.0]]), [1, 2, 3], ("z",))
    out = cd.normalize(data)
    np.testing.assert_array_equal(out.X[:, 0], [0, 0.5, 1])
    np.testing.assert_array_equal(out.y, data.y)
    with pytest.raises(DegenerateFeature) as info:
        cd.normalize(cd.Dataset(np.array([[3.0], [3.0], [3.0]]), [1, 2, 3], ("rqd",)))
    assert info.value.name == "rqd"


@given(st.lists(st.tuples(*[st.floats(-1e4, 1e4)] * 3), min_size=2, max_size=30))
@settings(max_examples=80, deadline=None)
def test_normalize_inverts(rows):
    X = np.array(rows)
    if np.any(np.ptp(X, axis=0) == 0):
        return
    data = cd.Dataset(X, np.zeros(len(X)), ("a", "b", "c"))
    back = cd.denormalize(cd.normalize(data))
    # Tolerance per feature, relative to that feature's magnitude.
    scale = np.maximum(1.0, np.abs(X).max(axis=0))
    assert np.all(np.abs(back.X - X).max(axis=0) <= 1e-12 * scale)
    s = cd.normalize(data).X
    assert s.min() >= 0 and s.max() <= 1


def test_scaler_reuse_for_test_data():
    data = _toy(20)
    tr, te = cd.split_train_test(data, cd.SplitSpec(0.5, 0))
    trs = cd.normalize(tr)
    tes = cd.normalize(te, trs.scaler)
    np.testing.assert_allclose(tes.X, (te.X - tr.X.min(0)) / np.ptp(tr.X, axis=0))


def test_synthetic_identity_consequent():
    rb = nfis.TskRuleBase.from_arrays([[0.0]], [[1.0]], [[0.0, 1.0]], input_names=("z",))
    spec = cd.SyntheticSpec(rb, 50, 0.0, {"z": (-3.0, 7.0)}, seed=4)
    with pytest.warns(UserWarning, match="records omitted"):
        data = cd.generate_synthetic(spec)
    np.testing.assert_array_equal(data.y, data.X[:, 0])
    # Negative targets are not valid lugeon values, so only arrays are kept.
    assert data.records is None


def test_synthetic_deterministic_and_noiseless_matches_model():
    rb = nfis.published_rulebase()
    spec = cd.SyntheticSpec(rb, 200, 0.0, cd.fixture_input_ranges(), seed=11)
    a, b = cd.generate_synthetic(spec), cd.generate_synthetic(spec)
    np.testing.assert_array_equal(a.X, b.X)
    np.testing.assert_array_equal(a.y, b.y)
    for x, y in zip(a.X, a.y):
        assert abs(y - nfis.tsk_eval(rb, x)) <= 1e-12 * max(1.0, abs(y))
    assert set(np.unique(a.X[:, 3])) <= {1.0, 2.0, 3.0, 4.0, 5.0}
    assert len(a.records) == 200


def test_synthetic_origin_value_with_only_first_rule():
    # Only rule 1 fires when the generator keeps just that rule.
    rb = nfis.published_rulebase()
    one = nfis.TskRuleBase(rb.rules[:1], rb.input_names)
    spec = cd.SyntheticSpec(one, 1, 0.0, {n: (0.0, 0.0) for n in rb.input_names}, seed=0)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        data = cd.generate_synthetic(spec)
    assert data.y[0] == pytest.approx(-38.4240, abs=1e-12)


def test_synthetic_noise_level():
    spec = cd.SyntheticSpec(nfis.published_rulebase(), 4000, 0.5, cd.fixture_input_ranges(), seed=2)
    clean = cd.SyntheticSpec(nfis.published_rulebase(), 4000, 0.0, cd.fixture_input_ranges(), seed=2)
    noisy, base = cd.generate_synthetic(spec), cd.generate_synthetic(clean)
    np.testing.assert_array_equal(noisy.X, base.X)
    assert np.std(noisy.y - base.y) == pytest.approx(0.5, rel=0.05)


def test_load_synthetic_spec_inline(tmp_path):
    p = tmp_path / "s.toml"
    p.write_text(
        'n_records = 5\nnoise_sigma = 0.0\nseed = 1\ninput_names = ["rqd"]\n'
        "[input_ranges]\nrqd = [0, 100]\n"
        "[[rules]]\ncenters = [50]\nsigmas = [20]\nconsequent = [1.0, 0.5]\n"
    )
    spec = cd.load_synthetic_spec(p)
    data = cd.generate_synthetic(spec)
    np.testing.assert_allclose(data.y, 1.0 + 0.5 * data.X[:, 0], rtol=0, atol=1e-12)


def test_dataset_arrays_are_read_only():
    data = _toy(3)
    with pytest.raises(ValueError):
        data.X[0, 0] = 1.0
