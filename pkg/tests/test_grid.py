import warnings

import numpy as np
import pytest

from speccompact import svc
from speccompact.datamodel import Dataset, LabelVector, SpecificationDef, label_pass_fail
from speccompact.errors import CellLimitExceeded, DimensionMismatch, GridTooCoarse
from speccompact.grid import (
    GridSpec,
    LookupTable,
    build_lookup_table,
    compact_arrays,
    compact_training_data,
    lut_classify,
    lut_classify_many,
    lut_from_text,
    lut_to_text,
    load_lut,
    save_lut,
)
from speccompact.guardband import GuardBandModel, TriState, classify_codes

UNIT = [SpecificationDef(n, "-", 0.5, 0.0, 1.0) for n in ("a", "b", "c")]


def _constant_gb(sign, dims=("a", "b")):
    m = svc.SvcModel(np.zeros((1, len(dims))), [0.0], float(sign), svc.KernelSpec.linear())
    return GuardBandModel(m, m, 0.01, dims, ("c",))


def test_cell_membership_half_open_last_closed():
    g = GridSpec.uniform(["a"], 4, (0.0, 1.0))
    x = np.array([[0.0], [0.25], [0.4999], [0.75], [1.0], [-3.0], [5.0]])
    assert g.cell_coords(x).ravel().tolist() == [0, 1, 1, 3, 3, 0, 3]


def test_pure_cell_collapses_to_center():
    g = GridSpec.uniform(["a", "b"], 2, (0.0, 1.0))
    X = np.array([[0.1, 0.1], [0.2, 0.3], [0.4, 0.1]])
    Xo, yo, keep, pure = compact_arrays(X, np.array([1, 1, 1]), g)
    assert keep.tolist() == []
    np.testing.assert_allclose(Xo, [[0.25, 0.25]])
    assert yo.tolist() == [1]


def test_mixed_cell_kept_verbatim():
    g = GridSpec.uniform(["a", "b"], 2, (0.0, 1.0))
    X = np.array([[0.1, 0.1], [0.2, 0.3], [0.4, 0.1]])
    Xo, yo, keep, pure = compact_arrays(X, np.array([1, 1, -1]), g)
    assert keep.tolist() == [0, 1, 2]
    np.testing.assert_array_equal(Xo, X)
    assert len(pure) == 0


def test_empty_dataset():
    ds = Dataset(UNIT, [], np.zeros((0, 3)), normalized=True)
    out, lab = compact_training_data(ds, label_pass_fail(ds, ["c"]), GridSpec.uniform(["a", "b"], 5))
    assert len(out) == 0 and len(lab) == 0


def test_compact_training_data_ids_and_other_columns():
    g = GridSpec.uniform(["a", "b"], 2, (0.0, 1.0))
    vals = np.array([[0.1, 0.1, 0.4], [0.2, 0.3, 0.6], [0.9, 0.9, 0.5], [0.8, 0.7, 1.5]])
    ds = Dataset(UNIT, ["r0", "r1", "r2", "r3"], vals, normalized=True)
    lab = label_pass_fail(ds, ["c"])
    out, olab = compact_training_data(ds, lab, g)
    # cell (1,1) is mixed, cell (0,0) pure Pass
    assert list(out.ids) == ["r2", "r3", "cell:0-0"]
    np.testing.assert_allclose(out.values[2], [0.25, 0.25, 0.5])
    assert olab.passed.tolist() == [True, False, True]


def test_relabel_mismatch_warns():
    g = GridSpec.uniform(["a", "b"], 1, (0.0, 1.0))
    vals = np.array([[0.1, 0.1, 0.9], [0.2, 0.3, 0.95]])
    ds = Dataset(UNIT, ["r0", "r1"], vals, normalized=True)
    # labels over "a" say Pass, but the merged center a=0.5 is inside too: no warning
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        compact_training_data(ds, label_pass_fail(ds, ["a"]), g)
    # claim both rows fail on "a": the collapsed center relabels as Pass
    lab = LabelVector(frozenset({"a"}), [False, False])
    with pytest.warns(GridTooCoarse):
        compact_training_data(ds, lab, g)


def test_constant_model_gives_uniform_table():
    lut = build_lookup_table(_constant_gb(+1), GridSpec.uniform(["a", "b"], 7))
    assert lut.attributes == "G" * 49
    assert lut.histogram() == {"G": 49, "B": 0, "U": 0}


def test_cell_limit():
    gb = _constant_gb(-1, dims=tuple(f"d{k}" for k in range(8)))
    g = GridSpec.uniform(gb.retained_specs, 50)
    with pytest.raises(CellLimitExceeded) as info:
        build_lookup_table(gb, g)
    assert info.value.n_cells == 50**8


def test_table_matches_model_at_centers(planted3_model):
    g = GridSpec.uniform(["s1", "s2"], 10)
    lut = build_lookup_table(planted3_model, g)
    centers = g.all_centers()
    codes = classify_codes(planted3_model, centers)
    expected = {1: TriState.GOOD, -1: TriState.BAD, 0: TriState.GUARD_BAND}
    for k, c in enumerate(centers):
        assert lut_classify(lut, c) is expected[int(codes[k])]
    assert set(lut.attributes) == {"G", "B", "U"}


def test_text_round_trip(tmp_path, planted3_model):
    g = GridSpec.uniform(["s1", "s2"], 23, (-0.3, 1.3))
    lut = build_lookup_table(planted3_model, g)
    p = tmp_path / "t.lut"
    save_lut(lut, p)
    back = load_lut(p)
    assert back == lut
    assert lut_from_text(lut_to_text(lut)) == lut
    X = np.random.default_rng(2).uniform(-0.5, 1.5, size=(1000, 2))
    assert lut_classify_many(back, X) == lut_classify_many(lut, X)


def test_same_cell_same_attribute_and_clamping(planted3_model):
    g = GridSpec.uniform(["s1", "s2"], 10)
    lut = build_lookup_table(planted3_model, g)
    assert lut_classify(lut, [0.31, 0.32]) is lut_classify(lut, [0.34, 0.39])
    assert lut_classify(lut, [5.0, 5.0]) is TriState.from_code(lut.attributes[-1])
    assert lut_classify(lut, [-5.0, -5.0]) is TriState.from_code(lut.attributes[0])
    with pytest.raises(DimensionMismatch):
        lut_classify(lut, [0.1])


def test_lookup_table_validation():
    g = GridSpec.uniform(["a"], 3)
    with pytest.raises(ValueError):
        LookupTable(g, "GG")
    with pytest.raises(ValueError):
        LookupTable(g, "GGX")
    with pytest.raises(ValueError):
        lut_from_text("2\na 0 1 3\n")
