import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import PTYPE, random_arrays
from pass2d.dataset import (DatasetConfig, FeatureSet, LabelKind, SortMethod, assemble, assemble_row,
                            build_datasets, field_evaluate, field_evaluate_arr, read_table, six_variants,
                            sort_permutation, sort_players, write_table, write_tables)
from pass2d.features import build_schema, extract, teammate_width
from pass2d.geometry import Vec2
from pass2d.model import EventArrays, PlayerState, PlayerTypeAttrs
from pass2d.synthgen import GenConfig, generate_arrays

TW = teammate_width(2)


def fe_oracle(x, y):
    return x + max(0.0, 40.0 - math.sqrt((x - 52.5) ** 2 + y ** 2))


def tm_blocks(t, i):
    """Teammate blocks of row i as (11, 42) when the table has all columns."""
    return t.X[i, 12:12 + 11 * TW].reshape(11, TW)


def test_field_evaluate_examples():
    assert field_evaluate(Vec2(52.5, 0)) == 92.5
    assert field_evaluate(Vec2(0, 0)) == 0
    assert field_evaluate(Vec2(20, 0)) == 27.5
    assert field_evaluate_arr(np.array([[52.5, 0.0], [0.0, 0.0]])).tolist() == [92.5, 0.0]


def players(xs, unums):
    pt = PlayerTypeAttrs(*PTYPE)
    return [PlayerState("ours", u, Vec2(x, 0), Vec2(0, 0), 0.0, pt) for x, u in zip(xs, unums)]


def test_sort_players_examples():
    ps = players([0, 0, 0], [3, 1, 2])
    assert [p.unum for p in sort_players(ps, SortMethod.UNIFORM_NUMBER)[0]] == [1, 2, 3]
    ps = players([10, 30, -5], [1, 2, 3])
    out, perm = sort_players(ps, SortMethod.X_COORDINATE)
    assert [p.pos.x for p in out] == [30, 10, -5] and perm == [1, 0, 2]
    # tie on x goes to the lower unum
    ps = players([5, 5, 7], [9, 4, 1])
    assert [p.unum for p in sort_players(ps, "x")[0]] == [1, 4, 9]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10**6))
def test_sorts_match_oracle(seed):
    a = random_arrays(20, seed)
    for i in range(20):
        pos, un = a.tm_pos[i], a.tm_unum[i]
        fe = sorted(range(11), key=lambda j: (-fe_oracle(*pos[j]), un[j]))
        xs = sorted(range(11), key=lambda j: (-pos[j][0], un[j]))
        us = sorted(range(11), key=lambda j: un[j])
        assert sort_permutation(pos[None], un[None], "fe")[0].tolist() == fe
        assert sort_permutation(pos[None], un[None], "x")[0].tolist() == xs
        assert sort_permutation(pos[None], un[None], "unum")[0].tolist() == us
        e = a.event(i)
        assert sort_players(list(e.snapshot.teammates), "fe")[1] == fe


def test_six_variants_and_names():
    v = six_variants()
    assert len(v) == 6 == len({c.name for c in v})
    assert {(c.sort, c.kicker_first) for c in v} == {(s, k) for s in SortMethod for k in (False, True)}
    c = DatasetConfig("x", True, "index", "position")
    assert c.name == "x_kf_position_index"
    assert DatasetConfig.from_dict(c.to_dict()) == c
    with pytest.raises(ValueError):
        DatasetConfig("y")
    with pytest.raises(ValueError):
        DatasetConfig(evaluator="nope")


def test_label_examples():
    a = random_arrays(200, seed=1, shuffle_unums=False)
    t = assemble(a, DatasetConfig("unum", False))
    assert np.array_equal(t.label_index, t.label_unum)
    # receiver in the 5th slot after sorting
    t = assemble(a, DatasetConfig("x", False))
    perm = sort_permutation(a.tm_pos, a.tm_unum, "x")
    rows = np.nonzero(perm[:, 4] == a.receiver_slot)[0]
    assert len(rows) and np.all(t.label_index[rows] == 5)


@pytest.mark.parametrize("cfg", six_variants())
def test_row_invariants(cfg, arrays_1000):
    t = assemble(arrays_1000, cfg)
    s = t.schema.names
    unum_col, kick_col = s.index("tm01_unum") - 12, s.index("tm01_is_kicker") - 12
    for i in range(0, 1000, 7):
        blocks = tm_blocks(t, i)
        assert blocks[t.label_index[i] - 1, unum_col] == t.label_unum[i]
        assert blocks[:, kick_col].sum() == 1
        if cfg.kicker_first:
            assert blocks[0, kick_col] == 1.0
    assert np.all((1 <= t.label_index) & (t.label_index <= 11))


def test_kicker_first_pure_permutation(arrays_1000):
    base = extract(arrays_1000)
    for sort in SortMethod:
        plain = assemble(arrays_1000, DatasetConfig(sort, False), base)
        kf = assemble(arrays_1000, DatasetConfig(sort, True), base)
        assert np.array_equal(plain.X[:, :12], kf.X[:, :12])
        assert np.array_equal(plain.X[:, 12 + 11 * TW:], kf.X[:, 12 + 11 * TW:])
        for i in range(1000):
            p, q = tm_blocks(plain, i), tm_blocks(kf, i)
            ks = int(np.argmax(p[:, 14]))
            expect = np.concatenate([p[ks:ks + 1], p[:ks], p[ks + 1:]])
            assert np.array_equal(q, expect)
            # the receiver block is the same block in both layouts
            assert np.array_equal(p[plain.label_index[i] - 1], q[kf.label_index[i] - 1])


def relabel_opponents(a: EventArrays, seed: int) -> EventArrays:
    b = a.copy()
    rng = np.random.default_rng(seed)
    for i in range(len(b)):
        b.opp_unum[i] = b.opp_unum[i][rng.permutation(11)]
    return b


@pytest.mark.parametrize("sort", ["x", "fe"])
def test_opponent_relabel_invariance(sort, arrays_1000):
    b = relabel_opponents(arrays_1000, 3)
    for kf in (False, True):
        cfg = DatasetConfig(sort, kf)
        t, u = assemble(arrays_1000, cfg), assemble(b, cfg)
        unum = np.array([c.name.endswith("_unum") for c in t.schema.columns])
        assert np.array_equal(t.X[:, ~unum], u.X[:, ~unum])
        assert np.array_equal(t.label_index, u.label_index)
        assert np.array_equal(t.label_unum, u.label_unum)
        assert not np.array_equal(t.X[:, unum], u.X[:, unum])


def test_unum_sort_not_invariant(arrays_1000):
    b = relabel_opponents(arrays_1000, 3)
    cfg = DatasetConfig("unum", False)
    t, u = assemble(arrays_1000, cfg), assemble(b, cfg)
    pos = [i for i, c in enumerate(t.schema.columns) if c.subject.startswith("opp") and c.group == "Position"]
    assert not np.array_equal(t.X[:, pos], u.X[:, pos])


def test_feature_sets(arrays_1000):
    a = arrays_1000.subset(slice(0, 50))
    full = assemble(a, DatasetConfig())
    pos = assemble(a, DatasetConfig(feature_set=FeatureSet.POSITION_ONLY))
    nou = assemble(a, DatasetConfig(feature_set=FeatureSet.NO_UNUM))
    assert pos.X.shape == (50, 92) and {c.group for c in pos.schema.columns} == {"Position"}
    assert nou.X.shape == (50, 738 - 22)
    assert not any(n.endswith("_unum") for n in nou.schema.names)
    idx = [full.schema.names.index(n) for n in pos.schema.names]
    assert np.array_equal(full.X[:, idx], pos.X)
    assert len({full.schema_hash, pos.schema_hash, nou.schema_hash}) == 3


def test_assemble_row_matches_batch():
    a = random_arrays(6, seed=9)
    cfg = DatasetConfig("fe", True)
    t = assemble(a, cfg)
    for i in range(6):
        r = assemble_row(a.event(i), cfg)
        assert np.array_equal(r.features.values, t.X[i])
        assert (r.label_unum, r.label_index) == (t.label_unum[i], t.label_index[i])


def test_build_datasets_and_empty(tmp_path):
    a = generate_arrays(GenConfig(seed=1, n_events=30))
    tables = build_datasets(a, six_variants())
    assert len(tables) == 6
    e = build_datasets(EventArrays.empty(0), six_variants())
    assert all(len(t) == 0 and t.X.shape == (0, 738) for t in e)
    paths = write_tables(e, tmp_path / "empty")
    assert paths[0].read_text().count("\n") == 1
    assert len(read_table(paths[0])) == 0


def test_table_io_round_trip(tmp_path):
    a = generate_arrays(GenConfig(seed=2, n_events=40))
    for cfg in [DatasetConfig("x", True), DatasetConfig("fe", False, LabelKind.UNUM, FeatureSet.POSITION_ONLY)]:
        t = assemble(a, cfg)
        p = tmp_path / "t.csv"
        write_table(t, p)
        first = p.read_bytes(), p.with_suffix(".json").read_bytes()
        back = read_table(p)
        assert back.config == cfg and back.schema_hash == t.schema_hash
        assert np.array_equal(back.label_index, t.label_index) and np.array_equal(back.labels, t.labels)
        # 9 significant digits; generated values are short so they survive exactly or nearly
        np.testing.assert_allclose(back.X, t.X, rtol=1e-8, atol=1e-12)
        write_table(back, p)
        assert (p.read_bytes(), p.with_suffix(".json").read_bytes()) == first
        assert p.read_text().splitlines()[0].endswith("label_unum,label_index")


def test_table_hash_check(tmp_path):
    t = assemble(generate_arrays(GenConfig(seed=2, n_events=5)), DatasetConfig())
    p = tmp_path / "t.csv"
    write_table(t, p)
    side = p.with_suffix(".json")
    side.write_text(side.read_text().replace(t.schema_hash, "0" * 16))
    with pytest.raises(ValueError, match="schema hash"):
        read_table(p)


def test_mirrored_evaluator():
    a = random_arrays(30, seed=5)
    t = assemble(a, DatasetConfig("fe", opponent_evaluator="agent2d-mirrored"))
    u = assemble(a, DatasetConfig("fe"))
    assert t.X.shape == u.X.shape and not np.array_equal(t.X, u.X)
    perm = sort_permutation(a.opp_pos, a.opp_unum, "fe", "agent2d-mirrored")
    for i in range(30):
        want = sorted(range(11), key=lambda j: (-fe_oracle(*(-a.opp_pos[i, j])), a.opp_unum[i, j]))
        assert perm[i].tolist() == want
    assert build_schema(2).hash() == u.schema_hash
