import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matchplan.data import Document, make_query
from matchplan.evaluation import (RunRecord, blocks_profile, candidate_ncg, compare,
                                  emit_blocks_profile, fraction_at_or_below, gain,
                                  load_records, dump_records, ncg_at_k, paired_permutation_test,
                                  read_blocks_profile)
from matchplan.index import build_index
from matchplan.ranker import L1Weights

from oracles import brute_ncg


@pytest.mark.parametrize("grade, want", [(0, 0.0), (1, 1.0), (2, 3.0), (4, 15.0)])
def test_gain(grade, want):
    assert gain(grade) == want


@pytest.mark.parametrize("bad", [-1, 5, 2.5, True])
def test_gain_out_of_scale(bad):
    with pytest.raises(ValueError):
        gain(bad)


def test_ncg_examples():
    j = {"d1": 4, "d2": 2}
    assert ncg_at_k({"d2"}, j, 100).ncg == pytest.approx(3 / 18)
    assert ncg_at_k(set(), j).ncg == 0.0
    assert ncg_at_k({"d1", "d2", "x"}, j).ncg == 1.0
    top = {"a": 4, "b": 3, "c": 1, "d": 0}
    assert ncg_at_k({"a", "b"}, top, k=2).ncg == 1.0


def test_unjudged_query_excluded():
    r = ncg_at_k({"a"}, {"a": 0, "b": 0})
    assert not r.judged and r.ncg == 0.0


def test_truncation_needs_ranking():
    with pytest.raises(ValueError):
        ncg_at_k({"a", "b"}, {"a": 1}, k=1)
    assert ncg_at_k({"a", "b"}, {"a": 1}, k=1, ranking=["b", "a"]).cum_gain == 0.0
    assert ncg_at_k({"a", "b"}, {"a": 1}, k=1, ranking=["a", "b"]).cum_gain == 1.0


judgment_sets = st.dictionaries(st.sampled_from([f"d{i}" for i in range(10)]),
                                st.integers(0, 4), max_size=8)


@settings(max_examples=300)
@given(judgment_sets, st.sets(st.sampled_from([f"d{i}" for i in range(14)])),
       st.integers(1, 6), st.randoms(use_true_random=False))
def test_ncg_agrees_with_brute_force(judgments, cands, k, rnd):
    ranking = sorted(cands)
    rnd.shuffle(ranking)
    got = ncg_at_k(cands, judgments, k, ranking)
    want = brute_ncg(cands, judgments, k, ranking)
    if want is None:
        assert not got.judged
    else:
        assert got.ncg == want
        assert 0.0 <= got.ncg <= 1.0


@settings(max_examples=100)
@given(judgment_sets, st.sets(st.sampled_from([f"d{i}" for i in range(14)]), max_size=5))
def test_ncg_order_invariant_and_unjudged_neutral(judgments, cands):
    a = ncg_at_k(list(cands), judgments, 10)
    b = ncg_at_k(sorted(cands, reverse=True), judgments, 10)
    assert a == b
    c = ncg_at_k(set(cands) | {"unjudged"}, judgments, 10)
    assert c.cum_gain == a.cum_gain


def test_candidate_ncg_truncates_by_l1():
    docs = [Document(f"d{i}", 1.0 - i / 100, {"anchor": (), "url": (), "title": ("x",) if i == 5 else (),
                                                "body": ("x",)}) for i in range(10)]
    idx = build_index(docs)
    q = make_query("q", "x", 1, {"d5": 4, "d0": 1})
    # with k=1 the title match wins, even though d0 has the best static rank
    res = candidate_ncg(idx, q, range(10), L1Weights(), k=1)
    assert res.cum_gain == 15.0 and res.ncg == 1.0


def _records(us, ncgs, treatment="policy"):
    return [RunRecord(f"q{i}", "CAT1", treatment, u, 0, (), float(g), 1.0)
            for i, (u, g) in enumerate(zip(us, ncgs))]


def test_compare_self_is_null():
    a = _records([5, 7, 9] * 20, [0.5, 0.7, 1.0] * 20)
    rep = compare(a, a)
    assert rep.delta_u == 0.0 and rep.delta_ncg == 0.0
    assert rep.p_u == 1.0 and rep.p_ncg == 1.0
    assert not rep.low_coverage


def test_compare_halving():
    base = _records([10, 20, 40] * 30, [0.5] * 90, "baseline")
    pol = _records([5, 10, 20] * 30, [0.5] * 90)
    rep = compare(pol, base, resamples=2000)
    assert rep.delta_u == pytest.approx(-0.5)
    assert rep.p_u < 0.01


def test_compare_low_coverage_and_mismatch():
    a = _records([1] * 10, [0.3] * 10)
    assert compare(a, a).low_coverage
    with pytest.raises(ValueError):
        compare(a, a[:-1])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(1, 100), st.integers(1, 100), st.floats(0, 1),
                          st.floats(0, 1)), min_size=1, max_size=30))
def test_compare_antisymmetric(rows):
    a = _records([r[0] for r in rows], [r[2] for r in rows])
    b = _records([r[1] for r in rows], [r[3] for r in rows], "baseline")
    ab, ba = compare(a, b, resamples=200), compare(b, a, resamples=200)
    assert np.array_equal(ab.u_policy - ab.u_baseline, -(ba.u_policy - ba.u_baseline))
    assert np.array_equal(ab.ncg_policy - ab.ncg_baseline, -(ba.ncg_policy - ba.ncg_baseline))
    assert ab.p_u == pytest.approx(ba.p_u)


def test_permutation_test_known_cases():
    assert paired_permutation_test([]) == 1.0
    assert paired_permutation_test([0.0] * 10) == 1.0
    # all eight sign patterns of three equal diffs: only two reach |mean| = 1
    p = paired_permutation_test([1.0, 1.0, 1.0], resamples=20_000, seed=1)
    assert p == pytest.approx(0.25, abs=0.02)


def test_records_round_trip(tmp_path):
    recs = [RunRecord("q1", "CAT2", "policy", 12, 400, ("d1", "d9"), 3.0, 18.0, 4),
            RunRecord("q2", "CAT2", "policy", 0, 0, (), 0.0, 0.0, 1)]
    path = tmp_path / "r.jsonl"
    path.write_text(dump_records(recs))
    assert load_records(path) == recs
    path.write_text("{bad\n")
    with pytest.raises(ValueError, match="r.jsonl:1"):
        load_records(path)


def test_blocks_profile(tmp_path):
    pol, base = blocks_profile([5, 1, 3], [2, 9, 4])
    assert pol == [1, 3, 5] and base == [2, 4, 9]
    with pytest.raises(ValueError):
        blocks_profile([], [])
    path = emit_blocks_profile(_records([5, 1, 3], [0, 0, 0]),
                               _records([2, 9, 4], [0, 0, 0], "baseline"), tmp_path / "p.tsv")
    assert path.read_text().splitlines()[0] == "position\tpolicy\tbaseline"
    assert read_blocks_profile(path) == ([1, 3, 5], [2, 4, 9])
    assert fraction_at_or_below([5, 1, 3], [2, 9, 4]) == 1.0
    assert fraction_at_or_below([9, 3, 3], [5, 2, 4]) == pytest.approx(1 / 3)
