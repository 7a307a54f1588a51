import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matchplan.data import Document
from matchplan.index import (ALL_FIELDS, IndexFormatError, ScanCursor, ScanTape, TapeCursor,
                             advance, build_index, dump_index, field_mask, load_index,
                             load_index_bytes, mask_letters, open_cursor, reset_cursor, save_index)

from oracles import brute_scan, ceil_div, random_corpus, static_order


def doc(doc_id, rank, anchor="", url="", body="", title=""):
    return Document(doc_id, rank, {"anchor": tuple(anchor.split()), "url": tuple(url.split()),
                                   "body": tuple(body.split()), "title": tuple(title.split())})


def drain(cursor):
    out = []
    while (hit := advance(cursor)) is not None:
        out.append((hit.ordinal, hit.masks))
    return out


def test_field_mask_letters():
    assert field_mask("A") == 1 and field_mask("T") == 8
    assert field_mask("AUBT") == ALL_FIELDS
    assert mask_letters(field_mask("UT")) == "UT"
    with pytest.raises(ValueError):
        field_mask("X")


def test_ordinals_follow_static_rank():
    idx = build_index([doc("b", 0.1, body="x"), doc("a", 0.9, body="x")])
    assert list(idx.doc_ids) == ["a", "b"]
    assert idx.ordinal_of("a") == 0 and idx.ordinal_of("b") == 1


def test_static_rank_ties_by_doc_id():
    idx = build_index([doc("z", 0.5), doc("m", 0.5), doc("a", 0.1)])
    assert list(idx.doc_ids) == ["m", "z", "a"]


def test_title_only_mask():
    idx = build_index([doc("d", 1.0, title="halloween")])
    pl = idx.postings["halloween"]
    assert int(pl.masks[0]) == field_mask("T")


def test_df_counts_documents():
    idx = build_index([doc("a", 1, body="halloween halloween"), doc("b", 0.5, title="halloween"),
                       doc("c", 0.2, body="other")])
    assert idx.df("halloween") == 2
    assert idx.df("missing") == 0
    assert idx.df_fraction("halloween") == pytest.approx(2 / 3)


def test_build_errors():
    with pytest.raises(ValueError):
        build_index([])
    with pytest.raises(ValueError):
        build_index([doc("a", 1), doc("a", 2)])
    with pytest.raises(ValueError):
        build_index([doc("a", 1)], block_size=0)


def test_unknown_terms_exhaust_immediately():
    idx = build_index([doc("a", 1, body="x")])
    cur = open_cursor(idx, ["nope", "never"])
    assert cur.u == 0
    assert advance(cur) is None
    assert cur.exhausted and cur.u == 0


def test_single_term_sequence():
    docs = [doc(f"d{i}", 1 - i / 10, body="t" if i in (0, 7) else "o") for i in range(9)]
    cur = open_cursor(build_index(docs), ["t"])
    assert [h for h, _ in drain(cur)] == [0, 7]


def test_block_fetch_count_hand_example():
    docs = [doc(f"d{i}", 1 - i / 10, body="t") for i in range(8)]
    cur = open_cursor(build_index(docs, block_size=4), ["t"])
    assert len(drain(cur)) == 8
    assert cur.u == 2


def test_two_disjoint_terms_union():
    docs = [doc(f"d{i}", 1 - i / 10, body="a" if i % 2 else "b") for i in range(6)]
    idx = build_index(docs, block_size=2)
    got = drain(open_cursor(idx, ["a", "b"]))
    assert got == brute_scan(docs, ["a", "b"])


def test_reopen_independent_accounting():
    idx = build_index([doc(f"d{i}", 1 - i / 10, body="t") for i in range(5)], block_size=2)
    a = open_cursor(idx, ["t"])
    drain(a)
    b = open_cursor(idx, ["t"])
    assert b.u == 0 and a.u == 3


def test_reset_semantics():
    docs = [doc(f"d{i:02d}", 1.0, body="t") for i in range(12)]
    cur = open_cursor(build_index(docs, block_size=2), ["t"])
    for _ in range(5):
        advance(cur)
    assert cur.u == 3
    reset_cursor(cur)
    assert advance(cur).ordinal == 0
    assert cur.u >= 3
    # reset at start is a no-op, double reset equals one
    fresh = open_cursor(build_index(docs, block_size=2), ["t"])
    reset_cursor(fresh)
    assert fresh.u == 0 and advance(fresh).ordinal == 0
    reset_cursor(reset_cursor(cur))
    assert drain(cur) == drain(reset_cursor(open_cursor(cur.index, ["t"])))


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 40), st.integers(1, 5),
       st.lists(st.sampled_from(["alpha", "beta", "gamma", "zzz"]), min_size=1, max_size=3,
                unique=True))
def test_exhaustive_scan_matches_brute_force(seed, n_docs, block, terms):
    docs = random_corpus(random.Random(seed), n_docs)
    idx = build_index(docs, block_size=block)
    assert drain(open_cursor(idx, terms)) == brute_scan(docs, terms)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(1, 8))
def test_single_list_cost_is_ceil(n, block):
    docs = [doc(f"d{i:03d}", 1.0, body="t") for i in range(n)]
    cur = open_cursor(build_index(docs, block_size=block), ["t"])
    drain(cur)
    assert cur.u == ceil_div(n, block)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.lists(st.sampled_from(["adv", "reset"]), max_size=60))
def test_u_monotone_and_ordinals_ascending(seed, ops):
    rng = random.Random(seed)
    docs = random_corpus(rng, 30)
    cur = open_cursor(build_index(docs, block_size=3), ["alpha", "beta"])
    last_u, last_ord = 0, -1
    for op in ops:
        if op == "reset":
            reset_cursor(cur)
            last_ord = -1
        else:
            hit = advance(cur)
            if hit is not None:
                assert hit.ordinal > last_ord
                last_ord = hit.ordinal
        assert cur.u >= last_u
        last_u = cur.u


# the vectorised tape cursor must be indistinguishable from the reference cursor

budgets = st.tuples(st.one_of(st.none(), st.integers(0, 6)), st.one_of(st.none(), st.integers(0, 12)))


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 60), st.integers(1, 6),
       st.lists(st.one_of(st.just("reset"), budgets), min_size=1, max_size=12),
       st.one_of(st.none(), st.integers(0, 30)))
def test_tape_cursor_equals_reference(seed, n_docs, block, ops, u_limit):
    docs = random_corpus(random.Random(seed), n_docs, max_len=3)
    idx = build_index(docs, block_size=block)
    terms = ["alpha", "beta", "gamma"]
    ref = ScanCursor(idx, terms)
    tape = TapeCursor(ScanTape(idx, terms, initial_window=4))
    for op in ops:
        if op == "reset":
            ref.reset()
            tape.reset()
            continue
        mb, mm = op
        if mb is None and mm is None:
            mm = 5
        a = ref.scan(mb, mm, u_limit)
        b = tape.scan(mb, mm, u_limit)
        assert a.ordinals.tolist() == b.ordinals.tolist()
        assert a.masks.tolist() == b.masks.tolist()
        assert a.tfs.tolist() == b.tfs.tolist()
        assert (a.blocks, a.matches) == (b.blocks, b.matches)
        assert ref.u == tape.u
        assert ref.exhausted == tape.exhausted
        if u_limit is not None:
            assert ref.u <= u_limit


def test_scan_zero_budget_consumes_nothing():
    idx = build_index([doc(f"d{i}", 1 - i / 10, body="t") for i in range(5)])
    for cur in (ScanCursor(idx, ["t"]), TapeCursor(ScanTape(idx, ["t"]))):
        b = cur.scan(max_matches=0)
        assert len(b.ordinals) == 0 and cur.u == 0


# serialization

def test_round_trip_bit_identical(tmp_path):
    docs = random_corpus(random.Random(3), 50)
    idx = build_index(docs, block_size=7)
    path = tmp_path / "i.mpl"
    save_index(idx, path)
    raw = path.read_bytes()
    assert raw[:4] == b"MPL0"
    again = load_index(path)
    assert dump_index(again) == raw
    assert list(again.doc_ids) == list(idx.doc_ids)
    assert np.array_equal(again.static_ranks, idx.static_ranks)
    assert again.block_size == 7
    for t, pl in idx.postings.items():
        assert np.array_equal(again.postings[t].ordinals, pl.ordinals)
        assert np.array_equal(again.postings[t].tfs, pl.tfs)


def test_load_rejects_bad_header():
    raw = dump_index(build_index([doc("a", 1, body="x")]))
    with pytest.raises(IndexFormatError):
        load_index_bytes(b"NOPE" + raw[4:])
    with pytest.raises(IndexFormatError):
        load_index_bytes(raw[:-3])


def test_emitted_order_is_static_rank_order():
    docs = random_corpus(random.Random(9), 25)
    idx = build_index(docs)
    assert list(idx.doc_ids) == [d.doc_id for d in static_order(docs)]
