import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from matchplan.data import Document, Query, make_query
from matchplan.index import build_index, field_mask
from matchplan.matching import (CAT1_BASELINE, CAT2_BASELINE, MatchPlan, MatchRule, PlanStep,
                                RuleTemplate, ScanState, StoppingCondition, TermPolicy,
                                Transition, default_rule_set, execute_rule, open_scan,
                                parse_plan, plan_to_dict, rule_matches, rules_for_query, run_plan)

from oracles import VOCAB, brute_rule_docs, random_corpus

AUBT = field_mask("AUBT")
UNLIMITED = StoppingCondition(max_matches=10**9)


def doc(doc_id, rank, **fields):
    return Document(doc_id, rank, {f: tuple(fields.get(f, "").split())
                                   for f in ("anchor", "url", "body", "title")})


# the two rules from the running "halloween costumes" / "facebook login" examples
MR_A = MatchRule(0, (AUBT, AUBT))
MR_B = MatchRule(1, (field_mask("UT"), 0))


def test_rule_examples():
    assert rule_matches(MR_A, [field_mask("B"), field_mask("T")])
    assert rule_matches(MR_B, [field_mask("U"), 0])
    assert not rule_matches(MR_A, [field_mask("B"), 0])


def test_rule_validation():
    with pytest.raises(ValueError):
        MatchRule(0, (0, 0))
    with pytest.raises(ValueError):
        MatchRule(0, (16,))
    with pytest.raises(ValueError):
        MatchRule(0, (1, 1), min_matched=3)


@given(st.lists(st.integers(0, 15), min_size=1, max_size=4).filter(any),
       st.lists(st.lists(st.integers(0, 15), min_size=4, max_size=4), min_size=1, max_size=20))
def test_vectorised_matches_agrees_with_scalar(allowed, rows):
    rule = MatchRule(0, tuple(allowed))
    masks = np.array([r[:len(allowed)] for r in rows], dtype=np.uint8)
    got = rule.matches(masks).tolist()
    assert got == [rule_matches(rule, r[:len(allowed)]) for r in rows]


def test_default_rule_set_shapes():
    rules = default_rule_set(2)
    assert len(rules) == 5
    assert rules[0].allowed == (field_mask("UT"),) * 2
    assert rules[1].allowed == (field_mask("AUT"),) * 2
    assert rules[2].allowed == (AUBT, AUBT)  # the two-term all-fields conjunction
    assert rules[4].needed == 1


def test_r3_drops_highest_df_term_later_on_ties():
    r3 = default_rule_set(3, [0.1, 0.5, 0.2])[3]
    assert r3.allowed == (AUBT, 0, AUBT)
    r3 = default_rule_set(3, [0.5, 0.1, 0.5])[3]
    assert r3.allowed == (AUBT, AUBT, 0)


def test_single_term_degenerates():
    rules = default_rule_set(1)
    for r in rules[2:]:
        assert r.allowed == (AUBT,) and r.needed == 1


def test_default_rule_set_errors():
    with pytest.raises(ValueError):
        default_rule_set(0)
    with pytest.raises(ValueError):
        default_rule_set(2, [0.1])


@given(st.integers(1, 4), st.lists(st.floats(0, 1), min_size=4, max_size=4),
       st.lists(st.integers(0, 15), min_size=4, max_size=4))
def test_rule_ladder_is_nested(n, dfs, masks):
    rules = default_rule_set(n, dfs[:n])
    hits = [rule_matches(r, masks[:n]) for r in rules]
    for stronger, weaker in zip(hits, hits[1:]):
        assert not stronger or weaker


def test_stopping_condition_validation():
    with pytest.raises(ValueError):
        StoppingCondition()
    with pytest.raises(ValueError):
        StoppingCondition(max_blocks=-1)


def test_plan_validation():
    with pytest.raises(ValueError):
        MatchPlan(())
    with pytest.raises(ValueError):
        MatchPlan((PlanStep(0, UNLIMITED, Transition.CONTINUE),))


def _tiny():
    docs = [doc("d1", 0.9, body="halloween", title="costumes"),
            doc("d2", 0.8, body="halloween"),
            doc("d3", 0.7, url="costumes halloween"),
            doc("d4", 0.6, anchor="other")]
    return docs, build_index(docs, block_size=2), make_query("q", "halloween costumes")


def test_zero_budget_no_new_docs():
    _, idx, q = _tiny()
    cur = open_scan(idx, q.terms)
    state = ScanState()
    out = execute_rule(cur, MR_A, StoppingCondition(max_matches=0), state)
    assert len(out.new_docs) == 0 and state.v == 0 and cur.u == 0


def test_unlimited_rule_and_exhaustion():
    docs, idx, q = _tiny()
    cur = open_scan(idx, q.terms)
    state = ScanState()
    out = execute_rule(cur, MR_A, UNLIMITED, state)
    assert out.new_docs.tolist() == [0, 2]
    assert state.v == 5
    again = execute_rule(cur, MR_A, UNLIMITED, state)
    assert len(again.new_docs) == 0


def test_execute_rule_excludes_collected():
    _, idx, q = _tiny()
    cur = open_scan(idx, q.terms)
    state = ScanState()
    execute_rule(cur, MR_A, UNLIMITED, state)
    cur.reset()
    out = execute_rule(cur, MatchRule(4, (AUBT, AUBT), 1), UNLIMITED, state)
    assert out.new_docs.tolist() == [1]


def test_run_plan_union_superset():
    docs, idx, q = _tiny()
    rules = default_rule_set(2)
    alone = run_plan(idx, q, MatchPlan((PlanStep(2, UNLIMITED, Transition.STOP),)), rules)
    two = run_plan(idx, q, MatchPlan((
        PlanStep(0, StoppingCondition(max_matches=1), Transition.RESET),
        PlanStep(2, UNLIMITED, Transition.STOP))), rules)
    assert alone.candidates <= two.candidates
    assert len(two.trace) == 2


def test_empty_posting_query():
    _, idx, _ = _tiny()
    q = make_query("q", "nothing here")
    res = run_plan(idx, q, CAT1_BASELINE)
    assert res.candidates == frozenset()
    assert all(v == 0 for _, v in res.trace) and res.u == 0


def test_zero_budget_plan_single_trace_entry_per_step():
    _, idx, q = _tiny()
    zero = StoppingCondition(max_matches=0)
    plan = MatchPlan((PlanStep(0, zero, Transition.CONTINUE), PlanStep(2, zero, Transition.STOP)))
    res = run_plan(idx, q, plan)
    assert res.candidates == frozenset() and res.trace == [(0, 0), (0, 0)]


def _random_rule(rng: random.Random, n_terms: int) -> MatchRule:
    allowed = [rng.randint(0, 15) for _ in range(n_terms)]
    if not any(allowed):
        allowed[rng.randrange(n_terms)] = rng.randint(1, 15)
    n_req = sum(1 for a in allowed if a)
    needed = rng.choice([None, rng.randint(1, n_req)])
    return MatchRule(0, tuple(allowed), needed)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.booleans())
def test_single_step_plan_equals_brute_force(seed, reference):
    rng = random.Random(seed)
    docs = random_corpus(rng, rng.randint(1, 60))
    idx = build_index(docs, block_size=rng.randint(1, 8))
    terms = rng.sample(VOCAB, rng.randint(1, 3))
    rule = _random_rule(rng, len(terms))
    q = Query("q", tuple(terms), 0, {})
    res = run_plan(idx, q, MatchPlan((PlanStep(0, UNLIMITED, Transition.STOP),)), [rule],
                   reference=reference)
    want = brute_rule_docs(docs, terms, rule.allowed, rule.needed)
    assert sorted(res.candidates) == want


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6))
def test_plan_trace_monotone_and_chunking_invariant(seed):
    rng = random.Random(seed)
    docs = random_corpus(rng, rng.randint(5, 80))
    idx = build_index(docs, block_size=rng.randint(1, 6))
    q = Query("q", tuple(rng.sample(VOCAB, rng.randint(2, 3))), 0, {})
    steps = []
    for i in range(rng.randint(1, 4)):
        stop = StoppingCondition(rng.choice([None, rng.randint(0, 5)]), rng.randint(0, 12))
        tr = Transition.STOP if i == 3 else rng.choice(list(Transition))
        steps.append(PlanStep(rng.randrange(5), stop, tr))
        if tr is Transition.STOP:
            break
    else:
        steps[-1] = steps[-1]._replace(transition=Transition.STOP)
    plan = MatchPlan(tuple(steps))
    res = run_plan(idx, q, plan)
    for (u0, v0), (u1, v1) in zip(res.trace, res.trace[1:]):
        assert u1 >= u0 and v1 >= v0
    assert len(res.trace) == len(plan.steps)
    chunked = run_plan(idx, q, plan, record_every=StoppingCondition(max_matches=rng.randint(1, 4)))
    assert chunked.candidates == res.candidates
    assert (chunked.u, chunked.v) == (res.u, res.v)
    assert chunked.trace[-1] == res.trace[-1]
    ref = run_plan(idx, q, plan, reference=True)
    assert ref.trace == res.trace and ref.candidates == res.candidates


def test_u_cap_respected():
    docs = [doc(f"d{i:03d}", 1.0, body="t") for i in range(100)]
    idx = build_index(docs, block_size=1)
    q = make_query("q", "t")
    res = run_plan(idx, q, MatchPlan((PlanStep(4, UNLIMITED, Transition.STOP),)), u_cap=17)
    assert res.u == 17


def test_plan_dict_round_trip():
    for plan in (CAT1_BASELINE, CAT2_BASELINE):
        d = plan_to_dict(plan)
        assert parse_plan(d) == plan
    assert plan_to_dict(CAT1_BASELINE)["steps"][0] == {
        "rule": 2, "max_matches": 2000, "transition": "continue"}


def test_rules_for_query_uses_document_frequency():
    docs = [doc("a", 1, body="x y"), doc("b", 0.5, body="y"), doc("c", 0.1, body="y z")]
    idx = build_index(docs)
    rules = rules_for_query(idx, make_query("q", "x y z"))
    assert rules[3].allowed == (AUBT, 0, AUBT)


def test_template_policies():
    t = RuleTemplate("UT", TermPolicy.ANY).instantiate(7, [0.1, 0.2])
    assert t.rule_id == 7 and t.needed == 1
    assert "R7" in t.describe(["a", "b"])
