"""Match rules, stopping conditions and match-plan execution."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .data import Query
from .index import (ALL_FIELDS, FieldedIndex, ScanCursor, ScanTape, TapeCursor,
                    field_mask, mask_letters)

DEFAULT_U_CAP = 100_000


@dataclass(frozen=True)
class MatchRule:
    """Per query-term allowed field masks; 0 marks a term that is not required.

    A document matches when at least ``min_matched`` required terms occur in
    one of their allowed fields (all of them by default).
    """

    rule_id: int
    allowed: tuple[int, ...]
    min_matched: int | None = None

    def __post_init__(self):
        if not any(self.allowed):
            raise ValueError("a match rule needs at least one required term")
        if any(not 0 <= m <= ALL_FIELDS for m in self.allowed):
            raise ValueError("field masks must be 4-bit")
        n_req = len(self.required_terms)
        if self.min_matched is not None and not 1 <= self.min_matched <= n_req:
            raise ValueError("min_matched must lie in [1, number of required terms]")

    @property
    def required_terms(self) -> tuple[int, ...]:
        return tuple(i for i, m in enumerate(self.allowed) if m)

    @property
    def needed(self) -> int:
        return len(self.required_terms) if self.min_matched is None else self.min_matched

    def matches(self, masks: np.ndarray) -> np.ndarray:
        """Vectorised test over an (m, n_terms) array of observed field masks."""
        allowed = np.asarray(self.allowed, dtype=np.uint8)
        hits = (np.asarray(masks, dtype=np.uint8) & allowed) != 0
        return hits.sum(axis=1) >= self.needed

    def describe(self, terms: Sequence[str] | None = None) -> str:
        parts = []
        for i, m in enumerate(self.allowed):
            if m:
                name = terms[i] if terms else f"t{i}"
                parts.append(f"({name} in {'|'.join(mask_letters(m))})")
        joiner = " & " if self.needed == len(parts) else f" [{self.needed} of] "
        return f"R{self.rule_id}: " + joiner.join(parts)


def rule_matches(rule: MatchRule, field_masks: Sequence[int]) -> bool:
    got = sum(1 for i, m in enumerate(rule.allowed) if m and field_masks[i] & m)
    return got >= rule.needed


class TermPolicy(str, enum.Enum):
    ALL = "all"
    ALL_BUT_MOST_FREQUENT = "all_but_most_frequent"
    ANY = "any"


@dataclass(frozen=True)
class RuleTemplate:
    """Query-independent rule description: fields plus which terms are required."""

    fields: str
    terms: TermPolicy = TermPolicy.ALL

    def instantiate(self, rule_id: int, dfs: Sequence[float]) -> MatchRule:
        n = len(dfs)
        mask = field_mask(self.fields)
        if self.terms is TermPolicy.ALL or n == 1:
            return MatchRule(rule_id, (mask,) * n)
        if self.terms is TermPolicy.ANY:
            return MatchRule(rule_id, (mask,) * n, min_matched=1)
        # drop the highest-df term; ties drop the later position
        drop = max(range(n), key=lambda i: (dfs[i], i))
        return MatchRule(rule_id, tuple(0 if i == drop else mask for i in range(n)))


DEFAULT_TEMPLATES = (
    RuleTemplate("UT"),
    RuleTemplate("AUT"),
    RuleTemplate("AUBT"),
    RuleTemplate("AUBT", TermPolicy.ALL_BUT_MOST_FREQUENT),
    RuleTemplate("AUBT", TermPolicy.ANY),
)


def instantiate_rules(templates: Sequence[RuleTemplate], dfs: Sequence[float]) -> list[MatchRule]:
    return [t.instantiate(i, dfs) for i, t in enumerate(templates)]


def default_rule_set(num_terms: int, term_df: Sequence[float] | None = None) -> list[MatchRule]:
    """The five nested rules R0..R4 for a query of ``num_terms`` terms."""
    if num_terms < 1:
        raise ValueError("num_terms must be >= 1")
    dfs = list(term_df) if term_df is not None else [0.0] * num_terms
    if len(dfs) != num_terms:
        raise ValueError("term_df length must equal num_terms")
    return instantiate_rules(DEFAULT_TEMPLATES, dfs)


def rules_for_query(index: FieldedIndex, query: Query,
                    templates: Sequence[RuleTemplate] = DEFAULT_TEMPLATES) -> list[MatchRule]:
    return instantiate_rules(templates, [index.df(t) for t in query.terms])


# ---------------------------------------------------------------------------
# plans


@dataclass(frozen=True)
class StoppingCondition:
    max_blocks: int | None = None
    max_matches: int | None = None

    def __post_init__(self):
        if self.max_blocks is None and self.max_matches is None:
            raise ValueError("a stopping condition needs a block or match budget")
        for b in (self.max_blocks, self.max_matches):
            if b is not None and b < 0:
                raise ValueError("budgets must be non-negative")


class Transition(str, enum.Enum):
    CONTINUE = "continue"
    RESET = "reset"
    STOP = "stop"


class PlanStep(NamedTuple):
    rule_id: int
    stop: StoppingCondition
    transition: Transition


@dataclass(frozen=True)
class MatchPlan:
    steps: tuple[PlanStep, ...]
    name: str = "plan"

    def __post_init__(self):
        if not self.steps:
            raise ValueError("a match plan needs at least one step")
        if self.steps[-1].transition is not Transition.STOP:
            raise ValueError("the last plan step must stop")


@dataclass
class ScanState:
    v: int = 0
    candidates: dict[int, None] = field(default_factory=dict)  # insertion-ordered set
    trace: list[tuple[int, int]] = field(default_factory=list)

    def collected(self) -> frozenset[int]:
        return frozenset(self.candidates)


class RuleOutcome(NamedTuple):
    new_docs: np.ndarray  # ordinals, discovery order
    new_tfs: np.ndarray  # (m, n_terms, 4)
    blocks: int
    matches: int
    inspected: int


def open_scan(index: FieldedIndex, terms: Sequence[str], reference: bool = False):
    """Cursor used for plan execution; ``reference`` selects the per-posting cursor."""
    if reference:
        return ScanCursor(index, terms)
    return TapeCursor(ScanTape(index, terms))


def execute_rule(cursor, rule: MatchRule, stop: StoppingCondition, state: ScanState,
                 u_limit: int | None = None) -> RuleOutcome:
    """Scan under ``stop``; collect rule-satisfying documents not seen before."""
    batch = cursor.scan(stop.max_blocks, stop.max_matches, u_limit)
    state.v += batch.matches
    if len(batch.ordinals):
        hit = rule.matches(batch.masks)
        idx = [i for i in np.flatnonzero(hit).tolist()
               if int(batch.ordinals[i]) not in state.candidates]
    else:
        idx = []
    for i in idx:
        state.candidates[int(batch.ordinals[i])] = None
    idx_arr = np.asarray(idx, dtype=np.int64)
    return RuleOutcome(batch.ordinals[idx_arr], batch.tfs[idx_arr], batch.blocks,
                       batch.matches, len(batch.ordinals))


@dataclass
class PlanResult:
    candidates: frozenset[int]
    trace: list[tuple[int, int]]
    outcomes: list[RuleOutcome]
    u: int
    v: int


def _remaining(budget: int | None, used: int) -> int | None:
    return None if budget is None else max(budget - used, 0)


def _min_budget(a: int | None, b: int | None) -> int | None:
    if a is None:
        return b
    return a if b is None else min(a, b)


def _run_chunked(cursor, rule: MatchRule, stop: StoppingCondition, state: ScanState,
                 chunk: StoppingCondition, u_cap: int) -> list[RuleOutcome]:
    """One plan step as a series of ``chunk``-sized executions.

    Visits exactly the documents a single execution under ``stop`` would.
    """
    outs: list[RuleOutcome] = []
    blocks = matches = 0
    while True:
        sub = StoppingCondition(
            _min_budget(chunk.max_blocks, _remaining(stop.max_blocks, blocks)),
            _min_budget(chunk.max_matches, _remaining(stop.max_matches, matches)))
        out = execute_rule(cursor, rule, sub, state, u_limit=u_cap)
        blocks += out.blocks
        matches += out.matches
        outs.append(out)
        state.trace.append((cursor.u, state.v))
        done = ((stop.max_blocks is not None and blocks >= stop.max_blocks)
                or (stop.max_matches is not None and matches >= stop.max_matches))
        chunk_full = ((sub.max_blocks is not None and out.blocks >= sub.max_blocks)
                      or (sub.max_matches is not None and out.matches >= sub.max_matches))
        if done or not chunk_full or out.inspected == 0:
            return outs


def run_plan(index: FieldedIndex, query: Query, plan: MatchPlan,
             rules: Sequence[MatchRule] | None = None, u_cap: int = DEFAULT_U_CAP,
             reference: bool = False, record_every: StoppingCondition | None = None) -> PlanResult:
    """Execute ``plan``; the trace gets one (u, v) point per rule execution.

    With ``record_every`` each plan step is executed in sub-steps of that
    budget (same documents visited) and every sub-step is traced.
    """
    if rules is None:
        rules = rules_for_query(index, query)
    cursor = open_scan(index, query.terms, reference)
    state = ScanState()
    outcomes = []
    for step in plan.steps:
        if record_every is None:
            outcomes.append(execute_rule(cursor, rules[step.rule_id], step.stop, state,
                                         u_limit=u_cap))
            state.trace.append((cursor.u, state.v))
        else:
            outcomes.extend(_run_chunked(cursor, rules[step.rule_id], step.stop, state,
                                         record_every, u_cap))
        if step.transition is Transition.STOP or cursor.u >= u_cap:
            break
        if step.transition is Transition.RESET:
            cursor.reset()
    return PlanResult(state.collected(), state.trace, outcomes, cursor.u, state.v)


def parse_plan(spec: dict, name: str = "plan") -> MatchPlan:
    """``{"steps": [{"rule": 2, "max_matches": 2000, "transition": "continue"}, ...]}``"""
    steps = []
    for raw in spec["steps"]:
        stop = StoppingCondition(raw.get("max_blocks"), raw.get("max_matches"))
        steps.append(PlanStep(int(raw["rule"]), stop, Transition(raw.get("transition", "stop"))))
    return MatchPlan(tuple(steps), spec.get("name", name))


def plan_to_dict(plan: MatchPlan) -> dict:
    steps = []
    for s in plan.steps:
        d = {"rule": s.rule_id}
        if s.stop.max_blocks is not None:
            d["max_blocks"] = s.stop.max_blocks
        if s.stop.max_matches is not None:
            d["max_matches"] = s.stop.max_matches
        d["transition"] = s.transition.value
        steps.append(d)
    return {"name": plan.name, "steps": steps}


CAT1_BASELINE = MatchPlan((
    PlanStep(2, StoppingCondition(max_matches=2000), Transition.CONTINUE),
    PlanStep(3, StoppingCondition(max_matches=2000), Transition.STOP),
), name="cat1-baseline")

CAT2_BASELINE = MatchPlan((
    PlanStep(0, StoppingCondition(max_blocks=500), Transition.RESET),
    PlanStep(2, StoppingCondition(max_matches=4000), Transition.STOP),
), name="cat2-baseline")
