"""Tabular Q-learning over match-plan actions.

Actions are ``0..k-1`` (run rule ``i`` for one budgeted step), ``k`` (reset the
scan) and ``k+1`` (stop).  The state is the bin of the cumulative
(blocks accessed, term matches) pair.
"""

from __future__ import annotations

import json
import math
import struct
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .data import Query
from .index import FieldedIndex, ScanTape, TapeCursor
from .matching import (DEFAULT_TEMPLATES, DEFAULT_U_CAP, MatchPlan, MatchRule, RuleTemplate,
                       ScanState, StoppingCondition, execute_rule, instantiate_rules, run_plan)
from .ranker import L1Weights, l1_scores


def action_labels(k: int) -> list[str]:
    return [f"rule:{i}" for i in range(k)] + ["reset", "stop"]


def reset_action(k: int) -> int:
    return k


def stop_action(k: int) -> int:
    return k + 1


# ---------------------------------------------------------------------------
# state binning


@dataclass(frozen=True)
class StateBinner:
    """Equal-mass grid: ``u`` is cut into rows, each row is cut on ``v``.

    Each row holds a number of cells proportional to its share of the fitting
    points, so every cell targets ``N / p`` of them.
    """

    p: int
    u_cuts: tuple[float, ...]
    v_cuts: tuple[tuple[float, ...], ...]

    @property
    def offsets(self) -> list[int]:
        out, acc = [], 0
        for row in self.v_cuts:
            out.append(acc)
            acc += len(row) + 1
        return out

    def bin(self, u: float, v: float) -> int:
        row = int(np.searchsorted(self.u_cuts, u, side="right"))
        cell = int(np.searchsorted(self.v_cuts[row], v, side="right"))
        return self._offsets[row] + cell

    def bins(self, u, v) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        rows = np.searchsorted(self.u_cuts, u, side="right")
        out = np.empty(len(u), dtype=np.int64)
        for r in np.unique(rows):
            sel = rows == r
            out[sel] = self._offsets[r] + np.searchsorted(self.v_cuts[r], v[sel], side="right")
        return out

    @property
    def _offsets(self) -> list[int]:
        cached = self.__dict__.get("_offsets_cache")
        if cached is None:
            cached = self.offsets
            object.__setattr__(self, "_offsets_cache", cached)
        return cached

    def to_dict(self) -> dict:
        return {"format": "matchplan-binner", "version": 1, "p": self.p,
                "u_cuts": list(self.u_cuts), "v_cuts": [list(r) for r in self.v_cuts]}

    @classmethod
    def from_dict(cls, d: Mapping) -> "StateBinner":
        if d.get("format") != "matchplan-binner" or d.get("version") != 1:
            raise ValueError("not a version-1 binner file")
        b = cls(int(d["p"]), tuple(float(x) for x in d["u_cuts"]),
                tuple(tuple(float(x) for x in r) for r in d["v_cuts"]))
        if sum(len(r) + 1 for r in b.v_cuts) != b.p or len(b.v_cuts) != len(b.u_cuts) + 1:
            raise ValueError("inconsistent binner file")
        return b

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "StateBinner":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _cuts(sorted_vals: np.ndarray, parts: Sequence[int]) -> tuple[float, ...]:
    """Cut sorted values into groups sized in proportion to ``parts``.

    Cuts only fall between distinct values. They are placed one at a time, each
    aiming at its share of whatever the earlier cuts left over, so rounding
    error from tied values does not pile up.
    """
    n = len(sorted_vals)
    if n == 0:
        return tuple(math.inf for _ in parts[1:])
    edges = np.flatnonzero(np.diff(sorted_vals)) + 1  # first index of each new value
    out = []
    start, left = 0, sum(parts)
    for share in parts[:-1]:
        want = start + (n - start) * share / left
        left -= share
        j = int(np.searchsorted(edges, want))
        options = [edges[i] for i in (j - 1, j) if 0 <= i < len(edges) and edges[i] > start]
        if not options:
            out.append(math.inf)
            continue
        k = int(min(options, key=lambda e: abs(e - want)))
        out.append(float(sorted_vals[k]))
        start = k
    return tuple(out)


def _balanced_cuts(sorted_vals: np.ndarray, cells: int) -> tuple[float, ...]:
    """Split sorted values into ``cells`` groups, minimising the worst |size - n/cells|.

    Cuts may only fall between distinct values. The tolerance is found by
    bisection; for a given tolerance, the set of group boundaries reachable
    after j groups is propagated over the tie-group edges.
    """
    n = len(sorted_vals)
    if cells == 1:
        return ()
    if n == 0:
        return tuple(math.inf for _ in range(cells - 1))
    pos = np.concatenate(([0], np.flatnonzero(np.diff(sorted_vals)) + 1, [n]))
    target = n / cells

    def reach(tol: float) -> list[np.ndarray] | None:
        layers = [pos == 0]
        lo = np.searchsorted(pos, pos - target - tol, side="left")
        hi = np.searchsorted(pos, pos - target + tol, side="right")
        for _ in range(cells):
            cum = np.concatenate(([0], np.cumsum(layers[-1])))
            layers.append(cum[hi] - cum[lo] > 0)
        return layers if layers[-1][-1] else None

    lo_tol, hi_tol = 0.0, float(n)
    for _ in range(50):
        mid = (lo_tol + hi_tol) / 2
        if reach(mid) is None:
            lo_tol = mid
        else:
            hi_tol = mid
        if hi_tol - lo_tol < 1e-6:
            break
    layers = reach(hi_tol)
    e = len(pos) - 1
    cut_idx = []
    for j in range(cells, 0, -1):
        ok = np.flatnonzero(layers[j - 1] & (np.abs(pos[e] - pos - target) <= hi_tol))
        e = int(ok[np.argmin(np.abs(pos[e] - pos[ok] - target))])
        cut_idx.append(int(pos[e]))
    cut_idx = cut_idx[::-1][1:]  # drop the leading boundary at 0
    return tuple(float(sorted_vals[k]) if k < n else math.inf for k in cut_idx)


def _allocate(masses: Sequence[int], p: int) -> list[int]:
    """Split p cells over rows in proportion to mass (largest remainder, one cell minimum)."""
    total = sum(masses)
    quota = [p * m / total for m in masses]
    cells = [max(1, math.floor(q)) for q in quota]
    order = sorted(range(len(masses)), key=lambda r: (-(quota[r] - math.floor(quota[r])), r))
    i = 0
    while sum(cells) < p:
        cells[order[i % len(order)]] += 1
        i += 1
    while sum(cells) > p:
        # too many single-cell rows rounded up; take from the most over-served row
        r = max((r for r in range(len(cells)) if cells[r] > 1), key=lambda r: cells[r] - quota[r])
        cells[r] -= 1
    return cells


def _grid(pts: np.ndarray, p: int, rows: int) -> StateBinner:
    base, extra = divmod(p, rows)
    target = [c for c in (base + 1 if r < extra else base for r in range(rows)) if c > 0]
    u_cuts = tuple(sorted({c for c in _cuts(np.sort(pts[:, 0]), target) if c != math.inf}))
    row_of = np.searchsorted(u_cuts, pts[:, 0], side="right")
    masses = np.bincount(row_of, minlength=len(u_cuts) + 1).tolist()
    v_cuts = []
    for r, cells in enumerate(_allocate(masses, p)):
        v_cuts.append(_balanced_cuts(np.sort(pts[row_of == r, 1]), cells))
    return StateBinner(p, u_cuts, tuple(v_cuts))


ROW_FACTORS = (1.0, 1.5, 2.0, 3.0)


def fit_binner(points, p: int) -> StateBinner:
    """Equal-mass nested grid: u-rows first, then v-cells inside each row.

    Rows are cut near u quantiles. Tied u values cannot be split, so each row
    gets v-cells in proportion to the mass it actually received. Heavily tied
    traces balance better with more, thinner rows, so a few row counts from
    ceil(sqrt(p)) upwards are tried and the most even grid is kept.
    """
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if p < 1:
        raise ValueError("p must be >= 1")
    distinct = len(np.unique(pts, axis=0))
    if p > distinct:
        raise ValueError(f"p={p} exceeds the {distinct} distinct trace points")
    best, best_spread = None, math.inf
    tried = set()
    for factor in ROW_FACTORS:
        rows = min(p, math.ceil(factor * math.ceil(math.sqrt(p))))
        if rows in tried:
            continue
        tried.add(rows)
        grid = _grid(pts, p, rows)
        counts = np.bincount(grid.bins(pts[:, 0], pts[:, 1]), minlength=p)
        spread = float(np.abs(counts - len(pts) / p).max())
        if spread < best_spread:
            best, best_spread = grid, spread
    return best


def bin_state(binner: StateBinner, u: float, v: float) -> int:
    return binner.bin(u, v)


# ---------------------------------------------------------------------------
# Q table


@dataclass
class QTable:
    values: np.ndarray  # (p, k + 2) float64
    counts: np.ndarray  # (p, k + 2) int64
    labels: tuple[str, ...]

    MAGIC = b"MPQT"

    @classmethod
    def zeros(cls, p: int, k: int) -> "QTable":
        return cls(np.zeros((p, k + 2)), np.zeros((p, k + 2), dtype=np.int64),
                   tuple(action_labels(k)))

    @property
    def p(self) -> int:
        return self.values.shape[0]

    @property
    def k(self) -> int:
        return self.values.shape[1] - 2

    def greedy(self, s: int) -> int:
        # np.argmax returns the first maximum: lowest action index wins ties
        return int(np.argmax(self.values[s]))

    def to_bytes(self) -> bytes:
        labels = json.dumps(list(self.labels)).encode("utf-8")
        p, a = self.values.shape
        return (struct.pack("<4sIIII", self.MAGIC, 1, p, a, len(labels)) + labels
                + self.values.astype("<f8").tobytes() + self.counts.astype("<i8").tobytes())

    @classmethod
    def from_bytes(cls, buf: bytes) -> "QTable":
        magic, version, p, a, n = struct.unpack_from("<4sIIII", buf, 0)
        if magic != cls.MAGIC or version != 1:
            raise ValueError("not a version-1 Q-table file")
        off = 20
        labels = tuple(json.loads(buf[off:off + n].decode("utf-8")))
        off += n
        values = np.frombuffer(buf, "<f8", p * a, off).reshape(p, a).astype(np.float64)
        off += 8 * p * a
        counts = np.frombuffer(buf, "<i8", p * a, off).reshape(p, a).astype(np.int64)
        if off + 8 * p * a != len(buf) or len(labels) != a:
            raise ValueError("corrupt Q-table file")
        return cls(values, counts, labels)

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_bytes())

    @classmethod
    def load(cls, path: str | Path) -> "QTable":
        return cls.from_bytes(Path(path).read_bytes())


def q_update(table: QTable, s: int, a: int, r: float, s_next: int, terminal: bool,
             alpha: float, gamma: float) -> QTable:
    target = r if terminal else r + gamma * float(table.values[s_next].max())
    q = table.values[s, a]
    table.values[s, a] = q + alpha * (target - q)
    table.counts[s, a] += 1
    return table


def decayed_alpha(alpha0: float, visits: int) -> float:
    """Step size for the ``visits``-th update: alpha0 / (1 + alpha0 (visits - 1)).

    With alpha0 = 1 this is the running mean 1/visits.
    """
    return alpha0 / (1.0 + alpha0 * (visits - 1))


# ---------------------------------------------------------------------------
# rewards


ALIGNMENTS = ("per_step", "terminal", "plan_rate")


@dataclass(frozen=True)
class RewardConfig:
    n: int = 5
    gamma: float = 0.9
    no_new_docs_penalty: float = -0.01
    # what the baseline term is past the end of the baseline trace:
    # "zero", or "hold" (repeat the last baseline step reward)
    baseline_extension: str = "zero"
    # "per_step": subtract the baseline step reward at every step index;
    # "terminal": subtract the baseline's discounted return once, at episode end;
    # "plan_rate": subtract, at every non-stop step, the reward of the whole
    # baseline plan scored as a single execution
    baseline_alignment: str = "per_step"
    stop_reward: float = 0.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.no_new_docs_penalty >= 0:
            raise ValueError("no_new_docs_penalty must be negative")
        if self.baseline_extension not in ("zero", "hold"):
            raise ValueError(f"unknown baseline_extension {self.baseline_extension!r}")
        if self.baseline_alignment not in ALIGNMENTS:
            raise ValueError(f"unknown baseline_alignment {self.baseline_alignment!r}")


def agent_reward(scores: Sequence[float], u_next: int, n: int) -> float:
    """Sum of the ``n`` best L1 scores among new documents over ``n * u_next``.

    The caller substitutes the no-new-documents penalty when ``scores`` is empty.
    """
    if len(scores) == 0:
        raise ValueError("no new documents: use the no-new-docs penalty")
    if u_next <= 0:
        raise ValueError("new documents with zero blocks accessed")
    top = np.sort(np.asarray(scores, dtype=np.float64))[::-1][:n]
    return float(top.sum()) / (n * u_next)


def baseline_relative_reward(r_agent: float, baseline_rewards: Sequence[float], t: int,
                             extension: str = "zero") -> float:
    if t < len(baseline_rewards):
        return r_agent - baseline_rewards[t]
    if extension == "hold" and len(baseline_rewards):
        return r_agent - baseline_rewards[-1]
    return r_agent


def step_reward(new_scores: Sequence[float], u_next: int, cfg: RewardConfig) -> float:
    if len(new_scores) == 0:
        return cfg.no_new_docs_penalty
    return agent_reward(new_scores, u_next, cfg.n)


def baseline_trace(index: FieldedIndex, query: Query, plan: MatchPlan, rules: Sequence[MatchRule],
                   weights: L1Weights, cfg: RewardConfig, u_cap: int = DEFAULT_U_CAP,
                   record_every: StoppingCondition | None = None) -> dict:
    """Run the production plan and score each executed step like an agent step."""
    res = run_plan(index, query, plan, rules, u_cap=u_cap, record_every=record_every)
    rewards = []
    for out, (u, _) in zip(res.outcomes, res.trace):
        scores = l1_scores(out.new_tfs, index.static_ranks[out.new_docs], weights,
                           index.max_static_rank)
        rewards.append(step_reward(scores, u, cfg))
    # the whole plan scored as one execution
    all_new = np.concatenate([o.new_docs for o in res.outcomes])
    all_tfs = np.concatenate([o.new_tfs for o in res.outcomes])
    scores = l1_scores(all_tfs, index.static_ranks[all_new], weights, index.max_static_rank)
    plan_reward = step_reward(scores, res.u, cfg)
    return {"query_id": query.query_id, "plan": plan.name,
            "trace": [list(x) for x in res.trace], "rewards": rewards,
            "plan_reward": plan_reward,
            "u": res.u, "v": res.v, "candidates": sorted(res.candidates)}


def baseline_signal(trace: Mapping, cfg: RewardConfig) -> list[float]:
    """The baseline rewards an environment needs under ``cfg``'s alignment."""
    if cfg.baseline_alignment == "plan_rate":
        return [float(trace["plan_reward"])]
    return [float(r) for r in trace["rewards"]]


# ---------------------------------------------------------------------------
# environment


@dataclass(frozen=True)
class EpisodeConfig:
    step_max_matches: int | None = 500
    step_max_blocks: int | None = 200
    max_steps: int = 16
    u_cap: int = DEFAULT_U_CAP

    def __post_init__(self):
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        StoppingCondition(self.step_max_blocks, self.step_max_matches)

    @property
    def step_budget(self) -> StoppingCondition:
        return StoppingCondition(self.step_max_blocks, self.step_max_matches)


class MatchPlanEnv:
    """One query's scan as an episodic environment: ``reset()`` then ``step(a)``."""

    def __init__(self, index: FieldedIndex, query: Query, rules: Sequence[MatchRule],
                 binner: StateBinner, weights: L1Weights, reward: RewardConfig,
                 episode: EpisodeConfig, baseline_rewards: Sequence[float] = (),
                 tape: ScanTape | None = None):
        self.index = index
        self.query = query
        self.rules = list(rules)
        self.k = len(self.rules)
        self.n_actions = self.k + 2
        self.binner = binner
        self.weights = weights
        self.reward_cfg = reward
        self.episode_cfg = episode
        self.baseline = list(baseline_rewards)
        self.tape = tape if tape is not None else ScanTape(index, query.terms)
        self.reset()

    def reset(self) -> int:
        self.cursor = TapeCursor(self.tape)
        self.scan = ScanState()
        self.t = 0
        self.done = False
        return self.state

    @property
    def u(self) -> int:
        return self.cursor.u

    @property
    def v(self) -> int:
        return self.scan.v

    @property
    def state(self) -> int:
        return self.binner.bin(self.cursor.u, self.scan.v)

    def _baseline_term(self, r: float) -> float:
        cfg = self.reward_cfg
        if cfg.baseline_alignment == "per_step":
            return baseline_relative_reward(r, self.baseline, self.t, cfg.baseline_extension)
        if cfg.baseline_alignment == "plan_rate" and self.baseline:
            return r - self.baseline[0]
        return r

    def _terminal_adjustment(self) -> float:
        cfg = self.reward_cfg
        if cfg.baseline_alignment != "terminal" or not self.baseline:
            return 0.0
        ret = sum(cfg.gamma ** i * b for i, b in enumerate(self.baseline))
        # discounted back to the agent's final step
        return -ret / cfg.gamma ** max(self.t - 1, 0)

    def step(self, action: int) -> tuple[int, float, bool, dict]:
        if self.done:
            raise RuntimeError("episode already finished")
        cfg = self.reward_cfg
        ep = self.episode_cfg
        info: dict = {"new_docs": 0}
        if action == stop_action(self.k):
            reward = cfg.stop_reward
            self.done = True
        elif action == reset_action(self.k):
            self.cursor.reset()
            reward = self._baseline_term(cfg.no_new_docs_penalty)
        else:
            out = execute_rule(self.cursor, self.rules[action], ep.step_budget, self.scan,
                               u_limit=ep.u_cap)
            scores = l1_scores(out.new_tfs, self.index.static_ranks[out.new_docs], self.weights,
                               self.index.max_static_rank)
            reward = self._baseline_term(step_reward(scores, self.cursor.u, cfg))
            info["new_docs"] = len(out.new_docs)
        self.t += 1
        if self.t >= ep.max_steps or self.cursor.u >= ep.u_cap:
            self.done = True
        if self.done:
            reward += self._terminal_adjustment()
        return self.state, reward, self.done, info

    @property
    def candidates(self) -> frozenset[int]:
        return self.scan.collected()


# ---------------------------------------------------------------------------
# training and execution


@dataclass(frozen=True)
class TrainConfig:
    episodes: int = 100_000
    alpha: float = 0.1
    alpha_decay: bool = True
    epsilon_start: float = 0.5
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 0:
            raise ValueError("episodes must be >= 0")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must lie in (0, 1]")
        for e in (self.epsilon_start, self.epsilon_end):
            if not 0.0 <= e <= 1.0:
                raise ValueError("epsilon must lie in [0, 1]")
        if not 0.0 < self.epsilon_decay_fraction <= 1.0:
            raise ValueError("epsilon_decay_fraction must lie in (0, 1]")

    def epsilon(self, episode: int) -> float:
        horizon = self.epsilon_decay_fraction * self.episodes
        if horizon <= 0:
            return self.epsilon_end
        frac = min(1.0, episode / horizon)
        if self.epsilon_start <= 0 or self.epsilon_end <= 0:
            return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac
        return self.epsilon_start * (self.epsilon_end / self.epsilon_start) ** frac


@dataclass
class EpisodeResult:
    steps: list[tuple[int, int, float, int, int]]  # (state, action, reward, u, v) after the step
    candidates: frozenset[int]
    u: int
    v: int

    @property
    def ret(self) -> float:
        return sum(r for _, _, r, _, _ in self.steps)

    def discounted_return(self, gamma: float) -> float:
        return sum(gamma ** t * r for t, (_, _, r, _, _) in enumerate(self.steps))


def run_episode(env, table: QTable, epsilon: float = 0.0, rng: np.random.Generator | None = None,
                learn: TrainConfig | None = None, gamma: float = 0.9) -> EpisodeResult:
    """Greedy when ``epsilon == 0``; applies Q updates when ``learn`` is given."""
    s = env.reset()
    steps = []
    n_actions = table.values.shape[1]
    done = False
    while not done:
        if epsilon > 0 and rng.random() < epsilon:
            a = int(rng.integers(n_actions))
        else:
            a = table.greedy(s)
        s_next, r, done, _ = env.step(a)
        if learn is not None:
            visits = int(table.counts[s, a]) + 1
            alpha = decayed_alpha(learn.alpha, visits) if learn.alpha_decay else learn.alpha
            q_update(table, s, a, r, s_next, done, alpha, gamma)
        steps.append((s, a, r, getattr(env, "u", 0), getattr(env, "v", 0)))
        s = s_next
    return EpisodeResult(steps, getattr(env, "candidates", frozenset()),
                         getattr(env, "u", 0), getattr(env, "v", 0))


class TapeCache:
    """Small LRU of scan tapes keyed by query id."""

    def __init__(self, index: FieldedIndex, maxsize: int = 256):
        self.index = index
        self.maxsize = maxsize
        self._tapes: OrderedDict[str, ScanTape] = OrderedDict()

    def get(self, query: Query) -> ScanTape:
        tape = self._tapes.get(query.query_id)
        if tape is None:
            tape = ScanTape(self.index, query.terms)
            self._tapes[query.query_id] = tape
            if len(self._tapes) > self.maxsize:
                self._tapes.popitem(last=False)
        else:
            self._tapes.move_to_end(query.query_id)
        return tape


@dataclass
class PolicyContext:
    """Everything an episode needs besides the query."""

    index: FieldedIndex
    binner: StateBinner
    weights: L1Weights = field(default_factory=L1Weights)
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    templates: Sequence[RuleTemplate] = DEFAULT_TEMPLATES
    tape_cache_size: int = 256

    def __post_init__(self):
        self.tapes = TapeCache(self.index, self.tape_cache_size)

    def rules(self, query: Query) -> list[MatchRule]:
        return instantiate_rules(self.templates, [self.index.df(t) for t in query.terms])

    def env(self, query: Query, baseline_rewards: Sequence[float] = ()) -> MatchPlanEnv:
        return MatchPlanEnv(self.index, query, self.rules(query), self.binner, self.weights,
                            self.reward, self.episode, baseline_rewards, self.tapes.get(query))


def train_policy(ctx: PolicyContext, queries: Sequence[Query], train: TrainConfig,
                 baseline_rewards: Mapping[str, Sequence[float]],
                 table: QTable | None = None) -> QTable:
    if not queries:
        raise ValueError("no training queries for this category")
    k = len(ctx.templates)
    if table is None:
        table = QTable.zeros(ctx.binner.p, k)
    rng = np.random.default_rng(train.seed)
    for e in range(train.episodes):
        q = queries[int(rng.integers(len(queries)))]
        env = ctx.env(q, baseline_rewards.get(q.query_id, ()))
        run_episode(env, table, train.epsilon(e), rng, learn=train, gamma=ctx.reward.gamma)
    return table


def greedy_episode(ctx: PolicyContext, table: QTable, query: Query,
                   baseline_rewards: Sequence[float] = ()) -> EpisodeResult:
    return run_episode(ctx.env(query, baseline_rewards), table, 0.0, gamma=ctx.reward.gamma)


# ---------------------------------------------------------------------------
# toy chain used to validate the learner


class ChainEnv:
    """Deterministic chain s0 -> s1 -> ... with reward on the last hop.

    Action 0 moves right (reward ``rewards[s]``, terminal after the last state),
    action 1 quits with reward 0.
    """

    def __init__(self, rewards: Sequence[float] = (0.0, 0.0, 1.0)):
        self.rewards = list(rewards)
        self.n_states = len(self.rewards)
        self.reset()

    def reset(self) -> int:
        self.s = 0
        return self.s

    def step(self, action: int):
        if action == 1:
            return self.s, 0.0, True, {}
        r = self.rewards[self.s]
        if self.s == self.n_states - 1:
            return self.s, r, True, {}
        self.s += 1
        return self.s, r, False, {}


def chain_value_iteration(rewards: Sequence[float], gamma: float, sweeps: int = 1000) -> np.ndarray:
    """Q* for ChainEnv by synchronous value iteration."""
    n = len(rewards)
    q = np.zeros((n, 2))
    for _ in range(sweeps):
        new = np.zeros_like(q)
        for s in range(n):
            cont = 0.0 if s == n - 1 else gamma * q[s + 1].max()
            new[s, 0] = rewards[s] + cont
            new[s, 1] = 0.0
        q = new
    return q
