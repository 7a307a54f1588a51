"""Candidate-set quality (NCG@k), blocks accessed, and policy-vs-baseline reports."""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import Query
from .index import FieldedIndex
from .ranker import L1Weights, rank_candidates

DEFAULT_DEPTH = 100
LOW_COVERAGE = 50


def gain(grade: int) -> float:
    """Exponential gain 2^grade - 1 on the 0..4 scale."""
    if isinstance(grade, bool) or int(grade) != grade or not 0 <= grade <= 4:
        raise ValueError(f"grade {grade!r} outside the 0..4 scale")
    return float(2 ** int(grade) - 1)


@dataclass(frozen=True)
class NCGResult:
    query_id: str
    cum_gain: float
    ideal_cum_gain: float

    @property
    def judged(self) -> bool:
        """False when the query has no positive gain; such queries skip NCG averages."""
        return self.ideal_cum_gain > 0

    @property
    def ncg(self) -> float:
        return self.cum_gain / self.ideal_cum_gain if self.judged else 0.0


def ideal_gain(judgments: Mapping[str, int], k: int) -> float:
    gains = sorted((gain(g) for g in judgments.values()), reverse=True)
    return float(sum(gains[:k]))


def ncg_at_k(candidates: Iterable[str], judgments: Mapping[str, int], k: int = DEFAULT_DEPTH,
             ranking: Sequence[str] | None = None, query_id: str = "") -> NCGResult:
    """NCG of an unordered candidate set, capped at ``k`` documents.

    When there are more than ``k`` candidates, ``ranking`` (best first, e.g. by
    L1 score) decides which ``k`` survive.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cands = set(candidates)
    if len(cands) > k:
        if ranking is None:
            raise ValueError("more than k candidates needs a ranking to truncate")
        kept = [d for d in ranking if d in cands][:k]
        if len(kept) < k:
            raise ValueError("ranking does not cover the candidate set")
        cands = set(kept)
    cum = float(sum(gain(g) for d, g in judgments.items() if d in cands))
    return NCGResult(query_id, cum, ideal_gain(judgments, k))


def candidate_ncg(index: FieldedIndex, query: Query, ordinals: Iterable[int],
                  weights: L1Weights, k: int = DEFAULT_DEPTH) -> NCGResult:
    """NCG of scan candidates (index ordinals), truncated to the L1 top ``k``."""
    ords = set(ordinals)
    ranking = None
    if len(ords) > k:
        ranking = [index.doc_ids[o] for o, _ in rank_candidates(index, ords, query, weights, k)]
    return ncg_at_k((index.doc_ids[o] for o in ords), query.judgments, k, ranking,
                    query.query_id)


# ---------------------------------------------------------------------------
# run results


@dataclass(frozen=True)
class RunRecord:
    query_id: str
    category: str
    treatment: str
    u: int
    v: int
    candidates: tuple[str, ...]
    cum_gain: float
    ideal_cum_gain: float
    steps: int = 0

    @property
    def judged(self) -> bool:
        return self.ideal_cum_gain > 0

    @property
    def ncg(self) -> float:
        return self.cum_gain / self.ideal_cum_gain if self.judged else 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["candidates"] = list(self.candidates)
        d["ncg"] = self.ncg
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "RunRecord":
        d = json.loads(line)
        d.pop("ncg", None)
        d["candidates"] = tuple(d["candidates"])
        return cls(**d)


def make_record(index: FieldedIndex, query: Query, category: str, treatment: str,
                ordinals: Iterable[int], u: int, v: int, weights: L1Weights,
                k: int = DEFAULT_DEPTH, steps: int = 0) -> RunRecord:
    ords = sorted(set(ordinals))
    res = candidate_ncg(index, query, ords, weights, k)
    return RunRecord(query.query_id, category, treatment, int(u), int(v),
                     tuple(sorted(index.doc_ids[o] for o in ords)), res.cum_gain,
                     res.ideal_cum_gain, steps)


def dump_records(records: Iterable[RunRecord]) -> str:
    return "".join(r.to_json() + "\n" for r in records)


def load_records(path: str | Path) -> list[RunRecord]:
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            try:
                out.append(RunRecord.from_json(line))
            except (ValueError, TypeError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: bad run record ({exc})") from exc
    return out


# ---------------------------------------------------------------------------
# comparison


def paired_permutation_test(diffs: Sequence[float], resamples: int = 10_000,
                            seed: int = 0) -> float:
    """Two-sided sign-flip test on the mean of paired differences.

    Returns (hits + 1) / (resamples + 1), so identical runs give 1.0.
    """
    d = np.asarray(diffs, dtype=np.float64)
    if len(d) == 0:
        return 1.0
    observed = abs(d.mean())
    rng = np.random.default_rng(seed)
    hits = 0
    chunk = max(1, min(resamples, 2_000_000 // len(d)))
    done = 0
    while done < resamples:
        m = min(chunk, resamples - done)
        signs = rng.integers(0, 2, size=(m, len(d)), dtype=np.int8) * 2 - 1
        means = np.abs(signs @ d) / len(d)
        # tolerance guards float noise when flips reproduce the observed sum
        hits += int((means >= observed - 1e-12 * max(1.0, observed)).sum())
        done += m
    return (hits + 1) / (resamples + 1)


def relative_delta(policy: float, baseline: float) -> float:
    if baseline == 0:
        return 0.0 if policy == 0 else float("inf")
    return (policy - baseline) / baseline


@dataclass
class EvalReport:
    segment: str
    queries: list[str]
    u_policy: np.ndarray
    u_baseline: np.ndarray
    ncg_policy: np.ndarray
    ncg_baseline: np.ndarray
    judged: np.ndarray
    p_u: float
    p_ncg: float
    notes: list[str] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.queries)

    @property
    def judged_size(self) -> int:
        return int(self.judged.sum())

    @property
    def low_coverage(self) -> bool:
        return self.size < LOW_COVERAGE

    @property
    def mean_u(self) -> tuple[float, float]:
        return float(self.u_policy.mean()), float(self.u_baseline.mean())

    @property
    def mean_ncg(self) -> tuple[float, float]:
        if not self.judged.any():
            return 0.0, 0.0
        return (float(self.ncg_policy[self.judged].mean()),
                float(self.ncg_baseline[self.judged].mean()))

    @property
    def delta_u(self) -> float:
        return relative_delta(*self.mean_u)

    @property
    def delta_ncg(self) -> float:
        return relative_delta(*self.mean_ncg)

    def summary(self) -> dict:
        up, ub = self.mean_u
        np_, nb = self.mean_ncg
        return {"segment": self.segment, "queries": self.size, "judged": self.judged_size,
                "low_coverage": self.low_coverage, "u_policy": up, "u_baseline": ub,
                "delta_u": self.delta_u, "p_u": self.p_u, "ncg_policy": np_,
                "ncg_baseline": nb, "delta_ncg": self.delta_ncg, "p_ncg": self.p_ncg}

    def to_text(self) -> str:
        s = self.summary()
        flag = "  [low coverage]" if s["low_coverage"] else ""
        return (f"{self.segment}: {s['queries']} queries ({s['judged']} judged){flag}\n"
                f"  blocks  policy {s['u_policy']:.2f}  baseline {s['u_baseline']:.2f}  "
                f"delta {100 * s['delta_u']:+.1f}%  p={s['p_u']:.4g}\n"
                f"  NCG@k   policy {s['ncg_policy']:.4f}  baseline {s['ncg_baseline']:.4f}  "
                f"delta {100 * s['delta_ncg']:+.1f}%  p={s['p_ncg']:.4g}\n")

    def per_query_tsv(self) -> str:
        buf = io.StringIO()
        buf.write("query_id\tu_policy\tu_baseline\tncg_policy\tncg_baseline\tjudged\n")
        for i, q in enumerate(self.queries):
            buf.write(f"{q}\t{int(self.u_policy[i])}\t{int(self.u_baseline[i])}\t"
                      f"{self.ncg_policy[i]!r}\t{self.ncg_baseline[i]!r}\t{int(self.judged[i])}\n")
        return buf.getvalue()


def compare(policy: Sequence[RunRecord], baseline: Sequence[RunRecord], segment: str = "",
            resamples: int = 10_000, seed: int = 0) -> EvalReport:
    """Paired comparison over the identical query sample (duplicates allowed, in order)."""
    if [r.query_id for r in policy] != [r.query_id for r in baseline]:
        raise ValueError("policy and baseline runs cover different query samples")
    u_p = np.array([r.u for r in policy], dtype=np.float64)
    u_b = np.array([r.u for r in baseline], dtype=np.float64)
    judged = np.array([b.judged for b in baseline], dtype=bool)
    n_p = np.array([r.ncg for r in policy])
    n_b = np.array([r.ncg for r in baseline])
    p_u = paired_permutation_test(u_p - u_b, resamples, seed)
    p_n = paired_permutation_test((n_p - n_b)[judged], resamples, seed)
    return EvalReport(segment, [r.query_id for r in policy], u_p, u_b, n_p, n_b, judged,
                      p_u, p_n)


# ---------------------------------------------------------------------------
# blocks profile


def blocks_profile(policy_u: Sequence[int], baseline_u: Sequence[int]) -> tuple[list[int], list[int]]:
    """Both treatments' u values, each sorted ascending on its own."""
    if len(policy_u) == 0 or len(baseline_u) == 0:
        raise ValueError("empty results: nothing to profile")
    if len(policy_u) != len(baseline_u):
        raise ValueError("treatments cover different numbers of queries")
    return sorted(int(x) for x in policy_u), sorted(int(x) for x in baseline_u)


def format_blocks_profile(policy_u: Sequence[int], baseline_u: Sequence[int],
                          names: tuple[str, str] = ("policy", "baseline")) -> str:
    pol, base = blocks_profile(policy_u, baseline_u)
    lines = [f"position\t{names[0]}\t{names[1]}"]
    lines += [f"{i}\t{a}\t{b}" for i, (a, b) in enumerate(zip(pol, base))]
    return "\n".join(lines) + "\n"


def emit_blocks_profile(policy: Sequence[RunRecord], baseline: Sequence[RunRecord],
                        path: str | Path) -> Path:
    from .config import atomic_write_text

    text = format_blocks_profile([r.u for r in policy], [r.u for r in baseline])
    return atomic_write_text(path, text)


def read_blocks_profile(path: str | Path) -> tuple[list[int], list[int]]:
    rows = Path(path).read_text().splitlines()[1:]
    pol, base = [], []
    for row in rows:
        _, a, b = row.split("\t")
        pol.append(int(a))
        base.append(int(b))
    return pol, base


def fraction_at_or_below(policy_u: Sequence[int], baseline_u: Sequence[int]) -> float:
    pol, base = blocks_profile(policy_u, baseline_u)
    return sum(a <= b for a, b in zip(pol, base)) / len(pol)
