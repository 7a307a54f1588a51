"""Independent reference implementations used by the tests.

Nothing here imports the package's scanning, scoring or metric code: each
oracle works from raw documents and plain Python.
"""

from __future__ import annotations

import itertools
import math
import random

from matchplan.data import Document

FIELD_ORDER = ("anchor", "url", "body", "title")
LETTER_BIT = {"A": 1, "U": 2, "B": 4, "T": 8}
VOCAB = ("alpha", "beta", "gamma", "delta", "eps", "zeta")


def random_corpus(rng: random.Random, n_docs: int, vocab=VOCAB, max_len: int = 4,
                  rank_levels: int = 5) -> list[Document]:
    """Tiny corpus with deliberately repeated static ranks (tie-breaks get exercised)."""
    docs = []
    for i in range(n_docs):
        fields = {f: tuple(rng.choice(vocab) for _ in range(rng.randint(0, max_len)))
                  for f in FIELD_ORDER}
        rank = rng.randint(0, rank_levels) / rank_levels
        docs.append(Document(f"doc{rng.randint(0, 10**6):07d}-{i}", rank, fields))
    rng.shuffle(docs)
    return docs


def static_order(docs) -> list[Document]:
    return sorted(docs, key=lambda d: (-d.static_rank, d.doc_id))


def term_mask(doc: Document, term: str) -> int:
    mask = 0
    for bit, f in enumerate(FIELD_ORDER):
        if term in doc.fields[f]:
            mask |= 1 << bit
    return mask


def brute_scan(docs, terms) -> list[tuple[int, tuple[int, ...]]]:
    """(ordinal, per-term masks) for every document holding at least one term."""
    out = []
    for ordinal, doc in enumerate(static_order(docs)):
        masks = tuple(term_mask(doc, t) for t in terms)
        if any(masks):
            out.append((ordinal, masks))
    return out


def brute_rule_docs(docs, terms, allowed, needed) -> list[int]:
    """Ordinals (static-rank order) of documents satisfying a rule."""
    out = []
    for ordinal, masks in brute_scan(docs, terms):
        got = sum(1 for m, a in zip(masks, allowed) if a and m & a)
        if got >= needed:
            out.append(ordinal)
    return out


def hand_agent_reward(scores, u_next: int, n: int) -> float:
    top = sorted(scores, reverse=True)[:n]
    total = 0.0
    for s in top:
        total += s
    return total / (n * u_next)


def hand_gain(grade: int) -> int:
    return [0, 1, 3, 7, 15][grade]


def brute_ncg(candidates, judgments, k, ranking=None) -> float | None:
    """NCG with the ideal found by enumerating every k-subset of judged documents."""
    cands = list(dict.fromkeys(candidates))
    if len(cands) > k:
        order = {d: i for i, d in enumerate(ranking)}
        cands = sorted(cands, key=lambda d: order[d])[:k]
    got = sum(hand_gain(judgments[d]) for d in cands if d in judgments)
    judged = list(judgments)
    best = 0
    size = min(k, len(judged))
    for combo in itertools.combinations(judged, size):
        best = max(best, sum(hand_gain(judgments[d]) for d in combo))
    if best == 0:
        return None
    return got / best


def chain_q_star(gamma: float = 0.9) -> list[float]:
    """Q*(s, move right) on the 3-state chain with rewards (0, 0, 1), solved by hand."""
    q2 = 1.0
    q1 = 0.0 + gamma * q2
    q0 = 0.0 + gamma * q1
    return [q0, q1, q2]


def ceil_div(a: int, b: int) -> int:
    return math.ceil(a / b)
