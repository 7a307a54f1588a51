"""Seeded synthetic corpus and query log.

Term draws follow a Zipf law over the vocabulary.  Every query gets a handful
of planted relevant documents: its terms are written into fields whose
strength grows with the judged grade, and the planted documents sit mostly
near the top of the static-rank order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FIELDS, Document, Query

_ONSETS = ["b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t", "v",
           "w", "z", "br", "st"]
_VOWELS = ["a", "e", "i", "o", "u"]


def word(i: int) -> str:
    """Pronounceable, unique token for vocabulary id ``i``."""
    syl = []
    i += 1
    while i:
        i, r = divmod(i, 100)
        syl.append(_ONSETS[r // 5] + _VOWELS[r % 5])
    return "".join(syl)


@dataclass(frozen=True)
class SynthConfig:
    num_docs: int = 100_000
    num_queries: int = 10_000
    vocab_size: int = 30_000
    zipf_exponent: float = 1.0
    body_len: float = 40.0
    title_len: float = 5.0
    url_len: float = 3.0
    anchor_len: float = 6.0
    anchor_prob: float = 0.6
    static_rank_sigma: float = 1.0
    # vocabulary rank bands used to draw query terms
    head_ranks: tuple[int, int] = (20, 500)
    torso_ranks: tuple[int, int] = (500, 5_000)
    tail_ranks: tuple[int, int] = (5_000, 30_000)
    moderate_query_share: float = 0.5
    rare_query_share: float = 0.4
    relevant_per_query: tuple[int, int] = (3, 12)
    nonrelevant_per_query: tuple[int, int] = (2, 6)
    relevant_depth: float = 0.05
    seed: int = 0


def _zipf_probs(n: int, s: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** s
    return w / w.sum()


def _term_count(rng: np.random.Generator) -> int:
    return int(rng.choice([1, 2, 3, 4, 5], p=[0.15, 0.35, 0.3, 0.15, 0.05]))


def generate(cfg: SynthConfig) -> tuple[list[Document], list[Query]]:
    rng = np.random.default_rng(cfg.seed)
    n, V = cfg.num_docs, cfg.vocab_size
    probs = _zipf_probs(V, cfg.zipf_exponent)
    vocab = [word(i) for i in range(V)]

    # static rank first: documents are generated in static-rank order, so the
    # planting depth below is an ordinal position
    ranks = np.sort(rng.lognormal(0.0, cfg.static_rank_sigma, n))[::-1]

    fields: list[dict[str, list[str]]] = []
    means = {"body": cfg.body_len, "title": cfg.title_len, "url": cfg.url_len,
             "anchor": cfg.anchor_len}
    lengths = {f: rng.poisson(means[f], n) for f in FIELDS}
    lengths["anchor"] *= rng.random(n) < cfg.anchor_prob
    draws = {f: rng.choice(V, size=int(lengths[f].sum()), p=probs) for f in FIELDS}
    offsets = {f: np.concatenate(([0], np.cumsum(lengths[f]))) for f in FIELDS}
    for d in range(n):
        fields.append({f: [vocab[t] for t in draws[f][offsets[f][d]:offsets[f][d + 1]]]
                       for f in FIELDS})

    def band(lo_hi):
        lo, hi = lo_hi
        hi = min(hi, V)
        lo = min(lo, hi - 1)
        return int(rng.integers(lo, hi))

    queries = []
    for qi in range(cfg.num_queries):
        k = _term_count(rng)
        moderate = rng.random() < cfg.moderate_query_share
        ids: list[int] = []
        while len(ids) < k:
            if moderate:
                t = band(cfg.head_ranks)
            else:
                r = rng.random()
                t = band(cfg.head_ranks if r < 0.4 else cfg.torso_ranks if r < 0.8
                         else cfg.tail_ranks)
            if t not in ids:
                ids.append(t)
        terms = [vocab[t] for t in ids]
        if rng.random() < cfg.rare_query_share:
            popularity = int(rng.integers(1, 10))
        else:
            popularity = 10 + int(rng.lognormal(np.log(200.0), 1.5))

        judgments: dict[str, int] = {}
        n_rel = int(rng.integers(cfg.relevant_per_query[0], cfg.relevant_per_query[1] + 1))
        for _ in range(n_rel):
            d = min(int(rng.exponential(cfg.relevant_depth * n)), n - 1)
            grade = int(rng.choice([1, 2, 3, 4], p=[0.35, 0.3, 0.2, 0.15]))
            _plant(fields[d], terms, grade, rng)
            judgments[f"d{d:07d}"] = max(grade, judgments.get(f"d{d:07d}", 0))
        n_non = int(rng.integers(cfg.nonrelevant_per_query[0], cfg.nonrelevant_per_query[1] + 1))
        for _ in range(n_non):
            d = int(rng.integers(0, max(1, n // 5)))
            key = f"d{d:07d}"
            if key in judgments:
                continue
            fields[d]["body"].append(terms[int(rng.integers(len(terms)))])
            judgments[key] = 0
        queries.append(Query(f"q{qi:06d}", tuple(terms), popularity, judgments))

    docs = [Document(f"d{d:07d}", float(ranks[d]),
                     {f: tuple(fields[d][f]) for f in FIELDS}) for d in range(n)]
    return docs, queries


def _plant(doc: dict[str, list[str]], terms: list[str], grade: int, rng) -> None:
    """Write query terms into a document; stronger fields for higher grades."""
    if grade == 1 and len(terms) > 1:
        keep = list(terms)
        keep.pop(int(rng.integers(len(keep))))
        doc["body"].extend(keep)
        return
    for t in terms:
        doc["body"].append(t)
        if grade >= 2 and rng.random() < 0.5:
            doc["anchor"].append(t)
        if grade >= 3:
            doc["title"].append(t)
        if grade >= 4:
            doc["url"].append(t)
