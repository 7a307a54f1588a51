"""L1 scorer: fielded saturated term frequency mixed with static rank.

    score = (1 - mix) * sum_t sat(sum_f w_f * tf[t, f]) + mix * static_rank / max_static_rank
    sat(x) = x / (x + K)
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .data import FIELDS, Document, Query
from .index import FieldedIndex


@dataclass(frozen=True)
class L1Weights:
    anchor: float = 1.5
    url: float = 2.0
    body: float = 0.5
    title: float = 2.0
    static_mix: float = 0.2
    saturation: float = 1.0

    def __post_init__(self):
        w = self.vector
        if (w < 0).any() or not (w > 0).any():
            raise ValueError("field weights must be non-negative with at least one positive")
        if not 0.0 <= self.static_mix <= 1.0:
            raise ValueError("static_mix must lie in [0, 1]")
        if self.saturation <= 0:
            raise ValueError("saturation constant must be positive")

    @property
    def vector(self) -> np.ndarray:
        """Field weights in FIELDS order."""
        return np.array([getattr(self, f) for f in FIELDS], dtype=np.float64)


class L1Score(NamedTuple):
    value: float
    text: float
    static: float


def saturate(x, k: float):
    return x / (x + k)


def l1_scores(tfs: np.ndarray, static_ranks: np.ndarray, weights: L1Weights,
              max_static_rank: float) -> np.ndarray:
    """Vectorised scores for tf arrays of shape (m, n_terms, 4)."""
    tfs = np.asarray(tfs, dtype=np.float64)
    text = saturate(tfs @ weights.vector, weights.saturation).sum(axis=-1)
    norm = np.asarray(static_ranks, dtype=np.float64) / max_static_rank if max_static_rank > 0 \
        else np.zeros(len(tfs))
    mix = weights.static_mix
    return (1.0 - mix) * text + mix * norm


def l1_score(query: Query, doc: Document, weights: L1Weights, max_static_rank: float) -> L1Score:
    text = 0.0
    for term in query.terms:
        x = sum(getattr(weights, f) * doc.fields[f].count(term) for f in FIELDS)
        text += saturate(x, weights.saturation)
    static = doc.static_rank / max_static_rank if max_static_rank > 0 else 0.0
    mix = weights.static_mix
    return L1Score((1.0 - mix) * text + mix * static, text, static)


def term_tfs(index: FieldedIndex, ordinals: Sequence[int], terms: Sequence[str]) -> np.ndarray:
    """(m, n_terms, 4) field term frequencies looked up from the postings."""
    ordinals = np.asarray(ordinals, dtype=np.int64)
    out = np.zeros((len(ordinals), len(terms), 4), dtype=np.uint8)
    for i, term in enumerate(terms):
        pl = index.postings.get(term)
        if pl is None or not len(ordinals):
            continue
        at = np.searchsorted(pl.ordinals, ordinals)
        at_c = np.minimum(at, len(pl) - 1)
        hit = pl.ordinals[at_c] == ordinals
        out[hit, i] = pl.tfs[at_c[hit]]
    return out


def score_ordinals(index: FieldedIndex, ordinals: Iterable[int], terms: Sequence[str],
                   weights: L1Weights) -> tuple[np.ndarray, np.ndarray]:
    ords = np.fromiter(ordinals, dtype=np.int64)
    tfs = term_tfs(index, ords, terms)
    return ords, l1_scores(tfs, index.static_ranks[ords], weights, index.max_static_rank)


def order_by_score(ordinals: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Permutation sorting by score descending, then ordinal ascending.

    Ordinal order already encodes static rank descending then doc_id ascending,
    so no ties survive.
    """
    return np.lexsort((ordinals, -scores))


def rank_candidates(index: FieldedIndex, candidates: Iterable[int], query: Query,
                    weights: L1Weights, depth: int) -> list[tuple[int, float]]:
    """Top ``depth`` candidates as (ordinal, score), best first."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    ords, scores = score_ordinals(index, sorted(set(candidates)), query.terms, weights)
    order = order_by_score(ords, scores)[:depth]
    return [(int(ords[i]), float(scores[i])) for i in order]
