"""Corpus, query and judgment ingestion, query categorization and sampling."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

FIELDS = ("anchor", "url", "body", "title")
# on-disk column order of the corpus file
CORPUS_COLUMNS = ("url", "title", "body", "anchor")

_SPLIT = re.compile(r"[^0-9a-z]+")


class DataError(ValueError):
    """Malformed input data."""


def tokenize(text: str) -> list[str]:
    return [tok for tok in _SPLIT.split(text.lower()) if tok]


@dataclass(frozen=True)
class Document:
    doc_id: str
    static_rank: float
    fields: Mapping[str, tuple[str, ...]]

    def __post_init__(self):
        if self.static_rank < 0 or not np.isfinite(self.static_rank):
            raise DataError(f"{self.doc_id}: static_rank must be finite and >= 0")
        missing = set(FIELDS) - set(self.fields)
        if missing:
            raise DataError(f"{self.doc_id}: missing fields {sorted(missing)}")


@dataclass(frozen=True)
class Query:
    query_id: str
    terms: tuple[str, ...]
    popularity: int = 0
    judgments: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.terms:
            raise DataError(f"{self.query_id}: query has no terms")
        if self.popularity < 0:
            raise DataError(f"{self.query_id}: negative popularity")
        for doc_id, grade in self.judgments.items():
            if grade not in (0, 1, 2, 3, 4):
                raise DataError(f"{self.query_id}: grade {grade} for {doc_id} out of scale")

    @property
    def text(self) -> str:
        return " ".join(self.terms)


def make_query(query_id: str, text: str, popularity: int = 0,
               judgments: Mapping[str, int] | None = None) -> Query:
    """Build a query from raw text; repeated terms are kept once, first occurrence wins."""
    terms = tuple(dict.fromkeys(tokenize(text)))
    return Query(query_id, terms, popularity, dict(judgments or {}))


# ---------------------------------------------------------------------------
# file formats


def _parse_corpus_line(line: str, lineno: int) -> Document:
    cols = line.rstrip("\n").split("\t")
    if len(cols) != 6:
        raise DataError(f"line {lineno}: expected 6 tab-separated columns, got {len(cols)}")
    doc_id, rank = cols[0], cols[1]
    if not doc_id:
        raise DataError(f"line {lineno}: empty doc_id")
    try:
        static_rank = float(rank)
    except ValueError:
        raise DataError(f"line {lineno}: bad static_rank {rank!r}") from None
    fields = {name: tuple(tokenize(text)) for name, text in zip(CORPUS_COLUMNS, cols[2:])}
    try:
        return Document(doc_id, static_rank, fields)
    except DataError as exc:
        raise DataError(f"line {lineno}: {exc}") from None


def load_corpus(path: str | Path) -> list[Document]:
    docs: list[Document] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            doc = _parse_corpus_line(line, lineno)
            if doc.doc_id in seen:
                raise DataError(f"line {lineno}: duplicate doc_id {doc.doc_id!r}")
            seen.add(doc.doc_id)
            docs.append(doc)
    return docs


def format_document(doc: Document) -> str:
    cols = [doc.doc_id, repr(float(doc.static_rank))]
    cols += [" ".join(doc.fields[name]) for name in CORPUS_COLUMNS]
    return "\t".join(cols)


def corpus_text(docs: Sequence[Document]) -> str:
    return "".join(format_document(doc) + "\n" for doc in docs)


def write_corpus(docs: Sequence[Document], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(corpus_text(docs))


def _parse_judgments(text: str, lineno: int) -> dict[str, int]:
    out: dict[str, int] = {}
    for pair in filter(None, text.split(",")):
        doc_id, sep, grade = pair.rpartition(":")
        if not sep or not doc_id:
            raise DataError(f"line {lineno}: bad judgment {pair!r}")
        try:
            out[doc_id] = int(grade)
        except ValueError:
            raise DataError(f"line {lineno}: bad grade in {pair!r}") from None
    return out


def load_queries(path: str | Path) -> list[Query]:
    queries: list[Query] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 4:
                raise DataError(f"line {lineno}: expected 4 tab-separated columns, got {len(cols)}")
            qid, text, pop, judged = cols
            if qid in seen:
                raise DataError(f"line {lineno}: duplicate query_id {qid!r}")
            try:
                popularity = int(pop)
            except ValueError:
                raise DataError(f"line {lineno}: bad popularity {pop!r}") from None
            try:
                q = make_query(qid, text, popularity, _parse_judgments(judged, lineno))
            except DataError as exc:
                raise DataError(f"line {lineno}: {exc}") from None
            seen.add(qid)
            queries.append(q)
    return queries


def format_query(q: Query) -> str:
    judged = ",".join(f"{d}:{g}" for d, g in q.judgments.items())
    return f"{q.query_id}\t{q.text}\t{q.popularity}\t{judged}"


def queries_text(queries: Sequence[Query]) -> str:
    return "".join(format_query(q) + "\n" for q in queries)


def write_queries(queries: Sequence[Query], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(queries_text(queries))


# ---------------------------------------------------------------------------
# categorization


class Category(str, enum.Enum):
    CAT1 = "CAT1"
    CAT2 = "CAT2"
    OTHER = "OTHER"


@dataclass(frozen=True)
class CategoryThresholds:
    rare_popularity: int = 10
    df_low: float = 0.01
    df_high: float = 0.2
    cat1_min_terms: int = 2
    cat1_max_terms: int = 4


@dataclass(frozen=True)
class QueryCategory:
    category: Category
    num_terms: int
    min_df: float
    popularity: int


def categorize(query: Query, df_fraction: Mapping[str, float],
               thresholds: CategoryThresholds = CategoryThresholds()) -> QueryCategory:
    """Rule-based category; unknown terms have df 0. CAT1 wins when both rules fire."""
    n = len(query.terms)
    dfs = [df_fraction.get(t, 0.0) for t in query.terms]
    min_df = min(dfs)
    th = thresholds
    if th.cat1_min_terms <= n <= th.cat1_max_terms and query.popularity < th.rare_popularity:
        cat = Category.CAT1
    elif n >= 2 and all(th.df_low <= d <= th.df_high for d in dfs):
        cat = Category.CAT2
    else:
        cat = Category.OTHER
    return QueryCategory(cat, n, min_df, query.popularity)


# ---------------------------------------------------------------------------
# sampling


def sample_queries(queries: Sequence[Query], mode: str, count: int, seed: int) -> list[Query]:
    """Weighted: with replacement, probability proportional to popularity.
    Unweighted: uniform without replacement over distinct queries."""
    rng = np.random.default_rng(seed)
    n = len(queries)
    if mode == "unweighted":
        if count > n:
            raise ValueError(f"cannot draw {count} distinct queries from {n}")
        idx = rng.permutation(n)[:count]
    elif mode == "weighted":
        pop = np.array([q.popularity for q in queries], dtype=np.float64)
        total = pop.sum()
        if total <= 0:
            raise ValueError("weighted sampling needs at least one query with popularity > 0")
        idx = rng.choice(n, size=count, replace=True, p=pop / total)
    else:
        raise ValueError(f"unknown sampling mode {mode!r}")
    return [queries[i] for i in idx]
