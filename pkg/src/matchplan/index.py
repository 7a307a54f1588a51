"""Fielded inverted index ordered by static rank, read in fixed-size blocks.

Every term has one posting list.  A posting carries the document ordinal
(position in descending static-rank order) and the term frequency in each of
the four fields, so the per-field match mask is ``tf > 0``.

Block accounting: a list is read ``block_size`` postings at a time.  Each list
keeps the block it last fetched; touching a posting outside that block is a
fetch event and increments ``u``.  ``reset`` forgets the loaded blocks, so a
rescan pays again.

Serialized layout (little endian)::

    magic      4s   b"MPL0"
    version    u32  1
    block_size u32
    n_docs     u32
    n_terms    u32
    n_docs x   { u32 id_len, id bytes (utf-8), f64 static_rank }
    n_terms x  { u32 term_len, term bytes (utf-8), u32 n_postings,
                 n_postings x u32 ordinal, n_postings x 4 x u8 tf (A, U, B, T) }

Terms are written in sorted order, so load -> save reproduces the file exactly.
"""

from __future__ import annotations

import struct
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .data import FIELDS, Document

MAGIC = b"MPL0"
FORMAT_VERSION = 1
DEFAULT_BLOCK_SIZE = 64

# bit per field, in FIELDS order
FIELD_BITS = {name: 1 << i for i, name in enumerate(FIELDS)}
FIELD_LETTERS = {"A": "anchor", "U": "url", "B": "body", "T": "title"}
ALL_FIELDS = 0b1111
_BITS = np.array([1 << i for i in range(len(FIELDS))], dtype=np.uint8)


class IndexFormatError(ValueError):
    """Invalid index input or file."""


def field_mask(letters: str) -> int:
    """``"UT"`` -> bitmask over url and title."""
    mask = 0
    for ch in letters.upper():
        if ch not in FIELD_LETTERS:
            raise ValueError(f"unknown field letter {ch!r}")
        mask |= FIELD_BITS[FIELD_LETTERS[ch]]
    return mask


def mask_letters(mask: int) -> str:
    return "".join(ch for ch, name in FIELD_LETTERS.items() if mask & FIELD_BITS[name])


def tf_to_mask(tfs: np.ndarray) -> np.ndarray:
    """(..., 4) term frequencies -> (...) uint8 field masks."""
    return ((tfs > 0) * _BITS).sum(axis=-1).astype(np.uint8)


@dataclass(frozen=True)
class PostingList:
    term: str
    ordinals: np.ndarray  # uint32, strictly ascending
    tfs: np.ndarray  # uint8, shape (n, 4)
    block_size: int

    def __len__(self) -> int:
        return len(self.ordinals)

    @property
    def masks(self) -> np.ndarray:
        return tf_to_mask(self.tfs)

    @property
    def num_blocks(self) -> int:
        return -(-len(self.ordinals) // self.block_size)


@dataclass(frozen=True)
class FieldedIndex:
    doc_ids: tuple[str, ...]
    static_ranks: np.ndarray  # float64, descending
    postings: dict[str, PostingList]
    block_size: int

    @property
    def num_docs(self) -> int:
        return len(self.doc_ids)

    def df(self, term: str) -> int:
        pl = self.postings.get(term)
        return 0 if pl is None else len(pl)

    def df_fraction(self, term: str) -> float:
        return self.df(term) / self.num_docs

    def df_fractions(self) -> dict[str, float]:
        n = self.num_docs
        return {t: len(pl) / n for t, pl in self.postings.items()}

    def ordinal_of(self, doc_id: str) -> int:
        lookup = self.__dict__.get("_ordinal_lookup")
        if lookup is None:
            lookup = {d: i for i, d in enumerate(self.doc_ids)}
            object.__setattr__(self, "_ordinal_lookup", lookup)
        return lookup[doc_id]

    @property
    def max_static_rank(self) -> float:
        return float(self.static_ranks[0]) if len(self.static_ranks) else 0.0


def build_index(corpus: Sequence[Document], block_size: int = DEFAULT_BLOCK_SIZE) -> FieldedIndex:
    if not corpus:
        raise IndexFormatError("cannot index an empty corpus")
    if block_size < 1:
        raise IndexFormatError("block_size must be >= 1")
    ids = [d.doc_id for d in corpus]
    if len(set(ids)) != len(ids):
        dup = next(d for d, c in Counter(ids).items() if c > 1)
        raise IndexFormatError(f"duplicate doc_id {dup!r}")

    ordered = sorted(corpus, key=lambda d: (-d.static_rank, d.doc_id))
    n = len(ordered)
    term_ids: dict[str, int] = {}
    tids: list[int] = []
    ords: list[int] = []
    fids: list[int] = []
    for ordinal, doc in enumerate(ordered):
        for f, name in enumerate(FIELDS):
            toks = doc.fields[name]
            if toks:
                tids.extend(term_ids.setdefault(t, len(term_ids)) for t in toks)
                ords.extend([ordinal] * len(toks))
                fids.extend([f] * len(toks))
    # one key per (term, ordinal, field) occurrence; counting keys gives tf
    key = (np.asarray(tids, dtype=np.int64) * n + np.asarray(ords, dtype=np.int64)) * 4 \
        + np.asarray(fids, dtype=np.int64)
    uniq, counts = np.unique(key, return_counts=True)
    posting_key, inverse = np.unique(uniq // 4, return_inverse=True)
    tf = np.zeros((len(posting_key), 4), dtype=np.uint8)
    tf[inverse, uniq % 4] = np.minimum(counts, 255)
    tid = posting_key // n
    bounds = np.searchsorted(tid, np.arange(len(term_ids) + 1))
    names = sorted(term_ids)
    postings = {}
    for term in names:
        i = term_ids[term]
        a, b = bounds[i], bounds[i + 1]
        postings[term] = PostingList(term, (posting_key[a:b] % n).astype(np.uint32),
                                     tf[a:b], block_size)
    return FieldedIndex(
        tuple(d.doc_id for d in ordered),
        np.array([d.static_rank for d in ordered], dtype=np.float64),
        postings,
        block_size,
    )


# ---------------------------------------------------------------------------
# serialization


def dump_index(index: FieldedIndex) -> bytes:
    out = [struct.pack("<4sIIII", MAGIC, FORMAT_VERSION, index.block_size,
                       index.num_docs, len(index.postings))]
    for doc_id, rank in zip(index.doc_ids, index.static_ranks):
        raw = doc_id.encode("utf-8")
        out.append(struct.pack("<I", len(raw)) + raw + struct.pack("<d", float(rank)))
    for term in sorted(index.postings):
        pl = index.postings[term]
        raw = term.encode("utf-8")
        out.append(struct.pack("<I", len(raw)) + raw + struct.pack("<I", len(pl)))
        out.append(pl.ordinals.astype("<u4").tobytes())
        out.append(pl.tfs.astype(np.uint8).tobytes())
    return b"".join(out)


def load_index_bytes(buf: bytes) -> FieldedIndex:
    try:
        return _load_index_bytes(buf)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        if isinstance(exc, IndexFormatError):
            raise
        raise IndexFormatError(f"corrupt index payload ({exc})") from exc


def _load_index_bytes(buf: bytes) -> FieldedIndex:
    if len(buf) < 20:
        raise IndexFormatError("index file truncated")
    magic, version, block_size, n_docs, n_terms = struct.unpack_from("<4sIIII", buf, 0)
    if magic != MAGIC:
        raise IndexFormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise IndexFormatError(f"unsupported index format version {version}")
    off = 20
    doc_ids = []
    ranks = np.empty(n_docs, dtype=np.float64)
    for i in range(n_docs):
        (n,) = struct.unpack_from("<I", buf, off)
        off += 4
        doc_ids.append(buf[off:off + n].decode("utf-8"))
        off += n
        (ranks[i],) = struct.unpack_from("<d", buf, off)
        off += 8
    postings = {}
    for _ in range(n_terms):
        (n,) = struct.unpack_from("<I", buf, off)
        off += 4
        term = buf[off:off + n].decode("utf-8")
        off += n
        (count,) = struct.unpack_from("<I", buf, off)
        off += 4
        ordinals = np.frombuffer(buf, dtype="<u4", count=count, offset=off).astype(np.uint32)
        off += 4 * count
        tfs = np.frombuffer(buf, dtype=np.uint8, count=4 * count, offset=off).reshape(count, 4).copy()
        off += 4 * count
        postings[term] = PostingList(term, ordinals, tfs, block_size)
    if off != len(buf):
        raise IndexFormatError("trailing bytes after index payload")
    return FieldedIndex(tuple(doc_ids), ranks, postings, block_size)


def save_index(index: FieldedIndex, path: str | Path) -> None:
    Path(path).write_bytes(dump_index(index))


def load_index(path: str | Path) -> FieldedIndex:
    return load_index_bytes(Path(path).read_bytes())


# ---------------------------------------------------------------------------
# scanning


class Hit(NamedTuple):
    ordinal: int
    masks: tuple[int, ...]  # per query-term field mask, 0 = absent
    tfs: np.ndarray  # (n_terms, 4)


class Batch(NamedTuple):
    """Documents consumed by one budgeted scan."""

    ordinals: np.ndarray  # (m,)
    masks: np.ndarray  # (m, n_terms) uint8
    tfs: np.ndarray  # (m, n_terms, 4) uint8
    blocks: int
    matches: int


def _budget_met(blocks: int, matches: int, max_blocks, max_matches) -> bool:
    return ((max_blocks is not None and blocks >= max_blocks)
            or (max_matches is not None and matches >= max_matches))


class ScanCursor:
    """Document-at-a-time union over the query terms' posting lists.

    Reference implementation: one posting at a time, in Python.
    """

    def __init__(self, index: FieldedIndex, terms: Sequence[str]):
        self.index = index
        self.terms = tuple(terms)
        self.lists = [index.postings.get(t) for t in self.terms]
        self._len = [0 if pl is None else len(pl) for pl in self.lists]
        self.block_size = index.block_size
        self.u = 0
        self._reset_position()

    def _reset_position(self):
        n = len(self.terms)
        self._pos = [0] * n
        self._loaded = [-1] * n
        self._last: int | None = None
        self._started = False

    def reset(self) -> "ScanCursor":
        self._reset_position()
        return self

    def _pending_fetches(self) -> list[int]:
        """Lists that must load a new block before the next document is known."""
        if not self._started:
            return [i for i, n in enumerate(self._len) if n > 0]
        out = []
        for i, pl in enumerate(self.lists):
            p = self._pos[i]
            if p < self._len[i] and pl.ordinals[p] == self._last:
                nxt = p + 1
                if nxt < self._len[i] and nxt // self.block_size != self._loaded[i]:
                    out.append(i)
        return out

    def peek_cost(self) -> int:
        return len(self._pending_fetches())

    def advance(self) -> Hit | None:
        if not self._started:
            for i, n in enumerate(self._len):
                if n > 0:
                    self._loaded[i] = 0
                    self.u += 1
            self._started = True
        else:
            for i, pl in enumerate(self.lists):
                p = self._pos[i]
                if p < self._len[i] and pl.ordinals[p] == self._last:
                    p += 1
                    self._pos[i] = p
                    if p < self._len[i]:
                        b = p // self.block_size
                        if b != self._loaded[i]:
                            self._loaded[i] = b
                            self.u += 1
        heads = [int(pl.ordinals[self._pos[i]]) for i, pl in enumerate(self.lists)
                 if self._pos[i] < self._len[i]]
        if not heads:
            self._last = None
            return None
        doc = min(heads)
        self._last = doc
        masks = []
        tfs = np.zeros((len(self.terms), 4), dtype=np.uint8)
        for i, pl in enumerate(self.lists):
            p = self._pos[i]
            if p < self._len[i] and pl.ordinals[p] == doc:
                tfs[i] = pl.tfs[p]
                masks.append(int(tf_to_mask(pl.tfs[p])))
            else:
                masks.append(0)
        return Hit(doc, tuple(masks), tfs)

    @property
    def exhausted(self) -> bool:
        """True when no document remains to be emitted before the next reset."""
        for i, pl in enumerate(self.lists):
            p = self._pos[i]
            if self._started and p < self._len[i] and pl.ordinals[p] == self._last:
                p += 1
            if p < self._len[i]:
                return False
        return True

    def scan(self, max_blocks=None, max_matches=None, u_limit=None) -> Batch:
        """Consume documents until a budget is met, the cursor is exhausted, or
        the next fetch would push ``u`` past ``u_limit``."""
        hits: list[Hit] = []
        u0 = self.u
        matches = 0
        while not _budget_met(self.u - u0, matches, max_blocks, max_matches):
            if u_limit is not None and self.u + self.peek_cost() > u_limit:
                break
            hit = self.advance()
            if hit is None:
                break
            hits.append(hit)
            matches += sum(1 for m in hit.masks if m)
        k = len(self.terms)
        if hits:
            ordinals = np.array([h.ordinal for h in hits], dtype=np.int64)
            masks = np.array([h.masks for h in hits], dtype=np.uint8).reshape(-1, k)
            tfs = np.stack([h.tfs for h in hits])
        else:
            ordinals = np.zeros(0, dtype=np.int64)
            masks = np.zeros((0, k), dtype=np.uint8)
            tfs = np.zeros((0, k, 4), dtype=np.uint8)
        return Batch(ordinals, masks, tfs, self.u - u0, matches)


def open_cursor(index: FieldedIndex, terms: Sequence[str]) -> ScanCursor:
    return ScanCursor(index, terms)


def advance(cursor: ScanCursor) -> Hit | None:
    return cursor.advance()


def reset_cursor(cursor: ScanCursor) -> ScanCursor:
    return cursor.reset()


class ScanTape:
    """The full document stream a cursor over ``terms`` would emit, with the
    block fetches charged to each emission.  Built lazily over growing
    ordinal windows; entries already built never change.
    """

    def __init__(self, index: FieldedIndex, terms: Sequence[str], initial_window: int = 4096):
        self.index = index
        self.terms = tuple(terms)
        self.lists = [index.postings.get(t) for t in self.terms]
        self._window = max(1, initial_window)
        self.complete = False
        self._build()

    def _build(self):
        B = self.index.block_size
        k = len(self.terms)
        X = self._window
        prefixes = []
        for pl in self.lists:
            if pl is None:
                prefixes.append(0)
            else:
                prefixes.append(int(np.searchsorted(pl.ordinals, X, side="left")))
        self.complete = all(pl is None or n == len(pl) for pl, n in zip(self.lists, prefixes))
        parts = [pl.ordinals[:n] for pl, n in zip(self.lists, prefixes) if pl is not None and n]
        union = np.unique(np.concatenate(parts)).astype(np.int64) if parts else np.zeros(0, np.int64)
        m = len(union)
        masks = np.zeros((m, k), dtype=np.uint8)
        tfs = np.zeros((m, k, 4), dtype=np.uint8)
        du = np.zeros(m, dtype=np.int64)
        if m:
            du[0] = sum(1 for pl in self.lists if pl is not None and len(pl))
        for i, (pl, n) in enumerate(zip(self.lists, prefixes)):
            if pl is None or n == 0:
                continue
            at = np.searchsorted(union, pl.ordinals[:n])
            tfs[at, i] = pl.tfs[:n]
            masks[at, i] = tf_to_mask(pl.tfs[:n])
            # block b >= 1 is fetched by the advance that follows posting b*B - 1
            starts = np.arange(B, len(pl), B)
            starts = starts[starts - 1 < n]
            if len(starts):
                pos = at[starts - 1] + 1
                pos = pos[pos < m]
                np.add.at(du, pos, 1)
        self.ordinals = union
        self.masks = masks
        self.tfs = tfs
        self.du = du
        self.dv = (masks != 0).sum(axis=1).astype(np.int64)
        self.cum_u = np.concatenate(([0], np.cumsum(du)))
        self.cum_v = np.concatenate(([0], np.cumsum(self.dv)))

    def __len__(self) -> int:
        return len(self.ordinals)

    def extend(self) -> bool:
        """Double the ordinal window.  False when already complete."""
        if self.complete:
            return False
        self._window *= 2
        self._build()
        return True


class TapeCursor:
    """Cursor over a ScanTape; same observable behaviour as ScanCursor."""

    def __init__(self, tape: ScanTape):
        self.tape = tape
        self.terms = tape.terms
        self.pos = 0
        self.u = 0

    def reset(self) -> "TapeCursor":
        self.pos = 0
        return self

    def _ensure(self, n: int) -> bool:
        while len(self.tape) < n:
            if not self.tape.extend():
                return False
        return True

    def peek_cost(self) -> int:
        if not self._ensure(self.pos + 1):
            return 0
        return int(self.tape.du[self.pos])

    def advance(self) -> Hit | None:
        if not self._ensure(self.pos + 1):
            return None
        t, j = self.tape, self.pos
        self.u += int(t.du[j])
        self.pos += 1
        return Hit(int(t.ordinals[j]), tuple(int(m) for m in t.masks[j]), t.tfs[j].copy())

    @property
    def exhausted(self) -> bool:
        return self.tape.complete and self.pos >= len(self.tape)

    def scan(self, max_blocks=None, max_matches=None, u_limit=None) -> Batch:
        t = self.tape
        start = self.pos
        if _budget_met(0, 0, max_blocks, max_matches):
            return self._batch(start, start)
        while True:
            cu, cv = t.cum_u, t.cum_v
            avail = len(t) - start
            k = avail
            if max_blocks is not None:
                j = int(np.searchsorted(cu, cu[start] + max_blocks, side="left"))
                k = min(k, j - start)
            if max_matches is not None:
                j = int(np.searchsorted(cv, cv[start] + max_matches, side="left"))
                k = min(k, j - start)
            if u_limit is not None:
                room = u_limit - self.u
                j = int(np.searchsorted(cu, cu[start] + room, side="right")) - 1
                k = min(k, j - start)
            if k < avail or t.complete:
                break
            t.extend()
        end = start + max(k, 0)
        self.u += int(t.cum_u[end] - t.cum_u[start])
        self.pos = end
        return self._batch(start, end)

    def _batch(self, a: int, b: int) -> Batch:
        t = self.tape
        return Batch(t.ordinals[a:b], t.masks[a:b], t.tfs[a:b],
                     int(t.cum_u[b] - t.cum_u[a]), int(t.cum_v[b] - t.cum_v[a]))
