"""Pipeline stages.  Each stage reads upstream artifacts from the run directory
and writes its own atomically, alongside a small metadata file that records
the config hash it ran under."""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .config import CATEGORIES, MODES, RunConfig, atomic_write_bytes, atomic_write_text
from .data import (Query, categorize, corpus_text, load_corpus, load_queries,
                   queries_text, sample_queries)
from .evaluation import (EvalReport, RunRecord, compare, dump_records, format_blocks_profile,
                         load_records, make_record)
from .index import FieldedIndex, build_index, dump_index, load_index
from .matching import instantiate_rules
from .rl import (PolicyContext, QTable, StateBinner, baseline_signal, baseline_trace, fit_binner,
                 greedy_episode, train_policy)
from .synth import generate

log = logging.getLogger("matchplan")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


# stage that produces each artifact, for error messages
PRODUCER = {
    "corpus": "gen-corpus", "queries": "gen-corpus", "index": "build-index",
    "traces": "trace-baseline", "binner": "fit-bins", "qtable": "train", "runs": "evaluate",
}


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _write_artifact(cfg: RunConfig, stage: str, path: Path, data: bytes | str) -> Path:
    if isinstance(data, str):
        atomic_write_text(path, data)
    else:
        atomic_write_bytes(path, data)
    meta = {"stage": stage, "config_hash": cfg.hash}
    atomic_write_text(_meta_path(path), json.dumps(meta, sort_keys=True) + "\n")
    log.info("%s: wrote %s", stage, path)
    return path


def _require(cfg: RunConfig, stage: str, name: str, **fmt) -> Path:
    path = cfg.path(name, **fmt)
    if not path.exists():
        producer = PRODUCER.get(name, name)
        raise StageError(stage, f"missing {name} artifact {path}; run the '{producer}' stage first")
    meta = _meta_path(path)
    if meta.exists():
        recorded = json.loads(meta.read_text()).get("config_hash")
        if recorded != cfg.hash:
            log.warning("%s: %s was produced under config %s, current config is %s",
                        stage, path.name, str(recorded)[:12], cfg.hash[:12])
    return path


def _start(cfg: RunConfig, stage: str) -> float:
    log.info("%s: config sha256=%s seed=%d", stage, cfg.hash, cfg.seed)
    return time.perf_counter()


def _done(stage: str, t0: float) -> None:
    log.info("%s: done in %.1fs", stage, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# shared loading


@dataclass
class Workspace:
    """Index, queries, categories and the train/test split of a run."""

    index: FieldedIndex
    queries: list[Query]
    category: dict[str, str]
    split: dict[str, str]

    def select(self, category: str, split: str) -> list[Query]:
        return [q for q in self.queries
                if self.category[q.query_id] == category and self.split[q.query_id] == split]


def split_queries(queries: Sequence[Query], test_fraction: float, seed: int) -> dict[str, str]:
    rng = np.random.default_rng([seed, 7])
    order = rng.permutation(len(queries))
    n_test = int(round(test_fraction * len(queries)))
    out = {}
    for rank, i in enumerate(order):
        out[queries[i].query_id] = "test" if rank < n_test else "train"
    return out


def load_workspace(cfg: RunConfig, stage: str) -> Workspace:
    index = load_index(_require(cfg, stage, "index"))
    queries = load_queries(_require(cfg, stage, "queries"))
    dff = index.df_fractions()
    cats = {q.query_id: categorize(q, dff, cfg.thresholds).category.value for q in queries}
    return Workspace(index, queries, cats,
                     split_queries(queries, cfg.evaluation.test_fraction, cfg.seed))


def load_traces(cfg: RunConfig, stage: str) -> dict[str, dict]:
    out = {}
    with open(_require(cfg, stage, "traces"), encoding="utf-8") as fh:
        for line in fh:
            rec = json.loads(line)
            out[rec["query_id"]] = rec
    return out


def policy_context(cfg: RunConfig, index: FieldedIndex, binner: StateBinner) -> PolicyContext:
    return PolicyContext(index, binner, cfg.weights, cfg.reward, cfg.episode, cfg.rules)


# ---------------------------------------------------------------------------
# stages


def gen_corpus(cfg: RunConfig) -> tuple[Path, Path]:
    t0 = _start(cfg, "gen-corpus")
    docs, queries = generate(cfg.synth_config)
    log.info("gen-corpus: %d documents, %d queries", len(docs), len(queries))
    a = _write_artifact(cfg, "gen-corpus", cfg.path("corpus"), corpus_text(docs))
    b = _write_artifact(cfg, "gen-corpus", cfg.path("queries"), queries_text(queries))
    _done("gen-corpus", t0)
    return a, b


def build_index_stage(cfg: RunConfig) -> Path:
    t0 = _start(cfg, "build-index")
    docs = load_corpus(_require(cfg, "build-index", "corpus"))
    index = build_index(docs, cfg.block_size)
    log.info("build-index: %d documents, %d terms", index.num_docs, len(index.postings))
    out = _write_artifact(cfg, "build-index", cfg.path("index"), dump_index(index))
    _done("build-index", t0)
    return out


def trace_baseline(cfg: RunConfig) -> Path:
    """Run each category's production plan on every query of that category."""
    t0 = _start(cfg, "trace-baseline")
    ws = load_workspace(cfg, "trace-baseline")
    record_every = cfg.episode.step_budget if cfg.bins.record == "agent_step" else None
    lines = []
    counts = {c: 0 for c in CATEGORIES}
    for q in ws.queries:
        cat = ws.category[q.query_id]
        if cat not in CATEGORIES:
            continue
        rules = instantiate_rules(cfg.rules, [ws.index.df(t) for t in q.terms])
        rec = baseline_trace(ws.index, q, cfg.baselines[cat], rules, cfg.weights, cfg.reward,
                             cfg.episode.u_cap, record_every)
        rec["category"] = cat
        rec["split"] = ws.split[q.query_id]
        lines.append(json.dumps(rec, sort_keys=True))
        counts[cat] += 1
    log.info("trace-baseline: %s", ", ".join(f"{c} {n}" for c, n in counts.items()))
    out = _write_artifact(cfg, "trace-baseline", cfg.path("traces"), "\n".join(lines) + "\n")
    _done("trace-baseline", t0)
    return out


def fit_bins(cfg: RunConfig) -> Path:
    t0 = _start(cfg, "fit-bins")
    traces = load_traces(cfg, "fit-bins")
    points = [pt for rec in traces.values() if rec["split"] == "train" for pt in rec["trace"]]
    if not points:
        raise StageError("fit-bins", "no training trace points")
    try:
        binner = fit_binner(points, cfg.bins.p)
    except ValueError as exc:
        raise StageError("fit-bins", str(exc)) from exc
    log.info("fit-bins: %d points into %d bins", len(points), binner.p)
    out = _write_artifact(cfg, "fit-bins", cfg.path("binner"),
                          json.dumps(binner.to_dict(), indent=1) + "\n")
    _done("fit-bins", t0)
    return out


def _check_category(stage: str, category: str) -> None:
    if category not in CATEGORIES:
        raise StageError(stage, f"unknown category {category!r}; expected one of {CATEGORIES}")


def train(cfg: RunConfig, category: str) -> Path:
    _check_category("train", category)
    t0 = _start(cfg, "train")
    ws = load_workspace(cfg, "train")
    traces = load_traces(cfg, "train")
    binner = StateBinner.load(_require(cfg, "train", "binner"))
    queries = ws.select(category, "train")
    if not queries:
        raise StageError("train", f"no training queries in {category}")
    signals = {qid: baseline_signal(rec, cfg.reward) for qid, rec in traces.items()}
    tc = cfg.train_config(category)
    log.info("train: %s, %d queries, %d episodes", category, len(queries), tc.episodes)
    table = train_policy(policy_context(cfg, ws.index, binner), queries, tc, signals)
    out = _write_artifact(cfg, "train", cfg.path("qtable", category=category), table.to_bytes())
    _done("train", t0)
    return out


def eval_sample(cfg: RunConfig, ws: Workspace, category: str, mode: str) -> list[Query]:
    pool = ws.select(category, "test")
    if not pool:
        raise StageError("evaluate", f"no test queries in {category}")
    count = cfg.evaluation.sample_size
    if mode == "unweighted":
        count = min(count, len(pool))
    seed = cfg.seed * 1000 + 10 * (CATEGORIES.index(category) + 1) + MODES.index(mode)
    try:
        return sample_queries(pool, mode, count, seed)
    except ValueError as exc:
        raise StageError("evaluate", str(exc)) from exc


def evaluate(cfg: RunConfig, category: str, mode: str) -> tuple[Path, Path]:
    _check_category("evaluate", category)
    if mode not in MODES:
        raise StageError("evaluate", f"unknown mode {mode!r}; expected one of {MODES}")
    t0 = _start(cfg, "evaluate")
    ws = load_workspace(cfg, "evaluate")
    traces = load_traces(cfg, "evaluate")
    binner = StateBinner.load(_require(cfg, "evaluate", "binner"))
    table = QTable.load(_require(cfg, "evaluate", "qtable", category=category))
    ctx = policy_context(cfg, ws.index, binner)
    sample = eval_sample(cfg, ws, category, mode)
    pol: list[RunRecord] = []
    base: list[RunRecord] = []
    cache: dict[str, tuple[RunRecord, RunRecord]] = {}
    depth = cfg.evaluation.depth
    for q in sample:
        if q.query_id not in cache:
            tr = traces[q.query_id]
            res = greedy_episode(ctx, table, q, baseline_signal(tr, cfg.reward))
            p = make_record(ws.index, q, category, "policy", res.candidates, res.u, res.v,
                            cfg.weights, depth, len(res.steps))
            b = make_record(ws.index, q, category, "baseline", tr["candidates"], tr["u"], tr["v"],
                            cfg.weights, depth, len(tr["trace"]))
            cache[q.query_id] = (p, b)
        p, b = cache[q.query_id]
        pol.append(p)
        base.append(b)
    log.info("evaluate: %s %s, %d queries (%d distinct)", category, mode, len(sample), len(cache))
    fmt = {"category": category, "mode": mode}
    a = _write_artifact(cfg, "evaluate", cfg.path("runs", treatment="policy", **fmt),
                        dump_records(pol))
    b = _write_artifact(cfg, "evaluate", cfg.path("runs", treatment="baseline", **fmt),
                        dump_records(base))
    _done("evaluate", t0)
    return a, b


def report(cfg: RunConfig, segments: Iterable[tuple[str, str]] | None = None) -> list[EvalReport]:
    """Compare every evaluated (category, mode) segment; write summary and profiles."""
    t0 = _start(cfg, "report")
    if segments is None:
        segments = [(c, m) for c in CATEGORIES for m in MODES
                    if cfg.path("runs", category=c, mode=m, treatment="policy").exists()]
    segments = list(segments)
    if not segments:
        raise StageError("report", "no run results found; run the 'evaluate' stage first")
    reports = []
    for c, m in segments:
        pol = load_records(_require(cfg, "report", "runs", category=c, mode=m, treatment="policy"))
        base = load_records(_require(cfg, "report", "runs", category=c, mode=m,
                                     treatment="baseline"))
        rep = compare(pol, base, f"{c} {m}", cfg.evaluation.resamples, cfg.seed)
        reports.append(rep)
        _write_artifact(cfg, "report", cfg.path("profile", category=c, mode=m),
                        format_blocks_profile(rep.u_policy.astype(int), rep.u_baseline.astype(int)))
    text = f"config sha256 {cfg.hash}\n\n" + "\n".join(r.to_text() for r in reports)
    _write_artifact(cfg, "report", cfg.path("report"), text)
    cols = list(reports[0].summary())
    rows = ["\t".join(cols)]
    for r in reports:
        rows.append("\t".join(_cell(r.summary()[k]) for k in cols))
    _write_artifact(cfg, "report", cfg.path("report_table"), "\n".join(rows) + "\n")
    for r in reports:
        log.info("report: %s", r.to_text().rstrip().replace("\n", " |"))
    _done("report", t0)
    return reports


def _cell(x) -> str:
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_all(cfg: RunConfig) -> list[EvalReport]:
    gen_corpus(cfg)
    build_index_stage(cfg)
    trace_baseline(cfg)
    fit_bins(cfg)
    for c in CATEGORIES:
        train(cfg, c)
    for c in CATEGORIES:
        for m in MODES:
            evaluate(cfg, c, m)
    return report(cfg)
