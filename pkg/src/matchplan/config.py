"""Run configuration: one JSON file drives every pipeline stage."""

from __future__ import annotations

import copy
import dataclasses
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .data import CategoryThresholds
from .matching import (CAT1_BASELINE, CAT2_BASELINE, DEFAULT_TEMPLATES, MatchPlan, RuleTemplate,
                       TermPolicy, parse_plan, plan_to_dict)
from .ranker import L1Weights
from .rl import EpisodeConfig, RewardConfig, TrainConfig
from .synth import SynthConfig

CONFIG_VERSION = 1
CATEGORIES = ("CAT1", "CAT2")
MODES = ("weighted", "unweighted")


class ConfigError(ValueError):
    pass


def atomic_write_bytes(path: str | Path, data: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: str | Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


@dataclass(frozen=True)
class BinConfig:
    p: int = 1000
    # which baseline traces feed the binner: one point per plan step, or one
    # per agent-sized step budget over the same scan
    record: str = "plan_step"

    def __post_init__(self):
        if self.p < 1:
            raise ConfigError("bins.p must be >= 1")
        if self.record not in ("plan_step", "agent_step"):
            raise ConfigError(f"unknown bins.record {self.record!r}")


@dataclass(frozen=True)
class EvalConfig:
    test_fraction: float = 0.5
    sample_size: int = 1000
    depth: int = 100
    resamples: int = 10_000

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError("evaluation.test_fraction must lie in (0, 1)")
        if self.sample_size < 1 or self.depth < 1 or self.resamples < 1:
            raise ConfigError("evaluation sizes must be positive")


@dataclass(frozen=True)
class Paths:
    corpus: str = "corpus.tsv"
    queries: str = "queries.tsv"
    index: str = "index.mpl"
    traces: str = "traces.jsonl"
    binner: str = "binner.json"
    qtable: str = "qtable-{category}.mpqt"
    runs: str = "runs-{category}-{mode}-{treatment}.jsonl"
    report: str = "report.txt"
    report_table: str = "report.tsv"
    profile: str = "profile-{category}-{mode}.tsv"


def _rule_to_dict(t: RuleTemplate) -> dict:
    return {"fields": t.fields, "terms": t.terms.value}


def _rule_from_dict(d: Mapping) -> RuleTemplate:
    return RuleTemplate(str(d["fields"]), TermPolicy(d.get("terms", "all")))


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    workdir: str = "run"
    block_size: int = 64
    synth: SynthConfig = field(default_factory=SynthConfig)
    thresholds: CategoryThresholds = field(default_factory=CategoryThresholds)
    weights: L1Weights = field(default_factory=L1Weights)
    rules: tuple[RuleTemplate, ...] = DEFAULT_TEMPLATES
    baselines: Mapping[str, MatchPlan] = field(
        default_factory=lambda: {"CAT1": CAT1_BASELINE, "CAT2": CAT2_BASELINE})
    reward: RewardConfig = field(default_factory=RewardConfig)
    episode: EpisodeConfig = field(default_factory=EpisodeConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    bins: BinConfig = field(default_factory=BinConfig)
    evaluation: EvalConfig = field(default_factory=EvalConfig)
    paths: Paths = field(default_factory=Paths)

    def __post_init__(self):
        if self.block_size < 1:
            raise ConfigError("block_size must be >= 1")
        missing = [c for c in CATEGORIES if c not in self.baselines]
        if missing:
            raise ConfigError(f"no baseline plan for {', '.join(missing)}")
        for cat, plan in self.baselines.items():
            bad = [s.rule_id for s in plan.steps if not 0 <= s.rule_id < len(self.rules)]
            if bad:
                raise ConfigError(f"baseline {cat} uses unknown rule ids {bad}")

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "workdir": self.workdir,
            "block_size": self.block_size,
            "synth": dataclasses.asdict(self.synth),
            "thresholds": dataclasses.asdict(self.thresholds),
            "weights": dataclasses.asdict(self.weights),
            "rules": [_rule_to_dict(t) for t in self.rules],
            "baselines": {c: plan_to_dict(p) for c, p in sorted(self.baselines.items())},
            "reward": dataclasses.asdict(self.reward),
            "episode": dataclasses.asdict(self.episode),
            "train": dataclasses.asdict(self.train),
            "bins": dataclasses.asdict(self.bins),
            "evaluation": dataclasses.asdict(self.evaluation),
            "paths": dataclasses.asdict(self.paths),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RunConfig":
        d = copy.deepcopy(dict(d))
        version = d.pop("version", None)
        if version != CONFIG_VERSION:
            raise ConfigError(f"config version {version!r} is not supported "
                              f"(expected {CONFIG_VERSION})")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

        def sub(key, typ):
            raw = d.get(key, {})
            try:
                return typ(**raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad '{key}' section: {exc}") from exc

        synth_raw = dict(d.get("synth", {}))
        for k in ("head_ranks", "torso_ranks", "tail_ranks", "relevant_per_query",
                  "nonrelevant_per_query"):
            if k in synth_raw:
                synth_raw[k] = tuple(synth_raw[k])
        d["synth"] = synth_raw
        kwargs: dict[str, Any] = {}
        for key, typ in (("synth", SynthConfig), ("thresholds", CategoryThresholds),
                         ("weights", L1Weights), ("reward", RewardConfig),
                         ("episode", EpisodeConfig), ("train", TrainConfig),
                         ("bins", BinConfig), ("evaluation", EvalConfig), ("paths", Paths)):
            if key in d:
                kwargs[key] = sub(key, typ)
        if "rules" in d:
            kwargs["rules"] = tuple(_rule_from_dict(r) for r in d["rules"])
        if "baselines" in d:
            kwargs["baselines"] = {c: parse_plan(p, name=f"{c.lower()}-baseline")
                                   for c, p in d["baselines"].items()}
        for key in ("seed", "workdir", "block_size"):
            if key in d:
                kwargs[key] = d[key]
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @property
    def hash(self) -> str:
        """sha256 over the canonical JSON form, ignoring where the run is written."""
        d = self.to_dict()
        d.pop("workdir")
        canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()

    # -- derived settings ---------------------------------------------------

    def with_seed(self, seed: int) -> "RunConfig":
        return dataclasses.replace(self, seed=seed)

    def with_workdir(self, workdir: str | Path) -> "RunConfig":
        return dataclasses.replace(self, workdir=str(workdir))

    @property
    def synth_config(self) -> SynthConfig:
        return dataclasses.replace(self.synth, seed=self.seed)

    def train_config(self, category: str) -> TrainConfig:
        offset = CATEGORIES.index(category) + 1
        return dataclasses.replace(self.train, seed=self.seed * 1000 + offset)

    def path(self, name: str, **fmt) -> Path:
        return Path(self.workdir) / getattr(self.paths, name).format(**fmt)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    cfg = RunConfig.from_dict(raw)
    if "workdir" not in raw:
        cfg = cfg.with_workdir(Path(path).parent / cfg.workdir)
    return cfg
