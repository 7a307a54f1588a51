"""Candidate generation over a static-rank-ordered fielded index, with match
plans chosen at run time by a tabular Q-learning policy."""

from .data import Document, Query, categorize, load_corpus, load_queries, tokenize
from .evaluation import compare, gain, ncg_at_k
from .index import FieldedIndex, build_index, open_cursor
from .matching import MatchPlan, MatchRule, StoppingCondition, default_rule_set, run_plan
from .ranker import L1Weights, l1_score, rank_candidates
from .rl import QTable, RewardConfig, StateBinner, agent_reward, fit_binner, q_update

__version__ = "0.1.0"

__all__ = [
    "Document", "Query", "categorize", "load_corpus", "load_queries", "tokenize",
    "compare", "gain", "ncg_at_k", "FieldedIndex", "build_index", "open_cursor",
    "MatchPlan", "MatchRule", "StoppingCondition", "default_rule_set", "run_plan",
    "L1Weights", "l1_score", "rank_candidates", "QTable", "RewardConfig", "StateBinner",
    "agent_reward", "fit_binner", "q_update",
]
