from .config import PlannerConfig
from .hybrid import (
    PassResult,
    SearchEdge,
    SearchNode,
    SearchState,
    connect_sample,
    forward_pass,
    init_search,
    plan,
    sample_round,
)
from .path import PathPoint, PlannedPath
from .reverse_tree import ReverseTree

__all__ = [
    "PassResult", "PathPoint", "PlannedPath", "PlannerConfig", "ReverseTree", "SearchEdge", "SearchNode",
    "SearchState", "connect_sample", "forward_pass", "init_search", "plan", "sample_round",
]
