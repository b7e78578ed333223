"""Distance between a predicted and a true source set under the best matching."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graph import Graph, bfs_distances

MAX_BRUTE_FORCE = 8


class MetricError(ValueError):
    pass


@dataclass(frozen=True)
class DistanceReport:
    total: int
    matching: tuple  # (predicted node, true node) pairs


def _members(s):
    return list(getattr(s, "members", s))


def hop_matrix(g: Graph, predicted, truth) -> np.ndarray:
    predicted, truth = _members(predicted), _members(truth)
    if len(predicted) != len(truth):
        raise MetricError(f"set sizes differ: {len(predicted)} vs {len(truth)}")
    D = np.array([bfs_distances(g, u)[truth] for u in predicted]).reshape(len(predicted), len(truth))
    if np.isinf(D).any():
        raise MetricError("some predicted and true sources are mutually unreachable")
    return D.astype(np.int64)


def source_distance(g: Graph, predicted, truth) -> DistanceReport:
    """Minimum total hop distance over all one-to-one matchings."""
    D = hop_matrix(g, predicted, truth)
    rows, cols = linear_sum_assignment(D)
    p, t = _members(predicted), _members(truth)
    matching = tuple((p[r], t[c]) for r, c in zip(rows, cols))
    return DistanceReport(int(D[rows, cols].sum()), matching)


def brute_force_distance(g: Graph, predicted, truth) -> int:
    D = hop_matrix(g, predicted, truth)
    k = len(D)
    if k > MAX_BRUTE_FORCE:
        raise MetricError(f"brute force is limited to {MAX_BRUTE_FORCE} sources, got {k}")
    return min(int(sum(D[i, perm[i]] for i in range(k))) for perm in itertools.permutations(range(k)))
