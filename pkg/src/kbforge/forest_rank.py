"""Random-forest regressor built from scratch, with mean-MSE-reduction importance.

Split finding is exact and greedy: every registry feature is considered at
every node (no feature subsampling) with candidate thresholds at midpoints of
consecutive distinct values. Ties in split score break by alphabetical feature
name, then smaller threshold, which makes training fully deterministic for a
fixed (record order, params, seed). Per-tree randomness comes only from the
bootstrap resample, seeded with ``seed XOR tree_index`` through numpy's PCG64,
a documented generator with stable streams across platforms.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Union

import numpy as np

from .flow_data import FEATURE_INDEX, FEATURES, AttackLabel, FlowRecord


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 100
    max_depth: int = 12
    min_samples_leaf: int = 5
    bootstrap: bool = True

    def __post_init__(self) -> None:
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class Leaf:
    value: float
    sample_count: int


@dataclass(frozen=True)
class Split:
    feature: str
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    #: Node-fraction-weighted MSE reduction: (n_node / n_root) * delta-MSE.
    weighted_mse_reduction: float


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class Forest:
    trees: tuple[TreeNode, ...]
    params: ForestParams
    seed: int


def records_to_matrix(records: list[FlowRecord]) -> np.ndarray:
    """Stack records into an (n, n_features) float64 matrix in registry order."""
    return np.array([[r.features[name] for name in FEATURES] for r in records], dtype=np.float64)


def _best_split_for_feature(
    values: np.ndarray, y: np.ndarray, min_leaf: int
) -> tuple[float, float] | None:
    """Return (sse_reduction, threshold) for the best admissible split, or None."""
    order = np.argsort(values, kind="stable")
    vs = values[order]
    ys = y[order]
    n = vs.size
    # boundary i means left = samples [0..i], right = [i+1..n-1]
    boundaries = np.nonzero(vs[:-1] < vs[1:])[0]
    if boundaries.size == 0:
        return None
    counts_left = boundaries + 1
    admissible = (counts_left >= min_leaf) & (n - counts_left >= min_leaf)
    boundaries = boundaries[admissible]
    if boundaries.size == 0:
        return None
    cum_y = np.cumsum(ys)
    cum_y2 = np.cumsum(ys * ys)
    total_y = cum_y[-1]
    total_y2 = cum_y2[-1]
    n_left = (boundaries + 1).astype(np.float64)
    n_right = n - n_left
    sum_left = cum_y[boundaries]
    sum2_left = cum_y2[boundaries]
    sse_left = sum2_left - (sum_left * sum_left) / n_left
    sum_right = total_y - sum_left
    sse_right = (total_y2 - sum2_left) - (sum_right * sum_right) / n_right
    sse_total = total_y2 - (total_y * total_y) / n
    reductions = sse_total - sse_left - sse_right
    best = int(np.argmax(reductions))  # first maximum <=> smaller threshold on ties
    reduction = float(reductions[best])
    if reduction <= 0.0:
        return None
    i = boundaries[best]
    threshold = float((vs[i] + vs[i + 1]) / 2.0)
    return reduction, threshold


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    indices: np.ndarray,
    depth: int,
    params: ForestParams,
    n_root: int,
) -> TreeNode:
    y_node = y[indices]
    n = indices.size
    mean = float(y_node.mean())
    if depth >= params.max_depth or n < 2 * params.min_samples_leaf or np.all(y_node == y_node[0]):
        return Leaf(value=mean, sample_count=n)

    best: tuple[float, int, float] | None = None  # (reduction, feature_idx, threshold)
    for j in range(X.shape[1]):
        found = _best_split_for_feature(X[indices, j], y_node, params.min_samples_leaf)
        if found is None:
            continue
        reduction, threshold = found
        if best is None or reduction > best[0]:
            best = (reduction, j, threshold)
    if best is None:
        return Leaf(value=mean, sample_count=n)

    reduction, j, threshold = best
    mask = X[indices, j] <= threshold
    left = _grow_tree(X, y, indices[mask], depth + 1, params, n_root)
    right = _grow_tree(X, y, indices[~mask], depth + 1, params, n_root)
    return Split(
        feature=FEATURES[j],
        threshold=threshold,
        left=left,
        right=right,
        weighted_mse_reduction=reduction / n_root,
    )


def fit_forest(
    records: list[FlowRecord],
    target: Callable[[FlowRecord], float] | list[float] | np.ndarray,
    params: ForestParams = ForestParams(),
    seed: int = 0,
) -> Forest:
    """Train a forest of regression trees on the registry features.

    Deterministic for a fixed (record order, params, seed); each tree sees a
    bootstrap resample of the same size when params.bootstrap is set.
    """
    if len(records) < 2:
        raise ValueError("need at least 2 records to fit a forest")
    X = records_to_matrix(records)
    if np.unique(X, axis=0).shape[0] < 2:
        raise ValueError("need at least 2 distinct records to fit a forest")
    if callable(target):
        y = np.array([target(r) for r in records], dtype=np.float64)
    else:
        y = np.asarray(target, dtype=np.float64)
    if y.shape[0] != X.shape[0]:
        raise ValueError("target must be defined for every record")

    n = X.shape[0]
    trees = []
    for t in range(params.num_trees):
        if params.bootstrap:
            rng = np.random.Generator(np.random.PCG64(seed ^ t))
            indices = np.sort(rng.integers(0, n, size=n))
        else:
            indices = np.arange(n)
        trees.append(_grow_tree(X, y, indices, depth=0, params=params, n_root=n))
    return Forest(trees=tuple(trees), params=params, seed=seed)


def _predict_tree(node: TreeNode, row: np.ndarray) -> float:
    while isinstance(node, Split):
        node = node.left if row[FEATURE_INDEX[node.feature]] <= node.threshold else node.right
    return node.value


def predict(forest: Forest, record: FlowRecord) -> float:
    """Mean of per-tree leaf values along each root-to-leaf path."""
    row = np.array([record.features[name] for name in FEATURES], dtype=np.float64)
    return float(np.mean([_predict_tree(tree, row) for tree in forest.trees]))


@dataclass(frozen=True)
class ImportanceReport:
    scores: dict[str, float]
    ranking: tuple[str, ...] = field(default=())

    @staticmethod
    def from_scores(scores: dict[str, float]) -> "ImportanceReport":
        ranking = tuple(sorted(scores, key=lambda name: (-scores[name], name)))
        return ImportanceReport(scores=scores, ranking=ranking)

    def to_json(self) -> str:
        payload = {
            "scores": {name: self.scores[name] for name in sorted(self.scores)},
            "ranking": list(self.ranking),
        }
        return json.dumps(payload, indent=2) + "\n"

    @staticmethod
    def from_json(text: str) -> "ImportanceReport":
        payload = json.loads(text)
        return ImportanceReport(
            scores={k: float(v) for k, v in payload["scores"].items()},
            ranking=tuple(payload["ranking"]),
        )

    def to_csv(self) -> str:
        """Two-column ranked export, ready for a ranked-bar chart."""
        lines = ["feature,importance"]
        lines.extend(f"{name},{self.scores[name]!r}" for name in self.ranking)
        return "\n".join(lines) + "\n"


def _accumulate_tree_importance(node: TreeNode, sink: dict[str, float]) -> None:
    if isinstance(node, Leaf):
        return
    sink[node.feature] = sink.get(node.feature, 0.0) + node.weighted_mse_reduction
    _accumulate_tree_importance(node.left, sink)
    _accumulate_tree_importance(node.right, sink)


def feature_importance(forest: Forest) -> ImportanceReport:
    """Average per-tree MSE reductions per feature, normalized to sum to one.

    A feature's per-tree score is the sum over its split nodes of the node's
    sample-fraction-weighted MSE reduction; the forest score is the mean over
    trees. All-zero scores (constant target) are left unnormalized.
    """
    totals = {name: 0.0 for name in FEATURES}
    for tree in forest.trees:
        per_tree: dict[str, float] = {}
        _accumulate_tree_importance(tree, per_tree)
        for name, value in per_tree.items():
            totals[name] += value
    t = len(forest.trees)
    scores = {name: value / t for name, value in totals.items()}
    total = sum(scores.values())
    if total > 0.0:
        scores = {name: value / total for name, value in scores.items()}
    return ImportanceReport.from_scores(scores)


def rank_features_for_attack(
    records: list[FlowRecord],
    attack: AttackLabel,
    params: ForestParams = ForestParams(),
    seed: int = 0,
) -> ImportanceReport:
    """One-vs-rest feature ranking: regress the indicator of `attack` on all features."""
    y = np.array([1.0 if r.label is attack else 0.0 for r in records], dtype=np.float64)
    if not y.any():
        raise ValueError(f"no records labeled {attack.render()}")
    if y.all():
        raise ValueError(f"no records labeled other than {attack.render()}")
    forest = fit_forest(records, y, params=params, seed=seed)
    return feature_importance(forest)


def write_report(report: ImportanceReport, json_path: str | Path, csv_path: str | Path) -> None:
    json_path = Path(json_path)
    json_path.parent.mkdir(parents=True, exist_ok=True)
    json_path.write_text(report.to_json(), encoding="utf-8")
    Path(csv_path).write_text(report.to_csv(), encoding="utf-8")
