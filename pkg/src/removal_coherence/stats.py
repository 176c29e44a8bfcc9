"""Rank aggregation and agreement statistics for method comparisons.

Raters (or metrics) rank M methods per item. Borda counts aggregate
rater rows, Kendall's tau-b / Spearman's rho measure agreement between
two rankings, and Kendall's W measures concordance across rows. The
`correlate` entry point ties these together into one report comparing
metric-induced rankings against aggregated human rankings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy import stats as _sps

from .errors import InputError, InvalidPermutation, ItemMismatch, LengthMismatch


@dataclass(frozen=True, eq=False)
class RankingTable:
    """ranks[r, i] holds rater r's permutation of 1..M (1 = best) for item i."""

    items: Tuple[str, ...]
    methods: Tuple[str, ...]
    ranks: np.ndarray  # (R, N, M) integers

    def __post_init__(self) -> None:
        object.__setattr__(self, "items", tuple(self.items))
        object.__setattr__(self, "methods", tuple(self.methods))
        arr = np.asarray(self.ranks, dtype=np.int64)
        object.__setattr__(self, "ranks", arr)
        n, m = len(self.items), len(self.methods)
        if len(set(self.items)) != n:
            raise ItemMismatch("duplicate item ids")
        if len(set(self.methods)) != m:
            raise ItemMismatch("duplicate method names")
        if m < 2:
            raise InvalidPermutation(f"need at least 2 methods, got {m}")
        if arr.ndim != 3 or arr.shape[1:] != (n, m) or arr.shape[0] < 1:
            raise InvalidPermutation(
                f"ranks shape {arr.shape} does not match "
                f"(raters, {n} items, {m} methods)"
            )
        want = np.arange(1, m + 1)
        for r in range(arr.shape[0]):
            for i in range(n):
                if not np.array_equal(np.sort(arr[r, i]), want):
                    raise InvalidPermutation(
                        f"rater {r} / item {self.items[i]!r}: "
                        f"{arr[r, i].tolist()} is not a permutation of 1..{m}"
                    )

    @property
    def n_raters(self) -> int:
        return int(self.ranks.shape[0])

    def item_index(self, item: str) -> int:
        try:
            return self.items.index(item)
        except ValueError:
            raise ItemMismatch(f"unknown item {item!r}") from None


def _single_item_index(table: RankingTable, item: Optional[str]) -> int:
    if item is not None:
        return table.item_index(item)
    if len(table.items) != 1:
        raise ItemMismatch(
            f"table has {len(table.items)} items; pass the item to aggregate"
        )
    return 0


def borda_scores(table: RankingTable, item: Optional[str] = None) -> np.ndarray:
    """Per-method Borda totals for one item: each rank r awards M - r points."""
    idx = _single_item_index(table, item)
    m = len(table.methods)
    return (m - table.ranks[:, idx, :]).sum(axis=0)


def _as_ranking(a: Sequence[float], b: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    xa = np.asarray(a, dtype=np.float64)
    xb = np.asarray(b, dtype=np.float64)
    if xa.ndim != 1 or xb.ndim != 1 or xa.shape != xb.shape:
        raise LengthMismatch(f"rankings differ in length: {xa.shape} vs {xb.shape}")
    if xa.size < 2:
        raise LengthMismatch(f"need at least 2 entries, got {xa.size}")
    if np.all(xa == xa[0]) or np.all(xb == xb[0]):
        raise InputError("rank correlation is undefined for a constant ranking")
    return xa, xb


def kendall_tau(a: Sequence[float], b: Sequence[float]) -> float:
    """Kendall's tau-b; equals (concordant - discordant) / C(n,2) when tie-free."""
    xa, xb = _as_ranking(a, b)
    return float(_sps.kendalltau(xa, xb, variant="b").statistic)


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """Spearman's rho with average ranks for ties."""
    xa, xb = _as_ranking(a, b)
    return float(_sps.spearmanr(xa, xb).statistic)


def _w_from_rows(rows: np.ndarray) -> float:
    r, m = rows.shape
    if r < 2:
        raise InvalidPermutation(f"concordance needs at least 2 rows, got {r}")
    col = rows.sum(axis=0).astype(np.float64)
    s = float(((col - col.mean()) ** 2).sum())
    correction = 0.0
    for row in rows:
        _, counts = np.unique(row, return_counts=True)
        correction += float((counts.astype(np.float64) ** 3 - counts).sum())
    denom = r * r * (m ** 3 - m) - r * correction
    return 12.0 * s / denom


def kendall_w(table: RankingTable, item: Optional[str] = None) -> float:
    """Kendall's coefficient of concordance. With an item, over that item's
    rater rows; without, every (rater, item) row is pooled as one judge."""
    if item is not None:
        rows = table.ranks[:, table.item_index(item), :]
    else:
        r, n, m = table.ranks.shape
        rows = table.ranks.reshape(r * n, m)
    return _w_from_rows(rows)


def scores_to_ranking(
    methods: Sequence[str],
    scores: Sequence[float],
    higher_is_better: bool = True,
) -> Tuple[Tuple[int, ...], bool]:
    """Turn raw scores into a 1..M ranking aligned with `methods`.

    Equal scores are ordered by method name so the result is always a
    proper permutation; the returned flag says whether that tie-break
    was exercised.
    """
    if len(methods) != len(scores):
        raise LengthMismatch(
            f"{len(methods)} methods but {len(scores)} scores"
        )
    vals = [float(s) for s in scores]
    key = (lambda j: (-vals[j], methods[j])) if higher_is_better else (
        lambda j: (vals[j], methods[j])
    )
    order = sorted(range(len(vals)), key=key)
    ranks = [0] * len(vals)
    for pos, j in enumerate(order):
        ranks[j] = pos + 1
    return tuple(ranks), len(set(vals)) < len(vals)


@dataclass(frozen=True)
class CorrelationReport:
    tau: float                 # pooled over concatenated (metric, human) pairs
    mean_tau: float            # mean of per-item tau
    mean_rho: float            # mean of per-item rho
    w: Optional[float]         # rater concordance, None if only one row
    n_items: int
    n_raters: int
    n_methods: int
    metric_tie_items: Tuple[str, ...]
    borda_tie_items: Tuple[str, ...]
    per_item: Tuple[Tuple[str, float, float], ...]  # (item, tau, rho)

    def to_dict(self) -> Dict:
        return {
            "tau": self.tau,
            "mean_tau": self.mean_tau,
            "mean_rho": self.mean_rho,
            "kendall_w": self.w,
            "n_items": self.n_items,
            "n_raters": self.n_raters,
            "n_methods": self.n_methods,
            "metric_tie_items": list(self.metric_tie_items),
            "borda_tie_items": list(self.borda_tie_items),
            "per_item": [
                {"item": i, "tau": t, "rho": r} for i, t, r in self.per_item
            ],
        }


def correlate(
    metric_scores: Mapping[str, Mapping[str, float]],
    higher_is_better: bool,
    human: RankingTable,
) -> CorrelationReport:
    """Agreement between a metric and aggregated human rankings.

    Per item the metric's scores and the human Borda totals are each
    turned into a ranking of the methods; tau is reported both pooled
    over all concatenated rank pairs and as a per-item mean.
    """
    if set(metric_scores.keys()) != set(human.items):
        missing = sorted(set(human.items) - set(metric_scores.keys()))
        extra = sorted(set(metric_scores.keys()) - set(human.items))
        raise ItemMismatch(
            f"item sets differ (missing from metric: {missing}, extra: {extra})"
        )
    methods = human.methods
    metric_ties = []
    borda_ties = []
    per_item = []
    pooled_metric: list = []
    pooled_human: list = []
    for item in human.items:
        row = metric_scores[item]
        if set(row.keys()) != set(methods):
            raise ItemMismatch(
                f"item {item!r}: method set {sorted(row.keys())} != {sorted(methods)}"
            )
        m_rank, m_tied = scores_to_ranking(
            methods, [row[m] for m in methods], higher_is_better
        )
        totals = borda_scores(human, item=item)
        h_rank, h_tied = scores_to_ranking(methods, totals.tolist(), True)
        if m_tied:
            metric_ties.append(item)
        if h_tied:
            borda_ties.append(item)
        per_item.append(
            (item, kendall_tau(m_rank, h_rank), spearman_rho(m_rank, h_rank))
        )
        pooled_metric.extend(m_rank)
        pooled_human.extend(h_rank)
    w: Optional[float]
    if human.n_raters * len(human.items) >= 2:
        w = kendall_w(human)
    else:
        w = None
    return CorrelationReport(
        tau=kendall_tau(pooled_metric, pooled_human),
        mean_tau=float(np.mean([t for _, t, _ in per_item])),
        mean_rho=float(np.mean([r for _, _, r in per_item])),
        w=w,
        n_items=len(human.items),
        n_raters=human.n_raters,
        n_methods=len(methods),
        metric_tie_items=tuple(metric_ties),
        borda_tie_items=tuple(borda_ties),
        per_item=tuple(per_item),
    )
