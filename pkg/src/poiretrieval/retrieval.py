"""Exhaustive Euclidean ranking and average query expansion."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .augmentation import l2_normalize
from .errors import DataValidationError
from .features import FeatureSet

DEFAULT_QE_TOP = 20


@dataclass(frozen=True)
class RankedList:
    """Ranked (item id, score) pairs for one query; rank i is entry i-1.

    ``descending`` is False for distances (best first = smallest) and True
    for classifier scores.
    """

    query_id: str
    ids: tuple
    scores: np.ndarray
    descending: bool = False

    def __post_init__(self):
        ids = tuple(self.ids)
        scores = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        if len(ids) != len(scores):
            raise DataValidationError(f"{len(ids)} ids but {len(scores)} scores")
        if len(set(ids)) != len(ids):
            raise DataValidationError(f"duplicate item ids in ranked list for {self.query_id!r}")
        scores.setflags(write=False)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "scores", scores)

    @classmethod
    def from_scores(cls, query_id, ids: Sequence[str], scores, descending=False) -> "RankedList":
        """Sort by score (ascending, or descending if asked), ties by item id."""
        scores = np.asarray(scores, dtype=np.float64)
        sign = -1.0 if descending else 1.0
        order = sorted(range(len(ids)), key=lambda i: (sign * scores[i], ids[i]))
        return cls(query_id, tuple(ids[i] for i in order), scores[order], descending)

    def __len__(self):
        return len(self.ids)

    def entries(self):
        """Yield (item id, score, 1-based rank)."""
        for i, (item_id, score) in enumerate(zip(self.ids, self.scores)):
            yield item_id, float(score), i + 1

    def top(self, k: int) -> tuple:
        return self.ids[:max(k, 0)]


def _query_matrix(q, refs: FeatureSet) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != refs.dim:
        raise DataValidationError(
            f"dimension mismatch: query has shape {q.shape}, references have dim {refs.dim}")
    return q


def rank_l2(q, refs: FeatureSet, exclude: Iterable[str] | None = None,
            query_id: str = "") -> RankedList:
    q = _query_matrix(q, refs)
    if len(refs) == 0:
        raise DataValidationError("empty reference set")
    dist = np.sqrt(np.sum((refs.matrix - q) ** 2, axis=1))
    ids = refs.ids
    if exclude:
        exclude = set(exclude)
        keep = [i for i, item_id in enumerate(ids) if item_id not in exclude]
        ids = tuple(ids[i] for i in keep)
        dist = dist[keep]
    return RankedList.from_scores(query_id, ids, dist)


def expand_query_avg(q, refs: FeatureSet, initial: RankedList, R: int) -> np.ndarray:
    """Average the query with its top-R first-pass neighbours and renormalize."""
    q = _query_matrix(q, refs)
    if R < 0 or R > len(initial):
        raise DataValidationError(f"expansion depth {R} outside [0, {len(initial)}]")
    rows = [q] + [refs.get(item_id) for item_id in initial.ids[:R]]
    mean = np.mean(rows, axis=0)
    return l2_normalize(mean)


def rank_with_qe(q, refs: FeatureSet, R: int = DEFAULT_QE_TOP,
                 exclude: Iterable[str] | None = None, query_id: str = "") -> RankedList:
    exclude = set(exclude) if exclude else None
    first = rank_l2(q, refs, exclude, query_id)
    if R == 0:
        return first
    expanded = expand_query_avg(q, refs, first, min(R, len(first)))
    return rank_l2(expanded, refs, exclude, query_id)


def map_queries(fn, items: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to every item, optionally on a thread pool; output keeps input order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def rank_all(queries: FeatureSet, refs: FeatureSet, qe_top: int = 0,
             exclude_self: bool = False, workers: int = 1) -> list:
    def one(query_id):
        exclude = {query_id} if exclude_self else None
        return rank_with_qe(queries.get(query_id), refs, qe_top, exclude, query_id)

    return map_queries(one, list(queries.ids), workers)


def write_ranked_lists(lists: Iterable[RankedList], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ranked in lists:
            for item_id, score, rank in ranked.entries():
                fh.write(f"{ranked.query_id}\t{rank}\t{item_id}\t{score:.9g}\n")


def read_ranked_lists(path) -> list:
    """Parse a ``query-id rank item-id score`` TSV; queries keep file order."""
    groups: dict = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise DataValidationError(f"line {lineno}: expected 4 tab-separated fields", record=lineno)
        qid, rank, item_id, score = fields
        try:
            groups.setdefault(qid, []).append((int(rank), item_id, float(score)))
        except ValueError as exc:
            raise DataValidationError(f"line {lineno}: {exc}", record=lineno) from None
    lists = []
    for qid, rows in groups.items():
        rows.sort()
        if [r[0] for r in rows] != list(range(1, len(rows) + 1)):
            raise DataValidationError(f"ranks for query {qid!r} are not contiguous from 1")
        scores = [r[2] for r in rows]
        descending = len(scores) > 1 and scores[0] > scores[-1]
        lists.append(RankedList(qid, [r[1] for r in rows], scores, descending))
    return lists
