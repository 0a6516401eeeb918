"""Ground truth handling and (mean) average precision."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataValidationError

AP_MODES = ("noninterp", "trapezoid")


@dataclass(frozen=True)
class Judgment:
    positive: frozenset
    junk: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "positive", frozenset(self.positive))
        object.__setattr__(self, "junk", frozenset(self.junk))
        if not self.positive:
            raise DataValidationError("empty positive set")
        overlap = self.positive & self.junk
        if overlap:
            raise DataValidationError(
                f"items both positive and junk: {sorted(overlap)[:5]}")


@dataclass(frozen=True)
class GroundTruth:
    queries: Mapping[str, Judgment]
    exclude_self: bool = False

    def __getitem__(self, query_id) -> Judgment:
        return self.queries[query_id]

    def __contains__(self, query_id):
        return query_id in self.queries

    def __len__(self):
        return len(self.queries)

    def judgment_for(self, query_id: str) -> Judgment:
        """Judgment as seen by the scorer; with exclude_self the query is junk."""
        try:
            j = self.queries[query_id]
        except KeyError:
            raise DataValidationError(f"no judgment for query {query_id!r}") from None
        if not self.exclude_self:
            return j
        return Judgment(j.positive - {query_id}, j.junk | {query_id})

    def to_dict(self) -> dict:
        return {
            "exclude_self": self.exclude_self,
            "queries": [
                {"id": qid, "positive": sorted(j.positive), "junk": sorted(j.junk)}
                for qid, j in self.queries.items()
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n", encoding="utf-8")


@dataclass
class EvalReport:
    ap: dict = field(default_factory=dict)   # query id -> AP, in evaluation order
    map: float = 0.0

    @property
    def query_count(self) -> int:
        return len(self.ap)

    def to_tsv(self) -> str:
        lines = [f"{qid}\t{ap:.6f}" for qid, ap in self.ap.items()]
        lines.append(f"mAP\t{self.map:.6f}")
        return "\n".join(lines) + "\n"


def _ranked_ids(ranked) -> Sequence[str]:
    return getattr(ranked, "ids", ranked)


def average_precision(ranked, positive: Iterable[str], junk: Iterable[str] = (),
                      mode: str = "noninterp") -> float:
    """AP of one ranked list after dropping junk items.

    ``noninterp`` averages precision at each positive hit; positives that
    never appear contribute 0. ``trapezoid`` integrates the precision/recall
    curve with the trapezoid rule, as the original Oxford buildings scorer.
    """
    positive = set(positive)
    junk = set(junk)
    if not positive:
        raise DataValidationError("empty positive set")
    if mode not in AP_MODES:
        raise ValueError(f"unknown AP mode {mode!r}")
    hits = 0
    ap = 0.0
    rank = 0
    old_recall, old_precision = 0.0, 1.0
    for item_id in _ranked_ids(ranked):
        if item_id in junk:
            continue
        rank += 1
        is_hit = item_id in positive
        if is_hit:
            hits += 1
        if mode == "noninterp":
            if is_hit:
                ap += hits / rank
        else:
            recall = hits / len(positive)
            precision = hits / rank
            ap += (recall - old_recall) * (old_precision + precision) / 2.0
            old_recall, old_precision = recall, precision
    return ap / len(positive) if mode == "noninterp" else ap


def mean_average_precision(runs, mode: str = "noninterp") -> EvalReport:
    """Average AP over ``(ranked_list, judgment)`` pairs.

    Ranked lists without a ``query_id`` are keyed by their position.
    """
    report = EvalReport()
    for i, (ranked, judgment) in enumerate(runs):
        if judgment is None:
            raise DataValidationError(f"no judgment for query {getattr(ranked, 'query_id', i)!r}")
        qid = getattr(ranked, "query_id", str(i))
        if qid in report.ap:
            raise DataValidationError(f"query {qid!r} evaluated twice")
        report.ap[qid] = average_precision(ranked, judgment.positive, judgment.junk, mode)
    if not report.ap:
        raise DataValidationError("no queries to evaluate")
    report.map = sum(report.ap.values()) / len(report.ap)
    return report


def evaluate(lists: Iterable, gt: GroundTruth, mode: str = "noninterp") -> EvalReport:
    return mean_average_precision(((r, gt.judgment_for(r.query_id)) for r in lists), mode)


def _str_list(obj, what, qid):
    if not isinstance(obj, list) or not all(isinstance(x, str) and x for x in obj):
        raise DataValidationError(f"query {qid!r}: {what} must be a list of non-empty strings")
    return obj


def groundtruth_from_dict(obj) -> GroundTruth:
    if not isinstance(obj, dict) or not isinstance(obj.get("queries"), list):
        raise DataValidationError("ground truth must be an object with a 'queries' list")
    exclude_self = obj.get("exclude_self", False)
    if not isinstance(exclude_self, bool):
        raise DataValidationError("'exclude_self' must be a boolean")
    queries = {}
    for i, q in enumerate(obj["queries"]):
        if not isinstance(q, dict) or not isinstance(q.get("id"), str) or not q["id"]:
            raise DataValidationError("query entry needs a non-empty string 'id'", record=i + 1)
        qid = q["id"]
        if qid in queries:
            raise DataValidationError(f"duplicate query id {qid!r}", record=i + 1)
        positive = _str_list(q.get("positive"), "'positive'", qid)
        junk = _str_list(q.get("junk", []), "'junk'", qid)
        try:
            queries[qid] = Judgment(frozenset(positive), frozenset(junk))
        except DataValidationError as exc:
            raise DataValidationError(f"query {qid!r}: {exc}", record=i + 1) from None
    return GroundTruth(queries, exclude_self)


def parse_groundtruth(path) -> GroundTruth:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"ground truth is not valid JSON: {exc}") from None
    return groundtruth_from_dict(obj)


def read_concept_manifest(path) -> list:
    """``concept-id<TAB>item-id`` lines -> list of (concept, item) pairs.

    Extra columns (e.g. a reranking label) are ignored.
    """
    pairs = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) < 2 or not fields[0] or not fields[1]:
            raise DataValidationError(f"line {lineno}: expected concept-id and item-id", record=lineno)
        pairs.append((fields[0], fields[1]))
    return pairs


def build_same_concept_gt(manifest: Iterable, queries) -> GroundTruth:
    """Ground truth where an item is relevant iff it shares the query's concept.

    ``manifest`` yields (concept, item) pairs. ``queries`` is either a
    mapping query id -> concept, or a sequence of ids that appear in the
    manifest; in the latter case those ids are taken out of the collection.
    """
    pairs = list(manifest)
    concept_of = {}
    for concept, item in pairs:
        if concept_of.setdefault(item, concept) != concept:
            raise DataValidationError(f"item {item!r} belongs to two concepts")
    if isinstance(queries, Mapping):
        query_concepts = dict(queries)
    else:
        query_concepts = {}
        for qid in queries:
            if qid not in concept_of:
                raise DataValidationError(f"query {qid!r} has no concept in the manifest")
            query_concepts[qid] = concept_of[qid]
    members: dict = {}
    for concept, item in pairs:
        if item not in query_concepts:
            members.setdefault(concept, []).append(item)
    out = {}
    for qid, concept in query_concepts.items():
        positives = members.get(concept)
        if not positives:
            raise DataValidationError(
                f"query {qid!r}: concept {concept!r} has no collection items (empty positive set)")
        out[qid] = Judgment(frozenset(positives))
    return GroundTruth(out, exclude_self=True)
