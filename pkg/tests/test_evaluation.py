import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_ap
from poiretrieval.errors import DataValidationError
from poiretrieval.evaluation import (GroundTruth, Judgment, average_precision, build_same_concept_gt,
                                     evaluate, groundtruth_from_dict, mean_average_precision,
                                     parse_groundtruth, read_concept_manifest)
from poiretrieval.retrieval import RankedList


def rl(qid, ids):
    return RankedList(qid, ids, np.arange(len(ids), dtype=float))


class TestAveragePrecision:
    def test_perfect(self):
        assert average_precision(["a", "b", "x"], {"a", "b"}) == 1.0

    def test_pos_neg_pos(self):
        assert average_precision(["p1", "n", "p2"], {"p1", "p2"}) == pytest.approx(5 / 6)

    def test_junk_removed(self):
        assert average_precision(["j", "p"], {"p"}, {"j"}) == 1.0

    def test_missing_positive_counts_zero(self):
        assert average_precision(["p1"], {"p1", "p2"}) == 0.5

    def test_accepts_ranked_list(self):
        assert average_precision(rl("q", ["n", "p"]), {"p"}) == 0.5

    def test_empty_positive(self):
        with pytest.raises(DataValidationError):
            average_precision(["a"], set())

    def test_trapezoid_mode(self):
        # Oxford scorer: sum over ranks of (dr) * (p_prev + p) / 2 with p_0 = 1
        ranked = ["p1", "n", "p2"]
        expected = 0.5 * (1 + 1) / 2 + 0.5 * (0.5 + 2 / 3) / 2
        assert average_precision(ranked, {"p1", "p2"}, mode="trapezoid") == pytest.approx(expected)
        assert average_precision(["p"], {"p"}, mode="trapezoid") == 1.0

    @settings(max_examples=200, deadline=None)
    @given(st.permutations(list(range(12))), st.sets(st.integers(0, 11), min_size=1, max_size=6),
           st.sets(st.integers(0, 11), max_size=4))
    def test_properties(self, order, pos, junk):
        junk = junk - pos
        ranked = [f"i{k}" for k in order]
        P = {f"i{k}" for k in pos}
        J = {f"i{k}" for k in junk}
        ap = average_precision(ranked, P, J)
        assert 0.0 <= ap <= 1.0
        assert ap == pytest.approx(brute_ap(ranked, P, J), abs=1e-12)
        # junk neutrality: inserting junk anywhere changes nothing
        with_junk = list(ranked)
        with_junk.insert(len(with_junk) // 2, "junk-extra")
        assert average_precision(with_junk, P, J | {"junk-extra"}) == ap
        # perfect iff positives come first among non-junk
        kept = [x for x in ranked if x not in J]
        perfect = set(kept[: len(P)]) == P
        assert (ap == 1.0) == perfect
        # moving a positive up past a negative never lowers AP
        for i in range(1, len(kept)):
            if kept[i] in P and kept[i - 1] not in P:
                swapped = kept[: i - 1] + [kept[i], kept[i - 1]] + kept[i + 1:]
                assert average_precision(swapped, P) >= ap - 1e-15
                break


class TestMeanAveragePrecision:
    def test_single(self):
        rep = mean_average_precision([(rl("q", ["n", "p"]), Judgment({"p"}))])
        assert rep.map == 0.5 and rep.query_count == 1

    def test_two_queries(self):
        rep = mean_average_precision([(rl("a", ["p"]), Judgment({"p"})),
                                      (rl("b", ["n"]), Judgment({"p"}))])
        assert rep.map == 0.5
        assert rep.to_tsv() == "a\t1.000000\nb\t0.000000\nmAP\t0.500000\n"

    def test_missing_judgment(self):
        with pytest.raises(DataValidationError, match="no judgment"):
            evaluate([rl("q", ["a"])], GroundTruth({"other": Judgment({"a"})}))

    def test_random_vs_oracle(self, rng):
        runs, expected = [], []
        for qi in range(30):
            ids = [f"x{i}" for i in rng.permutation(40)]
            pos = set(rng.choice(ids, size=rng.integers(1, 8), replace=False))
            rest = [i for i in ids if i not in pos]
            junk = set(rng.choice(rest, size=rng.integers(0, 5), replace=False))
            runs.append((rl(f"q{qi}", ids), Judgment(pos, junk)))
            expected.append(brute_ap(ids, pos, junk))
        rep = mean_average_precision(runs)
        assert rep.map == pytest.approx(np.mean(expected), abs=1e-12)
        shuffled = mean_average_precision(runs[::-1])
        assert shuffled.map == pytest.approx(rep.map, abs=1e-15)

    def test_exclude_self(self):
        gt = GroundTruth({"q": Judgment({"q", "a"})}, exclude_self=True)
        assert evaluate([rl("q", ["q", "n", "a"])], gt).map == 0.5


class TestGroundTruthFile:
    def test_minimal(self, tmp_path):
        (tmp_path / "gt.json").write_text('{"exclude_self": false, "queries": [{"id": "q", "positive": ["a"], "junk": []}]}')
        gt = parse_groundtruth(tmp_path / "gt.json")
        assert gt["q"].positive == {"a"} and not gt.exclude_self

    def test_overlap_rejected(self):
        with pytest.raises(DataValidationError, match="both positive and junk"):
            groundtruth_from_dict({"queries": [{"id": "q", "positive": ["a"], "junk": ["a"]}]})

    @pytest.mark.parametrize("obj", [
        [], {"queries": {}}, {"queries": [{"positive": ["a"]}]},
        {"queries": [{"id": "q", "positive": []}]}, {"queries": [{"id": "q", "positive": [1]}]},
        {"exclude_self": "yes", "queries": []},
    ])
    def test_schema_violations(self, obj):
        with pytest.raises(DataValidationError):
            groundtruth_from_dict(obj)

    @settings(max_examples=50, deadline=None)
    @given(st.dictionaries(st.text(min_size=1, max_size=5),
                           st.tuples(st.sets(st.text(min_size=1, max_size=4), min_size=1, max_size=5),
                                     st.sets(st.text(min_size=1, max_size=4), max_size=3)),
                           min_size=1, max_size=5),
           st.booleans())
    def test_round_trip(self, data, exclude_self):
        queries = {q: Judgment(p, j - p) for q, (p, j) in data.items()}
        gt = GroundTruth(queries, exclude_self)
        back = groundtruth_from_dict(json.loads(json.dumps(gt.to_dict())))
        assert back == gt


class TestSameConceptGroundTruth:
    manifest = [("A", "a1"), ("A", "a2"), ("B", "b1"), ("B", "b2")]

    def test_positives_are_concept_members(self):
        gt = build_same_concept_gt(self.manifest, {"wiki_A": "A"})
        assert gt["wiki_A"].positive == {"a1", "a2"} and gt.exclude_self

    def test_query_ids_taken_from_manifest(self):
        gt = build_same_concept_gt(self.manifest + [("B", "qb")], ["qb"])
        assert gt["qb"].positive == {"b1", "b2"}

    def test_concept_absent(self):
        with pytest.raises(DataValidationError, match="empty positive"):
            build_same_concept_gt(self.manifest, {"wiki_C": "C"})
        with pytest.raises(DataValidationError, match="no concept"):
            build_same_concept_gt(self.manifest, ["nope"])

    def test_counts_match_manifest(self, tmp_path, rng):
        lines = []
        for c in range(6):
            for i in range(int(rng.integers(1, 9))):
                lines.append(f"c{c}\tc{c}_img{i}")
        (tmp_path / "m.tsv").write_text("\n".join(lines) + "\n")
        pairs = read_concept_manifest(tmp_path / "m.tsv")
        gt = build_same_concept_gt(pairs, {f"q{c}": f"c{c}" for c in range(6)})
        for c in range(6):
            size = sum(1 for line in lines if line.startswith(f"c{c}\t"))
            assert len(gt[f"q{c}"].positive) == size
