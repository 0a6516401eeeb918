"""Seeded synthetic data sets for tests, demos and the acceptance suite.

Nothing here is used by the engine itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .augmentation import l2_normalize
from .features import FeatureSet


def _unit_rows(rng, n, d):
    return l2_normalize(rng.normal(size=(n, d)))


@dataclass
class RerankPool:
    candidates: FeatureSet
    neg_pool: FeatureSet
    inliers: frozenset


def rerank_pool(seed: int, d: int = 128, n_inliers: int = 100, n_outliers: int = 200,
                n_background: int = 20, pool_size: int = 8000, separation: float = 1.5) -> RerankPool:
    """Noisy concept pool: unit-variance inlier cluster plus outliers.

    Outliers and the negative pool are drawn from the same set of
    ``n_background`` unit-variance clusters, standing in for a diversified
    image collection. Cluster centers sit at distance ``separation * sqrt(d)``
    from the origin. All vectors are l2-normalized; candidates are shuffled.
    """
    rng = np.random.default_rng(seed)
    centers = _unit_rows(rng, n_background + 1, d) * separation * np.sqrt(d)
    concept, background = centers[0], centers[1:]
    inl = concept + rng.normal(size=(n_inliers, d))
    out = background[rng.integers(n_background, size=n_outliers)] + rng.normal(size=(n_outliers, d))
    ids = [f"in{i:04d}" for i in range(n_inliers)] + [f"out{i:04d}" for i in range(n_outliers)]
    X = l2_normalize(np.vstack([inl, out]))
    perm = rng.permutation(len(ids))
    candidates = FeatureSet([ids[i] for i in perm], X[perm])
    neg = background[rng.integers(n_background, size=pool_size)] + rng.normal(size=(pool_size, d))
    neg_pool = FeatureSet([f"neg{i:05d}" for i in range(pool_size)], l2_normalize(neg))
    return RerankPool(candidates, neg_pool, frozenset(ids[:n_inliers]))


@dataclass
class OccludedInstance:
    query: np.ndarray
    refs: FeatureSet
    positives: frozenset


def occluded_instance(seed: int, d: int = 64, n_members: int = 20, n_distractors: int = 400,
                      member_noise: float = 1.0, occlusion: float = 0.5,
                      query_noise: float = 1.0) -> OccludedInstance:
    """One object instance seen through an occluded, noisy query.

    Database members are perturbed copies of the instance; the query keeps
    only a random ``1 - occlusion`` fraction of the instance's components.
    """
    rng = np.random.default_rng(seed)
    instance = _unit_rows(rng, 1, d)[0]
    members = l2_normalize(instance + member_noise * rng.normal(size=(n_members, d)) / np.sqrt(d))
    distractors = _unit_rows(rng, n_distractors, d)
    visible = rng.random(d) >= occlusion
    query = l2_normalize(np.where(visible, instance, 0.0) + query_noise * rng.normal(size=d) / np.sqrt(d))
    ids = [f"pos{i:03d}" for i in range(n_members)] + [f"neg{i:04d}" for i in range(n_distractors)]
    X = np.vstack([members, distractors])
    perm = rng.permutation(len(ids))
    refs = FeatureSet([ids[i] for i in perm], X[perm])
    return OccludedInstance(query, refs, frozenset(ids[:n_members]))


def write_retrieval_fixture(out_dir, seed: int = 0, d: int = 48, n_concepts: int = 6,
                            refs_per_concept: int = 6, queries_per_concept: int = 1,
                            h_q: int = 2, h_r: int = 3, n_train: int = 200) -> dict:
    """Write a small landmark-retrieval corpus in the engine's file formats.

    Images are non-negative "activation" vectors around a per-concept
    prototype; each patch perturbs its image vector. Files written:
    train.fvs (PCA corpus), refs.fvs / queries.fvs (whole image),
    refs_patches.fvs / queries_patches.fvs (``<image>#<patch>`` ids),
    gt.json and concepts.tsv. Returns the paths by name.
    """
    from pathlib import Path

    from .evaluation import GroundTruth, Judgment
    from .features import save_features
    from .spatial import patch_count

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    prototypes = np.abs(rng.normal(size=(n_concepts, d))) * 2.0

    def images(prefix, per_concept):
        ids, concepts, vecs = [], [], []
        for c in range(n_concepts):
            for i in range(per_concept):
                ids.append(f"{prefix}_c{c}_{i}")
                concepts.append(f"c{c}")
                vecs.append(prototypes[c] + rng.normal(size=d))
        return ids, concepts, np.maximum(np.array(vecs), 0.0)

    def patches(ids, vecs, levels):
        pids, rows = [], []
        for image_id, v in zip(ids, vecs):
            for p in range(patch_count(levels)):
                noise = 0.0 if p == 0 else 0.8 * rng.normal(size=d)
                pids.append(f"{image_id}#{p}")
                rows.append(np.maximum(v + noise, 0.0) + 1e-3)
        return FeatureSet(pids, np.array(rows))

    ref_ids, ref_concepts, ref_vecs = images("ref", refs_per_concept)
    q_ids, q_concepts, q_vecs = images("query", queries_per_concept)
    train = np.abs(rng.normal(size=(n_train, d))) + prototypes[rng.integers(n_concepts, size=n_train)] * 0.5

    paths = {name: out / fname for name, fname in [
        ("train", "train.fvs"), ("refs", "refs.fvs"), ("queries", "queries.fvs"),
        ("refs_patches", "refs_patches.fvs"), ("queries_patches", "queries_patches.fvs"),
        ("gt", "gt.json"), ("concepts", "concepts.tsv")]}
    save_features(FeatureSet([f"train{i:04d}" for i in range(n_train)], train), paths["train"])
    save_features(FeatureSet(ref_ids, ref_vecs + 1e-3), paths["refs"])
    save_features(FeatureSet(q_ids, q_vecs + 1e-3), paths["queries"])
    save_features(patches(ref_ids, ref_vecs, h_r), paths["refs_patches"])
    save_features(patches(q_ids, q_vecs, h_q), paths["queries_patches"])

    members: dict = {}
    for image_id, concept in zip(ref_ids, ref_concepts):
        members.setdefault(concept, []).append(image_id)
    gt = GroundTruth({q: Judgment(frozenset(members[c])) for q, c in zip(q_ids, q_concepts)})
    gt.save(paths["gt"])
    lines = [f"{c}\t{i}" for i, c in zip(ref_ids + q_ids, ref_concepts + q_concepts)]
    paths["concepts"].write_text("\n".join(lines) + "\n", encoding="utf-8")
    return paths
