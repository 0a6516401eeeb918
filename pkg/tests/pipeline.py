"""The bundled end-to-end CLI pipeline, shared by the CLI and acceptance tests."""

from pathlib import Path

from poiretrieval.cli import run

OUTPUTS = ("pca.json", "refs_aug.fvs", "queries_aug.fvs", "refs_patches_aug.fvs",
           "queries_patches_aug.fvs", "spatial.tsv", "qe.tsv", "spatial_eval.tsv", "qe_eval.tsv")


def run_pipeline(fixture: Path, out: Path, workers: int = 1, qe_top: int = 3) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    steps = [
        ["pca-fit", "--features", fixture / "train.fvs", "--k", "32", "--out", out / "pca.json"],
    ]
    for name in ("refs", "queries", "refs_patches", "queries_patches"):
        steps.append(["augment", "--features", fixture / f"{name}.fvs", "--model", out / "pca.json",
                      "--out", out / f"{name}_aug.fvs"])
    steps += [
        ["spatial-rank", "--features", out / "refs_patches_aug.fvs",
         "--queries", out / "queries_patches_aug.fvs", "--hq", "2", "--hr", "3",
         "--out", out / "spatial.tsv", "--workers", str(workers)],
        ["qe-rank", "--features", out / "refs_aug.fvs", "--queries", out / "queries_aug.fvs",
         "--qe-top", str(qe_top), "--out", out / "qe.tsv", "--workers", str(workers)],
        ["eval", "--run", out / "spatial.tsv", "--gt", fixture / "gt.json",
         "--out", out / "spatial_eval.tsv"],
        ["eval", "--run", out / "qe.tsv", "--gt", fixture / "gt.json", "--out", out / "qe_eval.tsv"],
    ]
    for argv in steps:
        code = run([str(a) for a in argv])
        if code != 0:
            raise AssertionError(f"step {argv[0]} exited with {code}")
    return {name: (out / name).read_bytes() for name in OUTPUTS}


def report_map(text: bytes) -> float:
    last = text.decode().strip().splitlines()[-1]
    assert last.startswith("mAP\t")
    return float(last.split("\t")[1])
