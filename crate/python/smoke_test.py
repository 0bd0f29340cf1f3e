"""Smoke test for the osnlink Python bindings.

Build and install first:

    pip install maturin
    pip install --no-build-isolation crates/py
    python python/smoke_test.py
"""

import itertools
import math
import subprocess
import sys
import tempfile
from pathlib import Path

import osnlink


def check_primitives():
    assert osnlink.name_similarity("kitten", "kitten") == 1.0
    assert abs(osnlink.name_similarity("kitten", "sitting") - (1 - 3 / 7)) < 1e-12
    d = osnlink.haversine_km(52.52, 13.405, 48.8566, 2.3522)
    assert abs(d - 877.5) / 877.5 < 0.005, d


def check_hungarian():
    scores = [[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]]
    got = osnlink.hungarian(scores)
    best = max(
        itertools.permutations(range(3)),
        key=lambda p: sum(scores[i][p[i]] for i in range(3)),
    )
    assert sum(scores[i][got[i]] for i in range(3)) == sum(scores[i][best[i]] for i in range(3))
    assert osnlink.hungarian([[1.0, 2.0]]) == [1]
    assert osnlink.hungarian([[1.0], [2.0]]) == [None, 0]
    try:
        osnlink.hungarian([[1.0, 2.0], [1.0]])
    except ValueError:
        pass
    else:
        raise AssertionError("ragged matrix accepted")


def check_pipeline(tmp: Path):
    n_aux, n_target, n_labels = osnlink.generate_corpora(
        str(tmp / "data"),
        preset="zero",
        seed=7,
        settings={"n_coupled": 30, "n_uncoupled_per_side": 5},
    )
    assert (n_aux, n_target, n_labels) == (35, 35, 35)

    report = osnlink.run_experiment(
        preset="zero",
        seed=7,
        eval_coupled=40,
        eval_uncoupled=5,
        lda_iterations=40,
        settings={"n_coupled": 60, "n_uncoupled_per_side": 10},
    )
    assert report["success_rate"] == 1.0, report
    assert report["precision"] == 1.0 and report["recall"] == 1.0, report
    assert len(report["weights"]) == len(report["feature_names"])


def check_model(tmp: Path):
    cli = Path(__file__).resolve().parents[1] / "target" / "debug" / "osnlink"
    if not cli.exists():
        print("skipping model check: build the CLI first (cargo build)")
        return
    data = tmp / "data"
    subprocess.run(
        [str(cli), "train", "--aux", str(data / "aux.jsonl"), "--target", str(data / "target.jsonl"),
         "--labels", str(data / "labels.csv"), "--out", str(tmp / "train")],
        check=True,
    )
    model = osnlink.Model.load(str(tmp / "train" / "model.json"))
    assert "interest" not in model.feature_names
    perfect = {f: 1.0 for f in model.feature_names}
    assert math.isclose(model.score(perfect), model.w0 + sum(model.weights), rel_tol=1e-12)
    missing = model.score({})
    assert math.isfinite(missing)
    matches = osnlink.match_corpora(
        str(data / "aux.jsonl"), str(data / "target.jsonl"), str(tmp / "train" / "model.json")
    )
    assert len(matches) == 35
    coupled = [m for m in matches if m[0][1:] == m[1][1:] and int(m[0][1:]) < 30]
    assert len(coupled) == 30


def main():
    check_primitives()
    check_hungarian()
    with tempfile.TemporaryDirectory() as d:
        tmp = Path(d)
        check_pipeline(tmp)
        check_model(tmp)
    print("osnlink", osnlink.__version__, "smoke test ok")
    return 0


if __name__ == "__main__":
    sys.exit(main())
