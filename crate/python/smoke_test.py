"""Build the extension module with cargo and exercise it end to end.

    python python/smoke_test.py [--release]
"""

import argparse
import json
import math
import pathlib
import shutil
import subprocess
import sys
import sysconfig
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def build(release):
    cmd = ["cargo", "build", "-p", "hopcheck-py", "--features", "extension-module"]
    if release:
        cmd.append("--release")
    subprocess.run(cmd, cwd=ROOT, check=True)
    lib = ROOT / "target" / ("release" if release else "debug") / "libhopcheck_py.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / ("hopcheck_py" + sysconfig.get_config_var("EXT_SUFFIX"))
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))


def article(i):
    places = ["Texas", "Ohio", "Georgia", "Florida"]
    p = places[i % 4]
    return {
        "id": f"a{i}",
        "claim": f"Taxes in {p} rose by {i} percent.",
        "speaker": "Jane Doe",
        "label": ["false", "half-true", "true"][i % 3],
        "sentences": [
            f"The governor of {p} signed the budget.",
            f"Officials in {p} reported a {i} percent increase.",
            "The weather was mild.",
            f"The report from {p} confirms the rise.",
        ],
        "evidence_chains": [[1, 3]],
        "split": "train",
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--release", action="store_true")
    build(ap.parse_args().release)
    import hopcheck_py as hc

    tmp = pathlib.Path(tempfile.mkdtemp())
    data = tmp / "data.jsonl"
    data.write_text("".join(json.dumps(article(i)) + "\n" for i in range(9)))

    assert hc.validate_dataset(str(data)) == []
    stats = hc.compute_stats(str(data))
    assert stats["articles"] == 9 and stats["label_counts"]["true"] == 3
    examples = hc.load_examples(str(data))
    assert len(examples) == 9 and examples[0].gold_evidence() == [1, 3]

    even = tmp / "even.jsonl"
    assert hc.apply_setting(str(data), str(even), "even", seed=42) == 0
    assert len(hc.load_examples(str(even))[0].sentences) == 4

    model = hc.Model.tiny(examples, hops=2, seed=42)
    pred = model.predict(examples[0], k=2)
    assert abs(sum(pred.label_dist) - 1) < 1e-9 and abs(sum(pred.importance) - 1) < 1e-9
    assert len(pred.evidence) == 2 and len(pred.hop_attention) == 2
    ckpt = tmp / "ckpt"
    model.save(str(ckpt))
    again = hc.Model.load(str(ckpt)).predict(examples[0], k=2)
    assert again.label_dist == pred.label_dist

    preds = [model.predict(e) for e in examples]
    report = hc.metrics_report(preds, examples, 6)
    assert report["fever_score"] <= report["label_accuracy"]
    assert hc.fever_score(preds, examples) == report["fever_score"]
    rows = hc.sweep_top_k(preds, examples, [1, 2, 3, 4])
    assert [r["k"] for r in rows] == [1, 2, 3, 4]
    assert rows[-1]["evidence_recall"] == 1.0

    nb = hc.TfidfNb.fit(examples)
    assert nb.predict(examples[0]).evidence == []
    rnd = hc.random_predict(12, seed=42)
    assert 1 <= len(rnd.evidence) <= 10

    assert hc.select_evidence([0.1, 0.5, 0.2, 0.2], 2) == [1, 2]
    f1, acc = hc.label_metrics(["false", "true", "true", "half-true"], ["false", "false", "true", "half-true"])
    assert abs(acc - 0.75) < 1e-12 and abs(f1 - 7 / 9) < 1e-12
    assert hc.evidence_metrics([[0, 3]], [[[0, 1, 2]]]) == (0.4, 0.5, 1 / 3)
    t, p = hc.welch_ttest([1, 2, 3, 4, 5], [2, 3, 4, 5, 6])
    assert abs(t + 1.0) < 1e-9 and abs(p - 0.3466) < 1e-4
    assert hc.js_divergence(["budget deficit"], ["budget deficit"]) == 0.0
    kappa = hc.fleiss_kappa([[0, 0], [0, 1], [1, 1], [1, 0]])
    alpha = hc.krippendorff_alpha([[0, 0], [0, 1], [1, 1], [1, 0]])
    assert abs(kappa) < 1e-12 and abs(alpha - 0.125) < 1e-12
    assert hc.krippendorff_alpha([[0, 0], [0, 0]]) is None
    ratios = hc.attention_ratios([([[0.5, 0.5], [0.5, 0.5]], [True, False])])
    assert all(math.isclose(ratios[k], 1.0) for k in ("evi_to_evi", "evi_to_non_evi", "non_evi_to_evi", "non_evi_to_non_evi"))

    try:
        hc.Example("x", "c", "mostly-true", ["s"], [[0]])
    except ValueError:
        pass
    else:
        raise AssertionError("unknown label accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()
