"""End-to-end smoke test for the Python bindings.

Runs against an installed package when available, otherwise against the raw
extension module sitting in the build tree.
"""

import math
import shutil
import sys
import tempfile
from pathlib import Path

try:
    import ecovnet
except ImportError:
    import _core as ecovnet

checks = 0


def expect(cond, message):
    global checks
    checks += 1
    if not cond:
        print(f"FAIL: {message}", file=sys.stderr)
        sys.exit(1)


def main():
    table = ecovnet.arch_table("b0")
    expect("stage" in table and "224x224" in table, "b0 table mentions stages and resolution")
    expect("mbconv6" in table and "1280" in table, "b0 table lists the block column")

    lr1 = ecovnet.cosine_lr(1)
    lr5 = ecovnet.cosine_lr(5)
    lr6 = ecovnet.cosine_lr(6)
    expect(math.isclose(lr1, 1e-4, rel_tol=1e-12), "epoch 1 starts at the base rate")
    expect(lr5 < lr1, "rate decays inside a cycle")
    expect(math.isclose(lr6, lr1, rel_tol=1e-12), "cycle restart returns to the base rate")

    weights = ecovnet.class_weights([10, 20, 40])
    expect(math.isclose(weights[0] / weights[1], 2.0, rel_tol=1e-9), "weights scale inversely")
    expect(math.isclose(weights[0] / weights[2], 4.0, rel_tol=1e-9), "weights scale inversely")

    probs = [
        [[0.8, 0.1, 0.1], [0.7, 0.2, 0.1]],
        [[0.1, 0.2, 0.7], [0.2, 0.2, 0.6]],
    ]
    expect(ecovnet.ensemble_labels(probs, 2, "soft") == [0, 2], "soft vote picks the mean argmax")
    expect(ecovnet.ensemble_labels(probs, 2, "hard") == [0, 2], "hard vote agrees on easy cases")
    try:
        ecovnet.ensemble_labels(probs, 2, "medium")
    except ValueError:
        pass
    else:
        expect(False, "unknown ensemble mode raises ValueError")

    work = Path(tempfile.mkdtemp(prefix="ecov_py_smoke_"))
    try:
        listing = ecovnet.gen_toy(str(work), n_per_class=12, size=24, seed=3)
        expect("train.csv" in listing and "test.csv" in listing, "toy generator reports manifests")

        log = ecovnet.train(
            str(work / "train.csv"),
            str(work / "run"),
            arch="micro",
            epochs=2,
            cycles=2,
            batch_size=4,
            seed=1,
        )
        expect("epoch" in log, "training log lists epochs")
        expect((work / "run" / "snapshot_1.ecov").exists(), "first snapshot written")
        expect((work / "run" / "snapshot_2.ecov").exists(), "second snapshot written")

        report = ecovnet.evaluate(str(work / "run"), str(work / "test.csv"), mode="soft")
        expect("confusion_matrix" in report, "report carries a confusion matrix")
        expect("accuracy_percent" in report, "report carries the accuracy summary")

        rows = ecovnet.predict(str(work / "run"), str(work / "test.csv"))
        expect(rows.startswith("path,pred_label,p0,p1,p2,mode"), "prediction CSV has a header")
        expect(len(rows.strip().splitlines()) == 37, "one prediction row per test sample")

        produced = ecovnet.explain(str(work / "run"), str(work / "test.csv"),
                                   str(work / "maps"), limit=2, snapshot=2)
        expect(len(produced) == 2 and all(Path(p).exists() for p in produced),
               "saliency overlays land on disk")
    finally:
        shutil.rmtree(work, ignore_errors=True)

    print(f"ok: {checks} checks passed")


if __name__ == "__main__":
    main()
