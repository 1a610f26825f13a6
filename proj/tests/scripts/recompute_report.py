"""Runs the CLI on a small synthetic config, then recomputes every metric of
report.json from results.csv without using the library."""

import csv
import json
import math
import shutil
import statistics
import subprocess
import sys
from pathlib import Path

CONFIG = """[run]
seed = 11
output_dir = out

[synth]
n_locations = 60
area_width = 90
area_height = 90
rgb_dim = 16
depth_dim = 16
latent_dim = 8
noise = 0.6

[train]
joint_dim = 16
epochs = 3
batch_size = 16
negatives = 15

[eval]
ks = 1, 2, 5, 10
"""


def recompute(rows, ks):
    ranks = [int(r["rank_of_gt"]) for r in rows]
    dists = [float(r["top1_distance_m"]) for r in rows]
    n = len(ranks)
    out = {f"r_at_{k}": 100.0 * sum(1 for x in ranks if x <= k) / n for k in ks}
    out["med_r"] = float(statistics.median(ranks))
    out["mean_r"] = sum(ranks) / n
    out["r5m_at_1"] = 100.0 * sum(1 for d in dists if d <= 5.0) / n
    out["n"] = n
    return out


def main():
    cli, work = Path(sys.argv[1]).resolve(), Path(sys.argv[2]).resolve()
    shutil.rmtree(work, ignore_errors=True)
    work.mkdir(parents=True)
    (work / "run.ini").write_text(CONFIG)
    subprocess.run([str(cli), "run", "-c", "run.ini"], cwd=work, check=True)

    with open(work / "out" / "results.csv", newline="") as f:
        reader = csv.DictReader(f)
        assert reader.fieldnames == ["query_id", "rank_of_gt", "top1_location_id", "top1_score",
                                     "top1_distance_m"], reader.fieldnames
        rows = list(reader)
    report = json.loads((work / "out" / "report.json").read_text())
    expect = recompute(rows, [1, 2, 5, 10])

    bad = []
    for key, value in expect.items():
        got = report.get(key)
        if got is None or not math.isclose(got, value, rel_tol=1e-12, abs_tol=1e-12):
            bad.append(f"{key}: report {got}, recomputed {value}")
    extra = set(report) - set(expect)
    if extra:
        bad.append(f"unexpected keys {sorted(extra)}")
    for line in bad:
        print("MISMATCH", line)
    print(f"{len(rows)} queries, {len(expect)} fields checked")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
