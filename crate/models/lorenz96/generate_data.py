#!/usr/bin/env python3
"""Regenerates data/obs_sparse.csv for the Lorenz '96 example.

A `joint` run of the `ssm` tool with F and sigma2 fixed at PARAMS simulates
the model on [0, 3] in steps of 0.05. Only the first four components of y
are kept, and only at every other step; all other cells are left empty.

The tool is taken from $SSM, or from the workspace target directory.
"""

import csv
import os
import shutil
import subprocess
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
PARAMS = {"F": 10.0, "sigma2": 0.1}
N, OBSERVED = 8, 4


def find_tool():
    if os.environ.get("SSM"):
        return os.environ["SSM"]
    root = os.path.normpath(os.path.join(HERE, "..", ".."))
    for profile in ("release", "debug"):
        path = os.path.join(root, "target", profile, "ssm")
        if os.path.exists(path):
            return path
    found = shutil.which("ssm")
    if not found:
        sys.exit("cannot find the ssm binary; build it or set $SSM")
    return found


def main():
    data = os.path.join(HERE, "data")
    os.makedirs(data, exist_ok=True)
    with open(os.path.join(data, "params.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample", "time"] + list(PARAMS))
        w.writerow([0, 0.0] + [repr(v) for v in PARAMS.values()])
    subprocess.run(
        [find_tool(), "sample", "--model-file", "Lorenz96.bi", "--target", "joint",
         "--init-file", "data/params.csv", "--end-time", "3.0", "--noutputs", "60",
         "--nsamples", "1", "--seed", "42", "--output-file", "data/joint.csv"],
        cwd=HERE, check=True)
    with open(os.path.join(data, "joint.csv")) as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    names = [f"y[{k}]" for k in range(N)]
    with open(os.path.join(data, "obs_sparse.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time"] + names)
        for step, r in enumerate(rows):
            keep = step % 2 == 0
            w.writerow([r["time"]] + [r[n] if keep and k < OBSERVED else "" for k, n in enumerate(names)])


if __name__ == "__main__":
    main()
