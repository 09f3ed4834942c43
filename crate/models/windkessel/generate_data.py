#!/usr/bin/env python3
"""Regenerates data/input.csv and data/obs.csv for the windkessel example.

The aortic flow F(t) is a half-sine pulse in systole and zero in diastole.
Observations of Pa every 0.04 s on [0, 2] come from a `joint` run of the
`ssm` tool with the parameters fixed at the values in PARAMS.

The tool is taken from $SSM, or from the workspace target directory.
"""

import csv
import math
import os
import shutil
import subprocess
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
PARAMS = {"R": 0.95, "C": 1.5, "Z": 0.06, "sigma2": 20.0}
PERIOD, SYSTOLE, PEAK = 0.8, 0.3, 400.0


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


def flow(t):
    phase = math.fmod(t, PERIOD)
    return PEAK * math.sin(math.pi * phase / SYSTOLE) if phase < SYSTOLE else 0.0


def main():
    data = os.path.join(HERE, "data")
    os.makedirs(data, exist_ok=True)
    with open(os.path.join(data, "input.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", "F"])
        for k in range(301):
            t = k / 100
            w.writerow([repr(t), repr(round(flow(t), 9))])
    with open(os.path.join(data, "params.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["sample", "time"] + list(PARAMS))
        w.writerow([0, 0.0] + [repr(v) for v in PARAMS.values()])
    subprocess.run(
        [find_tool(), "sample", "--model-file", "Windkessel.bi", "--target", "joint",
         "--input-file", "data/input.csv", "--init-file", "data/params.csv",
         "--end-time", "2.0", "--noutputs", "50", "--nsamples", "1", "--seed", "42",
         "--output-file", "data/joint.csv"],
        cwd=HERE, check=True)
    with open(os.path.join(data, "joint.csv")) as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    with open(os.path.join(data, "obs.csv"), "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["time", "Pa"])
        for r in rows:
            w.writerow([r["time"], r["Pa"]])


if __name__ == "__main__":
    main()
