"""Regenerate the stored reference sweep under tests/golden/.

The file is the robust-defense sweep on the nine-bus case with the
attacker weight estimated at zero (worst-case planning), gamma_a stepping
0:0.075:1.5 against three defender weights. Tests compare CLI output
against it byte for byte, so it is always produced with the pure-Python
kernel pinned; the compiled kernel matches only to rounding.

Run from anywhere:

    python3 tools/make_golden.py
"""

import argparse
import os
import pathlib
import subprocess
import sys

import vargame

GOLDEN = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"
CASE = pathlib.Path(vargame.__file__).parent / "cases" / "ieee9.json"


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default=str(GOLDEN / "rd_sweep_ieee9_est0.csv"))
    args = ap.parse_args()

    pathlib.Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    env = dict(os.environ, VARGAME_KERNEL="python")
    cmd = [sys.executable, "-m", "vargame.cli", "sweep", str(CASE), "rd",
           "--gamma-a", "0:0.075:1.5", "--gamma-d", "0.45,0.75,1.5",
           "--gamma-a-est", "0", "--out", args.out]
    rc = subprocess.run(cmd, env=env).returncode
    if rc == 0:
        print(f"wrote {args.out}")
    return rc


if __name__ == "__main__":
    sys.exit(main())
