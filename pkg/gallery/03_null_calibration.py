"""Null distribution of the test statistic.

Runs a small null-calibration experiment and writes the normal Q-Q data
to a two-column file that any plotting tool can read.

    python gallery/03_null_calibration.py [reps] [out.tsv]
"""

import sys

from lcr.experiments import run_null_calibration

reps = int(sys.argv[1]) if len(sys.argv) > 1 else 200
out = sys.argv[2] if len(sys.argv) > 2 else "null_qq.tsv"

rep = run_null_calibration(500, "moderate", 0.0, reps=reps, seed=1)
cell = rep.cells[0]
print(f"{cell['used']} replications: rejection rate {cell['reject_rate']:.3f} "
      f"+- {cell['reject_rate_se']:.3f}, KS p-value {cell['ks_pvalue']:.3f}")
with open(out, "w") as fh:
    fh.write(rep.to_tsv("rows"))
print(f"Q-Q data written to {out}")
