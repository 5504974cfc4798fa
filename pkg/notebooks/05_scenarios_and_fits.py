"""
Scenario presets, CSV output and growth fits
============================================

The harness runs named presets and writes diagnostics.csv, fit.txt and
config.resolved.  The same can be done from the shell:

    exflow run --scenario ellipse-theta1 --t-end 2 --n 12 --out out/
    exflow fit --csv out/diagnostics.csv --col r_mapped --window 0.5:2
"""

import tempfile
from pathlib import Path

from exflow.harness import SCENARIOS, Scenario, fit_column, read_csv, run_scenario

print(sorted(SCENARIOS))

out = Path(tempfile.mkdtemp())
res = run_scenario(Scenario("ellipse-theta1", {"t_end": 2.0, "patch[0].grid_n": 12}), out, fit_window=(0.5, 2.0))
print((out / "config.resolved").read_text())
print((out / "fit.txt").read_text())

cols = read_csv(out / "diagnostics.csv")
print("theta =", int(cols["theta"][0]), " alpha =", cols["alpha"][0])
print(fit_column(cols, "r_phys", 0.5, 2.0))
