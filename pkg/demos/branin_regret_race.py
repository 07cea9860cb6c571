"""
A short regret race on Branin
=============================

Four acquisitions run from the same seeded initial designs on the negated
Branin function.  The run is deliberately short (a few repeats, 25
iterations) so it finishes in a few minutes; the full protocol uses 100
iterations and 10 repeats.
"""

from pathlib import Path

import numpy as np

from ves_bo.harness import ExperimentConfig, emit_plot, run_suite

out = Path("demo_output") / "branin_race"
base = ExperimentConfig("branin", n_iters=25, n_repeats=3, output_dir=out)

rows = []
for kind in ("random", "log_ei", "mes", "ves_gamma"):
    res = run_suite(base.with_acquisition(kind))
    rows += res.aggregate
    print(f"{kind:10s} median final regret {np.median(res.final_regrets()):.3g} "
          f"(initial design {np.median(res.init_regrets()):.3g})")

# mean and one standard deviation of log10 regret per iteration, one line per method
print("wrote", emit_plot(rows, out / "regret.svg"))
