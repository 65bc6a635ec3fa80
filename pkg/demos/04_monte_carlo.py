"""
A small Monte Carlo table
=========================

Every replicate draws its own seeds from the experiment seed, so the
table is identical for any number of worker processes.
"""

import sys
import tempfile
from pathlib import Path

from agmm.harness import ExperimentConfig, emit_table, run_experiment

config = ExperimentConfig(
    name="demo",
    example_id=2,
    n=(400, 800),
    d=(2,),
    methods=("CLS", "BaseALS", "BaseAGMM", "AGMM"),
    replicates=20,
    seed=11,
)
table = run_experiment(config, workers=2)

out = Path(tempfile.mkdtemp()) / "demo.md"
emit_table(table, out, "markdown")
sys.stdout.write(out.read_text())
print("failed cells:", table.failed_cells or "none")
