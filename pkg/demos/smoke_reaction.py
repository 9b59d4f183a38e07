"""Short reactive run with the bundled smoke configuration, then analysis.

Uses the command-line front end exactly as a user would, into ./smoke_run.
The smoke grid is coarse and short; it shows the workflow, not converged
branching. The full configuration (fh2_li7.cfg) takes a few minutes.
"""

import json
import pathlib

from coldreact.cli import main
from coldreact.config import bundled_config

out = pathlib.Path("smoke_run")
cfg = bundled_config("fh2_li7_smoke.cfg")

main(["propagate", "--config", cfg, "--out", str(out)])
main(["analyze", str(out), "--config", cfg, "--out", str(out)])

summary = json.loads((out / "summary.json").read_text())
print(f"after step {summary['steps'][-1]}: bookkeeping error {summary['bookkeeping_error']:.1e}")
vib = json.loads((out / "vib_distribution.json").read_text())
print(f"vibrational analysis method: {vib['method']}")
for name, ch in vib["channels"].items():
    pops = ", ".join(f"{p['p']:.2e}" for p in ch["populations"])
    print(f"  {name}: {pops}")
