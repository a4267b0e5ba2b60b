"""
The full experiment from the command line
=========================================

``ganprng experiment`` snapshots the untrained generator, trains, generates
before and after streams, runs the suite on both, compares them and draws
both grids.  The same steps exist as separate subcommands.  This script calls
the entry point in-process with the seconds-long smoke config.
"""

import json
from pathlib import Path

from ganprng import cli

root = Path(__file__).resolve().parents[1]
out = Path("demo_output") / "smoke"

code = cli.main(["experiment", "--config", str(root / "configs" / "smoke.cfg"), "--out", str(out)])
print("exit code", code)

manifest = json.loads((out / "manifest.json").read_text())
for name, path in sorted(manifest["artifacts"].items()):
    print(f"{name:22s} {path}")

###############################################################################
# The individual steps
# --------------------

cli.main(["generate", "--checkpoint", str(out / "generator.bin"), "--count", "1",
          "--out", str(out / "one_row.txt")])
print((out / "one_row.txt").read_text())
cli.main(["visualize", "--bits", str(out / "bits_after.txt"), "--width", "50", "--height", "50",
          "--out", str(out / "small.pbm")])
