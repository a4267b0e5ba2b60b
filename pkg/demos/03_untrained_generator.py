"""
What an untrained generator emits
=================================

The generator maps ``(seed, offset)`` to eight 16-bit values.  Fixing the seed
and counting the offset up gives a stream.  Before training that stream has
obvious structure, which the grid picture and the byte entropy both show.
"""

from pathlib import Path

import numpy as np

from ganprng import bitstream as bs
from ganprng import gantrain as gt
from ganprng import models
from ganprng import statcheck as sc

out = Path("demo_output")
out.mkdir(exist_ok=True)

gen = models.GeneratorNet(seed=0)
print("generator parameters:", gen.parameter_count())

###############################################################################
# The evaluation stream
# ---------------------

dataset = gt.build_eval_dataset(seed=10, count=7813)
print("first rows:", dataset.rows(0, 3).tolist())
outputs = np.vstack(list(gt.emit_evaluation_stream(gen, dataset)))
print("first outputs:", outputs[0].round(1))

stream = bs.to_bits(bs.quantize(outputs))[:1_000_000]
print("bits:", stream.bit_count, " byte entropy:", round(bs.byte_entropy(stream), 3))

###############################################################################
# A 200 x 200 picture of the first 40,000 bits
# ---------------------------------------------

bs.visualize_grid(stream, 200, 200, out / "untrained.pbm")
print("wrote", out / "untrained.pbm")

###############################################################################
# Test results
# ------------

report = sc.run_suite(stream, sc.SuiteConfig.desk())
print(report.to_text())
print("failed families:", report.failed_families())
