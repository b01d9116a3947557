"""Single-shot IQ readout: train a linear classifier and score it.

Draws calibration shots for |g> and |f>, fits the boundary, and then
estimates the population of a state with 1% leftover in |f>.
"""

import numpy as np

from qreset.experiments import measured_population, readout_demo
from qreset.readout import ReadoutModel

model = ReadoutModel.with_separation(4.34, seed=0)
demo = readout_demo(model, n_shots=2000)
print(f"assignment fidelity: {100 * demo.fidelity:.2f}%")
print(f"boundary normal {np.round(demo.boundary.normal, 3)}, offset {demo.boundary.offset:.3f}")

# readout errors put a floor under what can be measured
for pf in (0.0, 0.01, 0.05):
    est = measured_population([1 - pf, 0.0, pf], demo.boundary, model, n_shots=2000)
    print(f"true {100 * pf:4.1f}%  measured {100 * est.value:5.2f}%  (IQR {100 * est.p25:.2f} to {100 * est.p75:.2f})")
