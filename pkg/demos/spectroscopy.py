"""Locate the f0g1 line and its Stark shift with a drive-amplitude map.

A coarse grid keeps this to a few seconds; the CLI default is finer.
"""

import numpy as np

from qreset import DeviceParams, spectroscopy_scan
from qreset.experiments import fit_spectroscopy

p = DeviceParams()
amps = [-0.3, -0.2, 0.2, 0.3]
freqs = np.linspace(2.600, 2.645, 61)
smap = spectroscopy_scan(p, amps, freqs, probe_duration=2000.0)
fit = fit_spectroscopy(smap)

for a, c, w in zip(fit.amplitudes, fit.centers, fit.widths):
    print(f"amp {a:+.2f} GHz  center {c:.5f} GHz  FWHM {1e3 * w:.2f} MHz")
q = fit.quadratic.params
print(f"\nline at zero drive: {fit.resonance_at_zero:.5f} GHz")
print(f"curvature {q['c2']:.4f} GHz per GHz^2, linear term {q['c1']:.1e}")
