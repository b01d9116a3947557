"""Qubit population at readout as the experiment repetition rate grows.

Each round flips the qubit to |e>, reads out, waits 1/R, and reads out
again.  Without reset the leftover excitation piles up at high rates; the
reset sequence removes it.  Takes about 15 s.
"""

from qreset import DeviceParams, trigger_rate_experiment
from qreset.pulses import ResetConfig

p = DeviceParams()
rates = [1.0, 5.0, 10.0, 50.0, 90.0]

bare = trigger_rate_experiment(p, rates, with_reset=False)
# realistic pulse errors: 29 kHz detuning and a 1% over-rotated shelving pulse
reset = trigger_rate_experiment(p, rates, with_reset=True, reset_cfg=ResetConfig(),
                                mismatch=29e-6, x_over_rotation=0.01)

print(" rate (kHz)  no reset   reset")
for r, a, b in zip(rates, bare.population, reset.population):
    print(f"{r:10.0f}  {100 * a:7.3f}%  {100 * b:6.3f}%")
print(f"\nthermal population: {100 * p.p_thermal_e:.1f}%")
