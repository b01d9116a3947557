"""Estimate the thermal excited population from two e-f Rabi curves.

One curve starts from the thermal state; the other first swaps g and e.
The ratio of their amplitudes gives the Boltzmann factor.
"""

from qreset import DeviceParams, thermal_population_measurement

for pe in (0.005, 0.015, 0.05):
    res = thermal_population_measurement(DeviceParams(p_thermal_e=pe))
    print(f"true {100 * pe:.2f}%  estimate {100 * res.estimate:.3f}%  "
          f"(amplitudes {res.amplitude_thermal:.4f} / {res.amplitude_pi:.4f})")
