"""Write the stand-in gold permittivity table shipped in src/sphereplate/data.

The table is NOT measured optical data. It is a Drude term plus three
Lorentz oscillators standing in for interband transitions, sampled on the
imaginary axis. It exercises the tabulated-material code path with gold-like
magnitudes; replace it with tabulated optical data for production work.
"""

import numpy as np
from scipy.constants import e, hbar

EV = e / hbar
WP, GAMMA = 1.37e16, 5.3e13
# (strength, resonance eV, width eV)
OSC = [(1.9, 3.0, 0.9), (2.6, 4.5, 1.6), (1.3, 8.0, 3.0)]


def eps(xi):
    out = 1.0 + WP**2 / (xi * (xi + GAMMA))
    for g, w0, gw in OSC:
        w0, gw = w0 * EV, gw * EV
        out += g * w0**2 / (w0**2 + xi**2 + gw * xi)
    return out


if __name__ == "__main__":
    xi = np.logspace(np.log10(5e13), np.log10(2e18), 121)
    with open("src/sphereplate/data/gold_standin.txt", "w") as fh:
        fh.write(f"# extrapolation=drude omega_p={WP:.6e} gamma={GAMMA:.6e}\n")
        fh.write("# stand-in table: Drude + 3 Lorentz oscillators, not measured data\n")
        fh.write("# xi_rad_s eps\n")
        for x, v in zip(xi, eps(xi)):
            fh.write(f"{x:.10e} {v:.10e}\n")
