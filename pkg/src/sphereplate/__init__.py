"""Casimir force between a sphere and a plate from the scattering formula.

Modules
-------
materials   dielectric models and the Matsubara grid
kernels     Fresnel and Mie reflection, plane-wave round-trip kernel
spectral    quadrature, block-diagonal round-trip operator, log-det and trace
engine      Matsubara sums, PFA and the derivative expansion
experiment  electrostatics, patches and oscillator noise
edgefit     harmonic model of the rotating-trench signal
stats       median method, error combination and comparison bands
cli         batch front end
"""

__version__ = "0.1.0"
