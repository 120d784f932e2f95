"""Numerical laboratory for volume-preserving perturbations of ``A x T`` on
tori, where ``T`` is an Anosov-Katok type elliptic map: Lyapunov spectra,
centre-exponent integrals, holonomy diagnostics and phase-space surveys."""

__version__ = "0.1.0"
