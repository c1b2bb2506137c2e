"""Stationary random fields driven by completely monotone memory kernels.

Subpackages cover the pipeline end to end: kernel representation and
transforms (:mod:`glefield.cm_kernel`), per-mode spectral densities and exact
variance identities (:mod:`glefield.spectral`), stationary Gaussian path
synthesis (:mod:`glefield.mode_sampler`), spatial field assembly
(:mod:`glefield.field_assembly`), and Hoelder exponent estimation
(:mod:`glefield.regularity`).  The ``glefield`` console script exposes the
same pipeline from the command line.
"""

__version__ = "0.1.0"
