"""Vibronic sideband dynamics of a trapped ion with a detuned pump.

Subpackages: fock_core (special functions and coherent-state machinery),
semiclassical (time-ordered vs. integrated-exponential evolution under a
classical pump), quantized_pump (exact dressed-state solution), quasiprob
(regularized P quasiprobabilities), cli (run orchestration).
"""

import os as _os

# honored only if applied before the numerics libraries load their BLAS
_cap = _os.environ.get("IONJC_THREADS")
if _cap:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _cap)

__version__ = "0.1.0"

from .fock_core import ModelParams, TruncationPolicy  # noqa: E402,F401
