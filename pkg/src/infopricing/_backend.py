"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``INFOPRICING_PURE=1`` in the environment to force the numpy fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if not os.environ.get("INFOPRICING_PURE"):
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        kernels = _ckernels
        BACKEND = "cython"


def whk_poly_eval(*args):
    return kernels.whk_poly_eval(*args)


def bridge_fill(z, grid, horizon, start_t, start_val):
    return kernels.bridge_fill(z, grid, float(horizon), float(start_t), start_val)


def digital_spreads(xi, times, T, sigma, x0, x1, log_odds, cap):
    return kernels.digital_spreads(xi, times, float(T), float(sigma), float(x0), float(x1),
                                   float(log_odds), float(cap))
