import os
import subprocess
import sys

import numpy as np
import pytest

from infopricing import _backend, _pykernels
from infopricing.numerics import legendre_nodes, normal_nodes

try:
    from infopricing import _ckernels
except ImportError:  # extension not built
    _ckernels = None

needs_ext = pytest.mark.skipif(_ckernels is None, reason="compiled extension not built")


def _whk_args(rng, n=300):
    x = rng.normal(size=n) * 2
    tau = rng.uniform(0.1, 5.0, n)
    lx, lw = legendre_nodes(32)
    s = 0.5 * (lx + 1)
    W = tau[:, None] * 0.5 * lw[None, :] * np.exp(-0.3 * tau[:, None] * s[None, :])
    hz, hw = normal_nodes(3)
    return x, tau, np.ascontiguousarray(W), s, hz, hw, np.array([1.0, 0.5, 1.0, 0.0, 0.2])


@needs_ext
def test_whk_poly_backends_agree(rng):
    args = _whk_args(rng)
    a = _pykernels.whk_poly_eval(*args)
    b = _ckernels.whk_poly_eval(*args)
    assert np.allclose(a, b, rtol=1e-13, atol=0)


@needs_ext
def test_bridge_fill_backends_agree(rng):
    z = rng.normal(size=(50, 20))
    grid = np.linspace(0.1, 1.9, 20)
    start = rng.normal(size=50)
    a = _pykernels.bridge_fill(z, grid, 2.0, 0.0, 0.0)
    b = _ckernels.bridge_fill(z, grid, 2.0, 0.0, 0.0)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-15)
    a = _pykernels.bridge_fill(z, grid + 0.05, 2.5, 0.1, start)
    b = _ckernels.bridge_fill(z, grid + 0.05, 2.5, 0.1, start)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-15)


@needs_ext
def test_digital_spreads_backends_agree(rng):
    xi = rng.normal(size=(20, 100))
    times = np.linspace(0, 2, 101)[:-1]
    for sigma in (0.04, 1.0, 5.0):
        s1, c1 = _pykernels.digital_spreads(xi, times, 2.0, sigma, 0.0, 1.0, np.log(4.0), 10.0)
        s2, c2 = _ckernels.digital_spreads(xi, times, 2.0, sigma, 0.0, 1.0, np.log(4.0), 10.0)
        assert np.allclose(s1, s2, rtol=1e-13, atol=1e-15)
        assert np.array_equal(np.asarray(c1), np.asarray(c2))


def test_backend_selection_env():
    code = "import infopricing._backend as b; print(b.BACKEND)"
    env = dict(os.environ, INFOPRICING_PURE="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    assert _backend.BACKEND in ("cython", "python")
