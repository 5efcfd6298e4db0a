"""Quadrature rules, special functions and reproducible random streams.

Everything downstream integrates against the standard normal law through
:func:`gauss_hermite_integrate` (or the cached nodes from
:func:`normal_nodes`) and over finite or half-infinite intervals through
:func:`integrate_interval`.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError, EvaluationError, IntegrationError

__all__ = [
    "QuadratureRule",
    "DEFAULT_HERMITE",
    "DEFAULT_LEGENDRE",
    "DEFAULT_ADAPTIVE",
    "RandomStream",
    "gauss_hermite_integrate",
    "integrate_interval",
    "normal_nodes",
    "legendre_nodes",
    "normal_cdf",
    "normal_pdf",
    "log_beta",
]

_KINDS = ("gauss_hermite", "gauss_legendre", "adaptive_legendre")


@dataclass(frozen=True)
class QuadratureRule:
    """Integration rule selector.

    ``node_count`` is the number of Gauss nodes for the fixed rules and the
    per-panel Kronrod count (always 15) for ``adaptive_legendre``.
    """

    kind: str = "gauss_hermite"
    node_count: int = 64
    rel_tol: float | None = None
    abs_tol: float = 0.0
    max_subdivisions: int = 40

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown quadrature kind {self.kind!r}")
        if int(self.node_count) != self.node_count or self.node_count < 1:
            raise DomainError("node_count must be a positive integer")
        if self.kind == "adaptive_legendre":
            if self.rel_tol is None or not self.rel_tol > 0:
                raise DomainError("adaptive rule requires a positive rel_tol")
            if self.max_subdivisions < 1:
                raise DomainError("max_subdivisions must be positive")

    @classmethod
    def hermite(cls, n: int = 64) -> "QuadratureRule":
        return cls("gauss_hermite", n)

    @classmethod
    def legendre(cls, n: int = 128) -> "QuadratureRule":
        return cls("gauss_legendre", n)

    @classmethod
    def adaptive(cls, rel_tol: float = 1e-9, abs_tol: float = 0.0,
                 max_subdivisions: int = 40) -> "QuadratureRule":
        return cls("adaptive_legendre", 15, rel_tol, abs_tol, max_subdivisions)

    def nodes(self):
        """Raw (nodes, weights) of the fixed rule in its native normalisation."""
        if self.kind == "gauss_hermite":
            return _hermite_raw(self.node_count)
        if self.kind == "gauss_legendre":
            return legendre_nodes(self.node_count)
        raise DomainError("adaptive rules have no fixed node set")


DEFAULT_HERMITE = QuadratureRule.hermite(64)
DEFAULT_LEGENDRE = QuadratureRule.legendre(128)
DEFAULT_ADAPTIVE = QuadratureRule.adaptive(1e-9)


@lru_cache(maxsize=64)
def _hermite_raw(n):
    x, w = special.roots_hermite(n)
    # extreme weights underflow to zero for large n; they carry no mass
    keep = w > 0
    x, w = x[keep], w[keep]
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=64)
def normal_nodes(n: int = 64):
    """Nodes ``y`` and weights ``w`` with ``sum(w * g(y)) ~ E[g(Y)]``, ``Y ~ N(0, 1)``."""
    x, w = _hermite_raw(n)
    y = np.sqrt(2.0) * x
    wn = w / np.sqrt(np.pi)
    y.setflags(write=False)
    wn.setflags(write=False)
    return y, wn


@lru_cache(maxsize=64)
def legendre_nodes(n: int = 128):
    """Gauss-Legendre nodes (strictly increasing, inside (-1, 1)) and weights."""
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _check_finite(values, nodes):
    values = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(values)):
        bad = np.nonzero(~np.isfinite(values.reshape(len(nodes), -1)).all(axis=1))[0][0]
        raise EvaluationError(f"integrand is not finite at node {nodes[bad]!r}", node=float(nodes[bad]))
    return values


def gauss_hermite_integrate(g: Callable, rule: QuadratureRule = DEFAULT_HERMITE):
    """Approximate ``E[g(Y)]`` for a standard normal ``Y``.

    ``g`` is called once with the full node array; it may return one value
    per node or an array whose first axis runs over the nodes, in which case
    the result is vector valued.
    """
    if rule.kind != "gauss_hermite":
        raise DomainError("gauss_hermite_integrate needs a gauss_hermite rule")
    y, w = normal_nodes(rule.node_count)
    vals = _check_finite(g(y), y)
    return np.tensordot(w, vals, axes=(0, 0)) if vals.ndim > 1 else float(w @ vals)


# Gauss-Kronrod 7/15 abscissae and weights (QUADPACK qk15).
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_K15_X = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_K15_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
_G7_W = np.zeros(15)
_G7_W[[1, 3, 5]] = _WG[:3]
_G7_W[7] = _WG[3]
_G7_W[[9, 11, 13]] = _WG[2::-1]
_EPS = np.finfo(float).eps


def _gk_panels(g, lo, hi):
    """Evaluate K15 and G7 on each panel [lo_i, hi_i] with a single call to ``g``.

    Returns the Kronrod estimates and componentwise error estimates, both of
    shape (panels, components).
    """
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    pts = (mid[:, None] + half[:, None] * _K15_X[None, :]).ravel()
    vals = _check_finite(g(pts), pts)
    vals = vals.reshape(len(lo), 15, -1)
    k = np.einsum("k,pkm->pm", _K15_W, vals) * half[:, None]
    gs = np.einsum("k,pkm->pm", _G7_W, vals) * half[:, None]
    absk = np.einsum("k,pkm->pm", _K15_W, np.abs(vals)) * half[:, None]
    err = np.abs(k - gs) + 50.0 * _EPS * absk
    return k, err


def _adaptive(g, a, b, rule, panels=1):
    # every component must meet its own tolerance; panels are refined in
    # order of their worst error relative to that tolerance
    edges = np.linspace(a, b, panels + 1)
    k, err = _gk_panels(g, edges[:-1], edges[1:])
    total = k.sum(axis=0)
    total_err = err.sum(axis=0)

    def tolerance(tot):
        return np.maximum(rule.abs_tol, rule.rel_tol * np.abs(tot))

    def priority(e, tol):
        return -float(np.max(e / np.maximum(tol, 1e-300)))

    tol = tolerance(total)
    panels = [(priority(err[i], tol), -1 - i, edges[i], edges[i + 1], k[i], err[i]) for i in range(panels)]
    heapq.heapify(panels)
    splits = 0
    while True:
        tol = tolerance(total)
        if np.all(total_err <= tol):
            return total, float(np.max(total_err))
        if splits >= rule.max_subdivisions:
            worst = int(np.argmax(total_err - tol))
            raise IntegrationError(
                f"adaptive quadrature did not converge after {splits} subdivisions "
                f"(error estimate {total_err[worst]:.3e} > tolerance {tol[worst]:.3e})",
                estimate=total if total.size > 1 else float(total[0]),
                error=float(np.max(total_err)),
            )
        _, _, pa, pb, pk, pe = heapq.heappop(panels)
        pm = 0.5 * (pa + pb)
        kk, ee = _gk_panels(g, np.array([pa, pm]), np.array([pm, pb]))
        total = total - pk + kk[0] + kk[1]
        total_err = total_err - pe + ee[0] + ee[1]
        splits += 1
        heapq.heappush(panels, (priority(ee[0], tol), 2 * splits, pa, pm, kk[0], ee[0]))
        heapq.heappush(panels, (priority(ee[1], tol), 2 * splits + 1, pm, pb, kk[1], ee[1]))
        if splits % 16 == 0:
            # refresh the running sums to stop cancellation drift
            total = np.sum([p[4] for p in panels], axis=0)
            total_err = np.sum([p[5] for p in panels], axis=0)


def integrate_interval(g: Callable, a: float, b: float,
                       rule: QuadratureRule = DEFAULT_ADAPTIVE,
                       endpoint_exponent: float | None = None,
                       return_error: bool = False, panels: int = 1):
    """Integrate ``g`` over ``[a, b]``; ``b`` may be ``+inf``.

    ``g`` is vectorised: it receives an array of abscissae and returns one
    value per abscissa, or an array with the abscissae along the first axis.

    If the integrand behaves like ``(u - a) ** (endpoint_exponent - 1)`` near
    the left endpoint, passing ``endpoint_exponent`` in (0, 1) substitutes
    ``u = a + v ** (1 / endpoint_exponent)``, which removes the power-law
    singularity before quadrature.

    ``panels`` splits the (transformed) range into that many equal pieces
    before adaptive refinement starts; use it when the integrand is a peak
    narrow enough to slip between the first set of nodes.
    """
    a = float(a)
    b = float(b)
    if not a < b:
        raise DomainError(f"integrate_interval needs a < b, got [{a}, {b}]")
    if np.isinf(a):
        raise DomainError("left endpoint must be finite")

    h = g
    lo, hi = a, b
    if endpoint_exponent is not None and 0.0 < endpoint_exponent < 1.0:
        p = float(endpoint_exponent)

        def h(v, _g=g, _p=p):
            jac = v ** (1.0 / _p - 1.0) / _p
            vals = np.asarray(_g(a + v ** (1.0 / _p)), dtype=float)
            return vals * jac.reshape((-1,) + (1,) * (vals.ndim - 1))

        lo, hi = 0.0, (b - a) ** p if np.isfinite(b) else np.inf

    if np.isinf(hi):
        inner = h
        base = lo

        def h(s, _inner=inner):
            jac = 1.0 / (1.0 - s) ** 2
            vals = np.asarray(_inner(base + s / (1.0 - s)), dtype=float)
            return vals * jac.reshape((-1,) + (1,) * (vals.ndim - 1))

        lo, hi = 0.0, 1.0

    if rule.kind == "gauss_legendre":
        x, w = legendre_nodes(rule.node_count)
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        pts = mid + half * x
        vals = _check_finite(h(pts), pts)
        res = half * (np.tensordot(w, vals, axes=(0, 0)) if vals.ndim > 1 else float(w @ vals))
        return (res, float("nan")) if return_error else res
    if rule.kind != "adaptive_legendre":
        raise DomainError("integrate_interval needs a Legendre rule")

    total, err = _adaptive(h, lo, hi, rule, panels)
    res = total if total.size > 1 else float(total[0])
    return (res, float(err)) if return_error else res


def normal_cdf(x):
    """Standard normal distribution function N[x].

    Evaluated from the complementary error function on the tail side so that
    ``N[-x]`` and ``1 - N[x]`` agree to rounding; saturates to 1 for x >= 40.
    """
    arr = np.asarray(x, dtype=float)
    tail = 0.5 * special.erfc(np.abs(arr) / np.sqrt(2.0))
    out = np.where(arr < 0.0, tail, 1.0 - tail)
    out = np.where(arr >= 40.0, 1.0, out)
    return float(out) if out.ndim == 0 else out


def normal_pdf(x):
    arr = np.asarray(x, dtype=float)
    out = np.exp(-0.5 * arr * arr) / np.sqrt(2.0 * np.pi)
    return float(out) if out.ndim == 0 else out


def log_beta(a: float, b: float) -> float:
    """Natural log of the beta function B(a, b) for positive arguments."""
    if not (a > 0 and b > 0):
        raise DomainError(f"log_beta needs positive arguments, got ({a}, {b})")
    return float(special.betaln(a, b))


_MASK64 = (1 << 64) - 1


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


class RandomStream:
    """A counter-based (Philox) random stream keyed by ``(seed, stream_id)``.

    Identical keys reproduce identical draws regardless of what other streams
    are doing, so parallel Monte-Carlo work is split by handing each block of
    paths its own ``substream`` rather than sharing a stream.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        seed, stream_id = int(seed), int(stream_id)
        if not (0 <= seed <= _MASK64 and 0 <= stream_id <= _MASK64):
            raise DomainError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = seed
        self.stream_id = stream_id
        self._gen = np.random.Generator(np.random.Philox(key=seed | (stream_id << 64)))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"

    def substream(self, index: int) -> "RandomStream":
        """Independent child stream; depends only on (seed, stream_id, index)."""
        child = _splitmix64((self.stream_id * 0x9E3779B97F4A7C15 + int(index) + 1) & _MASK64)
        return RandomStream(self.seed, child)

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def normal(self, size=None):
        return self._gen.standard_normal(size)

    def uniform(self, size=None):
        return self._gen.random(size)

    def beta(self, a, b, size=None):
        return self._gen.beta(a, b, size)
