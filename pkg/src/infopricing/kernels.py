"""Information-sensitive pricing kernels.

A kernel is a positive function ``f(t, x_1[, x_2])`` of time and the current
values of one or two information processes, each a Brownian bridge to its own
horizon under the bridge measure. Kernels built by the weighted-heat-kernel
method,

    f(t, x) = int_0^{U - t} E[F(xi_{t+u}) | xi_t = x] w(t, u) du,

are supermartingales whenever ``w(t, u - s) <= w(t - s, u)``; the checks in
this module verify that numerically for any kernel.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import _backend
from .errors import ConstructionError, DomainError
from .numerics import (
    QuadratureRule,
    RandomStream,
    legendre_nodes,
    normal_cdf,
    normal_nodes,
    normal_pdf,
)

__all__ = [
    "WeightFunction",
    "KernelFunction",
    "Polynomial",
    "TabulatedPayoff",
    "build_whk_kernel",
    "deterministic_kernel",
    "whk_quadratic_kernel",
    "whk_tabulated_kernel",
    "product_kernel",
    "catalogue_kernel",
    "CATALOGUE",
    "SupermartingaleReport",
    "DifferentialReport",
    "check_supermartingale",
    "check_differential_inequality",
    "sample_triples",
]


class WeightFunction:
    """A positive weight ``w(t, u)`` satisfying ``w(t, u - s) <= w(t - s, u)``.

    The inequality is probed at ``n_probe`` random points with ``t, u`` in
    ``[0, horizon]`` at construction.
    """

    def __init__(self, func: Callable, name: str = "custom", horizon: float = 10.0,
                 n_probe: int = 2000, seed: int = 0, params: dict | None = None):
        self.func = func
        self.name = name
        self.params = dict(params or {})
        rng = np.random.default_rng(seed)
        t = rng.uniform(0.0, horizon, n_probe)
        u = rng.uniform(0.0, horizon, n_probe)
        s = rng.uniform(0.0, 1.0, n_probe) * np.minimum(t, u)
        lhs = np.asarray(func(t, u - s), dtype=float)
        rhs = np.asarray(func(t - s, u), dtype=float)
        bad = lhs > rhs * (1.0 + 1e-12) + 1e-300
        if np.any(~np.isfinite(lhs)) or np.any(~(lhs > 0)):
            raise ConstructionError("weight function must be positive and finite")
        if np.any(bad):
            i = int(np.argmax(lhs - rhs))
            raise ConstructionError(
                f"weight violates w(t, u - s) <= w(t - s, u) at "
                f"(s, t, u) = ({s[i]:.6g}, {t[i]:.6g}, {u[i]:.6g})")

    def __call__(self, t, u):
        return self.func(t, u)

    @classmethod
    def exponential(cls, lam: float) -> "WeightFunction":
        """``w(t, u) = exp(-lam (t + u))``; satisfies the inequality with equality."""
        return cls(lambda t, u: np.exp(-lam * (np.asarray(t) + np.asarray(u))),
                   name="exponential", params={"lam": lam})

    @classmethod
    def unit(cls) -> "WeightFunction":
        return cls(lambda t, u: np.ones(np.broadcast(np.asarray(t), np.asarray(u)).shape),
                   name="unit")


class KernelFunction:
    """A positive kernel ``f(t, x_1, ..., x_k)``, vectorised over all arguments.

    Parameters
    ----------
    func : callable
        ``func(t, *x)`` with ``t`` and each ``x`` broadcastable arrays.
    horizons : sequence of float
        The horizon each information argument is bridged to. An empty
        sequence marks a kernel that depends on time only.
    provenance : {"weighted_heat_kernel", "closed_form"}
    """

    def __init__(self, func: Callable, horizons: Sequence[float] = (), *,
                 provenance: str = "closed_form", name: str = "custom",
                 params: dict | None = None, check: bool = True,
                 components: tuple = ()):
        if provenance not in ("weighted_heat_kernel", "closed_form"):
            raise ConstructionError(f"unknown provenance {provenance!r}")
        self.func = func
        self.horizons = tuple(float(h) for h in horizons)
        self.provenance = provenance
        self.name = name
        self.params = dict(params or {})
        self.components = components
        if any(not h > 0 for h in self.horizons):
            raise ConstructionError("kernel horizons must be positive")
        if check:
            self._probe()

    @property
    def arity(self) -> int:
        return len(self.horizons)

    @property
    def time_only(self) -> bool:
        return not self.horizons

    def __repr__(self):
        return f"KernelFunction(name={self.name!r}, horizons={self.horizons}, provenance={self.provenance!r})"

    def __call__(self, t, *x):
        if len(x) != self.arity:
            if self.time_only:
                # information arguments are ignored by time-only kernels
                shape = np.broadcast(np.asarray(t), *[np.asarray(v) for v in x]).shape
                return np.broadcast_to(np.asarray(self.func(t), dtype=float), shape) * 1.0
            raise DomainError(f"kernel {self.name!r} takes {self.arity} information arguments, got {len(x)}")
        if self.time_only:
            return np.asarray(self.func(t), dtype=float)
        return np.asarray(self.func(t, *x), dtype=float)

    def _probe(self):
        """Positivity and finiteness on a 41 x 41 (t, x) grid for every argument."""
        horizon = min(self.horizons) if self.horizons else 10.0
        t = np.linspace(0.0, horizon, 42)[:-1]
        if self.time_only:
            vals = self(t)
            pts = [(ti,) for ti in t]
        else:
            vals, pts = [], []
            for k, U in enumerate(self.horizons):
                width = 10.0 * 0.5 * math.sqrt(U)
                xs = np.linspace(-width, width, 41)
                tt, xx = np.meshgrid(t, xs, indexing="ij")
                args = [np.zeros_like(xx) for _ in self.horizons]
                args[k] = xx
                vals.append(self(tt, *args).ravel())
                pts.extend((a, b) for a, b in zip(tt.ravel(), xx.ravel()))
            vals = np.concatenate(vals)
        vals = np.asarray(vals, dtype=float)
        bad = ~(np.isfinite(vals) & (vals > 0))
        if np.any(bad):
            i = int(np.argmax(bad))
            raise ConstructionError(f"kernel {self.name!r} is not positive and finite at {pts[i]}")


@dataclass(frozen=True)
class Polynomial:
    """``F(y) = sum_p coeffs[p] y**p`` (ascending coefficients)."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if not self.coeffs:
            raise ConstructionError("polynomial needs at least one coefficient")

    def __call__(self, y):
        return np.polynomial.polynomial.polyval(np.asarray(y, dtype=float), self.coeffs)

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1


class TabulatedPayoff:
    """Piecewise-linear ``F`` through the knots ``(x, values)``, flat outside them.

    Its expectation under any Gaussian law is available in closed form.
    """

    def __init__(self, x: Sequence[float], values: Sequence[float]):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConstructionError("tabulated payoff needs increasing knots and matching values")
        self.x = x
        self.values = values
        slopes = np.diff(values) / np.diff(x)
        self._kinks = np.diff(np.concatenate([[0.0], slopes, [0.0]]))

    def __call__(self, y):
        return np.interp(y, self.x, self.values)

    def gaussian_expectation(self, mean, sd):
        """``E[F(mean + sd Y)]`` for ``Y ~ N(0, 1)``, elementwise over ``mean`` and ``sd``."""
        mean = np.asarray(mean, dtype=float)
        sd = np.asarray(sd, dtype=float)
        out = np.full(np.broadcast(mean, sd).shape, self.values[0])
        safe = np.where(sd > 0, sd, 1.0)
        for xk, dk in zip(self.x, self._kinks):
            gap = mean - xk
            e = gap / safe
            call = np.where(sd > 0, gap * normal_cdf(e) + sd * normal_pdf(e), np.maximum(gap, 0.0))
            out = out + dk * call
        return out


def _whk_python(F, expect, t, x, U, w, s_nodes, s_weights, hermite):
    t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
    shape = x.shape
    t, x = t.ravel(), x.ravel()
    tau = U - t
    out = np.empty(x.size)
    frac = s_nodes * (1.0 - s_nodes)
    hz, hw = hermite
    for lo in range(0, x.size, 2048):
        hi = min(lo + 2048, x.size)
        tt, xx, ta = t[lo:hi, None], x[lo:hi, None], tau[lo:hi, None]
        W = ta * s_weights[None, :] * w(tt, ta * s_nodes[None, :])
        mean = (1.0 - s_nodes)[None, :] * xx
        sd = np.sqrt(ta * frac[None, :])
        if expect is not None:
            inner = expect(mean, sd)
        else:
            y = mean[:, :, None] + sd[:, :, None] * hz[None, None, :]
            inner = F(y) @ hw
        out[lo:hi] = np.einsum("ij,ij->i", W, inner)
    return out.reshape(shape)


def build_whk_kernel(F, w: WeightFunction, U: float, rule: QuadratureRule | None = None, *,
                     expectation_rule: QuadratureRule | None = None, name: str = "whk",
                     params: dict | None = None, check: bool = True) -> KernelFunction:
    """Weighted-heat-kernel generated kernel.

    ``f(t, x) = (U - t) int_0^1 E[F((1 - s) x + sqrt((U - t) s (1 - s)) Y)] w(t, (U - t) s) ds``
    with the ``s``-integral done by Gauss-Legendre (``rule``, default 32
    nodes) and the Gaussian expectation done exactly for :class:`Polynomial`
    and :class:`TabulatedPayoff` payoffs, or by Gauss-Hermite
    (``expectation_rule``, default 32 nodes) otherwise.

    ``F`` must be nonnegative and not identically zero; the resulting kernel
    is strictly positive for ``t < U``. At construction the payoff is probed
    for negative values and the kernel is spot-checked for the
    supermartingale property at 100 random points.
    """
    if not U > 0:
        raise DomainError("horizon U must be positive")
    rule = rule or QuadratureRule.legendre(32)
    if rule.kind != "gauss_legendre":
        raise DomainError("the u-integral needs a gauss_legendre rule")
    lx, lw = legendre_nodes(rule.node_count)
    s_nodes = 0.5 * (lx + 1.0)
    s_weights = 0.5 * lw

    probe = np.linspace(-5.0 * math.sqrt(U), 5.0 * math.sqrt(U), 201)
    Fp = np.asarray(F(probe), dtype=float)
    if np.any(~np.isfinite(Fp)) or np.any(Fp < 0) or not np.any(Fp > 0):
        i = int(np.argmax(~(np.isfinite(Fp) & (Fp >= 0))))
        raise ConstructionError(f"payoff F must be nonnegative and not identically zero; F({probe[i]:.4g}) = {Fp[i]!r}")

    if isinstance(F, Polynomial):
        nh = max(2, (F.degree + 2) // 2)
        hz, hw = normal_nodes(nh)
        coeffs = np.array(F.coeffs)

        def func(t, x):
            t, x = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(x, dtype=float))
            shape = x.shape
            tf, xf = t.ravel(), x.ravel()
            tau = U - tf
            W = tau[:, None] * s_weights[None, :] * w(tf[:, None], tau[:, None] * s_nodes[None, :])
            return _backend.whk_poly_eval(xf, tau, np.ascontiguousarray(W), s_nodes, hz, hw, coeffs).reshape(shape)
    else:
        expect = F.gaussian_expectation if isinstance(F, TabulatedPayoff) else None
        hermite = normal_nodes((expectation_rule or QuadratureRule.hermite(32)).node_count)

        def func(t, x):
            return _whk_python(F, expect, t, x, U, w, s_nodes, s_weights, hermite)

    meta = {"U": U, "weight": w.name, **w.params, **(params or {})}
    kernel = KernelFunction(func, (U,), provenance="weighted_heat_kernel", name=name,
                            params=meta, check=check)
    if check:
        report = check_supermartingale(kernel, sample_triples((U,), 100, RandomStream(0x5EED)))
        if report.max_violation > 1e-8:
            raise ConstructionError(
                f"kernel fails the supermartingale spot check by {report.max_violation:.3e} at {report.worst_point}")
    return kernel


def deterministic_kernel(rho: float, horizon: float | None = None) -> KernelFunction:
    """``f(t) = exp(-rho t)``: deterministic discounting at rate ``rho``.

    With ``horizon`` given, the kernel formally takes one information
    argument bridged to that horizon and ignores it.
    """
    if horizon is None:
        return KernelFunction(lambda t: np.exp(-rho * np.asarray(t, dtype=float)), (),
                              name="deterministic", params={"rho": rho})
    return KernelFunction(
        lambda t, x: np.exp(-rho * np.asarray(t, dtype=float)) * np.ones_like(np.asarray(x, dtype=float)),
        (horizon,), name="deterministic", params={"rho": rho, "U": horizon})


def whk_quadratic_kernel(c: float, lam: float, U: float, legendre: int = 32) -> KernelFunction:
    """Catalogue kernel with ``F(x) = x^2 + c`` and ``w(t, u) = exp(-lam (t + u))``."""
    if c < 0:
        raise ConstructionError("c must be nonnegative")
    return build_whk_kernel(Polynomial((c, 0.0, 1.0)), WeightFunction.exponential(lam), U,
                            QuadratureRule.legendre(legendre), name="whk_quadratic",
                            params={"c": c})


def whk_tabulated_kernel(x: Sequence[float], values: Sequence[float], lam: float, U: float,
                         legendre: int = 32) -> KernelFunction:
    """Catalogue kernel with a piecewise-linear tabulated ``F`` and exponential weight."""
    F = TabulatedPayoff(x, values)
    return build_whk_kernel(F, WeightFunction.exponential(lam), U, QuadratureRule.legendre(legendre),
                            name="whk_tabulated",
                            params={"x": list(map(float, x)), "values": list(map(float, values))})


def product_kernel(first: KernelFunction, second: KernelFunction) -> KernelFunction:
    """``f(t, x, y) = first(t, x) * second(t, y)`` for independent information arguments."""
    n1 = first.arity

    def func(t, *x):
        return first(t, *x[:n1]) * second(t, *x[n1:])

    prov = ("weighted_heat_kernel"
            if first.provenance == second.provenance == "weighted_heat_kernel" else "closed_form")
    return KernelFunction(func, first.horizons + second.horizons, provenance=prov,
                          name=f"product({first.name},{second.name})", check=False,
                          components=(first, second))


CATALOGUE = {
    "deterministic": deterministic_kernel,
    "whk_quadratic": whk_quadratic_kernel,
    "whk_tabulated": whk_tabulated_kernel,
}


def catalogue_kernel(name: str, **params) -> KernelFunction:
    """Build a catalogue kernel by name; ``product`` takes ``factors=[spec, spec]``."""
    if name == "product":
        specs = params.pop("factors")
        if params or len(specs) != 2:
            raise ConstructionError("product kernel takes exactly two factor specs")
        return product_kernel(*(catalogue_kernel(**dict(s)) for s in specs))
    if name not in CATALOGUE:
        raise ConstructionError(f"unknown catalogue kernel {name!r}; known: {sorted(CATALOGUE) + ['product']}")
    return CATALOGUE[name](**params)


@dataclass(frozen=True)
class SupermartingaleReport:
    """Largest positive value of ``E[f(t, xi_t) | xi_s = x] - f(s, x)`` over the probed points."""

    max_violation: float
    worst_point: tuple
    n_points: int


def sample_triples(horizons: Sequence[float], n: int, stream: RandomStream):
    """Random ``(s, t, x)`` points with ``0 <= s < t < min(horizons)``.

    ``x`` has one column per horizon, drawn from the bridge marginal at ``s``
    inflated threefold so that tails are visited.
    """
    horizons = tuple(horizons)
    H = min(horizons) if horizons else 10.0
    g = stream.generator
    a = g.uniform(0.0, H, n)
    b = g.uniform(0.0, H, n)
    s, t = np.minimum(a, b), np.maximum(a, b)
    if horizons:
        sd = np.sqrt(np.stack([s * (U - s) / U for U in horizons], axis=1))
        x = 3.0 * sd * g.standard_normal((n, len(horizons)))
    else:
        x = np.zeros((n, 0))
    return s, t, x


def check_supermartingale(f: KernelFunction, triples, rule: QuadratureRule | None = None) -> SupermartingaleReport:
    """Compare ``E^B[f(t, xi_t) | xi_s = x]`` with ``f(s, x)`` at each triple.

    The conditional expectation uses (tensor) Gauss-Hermite quadrature over
    the exact bridge transition of every information argument.
    """
    rule = rule or QuadratureRule.hermite(64 if f.arity <= 1 else 32)
    s, t, x = (np.asarray(v, dtype=float) for v in triples)
    if x.ndim == 1:
        x = x[:, None]
    n = s.size
    if np.any(s < 0) or np.any(t <= s) or (f.horizons and np.any(t >= min(f.horizons))):
        raise DomainError("triples need 0 <= s < t < horizon")
    y, wy = normal_nodes(rule.node_count)
    if f.time_only:
        excess = f(t) - f(s)
    else:
        grids = np.meshgrid(*([y] * f.arity), indexing="ij")
        weights = np.ones_like(grids[0])
        for k in range(f.arity):
            weights = weights * np.meshgrid(*([wy] * f.arity), indexing="ij")[k]
        nodes = [g.ravel() for g in grids]
        weights = weights.ravel()
        excess = np.empty(n)
        for i in range(n):
            args = []
            for k, U in enumerate(f.horizons):
                ratio = (U - t[i]) / (U - s[i])
                sd = math.sqrt((t[i] - s[i]) * ratio)
                args.append(ratio * x[i, k] + sd * nodes[k])
            expected = weights @ f(np.full(weights.size, t[i]), *args)
            excess[i] = expected - float(f(s[i], *x[i, :f.arity]))
    i = int(np.argmax(excess))
    point = (float(s[i]), float(t[i]), *map(float, x[i]))
    return SupermartingaleReport(max(0.0, float(excess[i])), point, n)


@dataclass(frozen=True)
class DifferentialReport:
    """Left side of ``sum_k (x_k/(U_k - t)) d_k f - 1/2 d_kk f - d_t f`` at each point.

    ``lhs`` uses steps ``h``; ``lhs_half`` uses ``h/2``; ``richardson`` is the
    extrapolated combination ``(4 lhs_half - lhs)/3``.
    """

    points: np.ndarray
    lhs: np.ndarray
    lhs_half: np.ndarray
    richardson: np.ndarray

    @property
    def all_positive(self) -> bool:
        return bool(np.all(self.richardson > 0))

    @property
    def min_value(self) -> float:
        return float(np.min(self.richardson))


def _lhs(f, t, x, h_rel):
    t = float(t)
    x = np.asarray(x, dtype=float)
    ht = h_rel * max(1.0, abs(t))
    if t - ht >= 0:
        dt = (f(t + ht, *x) - f(t - ht, *x)) / (2 * ht)
    else:
        dt = (-3 * f(t, *x) + 4 * f(t + ht, *x) - f(t + 2 * ht, *x)) / (2 * ht)
    total = -float(dt)
    f0 = float(f(t, *x))
    for k, U in enumerate(f.horizons):
        hx = h_rel * max(1.0, abs(x[k]))
        up, dn = x.copy(), x.copy()
        up[k] += hx
        dn[k] -= hx
        fu, fd = float(f(t, *up)), float(f(t, *dn))
        total += x[k] / (U - t) * (fu - fd) / (2 * hx) - 0.5 * (fu - 2 * f0 + fd) / (hx * hx)
    return total


def check_differential_inequality(f: KernelFunction, points, h: float = 1e-4) -> DifferentialReport:
    """Evaluate the drift inequality by central differences at ``(t, x...)`` points.

    ``h`` is a relative step: each coordinate ``v`` is perturbed by
    ``h * max(1, |v|)``. Near ``t = 0`` a one-sided second-order time
    difference is used.
    """
    if not h > 0:
        raise DomainError("finite-difference step must be positive")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lhs = np.array([_lhs(f, p[0], p[1:], h) for p in pts])
    lhs_half = np.array([_lhs(f, p[0], p[1:], h / 2) for p in pts])
    return DifferentialReport(pts, lhs, lhs_half, (4 * lhs_half - lhs) / 3)
