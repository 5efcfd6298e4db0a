"""Sovereign bonds that react to two macro signals or to accumulated debt.

The debt signal is gamma-bridge information ``xi^gamma_t = X_{T1} gamma_t``;
expectations over its value at maturity use the Arrow-Debreu density, the
macro signal is a Brownian bridge to ``T2``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .bonds import TENSOR_LADDER, tensor_expectation
from .errors import ConstructionError, DomainError, NumericsError
from .factors import ArrowDebreu, ContinuousFactor, MarketState, bridge_coefficients, sample_gamma_posterior
from .kernels import KernelFunction
from .numerics import DEFAULT_HERMITE, QuadratureRule, RandomStream, normal_nodes

__all__ = [
    "DEBT",
    "CreditSensitiveKernel",
    "debt_sensitive_kernel",
    "sovereign_price_2d",
    "credit_sensitive_bond_price",
    "GammaSupermartingaleReport",
    "gamma_supermartingale_diagnostic",
]

DEBT = "debt"


def sovereign_price_2d(f: KernelFunction, state: MarketState, T: float,
                       rule: QuadratureRule | None = None,
                       processes: tuple[str, str] = ("macro", "macro2")) -> float:
    """``E[f(T, z1, z2)] / f(t, xi_1, xi_2)`` over two independent bridges, by tensor Gauss-Hermite."""
    if f.arity != 2:
        raise DomainError("sovereign_price_2d needs a two-argument kernel")
    T1, T2 = f.horizons
    t = state.t
    if not (t < T < T1 <= T2):
        raise DomainError(f"need t < T < T1 <= T2, got t={t}, T={T}, horizons={f.horizons}")
    xis = tuple(state[p] for p in processes)
    start = 1
    if rule is not None and rule.node_count in TENSOR_LADDER:
        start = max(1, TENSOR_LADDER.index(rule.node_count))
    val = tensor_expectation(lambda a, b: f(np.full(a.shape, T), a, b), t, T, f.horizons, xis, start)
    return val / float(f(t, *xis))


@dataclass(frozen=True)
class CreditSensitiveKernel:
    """Kernel ``f(t, y_gamma, xi)`` reacting to the debt level and a macro signal.

    ``m`` and ``T1`` define the gamma information about the debt ``X_{T1}``
    with density ``prior``; the macro signal is bridged to ``T2 >= T1``.
    """

    f: Callable
    m: float
    T1: float
    T2: float
    prior: ContinuousFactor
    name: str = "custom"

    def __post_init__(self):
        if not self.m > 0:
            raise ConstructionError("activity rate must be positive")
        if not 0 < self.T1 <= self.T2:
            raise ConstructionError("need 0 < T1 <= T2")
        if self.prior.support[0] < 0:
            raise ConstructionError("debt prior must live on [0, inf)")
        t = np.linspace(0.0, self.T1, 12)[:-1]
        y = np.linspace(0.0, self.prior.upper_limit(), 9)
        x = np.linspace(-5.0, 5.0, 9) * np.sqrt(self.T2) / 2
        tt, yy, xx = np.meshgrid(t, y, x, indexing="ij")
        vals = np.asarray(self.f(tt, yy, xx), dtype=float)
        if not np.all(np.isfinite(vals) & (vals > 0)):
            raise ConstructionError("credit-sensitive kernel must be positive on the probe grid")

    def __call__(self, t, y, x):
        return np.asarray(self.f(t, y, x), dtype=float)


def debt_sensitive_kernel(macro: KernelFunction, m: float, T1: float, prior: ContinuousFactor,
                          kappa: float = 1.0, rho: float = 0.0) -> CreditSensitiveKernel:
    """``f(t, y, xi) = exp(-rho t) k(t, xi) / (1 + kappa y)``: the kernel falls as debt accumulates.

    Bond prices need not fall with observed debt: they are ratios and
    ``f(t, y_t)`` in the denominator falls too.
    """
    if macro.arity != 1:
        raise ConstructionError("macro kernel must take one argument")
    if kappa < 0:
        raise ConstructionError("kappa must be nonnegative")

    def f(t, y, x):
        t = np.asarray(t, dtype=float)
        return np.exp(-rho * t) * macro(t, x) / (1.0 + kappa * np.asarray(y, dtype=float))

    return CreditSensitiveKernel(f, m, T1, macro.horizons[0], prior,
                                 name=f"debt_sensitive({macro.name})")


def credit_sensitive_bond_price(ck: CreditSensitiveKernel, state: MarketState, T: float,
                                rule: QuadratureRule = DEFAULT_HERMITE, *,
                                debt_process: str = DEBT, macro_process: str = "macro",
                                inner_rule: QuadratureRule | None = None) -> float:
    """Bond price ``(1/f(t, xi^gamma, xi)) int A_tT(y) E_Y[f(T, y, z(Y))] dy``.

    The Gaussian expectation over the macro signal is taken at every
    abscissa of the adaptive integral in ``y``; the integral of ``A`` itself
    is carried alongside and must equal one to 1e-4.
    """
    t = state.t
    if not (t < T < ck.T1 <= ck.T2):
        raise DomainError(f"need t < T < T1 <= T2, got t={t}, T={T}, T1={ck.T1}, T2={ck.T2}")
    xi_g = state[debt_process]
    xi = state[macro_process]
    if xi_g < 0:
        raise DomainError("debt observation must be nonnegative")
    nu, kappa = bridge_coefficients(t, T, ck.T2)
    y, w = normal_nodes(rule.node_count)
    z = nu * y + kappa * xi
    ad = ArrowDebreu(ck.m, ck.T1, ck.prior, t, T, xi_g, inner_rule)

    def h(yg):
        yg = np.asarray(yg, dtype=float)
        fT = ck(np.full((yg.size, z.size), T), yg[:, None], z[None, :])
        return np.stack([fT @ w, np.ones(yg.size)], axis=1)

    value, mass = ad.integrate(h)
    if abs(mass - 1.0) > 1e-4:
        raise NumericsError(f"Arrow-Debreu density integrates to {mass!r}; quadrature broke down")
    return float(value) / float(ck(t, xi_g, xi))


@dataclass(frozen=True)
class GammaSupermartingaleReport:
    """Monte-Carlo excess ``E[f(t, .)|F_s] - f(s, .)`` with its standard error, per probed point."""

    excess: np.ndarray
    stderr: np.ndarray
    points: np.ndarray

    @property
    def max_excess_in_se(self) -> float:
        return float(np.max(self.excess / np.maximum(self.stderr, 1e-300)))


def gamma_supermartingale_diagnostic(ck: CreditSensitiveKernel, points, stream: RandomStream,
                                     paths: int = 20000, rule: QuadratureRule = DEFAULT_HERMITE
                                     ) -> GammaSupermartingaleReport:
    """Check ``E[f(t, xi^gamma_t, xi_t) | xi^gamma_s, xi_s] <= f(s, xi^gamma_s, xi_s)``.

    ``points`` holds rows ``(s, t, debt_s, xi_s)``. The debt coordinate is
    sampled (posterior of ``X`` plus a beta bridge increment), the macro
    coordinate is integrated by Gauss-Hermite. Reported, not enforced.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    y, w = normal_nodes(rule.node_count)
    excess, se = [], []
    for i, (s, t, g, x) in enumerate(pts):
        if not (0 <= s < t < ck.T1):
            raise DomainError("need 0 <= s < t < T1")
        sub = stream.substream(i)
        X = sample_gamma_posterior(ck.m, ck.T1, ck.prior, s, g, sub, paths)
        frac = sub.beta(ck.m * (t - s), ck.m * (ck.T1 - t), paths)
        g_t = g + (X - g) * frac
        ratio = (ck.T2 - t) / (ck.T2 - s)
        z = ratio * x + np.sqrt((t - s) * ratio) * y
        vals = ck(np.full((paths, z.size), t), g_t[:, None], z[None, :]) @ w
        excess.append(vals.mean() - float(ck(s, g, x)))
        se.append(vals.std(ddof=1) / np.sqrt(paths))
    return GammaSupermartingaleReport(np.array(excess), np.array(se), pts)
