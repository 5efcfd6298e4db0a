"""Sovereign and credit-risky discount bonds.

All prices are Gaussian integrals over the bridge law of the macro
information process at maturity,

    xi_TU = nu Y + kappa xi_tU,    Y ~ N(0, 1),

mixed over the posterior of the credit factor. State observations are looked
up by process name: the macro process defaults to ``"macro"`` and the credit
process uses the name of its :class:`InfoProcessSpec`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConstructionError, DomainError, NumericsError, PayoffError
from .factors import (
    ContinuousFactor,
    DiscreteFactor,
    InfoProcessSpec,
    MarketState,
    bridge_coefficients,
    conditional_density,
)
from .kernels import KernelFunction
from .numerics import DEFAULT_HERMITE, QuadratureRule, normal_nodes

__all__ = [
    "MACRO",
    "NoRecovery",
    "MarketRecovery",
    "TwoFactorRecovery",
    "BondSpec",
    "shifted_nodes",
    "sovereign_price",
    "sovereign_prices",
    "defaultable_price",
    "defaultable_price_generalized",
    "two_factor_recovery_price",
    "yield_spread",
    "exponential_recovery",
    "tensor_expectation",
    "TENSOR_LADDER",
]

MACRO = "macro"


def exponential_recovery(z):
    """``R(z) = 1 - exp(-z^2)``."""
    z = np.asarray(z, dtype=float)
    return -np.expm1(-z * z)


def _probe_points(z):
    # 21 evenly spread nodes of the quadrature grid actually used
    return z[np.unique(np.linspace(0, z.size - 1, 21).round().astype(int))]


def _check_recovery(R: Callable, probe, label: str):
    # 1 - exp(-z^2) rounds to exactly 1 far out, so the closed interval is accepted
    vals = np.asarray(R(probe), dtype=float)
    bad = ~((vals >= 0.0) & (vals <= 1.0))
    if np.any(bad):
        i = int(np.argmax(bad))
        raise PayoffError(f"{label} must map into [0, 1); got {vals.flat[i]!r} at {np.asarray(probe).flat[i]!r}")


@dataclass(frozen=True)
class NoRecovery:
    """Payoff ``H = X``."""

    kind: str = field(default="none", init=False)

    def payoff(self, x, z):
        return np.full(np.shape(z), float(x))


@dataclass(frozen=True)
class MarketRecovery:
    """Payoff ``H = X + (1 - X) R(xi_TU)`` with ``R`` valued in [0, 1)."""

    R: Callable = exponential_recovery
    kind: str = field(default="market_dependent", init=False)

    def payoff(self, x, z):
        return x + (1.0 - x) * np.asarray(self.R(z), dtype=float)


@dataclass(frozen=True)
class TwoFactorRecovery:
    """Management/economy recovery.

    ``H = X_C [X_E + (1 - X_E) R_E(z)] + (1 - X_C) [X_E R_C + (1 - X_E) R_CE(R_C, z)]``
    where ``X_C`` (good management) and ``X_E`` (healthy economy) are
    digital factors revealed through their own information processes and
    ``R_C`` is a recovery fraction with a prior on [0, 1) but no information
    process; it is valued by its prior expectation.
    """

    management: InfoProcessSpec
    economy: InfoProcessSpec
    R_E: Callable
    R_C: ContinuousFactor
    R_CE: Callable
    kind: str = field(default="two_factor", init=False)

    def __post_init__(self):
        for spec in (self.management, self.economy):
            f = spec.factor
            if not (isinstance(f, DiscreteFactor) and np.array_equal(f.values, [0.0, 1.0])):
                raise ConstructionError(f"{spec.name!r} must carry a digital factor with values (0, 1)")
            if spec.bridge != "brownian":
                raise ConstructionError("two-factor recovery needs brownian information")
        lo, hi = self.R_C.support
        if lo < 0 or hi > 1:
            raise ConstructionError("R_C prior must live on [0, 1)")


@dataclass(frozen=True)
class BondSpec:
    """A discount bond maturing at ``maturity``.

    ``credit`` is the information process revealing the credit factor at
    maturity (its horizon must equal the maturity). The macro process is
    bridged to the kernel's horizon, or to ``macro_horizon`` for kernels that
    depend on time only.
    """

    maturity: float
    credit: InfoProcessSpec
    kernel: KernelFunction
    recovery: object = field(default_factory=NoRecovery)
    macro_horizon: float | None = None
    macro_name: str = MACRO

    def __post_init__(self):
        T = self.maturity
        if not T > 0:
            raise ConstructionError("maturity must be positive")
        f = self.credit.factor
        if not isinstance(f, DiscreteFactor):
            raise ConstructionError("credit factor must be discrete")
        if self.credit.bridge != "brownian":
            raise ConstructionError("credit information must be brownian")
        if abs(self.credit.horizon - T) > 1e-12:
            raise ConstructionError("credit information must be revealed at maturity")
        if f.values[0] < 0 or f.values[-1] > 1:
            raise ConstructionError("credit factor values must lie in [0, 1]")
        U = self.horizon
        if U is not None and not T < U:
            raise ConstructionError(f"maturity {T} must precede the macro horizon {U}")

    @property
    def horizon(self) -> float | None:
        if self.kernel.horizons:
            return self.kernel.horizons[-1]
        return self.macro_horizon

    @property
    def factor(self) -> DiscreteFactor:
        return self.credit.factor

    def posterior(self, state: MarketState) -> np.ndarray:
        return conditional_density(self.factor, self.credit.flow_rate, self.maturity, state.t,
                                   state[self.credit.name])


def shifted_nodes(t: float, T: float, U: float, xi: float, rule: QuadratureRule = DEFAULT_HERMITE):
    """Hermite nodes mapped to ``xi_TU`` given ``xi_tU = xi``, with their weights."""
    if rule.kind != "gauss_hermite":
        raise DomainError("Gaussian integrals need a gauss_hermite rule")
    nu, kappa = bridge_coefficients(t, T, U)
    y, w = normal_nodes(rule.node_count)
    return nu * y + kappa * xi, w


def _check_times(t, T, U):
    if not t <= T:
        raise DomainError(f"valuation time {t} is after maturity {T}")
    if U is not None and not T < U:
        raise DomainError(f"maturity {T} must precede the information horizon {U}")


def sovereign_prices(kernel: KernelFunction, t: float, T: float, xi, rule: QuadratureRule = DEFAULT_HERMITE):
    """``P_tT`` for an array of macro observations ``xi`` (vectorised core of :func:`sovereign_price`)."""
    xi = np.asarray(xi, dtype=float)
    if kernel.time_only:
        return np.full(xi.shape, float(kernel(T)) / float(kernel(t)))
    if kernel.arity != 1:
        raise DomainError("sovereign_price needs a one-argument kernel")
    U = kernel.horizons[0]
    _check_times(t, T, U)
    if T == t:
        return np.ones(xi.shape)
    nu, kappa = bridge_coefficients(t, T, U)
    y, w = normal_nodes(rule.node_count)
    z = nu * y[:, None] + kappa * xi.ravel()[None, :]
    num = w @ kernel(np.full(z.shape, T), z)
    den = kernel(np.full(xi.size, t), xi.ravel())
    return (num / den).reshape(xi.shape)


def sovereign_price(kernel: KernelFunction, state: MarketState, T: float,
                    rule: QuadratureRule = DEFAULT_HERMITE, process: str = MACRO) -> float:
    """Price at ``state.t`` of a default-free discount bond maturing at ``T``.

    ``P_tT = E[f(T, nu Y + kappa xi)] / f(t, xi)`` with the expectation by
    Gauss-Hermite quadrature. Time-only kernels give ``f(T)/f(t)``.
    """
    if kernel.time_only:
        _check_times(state.t, T, None)
        return float(kernel(T)) / float(kernel(state.t))
    if rule.kind != "gauss_hermite":
        raise DomainError("sovereign_price needs a gauss_hermite rule")
    return float(sovereign_prices(kernel, state.t, T, state[process], rule))


def _macro_observation(spec: BondSpec, state: MarketState):
    U = spec.horizon
    if U is None:
        raise DomainError("bond has no macro information horizon: give the kernel one or set macro_horizon")
    return U, state[spec.macro_name]


def defaultable_price(spec: BondSpec, H: Callable | None, state: MarketState,
                      rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """``B_tT = (1/f(t, xi_tU)) sum_i pi_it E[f(T, z) H(x_i, z)]`` with ``z`` the bridged macro value.

    ``H(x, z)`` is vectorised in ``z``; ``None`` uses the bond's recovery payoff.
    """
    t, T = state.t, spec.maturity
    if not t < T:
        raise DomainError("valuation time must precede maturity")
    U, xi_U = _macro_observation(spec, state)
    _check_times(t, T, U)
    pi = spec.posterior(state)
    H = H or spec.recovery.payoff
    z, w = shifted_nodes(t, T, U, xi_U, rule)
    kernel = spec.kernel
    fT = kernel(np.full(z.shape, T), z)
    if isinstance(spec.recovery, MarketRecovery):
        _check_recovery(spec.recovery.R, _probe_points(z), "recovery R")
    total = 0.0
    for x_i, p_i in zip(spec.factor.values, pi):
        if p_i == 0.0:
            continue
        vals = np.asarray(H(x_i, z), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise PayoffError(f"payoff is not finite at factor value {x_i}")
        total += p_i * float(w @ (fT * vals))
    return total / float(kernel(t, xi_U))


def defaultable_price_generalized(f2: KernelFunction, spec: BondSpec, H: Callable | None,
                                  state: MarketState, rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """Defaultable price under a kernel ``f2(t, xi_tT, xi_tU)`` that also reacts to credit news.

    At maturity the credit process equals ``sigma_2 x_i T`` on the outcome
    ``x_i``, so ``B = (1/f2(t, xi_tT, xi_tU)) sum_i pi_it E[f2(T, sigma_2 x_i T, z) H(x_i, z)]``.
    """
    if f2.arity != 2:
        raise DomainError("generalized pricing needs a two-argument kernel")
    t, T = state.t, spec.maturity
    if not t < T:
        raise DomainError("valuation time must precede maturity")
    U = f2.horizons[1]
    _check_times(t, T, U)
    xi_T = state[spec.credit.name]
    xi_U = state[spec.macro_name]
    pi = spec.posterior(state)
    H = H or spec.recovery.payoff
    z, w = shifted_nodes(t, T, U, xi_U, rule)
    sigma = spec.credit.flow_rate
    total = 0.0
    for x_i, p_i in zip(spec.factor.values, pi):
        if p_i == 0.0:
            continue
        fT = f2(np.full(z.shape, T), np.full(z.shape, sigma * x_i * T), z)
        vals = np.asarray(H(x_i, z), dtype=float)
        if not np.all(np.isfinite(vals)):
            raise PayoffError(f"payoff is not finite at factor value {x_i}")
        total += p_i * float(w @ (fT * vals))
    return total / float(f2(t, xi_T, xi_U))


def two_factor_recovery_price(spec: BondSpec, state: MarketState,
                              rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """Price of a bond whose recovery depends on management and economy factors.

    Conditional on the macro value ``z`` at maturity the four
    ``(X_C, X_E)`` cells pay ``1``, ``R_E(z)``, ``E[R_C]`` and
    ``E[R_CE(R_C, z)]``; the cells are weighted by the product of the two
    independent posteriors and the result is integrated against ``f(T, z)``.
    """
    rec = spec.recovery
    if not isinstance(rec, TwoFactorRecovery):
        raise DomainError("two_factor_recovery_price needs a TwoFactorRecovery spec")
    t, T = state.t, spec.maturity
    if not t < T:
        raise DomainError("valuation time must precede maturity")
    U, xi_U = _macro_observation(spec, state)
    _check_times(t, T, U)
    post = []
    for proc in (rec.management, rec.economy):
        if abs(proc.horizon - T) > 1e-12:
            raise ConstructionError(f"{proc.name!r} must be revealed at maturity")
        post.append(conditional_density(proc.factor, proc.flow_rate, T, t, state[proc.name]))
    (c0, c1), (e0, e1) = post
    z, w = shifted_nodes(t, T, U, xi_U, rule)
    probe = _probe_points(z)
    _check_recovery(rec.R_E, probe, "R_E")
    r_e = np.asarray(rec.R_E(z), dtype=float)
    r_c = rec.R_C.mean
    r_ce = np.asarray(rec.R_C.expectation(lambda r: np.asarray(rec.R_CE(r[:, None], z[None, :]), dtype=float)))
    if np.any(~np.isfinite(r_ce)) or np.any(r_ce < 0) or np.any(r_ce > 1):
        raise PayoffError("R_CE must map into [0, 1) on the probe grid")
    cell = c1 * (e1 + e0 * r_e) + c0 * (e1 * r_c + e0 * r_ce)
    fT = spec.kernel(np.full(z.shape, T), z)
    return float(w @ (fT * cell)) / float(spec.kernel(t, xi_U))


def yield_spread(P: float, B: float, t: float, T: float) -> float:
    """``(ln P - ln B)/(T - t)``."""
    if not t < T:
        raise DomainError("yield spread needs t < T")
    if not (P > 0 and B > 0):
        raise DomainError("yield spread needs positive prices")
    return (np.log(P) - np.log(B)) / (T - t)


TENSOR_LADDER = (48, 64, 96, 128, 192, 256)


def tensor_expectation(integrand, t, T, horizons, xis, start=1):
    """``E[integrand(z1, z2)]`` over two independent bridged macro values at ``T``.

    Tensor Gauss-Hermite rules from ``TENSOR_LADDER`` are tried in turn,
    starting from index ``start - 1``; the first rule agreeing with its
    predecessor to 1e-7 relative is returned.
    """
    prev = None
    for n in TENSOR_LADDER[start - 1:]:
        y, w = normal_nodes(n)
        z = []
        for U, xi in zip(horizons, xis):
            nu, kappa = bridge_coefficients(t, T, U)
            z.append(nu * y + kappa * xi)
        Z1, Z2 = np.meshgrid(z[0], z[1], indexing="ij")
        val = float(w @ integrand(Z1, Z2) @ w)
        if prev is not None and abs(val - prev) <= 1e-7 * max(abs(val), 1e-300):
            return val
        prev = val
    raise NumericsError(f"tensor quadrature did not settle up to {TENSOR_LADDER[-1]}^2 nodes")
