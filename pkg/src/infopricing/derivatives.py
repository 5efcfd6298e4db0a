"""Options on binary defaultable bonds, credit-risky coupon bonds and
inflation-linked credit-risky (ILCR) discount bonds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bonds import MACRO, TENSOR_LADDER, BondSpec, shifted_nodes, sovereign_prices, tensor_expectation
from .errors import ConstructionError, DomainError, PayoffError
from .factors import DiscreteFactor, InfoProcessSpec, MarketState, bridge_coefficients, conditional_density
from .kernels import KernelFunction
from .numerics import DEFAULT_HERMITE, QuadratureRule, integrate_interval, normal_cdf, normal_pdf

__all__ = [
    "OptionSpec",
    "CouponBondSpec",
    "HybridSpec",
    "alpha_variance",
    "option_critical_value",
    "option_inner_value",
    "call_price",
    "coupon_bond_price",
    "coupon_bond_with_recovery_price",
    "hybrid_ilcr_price",
    "ilcr_factorized_price",
]

# outer integral of the call over the standardised macro value at expiry
OUTER_RANGE = 10.0
OUTER_RULE = QuadratureRule.adaptive(1e-10, abs_tol=1e-14, max_subdivisions=400)


def alpha_variance(s: float, t: float, T: float) -> float:
    """Bridge-measure variance of ``Z_st = xi_tT/(T - t) - xi_sT/(T - s)``.

    With ``Cov(xi_sT, xi_tT) = s (T - t)/T`` for ``s <= t`` this is
    ``t/(T (T - t)) - s/(T (T - s)) = (t - s)/((T - t)(T - s))``.
    """
    if not (0 <= s <= t < T):
        raise DomainError(f"alpha_variance needs 0 <= s <= t < T, got ({s}, {t}, {T})")
    return (t - s) / ((T - t) * (T - s))


def option_critical_value(pi0: float, pi1: float, P: float, K: float, x0: float, x1: float,
                          sigma: float, alpha: float, T: float):
    """Standard-normal level ``z*`` above which the bond at expiry is worth more than ``K``.

    Returns None when there is no interior root: ``K`` outside
    ``(x0 P, x1 P)``, a degenerate posterior, or no information arriving
    before expiry (``sigma alpha = 0``).
    """
    if not (x0 * P < K < x1 * P) or not (0 < pi0 < 1 and 0 < pi1 < 1) or sigma * alpha <= 0:
        return None
    scale = sigma * (x1 - x0) * T * alpha
    ratio = math.log(pi0 * (K - x0 * P)) - math.log(pi1 * (x1 * P - K))
    return ratio / scale + 0.5 * sigma * (x1 + x0) * T * alpha


def option_inner_value(pi0: float, pi1: float, P, K: float, x0: float, x1: float,
                       sigma: float, alpha: float, T: float):
    """``E[(B_tT - K)^+]`` at expiry given the sovereign price ``P`` (vectorised over ``P``).

    Equals ``pi1 (P x1 - K) N[d+] - pi0 (K - P x0) N[d-]`` with
    ``d+ = sigma x1 T alpha - z*`` and ``d- = sigma x0 T alpha - z*`` where
    a kink exists, and the linear or zero branch otherwise.
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    out = np.empty(P.shape)
    for i, Pi in enumerate(P):
        if pi1 >= 1.0 or pi0 <= 0.0:
            out[i] = max(Pi * x1 - K, 0.0)
        elif pi1 <= 0.0 or pi0 >= 1.0:
            out[i] = max(Pi * x0 - K, 0.0)
        elif K <= x0 * Pi:
            out[i] = pi0 * (Pi * x0 - K) + pi1 * (Pi * x1 - K)
        elif K >= x1 * Pi:
            out[i] = 0.0
        elif sigma * alpha <= 0.0:
            out[i] = max(pi0 * (Pi * x0 - K) + pi1 * (Pi * x1 - K), 0.0)
        else:
            z = option_critical_value(pi0, pi1, Pi, K, x0, x1, sigma, alpha, T)
            d_plus = sigma * x1 * T * alpha - z
            d_minus = sigma * x0 * T * alpha - z
            out[i] = pi1 * (Pi * x1 - K) * normal_cdf(d_plus) - pi0 * (K - Pi * x0) * normal_cdf(d_minus)
    return out


@dataclass(frozen=True)
class OptionSpec:
    """European call with expiry ``expiry`` and strike ``strike`` on a binary bond."""

    expiry: float
    strike: float
    bond: BondSpec

    def __post_init__(self):
        f = self.bond.factor
        if len(f) != 2:
            raise ConstructionError("options are priced on binary bonds (two factor values)")
        if not self.strike >= 0:
            raise ConstructionError("strike must be nonnegative")
        if not self.expiry < self.bond.maturity:
            raise ConstructionError("option expiry must precede bond maturity")


def call_price(spec: OptionSpec, state: MarketState, rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """Call price at ``state.t`` (the option's valuation time ``s``).

    The outer integral runs over the macro value at expiry by adaptive
    quadrature on ``[-10, 10]`` standard deviations of its bridge law; at
    each point the sovereign price ``P(t, T, .)`` is recomputed with
    ``rule`` and the inner expectation over credit news is taken in closed
    form.
    """
    bond = spec.bond
    s, t, T = state.t, spec.expiry, bond.maturity
    if not s <= t:
        raise DomainError("valuation time must not be after expiry")
    kernel = bond.kernel
    x0, x1 = bond.factor.values
    sigma = bond.credit.flow_rate
    pi0, pi1 = bond.posterior(state)
    alpha = math.sqrt(alpha_variance(s, t, T))
    K = spec.strike
    if kernel.time_only:
        P = float(kernel(T)) / float(kernel(t))
        disc = float(kernel(t)) / float(kernel(s))
        return disc * float(option_inner_value(pi0, pi1, P, K, x0, x1, sigma, alpha, T)[0])
    U = kernel.horizons[0]
    xi_U = state[bond.macro_name]
    if s == t:
        z = np.array([xi_U])
        P = sovereign_prices(kernel, t, T, z, rule)
        inner = option_inner_value(pi0, pi1, P, K, x0, x1, sigma, alpha, T)
        return float(inner[0])
    nu, kappa = bridge_coefficients(s, t, U)

    def integrand(y):
        z = nu * y + kappa * xi_U
        P = sovereign_prices(kernel, t, T, z, rule)
        inner = option_inner_value(pi0, pi1, P, K, x0, x1, sigma, alpha, T)
        return kernel(np.full(z.shape, t), z) * inner * normal_pdf(y)

    # the payoff can be confined to a narrow band of macro values where the
    # bond clears the strike; Gauss-Hermite nodes resolve that band poorly
    val = integrate_interval(integrand, -OUTER_RANGE, OUTER_RANGE, OUTER_RULE, panels=16)
    return val / float(kernel(s, xi_U))


@dataclass(frozen=True)
class CouponBondSpec:
    """Coupon bond paying ``coupon`` at each date and ``principal`` at the last.

    ``credits[k]`` reveals the digital factor ``X_{T_k}`` at ``dates[k]``;
    ``recoveries[k]``, when given, is the recovery fraction ``R_k(z)`` of
    ``coupon + principal`` paid at ``dates[k]`` on the first default there.
    """

    dates: Sequence[float]
    coupon: float
    principal: float
    credits: Sequence[InfoProcessSpec]
    kernel: KernelFunction
    recoveries: Sequence[Callable] | None = None
    macro_horizon: float | None = None
    macro_name: str = MACRO

    def __post_init__(self):
        dates = tuple(float(d) for d in self.dates)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "credits", tuple(self.credits))
        if not dates or np.any(np.diff(dates) <= 0):
            raise ConstructionError("coupon dates must be strictly increasing")
        if len(self.credits) != len(dates):
            raise ConstructionError("one credit process per coupon date")
        if self.coupon < 0 or not self.principal > 0:
            raise ConstructionError("coupon must be nonnegative and principal positive")
        for d, proc in zip(dates, self.credits):
            f = proc.factor
            if not (isinstance(f, DiscreteFactor) and np.array_equal(f.values, [0.0, 1.0])):
                raise ConstructionError(f"{proc.name!r} must carry a digital factor with values (0, 1)")
            if abs(proc.horizon - d) > 1e-12:
                raise ConstructionError(f"{proc.name!r} must be revealed at its coupon date {d}")
        if self.recoveries is not None and len(self.recoveries) != len(dates):
            raise ConstructionError("one recovery function per coupon date")
        U = self.horizon
        if U is not None and not dates[-1] < U:
            raise ConstructionError("last coupon date must precede the macro horizon")

    @property
    def horizon(self):
        return self.kernel.horizons[-1] if self.kernel.horizons else self.macro_horizon

    def survival(self, state: MarketState) -> np.ndarray:
        """Posterior survival probabilities ``pi^(k)_1t`` at every date."""
        return np.array([
            conditional_density(p.factor, p.flow_rate, p.horizon, state.t, state[p.name])[1]
            for p in self.credits])


def _coupon_setup(spec: CouponBondSpec, state: MarketState, rule):
    t = state.t
    if not t < spec.dates[0]:
        raise DomainError("valuation must precede the first coupon date")
    kernel = spec.kernel
    if kernel.time_only:
        P = np.array([float(kernel(d)) / float(kernel(t)) for d in spec.dates])
    else:
        xi = state[spec.macro_name]
        P = np.array([float(sovereign_prices(kernel, t, d, xi, rule)) for d in spec.dates])
    return P, spec.survival(state)


def coupon_bond_price(spec: CouponBondSpec, state: MarketState,
                      rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """``sum_k c P_tT_k prod_{j<=k} pi^(j)_1t + p P_tT_n prod_{j<=n} pi^(j)_1t`` (no recovery)."""
    P, surv = _coupon_setup(spec, state, rule)
    alive = np.cumprod(surv)
    return float(spec.coupon * np.sum(P * alive) + spec.principal * P[-1] * alive[-1])


def coupon_bond_with_recovery_price(spec: CouponBondSpec, state: MarketState,
                                    rule: QuadratureRule = DEFAULT_HERMITE) -> float:
    """Coupon bond whose first default at ``T_k`` recovers ``(c + p) R_k(xi_{T_k U})``.

    The cash flow at ``T_k`` is ``c prod_{j<=k} X_j + (c + p) R_k prod_{j<k} X_j (1 - X_k)``
    plus ``p prod_{j<=n} X_j`` at the last date; each recovery leg is a
    Gauss-Hermite integral of ``f(T_k, z) R_k(z)``.
    """
    if spec.recoveries is None:
        return coupon_bond_price(spec, state, rule)
    P, surv = _coupon_setup(spec, state, rule)
    t = state.t
    kernel = spec.kernel
    U = spec.horizon
    if U is None:
        raise DomainError("recovery legs need a macro information horizon")
    xi = state[spec.macro_name]
    alive = np.cumprod(surv)
    alive_before = np.concatenate([[1.0], alive[:-1]])
    f_t = float(kernel(t, xi))
    total = spec.coupon * np.sum(P * alive) + spec.principal * P[-1] * alive[-1]
    for k, (d, R) in enumerate(zip(spec.dates, spec.recoveries)):
        weight = alive_before[k] * (1.0 - surv[k])
        if weight == 0.0:
            continue
        z, w = shifted_nodes(t, d, U, xi, rule)
        r = np.asarray(R(z), dtype=float)
        if np.any(~np.isfinite(r)) or np.any(r < 0) or np.any(r > 1):
            raise PayoffError(f"recovery at date {d} must map into [0, 1)")
        leg = float(w @ (kernel(np.full(z.shape, d), z) * r)) / f_t
        total += (spec.coupon + spec.principal) * weight * leg
    return float(total)


@dataclass(frozen=True)
class HybridSpec:
    """Inflation-linked credit-risky discount bond.

    ``nominal`` and ``real`` are two-argument kernels over the macro
    processes bridged to ``U1 <= U2``; the bond pays ``H(X_T, z1, z2)`` units
    of the price level ``real/nominal`` at maturity.
    """

    maturity: float
    credit: InfoProcessSpec
    nominal: KernelFunction
    real: KernelFunction
    payoff: Callable | None = None
    macro_names: tuple = (MACRO, "macro2")

    def __post_init__(self):
        for k in (self.nominal, self.real):
            if k.arity != 2:
                raise ConstructionError("ILCR kernels take two macro arguments")
        U1, U2 = self.nominal.horizons
        if U1 > U2:
            raise DomainError("macro horizons must satisfy U1 <= U2")
        if tuple(self.real.horizons) != (U1, U2):
            raise ConstructionError("nominal and real kernels must share their horizons")
        if not self.maturity < U1:
            raise ConstructionError("maturity must precede both macro horizons")
        if abs(self.credit.horizon - self.maturity) > 1e-12:
            raise ConstructionError("credit information must be revealed at maturity")
        if not isinstance(self.credit.factor, DiscreteFactor):
            raise ConstructionError("credit factor must be discrete")


def _ilcr_setup(spec: HybridSpec, state: MarketState):
    t, T = state.t, spec.maturity
    if not t < T:
        raise DomainError("valuation time must precede maturity")
    xis = tuple(state[n] for n in spec.macro_names)
    pi = conditional_density(spec.credit.factor, spec.credit.flow_rate, T, t, state[spec.credit.name])
    return t, T, xis, pi


def hybrid_ilcr_price(spec: HybridSpec, state: MarketState, rule: QuadratureRule | None = None) -> float:
    """``(1/f(t, xi_1, xi_2)) sum_i pi_it E[g(T, z1, z2) H(x_i, z1, z2)]`` by tensor Gauss-Hermite.

    The rule is compared against the next coarser one (48^2 against 64^2 by
    default) and refined while they differ by more than 1e-7 relative.
    """
    t, T, xis, pi = _ilcr_setup(spec, state)
    H = spec.payoff or (lambda x, z1, z2: np.full(np.shape(z1), float(x)))
    g = spec.real
    horizons = spec.nominal.horizons

    def integrand(z1, z2):
        gT = g(np.full(z1.shape, T), z1, z2)
        acc = np.zeros(z1.shape)
        for x_i, p_i in zip(spec.credit.factor.values, pi):
            if p_i > 0.0:
                acc = acc + p_i * np.asarray(H(x_i, z1, z2), dtype=float)
        if not np.all(np.isfinite(acc)):
            raise PayoffError("ILCR payoff is not finite on the quadrature grid")
        return gT * acc

    start = 1
    if rule is not None:
        start = max(1, TENSOR_LADDER.index(rule.node_count)) if rule.node_count in TENSOR_LADDER else 1
    val = tensor_expectation(integrand, t, T, horizons, xis, start)
    return val / float(spec.nominal(t, *xis))


def ilcr_factorized_price(spec: HybridSpec, state: MarketState) -> float:
    """ILCR price for the payoff ``H = X_T``: ``Q_tT sum_i pi_it x_i``.

    ``Q_tT = E[g(T, z1, z2)]/f(t, xi_1, xi_2)`` is the inflation-linked
    discount bond without credit risk.
    """
    t, T, xis, pi = _ilcr_setup(spec, state)
    g = spec.real
    Q = tensor_expectation(lambda z1, z2: g(np.full(z1.shape, T), z1, z2), t, T,
                           spec.nominal.horizons, xis) / float(spec.nominal(t, *xis))
    return Q * float(pi @ spec.credit.factor.values)
