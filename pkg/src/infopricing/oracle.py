"""Monte-Carlo oracles for the quadrature pricers and the spread-path experiment.

Every target draws the same random quantities the quadrature integrates
over, from their exact laws: the macro bridge value at maturity, credit
factor outcomes from their posteriors, credit information at an option
expiry under the real-world law, and gamma-bridge forward values. Paths are
cut into fixed-size blocks; block ``b`` always uses substream ``b`` of the
master stream, so results do not depend on how blocks are scheduled.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _backend
from .bonds import BondSpec, MarketRecovery, TwoFactorRecovery, sovereign_prices
from .credit_sensitive import CreditSensitiveKernel
from .derivatives import CouponBondSpec, HybridSpec, OptionSpec
from .errors import ConstructionError, DomainError, EvaluationError
from .factors import (
    DiscreteFactor,
    MarketState,
    bridge_coefficients,
    conditional_density,
    sample_gamma_forward,
)
from .kernels import KernelFunction
from .numerics import RandomStream

__all__ = [
    "McConfig",
    "McResult",
    "SovereignTarget",
    "DefaultableTarget",
    "GeneralizedTarget",
    "TwoFactorTarget",
    "OptionTarget",
    "CouponTarget",
    "HybridTarget",
    "Sovereign2DTarget",
    "CreditSensitiveTarget",
    "mc_price",
    "SpreadExperiment",
    "SpreadTable",
    "spread_paths",
    "write_spread_csv",
]


@dataclass(frozen=True)
class McConfig:
    """Monte-Carlo settings.

    ``grid`` is only used by targets that simulate paths. With
    ``antithetic`` the Gaussian draws come in ``(Y, -Y)`` pairs and the
    standard error is computed from pair averages.
    """

    paths: int = 100_000
    seed: int = 0
    grid: tuple = ()
    antithetic: bool = True
    block_size: int = 10_000
    workers: int = 1

    def __post_init__(self):
        if int(self.paths) < 100:
            raise ConstructionError("at least 100 paths are required")
        if self.block_size < 2 or self.block_size % 2:
            raise ConstructionError("block_size must be a positive even number")
        if self.grid and np.any(np.diff(np.asarray(self.grid, dtype=float)) <= 0):
            raise ConstructionError("grid must be strictly increasing")
        if self.workers < 1:
            raise ConstructionError("workers must be positive")


@dataclass(frozen=True)
class McResult:
    estimate: float
    stderr: float
    samples: int

    def __iter__(self):
        return iter((self.estimate, self.stderr))

    def zscore(self, value: float) -> float:
        if self.stderr == 0.0:
            return 0.0 if value == self.estimate else float("inf")
        return (self.estimate - value) / self.stderr


class _Draws:
    """Gaussian draws with optional antithetic pairing; other draws are shared by a pair."""

    def __init__(self, stream: RandomStream, n: int, antithetic: bool):
        self.stream = stream
        self.antithetic = antithetic
        self.n = n
        self.base = n // 2 if antithetic else n

    def normal(self, *shape):
        z = self.stream.normal((self.base, *shape))
        return np.concatenate([z, -z]) if self.antithetic else z

    def shared(self, values):
        values = np.asarray(values)
        return np.concatenate([values, values]) if self.antithetic else values

    def uniform(self):
        return self.shared(self.stream.uniform(self.base))

    def categorical(self, probs):
        """Index draws with the given probabilities (one probability vector, or one per row)."""
        probs = np.asarray(probs, dtype=float)
        u = self.stream.uniform(self.base)
        if probs.ndim == 1:
            idx = np.searchsorted(np.cumsum(probs)[:-1], u, side="right")
        else:
            cum = np.cumsum(probs, axis=1)[:, :-1]
            idx = (u[:, None] >= cum).sum(axis=1)
        return self.shared(idx)

    def reduce(self, values):
        values = np.asarray(values, dtype=float)
        if self.antithetic:
            return 0.5 * (values[: self.base] + values[self.base:])
        return values


def _macro_draw(draws, t, T, U, xi):
    nu, kappa = bridge_coefficients(t, T, U)
    return nu * draws.normal() + kappa * xi


@dataclass(frozen=True)
class SovereignTarget:
    """``f(T, z)/f(t, xi)`` with ``z`` the bridged macro value."""

    kernel: KernelFunction
    maturity: float
    process: str = "macro"

    def sample(self, state, draws):
        k, t, T = self.kernel, state.t, self.maturity
        if k.time_only:
            return np.full(draws.n, float(k(T)) / float(k(t)))
        xi = state[self.process]
        z = _macro_draw(draws, t, T, k.horizons[0], xi)
        return k(np.full(z.shape, T), z) / float(k(t, xi))


def _outcomes(draws, factor: DiscreteFactor, pi):
    return factor.values[draws.categorical(pi)]


@dataclass(frozen=True)
class DefaultableTarget:
    """``f(T, z) H(X, z)/f(t, xi)`` with ``X`` drawn from its posterior."""

    spec: BondSpec
    payoff: Callable | None = None

    def sample(self, state, draws):
        spec = self.spec
        t, T, U = state.t, spec.maturity, spec.horizon
        xi = state[spec.macro_name]
        X = _outcomes(draws, spec.factor, spec.posterior(state))
        z = _macro_draw(draws, t, T, U, xi)
        vals = _by_outcome(self.payoff, X, z) if self.payoff else _vector_payoff(spec, X, z)
        return spec.kernel(np.full(z.shape, T), z) * vals / float(spec.kernel(t, xi))


def _by_outcome(H, X, *zs):
    """Evaluate a payoff ``H(x, *z)`` that is vectorized in ``z`` for each distinct outcome."""
    out = np.empty(X.shape)
    for v in np.unique(X):
        m = X == v
        out[m] = np.asarray(H(float(v), *(z[m] for z in zs)), dtype=float)
    return out


def _vector_payoff(spec, X, z):
    rec = spec.recovery
    if isinstance(rec, MarketRecovery):
        return X + (1.0 - X) * np.asarray(rec.R(z), dtype=float)
    return X.astype(float)


@dataclass(frozen=True)
class GeneralizedTarget:
    """``f2(T, sigma X T, z) H(X, z)/f2(t, xi_T, xi_U)``."""

    f2: KernelFunction
    spec: BondSpec
    payoff: Callable | None = None

    def sample(self, state, draws):
        spec, f2 = self.spec, self.f2
        t, T, U = state.t, spec.maturity, f2.horizons[1]
        xi_T, xi_U = state[spec.credit.name], state[spec.macro_name]
        X = _outcomes(draws, spec.factor, spec.posterior(state))
        z = _macro_draw(draws, t, T, U, xi_U)
        vals = _by_outcome(self.payoff, X, z) if self.payoff else _vector_payoff(spec, X, z)
        fT = f2(np.full(z.shape, T), spec.credit.flow_rate * X * T, z)
        return fT * vals / float(f2(t, xi_T, xi_U))


@dataclass(frozen=True)
class TwoFactorTarget:
    """Management/economy recovery bond; ``R_C`` drawn from its prior."""

    spec: BondSpec

    def sample(self, state, draws):
        spec = self.spec
        rec = spec.recovery
        if not isinstance(rec, TwoFactorRecovery):
            raise DomainError("TwoFactorTarget needs a two-factor recovery")
        t, T, U = state.t, spec.maturity, spec.horizon
        xi = state[spec.macro_name]
        XC = _outcomes(draws, rec.management.factor,
                       conditional_density(rec.management.factor, rec.management.flow_rate, T, t,
                                           state[rec.management.name]))
        XE = _outcomes(draws, rec.economy.factor,
                       conditional_density(rec.economy.factor, rec.economy.flow_rate, T, t,
                                           state[rec.economy.name]))
        RC = draws.shared(rec.R_C.sample(draws.stream, draws.base))
        z = _macro_draw(draws, t, T, U, xi)
        RE = np.asarray(rec.R_E(z), dtype=float)
        RCE = np.asarray(rec.R_CE(RC, z), dtype=float)
        H = XC * (XE + (1 - XE) * RE) + (1 - XC) * (XE * RC + (1 - XE) * RCE)
        return spec.kernel(np.full(z.shape, T), z) * H / float(spec.kernel(t, xi))


@dataclass(frozen=True)
class OptionTarget:
    """Nested estimator for the call: macro bridge to expiry, credit news to expiry under the real-world law.

    ``X`` is drawn from its posterior at ``s``; the credit process at
    expiry is ``sigma t X + beta_t`` with the bridge noise ``beta`` moved
    exactly from its value implied at ``s``. The bond price at expiry uses
    the posterior recomputed from that simulated value.
    """

    spec: OptionSpec

    def sample(self, state, draws):
        opt = self.spec
        bond = opt.bond
        s, t, T = state.t, opt.expiry, bond.maturity
        k = bond.kernel
        sigma = bond.credit.flow_rate
        xi_T = state[bond.credit.name]
        X = _outcomes(draws, bond.factor, bond.posterior(state))
        beta_s = xi_T - sigma * s * X
        ratio = (T - t) / (T - s)
        beta_t = ratio * beta_s + np.sqrt((t - s) * ratio) * draws.normal()
        xi_t = sigma * t * X + beta_t
        pi_t = conditional_density(bond.factor, sigma, T, t, xi_t)
        if k.time_only:
            P = np.full(X.shape, float(k(T)) / float(k(t)))
            disc = np.full(X.shape, float(k(t)) / float(k(s)))
        else:
            xi_U = state[bond.macro_name]
            z = _macro_draw(draws, s, t, k.horizons[0], xi_U)
            # chunked: the inner kernel expands each price to nodes x quadrature points
            P = np.concatenate([sovereign_prices(k, t, T, c) for c in np.array_split(z, -(-z.size // 2048))])
            disc = k(np.full(z.shape, t), z) / float(k(s, xi_U))
        B = P * (pi_t @ bond.factor.values)
        return disc * np.maximum(B - opt.strike, 0.0)


@dataclass(frozen=True)
class CouponTarget:
    """Coupon bond cash flows along one joint macro path through all coupon dates."""

    spec: CouponBondSpec
    with_recovery: bool = True

    def sample(self, state, draws):
        spec = self.spec
        k = spec.kernel
        t = state.t
        surv = spec.survival(state)
        X = np.stack([draws.shared((draws.stream.uniform(draws.base) < p).astype(float)) for p in surv], axis=1)
        n = X.shape[0]
        recover = self.with_recovery and spec.recoveries is not None
        if k.time_only:
            f_dates = np.array([float(k(d)) for d in spec.dates])[None, :] * np.ones((n, 1))
            z = np.zeros((n, len(spec.dates)))
            f_t = float(k(t))
        else:
            U = spec.horizon
            xi = state[spec.macro_name]
            grid = np.array(spec.dates)
            noise = draws.normal(len(spec.dates))
            z = _backend.bridge_fill(np.ascontiguousarray(noise), grid, U, t, xi)
            f_dates = k(np.broadcast_to(grid, z.shape), z)
            f_t = float(k(t, xi))
        alive = np.cumprod(X, axis=1)
        alive_before = np.concatenate([np.ones((n, 1)), alive[:, :-1]], axis=1)
        cash = spec.coupon * alive
        cash[:, -1] += spec.principal * alive[:, -1]
        if recover:
            R = np.stack([np.asarray(Rk(z[:, j]), dtype=float) for j, Rk in enumerate(spec.recoveries)], axis=1)
            cash += (spec.coupon + spec.principal) * R * alive_before * (1.0 - X)
        return np.sum(f_dates * cash, axis=1) / f_t


@dataclass(frozen=True)
class HybridTarget:
    """ILCR bond: ``g(T, z1, z2) H(X, z1, z2)/f(t, xi_1, xi_2)``."""

    spec: HybridSpec

    def sample(self, state, draws):
        spec = self.spec
        t, T = state.t, spec.maturity
        xis = [state[n] for n in spec.macro_names]
        pi = conditional_density(spec.credit.factor, spec.credit.flow_rate, T, t, state[spec.credit.name])
        X = _outcomes(draws, spec.credit.factor, pi)
        zs = [_macro_draw(draws, t, T, U, xi) for U, xi in zip(spec.nominal.horizons, xis)]
        H = _by_outcome(spec.payoff, X, *zs) if spec.payoff else X.astype(float)
        return spec.real(np.full(X.shape, T), *zs) * H / float(spec.nominal(t, *xis))


@dataclass(frozen=True)
class Sovereign2DTarget:
    kernel: KernelFunction
    maturity: float
    processes: tuple = ("macro", "macro2")

    def sample(self, state, draws):
        k, t, T = self.kernel, state.t, self.maturity
        xis = [state[p] for p in self.processes]
        zs = [_macro_draw(draws, t, T, U, xi) for U, xi in zip(k.horizons, xis)]
        return k(np.full(zs[0].shape, T), *zs) / float(k(t, *xis))


@dataclass(frozen=True)
class CreditSensitiveTarget:
    """Debt-sensitive bond: gamma-bridge forward value of the debt plus a macro bridge draw."""

    kernel: CreditSensitiveKernel
    maturity: float
    debt_process: str = "debt"
    macro_process: str = "macro"

    def sample(self, state, draws):
        ck, t, T = self.kernel, state.t, self.maturity
        g, xi = state[self.debt_process], state[self.macro_process]
        y = draws.shared(sample_gamma_forward(ck.m, ck.T1, ck.prior, t, T, g, draws.stream, draws.base))
        z = _macro_draw(draws, t, T, ck.T2, xi)
        return ck(np.full(z.shape, T), y, z) / float(ck(t, g, xi))


def _run_block(target, state, cfg, root, b, n):
    draws = _Draws(root.substream(b), n, cfg.antithetic)
    vals = np.asarray(target.sample(state, draws), dtype=float)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise EvaluationError(f"non-finite sample at draw {b * cfg.block_size + i}", node=float(b * cfg.block_size + i))
    return draws.reduce(vals)


def mc_price(target, state: MarketState, cfg: McConfig, stream_id: int = 0) -> McResult:
    """Sample-mean estimate and standard error of a target's price."""
    root = RandomStream(cfg.seed, stream_id)
    total = int(cfg.paths)
    sizes = [cfg.block_size] * (total // cfg.block_size)
    if total % cfg.block_size:
        rest = total % cfg.block_size
        sizes.append(rest + (rest % 2 if cfg.antithetic else 0))
    jobs = list(enumerate(sizes))
    if cfg.workers > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(lambda j: _run_block(target, state, cfg, root, *j), jobs))
    else:
        parts = [_run_block(target, state, cfg, root, *j) for j in jobs]
    vals = np.concatenate(parts)
    se = float(vals.std(ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else float("nan")
    return McResult(float(vals.mean()), se, int(sum(sizes)))


@dataclass(frozen=True)
class SpreadExperiment:
    """Yield spread of a digital bond over the sovereign bond along simulated information paths.

    The credit factor is 0 (default) with probability ``p0`` and 1
    otherwise; paths are simulated conditional on the outcome fixed by
    ``condition``. Times are ``k T/steps`` for ``k = 0 .. steps - 1``.
    """

    T: float = 2.0
    p0: float = 0.2
    sigmas: tuple = (0.04, 0.2, 1.0, 5.0)
    condition: str = "no_default"
    paths: int = 200
    steps: int = 500
    cap: float = 10.0
    antithetic: bool = True

    def __post_init__(self):
        if not 0.0 < self.p0 < 1.0:
            raise ConstructionError("p0 must lie in (0, 1)")
        if self.condition not in ("no_default", "default"):
            raise ConstructionError("condition must be 'no_default' or 'default'")
        if not self.T > 0 or self.steps < 2 or self.paths < 1:
            raise ConstructionError("invalid experiment size")
        if any(not s >= 0 for s in self.sigmas):
            raise ConstructionError("flow rates must be nonnegative")
        if not self.cap > 0:
            raise ConstructionError("cap must be positive")

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps) * (self.T / self.steps)

    @property
    def outcome(self) -> float:
        return 1.0 if self.condition == "no_default" else 0.0


@dataclass
class SpreadTable:
    """Spreads with shape (panels, paths, times) and the matching cap flags."""

    experiment: SpreadExperiment
    times: np.ndarray
    spread: np.ndarray
    capped: np.ndarray

    def panel(self, sigma: float) -> np.ndarray:
        return self.spread[list(self.experiment.sigmas).index(sigma)]

    def rows(self):
        for a, sigma in enumerate(self.experiment.sigmas):
            for p in range(self.spread.shape[1]):
                for k, t in enumerate(self.times):
                    yield sigma, p, t, self.spread[a, p, k], int(self.capped[a, p, k])


def _bridge_noise(exp: SpreadExperiment, stream: RandomStream, path: int, times):
    # path pairs share a substream; the odd member is the mirror image
    pair = path // 2 if exp.antithetic else path
    z = stream.substream(pair).normal((1, times.size))
    if exp.antithetic and path % 2:
        z = -z
    return _backend.bridge_fill(z, times, exp.T, 0.0, 0.0)[0]


def spread_paths(exp: SpreadExperiment, stream: RandomStream, workers: int = 1) -> SpreadTable:
    """Simulate information paths and the digital-bond spread ``-ln(pi_1t)/(T - t)`` along them.

    All flow-rate panels reuse the same bridge noise per path (common
    random numbers), so panel differences reflect the flow rate alone.
    Spreads above ``exp.cap`` (including infinite ones) are set to the cap
    and flagged.
    """
    times = exp.times
    log_odds = np.log1p(-exp.p0) - np.log(exp.p0)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            noise = list(pool.map(lambda p: _bridge_noise(exp, stream, p, times), range(exp.paths)))
    else:
        noise = [_bridge_noise(exp, stream, p, times) for p in range(exp.paths)]
    beta = np.stack(noise)
    spread = np.empty((len(exp.sigmas), exp.paths, times.size))
    capped = np.empty(spread.shape, dtype=np.uint8)
    for a, sigma in enumerate(exp.sigmas):
        xi = sigma * times[None, :] * exp.outcome + beta
        spread[a], capped[a] = _backend.digital_spreads(xi, times, exp.T, sigma, 0.0, 1.0, log_odds, exp.cap)
    return SpreadTable(exp, times, spread, capped)


def write_spread_csv(table: SpreadTable, target) -> None:
    """Write ``σ2,path,t,spread,capped`` rows (UTF-8, LF, 17 significant digits) to a path or text stream."""
    buf = io.StringIO(newline="")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["σ2", "path", "t", "spread", "capped"])
    for sigma, p, t, s, c in table.rows():
        writer.writerow([f"{sigma:.17g}", p, f"{t:.17g}", f"{s:.17g}", c])
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
