"""Market factors and the information processes that reveal them.

Two bridge families are supported:

* Brownian information ``xi_t = sigma * t * X + beta_t`` where ``beta`` is a
  Brownian bridge pinned to zero at the horizon;
* gamma information ``xi_t = X * gamma_t`` where ``gamma`` is a gamma bridge
  rising from 0 to 1 on [0, horizon].
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import _backend
from .errors import ConstructionError, DomainError, StateError
from .numerics import QuadratureRule, RandomStream, integrate_interval, log_beta

__all__ = [
    "DiscreteFactor",
    "ContinuousFactor",
    "InfoProcessSpec",
    "MarketState",
    "bridge_variance",
    "bridge_coefficients",
    "conditional_density",
    "brownian_bridge_transition",
    "simulate_info_path",
    "simulate_gamma_bridge",
    "gamma_posterior_log_density",
    "ArrowDebreu",
    "arrow_debreu_density",
    "sample_gamma_posterior",
    "sample_gamma_forward",
]


class DiscreteFactor:
    """A factor with finitely many sorted outcomes and prior probabilities."""

    def __init__(self, values: Sequence[float], priors: Sequence[float]):
        values = np.asarray(values, dtype=float)
        priors = np.asarray(priors, dtype=float)
        if values.ndim != 1 or values.shape != priors.shape or values.size == 0:
            raise ConstructionError("values and priors must be 1-d sequences of equal length")
        if np.any(np.diff(values) <= 0):
            raise ConstructionError("factor values must be strictly increasing")
        if np.any(priors < 0) or abs(priors.sum() - 1.0) > 1e-12:
            raise ConstructionError("priors must be nonnegative and sum to one")
        values.setflags(write=False)
        priors.setflags(write=False)
        self.values = values
        self.priors = priors

    @classmethod
    def digital(cls, survival: float) -> "DiscreteFactor":
        """Default indicator: 0 with probability ``1 - survival``, 1 otherwise."""
        return cls([0.0, 1.0], [1.0 - survival, survival])

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"DiscreteFactor(values={self.values.tolist()}, priors={self.priors.tolist()})"

    def __eq__(self, other):
        return (isinstance(other, DiscreteFactor) and np.array_equal(self.values, other.values)
                and np.array_equal(self.priors, other.priors))

    __hash__ = None

    @property
    def mean(self) -> float:
        return float(self.values @ self.priors)

    @property
    def lower(self) -> float:
        return float(self.values[0])


class ContinuousFactor:
    """A factor with a density on an interval ``support = (lo, hi)``; ``hi`` may be inf.

    The density must be vectorised. Its total mass is checked at construction.
    ``breakpoints`` lists interior points where the density is not smooth; the
    integrators split there.
    """

    def __init__(self, density: Callable, support: tuple[float, float], *,
                 mean: float | None = None, variance: float | None = None,
                 ppf: Callable | None = None, breakpoints: Sequence[float] = (),
                 check: bool = True):
        lo, hi = float(support[0]), float(support[1])
        if not lo < hi or np.isinf(lo):
            raise ConstructionError(f"invalid support {support!r}")
        self.density = density
        self.support = (lo, hi)
        self.moments_hint = (mean, variance)
        self._ppf = ppf
        self.breakpoints = tuple(sorted(float(b) for b in breakpoints if lo < b < hi))
        self._upper = None
        self._cdf_table = None
        if check:
            mass = self.integrate(lambda x: self.density(x))
            if abs(mass - 1.0) > 1e-8:
                raise ConstructionError(f"density integrates to {mass!r}, not 1")

    # -- constructors ---------------------------------------------------
    @classmethod
    def exponential(cls, rate: float, loc: float = 0.0) -> "ContinuousFactor":
        dist = stats.expon(loc=loc, scale=1.0 / rate)
        return cls(dist.pdf, (loc, np.inf), mean=dist.mean(), variance=dist.var(), ppf=dist.ppf)

    @classmethod
    def lognormal(cls, mu: float, s: float) -> "ContinuousFactor":
        dist = stats.lognorm(s, scale=np.exp(mu))
        return cls(dist.pdf, (0.0, np.inf), mean=dist.mean(), variance=dist.var(), ppf=dist.ppf)

    @classmethod
    def uniform(cls, a: float, b: float) -> "ContinuousFactor":
        width = b - a

        def pdf(x):
            x = np.asarray(x, dtype=float)
            return np.where((x >= a) & (x <= b), 1.0 / width, 0.0)

        return cls(pdf, (a, b), mean=0.5 * (a + b), variance=width * width / 12.0,
                   ppf=lambda q: a + width * np.asarray(q))

    @classmethod
    def beta(cls, a: float, b: float, lo: float = 0.0, hi: float = 1.0) -> "ContinuousFactor":
        dist = stats.beta(a, b, loc=lo, scale=hi - lo)
        return cls(dist.pdf, (lo, hi), mean=dist.mean(), variance=dist.var(), ppf=dist.ppf,
                   check=a >= 1 and b >= 1)

    @classmethod
    def tabulated(cls, x: Sequence[float], p: Sequence[float]) -> "ContinuousFactor":
        """Piecewise-linear density through the points ``(x, p)``, rescaled to unit mass."""
        x = np.asarray(x, dtype=float)
        p = np.asarray(p, dtype=float)
        if x.ndim != 1 or x.shape != p.shape or x.size < 2 or np.any(np.diff(x) <= 0):
            raise ConstructionError("tabulated density needs increasing x and matching p")
        if np.any(p < 0):
            raise ConstructionError("tabulated density must be nonnegative")
        mass = np.trapezoid(p, x)
        if not mass > 0:
            raise ConstructionError("tabulated density has zero mass")
        p = p / mass

        def pdf(v):
            return np.interp(v, x, p, left=0.0, right=0.0)

        return cls(pdf, (x[0], x[-1]), breakpoints=x[1:-1], check=False)

    # -- integration helpers ---------------------------------------------
    def upper_limit(self, tail: float = 1e-10) -> float:
        """Support endpoint, or the ``1 - tail`` quantile for half-infinite support."""
        hi = self.support[1]
        if np.isfinite(hi):
            return hi
        if self._upper is None:
            if self._ppf is not None:
                self._upper = float(self._ppf(1.0 - tail))
            else:
                lo = self.support[0]
                mean, var = self.moments_hint
                x = (mean if mean is not None else lo + 1.0) + 10.0 * np.sqrt(var or 1.0)
                while self.integrate(self.density, x, np.inf) > tail:
                    x = lo + 2.0 * (x - lo)
                self._upper = x
        return self._upper

    def integrate(self, h: Callable, a: float | None = None, b: float | None = None,
                  rule: QuadratureRule | None = None):
        """Integral of ``h`` over ``[a, b]`` (default: the support), split at breakpoints."""
        lo, hi = self.support
        a = lo if a is None else max(a, lo)
        b = hi if b is None else min(b, hi)
        rule = rule or QuadratureRule.adaptive(1e-11, abs_tol=1e-15)
        cuts = [a] + [c for c in self.breakpoints if a < c < b] + [b]
        total = 0.0
        for left, right in zip(cuts[:-1], cuts[1:]):
            total = total + integrate_interval(h, left, right, rule)
        return total

    def expectation(self, h: Callable):
        """``E[h(X)]``; ``h`` may be vector valued (abscissae along the first axis)."""
        def integrand(x):
            vals = np.asarray(h(x), dtype=float)
            dens = np.asarray(self.density(x), dtype=float)
            return vals * dens.reshape((-1,) + (1,) * (vals.ndim - 1))

        return self.integrate(integrand, self.support[0], self.upper_limit())

    @property
    def mean(self) -> float:
        m = self.moments_hint[0]
        return float(m) if m is not None else float(self.expectation(lambda x: x))

    def sample(self, stream: RandomStream, size: int) -> np.ndarray:
        """Inverse-CDF draws from a finely tabulated distribution function."""
        if self._cdf_table is None:
            lo, hi = self.support[0], self.upper_limit()
            grid = np.unique(np.concatenate([np.linspace(lo, hi, 16385), self.breakpoints]))
            dens = np.asarray(self.density(grid), dtype=float)
            cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))])
            cdf /= cdf[-1]
            self._cdf_table = (cdf, grid)
        cdf, grid = self._cdf_table
        return np.interp(stream.uniform(size), cdf, grid)


FactorLike = DiscreteFactor | ContinuousFactor


@dataclass(frozen=True)
class InfoProcessSpec:
    """One information process; ``name`` is its key in :class:`MarketState`."""

    name: str
    horizon: float
    factor: FactorLike | None = None
    bridge: str = "brownian"
    flow_rate: float = 0.0
    activity_rate: float | None = None

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConstructionError("horizon must be positive")
        if self.bridge == "brownian":
            if not self.flow_rate >= 0:
                raise ConstructionError("brownian information needs flow_rate >= 0")
        elif self.bridge == "gamma":
            if self.activity_rate is None or not self.activity_rate > 0:
                raise ConstructionError("gamma information needs activity_rate > 0")
            if self.factor is not None:
                lower = (self.factor.lower if isinstance(self.factor, DiscreteFactor)
                         else self.factor.support[0])
                if lower < 0:
                    raise ConstructionError("gamma information needs a nonnegative factor")
        else:
            raise ConstructionError(f"unknown bridge family {self.bridge!r}")


@dataclass(frozen=True)
class MarketState:
    """Observation time and the observed value of each information process."""

    t: float
    observations: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.t >= 0:
            raise DomainError("observation time must be nonnegative")

    def __getitem__(self, name: str) -> float:
        try:
            return float(self.observations[name])
        except KeyError:
            raise StateError(f"market state at t={self.t} has no observation of {name!r}") from None

    def with_time(self, t: float, **updates) -> "MarketState":
        obs = dict(self.observations)
        obs.update(updates)
        return MarketState(t, obs)


def bridge_variance(t: float, T: float, U: float) -> float:
    """Variance ``(T - t)(U - T)/(U - t)`` of ``xi_TU - (U - T)/(U - t) xi_tU`` under the bridge law."""
    if not (0 <= t <= T <= U and t < U):
        raise DomainError(f"bridge_variance needs 0 <= t <= T <= U and t < U, got ({t}, {T}, {U})")
    return (T - t) * (U - T) / (U - t)


def bridge_coefficients(t: float, T: float, U: float) -> tuple[float, float]:
    """``(nu, kappa)`` with ``xi_TU = nu * Y + kappa * xi_tU``, ``Y ~ N(0, 1)`` under the bridge law."""
    return float(np.sqrt(bridge_variance(t, T, U))), (U - T) / (U - t)


def _log_weights(factor, sigma, T, t, xi):
    x = factor.values
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore"):
        logp = np.log(factor.priors)
    expo = (T / (T - t)) * (sigma * x * xi[..., None] - 0.5 * sigma * sigma * x * x * t)
    return logp + expo


def conditional_density(factor: DiscreteFactor, sigma: float, T: float, t: float, xi):
    """Posterior probabilities of each factor outcome given ``xi_tT = xi``.

    Vectorised over ``xi``: the outcome axis is last.
    """
    if not (0 <= t < T):
        raise DomainError(f"density undefined at/after revelation: need 0 <= t < T, got t={t}, T={T}")
    if not sigma >= 0:
        raise DomainError("flow rate must be nonnegative")
    lw = _log_weights(factor, sigma, T, t, xi)
    lw = lw - np.max(lw, axis=-1, keepdims=True)
    w = np.exp(lw)
    return w / np.sum(w, axis=-1, keepdims=True)


def brownian_bridge_transition(t: float, s: float, U: float, xi_t):
    """Mean and variance of ``xi_sU`` given ``xi_tU = xi_t`` under the bridge law."""
    if not (0 <= t <= s < U):
        raise DomainError(f"transition needs 0 <= t <= s < U, got ({t}, {s}, {U})")
    ratio = (U - s) / (U - t)
    return ratio * xi_t, (s - t) * ratio


def _check_grid(grid, horizon):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise DomainError("grid must be strictly increasing")
    if grid[0] < 0 or grid[-1] > horizon:
        raise DomainError(f"grid must lie within [0, {horizon}]")
    return grid


def simulate_info_path(spec: InfoProcessSpec, outcome, grid, stream: RandomStream,
                       n_paths: int | None = None) -> np.ndarray:
    """Paths of ``xi_t = sigma t X + beta_t`` given the factor outcome ``X``.

    The bridge noise is sampled exactly through its Gaussian transitions on
    ``grid``. ``outcome`` may be a scalar or one value per path. Returns a 1-d
    path when ``n_paths`` is None, else an array of shape (n_paths, len(grid)).
    """
    if spec.bridge != "brownian":
        raise DomainError("simulate_info_path needs a brownian process")
    grid = _check_grid(grid, spec.horizon)
    n = 1 if n_paths is None else int(n_paths)
    z = stream.normal((n, grid.size))
    beta = _backend.bridge_fill(z, grid, spec.horizon, 0.0, 0.0)
    out = spec.flow_rate * grid[None, :] * np.reshape(np.asarray(outcome, dtype=float), (-1, 1)) + beta
    return out[0] if n_paths is None else out


def simulate_gamma_bridge(spec: InfoProcessSpec, outcome, grid, stream: RandomStream,
                          n_paths: int | None = None, start: tuple[float, float] = (0.0, 0.0)) -> np.ndarray:
    """Paths of ``X * gamma_t`` using exact sequential beta increments of the gamma bridge.

    ``start = (t0, g0)`` continues a bridge observed at ``gamma_t0 = g0``;
    the grid must then lie in ``[t0, horizon]``.
    """
    if spec.bridge != "gamma":
        raise DomainError("simulate_gamma_bridge needs a gamma process")
    outcome = np.asarray(outcome, dtype=float)
    if np.any(outcome < 0):
        raise DomainError("gamma information needs a nonnegative outcome")
    grid = _check_grid(grid, spec.horizon)
    m, T1 = spec.activity_rate, spec.horizon
    t0, g0 = map(float, start)
    if grid[0] < t0 or not 0.0 <= g0 <= 1.0:
        raise DomainError("grid must start at or after the starting time, with 0 <= g0 <= 1")
    n = 1 if n_paths is None else int(n_paths)
    gamma = np.zeros((n, grid.size))
    cur = np.full(n, g0)
    prev = t0
    for k, tk in enumerate(grid):
        if tk > prev:
            rest = m * (T1 - tk)
            frac = stream.beta(m * (tk - prev), rest, n) if rest > 0 else np.ones(n)
            cur = cur + (1.0 - cur) * frac
        gamma[:, k] = cur
        prev = tk
    out = np.reshape(outcome, (-1, 1)) * gamma
    return out[0] if n_paths is None else out


def gamma_posterior_log_density(m: float, T1: float, t: float, xi: float, x):
    """Unnormalised log posterior density of the factor given ``xi^gamma_t = xi``, excluding the prior.

    Equals ``(1 - m T1) ln x + (m (T1 - t) - 1) ln(x - xi)`` for ``x > xi``.
    """
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        if xi == 0.0:
            out = -m * t * np.log(x)
        else:
            out = (1.0 - m * T1) * np.log(x) + (m * (T1 - t) - 1.0) * np.log(x - xi)
    return np.where(x > xi, out, -np.inf)


class ArrowDebreu:
    """Conditional density of ``xi^gamma_TT1`` given ``xi^gamma_tT1 = xi``.

    The normalising integral over the prior is computed once; evaluating the
    density at a batch of points costs one vector-valued adaptive integral.
    Power factors are combined in log space relative to the scale ``xi`` so
    no intermediate overflows.
    """

    def __init__(self, m: float, T1: float, prior: ContinuousFactor, t: float, T: float,
                 xi: float, rule: QuadratureRule | None = None):
        if not (0 <= t < T < T1):
            raise DomainError(f"need 0 <= t < T < T1, got ({t}, {T}, {T1})")
        if not m > 0:
            raise DomainError("activity rate must be positive")
        if xi < 0:
            raise DomainError("gamma information value must be nonnegative")
        if prior.support[0] < 0:
            raise DomainError("prior of a gamma-bridge factor must live on [0, inf)")
        if xi == 0 and t > 0 and m * t >= 1 and prior.support[0] == 0:
            raise DomainError("a zero gamma observation after time 0 leaves a non-normalisable posterior "
                              "when m t >= 1 and the prior reaches 0")
        self.m, self.T1, self.prior, self.t, self.T, self.xi = m, T1, prior, t, T, float(xi)
        self.a = m * (T - t)
        self.b = m * (T1 - T)
        self.c = m * (T1 - t)
        self.x_power = 1.0 - m * T1
        self.rule = rule or QuadratureRule.adaptive(1e-10, abs_tol=1e-300, max_subdivisions=400)
        self.upper = prior.upper_limit()
        if self.xi >= self.upper:
            raise DomainError("observed level lies beyond the prior's support")
        self.scale = self.xi if self.xi > 0 else max(prior.mean, 1e-12)
        # large activity rates make every weight a narrow peak that a single
        # adaptive pass can step over, so ranges are pre-split
        self.pieces = 1 if m * T1 <= 20 else int(min(128, np.ceil(2.0 * np.sqrt(m * T1))))
        self.log_norm = log_beta(self.a, self.b)
        if self.xi == 0.0:
            # at level 0 the two powers merge into x^(-m t)
            den, shift = self._moments(np.array([0.0]), 1.0 - m * t, x_power=0.0)
        else:
            den, shift = self._moments(np.array([self.xi]), self.c)
        with np.errstate(divide="ignore"):
            self.log_denominator = float(np.log(den[0]) + shift[0])

    def _log_peak(self, lowers, power, x_power):
        """Largest value of the log power factors over the prior's support, per lower limit.

        Subtracting it before exponentiating keeps weights with large
        exponents (large activity rates) from underflowing.
        """
        s = self.scale
        lo = np.maximum(lowers, self.prior.support[0])
        if power > 1.0 and x_power < 0.0 and -x_power > power - 1.0:
            # interior stationary point of x_power ln x + (power - 1) ln(x - y)
            peak = lowers * x_power / (x_power + power - 1.0)
        elif power > 1.0:
            peak = np.full(lowers.shape, self.upper)
        else:
            peak = lo
        x = np.clip(peak, lo, self.upper)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = x_power * np.log(x / s)
            if power > 1.0:
                val = val + (power - 1.0) * np.log((x - lowers) / s)
        return np.where(np.isfinite(val), val, 0.0)

    def _weight(self, x, lower, power, x_power, shift=0.0):
        s = self.scale
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            logw = x_power * np.log(x / s) + (power - 1.0) * np.log((x - lower) / s) - shift
            out = self.prior.density(x) * np.exp(logw)
        return np.where(x > lower, out, 0.0)

    def _moments(self, lowers, power, x_power=None):
        """``int p(x) (x/s)^x_power ((x - y)/s)^(power - 1) dx / s`` over ``x > y`` for many ``y``.

        The prior's support is cut at its breakpoints and every piece is
        integrated for all lower limits in one vector-valued adaptive pass.
        A piece starting at or containing ``y`` is mapped through
        ``x = y + L u^(1/power)`` when ``power < 1``; the power factor then
        cancels the jacobian exactly and ``x - y`` is never formed.

        Returns ``(values, shift)``; the integrals are ``values * exp(shift)``.
        """
        xp = self.x_power if x_power is None else x_power
        lowers = np.asarray(lowers, dtype=float)
        s = self.scale
        shift = self._log_peak(lowers, power, xp)
        cuts = np.array([self.prior.support[0], *self.prior.breakpoints, self.upper])
        out = np.zeros(lowers.shape)
        for left, right in zip(cuts[:-1], cuts[1:]):
            inside = (lowers >= left) & (lowers < right)
            below = lowers < left
            if np.any(below):
                ys, sh = lowers[below], shift[below]

                def whole(x, _ys=ys, _sh=sh):
                    x = np.asarray(x, dtype=float)[:, None]
                    vals = self._weight(x, _ys[None, :], power, xp, _sh[None, :])
                    return np.where(np.isfinite(vals), vals, 0.0)

                out[below] += np.atleast_1d(self._split(whole, left, right, self.rule)) / s
            if np.any(inside):
                ys, sh = lowers[inside], shift[inside]
                L = right - ys
                if power < 1.0:
                    def part(u, _ys=ys, _L=L, _sh=sh):
                        # clamp: y + L rounds past the piece end when L is tiny
                        x = np.minimum(_ys[None, :] + _L[None, :] * np.asarray(u, dtype=float)[:, None] ** (1.0 / power), right)
                        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                            vals = self.prior.density(x) * np.exp(xp * np.log(x / s) - _sh[None, :])
                        return np.where(np.isfinite(vals), vals, 0.0)

                    scale = (L / s) ** power / power
                else:
                    def part(u, _ys=ys, _L=L, _sh=sh):
                        off = _L[None, :] * np.asarray(u, dtype=float)[:, None]
                        x = np.minimum(_ys[None, :] + off, right)
                        # the power factor comes from the offset itself, never from x - y
                        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                            logw = xp * np.log(x / s) - _sh[None, :]
                            if power != 1.0:
                                logw = logw + (power - 1.0) * np.log(off / s)
                            vals = self.prior.density(x) * np.exp(logw)
                        return np.where(np.isfinite(vals), vals, 0.0)

                    scale = L / s
                out[inside] += np.atleast_1d(self._split(part, 0.0, 1.0, self.rule)) * scale
        return out, shift

    def _split(self, g, lo, hi, rule):
        return integrate_interval(g, lo, hi, rule, panels=self.pieces)

    def _log_rest(self, d):
        """``log A(xi + d)`` without its ``(d/s)^(a - 1)`` factor, for offsets ``d > 0``."""
        num, shift = self._moments(self.xi + d, self.b)
        with np.errstate(divide="ignore"):
            return np.log(num) + shift - np.log(self.scale) - self.log_denominator - self.log_norm

    def density(self, y):
        """``A_tT(y)``; zero for ``y <= xi``."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        out = np.zeros(y_arr.shape)
        live = (y_arr > self.xi) & (y_arr < self.upper)
        if np.any(live):
            d = y_arr[live] - self.xi
            out[live] = np.exp((self.a - 1.0) * np.log(d / self.scale) + self._log_rest(d))
        return float(out[0]) if np.ndim(y) == 0 else out

    def integrate(self, h: Callable, upper: float | None = None,
                  rule: QuadratureRule | None = None, lower: float | None = None):
        """``int A(y) h(y) dy`` over ``(lower, upper]`` (default: the whole support).

        ``h`` may be vector valued. The range is split where the prior has
        breakpoints. From the endpoint ``xi`` with ``a = m (T - t) < 1`` the
        offset ``y - xi = v^(1/a)`` is generated directly, so the endpoint
        power law cancels against the jacobian.
        """
        rule = rule or self.rule
        lower = self.xi if lower is None else max(lower, self.xi)
        upper = self.upper if upper is None else min(upper, self.upper)
        if upper <= lower:
            return 0.0
        a, s, xi = self.a, self.scale, self.xi
        knots = [c for c in (self.prior.support[0], *self.prior.breakpoints) if lower < c < upper]
        cuts = [lower - xi] + [c - xi for c in knots] + [upper - xi]

        def shaped(vals, weight):
            vals = np.asarray(vals, dtype=float)
            return vals * weight.reshape((-1,) + (1,) * (vals.ndim - 1))

        def by_offset(d):
            d = np.asarray(d, dtype=float)
            w = np.zeros(d.shape)
            ok = d > 0
            w[ok] = np.exp((a - 1.0) * np.log(d[ok] / s) + self._log_rest(d[ok]))
            return shaped(h(xi + d), w)

        def by_power(v):
            d = np.asarray(v, dtype=float) ** (1.0 / a)
            w = np.zeros(d.shape)
            ok = d > 0
            w[ok] = np.exp(self._log_rest(d[ok])) * s ** (1.0 - a) / a
            return shaped(h(xi + d), w)

        total = 0.0
        for d0, d1 in zip(cuts[:-1], cuts[1:]):
            if d0 == 0.0 and a < 1.0:
                total = total + self._split(by_power, 0.0, d1 ** a, rule)
            else:
                total = total + self._split(by_offset, d0, d1, rule)
        return total

    def cdf(self, y):
        """Distribution function of ``xi^gamma_TT1`` at the points ``y``."""
        y_arr = np.atleast_1d(np.asarray(y, dtype=float))
        order = np.argsort(y_arr)
        out = np.zeros(y_arr.shape)
        acc, prev = 0.0, self.xi
        one = lambda v: np.ones_like(np.asarray(v, dtype=float))
        rule = QuadratureRule.adaptive(1e-9, abs_tol=1e-14)
        for idx in order:
            yi = min(y_arr[idx], self.upper)
            if yi > prev:
                acc += self.integrate(one, upper=yi, rule=rule, lower=prev)
                prev = yi
            out[idx] = acc if y_arr[idx] > self.xi else 0.0
        return float(out[0]) if np.ndim(y) == 0 else out


def _posterior_table(m, T1, prior, t, xi, size=20001):
    """Tabulated inverse distribution function of the factor given ``xi^gamma_t = xi``.

    Abscissae ``x = xi + L u^(1/q)`` with ``q = min(1, m (T1 - t))`` absorb
    the power-law singularity at ``xi``; the cumulative trapezoid is taken in
    ``u`` where the integrand is bounded.
    """
    upper = prior.upper_limit()
    lo = max(xi, prior.support[0])
    if xi == 0.0:
        q = min(1.0, 1.0 - m * t)
        if q <= 0:
            raise DomainError("posterior at level 0 is not normalisable for m t >= 1")
    else:
        q = min(1.0, m * (T1 - t))
    L = upper - lo
    u = np.linspace(0.0, 1.0, size)
    x = lo + L * u ** (1.0 / q)
    with np.errstate(divide="ignore", invalid="ignore"):
        if xi == 0.0:
            logw = (-m * t - (q - 1.0)) * np.log(x)
        else:
            logw = (1.0 - m * T1) * np.log(x) + (m * (T1 - t) - q) * np.log(x - xi)
        if lo > xi:
            # the singular factor is absent when the support starts above xi
            logw = logw + (q - 1.0) * np.log(x - xi) + np.log(np.where(u > 0, u ** (1.0 / q - 1.0), 0.0))
        logw = logw + np.log(np.asarray(prior.density(x), dtype=float))
    logw = np.where(np.isfinite(logw), logw, -np.inf)
    if xi == 0.0 or lo == xi:
        # the u-integrand is finite at u = 0: fill it from its neighbour
        logw[0] = logw[1]
    w = np.exp(logw - np.max(logw))
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]))])
    cdf /= cdf[-1]
    return cdf, x


def sample_gamma_posterior(m: float, T1: float, prior: ContinuousFactor, t: float, xi: float,
                           stream: RandomStream, size: int) -> np.ndarray:
    """Draws of the factor ``X`` given gamma information ``X gamma_t = xi``.

    The posterior density is proportional to
    ``p(x) x^(1 - m T1) (x - xi)^(m (T1 - t) - 1)`` on ``x > xi``.
    """
    cdf, x = _posterior_table(m, T1, prior, t, xi)
    return np.interp(stream.uniform(size), cdf, x)


def sample_gamma_forward(m: float, T1: float, prior: ContinuousFactor, t: float, T: float,
                         xi: float, stream: RandomStream, size: int) -> np.ndarray:
    """Draws of ``xi^gamma_T`` given ``xi^gamma_t = xi``.

    Uses the posterior of ``X`` and the exact bridge increment
    ``xi + (X - xi) Beta(m (T - t), m (T1 - T))``, a route independent of
    the Arrow-Debreu density formula.
    """
    if not (0 <= t < T < T1):
        raise DomainError(f"need 0 <= t < T < T1, got ({t}, {T}, {T1})")
    X = sample_gamma_posterior(m, T1, prior, t, xi, stream, size)
    frac = stream.beta(m * (T - t), m * (T1 - T), size)
    return xi + (X - xi) * frac


def arrow_debreu_density(m: float, T1: float, prior: ContinuousFactor, t: float, T: float,
                         xi_gamma: float, y_gamma):
    """Arrow-Debreu density ``A_tT(y_gamma)`` of gamma-bridge information."""
    return ArrowDebreu(m, T1, prior, t, T, xi_gamma).density(y_gamma)
