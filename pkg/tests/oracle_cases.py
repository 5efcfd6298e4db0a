"""Instrument configurations shared by the oracle tests, the freeze script and the acceptance suite.

Each case is ``(quadrature_price_fn, mc_target, state)``. ``fixed_cases``
holds the documented example configurations; ``random_case`` draws a
randomized configuration for a target from a numpy Generator.
"""
import json
from pathlib import Path

import numpy as np

from infopricing import (
    BondSpec,
    ContinuousFactor,
    CouponBondSpec,
    DiscreteFactor,
    HybridSpec,
    InfoProcessSpec,
    MarketRecovery,
    MarketState,
    OptionSpec,
    TwoFactorRecovery,
    call_price,
    coupon_bond_price,
    coupon_bond_with_recovery_price,
    credit_sensitive_bond_price,
    debt_sensitive_kernel,
    defaultable_price,
    defaultable_price_generalized,
    exponential_recovery,
    hybrid_ilcr_price,
    product_kernel,
    sovereign_price,
    sovereign_price_2d,
    two_factor_recovery_price,
    whk_quadratic_kernel,
)
from infopricing import oracle

TARGETS = ("sovereign", "digital", "recovery_digital", "generalized_2d", "option", "coupon",
           "coupon_recovery", "ilcr", "sovereign_2d", "credit_sensitive")


def _r_ce(r, z):
    return r * exponential_recovery(z)


def make_case(name, p):
    """Build one case from a parameter dict ``p``."""
    t, T = p["t"], p["T"]
    k = whk_quadratic_kernel(p["c"], p["lam"], p["U"])
    credit = InfoProcessSpec("credit", T, DiscreteFactor.digital(p["p1"]), flow_rate=p["sigma"])
    obs = {"macro": p["xi_U"], "credit": p["xi_T"]}
    if name == "sovereign":
        st = MarketState(t, obs)
        return (lambda: sovereign_price(k, st, T)), oracle.SovereignTarget(k, T), st
    if name == "digital":
        spec = BondSpec(T, credit, k)
        st = MarketState(t, obs)
        return (lambda: defaultable_price(spec, None, st)), oracle.DefaultableTarget(spec), st
    if name == "recovery_digital":
        spec = BondSpec(T, credit, k, MarketRecovery(exponential_recovery))
        st = MarketState(t, obs)
        return (lambda: defaultable_price(spec, None, st)), oracle.DefaultableTarget(spec), st
    if name == "generalized_2d":
        f2 = product_kernel(whk_quadratic_kernel(p["c2"], p["lam2"], T + p["gap"]), k)
        spec = BondSpec(T, credit, k, MarketRecovery(exponential_recovery))
        st = MarketState(t, obs)
        return ((lambda: defaultable_price_generalized(f2, spec, None, st)),
                oracle.GeneralizedTarget(f2, spec), st)
    if name == "two_factor":
        mg = InfoProcessSpec("mgmt", T, DiscreteFactor.digital(p["p1"]), flow_rate=p["sigma"])
        ec = InfoProcessSpec("econ", T, DiscreteFactor.digital(p["pE"]), flow_rate=p["sigmaE"])
        rec = TwoFactorRecovery(mg, ec, exponential_recovery, ContinuousFactor.beta(2.0, 5.0), _r_ce)
        spec = BondSpec(T, credit, k, rec)
        st = MarketState(t, {**obs, "mgmt": p["xi_T"], "econ": p["xi_E"]})
        return (lambda: two_factor_recovery_price(spec, st)), oracle.TwoFactorTarget(spec), st
    if name == "option":
        spec = OptionSpec(p["expiry"], p["K"], BondSpec(T, credit, k))
        st = MarketState(t, obs)
        return (lambda: call_price(spec, st)), oracle.OptionTarget(spec), st
    if name in ("coupon", "coupon_recovery"):
        d1 = p["T1c"]
        credits = [InfoProcessSpec("c1", d1, DiscreteFactor.digital(p["p1"]), flow_rate=p["sigma"]),
                   InfoProcessSpec("c2", T, DiscreteFactor.digital(p["p2"]), flow_rate=p["sigma2"])]
        recs = [exponential_recovery, exponential_recovery] if name == "coupon_recovery" else None
        spec = CouponBondSpec((d1, T), p["coupon"], 1.0, credits, k, recs)
        st = MarketState(t, {"macro": p["xi_U"], "c1": p["xi_1"], "c2": p["xi_2"]})
        if name == "coupon":
            return (lambda: coupon_bond_price(spec, st)), oracle.CouponTarget(spec, False), st
        return (lambda: coupon_bond_with_recovery_price(spec, st)), oracle.CouponTarget(spec), st
    if name in ("ilcr", "sovereign_2d"):
        U1, U2 = p["U"], p["U"] + p["gap"]
        f = product_kernel(whk_quadratic_kernel(p["c"], p["lam"], U1), whk_quadratic_kernel(p["c2"], p["lam2"], U2))
        st = MarketState(t, {**obs, "macro2": p["xi_U2"]})
        if name == "sovereign_2d":
            return (lambda: sovereign_price_2d(f, st, T)), oracle.Sovereign2DTarget(f, T), st
        g = product_kernel(whk_quadratic_kernel(p["c"] + 0.5, p["lam"] * 0.8, U1),
                           whk_quadratic_kernel(p["c2"], p["lam2"], U2))
        spec = HybridSpec(T, credit, f, g)
        return (lambda: hybrid_ilcr_price(spec, st)), oracle.HybridTarget(spec), st
    if name == "credit_sensitive":
        prior = ContinuousFactor.exponential(p["rate"])
        ck = debt_sensitive_kernel(k, p["m"], p["T1"], prior, kappa=1.0, rho=p["rho"])
        st = MarketState(t, {"macro": p["xi_U"], "debt": p["debt"]})
        return (lambda: credit_sensitive_bond_price(ck, st, T)), oracle.CreditSensitiveTarget(ck, T), st
    raise KeyError(name)


BASE = dict(t=0.5, T=2.0, U=5.0, c=1.0, lam=0.5, p1=0.8, sigma=0.5, xi_U=0.3, xi_T=0.4,
            c2=0.5, lam2=0.2, gap=1.0, pE=0.85, sigmaE=0.4, xi_E=0.6)

FIXED = {
    "sovereign": BASE,
    "digital": BASE,
    "recovery_digital": BASE,
    "generalized_2d": BASE,
    "two_factor": BASE,
    # option example: strike 0.6, expiry 1, valuation 0.25; lam 0.1 keeps P_1,2 above the strike
    "option": {**BASE, "t": 0.25, "expiry": 1.0, "K": 0.6, "lam": 0.1, "p1": 0.9},
    "coupon": {**BASE, "T1c": 1.0, "p1": 0.9, "p2": 0.8, "sigma2": 0.3, "coupon": 0.05, "xi_1": 0.2, "xi_2": 0.1},
    "coupon_recovery": {**BASE, "T1c": 1.0, "p1": 0.9, "p2": 0.8, "sigma2": 0.3, "coupon": 0.05,
                        "xi_1": 0.2, "xi_2": 0.1},
    "ilcr": {**BASE, "U": 4.0, "gap": 2.0, "xi_U2": -0.2},
    "sovereign_2d": {**BASE, "U": 4.0, "gap": 2.0, "xi_U2": -0.2},
    "credit_sensitive": {**BASE, "T1": 3.0, "m": 2.0, "rate": 1.0, "rho": 0.02, "debt": 0.2},
}


def fixed_case(name):
    return make_case(name, FIXED[name])


def random_params(name, g):
    """Randomized configuration for ``name`` drawn from the Generator ``g``."""
    U = g.uniform(3.0, 8.0)
    T = g.uniform(0.5, 0.8) * U
    t = g.uniform(0.0, 0.6) * T
    sd = np.sqrt(t * (U - t) / U)
    p = dict(t=t, T=T, U=U, c=g.uniform(0.0, 2.0), lam=g.uniform(0.0, 0.6), p1=g.uniform(0.5, 0.97),
             sigma=g.uniform(0.05, 1.5), xi_U=sd * g.standard_normal(), c2=g.uniform(0.1, 1.5),
             lam2=g.uniform(0.0, 0.4), gap=g.uniform(0.3, 2.0), pE=g.uniform(0.5, 0.95),
             sigmaE=g.uniform(0.05, 1.0))
    sdT = np.sqrt(t * (T - t) / T)
    p["xi_T"] = p["sigma"] * t * p["p1"] + sdT * g.standard_normal()
    p["xi_E"] = p["sigmaE"] * t * p["pE"] + sdT * g.standard_normal()
    if name == "option":
        p["expiry"] = t + g.uniform(0.2, 0.8) * (T - t)
        p["lam"] = g.uniform(0.0, 0.2)
        # strike as a fraction of the forward sovereign price so the payoff is live
        k = whk_quadratic_kernel(p["c"], p["lam"], U)
        now = MarketState(t, {"macro": p["xi_U"]})
        fwd = sovereign_price(k, now, T) / sovereign_price(k, now, p["expiry"])
        p["K"] = g.uniform(0.3, 1.0) * fwd
    if name in ("coupon", "coupon_recovery"):
        p["T1c"] = t + g.uniform(0.2, 0.8) * (T - t)
        p["p2"] = g.uniform(0.5, 0.95)
        p["sigma2"] = g.uniform(0.05, 1.0)
        p["coupon"] = g.uniform(0.0, 0.1)
        sd1 = np.sqrt(t * (p["T1c"] - t) / p["T1c"])
        p["xi_1"] = p["sigma"] * t + sd1 * g.standard_normal()
        p["xi_2"] = p["sigma2"] * t + sdT * g.standard_normal()
    if name in ("ilcr", "sovereign_2d"):
        p["xi_U2"] = np.sqrt(t * (U + p["gap"] - t) / (U + p["gap"])) * g.standard_normal()
    if name == "credit_sensitive":
        p["m"] = g.uniform(0.5, 3.0)
        p["rate"] = g.uniform(0.5, 2.0)
        p["rho"] = g.uniform(0.0, 0.05)
        # observed debt: a draw of X gamma_t with gamma_t ~ Beta(m t, m (T1 - t))
        T1 = p["T1"] = T + g.uniform(0.1, 1.0) * (U - T)
        p["debt"] = g.exponential(1.0 / p["rate"]) * g.beta(p["m"] * t, p["m"] * (T1 - t)) if t > 0 else 0.0
    return {k: float(v) for k, v in p.items()}


def random_case(name, g):
    return make_case(name, random_params(name, g))


_FROZEN = json.loads((Path(__file__).parent / "data" / "frozen_oracle.json").read_text())


def frozen(name):
    """Frozen Monte Carlo ``(estimate, stderr)`` for a fixed case (see tools/freeze_oracle_values.py)."""
    if name == "alpha":
        d = _FROZEN["alpha"]
        return d["variance"], d["stderr"]
    d = _FROZEN["cases"][name]
    return d["estimate"], d["stderr"]
