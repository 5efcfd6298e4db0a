import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.optimize import brentq

from infopricing import (
    BondSpec,
    CouponBondSpec,
    DiscreteFactor,
    DomainError,
    HybridSpec,
    InfoProcessSpec,
    MarketState,
    McConfig,
    OptionSpec,
    QuadratureRule,
    RandomStream,
    alpha_variance,
    call_price,
    conditional_density,
    coupon_bond_price,
    coupon_bond_with_recovery_price,
    defaultable_price,
    deterministic_kernel,
    exponential_recovery,
    hybrid_ilcr_price,
    ilcr_factorized_price,
    mc_price,
    option_critical_value,
    option_inner_value,
    product_kernel,
    sovereign_price,
    sovereign_price_2d,
    whk_quadratic_kernel,
)

from infopricing import oracle

import oracle_cases
from conftest import rel


def within_se(value, name, k=3.0):
    est, se = oracle_cases.frozen(name)
    assert abs(value - est) <= k * se, (value, est, se)


# --- alpha variance (runs first: the option formulas rest on it) ------------

def test_alpha_examples():
    assert alpha_variance(1.0, 1.0, 2.0) == 0.0
    assert alpha_variance(0.0, 1.5, 2.0) == pytest.approx(1.5 / (2.0 * 0.5), rel=1e-15)
    for s, t, T in [(0.5, 1.0, 2.0), (0.1, 0.3, 5.0), (1.0, 2.9, 3.0)]:
        two_term = t / (T * (T - t)) - s / (T * (T - s))
        assert alpha_variance(s, t, T) == pytest.approx(two_term, rel=1e-12)


def test_alpha_pin_against_bridge_simulation():
    within_se(alpha_variance(0.5, 1.0, 2.0), "alpha")


@pytest.mark.parametrize("args", [(1.0, 0.5, 2.0), (0.5, 2.0, 2.0), (-0.1, 0.5, 2.0)])
def test_alpha_ordering(args):
    with pytest.raises(DomainError):
        alpha_variance(*args)


def test_alpha_increasing_in_t():
    T = 3.0
    for s in (0.0, 0.5, 1.2):
        v = [alpha_variance(s, t, T) for t in np.linspace(s, 2.95, 25)]
        assert v[0] == 0.0 and np.all(np.diff(v) > 0)


# --- critical value and inner expectation ---------------------------------

def expiry_excess(z, pi0, pi1, P, K, x0, x1, sigma, alpha, T):
    """Unnormalised ``B_tT - K`` at expiry as a function of the standardised news level ``z``."""
    a = sigma * T * alpha
    return sum(p * math.exp(a * x * z - 0.5 * (a * x) ** 2) * (P * x - K) for p, x in ((pi0, x0), (pi1, x1)))


def test_critical_value_symmetric():
    P, x1, sigma, alpha, T = 0.8, 1.0, 0.5, 0.7, 2.0
    z = option_critical_value(0.5, 0.5, P, x1 * P / 2, 0.0, x1, sigma, alpha, T)
    assert z == pytest.approx(0.5 * sigma * x1 * alpha * T, rel=1e-14)


def test_critical_value_diverges_near_upper_strike():
    z = [option_critical_value(0.3, 0.7, 0.8, 0.8 * (1 - eps), 0.0, 1.0, 0.5, 0.7, 2.0) for eps in (1e-2, 1e-6, 1e-12)]
    assert z[0] < z[1] < z[2] and z[2] > 20


def test_critical_value_no_root():
    assert option_critical_value(0.3, 0.7, 0.8, 0.9, 0.0, 1.0, 0.5, 0.7, 2.0) is None
    assert option_critical_value(0.3, 0.7, 0.8, 0.1, 0.2, 1.0, 0.5, 0.7, 2.0) is None
    assert option_critical_value(0.0, 1.0, 0.8, 0.4, 0.0, 1.0, 0.5, 0.7, 2.0) is None


@given(pi1=st.floats(0.05, 0.95), P=st.floats(0.3, 1.0), u=st.floats(0.05, 0.95),
       x0=st.floats(0.0, 0.5), sigma=st.floats(0.1, 2.0), alpha=st.floats(0.1, 1.5))
def test_critical_value_is_root(pi1, P, u, x0, sigma, alpha):
    x1, T = 1.0, 2.0
    K = P * (x0 + u * (x1 - x0))
    args = (1 - pi1, pi1, P, K, x0, x1, sigma, alpha, T)
    z = option_critical_value(*args)
    span = 10.0 + 40.0 / (sigma * T * alpha)
    ref = brentq(lambda v: expiry_excess(v, *args), -span, span, xtol=1e-13)
    assert z == pytest.approx(ref, abs=1e-8 * max(1.0, abs(ref)))


def test_inner_value_against_simulation():
    pi0, pi1, P, K, x0, x1, sigma, alpha, T = 0.25, 0.75, 0.85, 0.6, 0.1, 1.0, 0.6, 0.8, 2.0
    exact = float(option_inner_value(pi0, pi1, P, K, x0, x1, sigma, alpha, T)[0])
    z = RandomStream(42).normal(400_000)
    a = sigma * T * alpha
    # under the bridge measure the news is N(0, 1); reweight to posterior-at-expiry prices
    w0 = pi0 * np.exp(a * x0 * z - 0.5 * (a * x0) ** 2)
    w1 = pi1 * np.exp(a * x1 * z - 0.5 * (a * x1) ** 2)
    payoff = np.maximum(w0 * (P * x0 - K) + w1 * (P * x1 - K), 0.0)
    se = payoff.std() / math.sqrt(z.size)
    assert abs(payoff.mean() - exact) < 3 * se


def test_inner_value_branches():
    # strike below every outcome: linear; above: worthless; degenerate posteriors: intrinsic value
    assert option_inner_value(0.4, 0.6, 1.0, 0.05, 0.1, 1.0, 0.5, 0.5, 2.0)[0] == pytest.approx(0.4 * 0.05 + 0.6 * 0.95)
    assert option_inner_value(0.4, 0.6, 1.0, 1.2, 0.1, 1.0, 0.5, 0.5, 2.0)[0] == 0.0
    assert option_inner_value(0.0, 1.0, 0.9, 0.5, 0.0, 1.0, 0.5, 0.5, 2.0)[0] == pytest.approx(0.4)
    assert option_inner_value(1.0, 0.0, 0.9, 0.5, 0.0, 1.0, 0.5, 0.5, 2.0)[0] == 0.0


# --- call price --------------------------------------------------------------

@pytest.fixture(scope="module")
def option_case():
    p = oracle_cases.FIXED["option"]
    k = whk_quadratic_kernel(p["c"], p["lam"], p["U"])
    credit = InfoProcessSpec("credit", 2.0, DiscreteFactor.digital(p["p1"]), flow_rate=p["sigma"])
    bond = BondSpec(2.0, credit, k)
    return bond, MarketState(p["t"], {"macro": p["xi_U"], "credit": p["xi_T"]})


def test_call_oracle():
    price, _, _ = oracle_cases.fixed_case("option")
    within_se(price(), "option")


def test_call_zero_strike_is_bond(option_case):
    bond, s = option_case
    assert rel(call_price(OptionSpec(1.0, 0.0, bond), s), defaultable_price(bond, None, s)) < 1e-9


def test_call_immediate_expiry(option_case):
    bond, s = option_case
    B = defaultable_price(bond, None, s)
    for K in (0.2, 0.4, 0.9):
        assert call_price(OptionSpec(s.t, K, bond), s) == pytest.approx(max(B - K, 0.0), abs=1e-12)


def test_call_monotone_convex_in_strike(option_case):
    bond, s = option_case
    Ks = np.linspace(0.05, 0.95, 10)
    C = np.array([call_price(OptionSpec(1.0, K, bond), s) for K in Ks])
    assert np.all(np.diff(C) <= 1e-12)
    assert np.all(np.diff(C, 2) >= -1e-10)
    assert np.all(C >= 0)


def test_call_narrow_payoff_band():
    # the bond clears the strike only near the peak of the quadratic kernel;
    # the price must not depend on the node count of the inner sovereign rule
    k = whk_quadratic_kernel(0.189, 0.127, 6.176)
    credit = InfoProcessSpec("credit", 3.4, DiscreteFactor.digital(0.964), flow_rate=0.706)
    spec = OptionSpec(1.655, 0.488, BondSpec(3.4, credit, k))
    s = MarketState(0.619, {"macro": -0.990, "credit": 0.566})
    prices = [call_price(spec, s, QuadratureRule.hermite(n)) for n in (32, 64, 128)]
    assert max(prices) - min(prices) < 1e-9 * prices[0]
    r = mc_price(oracle.OptionTarget(spec), s, McConfig(paths=200_000, seed=4))
    assert abs(r.zscore(prices[1])) < 3.5


def test_call_degenerate_posterior():
    k = whk_quadratic_kernel(1.0, 0.1, 5.0)
    credit = InfoProcessSpec("credit", 2.0, DiscreteFactor.digital(1.0), flow_rate=0.5)
    bond = BondSpec(2.0, credit, k)
    s = MarketState(0.25, {"macro": 0.3, "credit": 0.2})
    P = sovereign_price(k, s, 2.0)
    assert call_price(OptionSpec(1.0, 0.0, bond), s) == pytest.approx(P, rel=1e-12)
    assert call_price(OptionSpec(1.0, 1.5, bond), s) == 0.0


def test_call_after_expiry(option_case):
    bond, _ = option_case
    with pytest.raises(DomainError):
        call_price(OptionSpec(1.0, 0.5, bond), MarketState(1.5, {"macro": 0.0, "credit": 0.0}))


# --- coupon bonds ------------------------------------------------------------

def coupon_spec(surv, coupon=0.05, principal=1.0, recoveries=None, dates=(1.0, 2.0), kernel=None):
    kernel = kernel or whk_quadratic_kernel(1.0, 0.5, 5.0)
    credits = [InfoProcessSpec(f"c{i + 1}", d, DiscreteFactor.digital(p), flow_rate=0.4)
               for i, (d, p) in enumerate(zip(dates, surv))]
    return CouponBondSpec(dates, coupon, principal, credits, kernel, recoveries)


ORIGIN = MarketState(0.0, {"macro": 0.0, "c1": 0.0, "c2": 0.0})


def test_coupon_brute_force():
    spec = coupon_spec((0.9, 0.8))
    P = [sovereign_price(spec.kernel, ORIGIN, d) for d in spec.dates]
    total = 0.0
    for X1 in (0, 1):
        for X2 in (0, 1):
            prob = (0.9 if X1 else 0.1) * (0.8 if X2 else 0.2)
            flows = spec.coupon * X1 * P[0] + (spec.coupon + spec.principal) * X1 * X2 * P[1]
            total += prob * flows
    assert rel(coupon_bond_price(spec, ORIGIN), total) < 1e-12


def test_coupon_riskless():
    spec = coupon_spec((1.0, 1.0), coupon=0.07, principal=2.0)
    P = [sovereign_price(spec.kernel, ORIGIN, d) for d in spec.dates]
    assert rel(coupon_bond_price(spec, ORIGIN), 0.07 * sum(P) + 2.0 * P[1]) < 1e-12


def test_coupon_single_date_is_scaled_digital(state):
    k = whk_quadratic_kernel(1.0, 0.5, 5.0)
    credit = InfoProcessSpec("c1", 2.0, DiscreteFactor.digital(0.8), flow_rate=0.5)
    spec = CouponBondSpec((2.0,), 0.0, 3.0, [credit], k)
    s = MarketState(0.5, {"macro": 0.3, "c1": 0.4})
    digital = defaultable_price(BondSpec(2.0, credit, k), None, s)
    assert rel(coupon_bond_price(spec, s), 3.0 * digital) < 1e-12


def test_coupon_zero_recovery_matches_plain():
    zero = lambda z: np.zeros_like(z)  # noqa: E731
    plain = coupon_spec((0.9, 0.8))
    rec = coupon_spec((0.9, 0.8), recoveries=[zero, zero])
    assert coupon_bond_with_recovery_price(rec, ORIGIN) == coupon_bond_price(plain, ORIGIN)


def test_coupon_constant_recovery_legs():
    r = 0.35
    const = lambda z: np.full(np.shape(z), r)  # noqa: E731
    s = MarketState(0.4, {"macro": 0.2, "c1": 0.1, "c2": 0.05})
    spec = coupon_spec((0.9, 0.8), recoveries=[const, const])
    base = coupon_bond_price(coupon_spec((0.9, 0.8)), s)
    pi1 = spec.survival(s)
    P = [sovereign_price(spec.kernel, s, d) for d in spec.dates]
    legs = r * (spec.coupon + spec.principal) * ((1 - pi1[0]) * P[0] + pi1[0] * (1 - pi1[1]) * P[1])
    assert rel(coupon_bond_with_recovery_price(spec, s), base + legs) < 1e-12


def test_coupon_recovery_oracle():
    price, _, _ = oracle_cases.fixed_case("coupon_recovery")
    within_se(price(), "coupon_recovery")
    price, _, _ = oracle_cases.fixed_case("coupon")
    within_se(price(), "coupon")


def test_coupon_seasoned_rejected():
    spec = coupon_spec((0.9, 0.8))
    with pytest.raises(DomainError):
        coupon_bond_price(spec, MarketState(1.0, {"macro": 0.0, "c1": 0.0, "c2": 0.0}))


@given(a=st.floats(-1, 2), b=st.floats(-1, 2), other=st.floats(-1, 2), which=st.sampled_from(["c1", "c2"]))
def test_coupon_monotone_in_survival(a, b, other, which):
    spec = coupon_spec((0.9, 0.8), recoveries=[exponential_recovery, exponential_recovery])
    lo, hi = sorted((a, b))
    prices = []
    for v in (lo, hi):
        obs = {"macro": 0.1, "c1": other, "c2": other, which: v}
        prices.append(coupon_bond_price(spec, MarketState(0.5, obs)))
    assert prices[0] <= prices[1] * (1 + 1e-12)


# --- inflation-linked credit-risky bonds ------------------------------------

@pytest.fixture(scope="module")
def ilcr_kernels():
    f = product_kernel(whk_quadratic_kernel(1.0, 0.5, 4.0), whk_quadratic_kernel(0.5, 0.2, 6.0))
    g = product_kernel(whk_quadratic_kernel(1.5, 0.4, 4.0), whk_quadratic_kernel(0.5, 0.2, 6.0))
    return f, g


ILCR_STATE = MarketState(0.5, {"macro": 0.3, "macro2": -0.2, "credit": 0.4})


def test_ilcr_same_kernels_is_defaultable(ilcr_kernels, digital_credit):
    f, _ = ilcr_kernels
    spec = HybridSpec(2.0, digital_credit, f, f)
    pi1 = conditional_density(digital_credit.factor, 0.5, 2.0, 0.5, 0.4)[1]
    assert rel(hybrid_ilcr_price(spec, ILCR_STATE), sovereign_price_2d(f, ILCR_STATE, 2.0) * pi1) < 1e-9
    # with a deterministic second factor the hybrid is an ordinary defaultable bond
    k1 = whk_quadratic_kernel(1.0, 0.5, 4.0)
    fd = product_kernel(k1, deterministic_kernel(0.04, horizon=6.0))
    B = defaultable_price(BondSpec(2.0, digital_credit, k1), None, ILCR_STATE)
    assert rel(hybrid_ilcr_price(HybridSpec(2.0, digital_credit, fd, fd), ILCR_STATE), B * math.exp(-0.04 * 1.5)) < 1e-9


def test_ilcr_unit_payoff_is_inflation_bond(ilcr_kernels, digital_credit):
    f, g = ilcr_kernels
    spec = HybridSpec(2.0, digital_credit, f, g, payoff=lambda x, z1, z2: np.ones_like(z1))
    Q = sovereign_price_2d(g, ILCR_STATE, 2.0) * float(g(0.5, 0.3, -0.2)) / float(f(0.5, 0.3, -0.2))
    assert rel(hybrid_ilcr_price(spec, ILCR_STATE), Q) < 1e-9


def test_ilcr_general_vs_factorized(ilcr_kernels):
    f, g = ilcr_kernels
    credit = InfoProcessSpec("credit", 2.0, DiscreteFactor([0.0, 0.4, 1.0], [0.1, 0.2, 0.7]), flow_rate=0.6)
    spec = HybridSpec(2.0, credit, f, g)
    assert rel(hybrid_ilcr_price(spec, ILCR_STATE), ilcr_factorized_price(spec, ILCR_STATE)) < 1e-9


def test_ilcr_oracle():
    price, _, _ = oracle_cases.fixed_case("ilcr")
    within_se(price(), "ilcr")


def test_ilcr_horizon_order(digital_credit):
    f = product_kernel(whk_quadratic_kernel(1.0, 0.5, 6.0), whk_quadratic_kernel(0.5, 0.2, 4.0))
    with pytest.raises(DomainError):
        HybridSpec(2.0, digital_credit, f, f)
