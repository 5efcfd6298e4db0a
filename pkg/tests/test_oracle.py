import io

import numpy as np
import pytest

from infopricing import (
    BondSpec,
    ConstructionError,
    DiscreteFactor,
    EvaluationError,
    InfoProcessSpec,
    MarketState,
    McConfig,
    OptionSpec,
    RandomStream,
    SpreadExperiment,
    conditional_density,
    defaultable_price,
    deterministic_kernel,
    mc_price,
    simulate_info_path,
    spread_paths,
    write_spread_csv,
)
from infopricing import oracle
from infopricing.kernels import KernelFunction

import oracle_cases


@pytest.mark.parametrize("name", list(oracle_cases.TARGETS) + ["two_factor"])
def test_target_matches_quadrature(name):
    price, target, state = oracle_cases.fixed_case(name)
    r = mc_price(target, state, McConfig(paths=100_000, seed=7), stream_id=3)
    assert abs(r.zscore(price())) < 3.5, (r, price())


def test_deterministic_sovereign_has_zero_error():
    k = deterministic_kernel(0.03)
    r = mc_price(oracle.SovereignTarget(k, 2.0), MarketState(0.5, {}), McConfig(paths=1000))
    assert r.estimate == pytest.approx(np.exp(-0.045), rel=1e-14)
    assert r.stderr < 1e-15


def test_option_zero_strike_is_bond():
    price, target, state = oracle_cases.fixed_case("option")
    bond = target.spec.bond
    r = mc_price(oracle.OptionTarget(OptionSpec(1.0, 0.0, bond)), state, McConfig(paths=20_000, seed=2))
    assert abs(r.zscore(defaultable_price(bond, None, state))) < 3


def test_worker_count_does_not_change_result():
    _, target, state = oracle_cases.fixed_case("recovery_digital")
    runs = [mc_price(target, state, McConfig(paths=40_000, seed=11, block_size=4000, workers=w)) for w in (1, 3, 8)]
    assert runs[0] == runs[1] == runs[2]


def test_seed_and_stream_change_result():
    _, target, state = oracle_cases.fixed_case("digital")
    a = mc_price(target, state, McConfig(paths=2000, seed=1))
    assert a == mc_price(target, state, McConfig(paths=2000, seed=1))
    assert a != mc_price(target, state, McConfig(paths=2000, seed=2))
    assert a != mc_price(target, state, McConfig(paths=2000, seed=1), stream_id=1)


def test_antithetic_pairs_reduce_error():
    # pairs help for integrands monotone in the Gaussian draw
    k = KernelFunction(lambda t, x: np.exp(0.5 * np.asarray(x, dtype=float) - 0.3 * np.asarray(t, dtype=float)),
                       (5.0,), name="exp")
    target, state = oracle.SovereignTarget(k, 2.0), MarketState(0.5, {"macro": 0.3})
    on = mc_price(target, state, McConfig(paths=20_000, seed=5))
    off = mc_price(target, state, McConfig(paths=20_000, seed=5, antithetic=False))
    assert on.stderr < 0.5 * off.stderr


def test_partial_last_block():
    _, target, state = oracle_cases.fixed_case("sovereign")
    r = mc_price(target, state, McConfig(paths=1001, seed=5, block_size=400))
    assert r.samples == 1002


class _Poisoned:
    def sample(self, state, draws):
        out = np.ones(draws.n)
        out[37] = np.nan
        return out


def test_non_finite_sample_names_draw():
    with pytest.raises(EvaluationError, match="draw 37$"):
        mc_price(_Poisoned(), MarketState(0.0, {}), McConfig(paths=3000, block_size=1000))


@pytest.mark.parametrize("kwargs", [dict(paths=99), dict(block_size=7), dict(grid=(0.5, 0.5)), dict(workers=0)])
def test_config_validation(kwargs):
    with pytest.raises(ConstructionError):
        McConfig(**kwargs)


def test_conditional_density_by_binning():
    # simulate X from its prior and the information process at t; the share
    # of survivors in each bin of xi must match pi_1t at the bin centre
    T, t, sigma, p1 = 2.0, 1.0, 1.0, 0.6
    spec = InfoProcessSpec("credit", T, DiscreteFactor.digital(p1), flow_rate=sigma)
    g = RandomStream(99)
    n = 400_000
    X = (g.uniform(n) < p1).astype(float)
    xi = simulate_info_path(spec, X, [0.5 * t, t], g.substream(1), n_paths=n)[:, 1]
    edges = np.linspace(-0.8, 1.8, 27)
    idx = np.digitize(xi, edges) - 1
    for b in range(len(edges) - 1):
        sel = idx == b
        assert sel.sum() > 4000
        centre = 0.5 * (edges[b] + edges[b + 1])
        expected = conditional_density(spec.factor, sigma, T, t, centre)[1]
        assert abs(X[sel].mean() - expected) < 0.02


# --- spread experiment ---------------------------------------------------------

@pytest.fixture(scope="module")
def small_table():
    return spread_paths(SpreadExperiment(paths=8, steps=50), RandomStream(3))


def test_spread_table_shape(small_table):
    assert small_table.spread.shape == (4, 8, 50)
    assert small_table.times[0] == 0.0 and small_table.times[-1] == pytest.approx(2.0 - 2.0 / 50)


def test_spread_initial_value(small_table):
    assert np.allclose(small_table.spread[:, :, 0], -np.log(0.8) / 2, rtol=1e-15, atol=0)


def test_spread_default_paths_capped():
    table = spread_paths(SpreadExperiment(condition="default", paths=6, steps=100, cap=3.0), RandomStream(4))
    assert table.spread.max() <= 3.0
    assert np.all((table.capped == 1) == (table.spread == 3.0))
    # informative default paths hit the cap well before maturity
    assert np.all(table.capped[-1, :, -1] == 1)


def test_spread_workers_identical():
    exp = SpreadExperiment(paths=10, steps=40)
    a = spread_paths(exp, RandomStream(8), workers=1)
    b = spread_paths(exp, RandomStream(8), workers=4)
    assert np.array_equal(a.spread, b.spread) and np.array_equal(a.capped, b.capped)


def test_spread_csv_format(small_table):
    buf = io.StringIO()
    write_spread_csv(small_table, buf)
    text = buf.getvalue()
    lines = text.split("\n")
    assert lines[0] == "σ2,path,t,spread,capped"
    assert text.endswith("\n") and "\r" not in text
    assert len(lines) == 1 + 4 * 8 * 50 + 1
    sigma, path, t, spread, capped = lines[1].split(",")
    assert float(spread) == small_table.spread[0, 0, 0]
    assert float(sigma) == 0.04 and path == "0" and capped in ("0", "1")
    # 17 significant digits survive a round trip
    assert all(float(r.split(",")[3]) == v for r, v in zip(lines[1:51], small_table.spread[0, 0]))


def test_spread_csv_to_file(small_table, tmp_path):
    out = tmp_path / "s.csv"
    write_spread_csv(small_table, out)
    raw = out.read_bytes()
    assert raw.startswith("σ2,path".encode("utf-8")) and b"\r\n" not in raw


@pytest.mark.parametrize("kwargs", [dict(p0=0.0), dict(p0=1.0), dict(condition="maybe"), dict(sigmas=(-1.0,)),
                                    dict(cap=0.0), dict(steps=1)])
def test_experiment_validation(kwargs):
    with pytest.raises(ConstructionError):
        SpreadExperiment(**kwargs)


def test_digital_bond_spec_round_trip(digital_bond, state):
    # the oracle target sees the same bond the pricer sees
    t = oracle.DefaultableTarget(digital_bond)
    assert isinstance(t.spec, BondSpec)
    r = mc_price(t, state, McConfig(paths=20_000, seed=1))
    assert abs(r.zscore(defaultable_price(digital_bond, None, state))) < 3.5
