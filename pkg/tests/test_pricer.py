import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.stats import norm

from spreadpide.models import JumpDiffusionParams, TimeChangeParams
from spreadpide.pricer import (Contract, ErrorRow, ErrorTable, SchemeConfig, _step_matrices, assemble,
                               convergence_study, payoff_on_nodes, price_at, solve)

JD = JumpDiffusionParams.reference()
TC = TimeChangeParams.reference()
NOJUMP = dict(lambda0=0.0, lambda1=0.0, lambda2=0.0)


def margrabe(p, c, T, s0):
    """Exchange option S2 - c S1 under correlated lognormal dynamics."""
    v = math.sqrt((p.sigma1**2 + p.sigma2**2 - 2 * p.rho_B * p.sigma1 * p.sigma2) * T)
    a, b = s0[1], c * s0[0]
    d1 = (math.log(a / b) + v * v / 2) / v
    return a * norm.cdf(d1) - b * norm.cdf(d1 - v)


@pytest.mark.parametrize("model", [JD, TC], ids=["merton", "gamma"])
def test_zero_steps_returns_payoff_at_nodes(model):
    s = solve(model, Contract(), SchemeConfig(N=4, M=0))
    g = s.grid_ext
    x = g.axis
    vals = s.values_at(0, x[None, :], x[:, None])
    np.testing.assert_allclose(vals, payoff_on_nodes(s), atol=1e-12)
    assert s.taus.tolist() == [0.0] and s.stats == []


def test_fully_implicit_right_matrix_is_mass():
    asm = assemble(JD, Contract(), SchemeConfig(N=3))
    _, _, TR = _step_matrices(asm, 0.01, 1.0)
    np.testing.assert_array_equal(TR.gen.values, asm.Mgen.values)


def test_far_strike_gives_zero_load_and_zero_price():
    c = Contract(K=1e6)
    asm = assemble(JD, c, SchemeConfig(N=4))
    assert not np.any(asm.psi) and not np.any(asm.F)
    s = solve(JD, c, SchemeConfig(N=4, M=4))
    assert float(price_at(s, c.T, *c.s0)) == 0.0


@pytest.mark.parametrize("model", [JD, TC], ids=["merton", "gamma"])
def test_price_bounds_and_monotone_in_strike(model):
    cfg = SchemeConfig(N=5)
    prices = []
    for K in (0.8, 1.0, 1.2):
        c = Contract(K=K)
        p = float(price_at(solve(model, c, cfg), c.T, *c.s0))
        lower = c.s0[1] - c.c * c.s0[0] - K * math.exp(-model.r * c.T)
        assert max(lower, 0.0) - 1e-4 <= p <= c.s0[1]
        prices.append(p)
    assert prices[0] > prices[1] > prices[2]


def test_exchange_option_matches_margrabe():
    p = replace(JD, **NOJUMP)
    c = Contract(K=0.0, c=1 / 42)
    # the kink passes close to the spot point, so a moderately fine grid is needed
    s = solve(p, c, SchemeConfig(N=7, store="final"))
    ref = margrabe(p, c.c, c.T, c.s0)
    got = float(price_at(s, c.T, *c.s0))
    assert got == pytest.approx(ref, rel=1e-4)


def test_rannacher_start_agrees_with_plain_scheme():
    c = Contract()
    a = float(price_at(solve(JD, c, SchemeConfig(N=5)), c.T, *c.s0))
    b = float(price_at(solve(JD, c, SchemeConfig(N=5, rannacher=2)), c.T, *c.s0))
    assert a == pytest.approx(b, abs=1e-4)


def test_final_storage_and_time_interpolation():
    c = Contract()
    full = solve(JD, c, SchemeConfig(N=4))
    last = solve(JD, c, SchemeConfig(N=4, store="final"))
    assert last.taus.tolist() == [0.0, c.T] and len(full.taus) == 17
    assert float(price_at(full, c.T, *c.s0)) == pytest.approx(float(price_at(last, c.T, *c.s0)), abs=1e-14)
    t = 0.5 * (full.taus[3] + full.taus[4])
    mid = float(price_at(full, t, *c.s0))
    ends = [float(price_at(full, full.taus[k], *c.s0)) for k in (3, 4)]
    assert mid == pytest.approx(sum(ends) / 2, abs=1e-14)


def test_price_at_rejects_out_of_range():
    c = Contract()
    s = solve(JD, c, SchemeConfig(N=3, M=2))
    with pytest.raises(ValueError):
        price_at(s, c.T + 0.1, *c.s0)
    with pytest.raises(ValueError):
        price_at(s, c.T, c.s0[0] * math.exp(4.5), c.s0[1])


def test_iterations_recorded():
    s = solve(JD, Contract(), SchemeConfig(N=4))
    assert len(s.stats) == 16 and all(st.converged for st in s.stats)
    assert 0 < s.mean_iterations < 50


@pytest.mark.parametrize("kw", [dict(theta=1.5), dict(M=-1), dict(omega=4.0), dict(store="some"),
                                dict(N=2), dict(rannacher=-1)])
def test_scheme_config_validation(kw):
    with pytest.raises(ValueError):
        SchemeConfig(**kw)


@pytest.mark.parametrize("kw", [dict(K=-1), dict(c=-0.1), dict(T=0), dict(s0=(0, 1))])
def test_contract_validation(kw):
    with pytest.raises(ValueError):
        Contract(**kw)


def test_extended_band_covers_margin():
    cfg = SchemeConfig(N=6)
    assert cfg.grid_ext.n - cfg.grid.n_int == 2 * 64 // 8
    assert SchemeConfig(N=3).grid_ext.n - 7 == 6


def test_small_convergence_study(tmp_path):
    t = convergence_study(JD, Contract(), levels=[3, 4, 5], ref_level=6)
    assert np.all(np.diff(t.errors) < 0) and t.rate > 1
    out = tmp_path / "e.csv"
    t.to_csv(out, "model = merton")
    lines = out.read_text().splitlines()
    assert lines[0] == "# model = merton" and lines[1].startswith("N,")
    with pytest.raises(ValueError):
        convergence_study(JD, Contract(), levels=[5], ref_level=4)


def test_rate_is_slope_of_log_errors():
    rows = [ErrorRow(N, 2.0 ** (-3 * N), 1.0, 0.0) for N in (4, 5, 6)]
    assert ErrorTable(rows, 9).rate == pytest.approx(3.0)
