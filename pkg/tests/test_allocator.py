import numpy as np
import pytest

import vlpc
from vlpc import allocator
from vlpc.channel import los_gain
from vlpc.fisher import crlb, fim, spd_power
from vlpc.rate import delta_coefficient
from vlpc.scenario import default_scenario, power_budget

S = default_scenario()
CFG = vlpc.RobustConfig(rate_threshold=2e8, outage_probability=0.01)


def test_select_serving_led_is_strongest():
    idx = vlpc.select_serving_led(S)
    gains = [float(los_gain(l, S.ue_position, S.pd)) for l in S.leds]
    assert idx == int(np.argmax(gains))


def test_select_serving_led_tie_breaks_low_index():
    s = default_scenario(4)
    s = vlpc.Scenario(
        leds=s.leds,
        pd=s.pd,
        ue_position=np.array([2.5, 2.5, 1.5]),  # equidistant from all four
        bandwidth=s.bandwidth,
        noise_psd_positioning=s.noise_psd_positioning,
        noise_psd_comm=s.noise_psd_comm,
        positioning_subframe=s.positioning_subframe,
        signal_amplitude=s.signal_amplitude,
        signal_power=s.signal_power,
    )
    assert vlpc.select_serving_led(s) == 0


def test_perfect_matches_analytic_solution():
    # the rate constraint pins the minimum data power; caps then force the
    # unique pilot split, so the whole program has a closed-form optimum
    serving = vlpc.select_serving_led(S)
    budget = power_budget(S)
    delta = delta_coefficient(S, S.leds[serving], CFG.rate_threshold)
    d_sq = float(np.sum((S.ue_position - S.leds[serving].position) ** 2))
    pc_min = (d_sq / delta) ** 4.0
    alloc = vlpc.solve_perfect(S, CFG.rate_threshold)
    assert alloc.p_c == pytest.approx(pc_min, rel=1e-3)
    expected_p = np.full(3, budget.per_led_cap)
    expected_p[serving] -= pc_min
    np.testing.assert_allclose(alloc.p_p, expected_p, atol=1e-4 * budget.per_led_cap)
    assert alloc.crlb_value == pytest.approx(crlb(fim(S, expected_p)), rel=1e-5)


def test_perfect_matches_grid_oracle():
    # coarse 1-D sweep over the only free direction (data power)
    serving = vlpc.select_serving_led(S)
    budget = power_budget(S)
    best = np.inf
    for p_c in np.linspace(0.1, 60.0, 400):
        delta = delta_coefficient(S, S.leds[serving], CFG.rate_threshold)
        d_sq = float(np.sum((S.ue_position - S.leds[serving].position) ** 2))
        if d_sq > delta * p_c**0.25:
            continue
        p = np.full(3, budget.per_led_cap)
        p[serving] -= p_c
        best = min(best, crlb(fim(S, p)))
    alloc = vlpc.solve_perfect(S, CFG.rate_threshold)
    assert alloc.crlb_value <= best * (1.0 + 2e-2)


def test_budget_identity():
    budget = power_budget(S)
    for alloc in (
        vlpc.solve_perfect(S, 2e8),
        vlpc.solve_bernstein(S, CFG),
        vlpc.solve_cvar_sca(S, CFG),
    ):
        expected = min(budget.total_cap - alloc.p_c, 3 * budget.per_led_cap)
        assert alloc.sum_p_p == pytest.approx(expected, abs=1e-4)


def test_power_limits_respected():
    budget = power_budget(S)
    for alloc in (vlpc.solve_bernstein(S, CFG), vlpc.solve_cvar_sca(S, CFG)):
        assert np.all(alloc.p_p >= -1e-6)
        assert alloc.p_c >= -1e-6
        others = np.delete(alloc.p_p, alloc.serving_index)
        assert np.all(others <= budget.per_led_cap + 1e-4)
        assert alloc.p_p[alloc.serving_index] + alloc.p_c <= budget.per_led_cap + 1e-4


def test_bernstein_bound_formula():
    b_mat = np.array([[2.0, 0.5], [0.5, 1.0]])
    b_vec = np.array([0.3, -0.4])
    eta = 3.0
    lam = np.linalg.eigvalsh(b_mat)[-1]
    omega = np.sqrt(np.linalg.norm(b_mat, "fro") ** 2 + 2 * b_vec @ b_vec)
    expected = np.trace(b_mat) + np.sqrt(2 * eta) * omega + eta * lam
    assert allocator.bernstein_bound(b_mat, b_vec, eta) == pytest.approx(expected)
    with pytest.raises(ValueError):
        allocator.bernstein_bound(b_mat, b_vec, -1.0)


def test_bernstein_solution_satisfies_exact_tail_condition():
    # re-check the allocation against the unrelaxed Bernstein inequality
    alloc = vlpc.solve_bernstein(S, CFG)
    serving = alloc.serving_index
    j = fim(S, alloc.p_p)
    r_full = S.ue_position - S.leds[serving].position
    b_mat = np.linalg.inv(j)
    b_vec = spd_power(j, -0.5) @ r_full[:2]
    eta = -np.log(CFG.outage_probability)
    delta = delta_coefficient(S, S.leds[serving], CFG.rate_threshold)
    slack = delta * alloc.p_c**0.25 - float(r_full @ r_full)
    assert allocator.bernstein_bound(b_mat, b_vec, eta) <= slack + 1e-6


def test_conservatism_ordering():
    a = vlpc.solve_perfect(S, CFG.rate_threshold)
    b = vlpc.solve_bernstein(S, CFG)
    c = vlpc.solve_cvar_sca(S, CFG)
    assert a.crlb_value <= b.crlb_value + 1e-6
    assert b.crlb_value <= c.crlb_value + 1e-6
    assert a.p_c <= b.p_c <= c.p_c + 1e-6


def test_taylor_linearize_exact_at_expansion_point():
    p0 = np.array([80.0, 60.0, 90.0])
    serving = vlpc.select_serving_led(S)
    b0m, b1m, b0v, b1v = allocator.taylor_linearize(S, p0, 10.0, serving)
    j0 = fim(S, p0)
    np.testing.assert_allclose(b0m + np.tensordot(p0, b1m, axes=1), np.linalg.inv(j0), rtol=1e-9)
    r_xy = (S.ue_position - S.leds[serving].position)[:2]
    np.testing.assert_allclose(
        b0v + np.tensordot(p0, b1v, axes=1), spd_power(j0, -0.5) @ r_xy, rtol=1e-9
    )


def test_cvar_solution_passes_sampled_cvar_check():
    # empirical CVaR of the exceedance under the Gaussian error model must
    # be nonpositive (the worst-case certificate covers the Gaussian case)
    alloc = vlpc.solve_cvar_sca(S, CFG)
    serving = alloc.serving_index
    j = fim(S, alloc.p_p)
    r_full = S.ue_position - S.leds[serving].position
    b_mat = np.linalg.inv(j)
    b_vec = spd_power(j, -0.5) @ r_full[:2]
    delta = delta_coefficient(S, S.leds[serving], CFG.rate_threshold)
    slack = delta * alloc.p_c**0.25 - float(r_full @ r_full)
    rng = np.random.default_rng(0)
    x = rng.standard_normal((200_000, 2))
    losses = np.einsum("ni,ij,nj->n", x, b_mat, x) + 2.0 * x @ b_vec - slack
    tail = np.sort(losses)[-int(200_000 * CFG.outage_probability):]
    assert np.mean(tail) <= 1e-3  # sampled CVaR at level P_out


def test_infeasible_raises():
    with pytest.raises(vlpc.InfeasibleError):
        vlpc.solve_perfect(S, 1e10)
    with pytest.raises(vlpc.InfeasibleError):
        vlpc.solve_bernstein(S, vlpc.RobustConfig(1e10, 0.01))
    with pytest.raises(vlpc.InfeasibleError):
        vlpc.solve_cvar_sca(S, vlpc.RobustConfig(2.5e8, 0.01))


def test_config_defaults():
    cfg = vlpc.RobustConfig(2e8, 0.05)
    assert cfg.sca_tolerance == 1e-3
    assert cfg.sca_max_iter == 50
