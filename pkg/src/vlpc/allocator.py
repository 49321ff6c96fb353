"""Power allocation between positioning pilots and the data signal.

Three schemes, all minimizing the position error bound Tr(J(p)^-1) subject
to per-LED and total power limits plus a rate constraint on the serving
LED:

* perfect: rate constraint evaluated at the true user position.
* bernstein: position error enters through a Bernstein-type tail bound on
  the quadratic form it induces in the rate-distance constraint; one shot,
  convex.
* cvar: worst-case conditional value-at-risk over all error distributions
  with zero mean and covariance J(p)^-1; nonconvex coupling handled by
  successive convex approximation seeded from the bernstein solution.

All subproblems are assembled as explicit cone programs and handed to
:mod:`vlpc.conic`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import conic
from .channel import los_gain
from .fisher import fim, fim_coefficients, crlb, spd_power
from .rate import delta_coefficient
from .scenario import Scenario, power_budget

FEAS_TOL = 1e-6


class InfeasibleError(Exception):
    pass


@dataclass(frozen=True)
class RobustConfig:
    rate_threshold: float
    outage_probability: float
    sca_tolerance: float = 1e-3
    sca_max_iter: int = 50


@dataclass(frozen=True)
class PowerAllocation:
    p_p: np.ndarray
    p_c: float
    serving_index: int
    crlb_value: float
    scheme: str
    status: str = "optimal"

    @property
    def sum_p_p(self) -> float:
        return float(np.sum(self.p_p))


def select_serving_led(scenario: Scenario) -> int:
    """LED with the strongest noiseless channel gain; ties go to the
    lowest index."""
    gains = np.array(
        [los_gain(led, scenario.ue_position, scenario.pd) for led in scenario.leds]
    )
    return int(np.argmax(gains))


def bernstein_bound(b_mat: np.ndarray, b_vec: np.ndarray, eta: float) -> float:
    """Threshold tau(eta) with Pr{x' B x + 2 x' b >= tau} <= exp(-eta) for
    standard normal x and PSD B."""
    if eta < 0:
        raise ValueError("eta must be >= 0")
    lam = float(np.linalg.eigvalsh(b_mat)[-1])
    omega = np.sqrt(np.linalg.norm(b_mat, "fro") ** 2 + 2.0 * float(b_vec @ b_vec))
    return float(np.trace(b_mat)) + np.sqrt(2.0 * eta) * omega + eta * lam


def _power_linears(n: int, num_leds: int, serving: int, budget) -> list:
    """Nonnegativity, per-LED caps (data power rides on the serving LED)
    and the sum cap.  Variable layout: p_1..p_M first, then P_c."""
    blocks = []
    for i in range(num_leds):
        blocks.append(conic.LinearBlock(-conic._unit(n, i), 0.0))
    blocks.append(conic.LinearBlock(-conic._unit(n, num_leds), 0.0))
    for i in range(num_leds):
        a = conic._unit(n, i)
        if i == serving:
            a = a + conic._unit(n, num_leds)
        blocks.append(conic.LinearBlock(a, budget.per_led_cap))
    a = np.zeros(n)
    a[: num_leds + 1] = 1.0
    blocks.append(conic.LinearBlock(a, budget.total_cap))
    return blocks


def _fim_scale(k_mats: np.ndarray, budget) -> float:
    j_ref = np.sum(k_mats, axis=0) * (budget.total_cap / len(k_mats))
    return float(np.linalg.norm(j_ref, 2))


def _polish(p_p: np.ndarray, p_c: float, budget, serving: int) -> np.ndarray:
    """Pour interior-point slack back into the pilots.

    Raising pilot power grows J in the PSD order (the rate constraint sees
    only P_c), so filling the caps is always optimal; this also restores
    the tight budget identity sum(P_p) = min(P_total - P_c, M * P_bar).
    """
    caps = np.full(len(p_p), budget.per_led_cap)
    caps[serving] -= p_c
    p = np.minimum(np.maximum(p_p, 0.0), caps)
    remaining = budget.total_cap - p_c - float(np.sum(p))
    for i in np.argsort(caps - p)[::-1]:
        if remaining <= 0:
            break
        add = min(caps[i] - p[i], remaining)
        p[i] += add
        remaining -= add
    return p


def _check_allocation(p_p, p_c, budget, serving) -> None:
    tol = FEAS_TOL * max(1.0, budget.total_cap)
    if (
        np.min(p_p) < -tol
        or p_c < -tol
        or np.max(np.delete(p_p, serving)) > budget.per_led_cap + tol
        or p_p[serving] + p_c > budget.per_led_cap + tol
        or np.sum(p_p) + p_c > budget.total_cap + tol
    ):
        warnings.warn("returned allocation violates power limits beyond tolerance")


def solve_perfect(
    scenario: Scenario, rate_threshold: float, serving_index: int | None = None
) -> PowerAllocation:
    """Allocation assuming the exact user position is known.

    The rate constraint reduces to a distance bound on the serving LED,
    encoded through the fourth-root cone tower in the data power.
    """
    serving = select_serving_led(scenario) if serving_index is None else serving_index
    budget = power_budget(scenario)
    m = len(scenario.leds)
    k_mats = fim_coefficients(scenario)
    sigma = _fim_scale(k_mats, budget)
    delta = delta_coefficient(scenario, scenario.leds[serving], rate_threshold)
    d_sq = float(np.sum((scenario.ue_position - scenario.leds[serving].position) ** 2))

    # layout: p(M), P_c, q, s, z11, z12, z22
    n = m + 6
    iq, is_, iz = m + 1, m + 2, (m + 3, m + 4, m + 5)
    obj = np.zeros(n)
    obj[iz[0]] = obj[iz[2]] = 1.0
    prob = conic.ConicProblem(objective=obj)
    prob.linear += _power_linears(n, m, serving, budget)
    prob.linear.append(conic.LinearBlock(-delta * conic._unit(n, iq), -d_sq))
    soc, lin = conic.power_root_epigraph(n, m, iq, is_, 0.25)
    prob.soc += soc
    prob.linear += lin
    prob.sdp.append(
        conic.trace_inverse_epigraph(
            n, np.zeros((2, 2)), {i: k_mats[i] / sigma for i in range(m)}, iz
        )
    )

    sol = conic.solve(prob)
    if sol.status == "infeasible":
        raise InfeasibleError("rate constraint cannot be met within the power budget")
    if sol.status != "optimal":
        raise RuntimeError(f"cone solver returned status {sol.status}")
    p_c = max(float(sol.x[m]), 0.0)
    p_p = _polish(sol.x[:m], p_c, budget, serving)
    _check_allocation(p_p, p_c, budget, serving)
    return PowerAllocation(p_p, p_c, serving, crlb(fim(scenario, p_p)), "perfect")


def solve_bernstein(scenario: Scenario, config: RobustConfig) -> PowerAllocation:
    """One-shot robust allocation under Gaussian position error.

    The rate-distance constraint with error e ~ N(0, J^-1) becomes a
    quadratic tail event in a standard normal vector; its Bernstein bound
    is enforced through a convex chain of epigraph variables
    (t <= lambda_min(J), rho >= 1/t, c >= 1/sqrt(t)).
    """
    serving = select_serving_led(scenario)
    budget = power_budget(scenario)
    m = len(scenario.leds)
    k_mats = fim_coefficients(scenario)
    sigma = _fim_scale(k_mats, budget)
    delta = delta_coefficient(scenario, scenario.leds[serving], config.rate_threshold)
    r_full = scenario.ue_position - scenario.leds[serving].position
    d_sq = float(r_full @ r_full)
    d_xy = float(np.linalg.norm(r_full[:2]))
    eta = -np.log(config.outage_probability)
    sq2 = np.sqrt(2.0)

    # layout: p(M), P_c, q, s, z11, z12, z22, t, omega, rho, c, w
    # t is in units of sigma; rho, c, w are in physical units.
    n = m + 11
    iq, is_, iz = m + 1, m + 2, (m + 3, m + 4, m + 5)
    it, iw_om, irho, ic, iw = m + 6, m + 7, m + 8, m + 9, m + 10
    obj = np.zeros(n)
    obj[iz[0]] = obj[iz[2]] = 1.0
    prob = conic.ConicProblem(objective=obj)
    prob.linear += _power_linears(n, m, serving, budget)

    # Tr(Z) + sqrt(2 eta) omega + eta rho <= delta P_c^(1/4) - ||u_hat - v||^2
    a = np.zeros(n)
    a[iz[0]] = a[iz[2]] = 1.0 / sigma
    a[iw_om] = np.sqrt(2.0 * eta)
    a[irho] = eta
    a[iq] = -delta
    prob.linear.append(conic.LinearBlock(a, -d_sq))
    # sqrt(2) rho + sqrt(2) ||r_xy|| c <= omega
    a = np.zeros(n)
    a[irho] = sq2
    a[ic] = sq2 * d_xy
    a[iw_om] = -1.0
    prob.linear.append(conic.LinearBlock(a, 0.0))
    for idx in (it, iw_om, irho, ic, iw):
        prob.linear.append(conic.LinearBlock(-conic._unit(n, idx), 0.0))

    soc, lin = conic.power_root_epigraph(n, m, iq, is_, 0.25)
    prob.soc += soc
    prob.linear += lin
    # rho * (sigma t) >= 1, w^2 <= sigma t, c w >= 1
    prob.soc.append(conic.hyperbolic_block(n, irho, it, 1.0 / sigma))
    prob.soc.append(conic.square_bound_block(n, iw, it, scale=sigma))
    prob.soc.append(conic.hyperbolic_block(n, ic, iw, 1.0))
    prob.sdp.append(
        conic.trace_inverse_epigraph(
            n, np.zeros((2, 2)), {i: k_mats[i] / sigma for i in range(m)}, iz
        )
    )
    # J - t I >= 0 pins t under the smallest Fisher eigenvalue
    coeffs = np.zeros((n, 2, 2))
    for i in range(m):
        coeffs[i] = k_mats[i] / sigma
    coeffs[it] = -np.eye(2)
    prob.sdp.append(conic.SdpBlock(np.zeros((2, 2)), coeffs))

    sol = conic.solve(prob)
    if sol.status == "infeasible":
        raise InfeasibleError(
            "robust rate constraint cannot be met within the power budget"
        )
    if sol.status != "optimal":
        raise RuntimeError(f"cone solver returned status {sol.status}")
    p_c = max(float(sol.x[m]), 0.0)
    p_p = _polish(sol.x[:m], p_c, budget, serving)
    _check_allocation(p_p, p_c, budget, serving)
    return PowerAllocation(p_p, p_c, serving, crlb(fim(scenario, p_p)), "bernstein")


def taylor_linearize(scenario: Scenario, p_p0: np.ndarray, p_c0: float, serving: int):
    """First-order surrogates, about (p_p0, p_c0), of the three nonconvex
    pieces of the worst-case CVaR constraint.

    Returns (B0, B1, b0, b1, d0, d1) with
        B(p) ~ B0 + sum_i p_i B1[i]      for J(p)^-1,
        b(p) ~ b0 + sum_i p_i b1[i]      for J(p)^-1/2 r_xy,
        d(P_c) ~ d0 + d1 P_c             for delta P_c^(1/4) - ||r||^2.
    """
    k_mats = fim_coefficients(scenario)
    j0 = fim(scenario, p_p0)
    j0_inv = spd_power(j0, -1.0)
    j0_mhalf = spd_power(j0, -0.5)
    j0_m34 = spd_power(j0, -0.75)
    r_full = scenario.ue_position - scenario.leds[serving].position
    r_xy = r_full[:2]

    b0_mat = 2.0 * j0_inv
    b1_mat = np.array([-j0_inv @ k @ j0_inv for k in k_mats])
    b0_vec = 1.5 * (j0_mhalf @ r_xy)
    b1_vec = np.array([-0.5 * (j0_m34 @ k @ j0_m34 @ r_xy) for k in k_mats])
    return b0_mat, b1_mat, b0_vec, b1_vec


def worst_case_cvar_blocks(
    scenario: Scenario,
    config: RobustConfig,
    p_p0: np.ndarray,
    p_c0: float,
    serving: int,
    n: int,
    im_vars,
    ibeta: int,
    ipc: int,
):
    """SDP blocks of the CVaR feasibility condition, linearized at
    (p_p0, p_c0).

    The moment ambiguity set (zero mean, identity second moment after
    whitening) turns sup-CVaR <= 0 into: exists M >= 0, beta with
    beta + Tr(M)/P_out <= 0 and M >= [[B, b], [b', -delta_b - beta]].
    """
    m = len(scenario.leds)
    b0_mat, b1_mat, b0_vec, b1_vec = taylor_linearize(scenario, p_p0, p_c0, serving)
    delta = delta_coefficient(scenario, scenario.leds[serving], config.rate_threshold)
    r_full = scenario.ue_position - scenario.leds[serving].position
    d_sq = float(r_full @ r_full)
    d1 = delta * 0.25 * p_c0 ** (-0.75)
    d0 = delta * 0.75 * p_c0 ** 0.25 - d_sq

    sym_pos = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]

    # M >= 0
    coeffs = np.zeros((n, 3, 3))
    for idx, (r, c) in zip(im_vars, sym_pos):
        coeffs[idx, r, c] = coeffs[idx, c, r] = 1.0
    psd_m = conic.SdpBlock(np.zeros((3, 3)), coeffs)

    # M - [[B, b], [b', -delta_b - beta]] >= 0
    const = np.zeros((3, 3))
    const[:2, :2] = -b0_mat
    const[:2, 2] = const[2, :2] = -b0_vec
    const[2, 2] = d0
    coeffs = np.zeros((n, 3, 3))
    for idx, (r, c) in zip(im_vars, sym_pos):
        coeffs[idx, r, c] = coeffs[idx, c, r] = 1.0
    for i in range(m):
        coeffs[i, :2, :2] = -b1_mat[i]
        coeffs[i, :2, 2] = coeffs[i, 2, :2] = -b1_vec[i]
    coeffs[ipc, 2, 2] = d1
    coeffs[ibeta, 2, 2] = 1.0
    gap = conic.SdpBlock(const, coeffs)

    # beta + Tr(M) / P_out <= 0
    a = np.zeros(n)
    a[ibeta] = 1.0
    for idx, (r, c) in zip(im_vars, sym_pos):
        if r == c:
            a[idx] = 1.0 / config.outage_probability
    cvar_lin = conic.LinearBlock(a, 0.0)
    return psd_m, gap, cvar_lin


def solve_cvar_sca(scenario: Scenario, config: RobustConfig) -> PowerAllocation:
    """Worst-case CVaR allocation by successive convex approximation.

    Seeds from the Bernstein solution, re-linearizes the CVaR condition at
    each iterate, and enforces monotone objective descent through a trust
    constraint at the previous value.  Stops on relative objective change
    below ``config.sca_tolerance``.
    """
    serving = select_serving_led(scenario)
    budget = power_budget(scenario)
    m = len(scenario.leds)
    k_mats = fim_coefficients(scenario)
    sigma = _fim_scale(k_mats, budget)

    seed = solve_bernstein(scenario, config)
    p_p0, p_c0 = seed.p_p.copy(), max(seed.p_c, 1e-6 * budget.per_led_cap)
    c_prev = np.inf

    def _seed_candidates():
        yield p_p0, p_c0
        # fallback seeds with progressively more data power, for thresholds
        # where the linearization at the one-shot solution is infeasible
        for frac in (0.5, 0.9, 0.99):
            p_c = frac * budget.per_led_cap
            p_p = np.minimum(
                np.full(m, budget.per_led_cap), (budget.total_cap - p_c) / m
            )
            p_p[serving] = min(p_p[serving], budget.per_led_cap - p_c)
            yield p_p, p_c

    # layout: p(M), P_c, z11, z12, z22, m11, m12, m13, m22, m23, m33, beta
    n = m + 11
    ipc = m
    iz = (m + 1, m + 2, m + 3)
    im_vars = tuple(range(m + 4, m + 10))
    ibeta = m + 10
    obj = np.zeros(n)
    obj[iz[0]] = obj[iz[2]] = 1.0

    status = "optimal"
    seeds = _seed_candidates()
    p_p0, p_c0 = next(seeds)
    it = 0
    while it < config.sca_max_iter:
        prob = conic.ConicProblem(objective=obj)
        prob.linear += _power_linears(n, m, serving, budget)
        psd_m, gap, cvar_lin = worst_case_cvar_blocks(
            scenario, config, p_p0, p_c0, serving, n, im_vars, ibeta, ipc
        )
        prob.sdp += [psd_m, gap]
        prob.linear.append(cvar_lin)
        prob.sdp.append(
            conic.trace_inverse_epigraph(
                n, np.zeros((2, 2)), {i: k_mats[i] / sigma for i in range(m)}, iz
            )
        )
        if np.isfinite(c_prev):
            # slack by the stopping tolerance: exact descent can be blocked
            # because the relinearized constraint need not admit the
            # incumbent, but any admitted increase is below the tolerance
            a = np.zeros(n)
            a[iz[0]] = a[iz[2]] = 1.0 / sigma
            prob.linear.append(
                conic.LinearBlock(a, c_prev * (1.0 + config.sca_tolerance))
            )

        sol = conic.solve(prob)
        if sol.status != "optimal":
            if not np.isfinite(c_prev):
                nxt = next(seeds, None)
                if nxt is None:
                    raise InfeasibleError(
                        "worst-case CVaR constraint cannot be met from any "
                        "linearization seed within the power budget"
                    )
                p_p0, p_c0 = nxt
                continue
            warnings.warn(
                f"convex subproblem returned {sol.status} at iteration {it}; "
                "keeping the previous iterate"
            )
            status = "stalled"
            break
        it += 1
        p_p0 = np.maximum(sol.x[:m], 0.0)
        p_c0 = max(float(sol.x[ipc]), 1e-12)
        c_new = sol.objective_value / sigma
        if abs(c_new - c_prev) <= config.sca_tolerance * abs(c_new):
            c_prev = c_new
            break
        c_prev = c_new

    p_p0 = _polish(p_p0, p_c0, budget, serving)
    _check_allocation(p_p0, p_c0, budget, serving)
    return PowerAllocation(
        p_p0, p_c0, serving, crlb(fim(scenario, p_p0)), "cvar", status=status
    )
