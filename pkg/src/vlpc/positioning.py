"""RSS-based position estimation from the pilot subframe.

Each LED with nonzero pilot power contributes a channel-gain estimate
whose error is Gaussian with variance sigma_p^2 / (P_i eps T_p); the user
position (x, y) is recovered by damped Gauss-Newton on the gain residuals
with the receiver height known.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import los_gain, gain_gradient
from .scenario import Scenario

MAX_ITER = 100
STEP_TOL = 1e-9


@dataclass(frozen=True)
class RssMeasurement:
    led_indices: np.ndarray
    gains: np.ndarray
    variances: np.ndarray


@dataclass(frozen=True)
class PositionEstimate:
    position: np.ndarray        # (x, y, z), z copied from the scenario
    iterations: int
    converged: bool
    residual_norm: float


def simulate_rss(
    scenario: Scenario, p_p: np.ndarray, rng: np.random.Generator
) -> RssMeasurement:
    """Noisy gain estimates at the true user position.

    LEDs with zero pilot power or outside the field of view carry no
    information and are dropped.
    """
    p_p = np.asarray(p_p, dtype=float)
    if p_p.shape != (len(scenario.leds),):
        raise ValueError("pilot power vector length mismatch")
    idx, gains, variances = [], [], []
    for i, led in enumerate(scenario.leds):
        g = float(los_gain(led, scenario.ue_position, scenario.pd))
        if p_p[i] <= 0.0 or g == 0.0:
            continue
        var = scenario.noise_psd_positioning / (
            p_p[i] * scenario.signal_power * scenario.positioning_subframe
        )
        idx.append(i)
        gains.append(g + rng.normal(0.0, np.sqrt(var)))
        variances.append(var)
    return RssMeasurement(np.array(idx, dtype=int), np.array(gains), np.array(variances))


def _trilaterate(scenario: Scenario, meas: RssMeasurement, z: float) -> np.ndarray:
    """Closed-form starting point: invert each gain to a horizontal range
    and solve the linearized circle-intersection system.

    The gain surface falls off like d^-(m+3), far too steep for plain
    Gauss-Newton from a generic start, so a decent initializer matters.
    """
    anchors, ranges_sq = [], []
    for k, i in enumerate(meas.led_indices):
        led = scenario.leds[i]
        m = led.lambertian_order
        mu = (
            (m + 1.0)
            * led.electro_optic_gain
            * scenario.pd.opto_electric_gain
            * scenario.pd.effective_area
            / (2.0 * np.pi)
        )
        dz = led.position[2] - z
        if meas.gains[k] > 0:
            d = (mu * dz ** (m + 1.0) / meas.gains[k]) ** (1.0 / (m + 3.0))
        else:
            d = 10.0 * dz  # gain lost in noise: treat the LED as far away

        anchors.append(led.position[:2])
        ranges_sq.append(max(d * d - dz * dz, 0.0))
    anchors = np.array(anchors)
    ranges_sq = np.array(ranges_sq)
    a_mat = 2.0 * (anchors[1:] - anchors[0])
    b_vec = (
        ranges_sq[0]
        - ranges_sq[1:]
        + np.sum(anchors[1:] ** 2, axis=1)
        - np.sum(anchors[0] ** 2)
    )
    xy, *_ = np.linalg.lstsq(a_mat, b_vec, rcond=None)
    return xy


def estimate_position(scenario: Scenario, meas: RssMeasurement) -> PositionEstimate:
    """Weighted nonlinear least squares on the gain residuals.

    Starts from range-based trilateration; Levenberg damping keeps steps
    sane when the Jacobian is nearly rank deficient (the iterate straying
    under an LED).  z is fixed at the known receiver height.
    """
    if len(meas.led_indices) < 3:
        raise ValueError("need at least three usable LEDs to fix (x, y)")
    z = scenario.ue_position[2]
    xy = _trilaterate(scenario, meas, z)
    weights = 1.0 / meas.variances
    lam = 1e-3
    converged = False
    res_norm = np.inf
    for it in range(MAX_ITER):
        pos = np.array([xy[0], xy[1], z])
        resid = np.empty(len(meas.led_indices))
        jac = np.empty((len(meas.led_indices), 2))
        for k, i in enumerate(meas.led_indices):
            led = scenario.leds[i]
            resid[k] = float(los_gain(led, pos, scenario.pd)) - meas.gains[k]
            jac[k] = gain_gradient(led, pos, scenario.pd)
        res_norm = float(np.sqrt(np.sum(weights * resid**2)))
        jtj = jac.T @ (weights[:, None] * jac)
        jtr = jac.T @ (weights * resid)
        while True:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)) + 1e-30 * np.eye(2), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            new_pos = np.array([xy[0] + step[0], xy[1] + step[1], z])
            new_resid = np.array(
                [
                    float(los_gain(scenario.leds[i], new_pos, scenario.pd)) - meas.gains[k]
                    for k, i in enumerate(meas.led_indices)
                ]
            )
            if np.sum(weights * new_resid**2) <= np.sum(weights * resid**2) or lam > 1e12:
                break
            lam *= 10.0
        xy = xy + step
        lam = max(lam / 10.0, 1e-12)
        if np.linalg.norm(step) < STEP_TOL:
            converged = True
            break
    return PositionEstimate(np.array([xy[0], xy[1], z]), it + 1, converged, res_norm)


def rse(estimate: np.ndarray, truth: np.ndarray) -> float:
    """Root squared error in the horizontal plane."""
    e = np.asarray(estimate)[:2] - np.asarray(truth)[:2]
    return float(np.sqrt(e @ e))
