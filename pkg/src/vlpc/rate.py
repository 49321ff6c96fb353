"""Achievable-rate lower bound, input-density parameters, and rate geometry.

The data symbols follow the maximum-entropy density
f(s) = exp(-1 - alpha - beta*s - gamma*s^2) on [-A, A], whose parameters
are fixed by normalization, zero mean, and second moment eps.  The rate
lower bound and its algebraic inverse (the delta coefficient) convert the
minimum-rate requirement into a distance-versus-power condition.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy import optimize, special

from .channel import DiffuseParams, isi_power_split
from .scenario import LedParams, Scenario


class AbgParams(NamedTuple):
    alpha: float
    beta: float
    gamma: float


# Gauss-Legendre rule reused by the moment residuals; 200 nodes are far
# beyond what the smooth integrands need.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(200)


def _moments(amplitude: float, alpha: float, beta: float, gamma: float):
    s = _GL_NODES * amplitude
    w = _GL_WEIGHTS * amplitude
    f = np.exp(-1.0 - alpha - beta * s - gamma * s * s)
    return np.sum(w * f), np.sum(w * s * f), np.sum(w * s * s * f)


def abg_params(amplitude: float, signal_power: float, max_iter: int = 200) -> AbgParams:
    """Density parameters for peak ``amplitude`` and second moment ``signal_power``.

    The symmetric-uniform case eps = A^2/3 has the closed form
    (ln(2A) - 1, 0, 0); otherwise the three moment equations are solved
    numerically (quadrature residuals, damped Newton via scipy).
    """
    if not 0 < signal_power <= amplitude**2:
        raise ValueError("signal_power must lie in (0, amplitude^2]")
    if abs(signal_power - amplitude**2 / 3.0) <= 1e-12 * amplitude**2:
        return AbgParams(math.log(2.0 * amplitude) - 1.0, 0.0, 0.0)

    def residuals(theta):
        m0, m1, m2 = _moments(amplitude, *theta)
        return [m0 - 1.0, m1, m2 - signal_power]

    sol = optimize.root(
        residuals,
        x0=[math.log(2.0 * amplitude) - 1.0, 0.0, 0.0],
        method="hybr",
        options={"maxfev": max_iter * 4, "xtol": 1e-12},
    )
    if not sol.success or np.max(np.abs(residuals(sol.x))) > 1e-10:
        raise RuntimeError(f"input-density parameter solve did not converge: {sol.message}")
    return AbgParams(*sol.x)


def abg_residuals(amplitude: float, signal_power: float, abg) -> np.ndarray:
    """Residuals of the three defining equations at ``abg``.

    For gamma > 0 these are the closed erf forms; the gamma <= 0 branch
    evaluates the same moments by quadrature (the erf form continues
    through gamma = 0 via the imaginary error function).
    """
    alpha, beta, gamma = abg
    a = amplitude
    if gamma > 1e-12:
        # complete the square: -beta s - gamma s^2 = beta^2/(4 gamma)
        # - gamma (s + b)^2 with b = beta / (2 gamma)
        rg = math.sqrt(gamma)
        b = beta / (2.0 * gamma)
        c = math.exp(-1.0 - alpha + beta**2 / (4.0 * gamma))
        lo, hi = b - a, b + a
        i0 = math.sqrt(math.pi) / (2.0 * rg) * (special.erf(rg * hi) - special.erf(rg * lo))
        elo, ehi = math.exp(-gamma * lo * lo), math.exp(-gamma * hi * hi)
        i1 = (elo - ehi) / (2.0 * gamma)
        i2 = (lo * elo - hi * ehi) / (2.0 * gamma) + i0 / (2.0 * gamma)
        m0 = c * i0
        m1 = c * (i1 - b * i0)
        m2 = c * (i2 - 2.0 * b * i1 + b * b * i0)
    else:
        m0, m1, m2 = _moments(a, alpha, beta, gamma)
    return np.array([m0 - 1.0, m1, m2 - signal_power])


def _entropy_factor(scenario: Scenario) -> float:
    alpha, _, gamma = scenario.abg
    return math.exp(1.0 + 2.0 * (alpha + gamma * scenario.signal_power))


def rate_lower_bound(g_hat, delta_g, p_c: float, scenario: Scenario):
    """Achievable-rate lower bound (bits/s) for effective gain g_hat + delta_g."""
    if p_c < 0:
        raise ValueError("communication power must be >= 0")
    g_eff = np.asarray(g_hat, dtype=float) + np.asarray(delta_g, dtype=float)
    noise = 2.0 * math.pi * scenario.bandwidth * scenario.noise_psd_comm
    snr = g_eff**2 * p_c * _entropy_factor(scenario) / noise
    out = scenario.bandwidth * np.log2(1.0 + snr)
    return float(out) if out.ndim == 0 else out


def delta_coefficient(scenario: Scenario, serving_led: LedParams, rate_threshold: float) -> float:
    """Geometry constant delta turning the rate requirement into a distance rule.

    The bound meets ``rate_threshold`` iff ||u - v||^2 <= delta * P_c^(1/(m+3)).
    """
    if rate_threshold <= 0:
        raise ValueError("rate threshold must be > 0")
    m = serving_led.lambertian_order
    mu = (m + 1.0) * serving_led.electro_optic_gain * scenario.pd.opto_electric_gain * scenario.pd.effective_area / (2.0 * math.pi)
    dz = serving_led.position[2] - scenario.ue_position[2]
    noise = 2.0 * math.pi * scenario.bandwidth * scenario.noise_psd_comm
    # log domain: extreme thresholds would overflow 2**(r/W)
    exponent = rate_threshold / scenario.bandwidth * math.log(2.0)
    log_snr_target = exponent + math.log1p(-math.exp(-exponent)) if exponent > 1e-8 else math.log(math.expm1(exponent))
    log_delta = (
        math.log(_entropy_factor(scenario))
        + 2.0 * math.log(mu)
        + 2.0 * (m + 1.0) * math.log(dz)
        - math.log(noise)
        - log_snr_target
    ) / (m + 3.0)
    return math.exp(log_delta) if log_delta > -700.0 else 0.0


def delta_b(delta: float, p_c: float, u_hat, v_serving, lambertian_order: float = 1.0) -> float:
    """Slack threshold delta * P_c^(1/(m+3)) - ||u_hat - v||^2 (full 3-D distance)."""
    if p_c < 0:
        raise ValueError("communication power must be >= 0")
    d2 = float(np.sum((np.asarray(u_hat, dtype=float) - np.asarray(v_serving, dtype=float)) ** 2))
    return delta * p_c ** (1.0 / (lambertian_order + 3.0)) - d2


def rate_los_diffuse(p_c: float, g_los, diffuse: DiffuseParams, scenario: Scenario):
    """Rate lower bound (bits/s) when the diffuse tail's ISI is treated as noise."""
    p1, p2 = isi_power_split(p_c, g_los, diffuse, scenario.bandwidth)
    noise = 2.0 * math.pi * scenario.bandwidth * scenario.noise_psd_comm
    num = noise + (np.asarray(p1) + np.asarray(p2)) * _entropy_factor(scenario)
    den = noise + 2.0 * math.pi * scenario.signal_power * np.asarray(p2)
    out = scenario.bandwidth * np.log2(num / den)
    return float(out) if out.ndim == 0 else out
