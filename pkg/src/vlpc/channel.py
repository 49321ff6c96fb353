"""Lambertian LOS channel gains, CSI errors, gradients, and the ISI split.

All gains assume a downward-facing LED and an upward-facing detector, so
the irradiance and incidence angles coincide and cos(phi) = cos(psi) =
(z_led - z_rx) / d.  Positioning errors are horizontal 2-vectors; the
terminal height is known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import LedParams, PdParams, Scenario


@dataclass(frozen=True)
class DiffuseParams:
    """Exponential-tail diffuse channel riding behind the LOS impulse."""

    power_efficiency: float     # eta, integrated diffuse gain
    decay_time: float           # tau, seconds
    delay: float                # Delta T between LOS and diffuse arrival, seconds

    def __post_init__(self):
        if self.decay_time <= 0:
            raise ValueError("decay_time must be > 0")
        if self.delay < 0:
            raise ValueError("delay must be >= 0")

    @classmethod
    def from_ratio(cls, g_los: float, los_diffuse_ratio_db: float, decay_time: float, delay: float):
        """Set the efficiency so g_los^2 / eta^2 matches the given dB ratio."""
        eta = g_los / 10.0 ** (los_diffuse_ratio_db / 20.0)
        return cls(power_efficiency=eta, decay_time=decay_time, delay=delay)


def _mu(led: LedParams, pd: PdParams) -> float:
    return (led.lambertian_order + 1.0) * led.electro_optic_gain * pd.opto_electric_gain * pd.effective_area / (2.0 * math.pi)


def los_gain(led: LedParams, receiver_pos, pd: PdParams):
    """LOS channel gain at ``receiver_pos``; zero outside the field of view.

    ``receiver_pos`` may be a single 3-vector or an (..., 3) array; the gain
    is returned with matching shape.
    """
    pos = np.asarray(receiver_pos, dtype=float)
    m = led.lambertian_order
    dz = led.position[2] - pos[..., 2]
    if np.any(dz <= 0):
        raise ValueError("receiver must lie strictly below the LED plane")
    d2 = np.sum((pos - led.position) ** 2, axis=-1)
    if np.any(d2 <= 0):
        raise ValueError("receiver coincides with the LED")
    d = np.sqrt(d2)
    g = _mu(led, pd) * dz ** (m + 1.0) / d ** (m + 3.0)
    in_fov = dz / d >= math.cos(pd.fov_half_angle)
    out = np.where(in_fov, g, 0.0)
    return float(out) if out.ndim == 0 else out


def estimated_gain(led: LedParams, estimated_pos, pd: PdParams):
    """CSI reconstructed from an estimated position: the LOS formula at u-hat."""
    return los_gain(led, estimated_pos, pd)


def gain_error(led: LedParams, estimated_pos, e_p, pd: PdParams):
    """Signed CSI error induced by a horizontal positioning error.

    ``e_p`` is a 2-vector (or (..., 2) array) so that the true position is
    the estimate displaced by [e_x, e_y, 0].  Returns g(true) - g(estimate).
    """
    est = np.asarray(estimated_pos, dtype=float)
    e = np.atleast_2d(np.asarray(e_p, dtype=float))
    true_pos = est + np.concatenate([e, np.zeros(e.shape[:-1] + (1,))], axis=-1)
    delta = los_gain(led, true_pos, pd) - los_gain(led, est, pd)
    return float(delta[0]) if np.asarray(e_p).ndim == 1 else delta


def gain_gradient(led: LedParams, pos, pd: PdParams) -> np.ndarray:
    """Horizontal gradient (dg/dx, dg/dy) of the LOS gain at ``pos``."""
    p = np.asarray(pos, dtype=float)
    m = led.lambertian_order
    dz = led.position[2] - p[2]
    diff = p - led.position
    d = np.linalg.norm(diff)
    if dz / d < math.cos(pd.fov_half_angle):
        return np.zeros(2)
    return -(m + 3.0) * _mu(led, pd) * dz ** (m + 1.0) * diff[:2] / d ** (m + 5.0)


def isi_power_split(p_c: float, g_los, diffuse: DiffuseParams, bandwidth: float):
    """Received power inside vs. outside the first symbol interval.

    P1 collects the LOS impulse plus the diffuse tail up to 1/W; P2 is the
    diffuse tail spilling into later symbols (the ISI power).  Requires the
    diffuse delay to be shorter than the symbol, W * delay < 1.
    """
    if bandwidth * diffuse.delay >= 1.0:
        raise ValueError("diffuse delay must be shorter than the symbol interval")
    tau = diffuse.decay_time
    eta2 = diffuse.power_efficiency**2
    tail = math.exp((2.0 * diffuse.delay * bandwidth - 2.0) / (bandwidth * tau))
    p1 = np.asarray(g_los) ** 2 * p_c + eta2 * p_c / (2.0 * tau) * (1.0 - tail)
    p2 = eta2 * p_c / (2.0 * tau) * tail
    if np.ndim(g_los) == 0:
        return float(p1), float(p2)
    return p1, np.full_like(p1, p2)
