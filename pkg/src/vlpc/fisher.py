"""Fisher information of the 2-D position estimate and related SPD algebra.

The information matrix is linear in the per-LED positioning powers:
J(p) = (eps * T_p / sigma_p^2) * sum_i P_i * grad(g_i) grad(g_i)^T,
with LEDs outside the field of view contributing nothing.
"""

from __future__ import annotations

import numpy as np

from .channel import gain_gradient
from .scenario import Scenario

# Determinants at or below this are treated as singular (CRLB unbounded);
# double-precision underflow guard at the problem's natural scales.
SINGULAR_DET_TOL = 1e-30


class SingularFimError(np.linalg.LinAlgError):
    """The information matrix is (numerically) singular; the CRLB is unbounded."""


def fim_coefficients(scenario: Scenario, at=None) -> np.ndarray:
    """Per-LED rank-one information terms K_i so that J(p) = sum_i P_i K_i."""
    pos = scenario.ue_position if at is None else np.asarray(at, dtype=float)
    scale = scenario.signal_power * scenario.positioning_subframe / scenario.noise_psd_positioning
    out = np.empty((scenario.num_leds, 2, 2))
    for i, led in enumerate(scenario.leds):
        grad = gain_gradient(led, pos, scenario.pd)
        out[i] = scale * np.outer(grad, grad)
    return out


def fim(scenario: Scenario, p_p, at=None) -> np.ndarray:
    """2x2 information matrix for positioning powers ``p_p`` (watts)."""
    p = np.asarray(p_p, dtype=float)
    if p.shape != (scenario.num_leds,):
        raise ValueError(f"expected {scenario.num_leds} positioning powers, got shape {p.shape}")
    return np.tensordot(p, fim_coefficients(scenario, at=at), axes=1)


def crlb(j: np.ndarray) -> float:
    """Tr(J^-1) via the closed-form 2x2 inverse, in m^2."""
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    if det <= SINGULAR_DET_TOL:
        raise SingularFimError(f"information matrix is singular (det={det:.3e})")
    return float((j[0, 0] + j[1, 1]) / det)


def spd_power(j: np.ndarray, exponent: float) -> np.ndarray:
    """Matrix power of a symmetric positive-definite matrix via eigendecomposition."""
    sym = np.asarray(j, dtype=float)
    if not np.allclose(sym, sym.T, rtol=1e-10, atol=0.0):
        raise ValueError("matrix must be symmetric")
    w, v = np.linalg.eigh(sym)
    if np.any(w <= 0):
        raise ValueError(f"matrix must be positive definite (eigenvalues {w})")
    return (v * w**exponent) @ v.T
