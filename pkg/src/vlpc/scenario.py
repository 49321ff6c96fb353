"""Physical constants, geometry, power budgets, and scenario files.

A :class:`Scenario` is an immutable description of the room: LED positions
and driver limits, photodetector characteristics, the user terminal
position, noise densities, and the signalling parameters shared by the
positioning and data subframes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

# Reference system parameters (SI units): 60 deg half-power angle LEDs
# (Lambertian order 1), 1 cm^2 detector, 20 MHz bandwidth, 1 A bias,
# 5 W optical/electrical caps, 0.1 us positioning subframe.
REF_LAMBERTIAN_ORDER = 1.0
REF_FOV_HALF_ANGLE = math.radians(120.0)
REF_PD_AREA = 1e-4
REF_BANDWIDTH = 20e6
REF_DC_BIAS = 1.0
REF_NOISE_PSD = 1e-22
REF_MAX_OPTICAL_POWER = 5.0
REF_MAX_ELECTRICAL_POWER = 5.0
REF_SUBFRAME = 1e-7
REF_AMPLITUDE = 0.1
REF_ROOM = (5.0, 5.0, 2.5)
REF_UE_POSITION = (1.1, 1.2, 1.5)


class ScenarioError(ValueError):
    """A scenario field violates one of its invariants."""


@dataclass(frozen=True)
class LedParams:
    """One ceiling LED: geometry, radiation pattern, and driver limits."""

    position: np.ndarray            # (3,) meters
    lambertian_order: float         # m >= 0, radiation pattern exponent
    electro_optic_gain: float       # eta_c
    max_optical_power: float        # watts
    max_electrical_power: float     # watts
    dc_bias: float                  # amperes

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))


@dataclass(frozen=True)
class PdParams:
    """The user terminal's photodetector (fixed upward orientation)."""

    effective_area: float           # m^2
    opto_electric_gain: float       # eta_l
    fov_half_angle: float           # radians, in (0, pi)


@dataclass(frozen=True)
class PowerBudget:
    """Per-LED cap and total electrical budget for signal powers."""

    per_led_cap: float              # watts, binds P_p,i and P_c + P_p,i*
    total_cap: float                # watts, binds sum(P_p) + P_c


@dataclass(frozen=True)
class Scenario:
    """Immutable physical description of one deployment.

    ``signal_power`` is the second moment of the unit symbols (E{s^2});
    for symbols uniform on [-A, A] it equals A^2/3.  ``abg`` holds the
    maximum-entropy input-density parameters for (amplitude, signal_power);
    pass None to have them resolved on construction.
    """

    leds: tuple
    pd: PdParams
    ue_position: np.ndarray         # (3,) meters, z known exactly
    bandwidth: float                # Hz
    noise_psd_positioning: float    # A^2/Hz
    noise_psd_comm: float           # A^2/Hz
    positioning_subframe: float     # seconds
    signal_amplitude: float         # A, peak symbol amplitude
    signal_power: float             # epsilon = E{s^2}
    total_power: float | None = None   # watts; None -> default budget rule
    abg: tuple | None = None        # (alpha, beta, gamma)

    def __post_init__(self):
        object.__setattr__(self, "leds", tuple(self.leds))
        object.__setattr__(self, "ue_position", np.asarray(self.ue_position, dtype=float))
        if self.abg is None:
            from .rate import abg_params

            object.__setattr__(
                self, "abg", tuple(abg_params(self.signal_amplitude, self.signal_power))
            )

    @property
    def num_leds(self) -> int:
        return len(self.leds)

    def led_positions(self) -> np.ndarray:
        return np.array([led.position for led in self.leds])


def _check(cond: bool, message: str):
    if not cond:
        raise ScenarioError(message)


def validate(scenario: Scenario, require_positioning: bool = True) -> None:
    """Raise :class:`ScenarioError` unless every invariant holds.

    With ``require_positioning`` (the default) at least three non-collinear
    LEDs are required and every LED must lie inside the terminal's field of
    view at the configured position.
    """
    _check(scenario.num_leds >= 1, "at least one LED is required")
    for k, led in enumerate(scenario.leds):
        _check(led.lambertian_order > 0, f"led[{k}]: lambertian_order must be > 0")
        _check(led.dc_bias > 0, f"led[{k}]: dc_bias must be > 0")
        _check(
            led.max_optical_power > led.dc_bias,
            f"led[{k}]: max_optical_power {led.max_optical_power} must exceed dc_bias {led.dc_bias}",
        )
        _check(
            led.max_electrical_power > led.dc_bias**2,
            f"led[{k}]: max_electrical_power {led.max_electrical_power} must exceed dc_bias^2",
        )
        _check(
            led.position[2] > scenario.ue_position[2],
            f"led[{k}]: must be mounted above the terminal plane",
        )
    _check(scenario.pd.effective_area > 0, "pd.effective_area must be > 0")
    _check(0 < scenario.pd.fov_half_angle < math.pi, "pd.fov_half_angle must lie in (0, pi)")
    _check(scenario.bandwidth > 0, "bandwidth must be > 0")
    _check(scenario.noise_psd_positioning > 0, "noise_psd_positioning must be > 0")
    _check(scenario.noise_psd_comm > 0, "noise_psd_comm must be > 0")
    _check(scenario.positioning_subframe > 0, "positioning_subframe must be > 0")
    _check(scenario.signal_amplitude > 0, "signal_amplitude must be > 0")
    _check(
        0 < scenario.signal_power <= scenario.signal_amplitude**2 + 1e-15,
        "signal_power must lie in (0, amplitude^2]",
    )
    if scenario.total_power is not None:
        _check(scenario.total_power > 0, "total_power must be > 0")

    if require_positioning:
        _check(
            scenario.num_leds >= 3,
            f"insufficient anchors: positioning needs >= 3 non-collinear LEDs, got {scenario.num_leds}",
        )
        xy = scenario.led_positions()[:, :2]
        spans = xy[1:] - xy[0]
        _check(
            np.linalg.matrix_rank(spans, tol=1e-9) >= 2,
            "insufficient anchors: LED layout is collinear",
        )
        from .channel import los_gain

        for k, led in enumerate(scenario.leds):
            if los_gain(led, scenario.ue_position, scenario.pd) <= 0:
                raise ScenarioError(f"led[{k}] is outside the terminal's field of view")


def power_budget(scenario: Scenario) -> PowerBudget:
    """Per-LED and total power caps implied by bias, optical, and electrical limits.

    The per-LED cap is the three-way minimum of the nonnegativity limit
    I_DC^2/A^2, the electrical headroom (P_e_max - I_DC^2)/eps, and the
    optical headroom (P_o_max - I_DC)^2/A^2.  When the scenario does not pin
    a total power, the default budget 3 * per_led_cap applies.
    """
    a2 = scenario.signal_amplitude**2
    eps = scenario.signal_power
    caps = []
    for led in scenario.leds:
        caps.append(
            min(
                led.dc_bias**2 / a2,
                (led.max_electrical_power - led.dc_bias**2) / eps,
                (led.max_optical_power - led.dc_bias) ** 2 / a2,
            )
        )
    per_led = min(caps)
    _check(per_led > 0, "per-LED power cap is nonpositive")
    total = scenario.total_power if scenario.total_power is not None else 3.0 * per_led
    return PowerBudget(per_led_cap=per_led, total_cap=total)


def default_layout(num_leds: int, room: tuple = REF_ROOM) -> list[np.ndarray]:
    """Symmetric ceiling layouts for 3-6 LEDs in a rectangular room.

    3: equilateral triangle, 4: square, 5: square plus center, 6: 2x3 grid;
    all at ceiling height.
    """
    lx, ly, lz = room
    cx, cy = lx / 2.0, ly / 2.0
    if num_leds == 3:
        r = min(lx, ly) * math.sqrt(2.0) / 4.0
        angles = [math.pi / 2 + k * 2 * math.pi / 3 for k in range(3)]
        pts = [(cx + r * math.cos(a), cy + r * math.sin(a)) for a in angles]
    elif num_leds == 4:
        pts = [(lx / 4, ly / 4), (lx / 4, 3 * ly / 4), (3 * lx / 4, ly / 4), (3 * lx / 4, 3 * ly / 4)]
    elif num_leds == 5:
        pts = [(lx / 4, ly / 4), (lx / 4, 3 * ly / 4), (3 * lx / 4, ly / 4), (3 * lx / 4, 3 * ly / 4), (cx, cy)]
    elif num_leds == 6:
        pts = [(x, y) for x in (lx / 4, 3 * lx / 4) for y in (ly / 6, ly / 2, 5 * ly / 6)]
    else:
        raise ScenarioError(f"unsupported LED count {num_leds}; supported: 3, 4, 5, 6")
    return [np.array([x, y, lz]) for x, y in pts]


def _reference_led(position) -> LedParams:
    return LedParams(
        position=position,
        lambertian_order=REF_LAMBERTIAN_ORDER,
        electro_optic_gain=1.0,
        max_optical_power=REF_MAX_OPTICAL_POWER,
        max_electrical_power=REF_MAX_ELECTRICAL_POWER,
        dc_bias=REF_DC_BIAS,
    )


def default_scenario(num_leds: int = 3, room: tuple = REF_ROOM) -> Scenario:
    """Reference indoor deployment with the symmetric default layout."""
    amp = REF_AMPLITUDE
    eps = amp**2 / 3.0
    return Scenario(
        leds=[_reference_led(p) for p in default_layout(num_leds, room)],
        pd=PdParams(effective_area=REF_PD_AREA, opto_electric_gain=1.0, fov_half_angle=REF_FOV_HALF_ANGLE),
        ue_position=np.array(REF_UE_POSITION),
        bandwidth=REF_BANDWIDTH,
        noise_psd_positioning=REF_NOISE_PSD,
        noise_psd_comm=REF_NOISE_PSD,
        positioning_subframe=REF_SUBFRAME,
        signal_amplitude=amp,
        signal_power=eps,
        total_power=None,
        abg=(math.log(2 * amp) - 1.0, 0.0, 0.0),
    )


def load_scenario(path) -> Scenario:
    """Read a scenario from a JSON document.

    Expected top-level keys: ``leds`` (array of {position, m, eta_c,
    p_o_max, p_e_max, i_dc}), ``pd`` ({a_r_m2, eta_l, fov_half_angle_rad}),
    ``ue`` ({position}), ``signal`` ({A, epsilon, optionally abg}),
    ``noise`` ({sigma_p_sq, sigma_c_sq}), ``bandwidth_hz``, ``t_p_s``, and
    optionally ``p_total_w``.  All values are SI.  A missing ``p_total_w``
    selects the default budget rule (see :func:`power_budget`).
    """
    doc = json.loads(Path(path).read_text())
    try:
        leds = [
            LedParams(
                position=np.asarray(led["position"], dtype=float),
                lambertian_order=float(led["m"]),
                electro_optic_gain=float(led["eta_c"]),
                max_optical_power=float(led["p_o_max"]),
                max_electrical_power=float(led["p_e_max"]),
                dc_bias=float(led["i_dc"]),
            )
            for led in doc["leds"]
        ]
        pd = PdParams(
            effective_area=float(doc["pd"]["a_r_m2"]),
            opto_electric_gain=float(doc["pd"]["eta_l"]),
            fov_half_angle=float(doc["pd"]["fov_half_angle_rad"]),
        )
        signal = doc["signal"]
        scenario = Scenario(
            leds=leds,
            pd=pd,
            ue_position=np.asarray(doc["ue"]["position"], dtype=float),
            bandwidth=float(doc["bandwidth_hz"]),
            noise_psd_positioning=float(doc["noise"]["sigma_p_sq"]),
            noise_psd_comm=float(doc["noise"]["sigma_c_sq"]),
            positioning_subframe=float(doc["t_p_s"]),
            signal_amplitude=float(signal["A"]),
            signal_power=float(signal["epsilon"]),
            total_power=float(doc["p_total_w"]) if "p_total_w" in doc else None,
            abg=tuple(signal["abg"]) if "abg" in signal else None,
        )
    except KeyError as exc:
        raise ScenarioError(f"scenario file is missing required key {exc}") from exc
    return scenario


def scenario_to_dict(scenario: Scenario) -> dict:
    """Inverse of :func:`load_scenario`, for manifests and round-trips."""
    doc = {
        "leds": [
            {
                "position": list(map(float, led.position)),
                "m": led.lambertian_order,
                "eta_c": led.electro_optic_gain,
                "p_o_max": led.max_optical_power,
                "p_e_max": led.max_electrical_power,
                "i_dc": led.dc_bias,
            }
            for led in scenario.leds
        ],
        "pd": {
            "a_r_m2": scenario.pd.effective_area,
            "eta_l": scenario.pd.opto_electric_gain,
            "fov_half_angle_rad": scenario.pd.fov_half_angle,
        },
        "ue": {"position": list(map(float, scenario.ue_position))},
        "signal": {
            "A": scenario.signal_amplitude,
            "epsilon": scenario.signal_power,
            "abg": list(scenario.abg),
        },
        "noise": {
            "sigma_p_sq": scenario.noise_psd_positioning,
            "sigma_c_sq": scenario.noise_psd_comm,
        },
        "bandwidth_hz": scenario.bandwidth,
        "t_p_s": scenario.positioning_subframe,
    }
    if scenario.total_power is not None:
        doc["p_total_w"] = scenario.total_power
    return doc
