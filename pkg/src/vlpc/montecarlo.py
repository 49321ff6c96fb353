"""Monte Carlo evaluation of power allocations under position error.

Error models share a covariance (normally the position CRLB of the
allocation being tested) but differ in shape, to probe how far the
distributionally robust guarantees actually hold:

* gaussian: zero-mean normal.
* uniform_ellipse: uniform on the ellipse with matching covariance.
* two_point_mixture: four-atom discrete distribution along the scaled
  Cholesky directions, again covariance-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .allocator import PowerAllocation, RobustConfig, InfeasibleError
from .allocator import solve_perfect, solve_bernstein, solve_cvar_sca
from .channel import DiffuseParams, los_gain, gain_error
from .fisher import fim, crlb
from .rate import rate_lower_bound, rate_los_diffuse
from .scenario import Scenario

ERROR_KINDS = ("gaussian", "uniform_ellipse", "two_point_mixture")
CDF_GRID_POINTS = 512


@dataclass(frozen=True)
class ErrorModel:
    kind: str
    covariance: np.ndarray

    def __post_init__(self):
        if self.kind not in ERROR_KINDS:
            raise ValueError(f"unknown error model {self.kind!r}")
        cov = np.asarray(self.covariance, dtype=float)
        if cov.shape != (2, 2) or not np.allclose(cov, cov.T):
            raise ValueError("covariance must be a symmetric 2x2 matrix")
        if np.linalg.eigvalsh(cov)[0] < 0:
            raise ValueError("covariance must be positive semidefinite")


@dataclass(frozen=True)
class ExperimentResult:
    rates: np.ndarray
    grid: np.ndarray
    cdf: np.ndarray
    outage: float
    threshold: float


def sample_errors(model: ErrorModel, num: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``num`` planar position errors, shape (num, 2)."""
    cov = np.asarray(model.covariance, dtype=float)
    chol = np.linalg.cholesky(cov + 1e-300 * np.eye(2))
    if model.kind == "gaussian":
        return rng.standard_normal((num, 2)) @ chol.T
    if model.kind == "uniform_ellipse":
        # uniform on the unit disk has covariance I/4; doubling the
        # Cholesky factor restores the target covariance
        r = np.sqrt(rng.uniform(size=num))
        phi = rng.uniform(0.0, 2.0 * np.pi, size=num)
        disk = np.column_stack([r * np.cos(phi), r * np.sin(phi)])
        return disk @ (2.0 * chol).T
    atoms = np.sqrt(2.0) * np.vstack([chol[:, 0], -chol[:, 0], chol[:, 1], -chol[:, 1]])
    return atoms[rng.integers(0, 4, size=num)]


def _realized_rates(
    scenario: Scenario,
    allocation: PowerAllocation,
    errors: np.ndarray,
    channel_kind: str,
    diffuse: DiffuseParams | None,
) -> np.ndarray:
    led = scenario.leds[allocation.serving_index]
    u_hat = scenario.ue_position
    g_hat = float(los_gain(led, u_hat, scenario.pd))
    dg = gain_error(led, u_hat, errors, scenario.pd)
    if channel_kind == "los":
        return rate_lower_bound(g_hat, dg, allocation.p_c, scenario)
    if channel_kind != "los_diffuse":
        raise ValueError(f"unknown channel kind {channel_kind!r}")
    g_true = g_hat + dg
    rates = np.zeros(len(errors))
    pos = g_true > 0
    if diffuse is None:
        raise ValueError("los_diffuse evaluation needs diffuse parameters")
    for i in np.nonzero(pos)[0]:
        d = DiffuseParams(
            power_efficiency=diffuse.power_efficiency * g_true[i] / g_hat,
            decay_time=diffuse.decay_time,
            delay=diffuse.delay,
        )
        rates[i] = rate_los_diffuse(allocation.p_c, g_true[i], d, scenario)
    return rates


def rate_cdf(
    scenario: Scenario,
    allocation: PowerAllocation,
    model: ErrorModel,
    threshold: float,
    num_samples: int = 100_000,
    channel_kind: str = "los",
    diffuse: DiffuseParams | None = None,
    seed: int = 0,
) -> ExperimentResult:
    """Empirical CDF of the achieved rate and the outage at ``threshold``."""
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    errors = sample_errors(model, num_samples, rng)
    rates = _realized_rates(scenario, allocation, errors, channel_kind, diffuse)
    lo, hi = float(np.min(rates)), float(np.max(rates))
    if hi <= lo:
        hi = lo + 1.0
    grid = np.linspace(lo, hi, CDF_GRID_POINTS)
    cdf = np.searchsorted(np.sort(rates), grid, side="right") / len(rates)
    return ExperimentResult(rates, grid, cdf, outage_probability(rates, threshold), threshold)


def outage_probability(rates: np.ndarray, threshold: float) -> float:
    return float(np.mean(np.asarray(rates) < threshold))


def sweep(
    scenario: Scenario,
    rate_thresholds,
    outage: float,
    schemes=("perfect", "bernstein", "cvar"),
) -> list:
    """Solve each scheme across rate thresholds.

    Returns one dict per (threshold, scheme) with the positioning accuracy
    and power split; infeasible points carry NaNs and status
    ``infeasible``.
    """
    solvers = {
        "perfect": lambda cfg: solve_perfect(scenario, cfg.rate_threshold),
        "bernstein": lambda cfg: solve_bernstein(scenario, cfg),
        "cvar": lambda cfg: solve_cvar_sca(scenario, cfg),
    }
    rows = []
    for rbar in rate_thresholds:
        cfg = RobustConfig(rate_threshold=rbar, outage_probability=outage)
        for scheme in schemes:
            try:
                alloc = solvers[scheme](cfg)
                rows.append(
                    {
                        "rate_mbps": float(rbar) / 1e6,
                        "scheme": scheme,
                        "sqrt_crlb_m": float(np.sqrt(alloc.crlb_value)),
                        "p_c_w": alloc.p_c,
                        "sum_p_p_w": alloc.sum_p_p,
                        "status": alloc.status,
                    }
                )
            except InfeasibleError:
                rows.append(
                    {
                        "rate_mbps": float(rbar) / 1e6,
                        "scheme": scheme,
                        "sqrt_crlb_m": float("nan"),
                        "p_c_w": float("nan"),
                        "sum_p_p_w": float("nan"),
                        "status": "infeasible",
                    }
                )
    return rows


def allocation_error_model(scenario: Scenario, allocation: PowerAllocation, kind: str) -> ErrorModel:
    """Error model whose covariance is the CRLB of the allocation's own
    pilot powers, the self-consistent choice for testing its guarantee."""
    j = fim(scenario, allocation.p_p)
    return ErrorModel(kind, np.linalg.inv(j))
