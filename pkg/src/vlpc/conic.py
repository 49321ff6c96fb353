"""Small dense conic programs: linear objective over linear, second-order
cone, and semidefinite blocks.

Problems here are tiny (tens of variables, SDP blocks of side <= 5), so
everything is dense and deterministic.  Solving is delegated to a
primal-dual path-following interior-point method (Nesterov-Todd scaling
with Mehrotra correction); feasibility of returned points is re-checked by
an evaluator that shares no code with the solver.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import cvxopt
import cvxopt.solvers

MAX_VARIABLES = 64
MAX_SDP_SIDE = 5


@dataclass
class LinearBlock:
    """a @ x <= b"""

    a: np.ndarray
    b: float


@dataclass
class SocBlock:
    """||F x + f|| <= c @ x + d"""

    F: np.ndarray
    f: np.ndarray
    c: np.ndarray
    d: float


@dataclass
class SdpBlock:
    """const + sum_i x_i coeffs[i] >= 0 (PSD), coeffs of shape (n, s, s)."""

    const: np.ndarray
    coeffs: np.ndarray


@dataclass
class ConicProblem:
    objective: np.ndarray
    linear: list = field(default_factory=list)
    soc: list = field(default_factory=list)
    sdp: list = field(default_factory=list)

    @property
    def num_vars(self) -> int:
        return len(self.objective)

    def validate(self) -> None:
        n = self.num_vars
        if n > MAX_VARIABLES:
            raise ValueError(f"problem has {n} variables; limit is {MAX_VARIABLES}")
        for blk in self.linear:
            if blk.a.shape != (n,):
                raise ValueError("linear block dimension mismatch")
        for blk in self.soc:
            if blk.F.shape[1] != n or blk.f.shape != (blk.F.shape[0],) or blk.c.shape != (n,):
                raise ValueError("second-order-cone block dimension mismatch")
        for blk in self.sdp:
            s = blk.const.shape[0]
            if s > MAX_SDP_SIDE:
                raise ValueError(f"semidefinite block side {s} exceeds limit {MAX_SDP_SIDE}")
            if blk.const.shape != (s, s) or blk.coeffs.shape != (n, s, s):
                raise ValueError("semidefinite block dimension mismatch")
            if not np.allclose(blk.const, blk.const.T):
                raise ValueError("semidefinite block constant is not symmetric")
            for a in blk.coeffs:
                if not np.allclose(a, a.T):
                    raise ValueError("semidefinite block coefficient is not symmetric")


@dataclass
class ConicSolution:
    status: str                 # optimal | infeasible | unbounded | max_iterations
    x: np.ndarray | None
    objective_value: float | None
    kkt_residuals: tuple        # (primal, dual, gap)


def max_violation(problem: ConicProblem, x: np.ndarray) -> float:
    """Worst constraint violation at ``x`` (0 when feasible).

    Deliberately independent of the solver path: plain norm and
    eigenvalue evaluations of each block.
    """
    worst = 0.0
    for blk in problem.linear:
        worst = max(worst, float(blk.a @ x - blk.b))
    for blk in problem.soc:
        worst = max(worst, float(np.linalg.norm(blk.F @ x + blk.f) - (blk.c @ x + blk.d)))
    for blk in problem.sdp:
        mat = blk.const + np.tensordot(x, blk.coeffs, axes=1)
        worst = max(worst, float(-np.linalg.eigvalsh(mat)[0]))
    return worst


def _to_cvxopt(problem: ConicProblem):
    n = problem.num_vars
    rows = []
    h = []
    dims = {"l": len(problem.linear), "q": [], "s": []}
    for blk in problem.linear:
        rows.append(blk.a.reshape(1, n))
        h.append(np.array([blk.b]))
    for blk in problem.soc:
        rows.append(np.vstack([-blk.c.reshape(1, n), -blk.F]))
        h.append(np.concatenate([[blk.d], blk.f]))
        dims["q"].append(1 + blk.F.shape[0])
    for blk in problem.sdp:
        s = blk.const.shape[0]
        rows.append(-blk.coeffs.reshape(n, s * s).T)
        h.append(blk.const.reshape(s * s))
        dims["s"].append(s)
    G = np.vstack(rows) if rows else np.zeros((0, n))
    hv = np.concatenate(h) if h else np.zeros(0)
    return cvxopt.matrix(problem.objective), cvxopt.matrix(G), cvxopt.matrix(hv), dims, G, hv


def solve(problem: ConicProblem, tol: float = 1e-8, max_iter: int = 200) -> ConicSolution:
    """Solve the conic program; deterministic for identical inputs."""
    problem.validate()
    c, G, h, dims, G_np, h_np = _to_cvxopt(problem)
    options = {
        "show_progress": False,
        "abstol": tol,
        "reltol": tol,
        "feastol": tol,
        "maxiters": max_iter,
        "refinement": 2,
    }
    try:
        sol = cvxopt.solvers.conelp(c, G, h, dims, options=options)
    except (ArithmeticError, ZeroDivisionError):
        sol = {"status": "unknown", "x": None, "z": None}
    if sol.get("x") is None and sol["status"] == "unknown":
        return ConicSolution("max_iterations", None, None, (np.inf, np.inf, np.inf))

    status = {
        "optimal": "optimal",
        "primal infeasible": "infeasible",
        "dual infeasible": "unbounded",
        "unknown": "max_iterations",
    }[sol["status"]]
    if status in ("infeasible", "unbounded"):
        return ConicSolution(status, None, None, (np.inf, np.inf, np.inf))

    x = np.array(sol["x"]).ravel()
    z = np.array(sol["z"]).ravel() if sol.get("z") is not None else np.zeros(len(h_np))
    primal = max_violation(problem, x)
    dual = float(np.max(np.abs(problem.objective + G_np.T @ z))) if len(h_np) else 0.0
    gap = abs(float(problem.objective @ x + h_np @ z))
    return ConicSolution(status, x, float(problem.objective @ x), (primal, dual, gap))


# --- standard constraint builders -----------------------------------------


def _unit(n: int, i: int) -> np.ndarray:
    e = np.zeros(n)
    e[i] = 1.0
    return e


def trace_inverse_epigraph(n: int, j_const: np.ndarray, j_coeffs: dict, z_indices) -> SdpBlock:
    """Schur-complement lift making Tr(inverse of an affine 2x2 SPD map) linear.

    Emits [[J(x), I], [I, Z]] >= 0 with Z the symmetric matrix of the three
    variables ``z_indices`` = (z11, z12, z22); minimizing z11 + z22 under
    the block recovers Tr(J^-1) at the optimum.  ``j_coeffs`` maps variable
    index -> symmetric 2x2 contribution to J.
    """
    z11, z12, z22 = z_indices
    const = np.zeros((4, 4))
    const[0:2, 2:4] = np.eye(2)
    const[2:4, 0:2] = np.eye(2)
    const[0:2, 0:2] = j_const
    coeffs = np.zeros((n, 4, 4))
    for idx, mat in j_coeffs.items():
        coeffs[idx, 0:2, 0:2] += mat
    coeffs[z11, 2, 2] = 1.0
    coeffs[z12, 2, 3] = coeffs[z12, 3, 2] = 1.0
    coeffs[z22, 3, 3] = 1.0
    return SdpBlock(const, coeffs)


def hyperbolic_block(n: int, i: int, j: int, product: float) -> SocBlock:
    """x_i * x_j >= product with x_i, x_j >= 0, as a rotated cone."""
    if product < 0:
        raise ValueError("product bound must be >= 0")
    F = np.zeros((2, n))
    F[1, i] = 1.0
    F[1, j] = -1.0
    f = np.array([2.0 * np.sqrt(product), 0.0])
    c = _unit(n, i) + _unit(n, j)
    return SocBlock(F, f, c, 0.0)


def square_bound_block(n: int, i: int, j: int, scale: float = 1.0) -> SocBlock:
    """x_i^2 <= scale * x_j (x_j >= 0), as a rotated cone."""
    F = np.zeros((2, n))
    F[0, i] = 2.0 / np.sqrt(scale)
    F[1, j] = 1.0
    f = np.array([0.0, -1.0])
    return SocBlock(F, f, _unit(n, j), 1.0)


def power_root_epigraph(n: int, p_index: int, q_index: int, aux_index: int, exponent: float):
    """Blocks enforcing 0 <= q <= P^exponent for exponent 1/4.

    Two stacked rotated cones: q^2 <= s and s^2 <= P.  Other exponents are
    not representable by this tower; callers fall back to linearization.
    """
    if not np.isclose(exponent, 0.25):
        raise NotImplementedError(
            f"exponent {exponent} is not supported by the cone tower; linearize instead"
        )
    blocks = [
        square_bound_block(n, q_index, aux_index),
        square_bound_block(n, aux_index, p_index),
    ]
    bounds = [LinearBlock(-_unit(n, q_index), 0.0), LinearBlock(-_unit(n, aux_index), 0.0)]
    return blocks, bounds


# --- text serialization for regression fixtures ----------------------------


def dumps(problem: ConicProblem) -> str:
    """One block per line; matrices row-major."""
    out = io.StringIO()

    def fmt(arr):
        return " ".join(repr(float(v)) for v in np.asarray(arr).ravel())

    out.write(f"objective {problem.num_vars} {fmt(problem.objective)}\n")
    for blk in problem.linear:
        out.write(f"linear {fmt(blk.a)} | {blk.b!r}\n")
    for blk in problem.soc:
        out.write(f"soc {blk.F.shape[0]} {fmt(blk.F)} | {fmt(blk.f)} | {fmt(blk.c)} | {blk.d!r}\n")
    for blk in problem.sdp:
        out.write(f"sdp {blk.const.shape[0]} {fmt(blk.const)} | {fmt(blk.coeffs)}\n")
    return out.getvalue()


def loads(text: str) -> ConicProblem:
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    head = lines[0].split()
    assert head[0] == "objective"
    n = int(head[1])
    problem = ConicProblem(objective=np.array([float(v) for v in head[2:]]))
    for ln in lines[1:]:
        kind, rest = ln.split(maxsplit=1)
        parts = [np.array([float(v) for v in seg.split()]) for seg in rest.split("|")]
        if kind == "linear":
            problem.linear.append(LinearBlock(parts[0], float(parts[1][0])))
        elif kind == "soc":
            k = int(parts[0][0])
            problem.soc.append(
                SocBlock(parts[0][1:].reshape(k, n), parts[1], parts[2], float(parts[3][0]))
            )
        elif kind == "sdp":
            s = int(parts[0][0])
            problem.sdp.append(
                SdpBlock(parts[0][1:].reshape(s, s), parts[1].reshape(n, s, s))
            )
        else:
            raise ValueError(f"unknown block kind {kind!r}")
    return problem
