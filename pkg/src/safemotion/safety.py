"""Minimally invasive safety filtering against a set of linear barriers.

The main entry point is filter(): it corrects a nominal input just enough
that every barrier satisfies hdot_i >= -gain_i * h_i, which renders the
admissible set forward invariant. Also here: a brute-force QP oracle used to
cross-check the analytic path, and two comparison baselines (a reciprocal
log-barrier filter and a one-step position projection solved numerically).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import kernels
from .barriers import AdmissibleSet
from .errors import (
    BarrierPreconditionError,
    DependentConstraintWarning,
    DimensionMismatchError,
    InfeasibleFilterError,
    UndefinedBarrierError,
)
from .systems import DynamicalSystem

KKT_TOL = 1e-8
RANK_TOL = 1e-10


@dataclass(frozen=True)
class ConstraintMatrices:
    """Half-plane input constraints A u <= b at one state.

    Row i of A is -(n_i . G(x)) and b_i = n_i . f(x) + gain_i * h_i(x), so
    {u : A u <= b} is exactly the set of inputs keeping every barrier's decay
    condition satisfied. h is carried along for reporting.
    """

    A: np.ndarray
    b: np.ndarray
    h: np.ndarray


@dataclass(frozen=True)
class FilterResult:
    u_star: np.ndarray
    u_nominal: np.ndarray
    active_ids: tuple[str, ...]
    active_mask: np.ndarray
    multipliers: np.ndarray
    kkt_residual: float
    solve_time: float
    h: np.ndarray
    status: int = 0


def build_constraints(aset: AdmissibleSet, system: DynamicalSystem, x) -> ConstraintMatrices:
    """Assemble the input constraints for every barrier at state x."""
    x = np.asarray(x, dtype=float)
    if aset.dim is not None and x.shape != (aset.dim,):
        raise DimensionMismatchError(f"state shape {x.shape} != ({aset.dim},)")
    c = len(aset)
    if c == 0:
        return ConstraintMatrices(np.zeros((0, system.input_dim)), np.zeros(0), np.zeros(0))
    f = system.field_f(x)
    G = system.field_G(x)
    N = aset.normal_matrix
    h = N @ x + aset.offsets
    LG = N @ G
    row_norms = np.linalg.norm(LG, axis=1)
    if np.any(row_norms < 1e-10):
        bad = int(np.argmin(row_norms))
        raise BarrierPreconditionError(
            f"barrier {aset.barriers[bad].id or bad}: input direction n.G is numerically zero"
        )
    A = -LG
    b = N @ f + aset.gains * h
    return ConstraintMatrices(A, b, h)


def _multipliers(u_o: np.ndarray, A: np.ndarray, b: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Recover the inequality multipliers for the rows the solver made active."""
    lam = np.zeros(A.shape[0])
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return lam
    A_c = A[idx]
    rhs = b[idx] - A_c @ u_o
    alpha, *_ = np.linalg.lstsq(A_c @ A_c.T, rhs, rcond=None)
    lam[idx] = -2.0 * alpha
    return lam


def _kkt_residual(u: np.ndarray, u_o: np.ndarray, A: np.ndarray, b: np.ndarray,
                  lam: np.ndarray) -> float:
    if A.shape[0] == 0:
        return 0.0
    slack = A @ u - b
    primal = float(np.max(slack, initial=0.0))
    dual = float(np.max(-lam, initial=0.0))
    comp = float(np.max(np.abs(lam * slack), initial=0.0))
    # Stationarity: 2(u - u_o) + A^T lam = 0.
    stat = float(np.max(np.abs(2.0 * (u - u_o) + A.T @ lam), initial=0.0))
    return max(primal, dual, comp, stat)


def _result_from_kernel(aset: AdmissibleSet, cm: ConstraintMatrices, u_o: np.ndarray,
                        kkt_tol: float, rank_tol: float, label: str) -> FilterResult:
    t0 = time.perf_counter()
    u, mask, status = kernels.qp_filter(u_o, cm.A, cm.b, kkt_tol, rank_tol)
    solve_time = time.perf_counter() - t0
    if status < 0:
        raise InfeasibleFilterError(f"{label}: no input satisfies all barrier constraints")
    if status & kernels.STATUS_DEPENDENT:
        warnings.warn(
            f"{label}: dropped numerically dependent constraint rows",
            DependentConstraintWarning,
            stacklevel=3,
        )
    mask = mask.astype(bool)
    lam = _multipliers(u_o, cm.A, cm.b, mask)
    ids = tuple(aset.barriers[i].id for i in np.flatnonzero(mask))
    return FilterResult(
        u_star=u,
        u_nominal=u_o.copy(),
        active_ids=ids,
        active_mask=mask,
        multipliers=lam,
        kkt_residual=_kkt_residual(u, u_o, cm.A, cm.b, lam),
        solve_time=solve_time,
        h=cm.h.copy(),
        status=status,
    )


def filter(aset: AdmissibleSet, system: DynamicalSystem, x, u_nominal=None,
           kkt_tol: float = KKT_TOL, rank_tol: float = RANK_TOL) -> FilterResult:
    """Smallest input change that keeps every barrier's decay condition satisfied.

    Solves argmin ||u - u_nominal||^2 subject to A u <= b via an active-set
    iteration on the closed-form equality projection
    u = u_o + A_c^T (A_c A_c^T)^-1 (b_c - A_c u_o), seeded with the rows
    already violated at the nominal input. solve_time covers the solver call
    only. Raises InfeasibleFilterError when the constraints conflict; warns
    DependentConstraintWarning when dependent active rows had to be dropped.
    """
    if u_nominal is None:
        u_o = np.zeros(system.input_dim)
    else:
        u_o = np.asarray(u_nominal, dtype=float)
        if u_o.shape != (system.input_dim,):
            raise DimensionMismatchError(f"input shape {u_o.shape} != ({system.input_dim},)")
    cm = build_constraints(aset, system, x)
    return _result_from_kernel(aset, cm, u_o, kkt_tol, rank_tol, "safety filter")


def qp_oracle(cm: ConstraintMatrices, u_o, kkt_tol: float = KKT_TOL) -> np.ndarray:
    """Reference solve by exhaustive enumeration of active subsets.

    Projects the nominal input onto every consistent active face (pinv based,
    a deliberately different linear-algebra route from the production path)
    and returns the feasible candidate with minimum correction. Desk scale
    only: cost grows as 2^c.
    """
    u_o = np.asarray(u_o, dtype=float)
    A = np.atleast_2d(np.asarray(cm.A, dtype=float))
    b = np.asarray(cm.b, dtype=float)
    c, m = A.shape
    if c == 0:
        return u_o.copy()
    if c > 16:
        raise ValueError("oracle enumeration is limited to 16 constraints")
    best_u = None
    best_obj = np.inf
    for size in range(0, c + 1):
        for subset in combinations(range(c), size):
            if size == 0:
                u = u_o.copy()
            else:
                A_c = A[list(subset)]
                r = b[list(subset)] - A_c @ u_o
                corr = np.linalg.pinv(A_c) @ r
                u = u_o + corr
                if np.linalg.norm(A_c @ u - b[list(subset)]) > 1e-9:
                    continue  # inconsistent equality system, not a face
            if np.all(A @ u - b <= kkt_tol):
                obj = float(np.dot(u - u_o, u - u_o))
                if obj < best_obj - 1e-15:
                    best_obj = obj
                    best_u = u
    if best_u is None:
        raise InfeasibleFilterError("oracle: no feasible active subset")
    return best_u


def rcbf_filter(aset: AdmissibleSet, system: DynamicalSystem, x, u_nominal=None,
                kkt_tol: float = KKT_TOL, rank_tol: float = RANK_TOL) -> FilterResult:
    """Comparison baseline built on reciprocal log barriers.

    Uses R_i = -log(h_i / (1 + h_i)), which blows up at the boundary and is
    undefined for h_i <= 0, with the decay condition Rdot_i <= gain_i / R_i.
    Gradient rows scale like 1/(h_i (1 + h_i)), so corrections vanish deep in
    the interior and diverge at the boundary. Interior starts behave like
    filter(); exterior states raise UndefinedBarrierError by construction.
    """
    x = np.asarray(x, dtype=float)
    if u_nominal is None:
        u_o = np.zeros(system.input_dim)
    else:
        u_o = np.asarray(u_nominal, dtype=float)
    c = len(aset)
    if c == 0:
        return FilterResult(u_o.copy(), u_o.copy(), (), np.zeros(0, dtype=bool),
                            np.zeros(0), 0.0, 0.0, np.zeros(0))
    h = aset.evaluate_all(x)
    if np.any(h <= 0.0):
        bad = int(np.argmin(h))
        raise UndefinedBarrierError(
            f"reciprocal barrier undefined: h[{aset.barriers[bad].id or bad}] = {h[bad]:.4g} <= 0"
        )
    f = system.field_f(x)
    G = system.field_G(x)
    N = aset.normal_matrix
    # R = -log(h/(1+h)) > 0, grad R = -n / (h (1+h)).
    R = -np.log(h / (1.0 + h))
    scale = 1.0 / (h * (1.0 + h))
    LfR = -scale * (N @ f)
    LGR = -scale[:, None] * (N @ G)
    # Constraint LfR + LGR u <= gain / R.
    A = LGR
    b = aset.gains / R - LfR
    cm = ConstraintMatrices(A, b, h)
    return _result_from_kernel(aset, cm, u_o, kkt_tol, rank_tol, "reciprocal filter")


def co_baseline_step(aset: AdmissibleSet, system: DynamicalSystem, x, dt: float) -> np.ndarray:
    """Comparison baseline: smallest input whose one-step update lands inside the set.

    min ||u||^2 subject to N (x + dt (f + G u)) + a >= 0, solved with an
    iterative numeric method (SLSQP) rather than the analytic path. Exterior
    states are pulled inside in a single step, which is exactly the
    aggressive behavior this baseline exists to demonstrate.
    """
    from scipy.optimize import minimize

    x = np.asarray(x, dtype=float)
    f = system.field_f(x)
    G = system.field_G(x)
    m = system.input_dim
    if len(aset) == 0:
        return np.zeros(m)
    N = aset.normal_matrix
    h = N @ x + aset.offsets
    drift = h + dt * (N @ f)
    J = dt * (N @ G)

    res = minimize(
        lambda u: 0.5 * float(u @ u),
        np.zeros(m),
        jac=lambda u: u,
        method="SLSQP",
        constraints=[{
            "type": "ineq",
            "fun": lambda u: drift + J @ u,
            "jac": lambda u: J,
        }],
        options={"ftol": 1e-12, "maxiter": 200},
    )
    u = np.asarray(res.x, dtype=float)
    if not res.success or np.any(drift + J @ u < -1e-6):
        raise InfeasibleFilterError("one-step projection: no input reaches the set")
    return u
