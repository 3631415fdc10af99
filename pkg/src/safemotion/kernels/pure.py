"""Pure numpy implementations of the hot kernels.

Two entry points, mirrored exactly by the compiled extension:

* qp_filter: smallest input correction subject to linear half-plane
  constraints A u <= b, solved with an active-set iteration on the
  closed-form equality-constrained projection.
* rollout: fused fixed-step simulation of a builtin field under the filter,
  with G = I and zero nominal input, writing trace arrays.

Both paths share tie-breaking rules and tolerances so backend selection never
changes which constraints go active, only floating-point noise.
"""

from __future__ import annotations

import time
from itertools import combinations

import numpy as np

# Status bit flags for qp_filter; negative means infeasible.
STATUS_OK = 0
STATUS_DEPENDENT = 1   # a numerically dependent constraint row was dropped
STATUS_ENUMERATED = 2  # the iteration cycled; exhaustive subset search used
STATUS_INFEASIBLE = -1

KKT_TOL = 1e-8
RANK_TOL = 1e-10

# Rollout stop reasons.
STOP_STEPS = 0
STOP_CAPTURED = 1
STOP_INFEASIBLE = 2
STOP_BLOWUP = 3

BLOW_UP_NORM = 1e6

FIELD_UNSTABLE_LINEAR = 0
FIELD_LIMIT_CYCLE = 1
FIELD_LINEAR_GOAL = 2
FIELD_MIXTURE = 3


def backend_name() -> str:
    return "pure"


def _independent_rows(A_c: np.ndarray, rank_tol: float) -> list[int]:
    """Indices of rows kept by in-order Gram-Schmidt; later dependent rows drop."""
    kept: list[int] = []
    q_rows: list[np.ndarray] = []
    for i in range(A_c.shape[0]):
        r = A_c[i].copy()
        for q in q_rows:
            r -= (q @ r) * q
        nrm = float(np.linalg.norm(r))
        if nrm <= rank_tol:
            continue
        q_rows.append(r / nrm)
        kept.append(i)
    return kept


def _solve_subset(u_o: np.ndarray, A: np.ndarray, b: np.ndarray, W: list[int]):
    """Least-norm correction meeting the subset with equality.

    u = u_o + A_c^T (A_c A_c^T)^-1 (b_c - A_c u_o); multipliers lam = -2 alpha.
    Returns None when the Gram matrix is singular.
    """
    A_c = A[W]
    r = b[W] - A_c @ u_o
    gram = A_c @ A_c.T
    try:
        alpha = np.linalg.solve(gram, r)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(alpha)):
        return None
    u = u_o + A_c.T @ alpha
    return u, -2.0 * alpha


def _enumerate_kkt(u_o: np.ndarray, A: np.ndarray, b: np.ndarray,
                   kkt_tol: float, rank_tol: float):
    """Exhaustive search over independent active subsets, smallest first.

    The objective is strictly convex, so the first subset whose
    equality-constrained solution is primal and dual feasible is the optimum.
    """
    c, m = A.shape
    for size in range(0, min(c, m) + 1):
        for subset in combinations(range(c), size):
            W = list(subset)
            if W and len(_independent_rows(A[W], rank_tol)) != len(W):
                continue
            if W:
                sol = _solve_subset(u_o, A, b, W)
                if sol is None:
                    continue
                u, lam = sol
                if lam.size and float(lam.min()) < -kkt_tol:
                    continue
            else:
                u = u_o.copy()
            if np.all(A @ u - b <= kkt_tol):
                active = np.zeros(c, dtype=np.uint8)
                active[W] = 1
                return u, active
    return None


def qp_filter(u_o, A, b, kkt_tol: float = KKT_TOL, rank_tol: float = RANK_TOL):
    """Minimal-correction filter solve: argmin ||u - u_o||^2 s.t. A u <= b.

    Returns (u, active, status). `active` marks the constraint rows met with
    equality at the solution, `status` carries the STATUS_* flags; on
    STATUS_INFEASIBLE `u` is NaN.
    """
    u_o = np.asarray(u_o, dtype=float)
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    c, m = A.shape
    if c == 0:
        return u_o.copy(), np.zeros(0, dtype=np.uint8), STATUS_OK
    status = STATUS_OK

    slack = b - A @ u_o
    work = [i for i in range(c) if slack[i] < 0.0]

    visited: set[frozenset] = set()
    guard = 4 * c + 16
    u = u_o.copy()
    lam = np.zeros(0)
    for _ in range(guard):
        key = frozenset(work)
        if key in visited:
            break
        visited.add(key)

        if work:
            kept = _independent_rows(A[work], rank_tol)
            if len(kept) != len(work):
                status |= STATUS_DEPENDENT
                work = [work[i] for i in kept]
        if work:
            sol = _solve_subset(u_o, A, b, work)
            if sol is None:
                break
            u, lam = sol
        else:
            u = u_o.copy()
            lam = np.zeros(0)

        viol = A @ u - b
        if work:
            viol[work] = -np.inf
        j = int(np.argmax(viol))
        if viol[j] > kkt_tol:
            work.append(j)
            continue
        if work and float(lam.min()) < -kkt_tol:
            k = int(np.argmin(lam))
            work.pop(k)
            continue
        active = np.zeros(c, dtype=np.uint8)
        active[work] = 1
        return u, active, status
    else:
        pass

    # Cycled, hit the guard, or hit a singular solve: settle it exhaustively.
    status |= STATUS_ENUMERATED
    found = _enumerate_kkt(u_o, A, b, kkt_tol, rank_tol)
    if found is None:
        return np.full(m, np.nan), np.zeros(c, dtype=np.uint8), STATUS_INFEASIBLE
    u, active = found
    return u, active, status


def _mixture_field(fp: np.ndarray, goal: np.ndarray, x: np.ndarray) -> np.ndarray:
    K = int(fp[0])
    n = int(fp[1])
    off = 2
    log_w = fp[off:off + K]; off += K
    inv_two_sq = fp[off:off + K]; off += K
    means = fp[off:off + K * n].reshape(K, n); off += K * n
    mats = fp[off:off + K * n * n].reshape(K, n, n)
    xi = x - goal
    d2 = np.sum((xi[None, :] - means) ** 2, axis=1)
    logits = log_w - d2 * inv_two_sq
    logits -= logits.max()
    resp = np.exp(logits)
    resp /= resp.sum()
    return np.einsum("k,kij,j->i", resp, mats, xi)


def field_eval(code: int, fp: np.ndarray, goal: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Drift of a packed builtin field at x. Pack layouts match the compiled path."""
    if code == FIELD_UNSTABLE_LINEAR:
        return fp[0] * x
    if code == FIELD_LIMIT_CYCLE:
        r2 = x[0] * x[0] + x[1] * x[1]
        return np.array([x[1] - x[0] * (r2 - 1.0), -x[0] - x[1] * (r2 - 1.0)])
    if code == FIELD_LINEAR_GOAL:
        return fp[0] * (goal - x)
    if code == FIELD_MIXTURE:
        return _mixture_field(fp, goal, x)
    raise ValueError(f"unknown field code {code}")


def rollout(code: int, fp, goal, has_goal: bool, capture_tol: float,
            N, offs, gains, x0, dt: float, n_steps: int):
    """Fused filtered simulation: x_{k+1} = x_k + dt (f(x_k) + u_k), u_k filtered from 0.

    With G = I the constraint matrix A = -N is constant; only the bound
    b = N f + gains * h changes along the trajectory. Returns
    (xs, us, active, status, solve_time, steps_done, stop_reason) where the
    arrays are sized for n_steps and only the first steps_done rows (plus
    xs[steps_done]) are meaningful.
    """
    fp = np.asarray(fp, dtype=float)
    goal = np.asarray(goal, dtype=float)
    N = np.atleast_2d(np.asarray(N, dtype=float))
    offs = np.asarray(offs, dtype=float)
    gains = np.asarray(gains, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    n = x0.shape[0]
    c = N.shape[0]

    xs = np.zeros((n_steps + 1, n))
    us = np.zeros((n_steps, n))
    active = np.zeros((n_steps, c), dtype=np.uint8)
    status = np.zeros(n_steps, dtype=np.int8)
    solve_time = np.zeros(n_steps)

    A = -N
    zero_u = np.zeros(n)
    x = x0.copy()
    xs[0] = x
    stop = STOP_STEPS
    steps_done = 0
    for k in range(n_steps):
        f = field_eval(code, fp, goal, x)
        if c:
            h = N @ x + offs
            b = N @ f + gains * h
            t0 = time.perf_counter()
            u, act, st = qp_filter(zero_u, A, b)
            solve_time[k] = time.perf_counter() - t0
            status[k] = st if st >= 0 else STATUS_INFEASIBLE
            if st < 0:
                stop = STOP_INFEASIBLE
                break
            active[k] = act
        else:
            u = zero_u
        x = x + dt * (f + u)
        nrm = float(np.linalg.norm(x))
        us[k] = u
        xs[k + 1] = x
        steps_done = k + 1
        if not np.isfinite(nrm) or nrm > BLOW_UP_NORM:
            stop = STOP_BLOWUP
            break
        if has_goal and float(np.linalg.norm(x - goal)) < capture_tol:
            stop = STOP_CAPTURED
            break
    return xs, us, active, status, solve_time, steps_done, stop
