"""Hot-kernel dispatch: compiled extension when available, numpy otherwise.

The compiled module is optional; importing this package never fails because
of it. Setting SAFEMOTION_PURE=1 forces the numpy path, which is what the
cross-backend parity tests and the benchmark use. Problems larger than the
compiled buffers (more than 64 constraints or 16 inputs) are routed to the
numpy path on either backend; the bundled scenarios stay far below that.
"""

from __future__ import annotations

import os

import numpy as np

from . import pure
from .pure import (
    BLOW_UP_NORM,
    FIELD_LIMIT_CYCLE,
    FIELD_LINEAR_GOAL,
    FIELD_MIXTURE,
    FIELD_UNSTABLE_LINEAR,
    KKT_TOL,
    RANK_TOL,
    STATUS_DEPENDENT,
    STATUS_ENUMERATED,
    STATUS_INFEASIBLE,
    STATUS_OK,
    STOP_BLOWUP,
    STOP_CAPTURED,
    STOP_INFEASIBLE,
    STOP_STEPS,
)

_MAX_COMPILED_CONSTRAINTS = 64
_MAX_COMPILED_INPUTS = 16

if os.environ.get("SAFEMOTION_PURE", "") == "1":
    _impl = pure
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure


def backend_name() -> str:
    """Either "compiled" or "pure"."""
    return _impl.backend_name()


def _fits_compiled(c: int, m: int) -> bool:
    return c <= _MAX_COMPILED_CONSTRAINTS and m <= _MAX_COMPILED_INPUTS


def qp_filter(u_o, A, b, kkt_tol: float = KKT_TOL, rank_tol: float = RANK_TOL):
    """Backend-selected minimal-correction solve; see kernels.pure.qp_filter."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if _impl is not pure and not _fits_compiled(*A.shape):
        return pure.qp_filter(u_o, A, b, kkt_tol, rank_tol)
    return _impl.qp_filter(u_o, A, b, kkt_tol, rank_tol)


def rollout(code, fp, goal, has_goal, capture_tol, N, offs, gains, x0, dt, n_steps):
    """Backend-selected fused filtered simulation; see kernels.pure.rollout."""
    N = np.atleast_2d(np.asarray(N, dtype=float))
    x0 = np.asarray(x0, dtype=float)
    if _impl is not pure and not _fits_compiled(N.shape[0], x0.shape[0]):
        return pure.rollout(code, fp, goal, has_goal, capture_tol,
                            N, offs, gains, x0, dt, n_steps)
    return _impl.rollout(code, fp, goal, has_goal, capture_tol,
                         N, offs, gains, x0, dt, n_steps)


def pack_field(system):
    """Encode a builtin field as (code, params, goal, has_goal) for the kernels.

    Raises ValueError for custom systems; callers fall back to the generic
    python step loop for those.
    """
    n = system.dim
    goal = np.zeros(n) if system.goal is None else np.asarray(system.goal, dtype=float)
    if system.kind == "unstable_linear":
        return FIELD_UNSTABLE_LINEAR, np.array([system.params["rate"]]), goal, False
    if system.kind == "limit_cycle":
        return FIELD_LIMIT_CYCLE, np.zeros(1), goal, False
    if system.kind == "linear_goal":
        return FIELD_LINEAR_GOAL, np.array([system.params["rate"]]), goal, True
    if system.kind == "seds_like":
        mix = system.params["mixture"]
        K = mix.n_components
        fp = np.concatenate([
            [float(K), float(n)],
            np.log(mix.weights),
            1.0 / (2.0 * mix.bandwidths ** 2),
            mix.means.ravel(),
            mix.matrices.reshape(K, n * n).ravel(),
        ])
        return FIELD_MIXTURE, fp, goal, True
    raise ValueError(f"system kind {system.kind!r} has no fused kernel encoding")
