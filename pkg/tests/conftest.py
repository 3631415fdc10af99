"""Shared fixtures and instance generators for the test suite."""

import numpy as np
import pytest

import safemotion as sm
from safemotion import safety
from safemotion.barriers import box_set


def make_quad_set(gain: float = 10.0) -> sm.AdmissibleSet:
    """The bounded quadrilateral used by the bundled planar scenarios."""
    return sm.AdmissibleSet((
        sm.LinearBarrier((1.0, 0.0), 0.8, gain, "b1"),
        sm.LinearBarrier((-1.0, 0.3), 0.4, gain, "b2"),
        sm.LinearBarrier((0.0, -1.0), 0.8, gain, "b3"),
        sm.LinearBarrier((0.0, 1.0), 0.8, gain, "b4"),
    ))


def make_slab_conflict(gain: float = 10.0) -> sm.AdmissibleSet:
    """Two antiparallel half-spaces with empty intersection.

    h1 + h2 = a1 + a2 = -1 < 0 for every x, so the pair is infeasible both
    as a set and as filter constraints (summing the two rows of A u <= b
    gives 0 <= gain * (h1 + h2) < 0).
    """
    return sm.AdmissibleSet((
        sm.LinearBarrier((1.0, 0.0), -0.5, gain, "left"),
        sm.LinearBarrier((-1.0, 0.0), -0.5, gain, "right"),
    ))


@pytest.fixture
def quad_set() -> sm.AdmissibleSet:
    return make_quad_set()


@pytest.fixture
def unstable2() -> sm.DynamicalSystem:
    return sm.make_builtin_system("unstable_linear", dim=2, params={"rate": 2.0})


@pytest.fixture
def box2() -> sm.AdmissibleSet:
    return box_set((0.8, 0.8))


def random_constraint_instance(rng: np.random.Generator, n=None, m=None, c=None):
    """One barrier-derived QP instance (A, b, u_o) or None to resample.

    Mirrors how build_constraints assembles the filter QP: unit normals,
    random gains in [1, 20], a random affine state/drift/input-map triple.
    Feasibility is NOT guaranteed; callers probe with the oracle.
    """
    n = int(n if n is not None else rng.integers(2, 5))
    m = int(m if m is not None else rng.integers(1, 5))
    c = int(c if c is not None else rng.integers(1, 7))
    N = rng.normal(size=(c, n))
    norms = np.linalg.norm(N, axis=1)
    if np.any(norms < 1e-6):
        return None
    N /= norms[:, None]
    offs = rng.uniform(-1.0, 1.0, size=c)
    gains = rng.uniform(1.0, 20.0, size=c)
    x = rng.normal(scale=0.8, size=n)
    f = rng.normal(scale=2.0, size=n)
    G = rng.normal(size=(n, m))
    # The filter's contract requires full-column-rank input maps
    # (validate_system rejects the rest), so keep G well away from singular:
    # a near-rank-deficient G blows the multipliers up to the point where
    # absolute KKT tolerances stop being meaningful.
    if np.linalg.svd(G, compute_uv=False)[-1] < 0.15:
        return None
    A = -(N @ G)
    rownorm = np.linalg.norm(A, axis=1)
    if np.any(rownorm < 1e-8):
        return None
    if m >= 2 and c >= 2:
        # Near-parallel row pairs make sliver vertices whose multipliers are
        # unbounded; exactly dependent rows have their own dedicated tests.
        unit = A / rownorm[:, None]
        cos = np.abs(unit @ unit.T)
        np.fill_diagonal(cos, 0.0)
        if float(cos.max()) > 0.995:
            return None
    h = N @ x + offs
    b = N @ f + gains * h
    u_o = rng.normal(scale=2.0, size=m)
    return A, b, u_o


def collect_feasible_instances(seed: int, count: int, max_tries: int = 100000):
    """Yield `count` oracle-feasible instances as (A, b, u_o, u_ref)."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(max_tries):
        inst = random_constraint_instance(rng)
        if inst is None:
            continue
        A, b, u_o = inst
        cm = safety.ConstraintMatrices(A=A, b=b, h=np.zeros(A.shape[0]))
        try:
            u_ref = safety.qp_oracle(cm, u_o)
        except sm.InfeasibleFilterError:
            continue
        if np.linalg.norm(u_ref - u_o) > 200.0:
            continue  # corrections beyond any physical scale for these gains
        out.append((A, b, u_o, u_ref))
        if len(out) == count:
            return out
    raise RuntimeError(f"only {len(out)} feasible instances in {max_tries} draws")


def kkt_residual(u, u_o, A, b, lam) -> float:
    """Independent KKT check: primal, dual, complementary, stationarity."""
    if A.shape[0] == 0:
        return float(np.max(np.abs(u - u_o), initial=0.0))
    slack = A @ u - b
    return max(
        float(np.max(slack, initial=0.0)),
        float(np.max(-lam, initial=0.0)),
        float(np.max(np.abs(lam * slack), initial=0.0)),
        float(np.max(np.abs(2.0 * (u - u_o) + A.T @ lam))),
    )
