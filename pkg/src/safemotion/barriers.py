"""Linear zeroing barrier functions and the admissible set they carve out.

A barrier is the half-space h(x) = n.x + a >= 0 with unit normal n, so h is
the signed distance to the plane (positive on the admissible side). The
admissible set is the intersection of all barrier half-spaces. All types in
this module are immutable values; editing a set produces a new set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import BarrierPreconditionError, DimensionMismatchError

# Classification tolerance for membership queries, in meters. Deliberately
# much smaller than the learning threshold delta so geometric queries do not
# interact with the user-facing clustering band.
TOL_BOUNDARY = 1e-6

# Default constraint gain, overridable per barrier.
DEFAULT_GAIN = 10.0

_UNIT_TOL = 1e-12
_SERIAL_VERSION = 1


def _as_vector(value, dim: int | None = None) -> np.ndarray:
    vec = np.asarray(value, dtype=float)
    if vec.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-d vector, got shape {vec.shape}")
    if dim is not None and vec.shape[0] != dim:
        raise DimensionMismatchError(f"expected dimension {dim}, got {vec.shape[0]}")
    if not np.all(np.isfinite(vec)):
        raise ValueError("vector has non-finite entries")
    return vec


@dataclass(frozen=True)
class LinearBarrier:
    """Half-space constraint h(x) = normal . x + offset >= 0.

    The normal is re-normalized to unit length on construction and the offset
    rescaled with it, so h keeps its signed-distance meaning regardless of the
    scale the caller used.
    """

    normal: np.ndarray
    offset: float
    gain: float = DEFAULT_GAIN
    id: str = ""

    def __post_init__(self):
        normal = _as_vector(self.normal)
        if normal.shape[0] < 2:
            raise DimensionMismatchError("barrier normals need dimension >= 2")
        norm = float(np.linalg.norm(normal))
        if norm < 1e-12:
            raise ValueError("barrier normal is numerically zero")
        offset = float(self.offset)
        if abs(norm - 1.0) > _UNIT_TOL:
            normal = normal / norm
            offset = offset / norm
        normal = normal.copy()
        normal.flags.writeable = False
        object.__setattr__(self, "normal", normal)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "gain", float(self.gain))
        if self.gain <= 0.0:
            raise ValueError(f"barrier gain must be positive, got {self.gain}")

    @property
    def dim(self) -> int:
        return self.normal.shape[0]

    def evaluate(self, x) -> float:
        """Signed distance of x to the plane; positive inside the half-space."""
        x = _as_vector(x, self.dim)
        return float(self.normal @ x + self.offset)

    def with_gain(self, gain: float) -> "LinearBarrier":
        return LinearBarrier(self.normal, self.offset, gain, self.id)


def evaluate(barrier: LinearBarrier, x) -> float:
    """Evaluate h(x) = n.x + a for a single barrier."""
    return barrier.evaluate(x)


def lie_derivatives(barrier: LinearBarrier, system, x) -> tuple[float, np.ndarray]:
    """Directional derivatives of h along the system: (n.f(x), n.G(x)).

    For a linear barrier the gradient is the constant normal, so the drift
    term is n.f and the input term the row vector n.G. Raises
    BarrierPreconditionError when ||n.G|| is numerically zero, in which case
    no input can act on this barrier.
    """
    x = _as_vector(x, barrier.dim)
    f = np.asarray(system.field_f(x), dtype=float)
    G = np.atleast_2d(np.asarray(system.field_G(x), dtype=float))
    if f.shape[0] != barrier.dim or G.shape[0] != barrier.dim:
        raise DimensionMismatchError("system dimension does not match barrier dimension")
    lf = float(barrier.normal @ f)
    lg = barrier.normal @ G
    if np.linalg.norm(lg) < 1e-10:
        raise BarrierPreconditionError(
            f"barrier {barrier.id or '<anon>'}: input direction n.G is numerically zero"
        )
    return lf, lg


@dataclass(frozen=True)
class Membership:
    """Outcome of a point-vs-set query: interior, boundary(ids) or exterior(ids)."""

    kind: str
    ids: tuple[str, ...] = ()

    def __bool__(self) -> bool:
        # Truthy when the point is admissible (interior or on the boundary).
        return self.kind != "exterior"


@dataclass(frozen=True)
class AdmissibleSet:
    """Ordered collection of linear barriers; the admissible set is their intersection."""

    barriers: tuple[LinearBarrier, ...] = ()

    def __post_init__(self):
        barriers = tuple(self.barriers)
        dims = {b.dim for b in barriers}
        if len(dims) > 1:
            raise DimensionMismatchError(f"mixed barrier dimensions {sorted(dims)}")
        ids = [b.id for b in barriers if b.id]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate barrier ids in set")
        object.__setattr__(self, "barriers", barriers)

    def __len__(self) -> int:
        return len(self.barriers)

    def __iter__(self):
        return iter(self.barriers)

    @property
    def dim(self) -> int | None:
        return self.barriers[0].dim if self.barriers else None

    @cached_property
    def normal_matrix(self) -> np.ndarray:
        """Row-stacked unit normals, shape (c, n)."""
        if not self.barriers:
            return np.zeros((0, 0))
        return np.array([b.normal for b in self.barriers])

    @cached_property
    def offsets(self) -> np.ndarray:
        return np.array([b.offset for b in self.barriers])

    @cached_property
    def gains(self) -> np.ndarray:
        return np.array([b.gain for b in self.barriers])

    def evaluate_all(self, x) -> np.ndarray:
        """Vector of h_i(x) in barrier order."""
        if not self.barriers:
            return np.zeros(0)
        x = _as_vector(x, self.dim)
        return self.normal_matrix @ x + self.offsets

    def barrier_by_id(self, barrier_id: str) -> LinearBarrier:
        for b in self.barriers:
            if b.id == barrier_id:
                return b
        raise KeyError(barrier_id)

    def with_barrier(self, barrier: LinearBarrier) -> "AdmissibleSet":
        return AdmissibleSet(self.barriers + (barrier,))

    def without_barrier(self, barrier_id: str) -> "AdmissibleSet":
        kept = tuple(b for b in self.barriers if b.id != barrier_id)
        if len(kept) == len(self.barriers):
            raise KeyError(barrier_id)
        return AdmissibleSet(kept)

    def replace_barrier(self, barrier: LinearBarrier) -> "AdmissibleSet":
        out = []
        found = False
        for b in self.barriers:
            if b.id == barrier.id:
                out.append(barrier)
                found = True
            else:
                out.append(b)
        if not found:
            raise KeyError(barrier.id)
        return AdmissibleSet(tuple(out))


def membership(aset: AdmissibleSet, x, tol: float = TOL_BOUNDARY) -> Membership:
    """Classify x against the set: interior, boundary(ids), or exterior(ids).

    Interior means every h_i > tol. Boundary lists the barriers with
    |h_i| <= tol when none is violated beyond the band. Exterior lists the
    barriers with h_i < -tol. Classification does not depend on barrier order.
    """
    if not aset.barriers:
        return Membership("interior")
    h = aset.evaluate_all(x)
    below = h < -tol
    if np.any(below):
        ids = tuple(aset.barriers[i].id for i in np.flatnonzero(below))
        return Membership("exterior", ids)
    on = np.abs(h) <= tol
    if np.any(on):
        ids = tuple(aset.barriers[i].id for i in np.flatnonzero(on))
        return Membership("boundary", ids)
    return Membership("interior")


def feasibility_probe(aset: AdmissibleSet, strict_tol: float = 1e-9) -> np.ndarray | None:
    """Return a strictly interior point of the set, or None when there is none.

    Maximizes the minimum slack min_i h_i(x) with a small linear program over
    (x, s): max s subject to n_i.x + a_i >= s. A box |x| <= 1e3, |s| <= 1e3
    keeps the program bounded for open polytopes. A non-positive optimum means
    the barriers conflict (empty or measure-zero intersection).
    """
    from scipy.optimize import linprog

    if not aset.barriers:
        raise ValueError("feasibility probe needs at least one barrier")
    n = aset.dim
    c_obj = np.zeros(n + 1)
    c_obj[-1] = -1.0  # maximize s
    A_ub = np.hstack([-aset.normal_matrix, np.ones((len(aset), 1))])
    b_ub = aset.offsets.copy()
    bounds = [(-1e3, 1e3)] * n + [(-1e3, 1e3)]
    res = linprog(c_obj, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return None
    if res.x[-1] <= strict_tol:
        return None
    return np.array(res.x[:n])


def emit_barrier_set(aset: AdmissibleSet) -> str:
    """Canonical text form of a barrier set: one record per barrier.

    Floats are serialized with repr precision, so parse(emit(s)) reproduces
    every coefficient exactly and equal sets yield byte-identical documents.
    """
    records = [
        {
            "id": b.id,
            "normal": [float(v) for v in b.normal],
            "offset": float(b.offset),
            "gain": float(b.gain),
        }
        for b in aset.barriers
    ]
    doc = {"version": _SERIAL_VERSION, "barriers": records}
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def parse_barrier_set(text: str) -> AdmissibleSet:
    """Inverse of emit_barrier_set."""
    doc = json.loads(text)
    if doc.get("version") != _SERIAL_VERSION:
        raise ValueError(f"unsupported barrier-set version {doc.get('version')!r}")
    barriers = tuple(
        LinearBarrier(
            normal=np.array(rec["normal"], dtype=float),
            offset=rec["offset"],
            gain=rec["gain"],
            id=rec["id"],
        )
        for rec in doc["barriers"]
    )
    return AdmissibleSet(barriers)


def save_barrier_set(aset: AdmissibleSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit_barrier_set(aset))


def load_barrier_set(path) -> AdmissibleSet:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_barrier_set(fh.read())


def box_set(half_widths: Sequence[float], gain: float = DEFAULT_GAIN) -> AdmissibleSet:
    """Axis-aligned box |x_i| <= w_i as 2n barriers (test and demo helper)."""
    n = len(half_widths)
    barriers = []
    for axis, w in enumerate(half_widths):
        lo = np.zeros(n)
        lo[axis] = 1.0
        hi = np.zeros(n)
        hi[axis] = -1.0
        barriers.append(LinearBarrier(lo, float(w), gain, id=f"axis{axis}_low"))
        barriers.append(LinearBarrier(hi, float(w), gain, id=f"axis{axis}_high"))
    return AdmissibleSet(tuple(barriers))
