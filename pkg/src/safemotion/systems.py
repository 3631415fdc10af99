"""Control-affine dynamical systems xdot = f(x) + G(x) u and builtin fields.

The builtin catalog covers the motion generators used by the bundled
scenarios: a goal-directed mixture of linear systems (the "learned motion"
stand-in), a diverging linear field, a stable limit cycle, and a plain
goal-seeking linear field. Systems are value objects; re-targeting returns a
new system.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import yaml

from .errors import BlowUpError, DimensionMismatchError, RankDeficientInputError

BUILTIN_NAMES = ("seds_like", "unstable_linear", "limit_cycle", "linear_goal")

# Integration defaults: 500 Hz fixed step, explicit Euler.
DEFAULT_DT = 0.002
BLOW_UP_NORM = 1e6

_EQUILIBRIUM_TOL = 1e-8


@dataclass(frozen=True)
class DynamicalSystem:
    """Control-affine system. `f` maps x to the drift, `G` maps x to the n x m input matrix.

    `kind` names a builtin field ("custom" otherwise) and `params` holds the
    numeric data the fast rollout kernels need to re-create f without calling
    back into Python.
    """

    name: str
    dim: int
    input_dim: int
    f: Callable[[np.ndarray], np.ndarray]
    G: Callable[[np.ndarray], np.ndarray] | None = None
    goal: np.ndarray | None = None
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def field_f(self, x) -> np.ndarray:
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def field_G(self, x) -> np.ndarray:
        if self.G is None:
            return np.eye(self.dim)
        return np.atleast_2d(np.asarray(self.G(np.asarray(x, dtype=float)), dtype=float))

    def with_goal(self, goal) -> "DynamicalSystem":
        """Re-target a goal-directed field; identity for fields without a goal."""
        if self.goal is None:
            return self
        goal = np.asarray(goal, dtype=float)
        if goal.shape != (self.dim,):
            raise DimensionMismatchError(f"goal shape {goal.shape} != ({self.dim},)")
        if self.kind == "linear_goal":
            return make_builtin_system("linear_goal", dim=self.dim, goal=goal,
                                       params={"rate": self.params["rate"]})
        if self.kind == "seds_like":
            return make_builtin_system("seds_like", dim=self.dim, goal=goal,
                                       params={"mixture": self.params["mixture"]})
        frozen_goal = goal.copy()
        frozen_goal.flags.writeable = False
        return replace(self, goal=frozen_goal)


@dataclass(frozen=True)
class SedsParams:
    """Mixture of linear systems around a goal: f(x) = sum_k wbar_k(xi) A_k xi, xi = x - goal.

    wbar_k are normalized Gaussian responsibilities in xi with per-component
    mean and isotropic bandwidth. Means live in goal-relative coordinates so
    the mixture moves with the goal.
    """

    weights: np.ndarray    # (K,)
    means: np.ndarray      # (K, n)
    matrices: np.ndarray   # (K, n, n)
    bandwidths: np.ndarray # (K,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        mu = np.asarray(self.means, dtype=float)
        A = np.asarray(self.matrices, dtype=float)
        bw = np.asarray(self.bandwidths, dtype=float)
        if mu.ndim != 2 or A.ndim != 3:
            raise DimensionMismatchError("means must be (K, n) and matrices (K, n, n)")
        K, n = mu.shape
        if w.shape != (K,) or bw.shape != (K,) or A.shape != (K, n, n):
            raise DimensionMismatchError("inconsistent mixture component shapes")
        for arr in (w, mu, A, bw):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "matrices", A)
        object.__setattr__(self, "bandwidths", bw)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]


def validate_seds_params(params: SedsParams, require_stable: bool = True) -> None:
    """Reject non-positive weights/bandwidths and unstable component matrices.

    The mixture is a convex combination of the component fields, so it is
    globally convergent to the goal when every symmetric part A_k + A_k^T is
    negative definite. With require_stable the check is enforced as an error.
    """
    if np.any(params.weights <= 0):
        raise ValueError("mixture weights must be positive")
    if np.any(params.bandwidths <= 0):
        raise ValueError("mixture bandwidths must be positive")
    if not require_stable:
        return
    bad = []
    for k in range(params.n_components):
        sym = params.matrices[k] + params.matrices[k].T
        top = float(np.max(np.linalg.eigvalsh(sym)))
        if top >= 0.0:
            bad.append((k, top))
    if bad:
        detail = ", ".join(f"component {k} (max eig {v:.3g})" for k, v in bad)
        raise ValueError(f"mixture is not globally convergent: {detail}")


def load_seds_params(path) -> SedsParams:
    """Read mixture parameters from a YAML file (weights, means, matrices, bandwidths)."""
    with open(path, "r", encoding="utf-8") as fh:
        doc = yaml.safe_load(fh)
    return seds_params_from_dict(doc)


def seds_params_from_dict(doc: dict) -> SedsParams:
    try:
        comps = doc["components"]
        weights = [c["weight"] for c in comps]
        means = [c["mean"] for c in comps]
        mats = [c["matrix"] for c in comps]
        bws = [c["bandwidth"] for c in comps]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed mixture parameter document: {exc}") from exc
    params = SedsParams(
        weights=np.array(weights, dtype=float),
        means=np.array(means, dtype=float),
        matrices=np.array(mats, dtype=float),
        bandwidths=np.array(bws, dtype=float),
    )
    if "dim" in doc and int(doc["dim"]) != params.dim:
        raise DimensionMismatchError(
            f"declared dim {doc['dim']} does not match component dim {params.dim}"
        )
    return params


def dump_seds_params(params: SedsParams, path) -> None:
    doc = {
        "dim": int(params.dim),
        "components": [
            {
                "weight": float(params.weights[k]),
                "mean": [float(v) for v in params.means[k]],
                "matrix": [[float(v) for v in row] for row in params.matrices[k]],
                "bandwidth": float(params.bandwidths[k]),
            }
            for k in range(params.n_components)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(doc, fh, sort_keys=True)


def seds_field(params: SedsParams, goal: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    weights = params.weights
    means = params.means
    mats = params.matrices
    inv_two_sq = 1.0 / (2.0 * params.bandwidths ** 2)
    log_w = np.log(weights)

    def f(x: np.ndarray) -> np.ndarray:
        xi = x - goal
        d2 = np.sum((xi[None, :] - means) ** 2, axis=1)
        logits = log_w - d2 * inv_two_sq
        logits -= logits.max()  # shift so the largest responsibility survives exp
        resp = np.exp(logits)
        resp /= resp.sum()
        return np.einsum("k,kij,j->i", resp, mats, xi)

    return f


def default_seds_params(dim: int = 2) -> SedsParams:
    """Bundled two-component mixture, strongly convergent (symmetric parts < -2 I)."""
    if dim == 2:
        return SedsParams(
            weights=np.array([0.6, 0.4]),
            means=np.array([[0.45, 0.2], [-0.1, -0.35]]),
            matrices=np.array([
                [[-2.6, 0.9], [-0.9, -2.2]],
                [[-2.0, -0.6], [0.6, -2.8]],
            ]),
            bandwidths=np.array([0.6, 0.8]),
        )
    if dim == 3:
        return SedsParams(
            weights=np.array([0.55, 0.45]),
            means=np.array([[0.35, 0.15, 0.05], [-0.15, -0.3, -0.05]]),
            matrices=np.array([
                [[-2.6, 0.9, 0.0], [-0.9, -2.2, 0.0], [0.0, 0.0, -2.4]],
                [[-2.0, -0.6, 0.0], [0.6, -2.8, 0.0], [0.0, 0.0, -2.1]],
            ]),
            bandwidths=np.array([0.6, 0.8]),
        )
    raise ValueError(f"no default mixture for dimension {dim}")


def make_builtin_system(name: str, dim: int = 2, goal=None, params: dict | None = None) -> DynamicalSystem:
    """Construct one of the builtin fields by name, with G = I.

    seds_like accepts params {"mixture": SedsParams or dict}; linear_goal and
    unstable_linear accept {"rate": float}.
    """
    params = dict(params or {})
    if name == "unstable_linear":
        rate = float(params.get("rate", 2.0))
        if rate <= 0:
            raise ValueError("unstable_linear rate must be positive")
        sysparams = {"rate": rate}
        return DynamicalSystem(
            name=name, dim=dim, input_dim=dim,
            f=lambda x, _r=rate: _r * x,
            kind="unstable_linear", params=sysparams,
        )
    if name == "limit_cycle":
        if dim != 2:
            raise DimensionMismatchError("limit_cycle is a planar field")

        def f(x: np.ndarray) -> np.ndarray:
            r2 = x[0] * x[0] + x[1] * x[1]
            return np.array([x[1] - x[0] * (r2 - 1.0), -x[0] - x[1] * (r2 - 1.0)])

        return DynamicalSystem(name=name, dim=2, input_dim=2, f=f, kind="limit_cycle")
    if name == "linear_goal":
        rate = float(params.get("rate", 1.0))
        if rate <= 0:
            raise ValueError("linear_goal rate must be positive")
        g = np.zeros(dim) if goal is None else np.asarray(goal, dtype=float).copy()
        if g.shape != (dim,):
            raise DimensionMismatchError(f"goal shape {g.shape} != ({dim},)")
        g.flags.writeable = False
        return DynamicalSystem(
            name=name, dim=dim, input_dim=dim,
            f=lambda x, _r=rate, _g=g: _r * (_g - x),
            goal=g, kind="linear_goal", params={"rate": rate},
        )
    if name == "seds_like":
        mixture = params.get("mixture")
        if mixture is None:
            mixture = default_seds_params(dim)
        elif isinstance(mixture, dict):
            mixture = seds_params_from_dict(mixture)
        if mixture.dim != dim:
            raise DimensionMismatchError(f"mixture dim {mixture.dim} != system dim {dim}")
        validate_seds_params(mixture)
        g = np.zeros(dim) if goal is None else np.asarray(goal, dtype=float).copy()
        if g.shape != (dim,):
            raise DimensionMismatchError(f"goal shape {g.shape} != ({dim},)")
        g.flags.writeable = False
        return DynamicalSystem(
            name=name, dim=dim, input_dim=dim,
            f=seds_field(mixture, g),
            goal=g, kind="seds_like", params={"mixture": mixture},
        )
    raise ValueError(f"unknown builtin system {name!r}; known: {BUILTIN_NAMES}")


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = DEFAULT_DT
    method: str = "euler"
    blow_up_norm: float = BLOW_UP_NORM

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.method not in ("euler", "rk4"):
            raise ValueError(f"unknown integration method {self.method!r}")


def step(system: DynamicalSystem, x, u, cfg: IntegratorConfig | None = None,
         dt: float | None = None, method: str | None = None) -> np.ndarray:
    """One fixed step with the input held constant over the interval.

    Pass an IntegratorConfig or override dt/method directly. Euler keeps
    linear barrier values exactly on the discrete comparison
    h_{k+1} = h_k + dt * hdot_k, which is what the invariance guarantees are
    stated against; rk4 is available for smoother unfiltered playback.
    """
    if cfg is None:
        cfg = IntegratorConfig()
    dt = cfg.dt if dt is None else float(dt)
    method = cfg.method if method is None else method
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if x.shape != (system.dim,):
        raise DimensionMismatchError(f"state shape {x.shape} != ({system.dim},)")
    if u.shape != (system.input_dim,):
        raise DimensionMismatchError(f"input shape {u.shape} != ({system.input_dim},)")

    def xdot(state: np.ndarray) -> np.ndarray:
        return system.field_f(state) + system.field_G(state) @ u

    if method == "euler":
        out = x + dt * xdot(x)
    elif method == "rk4":
        k1 = xdot(x)
        k2 = xdot(x + 0.5 * dt * k1)
        k3 = xdot(x + 0.5 * dt * k2)
        k4 = xdot(x + dt * k3)
        out = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        raise ValueError(f"unknown integration method {method!r}")
    norm = float(np.linalg.norm(out))
    if not np.isfinite(norm) or norm > cfg.blow_up_norm:
        raise BlowUpError(f"state norm {norm:.3g} exceeded {cfg.blow_up_norm:.0e}")
    return out


def validate_system(system: DynamicalSystem, seed: int = 0, n_samples: int = 16,
                    box: float = 2.0) -> None:
    """Spot-check a system before simulation.

    Draws sample states in a box, requires finite drift with a bounded local
    Lipschitz estimate, full column rank of G (otherwise some input directions
    are lost and the filter algebra breaks down), and for goal-directed fields
    an equilibrium at the goal.
    """
    rng = np.random.default_rng(seed)
    samples = rng.uniform(-box, box, size=(n_samples, system.dim))
    prev_x = None
    prev_f = None
    for x in samples:
        fx = system.field_f(x)
        if fx.shape != (system.dim,) or not np.all(np.isfinite(fx)):
            raise ValueError(f"drift is non-finite or mis-shaped at {x}")
        Gx = system.field_G(x)
        if Gx.shape != (system.dim, system.input_dim):
            raise DimensionMismatchError(
                f"G shape {Gx.shape} != ({system.dim}, {system.input_dim})"
            )
        if np.linalg.matrix_rank(Gx) < system.input_dim:
            raise RankDeficientInputError(f"G(x) is column rank deficient at {x}")
        if prev_x is not None:
            dx = float(np.linalg.norm(x - prev_x))
            if dx > 1e-9:
                ratio = float(np.linalg.norm(fx - prev_f)) / dx
                if not np.isfinite(ratio) or ratio > 1e6:
                    raise ValueError(f"drift changes too fast near {x} (ratio {ratio:.3g})")
        prev_x, prev_f = x, fx
    if system.goal is not None:
        residual = float(np.linalg.norm(system.field_f(system.goal)))
        if residual > _EQUILIBRIUM_TOL:
            raise ValueError(
                f"goal is not an equilibrium: |f(goal)| = {residual:.3g} > {_EQUILIBRIUM_TOL:.0e}"
            )
