"""Alignment dynamics of peripheral agents toward a fixed anchor.

Each agent descends ``f(x) = d(a, x)^2`` whose Riemannian gradient is
``-2 log_x(a)``. Three trajectory kinds are supported:

* ``SmoothFlow(dt)``: RK4 integration of ``dx/dt = 2 log_x(a)``.
* ``DeterministicDescent()``: ``x <- exp_x(2 alpha_t log_x(a))``.
* ``StochasticDescent()``: the same step plus ``alpha_t * xi`` with ``xi`` a
  tangent Gaussian.

The descent step moves *toward* the anchor. Printed versions of the update
that use ``-alpha log_x(a)`` move away from it; we follow the descent step
``exp_x(-alpha grad f)``.
"""

from __future__ import annotations

import contextlib
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .errors import DegenerateFitError, InputError
from .manifold import Manifold

# Debug switches used by the verification suite to prove checks can fail.
_FAULTS: set[str] = set()
KNOWN_FAULTS = ("gradient-sign",)


@contextlib.contextmanager
def inject_fault(name: str) -> Iterator[None]:
    if name not in KNOWN_FAULTS:
        raise InputError(f"unknown fault {name!r}; valid: {KNOWN_FAULTS}")
    _FAULTS.add(name)
    try:
        yield
    finally:
        _FAULTS.discard(name)


@dataclass(frozen=True, eq=False)
class Anchor:
    """The dominant node. Its point is copied and made read-only."""

    manifold: Manifold
    point: np.ndarray

    def __post_init__(self):
        p = np.array(self.manifold.check_point(self.point), dtype=float)
        if p.ndim != 1:
            raise InputError("anchor must be a single point")
        p.setflags(write=False)
        object.__setattr__(self, "point", p)

    def distance(self, x) -> np.ndarray:
        return self.manifold.dist(self.point, x)


# -- schedules, noise, trajectory kinds ---------------------------------------


def _positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise InputError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Constant:
    alpha: float

    def __post_init__(self):
        _positive("alpha", self.alpha)

    def __call__(self, t: int) -> float:
        return self.alpha


@dataclass(frozen=True)
class RobbinsMonro:
    """``alpha_t = alpha0 / (1 + lam * t)``: sum diverges, sum of squares converges."""

    alpha0: float
    lam: float

    def __post_init__(self):
        _positive("alpha0", self.alpha0)
        _positive("lam", self.lam)

    def __call__(self, t: int) -> float:
        return self.alpha0 / (1.0 + self.lam * t)


StepSchedule = Constant | RobbinsMonro


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float = 0.0
    # True: inject alpha_t * xi (Robbins-Monro form). False: inject raw xi.
    scaled: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InputError(f"sigma must be finite and >= 0, got {self.sigma!r}")


@dataclass(frozen=True)
class SmoothFlow:
    dt: float = 1e-3

    def __post_init__(self):
        _positive("dt", self.dt)


@dataclass(frozen=True)
class DeterministicDescent:
    pass


@dataclass(frozen=True)
class StochasticDescent:
    pass


TrajectoryKind = SmoothFlow | DeterministicDescent | StochasticDescent


# -- loss and gradient ------------------------------------------------------------


def global_loss(anchor: Anchor, points) -> float:
    """Sum of squared geodesic distances from each agent to the anchor."""
    d = anchor.distance(np.atleast_2d(points))
    return float(np.sum(d**2))


def lyapunov_value(anchor: Anchor, x) -> float:
    return 0.5 * float(anchor.distance(x)) ** 2


def riemannian_gradient(anchor: Anchor, x) -> np.ndarray:
    g = -2.0 * anchor.manifold.log(x, anchor.point)
    if "gradient-sign" in _FAULTS:
        g = -g
    return g


def flow_velocity(anchor: Anchor, x) -> np.ndarray:
    return -riemannian_gradient(anchor, x)


# -- single steps -----------------------------------------------------------------


def flow_step(anchor: Anchor, x, dt: float) -> np.ndarray:
    """One RK4 step of the gradient flow, integrated in the chart T_x and retracted by exp."""
    _positive("dt", dt)
    M = anchor.manifold
    x = M.check_point(x)

    def chart_velocity(u):
        y = M.exp(x, u)
        return M.pullback(x, u, flow_velocity(anchor, y))

    k1 = flow_velocity(anchor, x)
    k2 = chart_velocity(0.5 * dt * k1)
    k3 = chart_velocity(0.5 * dt * k2)
    k4 = chart_velocity(dt * k3)
    return M.exp(x, dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))


def sgd_step(
    anchor: Anchor,
    x,
    alpha_t: float,
    noise: NoiseSpec = NoiseSpec(),
    rng: np.random.Generator | None = None,
    xi=None,
) -> np.ndarray:
    """``exp_x(2 alpha_t log_x(a) + alpha_t xi)``.

    ``xi`` may be supplied directly; otherwise it is drawn from ``rng`` with
    scale ``noise.sigma``.
    """
    _positive("alpha_t", alpha_t)
    M = anchor.manifold
    x = M.check_point(x)
    v = -alpha_t * riemannian_gradient(anchor, x)
    if xi is None and noise.sigma > 0:
        if rng is None:
            raise InputError("rng is required when sigma > 0")
        xi = M.sample_tangent_gaussian(x, noise.sigma, rng)
    if xi is not None:
        v = v + (alpha_t if noise.scaled else 1.0) * np.asarray(xi, dtype=float)
    return M.exp(x, v)


# -- Algorithm loop ------------------------------------------------------------------


@dataclass(frozen=True)
class StepRecord:
    step: int
    time: float
    point: np.ndarray
    distance: float
    loss: float
    lyapunov: float


@dataclass
class AlignmentRun:
    records: list[StepRecord]
    final: np.ndarray
    converged: bool
    steps: int
    agent_id: int = 0

    @property
    def final_distance(self) -> float:
        return self.records[-1].distance if self.records else 0.0


def _record(anchor: Anchor, step: int, time: float, x: np.ndarray) -> StepRecord:
    d = float(anchor.distance(x))
    return StepRecord(step, time, x.copy(), d, d * d, 0.5 * d * d)


def run_alignment(
    anchor: Anchor,
    initial,
    kind: TrajectoryKind,
    schedule: StepSchedule = Constant(0.25),
    noise: NoiseSpec = NoiseSpec(),
    tol: float = 1e-8,
    max_steps: int = 10_000,
    rng: np.random.Generator | None = None,
    agent_id: int = 0,
) -> AlignmentRun:
    """Iterate one agent until ``d(a, x) <= tol`` or ``max_steps`` steps.

    Running out of steps is reported through ``converged=False``. An agent that
    starts exactly on the anchor returns an empty trajectory.
    """
    _positive("tol", tol)
    if int(max_steps) != max_steps or max_steps < 1:
        raise InputError(f"max_steps must be an integer >= 1, got {max_steps!r}")
    M = anchor.manifold
    x = np.array(M.check_point(initial), dtype=float)
    if x.ndim != 1:
        raise InputError("run_alignment drives a single agent; use run_ensemble for batches")
    if np.array_equal(x, anchor.point):
        return AlignmentRun([], x, True, 0, agent_id)
    if isinstance(kind, StochasticDescent) and noise.sigma > 0 and rng is None:
        raise InputError("rng is required for stochastic descent")

    records = [_record(anchor, 0, 0.0, x)]
    t = 0
    while records[-1].distance > tol and t < max_steps:
        if isinstance(kind, SmoothFlow):
            x = flow_step(anchor, x, kind.dt)
            time = (t + 1) * kind.dt
        elif isinstance(kind, DeterministicDescent):
            x = sgd_step(anchor, x, schedule(t))
            time = float(t + 1)
        elif isinstance(kind, StochasticDescent):
            x = sgd_step(anchor, x, schedule(t), noise, rng)
            time = float(t + 1)
        else:
            raise InputError(f"unknown trajectory kind {kind!r}")
        t += 1
        records.append(_record(anchor, t, time, x))
    return AlignmentRun(records, x, records[-1].distance <= tol, t, agent_id)


# -- batched runs -----------------------------------------------------------------------


@dataclass
class EnsembleRun:
    """Fixed-length run of many agents advanced together.

    ``distances`` has shape ``(steps + 1, agents)``; ``snapshots`` maps a
    checkpoint step to the agent points at that step.
    """

    final: np.ndarray
    distances: np.ndarray
    times: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def loss_series(self) -> np.ndarray:
        return np.sum(self.distances**2, axis=1)


def run_ensemble(
    anchor: Anchor,
    initials,
    kind: TrajectoryKind,
    schedule: StepSchedule,
    noise: NoiseSpec,
    steps: int,
    rngs: Sequence[np.random.Generator] | None = None,
    checkpoints: Sequence[int] = (),
    block: int = 1000,
) -> EnsembleRun:
    """Advance a batch of agents for exactly ``steps`` steps.

    Agent ``b`` draws its noise from ``rngs[b]`` in the same order a
    single-agent :func:`run_alignment` would, so results do not depend on how
    agents are batched.
    """
    M = anchor.manifold
    x = np.array(M.check_point(np.atleast_2d(initials)), dtype=float)
    B = x.shape[0]
    stochastic = isinstance(kind, StochasticDescent) and noise.sigma > 0
    if stochastic and (rngs is None or len(rngs) != B):
        raise InputError("stochastic ensembles need one rng per agent")
    wanted = set(int(c) for c in checkpoints)
    bad = [c for c in wanted if c < 0 or c > steps]
    if bad:
        raise InputError(f"checkpoints out of range [0, {steps}]: {sorted(bad)}")

    a = np.broadcast_to(anchor.point, x.shape)
    distances = np.empty((steps + 1, B))
    distances[0] = M.dist(a, x)
    dt = kind.dt if isinstance(kind, SmoothFlow) else 1.0
    times = np.arange(steps + 1) * dt
    snapshots = {0: x.copy()} if 0 in wanted else {}
    normals = None
    for t in range(steps):
        if stochastic and t % block == 0:
            n = min(block, steps - t)
            normals = np.stack([r.standard_normal((n, M.n)) for r in rngs], axis=1)
        if isinstance(kind, SmoothFlow):
            x = flow_step(anchor, x, kind.dt)
        else:
            alpha = schedule(t)
            v = -alpha * riemannian_gradient(anchor, x)
            if stochastic:
                xi = noise.sigma * M.tangent_from_normal(x, normals[t % block])
                v = v + (alpha if noise.scaled else 1.0) * xi
            x = M.exp(x, v)
        distances[t + 1] = M.dist(a, x)
        if t + 1 in wanted:
            snapshots[t + 1] = x.copy()
    return EnsembleRun(x, distances, times, snapshots)


# -- diagnostics ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceReport:
    fitted_rate: float
    r_squared: float
    monotone: bool


def convergence_report(run: AlignmentRun) -> ConvergenceReport:
    """Exponential-rate fit ``d(t) ~ d0 exp(-rate t)`` and a Lyapunov monotonicity check.

    ``fitted_rate`` is minus the least-squares slope of ``ln d`` against time.
    """
    recs = [r for r in run.records if r.distance > 0]
    if not recs:
        raise DegenerateFitError("all recorded distances are zero")
    if len(recs) < 10:
        raise DegenerateFitError(f"need >= 10 records with positive distance, got {len(recs)}")
    t = np.array([r.time for r in recs])
    logd = np.log([r.distance for r in recs])
    slope, intercept = np.polyfit(t, logd, 1)
    resid = logd - (slope * t + intercept)
    ss_tot = float(np.sum((logd - logd.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    v = [r.lyapunov for r in run.records]
    monotone = all(b <= a + 1e-12 for a, b in zip(v, v[1:]))
    return ConvergenceReport(-float(slope), r2, monotone)
