"""Reproducible alignment experiments shared by the CLI and the verification suite.

Every random draw comes from a named stream of the master seed:
``(seed, "anchor")`` for the anchor, ``(seed, "init", replicate)`` for initial
agents, and ``(seed, trajectory, agent)`` for an agent's noise, where ``agent``
is a global id over replicates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import (
    Anchor,
    Constant,
    DeterministicDescent,
    EnsembleRun,
    NoiseSpec,
    RobbinsMonro,
    SmoothFlow,
    StochasticDescent,
    run_ensemble,
)
from .entropy import CollapsePoint, collapse_series
from .manifold import Euclidean, Manifold, PoincareBall, Sphere
from .rng import stream

ENTROPY_CHECKPOINTS = (0, 100, 1000, 10_000)


def start_radius(M: Manifold) -> float:
    """Geodesic radius of the initial-agent ball. Sphere stays inside the convex ball (< pi/2)."""
    if isinstance(M, Sphere):
        return math.pi / 2 - 0.05
    return 2.0


def make_anchor(M: Manifold, seed: int) -> Anchor:
    g = stream(seed, "anchor")
    if isinstance(M, PoincareBall):
        return Anchor(M, M.random_point(g, max_norm=0.5))
    return Anchor(M, M.random_point(g))


def initial_agents(M: Manifold, anchor: Anchor, agents: int, seed: int, replicate: int) -> np.ndarray:
    return M.random_ball(anchor.point, start_radius(M), stream(seed, "init", replicate), agents)


@dataclass(frozen=True)
class TrajectorySpec:
    name: str
    kind: object
    schedule: object
    noise: NoiseSpec


def default_trajectories(
    alpha: float = 0.1, alpha0: float = 0.3, lam: float = 0.05, sigma: float = 0.1, dt: float = 1e-3
) -> dict[str, TrajectorySpec]:
    return {
        "flow": TrajectorySpec("flow", SmoothFlow(dt), Constant(alpha), NoiseSpec(0.0)),
        "deterministic": TrajectorySpec("deterministic", DeterministicDescent(), Constant(alpha), NoiseSpec(0.0)),
        "stochastic": TrajectorySpec("stochastic", StochasticDescent(), RobbinsMonro(alpha0, lam), NoiseSpec(sigma)),
    }


def run_trajectory(
    M: Manifold,
    spec: TrajectorySpec,
    agents: int,
    replicates: int,
    steps: int,
    seed: int = 0,
    checkpoints=(),
) -> tuple[Anchor, EnsembleRun]:
    """All replicates of one trajectory kind, batched into a single ensemble."""
    anchor = make_anchor(M, seed)
    init = np.concatenate([initial_agents(M, anchor, agents, seed, s) for s in range(replicates)])
    rngs = [stream(seed, spec.name, i) for i in range(len(init))]
    return anchor, run_ensemble(anchor, init, spec.kind, spec.schedule, spec.noise, steps, rngs, checkpoints)


def trajectory_irrelevance(
    M: Manifold, agents: int = 32, replicates: int = 10, steps: int = 10_000, seed: int = 0, kinds=("deterministic", "stochastic")
) -> dict[str, np.ndarray]:
    """Final anchor distances per trajectory kind, shape ``(replicates * agents,)``."""
    specs = default_trajectories()
    return {k: run_trajectory(M, specs[k], agents, replicates, steps, seed)[1].distances[-1] for k in kinds}


def entropy_collapse(
    M: Manifold,
    agents: int = 128,
    seed: int = 0,
    checkpoints=ENTROPY_CHECKPOINTS,
    method: str = "histogram",
    bin_width: float = 0.01,
    spec: TrajectorySpec | None = None,
) -> list[CollapsePoint]:
    """Conditional-entropy series of one stochastic ensemble around a single anchor."""
    spec = spec or default_trajectories()["stochastic"]
    anchor, run = run_trajectory(M, spec, agents, 1, max(checkpoints), seed, checkpoints)
    return collapse_series(M, anchor.point, [run.snapshots], method, bin_width)


def mutual_information_series(
    agents: int = 128,
    seed: int = 0,
    checkpoints=ENTROPY_CHECKPOINTS,
    bin_width: float = 0.5,
    spec: TrajectorySpec | None = None,
) -> list[CollapsePoint]:
    """Entropy and mutual information with the anchor drawn from four anchors.

    Planar Euclidean geometry; anchors sit on the histogram lattice so the
    pooled and per-anchor binnings agree. Initial agents follow the same
    distribution whatever the anchor, so ``X`` starts independent of ``A``.
    """
    spec = spec or default_trajectories()["stochastic"]
    M = Euclidean(2)
    anchors = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0], [2.0, 2.0]])
    centre = np.array([1.0, 1.0])
    snaps = []
    for k, a in enumerate(anchors):
        init = M.random_ball(centre, 2.0, stream(seed, "mi-init", k), agents)
        rngs = [stream(seed, "mi", k, i) for i in range(agents)]
        run = run_ensemble(Anchor(M, a), init, spec.kind, spec.schedule, spec.noise, max(checkpoints), rngs, checkpoints)
        snaps.append(run.snapshots)
    return collapse_series(M, anchors, snaps, "histogram", bin_width)

