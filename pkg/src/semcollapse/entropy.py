"""Entropy of agent states conditioned on the anchor.

The anchor is fixed, so ``H(X | A = a)`` is observed through an *ensemble*:
many independent agents (or seeds) sampled at the same step. Samples are
mapped into normal coordinates at the anchor and fed to one of two
estimators:

``"histogram"``
    Bins of side ``bin_width`` centred on the anchor. Plug-in discrete entropy,
    always ``>= 0``, exactly 0 for a collapsed ensemble.
``"gaussian"``
    Diagonal-covariance Gaussian fit, ``sum_k 0.5 ln(2 pi e var_k)``. Can be
    negative and diverges to ``-inf`` as the ensemble collapses, so a
    zero-variance ensemble reports ``degenerate=True`` with ``value = -inf``
    replaced by :data:`DEGENERATE_SENTINEL`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InputError
from .manifold import Manifold

DEFAULT_BIN_WIDTH = 0.01
DEGENERATE_SENTINEL = float("-1e308")
METHODS = ("histogram", "gaussian")


def discrete_entropy(p) -> float:
    """Shannon entropy in nats, with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or p.size == 0:
        raise InputError("probability vector must be 1-D and non-empty")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise InputError("probabilities must be finite and non-negative")
    if abs(p.sum() - 1.0) > 1e-9:
        raise InputError(f"probabilities must sum to 1 (got {p.sum():.12g})")
    nz = p[p > 0]
    return max(0.0, float(-np.sum(nz * np.log(nz))))


def gaussian_differential_entropy(sigma2: float, dims: int = 1) -> float:
    if not sigma2 > 0:
        raise DomainError(f"variance must be > 0, got {sigma2!r}")
    if int(dims) != dims or dims < 1:
        raise InputError(f"dims must be an integer >= 1, got {dims!r}")
    return 0.5 * dims * math.log(2 * math.pi * math.e * sigma2)


@dataclass(frozen=True)
class Ensemble:
    manifold: Manifold
    anchor: np.ndarray
    samples: np.ndarray

    def __post_init__(self):
        a = self.manifold.check_point(self.anchor)
        s = np.atleast_2d(self.manifold.check_point(self.samples))
        if a.ndim != 1:
            raise InputError("ensemble anchor must be a single point")
        object.__setattr__(self, "anchor", a)
        object.__setattr__(self, "samples", s)

    @property
    def chart(self) -> np.ndarray:
        """Sample coordinates in an orthonormal frame of the tangent space at the anchor."""
        return self.manifold.chart(self.anchor, self.samples)


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    method: str
    # bin width for "histogram", per-axis variances for "gaussian"
    parameter: float | tuple[float, ...]
    degenerate: bool = False


def histogram_entropy(coords: np.ndarray, bin_width: float = DEFAULT_BIN_WIDTH) -> float:
    if not bin_width > 0:
        raise InputError(f"bin_width must be > 0, got {bin_width!r}")
    coords = np.atleast_2d(coords)
    cells = np.floor(coords / bin_width + 0.5).astype(np.int64)
    _, counts = np.unique(cells, axis=0, return_counts=True)
    return discrete_entropy(counts / counts.sum())


def ensemble_conditional_entropy(
    e: Ensemble, method: str = "histogram", bin_width: float = DEFAULT_BIN_WIDTH
) -> EntropyEstimate:
    coords = e.chart
    if method == "histogram":
        return EntropyEstimate(histogram_entropy(coords, bin_width), method, bin_width)
    if method == "gaussian":
        if coords.shape[0] < 2:
            raise InputError("gaussian estimate needs at least 2 samples")
        var = coords.var(axis=0, ddof=1)
        if np.any(var <= 0):
            return EntropyEstimate(DEGENERATE_SENTINEL, method, tuple(map(float, var)), degenerate=True)
        value = float(np.sum(0.5 * np.log(2 * math.pi * math.e * var)))
        return EntropyEstimate(value, method, tuple(map(float, var)))
    raise InputError(f"unknown method {method!r}; choose one of {METHODS}")


def mutual_information(h_x: EntropyEstimate, h_x_given_a: EntropyEstimate) -> float:
    """``I(X; A) = H(X) - H(X | A)``; both estimates must share method and binning."""
    if h_x.method != h_x_given_a.method:
        raise InputError(f"method mismatch: {h_x.method} vs {h_x_given_a.method}")
    if h_x.method == "histogram" and h_x.parameter != h_x_given_a.parameter:
        raise InputError("histogram estimates use different bin widths")
    if h_x.degenerate or h_x_given_a.degenerate:
        raise DomainError("mutual information undefined for degenerate estimates")
    return h_x.value - h_x_given_a.value


@dataclass(frozen=True)
class CollapsePoint:
    step: int
    conditional: EntropyEstimate
    marginal: EntropyEstimate | None = None

    @property
    def mutual_information(self) -> float | None:
        if self.marginal is None:
            return None
        return mutual_information(self.marginal, self.conditional)


def collapse_series(
    manifold: Manifold,
    anchors: np.ndarray,
    snapshots: list[dict[int, np.ndarray]],
    method: str = "histogram",
    bin_width: float = DEFAULT_BIN_WIDTH,
) -> list[CollapsePoint]:
    """Entropy series over checkpoints for agents aligned to one or more anchors.

    ``snapshots[k]`` maps step -> points for the agents that follow
    ``anchors[k]``. With an anchor drawn uniformly from ``anchors``,
    ``H(X | A)`` is the average of per-anchor estimates and ``H(X)`` is the
    estimate on the pooled points, charted at the first anchor. With a single
    anchor no marginal is reported.
    """
    anchors = np.atleast_2d(anchors)
    if len(anchors) != len(snapshots):
        raise InputError("need one snapshot mapping per anchor")
    steps = sorted(snapshots[0])
    out = []
    for t in steps:
        per_anchor = [
            ensemble_conditional_entropy(Ensemble(manifold, a, snaps[t]), method, bin_width)
            for a, snaps in zip(anchors, snapshots)
        ]
        cond = EntropyEstimate(
            float(np.mean([h.value for h in per_anchor])),
            method,
            per_anchor[0].parameter if method == "histogram" else (),
            degenerate=any(h.degenerate for h in per_anchor),
        )
        marginal = None
        if len(anchors) > 1:
            pooled = np.concatenate([snaps[t] for snaps in snapshots])
            marginal = ensemble_conditional_entropy(Ensemble(manifold, anchors[0], pooled), method, bin_width)
        out.append(CollapsePoint(t, cond, marginal))
    return out
