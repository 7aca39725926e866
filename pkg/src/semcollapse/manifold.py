"""Riemannian geometry kernel: Euclidean space, the unit sphere and the Poincare ball.

Points and tangent vectors are plain numpy arrays in ambient coordinates. Every
operation accepts a single point of shape ``(n,)`` or a batch of shape
``(..., n)`` and broadcasts over the leading axes. A manifold object carries the
geometry; the arrays carry no reference back to it.

Tangent norms are always measured in the manifold metric. For the Poincare ball
(curvature -1) that metric is conformal with factor ``2 / (1 - |x|^2)``, so a
coordinate vector ``v`` at the origin has length ``2 |v|``.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DomainError, InputError, UndefinedLogError

MIN_NORM = 1e-15
# Poincare points are clamped to this radius after every exponential step.
BALL_MAX_NORM = 1.0 - 1e-9
SPHERE_UNIT_TOL = 1e-9
SPHERE_TANGENT_TOL = 1e-9
# Finite-difference step used by the generic chart pullback.
_FD_STEP = 1e-5


def _norm(v: np.ndarray) -> np.ndarray:
    return np.linalg.norm(v, axis=-1, keepdims=True)


def _dot(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    return np.sum(u * v, axis=-1, keepdims=True)


class Manifold:
    """Common interface. Subclasses provide the closed-form maps."""

    name = "manifold"

    def __init__(self, n: int):
        if int(n) != n or n < 1:
            raise InputError(f"dimension must be an integer >= 1, got {n!r}")
        self.n = int(n)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.n})"

    def __eq__(self, other: object) -> bool:
        return type(self) is type(other) and self.n == other.n

    def __hash__(self) -> int:
        return hash((type(self).__name__, self.n))

    @property
    def ambient_dim(self) -> int:
        return self.n

    @property
    def dim(self) -> int:
        """Intrinsic dimension."""
        return self.n

    # -- validation -------------------------------------------------------

    def _as_array(self, x, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.n:
            raise InputError(f"{what} must have trailing dimension {self.n} for {self!r}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise InputError(f"{what} has non-finite components")
        return x

    def check_point(self, x) -> np.ndarray:
        return self._as_array(x, "point")

    def check_tangent(self, x, v) -> np.ndarray:
        return self._as_array(v, "tangent vector")

    # -- metric -----------------------------------------------------------

    def inner(self, x, u, v) -> np.ndarray:
        return np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    def norm(self, x, v) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(x, v, v), 0.0))

    def proj(self, x, u) -> np.ndarray:
        """Project an ambient vector onto the tangent space at ``x``."""
        return np.asarray(u, dtype=float)

    # -- maps -------------------------------------------------------------

    def exp(self, x, v) -> np.ndarray:
        raise NotImplementedError

    def log(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def dist(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def frame(self, x) -> np.ndarray:
        """Orthonormal (in the metric) basis of T_x, shape ``(n, dim)``.

        ``x`` must be a single point.
        """
        return np.eye(self.n)

    def chart(self, a, y) -> np.ndarray:
        """Normal coordinates of ``y`` around ``a``: ``log_a(y)`` in :meth:`frame` coordinates."""
        a = np.asarray(a, dtype=float)
        v = self.log(a, y)
        basis = self.frame(a).T  # (dim, n)
        return self.inner(a, v[..., None, :], basis)

    def pullback(self, x, u, w) -> np.ndarray:
        """Express a tangent vector ``w`` at ``exp_x(u)`` as a velocity in the chart ``T_x``.

        This is ``(d exp_x)_u^{-1} w``. The generic version differentiates
        ``s -> log_x(exp_y(s w))`` by central differences.
        """
        x = np.asarray(x, dtype=float)
        y = self.exp(x, u)
        h = _FD_STEP
        fwd = self.log(x, self.exp(y, h * w))
        bwd = self.log(x, self.exp(y, -h * w))
        return (fwd - bwd) / (2 * h)

    # -- randomness -------------------------------------------------------

    def tangent_from_normal(self, x, z) -> np.ndarray:
        """Map i.i.d. standard normals ``z`` (ambient shape) to a metric-isotropic tangent vector."""
        return np.asarray(z, dtype=float)

    def sample_tangent_gaussian(self, x, sigma: float, rng: np.random.Generator) -> np.ndarray:
        """Zero-mean isotropic Gaussian in T_x with per-direction standard deviation ``sigma``.

        ``sigma == 0`` returns zeros without consuming randomness.
        """
        if sigma < 0 or not math.isfinite(sigma):
            raise InputError(f"sigma must be finite and >= 0, got {sigma!r}")
        x = self.check_point(x)
        if sigma == 0:
            return np.zeros_like(x)
        return sigma * self.tangent_from_normal(x, rng.standard_normal(x.shape))

    def random_point(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        raise NotImplementedError

    def random_ball(self, center, radius: float, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Points at geodesic distance ``< radius`` from ``center``, uniform direction, radius ~ U^(1/dim)."""
        center = self.check_point(center)
        shape = (self.n,) if size is None else (size, self.n)
        direction = self.tangent_from_normal(np.broadcast_to(center, shape), rng.standard_normal(shape))
        direction = direction / np.maximum(self.norm(center, direction), MIN_NORM)[..., None]
        r = radius * rng.random(shape[:-1]) ** (1.0 / self.dim)
        return self.exp(np.broadcast_to(center, shape), direction * r[..., None])


class Euclidean(Manifold):
    name = "euclidean"

    def exp(self, x, v):
        x = self.check_point(x)
        v = self.check_tangent(x, v)
        return x + v

    def log(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return y - x

    def dist(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return np.linalg.norm(y - x, axis=-1)

    def pullback(self, x, u, w):
        return np.asarray(w, dtype=float)

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        return rng.standard_normal(shape)


class Sphere(Manifold):
    """Unit sphere in R^n (intrinsic dimension n - 1)."""

    name = "sphere"

    def __init__(self, n: int):
        super().__init__(n)
        if self.n < 2:
            raise InputError(f"Sphere needs ambient dimension >= 2, got {n}")

    @property
    def dim(self) -> int:
        return self.n - 1

    def check_point(self, x):
        x = self._as_array(x, "point")
        if np.any(np.abs(np.linalg.norm(x, axis=-1) - 1.0) > SPHERE_UNIT_TOL):
            raise InputError("sphere points must have unit norm")
        return x

    def check_tangent(self, x, v):
        v = self._as_array(v, "tangent vector")
        if np.any(np.abs(np.sum(x * v, axis=-1)) > SPHERE_TANGENT_TOL * np.maximum(1.0, np.linalg.norm(v, axis=-1))):
            raise InputError("sphere tangent vectors must be orthogonal to the base point")
        return v

    def proj(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.asarray(u, dtype=float)
        return u - _dot(x, u) * x

    def exp(self, x, v):
        x = self.check_point(x)
        v = self.check_tangent(x, v)
        nv = _norm(v)
        if np.any(nv >= math.pi):
            raise DomainError("sphere exp: tangent norm must be < pi (injectivity radius)")
        safe = np.maximum(nv, MIN_NORM)
        y = np.cos(nv) * x + np.sin(nv) * v / safe
        return y / _norm(y)

    def log(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        c = _dot(x, y)
        u = y - c * x
        nu = _norm(u)
        theta = self._angle(x, y)[..., None]
        if np.any(math.pi - theta < 1e-8):
            raise UndefinedLogError("sphere log undefined for antipodal points")
        return np.where(nu > MIN_NORM, theta * u / np.maximum(nu, MIN_NORM), 0.0)

    @staticmethod
    def _angle(x, y):
        chord = np.linalg.norm(np.asarray(x) - np.asarray(y), axis=-1)
        return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))

    def dist(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        return self._angle(x, y)

    def frame(self, x):
        x = np.asarray(x, dtype=float)
        # rows 1.. of V^T span the orthogonal complement of x
        _, _, vt = np.linalg.svd(x[None, :])
        return vt[1:].T

    def tangent_from_normal(self, x, z):
        return self.proj(x, z)

    def random_point(self, rng, size=None):
        shape = (self.n,) if size is None else (size, self.n)
        z = rng.standard_normal(shape)
        return z / _norm(z)


class PoincareBall(Manifold):
    """Open unit ball with the hyperbolic metric of curvature -1."""

    name = "poincare"

    def check_point(self, x):
        x = self._as_array(x, "point")
        if np.any(np.linalg.norm(x, axis=-1) >= 1.0):
            raise InputError("Poincare ball points must have norm < 1")
        return x

    @staticmethod
    def conformal_factor(x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return 2.0 / (1.0 - np.sum(x * x, axis=-1))

    @staticmethod
    def mobius_add(x, y) -> np.ndarray:
        xy = _dot(x, y)
        x2 = _dot(x, x)
        y2 = _dot(y, y)
        num = (1 + 2 * xy + y2) * x + (1 - x2) * y
        den = 1 + 2 * xy + x2 * y2
        return num / np.maximum(den, MIN_NORM)

    def inner(self, x, u, v):
        lam = self.conformal_factor(x)
        return lam**2 * np.sum(np.asarray(u) * np.asarray(v), axis=-1)

    @staticmethod
    def _clamp(y):
        ny = _norm(y)
        return np.where(ny > BALL_MAX_NORM, y * (BALL_MAX_NORM / np.maximum(ny, MIN_NORM)), y)

    def exp(self, x, v):
        x = self.check_point(x)
        v = self.check_tangent(x, v)
        lam = self.conformal_factor(x)[..., None]
        nv = _norm(v)
        step = np.tanh(lam * nv / 2) * v / np.maximum(nv, MIN_NORM)
        return self._clamp(self.mobius_add(x, step))

    def log(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        w = self.mobius_add(-x, y)
        nw = _norm(w)
        lam = self.conformal_factor(x)[..., None]
        return 2.0 / lam * np.arctanh(np.minimum(nw, BALL_MAX_NORM)) * w / np.maximum(nw, MIN_NORM)

    def dist(self, x, y):
        x = self.check_point(x)
        y = self.check_point(y)
        # 2 asinh(|x - y| / sqrt((1-|x|^2)(1-|y|^2))): symmetric and accurate at short range
        gap = np.linalg.norm(x - y, axis=-1)
        sx = 1.0 - np.sum(x * x, axis=-1)
        sy = 1.0 - np.sum(y * y, axis=-1)
        return 2.0 * np.arcsinh(gap / np.sqrt(sx * sy))

    def frame(self, x):
        return np.eye(self.n) / self.conformal_factor(x)

    def tangent_from_normal(self, x, z):
        return np.asarray(z, dtype=float) / self.conformal_factor(x)[..., None]

    def random_point(self, rng, size=None, max_norm: float = 0.9):
        shape = (self.n,) if size is None else (size, self.n)
        z = rng.standard_normal(shape)
        r = max_norm * rng.random(shape[:-1]) ** (1.0 / self.n)
        return z / _norm(z) * r[..., None]


MANIFOLDS = {"euclidean": Euclidean, "sphere": Sphere, "poincare": PoincareBall}


def make_manifold(name: str, n: int) -> Manifold:
    try:
        cls = MANIFOLDS[name.lower()]
    except KeyError:
        raise InputError(f"unknown manifold {name!r}; choose one of {sorted(MANIFOLDS)}") from None
    return cls(n)


def same_manifold(m1: Manifold, m2: Manifold) -> None:
    if m1 != m2:
        raise InputError(f"mismatched manifolds: {m1!r} vs {m2!r}")
