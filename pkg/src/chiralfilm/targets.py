"""Target constraint manifolds with nearest-point projection.

Each target supplies the triple (project, normal, signed_distance) plus the
tangent projector.  The normal field is implemented as a smooth extension to
a neighborhood of the manifold so that energies stay differentiable when a
node value drifts off the constraint during finite-difference checks.

All operations are vectorized over leading axes of (... , 3) arrays.
"""

from __future__ import annotations

import numpy as np


class TargetError(ValueError):
    """Projection request outside the admissible region, or non-convergence."""


def _norm(y, axis=-1, keepdims=True):
    return np.sqrt(np.sum(y * y, axis=axis, keepdims=keepdims))


class TargetManifold:
    """Interface for a closed constraint manifold in R^3.

    Users may supply their own subclass; the library validates projection
    idempotence and stationarity but cannot verify global nearest-point
    uniqueness for custom targets.
    """

    admissible_radius: float

    def project(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal(self, sigma: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def signed_distance(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def normal_pullback(self, y: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Transpose of the normal-extension Jacobian applied to w."""
        raise NotImplementedError

    def tangent_project(self, sigma: np.ndarray, g: np.ndarray) -> np.ndarray:
        """Remove the component of g along the outward normal at sigma."""
        n = self.normal(sigma)
        return g - np.sum(g * n, axis=-1, keepdims=True) * n


class SphereTarget(TargetManifold):
    """Sphere of given radius centered at the origin; all maps closed-form."""

    def __init__(self, radius: float = 1.0):
        if radius <= 0:
            raise TargetError("sphere radius must be positive")
        self.radius = float(radius)
        self.admissible_radius = 0.5 * self.radius

    def _safe_norm(self, y):
        r = _norm(y)
        if np.any(r < 1e-12 * self.radius):
            raise TargetError("point too close to the center: projection undefined")
        return r

    def project(self, y):
        y = np.asarray(y, dtype=float)
        return self.radius * y / self._safe_norm(y)

    def normal(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        return sigma / self._safe_norm(sigma)

    def signed_distance(self, y):
        y = np.asarray(y, dtype=float)
        return _norm(y, keepdims=False) - self.radius

    def normal_pullback(self, y, w):
        y = np.asarray(y, dtype=float)
        r = self._safe_norm(y)
        n = y / r
        return (w - np.sum(w * n, axis=-1, keepdims=True) * n) / r


class EllipsoidTarget(TargetManifold):
    """Axis-aligned ellipsoid sum((x_i/a_i)^2) = 1.

    Projection solves the single Lagrange-multiplier equation with a
    safeguarded Newton iteration (bisection fallback inside the bracket).
    """

    def __init__(self, semi_axes, tol: float = 1e-12, max_iter: int = 50):
        axes = np.asarray(semi_axes, dtype=float)
        if axes.shape != (3,) or np.any(axes <= 0):
            raise TargetError("ellipsoid needs three positive semi-axes")
        self.semi_axes = axes
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.admissible_radius = 0.5 * float(np.min(axes))
        self._a2 = axes * axes

    def _multiplier(self, y):
        """Root of g(t) = sum(a_i^2 y_i^2 / (t + a_i^2)^2) - 1 on (-min a^2, inf)."""
        a2 = self._a2
        w = a2 * y * y  # numerator weights
        lo = np.full(y.shape[:-1], -np.min(a2) * (1.0 - 1e-12))
        hi = np.sqrt(np.sum(w, axis=-1))
        hi = np.maximum(hi, lo + np.min(a2) * 1e-9)

        def g_and_dg(t):
            denom = t[..., None] + a2
            q = w / (denom * denom)
            return np.sum(q, axis=-1) - 1.0, -2.0 * np.sum(q / denom, axis=-1)

        g_lo, _ = g_and_dg(lo)
        if np.any(g_lo <= 0.0):
            raise TargetError(
                "projection undefined: point too close to the medial axis of the ellipsoid"
            )
        t = 0.5 * (lo + hi)
        converged = np.zeros(t.shape, dtype=bool)
        for _ in range(self.max_iter):
            g, dg = g_and_dg(t)
            lo = np.where(g > 0.0, t, lo)
            hi = np.where(g < 0.0, t, hi)
            converged |= np.abs(g) < self.tol
            if np.all(converged):
                break
            step = g / dg
            t_new = t - step
            bad = (t_new <= lo) | (t_new >= hi) | ~np.isfinite(t_new)
            t_new = np.where(bad, 0.5 * (lo + hi), t_new)
            t = np.where(converged, t, t_new)
        else:
            g, _ = g_and_dg(t)
            if np.any(np.abs(g) >= np.sqrt(self.tol)):
                raise TargetError("ellipsoid projection did not converge")
        return t

    def project(self, y):
        y = np.asarray(y, dtype=float)
        t = self._multiplier(y)
        return self._a2 * y / (t[..., None] + self._a2)

    def normal(self, sigma):
        sigma = np.asarray(sigma, dtype=float)
        grad = sigma / self._a2
        n = _norm(grad)
        if np.any(n < 1e-14):
            raise TargetError("normal undefined at the center")
        return grad / n

    def signed_distance(self, y):
        y = np.asarray(y, dtype=float)
        sigma = self.project(y)
        dist = _norm(y - sigma, keepdims=False)
        inside = np.sum((y / self.semi_axes) ** 2, axis=-1) < 1.0
        return np.where(inside, -dist, dist)

    def normal_pullback(self, y, w):
        y = np.asarray(y, dtype=float)
        grad = y / self._a2
        gn = _norm(grad)
        n = grad / gn
        wt = w - np.sum(w * n, axis=-1, keepdims=True) * n
        return (wt / self._a2) / gn


def make_target(kind: str, **params) -> TargetManifold:
    if kind == "sphere":
        return SphereTarget(params.get("radius", 1.0))
    if kind == "ellipsoid":
        return EllipsoidTarget(params["semi_axes"])
    raise TargetError(f"unknown target kind {kind!r}")
