"""Perturbation matrix fields K(xi, sigma) and the elliptic tensor A(xi).

Presets cover the standard antisymmetric-exchange variants: isotropic bulk
(K(sigma) w = kappa * w x sigma), interfacial in the direction of the surface
normal (K(xi, sigma) w = kappa * [(n.sigma) w - (w.sigma) n]), anisotropic
with a coupling matrix J (K(sigma) w = (J w) x sigma), and the nonuniform
saturation-magnetization variant (K(xi, sigma) w = (grad_Ms . w) sigma +
(J w) x sigma, paired with the scalar tensor A = Ms * I).

Every preset is linear in sigma, so directional derivatives in sigma reuse
the evaluator itself.  Evaluators are stateless and vectorized: they receive
a FrameSample whose arrays broadcast against sigma of shape (..., 3).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .surfaces import SurfaceGrid


class PerturbationError(ValueError):
    """Invalid perturbation parameters or callback output."""


@dataclass(frozen=True)
class ScalarSurfaceField:
    """Small expression catalogue for scalar fields on the base surface.

    kinds: "constant" (c0), "affine" (c0 + c . x), "banded" (c0 + c1 * x3^2).
    """

    kind: str
    c0: float = 1.0
    c: tuple = (0.0, 0.0, 0.0)
    c1: float = 0.0

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        if self.kind == "constant":
            return np.full(points.shape[:-1], float(self.c0))
        if self.kind == "affine":
            return self.c0 + points @ np.asarray(self.c, dtype=float)
        if self.kind == "banded":
            return self.c0 + self.c1 * points[..., 2] ** 2
        raise PerturbationError(f"unknown scalar field kind {self.kind!r}")


@dataclass
class FrameSample:
    """Node-aligned surface data fed to perturbation evaluators."""

    points: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    normal: np.ndarray
    grad_ms: Optional[np.ndarray] = None


def surface_scalar_gradient(grid: SurfaceGrid, values: np.ndarray) -> np.ndarray:
    """Tangential gradient of a nodal scalar field, as a 3-vector per node."""
    d1 = grid.tangential_derivative(values[..., None], 0)[..., 0]
    d2 = grid.tangential_derivative(values[..., None], 1)[..., 0]
    return d1[..., None] * grid.tau1 + d2[..., None] * grid.tau2


def frame_sample(grid: SurfaceGrid, pert=None, trailing_axes: int = 0, index=None) -> FrameSample:
    """Gather frame arrays aligned with a field of shape (n_u, n_v, [extra], 3).

    trailing_axes inserts broadcast axes (e.g. 1 for thin fields with an
    s-layer axis).  index selects scattered nodes as (ii, jj) arrays.
    """
    grad = None
    if pert is not None and getattr(pert, "needs_ms_gradient", False):
        grad = pert.ms_gradient(grid)

    def pick(arr):
        out = arr[index] if index is not None else arr
        if trailing_axes:
            out = out.reshape(out.shape[:-1] + (1,) * trailing_axes + (3,))
        return out

    return FrameSample(
        points=pick(grid.points),
        tau1=pick(grid.tau1),
        tau2=pick(grid.tau2),
        normal=pick(grid.normal),
        grad_ms=pick(grad) if grad is not None else None,
    )


def right_cross_matrix(sigma: np.ndarray) -> np.ndarray:
    """Matrix R(sigma) with R(sigma) w = w x sigma."""
    s1, s2, s3 = sigma[..., 0], sigma[..., 1], sigma[..., 2]
    zero = np.zeros_like(s1)
    return np.stack(
        [
            np.stack([zero, s3, -s2], axis=-1),
            np.stack([-s3, zero, s1], axis=-1),
            np.stack([s2, -s1, zero], axis=-1),
        ],
        axis=-2,
    )


class Perturbation:
    """Base evaluator for the matrix field K(xi, sigma)."""

    linear_in_sigma = True
    needs_ms_gradient = False

    def kmatrix(self, ctx: FrameSample, sigma: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def kmatrix_dsigma(self, ctx: FrameSample, sigma: np.ndarray, dsigma: np.ndarray) -> np.ndarray:
        """Directional derivative of K in sigma; exact for linear presets."""
        if self.linear_in_sigma:
            return self.kmatrix(ctx, dsigma)
        step = 1e-7
        plus = self.kmatrix(ctx, sigma + step * dsigma)
        minus = self.kmatrix(ctx, sigma - step * dsigma)
        return (plus - minus) / (2.0 * step)


class ZeroPerturbation(Perturbation):
    def kmatrix(self, ctx, sigma):
        return np.zeros(sigma.shape + (3,))


class BulkDMI(Perturbation):
    def __init__(self, kappa: float):
        self.kappa = float(kappa)

    def kmatrix(self, ctx, sigma):
        return self.kappa * right_cross_matrix(sigma)


class InterfacialDMI(Perturbation):
    def __init__(self, kappa: float):
        self.kappa = float(kappa)

    def kmatrix(self, ctx, sigma):
        n = np.broadcast_to(ctx.normal, sigma.shape)
        c = np.sum(n * sigma, axis=-1)
        eye = np.eye(3).reshape((1,) * c.ndim + (3, 3))
        return self.kappa * (c[..., None, None] * eye - n[..., :, None] * sigma[..., None, :])


class AnisotropicDMI(Perturbation):
    def __init__(self, coupling):
        mat = np.asarray(coupling, dtype=float)
        if mat.shape != (3, 3) or not np.all(np.isfinite(mat)):
            raise PerturbationError("coupling must be a finite 3x3 matrix")
        self.coupling = mat

    def kmatrix(self, ctx, sigma):
        return right_cross_matrix(sigma) @ self.coupling


class TemperatureDMI(Perturbation):
    """Nonuniform saturation magnetization on top of anisotropic exchange."""

    needs_ms_gradient = True

    def __init__(self, saturation: ScalarSurfaceField, coupling):
        mat = np.asarray(coupling, dtype=float)
        if mat.shape != (3, 3) or not np.all(np.isfinite(mat)):
            raise PerturbationError("coupling must be a finite 3x3 matrix")
        self.saturation = saturation
        self.coupling = mat

    def ms_values(self, grid: SurfaceGrid) -> np.ndarray:
        values = self.saturation.evaluate(grid.points)
        if np.any(values <= 0):
            raise PerturbationError("saturation magnetization must stay positive on the surface")
        return values

    def ms_gradient(self, grid: SurfaceGrid) -> np.ndarray:
        return surface_scalar_gradient(grid, self.ms_values(grid))

    def kmatrix(self, ctx, sigma):
        if ctx.grad_ms is None:
            raise PerturbationError("frame sample lacks the saturation gradient")
        g = np.broadcast_to(ctx.grad_ms, sigma.shape)
        outer = sigma[..., :, None] * g[..., None, :]
        return outer + right_cross_matrix(sigma) @ self.coupling


class CustomPerturbation(Perturbation):
    """User hook: fn(ctx, sigma) -> (..., 3, 3); optional analytic derivative."""

    linear_in_sigma = False

    def __init__(self, fn: Callable, dfn: Callable = None, linear_in_sigma: bool = False):
        self.fn = fn
        self.dfn = dfn
        self.linear_in_sigma = linear_in_sigma

    def kmatrix(self, ctx, sigma):
        out = np.asarray(self.fn(ctx, sigma), dtype=float)
        if out.shape != sigma.shape + (3,):
            raise PerturbationError(f"custom K returned shape {out.shape}, expected {sigma.shape + (3,)}")
        if not np.all(np.isfinite(out)):
            raise PerturbationError("custom K returned non-finite entries")
        return out

    def kmatrix_dsigma(self, ctx, sigma, dsigma):
        if self.dfn is not None:
            return np.asarray(self.dfn(ctx, sigma, dsigma), dtype=float)
        return super().kmatrix_dsigma(ctx, sigma, dsigma)


class EllipticTensor:
    """Scalar elliptic multiplier a(xi); identity or a positive surface field."""

    def __init__(self, kind: str = "identity", field: ScalarSurfaceField = None):
        if kind not in ("identity", "scalar_field"):
            raise PerturbationError(f"unknown tensor kind {kind!r}")
        if kind == "scalar_field" and field is None:
            raise PerturbationError("scalar_field tensor needs a field")
        self.kind = kind
        self.field = field

    @property
    def is_identity(self):
        return self.kind == "identity"

    def values_on(self, grid: SurfaceGrid) -> np.ndarray:
        if self.is_identity:
            return np.ones(grid.shape)
        values = self.field.evaluate(grid.points)
        if np.min(values) <= 0.0:
            raise PerturbationError("elliptic tensor must be positive on the surface")
        return values

    def bounds_on(self, grid: SurfaceGrid):
        values = self.values_on(grid)
        return float(np.min(values)), float(np.max(values))


IDENTITY_TENSOR = EllipticTensor("identity")


def tangential_images(pert: Perturbation, grid: SurfaceGrid, sigma: np.ndarray):
    """Columns K(xi, sigma) tau_1 and K(xi, sigma) tau_2 per node.

    These are the tangential restrictions of the perturbation entering the
    first term of the limit energy; sigma has shape (n_u, n_v, 3).
    """
    ctx = frame_sample(grid, pert)
    kmat = pert.kmatrix(ctx, sigma)
    ktau1 = np.einsum("...ij,...j->...i", kmat, grid.tau1)
    ktau2 = np.einsum("...ij,...j->...i", kmat, grid.tau2)
    return ktau1, ktau2


def estimate_bound(pert: Perturbation, grid: SurfaceGrid, target, samples: int = 1000, seed: int = 0) -> float:
    """Empirical Lipschitz/size bound for K over random (node, sigma) draws.

    Returns 1.1 times the larger of max |K| and the max sampled difference
    quotient; diagnostic only.
    """
    if samples < 1000:
        raise PerturbationError("need at least 1000 samples for the bound estimate")
    rng = np.random.default_rng(seed)
    ii = rng.integers(0, grid.shape[0], size=samples)
    jj = rng.integers(0, grid.shape[1], size=samples)
    ctx = frame_sample(grid, pert, index=(ii, jj))
    sigma1 = target.project(rng.standard_normal((samples, 3)))
    sigma2 = target.project(rng.standard_normal((samples, 3)))
    k1 = pert.kmatrix(ctx, sigma1)
    k2 = pert.kmatrix(ctx, sigma2)
    fro1 = np.sqrt(np.sum(k1 * k1, axis=(-2, -1)))
    sep = np.sqrt(np.sum((sigma1 - sigma2) ** 2, axis=-1))
    keep = sep > 1e-9
    quot = np.sqrt(np.sum((k1 - k2) ** 2, axis=(-2, -1)))[keep] / sep[keep]
    bound = max(float(np.max(fro1)), float(np.max(quot)) if quot.size else 0.0)
    return 1.1 * bound


def make_perturbation(kind: str, **params) -> Perturbation:
    if kind == "zero":
        return ZeroPerturbation()
    if kind == "bulk_dmi":
        return BulkDMI(params["kappa"])
    if kind == "interfacial_dmi":
        return InterfacialDMI(params["kappa"])
    if kind == "anisotropic_dmi":
        return AnisotropicDMI(params["coupling"])
    if kind == "temperature":
        return TemperatureDMI(params["saturation"], params["coupling"])
    raise PerturbationError(f"unknown perturbation kind {kind!r}")
