"""Discrete film energies on the reference cylinder N x (-1, 1).

Three functionals are assembled on a fixed surface grid:

* the thin-film pull-back energy
      (1/2) int sum_i |a h_i d_{tau_i} u + K(u) tau_i|^2 sqrt(g)
    + (1/2) int |a (1/eps) d_s u + K(u) n_N|^2 sqrt(g)
  with metric factors sqrt(g) = (1 + eps s k1)(1 + eps s k2) and
  h_i = 1/(1 + eps s k_i);

* its limit on the surface,
      sum_i int |a d_{tau_i} u + K(u) tau_i|^2
    + int ((a^-1 K(u) n_N . n_M(u)) / (a^-1 n_M(u) . n_M(u)))^2,
  whose second term is the curvature-induced shape anisotropy (with the
  identity tensor it reduces exactly to (K(u) n_N . n_M(u))^2);

* an independent volume quadrature of the ambient chiral Dirichlet energy
  used to cross-check the pull-back: the 3D field Jacobian is recovered
  through a finite-difference Jacobian of the offset map instead of the
  closed-form metric factors.

Quadrature: midpoint weights on the surface chart, trapezoid in s.
Gradients are exact adjoints of the same difference stencils, so they match
finite differences of the discrete energy to roundoff-limited accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _thin_kernels
from .perturbations import frame_sample, IDENTITY_TENSOR
from .surfaces import SurfaceGrid, apply_difference, difference_matrix


class EnergyError(ValueError):
    """Layout/grid mismatch or out-of-range evaluation request."""


@dataclass(frozen=True)
class EnergyBreakdown:
    """Tangential part plus the normal (thin) or anisotropy (limit) part."""

    tangential: float
    normal_or_anisotropy: float
    total: float

    @classmethod
    def of(cls, tangential: float, second: float) -> "EnergyBreakdown":
        return cls(tangential=float(tangential), normal_or_anisotropy=float(second),
                   total=float(tangential) + float(second))

    def as_dict(self):
        return {
            "tangential": self.tangential,
            "normal_or_anisotropy": self.normal_or_anisotropy,
            "total": self.total,
        }


def s_quadrature(n_s: int):
    """Uniform s-layers on [-1, 1] with trapezoid weights and a stencil matrix."""
    if n_s < 4:
        raise EnergyError(f"need at least 4 s-layers, got {n_s}")
    s = np.linspace(-1.0, 1.0, n_s)
    ds = 2.0 / (n_s - 1)
    weights = np.full(n_s, ds)
    weights[0] = weights[-1] = 0.5 * ds
    return s, weights, difference_matrix(n_s, ds, periodic=False)


@dataclass
class DirectorField:
    """Grid of direction vectors, either on N or on N x s-layers."""

    values: np.ndarray
    layout: str  # "surface" | "thin"

    def __post_init__(self):
        if self.layout == "surface":
            if self.values.ndim != 3 or self.values.shape[-1] != 3:
                raise EnergyError("surface field needs shape (n_u, n_v, 3)")
        elif self.layout == "thin":
            if self.values.ndim != 4 or self.values.shape[-1] != 3:
                raise EnergyError("thin field needs shape (n_u, n_v, n_s, 3)")
            if self.values.shape[2] < 4:
                raise EnergyError("thin field needs at least 4 s-layers")
        else:
            raise EnergyError(f"unknown layout {self.layout!r}")

    @classmethod
    def surface(cls, values, target=None):
        values = np.asarray(values, dtype=float)
        if target is not None:
            values = target.project(values)
        return cls(values=values, layout="surface")

    @classmethod
    def thin(cls, values, target=None):
        values = np.asarray(values, dtype=float)
        if target is not None:
            values = target.project(values)
        return cls(values=values, layout="thin")

    @property
    def n_s(self):
        if self.layout != "thin":
            raise EnergyError("surface fields carry no s-layers")
        return self.values.shape[2]

    def s_layers(self):
        return np.linspace(-1.0, 1.0, self.n_s)


def _basis_sigma(ctx_shape):
    return [np.broadcast_to(np.eye(3)[j], ctx_shape) for j in range(3)]


def _frame_basis(grid, pert):
    """Per-node matrices B with row j = K(e_j) applied to tau_1, tau_2, n_N.

    Valid whenever K is linear in sigma; then K(sigma) tau_i = sigma @ B and
    the gradient's K-coupling is the transpose contraction.
    """
    ctx = frame_sample(grid, pert)
    kd = [pert.kmatrix(ctx, sig) for sig in _basis_sigma(grid.normal.shape)]
    btau1 = np.stack([np.einsum("...ij,...j->...i", k, grid.tau1) for k in kd], axis=-2)
    btau2 = np.stack([np.einsum("...ij,...j->...i", k, grid.tau2) for k in kd], axis=-2)
    bn = np.stack([np.einsum("...ij,...j->...i", k, grid.normal) for k in kd], axis=-2)
    return btau1, btau2, bn


class LimitEnergy:
    """Surface limit functional bound to (grid, target, perturbation, tensor)."""

    layout = "surface"

    def __init__(self, grid: SurfaceGrid, target, pert, tensor=None):
        self.grid = grid
        self.target = target
        self.pert = pert
        self.tensor = tensor if tensor is not None else IDENTITY_TENSOR
        self.ctx = frame_sample(grid, pert)
        self.weight = grid.area_weight
        self.a = None if self.tensor.is_identity else self.tensor.values_on(grid)
        self.basis = _frame_basis(grid, pert) if pert.linear_in_sigma else None

    def _check(self, values):
        if values.shape != self.grid.shape + (3,):
            raise EnergyError(f"field shape {values.shape} does not match surface grid {self.grid.shape}")

    def _apply_k(self, values):
        if self.basis is not None:
            row = values[..., None, :]
            ktau1 = (row @ self.basis[0])[..., 0, :]
            ktau2 = (row @ self.basis[1])[..., 0, :]
            kn = (row @ self.basis[2])[..., 0, :]
        else:
            kmat = self.pert.kmatrix(self.ctx, values)
            ktau1 = np.einsum("...ij,...j->...i", kmat, self.grid.tau1)
            ktau2 = np.einsum("...ij,...j->...i", kmat, self.grid.tau2)
            kn = np.einsum("...ij,...j->...i", kmat, self.grid.normal)
        return ktau1, ktau2, kn

    def _forward(self, values):
        grid = self.grid
        g1 = grid.tangential_derivative(values, 0)
        g2 = grid.tangential_derivative(values, 1)
        ktau1, ktau2, kn = self._apply_k(values)
        if self.a is not None:
            a1 = self.a[..., None]
            g1 *= a1
            g2 *= a1
        g1 += ktau1
        g2 += ktau2
        n_m = self.target.normal(values)
        if self.a is None:
            rho = np.sum(kn * n_m, axis=-1)
            parts = (rho,)
        else:
            num = np.sum(kn * n_m, axis=-1) / self.a
            den = np.sum(n_m * n_m, axis=-1) / self.a
            rho = num / den
            parts = (rho, num, den)
        return g1, g2, kn, n_m, parts

    def breakdown(self, values) -> EnergyBreakdown:
        self._check(values)
        g1, g2, _, _, parts = self._forward(values)
        tangential = (np.einsum("uvk,uvk,uv->", g1, g1, self.weight)
                      + np.einsum("uvk,uvk,uv->", g2, g2, self.weight))
        rho = parts[0]
        aniso = np.einsum("uv,uv,uv->", rho, rho, self.weight)
        return EnergyBreakdown.of(tangential, aniso)

    def total(self, values) -> float:
        return self.breakdown(values).total

    def _kd_images(self, values):
        """Row-matrix images of the basis directions under K' at the iterate."""
        if self.basis is not None:
            return self.basis
        grid = self.grid
        kd = [self.pert.kmatrix_dsigma(self.ctx, values, sig)
              for sig in _basis_sigma(values.shape)]
        btau1 = np.stack([np.einsum("...ij,...j->...i", k, grid.tau1) for k in kd], axis=-2)
        btau2 = np.stack([np.einsum("...ij,...j->...i", k, grid.tau2) for k in kd], axis=-2)
        bn = np.stack([np.einsum("...ij,...j->...i", k, grid.normal) for k in kd], axis=-2)
        return btau1, btau2, bn

    def gradient(self, values) -> np.ndarray:
        return self.breakdown_and_gradient(values)[1]

    def breakdown_and_gradient(self, values):
        self._check(values)
        grid = self.grid
        g1, g2, kn, n_m, parts = self._forward(values)
        w = self.weight
        rho = parts[0]
        tangential = (np.einsum("uvk,uvk,uv->", g1, g1, w)
                      + np.einsum("uvk,uvk,uv->", g2, g2, w))
        bd = EnergyBreakdown.of(tangential, np.einsum("uv,uv,uv->", rho, rho, w))

        btau1, btau2, bn = self._kd_images(values)
        y1 = 2.0 * w[..., None] * g1
        y2 = 2.0 * w[..., None] * g2
        if self.a is None:
            grad = grid.tangential_derivative_adjoint(y1, 0)
            grad += grid.tangential_derivative_adjoint(y2, 1)
        else:
            a1 = self.a[..., None]
            grad = grid.tangential_derivative_adjoint(a1 * y1, 0)
            grad += grid.tangential_derivative_adjoint(a1 * y2, 1)
        grad += (y1[..., None, :] @ np.swapaxes(btau1, -1, -2))[..., 0, :]
        grad += (y2[..., None, :] @ np.swapaxes(btau2, -1, -2))[..., 0, :]

        if self.a is None:
            coeff = 2.0 * w * rho
            grad += coeff[..., None] * (n_m[..., None, :] @ np.swapaxes(bn, -1, -2))[..., 0, :]
            grad += coeff[..., None] * self.target.normal_pullback(values, kn)
        else:
            _, num, den = parts
            vec_num = self.target.normal_pullback(values, kn) / self.a[..., None]
            vec_num += (n_m[..., None, :] @ np.swapaxes(bn, -1, -2))[..., 0, :] / self.a[..., None]
            vec_den = 2.0 * self.target.normal_pullback(values, n_m) / self.a[..., None]
            coeff = 2.0 * w * rho / (den * den)
            grad += coeff[..., None] * (
                vec_num * den[..., None] - num[..., None] * vec_den
            )
        return bd, grad


class ThinFilmEnergy:
    """Pull-back functional on N x (-1, 1) bound to (grid, perturbation, eps)."""

    layout = "thin"

    def __init__(self, grid: SurfaceGrid, pert, eps: float, n_s: int, tensor=None):
        grid.require_eps(eps)
        self.grid = grid
        self.pert = pert
        self.eps = float(eps)
        self.tensor = tensor if tensor is not None else IDENTITY_TENSOR
        self.s, self.s_weights, self.diff_s = s_quadrature(n_s)
        self.n_s = n_s
        es = eps * self.s[None, None, :]
        f1 = 1.0 + es * grid.kappa1[..., None]
        f2 = 1.0 + es * grid.kappa2[..., None]
        self.h1 = 1.0 / f1
        self.h2 = 1.0 / f2
        self.sqrtg = f1 * f2
        self.weight = grid.area_weight[..., None] * self.s_weights[None, None, :] * self.sqrtg
        self.ctx = frame_sample(grid, pert, trailing_axes=1)
        self.tau1 = grid.tau1[:, :, None, :]
        self.tau2 = grid.tau2[:, :, None, :]
        self.normal = grid.normal[:, :, None, :]
        self.a = None if self.tensor.is_identity else self.tensor.values_on(grid)[:, :, None]
        self.basis = _frame_basis(grid, pert) if pert.linear_in_sigma else None
        self._kernel = None
        if self.basis is not None and _thin_kernels.HAVE_NUMBA:
            self._kernel = {
                "u": _thin_kernels.sparse_rows(grid.diff_u),
                "v": _thin_kernels.sparse_rows(grid.diff_v),
                "s": _thin_kernels.sparse_rows(self.diff_s),
                "ut": _thin_kernels.sparse_rows(grid.diff_u.T),
                "vt": _thin_kernels.sparse_rows(grid.diff_v.T),
                "st": _thin_kernels.sparse_rows(self.diff_s.T),
                "inv_su": np.ascontiguousarray(1.0 / grid.stretch_u),
                "inv_sv": np.ascontiguousarray(1.0 / grid.stretch_v),
                "h1": np.ascontiguousarray(self.h1),
                "h2": np.ascontiguousarray(self.h2),
                "weight": np.ascontiguousarray(self.weight),
                "basis": tuple(np.ascontiguousarray(b) for b in self.basis),
                "a": np.ascontiguousarray(
                    np.ones(grid.shape) if self.a is None else self.a[:, :, 0]
                ),
            }

    def _kernel_energy(self, values):
        kd = self._kernel
        bt1, bt2, bn = kd["basis"]
        return _thin_kernels.thin_energy_kernel(
            np.ascontiguousarray(values), *kd["u"], *kd["v"], *kd["s"],
            kd["inv_su"], kd["inv_sv"], kd["h1"], kd["h2"], kd["weight"],
            bt1, bt2, bn, kd["a"], 1.0 / self.eps,
        )

    def _kernel_energy_gradient(self, values):
        kd = self._kernel
        bt1, bt2, bn = kd["basis"]
        shape = values.shape
        g1buf = np.empty(shape)
        g2buf = np.empty(shape)
        gsbuf = np.empty(shape)
        grad = np.empty(shape)
        tang, norm = _thin_kernels.thin_energy_gradient_kernel(
            np.ascontiguousarray(values), *kd["u"], *kd["v"], *kd["s"],
            *kd["ut"], *kd["vt"], *kd["st"],
            kd["inv_su"], kd["inv_sv"], kd["h1"], kd["h2"], kd["weight"],
            bt1, bt2, bn, kd["a"], 1.0 / self.eps,
            g1buf, g2buf, gsbuf, grad,
        )
        return tang, norm, grad

    def _check(self, values):
        want = self.grid.shape + (self.n_s, 3)
        if values.shape != want:
            raise EnergyError(f"field shape {values.shape} does not match thin layout {want}")

    def _apply_k(self, values):
        if self.basis is not None:
            ktau1 = values @ self.basis[0]
            ktau2 = values @ self.basis[1]
            kn = values @ self.basis[2]
        else:
            kmat = self.pert.kmatrix(self.ctx, values)
            ktau1 = np.einsum("...ij,...j->...i", kmat, self.tau1)
            ktau2 = np.einsum("...ij,...j->...i", kmat, self.tau2)
            kn = np.einsum("...ij,...j->...i", kmat, self.normal)
        return ktau1, ktau2, kn

    def _forward(self, values):
        grid = self.grid
        g1 = grid.tangential_derivative(values, 0)
        g2 = grid.tangential_derivative(values, 1)
        gs = apply_difference(self.diff_s, values, 2)
        ktau1, ktau2, kn = self._apply_k(values)
        g1 *= self.h1[..., None]
        g2 *= self.h2[..., None]
        gs /= self.eps
        if self.a is not None:
            a1 = self.a[..., None]
            g1 *= a1
            g2 *= a1
            gs *= a1
        g1 += ktau1
        g2 += ktau2
        gs += kn
        return g1, g2, gs

    def breakdown(self, values) -> EnergyBreakdown:
        self._check(values)
        if self._kernel is not None:
            return EnergyBreakdown.of(*self._kernel_energy(values))
        g1, g2, gs = self._forward(values)
        w = self.weight
        tangential = 0.5 * (np.einsum("uvsk,uvsk,uvs->", g1, g1, w)
                            + np.einsum("uvsk,uvsk,uvs->", g2, g2, w))
        normal = 0.5 * np.einsum("uvsk,uvsk,uvs->", gs, gs, w)
        return EnergyBreakdown.of(tangential, normal)

    def breakdown_reference(self, values) -> EnergyBreakdown:
        """Pure-numpy evaluation, kept as the cross-check for the kernel."""
        self._check(values)
        g1, g2, gs = self._forward(values)
        w = self.weight
        tangential = 0.5 * (np.einsum("uvsk,uvsk,uvs->", g1, g1, w)
                            + np.einsum("uvsk,uvsk,uvs->", g2, g2, w))
        normal = 0.5 * np.einsum("uvsk,uvsk,uvs->", gs, gs, w)
        return EnergyBreakdown.of(tangential, normal)

    def total(self, values) -> float:
        return self.breakdown(values).total

    def seminorm_shares(self, values):
        """(tangential, s) squared H^1 seminorms of the raw field on N x I."""
        self._check(values)
        grid = self.grid
        d1 = grid.tangential_derivative(values, 0)
        d2 = grid.tangential_derivative(values, 1)
        dsv = apply_difference(self.diff_s, values, 2)
        w = grid.area_weight[..., None] * self.s_weights[None, None, :]
        tang = float(np.sum(w * (np.sum(d1 * d1, axis=-1) + np.sum(d2 * d2, axis=-1))))
        sder = float(np.sum(w * np.sum(dsv * dsv, axis=-1)))
        return tang, sder

    def gradient(self, values) -> np.ndarray:
        return self.breakdown_and_gradient(values)[1]

    def breakdown_and_gradient(self, values):
        self._check(values)
        if self._kernel is not None:
            tang, norm, grad = self._kernel_energy_gradient(values)
            return EnergyBreakdown.of(tang, norm), grad
        return self.breakdown_and_gradient_reference(values)

    def breakdown_and_gradient_reference(self, values):
        """Pure-numpy fused evaluation, kept as the kernel cross-check."""
        self._check(values)
        grid = self.grid
        g1, g2, gs = self._forward(values)
        w = self.weight
        tangential = 0.5 * (np.einsum("uvsk,uvsk,uvs->", g1, g1, w)
                            + np.einsum("uvsk,uvsk,uvs->", g2, g2, w))
        normal = 0.5 * np.einsum("uvsk,uvsk,uvs->", gs, gs, w)
        bd = EnergyBreakdown.of(tangential, normal)

        w1 = w[..., None]
        g1 *= w1
        g2 *= w1
        gs *= w1
        if self.basis is not None:
            grad = g1 @ np.swapaxes(self.basis[0], -1, -2)
            grad += g2 @ np.swapaxes(self.basis[1], -1, -2)
            grad += gs @ np.swapaxes(self.basis[2], -1, -2)
        else:
            grad = np.zeros_like(values)
            kd = [self.pert.kmatrix_dsigma(self.ctx, values, sig)
                  for sig in _basis_sigma(values.shape)]
            for j in range(3):
                grad[..., j] += (
                    np.sum(g1 * np.einsum("...ij,...j->...i", kd[j], self.tau1), axis=-1)
                    + np.sum(g2 * np.einsum("...ij,...j->...i", kd[j], self.tau2), axis=-1)
                    + np.sum(gs * np.einsum("...ij,...j->...i", kd[j], self.normal), axis=-1)
                )
        g1 *= self.h1[..., None]
        g2 *= self.h2[..., None]
        gs /= self.eps
        if self.a is not None:
            a1 = self.a[..., None]
            g1 *= a1
            g2 *= a1
            gs *= a1
        grad += grid.tangential_derivative_adjoint(g1, 0)
        grad += grid.tangential_derivative_adjoint(g2, 1)
        grad += apply_difference(self.diff_s.T, gs, 2)
        return bd, grad


def thin_film_energy(grid, pert, eps, field: DirectorField, tensor=None) -> EnergyBreakdown:
    if field.layout != "thin":
        raise EnergyError("thin-film energy needs a thin field")
    model = ThinFilmEnergy(grid, pert, eps, field.n_s, tensor=tensor)
    return model.breakdown(field.values)


def limit_energy(grid, target, pert, field: DirectorField) -> EnergyBreakdown:
    if field.layout != "surface":
        raise EnergyError("limit energy needs a surface field")
    return LimitEnergy(grid, target, pert).breakdown(field.values)


def limit_energy_general(grid, target, pert, tensor, field: DirectorField) -> EnergyBreakdown:
    if field.layout != "surface":
        raise EnergyError("limit energy needs a surface field")
    return LimitEnergy(grid, target, pert, tensor=tensor).breakdown(field.values)


def energy_gradient(grid, target, pert, field: DirectorField, eps=None, tensor=None) -> np.ndarray:
    """Euclidean gradient of the matching energy form w.r.t. node values."""
    if field.layout == "thin":
        if eps is None:
            raise EnergyError("thin gradient needs eps")
        return ThinFilmEnergy(grid, pert, eps, field.n_s, tensor=tensor).gradient(field.values)
    return LimitEnergy(grid, target, pert, tensor=tensor).gradient(field.values)


def optimal_corrector(grid, target, pert, values: np.ndarray, tensor=None) -> np.ndarray:
    """Tangent vector minimizing the normal-term density per node.

    With the identity tensor this is (n_M(u) (x) n_M(u) - I) K(u) n_N; a
    scalar tensor a rescales it by 1/a.
    """
    ctx = frame_sample(grid, pert)
    kmat = pert.kmatrix(ctx, values)
    kn = np.einsum("...ij,...j->...i", kmat, grid.normal)
    n_m = target.normal(values)
    d0 = np.sum(kn * n_m, axis=-1, keepdims=True) * n_m - kn
    if tensor is not None and not tensor.is_identity:
        d0 = d0 / tensor.values_on(grid)[..., None]
    return d0


def recovery_field(grid, target, u0: np.ndarray, d0: np.ndarray, eps: float, n_s: int) -> DirectorField:
    """Thin field pi_M(u0 + eps * s * d0); exact copy of u0 where eps*s*d0 = 0."""
    grid.require_eps(eps)
    d0_max = float(np.max(np.sqrt(np.sum(d0 * d0, axis=-1)))) if d0.size else 0.0
    if eps * d0_max >= target.admissible_radius:
        raise EnergyError(
            f"eps={eps} too large for the target neighborhood: "
            f"eps*max|d0|={eps * d0_max:.3g} >= {target.admissible_radius:.3g}"
        )
    s, _, _ = s_quadrature(n_s)
    values = np.empty(grid.shape + (n_s, 3))
    for k, sk in enumerate(s):
        if sk == 0.0 or d0_max == 0.0:
            values[:, :, k, :] = u0
        else:
            values[:, :, k, :] = target.project(u0 + (eps * sk) * d0)
    return DirectorField(values=values, layout="thin")


def h1_distance(grid, thin_field: DirectorField, surface_field: DirectorField) -> float:
    """H^1(N x I) distance between a thin field and a surface field extended
    constantly in s (plain product measure, no metric factors)."""
    if thin_field.layout != "thin" or surface_field.layout != "surface":
        raise EnergyError("h1_distance expects (thin, surface) fields")
    if thin_field.values.shape[:2] != grid.shape or surface_field.values.shape[:2] != grid.shape:
        raise EnergyError("field grids do not match")
    diff = thin_field.values - surface_field.values[:, :, None, :]
    _, s_weights, diff_s = s_quadrature(thin_field.n_s)
    d1 = grid.tangential_derivative(diff, 0)
    d2 = grid.tangential_derivative(diff, 1)
    dsd = apply_difference(diff_s, diff, 2)
    w = grid.area_weight[..., None] * s_weights[None, None, :]
    dens = (
        np.sum(diff * diff, axis=-1)
        + np.sum(d1 * d1, axis=-1)
        + np.sum(d2 * d2, axis=-1)
        + np.sum(dsd * dsd, axis=-1)
    )
    return float(np.sqrt(np.sum(w * dens)))


def _invert_3x3(mat: np.ndarray) -> np.ndarray:
    """Batched closed-form (adjugate) inverse of (..., 3, 3) arrays."""
    a = mat[..., 0, 0]
    b = mat[..., 0, 1]
    c = mat[..., 0, 2]
    d = mat[..., 1, 0]
    e = mat[..., 1, 1]
    f = mat[..., 1, 2]
    g = mat[..., 2, 0]
    h = mat[..., 2, 1]
    i = mat[..., 2, 2]
    co_a = e * i - f * h
    co_b = f * g - d * i
    co_c = d * h - e * g
    det = a * co_a + b * co_b + c * co_c
    inv = np.empty_like(mat)
    inv[..., 0, 0] = co_a
    inv[..., 0, 1] = c * h - b * i
    inv[..., 0, 2] = b * f - c * e
    inv[..., 1, 0] = co_b
    inv[..., 1, 1] = a * i - c * g
    inv[..., 1, 2] = c * d - a * f
    inv[..., 2, 0] = co_c
    inv[..., 2, 1] = b * g - a * h
    inv[..., 2, 2] = a * e - b * d
    inv /= det[..., None, None]
    return inv


def direct_tubular_energy(grid, pert, eps, field: DirectorField) -> float:
    """Ambient chiral Dirichlet energy by direct volume quadrature.

    The 3D Jacobian of the film field is recovered by inverting a
    finite-difference Jacobian of the offset map at grid resolution, so the
    frame decomposition and tangential/normal coefficients of the pull-back
    never enter; only the volume weights reuse eps*sqrt(g).
    """
    if field.layout != "thin":
        raise EnergyError("direct quadrature needs a thin field")
    grid.require_eps(eps)
    values = field.values
    n_s = field.n_s
    s, s_weights, diff_s = s_quadrature(n_s)
    positions = grid.tubular_points(eps, s)

    dp1 = apply_difference(grid.diff_u, positions, 0)
    dp2 = apply_difference(grid.diff_v, positions, 1)
    dps = apply_difference(diff_s, positions, 2)
    jac = np.stack([dp1, dp2, dps], axis=-1)

    du1 = apply_difference(grid.diff_u, values, 0)
    du2 = apply_difference(grid.diff_v, values, 1)
    dus = apply_difference(diff_s, values, 2)
    mu = np.stack([du1, du2, dus], axis=-1)

    dv = mu @ _invert_3x3(jac)
    ctx = frame_sample(grid, pert, trailing_axes=1)
    kmat = pert.kmatrix(ctx, values)
    dens = np.sum((dv + kmat) ** 2, axis=(-2, -1))

    es = eps * s[None, None, :]
    sqrtg = (1.0 + es * grid.kappa1[..., None]) * (1.0 + es * grid.kappa2[..., None])
    w = grid.area_weight[..., None] * s_weights[None, None, :] * sqrtg
    return float(0.5 * np.sum(w * dens))
