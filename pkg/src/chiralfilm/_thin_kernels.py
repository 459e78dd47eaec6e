"""Jitted inner loops for the thin-film energy and its gradient.

Only the linear-in-sigma perturbation path is accelerated; the numpy
implementation in energies.py stays the reference (tests pin the two paths
against each other).  Stencils arrive as padded sparse rows extracted from
the same dense difference matrices the numpy path applies, so both paths
evaluate identical coefficient sets.

Kernels run single-threaded with plain IEEE arithmetic (no fastmath), which
keeps repeated runs bit-identical.
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap


def sparse_rows(matrix: np.ndarray, width: int = 4):
    """Pad each matrix row to (index, coefficient) pairs of fixed width."""
    n = matrix.shape[0]
    idx = np.zeros((n, width), dtype=np.int64)
    coef = np.zeros((n, width), dtype=np.float64)
    for i in range(n):
        nz = np.flatnonzero(matrix[i])
        if nz.size > width:
            raise ValueError(f"stencil row {i} has {nz.size} entries, width {width}")
        idx[i, : nz.size] = nz
        coef[i, : nz.size] = matrix[i, nz]
    return idx, coef


@njit(cache=True)
def thin_energy_kernel(values, iu, cu, iv, cv, isx, cs,
                       inv_su, inv_sv, h1, h2, weight, bt1, bt2, bn,
                       a_vals, inv_eps):
    nu, nv, ns, _ = values.shape
    width = iu.shape[1]
    tang = 0.0
    norm = 0.0
    for i in range(nu):
        for j in range(nv):
            aij = a_vals[i, j]
            for k in range(ns):
                w = weight[i, j, k]
                f1 = aij * h1[i, j, k] * inv_su[i, j]
                f2 = aij * h2[i, j, k] * inv_sv[i, j]
                fs = aij * inv_eps
                e1 = 0.0
                e2 = 0.0
                es = 0.0
                for m in range(3):
                    d1 = 0.0
                    d2 = 0.0
                    dsv = 0.0
                    for t in range(width):
                        d1 += cu[i, t] * values[iu[i, t], j, k, m]
                        d2 += cv[j, t] * values[i, iv[j, t], k, m]
                        dsv += cs[k, t] * values[i, j, isx[k, t], m]
                    kt1 = 0.0
                    kt2 = 0.0
                    kn = 0.0
                    for p in range(3):
                        sp = values[i, j, k, p]
                        kt1 += sp * bt1[i, j, p, m]
                        kt2 += sp * bt2[i, j, p, m]
                        kn += sp * bn[i, j, p, m]
                    g1 = f1 * d1 + kt1
                    g2 = f2 * d2 + kt2
                    gs = fs * dsv + kn
                    e1 += g1 * g1
                    e2 += g2 * g2
                    es += gs * gs
                tang += 0.5 * w * (e1 + e2)
                norm += 0.5 * w * es
    return tang, norm


@njit(cache=True)
def thin_energy_gradient_kernel(values, iu, cu, iv, cv, isx, cs,
                                iut, cut, ivt, cvt, ist, cst,
                                inv_su, inv_sv, h1, h2, weight, bt1, bt2, bn,
                                a_vals, inv_eps, g1buf, g2buf, gsbuf, grad):
    nu, nv, ns, _ = values.shape
    width = iu.shape[1]
    tang = 0.0
    norm = 0.0
    for i in range(nu):
        for j in range(nv):
            aij = a_vals[i, j]
            for k in range(ns):
                w = weight[i, j, k]
                f1 = aij * h1[i, j, k] * inv_su[i, j]
                f2 = aij * h2[i, j, k] * inv_sv[i, j]
                fs = aij * inv_eps
                e1 = 0.0
                e2 = 0.0
                es = 0.0
                for m in range(3):
                    d1 = 0.0
                    d2 = 0.0
                    dsv = 0.0
                    for t in range(width):
                        d1 += cu[i, t] * values[iu[i, t], j, k, m]
                        d2 += cv[j, t] * values[i, iv[j, t], k, m]
                        dsv += cs[k, t] * values[i, j, isx[k, t], m]
                    kt1 = 0.0
                    kt2 = 0.0
                    kn = 0.0
                    for p in range(3):
                        sp = values[i, j, k, p]
                        kt1 += sp * bt1[i, j, p, m]
                        kt2 += sp * bt2[i, j, p, m]
                        kn += sp * bn[i, j, p, m]
                    g1 = f1 * d1 + kt1
                    g2 = f2 * d2 + kt2
                    gs = fs * dsv + kn
                    e1 += g1 * g1
                    e2 += g2 * g2
                    es += gs * gs
                    g1buf[i, j, k, m] = w * g1
                    g2buf[i, j, k, m] = w * g2
                    gsbuf[i, j, k, m] = w * gs
                tang += 0.5 * w * (e1 + e2)
                norm += 0.5 * w * es

    # K-coupling: grad_p += sum_m y_m * B[p, m] for each basis row-matrix
    for i in range(nu):
        for j in range(nv):
            for k in range(ns):
                for p in range(3):
                    acc = 0.0
                    for m in range(3):
                        acc += (g1buf[i, j, k, m] * bt1[i, j, p, m]
                                + g2buf[i, j, k, m] * bt2[i, j, p, m]
                                + gsbuf[i, j, k, m] * bn[i, j, p, m])
                    grad[i, j, k, p] = acc

    # scale cotangents in place for the stencil transposes
    for i in range(nu):
        for j in range(nv):
            aij = a_vals[i, j]
            for k in range(ns):
                f1 = aij * h1[i, j, k] * inv_su[i, j]
                f2 = aij * h2[i, j, k] * inv_sv[i, j]
                fs = aij * inv_eps
                for m in range(3):
                    g1buf[i, j, k, m] *= f1
                    g2buf[i, j, k, m] *= f2
                    gsbuf[i, j, k, m] *= fs

    for i in range(nu):
        for j in range(nv):
            for k in range(ns):
                for m in range(3):
                    acc = grad[i, j, k, m]
                    for t in range(width):
                        acc += cut[i, t] * g1buf[iut[i, t], j, k, m]
                        acc += cvt[j, t] * g2buf[i, ivt[j, t], k, m]
                        acc += cst[k, t] * gsbuf[i, j, ist[k, t], m]
                    grad[i, j, k, m] = acc
    return tang, norm
