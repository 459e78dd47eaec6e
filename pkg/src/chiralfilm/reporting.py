"""Deterministic serialization of reports, fields, and frame tables.

JSON is written with sorted keys and floats at 17 significant digits, so a
rerun with the same seed and thread count produces byte-identical files.
Fields are stored as plot-ready CSV keyed by chart coordinates.
"""

from __future__ import annotations

import io
import os

import numpy as np

from .energies import DirectorField, EnergyError, s_quadrature


class ReportError(RuntimeError):
    """I/O failure while writing or reading artifacts."""


def format_number(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if np.isnan(x):
        return '"NaN"'
    if np.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    return format(x, ".17g")


def dumps_canonical(obj, indent: int = 0) -> str:
    """JSON text with sorted keys and fixed float formatting."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return '"' + obj.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'
    if isinstance(obj, (bool, int, float, np.integer, np.floating)):
        return format_number(obj)
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [dumps_canonical(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(inner + it for it in items) + "\n" + pad + "]"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        keys = sorted(obj.keys())
        items = [
            inner + dumps_canonical(str(k)) + ": " + dumps_canonical(obj[k], indent + 1)
            for k in keys
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    raise ReportError(f"cannot serialize object of type {type(obj).__name__}")


def write_json(obj, path: str):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as handle:
            handle.write(dumps_canonical(obj))
            handle.write("\n")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def field_to_csv(grid, field: DirectorField) -> str:
    """Field as CSV rows keyed by chart coordinates (u-major ordering)."""
    out = io.StringIO()
    if field.layout == "surface":
        out.write("u,v,ux,uy,uz\n")
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                vec = field.values[i, j]
                out.write(f"{_fmt(grid.u[i])},{_fmt(grid.v[j])},"
                          f"{_fmt(vec[0])},{_fmt(vec[1])},{_fmt(vec[2])}\n")
    else:
        s = field.s_layers()
        out.write("u,v,s,ux,uy,uz\n")
        for i in range(grid.shape[0]):
            for j in range(grid.shape[1]):
                for k in range(field.n_s):
                    vec = field.values[i, j, k]
                    out.write(f"{_fmt(grid.u[i])},{_fmt(grid.v[j])},{_fmt(s[k])},"
                              f"{_fmt(vec[0])},{_fmt(vec[1])},{_fmt(vec[2])}\n")
    return out.getvalue()


def write_field_csv(grid, field: DirectorField, path: str):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as handle:
            handle.write(field_to_csv(grid, field))
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def read_field_csv(grid, path: str) -> DirectorField:
    """Load a field CSV written by write_field_csv and validate its grid."""
    try:
        with open(path) as handle:
            header = handle.readline().strip().split(",")
            rows = np.loadtxt(handle, delimiter=",", ndmin=2)
    except OSError as exc:
        raise ReportError(f"cannot read {path}: {exc}") from exc
    n_u, n_v = grid.shape
    if header == ["u", "v", "ux", "uy", "uz"]:
        if rows.shape != (n_u * n_v, 5):
            raise EnergyError(
                f"field file has {rows.shape[0]} rows, grid expects {n_u * n_v}"
            )
        coords_u = rows[:, 0].reshape(n_u, n_v)
        coords_v = rows[:, 1].reshape(n_u, n_v)
        if (np.max(np.abs(coords_u - grid.u[:, None])) > 1e-9
                or np.max(np.abs(coords_v - grid.v[None, :])) > 1e-9):
            raise EnergyError("field file coordinates do not match the configured grid")
        return DirectorField(values=rows[:, 2:].reshape(n_u, n_v, 3), layout="surface")
    if header == ["u", "v", "s", "ux", "uy", "uz"]:
        total = rows.shape[0]
        if total % (n_u * n_v) != 0:
            raise EnergyError("thin field file rows do not tile the configured grid")
        n_s = total // (n_u * n_v)
        s_ref, _, _ = s_quadrature(n_s)
        coords = rows[:, :3].reshape(n_u, n_v, n_s, 3)
        if (np.max(np.abs(coords[..., 0] - grid.u[:, None, None])) > 1e-9
                or np.max(np.abs(coords[..., 1] - grid.v[None, :, None])) > 1e-9
                or np.max(np.abs(coords[..., 2] - s_ref[None, None, :])) > 1e-9):
            raise EnergyError("thin field file coordinates do not match the configured grid")
        return DirectorField(values=rows[:, 3:].reshape(n_u, n_v, n_s, 3), layout="thin")
    raise EnergyError(f"unrecognized field header {header}")


def frame_table_csv(grid) -> str:
    """Frame dump: chart coords, point, principal frame, curvatures, weight."""
    out = io.StringIO()
    out.write("u,v,x,y,z,t1x,t1y,t1z,t2x,t2y,t2z,nx,ny,nz,k1,k2,w\n")
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            cells = [grid.u[i], grid.v[j], *grid.points[i, j], *grid.tau1[i, j],
                     *grid.tau2[i, j], *grid.normal[i, j], grid.kappa1[i, j],
                     grid.kappa2[i, j], grid.area_weight[i, j]]
            out.write(",".join(_fmt(c) for c in cells) + "\n")
    return out.getvalue()


def sweep_csv(report) -> str:
    """Plot-ready summary: one row per film thickness."""
    out = io.StringIO()
    out.write("eps,min_energy_eps,min_energy_limit,gap,recovery_gap,h1_dist\n")
    e_limit = report.limit_energy["total"]
    for entry in report.entries:
        if entry.failed:
            out.write(f"{_fmt(entry.eps)},failed,{_fmt(e_limit)},,,\n")
            continue
        rec_gap = entry.recovery_energy - e_limit
        out.write(
            f"{_fmt(entry.eps)},{_fmt(entry.min_energy['total'])},{_fmt(e_limit)},"
            f"{_fmt(entry.gap)},{_fmt(rec_gap)},{_fmt(entry.h1_to_limit)}\n"
        )
    return out.getvalue()


def trace_csv(report) -> str:
    """Per-iteration minimizer trace (iteration, energy, grad norm)."""
    out = io.StringIO()
    out.write("iteration,energy,grad_norm\n")
    for it, (energy, gnorm) in enumerate(zip(report.energy_trace, report.grad_trace)):
        out.write(f"{it},{_fmt(energy)},{_fmt(gnorm)}\n")
    return out.getvalue()


def write_text(text: str, path: str):
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        with open(path, "w") as handle:
            handle.write(text)
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc
