"""CSV and JSON writers shared by the library and the command line."""
from __future__ import annotations

import csv
import hashlib
import json

import numpy as np

from .gstc import SurfaceCurrentField


def fmt(x):
    """Float with 17 significant digits."""
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer, str)) else fmt(v) for v in row])


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _to_builtin(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else str(x)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps(obj):
    """Deterministic JSON text (sorted keys, non-finite floats as strings)."""
    return json.dumps(_to_builtin(obj), sort_keys=True, indent=2) + "\n"


def write_json(path, obj):
    with open(path, "w") as fh:
        fh.write(dumps(obj))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_currents(path, currents):
    """Rows (p, q, Re Jx, Im Jx, Re Jy, Im Jy), 1-based indices."""
    J = currents.J
    P, Q = J.shape[:2]
    rows = ([p + 1, q + 1, J[p, q, 0].real, J[p, q, 0].imag, J[p, q, 1].real, J[p, q, 1].imag]
            for p in range(P) for q in range(Q))
    write_csv(path, ["p", "q", "re_jx", "im_jx", "re_jy", "im_jy"], rows)


def read_currents(path, lattice):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    J = np.zeros((lattice.P, lattice.Q, 2), dtype=complex)
    idx = data[:, :2].astype(int) - 1
    J[idx[:, 0], idx[:, 1], 0] = data[:, 2] + 1j * data[:, 3]
    J[idx[:, 0], idx[:, 1], 1] = data[:, 4] + 1j * data[:, 5]
    return SurfaceCurrentField(lattice, J)


def write_gamma_trace(path, gamma_history):
    write_csv(path, ["iteration", "gamma"], ([i + 1, g] for i, g in enumerate(gamma_history)))


def write_delta_trace(path, delta_history):
    write_csv(path, ["iteration", "delta_best"], ([i + 1, d] for i, d in enumerate(delta_history)))


def write_farfield(path, far):
    """Visible samples: u, v, Re/Im F_theta, Re/Im F_phi, |F|^2, dB re peak."""
    U, V = far.grid.mesh()
    vis = far.grid.visible
    P = far.power
    peak = P[vis].max() if vis.any() else 0.0
    with np.errstate(divide="ignore"):
        db = 10 * np.log10(P / peak) if peak > 0 else np.full(P.shape, -np.inf)
    F = far.F
    rows = ([U[i, j], V[i, j], F[i, j, 0].real, F[i, j, 0].imag, F[i, j, 1].real, F[i, j, 1].imag,
             P[i, j], db[i, j]] for i, j in zip(*np.nonzero(vis)))
    write_csv(path, ["u", "v", "re_f_theta", "im_f_theta", "re_f_phi", "im_f_phi", "power", "power_db"],
              rows)


def write_footprint(path, fp):
    """Ground samples: x, y, normalized power density and its dB value."""
    db = fp.power_db
    rows = ([x, y, fp.power[i, j], db[i, j]]
            for i, x in enumerate(fp.x) for j, y in enumerate(fp.y))
    write_csv(path, ["x", "y", "power", "power_db"], rows)


def write_layout(path, G):
    """Rows (p, q, d, value) for a (P, Q, D) descriptor array."""
    G = np.asarray(G)
    P, Q, D = G.shape
    write_csv(path, ["p", "q", "d", "value"],
              ([p + 1, q + 1, d + 1, G[p, q, d]] for p in range(P) for q in range(Q) for d in range(D)))


class LayoutFormatError(ValueError):
    pass


def read_layout(path, shape=None):
    """Read a (p, q, d, value) CSV; errors name the offending row."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["p", "q", "d", "value"]:
            raise LayoutFormatError(f"{path}: row 1: expected header p,q,d,value")
        for n, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise LayoutFormatError(f"{path}: row {n}: expected 4 fields, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]), int(row[2]), float(row[3])))
            except ValueError as exc:
                raise LayoutFormatError(f"{path}: row {n}: {exc}") from None
    if not rows:
        raise LayoutFormatError(f"{path}: no data rows")
    idx = np.array([r[:3] for r in rows])
    dims = tuple(idx.max(axis=0)) if shape is None else tuple(shape)
    if idx.min() < 1 or np.any(idx.max(axis=0) > np.array(dims)):
        raise LayoutFormatError(f"{path}: indices exceed layout shape {dims}")
    if len(rows) != int(np.prod(dims)):
        raise LayoutFormatError(
            f"{path}: row {len(rows) + 2}: layout truncated, {len(rows)} of {int(np.prod(dims))} values")
    G = np.full(dims, np.nan)
    G[idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1] = [r[3] for r in rows]
    if np.isnan(G).any():
        raise LayoutFormatError(f"{path}: duplicate or missing cells")
    return G
