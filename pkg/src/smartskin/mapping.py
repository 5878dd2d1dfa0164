"""
Small-scale to full-scale prediction mapping.

Every full-scale cell (p, q) reads the surrogate prediction of a P' x Q'
descriptor window cut from the full layout.  The window is centred on
the cell and clamped to stay inside the aperture, so rim cells read an
off-centre local index.  With P' = Q' = 5 this reproduces the seven
region rules C0..C6 (corners, edge strips, interior).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .gstc import SusceptibilityField
from .surrogate.kriging import layout_vector, predict_outputs
from .surrogate.training import join_targets


class RegionClass(str, Enum):
    C0 = "C0"  # corner p, q in [1, 2]
    C1 = "C1"  # corner p, q in [P-1, P] x [Q-1, Q]
    C2 = "C2"  # corner p in [1, 2], q in [Q-1, Q]
    C3 = "C3"  # corner p in [P-1, P], q in [1, 2]
    C4 = "C4"  # strips p in {1, 2, P-1, P}, q in [3, Q-2]
    C5 = "C5"  # strips p in [3, P-2], q in {1, 2, Q-1, Q}
    C6 = "C6"  # interior


@dataclass(frozen=True)
class WindowAssignment:
    anchor: tuple
    local: tuple


def _band(i, n, w):
    """-1 near the start, +1 near the end, 0 inside, for band width w."""
    if i <= w:
        return -1
    if i >= n - w + 1:
        return 1
    return 0


def region_class(p, q, P, Q, Pp=5, Qp=5):
    """Region of full-scale cell (p, q) (1-based); band widths (P'-1)/2."""
    if not (1 <= p <= P and 1 <= q <= Q):
        raise ValueError(f"cell ({p}, {q}) outside a {P} x {Q} lattice")
    bp = _band(p, P, (Pp - 1) // 2)
    bq = _band(q, Q, (Qp - 1) // 2)
    if bp and bq:
        return {(-1, -1): RegionClass.C0, (1, 1): RegionClass.C1,
                (-1, 1): RegionClass.C2, (1, -1): RegionClass.C3}[(bp, bq)]
    if bp:
        return RegionClass.C4
    if bq:
        return RegionClass.C5
    return RegionClass.C6


def _check_window(P, Q, Pp, Qp):
    if Pp % 2 == 0 or Qp % 2 == 0:
        raise ValueError("window dimensions must be odd")
    if P < Pp or Q < Qp:
        raise ValueError(f"{P} x {Q} layout is smaller than the {Pp} x {Qp} window")


def window_assignment(p, q, P, Q, Pp, Qp):
    """Clamped, centred window anchor and the local index read from it."""
    _check_window(P, Q, Pp, Qp)
    a_p = min(max(p - (Pp - 1) // 2, 1), P - Pp + 1)
    a_q = min(max(q - (Qp - 1) // 2, 1), Q - Qp + 1)
    return WindowAssignment((a_p, a_q), (p - a_p + 1, q - a_q + 1))


def assignments(P, Q, Pp, Qp):
    """Anchors and local indices for every cell, as (P, Q, 2) int arrays (1-based)."""
    _check_window(P, Q, Pp, Qp)
    p = np.arange(1, P + 1)
    q = np.arange(1, Q + 1)
    a_p = np.clip(p - (Pp - 1) // 2, 1, P - Pp + 1)
    a_q = np.clip(q - (Qp - 1) // 2, 1, Q - Qp + 1)
    A = np.stack(np.meshgrid(a_p, a_q, indexing="ij"), axis=-1)
    L = np.stack(np.meshgrid(p - a_p + 1, q - a_q + 1, indexing="ij"), axis=-1)
    return A, L


def _as_array(G):
    values = getattr(G, "values", G)
    values = np.asarray(values, dtype=float)
    return values[..., None] if values.ndim == 2 else values


def _window(G, anchor, Pp, Qp):
    a_p, a_q = anchor
    return G[a_p - 1:a_p - 1 + Pp, a_q - 1:a_q - 1 + Qp]


def full_scale_susceptibilities(G, model, lattice, memoize=True):
    """Susceptibility field of a full layout from windowed surrogate reads.

    With ``memoize`` each distinct window is turned into a model input
    once and shared by all cells anchored on it.  Both paths hand the
    model identical input rows, so the fields agree bitwise.
    """
    G = _as_array(G)
    P, Q, D = G.shape
    if (P, Q) != lattice.shape:
        raise ValueError(f"layout {P} x {Q} does not match the lattice {lattice.shape}")
    if D != model.D:
        raise ValueError(f"layout has D = {D}, model expects {model.D}")
    Pp, Qp = model.Pp, model.Qp
    A, L = assignments(P, Q, Pp, Qp)
    anchors = A.reshape(-1, 2)
    local = L.reshape(-1, 2)
    cell_index = (local[:, 0] - 1) + Pp * (local[:, 1] - 1)

    if memoize:
        uniq, inv = np.unique(anchors, axis=0, return_inverse=True)
        vecs = np.stack([layout_vector(_window(G, a, Pp, Qp)) for a in uniq])
        x = vecs[inv.ravel()]
    else:
        x = np.stack([layout_vector(_window(G, a, Pp, Qp)) for a in anchors])
    Y = predict_outputs(model, x, cell_index).reshape(P, Q, -1)
    psi_e, psi_m = join_targets(Y)
    return SusceptibilityField(lattice, psi_e, psi_m)


def dump_assignments(path, P, Q, Pp=5, Qp=5):
    """Debug CSV of (p, q, class, anchor, local index)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "q", "class", "anchor_p", "anchor_q", "local_p", "local_q"])
        for p in range(1, P + 1):
            for q in range(1, Q + 1):
                wa = window_assignment(p, q, P, Q, Pp, Qp)
                w.writerow([p, q, region_class(p, q, P, Q, Pp, Qp).value, *wa.anchor, *wa.local])
