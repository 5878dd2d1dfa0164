"""Training-set generation and persistence for the small-scale surrogate."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from ..gstc import SusceptibilityCell
from ..io import fmt

FORMAT_VERSION = 1
TARGET_NAMES = [f"{part}_psi_{kind}_{comp}"
                for kind in ("e", "m") for comp in ("xx", "yy", "zz") for part in ("re", "im")]


def lhs_sampler(B, dim, seed):
    """B Latin-hypercube points in [0, 1)^dim."""
    return qmc.LatinHypercube(d=dim, seed=np.random.default_rng(seed)).random(B)


@dataclass
class TrainingSet:
    """B small-scale layouts and their per-cell susceptibilities.

    layouts : (B, Pp, Qp, D) descriptors
    psi_e, psi_m : (B, Pp, Qp, 3) complex targets
    """

    layouts: np.ndarray
    psi_e: np.ndarray
    psi_m: np.ndarray
    bounds: np.ndarray
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layouts = np.asarray(self.layouts, dtype=float)
        self.psi_e = np.asarray(self.psi_e, dtype=complex)
        self.psi_m = np.asarray(self.psi_m, dtype=complex)
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(-1, 2)
        if self.layouts.ndim != 4:
            raise ValueError("layouts must be (B, Pp, Qp, D)")
        B, Pp, Qp, D = self.layouts.shape
        if B < 2:
            raise ValueError("a training set needs B >= 2 records")
        if self.psi_e.shape != (B, Pp, Qp, 3) or self.psi_m.shape != (B, Pp, Qp, 3):
            raise ValueError("target arrays do not match the layouts")
        if self.bounds.shape != (D, 2):
            raise ValueError("bounds must be (D, 2)")
        if not (np.all(np.isfinite(self.psi_e)) and np.all(np.isfinite(self.psi_m))):
            raise ValueError("training targets must be finite")

    @property
    def B(self):
        return self.layouts.shape[0]

    @property
    def shape(self):
        return self.layouts.shape[1:]

    def inputs(self):
        """(B, Pp*Qp*D) inputs in the n = p' + P'(q'-1) + P'Q'(d-1) order."""
        return self.layouts.transpose(0, 3, 2, 1).reshape(self.B, -1)

    def targets(self):
        """(B, Pp, Qp, 12) real targets ordered as TARGET_NAMES."""
        return split_targets(self.psi_e, self.psi_m)

    def save(self, path):
        os.makedirs(path, exist_ok=True)
        B, Pp, Qp, D = self.layouts.shape
        manifest = {
            "format_version": FORMAT_VERSION,
            "B": B, "Pp": Pp, "Qp": Qp, "D": D,
            "bounds": self.bounds.tolist(),
            "seed": self.seed,
            **self.meta,
        }
        with open(os.path.join(path, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
        T = self.targets()
        with open(os.path.join(path, "records.csv"), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["b", "p", "q"] + [f"g{d + 1}" for d in range(D)] + TARGET_NAMES)
            for b in range(B):
                for p in range(Pp):
                    for q in range(Qp):
                        w.writerow([b + 1, p + 1, q + 1]
                                   + [fmt(g) for g in self.layouts[b, p, q]]
                                   + [fmt(t) for t in T[b, p, q]])

    @classmethod
    def load(cls, path):
        with open(os.path.join(path, "manifest.json")) as fh:
            man = json.load(fh)
        B, Pp, Qp, D = man["B"], man["Pp"], man["Qp"], man["D"]
        data = np.loadtxt(os.path.join(path, "records.csv"), delimiter=",", skiprows=1, ndmin=2)
        if data.shape != (B * Pp * Qp, 3 + D + 12):
            raise ValueError(f"records.csv holds {data.shape[0]} rows, expected {B * Pp * Qp}")
        idx = data[:, :3].astype(int) - 1
        layouts = np.empty((B, Pp, Qp, D))
        T = np.empty((B, Pp, Qp, 12))
        layouts[idx[:, 0], idx[:, 1], idx[:, 2]] = data[:, 3:3 + D]
        T[idx[:, 0], idx[:, 1], idx[:, 2]] = data[:, 3 + D:]
        psi_e, psi_m = join_targets(T)
        meta = {k: v for k, v in man.items()
                if k not in ("format_version", "B", "Pp", "Qp", "D", "bounds", "seed")}
        return cls(layouts, psi_e, psi_m, man["bounds"], man["seed"], meta)


def split_targets(psi_e, psi_m):
    z = np.concatenate([psi_e, psi_m], axis=-1)
    return np.stack([z.real, z.imag], axis=-1).reshape(z.shape[:-1] + (12,))


def join_targets(T):
    T = np.asarray(T)
    z = T[..., 0::2] + 1j * T[..., 1::2]
    return z[..., :3], z[..., 3:]


def response_curve(train, n_bins=None):
    """Mean per-cell targets binned by the cell's own first descriptor.

    Pools every cell of every record; neighbour effects average out, which
    leaves a smooth single-cell response usable as a first guess.  Returns
    ``{"side": centres, "targets": (n, 12)}`` with empty bins dropped.
    """
    g = train.layouts[..., 0].ravel()
    T = train.targets().reshape(-1, 12)
    lo, hi = train.bounds[0]
    n_bins = n_bins or max(4, int(np.sqrt(train.B * 3)))
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.digitize(g, edges) - 1, 0, n_bins - 1)
    side, targets = [], []
    for k in range(n_bins):
        sel = idx == k
        if sel.any():
            side.append(0.5 * (edges[k] + edges[k + 1]))
            targets.append(T[sel].mean(axis=0))
    return {"side": side, "targets": np.asarray(targets).tolist()}


def build_training_set(oracle, sampler, B, bounds, seed, shape=(5, 5), meta=None):
    """Evaluate the oracle on B Latin-hypercube layouts.

    ``oracle`` maps a (Pp, Qp, D) descriptor array to a SusceptibilityCell
    with (Pp, Qp, 3) entries; ``sampler(B, dim, seed)`` returns points in
    the unit cube.
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    bounds = np.asarray(bounds, dtype=float).reshape(-1, 2)
    Pp, Qp = shape
    D = bounds.shape[0]
    unit = np.asarray(sampler(B, Pp * Qp * D, seed))
    lo, hi = bounds[:, 0], bounds[:, 1]
    # unit columns follow the n-ordering: p' fastest, then q', then d
    g = unit.reshape(B, D, Qp, Pp).transpose(0, 3, 2, 1)
    layouts = lo + g * (hi - lo)
    psi_e = np.empty((B, Pp, Qp, 3), dtype=complex)
    psi_m = np.empty_like(psi_e)
    for b in range(B):
        cell: SusceptibilityCell = oracle(layouts[b])
        psi_e[b] = cell.psi_e
        psi_m[b] = cell.psi_m
    return TrainingSet(layouts, psi_e, psi_m, bounds, seed, dict(meta or {}))
