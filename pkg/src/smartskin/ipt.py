"""
Phase-only current synthesis by iterative projections.

The current is J = a * e_pol with a fixed unit polarization e_pol (the
incident tangential E direction by default) and a scalar amplitude a per
cell.  The pattern operator acts on a; its samples are weighted so that
|f| equals the magnitude of the projected vector far field.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DegenerateOperator
from .gstc import SurfaceCurrentField, current_polarization
from .radiation import FarFieldGrid, _cell_factor, _spherical_frame, far_field_at

PROJECTION_MODES = ("phase-only", "global-normalize")


@dataclass
class IptConfig:
    gamma: float = 1e-4
    I: int = 1000
    C: float = 1.0
    svd_cutoff: float = 0.1
    seed: int = 0
    projection_mode: str = "phase-only"
    keep_phase: bool = True

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if self.I < 1:
            raise ValueError("I must be >= 1")
        if not self.C > 0:
            raise ValueError("C must be positive")
        if not 0 < self.svd_cutoff < 1:
            raise ValueError("svd_cutoff must lie in (0, 1)")
        if self.projection_mode not in PROJECTION_MODES:
            raise ValueError(f"projection_mode must be one of {PROJECTION_MODES}")


@dataclass
class IptResult:
    J_opt: SurfaceCurrentField
    gamma_history: np.ndarray
    iterations_run: int
    termination_reason: str
    pattern: FarFieldGrid = field(repr=False, default=None)


def polarization_weights(u, v, pol):
    """(theta, phi) components of the transverse projection of pol, and its norm."""
    ct, cp, sp = _spherical_frame(u, v)
    pt = ct * (cp * pol[0] + sp * pol[1])
    pp = -sp * pol[0] + cp * pol[1]
    return pt, pp, np.sqrt(np.abs(pt) ** 2 + np.abs(pp) ** 2)


class FarFieldOperator:
    """Matrix map from cell amplitudes to pattern samples on the visible grid."""

    def __init__(self, lattice, wave, grid, polarization=None):
        self.lattice = lattice
        self.wave = wave
        self.grid = grid
        self.polarization = (current_polarization(wave) if polarization is None
                             else np.asarray(polarization, dtype=complex))
        U, V = grid.mesh()
        self.visible = grid.visible
        self.u = U[self.visible]
        self.v = V[self.visible]
        self._pt, self._pp, self.weight = polarization_weights(self.u, self.v, self.polarization)
        k0 = wave.k0
        r = lattice.centers().reshape(-1, 3)
        pre = (1j * k0 / (4 * np.pi)) * _cell_factor(self.u, self.v, lattice, k0) * self.weight
        self.matrix = pre[:, None] * np.exp(
            1j * k0 * (np.outer(self.u, r[:, 0]) + np.outer(self.v, r[:, 1])))

    @property
    def shape(self):
        return self.matrix.shape

    @cached_property
    def svd(self):
        return np.linalg.svd(self.matrix, full_matrices=False)

    def apply(self, a):
        return self.matrix @ np.ravel(a)

    def currents(self, a):
        a = np.reshape(a, self.lattice.shape)
        return SurfaceCurrentField(self.lattice, a[..., None] * self.polarization)

    def to_grid(self, f):
        """Embed scalar samples into a vector FarFieldGrid."""
        F = np.zeros(self.grid.shape + (2,), dtype=complex)
        s = f / self.weight
        F[self.visible, 0] = s * self._pt
        F[self.visible, 1] = s * self._pp
        return FarFieldGrid(self.grid, F)

    def mask_samples(self, mask):
        return mask.region[self.visible], mask.M[self.visible]


def tsvd_solve(matrix, rhs, cutoff, svd=None):
    """Truncated-SVD minimum-norm solution of matrix @ x = rhs."""
    U, s, Vh = np.linalg.svd(matrix, full_matrices=False) if svd is None else svd
    if s.size == 0 or s[0] == 0:
        raise DegenerateOperator("operator has no nonzero singular value")
    keep = s >= cutoff * s[0]
    coef = (U[:, keep].conj().T @ rhs) / s[keep]
    return Vh[keep].conj().T @ coef


def tsvd_min_norm(operator, F_target, cutoff=1e-3):
    """Minimum-norm currents radiating ``F_target`` (samples or FarFieldGrid)."""
    if isinstance(F_target, FarFieldGrid):
        f = _scalar_samples(operator, F_target)
    else:
        f = np.asarray(F_target, dtype=complex)
    a = tsvd_solve(operator.matrix, f, cutoff, svd=operator.svd)
    return operator.currents(a)


def _scalar_samples(operator, far):
    """Signed scalar pattern from a vector grid whose polarization matches."""
    F = far.F[operator.visible]
    return (F[:, 0] * np.conj(operator._pt) + F[:, 1] * np.conj(operator._pp)) / operator.weight


def project_samples(f, region, M, keep_phase=True):
    """Raise every deficient sample in the region to magnitude sqrt(M).

    Samples are scalars (n,) or vectors (n, c).  With ``keep_phase`` the
    sample keeps its phase (direction); a zero sample, or every sample in
    literal mode, becomes the real value sqrt(M) on the first component.
    """
    f = np.asarray(f, dtype=complex)
    out = f.copy()
    mag2 = np.abs(f) ** 2 if f.ndim == 1 else np.sum(np.abs(f) ** 2, axis=-1)
    if keep_phase:
        # a sample already raised to sqrt(M) may square to M minus an ulp;
        # the slack keeps the projection idempotent
        low = region & (mag2 < M * (1 - 1e-12))
    else:
        low = region & (mag2 <= M)
    target = np.sqrt(M[low])
    mag = np.sqrt(mag2[low])
    if f.ndim == 1:
        unit = np.ones(low.sum(), dtype=complex)
        if keep_phase:
            nz = mag > 0
            unit[nz] = f[low][nz] / mag[nz]
        out[low] = target * unit
    else:
        unit = np.zeros((low.sum(), f.shape[1]), dtype=complex)
        unit[:, 0] = 1.0
        if keep_phase:
            nz = mag > 0
            unit[nz] = f[low][nz] / mag[nz, None]
        out[low] = target[:, None] * unit
    return out


def project_pattern(F, mask, keep_phase=True):
    """Projection of a FarFieldGrid onto the mask-feasible set."""
    region = mask.region.ravel()
    M = mask.M.ravel()
    flat = F.F.reshape(-1, F.F.shape[-1])
    out = project_samples(flat, region, M, keep_phase).reshape(F.F.shape)
    return FarFieldGrid(F.grid, out, source=None)


def matching_index(f_proj, f, region):
    num = np.linalg.norm((f_proj - f)[region])
    den = np.linalg.norm(f[region])
    if den == 0:
        return 0.0 if num == 0 else np.inf
    return float(num / den)


def uniform_reference_power(lattice, wave, C=1.0, polarization=None):
    """Broadside peak power of the uniform-phase aperture with |J| = C."""
    pol = current_polarization(wave) if polarization is None else np.asarray(polarization)
    cur = SurfaceCurrentField(lattice, np.broadcast_to(C * pol, lattice.shape + (2,)))
    return float(np.sum(np.abs(far_field_at(cur, wave, 0.0, 0.0)) ** 2))


def ipt_run(mask, lattice, cfg, wave, operator=None, polarization=None):
    """Alternate pattern and current projections until the mask is met.

    Returns the current of the iteration at which Gamma <= gamma, or of
    the last iteration when the budget I runs out.
    """
    op = operator or FarFieldOperator(lattice, wave, mask.grid, polarization)
    region, M = op.mask_samples(mask)
    n = lattice.P * lattice.Q
    rng = np.random.default_rng(cfg.seed)
    a = cfg.C * np.exp(2j * np.pi * rng.random(n))

    history = []
    reason = "max_iterations"
    for i in range(1, cfg.I + 1):
        f = op.apply(a)
        f_proj = project_samples(f, region, M, cfg.keep_phase)
        g = matching_index(f_proj, f, region)
        history.append(g)
        if g <= cfg.gamma:
            reason = "converged"
            break
        if i == cfg.I:
            break
        a_mn = tsvd_solve(op.matrix, f_proj, cfg.svd_cutoff, svd=op.svd)
        if cfg.projection_mode == "phase-only":
            a = cfg.C * np.exp(1j * np.angle(a_mn))
        else:
            nrm = np.linalg.norm(a_mn)
            if nrm == 0:
                raise DegenerateOperator("minimum-norm current vanished")
            a = cfg.C * np.sqrt(n) * a_mn / nrm

    return IptResult(op.currents(a), np.asarray(history), len(history), reason, op.to_grid(f))
