"""
Sheet model of the skin: susceptibilities, local reflection, averaged
fields, polarization densities and effective surface currents.

Susceptibilities are diagonal and stored as complex (..., 3) arrays of
their (xx, yy, zz) entries, in meters.  The TE pair couples (psi_e_yy,
psi_m_xx) and the TM pair (psi_e_xx, psi_m_yy), which is exact at
broadside where e_TE = y-hat and e_TM = x-hat.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .em import EPS0, ETA0, MU0, Z_HAT, Lattice, incident_basis, incident_fields
from .errors import SingularInverse, SingularMapping

_POLE_TOL = 1e-14


@dataclass
class SusceptibilityCell:
    psi_e: np.ndarray
    psi_m: np.ndarray

    def __post_init__(self):
        self.psi_e = np.asarray(self.psi_e, dtype=complex)
        self.psi_m = np.asarray(self.psi_m, dtype=complex)
        if self.psi_e.shape[-1:] != (3,) or self.psi_m.shape != self.psi_e.shape:
            raise ValueError("susceptibilities must be (..., 3) arrays of equal shape")


@dataclass
class SusceptibilityField:
    lattice: Lattice
    psi_e: np.ndarray
    psi_m: np.ndarray

    def __post_init__(self):
        self.psi_e = np.asarray(self.psi_e, dtype=complex)
        self.psi_m = np.asarray(self.psi_m, dtype=complex)
        want = (self.lattice.P, self.lattice.Q, 3)
        if self.psi_e.shape != want or self.psi_m.shape != want:
            raise ValueError(f"susceptibility arrays must have shape {want}")

    @classmethod
    def uniform(cls, lattice, cell):
        shape = (lattice.P, lattice.Q, 3)
        return cls(lattice, np.broadcast_to(cell.psi_e, shape).copy(),
                   np.broadcast_to(cell.psi_m, shape).copy())

    def cell(self, p, q):
        """Cell at 1-based lattice index (p, q)."""
        return SusceptibilityCell(self.psi_e[p - 1, q - 1], self.psi_m[p - 1, q - 1])


@dataclass
class ReflectionTensor:
    """Local reflection (and implied transmission) coefficients.

    Entries may be scalars or arrays of any common shape.  The
    transmission entries are those implied by the susceptibilities; for
    the grounded skin they vanish.
    """

    R_tete: np.ndarray
    R_tetm: np.ndarray
    R_tmte: np.ndarray
    R_tmtm: np.ndarray
    T_tete: np.ndarray = 0.0
    T_tmtm: np.ndarray = 0.0

    def matrix(self):
        """Reflection entries as a (..., 2, 2) array in the (TE, TM) basis."""
        R = np.broadcast_arrays(*map(np.asarray, (self.R_tete, self.R_tetm, self.R_tmte, self.R_tmtm)))
        return np.stack([np.stack(R[:2], -1), np.stack(R[2:], -1)], -2)

    def spectral_norm(self):
        return np.linalg.norm(self.matrix(), ord=2, axis=(-2, -1))


@dataclass
class SurfaceCurrentField:
    """Tangential effective current J^tot (x, y components, V/m).

    ``Je``/``Jm`` are the electric/magnetic effective currents the total
    was built from; when present, far-field evaluation uses them to apply
    the exact direction-dependent combination instead of projecting J.
    """

    lattice: Lattice
    J: np.ndarray
    Je: Optional[np.ndarray] = None
    Jm: Optional[np.ndarray] = None

    def __post_init__(self):
        self.J = np.asarray(self.J, dtype=complex)
        if self.J.shape != (self.lattice.P, self.lattice.Q, 2):
            raise ValueError(f"J must have shape {(self.lattice.P, self.lattice.Q, 2)}")

    def scaled(self, alpha):
        return SurfaceCurrentField(
            self.lattice, alpha * self.J,
            None if self.Je is None else alpha * self.Je,
            None if self.Jm is None else alpha * self.Jm)


def _mobius(psi, k0):
    u = -0.5j * k0 * psi
    den = 1.0 - u
    if np.any(np.abs(den) < _POLE_TOL):
        raise SingularMapping("susceptibility sits on the pole of the reflection map")
    return (1.0 + u) / den


def reflection_from_susceptibility(cell, wave):
    """Normal-incidence reflection tensor of a (field of) diagonal cell(s).

    With a = (1 + u)/(1 - u), u = -j k0 psi_e / 2 and b the same for psi_m,
    the sheet reflects R = (a - b)/2 and transmits T = (a + b)/2 on each
    polarization pair.
    """
    k0 = wave.k0
    a_te = _mobius(cell.psi_e[..., 1], k0)
    b_te = _mobius(cell.psi_m[..., 0], k0)
    a_tm = _mobius(cell.psi_e[..., 0], k0)
    b_tm = _mobius(cell.psi_m[..., 1], k0)
    zero = np.zeros_like(a_te)
    return ReflectionTensor(
        R_tete=(a_te - b_te) / 2, R_tetm=zero, R_tmte=zero.copy(), R_tmtm=(a_tm - b_tm) / 2,
        T_tete=(a_te + b_te) / 2, T_tmtm=(a_tm + b_tm) / 2)


def susceptibility_from_reflection(R, T_assumed, wave):
    """Invert the sheet relations for an assumed transmission.

    ``T_assumed`` is either one value used for both pairs or a (T_te, T_tm)
    tuple.  The zz entries of the result are zero.
    """
    if isinstance(T_assumed, tuple):
        T_te, T_tm = T_assumed
    else:
        T_te = T_tm = T_assumed
    k0 = wave.k0

    def pair(Rc, Tc):
        Rc = np.asarray(Rc, dtype=complex)
        d_e = Tc + Rc + 1
        d_m = Tc - Rc + 1
        if np.any(np.abs(d_e) < _POLE_TOL) or np.any(np.abs(d_m) < _POLE_TOL):
            raise SingularInverse("reflection coefficient at the pole of the inverse map")
        return (2j / k0) * (Tc + Rc - 1) / d_e, (2j / k0) * (Tc - Rc - 1) / d_m

    pe_yy, pm_xx = pair(R.R_tete, T_te)
    pe_xx, pm_yy = pair(R.R_tmtm, T_tm)
    pe_xx, pe_yy, pm_xx, pm_yy = np.broadcast_arrays(pe_xx, pe_yy, pm_xx, pm_yy)
    zz = np.zeros_like(pe_xx)
    return SusceptibilityCell(np.stack([pe_xx, pe_yy, zz], -1), np.stack([pm_xx, pm_yy, zz], -1))


def _cell_phase_factor(lattice, wave):
    """Mean of exp(-j k_inc . r) over each cell divided by its center value."""
    k_inc, _, _ = incident_basis(wave)
    # np.sinc(x) = sin(pi x)/(pi x)
    sx = np.sinc(k_inc[0] * lattice.dx / (2 * np.pi))
    sy = np.sinc(k_inc[1] * lattice.dy / (2 * np.pi))
    return sx * sy


def _apply_dyads(coef_a, vec_a, coef_b, vec_b, field):
    """sum_i coef_i * vec_i (vec_i . field) for real unit vectors vec_i."""
    pa = field @ vec_a
    pb = field @ vec_b
    return (coef_a * pa)[..., None] * vec_a + (coef_b * pb)[..., None] * vec_b


def averaged_fields_from_reflection(refl, lattice, wave):
    """Cell-averaged E and H for given local reflection tensors.

    E_ave = (1 + R + T) E_inc / 2 per polarization; the reflected H of each
    polarization flips sign, so H_ave = (1 - R + T) H_inc / 2 with the TE
    coefficients acting along k x e_TE = e_TM and vice versa.
    """
    _, e_te, e_tm = incident_basis(wave)
    E_c, H_c = incident_fields(wave, lattice.centers())
    g = _cell_phase_factor(lattice, wave)
    E_c = E_c * g
    H_c = H_c * g

    R_te = np.broadcast_to(np.asarray(refl.R_tete), lattice.shape)
    R_tm = np.broadcast_to(np.asarray(refl.R_tmtm), lattice.shape)
    T_te = np.broadcast_to(np.asarray(refl.T_tete), lattice.shape)
    T_tm = np.broadcast_to(np.asarray(refl.T_tmtm), lattice.shape)

    E_ave = 0.5 * (E_c + _apply_dyads(R_te + T_te, e_te, R_tm + T_tm, e_tm, E_c))
    H_ave = 0.5 * (H_c + _apply_dyads(T_te - R_te, e_tm, T_tm - R_tm, e_te, H_c))
    return E_ave, H_ave


def averaged_fields(field, wave):
    """Per-cell surface-averaged (E_ave, H_ave), each (P, Q, 3)."""
    refl = reflection_from_susceptibility(field, wave)
    return averaged_fields_from_reflection(refl, field.lattice, wave)


def polarization_densities(field, averaged):
    E_ave, H_ave = averaged
    return EPS0 * field.psi_e * E_ave, field.psi_m * H_ave


def _normal_cross_grad(S_n, lattice):
    """n x grad_t of a cell-wise scalar, central differences inside."""
    gx = np.gradient(S_n, lattice.dx, axis=0) if lattice.P > 1 else np.zeros_like(S_n)
    gy = np.gradient(S_n, lattice.dy, axis=1) if lattice.Q > 1 else np.zeros_like(S_n)
    return np.stack([-gy, gx, np.zeros_like(S_n)], axis=-1)


def _tangential(S):
    return S - (S @ Z_HAT)[..., None] * Z_HAT


def surface_currents(field, wave):
    """Effective currents J^tot = n x [eta0 n x Je + Jm] with n = z-hat."""
    S_e, S_m = polarization_densities(field, averaged_fields(field, wave))
    lat = field.lattice
    w = wave.omega
    Je = 1j * w * _tangential(S_e) - _normal_cross_grad(S_m[..., 2], lat)
    Jm = 1j * w * MU0 * _tangential(S_m) + _normal_cross_grad(S_e[..., 2], lat) / EPS0
    n = np.broadcast_to(Z_HAT, Je.shape)
    J_tot = ETA0 * np.cross(n, np.cross(n, Je)) + np.cross(n, Jm)
    return SurfaceCurrentField(lat, J_tot[..., :2], Je=Je, Jm=Jm)


def current_polarization(wave):
    """Unit (x, y) polarization of the tangential incident E field."""
    E, _ = incident_fields(wave, np.zeros(3))
    e = E[:2]
    return e / np.linalg.norm(e)
