"""
Geometry, incident plane wave and coordinate conventions.

Local frame: the skin lies on the xy-plane with its normal along +z and
the aperture centered at the origin.  Global frame: ground is z_glob = 0
and the skin hangs vertically on a wall with its center at (0, 0, H).
The wall mounting maps local axes to global ones as

    x_loc -> -x_glob,    y_loc -> +z_glob,    z_loc -> +y_glob

so a ray leaving the skin towards the street has v = sin(theta)sin(phi) < 0.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import constants

from .errors import NoGroundIntersection

C0 = constants.c
EPS0 = constants.epsilon_0
MU0 = constants.mu_0
ETA0 = float(np.sqrt(MU0 / EPS0))

Z_HAT = np.array([0.0, 0.0, 1.0])

# columns are the global images of the local x, y, z axes
WALL_ROTATION = np.array([
    [-1.0, 0.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.0, 1.0, 0.0],
])


@dataclass(frozen=True)
class Direction:
    """Observation or incidence direction, angles in radians."""

    theta: float
    phi: float

    @classmethod
    def from_degrees(cls, theta_deg, phi_deg):
        return cls(np.radians(theta_deg), np.radians(phi_deg))

    @classmethod
    def from_uv(cls, u, v):
        s = np.hypot(u, v)
        if s > 1.0 + 1e-12:
            raise ValueError(f"(u, v) = ({u}, {v}) lies outside the visible disk")
        return cls(float(np.arcsin(min(s, 1.0))), float(np.arctan2(v, u)))

    @property
    def u(self):
        return float(np.sin(self.theta) * np.cos(self.phi))

    @property
    def v(self):
        return float(np.sin(self.theta) * np.sin(self.phi))

    @property
    def unit(self):
        st = np.sin(self.theta)
        return np.array([st * np.cos(self.phi), st * np.sin(self.phi), np.cos(self.theta)])

    def angle_to(self, other):
        """Great-circle separation from another direction (rad)."""
        c = np.clip(self.unit @ other.unit, -1.0, 1.0)
        return float(np.arccos(c))


@dataclass(frozen=True)
class PlaneWave:
    frequency: float
    incidence: Direction = Direction(0.0, 0.0)
    e_te: complex = 1.0
    e_tm: complex = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError("frequency must be positive")
        if abs(self.e_te) ** 2 + abs(self.e_tm) ** 2 <= 0:
            raise ValueError("plane wave carries no power")

    @property
    def k0(self):
        return 2 * np.pi * self.frequency / C0

    @property
    def wavelength(self):
        return C0 / self.frequency

    @property
    def omega(self):
        return 2 * np.pi * self.frequency

    @property
    def is_broadside(self):
        return np.sin(self.incidence.theta) == 0.0


@dataclass(frozen=True)
class Lattice:
    """Regular P x Q lattice; p runs along x, q along y (both 1-based)."""

    P: int
    Q: int
    dx: float
    dy: float

    def __post_init__(self):
        if self.P < 1 or self.Q < 1:
            raise ValueError("P and Q must be >= 1")
        if not (self.dx > 0 and self.dy > 0):
            raise ValueError("lattice spacings must be positive")

    @property
    def shape(self):
        return (self.P, self.Q)

    @property
    def x(self):
        return (np.arange(1, self.P + 1) - (self.P + 1) / 2) * self.dx

    @property
    def y(self):
        return (np.arange(1, self.Q + 1) - (self.Q + 1) / 2) * self.dy

    def centers(self):
        """Cell centers as a (P, Q, 3) array."""
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.stack([X, Y, np.zeros_like(X)], axis=-1)

    @property
    def cell_area(self):
        return self.dx * self.dy

    @property
    def area(self):
        return self.P * self.Q * self.dx * self.dy


@dataclass(frozen=True)
class Mounting:
    H: float
    convention: str = "wall"

    def __post_init__(self):
        if not self.H > 0:
            raise ValueError("mounting height must be positive")
        if self.convention != "wall":
            raise ValueError(f"unknown mounting convention {self.convention!r}")

    @property
    def rotation(self):
        return WALL_ROTATION

    @property
    def center(self):
        return np.array([0.0, 0.0, self.H])


def incident_basis(wave):
    """Incident wave vector and TE/TM unit vectors.

    Returns
    -------
    k_inc : (3,) ndarray
    e_te, e_tm : (3,) ndarray
        Unit vectors with (e_te, e_tm, k_inc/|k_inc|) right-handed.  At
        broadside k x n vanishes and e_te takes its limit along phi,
        (-sin phi, cos phi, 0), i.e. y-hat for phi = 0.
    """
    th, ph = wave.incidence.theta, wave.incidence.phi
    k_inc = -wave.k0 * np.array(
        [np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    k_hat = k_inc / wave.k0

    kxn = np.cross(k_inc, Z_HAT)
    nrm = np.linalg.norm(kxn)
    if nrm < 1e-12 * wave.k0:
        e_te = np.array([-np.sin(ph), np.cos(ph), 0.0])
    else:
        e_te = kxn / nrm
    e_tm = np.cross(k_hat, e_te)
    e_tm /= np.linalg.norm(e_tm)
    return k_inc, e_te, e_tm


def incident_fields(wave, r):
    """Incident E and H at point(s) r.

    ``r`` may be a single point (3,) or an array (..., 3); the returned
    fields have shape (..., 3).
    """
    k_inc, e_te, e_tm = incident_basis(wave)
    r = np.asarray(r, dtype=float)
    pol = wave.e_te * e_te + wave.e_tm * e_tm
    phase = np.exp(-1j * (r @ k_inc))
    E = phase[..., None] * pol
    H = np.cross(k_inc, E) / (ETA0 * wave.k0)
    return E, H


def local_to_global(direction_vec, mount):
    return mount.rotation @ np.asarray(direction_vec, dtype=float)


def footprint_point(direction, mount):
    """Ground intersection (x_glob, y_glob) of a ray leaving the skin center."""
    d = local_to_global(direction.unit, mount)
    down = -d[2]
    if down <= 0:
        raise NoGroundIntersection(
            f"ray ({np.degrees(direction.theta):.3f}, {np.degrees(direction.phi):.3f}) deg "
            "never reaches the ground")
    t = mount.H / down
    return float(t * d[0]), float(t * d[1])


def ground_to_local(x, y, mount):
    """Local unit directions from the skin center towards ground points.

    Returns ``(dirs, rho)`` with dirs of shape (..., 3) and rho the
    skin-to-ground distance.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    g = np.stack([x, y, np.full_like(x, -mount.H)], axis=-1)
    rho = np.linalg.norm(g, axis=-1)
    d_glob = g / rho[..., None]
    d_loc = d_glob @ mount.rotation  # R^T applied row-wise
    return d_loc, rho
