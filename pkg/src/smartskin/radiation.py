"""
Far-field radiation of cell-wise currents, ground footprints, coverage
masks and average-directivity figures.

Patterns live on a regular (u, v) grid clipped to the visible disk.
The 1/|r| and exp(-j k0 |r|) factors are dropped (unit reference
distance); the footprint reinstates the true spreading.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from matplotlib.path import Path
from scipy.interpolate import RegularGridInterpolator

from .em import ETA0, Direction, footprint_point, ground_to_local
from .errors import GridTooCoarse, GridTooCoarseWarning, NoGroundIntersection
from .gstc import SurfaceCurrentField, current_polarization

RIM_EPS = 1e-9


@dataclass
class UVGrid:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.v = np.asarray(self.v, dtype=float)

    @classmethod
    def regular(cls, du, dv=None, anchor=(0.0, 0.0)):
        """Grid of spacing (du, dv) through ``anchor``, covering [-1, 1]^2."""
        dv = du if dv is None else dv

        def axis(step, a):
            k0 = math.ceil((-1.0 - a) / step - 1e-12)
            k1 = math.floor((1.0 - a) / step + 1e-12)
            return a + step * np.arange(k0, k1 + 1)

        return cls(axis(du, anchor[0]), axis(dv, anchor[1]))

    @property
    def shape(self):
        return (self.u.size, self.v.size)

    @property
    def du(self):
        return float(self.u[1] - self.u[0]) if self.u.size > 1 else 2.0

    @property
    def dv(self):
        return float(self.v[1] - self.v[0]) if self.v.size > 1 else 2.0

    def mesh(self):
        return np.meshgrid(self.u, self.v, indexing="ij")

    @property
    def visible(self):
        U, V = self.mesh()
        return U ** 2 + V ** 2 < 1.0 - RIM_EPS

    def solid_angle(self):
        """Midpoint-rule solid angle of every sample, zero outside the disk."""
        U, V = self.mesh()
        w2 = 1.0 - U ** 2 - V ** 2
        out = np.zeros(self.shape)
        vis = self.visible
        out[vis] = self.du * self.dv / np.sqrt(w2[vis])
        return out

    def index_of(self, u, v, tol=1e-9):
        """(i, j) of the sample at (u, v), or None when (u, v) is off-grid."""
        i = int(np.argmin(np.abs(self.u - u)))
        j = int(np.argmin(np.abs(self.v - v)))
        if abs(self.u[i] - u) <= tol * max(self.du, 1.0) and abs(self.v[j] - v) <= tol * max(self.dv, 1.0):
            return i, j
        return None


@dataclass
class FarFieldGrid:
    """Complex far field (F_theta, F_phi) sampled on a UVGrid."""

    grid: UVGrid
    F: np.ndarray
    source: Optional[tuple] = field(default=None, repr=False)

    @property
    def power(self):
        return np.sum(np.abs(self.F) ** 2, axis=-1)

    def peak(self):
        """Direction of the strongest visible sample."""
        p = np.where(self.grid.visible, self.power, -np.inf)
        i, j = np.unravel_index(np.argmax(p), p.shape)
        return Direction.from_uv(self.grid.u[i], self.grid.v[j])


@dataclass
class CoverageMask:
    """Coverage region (boolean over the grid) and lower power bound M."""

    grid: UVGrid
    region: np.ndarray
    M: np.ndarray

    def __post_init__(self):
        self.region = np.asarray(self.region, dtype=bool) & self.grid.visible
        self.M = np.broadcast_to(np.asarray(self.M, dtype=float), self.grid.shape).copy()
        if not self.region.any():
            raise ValueError("coverage region is empty")
        if np.any(self.M < 0):
            raise ValueError("mask levels must be non-negative")


@dataclass
class FootprintMap:
    x: np.ndarray
    y: np.ndarray
    power: np.ndarray

    @property
    def power_db(self):
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.power)

    def peak(self):
        i, j = np.unravel_index(np.argmax(self.power), self.power.shape)
        return float(self.x[i]), float(self.y[j])


def nyquist_step(lattice, wavelength):
    return wavelength / (2 * lattice.P * lattice.dx), wavelength / (2 * lattice.Q * lattice.dy)


def default_grid(lattice, wave, oversample=4.0, anchor=(0.0, 0.0)):
    du, dv = nyquist_step(lattice, wave.wavelength)
    return UVGrid.regular(du / oversample, dv / oversample, anchor)


def check_nyquist(grid, lattice, wave, strict=False):
    du, dv = nyquist_step(lattice, wave.wavelength)
    if grid.du > du * (1 + 1e-9) or grid.dv > dv * (1 + 1e-9):
        msg = (f"grid step ({grid.du:.4g}, {grid.dv:.4g}) exceeds the aperture Nyquist "
               f"step ({du:.4g}, {dv:.4g})")
        if strict:
            raise GridTooCoarse(msg)
        warnings.warn(msg, GridTooCoarseWarning, stacklevel=3)


def _cell_factor(u, v, lattice, k0):
    return (lattice.dx * lattice.dy
            * np.sinc(k0 * u * lattice.dx / (2 * np.pi))
            * np.sinc(k0 * v * lattice.dy / (2 * np.pi)))


def _spherical_frame(u, v):
    """(cos theta, cos phi, sin phi) for direction cosines u, v."""
    s = np.hypot(u, v)
    ct = np.sqrt(np.clip(1.0 - s ** 2, 0.0, None))
    safe = np.where(s > 0, s, 1.0)
    cp = np.where(s > 0, u / safe, 1.0)
    sp = np.where(s > 0, v / safe, 0.0)
    return ct, cp, sp


def _to_theta_phi(N, u, v):
    """theta/phi components of a tangential (x, y) radiation vector."""
    ct, cp, sp = _spherical_frame(u, v)
    Nt = ct * (cp * N[..., 0] + sp * N[..., 1])
    Np = -sp * N[..., 0] + cp * N[..., 1]
    return Nt, Np


def _combine(currents, radiate, u, v):
    if currents.Je is not None and currents.Jm is not None:
        Ne = radiate(currents.Je[..., :2])
        Nm = radiate(currents.Jm[..., :2])
        et, ep = _to_theta_phi(Ne, u, v)
        mt, mp = _to_theta_phi(Nm, u, v)
        return np.stack([-ETA0 * et - mp, -ETA0 * ep + mt], axis=-1)
    N = radiate(currents.J)
    return np.stack(_to_theta_phi(N, u, v), axis=-1)


def far_field(currents, wave, grid, strict=False):
    """Radiated pattern of cell-wise constant currents on a (u, v) grid.

    Uses the separable lattice structure: for each component the array
    sum is A_x @ J @ A_y.
    """
    lat = currents.lattice
    check_nyquist(grid, lat, wave, strict=strict)
    k0 = wave.k0
    Ax = np.exp(1j * k0 * np.outer(grid.u, lat.x))
    Ay = np.exp(1j * k0 * np.outer(lat.y, grid.v))
    U, V = grid.mesh()
    pre = (1j * k0 / (4 * np.pi)) * _cell_factor(U, V, lat, k0)

    def radiate(K):
        out = np.stack([Ax @ K[..., c] @ Ay for c in range(K.shape[-1])], axis=-1)
        return pre[..., None] * out

    F = _combine(currents, radiate, U, V)
    F[~grid.visible] = 0.0
    return FarFieldGrid(grid, F, source=(currents, wave))


def far_field_at(currents, wave, u, v):
    """Pattern at scattered directions; returns (n, 2) (F_theta, F_phi)."""
    lat = currents.lattice
    k0 = wave.k0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    r = lat.centers().reshape(-1, 3)
    phase = np.exp(1j * k0 * (np.outer(u, r[:, 0]) + np.outer(v, r[:, 1])))
    pre = (1j * k0 / (4 * np.pi)) * _cell_factor(u, v, lat, k0)

    def radiate(K):
        return pre[:, None] * (phase @ K.reshape(-1, K.shape[-1]))

    return _combine(currents, radiate, u, v)


def steered_currents(lattice, wave, target, C=1.0, polarization=None):
    """Constant-magnitude currents with the linear phase pointing the beam at ``target``."""
    pol = current_polarization(wave) if polarization is None else np.asarray(polarization)
    X, Y = np.meshgrid(lattice.x, lattice.y, indexing="ij")
    a = C * np.exp(-1j * wave.k0 * (target.u * X + target.v * Y))
    return SurfaceCurrentField(lattice, a[..., None] * pol)


def _power_at(far, target):
    idx = far.grid.index_of(target.u, target.v)
    if idx is not None:
        return float(far.power[idx])
    if far.source is not None:
        cur, wave = far.source
        return float(np.sum(np.abs(far_field_at(cur, wave, target.u, target.v)) ** 2))
    interp = RegularGridInterpolator((far.grid.u, far.grid.v), far.power,
                                     bounds_error=False, fill_value=0.0)
    return float(interp([[target.u, target.v]])[0])


def total_power(far):
    """Hemisphere integral of |F|^2 (unit reference distance)."""
    return float(np.sum(far.power * far.grid.solid_angle()))


def directivity_pencil(far, target):
    """Peak-to-average directivity towards ``target``, in dB."""
    num = 4 * np.pi * _power_at(far, target)
    return float(10 * np.log10(num / total_power(far)))


def directivity_shaped(far, mask):
    """Average directivity over the coverage region, in dB."""
    dOmega = far.grid.solid_angle()
    theta_area = float(np.sum(dOmega[mask.region]))
    inside = float(np.sum((far.power * dOmega)[mask.region]))
    return float(10 * np.log10(4 * np.pi / theta_area * inside / total_power(far)))


def pencil_mask(grid, target, level):
    idx = grid.index_of(target.u, target.v)
    if idx is None:
        raise ValueError("pencil target must be a grid sample; anchor the grid on it")
    region = np.zeros(grid.shape, dtype=bool)
    region[idx] = True
    return CoverageMask(grid, region, np.where(region, level, 0.0))


def grid_footprints(grid, mount):
    """Ground points hit by every grid direction; NaN where the ray misses."""
    U, V = grid.mesh()
    W = np.sqrt(np.clip(1.0 - U ** 2 - V ** 2, 0.0, None))
    d = np.stack([U, V, W], axis=-1) @ mount.rotation.T
    down = -d[..., 2]
    hit = grid.visible & (down > 0)
    t = np.where(hit, mount.H / np.where(hit, down, 1.0), np.nan)
    return t * d[..., 0], t * d[..., 1]


def shaped_region(grid, mount, polygons):
    """Grid samples whose ground footprint falls inside any polygon."""
    X, Y = grid_footprints(grid, mount)
    pts = np.stack([X.ravel(), Y.ravel()], axis=-1)
    ok = np.isfinite(pts).all(axis=1)
    region = np.zeros(pts.shape[0], dtype=bool)
    for poly in polygons:
        path = Path(np.asarray(poly, dtype=float))
        region[ok] |= path.contains_points(pts[ok])
    return region.reshape(grid.shape)


def shaped_mask(grid, mount, polygons, level):
    region = shaped_region(grid, mount, polygons)
    return CoverageMask(grid, region, np.where(region, level, 0.0))


def rectangle(center, width, height):
    """Axis-aligned ground rectangle (x extent ``width``, y extent ``height``)."""
    cx, cy = center
    hw, hh = width / 2, height / 2
    return [(cx - hw, cy - hh), (cx + hw, cy - hh), (cx + hw, cy + hh), (cx - hw, cy + hh)]


def footprint(far, mount, window=(-60.0, 60.0, 0.0, 60.0), step=0.5):
    """Ground power density |F|^2 / rho^2, normalized to its peak.

    ``window`` is (x_min, x_max, y_min, y_max) in global meters.  Points
    behind the wall plane receive zero power.
    """
    x0, x1, y0, y1 = window
    if not (x1 > x0 and y1 > y0):
        raise ValueError("degenerate footprint window")
    x = np.arange(x0, x1 + step / 2, step)
    y = np.arange(y0, y1 + step / 2, step)
    X, Y = np.meshgrid(x, y, indexing="ij")
    d, rho = ground_to_local(X, Y, mount)
    front = d[..., 2] > 0
    P = np.where(far.grid.visible, far.power, 0.0)
    interp = RegularGridInterpolator((far.grid.u, far.grid.v), P,
                                     bounds_error=False, fill_value=0.0)
    pts = np.stack([d[..., 0], d[..., 1]], axis=-1)
    power = np.where(front, interp(pts) / rho ** 2, 0.0)
    peak = power.max()
    if peak > 0:
        power = power / peak
    return FootprintMap(x, y, power)


def target_footprint(target, mount):
    try:
        return footprint_point(target, mount)
    except NoGroundIntersection:
        return None
