"""
Synthetic small-scale solver standing in for full-wave unit-cell runs.

Each square-patch cell behaves as a resonator whose effective side is
pulled towards its neighbours' sides (8-neighbourhood, exponential decay
with distance).  The reflection phase sweeps through the resonance as
2*atan2(Q_f*(l_res - l_eff), l_res) and the magnitude dips by a
Lorentzian loss term.  Both polarizations see the same coefficient (the
patch is square); susceptibilities follow from the grounded-sheet
inversion with T = 0.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..gstc import ReflectionTensor, SusceptibilityField, susceptibility_from_reflection

# neighbour offsets (dp, dq) of the 8-neighbourhood
_OFFSETS = [(dp, dq) for dp in (-1, 0, 1) for dq in (-1, 0, 1) if (dp, dq) != (0, 0)]


@dataclass(frozen=True)
class OracleParams:
    l_res: float = 0.025
    kappa: float = 0.15
    rho_c: float = 0.0428
    Q_f: float = 12.0
    alpha_loss: float = 0.3
    dx: float = 0.0428
    dy: float = 0.0428

    def to_dict(self):
        return asdict(self)


@dataclass
class SmallScaleLayout:
    """P' x Q' x D descriptor block (1-based cell indices in docs, 0-based arrays)."""

    G_prime: np.ndarray
    bounds: np.ndarray = None

    def __post_init__(self):
        self.G_prime = np.asarray(self.G_prime, dtype=float)
        if self.G_prime.ndim == 2:
            self.G_prime = self.G_prime[..., None]
        if self.G_prime.ndim != 3:
            raise ValueError("G_prime must be (Pp, Qp, D)")
        if self.bounds is not None:
            self.bounds = np.asarray(self.bounds, dtype=float).reshape(self.D, 2)
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            if np.any(self.G_prime < lo) or np.any(self.G_prime > hi):
                raise ValueError("descriptors outside their bounds")

    @property
    def Pp(self):
        return self.G_prime.shape[0]

    @property
    def Qp(self):
        return self.G_prime.shape[1]

    @property
    def D(self):
        return self.G_prime.shape[2]

    def flat(self):
        """Descriptor vector in the order n = p' + P'(q'-1) + P'Q'(d-1)."""
        return self.G_prime.ravel(order="F")


def effective_side(side, params):
    """Neighbour-coupled patch side for a (P, Q) array of sides."""
    side = np.asarray(side, dtype=float)
    P, Q = side.shape
    pad = np.pad(side, 1, mode="constant", constant_values=np.nan)
    out = side.copy()
    for dp, dq in _OFFSETS:
        nb = pad[1 + dp:1 + dp + P, 1 + dq:1 + dq + Q]
        dist = np.hypot(dp * params.dx, dq * params.dy)
        w = params.kappa * np.exp(-dist / params.rho_c)
        out = out + np.where(np.isnan(nb), 0.0, w * (np.nan_to_num(nb) - side))
    return out


def resonant_reflection(l_eff, params):
    """Reflection coefficient of an isolated patch of side ``l_eff``."""
    x = params.Q_f * (params.l_res - l_eff) / params.l_res
    phase = 2 * np.arctan2(x, 1.0)
    mag = 1.0 - params.alpha_loss / (1.0 + x ** 2)
    return mag * np.exp(1j * phase)


def synthetic_oracle(layout, wave, params=OracleParams()):
    """Per-cell susceptibilities of a layout, stacked as a (P, Q, 3) cell.

    Works for any layout size; only the first descriptor (patch side)
    enters the model.
    """
    G = layout.G_prime if isinstance(layout, SmallScaleLayout) else np.asarray(layout, dtype=float)
    if G.ndim == 3:
        G = G[..., 0]
    R = resonant_reflection(effective_side(G, params), params)
    zero = np.zeros_like(R)
    refl = ReflectionTensor(R, zero, zero, R)
    return susceptibility_from_reflection(refl, 0.0, wave)


def oracle_field(G, lattice, wave, params=OracleParams()):
    """Full-scale SusceptibilityField computed directly by the oracle."""
    cell = synthetic_oracle(G, wave, params)
    return SusceptibilityField(lattice, cell.psi_e, cell.psi_m)

