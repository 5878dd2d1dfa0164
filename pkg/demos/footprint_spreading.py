"""
Why the ground maximum sits closer to the wall than the beam axis.

The ground power density of a beam leaving the wall falls off as
cos(incidence) / rho^2, so a finite beam's ground maximum is dragged
toward the wall.  The pull shrinks as the aperture (and so the beam)
gets narrower.

    python3 demos/footprint_spreading.py
"""
import numpy as np

from smartskin.em import Direction, Lattice, Mounting, PlaneWave, footprint_point
from smartskin.radiation import default_grid, far_field, footprint, steered_currents

wave = PlaneWave(3.5e9, e_te=1.0, e_tm=1j)
target = Direction.from_degrees(50.0, -8.0)
mount = Mounting(5.0)
tx, ty = footprint_point(target, mount)
print(f"beam axis hits the ground at ({tx:.2f}, {ty:.2f}) m")

for P in (10, 15, 30, 50):
    L = Lattice(P, P, 0.0428, 0.0428)
    far = far_field(steered_currents(L, wave, target), wave,
                    default_grid(L, wave, 4.0, (target.u, target.v)))
    fx, fy = footprint(far, mount, step=0.5).peak()
    print(f"{P:>3} x {P:<3} ground peak ({fx:7.2f}, {fy:6.2f}) m, "
          f"{np.hypot(fx - tx, fy - ty):5.1f} m from the axis point")
