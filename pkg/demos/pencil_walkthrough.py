"""
End-to-end pencil beam on a 10 x 10 skin, step by step.

Trains a small surrogate on the synthetic unit-cell twin, runs the
current synthesis (IPT) and the layout search (PSO), then compares the
achieved beam with the ideal phase-steered one.  Takes a few minutes.

    python3 demos/pencil_walkthrough.py
"""
import numpy as np

from smartskin.em import Direction, Lattice, Mounting, PlaneWave, footprint_point
from smartskin.ipt import IptConfig, uniform_reference_power
from smartskin.radiation import default_grid, directivity_pencil, far_field, steered_currents
from smartskin.sbd import SbdConfig, Scenario, SynthesisConfig, synthesize
from smartskin.surrogate import (KrigingConfig, OracleParams, build_training_set, fit_ok,
                                 lhs_sampler, synthetic_oracle)

BOUNDS = [[0.002, 0.040]]

wave = PlaneWave(3.5e9, e_te=1.0, e_tm=1j)
target = Direction.from_degrees(50.0, -8.0)
mount = Mounting(5.0)
L = Lattice(10, 10, 0.0428, 0.0428)

print(f"k0 = {wave.k0:.3f} rad/m, lambda = {100 * wave.wavelength:.2f} cm")
x, y = footprint_point(target, mount)
print(f"geometric target on the ground: ({x:.2f}, {y:.2f}) m")

# 1. small-scale training set and kriging fit
train = build_training_set(lambda G: synthetic_oracle(G, wave), lhs_sampler, 500, BOUNDS, seed=1)
model = fit_ok(train, KrigingConfig(n_starts=2, max_steps=60))
print(f"trained on B = {train.B} layouts of {train.shape[0]}x{train.shape[1]} cells")

# 2. reference: ideal phase-steered currents
ideal = far_field(steered_currents(L, wave, target), wave,
                  default_grid(L, wave, 4.0, (target.u, target.v)))
print(f"ideal steering: xi = {directivity_pencil(ideal, target):.2f} dB")

# 3. synthesis
sc = Scenario(L, wave, mount, model, BOUNDS, target=target, eval_oversample=4.0,
              oracle_params=OracleParams())
mask = sc.mask(sc.grid(1.0), uniform_reference_power(L, wave))
cfg = SynthesisConfig(IptConfig(I=300, seed=0), SbdConfig(A=10, N=400, seed=0))
rep = synthesize(mask, sc, cfg)

# reference = IPT currents, achieved = surrogate prediction of the PSO
# layout, oracle = the same layout through the twin itself
for key in ("reference", "achieved", "oracle"):
    m = rep.metrics[key]
    print(f"{key:>9}: xi = {m['xi_pen_db']:6.2f} dB, peak error {m['peak_error_deg']:.2f} deg")
fx, fy = rep.metrics["achieved"]["footprint_peak"]
print(f"achieved ground peak ({fx:.1f}, {fy:.1f}) m")
print(f"Delta: {rep.delta_history[0]:.3g} -> {rep.delta_history[-1]:.3g} "
      f"over {len(rep.delta_history)} PSO iterations")
print("patch sides (mm):")
print(np.array2string(1e3 * rep.layout.values[..., 0], precision=1, max_line_width=100))
