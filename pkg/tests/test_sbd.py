import hashlib
import os

import numpy as np
import pytest

from smartskin.em import Lattice, Mounting
from smartskin.ipt import IptConfig, uniform_reference_power
from smartskin.sbd import (ForwardContext, LayoutDescriptors, SbdConfig, Scenario,
                           SynthesisConfig, current_mismatch, curve_start, pso_optimize,
                           synthesize, warm_swarm)
from smartskin.surrogate import OracleParams

from conftest import BOUNDS, DX, TARGET


def lattice(P):
    return Lattice(P, P, DX, DX)


def random_layout(P, seed):
    return np.random.default_rng(seed).uniform(0.002, 0.04, (P, P, 1))


# ---------------------------------------------------------------------------
# mismatch


def test_self_match_is_zero(small_model, wave_cp):
    ctx = ForwardContext(wave_cp, small_model, lattice(7))
    G = random_layout(7, 0)
    assert current_mismatch(G, ctx.currents(G), ctx) <= 1e-20
    assert current_mismatch(G, ctx.currents(G), ctx) == 0.0


def test_zero_reference_is_hand_sum(small_model, wave_cp):
    ctx = ForwardContext(wave_cp, small_model, lattice(6))
    G = random_layout(6, 1)
    J = ctx.currents(G).J
    hand = 0.0
    for p in range(6):
        for q in range(6):
            for c in range(2):
                hand += DX * DX * abs(J[p, q, c]) ** 2
    assert current_mismatch(G, np.zeros_like(J), ctx) == pytest.approx(hand, rel=1e-12)


class ScaledContext:
    def __init__(self, ctx, alpha):
        self.ctx, self.alpha, self.lattice = ctx, alpha, ctx.lattice

    def currents(self, G):
        return self.ctx.currents(G).scaled(self.alpha)


def test_joint_scaling(small_model, wave_cp):
    ctx = ForwardContext(wave_cp, small_model, lattice(5))
    G = random_layout(5, 2)
    ref = ctx.currents(random_layout(5, 3))
    alpha = 2.5 - 1.5j
    d1 = current_mismatch(G, ref, ctx)
    d2 = current_mismatch(G, ref.scaled(alpha), ScaledContext(ctx, alpha))
    assert d2 == pytest.approx(abs(alpha) ** 2 * d1, rel=1e-12)


def test_mismatch_shape_check(small_model, wave_cp):
    ctx = ForwardContext(wave_cp, small_model, lattice(5))
    with pytest.raises(ValueError):
        current_mismatch(random_layout(5, 0), np.zeros((4, 4, 2)), ctx)


def test_layout_bounds():
    with pytest.raises(ValueError):
        LayoutDescriptors(np.full((3, 3), 0.05), BOUNDS)
    lo, hi = LayoutDescriptors(np.full((3, 3), 0.01), BOUNDS).box()
    assert lo.shape == (9,) and np.all(hi == 0.04)


# ---------------------------------------------------------------------------
# swarm


def sphere(center):
    return lambda x: float(np.sum((x - center) ** 2))


BOX10 = (np.full(10, -5.0), np.full(10, 5.0))


def test_config_validation():
    for kw in ({"A": 1}, {"N": 0}, {"w": 1.0}, {"c1": 0}, {"vclamp": 0}):
        with pytest.raises(ValueError):
            SbdConfig(**kw)


def test_sphere_converges():
    center = np.linspace(-3, 4, 10)
    x, hist, _ = pso_optimize(sphere(center), BOX10, SbdConfig(A=10, N=500, seed=0))
    diag2 = np.sum((BOX10[1] - BOX10[0]) ** 2)
    assert hist[-1] < 1e-6 * diag2
    assert len(hist) == 500


def test_single_iteration_is_best_initial():
    cost = sphere(np.zeros(10))
    seen = []
    x, hist, state = pso_optimize(cost, BOX10, SbdConfig(A=7, N=1, seed=3),
                                  callback=lambda s: seen.append(s.x.copy()))
    f0 = [cost(p) for p in seen[0]]
    assert hist.tolist() == [min(f0)]
    np.testing.assert_array_equal(x, seen[0][int(np.argmin(f0))])


def test_bounds_and_monotone_trace():
    lo, hi = np.zeros(6), np.array([1, 2, 3, 1, 2, 3.0])
    inside = []
    cost = sphere(np.array([1.2, -1, 3.5, 0.5, 1, 2]))  # optimum partly outside the box
    x, hist, _ = pso_optimize(cost, (lo, hi), SbdConfig(A=8, N=200, seed=1, vclamp=1.0),
                              callback=lambda s: inside.append(
                                  bool(np.all((s.x >= lo) & (s.x <= hi)))))
    assert all(inside)
    assert np.all(np.diff(hist) <= 0)
    np.testing.assert_allclose(x, [1, 0, 3, 0.5, 1, 2], atol=1e-2)


def test_seed_determinism_and_threads():
    cost = sphere(np.ones(10))
    a = pso_optimize(cost, BOX10, SbdConfig(N=50, seed=4))
    b = pso_optimize(cost, BOX10, SbdConfig(N=50, seed=4))
    c = pso_optimize(cost, BOX10, SbdConfig(N=50, seed=4, threads=3))
    for other in (b, c):
        np.testing.assert_array_equal(a[0], other[0])
        np.testing.assert_array_equal(a[1], other[1])
    d = pso_optimize(cost, BOX10, SbdConfig(N=50, seed=5))
    assert not np.array_equal(a[1], d[1])


def test_init_particle_is_used():
    center = np.full(10, 2.0)
    _, hist, _ = pso_optimize(sphere(center), BOX10, SbdConfig(N=1), init=center)
    assert hist[0] == 0.0


def test_warm_swarm():
    cfg = SbdConfig(A=6)
    lo, hi = np.zeros(4), np.ones(4)
    x0 = np.array([0.0, 0.5, 1.0, 0.2])
    S = warm_swarm(x0, (lo, hi), cfg, 0.1)
    assert S.shape == (6, 4)
    np.testing.assert_array_equal(S[0], x0)
    assert np.all((S >= lo) & (S <= hi))
    assert warm_swarm(x0, (lo, hi), cfg, 0.0).shape == (1, 4)


def test_curve_start(small_model, wave_cp):
    L = lattice(6)
    ctx = ForwardContext(wave_cp, small_model, L)
    G0 = curve_start(ctx.currents(np.full((6, 6, 1), 0.02)), small_model, L, wave_cp,
                     np.asarray(BOUNDS))
    assert G0.shape == (6, 6, 1)
    sides = np.asarray(small_model.meta["response_curve"]["side"])
    assert np.all(np.isin(G0, sides))


def test_curve_start_without_curve(small_model, wave_cp):
    class Bare:
        meta = {}
    assert curve_start(None, Bare(), lattice(5), wave_cp, np.asarray(BOUNDS)) is None


# ---------------------------------------------------------------------------
# pipeline


def tiny_run(model, wave, out):
    L = lattice(5)
    sc = Scenario(L, wave, Mounting(5.0), model, BOUNDS, target=TARGET, eval_oversample=2.0,
                  oracle_params=OracleParams())
    grid = sc.grid(1.0)
    mask = sc.mask(grid, uniform_reference_power(L, wave))
    cfg = SynthesisConfig(IptConfig(I=40, seed=1), SbdConfig(A=4, N=15, seed=2))
    rep = synthesize(mask, sc, cfg)
    rep.save(out)
    return rep


def digest(path):
    h = hashlib.sha256()
    for name in sorted(os.listdir(path)):
        h.update(name.encode())
        with open(os.path.join(path, name), "rb") as fh:
            h.update(fh.read())
    return h.hexdigest()


def test_degenerate_pipeline(small_model, wave_cp, tmp_path):
    rep = tiny_run(small_model, wave_cp, tmp_path / "a")
    files = set(os.listdir(tmp_path / "a"))
    assert {"report.json", "layout.csv", "currents_ref.csv", "currents_achieved.csv",
            "farfield.csv", "footprint.csv", "delta_trace.csv", "gamma_trace.csv"} <= files
    assert rep.layout.shape == (5, 5, 1)
    assert len(rep.delta_history) == 15
    assert np.all(np.diff(rep.delta_history) <= 0)
    m = rep.metrics
    assert {"achieved", "reference", "oracle", "target_ground_point"} <= set(m)
    assert np.isfinite(m["achieved"]["xi_pen_db"])


def test_pipeline_repeatable(small_model, wave_cp, tmp_path):
    tiny_run(small_model, wave_cp, tmp_path / "a")
    tiny_run(small_model, wave_cp, tmp_path / "b")
    assert digest(tmp_path / "a") == digest(tmp_path / "b")


def test_scenario_validation(small_model, wave_cp):
    with pytest.raises(ValueError):
        Scenario(lattice(5), wave_cp, Mounting(5.0), small_model, BOUNDS)
    with pytest.raises(ValueError):
        Scenario(lattice(4), wave_cp, Mounting(5.0), small_model, BOUNDS, target=TARGET)
