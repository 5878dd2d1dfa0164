import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smartskin.em import Direction, Lattice, PlaneWave
from smartskin.errors import DegenerateOperator
from smartskin.ipt import (FarFieldOperator, IptConfig, ipt_run, matching_index, project_pattern,
                           project_samples, tsvd_min_norm, tsvd_solve, uniform_reference_power)
from smartskin.radiation import (CoverageMask, FarFieldGrid, UVGrid, default_grid, far_field,
                                 pencil_mask)

from conftest import DX, F0

WAVE = PlaneWave(F0, e_te=1.0, e_tm=1j)
TGT = Direction.from_degrees(30.0, 40.0)


def angle_between(a, b):
    va = np.array([a.u, a.v, np.sqrt(1 - a.u ** 2 - a.v ** 2)])
    vb = np.array([b.u, b.v, np.sqrt(1 - b.u ** 2 - b.v ** 2)])
    return np.degrees(np.arccos(np.clip(va @ vb, -1, 1)))


def pencil_setup(P):
    L = Lattice(P, P, DX, DX)
    grid = default_grid(L, WAVE, 1.0, (TGT.u, TGT.v))
    return L, pencil_mask(grid, TGT, uniform_reference_power(L, WAVE))


def test_config_validation():
    for kw in ({"gamma": 0}, {"I": 0}, {"C": -1}, {"svd_cutoff": 1.0}, {"projection_mode": "x"}):
        with pytest.raises(ValueError):
            IptConfig(**kw)


# ---------------------------------------------------------------------------
# pattern projection


def small_grid():
    return UVGrid.regular(0.25)


def test_satisfied_pattern_unchanged():
    grid = small_grid()
    rng = np.random.default_rng(0)
    F = FarFieldGrid(grid, 3 + rng.normal(size=grid.shape + (2,)) * 0.1 + 0j)
    mask = CoverageMask(grid, grid.visible, 1.0)
    np.testing.assert_array_equal(project_pattern(F, mask).F, F.F)


def test_zero_sample_gets_real_root():
    f = np.zeros(3, dtype=complex)
    region = np.array([False, True, False])
    out = project_samples(f, region, np.array([0.0, 4.0, 0.0]))
    assert out[1] == 2.0
    assert out[0] == 0 and out[2] == 0


def test_projection_magnitude_rule():
    rng = np.random.default_rng(1)
    n = 500
    f = rng.normal(size=n) + 1j * rng.normal(size=n)
    region = rng.random(n) < 0.5
    M = rng.uniform(0, 4, n)
    out = project_samples(f, region, M)
    expect = np.where(region, np.maximum(np.abs(f), np.sqrt(M)), np.abs(f))
    np.testing.assert_allclose(np.abs(out), expect, rtol=1e-14)
    # phase retained
    np.testing.assert_allclose(np.angle(out), np.angle(f), atol=1e-12)


def test_literal_rule_discards_phase():
    f = np.array([1j * 0.5, -0.1])
    out = project_samples(f, np.array([True, True]), np.array([1.0, 1.0]), keep_phase=False)
    np.testing.assert_array_equal(out, [1.0, 1.0])


def test_vector_projection():
    f = np.array([[0.3, 0.4j], [3.0, 0.0]])
    out = project_samples(f, np.array([True, True]), np.array([1.0, 1.0]))
    np.testing.assert_allclose(out[0], [0.6, 0.8j])
    np.testing.assert_array_equal(out[1], f[1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.booleans())
def test_projection_idempotent(seed, keep):
    rng = np.random.default_rng(seed)
    n = 64
    f = rng.normal(size=n) + 1j * rng.normal(size=n)
    f[rng.random(n) < 0.1] = 0
    region = rng.random(n) < 0.6
    M = rng.uniform(0, 3, n)
    once = project_samples(f, region, M, keep)
    np.testing.assert_array_equal(project_samples(once, region, M, keep), once)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_matching_index_zero_iff_feasible(seed):
    rng = np.random.default_rng(seed)
    n = 40
    f = rng.normal(size=n) + 1j * rng.normal(size=n)
    region = rng.random(n) < 0.5
    region[0] = True
    M = rng.uniform(0, 1, n)
    g = matching_index(project_samples(f, region, M), f, region)
    feasible = np.all(np.abs(f[region]) ** 2 >= M[region])
    assert g >= 0
    assert (g == 0) == feasible


# ---------------------------------------------------------------------------
# truncated SVD


@pytest.fixture(scope="module")
def op6():
    L = Lattice(6, 6, DX, DX)
    return FarFieldOperator(L, WAVE, default_grid(L, WAVE, 1.0))


def test_tsvd_recovers_retained_current(op6):
    U, s, Vh = op6.svd
    keep = s >= 1e-3 * s[0]
    rng = np.random.default_rng(2)
    a = Vh[keep].conj().T @ (rng.normal(size=keep.sum()) + 1j * rng.normal(size=keep.sum()))
    J = tsvd_min_norm(op6, op6.apply(a), 1e-3)
    expect = op6.currents(a).J
    assert np.max(np.abs(J.J - expect)) <= 1e-8 * np.max(np.abs(expect))


def test_tsvd_accepts_vector_grid(op6):
    a = np.exp(1j * np.arange(36.0))
    far = far_field(op6.currents(a), WAVE, op6.grid)
    from_grid = tsvd_min_norm(op6, far, 1e-3).J
    from_samples = tsvd_min_norm(op6, op6.apply(a), 1e-3).J
    np.testing.assert_allclose(from_grid, from_samples, atol=1e-10 * np.abs(from_samples).max())


def test_operator_matches_far_field(op6):
    a = np.random.default_rng(3).normal(size=36) + 0j
    far = far_field(op6.currents(a), WAVE, op6.grid)
    back = op6.to_grid(op6.apply(a)).F
    np.testing.assert_allclose(back, far.F, atol=1e-12 * np.abs(far.F).max())


def test_tsvd_zero_target(op6):
    J = tsvd_min_norm(op6, np.zeros(op6.shape[0]), 1e-3)
    assert not J.J.any()


def test_tsvd_rank_deficient():
    rng = np.random.default_rng(4)
    A = rng.normal(size=(20, 5)) + 1j * rng.normal(size=(20, 5))
    A = np.hstack([A, A[:, :2]])  # duplicate columns
    x = tsvd_solve(A, rng.normal(size=20) + 0j, 1e-3)
    assert np.all(np.isfinite(x))
    # duplicated columns share their coefficient in the minimum-norm solution
    np.testing.assert_allclose(x[5:], x[:2], atol=1e-12)


def test_tsvd_degenerate():
    with pytest.raises(DegenerateOperator):
        tsvd_solve(np.zeros((4, 3)), np.ones(4), 1e-3)


# ---------------------------------------------------------------------------
# the loop


def test_trivial_mask_stops_at_first_iteration():
    L, mask = pencil_setup(6)
    zero = CoverageMask(mask.grid, mask.region, 0.0)
    res = ipt_run(zero, L, IptConfig(), WAVE)
    assert res.iterations_run == 1
    assert res.termination_reason == "converged"
    assert res.gamma_history[0] == 0.0


@pytest.fixture(scope="module")
def pencil_runs():
    L, mask = pencil_setup(10)
    return L, mask, [ipt_run(mask, L, IptConfig(seed=s), WAVE) for s in range(10)]


def test_output_in_phase_only_set(pencil_runs):
    _, _, runs = pencil_runs
    for r in runs:
        mag = np.linalg.norm(r.J_opt.J, axis=-1)
        assert np.max(np.abs(mag - 1.0)) < 1e-12


def test_history_bookkeeping(pencil_runs):
    _, _, runs = pencil_runs
    for r in runs:
        assert len(r.gamma_history) == r.iterations_run
        assert np.all(r.gamma_history >= 0)
        if r.termination_reason == "converged":
            assert r.gamma_history[-1] <= 1e-4


def test_two_seeds_same_bound(pencil_runs):
    L, mask, runs = pencil_runs
    a, b = runs[0], runs[1]
    assert not np.allclose(a.J_opt.J, b.J_opt.J)
    for r in (a, b):
        assert r.gamma_history[-1] <= max(1e-4, r.gamma_history[0] / 10)
        far = far_field(r.J_opt, WAVE, default_grid(L, WAVE, 10.0, (TGT.u, TGT.v)))
        assert angle_between(far.peak(), TGT) < 1.0


@pytest.mark.xfail(strict=True, reason="the trace dips slightly below its fixed point early "
                   "on, so the strict argmin usually sits in the first third of the run")
def test_late_minimum_regression_guard(pencil_runs):
    _, _, runs = pencil_runs
    late = [np.argmin(r.gamma_history) >= 0.9 * len(r.gamma_history) - 1 for r in runs]
    assert np.mean(late) >= 0.8


def test_late_iterations_hold_the_minimum(pencil_runs):
    _, _, runs = pencil_runs
    for r in runs:
        h = r.gamma_history
        assert h[int(0.9 * len(h)):].min() <= 1.01 * h.min()


def test_global_normalize_mode():
    L, mask = pencil_setup(6)
    res = ipt_run(mask, L, IptConfig(I=20, projection_mode="global-normalize"), WAVE)
    # the literal rule rescales the whole vector to norm C sqrt(n)
    assert np.linalg.norm(res.J_opt.J) == pytest.approx(np.sqrt(36))


def test_seeded_run_is_deterministic():
    L, mask = pencil_setup(6)
    a = ipt_run(mask, L, IptConfig(I=30, seed=7), WAVE)
    b = ipt_run(mask, L, IptConfig(I=30, seed=7), WAVE)
    np.testing.assert_array_equal(a.J_opt.J, b.J_opt.J)
    np.testing.assert_array_equal(a.gamma_history, b.gamma_history)
