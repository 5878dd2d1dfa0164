import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.constants import c as C0

from smartskin.em import (ETA0, Direction, Mounting, PlaneWave, footprint_point, incident_basis,
                          incident_fields)
from smartskin.errors import NoGroundIntersection

from conftest import F0, TARGET


def test_broadside_basis():
    k, e_te, e_tm = incident_basis(PlaneWave(F0))
    np.testing.assert_allclose(e_te, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(e_tm, [1, 0, 0], atol=1e-15)


def test_broadside_wavevector():
    wave = PlaneWave(F0)
    k, _, _ = incident_basis(wave)
    k0 = 2 * np.pi * F0 / C0
    np.testing.assert_allclose(k, [0, 0, -k0], rtol=1e-15)
    # the quoted 73.30 rad/m is a rounding of 73.355
    assert k0 == pytest.approx(73.30, abs=0.06)


def test_oblique_wavevector_and_triad():
    wave = PlaneWave(F0, incidence=TARGET)
    k, e_te, e_tm = incident_basis(wave)
    np.testing.assert_allclose(k / -wave.k0, [0.7585, -0.1066, 0.6428], atol=1e-4)
    k_hat = k / wave.k0
    for a, b in [(e_te, e_tm), (e_te, k_hat), (e_tm, k_hat)]:
        assert abs(a @ b) < 1e-12
    assert np.linalg.norm(e_te) == pytest.approx(1.0)
    assert np.linalg.norm(e_tm) == pytest.approx(1.0)


def test_circular_broadside_field():
    E, _ = incident_fields(PlaneWave(F0, e_te=1.0, e_tm=1j), np.zeros(3))
    np.testing.assert_allclose(E, [1j, 1, 0], atol=1e-15)


def test_field_period_along_propagation():
    wave = PlaneWave(F0, incidence=Direction.from_degrees(30, 40), e_te=0.3, e_tm=1 - 2j)
    k, _, _ = incident_basis(wave)
    r = np.array([0.1, -0.2, 0.05])
    E1, H1 = incident_fields(wave, r)
    E2, H2 = incident_fields(wave, r + wave.wavelength * k / wave.k0)
    np.testing.assert_allclose(E2, E1, atol=1e-12)
    np.testing.assert_allclose(H2, H1, atol=1e-12)


def test_broadside_te_magnetic_field():
    _, H = incident_fields(PlaneWave(F0, e_te=1.0), np.zeros(3))
    np.testing.assert_allclose(H, [1 / ETA0, 0, 0], atol=1e-15)


def test_footprint_spot():
    x, y = footprint_point(TARGET, Mounting(5.0))
    assert np.hypot(x + 35.7, y - 30.14) <= 0.2


def test_footprint_parallel_ray():
    # theta = 90, phi = 0 runs along the wall; positive v points upwards
    with pytest.raises(NoGroundIntersection):
        footprint_point(Direction.from_degrees(90.0, 0.0), Mounting(5.0))
    with pytest.raises(NoGroundIntersection):
        footprint_point(Direction.from_degrees(40.0, 60.0), Mounting(5.0))


def test_footprint_doubles_with_height():
    p5 = np.array(footprint_point(TARGET, Mounting(5.0)))
    p10 = np.array(footprint_point(TARGET, Mounting(10.0)))
    np.testing.assert_allclose(p10, 2 * p5, rtol=1e-14)


def test_mount_is_proper_rotation():
    R = Mounting(5.0).rotation
    np.testing.assert_allclose(R @ R.T, np.eye(3), atol=1e-15)
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_validation():
    with pytest.raises(ValueError):
        PlaneWave(0.0)
    with pytest.raises(ValueError):
        PlaneWave(F0, e_te=0.0, e_tm=0.0)
    with pytest.raises(ValueError):
        Mounting(0.0)


angles = st.tuples(st.floats(0.5, 89.5), st.floats(-180, 180))
amps = st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(angles)
def test_right_handed_triad(ang):
    wave = PlaneWave(F0, incidence=Direction.from_degrees(*ang))
    k, e_te, e_tm = incident_basis(wave)
    k_hat = k / wave.k0
    assert abs(e_te @ e_tm) < 1e-12
    assert abs(e_te @ k_hat) < 1e-12
    assert abs(e_tm @ k_hat) < 1e-12
    np.testing.assert_allclose(np.cross(e_te, e_tm), k_hat, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(angles, amps, amps, st.lists(st.floats(-1, 1), min_size=3, max_size=3))
def test_impedance_relation(ang, a, b, r):
    if abs(a) ** 2 + abs(b) ** 2 < 1e-6:
        return
    wave = PlaneWave(F0, incidence=Direction.from_degrees(*ang), e_te=a, e_tm=b)
    E, H = incident_fields(wave, np.array(r))
    assert ETA0 * np.linalg.norm(H) == pytest.approx(np.linalg.norm(E), rel=1e-12)
    assert abs(E @ incident_basis(wave)[0]) < 1e-9 * np.linalg.norm(E) * wave.k0


@settings(max_examples=40, deadline=None)
@given(st.floats(30, 85), st.floats(-170, -10), st.floats(0.5, 50))
def test_footprint_homogeneous_in_height(theta, phi, H):
    d = Direction.from_degrees(theta, phi)
    base = np.array(footprint_point(d, Mounting(1.0)))
    np.testing.assert_allclose(footprint_point(d, Mounting(H)), H * base, rtol=1e-12)
