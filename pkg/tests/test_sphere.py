import numpy as np
from hypothesis import given, strategies as st

from thurston.sphere import (
    SpherePoint,
    chordal,
    fibonacci_sphere,
    from_complex,
    from_xyz,
    random_sphere,
    to_complex,
    to_xyz,
)

finite = st.complex_numbers(max_magnitude=1e6, allow_nan=False, allow_infinity=False)


def _pt(t):
    z, w = from_complex(t)
    return z[0], w[0]


@given(finite, finite)
def test_chordal_symmetric_and_bounded(a, b):
    za, wa = _pt(a)
    zb, wb = _pt(b)
    d = chordal(za, wa, zb, wb)
    assert 0.0 <= d <= 1.0 + 1e-15
    assert d == chordal(zb, wb, za, wa)


@given(finite, finite, finite)
def test_chordal_triangle_inequality(a, b, c):
    pa, pb, pc = _pt(a), _pt(b), _pt(c)
    assert chordal(*pa, *pc) <= chordal(*pa, *pb) + chordal(*pb, *pc) + 1e-12


@given(finite)
def test_chordal_is_half_euclidean_distance_on_unit_sphere(a):
    z, w = _pt(a)
    zi, wi = _pt(0.3 - 2j)
    xa, xb = to_xyz(z, w), to_xyz(zi, wi)
    assert np.isclose(chordal(z, w, zi, wi), np.linalg.norm(xa - xb) / 2, atol=1e-12)


@given(finite)
def test_xyz_roundtrip(a):
    z, w = _pt(a)
    z2, w2 = from_xyz(to_xyz(z, w))
    assert chordal(z, w, z2, w2) < 1e-12


def test_infinity_and_zero_land_on_poles():
    z, w = from_complex(np.array([0.0, np.inf]))
    xyz = to_xyz(z, w)
    assert np.allclose(xyz[0], [0, 0, -1])
    assert np.allclose(xyz[1], [0, 0, 1])
    assert np.isinf(to_complex(z, w)[1])


def test_sphere_point_equality_is_projective():
    assert SpherePoint(2.0 + 0j, 2.0 + 0j) == SpherePoint.from_complex(1.0)
    assert SpherePoint.infinity().is_infinity


def test_fibonacci_sphere_is_near_uniform():
    z, w = fibonacci_sphere(4000)
    xyz = to_xyz(z, w)
    assert np.allclose(xyz.mean(axis=0), 0.0, atol=1e-3)


def test_random_sphere_reproducible():
    a = random_sphere(np.random.default_rng(3), 5)
    b = random_sphere(np.random.default_rng(3), 5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
