from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thurston.sphere import SpherePoint, chordal, random_sphere
from thurston.sphere_map import (
    EmpiricalMeasure,
    NotAVertex,
    VertexRef,
    WeightScheme,
    birkhoff_sum,
    birkhoff_sums,
    empirical_orbit_measure,
    evaluate,
    exact_weights,
    iterated_preimages,
    local_degree,
    map_from_spec,
    preimage_leaves,
    preimages,
)

points = st.complex_numbers(max_magnitude=20, allow_nan=False, allow_infinity=False)


@given(st.lists(st.integers(1, 64), min_size=1, max_size=20))
def test_weight_schemes_stay_in_range(degs):
    d = np.array(degs)
    for ws in (WeightScheme("unit"), WeightScheme("localDegree"), WeightScheme("custom", custom=lambda x: x**2)):
        w = ws(d)
        assert np.all(w >= 1) and np.all(w <= d)


def test_unknown_weight_scheme():
    with pytest.raises(ValueError):
        WeightScheme("bogus")


@given(points, st.integers(0, 10))
def test_degree_sum_over_preimages(backend, t, n):
    y = SpherePoint.from_complex(t)
    _, _, deg = preimage_leaves(backend, y.z, y.w, n)
    assert int(deg.sum()) == 2**n


@given(points)
def test_batched_forest_matches_recursive_tree(backend, t):
    y = SpherePoint.from_complex(t)
    tree = iterated_preimages(backend, y, 3)
    z, w, deg = preimage_leaves(backend, y.z, y.w, 3)
    leaves = tree.leaves()
    assert len(leaves) == z.size
    for leaf in leaves:
        k = int(np.argmin(chordal(z, w, leaf.point.z, leaf.point.w)))
        assert chordal(z[k], w[k], leaf.point.z, leaf.point.w) < 1e-9
        assert deg[k] == leaf.deg


def test_critical_value_fiber_merges(backend):
    # 0 is critical with f(0) = inf, so the fiber of inf is {0} with degree 2.
    (x, d), = preimages(backend, SpherePoint.infinity())
    assert d == 2 and abs(x.to_complex()) < 1e-12
    assert local_degree(backend, x) == 2


@given(points, st.integers(1, 8))
def test_birkhoff_batched_matches_scalar(backend, phi, t, n):
    x = SpherePoint.from_complex(t)
    s = birkhoff_sums(backend, phi, np.array([x.z]), np.array([x.w]), n)[0]
    assert s == pytest.approx(birkhoff_sum(backend, phi, x, n), abs=1e-12)


def test_empirical_orbit_measure_merges_fixed_point(backend):
    mu = empirical_orbit_measure(backend, SpherePoint.from_complex(-1.0), 5)
    assert len(mu) == 1 and mu.mass == pytest.approx(1.0, abs=1e-15)


@given(st.lists(st.floats(0.0, 1e6), min_size=1, max_size=30).filter(lambda x: sum(x) > 0))
def test_measure_mass_one(ws):
    mu = EmpiricalMeasure.from_weights(np.zeros(len(ws)) + 0j, np.ones(len(ws)) + 0j, ws)
    assert abs(mu.mass - 1.0) < 1e-12
    assert sum(exact_weights(ws)) == Fraction(1)


def test_measure_rejects_zero_mass():
    with pytest.raises(ValueError):
        EmpiricalMeasure.from_weights([0j], [1 + 0j], [0.0])


def test_subdivision_backend_vertex_calculus(rule):
    p0 = VertexRef((0,), 0)
    assert evaluate(rule, p0) == p0
    pre = preimages(rule, p0)
    assert sum(d for _, d in pre) == 6
    assert local_degree(rule, p0) == 2
    with pytest.raises(NotAVertex, match="not a vertex"):
        evaluate(rule, SpherePoint.from_complex(0.0))


def test_map_spec_validation():
    with pytest.raises(ValueError):
        map_from_spec({"kind": "rational", "num": [1, 0, 1]})
    with pytest.raises(ValueError):
        map_from_spec({"kind": "nope"})
    with pytest.raises(ValueError):
        map_from_spec({"kind": "rational", "num": [-2, 0, 1], "den": [0, 0, 1], "curve": "spiral"})


def test_random_points_have_generic_fibers(backend):
    z, w = random_sphere(np.random.default_rng(0), 20)
    rz, rw = backend.f.preimage_roots(z, w)
    assert rz.shape == (20, 2)


def test_combinatorial_local_degree_matches_geometry(backend):
    from thurston.sphere_map import SubdivisionBackend

    comb = SubdivisionBackend(backend.template)
    for j, post in enumerate(backend.geometry.post):
        x = SpherePoint(*post)
        assert local_degree(comb, VertexRef((0,), j)) == local_degree(backend, x)
