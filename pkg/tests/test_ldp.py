import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thurston.ldp import (
    GAUGE,
    adversarial_base,
    concentration_curve,
    constrained_pressure,
    equidistribution_measures,
    omega_sequence,
    rate_function_eval,
    reference_measure,
)
from thurston.sphere import chordal, fibonacci_sphere, random_sphere, to_xyz
from thurston.sphere_map import EmpiricalMeasure, WeightScheme, empirical_orbit_measure
from thurston.thermo import pressure_periodic, pressure_preimage

DEG = WeightScheme("localDegree")


def _random_measure(seed, size):
    rng = np.random.default_rng(seed)
    z, w = random_sphere(rng, size)
    return EmpiricalMeasure.from_weights(z, w, rng.random(size) + 0.01)


@given(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000))
def test_gauge_is_a_pseudometric(a, b, c):
    mu, nu, rho = (_random_measure(s, 7) for s in (a, b, c))
    d = GAUGE.distance
    assert d(mu, mu) == 0.0
    assert d(mu, nu) == d(nu, mu)
    assert d(mu, rho) <= d(mu, nu) + d(nu, rho) + 1e-15


@given(st.integers(0, 10_000))
def test_gauge_bounded_for_probability_measures(seed):
    """Every test function has sup norm at most 1, so distances stay in [0, 2]."""
    mu, nu = _random_measure(seed, 5), _random_measure(seed + 1, 5)
    assert 0.0 <= GAUGE.distance(mu, nu) <= 2.0


def test_gauge_features_against_direct_formulas():
    z, w = fibonacci_sphere(50)
    xyz = to_xyz(z, w)
    x, y, h = xyz.T
    f = GAUGE.features(z, w)
    assert np.allclose(f[:, 2], h)
    assert np.allclose(f[:, 3] + 1j * f[:, 4], (x + 1j * y) ** 2)
    assert np.allclose(f[:, 8] + 1j * f[:, 9], (x + 1j * y) ** 3)


def test_omega_weights_are_probabilities(backend, phi):
    for om in omega_sequence(backend, phi, DEG, n_max=6):
        assert len(om) == 2**om.n
        assert math.fsum(om.weights) == pytest.approx(1, abs=1e-12)


def test_omega_uniform_for_zero_potential_and_unit_weights(backend, zero):
    for om in omega_sequence(backend, zero, WeightScheme("unit"), n_max=5):
        assert np.allclose(om.weights, 2.0**-om.n)


def test_omega_coords_match_direct_orbit_measures(backend, phi):
    om = omega_sequence(backend, phi, DEG, n_max=4, n_min=4)[0]
    for k in (0, 5, 11):
        assert np.allclose(om.coords[k], GAUGE.coords(om.atom(k, backend)), atol=1e-12)


def test_periodic_omega_has_all_fixed_points(backend, phi):
    for om in omega_sequence(backend, phi, DEG, source="periodic", n_max=6):
        assert len(om) == 1 + 2**om.n


def test_periodic_barycenter_is_eta(backend, phi):
    """Folding periodic atoms along cycles gives back the stored fixed-point measure."""
    om = omega_sequence(backend, phi, DEG, source="periodic", n_min=7, n_max=7)[0]
    (_, _, eta), = equidistribution_measures(backend, phi, n_range=[7])
    assert np.allclose(om.mean_coords(), GAUGE.coords(eta), atol=1e-12)


def test_unconstrained_pressure_equals_estimators(backend, phi):
    pre = pressure_preimage(backend, phi, DEG, n_max=6)
    per = pressure_periodic(backend, phi, DEG, n_max=6)
    for source, series in (("preimage", pre), ("periodic", per)):
        oms = omega_sequence(backend, phi, DEG, source=source, n_max=6)
        got = [v for _, v in constrained_pressure(oms, [(0, 0.0, math.inf)])]
        assert np.allclose(got, series.values, atol=1e-12)


def test_constrained_pressure_monotone_in_radius(backend, phi):
    oms = omega_sequence(backend, phi, DEG, n_max=8)
    ref = GAUGE.coords(reference_measure(backend, phi, 8))
    prev = None
    for r in (math.inf, 0.3, 0.1, 0.03):
        cur = [v for _, v in constrained_pressure(oms, [(t, ref[t], r) for t in range(len(GAUGE))])]
        if prev is not None:
            assert all(c <= p for c, p in zip(cur, prev))
        prev = cur


def test_concentration_curve_limits(backend, phi):
    oms = omega_sequence(backend, phi, DEG, n_max=5)
    mu = reference_measure(backend, phi, 8)
    for n, mass, rate in concentration_curve(oms, mu, 3.0):
        assert mass == 0 and rate == math.inf
    for n, mass, rate in concentration_curve(oms, mu, -1.0):
        assert mass == pytest.approx(1) and rate == pytest.approx(0, abs=1e-12)


def test_equidistribution_measures_are_probabilities(backend, phi):
    for n, nu, eta in equidistribution_measures(backend, phi, n_range=[6, 7]):
        assert abs(nu.mass - 1) < 1e-12 and abs(eta.mass - 1) < 1e-12
        assert len(eta) == 1 + 2**n


def test_adversarial_base_approaches_critical_point(backend):
    at = adversarial_base(backend, scale=1e-3)
    c = backend.crit[0][0]
    for n in (1, 5, 10):
        x = at(n)
        d = float(chordal(np.array([x.z]), np.array([x.w]), np.array([c.z]), np.array([c.w]))[0])
        assert 0 < d < 1e-3 / n


def test_rate_function_vanishes_on_equilibrium(backend, phi):
    p = pressure_preimage(backend, phi, DEG, n_max=10).limit
    assert rate_function_eval("equilibrium", backend, phi, p, n=10) == pytest.approx(0, abs=1e-12)
    assert rate_function_eval("max_entropy", backend, phi, p, n=10) >= 0


def test_rate_function_unknown_label(backend, phi):
    with pytest.raises(ValueError, match="unknown entropy label"):
        rate_function_eval("bogus", backend, phi, 1.0)


def test_orbit_measure_gauge_is_average_of_features(backend):
    x = random_sphere(np.random.default_rng(3), 1)
    from thurston.sphere import SpherePoint

    p = SpherePoint(complex(x[0][0]), complex(x[1][0]))
    mu = empirical_orbit_measure(backend, p, 3)
    z, w = np.array([p.z]), np.array([p.w])
    acc = np.zeros(len(GAUGE))
    for _ in range(3):
        acc += GAUGE.features(z, w)[0]
        z, w = backend.f.apply(z, w)
    assert np.allclose(GAUGE.coords(mu), acc / 3, atol=1e-14)
