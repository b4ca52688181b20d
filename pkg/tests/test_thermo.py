import cmath
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from thurston.rational import RationalMap
from thurston.sphere import SpherePoint, fibonacci_sphere
from thurston.sphere_map import RationalBackend, WeightScheme, preimage_leaves
from thurston.thermo import (
    NormalizationError,
    PressureSeries,
    UnitWeightsUnsupported,
    _separated_sum,
    check_separated,
    distortion_report,
    equilibrium_approximants,
    extrapolate,
    fixed_points,
    log_sum_exp,
    normalized_potential,
    pressure_periodic,
    pressure_preimage,
    ruelle_apply,
    separated_growth,
)

DEG = WeightScheme("localDegree")
UNIT = WeightScheme("unit")
BASE = 0.123 + 0.456j


def _phi_oracle(x):
    """Shipped potential ``0.5 * q(x, 0.3 + 0.7i)`` written out in the affine chart."""
    c = 0.3 + 0.7j
    return 0.5 * abs(x - c) / (math.sqrt(1 + abs(x) ** 2) * math.sqrt(1 + abs(c) ** 2))


def _inverse(y):
    """Both solutions of ``1 - 2 / x**2 = y``."""
    r = cmath.sqrt(2 / (1 - y))
    return [r, -r]


def _preimage_sum_oracle(n):
    layer = [(BASE, 0.0)]
    for _ in range(n):
        layer = [(x, s + _phi_oracle(x)) for y, s in layer for x in _inverse(y)]
    return math.log(math.fsum(math.exp(s) for _, s in layer)) / n


def test_log_sum_exp_edge_cases():
    assert log_sum_exp([]) == -math.inf
    assert log_sum_exp([0.0, 0.0]) == pytest.approx(math.log(2))
    assert log_sum_exp([1000.0, 1000.0]) == pytest.approx(1000 + math.log(2))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_extrapolate_recovers_exact_model(p, a):
    ns = np.arange(1, 13)
    got_p, got_a = extrapolate(ns, p + a / ns)
    assert got_p == pytest.approx(p, abs=1e-9)
    assert got_a == pytest.approx(a, abs=1e-8)


def test_series_rejects_nonincreasing_n():
    s = PressureSeries("preimage_deg")
    s.add(2, 1.0)
    with pytest.raises(ValueError):
        s.add(2, 1.0)


def test_zero_potential_gives_log_degree(backend, zero):
    s = pressure_preimage(backend, zero, DEG, n_max=12)
    assert all(abs(v - math.log(2)) <= 1e-12 for v in s.values)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_preimage_pressure_matches_closed_form_inverse(backend, phi, n):
    s = pressure_preimage(backend, phi, UNIT, base=SpherePoint.from_complex(BASE), n_max=n, n_min=n)
    assert s.values[0] == pytest.approx(_preimage_sum_oracle(n), abs=1e-12)


def test_unit_weights_rejected_with_periodic_critical_point(zero):
    basilica = RationalBackend(RationalMap([-1, 0, 1], [1]))
    assert basilica.has_periodic_critical_point()
    with pytest.raises(UnitWeightsUnsupported, match="unit weights unsupported"):
        pressure_preimage(basilica, zero, UNIT, n_max=3)


def test_ruelle_operator_matches_closed_form(backend, phi):
    x = SpherePoint.from_complex(BASE)
    got = ruelle_apply(backend, phi, lambda z, w: np.ones(np.shape(z)), x)
    want = math.fsum(math.exp(_phi_oracle(y)) for y in _inverse(BASE))
    assert got == pytest.approx(want, rel=1e-12)


@pytest.mark.parametrize("n", range(1, 9))
def test_weighted_fixed_point_count(backend, n):
    fp = fixed_points(backend, n)
    assert fp.weighted_count == 1 + 2**n
    assert len(fp) == 1 + 2**n
    assert float(np.max(fp.residual)) < 1e-9


def test_periodic_pressure_level_one_by_hand(backend, phi):
    s = pressure_periodic(backend, phi, DEG, n_max=1)
    want = math.log(math.fsum(math.exp(_phi_oracle(x)) for x in (-1, 1 - 1j, 1 + 1j)))
    assert s.values[0] == pytest.approx(want, abs=1e-12)


def test_separated_sets_are_separated(backend, zero):
    eps = 0.3
    _, chosen = _separated_sum(backend, zero, eps, 2, 4000)
    z, w = fibonacci_sphere(4000)
    assert check_separated(backend, backend.f.orbit_xyz(z[chosen], w[chosen], 2), eps)


def test_separated_oracle_growth_tracks_preimage_pressure(backend, phi, zero):
    """Growth of the separated sums, relative to phi = 0, matches ``P(phi) - log 2``."""
    grid = 100_000
    diff = separated_growth(backend, phi, 0.2, 3, grid) - separated_growth(backend, zero, 0.2, 3, grid)
    p = pressure_preimage(backend, phi, DEG, n_max=12).limit
    assert diff == pytest.approx(p - math.log(2), abs=0.02)


def test_separated_oracle_range():
    with pytest.raises(ValueError):
        _separated_sum(None, None, 0.1, 7, 10)


def test_normalization_residual_small_at_moderate_depth(backend, phi):
    pot = normalized_potential(backend, phi, depth=8, tol=0.1)
    assert pot.last_residual <= 0.1


def test_normalization_error_when_tolerance_unmet(backend, phi):
    with pytest.raises(NormalizationError, match="normalization residual too large"):
        normalized_potential(backend, phi, depth=2, tol=1e-9)


def test_normalized_potential_zero_pressure_for_zero_potential(backend, zero):
    """For phi = 0, u = 1 exactly and the normalized potential is -log 2."""
    pot = normalized_potential(backend, zero, depth=4, pressure=math.log(2), tol=1e-12)
    z, w = fibonacci_sphere(10)
    assert np.allclose(pot(z, w), -math.log(2), atol=1e-12)


def test_equilibrium_approximants_are_probability_measures(backend, phi):
    xi, xi_hat, xi_tilde = equilibrium_approximants(backend, phi, None, 6, tilde_depth=4)
    for mu in (xi, xi_hat, xi_tilde):
        assert abs(mu.mass - 1) < 1e-12
    assert len(xi_hat) == 6 * len(xi)


def test_distortion_report_shape(backend, phi):
    rep = distortion_report(backend, phi, [2, 4], pairs=30)
    assert [r["level"] for r in rep] == [2, 4]
    assert all(r["C1_hat"] >= 0 and r["C2_hat"] >= 1 for r in rep)


def test_degree_and_unit_weights_differ_by_log_max_degree(backend, phi):
    """Over a critical value some preimages carry degree 2, yet the two sums stay within ``log M / n``."""
    base = SpherePoint.from_complex(1.0)
    deg = pressure_preimage(backend, phi, DEG, base=base, n_max=10)
    unit = pressure_preimage(backend, phi, UNIT, base=base, n_max=10)
    for n, a, b in zip(deg.ns, deg.values, unit.values):
        big_m = int(preimage_leaves(backend, base.z, base.w, n)[2].max())
        assert 0 <= a - b <= math.log(big_m) / n + 1e-12
    assert deg.values[-1] > unit.values[-1]
