import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from thurston.rational import CurveNotInvariant, RationalMap, UnlocatablePoint
from thurston.sphere import chordal, from_complex
from thurston.sphere_map import RationalBackend


def _fixed_point_oracle(n):
    """Roots of ``f^n(z) = z`` for ``f(z) = 1 - 2/z^2``, by exact composition."""
    z = sp.symbols("z")
    g = z
    for _ in range(n):
        g = sp.together(1 - 2 / g**2)
    num, den = sp.fraction(sp.together(g - z))
    roots = sp.Poly(sp.expand(num), z).nroots(n=30, maxsteps=200)
    return [complex(r) for r in roots]


def test_critical_points_and_post_set(backend):
    crit = {(round(complex(c.to_complex()).real, 9), d) if np.isfinite(c.to_complex()) else ("inf", d)
            for c, d in backend.crit}
    assert crit == {(0.0, 2), ("inf", 2)}
    post = sorted(str(p.to_complex()) if p.is_infinity else round(p.to_complex().real, 12) for p in backend.post
                  if not p.is_infinity)
    assert post == [-1.0, 1.0]
    assert any(p.is_infinity for p in backend.post)
    assert not backend.has_periodic_critical_point()


@pytest.mark.parametrize("n", [1, 2, 3])
def test_preimage_count_degree_power(backend, n):
    from thurston.sphere_map import preimage_leaves

    y = from_complex(0.37 - 0.81j)
    z, w, deg = preimage_leaves(backend, y[0], y[1], n)
    assert deg.sum() == 2**n
    fz, fw = backend.f.iterate(z, w, n)
    assert chordal(fz, fw, y[0][0], y[1][0]).max() < 1e-9


@given(st.complex_numbers(max_magnitude=50, allow_nan=False, allow_infinity=False))
def test_preimages_map_back(t):
    f = RationalMap([-2, 0, 1], [0, 0, 1])
    y = from_complex(t)
    pts = f.preimages(y[0][0], y[1][0])
    assert sum(d for *_, d in pts) == 2
    for z, w, _ in pts:
        fz, fw = f.apply(np.array([z]), np.array([w]))
        assert chordal(fz[0], fw[0], y[0][0], y[1][0]) < 1e-8


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fixed_points_match_exact_composition(backend, n):
    from thurston.thermo import fixed_points

    fp = fixed_points(backend, n)
    got = [complex(z / w) for z, w in zip(fp.z, fp.w) if abs(w) > 1e-12]
    want = _fixed_point_oracle(n)
    assert len(got) == len(want) == 1 + 2**n
    for r in want:
        assert min(abs(r - g) for g in got) < 1e-8


def test_fixed_points_level_one_frozen(backend):
    from thurston.thermo import fixed_points

    fp = fixed_points(backend, 1)
    got = sorted((round(p.real, 12), round(p.imag, 12)) for p in (complex(z / w) for z, w in zip(fp.z, fp.w)))
    assert got == [(-1.0, 0.0), (1.0, -1.0), (1.0, 1.0)]


def test_rejects_degree_one_and_common_roots():
    with pytest.raises(ValueError):
        RationalMap([1, 1], [1])
    with pytest.raises(ValueError):
        RationalMap([-1, 0, 1], [-1, 1])


def test_curve_not_invariant():
    backend = RationalBackend(RationalMap([1j, 0, 1], [1], curve="real_line"))
    with pytest.raises(CurveNotInvariant, match="curve not invariant"):
        backend.template


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_unlocatable_point(backend):
    with pytest.raises(UnlocatablePoint, match="unlocatable point"):
        backend.branches.locate(np.array([np.nan + 0j]), np.array([1.0 + 0j]), 2)
