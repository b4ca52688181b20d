"""Large-deviation diagnostics on the space of measures.

Measures are compared through a fixed weak* gauge: twelve smooth test
functions, the real and imaginary parts of low-order spherical harmonics
written in unit-sphere coordinates (rational functions of the chart
coordinate ``zeta = z / w``).  Each orbit measure ``W_n(y)`` is reduced to its
vector of twelve integrals, so sets of measures become weighted point clouds
in R^12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sphere import SpherePoint, from_xyz, to_xyz
from .sphere_map import EmpiricalMeasure, WeightScheme, birkhoff_sums, empirical_orbit_measure
from .thermo import (
    UnitWeightsUnsupported,
    _base_point,
    _forest_sums,
    cached_fixed_points,
    log_sum_exp,
    orbit_spread,
    preimage_weights,
)

__all__ = [
    "WeakStarGauge",
    "MeasureOnMeasures",
    "GAUGE",
    "omega_sequence",
    "concentration_curve",
    "constrained_pressure",
    "equidistribution_measures",
    "reference_measure",
    "rate_function_eval",
    "adversarial_base",
]

TEST_FUNCTION_NAMES = (
    "x", "y", "z",
    "x2-y2", "2xy", "xz", "yz", "(3z2-1)/2",
    "x3-3xy2", "3x2y-y3", "(5z2-1)x/4", "(5z2-1)y/4",
)


def _harmonics(xyz):
    x, y, z = xyz[:, 0], xyz[:, 1], xyz[:, 2]
    c = 5 * z * z - 1
    return np.stack(
        [
            x, y, z,
            x * x - y * y, 2 * x * y, x * z, y * z, (3 * z * z - 1) / 2,
            x**3 - 3 * x * y * y, 3 * x * x * y - y**3, c * x / 4, c * y / 4,
        ],
        axis=1,
    )


class WeakStarGauge:
    """Pseudometric ``max_t |<mu, u_t> - <nu, u_t>|`` over a fixed test family.

    Examples
    --------
    >>> g = WeakStarGauge()
    >>> mu = EmpiricalMeasure.from_weights(np.array([0j]), np.array([1 + 0j]), [1.0])
    >>> g.distance(mu, mu)
    0.0
    """

    names = TEST_FUNCTION_NAMES

    def __len__(self):
        return len(self.names)

    def features(self, z, w) -> np.ndarray:
        """Test-function values at homogeneous points, shape ``(N, 12)``."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        return _harmonics(to_xyz(z, w))

    def test_function(self, t: int):
        """The ``t``-th test function as a callable of homogeneous arrays."""
        return lambda z, w: self.features(z, w)[:, t]

    def coords(self, mu: EmpiricalMeasure) -> np.ndarray:
        """``(<mu, u_1>, ..., <mu, u_12>)``."""
        f = self.features(mu.z, mu.w)
        return np.array([math.fsum(col) for col in (f * mu.weight[:, None]).T])

    @staticmethod
    def coord_distance(a, b) -> float:
        return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), axis=-1))

    def distance(self, mu: EmpiricalMeasure, nu: EmpiricalMeasure) -> float:
        return self.coord_distance(self.coords(mu), self.coords(nu))


GAUGE = WeakStarGauge()


@dataclass
class MeasureOnMeasures:
    """Finitely supported measure ``sum_k p_k delta_{W_n(y_k)}``.

    Attributes
    ----------
    n : int
    source : {"preimage", "periodic"}
    z, w : ndarray
        Orbit starting points ``y_k``.
    log_weights : ndarray
        Unnormalized ``log(w_n(y_k)) + S_n phi(y_k)``.
    coords : ndarray, shape (K, 12)
        Gauge coordinates of each atom ``W_n(y_k)``.
    """

    n: int
    source: str
    z: np.ndarray
    w: np.ndarray
    log_weights: np.ndarray
    coords: np.ndarray

    @property
    def log_total(self) -> float:
        return log_sum_exp(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        p = np.exp(self.log_weights - np.max(self.log_weights))
        return p / math.fsum(p)

    def __len__(self):
        return self.log_weights.size

    def atom(self, k: int, backend) -> EmpiricalMeasure:
        """The orbit measure ``W_n(y_k)``."""
        return empirical_orbit_measure(backend, SpherePoint(self.z[k], self.w[k]), self.n)

    def mean_coords(self) -> np.ndarray:
        """Gauge coordinates of the barycenter ``sum_k p_k W_n(y_k)``."""
        p = self.weights
        return np.array([math.fsum(col) for col in (self.coords * p[:, None]).T])


def _orbit_coords(backend, z, w, n):
    acc = np.zeros((np.size(z), len(GAUGE)))
    for _ in range(n):
        acc += GAUGE.features(z, w)
        z, w = backend.f.apply(z, w)
    return acc / n


def omega_sequence(backend, phi, weights: WeightScheme, source: str = "preimage", base=None,
                   n_max: int = 12, n_min: int = 1) -> list:
    """``Omega_n`` for ``n = n_min .. n_max``.

    For ``source="preimage"`` the atoms are ``W_n(y)`` over ``y in f^{-n}(x_n)``
    and for ``source="periodic"`` over the fixed points of ``f^n``, with
    weights proportional to ``w_n(y) exp(S_n phi(y))``.  Log-weights are
    formed exactly as in the matching pressure estimator.

    Parameters
    ----------
    base : SpherePoint, sequence or callable, optional
        The base points ``x_n`` (preimage source only).

    Raises
    ------
    UnitWeightsUnsupported
    """
    if source not in ("preimage", "periodic"):
        raise ValueError(f"unknown source {source!r}")
    if weights.kind == "unit" and backend.has_periodic_critical_point():
        raise UnitWeightsUnsupported("unit weights unsupported")
    out = []
    if source == "periodic":
        for n in range(n_min, n_max + 1):
            fp = cached_fixed_points(backend, n)
            logs = np.log(weights(fp.deg)) + birkhoff_sums(backend, phi, fp.z, fp.w, n)
            out.append(MeasureOnMeasures(n, source, fp.z, fp.w, logs, _orbit_coords(backend, fp.z, fp.w, n)))
        return out
    constant = base is None or isinstance(base, SpherePoint)
    forest = None
    if constant:
        x = _base_point(base, 1)
        forest = _forest_sums(backend, phi, x.z, x.w, n_max)
    for n in range(n_min, n_max + 1):
        if constant:
            levels = forest[: n + 1]
        else:
            x = _base_point(base, n)
            levels = _forest_sums(backend, phi, x.z, x.w, n)
        lev, deg, s, _ = levels[n]
        # Orbit sums run along ancestor chains: f^i(y) is y's ancestor at level n - i.
        acc = np.zeros((levels[0][0].z.size, len(GAUGE)))
        for lv, *_ in levels[1:]:
            acc = acc[lv.parent] + GAUGE.features(lv.z, lv.w)
        logs = np.log(weights(deg)) + s
        out.append(MeasureOnMeasures(n, source, lev.z, lev.w, logs, acc / n))
    return out


def reference_measure(backend, phi, n: int = 14, base=None) -> EmpiricalMeasure:
    """Orbit-spread preimage approximant of the equilibrium state at level ``n``."""
    x = _base_point(base, n)
    z, w, p, _ = preimage_weights(backend, phi, x, n, WeightScheme("localDegree"))
    return EmpiricalMeasure.from_weights(*orbit_spread(backend, z, w, p, n))


def concentration_curve(omegas, mu_ref: EmpiricalMeasure, eps: float) -> list:
    """Mass of atoms farther than ``eps`` from ``mu_ref`` in the gauge.

    Returns
    -------
    list of (n, outside_mass, empirical_rate)
        The rate is ``-(1/n) log(outside_mass)``, ``inf`` when the mass is 0.
    """
    ref = GAUGE.coords(mu_ref)
    out = []
    for om in omegas:
        far = np.max(np.abs(om.coords - ref[None, :]), axis=1) > eps
        mass = math.fsum(om.weights[far])
        rate = math.inf if mass <= 0 else -math.log(mass) / om.n
        out.append((om.n, mass, rate))
    return out


def constrained_pressure(omegas, constraints) -> list:
    """``(1/n) log`` of the weighted sum over atoms inside the open gauge set
    ``{mu : |<mu, u_t> - c_t| < r_t for all t}``.

    Parameters
    ----------
    omegas : list of MeasureOnMeasures
    constraints : list of (t, center, radius)
        ``t`` indexes the gauge test functions; ``radius`` may be ``inf``.

    Returns
    -------
    list of (n, value); ``-inf`` marks an empty sum.
    """
    out = []
    for om in omegas:
        inside = np.ones(len(om), dtype=bool)
        for t, center, radius in constraints:
            if math.isinf(radius):
                continue
            inside &= np.abs(om.coords[:, t] - center) < radius
        out.append((om.n, log_sum_exp(om.log_weights[inside]) / om.n))
    return out


def equidistribution_measures(backend, phi, weights: WeightScheme | None = None, base=None,
                              n_range=range(8, 15)):
    """``nu_n`` (orbit-spread preimage measures) and ``eta_n`` (periodic measures).

    A periodic point's orbit measure and weight ``w_n e^{S_n phi}`` are shared
    by its whole cycle, so spreading along orbits leaves ``eta_n`` unchanged;
    ``eta_n`` is stored as the fixed points of ``f^n`` with those weights.

    Returns
    -------
    list of (n, nu_n, eta_n)
    """
    weights = weights or WeightScheme("localDegree")
    out = []
    for n in n_range:
        x = _base_point(base, n)
        z, w, p, _ = preimage_weights(backend, phi, x, n, weights)
        nu = EmpiricalMeasure.from_weights(*orbit_spread(backend, z, w, p, n))
        fp = cached_fixed_points(backend, n)
        logs = np.log(weights(fp.deg)) + birkhoff_sums(backend, phi, fp.z, fp.w, n)
        eta = EmpiricalMeasure.from_weights(fp.z, fp.w, np.exp(logs - logs.max()))
        out.append((n, nu, eta))
    return out


def adversarial_base(backend, scale: float = 1e-3):
    """Base points ``x_n`` at chordal distance about ``scale / n`` from a critical point."""
    c = backend.crit[0][0]
    cx = to_xyz(np.array([c.z]), np.array([c.w]))[0]
    tangent = np.cross(cx, [0.0, 0.0, 1.0] if abs(cx[2]) < 0.9 else [1.0, 0.0, 0.0])
    tangent /= np.linalg.norm(tangent)

    def at(n: int) -> SpherePoint:
        p = cx + (scale / n) * tangent
        z, w = from_xyz(p[None, :])
        return SpherePoint(complex(z[0]), complex(w[0]))

    return at


def rate_function_eval(label: str, backend, phi, pressure: float, n: int = 12) -> float:
    """``P - int phi dmu - h_mu`` for a measure with known entropy.

    Parameters
    ----------
    label : {"equilibrium", "max_entropy"}
        The equilibrium state of ``phi`` (entropy ``P - int phi``) or the
        measure of maximal entropy (entropy ``log deg f``).
    pressure : float
        Pressure estimate, typically the consensus value.
    n : int
        Level of the orbit-spread approximant used for ``int phi``.

    Raises
    ------
    ValueError
        "unknown entropy label".
    """
    from .potentials import zero_potential

    if label == "equilibrium":
        integral = reference_measure(backend, phi, n).integrate(phi)
        entropy = pressure - integral
    elif label == "max_entropy":
        integral = reference_measure(backend, zero_potential(), n).integrate(phi)
        entropy = math.log(backend.degree)
    else:
        raise ValueError("unknown entropy label")
    return pressure - integral - entropy
