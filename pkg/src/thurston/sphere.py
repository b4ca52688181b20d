"""Points of the Riemann sphere in homogeneous form, and the chordal metric.

Points are stored as pairs ``(z, w)`` standing for ``z / w``, normalized so
that ``max(|z|, |w|) == 1``.  Batched code uses two parallel complex arrays
instead of ``SpherePoint`` objects.

The chordal distance used throughout is

    q(x, y) = |z1 w2 - z2 w1| / (sqrt(|z1|^2 + |w1|^2) sqrt(|z2|^2 + |w2|^2)),

which is half the Euclidean distance between the corresponding points of the
unit sphere in R^3, so ``q(0, inf) == 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

TOL = 1e-9


def normalize(z, w):
    """Rescale homogeneous arrays so the larger modulus in each pair is 1."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    s = np.maximum(np.abs(z), np.abs(w))
    if np.any(s == 0):
        raise ValueError("(0, 0) is not a point of the sphere")
    return z / s, w / s


def from_complex(t):
    """Homogeneous coordinates for complex numbers; ``inf`` entries map to (1, 0)."""
    t = np.atleast_1d(np.asarray(t, dtype=complex))
    inf = ~np.isfinite(t)
    safe = np.where(inf, 0.0, t)
    z = np.where(inf, 1.0, safe)
    w = np.where(inf, 0.0, 1.0).astype(complex)
    return normalize(z, w)


def to_complex(z, w):
    """Affine coordinate ``z / w`` with ``inf`` where ``w == 0``."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = z / w
    return np.where(w == 0, complex(np.inf, 0.0), t)


def chordal(z1, w1, z2, w2):
    """Chordal distance between homogeneous points (broadcasts)."""
    num = np.abs(z1 * w2 - z2 * w1)
    den = np.sqrt(np.abs(z1) ** 2 + np.abs(w1) ** 2) * np.sqrt(np.abs(z2) ** 2 + np.abs(w2) ** 2)
    return num / den


def to_xyz(z, w):
    """Embed homogeneous points into the unit sphere of R^3 (0 -> south pole)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    n = np.abs(z) ** 2 + np.abs(w) ** 2
    p = z * np.conj(w)
    return np.stack([2 * p.real / n, 2 * p.imag / n, (np.abs(z) ** 2 - np.abs(w) ** 2) / n], axis=-1)


def from_xyz(xyz):
    """Inverse of :func:`to_xyz` for unit (or nonzero) vectors."""
    xyz = np.asarray(xyz, dtype=float)
    xyz = xyz / np.linalg.norm(xyz, axis=-1, keepdims=True)
    x, y, h = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    upper = h > 0
    # Use the chart that stays away from the pole being approached.
    z = np.where(upper, 1.0 + h, x + 1j * y)
    w = np.where(upper, x - 1j * y, 1.0 - h)
    return normalize(z, w)


@dataclass(frozen=True)
class SpherePoint:
    """A point of the Riemann sphere in normalized homogeneous coordinates.

    Parameters
    ----------
    z, w : complex
        Homogeneous coordinates, not both zero.  They are rescaled on
        construction so that the larger modulus equals one.

    Examples
    --------
    >>> SpherePoint.from_complex(2.0) == SpherePoint(4.0, 2.0)
    True
    >>> SpherePoint.infinity().is_infinity
    True
    """

    z: complex
    w: complex

    def __post_init__(self):
        z, w = complex(self.z), complex(self.w)
        s = max(abs(z), abs(w))
        if s == 0 or not math.isfinite(s):
            raise ValueError("homogeneous coordinates must be finite and not both zero")
        object.__setattr__(self, "z", z / s)
        object.__setattr__(self, "w", w / s)

    @classmethod
    def from_complex(cls, t) -> "SpherePoint":
        t = complex(t)
        if not (math.isfinite(t.real) and math.isfinite(t.imag)):
            return cls.infinity()
        return cls(t, 1.0)

    @classmethod
    def infinity(cls) -> "SpherePoint":
        return cls(1.0, 0.0)

    @property
    def is_infinity(self) -> bool:
        return abs(self.w) <= 1e-300

    def to_complex(self) -> complex:
        if self.is_infinity:
            return complex(math.inf, 0.0)
        return self.z / self.w

    def distance(self, other: "SpherePoint") -> float:
        """Chordal distance to ``other``."""
        return float(chordal(self.z, self.w, other.z, other.w))

    def __eq__(self, other):
        if not isinstance(other, SpherePoint):
            return NotImplemented
        return self.distance(other) < TOL

    def __hash__(self):
        # Equality is tolerance based, so only a constant hash is consistent.
        return 0

    def __repr__(self):
        if self.is_infinity:
            return "SpherePoint(inf)"
        t = self.to_complex()
        return f"SpherePoint({t.real:.12g}{t.imag:+.12g}j)"


def points_to_arrays(points):
    """Stack a sequence of :class:`SpherePoint` into homogeneous arrays."""
    z = np.array([p.z for p in points], dtype=complex)
    w = np.array([p.w for p in points], dtype=complex)
    return z, w


def arrays_to_points(z, w):
    return [SpherePoint(a, b) for a, b in zip(np.ravel(z), np.ravel(w))]


def fibonacci_sphere(n: int):
    """Deterministic, nearly uniform sample of ``n`` sphere points."""
    i = np.arange(n) + 0.5
    h = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - h * h))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    xyz = np.stack([r * np.cos(phi), r * np.sin(phi), h], axis=-1)
    return from_xyz(xyz)


def random_sphere(rng: np.random.Generator, n: int):
    """Uniform random sphere points (rotation invariant)."""
    v = rng.normal(size=(n, 3))
    return from_xyz(v)
