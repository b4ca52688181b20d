"""Built-in potential families.

Two families are supported: constants, and ``a * q(x, x0)**beta`` where ``q``
is the chordal distance to a center ``x0``.  Potentials act on homogeneous
coordinate arrays.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .sphere import chordal, from_complex

DATA = Path(__file__).with_name("data")


@dataclass(frozen=True)
class Potential:
    """A real-valued potential on the sphere.

    Parameters
    ----------
    family : {"constant", "chordal_power"}
    a : float
        Constant value, or amplitude of the power family.
    beta : float
        Exponent of the power family; the Hoelder exponent is ``min(beta, 1)``.
    center : complex
        Center of the power family.

    Examples
    --------
    >>> phi = Potential("constant", a=0.5)
    >>> float(phi(np.array([1j]), np.array([1.0]))[0])
    0.5
    """

    family: str
    a: float = 0.0
    beta: float = 1.0
    center: complex = 0j

    def __post_init__(self):
        if self.family not in ("constant", "chordal_power"):
            raise ValueError(f"unknown potential family {self.family!r}")
        if self.family == "chordal_power" and not self.beta > 0:
            raise ValueError("beta must be positive")

    @property
    def alpha(self) -> float:
        return 1.0 if self.family == "constant" else min(self.beta, 1.0)

    @property
    def is_zero(self) -> bool:
        return self.a == 0.0

    def __call__(self, z, w):
        z = np.asarray(z, dtype=complex)
        if self.family == "constant":
            return np.full(z.shape, float(self.a))
        cz, cw = from_complex(self.center)
        return self.a * chordal(z, np.asarray(w, dtype=complex), cz[0], cw[0]) ** self.beta

    def sup_norm(self) -> float:
        return abs(self.a)

    def to_dict(self) -> dict:
        out = {"family": self.family, "a": self.a}
        if self.family == "chordal_power":
            out["beta"] = self.beta
            out["center"] = [self.center.real, self.center.imag]
        return out


def potential_from_spec(spec: dict) -> Potential:
    """Parse ``{"family": ..., "a": ..., "beta": ..., "center": [re, im]}``."""
    try:
        family = spec["family"]
        a = float(spec.get("a", 0.0))
        beta = float(spec.get("beta", 1.0))
        c = spec.get("center", [0.0, 0.0])
        center = complex(float(c[0]), float(c[1]))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ValueError(f"malformed potential spec: {exc}") from exc
    return Potential(family, a, beta, center)


def zero_potential() -> Potential:
    return Potential("constant", 0.0)


def shipped_potential() -> Potential:
    with open(DATA / "shipped_potential.json") as fh:
        return potential_from_spec(json.load(fh))
