"""Map backends and the basic dynamical operations on them.

Two interchangeable backends describe an expanding Thurston map:

* :class:`RationalBackend` wraps a postcritically finite rational map with an
  invariant great circle.  Points are :class:`~thurston.sphere.SpherePoint`.
* :class:`SubdivisionBackend` wraps a two-tile subdivision rule given as data.
  Points are combinatorial vertex references.

Both expose ``engine`` (the word calculus of :mod:`thurston.cell_complex`),
``degree`` and ``template``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path

import numpy as np

from .cell_complex import Engine
from .rational import (
    CurveNotInvariant,
    InverseBranches,
    RationalMap,
    RootSolveError,
    TemplateExtractor,
)
from .sphere import SpherePoint, chordal, normalize, points_to_arrays
from .template import Template, template_from_dict

__all__ = [
    "RationalBackend",
    "SubdivisionBackend",
    "VertexRef",
    "NotAVertex",
    "WeightScheme",
    "EmpiricalMeasure",
    "PreimageNode",
    "load_map_spec",
    "map_from_spec",
    "shipped_map",
    "shipped_subdivision_rule",
    "evaluate",
    "local_degree",
    "preimages",
    "iterated_preimages",
    "preimage_leaves",
    "preimage_levels",
    "birkhoff_sum",
    "empirical_orbit_measure",
    "RootSolveError",
    "CurveNotInvariant",
]

DATA = Path(__file__).with_name("data")


class NotAVertex(TypeError):
    pass


@dataclass(frozen=True)
class VertexRef:
    """A vertex of some level, addressed by a tile word and a corner index."""

    word: tuple
    corner: int


class RationalBackend:
    """Rational map with an invariant curve.

    Parameters
    ----------
    fmap : RationalMap

    Notes
    -----
    The template, engine and inverse branches are built on first use, since
    some operations (evaluation, preimages) need none of them.
    """

    kind = "rational"
    # Linear local connectivity constant of the visual metric: metadata only, never estimated.
    local_connectivity = None

    def __init__(self, fmap: RationalMap):
        self.f = fmap
        self.crit = [(SpherePoint(z, w), d) for z, w, d in fmap.critical_points()]
        if sum(d - 1 for _, d in self.crit) != 2 * fmap.d - 2:
            raise ValueError("Riemann-Hurwitz check failed")
        self.post = [SpherePoint(z, w) for z, w in fmap.postcritical()]
        if len(self.post) < 3:
            raise ValueError("postcritical set has fewer than three points")

    @property
    def degree(self) -> int:
        return self.f.d

    @cached_property
    def _extracted(self):
        return TemplateExtractor(self.f).extract()

    @property
    def template(self) -> Template:
        return self._extracted[0]

    @property
    def geometry(self):
        return self._extracted[1]

    @cached_property
    def engine(self) -> Engine:
        return Engine(self.template)

    @cached_property
    def branches(self) -> InverseBranches:
        return InverseBranches(self.f, self.template, self.geometry)

    def has_periodic_critical_point(self) -> bool:
        return self.f.has_periodic_critical_point()

    # -- batched helpers ----------------------------------------------------------

    def apply(self, z, w):
        return self.f.apply(z, w)

    def local_degree_arrays(self, z, w):
        """Local degree at each point (1 off the critical set)."""
        out = np.ones(np.shape(z), dtype=np.int64)
        for c, d in self.crit:
            out = np.where(chordal(z, w, c.z, c.w) < 1e-8, d, out)
        return out

    def word_points(self, words, corner=None):
        """Embed tile words: the image of the 0-tile center, or of a corner."""
        geo = self.geometry
        if corner is None:
            cen = [self.f.curve.center(w[-1] if len(w) == 1 else self.template.tiles[w[-1]].color) for w in words]
            z = np.array([np.ravel(c[0])[0] for c in cen])
            w_ = np.array([np.ravel(c[1])[0] for c in cen])
        else:
            z = np.full(len(words), geo.post[corner][0], dtype=complex)
            w_ = np.full(len(words), geo.post[corner][1], dtype=complex)
        return self.branches.g(list(words), z, w_)

    def vertex_positions(self, level) -> np.ndarray:
        """Homogeneous position of every vertex of a built level, shape (V, 2).

        Corner ``i`` of an n-tile is sent by ``f^n`` to the post point
        ``P_i``, so it is the image of ``P_i`` under the inverse branch of the
        tile.
        """
        nv = level.n_vertices
        out = np.empty((nv, 2), dtype=complex)
        by_corner: dict[int, list] = {}
        for v, (word, i) in enumerate(level.vertex_reps):
            by_corner.setdefault(i, []).append(v)
        for i, vs in by_corner.items():
            words = [level.vertex_reps[v][0] for v in vs]
            if level.n == 0:
                z = np.full(len(vs), self.geometry.post[i][0])
                w = np.full(len(vs), self.geometry.post[i][1])
            else:
                z, w = self.word_points(words, corner=i)
            out[vs, 0] = z
            out[vs, 1] = w
        return out


class SubdivisionBackend:
    """Two-tile subdivision rule given as data.

    Parameters
    ----------
    template : Template
        Validated at construction (the template constructor validates).
    """

    kind = "subdivision"
    local_connectivity = None

    def __init__(self, template: Template):
        template.validate()
        self.template = template
        self.engine = Engine(template)

    @property
    def degree(self) -> int:
        return self.template.degree

    def has_periodic_critical_point(self) -> bool:
        return bool(self.template.periodic_critical())


# -- loading ------------------------------------------------------------------------------


def map_from_spec(spec: dict):
    """Backend from a parsed map spec.

    Parameters
    ----------
    spec : dict
        ``{"kind": "rational", "num": [...], "den": [...], "curve":
        "real_line", "n_C": 1}`` or a subdivision spec (see
        :func:`thurston.template.template_from_dict`).  Coefficients are in
        increasing degree order; complex entries may be written as
        ``[re, im]`` pairs.

    Raises
    ------
    ValueError
        On malformed specs (``TemplateError`` is a subclass).
    """
    kind = spec.get("kind")
    if kind == "rational":
        try:
            num = [_complex(c) for c in spec["num"]]
            den = [_complex(c) for c in spec["den"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed rational spec: {exc}") from exc
        curve = spec.get("curve", "real_line")
        if curve not in ("real_line", "unit_circle"):
            raise ValueError(f"unknown curve {curve!r}")
        return RationalBackend(RationalMap(num, den, curve=curve, n_C=int(spec.get("n_C", 1))))
    if kind == "subdivision":
        return SubdivisionBackend(template_from_dict(spec))
    raise ValueError(f"unknown map kind {kind!r}")


def _complex(c):
    if isinstance(c, (list, tuple)):
        return complex(float(c[0]), float(c[1]))
    return complex(c)


def load_map_spec(path):
    with open(path) as fh:
        return map_from_spec(json.load(fh))


def shipped_map() -> RationalBackend:
    """The degree-2 map ``z -> 1 - 2/z^2`` with the extended real line."""
    return load_map_spec(DATA / "shipped_rational.json")


def shipped_subdivision_rule() -> SubdivisionBackend:
    """Subdivision rule with a critical fixed point (raises if invalid)."""
    return load_map_spec(DATA / "critical_fixed_rule.json")


# -- weights -------------------------------------------------------------------------------


@dataclass(frozen=True)
class WeightScheme:
    """Weights ``w_n(x)`` with ``1 <= w_n(x) <= deg_{f^n}(x)``.

    Parameters
    ----------
    kind : {"unit", "localDegree", "custom"}
    custom : callable, optional
        ``custom(degrees) -> weights`` on integer arrays; results are clipped
        into the admissible range.
    """

    kind: str = "localDegree"
    custom: object = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("unit", "localDegree", "custom"):
            raise ValueError(f"unknown weight scheme {self.kind!r}")
        if self.kind == "custom" and self.custom is None:
            raise ValueError("custom weights need an evaluator")

    def __call__(self, degrees):
        degrees = np.asarray(degrees, dtype=float)
        if self.kind == "unit":
            return np.ones_like(degrees)
        if self.kind == "localDegree":
            return degrees
        return np.clip(np.asarray(self.custom(degrees), dtype=float), 1.0, degrees)


# -- empirical measures ----------------------------------------------------------------------


@dataclass
class EmpiricalMeasure:
    """Finite weighted point set with total mass one.

    Attributes
    ----------
    z, w : ndarray
        Homogeneous coordinates of the atoms.
    weight : ndarray
        Nonnegative weights summing to one.
    """

    z: np.ndarray
    w: np.ndarray
    weight: np.ndarray

    @classmethod
    def from_weights(cls, z, w, weight, merge: bool = False):
        weight = np.asarray(weight, dtype=float)
        total = math.fsum(weight)
        if not total > 0:
            raise ValueError("measure has no mass")
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        weight = weight / total
        if merge:
            z, w, weight = _merge_atoms(z, w, weight)
        return cls(z, w, weight)

    @property
    def mass(self) -> float:
        return math.fsum(self.weight)

    def integrate(self, u) -> float:
        """``<mu, u>`` for a function of homogeneous arrays."""
        vals = np.asarray(u(self.z, self.w), dtype=float)
        return math.fsum(vals * self.weight)

    def __len__(self):
        return self.weight.size


def _merge_atoms(z, w, weight):
    keep_z, keep_w, keep_m = [], [], []
    for a, b, m in zip(z, w, weight):
        for k in range(len(keep_z)):
            if chordal(keep_z[k], keep_w[k], a, b) < 1e-9:
                keep_m[k] += m
                break
        else:
            keep_z.append(a)
            keep_w.append(b)
            keep_m.append(m)
    return np.array(keep_z), np.array(keep_w), np.array(keep_m)


# -- operations ----------------------------------------------------------------------------------


def evaluate(backend, x):
    """Image of a point.

    Rational backends take :class:`SpherePoint`; subdivision backends take
    :class:`VertexRef` and raise :class:`NotAVertex` otherwise.

    Examples
    --------
    >>> f = shipped_map()
    >>> evaluate(f, SpherePoint.from_complex(1.0))
    SpherePoint(-1+0j)
    """
    if backend.kind == "rational":
        if not isinstance(x, SpherePoint):
            raise TypeError("rational backends evaluate sphere points")
        z, w = backend.f.apply(np.array([x.z]), np.array([x.w]))
        return SpherePoint(z[0], w[0])
    if not isinstance(x, VertexRef):
        raise NotAVertex("not a vertex")
    if len(x.word) == 1:
        img = backend.template.image_of_post()[x.corner]
        return VertexRef(x.word, img)
    return VertexRef(backend.engine.fword(x.word), x.corner)


def local_degree(backend, x) -> int:
    """``deg_f(x)``: 1 off the critical set."""
    if backend.kind == "rational":
        return int(backend.local_degree_arrays(np.array([x.z]), np.array([x.w]))[0])
    if not isinstance(x, VertexRef):
        raise NotAVertex("not a vertex")
    eng = backend.engine
    key = eng.vkey(x.word, x.corner)
    # Post points are 0-vertices but still have a local degree as 1-vertices.
    n = max(eng.key_level(key), 1)
    # deg_f = deg_{f^n} / deg_{f^{n-1}} at the image.
    img = evaluate(backend, x)
    return eng.map_degree_at(key, n) // eng.map_degree_at(eng.vkey(img.word, img.corner), n - 1)


def preimages(backend, y) -> list:
    """All solutions of ``f(x) = y`` with local degrees.

    Returns
    -------
    list of (point, int)
        Sorted by affine ``(Re, Im)`` (rational) or by word (subdivision);
        the degrees sum to ``deg f``.
    """
    if backend.kind == "rational":
        return [(SpherePoint(z, w), d) for z, w, d in backend.f.preimages(y.z, y.w)]
    if not isinstance(y, VertexRef):
        raise NotAVertex("not a vertex")
    eng = backend.engine
    out = []
    for word, i in eng.vertex_preimages(y.word, y.corner):
        x = VertexRef(word, i)
        out.append((x, local_degree(backend, x)))
    return out


@dataclass
class PreimageNode:
    """Node of an iterated preimage tree."""

    point: SpherePoint
    deg: int  # deg_{f^k}(point), k = depth
    children: list = field(default_factory=list)

    def leaves(self):
        if not self.children:
            return [self]
        return [leaf for c in self.children for leaf in c.leaves()]


def iterated_preimages(backend, y: SpherePoint, n: int) -> PreimageNode:
    """Tree of depth ``n`` rooted at ``y``; leaves carry ``deg_{f^n}``.

    Examples
    --------
    >>> tree = iterated_preimages(shipped_map(), SpherePoint.from_complex(1.0), 2)
    >>> sum(leaf.deg for leaf in tree.leaves())
    4
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    root = PreimageNode(y, 1)
    layer = [root]
    for _ in range(n):
        nxt = []
        for node in layer:
            for x, d in preimages(backend, node.point):
                child = PreimageNode(x, node.deg * d)
                node.children.append(child)
                nxt.append(child)
        layer = nxt
    return root


@dataclass
class PreimageLevel:
    """One level of a batched preimage forest.

    Attributes
    ----------
    z, w : ndarray
        Distinct preimages (critical roots merged), grouped by parent.
    deg : ndarray of int
        Local degree of ``f`` at each node.
    parent : ndarray of int
        Index of the node's image in the previous level.
    """

    z: np.ndarray
    w: np.ndarray
    deg: np.ndarray
    parent: np.ndarray


def preimage_levels(backend: RationalBackend, yz, yw, depth: int) -> list:
    """Levels ``0..depth`` of the preimage forest rooted at the given points.

    Level 0 holds the roots themselves (with ``deg = 1`` and ``parent = -1``).
    Sibling order follows :meth:`RationalMap.preimage_roots`, so the forest is
    deterministic.
    """
    f = backend.f
    z = np.atleast_1d(np.asarray(yz, dtype=complex))
    w = np.atleast_1d(np.asarray(yw, dtype=complex))
    levels = [PreimageLevel(z, w, np.ones(z.size, dtype=np.int64), np.full(z.size, -1, dtype=np.int64))]
    crit = f.critical_points()
    cvals = [f.apply(np.array([cz]), np.array([cw])) for cz, cw, _ in crit]
    d = f.d
    for _ in range(depth):
        rz, rw = f.preimage_roots(z, w)
        mult = np.ones(rz.shape, dtype=np.int64)
        keep = np.ones(rz.shape, dtype=bool)
        for (cz, cw, cd), (vz, vw) in zip(crit, cvals):
            hit = np.nonzero(chordal(z, w, vz[0], vw[0]) < 1e-9)[0]
            for r in hit:
                idx = np.argsort(chordal(rz[r], rw[r], cz, cw), kind="stable")[:cd]
                keep[r, idx[1:]] = False
                mult[r, idx[0]] = cd
                rz[r, idx[0]], rw[r, idx[0]] = cz, cw
        parent = np.repeat(np.arange(z.size), d).reshape(-1, d)
        z, w = rz[keep], rw[keep]
        levels.append(PreimageLevel(z, w, mult[keep], parent[keep]))
    return levels


def preimage_leaves(backend: RationalBackend, yz, yw, n: int):
    """Leaves of the depth-``n`` preimage tree of one point.

    Returns
    -------
    z, w : ndarray
        Distinct points of ``f^{-n}(y)`` in deterministic order.
    deg : ndarray of int
        ``deg_{f^n}`` at each leaf (they sum to ``deg(f)^n``).
    """
    levels = preimage_levels(backend, yz, yw, n)
    deg = levels[0].deg
    for lev in levels[1:]:
        deg = deg[lev.parent] * lev.deg
    last = levels[-1]
    return last.z, last.w, deg


def birkhoff_sum(backend, phi, x: SpherePoint, n: int) -> float:
    """``S_n phi(x) = sum_{j<n} phi(f^j x)``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    z, w = np.array([x.z]), np.array([x.w])
    total = []
    for _ in range(n):
        total.append(float(phi(z, w)[0]))
        z, w = backend.f.apply(z, w)
    return math.fsum(total)


def birkhoff_sums(backend, phi, z, w, n: int):
    """Batched ``S_n phi`` over arrays of points."""
    acc = np.zeros(np.shape(z))
    for _ in range(n):
        acc = acc + phi(z, w)
        z, w = backend.f.apply(z, w)
    return acc


def empirical_orbit_measure(backend, x: SpherePoint, n: int) -> EmpiricalMeasure:
    """``W_n(x)``: the uniform measure on the first ``n`` orbit points."""
    if n < 1:
        raise ValueError("n must be positive")
    z, w = np.array([x.z]), np.array([x.w])
    zs, ws = [], []
    for _ in range(n):
        zs.append(z[0])
        ws.append(w[0])
        z, w = backend.f.apply(z, w)
    return EmpiricalMeasure.from_weights(zs, ws, np.ones(n), merge=True)


def exact_weights(weights) -> list:
    """Weights as exact fractions normalized to total one (for exact checks)."""
    fr = [Fraction(x) for x in weights]
    total = sum(fr)
    return [x / total for x in fr]


def as_arrays(points):
    """Homogeneous arrays from points or (z, w) pairs."""
    if isinstance(points, tuple) and len(points) == 2 and isinstance(points[0], np.ndarray):
        return normalize(*points)
    return points_to_arrays(points)

