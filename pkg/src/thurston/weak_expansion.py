"""Weak-expansion certificates: E_m sets, flower covers, tree bounds,
conditional-entropy upper bounds and the two lower-bound witness constructions.

Combinatorial work happens on vertex representatives ``(word, corner)`` of an
:class:`~thurston.cell_complex.Engine`; canonical keys come from
``engine.vkey``.  Metric constants are estimated with the chordal metric and
are labelled empirical.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .cell_complex import (
    BudgetExceeded,
    Engine,
    HypothesesViolated,
    cell_budget,
    disjoint_deep_flowers,
    expansion_factor,
    power_template,
    tile_diameters,
)
from .sphere import SpherePoint, chordal, from_xyz, random_sphere, to_xyz

__all__ = [
    "PeriodicCriticalPoint",
    "NoAdmissibleCriticalPoint",
    "ExpansionConstants",
    "WitnessRun",
    "injectivity_profile",
    "e_m_set",
    "cover_by_flowers",
    "tree_leaf_bound",
    "depth_weights",
    "expansion_constants",
    "conditional_entropy_upper",
    "witness_not_h_expansive",
    "witness_not_asymp_h_expansive",
]


class PeriodicCriticalPoint(ValueError):
    pass


class NoAdmissibleCriticalPoint(ValueError):
    pass


# -- vertex helpers -----------------------------------------------------------------------


def vertex_image(engine: Engine, rep):
    word, i = rep
    if len(word) == 1:
        return (word, engine.t.image_of_post()[i])
    return engine.vertex_image(word, i)


def in_open_flower(engine: Engine, rep, v, level: int) -> bool:
    """Whether the vertex ``rep`` lies in the open flower ``W^level(v)``.

    A vertex no finer than ``level`` is itself a level-vertex, and the only
    such vertex in the flower is its center.
    """
    key = engine.vkey(*rep)
    if engine.key_level(key) <= level:
        return key == v
    return engine.in_flower(rep[0], rep[1], v, level)


def in_closed_flower(engine: Engine, rep, v, level: int) -> bool:
    key = engine.vkey(*rep)
    if engine.key_level(key) <= level:
        return key in engine.closed_flower_vertices(v, level)
    return engine.in_closed_flower(rep[0], rep[1], v, level)


def _preimage_in_flower(engine: Engine, rep, v, level: int, avoid=None, avoid_level=None):
    for cand in engine.vertex_preimages(*rep):
        if not in_open_flower(engine, cand, v, level):
            continue
        if avoid is not None and in_open_flower(engine, cand, avoid, avoid_level):
            continue
        return cand
    raise HypothesesViolated("hypotheses violated: no preimage in the required flower")


# -- injectivity radius ---------------------------------------------------------------------


def injectivity_profile(backend, deltas, samples: int = 100_000, seed: int = 0):
    """Empirical ``tau(delta)`` for a rational backend in the chordal metric.

    Collision pairs ``y != y'`` with ``f(y) = f(y')`` are sampled as preimage
    sets of targets drawn uniformly and near critical values at scales down
    to ``1e-7``.  A ball of radius ``delta`` can contain both points of a
    pair only if ``q(y, y') < 2 delta``, and its center then lies within
    ``sqrt(delta**2 - q**2 / 4)`` of their chord midpoint.  The estimate is
    the largest distance to ``crit f`` of such a center, so ``f`` is
    injective (on sampled pairs) on every ``delta``-ball centered farther
    away.

    Returns
    -------
    list of (delta, tau_hat, pairs_used)
    """
    f = backend.f
    rng = np.random.default_rng(seed)
    crit = [(c.z, c.w) for c, _ in backend.crit]
    base = max(1, samples // max(1, f.d * (f.d - 1) // 2))
    uz, uw = random_sphere(rng, base)
    cv = np.array([to_xyz(*f.apply(np.array([z]), np.array([w])))[0] for z, w in crit])
    pick = cv[rng.integers(len(cv), size=base)]
    scale = 10.0 ** rng.uniform(-7, 0, size=base)
    near = pick + scale[:, None] * rng.standard_normal((base, 3))
    nz, nw = from_xyz(near / np.linalg.norm(near, axis=1)[:, None])
    rz, rw = f.preimage_roots(np.concatenate([uz, nz]), np.concatenate([uw, nw]))
    gap, cdist = [], []
    for a in range(f.d):
        for b in range(a + 1, f.d):
            q = chordal(rz[:, a], rw[:, a], rz[:, b], rw[:, b])
            mid = to_xyz(rz[:, a], rw[:, a]) + to_xyz(rz[:, b], rw[:, b])
            norm = np.linalg.norm(mid, axis=1)
            mid[norm < 1e-12] = to_xyz(rz[norm < 1e-12, a], rw[norm < 1e-12, a])
            mz, mw = from_xyz(mid)
            dc = np.min([chordal(mz, mw, cz, cw) for cz, cw in crit], axis=0)
            gap.append(q)
            # Slack for the gap between the chord midpoint and its projection.
            cdist.append(dc + q**2 / 4)
    gap = np.concatenate(gap)
    cdist = np.concatenate(cdist)
    out = []
    for d in deltas:
        sel = gap < 2 * d
        reach = np.sqrt(np.maximum(d * d - gap[sel] ** 2 / 4, 0.0))
        tau = float(np.max(cdist[sel] + reach)) if np.any(sel) else 0.0
        out.append((float(d), tau, int(sel.sum())))
    return out


# -- E_m sets and flower covers -----------------------------------------------------------------


def e_m_set(engine: Engine, chain, q, m: int):
    """``E_m(q_0, ..., q_{n-1}; q)``: points of ``f^{-n}(q)`` whose i-th
    iterate lies in the closed m-flower of ``q_i``.

    Parameters
    ----------
    chain : sequence
        Vertex keys ``q_0 .. q_{n-1}`` of level at most m.
    q : (word, corner)
        Vertex representative.

    Returns
    -------
    list of (word, corner), one per distinct vertex, in key order of discovery.
    """
    layer = [q]
    for qi in reversed(list(chain)):
        nxt, seen = [], set()
        for rep in layer:
            for cand in engine.vertex_preimages(*rep):
                key = engine.vkey(*cand)
                if key in seen:
                    continue
                if in_closed_flower(engine, cand, qi, m):
                    seen.add(key)
                    nxt.append(cand)
        if len(nxt) > cell_budget():
            raise BudgetExceeded("cell budget exceeded")
        layer = nxt
    return layer


def cover_by_flowers(engine: Engine, chain, m: int, check_level: int | None = None):
    """Flowers ``W^{m+n}(x)``, ``x in E_m(p_0..p_{n-1}; p_n)``, covering
    ``W^m(p_0) ∩ f^{-1} W^m(p_1) ∩ ... ∩ f^{-n} W^m(p_n)``.

    The cover is verified on every tile interior and vertex of level
    ``check_level`` (default ``m + n + 1``) lying in the intersection.

    Parameters
    ----------
    chain : sequence of (word, corner)
        Representatives of the m-vertices ``p_0 .. p_n``.

    Returns
    -------
    list of vertex keys (centers of the covering flowers).

    Raises
    ------
    RuntimeError
        If some sampled point of the intersection is not covered.
    """
    chain = list(chain)
    n = len(chain) - 1
    keys = [engine.vkey(*p) for p in chain]
    e = e_m_set(engine, keys[:-1], chain[-1], m)
    centers = [engine.vkey(*x) for x in e]
    level = m + n + 1 if check_level is None else check_level
    for word in engine.tiles_at(level):
        if not all(keys[i] in engine.corners(engine.fpow(word, i)[: m + 1]) for i in range(n + 1)):
            continue
        if not any(c in engine.corners(word[: m + n + 1]) for c in centers):
            raise RuntimeError("flower cover check failed at a tile interior")
        for i in range(engine.m):
            rep = (word, i)
            if all(in_open_flower(engine, _iterate_rep(engine, rep, j), keys[j], m) for j in range(n + 1)):
                if not any(in_open_flower(engine, rep, c, m + n) for c in centers):
                    raise RuntimeError("flower cover check failed at a vertex")
    return centers


def _iterate_rep(engine, rep, j):
    for _ in range(j):
        rep = vertex_image(engine, rep)
    return rep


# -- trees -------------------------------------------------------------------------------


def _walk(tree):
    """Yield ``(depth, node, path)`` for a tree given as nested lists."""
    stack = [(0, tree, ())]
    while stack:
        depth, node, path = stack.pop()
        yield depth, node, path
        for i in range(len(node) - 1, -1, -1):
            stack.append((depth + 1, node[i], path + (i,)))


def depth_weights(tree) -> list:
    """Sum of the splitting weight ``h`` over each depth slice, exactly.

    ``h(root) = 1`` and each child gets ``h(parent) / outdegree(parent)``.
    """
    sums = []
    stack = [(0, tree, Fraction(1))]
    while stack:
        depth, node, h = stack.pop()
        if depth == len(sums):
            sums.append(Fraction(0))
        sums[depth] += h
        if node:
            share = h / len(node)
            stack.extend((depth + 1, child, share) for child in node)
    return sums


def tree_leaf_bound(tree, c: int, k: int) -> int:
    """Check the leaf bound ``#leaves <= c**k`` and return ``c**k``.

    Parameters
    ----------
    tree : nested lists
        A node is the list of its children; a leaf is ``[]``.
    c : int
        Bound on every outdegree.
    k : int
        Bound on the number of branching nodes (outdegree >= 2) on each
        root-to-leaf path.

    Raises
    ------
    ValueError
        If a precondition fails; the message names the offending path as a
        tuple of child indices.
    """
    leaf_depth = None
    leaves = 0
    branching = {(): 0}
    for depth, node, path in _walk(tree):
        if len(node) > c:
            raise ValueError(f"outdegree {len(node)} exceeds c at path {path}")
        b = branching[path] + (len(node) >= 2)
        for i in range(len(node)):
            branching[path + (i,)] = b
        if not node:
            leaves += 1
            if leaf_depth is None:
                leaf_depth = depth
            elif depth != leaf_depth:
                raise ValueError(f"leaf at path {path} is not at depth {leaf_depth}")
            if branching[path] > k:
                raise ValueError(f"path {path} has {branching[path]} branching nodes, more than k")
    bound = c**k
    if leaves > bound:
        raise AssertionError("leaf count exceeds c**k")
    return bound


def preimage_tree(engine: Engine, chain, q, m: int):
    """Tree of partial orbits behind :func:`e_m_set`, as nested lists."""

    def grow(rep, j):
        if j < 0:
            return []
        kids = []
        seen = set()
        for cand in engine.vertex_preimages(*rep):
            key = engine.vkey(*cand)
            if key not in seen and in_closed_flower(engine, cand, chain[j], m):
                seen.add(key)
                kids.append(grow(cand, j - 1))
        return kids

    return grow(q, len(chain) - 1)


def branching_depth(tree) -> int:
    """Largest number of branching nodes on a root-to-leaf path."""
    best = 0
    stack = [(tree, 0)]
    while stack:
        node, b = stack.pop()
        b += len(node) >= 2
        if not node:
            best = max(best, b)
        stack.extend((ch, b) for ch in node)
    return best


def prune_dead(tree, depth):
    """Drop branches that stop before ``depth`` so all leaves share a depth."""

    def rec(node, d):
        if d == depth:
            return []
        kids = [rec(ch, d + 1) for ch in node]
        kids = [ch for ch in kids if ch is not None]
        return kids if kids else None

    out = rec(tree, 0)
    return [] if out is None else out


# -- positive-case constants ---------------------------------------------------------------------


@dataclass
class ExpansionConstants:
    """Empirical constants of the upper-bound argument for ``f**power``.

    Attributes
    ----------
    N_c : int
        Steps after which no critical orbit meets ``crit`` again.
    D_c : float
        Chordal distance from ``post \\ crit`` to ``crit``.
    K : float
        Lipschitz estimate (at least 2).
    W_f : int
        Largest number of tiles in a closed flower.
    Lambda, C : float
        Diameter decay rate and constant with ``diam(n-tile) <= C Lambda**-n``.
    tau : list of (delta, tau_hat, pairs)
        Injectivity profile.
    """

    power: int
    degree: int
    N_c: int
    D_c: float
    K: float
    W_f: int
    Lambda: float
    C: float
    tau: list = field(repr=False)

    def tau_at(self, delta: float) -> float:
        ds = np.array([t[0] for t in self.tau])
        ts = np.array([t[1] for t in self.tau])
        if delta <= ds[0]:
            return float(ts[0] * delta / ds[0])
        return float(np.interp(delta, ds, ts))

    def M(self, i: int):
        """``floor(log_K((D_c - t) / t)) - 2`` with ``t = tau(3 C Lambda^-i)``; None when undefined."""
        t = self.tau_at(3 * self.C * self.Lambda ** (-i))
        if not 0 < t < self.D_c:
            return None
        return math.floor(math.log((self.D_c - t) / t) / math.log(self.K)) - 2

    def to_dict(self) -> dict:
        return {
            "power": self.power,
            "degree": self.degree,
            "N_c": self.N_c,
            "D_c": self.D_c,
            "K": self.K,
            "W_f": self.W_f,
            "Lambda": self.Lambda,
            "C": self.C,
            "empirical": True,
        }


def _critical_data(backend, power):
    """Critical points of ``f**power`` with local degrees, from those of f."""
    from .sphere_map import preimage_levels

    f = backend.f
    pts, degs = [], []
    for c, dc in backend.crit:
        levels = preimage_levels(backend, c.z, c.w, power - 1)
        for j, lev in enumerate(levels):
            for z, w in zip(lev.z, lev.w):
                # deg of f^power at x = product of local degrees over the next power steps.
                deg, xz, xw = 1, np.array([z]), np.array([w])
                for _ in range(power):
                    deg *= int(backend.local_degree_arrays(xz, xw)[0])
                    xz, xw = f.apply(xz, xw)
                pts.append((complex(z), complex(w)))
                degs.append(deg)
    # Deduplicate.
    out = []
    for p, d in zip(pts, degs):
        if not any(chordal(p[0], p[1], q[0], q[1]) < 1e-9 for q, _ in out):
            out.append((p, d))
    return out


def expansion_constants(backend, power: int = 1, samples: int = 100_000, seed: int = 0) -> ExpansionConstants:
    """Estimate the constants of the upper-bound argument for ``F = f**power``.

    Raises
    ------
    PeriodicCriticalPoint
        "map has periodic critical point".
    """
    if backend.has_periodic_critical_point():
        raise PeriodicCriticalPoint("map has periodic critical point")
    f = backend.f
    crit = _critical_data(backend, power)
    cz = np.array([p[0] for p, _ in crit])
    cw = np.array([p[1] for p, _ in crit])

    def F(z, w):
        return f.iterate(z, w, power)

    def is_crit(z, w):
        return any(chordal(z, w, a, b) < 1e-8 for a, b in zip(cz, cw))

    def deg_at(z, w):
        for (p, d) in crit:
            if chordal(z, w, p[0], p[1]) < 1e-8:
                return d
        return 1

    # N_c: the first i after which F^j(x) avoids crit for all j >= i.
    n_c = 0
    for (p, _) in crit:
        z, w = np.array([p[0]]), np.array([p[1]])
        orbit = []
        for _ in range(64):
            orbit.append(is_crit(z, w))
            z, w = F(z, w)
        last = max(i for i, hit in enumerate(orbit) if hit)
        n_c = max(n_c, last + 1)
    post = [(p.z, p.w) for p in backend.post]
    d_c = min(chordal(a, b, x, y) for a, b in post if not is_crit(a, b) for x, y in zip(cz, cw))
    # W_f: twice the largest degree of an iterate, attained along critical orbits.
    w_f = 0
    for (p, d) in crit:
        z, w = np.array([p[0]]), np.array([p[1]])
        total = 1
        for _ in range(64):
            total *= deg_at(z[0], w[0])
            z, w = F(z, w)
        w_f = max(w_f, 2 * total)
    # Lipschitz estimate from close random pairs.
    rng = np.random.default_rng(seed)
    xz, xw = random_sphere(rng, samples)
    xyz = to_xyz(xz, xw) + 1e-4 * rng.standard_normal((samples, 3))
    yz, yw = from_xyz(xyz / np.linalg.norm(xyz, axis=1)[:, None])
    d0 = chordal(xz, xw, yz, yw)
    fx, fy = F(xz, xw), F(yz, yw)
    lip = float(np.max(chordal(fx[0], fx[1], fy[0], fy[1]) / np.maximum(d0, 1e-300)))
    lam1 = expansion_factor(backend)
    levels = range(1, 10)
    dmax = {n: tile_diameters(backend, n) for n in levels}
    # Only the upper comparability bound is used; chordal diameters have no
    # matching lower bound near strongly repelling points.
    c_const = max(dmax[n].max() * lam1**n for n in levels)
    deltas = np.geomspace(1e-4, 1.0, 25)
    prof = injectivity_profile(_PowerView(backend, power, crit), deltas, samples=samples, seed=seed)
    return ExpansionConstants(
        power=power,
        degree=f.d**power,
        N_c=n_c,
        D_c=float(d_c),
        K=max(2.0, lip),
        W_f=int(w_f),
        Lambda=lam1**power,
        C=float(c_const),
        tau=prof,
    )


class _PowerView:
    """Enough of a backend for :func:`injectivity_profile` on ``f**power``."""

    def __init__(self, backend, power, crit):
        from types import SimpleNamespace

        self.crit = [(SpherePoint(p[0], p[1]), d) for p, d in crit]
        base = backend.f
        d = base.d**power

        def roots(yz, yw):
            z, w = np.atleast_1d(yz), np.atleast_1d(yw)
            for _ in range(power):
                rz, rw = base.preimage_roots(z, w)
                z, w = rz.reshape(-1), rw.reshape(-1)
            return z.reshape(-1, d), w.reshape(-1, d)

        self.f = SimpleNamespace(d=d, preimage_roots=roots, apply=lambda z, w: base.iterate(z, w, power))


def conditional_entropy_upper(consts: ExpansionConstants, m: int, l: int, n_max: int):
    """Upper bounds for the conditional entropy at scale ``(m, l)``.

    Entry ``n`` is ``(1/n) log[(2d)^(l-m+1) W_f d^(N_c (n/M_m + 1))]``; the
    n-limit is ``N_c log d / M_m``.

    Returns
    -------
    dict with keys ``entries`` (list of (n, bound)), ``limit`` and ``M_m``.
    """
    if not l > m:
        raise ValueError("need l > m")
    mm = consts.M(m)
    if mm is None or mm <= 0:
        raise ValueError(f"M_m is undefined or not positive at m={m}")
    d = consts.degree
    log_d = math.log(d)
    entries = []
    for n in range(1, n_max + 1):
        log_bound = (l - m + 1) * math.log(2 * d) + math.log(consts.W_f) + consts.N_c * (n / mm + 1) * log_d
        entries.append((n, log_bound / n))
    return {"entries": entries, "limit": consts.N_c * log_d / mm, "M_m": mm}


def e_m_count_bound(consts: ExpansionConstants, m: int, n: int) -> float:
    """``d^(N_c (n / M_m + 1))``, the bound on ``card E_m`` for chains of n flowers."""
    mm = consts.M(m)
    return consts.degree ** (consts.N_c * (n / mm + 1))


# -- witnesses ------------------------------------------------------------------------------------


@dataclass
class WitnessRun:
    """Outcome of a witness construction.

    Attributes
    ----------
    kind : str
    params : dict
        ``m``, ``l``, ``s``, ``k``, ``power`` and the margin mode.
    schedule : list of str
        The m-vertex ``v_n`` for each n.
    cards : list of int
        ``card V_n`` for each n.
    checks : dict of str to bool
    bound : float
        Lower bound implied by the run.
    """

    kind: str
    params: dict
    schedule: list
    cards: list
    checks: dict
    bound: float
    sets: list = field(default_factory=list, repr=False)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_json(self) -> str:
        data = {
            "kind": self.kind,
            "params": self.params,
            "schedule": self.schedule,
            "cardinalities": self.cards,
            "checks": self.checks,
            "bound": self.bound,
        }
        return json.dumps(data, indent=1, sort_keys=True) + "\n"


def _key_str(key) -> str:
    return repr(key)


def find_h_witness_iterate(engine: Engine, max_power: int = 8):
    """Smallest ``N`` such that ``F = f**N`` has no 1-tile joining opposite
    sides and a critical 1-vertex ``p`` off the curve with ``F(F(p)) = F(p) != p``.

    Returns
    -------
    (N, engine_of_F, rep_of_p, k)
    """
    if engine.t.periodic_critical():
        raise PeriodicCriticalPoint("map has periodic critical point")
    for n in range(1, max_power + 1):
        big = engine if n == 1 else Engine(power_template(engine, n))
        if any(big.joins_opposite_sides(w) for w in big.tiles_at(1)):
            continue
        lev = big.build_level(1)
        img = big.t.image_of_post()
        for v, key in enumerate(lev.vertex_keys):
            word, i = lev.vertex_reps[v]
            if big.carrier0_vertex(word, i)[0] != "T" or lev.vertex_degree[v] < 2:
                continue
            if img[i] == i:
                return n, big, (word, i), lev.vertex_degree[v]
    raise NoAdmissibleCriticalPoint("no admissible critical point")


def _check_margin(l, need, strict, slack):
    if strict:
        if not l > need + 100:
            raise HypothesesViolated(f"hypotheses violated: strict margins need l > {need + 100}")
    elif not l > need + slack:
        raise HypothesesViolated(f"hypotheses violated: need l > {need + slack}")


def witness_not_h_expansive(engine: Engine, m: int = 1, l: int | None = None, s: int = 3,
                            strict: bool = False, max_power: int = 8) -> WitnessRun:
    """Vertex sets ``V_n`` certifying ``h(F | W^m) >= log k / (m + 2)``.

    Parameters
    ----------
    engine : Engine
        Word engine of a map without periodic critical points.
    m, l, s : int
        Flower level, fine level and number of periods; ``l`` defaults to
        ``2m + 5``.
    strict : bool
        Require ``l > 2m + 100`` instead of ``l > 2m + 4``.

    Raises
    ------
    PeriodicCriticalPoint, NoAdmissibleCriticalPoint, BudgetExceeded
    """
    l = 2 * m + 5 if l is None else l
    _check_margin(l, 2 * m, strict, 4)
    power, F, p_rep, k = find_h_witness_iterate(engine, max_power)
    if k**s > cell_budget():
        raise BudgetExceeded("refinement budget exceeded")
    p = F.vkey(*p_rep)
    fp = ("P", p_rep[1])
    period = m + 2
    checks = {"no_1_tile_joins_opposite_sides": True}

    q = {1: p_rep}
    for j in range(2, m + 3):
        q[j] = _preimage_in_flower(F, q[j - 1], fp, j - 1, avoid=fp, avoid_level=j + 1)
    q[0] = q[m + 2]
    qk = {j: F.vkey(*r) for j, r in q.items()}
    checks["q_chain"] = all(
        in_open_flower(F, q[j], fp, j - 1) and not in_open_flower(F, q[j], fp, j + 1) for j in range(1, m + 3)
    )
    p_list = [
        c for c in F.vertex_preimages(*q[m + 2])
        if in_open_flower(F, c, p, m + 2) and not in_open_flower(F, c, p, m + 4)
    ]
    p_keys = [F.vkey(*c) for c in p_list]
    checks["k_distinct_p_i"] = len(set(p_keys)) == k == len(p_list)
    checks["deep_flowers_disjoint"] = all(
        disjoint_deep_flowers(F, p_keys[a], p_keys[b], 2 * m + 4)
        for a in range(len(p_keys)) for b in range(a + 1, len(p_keys))
    )

    def v_of(n):
        r = n % period
        return qk[r] if 1 <= r <= m else fp

    V = [q[m + 2]]
    sets = [V]
    cards = [1]
    prop = {1: True, 2: True, 3: True, 4: True}
    n_top = period * s
    for n in range(n_top):
        r = n % period
        if r == 0:
            nxt = [_preimage_in_flower(F, x, pk, 2 * m + 4) for pk in p_keys for x in V]
        else:
            nxt = [_preimage_in_flower(F, x, qk[r + 1], m + 1 + r + 1) for x in V]
        V = nxt
        sets.append(V)
        cards.append(len({F.vkey(*x) for x in V}))
    for n, V in enumerate(sets):
        r = n % period
        prop[1] &= all(in_open_flower(F, x, v_of(n), m) for x in V)
        if n > 0:
            img = {F.vkey(*vertex_image(F, x)) for x in V}
            prop[2] &= img == {F.vkey(*x) for x in sets[n - 1]}
        if r >= 1:
            prop[3] &= all(in_open_flower(F, x, qk[r], m + 1 + r) for x in V)
        else:
            prop[3] &= all(in_open_flower(F, x, qk[0], 2 * m + 3) for x in V)
        prop[4] &= cards[n] == k ** (-(-n // period))
    for i in range(1, 5):
        checks[f"property_{i}"] = bool(prop[i])
    checks["card_at_period_multiples"] = all(cards[period * j] == k**j for j in range(1, s + 1))
    return WitnessRun(
        kind="not_h_expansive",
        params={"m": m, "l": l, "s": s, "k": k, "power": power, "strict_margins": strict,
                "critical_point": _key_str(p), "image": _key_str(fp)},
        schedule=[_key_str(v_of(n)) for n in range(n_top + 1)],
        cards=cards,
        checks=checks,
        bound=math.log(k) / (m + 2),
        sets=sets,
    )


def find_tail_witness_iterate(engine: Engine, max_power: int = 8):
    """Smallest power ``N`` (a multiple of the critical periods) such that
    ``F = f**N`` has no 1-tile joining opposite sides, fixes a critical post
    point ``p`` and has a preimage of ``p`` off the curve.

    Returns
    -------
    (N, engine_of_F, j, rep_of_q1, k) where ``p = P_j``.
    """
    t = engine.t
    per = t.periodic_critical()
    if not per:
        raise PeriodicCriticalPoint("backend lacks periodic critical point")
    img = t.image_of_post()
    periods = []
    for v in per:
        j = t.vertices[v].where[1]
        x, c = img[j], 1
        while x != j:
            x, c = img[x], c + 1
        periods.append(c)
    tau = math.lcm(*periods)
    for n in range(tau, max_power + 1, tau):
        big = engine if n == 1 else Engine(power_template(engine, n))
        if any(big.joins_opposite_sides(w) for w in big.tiles_at(1)):
            continue
        lev = big.build_level(1)
        js = sorted(big.t.vertices[v].where[1] for v in big.t.periodic_critical())
        for j in js:
            for v, key in enumerate(lev.vertex_keys):
                word, i = lev.vertex_reps[v]
                if i == j and big.carrier0_vertex(word, i)[0] == "T":
                    k = big.map_degree_at(("P", j), 1)
                    return n, big, j, (word, i), k
    raise NoAdmissibleCriticalPoint("no admissible critical point")


def witness_not_asymp_h_expansive(engine: Engine, m: int = 1, l: int | None = None, s: int = 2,
                                  strict: bool = False, max_power: int = 8) -> WitnessRun:
    """Vertex sets ``V_n`` certifying a tail-entropy lower bound
    ``((l - m - 2) / (l + 1)) log k`` for a map with a periodic critical point.

    Raises
    ------
    PeriodicCriticalPoint
        "backend lacks periodic critical point".
    BudgetExceeded
        "refinement budget exceeded" when ``k**((l-m-2) s)`` exceeds the cell budget.
    """
    l = m + 5 if l is None else l
    _check_margin(l, m, strict, 4)
    power, F, j0, q1_rep, k = find_tail_witness_iterate(engine, max_power)
    if k ** ((l - m - 2) * s) > cell_budget():
        raise BudgetExceeded("refinement budget exceeded")
    p = ("P", j0)
    p_rep = ((0,), j0)
    period = l + 1
    checks = {"no_1_tile_joins_opposite_sides": True}

    # q_0 .. q_m, then the sets Q_j with parent pointers.
    q = {0: p_rep, 1: q1_rep}
    for j in range(2, m + 1):
        q[j] = _preimage_in_flower(F, q[j - 1], p, j - 1, avoid=p, avoid_level=j + 1)
    Q = {j: [q[j]] for j in range(0, m + 1)}
    parent = {j: [0] for j in range(0, m + 1)}
    for j in range(m + 1, l - 1):
        reps, par = [], []
        for a, x in enumerate(Q[j - 1]):
            for c in F.vertex_preimages(*x):
                if in_open_flower(F, c, p, j - 1) and not in_open_flower(F, c, p, j + 1):
                    reps.append(c)
                    par.append(a)
        Q[j], parent[j] = reps, par
    for j in (l - 1, l, l + 1):
        Q[j] = [_preimage_in_flower(F, x, p, j - 1, avoid=p, avoid_level=j + 1) for x in Q[j - 1]]
        parent[j] = list(range(len(Q[j])))
    Qk = {j: [F.vkey(*x) for x in reps] for j, reps in Q.items()}
    checks["Q_cardinalities"] = all(
        len(set(Qk[j])) == (k ** (j - m) if j <= l - 2 else k ** (l - 2 - m))
        for j in range(m + 1, l + 2)
    ) and all(len(Qk[j]) == 1 for j in range(0, m + 1))
    checks["Q_in_flower_annuli"] = all(
        in_open_flower(F, x, p, j - 1) and not in_open_flower(F, x, p, j + 1)
        for j in range(1, l + 2) for x in Q[j]
    )

    def v_of(n):
        r = n % period
        return Qk[r][0] if r <= m else p

    # V_n as a list of (rep, group).
    V = [(p_rep, 0)]
    sets = [V]
    for n in range(period * s):
        r = n % period
        if r < m:
            nxt = [(_preimage_in_flower(F, x, Qk[r + 1][0], l + 1), 0) for x, _ in V]
        elif r <= l - 3:
            nxt = []
            for i, a in enumerate(parent[r + 1]):
                nxt.extend((_preimage_in_flower(F, x, Qk[r + 1][i], l + 2), i) for x, g in V if g == a)
        else:
            nxt = [(_preimage_in_flower(F, x, Qk[r + 1][g], l + 2), g) for x, g in V]
        if r == l:
            nxt = [(x, 0) for x, _ in nxt]
        V = nxt
        sets.append(V)

    prop = {1: True, 2: True, 3: True}
    cards = []
    for n, V in enumerate(sets):
        r = n % period
        keys = [F.vkey(*x) for x, _ in V]
        cards.append(len(set(keys)))
        prop[1] &= all(in_open_flower(F, x, v_of(n), m) for x, _ in V)
        if n > 0:
            img = {F.vkey(*vertex_image(F, x)) for x, _ in V}
            prop[2] &= img == {F.vkey(*x) for x, _ in sets[n - 1]}
        if r == 0:
            prop[3] &= all(in_open_flower(F, x, p, l) for x, _ in V)
        elif r <= m:
            prop[3] &= all(in_open_flower(F, x, v_of(n), l + 1) for x, _ in V)
        else:
            groups = {}
            for (x, g), key in zip(V, keys):
                groups.setdefault(g, set()).add(key)
            want = k ** (r - m) if r <= l - 2 else k ** (l - 2 - m)
            disjoint = sum(len(g) for g in groups.values()) == len(set(keys))
            inside = all(in_open_flower(F, x, Qk[r][g], l + 1) for x, g in V)
            prop[3] &= disjoint and inside and len(groups) == want
    for i in range(1, 4):
        checks[f"property_{i}"] = bool(prop[i])
    checks["distinct_points"] = all(c == len(V) for c, V in zip(cards, sets))
    checks["card_at_period_multiples"] = all(
        cards[period * j] == k ** ((l - m - 2) * j) for j in range(1, s + 1)
    )
    return WitnessRun(
        kind="not_asymptotically_h_expansive",
        params={"m": m, "l": l, "s": s, "k": k, "power": power, "strict_margins": strict,
                "critical_point": _key_str(p)},
        schedule=[_key_str(v_of(n)) for n in range(period * s + 1)],
        cards=cards,
        checks=checks,
        bound=(l - m - 2) / (l + 1) * math.log(k),
        sets=sets,
    )
