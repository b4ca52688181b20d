"""Cell decompositions, flowers and the combinatorial visual-metric surrogate.

Cells are addressed by *tile words*.  An n-tile is a tuple
``(c0, T_0, ..., T_{n-1})`` of a 0-tile color and template tile ids, with
``parent0(T_0) == c0`` and ``parent0(T_{j+1}) == color(T_j)``.  The tile
``W + (T,)`` is a child of ``W``, and the map sends ``W`` to
``(color(T_0), T_1, ..., T_{n-1})``.  Enumerating children in template order
gives the breadth-first numbering, which coincides with tuple order.

Vertices and edges get canonical keys that do not depend on which tile they
were reached from, and do not change when the level grows:

* vertex keys: ``("P", j)``, ``("ve", edge_key, k)`` (k-th interior vertex
  of a coarser edge) and ``("vt", word, u)`` (template vertex ``u`` inside the
  tile ``word``);
* edge keys: ``("E", j)``, ``("ee", edge_key, k)`` and ``("et", word, e)``.

Stars and carriers are computed lazily from these keys, so flower
membership can be decided at depths where the full complex is far too large
to build.
"""

from __future__ import annotations

import csv
import io
import json
import os
from collections import defaultdict, deque
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .template import BLACK, COLOR_NAMES, WHITE, Template, TTile, assemble_template

DEFAULT_CELL_BUDGET = 2_000_000


class BudgetExceeded(RuntimeError):
    pass


class HypothesesViolated(ValueError):
    pass


def cell_budget() -> int:
    env = os.environ.get("THURSTON_BUDGET_CELLS")
    return int(env) if env else DEFAULT_CELL_BUDGET


class Engine:
    """Word calculus over a one-step template.

    Parameters
    ----------
    template : Template
        Validated level-1 structure.
    """

    def __init__(self, template: Template):
        self.t = template
        self.m = template.m
        self.d = template.degree
        self._children = {c: tuple(template.children(c)) for c in (WHITE, BLACK)}
        self._tile_color = tuple(tile.color for tile in template.tiles)
        self._tile_parent = tuple(tile.parent0 for tile in template.tiles)
        self._vwhere = tuple(v.where for v in template.vertices)
        self._ewhere = tuple(e.where for e in template.edges)
        self._star = {}
        self._levels = {}
        self.vkey = lru_cache(maxsize=None)(self._vkey_impl)
        self.ekey = lru_cache(maxsize=None)(self._ekey_impl)
        self.key_level = lru_cache(maxsize=None)(self._key_level_impl)

    # -- words -----------------------------------------------------------------

    def children(self, color: int) -> tuple:
        return self._children[color]

    def color(self, word: tuple) -> int:
        return word[0] if len(word) == 1 else self._tile_color[word[-1]]

    @staticmethod
    def level_of(word: tuple) -> int:
        return len(word) - 1

    def fword(self, word: tuple) -> tuple:
        """Image of an n-tile (n >= 1) under the map."""
        return (self._tile_color[word[1]],) + word[2:]

    def fpow(self, word: tuple, k: int) -> tuple:
        if k == 0:
            return word
        return (self._tile_color[word[k]],) + word[k + 1:]

    def tile_count(self, n: int) -> int:
        return 2 * self.d**n

    def tiles_at(self, n: int) -> list:
        """All n-tile words in id order."""
        if self.tile_count(n) > cell_budget():
            raise BudgetExceeded("cell budget exceeded")
        words = [(WHITE,), (BLACK,)]
        for _ in range(n):
            words = [w + (t,) for w in words for t in self._children[self.color(w)]]
        return words

    def descendants(self, word: tuple, depth: int) -> list:
        words = [word]
        for _ in range(depth):
            words = [w + (t,) for w in words for t in self._children[self.color(w)]]
        return words

    def tile_id(self, word: tuple) -> int:
        """Breadth-first id of a tile word at its level."""
        n = len(word) - 1
        counts = self._subtree_counts(n)
        idx = 0 if word[0] == WHITE else counts[WHITE][n]
        color = word[0]
        for depth, t in enumerate(word[1:], start=1):
            for s in self._children[color]:
                if s == t:
                    break
                idx += counts[self._tile_color[s]][n - depth]
            color = self._tile_color[t]
        return idx

    @lru_cache(maxsize=None)
    def _subtree_counts(self, n: int):
        counts = {WHITE: [1], BLACK: [1]}
        for k in range(1, n + 1):
            for c in (WHITE, BLACK):
                counts[c].append(sum(counts[self._tile_color[s]][k - 1] for s in self._children[c]))
        return counts

    # -- canonical keys ------------------------------------------------------

    def _vkey_impl(self, word: tuple, i: int):
        if len(word) == 1:
            return ("P", i)
        u = self.t.tiles[word[-1]].corners[i]
        w = self._vwhere[u]
        if w[0] == "v":
            return self.vkey(word[:-1], w[1])
        if w[0] == "e":
            return ("ve", self.ekey(word[:-1], w[1]), w[2])
        return ("vt", word[:-1], u)

    def _ekey_impl(self, word: tuple, i: int):
        if len(word) == 1:
            return ("E", i)
        e = self.t.tiles[word[-1]].edges[i]
        w = self._ewhere[e]
        if w[0] == "e":
            return ("ee", self.ekey(word[:-1], w[1]), w[2])
        return ("et", word[:-1], e)

    def _key_level_impl(self, key) -> int:
        tag = key[0]
        if tag in ("P", "E"):
            return 0
        if tag in ("ve", "ee"):
            return self.key_level(key[1]) + 1
        if tag == "T":
            return len(key[1]) - 1
        return len(key[1])

    def corners(self, word: tuple) -> tuple:
        return tuple(self.vkey(word, i) for i in range(self.m))

    def edge_keys(self, word: tuple) -> tuple:
        return tuple(self.ekey(word, i) for i in range(self.m))

    def edge_ends(self, word: tuple, i: int) -> tuple:
        return self.vkey(word, i), self.vkey(word, (i + 1) % self.m)

    # -- carriers --------------------------------------------------------------

    def carrier0_vertex(self, word: tuple, i: int):
        """The 0-cell whose interior holds corner ``i`` of ``word``:
        ``("P", j)``, ``("E", j)`` or ``("T", color)``."""
        while len(word) > 1:
            u = self.t.tiles[word[-1]].corners[i]
            w = self._vwhere[u]
            if w[0] == "v":
                word, i = word[:-1], w[1]
                continue
            if w[0] == "e":
                return self.carrier0_edge(word[:-1], w[1])
            return ("T", word[0])
        return ("P", i)

    def carrier0_edge(self, word: tuple, i: int):
        while len(word) > 1:
            e = self.t.tiles[word[-1]].edges[i]
            w = self._ewhere[e]
            if w[0] == "e":
                word, i = word[:-1], w[1]
                continue
            return ("T", word[0])
        return ("E", i)

    def carrier(self, word: tuple, i: int, m: int):
        """Open m-cell containing corner ``i`` of ``word`` (level >= m).

        Returns ``(kind, key, vertex_keys)`` with ``kind`` in
        ``{"V", "E", "T"}``; ``vertex_keys`` are the m-vertices in the closure
        of the cell, so the point lies in the open flower ``W^m(v)`` exactly
        when ``v`` is one of them.
        """
        key = self.vkey(word, i)
        if self.key_level(key) <= m:
            return ("V", key, (key,))
        wm = word[: m + 1]
        c = self.carrier0_vertex(self.fpow(word, m), i)
        if c[0] == "P":
            k = self.vkey(wm, c[1])
            return ("V", k, (k,))
        if c[0] == "E":
            return ("E", self.ekey(wm, c[1]), self.edge_ends(wm, c[1]))
        return ("T", ("T", wm), self.corners(wm))

    def edge_carrier(self, word: tuple, i: int, m: int):
        """Open m-cell containing the interior of edge ``i`` of ``word``."""
        key = self.ekey(word, i)
        if self.key_level(key) <= m:
            return ("E", key, self.edge_ends(word, i))
        wm = word[: m + 1]
        c = self.carrier0_edge(self.fpow(word, m), i)
        if c[0] == "E":
            return ("E", self.ekey(wm, c[1]), self.edge_ends(wm, c[1]))
        return ("T", ("T", wm), self.corners(wm))

    def in_flower(self, word: tuple, i: int, v, m: int) -> bool:
        """Whether corner ``i`` of ``word`` lies in the open m-flower of ``v``."""
        return v in self.carrier(word, i, m)[2]

    def in_closed_flower(self, word: tuple, i: int, v, m: int) -> bool:
        kind, key, verts = self.carrier(word, i, m)
        if kind == "T":
            return v in verts
        return any(v in self.corners(w) for w in self.star(key, m))

    # -- lazy stars ------------------------------------------------------------

    def star(self, key, n: int) -> tuple:
        """n-tile words whose closure contains the vertex or edge ``key``."""
        memo = self._star.get((key, n))
        if memo is not None:
            return memo
        lev = self.key_level(key)
        if lev > n:
            raise ValueError("cell is finer than the requested level")
        if n == 0:
            out = ((WHITE,), (BLACK,))
        else:
            if lev <= n - 1:
                cover = self.star(key, n - 1)
            elif key[0] in ("ve", "ee"):
                cover = self.star(key[1], n - 1)
            else:
                cover = (key[1],)
            is_vertex = key[0] in ("P", "ve", "vt")
            cells = self.corners if is_vertex else self.edge_keys
            out = tuple(
                w + (t,)
                for w in cover
                for t in self._children[self.color(w)]
                if key in cells(w + (t,))
            )
        self._star[(key, n)] = out
        return out

    def closed_flower_vertices(self, key, n: int) -> set:
        out = set()
        for w in self.star(key, n):
            out.update(self.corners(w))
        return out

    # -- dynamics on vertices ----------------------------------------------------

    def vertex_image(self, word: tuple, i: int) -> tuple:
        """Representative of the image vertex (same corner of the image tile)."""
        return self.fword(word), i

    def vertex_preimages(self, word: tuple, i: int) -> list:
        """Representatives ``(word, i)`` of all preimages, sorted by word, one per key."""
        c0, rest = word[0], word[1:]
        seen = {}
        for t in range(2 * self.d):
            if self._tile_color[t] != c0:
                continue
            w2 = (self._tile_parent[t], t) + rest
            k = self.vkey(w2, i)
            if k not in seen or w2 < seen[k]:
                seen[k] = w2
        return sorted(((w, i) for w in seen.values()), key=lambda p: p[0])

    def vertex_degree(self, key) -> int:
        """Local degree of ``f^n`` at an n-vertex, n = level of the key."""
        n = self.key_level(key)
        return len(self.star(key, n)) // 2

    def map_degree_at(self, key, n: int) -> int:
        """deg_{f^n} at the vertex ``key`` (any n >= its level)."""
        return len(self.star(key, n)) // 2

    # -- geometry-free predicates -------------------------------------------------

    def edges_met(self, word: tuple) -> set:
        """Indices of the 0-edges met by the closed tile."""
        out = set()
        for i in range(self.m):
            c = self.carrier0_vertex(word, i)
            if c[0] == "P":
                out.add(c[1])
                out.add((c[1] - 1) % self.m)
            elif c[0] == "E":
                out.add(c[1])
        return out

    def joins_opposite_sides(self, word: tuple) -> bool:
        return sides_joined(self.edges_met(word), self.m)

    def expansion_level(self, max_level: int = 12) -> int:
        """Smallest n such that no n-tile joins opposite sides of the curve."""
        for n in range(1, max_level + 1):
            if self.tile_count(n) > cell_budget():
                break
            if not any(self.joins_opposite_sides(w) for w in self.tiles_at(n)):
                return n
        raise HypothesesViolated("no tile level without opposite-side joins within budget")

    def build_level(self, n: int) -> "CellComplexLevel":
        lev = self._levels.get(n)
        if lev is None:
            lev = _build_level(self, n)
            self._levels[n] = lev
        return lev


def sides_joined(met: set, m: int) -> bool:
    """Opposite-sides rule: all three edges when m == 3, else two disjoint ones."""
    if m == 3:
        return len(met) == 3
    for a in met:
        for b in met:
            if (b - a) % m not in (0, 1, m - 1):
                return True
    return False


# -- levels ------------------------------------------------------------------------


@dataclass
class CellComplexLevel:
    """Full level-n complex.

    Attributes
    ----------
    n : int
    words : list of tuple
        Tile words in id order.
    colors : list of int
    tile_vertices, tile_edges : list of tuple
        Vertex and edge ids per tile, by label.
    vertex_keys, edge_keys : list
        Canonical keys in id order.
    vertex_reps : list of (word, corner)
    edge_ends : list of (int, int)
    vertex_degree : list of int
        Local degree of ``f^n`` at each vertex.
    positions : ndarray or None
        Homogeneous ``(z, w)`` rows for each vertex when an embedding exists.
    """

    n: int
    m: int
    words: list
    colors: list
    tile_vertices: list
    tile_edges: list
    vertex_keys: list
    edge_keys: list
    vertex_reps: list
    edge_ends: list
    vertex_degree: list
    vertex_index: dict = field(repr=False)
    edge_index: dict = field(repr=False)
    positions: object = None

    @property
    def n_tiles(self):
        return len(self.words)

    @property
    def n_edges(self):
        return len(self.edge_keys)

    @property
    def n_vertices(self):
        return len(self.vertex_keys)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_tiles

    def tiles_at_vertex(self, v: int) -> list:
        return [t for t, vs in enumerate(self.tile_vertices) if v in vs]

    def parent_map(self, engine: Engine) -> list:
        """Tile id of the image of each tile (in the level below)."""
        if self.n == 0:
            raise ValueError("level 0 has no parent map")
        return [engine.tile_id(engine.fword(w)) for w in self.words]

    def check_invariants(self, degree: int) -> dict:
        n = self.n
        checks = {
            "tile_count": self.n_tiles == 2 * degree**n,
            "edge_count": self.n_edges == self.m * degree**n,
            "vertex_bound": self.n_vertices <= self.m * degree**n,
            "m_gons": all(len(set(vs)) == self.m for vs in self.tile_vertices),
            "euler": self.euler_characteristic() == 2,
        }
        return checks


def _build_level(engine: Engine, n: int) -> CellComplexLevel:
    words = engine.tiles_at(n)
    m = engine.m
    vidx, eidx = {}, {}
    vkeys, ekeys, vreps, eends = [], [], [], []
    tv, te = [], []
    vcount = defaultdict(int)
    for w in words:
        vs, es = [], []
        for i in range(m):
            k = engine.vkey(w, i)
            if k not in vidx:
                vidx[k] = len(vkeys)
                vkeys.append(k)
                vreps.append((w, i))
            vs.append(vidx[k])
            vcount[vidx[k]] += 1
        for i in range(m):
            k = engine.ekey(w, i)
            if k not in eidx:
                eidx[k] = len(ekeys)
                ekeys.append(k)
                eends.append((vs[i], vs[(i + 1) % m]))
            es.append(eidx[k])
        tv.append(tuple(vs))
        te.append(tuple(es))
    degs = [vcount[v] // 2 for v in range(len(vkeys))]
    return CellComplexLevel(
        n=n,
        m=m,
        words=words,
        colors=[engine.color(w) for w in words],
        tile_vertices=tv,
        tile_edges=te,
        vertex_keys=vkeys,
        edge_keys=ekeys,
        vertex_reps=vreps,
        edge_ends=eends,
        vertex_degree=degs,
        vertex_index=vidx,
        edge_index=eidx,
    )


def build_level(backend, n: int, embed: bool = True) -> CellComplexLevel:
    """Full level-n cell decomposition of a backend.

    Parameters
    ----------
    backend
        Anything with an ``engine`` attribute; rational backends also get
        vertex embeddings when ``embed`` is true.
    n : int
        Level, at least 0.

    Raises
    ------
    BudgetExceeded
        When ``2 * deg**n`` exceeds the cell budget (``THURSTON_BUDGET_CELLS``).
    """
    if n < 0:
        raise ValueError("level must be nonnegative")
    engine = backend.engine
    if engine.tile_count(n) > cell_budget():
        raise BudgetExceeded("cell budget exceeded")
    lev = engine.build_level(n)
    if embed and lev.positions is None and hasattr(backend, "vertex_positions"):
        lev.positions = backend.vertex_positions(lev)
    return lev


# -- flowers ------------------------------------------------------------------------


@dataclass(frozen=True)
class Flower:
    """Open star of an n-vertex: the vertex, its incident edges and tiles."""

    center: int
    n: int
    tiles: tuple
    edges: tuple

    @property
    def closure_tile_count(self) -> int:
        return len(self.tiles)


def flower(level: CellComplexLevel, v: int) -> Flower:
    if not 0 <= v < level.n_vertices:
        raise KeyError(f"unknown vertex {v}")
    tiles = tuple(t for t, vs in enumerate(level.tile_vertices) if v in vs)
    edges = tuple(e for e, ends in enumerate(level.edge_ends) if v in ends)
    return Flower(v, level.n, tiles, edges)


def flower_image(engine: Engine, level: CellComplexLevel, v: int) -> tuple:
    """Sorted level-(n-1) tile ids of the images of the tiles of ``W^n(v)``."""
    fl = flower(level, v)
    return tuple(sorted(engine.tile_id(engine.fword(level.words[t])) for t in fl.tiles))


def joins_opposite_sides(engine: Engine, word: tuple) -> bool:
    """Whether the closed tile meets two disjoint 0-edges (all three if m = 3)."""
    return engine.joins_opposite_sides(word)


def _require_tile_hypotheses(engine: Engine) -> None:
    if any(engine.joins_opposite_sides(w) for w in engine.tiles_at(1)):
        raise HypothesesViolated("hypotheses violated: some 1-tile joins opposite sides")


def tile_in_flower(engine: Engine, word: tuple, m: int):
    """Key of the lowest-id m-vertex whose open m-flower contains the tile.

    Raises
    ------
    HypothesesViolated
        If some 1-tile joins opposite sides, or no such vertex exists.
    """
    n = len(word) - 1
    if not m < n:
        raise ValueError("need m < n")
    _require_tile_hypotheses(engine)
    lev = engine.build_level(m)
    wm = word[: m + 1]
    cand = sorted(set(engine.corners(wm)), key=lambda k: lev.vertex_index[k])
    cells = [engine.carrier(word, i, m)[2] for i in range(engine.m)]
    cells += [engine.edge_carrier(word, i, m)[2] for i in range(engine.m)]
    for v in cand:
        if all(v in c for c in cells):
            return v
    raise HypothesesViolated("hypotheses violated: tile lies in no m-flower")


def disjoint_deep_flowers(engine: Engine, p, q, level: int) -> bool:
    """Whether the closed flowers of two distinct vertices at ``level`` are disjoint."""
    if p == q:
        raise ValueError("vertices must be distinct")
    if max(engine.key_level(p), engine.key_level(q)) > level:
        raise ValueError("vertices are finer than the level")
    return not (engine.closed_flower_vertices(p, level) & engine.closed_flower_vertices(q, level))


# -- combinatorial expansion ---------------------------------------------------------


def combinatorial_expansion(engine: Engine, n: int) -> int:
    """Fewest n-tiles in a connected chain joining opposite sides of the curve.

    For m >= 4 this is a shortest path between tiles meeting two disjoint
    0-edges; for m = 3 it is the smallest spider meeting all three edges.
    Tiles are adjacent when they share a vertex.  Growth in ``n`` is the
    combinatorial form of expansion.
    """
    lev = engine.build_level(n)
    m = engine.m
    by_vertex = defaultdict(list)
    for t, vs in enumerate(lev.tile_vertices):
        for v in vs:
            by_vertex[v].append(t)
    nbrs = [set() for _ in lev.words]
    for ts in by_vertex.values():
        for a in ts:
            nbrs[a].update(ts)
    met = [engine.edges_met(w) for w in lev.words]

    def bfs(j):
        dist = [-1] * len(lev.words)
        dq = deque()
        for t, s in enumerate(met):
            if j in s:
                dist[t] = 0
                dq.append(t)
        while dq:
            a = dq.popleft()
            for b in nbrs[a]:
                if dist[b] < 0:
                    dist[b] = dist[a] + 1
                    dq.append(b)
        return dist

    dists = [bfs(j) for j in range(m)]
    if m == 3:
        return min(dists[0][t] + dists[1][t] + dists[2][t] + 1 for t in range(len(lev.words)))
    best = None
    for a in range(m):
        for b in range(m):
            if (b - a) % m in (0, 1, m - 1):
                continue
            val = min(dists[b][t] for t, s in enumerate(met) if a in s) + 1
            best = val if best is None else min(best, val)
    return best


# -- power templates -------------------------------------------------------------------


def power_template(engine: Engine, j: int) -> Template:
    """Template of ``f^j`` over the same curve, read off the level-j complex."""
    lev = engine.build_level(j)
    vplace, vlabel = [], []
    for key, (w, i) in zip(lev.vertex_keys, lev.vertex_reps):
        c = engine.carrier0_vertex(w, i)
        if c[0] == "P":
            vplace.append(("v", c[1]))
        elif c[0] == "E":
            vplace.append(("e", c[1]))
        else:
            vplace.append(("t", c[1]))
        vlabel.append(i)
    eplace = []
    for k in lev.edge_keys:
        eplace.append(None)
    for t, w in enumerate(lev.words):
        for i, e in enumerate(lev.tile_edges[t]):
            if eplace[e] is None:
                c = engine.carrier0_edge(w, i)
                eplace[e] = ("e", c[1]) if c[0] == "E" else ("t", c[1])
    tiles = [
        TTile(lev.colors[t], w[0], lev.tile_vertices[t], lev.tile_edges[t]) for t, w in enumerate(lev.words)
    ]
    return assemble_template(engine.m, vplace, vlabel, list(lev.edge_ends), eplace, tiles)


# -- visual distance ------------------------------------------------------------------------


def separation_level(engine: Engine, wx: tuple, wy: tuple) -> int:
    """Largest n such that the level-n ancestors of two tile words intersect."""
    n = min(len(wx), len(wy)) - 1
    best = -1
    for k in range(n + 1):
        if set(engine.corners(wx[: k + 1])) & set(engine.corners(wy[: k + 1])):
            best = k
        else:
            break
    return best


def tile_diameters(backend, n: int, samples_per_edge: int = 8) -> np.ndarray:
    """Chordal diameter of every n-tile of a rational backend, in id order.

    Each tile is sampled along its boundary: ``samples_per_edge`` curve
    points per 0-edge, pulled back by the tile's inverse branch.  A tile's
    diameter is attained on its boundary, so this is a lower estimate that
    converges as the sampling is refined.
    """
    from .sphere import chordal

    f = backend.f
    th = backend.geometry.post_theta
    m = len(th)
    samp = []
    for j in range(m):
        a = th[j]
        b = th[(j + 1) % m] + (2 * np.pi if j == m - 1 else 0.0)
        samp.extend(a + t * (b - a) for t in np.linspace(0.0, 1.0, samples_per_edge + 1)[:-1])
    sz, sw = f.curve.point(np.array(samp))
    words = backend.engine.tiles_at(n)
    W, S = len(words), len(samp)
    if n == 0:
        gz, gw = np.tile(sz, W), np.tile(sw, W)
    else:
        gz, gw = backend.branches.g([w for w in words for _ in range(S)], np.tile(sz, W), np.tile(sw, W))
    gz, gw = gz.reshape(W, S), gw.reshape(W, S)
    out = np.empty(W)
    for i in range(W):
        out[i] = chordal(gz[i, :, None], gw[i, :, None], gz[i, None, :], gw[i, None, :]).max()
    return out


def expansion_factor(backend, levels=range(3, 10)) -> float:
    """Median per-level contraction of the largest tile diameter, as ``Lambda > 1``."""
    levels = list(levels)
    dmax = {n: tile_diameters(backend, n).max() for n in [levels[0] - 1] + levels}
    ratios = [dmax[n - 1] / dmax[n] for n in levels]
    return float(np.median(ratios))


def visual_distance(backend, x, y, max_level: int, expansion: float) -> float:
    """``expansion ** -m(x, y)`` with ``m(x, y)`` the last level at which tiles
    containing the two points still meet (capped at ``max_level``).

    Points on the skeleton are assigned to the lowest-id tile containing them.

    Raises
    ------
    UnlocatablePoint
        If a point cannot be placed in any tile.
    """
    from .sphere import points_to_arrays

    z, w = points_to_arrays([x, y])
    wx, wy = backend.branches.locate(z, w, max_level)
    return float(expansion ** -separation_level(backend.engine, wx, wy))


# -- local refinement ---------------------------------------------------------------------


@dataclass
class PartialComplex:
    level: int
    words: list
    vertex_keys: list
    edge_keys: list


def local_refine(engine: Engine, seeds, depth: int) -> PartialComplex:
    """Subdivide only the seed tiles, ``depth`` times.

    Raises
    ------
    BudgetExceeded
        When the refined region would exceed the cell budget.
    """
    seeds = list(seeds)
    if not seeds:
        return PartialComplex(-1, [], [], [])
    levels = {len(s) - 1 for s in seeds}
    if len(levels) != 1:
        raise ValueError("seed tiles must share a level")
    if len(seeds) * engine.d**depth > cell_budget():
        raise BudgetExceeded("cell budget exceeded")
    words = sorted(w for s in seeds for w in engine.descendants(s, depth))
    vk, ek = {}, {}
    for w in words:
        for i in range(engine.m):
            vk.setdefault(engine.vkey(w, i), None)
            ek.setdefault(engine.ekey(w, i), None)
    return PartialComplex(levels.pop() + depth, words, list(vk), list(ek))


# -- export ------------------------------------------------------------------------------------


def tiles_csv(level: CellComplexLevel) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["id", "color", "edge_cycle", "vertex_cycle"])
    for t in range(level.n_tiles):
        wr.writerow([
            t,
            COLOR_NAMES[level.colors[t]],
            " ".join(map(str, level.tile_edges[t])),
            " ".join(map(str, level.tile_vertices[t])),
        ])
    return buf.getvalue()


def vertices_csv(level: CellComplexLevel) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["id", "re", "im", "is_infinity", "deg"])
    pos = level.positions
    for v in range(level.n_vertices):
        if pos is None:
            re_s, im_s, inf = "", "", ""
        else:
            z, w = pos[v]
            if abs(w) < 1e-300:
                re_s, im_s, inf = "", "", 1
            else:
                t = z / w
                re_s, im_s, inf = f"{t.real:.12e}", f"{t.imag:.12e}", 0
        wr.writerow([v, re_s, im_s, inf, level.vertex_degree[v]])
    return buf.getvalue()


def incidence_json(level: CellComplexLevel) -> str:
    data = {
        "level": level.n,
        "post_count": level.m,
        "tiles": [
            {"id": t, "color": COLOR_NAMES[level.colors[t]], "edges": list(level.tile_edges[t]),
             "vertices": list(level.tile_vertices[t])}
            for t in range(level.n_tiles)
        ],
        "edges": [{"id": e, "ends": list(ends)} for e, ends in enumerate(level.edge_ends)],
        "vertices": [{"id": v, "deg": d} for v, d in enumerate(level.vertex_degree)],
    }
    return json.dumps(data, sort_keys=True, indent=1)


def vertex_position_array(level: CellComplexLevel):
    return None if level.positions is None else np.asarray(level.positions)
