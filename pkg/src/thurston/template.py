"""One-step subdivision templates: the level-1 cells of a map over its level-0 cells.

A template describes how each of the two 0-tiles (white ``0`` and black ``1``)
of the sphere is cut into 1-tiles, and how each 1-cell sits over the level-0
complex.  It is the only thing the combinatorial engine needs; rational maps
produce one by path lifting, subdivision rules supply one as data.

Placement tuples (``where``) use three forms:

* ``("v", j)``: the vertex is the post point ``P_j``.
* ``("e", j, k)``: the cell lies on the 0-edge ``E_j``; ``k`` is its position
  along the chain of 1-cells of ``E_j`` (vertices count from 0 at ``P_j``,
  edges count from 0 at the edge leaving ``P_j``).
* ``("t", c)``: the cell lies in the interior of the 0-tile of color ``c``.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field

WHITE, BLACK = 0, 1
COLOR_NAMES = ("white", "black")


class TemplateError(ValueError):
    """Raised when a template fails a validity check."""


@dataclass(frozen=True)
class TVertex:
    where: tuple
    label: int
    degree: int


@dataclass(frozen=True)
class TEdge:
    where: tuple
    ends: tuple  # (start, end), oriented from label ``label`` to ``label + 1``
    label: int


@dataclass(frozen=True)
class TTile:
    color: int
    parent0: int
    corners: tuple  # corners[i] has label i
    edges: tuple  # edges[i] runs from corners[i] to corners[i + 1]


@dataclass(frozen=True)
class Template:
    """Level-1 cells over the level-0 complex.

    Attributes
    ----------
    m : int
        Number of post points, i.e. of vertices of each 0-tile.
    degree : int
        Degree of the map; there are ``2 * degree`` tiles.
    vertices, edges, tiles : tuple
        Cells with their placement over level 0.
    chains : tuple of (tuple, tuple)
        For each 0-edge ``E_j``, the vertex ids from ``P_j`` to ``P_{j+1}``
        and the edge ids between them.
    """

    m: int
    degree: int
    vertices: tuple
    edges: tuple
    tiles: tuple
    chains: tuple
    post_vertex: tuple = field(default=())  # vertex id of P_j

    def children(self, color: int) -> list[int]:
        """Ids of the 1-tiles inside the 0-tile of ``color``."""
        return [t for t, tile in enumerate(self.tiles) if tile.parent0 == color]

    def image_of_post(self) -> list[int]:
        """Index of ``f(P_j)`` for each post point."""
        return [self.vertices[self.post_vertex[j]].label for j in range(self.m)]

    def critical(self) -> list[int]:
        return [v for v, vert in enumerate(self.vertices) if vert.degree > 1]

    def periodic_critical(self) -> list[int]:
        """Critical vertices whose forward orbit returns to them.

        Only post points can be periodic, so a critical vertex is periodic
        exactly when it is some ``P_j`` lying on a cycle of the post map.
        """
        img = self.image_of_post()
        out = []
        for v in self.critical():
            w = self.vertices[v].where
            if w[0] != "v":
                continue
            j = w[1]
            x, seen = img[j], set()
            while x not in seen and x != j:
                seen.add(x)
                x = img[x]
            if x == j:
                out.append(v)
        return out

    def validate(self) -> None:
        """Run every load-time check; raise :class:`TemplateError` on failure."""
        validate_template(self)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        """Declarative map-spec form (``kind = "subdivision"``)."""
        def vname(v):
            return f"v{v}"

        def ename(e):
            return f"e{e}"

        def on(where):
            if where[0] == "v":
                return f"P{where[1]}"
            if where[0] == "e":
                return f"E{where[1]}"
            return COLOR_NAMES[where[1]]

        verts = [{"name": vname(i), "on": on(v.where), "label": v.label} for i, v in enumerate(self.vertices)]
        edges = [
            {"name": ename(i), "from": vname(e.ends[0]), "to": vname(e.ends[1]), "on": on(e.where)}
            for i, e in enumerate(self.edges)
        ]
        tiles = [
            {"color": COLOR_NAMES[t.color], "in": COLOR_NAMES[t.parent0], "edges": [ename(e) for e in t.edges]}
            for t in self.tiles
        ]
        return {
            "kind": "subdivision",
            "post_count": self.m,
            "tiles": list(COLOR_NAMES),
            "template": {"vertices": verts, "edges": edges, "tiles": tiles},
        }


def _parse_on(s: str, m: int):
    s = str(s)
    if s in COLOR_NAMES:
        return ("t", COLOR_NAMES.index(s))
    if s[:1] in ("P", "E") and s[1:].isdigit():
        j = int(s[1:])
        if not 0 <= j < m:
            raise TemplateError(f"placement {s!r} out of range")
        return ("v", j) if s[0] == "P" else ("e", j)
    raise TemplateError(f"unknown placement {s!r}")


def template_from_dict(spec: dict) -> Template:
    """Build and validate a template from the declarative subdivision format.

    Parameters
    ----------
    spec : dict
        ``{"kind": "subdivision", "post_count": m, "tiles": ["white",
        "black"], "template": {"vertices": [...], "edges": [...], "tiles":
        [...]}}``.  Vertices carry ``name``, ``on`` (``"P<j>"``, ``"E<j>"``,
        ``"white"`` or ``"black"``) and ``label``; edges carry ``name``,
        ``from``, ``to`` and ``on``; tiles carry ``color``, ``in`` (the 0-tile
        containing them) and ``edges`` listed by label.

    Raises
    ------
    TemplateError
        On malformed input or any failed validity check.
    """
    if spec.get("kind") != "subdivision":
        raise TemplateError("not a subdivision spec")
    try:
        m = int(spec["post_count"])
        body = spec["template"]
        vspec, espec, tspec = body["vertices"], body["edges"], body["tiles"]
    except (KeyError, TypeError, ValueError) as exc:
        raise TemplateError(f"malformed subdivision spec: {exc}") from exc
    if m < 3:
        raise TemplateError("post_count must be at least 3")
    if list(spec.get("tiles", COLOR_NAMES)) != list(COLOR_NAMES):
        raise TemplateError('level-0 tiles must be ["white", "black"]')

    vid = {}
    vplace, vlabel = [], []
    for v in vspec:
        if v["name"] in vid:
            raise TemplateError(f"duplicate vertex {v['name']!r}")
        vid[v["name"]] = len(vplace)
        vplace.append(_parse_on(v["on"], m))
        lab = int(v["label"])
        if not 0 <= lab < m:
            raise TemplateError(f"label of {v['name']!r} out of range")
        vlabel.append(lab)

    eid = {}
    eends, eplace = [], []
    for e in espec:
        if e["name"] in eid:
            raise TemplateError(f"duplicate edge {e['name']!r}")
        try:
            a, b = vid[e["from"]], vid[e["to"]]
        except KeyError as exc:
            raise TemplateError(f"edge {e['name']!r} uses unknown vertex {exc}") from exc
        eid[e["name"]] = len(eends)
        eends.append((a, b))
        eplace.append(_parse_on(e["on"], m))

    tiles = []
    for t in tspec:
        try:
            color = COLOR_NAMES.index(t["color"])
            parent = COLOR_NAMES.index(t["in"])
            edges = tuple(eid[name] for name in t["edges"])
        except (ValueError, KeyError) as exc:
            raise TemplateError(f"malformed tile {t!r}") from exc
        if len(edges) != m:
            raise TemplateError("every tile must have post_count edges")
        corners = tuple(eends[e][0] for e in edges)
        tiles.append(TTile(color, parent, corners, edges))

    return assemble_template(m, vplace, vlabel, eends, eplace, tiles)


def assemble_template(m, vplace, vlabel, eends, eplace, tiles) -> Template:
    """Derive chains, degrees and chain positions, then validate.

    ``vplace`` entries are ``("v", j)``, ``("e", j)`` or ``("t", c)``;
    ``eplace`` entries are ``("e", j)`` or ``("t", c)``.  Chain positions are
    filled in by walking each 0-edge from ``P_j``.
    """
    nt = len(tiles)
    if nt % 2:
        raise TemplateError("odd number of tiles")
    degree = nt // 2
    post_vertex = [None] * m
    for v, w in enumerate(vplace):
        if w[0] == "v":
            if post_vertex[w[1]] is not None:
                raise TemplateError(f"post point P{w[1]} placed twice")
            post_vertex[w[1]] = v
    if any(p is None for p in post_vertex):
        raise TemplateError("every post point must be a 1-vertex")

    chains = []
    vpos = {}
    epos = {}
    for j in range(m):
        on_j = [e for e, w in enumerate(eplace) if w == ("e", j)]
        adj = defaultdict(list)
        for e in on_j:
            a, b = eends[e]
            adj[a].append((e, b))
            adj[b].append((e, a))
        start, stop = post_vertex[j], post_vertex[(j + 1) % m]
        vs, es = [start], []
        cur, prev_e = start, None
        while cur != stop or not es:
            nxt = [(e, w) for e, w in adj[cur] if e != prev_e]
            if len(nxt) != 1:
                raise TemplateError(f"1-cells on E{j} do not form a simple chain")
            e, w = nxt[0]
            es.append(e)
            vs.append(w)
            prev_e, cur = e, w
            if len(es) > len(on_j):
                raise TemplateError(f"1-cells on E{j} do not form a simple chain")
        if len(es) != len(on_j):
            raise TemplateError(f"stray 1-edges on E{j}")
        for k, v in enumerate(vs[1:-1], start=1):
            if vplace[v] != ("e", j):
                raise TemplateError(f"vertex {v} on the chain of E{j} is placed elsewhere")
            vpos[v] = (j, k)
        for k, e in enumerate(es):
            epos[e] = (j, k)
        chains.append((tuple(vs), tuple(es)))

    for v, w in enumerate(vplace):
        if w[0] == "e" and v not in vpos:
            raise TemplateError(f"vertex {v} is placed on E{w[1]} but not on its chain")

    incid = defaultdict(int)
    for t in tiles:
        for c in t.corners:
            incid[c] += 1
    verts = []
    for v, w in enumerate(vplace):
        if incid[v] % 2:
            raise TemplateError(f"vertex {v} meets an odd number of tiles")
        place = ("e",) + vpos[v] if w[0] == "e" else w
        verts.append(TVertex(place, vlabel[v], incid[v] // 2))
    edges = []
    for e, (ends, w) in enumerate(zip(eends, eplace)):
        place = ("e",) + epos[e] if w[0] == "e" else w
        edges.append(TEdge(place, tuple(ends), vlabel[ends[0]]))
    tmpl = Template(m, degree, tuple(verts), tuple(edges), tuple(tiles), tuple(chains), tuple(post_vertex))
    validate_template(tmpl)
    return tmpl


def validate_template(t: Template) -> None:
    """Check counts, labels, gluing, vertex links, Euler characteristic,
    Riemann-Hurwitz, post set and orientation along the curve."""
    m, d = t.m, t.degree
    if d < 2:
        raise TemplateError("degree must be at least 2")
    if len(t.tiles) != 2 * d:
        raise TemplateError("tile count is not 2 * degree")
    if len(t.edges) != m * d:
        raise TemplateError(f"edge count {len(t.edges)} is not m * degree = {m * d}")
    colors = [tile.color for tile in t.tiles]
    if colors.count(WHITE) != d:
        raise TemplateError("white and black tile counts differ")

    for e, edge in enumerate(t.edges):
        a, b = edge.ends
        if a == b:
            raise TemplateError(f"edge {e} is a loop")
        if t.vertices[a].label != edge.label or t.vertices[b].label != (edge.label + 1) % m:
            raise TemplateError(f"edge {e} does not map onto a 0-edge")

    owners = defaultdict(list)
    for ti, tile in enumerate(t.tiles):
        if len(set(tile.corners)) != m:
            raise TemplateError(f"tile {ti} repeats a corner")
        for i in range(m):
            e = t.edges[tile.edges[i]]
            if e.label != i or e.ends != (tile.corners[i], tile.corners[(i + 1) % m]):
                raise TemplateError(f"tile {ti} boundary word does not match labels")
            owners[tile.edges[i]].append(ti)
    for e in range(len(t.edges)):
        cs = sorted(t.tiles[ti].color for ti in owners[e])
        if cs != [WHITE, BLACK]:
            raise TemplateError(f"edge {e} is not shared by one white and one black tile")

    # Vertex links: tiles around each vertex, joined through shared edges,
    # must form one cycle.
    for v in range(len(t.vertices)):
        inc_tiles = [ti for ti, tile in enumerate(t.tiles) if v in tile.corners]
        inc_edges = [e for e, edge in enumerate(t.edges) if v in edge.ends]
        if not inc_tiles:
            raise TemplateError(f"vertex {v} lies on no tile")
        adj = defaultdict(list)
        for e in inc_edges:
            a, b = owners[e]
            adj[a].append(b)
            adj[b].append(a)
        if any(len(adj[ti]) != 2 for ti in inc_tiles):
            raise TemplateError(f"link of vertex {v} is not a cycle")
        seen, stack = {inc_tiles[0]}, [inc_tiles[0]]
        while stack:
            for nb in adj[stack.pop()]:
                if nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if len(seen) != len(inc_tiles) or len(inc_tiles) % 2:
            raise TemplateError(f"link of vertex {v} is not a single even cycle")

    used = set()
    for tile in t.tiles:
        used.update(tile.corners)
    if len(used) != len(t.vertices):
        raise TemplateError("isolated vertex")
    if len(t.vertices) - len(t.edges) + len(t.tiles) != 2:
        raise TemplateError("Euler characteristic is not 2")
    if sum(v.degree - 1 for v in t.vertices) != 2 * d - 2:
        raise TemplateError("Riemann-Hurwitz count fails")

    # Placement consistency with parents.
    for ti, tile in enumerate(t.tiles):
        for c in tile.corners:
            w = t.vertices[c].where
            if w[0] == "t" and w[1] != tile.parent0:
                raise TemplateError(f"tile {ti} has a corner inside the other 0-tile")
        for e in tile.edges:
            w = t.edges[e].where
            if w[0] == "t" and w[1] != tile.parent0:
                raise TemplateError(f"tile {ti} has an edge inside the other 0-tile")
    for j, (vs, es) in enumerate(t.chains):
        for k, e in enumerate(es):
            edge = t.edges[e]
            forward = edge.ends == (vs[k], vs[k + 1])
            if not forward and edge.ends != (vs[k + 1], vs[k]):
                raise TemplateError(f"chain of E{j} is broken at edge {e}")
            for ti in owners[e]:
                tile = t.tiles[ti]
                # Traversed along the lift, white tiles lie to the left.
                left = tile.color == WHITE
                expect = WHITE if left == forward else BLACK
                if tile.parent0 != expect:
                    raise TemplateError(f"tile {ti} lies on the wrong side of E{j}")

    # Post set: the forward orbits of critical values must cover every P_j.
    img = t.image_of_post()
    post = set()
    for v in t.critical():
        x = t.vertices[v].label
        while x not in post:
            post.add(x)
            x = img[x]
    if post != set(range(m)):
        raise TemplateError("post set of the template is not all of the marked points")


def load_template(path) -> Template:
    with open(path) as fh:
        return template_from_dict(json.load(fh))
