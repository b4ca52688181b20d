"""Numerical core for postcritically finite rational maps.

Everything here works on homogeneous coordinate arrays ``(z, w)`` and the
chordal metric of :mod:`thurston.sphere`.  The main pieces are

* batched evaluation and preimage solving (companion eigenvalues plus one
  Newton polish, in whichever chart keeps the root bounded);
* critical and postcritical sets;
* the invariant curve, path lifting along it, and extraction of the
  one-step :class:`~thurston.template.Template`;
* inverse branches onto 1-tiles, which give embeddings of every tile word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .sphere import chordal, from_xyz, normalize, to_xyz
from .template import BLACK, WHITE, TTile, assemble_template

ROOT_TOL = 1e-9


class RootSolveError(RuntimeError):
    """The polynomial solver did not produce consistent roots."""


class CurveNotInvariant(ValueError):
    pass


class ContractionFailed(RuntimeError):
    pass


class UnlocatablePoint(ValueError):
    pass


# -- invariant curves -----------------------------------------------------------------


@dataclass(frozen=True)
class Curve:
    """A great circle of the sphere with a parametrization and a left side.

    ``normal`` points into the white (left) hemisphere.
    """

    name: str
    normal: tuple

    def point(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.name == "real_line":
            return normalize(np.sin(theta / 2) + 0j, np.cos(theta / 2) + 0j)
        return normalize(np.exp(1j * theta), np.ones_like(theta, dtype=complex))

    def theta(self, z, w):
        u = to_xyz(z, w)
        if self.name == "real_line":
            return np.arctan2(u[..., 0], -u[..., 2])
        return np.arctan2(u[..., 1], u[..., 0])

    def height(self, z, w):
        """Signed height above the great circle (positive on the white side)."""
        return to_xyz(z, w) @ np.asarray(self.normal, dtype=float)

    def distance(self, z, w):
        """Chordal distance to the curve."""
        h = np.abs(self.height(z, w))
        return 0.5 * np.sqrt(np.maximum(0.0, 2.0 - 2.0 * np.sqrt(np.maximum(0.0, 1.0 - h * h))))

    def center(self, color: int):
        """A point deep inside the 0-tile of ``color``."""
        n = np.asarray(self.normal, dtype=float)
        return from_xyz(n if color == WHITE else -n)


CURVES = {
    "real_line": Curve("real_line", (0.0, 1.0, 0.0)),
    "unit_circle": Curve("unit_circle", (0.0, 0.0, -1.0)),
}


def _hpoly(coeffs, z, w, d):
    """Homogeneous form ``sum_k c_k z^k w^(d-k)``; stable when max(|z|, |w|) = 1."""
    out = np.zeros(np.broadcast(z, w).shape, dtype=complex)
    zp = np.ones_like(out)
    wp = [np.ones_like(out)]
    for _ in range(d):
        wp.append(wp[-1] * w)
    for k in range(d + 1):
        c = coeffs[k] if k < len(coeffs) else 0.0
        if c != 0:
            out = out + c * zp * wp[d - k]
        zp = zp * z
    return out


class RationalMap:
    """A rational map of the sphere given by numerator and denominator.

    Parameters
    ----------
    num, den : sequence of complex
        Coefficients in increasing degree order.
    curve : str, optional
        ``"real_line"`` or ``"unit_circle"``; required for cell decompositions.
    n_C : int
        Invariance order of the curve; only 1 is supported.

    Examples
    --------
    >>> f = RationalMap([-2, 0, 1], [0, 0, 1], curve="real_line")
    >>> f.degree
    2
    """

    def __init__(self, num, den, curve: str | None = "real_line", n_C: int = 1):
        num = np.trim_zeros(np.asarray(num, dtype=complex), "b")
        den = np.trim_zeros(np.asarray(den, dtype=complex), "b")
        if num.size == 0 or den.size == 0:
            raise ValueError("numerator and denominator must be nonzero")
        self.d = max(num.size, den.size) - 1
        if self.d < 2:
            raise ValueError("degree must be at least 2")
        self.a = np.zeros(self.d + 1, dtype=complex)
        self.b = np.zeros(self.d + 1, dtype=complex)
        self.a[: num.size] = num
        self.b[: den.size] = den
        self._check_coprime()
        if n_C != 1:
            raise ValueError("only curves with n_C = 1 are supported")
        self.n_C = n_C
        self.curve = CURVES[curve] if curve is not None else None
        self._crit = None
        self._post = None

    @property
    def degree(self) -> int:
        return self.d

    def _check_coprime(self):
        # Common roots of the homogeneous forms would make the degree drop.
        zs = np.roots(self.a[::-1]) if np.any(self.a[1:] != 0) else np.array([])
        if self.a[-1] == 0 and self.b[-1] == 0:
            raise ValueError("numerator and denominator share a root at infinity")
        for r in np.atleast_1d(zs):
            db = abs(np.polyval(self.b[::-1], r)) / max(1.0, abs(r)) ** self.d
            if db < 1e-10 * np.abs(self.b).max():
                raise ValueError("numerator and denominator share a root")

    # -- evaluation ----------------------------------------------------------------

    def apply(self, z, w):
        """Image of homogeneous points, normalized."""
        z = np.asarray(z, dtype=complex)
        w = np.asarray(w, dtype=complex)
        return normalize(_hpoly(self.a, z, w, self.d), _hpoly(self.b, z, w, self.d))

    def iterate(self, z, w, n: int):
        for _ in range(n):
            z, w = self.apply(z, w)
        return z, w

    def orbit_xyz(self, z, w, n: int):
        """Unit-sphere coordinates of ``x, f(x), ..., f^{n-1}(x)``: shape (N, n, 3)."""
        out = []
        for _ in range(n):
            out.append(to_xyz(z, w))
            z, w = self.apply(z, w)
        return np.stack(out, axis=-2)

    # -- preimages -------------------------------------------------------------------

    def preimage_roots(self, yz, yw):
        """All ``d`` solutions of ``f(x) = y`` for each target, without merging.

        Parameters
        ----------
        yz, yw : (N,) complex arrays
            Homogeneous targets.

        Returns
        -------
        (xz, xw) : two (N, d) complex arrays
            Normalized homogeneous roots, sorted by affine ``(Re, Im)`` with
            infinity last.

        Raises
        ------
        RootSolveError
            If a polished root fails ``chordal(f(x), y) < 1e-6``.
        """
        yz = np.atleast_1d(np.asarray(yz, dtype=complex))
        yw = np.atleast_1d(np.asarray(yw, dtype=complex))
        n, d = yz.size, self.d
        coeffs = yw[:, None] * self.a[None, :] - yz[:, None] * self.b[None, :]
        scale = np.abs(coeffs).max(axis=1, keepdims=True)
        coeffs = coeffs / scale
        # Work in the chart (z or s = 1/z) whose end coefficient is larger, so
        # the companion matrix stays well scaled; tiny leading coefficients in
        # that chart are roots at its infinity.
        flip = np.abs(coeffs[:, 0]) > np.abs(coeffs[:, d])
        work = np.where(flip[:, None], coeffs[:, ::-1], coeffs)
        eff = np.full(n, d)
        for k in range(d, 0, -1):
            tiny = (eff == k) & (np.abs(work[:, k]) < 1e-13)
            eff[tiny] = k - 1
        u = np.zeros((n, d), dtype=complex)
        at_inf = np.zeros((n, d), dtype=bool)
        for k in np.unique(eff):
            rows = np.nonzero(eff == k)[0]
            at_inf[rows, k:] = True
            if k == 0:
                continue
            c = work[rows, : k + 1]
            comp = np.zeros((rows.size, k, k), dtype=complex)
            comp[:, 1:, :-1] = np.eye(k - 1)
            comp[:, :, -1] = -c[:, :k] / c[:, k : k + 1]
            try:
                u[rows, :k] = np.linalg.eigvals(comp)
            except np.linalg.LinAlgError as exc:
                raise RootSolveError("root solve failed") from exc
        cz = np.where(at_inf, 1.0 + 0j, u)
        cw = np.where(at_inf, 0j, 1.0 + 0j)
        xz = np.where(flip[:, None], cw, cz)
        xw = np.where(flip[:, None], cz, cw)
        xz, xw = normalize(xz, xw)
        # One Newton polish in whichever chart keeps the root in the unit disk.
        small = np.abs(xz) <= np.abs(xw)
        t = np.where(small, xz / np.where(small, xw, 1.0), 0.0)
        s_ = np.where(small, 0.0, xw / np.where(small, 1.0, xz))
        t = kernels.polish_roots(coeffs, t)
        s_ = kernels.polish_roots(coeffs[:, ::-1], s_)
        xz, xw = normalize(np.where(small, t, 1.0 + 0j), np.where(small, 1.0 + 0j, s_))
        # Deterministic order by affine (Re, Im), infinity last.
        with np.errstate(divide="ignore", invalid="ignore"):
            aff = np.where(np.abs(xw) > 1e-300, xz / np.where(np.abs(xw) > 1e-300, xw, 1.0), np.inf)
        key_re = np.where(np.isfinite(aff), aff.real, np.inf)
        key_im = np.where(np.isfinite(aff), aff.imag, np.inf)
        order = np.lexsort((key_im, key_re), axis=-1)
        xz = np.take_along_axis(xz, order, axis=1)
        xw = np.take_along_axis(xw, order, axis=1)
        fz, fw = self.apply(xz, xw)
        err = chordal(fz, fw, yz[:, None], yw[:, None])
        if not np.all(np.isfinite(err)) or err.max(initial=0.0) > 1e-6:
            raise RootSolveError("root solve failed")
        return xz, xw

    def preimages(self, yz: complex, yw: complex):
        """Preimages of one point with local degrees (sum equals the degree).

        Roots near a critical point whose value is ``y`` are merged into it.
        """
        xz, xw = self.preimage_roots(np.array([yz]), np.array([yw]))
        xz, xw = xz[0], xw[0]
        out = []
        used = np.zeros(self.d, dtype=bool)
        for cz, cw, deg in self.critical_points():
            fz, fw = self.apply(cz, cw)
            if chordal(fz, fw, yz, yw) < ROOT_TOL:
                near = (~used) & (chordal(xz, xw, cz, cw) < 1e-4)
                idx = np.nonzero(near)[0]
                if idx.size < deg:
                    idx = np.argsort(np.where(used, np.inf, chordal(xz, xw, cz, cw)))[:deg]
                used[idx[:deg]] = True
                out.append((complex(cz), complex(cw), deg))
        for k in range(self.d):
            if not used[k]:
                out.append((complex(xz[k]), complex(xw[k]), 1))
        if sum(p[2] for p in out) != self.d:
            raise RootSolveError("root solve failed")
        return sorted(out, key=_affine_sort_key)

    # -- critical data -------------------------------------------------------------------

    def critical_points(self):
        """List of ``(z, w, local_degree)`` for every critical point."""
        if self._crit is not None:
            return self._crit
        d = self.d
        # Wronskian N'D - ND' in the affine chart; degree deficit -> infinity.
        pa = np.polynomial.Polynomial(self.a)
        pb = np.polynomial.Polynomial(self.b)
        wr = (pa.deriv() * pb - pa * pb.deriv()).coef
        wr = np.trim_zeros(np.where(np.abs(wr) < 1e-12 * np.abs(wr).max(), 0, wr), "b")
        roots = np.polynomial.Polynomial(wr).roots() if wr.size > 1 else np.array([])
        mult_inf = 2 * d - 2 - (wr.size - 1)
        clusters = []
        for r in roots:
            rz, rw = normalize(np.array([r]), np.array([1.0 + 0j]))
            for cl in clusters:
                if chordal(cl[0], cl[1], rz[0], rw[0]) < 1e-4:
                    cl[2].append(r)
                    break
            else:
                clusters.append([rz[0], rw[0], [r]])
        crit = []
        for cl in clusters:
            c = np.mean(cl[2])
            cz, cw = normalize(np.array([c]), np.array([1.0 + 0j]))
            crit.append((complex(cz[0]), complex(cw[0]), len(cl[2]) + 1))
        if mult_inf > 0:
            crit.append((1.0 + 0j, 0j, mult_inf + 1))
        if sum(c[2] - 1 for c in crit) != 2 * d - 2:
            raise RootSolveError("critical point count violates Riemann-Hurwitz")
        self._crit = sorted(crit, key=_affine_sort_key)
        return self._crit

    def local_degree(self, z: complex, w: complex) -> int:
        for cz, cw, deg in self.critical_points():
            if chordal(cz, cw, z, w) < 1e-8:
                return deg
        return 1

    def postcritical(self, max_steps: int = 200):
        """Postcritical points ``[(z, w), ...]`` (forward orbits of critical values)."""
        if self._post is not None:
            return self._post
        post = []

        def known(z, w):
            return any(chordal(pz, pw, z, w) < ROOT_TOL for pz, pw in post)

        for cz, cw, _ in self.critical_points():
            z, w = self.apply(np.array([cz]), np.array([cw]))
            for _ in range(max_steps):
                if known(z[0], w[0]):
                    break
                post.append((complex(z[0]), complex(w[0])))
                z, w = self.apply(z, w)
            else:
                raise ValueError("postcritical set is not finite within the step limit")
        self._post = post
        return post

    def has_periodic_critical_point(self) -> bool:
        for cz, cw, _ in self.critical_points():
            z, w = np.array([cz]), np.array([cw])
            for _ in range(len(self.postcritical()) + 2):
                z, w = self.apply(z, w)
                if chordal(z[0], w[0], cz, cw) < ROOT_TOL:
                    return True
        return False

    def critical_orbit_steps(self) -> list:
        """For each critical point, steps until its orbit enters a cycle."""
        out = []
        for cz, cw, _ in self.critical_points():
            pts = [(cz, cw)]
            z, w = np.array([cz]), np.array([cw])
            for step in range(1, 200):
                z, w = self.apply(z, w)
                hit = [i for i, (a, b) in enumerate(pts) if chordal(a, b, z[0], w[0]) < ROOT_TOL]
                if hit:
                    out.append(hit[0])
                    break
                pts.append((complex(z[0]), complex(w[0])))
        return out

    # -- curve ---------------------------------------------------------------------------

    def ordered_post(self):
        """Post points sorted by curve parameter, with their parameters."""
        if self.curve is None:
            raise CurveNotInvariant("no invariant curve configured")
        post = self.postcritical()
        if len(post) < 3:
            raise ValueError("need at least three postcritical points")
        pz = np.array([p[0] for p in post])
        pw = np.array([p[1] for p in post])
        if self.curve.distance(pz, pw).max() > 1e-9:
            raise CurveNotInvariant("curve not invariant: post set leaves the curve")
        th = self.curve.theta(pz, pw)
        order = np.argsort(th)
        return [(complex(pz[i]), complex(pw[i])) for i in order], th[order]

    def check_curve_invariant(self, samples: int = 257) -> float:
        """Largest chordal distance from the curve of ``f`` on curve samples."""
        th = np.linspace(-np.pi, np.pi, samples)
        z, w = self.curve.point(th)
        fz, fw = self.apply(z, w)
        err = float(self.curve.distance(fz, fw).max())
        if err > 1e-9:
            raise CurveNotInvariant("curve not invariant")
        return err


def _affine_sort_key(p):
    z, w = p[0], p[1]
    if abs(w) < 1e-300:
        return (math.inf, math.inf)
    t = z / w
    return (round(t.real, 12), round(t.imag, 12))


# -- path lifting and template extraction ---------------------------------------------------


def _chart_at(z0, w0):
    """Unitary Moebius chart sending (z0 : w0) to 0."""
    n = math.sqrt(abs(z0) ** 2 + abs(w0) ** 2)
    a, b = z0 / n, w0 / n

    def chart(z, w):
        with np.errstate(divide="ignore", invalid="ignore"):
            return (b * z - a * w) / (np.conj(a) * z + np.conj(b) * w)

    return chart


@dataclass
class LiftedEdge:
    start: int
    end: int
    label: int
    zeta: np.ndarray  # homogeneous polyline, from start to end
    omega: np.ndarray
    mid: tuple  # lift of the midpoint of the 0-edge


@dataclass
class Geometry:
    """Numerical side of a one-step template for a rational map."""

    post: list
    post_theta: np.ndarray
    vertices: list  # (z, w) of 1-vertices
    edges: list  # LiftedEdge
    tile_polys: list  # homogeneous boundary polylines per 1-tile
    tile_interior: list  # (z, w) interior point per 1-tile
    coarse_polys: list


class TemplateExtractor:
    """Lifts the invariant curve through a rational map and reads off tiles."""

    def __init__(self, f: RationalMap, max_step: float = 0.01):
        self.f = f
        self.max_step = max_step
        self.curve = f.curve
        self.post, self.post_theta = f.ordered_post()
        self.m = len(self.post)

    def _curve_point(self, j: int, t: float):
        """Point at fraction ``t`` of the 0-edge ``E_j``."""
        th0 = self.post_theta[j]
        th1 = self.post_theta[(j + 1) % self.m]
        if j == self.m - 1:
            th1 = th1 + 2 * np.pi
        z, w = self.curve.point(np.array([th0 + t * (th1 - th0)]))
        return z[0], w[0]

    def _lift(self, x0, j: int, t0: float, t1: float, targets):
        """Continue a lift of ``E_j`` from parameter t0 to t1 starting at x0.

        ``targets`` are the preimages of the end post point; the path is
        snapped to the one it approaches.
        """
        f = self.f
        xs = [x0]
        t = t0
        span = t1 - t0
        h = span / 64
        tz = np.array([p[0] for p in targets])
        tw = np.array([p[1] for p in targets])
        ez, ew = self.post[(j + 1) % self.m] if t1 > t0 else self.post[j]
        steps = 0
        while True:
            cz, cw = xs[-1]
            dist_t = chordal(tz, tw, cz, cw)
            k = int(np.argmin(dist_t))
            if dist_t[k] < 1e-5:
                xs.append((tz[k], tw[k]))
                return xs, k
            fz, fw = f.apply(np.array([cz]), np.array([cw]))
            if chordal(fz[0], fw[0], ez, ew) < 1e-8:
                # Close to a critical end point, where roots coalesce.
                second = np.partition(dist_t, 1)[1] if dist_t.size > 1 else np.inf
                if dist_t[k] < 1e-2 and dist_t[k] < 0.1 * second:
                    xs.append((tz[k], tw[k]))
                    return xs, k
            steps += 1
            if steps > 20000 or abs(h) < 1e-15:
                raise RootSolveError("root solve failed: path lifting stalled")
            tn = t + h
            if (tn - t1) * np.sign(span) > 0:
                tn = t1
            yz, yw = self._curve_point(j, tn)
            rz, rw = f.preimage_roots(np.array([yz]), np.array([yw]))
            dd = chordal(rz[0], rw[0], cz, cw)
            order = np.argsort(dd)
            near, second = dd[order[0]], dd[order[1]] if dd.size > 1 else np.inf
            if near < 0.25 * second and near < self.max_step:
                xs.append((rz[0][order[0]], rw[0][order[0]]))
                t = tn
                h = h * 1.5
                if abs(h) > abs(span) / 16:
                    h = span / 16
                if t == t1:
                    # Reached the end parameter numerically; snap.
                    dist_t = chordal(tz, tw, xs[-1][0], xs[-1][1])
                    k = int(np.argmin(dist_t))
                    if dist_t[k] > 1e-3:
                        raise RootSolveError("root solve failed: lift missed its endpoint")
                    xs.append((tz[k], tw[k]))
                    return xs, k
            else:
                h = h / 2

    def extract(self):
        """Build the template and its geometry.

        Returns
        -------
        (Template, Geometry)
        """
        f, m, curve = self.f, self.m, self.curve
        f.check_curve_invariant()
        # 1-vertices: preimages of the post points.
        verts, vlabel, vdeg = [], [], []
        over = [[] for _ in range(m)]
        for j, (pz, pw) in enumerate(self.post):
            for xz, xw, deg in f.preimages(pz, pw):
                over[j].append(len(verts))
                verts.append((xz, xw))
                vlabel.append(j)
                vdeg.append(deg)
        vz = np.array([v[0] for v in verts])
        vw = np.array([v[1] for v in verts])
        # 1-edges: lift each 0-edge from its midpoint in both directions.
        edges = []
        for j in range(m):
            mz, mw = self._curve_point(j, 0.5)
            rz, rw = f.preimage_roots(np.array([mz]), np.array([mw]))
            if np.min(chordal(rz[0][:, None], rw[0][:, None], rz[0][None, :], rw[0][None, :]) + np.eye(f.d)) < 1e-6:
                raise RootSolveError("root solve failed: 0-edge midpoint is a critical value")
            start_t = [verts[v] for v in over[j]]
            end_t = [verts[v] for v in over[(j + 1) % m]]
            for k in range(f.d):
                x0 = (rz[0][k], rw[0][k])
                fwd, ke = self._lift(x0, j, 0.5, 1.0, end_t)
                bwd, ks = self._lift(x0, j, 0.5, 0.0, start_t)
                path = bwd[::-1] + fwd[1:]
                zeta = np.array([p[0] for p in path])
                omega = np.array([p[1] for p in path])
                edges.append(LiftedEdge(over[j][ks], over[(j + 1) % m][ke], j, zeta, omega, x0))
        if len(edges) != m * f.d:
            raise RootSolveError("wrong number of lifted edges")
        # Placement of vertices and edges over level 0.
        def place_point(z, w):
            if curve.distance(np.array([z]), np.array([w]))[0] < 1e-9:
                for j, (pz, pw) in enumerate(self.post):
                    if chordal(z, w, pz, pw) < 1e-9:
                        return ("v", j)
                return ("e", self._edge_of_theta(curve.theta(np.array([z]), np.array([w]))[0]))
            side = curve.height(np.array([z]), np.array([w]))[0]
            return ("t", WHITE if side > 0 else BLACK)

        vplace = [place_point(z, w) for z, w in verts]
        eplace = []
        for e in edges:
            inner = slice(1, -1) if e.zeta.size > 2 else slice(None)
            dist = curve.distance(e.zeta[inner], e.omega[inner])
            if dist.max() < 1e-7:
                th_mid = curve.theta(np.array([e.mid[0]]), np.array([e.mid[1]]))[0]
                eplace.append(("e", self._edge_of_theta(th_mid)))
            else:
                mid = len(e.zeta) // 2
                side = curve.height(e.zeta[mid : mid + 1], e.omega[mid : mid + 1])[0]
                eplace.append(("t", WHITE if side > 0 else BLACK))
        tiles, polys = self._trace_tiles(verts, edges, m)
        parents = self._parents(tiles, edges, eplace, verts)
        ttiles = []
        for (color, es), parent in zip(tiles, parents):
            corners = tuple(edges[e].start for e in es)
            ttiles.append(TTile(color, parent, corners, tuple(es)))
        tmpl = assemble_template(
            m,
            [("e", p[1]) if p[0] == "e" else p for p in vplace],
            vlabel,
            [(e.start, e.end) for e in edges],
            eplace,
            ttiles,
        )
        for v, deg in enumerate(vdeg):
            if tmpl.vertices[v].degree != deg:
                raise RootSolveError("tile count at a vertex disagrees with its local degree")
        interior = self._tile_interiors(tmpl, edges)
        coarse = [_simplify(pz, pw, 2e-3) for pz, pw in polys]
        geo = Geometry(self.post, self.post_theta, verts, edges, polys, interior, coarse)
        return tmpl, geo

    def _edge_of_theta(self, th: float) -> int:
        th0 = self.post_theta
        for j in range(self.m - 1):
            if th0[j] < th < th0[j + 1]:
                return j
        return self.m - 1

    def _trace_tiles(self, verts, edges, m):
        # Direction of every edge end in a local chart at its vertex.
        vz = np.array([v[0] for v in verts])
        vw = np.array([v[1] for v in verts])
        sep = chordal(vz[:, None], vw[:, None], vz[None, :], vw[None, :]) + 10 * np.eye(len(verts))
        radius = min(1e-2, 0.1 * sep.min())
        ends = {v: [] for v in range(len(verts))}
        for e, edge in enumerate(edges):
            for which, (v, zs, ws) in enumerate(
                ((edge.start, edge.zeta, edge.omega), (edge.end, edge.zeta[::-1], edge.omega[::-1]))
            ):
                chart = _chart_at(*verts[v])
                c = chart(zs, ws)
                r = np.abs(c)
                idx = int(np.argmax(r >= radius)) if np.any(r >= radius) else len(c) - 1
                if idx > 0 and r[idx] > radius:
                    lam = (radius - r[idx - 1]) / (r[idx] - r[idx - 1])
                    pt = c[idx - 1] + lam * (c[idx] - c[idx - 1])
                else:
                    pt = c[idx]
                ends[v].append((float(np.angle(pt)), e, which))
        tiles = {}
        for e0 in range(len(edges)):
            for color in (WHITE, BLACK):
                seq = [e0]
                cur = e0
                for _ in range(m - 1):
                    v = edges[cur].end
                    back = [a for a, e, wh in ends[v] if e == cur and wh == 1][0]
                    cands = [(a, e, wh) for a, e, wh in ends[v] if not (e == cur and wh == 1)]
                    if color == WHITE:
                        key = lambda c: (back - c[0]) % (2 * np.pi)
                    else:
                        key = lambda c: (c[0] - back) % (2 * np.pi)
                    a, e, wh = min(cands, key=key)
                    want = (edges[cur].label + 1) % m
                    if wh != 0 or edges[e].label != want:
                        raise RootSolveError("tile tracing found an inconsistent rotation system")
                    seq.append(e)
                    cur = e
                if edges[cur].end != edges[e0].start:
                    raise RootSolveError("tile tracing did not close up")
                by_label = [None] * m
                for e in seq:
                    by_label[edges[e].label] = e
                tiles[(color, tuple(by_label))] = True
        tile_list = sorted(tiles, key=lambda t: (t[0], t[1]))
        polys = []
        for color, es in tile_list:
            zs = np.concatenate([edges[e].zeta[:-1] for e in es])
            ws = np.concatenate([edges[e].omega[:-1] for e in es])
            polys.append((zs, ws))
        return tile_list, polys

    def _parents(self, tiles, edges, eplace, verts):
        # Tiles along the curve: orientation of their edge decides the side.
        parent = [None] * len(tiles)
        for t, (color, es) in enumerate(tiles):
            for e in es:
                if eplace[e][0] != "e":
                    continue
                j = eplace[e][1]
                ts = self.curve.theta(np.array([verts[edges[e].start][0], verts[edges[e].end][0]]),
                                      np.array([verts[edges[e].start][1], verts[edges[e].end][1]]))
                mid = self.curve.theta(np.array([edges[e].mid[0]]), np.array([edges[e].mid[1]]))[0]
                forward = _theta_forward(ts[0], mid, ts[1], self.post_theta, j, self.m)
                parent[t] = WHITE if (color == WHITE) == forward else BLACK
                break
        owners = {}
        for t, (_, es) in enumerate(tiles):
            for e in es:
                owners.setdefault(e, []).append(t)
        changed = True
        while changed:
            changed = False
            for e, ts in owners.items():
                if eplace[e][0] != "t":
                    continue
                a, b = ts
                if parent[a] is None and parent[b] is not None:
                    parent[a] = parent[b]
                    changed = True
                elif parent[b] is None and parent[a] is not None:
                    parent[b] = parent[a]
                    changed = True
        if any(p is None for p in parent):
            raise RootSolveError("could not place every 1-tile in a 0-tile")
        return parent

    def _tile_interiors(self, tmpl, edges):
        """Interior point of each 1-tile: lift a path from the middle of its
        label-0 edge's image toward the center of its image 0-tile."""
        f, curve = self.f, self.curve
        out = []
        for tile in tmpl.tiles:
            e = edges[tile.edges[0]]
            y0 = self._curve_point(0, 0.5)
            c = curve.center(tile.color)
            a = to_xyz(np.array([y0[0]]), np.array([y0[1]]))[0]
            b = to_xyz(c[0], c[1]).reshape(3)
            cur = e.mid
            steps = 64
            for s in range(1, steps + 1):
                u = (1 - s / steps) * a + (s / steps) * b
                yz, yw = from_xyz(u)
                rz, rw = f.preimage_roots(np.atleast_1d(yz), np.atleast_1d(yw))
                dd = chordal(rz[0], rw[0], cur[0], cur[1])
                k = int(np.argmin(dd))
                cur = (rz[0][k], rw[0][k])
            out.append(cur)
        return out


def _theta_forward(th_a, th_mid, th_b, post_theta, j, m):
    """Whether a sub-arc of E_j runs in the direction of increasing parameter."""
    base = post_theta[j]

    def unwrap(th):
        return (th - base) % (2 * np.pi)

    return unwrap(th_a) < unwrap(th_mid) < unwrap(th_b) or (
        unwrap(th_a) < unwrap(th_b) and not unwrap(th_b) < unwrap(th_mid) < unwrap(th_a)
    ) and unwrap(th_a) <= unwrap(th_mid)


def _simplify(zs, ws, tol):
    """Douglas-Peucker on unit-sphere coordinates of a closed polyline."""
    pts = to_xyz(zs, ws)
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = True
    stack = [(0, n - 1)]
    keep[n - 1] = True
    while stack:
        i, j = stack.pop()
        if j <= i + 1:
            continue
        a, b = pts[i], pts[j]
        seg = b - a
        ll = seg @ seg
        rel = pts[i + 1 : j] - a
        if ll > 0:
            tt = np.clip(rel @ seg / ll, 0, 1)
            dist = np.linalg.norm(rel - tt[:, None] * seg, axis=1)
        else:
            dist = np.linalg.norm(rel, axis=1)
        k = int(np.argmax(dist))
        if dist[k] > tol:
            keep[i + 1 + k] = True
            stack.append((i, i + 1 + k))
            stack.append((i + 1 + k, j))
    return zs[keep], ws[keep]


# -- inverse branches -------------------------------------------------------------------------


class InverseBranches:
    """Inverse branches ``h_T`` of the map onto each 1-tile, and their compositions.

    ``h_T`` sends the closed 0-tile of color ``color(T)`` onto ``T``.  The
    right preimage is picked by testing candidates against the tile's
    boundary polygon in the chart ``1/(x - b)``, where ``b`` is an interior
    point of another tile, so that ``T`` is bounded there.
    """

    def __init__(self, f: RationalMap, tmpl, geo: Geometry):
        self.f = f
        self.t = tmpl
        self.geo = geo
        ntile = len(tmpl.tiles)
        self._charts = []
        for t in range(ntile):
            other = (t + 1) % ntile
            bz, bw = geo.tile_interior[other]
            self._charts.append((bz, bw))
        self._poly_fine = [self._to_chart(t, *geo.tile_polys[t]) for t in range(ntile)]
        self._poly_coarse = [self._to_chart(t, *geo.coarse_polys[t]) for t in range(ntile)]

    def _to_chart(self, t, z, w):
        bz, bw = self._charts[t]
        # 1/(x - b) in homogeneous form: w*bw / (z*bw - bz*w).
        num = w * bw
        den = z * bw - bz * w
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(np.abs(den) > 1e-300, num / den, np.inf + 0j)

    def score(self, t: int, z, w):
        """Signed chart distance to the boundary of tile ``t`` (negative inside)."""
        pts = self._to_chart(t, np.asarray(z), np.asarray(w))
        flat = pts.ravel()
        inside, dist = kernels.polygon_test(self._poly_coarse[t], flat)
        sc = np.where(inside, -dist, dist)
        # Refine near the boundary with the fine polygon.
        near = np.abs(sc) < 5e-2 * (1 + np.abs(flat))
        if np.any(near):
            fi, fd = kernels.polygon_test(self._poly_fine[t], flat[near])
            sc[near] = np.where(fi, -fd, fd)
        return sc.reshape(pts.shape)

    def h(self, t: int, z, w):
        """Apply ``h_T`` to arrays of points in the 0-tile of color(T)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        rz, rw = self.f.preimage_roots(z, w)
        sc = self.score(t, rz, rw)
        k = np.argmin(sc, axis=1)
        idx = np.arange(z.size)
        return rz[idx, k], rw[idx, k]

    def g(self, words, z, w):
        """Apply ``g_W = h_{T_0} o ... o h_{T_{n-1}}`` row-wise.

        Parameters
        ----------
        words : sequence of tuple
            Tile words, all of the same level.
        z, w : (N,) arrays
            Points in the 0-tile of each word's color.
        """
        z = np.array(z, dtype=complex, copy=True)
        w = np.array(w, dtype=complex, copy=True)
        if len(words) == 0:
            return z, w
        n = len(words[0]) - 1
        arr = np.array([wd[1:] for wd in words], dtype=np.int64).reshape(len(words), n)
        for j in range(n - 1, -1, -1):
            col = arr[:, j]
            for t in np.unique(col):
                rows = np.nonzero(col == t)[0]
                z[rows], w[rows] = self.h(int(t), z[rows], w[rows])
        return z, w

    def locate(self, z, w, n: int):
        """Tile words at level ``n`` containing each point (lowest id on ties).

        Raises
        ------
        UnlocatablePoint
            If some iterate is not inside any candidate tile within tolerance.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        npts = z.size
        tmpl = self.t
        ntile = len(tmpl.tiles)
        scores = []
        cz, cw = z, w
        for _ in range(n):
            scores.append(np.stack([self.score(t, cz, cw) for t in range(ntile)], axis=1))
            cz, cw = self.f.apply(cz, cw)
        words = []
        tol = 1e-7
        children = {c: tmpl.children(c) for c in (WHITE, BLACK)}
        for i in range(npts):
            if n == 0:
                side = self.f.curve.height(z[i : i + 1], w[i : i + 1])[0]
                words.append((WHITE if side >= 0 else BLACK,))
                continue
            s0 = scores[0][i]
            inside = [t for t in range(ntile) if s0[t] <= tol]
            if not inside:
                raise UnlocatablePoint("unlocatable point")
            t0 = min(inside)
            word = [tmpl.tiles[t0].parent0, t0]
            for j in range(1, n):
                sj = scores[j][i]
                cand = [t for t in children[tmpl.tiles[word[-1]].color] if sj[t] <= tol]
                if not cand:
                    cand = sorted(children[tmpl.tiles[word[-1]].color], key=lambda t: sj[t])[:1]
                    if sj[cand[0]] > 1e-4:
                        raise UnlocatablePoint("unlocatable point")
                word.append(min(cand))
            words.append(tuple(word))
        return words
