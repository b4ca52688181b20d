"""Thermodynamic formalism for rational backends.

Pressure is estimated three ways (iterated preimages, periodic points and a
brute-force separated-set oracle), the Ruelle operator is applied through the
batched preimage forest, and periodic points are found by iterating inverse
branches of ``f^n`` on tiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .rational import ContractionFailed
from .sphere import SpherePoint, chordal, fibonacci_sphere, from_xyz, random_sphere, to_xyz
from .sphere_map import (
    EmpiricalMeasure,
    WeightScheme,
    birkhoff_sums,
    preimage_levels,
)
from .template import WHITE

__all__ = [
    "PressureSeries",
    "FixedPointSet",
    "NormalizedPotential",
    "UnitWeightsUnsupported",
    "NormalizationError",
    "ruelle_apply",
    "pressure_preimage",
    "fixed_points",
    "pressure_periodic",
    "pressure_separated_oracle",
    "separated_growth",
    "normalized_potential",
    "equilibrium_approximants",
    "distortion_report",
    "extrapolate",
    "log_sum_exp",
    "consensus_pressure",
]


class UnitWeightsUnsupported(ValueError):
    pass


class NormalizationError(RuntimeError):
    pass


def log_sum_exp(logs) -> float:
    """``log(sum(exp(logs)))`` with compensated summation."""
    logs = np.asarray(logs, dtype=float)
    if logs.size == 0:
        return -math.inf
    top = float(np.max(logs))
    if not math.isfinite(top):
        return top
    return top + math.log(math.fsum(np.exp(logs - top)))


def extrapolate(ns, values):
    """Least-squares fit of ``value(n) = P + a / n`` over the top half of entries.

    Returns
    -------
    (P, a)
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    k = len(ns)
    if k == 0:
        raise ValueError("no entries to extrapolate")
    top = slice(k // 2, k) if k >= 4 else slice(0, k)
    x, y = ns[top], values[top]
    if x.size == 1:
        return float(y[0]), 0.0
    A = np.stack([np.ones_like(x), 1.0 / x], axis=1)
    (p, a), *_ = np.linalg.lstsq(A, y, rcond=None)
    return float(p), float(a)


@dataclass
class PressureSeries:
    """Entries ``(n, log_sum, value = log_sum / n)`` of one estimator.

    Attributes
    ----------
    kind : str
        ``preimage_deg``, ``preimage_weighted`` (unit or custom weights),
        ``periodic`` or ``separated_oracle``.
    """

    kind: str
    entries: list = field(default_factory=list)

    def add(self, n: int, log_sum: float):
        if self.entries and n <= self.entries[-1][0]:
            raise ValueError("entries must increase in n")
        if not math.isfinite(log_sum):
            raise ValueError("pressure entry is not finite")
        self.entries.append((n, log_sum, log_sum / n))

    @property
    def ns(self):
        return [e[0] for e in self.entries]

    @property
    def values(self):
        return [e[2] for e in self.entries]

    @property
    def tail(self) -> float:
        return self.entries[-1][2]

    @property
    def fit(self):
        return extrapolate(self.ns, self.values)

    @property
    def limit(self) -> float:
        return self.fit[0]

    @property
    def slope(self) -> float:
        return self.fit[1]


def _base_point(base, n: int) -> SpherePoint:
    if base is None:
        return SpherePoint.from_complex(0.123 + 0.456j)
    if isinstance(base, SpherePoint):
        return base
    if callable(base):
        return base(n)
    return base[n - 1]


def _forest_sums(backend, phi, z, w, depth, shift=0.0):
    """Per level ``k``: ``deg_{f^k}`` and ``S_k phi`` (minus ``k * shift``) at each
    node, plus its root index."""
    levels = preimage_levels(backend, z, w, depth)
    out = []
    deg = levels[0].deg.astype(float)
    roots = np.arange(levels[0].z.size)
    s = np.zeros(levels[0].z.size)
    out.append((levels[0], deg, s, roots))
    for lev in levels[1:]:
        deg = deg[lev.parent] * lev.deg
        s = s[lev.parent] + phi(lev.z, lev.w) - shift
        roots = roots[lev.parent]
        out.append((lev, deg, s, roots))
    return out


def ruelle_apply(backend, phi, u, x: SpherePoint) -> float:
    """``(L_phi u)(x) = sum over f(y) = x of deg_f(y) u(y) exp(phi(y))``.

    Parameters
    ----------
    u : callable
        Function of homogeneous arrays.
    """
    lev = preimage_levels(backend, x.z, x.w, 1)[1]
    vals = lev.deg * np.asarray(u(lev.z, lev.w), dtype=float) * np.exp(phi(lev.z, lev.w))
    return math.fsum(vals)


def pressure_preimage(backend, phi, weights: WeightScheme, base=None, n_max: int = 12, n_min: int = 1):
    """``(1/n) log sum_{y in f^{-n}(x_n)} w_n(y) exp(S_n phi(y))`` for each n.

    Parameters
    ----------
    base : SpherePoint, sequence or callable, optional
        Base points ``x_n``; a single point means a constant sequence.

    Raises
    ------
    UnitWeightsUnsupported
        For unit weights on a map with a periodic critical point.
    """
    if weights.kind == "unit" and backend.has_periodic_critical_point():
        raise UnitWeightsUnsupported("unit weights unsupported")
    kind = "preimage_deg" if weights.kind == "localDegree" else "preimage_weighted"
    series = PressureSeries(kind)
    constant = base is None or isinstance(base, SpherePoint)
    if constant:
        x = _base_point(base, 1)
        forest = _forest_sums(backend, phi, x.z, x.w, n_max)
    for n in range(n_min, n_max + 1):
        if constant:
            _, deg, s, _ = forest[n]
        else:
            x = _base_point(base, n)
            _, deg, s, _ = _forest_sums(backend, phi, x.z, x.w, n)[n]
        logs = np.log(weights(deg)) + s
        series.add(n, log_sum_exp(logs))
    return series


# -- periodic points ------------------------------------------------------------------------


@dataclass
class FixedPointSet:
    """Fixed points of ``f^n``.

    Attributes
    ----------
    z, w : ndarray
        Homogeneous coordinates, sorted by affine ``(Re, Im)``, infinity last.
    deg : ndarray of int
        ``deg_{f^n}`` at each point.
    pair : ndarray of int
        Id of the tile pair holding the point: the breadth-first id of the
        white n-tile sharing its label-0 edge with the tile the point was
        found in.
    residual : float
        Largest ``q(f^n(x), x)``.
    """

    n: int
    z: np.ndarray
    w: np.ndarray
    deg: np.ndarray
    pair: np.ndarray
    residual: float

    @property
    def weighted_count(self) -> int:
        return int(self.deg.sum())

    def __len__(self):
        return self.z.size

    def points(self):
        return [SpherePoint(a, b) for a, b in zip(self.z, self.w)]


def _iterate_branches(branches, words, z, w, max_steps):
    """Iterate ``g_W`` on each row until it stops moving."""
    z = z.copy()
    w = w.copy()
    active = np.arange(len(words))
    prev_step = np.full(len(words), np.inf)
    for _ in range(max_steps):
        if active.size == 0:
            return z, w
        sub = [words[i] for i in active]
        nz, nw = branches.g(sub, z[active], w[active])
        step = chordal(nz, nw, z[active], w[active])
        z[active], w[active] = nz, nw
        done = (step < 1e-14) | ((step >= prev_step[active]) & (step < 1e-11))
        prev_step[active] = step
        active = active[~done]
    if active.size:
        raise ContractionFailed("contraction failed")
    return z, w


def fixed_points(backend, n: int, max_steps: int = 200) -> FixedPointSet:
    """All fixed points of ``f^n`` via inverse branches on tiles.

    Every fixed point lies in a closed n-tile ``W`` with ``f^n(W)`` equal to
    the 0-tile containing ``W``, or on a curve edge of an n-tile that ``f^n``
    maps onto the same 0-edge, or at a post point.  In each case the inverse
    branch ``g_W`` of ``f^n`` restricted to that set is a contraction, and
    iterating it from the 0-tile center (or the 0-edge midpoint) converges to
    the unique fixed point there.

    Raises
    ------
    ContractionFailed
        If some iteration has not converged after ``max_steps`` steps.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    eng = backend.engine
    f = backend.f
    words = eng.tiles_at(n)
    geo = backend.geometry
    curve = f.curve
    cand_words, cz, cw = [], [], []
    centers = {c: curve.center(c) for c in (0, 1)}
    for wd in words:
        col = eng.color(wd)
        if wd[0] == col:
            cand_words.append(wd)
            cz.append(np.ravel(centers[col][0])[0])
            cw.append(np.ravel(centers[col][1])[0])
    mids = []
    th = geo.post_theta
    for j in range(eng.m):
        t1 = th[(j + 1) % eng.m] + (2 * np.pi if j == eng.m - 1 else 0.0)
        mz, mw = curve.point(np.array([(th[j] + t1) / 2]))
        mids.append((mz[0], mw[0]))
    for wd in words:
        for i in range(eng.m):
            if eng.carrier0_edge(wd, i) == ("E", i):
                cand_words.append(wd)
                cz.append(mids[i][0])
                cw.append(mids[i][1])
    z, w = _iterate_branches(backend.branches, cand_words, np.array(cz), np.array(cw), max_steps)
    # Fixed post points.
    img = eng.t.image_of_post()
    post_z, post_w, post_words = [], [], []
    for j in range(eng.m):
        k = j
        for _ in range(n):
            k = img[k]
        if k == j:
            pz, pw = geo.post[j]
            post_z.append(pz)
            post_w.append(pw)
            post_words.append(eng.star(("P", j), n)[0])
    z = np.concatenate([z, np.array(post_z, dtype=complex)])
    w = np.concatenate([w, np.array(post_w, dtype=complex)])
    cand_words = cand_words + post_words
    # Deduplicate: keep the lowest tile id among coincident candidates.
    ids = np.array([eng.tile_id(wd) for wd in cand_words])
    order = np.argsort(ids, kind="stable")
    xyz = to_xyz(z, w)
    tree = cKDTree(xyz)
    pairs = tree.query_pairs(2e-8, output_type="ndarray")
    rep = np.arange(z.size)
    rank = np.empty(z.size, dtype=np.int64)
    rank[order] = np.arange(z.size)
    for a, b in sorted(map(tuple, pairs)):
        ra, rb = _find(rep, a), _find(rep, b)
        if ra != rb:
            lo, hi = (ra, rb) if rank[ra] < rank[rb] else (rb, ra)
            rep[hi] = lo
    roots = sorted({_find(rep, i) for i in range(z.size)})
    z, w = z[roots], w[roots]
    found_in = [cand_words[i] for i in roots]
    # Degrees along the orbit, residuals, pairing.
    deg = np.ones(len(roots), dtype=np.int64)
    oz, ow = z, w
    for _ in range(n):
        deg = deg * backend.local_degree_arrays(oz, ow)
        oz, ow = f.apply(oz, ow)
    residual = float(chordal(oz, ow, z, w).max(initial=0.0))
    pair = np.array([_pair_id(eng, wd) for wd in found_in], dtype=np.int64)
    key = _sort_keys(z, w)
    srt = np.lexsort((key[1], key[0]))
    return FixedPointSet(n, z[srt], w[srt], deg[srt], pair[srt], residual)


def _find(rep, i):
    while rep[i] != i:
        rep[i] = rep[rep[i]]
        i = rep[i]
    return i


def _pair_id(eng, word) -> int:
    if eng.color(word) == WHITE:
        return eng.tile_id(word)
    n = len(word) - 1
    for other in eng.star(eng.ekey(word, 0), n):
        if other != word:
            return eng.tile_id(other)
    raise RuntimeError("label-0 edge has a single tile")


def _sort_keys(z, w):
    inf = np.abs(w) < 1e-300
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(inf, 0.0, z / np.where(inf, 1.0, w))
    re = np.where(inf, np.inf, np.round(t.real, 12))
    im = np.where(inf, np.inf, np.round(t.imag, 12))
    return re, im


_FIXED_CACHE: dict = {}


def cached_fixed_points(backend, n: int) -> FixedPointSet:
    key = (id(backend), n)
    if key not in _FIXED_CACHE:
        _FIXED_CACHE[key] = fixed_points(backend, n)
    return _FIXED_CACHE[key]


def pressure_periodic(backend, phi, weights: WeightScheme, n_max: int = 12, n_min: int = 1):
    """``(1/n) log sum_{f^n(x) = x} w_n(x) exp(S_n phi(x))`` for each n."""
    series = PressureSeries("periodic")
    for n in range(n_min, n_max + 1):
        fp = cached_fixed_points(backend, n)
        s = birkhoff_sums(backend, phi, fp.z, fp.w, n)
        series.add(n, log_sum_exp(np.log(weights(fp.deg)) + s))
    return series


# -- separated-set oracle -------------------------------------------------------------------


def pressure_separated_oracle(backend, phi, eps: float, n: int, grid: int = 60000) -> float:
    """``(1/n) log`` of the weighted sum over a greedy maximal (n, eps)-separated set.

    The candidates are a Fibonacci grid of ``grid`` points; the set is
    separated in the metric ``max_{i<n} q(f^i x, f^i y)`` and maximal among
    grid points.
    """
    return math.log(_separated_sum(backend, phi, eps, n, grid)[0]) / n


def _separated_sum(backend, phi, eps, n, grid):
    if not 1 <= n <= 6:
        raise ValueError("the separated oracle supports 1 <= n <= 6")
    z, w = fibonacci_sphere(grid)
    coords = backend.f.orbit_xyz(z, w, n)
    chosen = np.asarray(kernels.greedy_separated(coords, eps), dtype=np.int64)
    s = birkhoff_sums(backend, phi, z[chosen], w[chosen], n)
    return math.fsum(np.exp(s)), chosen


def separated_growth(backend, phi, eps: float, n: int, grid: int = 60000) -> float:
    """``log Z_n - log Z_{n-1}`` for the separated-set sums: an eps-free rate."""
    a = _separated_sum(backend, phi, eps, n, grid)[0]
    b = _separated_sum(backend, phi, eps, n - 1, grid)[0]
    return math.log(a) - math.log(b)


def check_separated(backend, chosen_coords, eps) -> bool:
    """Whether all pairs are at dynamical distance at least eps (brute force)."""
    c = chosen_coords
    d = 0.5 * np.linalg.norm(c[:, None, :, :] - c[None, :, :, :], axis=-1).max(axis=-1)
    np.fill_diagonal(d, np.inf)
    return bool(d.min() >= eps)


# -- normalized potential -------------------------------------------------------------------------


class NormalizedPotential:
    """``phi - P + log u - log u(f)`` with ``u`` the Cesaro average of ``L^j 1``.

    Parameters
    ----------
    backend, phi
    pressure : float
        Estimate of ``P(f, phi)``.
    depth : int
        Number of Cesaro terms; ``u = (1/depth) sum_{j<depth} L^j_{phi - P} 1``.
    """

    def __init__(self, backend, phi, pressure: float, depth: int):
        self.backend = backend
        self.phi = phi
        self.pressure = float(pressure)
        self.depth = int(depth)

    def u(self, z, w):
        """Cesaro eigenfunction approximant at each point."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        forest = _forest_sums(self.backend, self.phi, z, w, self.depth - 1, shift=self.pressure)
        acc = np.zeros(z.size)
        for _, deg, s, roots in forest:
            acc += np.bincount(roots, weights=deg * np.exp(s), minlength=z.size)
        return acc / self.depth

    def __call__(self, z, w):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        fz, fw = self.backend.f.apply(z, w)
        both = self.u(np.concatenate([z, fz]), np.concatenate([w, fw]))
        k = z.size
        return self.phi(z, w) - self.pressure + np.log(both[:k]) - np.log(both[k:])

    def ruelle_one(self, z, w):
        """``L_{phi~} 1`` at each point, computed from one preimage forest."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        D = self.depth
        forest = _forest_sums(self.backend, self.phi, z, w, D, shift=self.pressure)
        lev1, deg1, s1, _ = forest[1]
        n1 = lev1.z.size
        # u at level-1 nodes from their subtrees; u at the roots from levels < D.
        u1 = np.zeros(n1)
        u0 = np.zeros(z.size)
        anc = np.arange(n1)
        for k in range(1, D + 1):
            lev, deg, s, roots = forest[k]
            if k > 1:
                anc = anc[lev.parent]
            if k - 1 < D:
                rel = deg / deg1[anc] * np.exp(s - s1[anc])
                u1 += np.bincount(anc, weights=rel, minlength=n1)
        for k in range(D):
            _, deg, s, roots = forest[k]
            u0 += np.bincount(roots, weights=deg * np.exp(s), minlength=z.size)
        u1 /= D
        u0 /= D
        # phi~(y) = phi(y) - P + log u(y) - log u(x); sum deg_f(y) e^{phi~(y)}.
        terms = lev1.deg * np.exp(s1 + np.log(u1) - np.log(u0[lev1.parent]))
        return np.bincount(lev1.parent, weights=terms, minlength=z.size)

    def residual(self, z, w) -> float:
        return float(np.max(np.abs(self.ruelle_one(z, w) - 1.0)))


def residual_points(count: int = 100, seed: int = 0):
    return random_sphere(np.random.default_rng(seed), count)


def normalized_potential(backend, phi, depth: int = 12, pressure: float | None = None,
                         check_points=None, tol: float = 0.05) -> NormalizedPotential:
    """Build the normalized potential and check ``|L 1 - 1| <= tol``.

    Raises
    ------
    NormalizationError
        "normalization residual too large" when the check fails.
    """
    if pressure is None:
        pressure = pressure_preimage(backend, phi, WeightScheme("localDegree"), n_max=12).limit
    pot = NormalizedPotential(backend, phi, pressure, depth)
    z, w = check_points if check_points is not None else residual_points()
    pot.last_residual = pot.residual(z, w)
    if pot.last_residual > tol:
        raise NormalizationError("normalization residual too large")
    return pot


# -- equilibrium approximants -----------------------------------------------------------------------


def orbit_spread(backend, z, w, weight, n):
    """Replace each atom by ``(1/n) sum_{i<n} delta_{f^i}`` of it."""
    zs, ws = [], []
    for _ in range(n):
        zs.append(z)
        ws.append(w)
        z, w = backend.f.apply(z, w)
    zz = np.concatenate(zs)
    ww = np.concatenate(ws)
    return zz, ww, np.tile(np.asarray(weight, dtype=float), n) / n


def preimage_weights(backend, phi, base: SpherePoint, n: int, weights: WeightScheme):
    """Leaves of ``f^{-n}(x)`` with normalized weights ``w_n exp(S_n phi)``."""
    lev, deg, s, _ = _forest_sums(backend, phi, base.z, base.w, n)[n]
    logs = np.log(weights(deg)) + s
    p = np.exp(logs - logs.max())
    return lev.z, lev.w, p / math.fsum(p), deg


def equilibrium_approximants(backend, phi, base: SpherePoint | None, n: int, tilde_depth: int = 6,
                             pressure: float | None = None):
    """The measures ``xi_n``, the orbit-spread ``xi_n``, and ``xi_n`` for the
    normalized potential.

    Returns
    -------
    (EmpiricalMeasure, EmpiricalMeasure, EmpiricalMeasure)
    """
    x = _base_point(base, n)
    z, w, p, deg = preimage_weights(backend, phi, x, n, WeightScheme("localDegree"))
    xi = EmpiricalMeasure.from_weights(z, w, p)
    hz, hw, hp = orbit_spread(backend, z, w, p, n)
    xi_hat = EmpiricalMeasure.from_weights(hz, hw, hp)
    if pressure is None:
        pressure = 0.0  # cancels after normalization
    # S_n phi~(y) = S_n phi(y) - nP + log u(y) - log u(x): weight by u(y).
    pot = NormalizedPotential(backend, phi, pressure, tilde_depth)
    u = pot.u(z, w)
    xi_tilde = EmpiricalMeasure.from_weights(z, w, p * u)
    return xi, xi_hat, xi_tilde


def distortion_report(backend, phi, levels, pairs: int = 200, seed: int = 0):
    """Empirical distortion constants per level.

    ``C1_hat`` is the largest ``|S_m phi(x) - S_m phi(y)| / q(f^m x, f^m y)^alpha``
    over random pairs in common m-tiles; ``C2_hat`` is the largest ratio of
    degree-weighted preimage sums over random base-point pairs.

    Returns
    -------
    list of dict
    """
    rng = np.random.default_rng(seed)
    eng = backend.engine
    out = []
    alpha = getattr(phi, "alpha", 1.0)
    for m in levels:
        words = eng.tiles_at(m)
        pick = [words[i] for i in rng.integers(0, len(words), pairs)]
        cols = [eng.color(wd) for wd in pick]
        az, aw = _points_in_zero_tiles(backend, cols, rng)
        bz, bw = _points_in_zero_tiles(backend, cols, rng)
        xz, xw = backend.branches.g(pick, az, aw)
        yz, yw = backend.branches.g(pick, bz, bw)
        diff = np.abs(birkhoff_sums(backend, phi, xz, xw, m) - birkhoff_sums(backend, phi, yz, yw, m))
        dist = chordal(az, aw, bz, bw)
        c1 = float(np.max(np.where(dist > 1e-12, diff / np.maximum(dist, 1e-12) ** alpha, 0.0)))
        bases = random_sphere(rng, 2 * min(pairs, 20))
        sums = []
        for i in range(bases[0].size):
            _, deg, s, _ = _forest_sums(backend, phi, bases[0][i], bases[1][i], m)[m]
            sums.append(log_sum_exp(np.log(deg) + s))
        sums = np.array(sums).reshape(2, -1)
        c2 = float(np.exp(np.abs(sums[0] - sums[1]).max()))
        out.append({"level": m, "C1_hat": c1, "C2_hat": c2})
    return out


def _points_in_zero_tiles(backend, colors, rng):
    z, w = random_sphere(rng, len(colors))
    h = backend.f.curve.height(z, w)
    want = np.array([1.0 if c == WHITE else -1.0 for c in colors])
    # Reflect across the curve's plane when on the wrong side.
    flip = np.sign(h) != want
    xyz = to_xyz(z, w)
    nrm = np.asarray(backend.f.curve.normal)
    xyz[flip] = xyz[flip] - 2 * (xyz[flip] @ nrm)[:, None] * nrm[None, :]
    return from_xyz(xyz)


def consensus_pressure(backend, phi, n_max: int = 12, base=None) -> dict:
    """Extrapolated limits of the preimage (degree and unit weights) and
    periodic estimators, their mean and largest pairwise gap.

    Unit weights are skipped on maps with a periodic critical point.
    """
    series = [pressure_preimage(backend, phi, WeightScheme("localDegree"), base, n_max)]
    if not backend.has_periodic_critical_point():
        series.append(pressure_preimage(backend, phi, WeightScheme("unit"), base, n_max))
    series.append(pressure_periodic(backend, phi, WeightScheme("localDegree"), n_max))
    limits = {s.kind: s.limit for s in series}
    vals = list(limits.values())
    return {
        "limits": limits,
        "value": math.fsum(vals) / len(vals),
        "max_gap": max(abs(a - b) for a in vals for b in vals),
        "series": series,
    }
