import numpy as np
import pytest
from hypothesis import given, strategies as st

from thurston.cell_complex import (
    BudgetExceeded,
    Engine,
    HypothesesViolated,
    power_template,
    build_level,
    disjoint_deep_flowers,
    flower,
    local_refine,
    separation_level,
    tile_diameters,
    tile_in_flower,
    tiles_csv,
    vertices_csv,
    visual_distance,
)
from thurston.sphere import SpherePoint, chordal


@pytest.mark.parametrize("n", range(0, 7))
def test_level_counts(backend, n):
    lev = build_level(backend, n, embed=False)
    assert lev.n_tiles == 2 * 2**n
    assert lev.n_edges == 3 * 2**n
    assert all(len(set(vs)) == 3 for vs in lev.tile_vertices)
    assert lev.euler_characteristic() == 2


def test_rule_level_counts(rule):
    for n in range(4):
        lev = build_level(rule, n)
        assert all(lev.check_invariants(6).values())


def _random_word(engine, rng, n):
    return engine.tiles_at(n)[rng.integers(engine.tile_count(n))]


@given(st.integers(0, 10_000), st.integers(1, 6))
def test_vertex_preimages_invert_image(engine, seed, n):
    rng = np.random.default_rng(seed)
    word = _random_word(engine, rng, n)
    i = int(rng.integers(3))
    img = engine.vertex_image(word, i)
    keys = {engine.vkey(*p) for p in engine.vertex_preimages(*img)}
    assert engine.vkey(word, i) in keys


@given(st.integers(0, 10_000), st.integers(1, 5))
def test_local_degrees_over_a_fiber_sum_to_degree(engine, seed, n):
    rng = np.random.default_rng(seed)
    word = _random_word(engine, rng, n)
    reps = engine.vertex_preimages(word, 0)
    total = 0
    for w, i in reps:
        k = engine.vkey(w, i)
        lvl = n + 1
        total += engine.map_degree_at(k, lvl) // engine.map_degree_at(engine.vkey(word, 0), n)
    assert total == 2


@pytest.mark.parametrize("n", [2, 3, 4])
def test_vertex_positions_follow_the_map(backend, engine, n):
    """Forward images of embedded n-vertices land on the matching (n-1)-vertices."""
    lev = build_level(backend, n)
    low = build_level(backend, n - 1)
    z, w = backend.f.apply(lev.positions[:, 0], lev.positions[:, 1])
    for v, (word, i) in enumerate(lev.vertex_reps):
        key = engine.vkey(*engine.vertex_image(word, i))
        u = low.vertex_index[key]
        assert chordal(z[v], w[v], *low.positions[u]) < 1e-8


def test_flower_tile_count_is_twice_local_degree(backend, engine):
    lev = build_level(backend, 4, embed=False)
    for v in range(lev.n_vertices):
        assert flower(lev, v).closure_tile_count == 2 * lev.vertex_degree[v]


def test_tile_in_flower_needs_the_lemma_hypotheses(engine):
    with pytest.raises(HypothesesViolated, match="hypotheses violated"):
        tile_in_flower(engine, engine.tiles_at(4)[0], 2)


def test_tile_in_flower_returns_a_corner_of_the_ancestor(engine):
    big = Engine(power_template(engine, 3))
    rng = np.random.default_rng(7)
    for _ in range(20):
        word = _random_word(big, rng, 4)
        v = tile_in_flower(big, word, 2)
        assert v in big.corners(word[:3])


def test_deep_flowers_of_distinct_post_points_disjoint(engine):
    assert disjoint_deep_flowers(engine, ("P", 0), ("P", 1), 3)
    with pytest.raises(ValueError):
        disjoint_deep_flowers(engine, ("P", 0), ("P", 0), 3)


def test_max_tile_diameter_decreases(backend):
    d = {n: tile_diameters(backend, n).max() for n in range(3, 10)}
    assert all(d[n + 1] < d[n] for n in range(3, 9))
    # Two levels always contract by a fixed factor once past the first few.
    assert all(d[n] < 0.7 * d[n - 2] for n in range(6, 10))


def test_visual_distance_symmetric_and_bounded(backend):
    rng = np.random.default_rng(2)
    for _ in range(10):
        x = SpherePoint.from_complex(complex(*rng.standard_normal(2)))
        y = SpherePoint.from_complex(complex(*rng.standard_normal(2)))
        a = visual_distance(backend, x, y, 8, 1.3)
        assert a == visual_distance(backend, y, x, 8, 1.3)
        assert 1.3**-8 <= a <= 1.0


def test_separation_level_of_a_tile_with_itself(engine):
    w = engine.tiles_at(4)[5]
    assert separation_level(engine, w, w) == 4


def test_budget_from_environment(backend, monkeypatch):
    monkeypatch.setenv("THURSTON_BUDGET_CELLS", "10")
    with pytest.raises(BudgetExceeded, match="cell budget exceeded"):
        build_level(backend, 4)
    with pytest.raises(BudgetExceeded):
        local_refine(backend.engine, backend.engine.tiles_at(1), 4)


def test_local_refine_counts(engine):
    part = local_refine(engine, [engine.tiles_at(2)[0]], 3)
    assert part.level == 5 and len(part.words) == 8


def test_csv_exports(backend):
    lev = build_level(backend, 3)
    rows = tiles_csv(lev).strip().splitlines()
    assert rows[0] == "id,color,edge_cycle,vertex_cycle" and len(rows) == 17
    vrows = vertices_csv(lev).strip().splitlines()
    assert len(vrows) == lev.n_vertices + 1
