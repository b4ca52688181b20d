import json
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from thurston.cell_complex import BudgetExceeded, Engine, HypothesesViolated, power_template
from thurston.weak_expansion import (
    PeriodicCriticalPoint,
    branching_depth,
    conditional_entropy_upper,
    cover_by_flowers,
    depth_weights,
    e_m_count_bound,
    e_m_set,
    expansion_constants,
    in_closed_flower,
    injectivity_profile,
    preimage_tree,
    prune_dead,
    tree_leaf_bound,
    vertex_image,
    witness_not_asymp_h_expansive,
    witness_not_h_expansive,
)


# -- trees -------------------------------------------------------------------------------


@st.composite
def leveled_trees(draw, c=3, depth=5):
    """Trees whose leaves all sit at one depth, with outdegrees in 1..c."""
    h = draw(st.integers(0, depth))

    def grow(d):
        if d == h:
            return []
        return [grow(d + 1) for _ in range(draw(st.integers(1, c)))]

    return grow(0)


def _leaves(tree):
    return 1 if not tree else sum(_leaves(ch) for ch in tree)


@given(leveled_trees())
def test_leaf_count_respects_bound(tree):
    k = branching_depth(tree)
    bound = tree_leaf_bound(tree, 3, k)
    assert bound == 3**k
    assert _leaves(tree) <= bound


@given(leveled_trees())
def test_depth_slices_carry_unit_weight(tree):
    sums = depth_weights(tree)
    assert all(s == Fraction(1) for s in sums)
    assert all(isinstance(s, Fraction) for s in sums)


def test_depth_weights_by_hand():
    tree = [[[], []], [[]], [[], [], []]]
    # depth 2 collects 2 * (1/3)/2, then 1/3, then 3 * (1/3)/3
    assert depth_weights(tree) == [1, 1, 2 * Fraction(1, 6) + Fraction(1, 3) + 3 * Fraction(1, 9)]


def test_tree_errors_name_the_path():
    with pytest.raises(ValueError, match=r"outdegree 3 exceeds c at path \(1,\)"):
        tree_leaf_bound([[[]], [[], [], []]], 2, 5)
    with pytest.raises(ValueError, match=r"leaf at path \(1,\) is not at depth 2"):
        tree_leaf_bound([[[]], []], 2, 5)
    with pytest.raises(ValueError, match=r"path \(0, 0\) has 2 branching nodes"):
        tree_leaf_bound([[[], []], [[]]], 2, 1)


def test_prune_dead_equalizes_depth():
    tree = [[[]], [], [[], []]]
    pruned = prune_dead(tree, 2)
    assert pruned == [[[]], [[], []]]
    assert prune_dead([[], []], 3) == []


# -- E_m sets ----------------------------------------------------------------------------


def _random_chain(engine, rng, m, n):
    w = engine.tiles_at(0)[rng.randrange(2)]
    for _ in range(m + n):
        kids = engine.descendants(w, 1)
        w = kids[rng.randrange(len(kids))]
    chain = [engine.corners(engine.fpow(w, i)[: m + 1])[rng.randrange(3)] for i in range(n)]
    return chain, (engine.fpow(w, n)[: m + 1], rng.randrange(3))


def _e_m_forward_oracle(engine, chain, q, m):
    """All vertices of the fine level, kept when their forward orbit obeys the chain."""
    n = len(chain)
    target = engine.vkey(*q)
    lev = engine.build_level(engine.key_level(target) + n)
    out = set()
    for key, rep in zip(lev.vertex_keys, lev.vertex_reps):
        ok = True
        for i in range(n):
            if not in_closed_flower(engine, rep, chain[i], m):
                ok = False
                break
            rep = vertex_image(engine, rep)
        if ok and engine.vkey(*rep) == target:
            out.add(key)
    return out


@pytest.mark.parametrize("seed", range(12))
def test_e_m_set_matches_forward_oracle(engine, seed):
    rng = random.Random(seed)
    m, n = 1 + seed % 2, 1 + seed % 3
    chain, q = _random_chain(engine, rng, m, n)
    got = {engine.vkey(*x) for x in e_m_set(engine, chain, q, m)}
    assert got == _e_m_forward_oracle(engine, chain, q, m)


def test_e_m_tree_leaves_match_set(engine):
    rng = random.Random(5)
    chain, q = _random_chain(engine, rng, 2, 3)
    tree = prune_dead(preimage_tree(engine, chain, q, 2), 3)
    assert _leaves(tree) == len(e_m_set(engine, chain, q, 2)) or not tree


@pytest.mark.parametrize("seed", range(4))
def test_flower_cover(engine, seed):
    rng = random.Random(100 + seed)
    m, n = 1, 2
    tile = engine.tiles_at(m + n)[rng.randrange(engine.tile_count(m + n))]
    reps = [(engine.fpow(tile, i)[: m + 1], 0) for i in range(n + 1)]
    centers = cover_by_flowers(engine, reps, m)
    assert centers


# -- expansion constants -----------------------------------------------------------------


@pytest.fixture(scope="module")
def consts3(backend):
    return expansion_constants(backend, power=3, samples=20_000)


def test_constants_basic(backend, consts3):
    c = consts3
    assert c.degree == 8 and c.N_c == 2
    assert c.Lambda > 1 and c.C > 0 and c.K > 0
    assert 0 < c.D_c < 1
    assert json.dumps(c.to_dict())


def test_injectivity_profile_monotone(backend):
    prof = injectivity_profile(backend, [1e-3, 1e-2, 1e-1], samples=5000)
    taus = [t for _, t, _ in prof]
    assert taus == sorted(taus)
    assert all(t > 0 and pairs > 0 for _, t, pairs in prof)


def test_M_grows_with_m(consts3):
    ms = [consts3.M(m) for m in (80, 160, 320)]
    assert None not in ms and ms == sorted(ms) and ms[0] > 0


def test_entropy_bound_formula(consts3):
    m = 160
    res = conditional_entropy_upper(consts3, m, m + 5, 30)
    mm = consts3.M(m)
    assert res["M_m"] == mm
    assert res["limit"] == pytest.approx(consts3.N_c * math.log(8) / mm, rel=1e-15)
    last = res["entries"][-1][1]
    slope_free = last - consts3.N_c * math.log(8) / mm
    want = ((m + 5 - m + 1) * math.log(16) + math.log(consts3.W_f) + consts3.N_c * math.log(8)) / 30
    assert slope_free == pytest.approx(want, rel=1e-12)


def test_entropy_bound_errors(consts3):
    with pytest.raises(ValueError, match="need l > m"):
        conditional_entropy_upper(consts3, 80, 80, 5)
    with pytest.raises(ValueError, match="M_m is undefined or not positive"):
        conditional_entropy_upper(consts3, 1, 6, 5)


def test_e_m_counts_below_bound(backend, consts3):
    F = Engine(power_template(backend.engine, 3))
    rng = random.Random(0)
    m = 30
    for n in (1, 2, 3):
        for _ in range(5):
            chain, q = _random_chain(F, rng, m, n)
            assert len(e_m_set(F, chain, q, m)) <= e_m_count_bound(consts3, m, n)


def test_constants_reject_periodic_critical_point(rule):
    with pytest.raises(PeriodicCriticalPoint, match="map has periodic critical point"):
        expansion_constants(rule, power=1, samples=100)


# -- witnesses ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def witness6(engine):
    return witness_not_h_expansive(engine, m=1, s=3)


def test_witness_not_h_expansive(witness6):
    r = witness6
    k = r.params["k"]
    assert r.ok, r.checks
    assert [r.cards[3 * s] for s in (1, 2, 3)] == [k, k**2, k**3]
    assert r.bound == pytest.approx(math.log(k) / 3)
    data = json.loads(r.to_json())
    assert data["cardinalities"] == r.cards and data["kind"] == "not_h_expansive"


def test_witness_not_h_expansive_margins(engine):
    with pytest.raises(HypothesesViolated, match="hypotheses violated"):
        witness_not_h_expansive(engine, m=1, l=6)
    with pytest.raises(HypothesesViolated, match="strict margins"):
        witness_not_h_expansive(engine, m=1, strict=True)


def test_witness_not_h_expansive_rejects_periodic(rule):
    with pytest.raises(PeriodicCriticalPoint, match="map has periodic critical point"):
        witness_not_h_expansive(rule.engine)


def test_witness_not_asymp_h_expansive(rule):
    r = witness_not_asymp_h_expansive(rule.engine, m=1, l=6, s=2)
    k = r.params["k"]
    assert r.ok, r.checks
    assert [r.cards[7 * s] for s in (1, 2)] == [k**3, k**6]


def test_tail_witness_requires_periodic_critical_point(engine):
    with pytest.raises(PeriodicCriticalPoint, match="backend lacks periodic critical point"):
        witness_not_asymp_h_expansive(engine)


def test_tail_witness_budget(rule, monkeypatch):
    monkeypatch.setenv("THURSTON_BUDGET_CELLS", "100")
    with pytest.raises(BudgetExceeded, match="refinement budget exceeded"):
        witness_not_asymp_h_expansive(rule.engine, m=1, l=6, s=2)
