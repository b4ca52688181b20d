import copy
import json

import pytest

from thurston.cell_complex import Engine, combinatorial_expansion, power_template
from thurston.sphere_map import DATA, SubdivisionBackend
from thurston.template import TemplateError, template_from_dict


@pytest.fixture(scope="module")
def rule_spec():
    with open(DATA / "critical_fixed_rule.json") as fh:
        return json.load(fh)


def test_shipped_template_shape(backend):
    t = backend.template
    assert (t.degree, t.m) == (2, 3)
    # Post points in curve order are -1, 1, inf: f fixes -1, sends 1 to -1 and inf to 1.
    assert t.image_of_post() == [0, 0, 1]
    assert t.periodic_critical() == []


def test_template_dict_roundtrip(backend):
    t = backend.template
    t2 = template_from_dict(t.to_dict())
    assert t2.to_dict() == t.to_dict()


def test_rule_has_critical_fixed_point(rule):
    t = rule.template
    assert t.degree == 6
    assert t.image_of_post() == [0, 0, 0]
    assert len(t.periodic_critical()) == 1
    assert rule.has_periodic_critical_point()


def test_rule_is_combinatorially_expanding(rule):
    eng = rule.engine
    assert eng.expansion_level() == 1
    assert [combinatorial_expansion(eng, n) for n in range(1, 4)] == [2, 4, 8]


def test_dropping_a_tile_fails_validation(rule_spec):
    bad = copy.deepcopy(rule_spec)
    bad["template"]["tiles"].pop()
    with pytest.raises(TemplateError):
        SubdivisionBackend(template_from_dict(bad))


def test_relabelled_vertex_fails_validation(rule_spec):
    bad = copy.deepcopy(rule_spec)
    bad["template"]["vertices"][6]["label"] = 0
    with pytest.raises(TemplateError):
        SubdivisionBackend(template_from_dict(bad))


def test_malformed_spec():
    with pytest.raises(TemplateError):
        template_from_dict({"kind": "subdivision", "post_count": 2})


@pytest.mark.parametrize("j", [2, 3])
def test_power_template_matches_iterated_engine(engine, j):
    big = Engine(power_template(engine, j))
    assert big.t.degree == 2**j
    for n in (1, 2):
        lev = big.build_level(n)
        base = engine.build_level(n * j)
        assert (lev.n_tiles, lev.n_edges, lev.n_vertices) == (base.n_tiles, base.n_edges, base.n_vertices)
