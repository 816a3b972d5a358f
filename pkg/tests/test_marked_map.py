import json
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from traintrack.catalog import EXAMPLES, rose, rose_map
from traintrack.freegroup import parse_word
from traintrack.graph_core import GraphError
from traintrack.marked_map import (
    DegenerateInput,
    GraphSelfMap,
    PreconditionError,
    affine_map,
    affine_normalize,
    irreducibility_report,
    iterate,
    matrix_primitive,
    pf_eigenvalue,
    transition_matrix,
)

from conftest import positive_seeds


def identity_rose(labels="abc"):
    return rose_map({x: x for x in labels})


def test_iterate_once_is_identity_operation():
    f = EXAMPLES["afg"]()
    assert iterate(f, 1).edge_map == f.edge_map


def test_iterate_twice_edge_F():
    f = EXAMPLES["afg"]()
    assert iterate(f, 2).edge_map["F"] == parse_word("FGF" "GFAFG" "FGF")


def test_iterate_rejects_nonpositive():
    with pytest.raises(ValueError):
        iterate(EXAMPLES["afg"](), 0)


def test_transition_matrix_afg_columns():
    M = transition_matrix(EXAMPLES["afg"]())
    assert M.labels == ("A", "F", "G")
    assert M.column("A") == (1, 3, 2)
    assert M.column("F") == (0, 2, 1)
    assert M.column("G") == (1, 2, 2)


def test_transition_matrix_abc_columns():
    M = transition_matrix(EXAMPLES["abc"]())
    assert M.column("a") == (4, 1, 2)
    assert M.column("b") == (2, 1, 1)
    assert M.column("c") == (3, 0, 2)


def test_identity_matrix():
    M = transition_matrix(identity_rose())
    assert M.rows == ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def test_column_sums_are_image_lengths():
    f = EXAMPLES["two-vertex"]()
    M = transition_matrix(f)
    for lab in M.labels:
        assert sum(M.column(lab)) == len(f.edge_map[lab])


def test_pf_afg():
    pf = pf_eigenvalue(transition_matrix(EXAMPLES["afg"]()))
    assert abs(pf.lam - 4.08) < 0.005
    assert pf.interval[0] < pf.lam <= pf.interval[1]
    assert abs(pf.power_estimate - pf.lam) < 1e-9


def test_pf_permutation_is_one():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pf = pf_eigenvalue([[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    assert pf.exact == 1


def test_pf_zero_matrix_rejected():
    with pytest.raises(DegenerateInput):
        pf_eigenvalue([[0, 0], [0, 0]])


def test_pf_reducible_warns():
    with pytest.warns(UserWarning):
        pf = pf_eigenvalue([[2, 1], [0, 3]])
    assert not pf.irreducible and pf.exact == 3


def test_pf_abc_certified_bounds():
    assert pf_eigenvalue(transition_matrix(EXAMPLES["abc"]())).certify_greater(6)
    assert pf_eigenvalue(transition_matrix(EXAMPLES["abc-inverse"]())).certify_less(5)


def test_affine_normalize_afg():
    f = EXAMPLES["afg"]()
    g = affine_normalize(f)
    lam = pf_eigenvalue(transition_matrix(f)).exact
    assert g.total_length() == 1
    h = f.with_graph(g)
    assert h.stretch_residual(lam) < 1e-9
    assert h.is_affine(lam)


def test_affine_residual_homogeneous():
    f = EXAMPLES["afg"]()
    g = affine_normalize(f)
    lam = pf_eigenvalue(transition_matrix(f)).exact
    for c in (Fraction(3), Fraction(2, 7)):
        assert f.with_graph(g.scaled(c)).is_affine(lam)


def test_affine_normalize_rejects_reducible():
    with pytest.raises(PreconditionError):
        affine_normalize(rose_map({"a": "ab", "b": "b"}))


def test_irreducibility_report_afg():
    rep = irreducibility_report(EXAMPLES["afg"]())
    assert rep.matrix_irreducible and rep.matrix_primitive and rep.cyclotomic_free
    assert rep.sufficient


def test_identity_not_cyclotomic_free():
    rep = irreducibility_report(identity_rose())
    assert not rep.cyclotomic_free
    assert 1 in rep.cyclotomic_factors


def test_block_permutation_irreducible_not_primitive():
    rep = irreducibility_report(rose_map({"a": "b", "b": "a"}))
    assert rep.matrix_irreducible and not rep.matrix_primitive
    assert "necessary" in rep.note


def test_abelianization_eigenvalues_afg():
    ev = np.linalg.eigvals(np.array(EXAMPLES["afg"]().abelianization(), dtype=float))
    real = max(ev, key=lambda z: z.real)
    assert abs(real - 4.08) < 0.005
    cx = [z for z in ev if abs(z.imag) > 1e-9]
    assert len(cx) == 2
    for z in cx:
        assert abs(z.real - 0.46) < 0.005 and abs(abs(z.imag) - 0.18) < 0.005


def test_map_json_round_trip():
    f = EXAMPLES["two-vertex"]()
    doc = json.loads(json.dumps(f.to_json()))
    assert GraphSelfMap.from_json(doc) == f


def test_map_json_missing_edge_image():
    doc = EXAMPLES["afg"]().to_json()
    del doc["map"]["edge_images"]["A"]
    with pytest.raises(GraphError):
        GraphSelfMap.from_json(doc)


def test_map_rejects_trivial_image():
    with pytest.raises(GraphError):
        GraphSelfMap.from_images(rose("ab"), {"a": (), "b": ("b",)})


def test_map_rejects_inconsistent_vertex_images():
    g = EXAMPLES["two-vertex"]().graph
    with pytest.raises(GraphError):
        GraphSelfMap.from_images(g, {"A": ("A",), "D": ("E",), "E": ("E",), "F": ("F",)})


def test_automorphism_of_rose_is_images():
    f = EXAMPLES["abc"]()
    assert f.automorphism()["b"] == parse_word("baca")


def test_affine_map_exact_lengths():
    f, pf = affine_map(EXAMPLES["two-vertex"]())
    assert f.is_affine(pf.exact)
    assert f.graph.total_length() == 1


# -- properties -----------------------------------------------------------


@settings(max_examples=25)
@given(positive_seeds(), st.integers(min_value=2, max_value=3))
def test_iterate_matrix_is_power_for_positive_maps(f, k):
    # positive maps never cancel, so the iterate matrix is M^k
    assert transition_matrix(f.iterate(k)).rows == transition_matrix(f).power(k).rows


@settings(max_examples=25)
@given(positive_seeds())
def test_positive_maps_abelianization_equals_transition(f):
    M = transition_matrix(f)
    gens = [x.lower() for x in M.labels]
    assert list(f.graph.marking) == gens
    assert [list(r) for r in M.rows] == f.abelianization()


@st.composite
def primitive_matrices(draw):
    n = draw(st.integers(min_value=1, max_value=12))
    rows = [[draw(st.integers(min_value=0, max_value=3)) for _ in range(n)] for _ in range(n)]
    for i in range(n):
        rows[i][(i + 1) % n] = max(rows[i][(i + 1) % n], 1)
        rows[i][i] = max(rows[i][i], 1)
    return rows


@settings(max_examples=30)
@given(primitive_matrices())
def test_pf_bisection_agrees_with_power_iteration(rows):
    assert matrix_primitive(rows)
    pf = pf_eigenvalue(rows, tol=1e-10)
    assert abs(pf.lam - pf.power_estimate) <= max(10 * 1e-10, 1e-9 * pf.lam)
    assert abs(pf.lam - max(abs(np.linalg.eigvals(np.array(rows, dtype=float))))) < 1e-6 * pf.lam
