import json

import pytest

from traintrack.catalog import EXAMPLES
from traintrack.graph_core import MarkedGraph
from traintrack.marked_map import GraphMap, PreconditionError, affine_map, pf_eigenvalue, transition_matrix
from traintrack.moves import (
    FoldSequence,
    MoveInapplicable,
    finest_decomposition,
    fold,
    fold_graph,
    gate_excess,
    is_immersion,
    metric_split,
    nielsen_collapse,
    obstruction_report,
    partial_fold,
    prepare_collapse,
    reduce_gate_excess,
    stallings_factorize,
    tt_split,
    tt_split_data,
)
from traintrack.nielsen import find_inps
from traintrack.train_track import (
    is_train_track,
    local_whitehead_graph,
    principal_vertices,
    stable_whitehead_graph,
    turn,
)
from traintrack.whitehead_ideal import decomposition_matches, ideal_whitehead_graph, isomorphic

from conftest import conjugacy_list, same_outer_class

def pf_of(f):
    return pf_eigenvalue(transition_matrix(f)).lam


def edges(*pairs):
    return frozenset(turn(a, b) for a, b in pairs)


@pytest.fixture(scope="module")
def afg():
    f, pf = affine_map(EXAMPLES["afg"]())
    return f, pf.exact


@pytest.fixture(scope="module")
def tv():
    f, pf = affine_map(EXAMPLES["two-vertex"]())
    return f, pf.exact


def words_for(f):
    return conjugacy_list(sorted(f.graph.marking), 50)


# -- splits and their inverses ------------------------------------------------


def test_tt_split_afg_nielsen_round_trip(afg):
    f, lam = afg
    X2 = set(local_whitehead_graph(f, "v").vertices) - {"A"}
    split = tt_split_data(f, "v", {"A", "~F"}, X2)
    g = split.f
    assert split.fixed and is_train_track(g)
    inps = find_inps(g, 1, lam)
    assert len(inps) == 1 and inps[0].is_single_edge_pair()
    assert len(principal_vertices(g, inps=inps)) == 2
    assert split.undo() == f
    assert nielsen_collapse(g, split.nielsen) == f
    assert isomorphic(ideal_whitehead_graph(g, lam), ideal_whitehead_graph(f, lam))


def test_tt_split_nonfixed_fold_round_trip(tv):
    f, lam = tv
    split = tt_split_data(f, "p", {"~A", "F"}, {"F", "~D"})
    assert not split.fixed
    assert split.f.image(split.E1) == split.f.image(split.E2)
    assert fold(split.f, split.E1, split.E2) == f
    assert same_outer_class(split.f.automorphism(), f.automorphism(), words_for(f))


def test_tt_split_two_vertex_rejected(tv):
    f, _ = tv
    with pytest.raises(MoveInapplicable) as exc:
        tt_split(f, "q", {"A", "~F", "E", "D"}, {"D", "~E"})
    assert exc.value.vertex == "p"
    assert "['D', '~E', '~F']" in str(exc.value)


def test_tt_split_bad_partition(afg):
    f, _ = afg
    with pytest.raises(MoveInapplicable):
        tt_split(f, "v", {"A", "G"}, {"G", "~A", "F", "~F", "~G"})


# -- folds ---------------------------------------------------------------------


def test_fold_rejects_different_images(afg):
    f, _ = afg
    with pytest.raises(MoveInapplicable):
        fold(f, "A", "F")


def test_partial_fold_preserves_class_and_pf(afg):
    f, lam = afg
    s = f.graph.length("F") / lam  # g(~A) and g(~F) both begin with ~F
    g = partial_fold(f, "~A", "~F", s, lam)
    assert is_train_track(g)
    assert g.is_affine(lam)
    assert abs(pf_of(g) - pf_of(f)) < 1e-9
    assert same_outer_class(f.automorphism(), g.automorphism(), words_for(f))
    assert isomorphic(ideal_whitehead_graph(g, lam), ideal_whitehead_graph(f, lam))


def test_partial_fold_out_of_range(afg):
    f, lam = afg
    with pytest.raises(MoveInapplicable):
        partial_fold(f, "~A", "~F", 2 * f.graph.length("A"), lam)


# -- Nielsen collapse ------------------------------------------------------------


def test_two_vertex_collapse_gives_afg_class(tv, afg):
    f, lam = tv
    (np_,) = find_inps(f, 1, lam)
    f2, n2 = prepare_collapse(f, np_, lam)
    before = principal_vertices(f2, inps=find_inps(f2, 1, lam))
    g = nielsen_collapse(f2, n2)
    after = principal_vertices(g, inps=find_inps(g, 1, lam))
    assert len(after) == len(before) - 1
    assert abs(pf_of(g) - pf_of(afg[0])) < 1e-9
    assert is_train_track(g)
    assert isomorphic(ideal_whitehead_graph(g, lam), ideal_whitehead_graph(f2, lam))
    assert same_outer_class(g.automorphism(), f.automorphism(), words_for(f))


def test_collapse_requires_single_edge_pair(tv):
    f, lam = tv
    (np_,) = find_inps(f, 1, lam)
    with pytest.raises(MoveInapplicable, match="prepare_collapse"):
        nielsen_collapse(f, np_)


def test_collapse_rejects_non_nielsen(afg):
    f, _ = afg
    with pytest.raises(MoveInapplicable):
        nielsen_collapse(f, ("A", "F"))


# -- metric split -------------------------------------------------------------


@pytest.fixture(scope="module")
def tv_split(tv):
    f, _ = tv
    eps = f.graph.length("D") / 2
    return metric_split(f, "q", {"A", "~F", "E", "D"}, {"D", "~E"}, eps)


def test_metric_split_local_graphs(tv_split):
    sp = tv_split
    D1, D2, D3 = sp.pieces
    assert (sp.y1, sp.y2, D1, D2) == ("q1", "q2", "D1", "D2")
    assert sp.local["q1"].edges == edges(("A", "~F"), ("~F", "D1"), ("~F", "E"))
    assert sp.local["q2"].edges == edges(("D2", "~E"))


def test_metric_split_refold_recovers_graph(tv_split, tv):
    f, _ = tv
    sp = tv_split
    H = sp.graph
    D1, D2, _ = sp.pieces
    back = fold_graph(H, "~" + D1, "~" + D2, H.lengths[D1]).target
    assert back.marked_isometric(f.graph, words_for(f))


def test_metric_split_eps_range(tv):
    f, _ = tv
    for eps in (0, f.graph.length("D")):
        with pytest.raises(ValueError):
            metric_split(f, "q", {"A", "~F", "E", "D"}, {"D", "~E"}, eps)


def test_obstruction_report_two_vertex(tv_split):
    rep = obstruction_report(tv_split)
    assert rep.stable_sets == {"q1": frozenset({"A", "~F", "D"}), "q2": frozenset({"D", "~E"})}
    assert rep.required == {"p": frozenset({"~F", "D", "~E"})}
    assert rep.obstruction
    assert rep.to_json()["verdict"] == "obstruction present"


def test_obstruction_report_trivial_split(afg):
    # afg has no vertex mapping onto v other than v itself: nothing is required
    f, _ = afg
    X2 = set(local_whitehead_graph(f, "v").vertices) - {"A"}
    sp = metric_split(f, "v", {"A", "~F"}, X2, f.graph.length("F") / 3)
    rep = obstruction_report(sp)
    assert rep.required == {} and not rep.obstruction


# -- gate excess and the driver --------------------------------------------------


def test_reduce_gate_excess_afg(afg):
    f, lam = afg
    assert sum(gate_excess(f, lam=lam).values()) == 1
    rec = []
    g = reduce_gate_excess(f, lam, record=rec)
    assert sum(gate_excess(g, lam=lam).values()) == 0
    assert len(rec) == 1 and rec[0].kind == "partial_fold"
    assert abs(pf_of(g) - pf_of(f)) < 1e-9
    assert reduce_gate_excess(g, lam) is g


def test_finest_decomposition_afg(afg):
    f, lam = afg
    rec = []
    g = finest_decomposition(f, lam, record=rec)
    inps = find_inps(g, 1, lam)
    principal = principal_vertices(g, inps=inps)
    assert len(principal) == 4
    for v in principal:
        S = stable_whitehead_graph(g, v)
        assert not S.cut_vertices()
        assert len(S.edges) == 1
    iw = ideal_whitehead_graph(g, lam)
    assert isomorphic(iw, ideal_whitehead_graph(f, lam))
    assert decomposition_matches(iw)
    assert same_outer_class(g.automorphism(), f.automorphism(), words_for(f))
    assert [m.kind for m in rec] == ["partial_fold", "tt_split", "tt_split", "tt_split"]
    assert finest_decomposition(g, lam) is not None
    assert finest_decomposition(g, lam).edge_map == g.edge_map


# -- Stallings factorization ------------------------------------------------------


def g10(f, lam):
    G = f.graph
    G1 = G.scaled(1 / lam).with_marking(
        {x: f.image_path(loop) for x, loop in G.marking.items()}, f.vertex_map[G.base])
    return GraphMap(G, G1, f.vertex_map, f.edge_map)


def test_factorize_isometry_is_empty():
    G = EXAMPLES["two-vertex"]().graph
    ident = GraphMap(G, G, {v: v for v in G.vertices}, {e: (e,) for e in G.edges})
    seq = stallings_factorize(ident)
    assert len(seq) == 0 and seq.recompose() == ident


@pytest.mark.parametrize("name", ["afg", "two-vertex", "abc"])
def test_factorize_period_map(name):
    f, pf = affine_map(EXAMPLES[name]())
    h = g10(f, pf.exact)
    seq = stallings_factorize(h)
    assert 0 < len(seq) <= h.combinatorial_length()
    assert seq.recompose() == h
    assert is_immersion(seq.final)
    lens = [g.total_length() for g in seq.graphs]
    assert all(b < a for a, b in zip(lens, lens[1:]))


def test_factorize_afg_bound_is_image_letter_count(afg):
    f, lam = afg
    h = g10(f, lam)
    assert h.combinatorial_length() == 6 + 3 + 5
    assert len(stallings_factorize(h)) <= h.combinatorial_length()


def test_factorize_json_replay(afg):
    f, lam = afg
    seq = stallings_factorize(g10(f, lam))
    doc = json.loads(json.dumps(seq.to_json()))
    again = FoldSequence.from_json(doc)
    assert [g for g in again.graphs] == [g for g in seq.graphs]
    assert again.recompose() == seq.recompose()


def test_factorize_rejects_non_immersed_edge():
    G = MarkedGraph(["v"], {"a": ("v", "v"), "b": ("v", "v")}, {"a": 2, "b": 1},
                    {"x": ("a",), "y": ("b",)}, "v")
    H = MarkedGraph(["v"], {"a": ("v", "v"), "b": ("v", "v")}, {"a": 1, "b": 1},
                    {"x": ("a",), "y": ("b",)}, "v")
    h = GraphMap(G, H, {"v": "v"}, {"a": ("a", "~a"), "b": ("b",)}, check=False)
    with pytest.raises(PreconditionError):
        stallings_factorize(h)
