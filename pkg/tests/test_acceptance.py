"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the report lines
(they are also written with output capture disabled, so they show up in a
plain ``pytest -v`` run).
"""
import math
import random
import time
from fractions import Fraction

import networkx as nx
import numpy as np
import pytest

from traintrack.catalog import EXAMPLES
from traintrack.freegroup import base, inv, substitute
from traintrack.graph_core import MarkedGraph
from traintrack.marked_map import affine_map, pf_eigenvalue, transition_matrix
from traintrack.moves import (
    MoveInapplicable,
    finest_decomposition,
    fold_graph,
    metric_split,
    nielsen_collapse,
    obstruction_report,
    prepare_collapse,
    reduce_gate_excess,
    stallings_factorize,
    tt_split_data,
)
from traintrack.nielsen import find_inps
from traintrack.train_track import (
    gates,
    illegal_turns,
    is_rotationless,
    is_train_track,
    local_whitehead_graph,
    principal_vertices,
    stable_whitehead_graph,
    taken_turns,
    turn,
    turn_levels,
)
from traintrack.whitehead_ideal import (
    decomposition_matches,
    ideal_whitehead_graph,
    index_type,
    isomorphic,
    nongeometric_evidence,
)
from traintrack.fold_line import periodic_fold_line

from conftest import conjugacy_list, same_outer_class, seed_corpus

EIG_TOL = 0.005
PF_TOL = 1e-9
LENGTH_TOL = 1e-9
EXAMPLE_BUDGET = 5.0
PROPERTY_BUDGET = 60.0
FOLD_LINE_BUDGET = 10.0
MIN_RANDOM_CASES = 200


@pytest.fixture
def report(pytestconfig):
    capman = pytestconfig.pluginmanager.getplugin("capturemanager")

    def emit(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        with capman.global_and_fixture_disabled():
            print("\n" + line, end="")
        assert ok, line

    return emit


def _set(*pairs):
    return frozenset(turn(a, b) for a, b in pairs)


# -- the three-petal example A -> AFGFGF, F -> FGF, G -> GFAFG ------------------------


def afg_checks():
    f0 = EXAMPLES["afg"]()
    f, pf = affine_map(f0)
    lam = pf.exact
    ev = np.linalg.eigvals(np.array(f0.abelianization(), dtype=float))
    real = [x for x in ev if abs(x.imag) < 1e-9]
    cplx = sorted((x for x in ev if abs(x.imag) >= 1e-9), key=lambda z: z.imag)
    eig_ok = (len(real) == 1 and abs(real[0].real - 4.08) <= EIG_TOL and len(cplx) == 2
              and all(abs(z.real - 0.46) <= EIG_TOL for z in cplx)
              and abs(cplx[1].imag - 0.18) <= EIG_TOL)
    gs = gates(f0)
    nonperiodic = [d for d in f0.graph.directions("v") if not gs.is_periodic(d)]
    late = turn("F", "~F")
    tt_ok = (bool(is_train_track(f0)) and illegal_turns(f0) == {("~A", "~F")} and nonperiodic == ["~A"]
             and turn_levels(f0).get(late) == 2 and late in local_whitehead_graph(f0, "v").edges
             and late not in local_whitehead_graph(f0, "v", max_iterate=1).edges)
    inps_ok = find_inps(f, 1, lam) == [] and find_inps(f, 2, lam) == []
    iw = ideal_whitehead_graph(f, lam)
    comp = iw.components[0] if iw.components else None
    iw_ok = (len(iw.components) == 1 and iw.num_vertices == 5 and iw.num_edges == 4
             and comp.degrees() == [3, 2, 1, 1, 1])
    rep = index_type(f, lam, iwg=iw)
    return {
        "eigen": (eig_ok, f"{np.round(ev, 4).tolist()}"),
        "train_track": (tt_ok, "illegal {~A,~F}; ~A nonperiodic; {F,~F} at iterate 2"),
        "inps": (inps_ok, "periods 1, 2"),
        "ideal": (iw_ok, f"{iw.num_vertices} vertices, {iw.num_edges} edges"),
        "index": (rep.index_type == [Fraction(-1)], f"computed {[str(x) for x in rep.index_type]}"),
        "inequality": (rep.inequality_ok and rep.strict, f"i = {rep.total}, 1 - r = {rep.bound}"),
    }


@pytest.fixture(scope="module")
def afg_results():
    t = time.perf_counter()
    res = afg_checks()
    return res, time.perf_counter() - t


@pytest.mark.parametrize("key,name", [
    ("eigen", "afg: abelianization eigenvalues 4.08 and 0.46 +- 0.18i"),
    ("train_track", "afg: train track, unique illegal turn, late turn {F,~F}"),
    ("inps", "afg: no periodic indivisible Nielsen paths"),
    ("ideal", "afg: ideal Whitehead graph is a 5-vertex triod"),
    ("index", "afg: index type (-1)"),
    ("inequality", "afg: strict index inequality"),
])
def test_afg(afg_results, report, key, name):
    res, _ = afg_results
    report(name, *res[key])


def test_afg_runtime(afg_results, report):
    report("afg: example suite under 5 s", afg_results[1] < EXAMPLE_BUDGET, f"{afg_results[1]:.2f} s")


# -- the rank-3 pair with different expansion factors ------------------------------------


def test_expansion_factor_pair(report):
    t = time.perf_counter()
    pf = pf_eigenvalue(transition_matrix(EXAMPLES["abc"]()))
    pfi = pf_eigenvalue(transition_matrix(EXAMPLES["abc-inverse"]()))
    ok = pf.certify_greater(6) and pfi.certify_less(5) and pf.interval[0] > 6 and pfi.interval[1] < 5
    dt = time.perf_counter() - t
    report("abc: PF(phi) > 6 and PF(phi^-1) < 5, certified", ok, f"{pf.lam:.6f}, {pfi.lam:.6f}")

    def gate_sets(f):
        return {frozenset(g) for g in gates(f).gates["v"]}

    t = time.perf_counter()
    ok = (gate_sets(EXAMPLES["abc"]()) == {frozenset("ab"), frozenset("c"), frozenset({"~a", "~b", "~c"})}
          and gate_sets(EXAMPLES["abc-slid"]()) == {frozenset("abc"), frozenset({"~a", "~c"}), frozenset({"~b"})})
    ev = nongeometric_evidence(EXAMPLES["abc"](), EXAMPLES["abc-inverse"]())
    ok = ok and ev.verdict == "nongeometric" and ev.expansion_factors_differ is True
    dt += time.perf_counter() - t
    report("abc: gates of both maps, verdict nongeometric by expansion factors", ok, ev.verdict)
    report("abc: example suite under 5 s", dt < EXAMPLE_BUDGET, f"{dt:.2f} s")


# -- the two-vertex example ------------------------------------------------------------


def test_two_vertex_suite(report):
    t = time.perf_counter()
    f0 = EXAMPLES["two-vertex"]()
    level1 = taken_turns(f0, max_iterate=1)
    want = _set(("~A", "F"), ("~D", "F"), ("~F", "A"), ("~F", "D"), ("~F", "E"))
    report("two-vertex: taken turns", level1 == want, f"{sorted(level1)}")

    Wp, Wq = local_whitehead_graph(f0, "p"), local_whitehead_graph(f0, "q")
    ok = (Wp.edges == _set(("~A", "F"), ("F", "~D"))
          and Wq.edges == _set(("A", "~F"), ("~F", "D"), ("D", "~E"), ("~F", "E"))
          and "D" in Wq.cut_vertices())
    report("two-vertex: local Whitehead graphs, D cuts W(q)", ok)

    f, pf = affine_map(f0)
    lam = pf.exact
    sp = metric_split(f, "q", {"A", "~F", "E", "D"}, {"D", "~E"}, f.graph.length("D") / 2)
    D1, D2, _ = sp.pieces
    ok = (sp.local[sp.y1].edges == _set(("A", "~F"), ("~F", D1), ("~F", "E"))
          and sp.local[sp.y2].edges == _set((D2, "~E")))
    report("two-vertex: metric split local graphs", ok)
    rep = obstruction_report(sp)
    ok = (set(rep.stable_sets.values()) == {frozenset({"A", "~F", "D"}), frozenset({"D", "~E"})}
          and set(rep.required.values()) == {frozenset({"~F", "D", "~E"})} and rep.obstruction
          and rep.to_json()["verdict"] == "obstruction present")
    report("two-vertex: obstruction report", ok, rep.to_json()["verdict"])

    inps = find_inps(f, 1, lam)
    ok = bool(inps)
    if ok:
        f2, n2 = prepare_collapse(f, inps[0], lam)
        g = nielsen_collapse(f2, n2)
        target = pf_eigenvalue(transition_matrix(EXAMPLES["afg"]())).lam
        got = pf_eigenvalue(transition_matrix(g)).lam
        ok = abs(got - target) < PF_TOL
    report("two-vertex: Nielsen collapse lands on the afg expansion factor", ok)
    dt = time.perf_counter() - t
    report("two-vertex: example suite under 5 s", dt < EXAMPLE_BUDGET, f"{dt:.2f} s")


# -- move calculus on random instances -------------------------------------------------


def _random_fold_composite(rng):
    G = MarkedGraph(["v"], {x: ("v", "v") for x in "ABC"},
                    {x: Fraction(rng.randint(1, 9), rng.randint(1, 4)) for x in "ABC"},
                    {x.lower(): (x,) for x in "ABC"}, "v")
    g, h = G, None
    for _ in range(rng.randint(1, 8)):
        taken = set() if h is None else {
            frozenset((inv(a), b)) for img in h.edge_map.values() for a, b in zip(img, img[1:])}
        v = rng.choice(sorted(g.vertices))
        dirs = g.directions(v)
        pairs = [(a, b) for i, a in enumerate(dirs) for b in dirs[i + 1:]
                 if base(a) != base(b) and frozenset((a, b)) not in taken]
        if not pairs:
            continue
        a, b = rng.choice(pairs)
        fd = fold_graph(g, a, b, min(g.length(a), g.length(b)) * Fraction(rng.randint(1, 7), 8))
        h = fd.as_map() if h is None else fd.as_map().compose(h)
        g = fd.target
    return h


def test_move_calculus(report):
    start = time.perf_counter()
    rng = random.Random(2024)
    cases, ok = 0, True
    while cases < MIN_RANDOM_CASES:
        h = _random_fold_composite(rng)
        if h is None:
            continue
        seq = stallings_factorize(h)
        ok = ok and len(seq) <= h.combinatorial_length() and seq.recompose() == h
        cases += 1
    report("moves: Stallings factorization bound and recomposition", ok, f"{cases} composites")

    seeds = []
    for f0 in seed_corpus(25, seed=5):
        if is_train_track(f0):
            f, pf = affine_map(f0)
            seeds.append((f, pf.exact, conjugacy_list(sorted(f.graph.marking), 20)))

    trips, ok = 0, True
    for f, lam, words in seeds[:8]:
        W = local_whitehead_graph(f, "v")
        for x in W.cut_vertices():
            G = W.nx()
            G.remove_node(x)
            first = min(sorted(c) for c in nx.connected_components(G))
            X1 = set(first) | {x}
            try:
                sp = tt_split_data(f, "v", X1, (set(W.vertices) - X1) | {x})
            except MoveInapplicable:
                continue
            ok = ok and sp.undo() == f
            trips += 1
    cases += trips
    report("moves: split round trips restore the map", ok and trips > 0, f"{trips} splits")

    inv_ok, dec_ok, n = True, True, 0
    for f, lam, words in seeds[:8]:
        pf0 = pf_eigenvalue(transition_matrix(f)).lam
        for g in (reduce_gate_excess(f, lam), finest_decomposition(f, lam)):
            inv_ok = inv_ok and abs(pf_eigenvalue(transition_matrix(g)).lam - pf0) < PF_TOL
            inv_ok = inv_ok and same_outer_class(g.automorphism(), f.automorphism(), words)
            if is_rotationless(f) and is_rotationless(g):
                inv_ok = inv_ok and isomorphic(ideal_whitehead_graph(g, lam), ideal_whitehead_graph(f, lam))
            n += 1
        g = finest_decomposition(f, lam)
        principal = principal_vertices(g, inps=find_inps(g, 1, lam))
        dec_ok = dec_ok and all(not stable_whitehead_graph(g, v).cut_vertices() for v in principal)
        if is_rotationless(g):
            dec_ok = dec_ok and decomposition_matches(ideal_whitehead_graph(g, lam))
        n += 1
    cases += n
    report("moves: PF and ideal Whitehead graph invariant under moves", inv_ok, f"{n} checks")
    report("moves: finest decomposition is cut-free and matches the block decomposition", dec_ok)
    dt = time.perf_counter() - start
    report("moves: at least 200 random cases", cases >= MIN_RANDOM_CASES, f"{cases} cases")
    report("moves: property suite under 60 s", dt < PROPERTY_BUDGET, f"{dt:.2f} s")


# -- fold line ---------------------------------------------------------------------------


def test_fold_line(report):
    start = time.perf_counter()
    f, pf = affine_map(EXAMPLES["afg"]())
    line = periodic_fold_line(f, pf.exact)
    rng = random.Random(7)
    ts = [rng.uniform(-2 * line.period, 2 * line.period) for _ in range(100)]
    worst = max(abs(float(line.evaluate(t).total_length()) - math.exp(-t)) / math.exp(-t) for t in ts)
    report("fold line: Length(G_t) = exp(-t) at 100 samples", worst <= LENGTH_TOL, f"max rel err {worst:.2e}")

    classes = conjugacy_list(sorted(line.G0.marking), 50)
    ok = (line.evaluate_breakpoint(0).marked_isometric(line.G0, classes)
          and line.evaluate_breakpoint(len(line.graphs) - 1).marked_isometric(line.G1, classes))
    report("fold line: endpoints are G and G scaled by 1/lambda and re-marked", ok)

    ok = all(line.evaluate_breakpoint(j, k=1).translation_length(c) * line.lam
             == line.evaluate_breakpoint(j, k=0).translation_length(substitute(c, line.phi))
             for j in range(len(line.graphs)) for c in classes)
    report("fold line: exact equivariance of 50 translation lengths", ok)
    dt = time.perf_counter() - start
    report("fold line: suite under 10 s", dt < FOLD_LINE_BUDGET, f"{dt:.2f} s")
