import math
import random

import pytest

from traintrack.catalog import EXAMPLES
from traintrack.freegroup import substitute
from traintrack.graph_core import GraphError
from traintrack.marked_map import PreconditionError, affine_map
from traintrack.fold_line import FoldLine, periodic_fold_line

from conftest import conjugacy_list


@pytest.fixture(scope="module")
def line():
    f, pf = affine_map(EXAMPLES["afg"]())
    return periodic_fold_line(f, pf.exact)


@pytest.fixture(scope="module")
def classes(line):
    return conjugacy_list(sorted(line.G0.marking), 50)


def test_rejects_non_affine():
    with pytest.raises(PreconditionError):
        periodic_fold_line(EXAMPLES["afg"]())


def test_breakpoints_strictly_decrease(line):
    Ls = line.breakpoint_lengths
    assert Ls[0] == 1
    assert Ls[-1] == 1 / line.lam
    assert all(b < a for a, b in zip(Ls, Ls[1:]))
    ts = line.breakpoints()
    assert ts[0] == 0 and abs(ts[-1] - line.period) < 1e-12


def test_length_normalization(line):
    rng = random.Random(1)
    for _ in range(100):
        t = rng.uniform(-3 * line.period, 3 * line.period)
        L = float(line.evaluate(t).total_length())
        assert abs(L - math.exp(-t)) <= 1e-9 * math.exp(-t)


def test_endpoints(line, classes):
    G0 = line.evaluate_breakpoint(0)
    assert G0.marked_isometric(line.G0, classes)
    end = line.evaluate_breakpoint(len(line.graphs) - 1)
    assert end.marked_isometric(line.G1, classes)
    assert line.evaluate(0.0).marked_isometric(line.G0, classes, tol=1e-12)


def test_period_translate(line, classes):
    # one fundamental domain later the graph is H_0 scaled by 1/lambda and re-marked by phi
    a = line.evaluate_breakpoint(0, k=1)
    b = line.G1
    assert a.marked_isometric(b, classes)
    two = line.evaluate(2 * line.period)
    ref = line.evaluate_breakpoint(0, k=2)
    assert two.marked_isometric(ref, classes, tol=1e-12)


def test_equivariance_exact(line, classes):
    phi = line.phi
    for j in range(len(line.graphs)):
        here = line.evaluate_breakpoint(j, k=0)
        later = line.evaluate_breakpoint(j, k=1)
        for c in classes:
            assert later.translation_length(c) * line.lam == here.translation_length(substitute(c, phi))


def test_lengths_nonincreasing_in_t(line, classes):
    ts = [line.period * i / 60 for i in range(61)]
    rows = line.sample_lengths(ts, classes)
    by_class = {}
    for t, c, L in rows:
        by_class.setdefault(c, []).append(L)
    for c, Ls in by_class.items():
        assert all(b <= a + 1e-12 for a, b in zip(Ls, Ls[1:])), c


def test_monotone_total_length(line):
    ts = [line.period * i / 40 - 1 for i in range(120)]
    Ls = [float(line.evaluate(t).total_length()) for t in ts]
    assert all(b < a for a, b in zip(Ls, Ls[1:]))


def test_mid_fold_adds_one_trivalent_vertex(line):
    for j, fd in enumerate(line.sequence.folds):
        H = line.graphs[j]
        ell = line.breakpoint_lengths[j] - fd.length / 2
        mid = line.graph_at_length(ell)
        new = set(mid.vertices) - set(H.vertices)
        assert len(new) == 1
        assert mid.valence(new.pop()) == 3


def test_semiflow(line):
    n = len(line.graphs)
    for i in range(n):
        for j in range(i, n):
            for k in range(j, n):
                assert line.fold_map(j, k).compose(line.fold_map(i, j)) == line.fold_map(i, k)


def test_edge_isometry_of_each_fold(line):
    for i in range(len(line.graphs) - 1):
        assert line.fold_map(i, i + 1).is_edge_isometry()
    assert line.period_map().is_edge_isometry()


def test_parse_classes(line):
    assert line.parse_classes(["a f", "# comment", "", "~g a"]) == [("a", "f"), ("~g", "a")]
    with pytest.raises(GraphError):
        line.parse_classes(["a b"])
    with pytest.raises(GraphError):
        line.parse_classes(["a ~a"])
    with pytest.raises(GraphError):
        line.parse_classes([])


def test_sample_rejects_trivial(line):
    with pytest.raises(GraphError):
        line.sample_lengths([0.0], [()])


def test_csv(line):
    rows = line.sample_lengths([0.0, 0.5], [("a",), ("f", "g")])
    text = FoldLine.to_csv(rows)
    lines = text.splitlines()
    assert lines[0] == "t,class,length"
    assert len(lines) == 5
