"""Cut-and-paste moves on train track maps and marked graphs.

Folds and Nielsen collapses are both quotients that identify two oriented
edges with a common initial vertex; vertex splittings are their inverses.
Built on them are gate-excess reduction and a driver that refines local
stable Whitehead graphs until none has a cut vertex.  Stallings
factorization writes an edge isometry as folds followed by an immersion.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .freegroup import base, inv, inverse
from .graph_core import MarkedGraph, fresh_label, format_length, parse_length, relabel_path, subdivide_many, tighten_tokens
from .marked_map import (
    GraphMap,
    GraphSelfMap,
    PreconditionError,
    forward_closure,
    make_point,
    pf_eigenvalue,
    sub_path,
    subdivide_self_map,
    transition_matrix,
)
from .nielsen import NielsenPath, _attach_endpoints, find_inps, realize_inps
from .train_track import (
    WhiteheadGraph,
    gates,
    is_train_track,
    local_whitehead_graph,
    principal_vertices,
    turn,
    turn_levels,
)


class MoveInapplicable(PreconditionError):
    """A move's hypotheses fail; ``vertex`` / ``direction`` locate the failure."""

    def __init__(self, message, vertex=None, direction=None):
        super().__init__(message)
        self.vertex = vertex
        self.direction = direction


@dataclass
class FoldMove:
    kind: str  # full_fold | partial_fold | nielsen_collapse | tt_split | metric_split
    data: dict = field(default_factory=dict)

    def to_json(self):
        out = {"kind": self.kind}
        for k, v in self.data.items():
            if isinstance(v, (set, frozenset, tuple)):
                v = sorted(v) if isinstance(v, (set, frozenset)) else list(v)
            elif not isinstance(v, (str, int, list, dict, type(None))):
                v = format_length(v)
            out[k] = v
        return out


def _lam(f, lam=None):
    return pf_eigenvalue(transition_matrix(f)).exact if lam is None else lam


def _push(pe, path):
    out = []
    for t in path:
        seg = pe[base(t)]
        out.extend(inverse(seg) if t.startswith("~") else seg)
    return tuple(out)


# ---------------------------------------------------------------------------
# identification of two edges (the common core of folds and collapses)


def identify_edges(g, keep, gone):
    """Quotient of ``g`` identifying oriented edge ``gone`` with ``keep``.

    Both must start at one vertex and have equal length; the terminal vertex
    of ``gone`` is merged into that of ``keep``.  Returns ``(graph, pe, pv)``
    with ``pe`` sending every old label to a token path and ``pv`` the vertex
    map.
    """
    if g.init(keep) != g.init(gone):
        raise MoveInapplicable(f"{keep} and {gone} do not share an initial vertex", g.init(keep))
    if base(keep) == base(gone):
        raise MoveInapplicable("cannot identify an edge with itself", g.init(keep), keep)
    if g.length(keep) != g.length(gone):
        raise MoveInapplicable(f"{keep} and {gone} have different lengths", g.init(keep))
    u, w = g.term(keep), g.term(gone)
    if u == w:
        raise MoveInapplicable("identification would lower the rank", u)
    pv = {v: (u if v == w else v) for v in g.vertices}
    gl = base(gone)
    pe = {lab: (lab,) for lab in g.edges if lab != gl}
    pe[gl] = (keep,) if not gone.startswith("~") else (inv(keep),)
    edges = {lab: (pv[a], pv[b]) for lab, (a, b) in g.edges.items() if lab != gl}
    lengths = {lab: g.lengths[lab] for lab in edges}
    marking = {x: tighten_tokens(_push(pe, loop)) for x, loop in g.marking.items()}
    h = MarkedGraph([v for v in g.vertices if v != w], edges, lengths, marking, pv[g.base])
    return h, pe, pv


def identify_paths(g, p1, p2):
    """Identify two token paths of equal piece lengths, token by token."""
    pe = {lab: (lab,) for lab in g.edges}
    pv = {v: v for v in g.vertices}
    cur = g
    for a, b in zip(p1, p2):
        (a2,) = _push(pe, (a,))
        (b2,) = _push(pe, (b,))
        if a2 == b2:
            continue
        cur, e, v = identify_edges(cur, a2, b2)
        pe = {lab: _push(e, path) for lab, path in pe.items()}
        pv = {x: v[y] for x, y in pv.items()}
    return cur, pe, pv


def push_self_map(f, h, pe, pv):
    """The map g' on the quotient ``h`` with g' p = p g; checks consistency."""
    em = {lab: tighten_tokens(_push(pe, f.edge_map[lab])) for lab in h.edges}
    vm = {v: pv[f.vertex_map[v]] for v in h.vertices}
    out = GraphSelfMap(h, vm, em, check=False)
    for lab in f.graph.edges:
        if lab in h.edges:
            continue
        lhs = tighten_tokens(_push(pe, f.edge_map[lab]))
        if lhs != out.image_path(pe[lab]):
            raise MoveInapplicable(f"images of the identified edges differ ({lab})")
    for lab, img in em.items():
        if not img:
            raise MoveInapplicable(f"edge {lab} would have trivial image")
    return out


@dataclass
class FoldResult:
    """Output of a fold: the new map and the quotient from the old graph."""

    f: GraphSelfMap
    push: dict  # old label -> token path in the new graph
    vertex_map: dict

    def push_path(self, path):
        return tighten_tokens(_push(self.push, path))


def _distance_along(g, d, pt):
    """Distance of an interior point from the start of d, or None if off d."""
    if pt.is_vertex or pt.edge != base(d):
        return None
    return pt.offset if not d.startswith("~") else g.length(d) - pt.offset


def _check_fold_args(g, d1, d2, s):
    if d1 == d2 or g.init(d1) != g.init(d2):
        raise MoveInapplicable(f"{d1} and {d2} are not distinct directions at one vertex")
    if not (0 < s <= g.length(d1) and s <= g.length(d2)):
        raise MoveInapplicable(f"fold length {format_length(s)} out of range", g.init(d1))
    if base(d1) == base(d2) and 2 * s > g.length(d1):
        raise MoveInapplicable("fold segments of a loop edge would overlap", g.init(d1))


def partial_fold_data(f, d1, d2, s, lam=None):
    """Fold the initial segments of length ``s`` of directions d1, d2.

    The subdivision points are closed under the map and mirrored between the
    two segments, so the result is again a self-map of the folded graph.
    """
    g = f.graph
    _check_fold_args(g, d1, d2, s)
    lam = _lam(f, lam)
    pts = {make_point(g, d, s) for d in (d1, d2) if s < g.length(d)}
    pts = forward_closure(f, pts, lam)
    while True:
        extra = set()
        for pt in pts:
            for a, b in ((d1, d2), (d2, d1)):
                t = _distance_along(g, a, pt)
                if t is not None and 0 < t < s:
                    q = make_point(g, b, t)
                    if q not in pts:
                        extra.add(q)
        if not extra:
            break
        pts = forward_closure(f, pts | extra, lam)
    if pts:
        f2, relabel, _ = subdivide_self_map(f, pts, lam)
    else:
        f2, relabel = f, {lab: (lab,) for lab in g.edges}
    h = f2.graph
    seg1 = sub_path(h, relabel_path((d1,), relabel), 0, s)
    seg2 = sub_path(h, relabel_path((d2,), relabel), 0, s)
    if [h.length(t) for t in seg1] != [h.length(t) for t in seg2]:
        raise ArithmeticError("fold segments were subdivided differently")
    if f2.raw_image(seg1) != f2.raw_image(seg2):
        raise MoveInapplicable(f"g does not identify the segments of {d1} and {d2}", g.init(d1))
    h2, pe, pv = identify_paths(h, seg1, seg2)
    out = push_self_map(f2, h2, pe, pv)
    full = {lab: _push(pe, relabel[lab]) for lab in g.edges}
    vmap = {v: pv[v] for v in g.vertices}
    return FoldResult(out, full, vmap)


def partial_fold(f, d1, d2, s, lam=None):
    return partial_fold_data(f, d1, d2, s, lam).f


def fold(f, E1, E2):
    """Fold edges E1, E2 with a common terminal vertex and g(E1) = g(E2)."""
    g = f.graph
    if E1 == E2 or base(E1) == base(E2):
        raise MoveInapplicable("fold needs two distinct edges")
    if g.term(E1) != g.term(E2):
        raise MoveInapplicable(f"{E1} and {E2} do not share a terminal vertex")
    if f.image(E1) != f.image(E2):
        raise MoveInapplicable(f"g({E1}) != g({E2})", g.term(E1))
    if g.length(E1) != g.length(E2):
        raise MoveInapplicable(f"{E1} and {E2} have different lengths")
    return partial_fold_data(f, inv(E1), inv(E2), g.length(E1)).f


# ---------------------------------------------------------------------------
# Nielsen collapse


def _as_edge_pair(sigma):
    if isinstance(sigma, NielsenPath):
        if not sigma.is_single_edge_pair():
            raise MoveInapplicable(
                "Nielsen path is not of the form E1 ~E2; realize its endpoints and fold "
                "its illegal turn first (see prepare_collapse)")
        return sigma.alpha[0], sigma.beta[0]
    E1, E2 = sigma
    return E1, E2


def nielsen_collapse(f, sigma):
    """Identify E1 with E2 where sigma = E1 ~E2 is an indivisible Nielsen path."""
    E1, E2 = _as_edge_pair(sigma)
    g = f.graph
    if g.term(E1) != g.term(E2) or base(E1) == base(E2):
        raise MoveInapplicable("E1 and E2 must be distinct edges with a common terminal vertex")
    if g.length(E1) != g.length(E2):
        raise MoveInapplicable("E1 and E2 must have equal length")
    path = (E1, inv(E2))
    img = f.image_path(path)
    if img != path and img != inverse(path):
        raise MoveInapplicable("E1 ~E2 is neither fixed nor reversed by g_#")
    h, pe, pv = identify_edges(g, inv(E1), inv(E2))
    return push_self_map(f, h, pe, pv)


def prepare_collapse(f, np_, lam=None, max_folds=64):
    """Fold the illegal turn of an iNp until it is a single-edge pair.

    Endpoints are made into vertices first; each step folds the two edges at
    the junction along the longest initial segments that g identifies.
    Returns ``(map, NielsenPath)`` ready for ``nielsen_collapse``.
    """
    lam = _lam(f, lam)
    f2, (n,) = realize_inps(f, [np_], lam)
    for _ in range(max_folds):
        if len(n.alpha) == 1 and len(n.beta) == 1:
            if f2.graph.length(n.alpha[0]) != f2.graph.length(n.beta[0]):
                raise ArithmeticError("single-edge legs of unequal length")
            return f2, _attach_endpoints(NielsenPath(n.alpha, n.beta, n.period, 0, 0, n.length), f2.graph)
        d1, d2 = inv(n.alpha[-1]), inv(n.beta[-1])
        i1, i2 = f2.image(d1), f2.image(d2)
        k = 0
        while k < len(i1) and k < len(i2) and i1[k] == i2[k]:
            k += 1
        if k == 0:
            raise ArithmeticError("junction turn of a Nielsen path is legal")
        s = f2.graph.path_length(i1[:k]) / lam
        res = partial_fold_data(f2, d1, d2, s, lam)
        a = res.push_path(n.alpha)
        b = res.push_path(n.beta)
        while a and b and a[-1] == b[-1]:
            a, b = a[:-1], b[:-1]
        f2 = res.f
        n = NielsenPath(a, b, n.period, 0, 0, n.length - s)
    raise ArithmeticError(f"junction folding did not finish within {max_folds} folds")


# ---------------------------------------------------------------------------
# vertex splittings


class _Splitter:
    """Bookkeeping shared by the train-track and metric splittings.

    Vertex ``w`` is replaced by ``w1`` (directions of side 1) and ``w2``;
    the edge of the shared direction ``x`` is replaced by per-side copies
    whose token paths are ``xpath[i]``.
    """

    def __init__(self, g, w, X1, X2, x, names):
        self.g, self.w, self.x = g, w, x
        self.X = {1: set(X1), 2: set(X2)}
        self.w1, self.w2 = names

    def side(self, d):
        if d == self.x:
            return None
        return 1 if d in self.X[1] else 2

    def vert(self, i):
        return self.w1 if i == 1 else self.w2

    def end_vertex(self, d):
        """New vertex at the far... start of direction d (d starts at w in g)."""
        return self.vert(self.side(d))

    def reattach(self, lab):
        g, w = self.g, self.w
        a, b = g.edges[lab]
        if a == w:
            a = self.end_vertex(lab)
        if b == w:
            b = self.end_vertex("~" + lab)
        return a, b

    def lift(self, h, path, start, end, xpaths, connectors=False):
        """Lift a token path of the old graph to the new graph ``h``."""
        X = base(self.x)
        pos = start
        out = []

        def connect(a, b):
            return (xpaths[self.x][a][0], inv(xpaths[self.x][b][0]))

        def side_of(v):
            return 1 if v == self.w1 else 2 if v == self.w2 else None

        for i, t in enumerate(path):
            if base(t) != X:
                need = h.init(t)
                if need != pos:
                    if connectors and side_of(pos) and side_of(need):
                        out.extend(connect(side_of(pos), side_of(need)))
                    else:
                        raise MoveInapplicable(f"lift breaks at token {t}: turn crosses the partition", self.w, t)
                out.append(t)
                pos = h.term(t)
                continue
            cands = [xpaths[t][1], xpaths[t][2]]
            ok = [c for c in cands if h.init(c[0]) == pos]
            if not ok:
                if not connectors:
                    raise MoveInapplicable(f"lift breaks at token {t}", self.w, t)
                starts = [side_of(h.init(c[0])) for c in cands]
                j = next((s for s in starts if s), None)
                if j is None or side_of(pos) is None:
                    raise MoveInapplicable(f"lift breaks at token {t}", self.w, t)
                out.extend(connect(side_of(pos), j))
                pos = self.vert(j)
                ok = [c for c in cands if h.init(c[0]) == pos]
            if len(ok) == 2:
                if i + 1 < len(path):
                    nxt = path[i + 1]
                    if base(nxt) != X:
                        want = h.init(nxt)
                    else:
                        want = h.init(xpaths[nxt][1][0])
                else:
                    want = end
                pick = [c for c in ok if h.term(c[-1]) == want]
                ok = pick or ok[:1]
            c = ok[0]
            out.extend(c)
            pos = h.term(c[-1])
        if pos != end:
            if connectors and side_of(pos) and side_of(end):
                out.extend(connect(side_of(pos), side_of(end)))
            else:
                raise MoveInapplicable("lifted path ends at the wrong vertex", self.w)
        return tuple(out)


def _check_partition(W, X1, X2):
    X1, X2 = set(X1), set(X2)
    inter = X1 & X2
    if len(inter) != 1:
        raise MoveInapplicable(f"sides must meet in exactly one direction, got {sorted(inter)}")
    (x,) = inter
    if X1 | X2 != set(W.vertices):
        raise MoveInapplicable("sides do not cover the local Whitehead graph")
    if len(X1) < 2 or len(X2) < 2:
        raise MoveInapplicable("both sides must be nontrivial")
    for a, b in W.edges:
        if not ({a, b} <= X1 or {a, b} <= X2):
            raise MoveInapplicable(f"Whitehead edge {a}-{b} crosses the partition", direction=a)
    return x


@dataclass
class SplitResult:
    f: GraphSelfMap
    E1: str  # oriented to end at the common terminal vertex
    E2: str
    w1: object
    w2: object
    fixed: bool
    sigma: tuple  # side permutation when w' is fixed

    @property
    def nielsen(self):
        period = 1 if self.sigma == (1, 2) else 2
        L = self.f.graph.length(self.E1)
        return _attach_endpoints(NielsenPath((self.E1,), (self.E2,), period, 0, 0, L), self.f.graph)

    def undo(self):
        """Inverse move: a fold when E1 and E2 have equal images (always the
        case when w' was not fixed), otherwise a Nielsen collapse."""
        if self.fixed and self.f.image(self.E1) != self.f.image(self.E2):
            return nielsen_collapse(self.f, (self.E1, self.E2))
        return fold(self.f, self.E1, self.E2)


def tt_split_data(f, w, X1, X2):
    """Inverse of a Nielsen collapse or fold at vertex ``w``.

    ``X1`` and ``X2`` are sets of directions at ``w`` covering the local
    Whitehead graph and meeting in a single cut direction ``x``.
    """
    g = f.graph
    W = local_whitehead_graph(f, w)
    x = _check_partition(W, X1, X2)
    X1, X2 = set(X1), set(X2)
    dg = {d: f.D(d) for d in g.tokens}
    sides = {1: X1, 2: X2}

    def containing(img):
        for i in (1, 2):
            if img <= sides[i]:
                return i
        return None

    # hypothesis (2)
    vside = {}
    for v in g.vertices:
        if v != w and f.vertex_map[v] == w:
            img = {dg[d] for d in g.directions(v)}
            i = containing(img)
            if i is None:
                raise MoveInapplicable(
                    f"Dg(W({v})) = {sorted(img)} lies in neither side", vertex=v)
            vside[v] = i
    fixed = f.vertex_map[w] == w
    sigma = (1, 2)
    if fixed:
        if dg[x] != x:
            raise MoveInapplicable(f"Dg does not fix the cut direction {x}", w, x)
        s = []
        for i in (1, 2):
            j = containing({dg[d] for d in sides[i]})
            if j is None:
                raise MoveInapplicable(f"Dg does not map side {i} into a side", w)
            s.append(j)
        sigma = tuple(s)
    X = base(x)
    w1 = w
    w2 = fresh_label(f"{w}_", set(g.vertices))
    sp = _Splitter(g, w, X1, X2, x, (w1, w2))
    E1n = X
    E2n = fresh_label(f"{X}_", set(g.edges))
    other = g.term(x)
    if other == w:
        other = sp.end_vertex(inv(x))
    edges, lengths = {}, {}
    for lab in g.edges:
        if lab == X:
            continue
        edges[lab] = sp.reattach(lab)
        lengths[lab] = g.lengths[lab]
    for i, name in ((1, E1n), (2, E2n)):
        edges[name] = (sp.vert(i), other) if not x.startswith("~") else (other, sp.vert(i))
        lengths[name] = g.lengths[X]
    xtok = {i: (name if not x.startswith("~") else "~" + name) for i, name in ((1, E1n), (2, E2n))}
    xpaths = {x: {i: (xtok[i],) for i in (1, 2)}, inv(x): {i: (inv(xtok[i]),) for i in (1, 2)}}
    vertices = [v for v in g.vertices] + [w2]
    tmp = MarkedGraph(vertices, edges, lengths, {}, w1)
    newbase = w1 if g.base == w else g.base
    marking = {k: tighten_tokens(sp.lift(tmp, loop, newbase, newbase, xpaths, connectors=True))
               for k, loop in g.marking.items()}
    h = MarkedGraph(vertices, edges, lengths, marking, newbase)
    # vertex images
    vm = {}
    for v in g.vertices:
        if v == w:
            continue
        t = f.vertex_map[v]
        vm[v] = sp.vert(vside[v]) if t == w else t
    if fixed:
        vm[w1], vm[w2] = sp.vert(sigma[0]), sp.vert(sigma[1])
    else:
        vm[w1] = vm[w2] = f.vertex_map[w]
    em = {}
    for lab in h.edges:
        old = X if lab in (E1n, E2n) else lab
        em[lab] = sp.lift(h, f.edge_map[old], vm[h.init(lab)], vm[h.term(lab)], xpaths)
    out = GraphSelfMap(h, vm, em)
    h.validate(strict_valence=False)
    E1, E2 = xtok[1], xtok[2]
    return SplitResult(out, E1, E2, w1, w2, fixed, sigma)


def tt_split(f, w, X1, X2):
    return tt_split_data(f, w, X1, X2).f


@dataclass
class MetricSplit:
    """Marked graph obtained by splitting vertex ``y`` (no self-map)."""

    graph: MarkedGraph
    source: GraphSelfMap
    y: object
    y1: object
    y2: object
    r: object
    pieces: tuple  # (D1, D2, D3)
    direction: str  # the shared direction d at y
    sides: dict
    local: dict  # vertex -> WhiteheadGraph of H

    def Dh(self, d):
        """Direction in G under the natural map H -> G."""
        D1, D2, D3 = self.pieces
        if d in (D1, D2):
            return self.direction
        if d == "~" + D3:
            return inv(self.direction)
        return d

    def to_json(self):
        return {
            "graph": self.graph.to_json(),
            "split_vertex": self.y,
            "new_vertices": [self.y1, self.y2, self.r],
            "pieces": list(self.pieces),
            "local_whitehead": {str(v): W.to_json() for v, W in self.local.items()},
        }


def metric_split(f, y, X1, X2, eps):
    """Split vertex ``y`` of the marked graph of ``f`` along a cut direction.

    An initial segment of length ``eps`` of the shared direction's edge is
    doubled into D1 (at y1) and D2 (at y2), both ending at a new vertex r,
    and the rest becomes D3.
    """
    g = f.graph
    W = local_whitehead_graph(f, y)
    d = _check_partition(W, X1, X2)
    L = g.length(d)
    if not (0 < eps < L):
        raise ValueError(f"split length {eps} must lie strictly between 0 and {format_length(L)}")
    taken_v = set(g.vertices)
    y1 = f"{y}1" if f"{y}1" not in taken_v else fresh_label(f"{y}_", taken_v)
    taken_v.add(y1)
    y2 = f"{y}2" if f"{y}2" not in taken_v else fresh_label(f"{y}_", taken_v)
    taken_v.add(y2)
    r = "r" if "r" not in taken_v else fresh_label("r", taken_v)
    sp = _Splitter(g, y, X1, X2, d, (y1, y2))
    X = base(d)
    taken = set(g.edges) - {X}
    names = []
    for k in (1, 2, 3):
        n = f"{X}{k}" if f"{X}{k}" not in taken else fresh_label(f"{X}_", taken)
        taken.add(n)
        names.append(n)
    D1, D2, D3 = names
    far = g.term(d)
    if far == y:
        far = sp.end_vertex(inv(d))
    edges, lengths = {}, {}
    for lab in g.edges:
        if lab != X:
            edges[lab] = sp.reattach(lab)
            lengths[lab] = g.lengths[lab]
    edges[D1], edges[D2], edges[D3] = (y1, r), (y2, r), (r, far)
    lengths[D1] = lengths[D2] = eps
    lengths[D3] = L - eps
    xpaths = {d: {1: (D1, D3), 2: (D2, D3)}, inv(d): {1: ("~" + D3, "~" + D1), 2: ("~" + D3, "~" + D2)}}
    vertices = [v for v in g.vertices if v != y] + [y1, y2, r]
    tmp = MarkedGraph(vertices, edges, lengths, {}, y1)
    newbase = y1 if g.base == y else g.base
    marking = {k: tighten_tokens(sp.lift(tmp, loop, newbase, newbase, xpaths, connectors=True))
               for k, loop in g.marking.items()}
    H = MarkedGraph(vertices, edges, lengths, marking, newbase)
    H.validate(strict_valence=False)
    # local Whitehead graphs of H
    levels = turn_levels(f)
    local = {}
    ren = {1: {d: D1}, 2: {d: D2}}
    for i, yi in ((1, y1), (2, y2)):
        dirs = H.directions(yi)
        es = frozenset(turn(ren[i].get(a, a), ren[i].get(b, b)) for a, b in W.edges
                       if {a, b} <= sp.X[i])
        local[yi] = WhiteheadGraph(tuple(dirs), es, yi)
    used = [i for i in (1, 2) if any(d in e for e in W.edges if set(e) <= sp.X[i])]
    local[r] = WhiteheadGraph(tuple(H.directions(r)), frozenset(turn("~" + (D1, D2)[i - 1], D3) for i in used), r)
    for v in g.vertices:
        if v != y:
            local[v] = local_whitehead_graph(f, v, levels=levels)
    return MetricSplit(H, f, y, y1, y2, r, (D1, D2, D3), d, {1: frozenset(X1), 2: frozenset(X2)}, local)


@dataclass
class ObstructionReport:
    stable_sets: dict  # split vertex -> set of directions at y
    required: dict  # vertex -> required set
    contained: dict  # vertex -> list of split vertices whose stable set contains it
    obstruction: bool

    def to_json(self):
        return {
            "stable_sets": {str(k): sorted(v) for k, v in self.stable_sets.items()},
            "required_sets": {str(k): sorted(v) for k, v in self.required.items()},
            "contained_in": {str(k): [str(x) for x in v] for k, v in self.contained.items()},
            "verdict": "obstruction present" if self.obstruction else "no obstruction",
        }


def obstruction_report(split):
    """Check that each direction-image set of a vertex mapping to the split
    vertex lands inside the stable set of one of the two new vertices."""
    f = split.source
    g = f.graph
    H = split.graph
    gs = gates(f)
    n = len(gs.dg)

    def settle(d):
        for _ in range(n):
            d = gs.dg[d]
        return d

    stable = {}
    for yi in (split.y1, split.y2):
        s = {split.Dh(a) for a in H.directions(yi)}
        stable[yi] = frozenset(settle(a) for a in s if gs.is_periodic(a))
    required, contained = {}, {}
    for u in g.vertices:
        if u == split.y or f.vertex_map[u] != split.y:
            continue
        req = frozenset(settle(gs.dg[a]) for a in g.directions(u))
        required[u] = req
        contained[u] = [yi for yi, s in stable.items() if req <= s]
    bad = any(not c for c in contained.values())
    return ObstructionReport(stable, required, contained, bad)


# ---------------------------------------------------------------------------
# gate excess and the finest decomposition driver


def gate_excess(f, principal=None, gs=None, lam=None):
    """Gate excess (directions minus gates) at the counted vertices."""
    gs = gs or gates(f)
    if principal is None:
        principal = principal_vertices(f, inps=find_inps(f, 1, _lam(f, lam)), gs=gs)
    out = {}
    for v in f.graph.vertices:
        k = gs.num_gates(v)
        if v in principal or k >= 3:
            out[v] = len(f.graph.directions(v)) - k
    return out


def _local_excess(f, gs, v):
    return len(f.graph.directions(v)) - gs.num_gates(v)


def _dg_pair(f, gs, v):
    dirs = sorted(f.graph.directions(v))
    for i, a in enumerate(dirs):
        for b in dirs[i + 1:]:
            if gs.dg[a] == gs.dg[b]:
                return a, b
    return None


def reduce_gate_excess(f, lam=None, max_steps=200, record=None):
    """Subdivide and fold pairs identified by Dg until the excess is zero.

    Each fold identifies the initial segments of two directions that map
    onto the first edge of their common image, which keeps the metric affine
    and leaves a new vertex with no excess.
    """
    lam = _lam(f, lam)
    if not f.is_affine(lam):
        raise PreconditionError("map does not carry its affine eigen-metric")
    if not is_train_track(f):
        raise PreconditionError("map is not a train track map")
    for _ in range(max_steps):
        gs = gates(f)
        principal = principal_vertices(f, inps=find_inps(f, 1, lam), gs=gs)
        ex = gate_excess(f, principal, gs)
        total = sum(ex.values())
        if total == 0:
            return f
        pair = None
        for v in sorted((v for v in principal if ex.get(v, 0) > 0), key=str):
            pair = _dg_pair(f, gs, v)
            if pair:
                break
        if pair is None:
            for w in sorted((v for v, e in ex.items() if e > 0), key=str):
                orbit = [w]
                while len(orbit) <= len(f.graph.vertices):
                    nxt = f.vertex_map[orbit[-1]]
                    if _local_excess(f, gs, nxt) == 0:
                        break
                    orbit.append(nxt)
                pair = _dg_pair(f, gs, orbit[-1])
                if pair:
                    break
        if pair is None:
            raise ArithmeticError("positive gate excess but no pair identified by Dg")
        d1, d2 = pair
        first = f.image(d1)[0]
        s = f.graph.length(first) / lam
        s = min(s, f.graph.length(d1), f.graph.length(d2))
        f_new = partial_fold(f, d1, d2, s, lam)
        if record is not None:
            record.append(FoldMove("partial_fold", {"vertex": f.graph.init(d1), "d1": d1, "d2": d2, "length": s}))
        gs2 = gates(f_new)
        ex2 = gate_excess(f_new, principal_vertices(f_new, inps=find_inps(f_new, 1, lam), gs=gs2), gs2)
        if sum(ex2.values()) >= total:
            raise ArithmeticError("gate excess did not decrease")
        f = f_new
    raise ArithmeticError(f"gate excess not eliminated in {max_steps} folds")


def _cut_partition(W, x):
    G = W.nx()
    G.remove_node(x)
    import networkx as nx

    comps = sorted((sorted(c) for c in nx.connected_components(G)), key=lambda c: c[0])
    X1 = set(comps[0]) | {x}
    X2 = set().union(*comps[1:]) | {x}
    return X1, X2


def _first_hit(f, v, w):
    x, k = v, 0
    for _ in range(len(f.graph.vertices) + 1):
        if x == w and k > 0:
            return k
        x = f.vertex_map[x]
        k += 1
    return None


def _dg_power(f, d, k):
    for _ in range(k):
        d = f.D(d)
    return d


def finest_decomposition(f, lam=None, max_steps=None, record=None):
    """Split along cut vertices of local stable Whitehead graphs until none remain.

    Gate excess is removed first.  While some principal vertex w has a cut
    vertex x in W(w), take the partition X1 (component of W - x holding the
    least direction, plus x) and X2 (the rest).  If a preimage vertex v of w
    has Dg^i(W(v)) meeting both sides, the least such v outside the image of
    that set is split by an inverse fold along the pulled-back partition;
    otherwise w itself is split by an inverse Nielsen collapse.
    """
    lam = _lam(f, lam)
    f = reduce_gate_excess(f, lam, record=record)
    f, _ = realize_inps(f, find_inps(f, 1, lam), lam)
    r = len(f.graph.marking)
    cap = max_steps if max_steps is not None else 20 * r
    history = []
    for _ in range(cap):
        gs = gates(f)
        inps = find_inps(f, 1, lam)
        principal = principal_vertices(f, inps=inps, gs=gs)
        history.append(len(principal))
        levels = turn_levels(f)
        target = None
        for w in sorted(principal, key=str):
            W = local_whitehead_graph(f, w, levels=levels)
            cuts = W.cut_vertices()
            if cuts:
                target = (w, W, cuts[0])
                break
        if target is None:
            return f
        w, W, x = target
        X1, X2 = _cut_partition(W, x)
        bad = {}
        for v in f.graph.vertices:
            if v == w:
                continue
            i = _first_hit(f, v, w)
            if i is None:
                continue
            img = {_dg_power(f, d, i) for d in f.graph.directions(v)}
            if not (img <= X1 or img <= X2):
                bad[v] = i
        if not bad:
            if record is not None:
                record.append(FoldMove("tt_split", {"vertex": w, "X1": sorted(X1), "X2": sorted(X2), "cut": x}))
            f = tt_split(f, w, X1, X2)
            continue
        images = {f.vertex_map[u] for u in bad}
        v = min((v for v in bad if v not in images), key=str)
        i = bad[v]
        P1 = {d for d in f.graph.directions(v) if _dg_power(f, d, i) in X1}
        P2 = {d for d in f.graph.directions(v) if _dg_power(f, d, i) in X2}
        if record is not None:
            record.append(FoldMove("tt_split", {"vertex": v, "X1": sorted(P1), "X2": sorted(P2)}))
        f = tt_split(f, v, P1, P2)
    raise ArithmeticError(f"finest decomposition exceeded {cap} steps; principal counts {history}")


# ---------------------------------------------------------------------------
# Stallings factorization of edge isometries


@dataclass
class GraphFold:
    """A fold of a marked graph together with its quotient map."""

    source: MarkedGraph
    subdivided: MarkedGraph
    target: MarkedGraph
    d1: str
    d2: str
    length: object
    relabel: dict  # source label -> pieces in ``subdivided``
    pe: dict  # subdivided label -> token path in target
    pv: dict  # subdivided vertex -> target vertex

    @property
    def push(self):
        return {lab: _push(self.pe, self.relabel[lab]) for lab in self.source.edges}

    def as_map(self):
        vm = {v: self.pv[v] for v in self.source.vertices}
        return GraphMap(self.source, self.target, vm, self.push, check=False)


def fold_graph(g, d1, d2, s):
    """Identify the initial segments of length s of directions d1, d2 of g."""
    _check_fold_args(g, d1, d2, s)
    pts = {}
    for d in (d1, d2):
        if s < g.length(d):
            t = s if not d.startswith("~") else g.length(d) - s
            pts.setdefault(base(d), []).append(t)
    if pts:
        h, relabel, _ = subdivide_many(g, pts)
    else:
        h, relabel = g, {lab: (lab,) for lab in g.edges}
    seg1 = sub_path(h, relabel_path((d1,), relabel), 0, s)
    seg2 = sub_path(h, relabel_path((d2,), relabel), 0, s)
    h2, pe, pv = identify_paths(h, seg1, seg2)
    return GraphFold(g, h, h2, d1, d2, s, relabel, pe, pv)


@dataclass
class FoldSequence:
    source: MarkedGraph
    target: MarkedGraph
    moves: list  # FoldMove
    folds: list  # GraphFold
    final: GraphMap  # immersion from the last graph onto the target
    complete: bool = True

    def __len__(self):
        return len(self.moves)

    @property
    def graphs(self):
        return [self.source] + [fd.target for fd in self.folds]

    def compose(self, i=0, j=None):
        """Composite fold map from graph i to graph j (default: the last)."""
        j = len(self.folds) if j is None else j
        m = None
        for fd in self.folds[i:j]:
            m = fd.as_map() if m is None else fd.as_map().compose(m)
        return m

    def recompose(self):
        """The immersion composed with all folds, tightened."""
        m = self.compose()
        return self.final if m is None else self.final.compose(m)

    def to_json(self):
        return {
            "source": self.source.to_json(),
            "target": self.target.to_json(),
            "moves": [mv.to_json() for mv in self.moves],
            "final_map": {
                "vertex_images": {str(k): v for k, v in self.final.vertex_map.items()},
                "edge_images": {k: list(v) for k, v in self.final.edge_map.items()},
            },
            "complete": self.complete,
        }

    @classmethod
    def from_json(cls, doc):
        """Replay a serialized sequence, rebuilding every intermediate graph."""
        src = MarkedGraph.from_json(doc["source"])
        tgt = MarkedGraph.from_json(doc["target"])
        fld = src.field() or tgt.field()
        g = src
        folds, moves = [], []
        for mv in doc["moves"]:
            s = parse_length(mv["length"], fld)
            fd = fold_graph(g, mv["d1"], mv["d2"], s)
            folds.append(fd)
            moves.append(FoldMove(mv["kind"], {k: v for k, v in mv.items() if k != "kind"}))
            g = fd.target
        fm = doc["final_map"]
        final = GraphMap(g, tgt, fm["vertex_images"], {k: tuple(v) for k, v in fm["edge_images"].items()})
        return cls(src, tgt, moves, folds, final, doc.get("complete", True))


def _check_edge_isometry(h):
    G, H = h.source, h.target
    for lab, img in h.edge_map.items():
        if not img or tighten_tokens(img) != img:
            raise PreconditionError(f"image of {lab} is not an immersed path")
        if H.path_length(img) != G.lengths[lab]:
            raise PreconditionError(f"image of {lab} does not have the length of {lab}")
    if h.vertex_map.get(G.base) == H.base:
        for x, loop in G.marking.items():
            if x in H.marking and tighten_tokens(h.raw_image(loop)) != H.marking[x]:
                raise PreconditionError(f"map does not carry the marking loop {x}")


def _first_fold(cur):
    g = cur.source
    for v in g.vertices:
        dirs = g.directions(v)
        for i, a in enumerate(dirs):
            for b in dirs[i + 1:]:
                if cur.image(a)[0] == cur.image(b)[0]:
                    return v, a, b
    return None


def stallings_factorize(h, check=True):
    """Factor an edge isometry into folds followed by an immersion.

    At each step the first vertex (in vertex order) having two directions
    whose images start with the same edge is folded along the longest common
    initial segment of the two images.
    """
    if check:
        _check_edge_isometry(h)
    G, H = h.source, h.target
    moves, folds = [], []
    cur = GraphMap(G, H, h.vertex_map, h.edge_map, check=False)
    while True:
        hit = _first_fold(cur)
        if hit is None:
            return FoldSequence(G, H, moves, folds, cur, True)
        v, a, b = hit
        g = cur.source
        ia, ib = cur.image(a), cur.image(b)
        k = 0
        while k < len(ia) and k < len(ib) and ia[k] == ib[k]:
            k += 1
        s = H.path_length(ia[:k])
        if base(a) == base(b):
            s = min(s, g.length(a) / 2)
        fd = fold_graph(g, a, b, s)
        sub = fd.subdivided
        em_sub, vm_sub = {}, dict(cur.vertex_map)
        for lab in g.edges:
            img, off = cur.edge_map[lab], 0
            for pc in fd.relabel[lab]:
                L = sub.lengths[pc]
                em_sub[pc] = sub_path(H, img, off, off + L)
                off = off + L
                vm_sub[sub.edges[pc][1]] = H.term(em_sub[pc][-1])
        em = {lab: em_sub[lab] for lab in fd.target.edges}
        vm = {fd.pv[x]: y for x, y in vm_sub.items()}
        nxt = GraphMap(fd.target, H, vm, em, check=False)
        before = cur.combinatorial_length()
        if nxt.combinatorial_length() >= before:
            raise ArithmeticError("fold did not shorten the map")
        kind = "full_fold" if s == g.length(a) and s == g.length(b) else "partial_fold"
        moves.append(FoldMove(kind, {"vertex": v, "d1": a, "d2": b, "length": s}))
        folds.append(fd)
        cur = nxt


def is_immersion(h):
    g = h.source
    for v in g.vertices:
        seen = set()
        for d in g.directions(v):
            t = h.image(d)[0]
            if t in seen:
                return False
            seen.add(t)
    return True
