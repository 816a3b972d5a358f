"""Ideal Whitehead graph: stable Whitehead graphs glued along Nielsen paths."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import networkx as nx

from .marked_map import PreconditionError, matrix_irreducible, pf_eigenvalue, transition_matrix
from .nielsen import find_all_inps, find_inps, realize_inps
from .train_track import (
    WhiteheadGraph,
    gates,
    is_rotationless,
    is_train_track,
    local_whitehead_graph,
    periodic_directions,
    principal_vertices,
    turn,
    turn_levels,
)


def component_index(n_vertices):
    return Fraction(1) - Fraction(n_vertices, 2)


@dataclass
class IdealWhiteheadGraph:
    components: list  # WhiteheadGraph per component; vertices are "v:d" strings
    indices: list
    principal: list  # principal vertices of the realized map
    identifications: int
    local_pieces: dict  # component number -> list of (vertex, WhiteheadGraph)
    names: dict = None  # (vertex, direction) -> vertex id in the glued graph

    def nx(self):
        G = nx.Graph()
        for c in self.components:
            G.add_nodes_from(c.vertices)
            G.add_edges_from(c.edges)
        return G

    @property
    def num_vertices(self):
        return sum(len(c.vertices) for c in self.components)

    @property
    def num_edges(self):
        return sum(len(c.edges) for c in self.components)

    def to_json(self, rank=None):
        doc = {
            "components": [
                {"vertices": list(c.vertices), "edges": [list(e) for e in sorted(c.edges)],
                 "index": f"{i.numerator}/{i.denominator}"}
                for c, i in zip(self.components, self.indices)
            ],
        }
        total = sum(self.indices, Fraction(0))
        doc["total_index"] = f"{total.numerator}/{total.denominator}"
        if rank is not None:
            doc["inequality_ok"] = total >= 1 - rank
        return doc

    def to_dot(self):
        lines = ["graph W {"]
        for k, c in enumerate(self.components):
            lines.append(f"  subgraph cluster_{k} {{")
            lines.append(f'    label="index {self.indices[k]}";')
            for v in c.vertices:
                lines.append(f'    "{v}";')
            for a, b in sorted(c.edges):
                lines.append(f'    "{a}" -- "{b}";')
            lines.append("  }")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _lam(f, lam):
    if lam is None:
        lam = pf_eigenvalue(transition_matrix(f)).exact
    return lam


def rotationless_power(f, lam=None, max_power=64):
    """Least k such that g^k is rotationless, with the iterate and lambda^k.

    Candidates are multiples of the lcm of the vertex and direction periods,
    which is where every periodic vertex and direction becomes fixed.
    Without ``lam`` the map is first given its eigen-metric.
    """
    if lam is None:
        from .marked_map import affine_map

        f, pf = affine_map(f)
        lam = pf.exact
    gs = gates(f)
    periods = {gs.orbit[d][1] for d in gs.dg if gs.is_periodic(d)}
    periods |= {f.vertex_period(v) for v in f.graph.vertices if f.is_periodic_vertex(v)}
    k0 = 1
    for p in periods:
        k0 = k0 * p // math.gcd(k0, p)
    k = k0
    while k <= max_power:
        h = f.iterate(k)
        Lam = lam ** k
        hg = gates(h)
        if is_rotationless(h, principal_vertices(h, inps=find_inps(h, 1, Lam), gs=hg), hg):
            return k, h, Lam
        k += k0
    raise PreconditionError(f"no rotationless iterate up to power {max_power}")


def ideal_whitehead_graph(f, lam=None, inps=None):
    """Assemble W(g) from the stable Whitehead graphs of principal vertices.

    Interior iNp endpoints are first made into vertices.  Vertex ids of the
    result are ``"vertex:direction"`` strings for a representative of each
    identification class.
    """
    if not is_train_track(f):
        raise PreconditionError("map is not a train track map")
    lam = _lam(f, lam)
    if inps is None:
        inps = find_inps(f, 1, lam)
    f2, inps2 = realize_inps(f, inps, lam)
    gs = gates(f2)
    principal = principal_vertices(f2, inps=inps2, gs=gs)
    if not is_rotationless(f2, principal, gs):
        raise PreconditionError("ideal Whitehead graph needs a rotationless map (see rotationless_power)")
    levels = turn_levels(f2)
    parent = {}

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    sw = {}
    for v in sorted(principal):
        W = local_whitehead_graph(f2, v, levels=levels)
        S = W.induced(periodic_directions(f2, v, gs))
        sw[v] = S
        for d in S.vertices:
            find((v, d))
    idents = 0
    g2 = f2.graph
    for np_ in inps2:
        x = g2.init(np_.alpha[0])
        y = g2.init(np_.beta[0])
        a, b = (x, np_.alpha[0]), (y, np_.beta[0])
        if a not in parent or b not in parent:
            raise ArithmeticError("Nielsen path leaves a principal vertex in a nonperiodic direction")
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            idents += 1

    def name(node):
        r = find(node)
        return f"{r[0]}:{r[1]}"

    G = nx.Graph()
    for v, S in sw.items():
        for d in S.vertices:
            G.add_node(name((v, d)))
        for d1, d2 in S.edges:
            G.add_edge(name((v, d1)), name((v, d2)))
    comps = []
    for nodes in sorted(nx.connected_components(G), key=lambda c: sorted(c)):
        H = G.subgraph(nodes)
        comps.append(WhiteheadGraph(tuple(sorted(nodes)), frozenset(turn(a, b) for a, b in H.edges())))
    pieces = {}
    for k, c in enumerate(comps):
        cs = set(c.vertices)
        pieces[k] = [(v, S) for v, S in sw.items() if S.vertices and name((v, S.vertices[0])) in cs]
    indices = [component_index(len(c.vertices)) for c in comps]
    names = {(v, d): name((v, d)) for v, S in sw.items() for d in S.vertices}
    return IdealWhiteheadGraph(comps, indices, sorted(principal), idents, pieces, names)


@dataclass
class IndexReport:
    index_type: list
    total: Fraction
    bound: int
    inequality_ok: bool
    strict: bool
    anomalous: list
    label: str

    def to_json(self):
        fmt = lambda q: f"{q.numerator}/{q.denominator}"  # noqa: E731
        return {
            "index_type": [fmt(q) for q in self.index_type],
            "total": fmt(self.total),
            "bound": self.bound,
            "inequality_ok": self.inequality_ok,
            "strict": self.strict,
            "anomalous_components": self.anomalous,
            "label": self.label,
        }


def index_type(f, lam=None, iwg=None):
    iwg = iwg or ideal_whitehead_graph(f, lam)
    r = len(f.graph.marking)
    idx = sorted(iwg.indices)
    total = sum(idx, Fraction(0))
    bound = 1 - r
    anomalous = [k for k, c in enumerate(iwg.components) if len(c.vertices) <= 2]
    label = "parageometric-candidate" if total == bound else ""
    return IndexReport(idx, total, bound, total >= bound, total > bound, anomalous, label)


def cut_point_decomposition(w):
    """Blocks of a connected graph: maximal 2-connected pieces or bridges."""
    G = w.nx() if isinstance(w, WhiteheadGraph) else nx.Graph(w)
    if len(G) == 0 or not nx.is_connected(G):
        raise PreconditionError("cut point decomposition needs a connected graph")
    if G.number_of_edges() == 0:
        return [WhiteheadGraph(tuple(G.nodes()), frozenset())]
    blocks = []
    for edges in nx.biconnected_component_edges(G):
        es = frozenset(turn(a, b) for a, b in edges)
        vs = sorted({x for e in es for x in e})
        blocks.append(WhiteheadGraph(tuple(vs), es))
    blocks.sort(key=lambda b: (b.vertices, sorted(b.edges)))
    return blocks


def isomorphic(w1, w2):
    """Graph isomorphism of two Whitehead graphs (or ideal graphs)."""
    a = w1.nx() if hasattr(w1, "nx") else w1
    b = w2.nx() if hasattr(w2, "nx") else w2
    return nx.is_isomorphic(a, b)


def decomposition_matches(iwg):
    """True when the cut-point blocks of all components are exactly the
    connected pieces of the local stable graphs glued into them.

    A stable graph need not be connected, and its parts may land in
    different components, so the comparison runs over the whole graph.
    """
    blocks = set()
    for comp in iwg.components:
        if comp.edges:
            blocks |= {b.edges for b in cut_point_decomposition(comp)}
    local = set()
    for pieces in iwg.local_pieces.values():
        for v, S in pieces:
            G = S.nx()
            for part in nx.connected_components(G):
                es = frozenset(turn(iwg.names[(v, a)], iwg.names[(v, b)])
                               for a, b in S.edges if a in part)
                if es:
                    local.add(es)
    return local == blocks


@dataclass
class EvidenceReport:
    no_periodic_inp: bool
    expansion_factors_differ: object
    verdict: str
    lam: float
    lam_inverse: object

    def to_json(self):
        return {
            "no_periodic_inp": self.no_periodic_inp,
            "expansion_factors_differ": self.expansion_factors_differ,
            "verdict": self.verdict,
            "lambda": self.lam,
            "lambda_inverse": self.lam_inverse,
        }


def nongeometric_evidence(f, f_inverse=None):
    """Sufficient conditions for nongeometricity that the map itself exhibits."""
    M = transition_matrix(f)
    pf = pf_eigenvalue(M)
    no_inp = False
    if matrix_irreducible(M) and pf.exact > 1 and is_train_track(f):
        from .marked_map import affine_map

        h, _ = affine_map(f)
        no_inp = not find_all_inps(h, lam=pf.exact)
    differ = None
    lam_inv = None
    if f_inverse is not None:
        pfi = pf_eigenvalue(transition_matrix(f_inverse))
        lam_inv = pfi.lam
        # equal largest roots force equal minimal polynomials
        differ = pfi.minpoly != pf.minpoly
    verdict = "nongeometric" if (no_inp or differ) else "inconclusive"
    return EvidenceReport(no_inp, differ, verdict, pf.lam, lam_inv)
