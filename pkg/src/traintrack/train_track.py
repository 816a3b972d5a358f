"""Turns, gates, train track verification and local/stable Whitehead graphs."""
from __future__ import annotations

from dataclasses import dataclass, field

import networkx as nx

from .freegroup import base, inv
from .marked_map import Point, PreconditionError


def turn(d1, d2):
    """Unordered turn as a sorted tuple (degenerate turns have d1 == d2)."""
    return (d1, d2) if d1 <= d2 else (d2, d1)


def direction_map(f):
    return {d: f.D(d) for d in f.graph.tokens}


def _orbit_data(dg, d):
    """(preperiod, period) of d under the finite map dg."""
    seen = {}
    x, k = d, 0
    while x not in seen:
        seen[x] = k
        x = dg[x]
        k += 1
    return seen[x], k - seen[x]


@dataclass
class GateStructure:
    """Gates of a self-map at every vertex, with the direction-map orbit table."""

    dg: dict
    gates: dict  # vertex -> list of frozensets
    orbit: dict  # direction -> (preperiod, period)
    _gate_of: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for gs in self.gates.values():
            for gate in gs:
                for d in gate:
                    self._gate_of[d] = gate

    def gate_of(self, d):
        return self._gate_of[d]

    def same_gate(self, d1, d2):
        return self._gate_of[d1] is self._gate_of[d2]

    def is_legal(self, d1, d2):
        """A turn is legal when its directions lie in distinct gates."""
        return d1 != d2 and not self.same_gate(d1, d2)

    def num_gates(self, v):
        return len(self.gates[v])

    def is_periodic(self, d):
        return self.orbit[d][0] == 0

    def to_json(self):
        return {v: [sorted(g) for g in gs] for v, gs in self.gates.items()}


def gates(f):
    g = f.graph
    dg = direction_map(f)
    n = len(dg)
    orbit = {d: _orbit_data(dg, d) for d in dg}
    # the kernel of dg^k is increasing in k and stabilizes by k = n
    eventual = {}
    for d in dg:
        x = d
        for _ in range(n):
            x = dg[x]
        eventual[d] = x
    table = {}
    for v in g.vertices:
        classes = {}
        for d in g.directions(v):
            classes.setdefault(eventual[d], []).append(d)
        table[v] = sorted((frozenset(c) for c in classes.values()), key=lambda s: sorted(s))
    return GateStructure(dg, table, orbit)


def illegal_turns(f, gs=None):
    gs = gs or gates(f)
    out = set()
    for v, classes in gs.gates.items():
        for gate in classes:
            ds = sorted(gate)
            for i in range(len(ds)):
                for j in range(i + 1, len(ds)):
                    out.add(turn(ds[i], ds[j]))
    return out


@dataclass
class TrainTrackVerdict:
    verdict: bool
    witness: tuple = None  # (edge, index of turn in image, turn)

    def __bool__(self):
        return self.verdict

    def to_json(self):
        w = None
        if self.witness is not None:
            e, i, t = self.witness
            w = {"edge": e, "index": i, "turn": list(t)}
        return {"verdict": self.verdict, "witness": w}


def is_train_track(f, gs=None):
    """No edge image takes an illegal turn (equivalent to every g^k being an
    immersion on edges)."""
    gs = gs or gates(f)
    for lab, img in f.edge_map.items():
        for i, (a, b) in enumerate(zip(img, img[1:])):
            d1, d2 = inv(a), b
            if not gs.is_legal(d1, d2):
                return TrainTrackVerdict(False, (lab, i, turn(d1, d2)))
    return TrainTrackVerdict(True)


# ---------------------------------------------------------------------------
# Whitehead graphs


@dataclass(frozen=True)
class WhiteheadGraph:
    """Simple graph on directions; edges are sorted direction pairs."""

    vertices: tuple
    edges: frozenset
    basepoint: object = None

    def nx(self):
        G = nx.Graph()
        G.add_nodes_from(self.vertices)
        G.add_edges_from(self.edges)
        return G

    def degrees(self):
        G = self.nx()
        return sorted((d for _, d in G.degree()), reverse=True)

    def is_connected(self):
        return len(self.vertices) > 0 and nx.is_connected(self.nx())

    def cut_vertices(self):
        G = self.nx()
        if len(G) < 3:
            return []
        return sorted(nx.articulation_points(G))

    def induced(self, keep):
        keep = [v for v in self.vertices if v in set(keep)]
        ks = set(keep)
        return WhiteheadGraph(tuple(keep), frozenset(e for e in self.edges if e[0] in ks and e[1] in ks), self.basepoint)

    def to_dot(self, name="W"):
        lines = [f"graph {_dot_id(name)} {{"]
        for v in self.vertices:
            lines.append(f"  {_dot_id(v)};")
        for a, b in sorted(self.edges):
            lines.append(f"  {_dot_id(a)} -- {_dot_id(b)};")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return {"vertices": list(self.vertices), "edges": [list(e) for e in sorted(self.edges)],
                "basepoint": self.basepoint}


def _dot_id(x):
    return '"' + str(x).replace('"', '\\"') + '"'


def turn_levels(f, max_iterate=None, dg=None):
    """Each taken turn with the least k such that some g^k(E) takes it."""
    dg = dg or direction_map(f)
    level = {}
    frontier = []
    for img in f.edge_map.values():
        for a, b in zip(img, img[1:]):
            t = turn(inv(a), b)
            if t not in level:
                level[t] = 1
                frontier.append(t)
    k = 1
    while frontier and (max_iterate is None or k < max_iterate):
        k += 1
        nxt = []
        for d1, d2 in frontier:
            t = turn(dg[d1], dg[d2])
            if t[0] != t[1] and t not in level:
                level[t] = k
                nxt.append(t)
        frontier = nxt
    return level


def taken_turns(f, max_iterate=None):
    return set(turn_levels(f, max_iterate))


def _require_train_track(f):
    if not is_train_track(f):
        raise PreconditionError("map is not a train track map")


def local_whitehead_graph(f, x, max_iterate=None, levels=None):
    """W(x): directions at x joined when some g^k(E) takes the turn."""
    _require_train_track(f)
    g = f.graph
    if isinstance(x, Point) and not x.is_vertex:
        lab = x.edge
        crossed = any(base(t) == lab for img in f.edge_map.values() for t in img)
        verts = (lab, "~" + lab)
        edges = frozenset({turn(*verts)}) if crossed else frozenset()
        return WhiteheadGraph(verts, edges, x)
    if isinstance(x, Point):
        x = x.vertex
    levels = levels if levels is not None else turn_levels(f, max_iterate)
    dirs = g.directions(x)
    ds = set(dirs)
    edges = frozenset(t for t, k in levels.items() if t[0] in ds and t[1] in ds
                      and (max_iterate is None or k <= max_iterate))
    return WhiteheadGraph(tuple(dirs), edges, x)


def periodic_directions(f, v, gs=None):
    gs = gs or gates(f)
    return [d for d in f.graph.directions(v) if gs.is_periodic(d)]


def stable_whitehead_graph(f, v, gs=None, levels=None):
    """SW(v): restriction of W(v) to the periodic directions."""
    if not f.is_periodic_vertex(v):
        raise PreconditionError(f"vertex {v} is not periodic")
    gs = gs or gates(f)
    W = local_whitehead_graph(f, v, levels=levels)
    return W.induced(periodic_directions(f, v, gs))


def principal_vertices(f, inps=None, periods=(1, 2), gs=None):
    """Periodic vertices with >= 3 periodic directions or an iNp endpoint.

    ``inps`` may be supplied (a list of ``NielsenPath``); otherwise they are
    searched for the given periods.  Endpoints in edge interiors are not
    vertices and are ignored here; realize them first to make them vertices.
    """
    gs = gs or gates(f)
    out = set()
    for v in f.graph.vertices:
        if f.is_periodic_vertex(v) and len(periodic_directions(f, v, gs)) >= 3:
            out.add(v)
    if inps is None:
        from .marked_map import affine_map
        from .nielsen import find_inps

        inps = []
        fa, pf = affine_map(f)
        # iNps have legs stretched by lambda > 1; without expansion there are none to add
        if pf.exact > 1:
            for p in periods:
                inps.extend(find_inps(fa, p, pf.exact))
    for np_ in inps:
        for pt in np_.endpoints():
            if pt.is_vertex:
                out.add(pt.vertex)
    return out


def is_rotationless(f, principal=None, gs=None):
    gs = gs or gates(f)
    principal = principal if principal is not None else principal_vertices(f, gs=gs)
    for v in principal:
        if f.vertex_map[v] != v:
            return False
        for d in periodic_directions(f, v, gs):
            if gs.dg[d] != d:
                return False
    return True
