"""Marked metric graphs, edge paths, circuits, tightening and subdivision.

Oriented edges are written as tokens: ``"A"`` runs from ``init(A)`` to
``term(A)`` and ``"~A"`` is its reversal.  Edge lengths are exact: either
``Fraction`` or elements of a number field ``Q(lambda)`` (see
:mod:`traintrack.algebra`).  A marking sends each rose generator to a tight
closed edge path at the base vertex.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from . import freegroup as fg
from .algebra import Elem, field_for, fmt_fraction
from .freegroup import base, inv, inverse

__all__ = [
    "GraphError",
    "MalformedPath",
    "MarkedGraph",
    "EdgePath",
    "Circuit",
    "tighten",
    "tighten_tokens",
    "subdivide",
    "subdivide_many",
    "circuit_length",
    "parse_length",
    "format_length",
    "fresh_label",
]


class GraphError(ValueError):
    """Structural problem with a graph or marking."""


class MalformedPath(GraphError):
    """Consecutive edges of a path do not meet."""


def fresh_label(prefix, taken, start=1):
    k = start
    while f"{prefix}{k}" in taken:
        k += 1
    return f"{prefix}{k}"


def parse_length(value, field=None):
    """Parse "p/q", an int, or a list of "p/q" coefficients in ``field``."""
    if isinstance(value, (list, tuple)):
        if field is None:
            raise GraphError("coefficient-list length without a number field")
        return field([Fraction(v) for v in value])
    if isinstance(value, (Fraction, Elem)):
        return value
    if isinstance(value, float):
        raise GraphError("lengths must be exact (use 'p/q')")
    return Fraction(value)


def format_length(x):
    if isinstance(x, Elem):
        return x.to_json()
    return fmt_fraction(x)


def is_positive(x):
    return x > 0


class MarkedGraph:
    """Finite connected metric graph with a marking from the rank-r rose.

    ``edges`` maps each label to its (initial, terminal) vertex pair; the
    reversed edge ``~label`` is implicit.  Instances are treated as immutable.
    """

    __slots__ = ("vertices", "edges", "lengths", "marking", "base", "_dirs", "_tags")

    def __init__(self, vertices, edges, lengths, marking, base_vertex=None):
        self.vertices = tuple(vertices)
        self.edges = dict(edges)
        self.lengths = {k: lengths[k] for k in self.edges}
        self.marking = {g: tuple(w) for g, w in marking.items()}
        if base_vertex is None:
            first = next((w for w in self.marking.values() if w), None)
            base_vertex = self.init(first[0]) if first else (self.vertices[0] if self.vertices else None)
        self.base = base_vertex
        self._dirs = None
        self._tags = None
        for lab in self.edges:
            if lab.startswith("~") or not lab:
                raise GraphError(f"bad edge label {lab!r}")
        vs = set(self.vertices)
        for lab, (u, w) in self.edges.items():
            if u not in vs or w not in vs:
                raise GraphError(f"edge {lab} has an endpoint outside the vertex set")
            if not is_positive(self.lengths[lab]):
                raise GraphError(f"edge {lab} must have positive length")

    # -- basic incidence ------------------------------------------------
    @property
    def rank(self):
        return len(self.edges) - len(self.vertices) + 1

    @property
    def labels(self):
        return list(self.edges)

    @property
    def tokens(self):
        return [t for lab in self.edges for t in (lab, "~" + lab)]

    def has_token(self, t):
        return base(t) in self.edges

    def init(self, t):
        try:
            u, w = self.edges[base(t)]
        except KeyError:
            raise GraphError(f"unknown edge {t!r}") from None
        return w if t.startswith("~") else u

    def term(self, t):
        return self.init(inv(t))

    def length(self, t):
        try:
            return self.lengths[base(t)]
        except KeyError:
            raise GraphError(f"unknown edge {t!r}") from None

    def directions(self, v):
        """Oriented edges with initial vertex ``v``, in edge order."""
        if self._dirs is None:
            dirs = {u: [] for u in self.vertices}
            for lab, (u, w) in self.edges.items():
                dirs[u].append(lab)
                dirs[w].append("~" + lab)
            self._dirs = {u: tuple(d) for u, d in dirs.items()}
        return self._dirs[v]

    def valence(self, v):
        return len(self.directions(v))

    def total_length(self):
        total = 0
        for x in self.lengths.values():
            total = total + x
        return total

    def max_edge_length(self):
        return max(self.lengths.values(), key=float)

    def path_length(self, tokens):
        total = 0
        for t in tokens:
            total = total + self.length(t)
        return total

    # -- paths --------------------------------------------------------------
    def check_path(self, tokens, start=None):
        tokens = tuple(tokens)
        for t in tokens:
            if not self.has_token(t):
                raise MalformedPath(f"unknown edge {t!r}")
        if start is not None and tokens and self.init(tokens[0]) != start:
            raise MalformedPath(f"path does not start at {start!r}")
        for a, b in zip(tokens, tokens[1:]):
            if self.term(a) != self.init(b):
                raise MalformedPath(f"{a} and {b} do not meet")
        return tokens

    def path(self, tokens, start=None):
        tokens = self.check_path(tokens, start)
        if start is None:
            if not tokens:
                raise MalformedPath("empty path needs a start vertex")
            start = self.init(tokens[0])
        return EdgePath(tokens, start, self.term(tokens[-1]) if tokens else start)

    def turns(self, tokens, closed=False):
        """Turns (as ordered pairs of directions) taken by an edge path."""
        out = [(inv(a), b) for a, b in zip(tokens, tokens[1:])]
        if closed and tokens:
            out.append((inv(tokens[-1]), tokens[0]))
        return out

    # -- marking ---------------------------------------------------------
    def marking_tags(self):
        """Word in the generators for each edge (inverse of the marking)."""
        if self._tags is None:
            self._tags = fg.stallings_tags(self.edges, self.base, self.marking)
        return self._tags

    def loop_to_word(self, tokens):
        """Generator word represented by a closed path at the base vertex."""
        tags = self.marking_tags()
        out = []
        for t in tokens:
            w = tags[base(t)]
            out.extend(inverse(w) if t.startswith("~") else w)
        return fg.reduce(out)

    def word_to_loop(self, word):
        out = []
        for t in word:
            loop = self.marking[base(t)]
            out.extend(inverse(loop) if t.startswith("~") else loop)
        return tighten_tokens(out)

    def circuit_of(self, word):
        return Circuit(fg.cyclic_reduce(self.word_to_loop(word)))

    def translation_length(self, word):
        """Length of the circuit representing the conjugacy class of ``word``."""
        c = fg.cyclic_reduce(self.word_to_loop(word))
        if not c:
            raise GraphError("trivial conjugacy class has no circuit")
        return self.path_length(c)

    def validate(self, strict_valence=True):
        """Check the structural invariants; raise ``GraphError`` on failure."""
        if not self.vertices:
            raise GraphError("empty graph")
        r = len(self.marking)
        if self.rank != r:
            raise GraphError(f"graph rank {self.rank} differs from marking rank {r}")
        for v in self.vertices:
            val = self.valence(v)
            if val < 2:
                raise GraphError(f"vertex {v} has valence {val} < 2")
            if strict_valence and val > 2 * r:
                raise GraphError(f"vertex {v} has valence {val} > 2r")
        if strict_valence and sum(1 for v in self.vertices if self.valence(v) >= 3) > max(2 * r - 2, 0):
            raise GraphError("too many vertices of valence >= 3")
        for g, loop in self.marking.items():
            if not loop:
                raise GraphError(f"marking loop {g} is trivial")
            self.check_path(loop, self.base)
            if self.term(loop[-1]) != self.base:
                raise GraphError(f"marking loop {g} is not closed")
            if tighten_tokens(loop) != loop:
                raise GraphError(f"marking loop {g} is not tight")
        try:
            self.marking_tags()
        except fg.NotHomotopyEquivalence as exc:
            raise GraphError(f"marking is not a homotopy equivalence: {exc}") from None
        return self

    # -- derived graphs --------------------------------------------------
    def replace(self, **kw):
        args = dict(vertices=self.vertices, edges=self.edges, lengths=self.lengths,
                    marking=self.marking, base_vertex=self.base)
        args.update(kw)
        return MarkedGraph(**args)

    def scaled(self, c):
        return self.replace(lengths={k: v * c for k, v in self.lengths.items()})

    def with_marking(self, marking, base_vertex=None):
        return self.replace(marking=marking, base_vertex=self.base if base_vertex is None else base_vertex)

    def field(self):
        for x in self.lengths.values():
            if isinstance(x, Elem):
                return x.field
        return None

    # -- serialization ---------------------------------------------------
    def to_json(self):
        doc = {
            "rank": len(self.marking),
            "vertices": list(self.vertices),
            "edges": [
                {"label": lab, "from": u, "to": w, "length": format_length(self.lengths[lab])}
                for lab, (u, w) in self.edges.items()
            ],
            "marking": {g: list(w) for g, w in self.marking.items()},
            "base": self.base,
        }
        fld = self.field()
        if fld is not None:
            doc["field"] = fld.to_json()
        return doc

    @classmethod
    def from_json(cls, doc, validate=True):
        try:
            fld = None
            if "field" in doc:
                fld = field_for(tuple(int(c) for c in doc["field"]["minpoly"]))
            vertices = [str(v) for v in doc["vertices"]]
            edges, lengths = {}, {}
            for e in doc["edges"]:
                lab = str(e["label"])
                if lab in edges:
                    raise GraphError(f"duplicate edge label {lab}")
                edges[lab] = (str(e["from"]), str(e["to"]))
                lengths[lab] = parse_length(e.get("length", "1"), fld)
            marking = {str(g): tuple(str(t) for t in w) for g, w in doc["marking"].items()}
            g = cls(vertices, edges, lengths, marking, doc.get("base"))
        except (KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
            if isinstance(exc, GraphError):
                raise
            raise GraphError(f"malformed graph document: {exc}") from None
        if "rank" in doc and int(doc["rank"]) != len(g.marking):
            raise GraphError("rank field disagrees with the marking")
        if validate:
            g.validate(strict_valence=False)
        return g

    def __eq__(self, other):
        if not isinstance(other, MarkedGraph):
            return NotImplemented
        return (
            set(self.vertices) == set(other.vertices)
            and self.edges == other.edges
            and self.lengths == other.lengths
            and self.marking == other.marking
            and self.base == other.base
        )

    def __hash__(self):
        return hash((tuple(sorted(self.edges.items())), tuple(sorted(self.marking.items()))))

    def __repr__(self):
        return f"MarkedGraph(V={len(self.vertices)}, E={len(self.edges)}, rank={len(self.marking)})"

    # -- equivalence surrogates -----------------------------------------
    def translation_vector(self, words):
        return [self.translation_length(w) for w in words]

    def unsubdivided(self):
        """Equivalent graph with valence-2 vertices (other than the base) removed."""
        g = self
        while True:
            v = next((v for v in g.vertices if v != g.base and g.valence(v) == 2
                      and len(set(map(base, g.directions(v)))) == 2), None)
            if v is None:
                return g
            d1, d2 = g.directions(v)
            # merge inv(d1) . d2 into a single edge labelled by base(d1)
            a, b = inv(d1), d2  # a ends at v, b starts at v
            new = base(a)
            edges = {k: val for k, val in g.edges.items() if k not in (base(a), base(b))}
            u, w = g.init(a), g.term(b)
            lengths = {k: g.lengths[k] for k in edges}
            edges[new] = (u, w) if not a.startswith("~") else (w, u)
            lengths[new] = g.length(a) + g.length(b)
            forward = new if not a.startswith("~") else "~" + new

            def rewrite(path, a=a, b=b, forward=forward):
                out, i = [], 0
                while i < len(path):
                    t = path[i]
                    if t == a:
                        out.append(forward)
                        i += 2
                    elif t == inv(b):
                        out.append(inv(forward))
                        i += 2
                    else:
                        out.append(t)
                        i += 1
                return tuple(out)

            marking = {x: rewrite(w) for x, w in g.marking.items()}
            g = MarkedGraph([x for x in g.vertices if x != v], edges, lengths, marking, g.base)

    def isometric_to(self, other, tol=None):
        """Search for a length-preserving combinatorial isomorphism.

        Valence-2 vertices are forgotten first.  Returns a dict from edge
        tokens of ``self`` to tokens of ``other`` or ``None``.  With ``tol``
        lengths are compared as floats.
        """
        a, b = self.unsubdivided(), other.unsubdivided()
        if len(a.edges) != len(b.edges) or len(a.vertices) != len(b.vertices):
            return None

        def same(x, y):
            if tol is None:
                return x == y
            return abs(float(x) - float(y)) <= tol

        alabs = sorted(a.edges)
        btoks = b.tokens

        def extend(i, emap, vmap):
            if i == len(alabs):
                return dict(emap)
            lab = alabs[i]
            u, w = a.edges[lab]
            used = {base(t) for t in emap.values()}
            for t in btoks:
                if base(t) in used or not same(a.lengths[lab], b.length(t)):
                    continue
                bu, bw = b.init(t), b.term(t)
                if vmap.get(u, bu) != bu or vmap.get(w, bw) != bw:
                    continue
                if (u == w) != (bu == bw):
                    continue
                inv_v = {y: x for x, y in vmap.items()}
                if inv_v.get(bu, u) != u or inv_v.get(bw, w) != w:
                    continue
                nv = dict(vmap)
                nv[u], nv[w] = bu, bw
                emap[lab] = t
                emap["~" + lab] = inv(t)
                res = extend(i + 1, emap, nv)
                if res is not None:
                    return res
                del emap[lab], emap["~" + lab]
            return None

        return extend(0, {}, {})

    def marked_isometric(self, other, words, tol=None):
        """Surrogate for marked isometry: equal translation lengths on
        ``words`` plus an isometric combinatorial isomorphism."""
        for w in words:
            x, y = self.translation_length(w), other.translation_length(w)
            if tol is None:
                if x != y:
                    return False
            elif abs(float(x) - float(y)) > tol:
                return False
        return self.isometric_to(other, tol) is not None


@dataclass(frozen=True)
class EdgePath:
    """An edge path with explicit endpoints (so trivial paths keep a vertex)."""

    tokens: tuple
    start: object
    end: object

    def __len__(self):
        return len(self.tokens)

    def reversed(self):
        return EdgePath(inverse(self.tokens), self.end, self.start)

    def __add__(self, other):
        if self.end != other.start:
            raise MalformedPath("paths do not concatenate")
        return EdgePath(self.tokens + other.tokens, self.start, other.end)

    @property
    def trivial(self):
        return not self.tokens


def tighten_tokens(tokens):
    return fg.reduce(tokens)


def tighten(path):
    """Reduced path homotopic rel endpoints.  Accepts an ``EdgePath`` or a token tuple."""
    if isinstance(path, EdgePath):
        return EdgePath(fg.reduce(path.tokens), path.start, path.end)
    return fg.reduce(tuple(path))


@dataclass(frozen=True)
class Circuit:
    """Cyclically reduced, nontrivial closed edge path (up to rotation)."""

    tokens: tuple

    def __post_init__(self):
        t = tuple(self.tokens)
        if not t:
            raise GraphError("a circuit must be nontrivial")
        if fg.cyclic_reduce(t) != t:
            raise GraphError("circuit is not cyclically reduced")
        object.__setattr__(self, "tokens", t)

    def canonical(self):
        t = self.tokens
        return min(t[i:] + t[:i] for i in range(len(t)))


def circuit_length(g, c):
    if not isinstance(c, Circuit):
        c = Circuit(tuple(c))
    g.check_path(c.tokens)
    if g.term(c.tokens[-1]) != g.init(c.tokens[0]):
        raise MalformedPath("circuit is not closed")
    return g.path_length(c.tokens)


# ---------------------------------------------------------------------------
# subdivision


def subdivide_many(g, points, vertex_names=None):
    """Subdivide edges at interior parameters.

    ``points`` maps an edge label to a collection of parameters measured from
    its initial vertex.  Returns the new graph, the relabeling (old label ->
    tuple of new positive tokens) and a dict ``(label, t) -> new vertex``.
    """
    taken = set(g.edges)
    vtaken = set(g.vertices)
    new_edges, new_lengths, relabel, newv = {}, {}, {}, {}
    vertices = list(g.vertices)
    names = dict(vertex_names or {})
    for lab, (u, w) in g.edges.items():
        ts = sorted(set(points.get(lab, ())), key=float)
        L = g.lengths[lab]
        for t in ts:
            if not (0 < t < L):
                raise GraphError(f"subdivision parameter {t} outside (0, {L}) on edge {lab}")
        if not ts:
            new_edges[lab] = (u, w)
            new_lengths[lab] = L
            relabel[lab] = (lab,)
            continue
        cuts = [0] + ts + [L]
        pieces, prev = [], u
        inner = []
        for t in ts:
            name = names.get((lab, t))
            if name is None or name in vtaken:
                name = fresh_label("v", vtaken)
            vtaken.add(name)
            vertices.append(name)
            inner.append(name)
            newv[(lab, t)] = name
        ends = [u] + inner + [w]
        for k in range(len(cuts) - 1):
            piece = fresh_label(lab + "_", taken | set(new_edges))
            taken.add(piece)
            new_edges[piece] = (ends[k], ends[k + 1])
            new_lengths[piece] = cuts[k + 1] - cuts[k]
            pieces.append(piece)
        relabel[lab] = tuple(pieces)

    def rewrite(path):
        out = []
        for t in path:
            seg = relabel[base(t)]
            out.extend(inverse(seg) if t.startswith("~") else seg)
        return tuple(out)

    marking = {x: rewrite(wd) for x, wd in g.marking.items()}
    h = MarkedGraph(vertices, new_edges, new_lengths, marking, g.base)
    return h, relabel, newv


def subdivide(g, edge, t):
    """Subdivide ``edge`` at parameter ``t`` (0 < t < length).

    Returns ``(graph, relabel)`` where ``relabel`` maps every old label to the
    tuple of new labels that replace it.  The two halves of ``edge`` are named
    ``edge1`` and ``edge2`` when those names are free.
    """
    base_lab = base(edge)
    if edge.startswith("~"):
        t = g.lengths[base_lab] - t
    L = g.lengths[base_lab]
    if not (0 < t < L):
        raise GraphError(f"subdivision parameter {t} outside (0, {L})")
    h, relabel, _ = subdivide_many(g, {base_lab: [t]})
    # prefer the readable names edge1 / edge2
    want = (base_lab + "1", base_lab + "2")
    if not (set(want) & set(g.edges)):
        rename = dict(zip(relabel[base_lab], want))
        edges = {rename.get(k, k): v for k, v in h.edges.items()}
        lengths = {rename.get(k, k): v for k, v in h.lengths.items()}

        def rw(p):
            return tuple(("~" if x.startswith("~") else "") + rename.get(base(x), base(x)) for x in p)

        h = MarkedGraph(h.vertices, edges, lengths, {x: rw(p) for x, p in h.marking.items()}, h.base)
        relabel = {k: tuple(rename.get(x, x) for x in v) for k, v in relabel.items()}
    return h, relabel


def relabel_path(path, relabel):
    out = []
    for t in path:
        seg = relabel[base(t)]
        out.extend(inverse(seg) if t.startswith("~") else seg)
    return tuple(out)

