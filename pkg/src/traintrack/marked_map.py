"""Graph maps and self-maps representing outer automorphisms.

A ``GraphMap`` sends vertices to vertices and each oriented edge to a tight
edge path.  ``GraphSelfMap`` adds iteration, the derivative on directions,
transition matrices and Perron-Frobenius data.  Expansion factors are
certified by Sturm sequences on the exact characteristic polynomial; the
eigen-metric is solved exactly in ``Q(lambda)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import networkx as nx
import numpy as np

from . import algebra
from . import freegroup as fg
from .algebra import Elem, as_exact
from .freegroup import base, inv, inverse
from .graph_core import GraphError, MarkedGraph, MalformedPath, tighten_tokens


class PreconditionError(ValueError):
    """An operation was called on input that violates its precondition."""


class DegenerateInput(ValueError):
    """Input has no meaningful answer (e.g. the zero matrix)."""


# ---------------------------------------------------------------------------
# points on graphs


@dataclass(frozen=True)
class Point:
    """A vertex (``edge is None``) or an interior point of a positive edge."""

    vertex: object = None
    edge: str = None
    offset: object = None

    @property
    def is_vertex(self):
        return self.edge is None

    def __repr__(self):
        if self.is_vertex:
            return f"Point({self.vertex!r})"
        return f"Point({self.edge}@{float(self.offset):.6g})"


def make_point(g, token, s):
    """Point at distance ``s`` along oriented edge ``token``."""
    L = g.length(token)
    if s == 0:
        return Point(vertex=g.init(token))
    if s == L:
        return Point(vertex=g.term(token))
    if not (0 < s < L):
        raise GraphError(f"parameter {s} outside edge {token}")
    if token.startswith("~"):
        return Point(edge=base(token), offset=L - s)
    return Point(edge=token, offset=s)


def locate(g, path, s):
    """Point at distance ``s`` along an edge path (0 <= s <= length)."""
    acc = 0
    if s < 0:
        raise GraphError("negative parameter")
    for t in path:
        L = g.length(t)
        if s < acc + L:
            return make_point(g, t, s - acc)
        acc = acc + L
    if s == acc and path:
        return Point(vertex=g.term(path[-1]))
    raise GraphError("parameter beyond the end of the path")


def sub_path(g, path, s1, s2):
    """Tokens of ``path`` between distances s1 <= s2, which must be token boundaries."""
    if s1 == s2:
        return ()
    acc, start = 0, None
    for i, t in enumerate(path):
        if acc == s1:
            start = i
        acc = acc + g.length(t)
        if start is not None and acc == s2:
            return tuple(path[start:i + 1])
    raise GraphError("sub-path endpoints are not vertices of the path")


# ---------------------------------------------------------------------------
# maps


class GraphMap:
    """Map of graphs sending vertices to vertices and edges to tight paths."""

    def __init__(self, source, target, vertex_map, edge_map, check=True):
        self.source = source
        self.target = target
        self.vertex_map = dict(vertex_map)
        self.edge_map = {lab: tuple(edge_map[lab]) for lab in source.edges}
        if check:
            self.validate()

    def validate(self):
        s, t = self.source, self.target
        for v in s.vertices:
            if self.vertex_map.get(v) not in set(t.vertices):
                raise GraphError(f"vertex {v} has no image")
        for lab, img in self.edge_map.items():
            if not img:
                raise GraphError(f"edge {lab} has trivial image")
            t.check_path(img)
            if t.init(img[0]) != self.vertex_map[s.init(lab)]:
                raise MalformedPath(f"image of {lab} starts at the wrong vertex")
            if t.term(img[-1]) != self.vertex_map[s.term(lab)]:
                raise MalformedPath(f"image of {lab} ends at the wrong vertex")
            if tighten_tokens(img) != img:
                raise GraphError(f"image of {lab} is not tight")
        return self

    def image(self, token):
        img = self.edge_map[base(token)]
        return inverse(img) if token.startswith("~") else img

    def raw_image(self, tokens):
        out = []
        for t in tokens:
            out.extend(self.image(t))
        return tuple(out)

    def image_path(self, tokens):
        """g_#: tightened image of an edge path."""
        return tighten_tokens(self.raw_image(tokens))

    def D(self, direction):
        """Derivative: first oriented edge of the image of a direction."""
        return self.image(direction)[0]

    def compose(self, inner):
        """The map ``self o inner``."""
        if inner.target is not self.source and inner.target != self.source:
            raise GraphError("maps do not compose")
        vm = {v: self.vertex_map[w] for v, w in inner.vertex_map.items()}
        em = {lab: self.image_path(p) for lab, p in inner.edge_map.items()}
        return GraphMap(inner.source, self.target, vm, em, check=False)

    def combinatorial_length(self):
        return sum(len(p) for p in self.edge_map.values())

    def is_edge_isometry(self):
        for lab, img in self.edge_map.items():
            if self.target.path_length(img) != self.source.lengths[lab]:
                return False
            if tighten_tokens(img) != img:
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, GraphMap):
            return NotImplemented
        return self.vertex_map == other.vertex_map and self.edge_map == other.edge_map

    def __hash__(self):
        return hash(tuple(sorted(self.edge_map.items())))


class GraphSelfMap(GraphMap):
    """Topological representative g: G -> G of an outer automorphism."""

    def __init__(self, graph, vertex_map, edge_map, check=True):
        super().__init__(graph, graph, vertex_map, edge_map, check=check)

    @property
    def graph(self):
        return self.source

    def __repr__(self):
        body = ", ".join(f"{k}->{''.join(v)}" for k, v in self.edge_map.items())
        return f"GraphSelfMap({body})"

    @classmethod
    def from_images(cls, graph, edge_map, vertex_map=None, check=True):
        """Build a self-map; vertex images are inferred from edge images when omitted."""
        vm = dict(vertex_map or {})
        for lab, img in edge_map.items():
            u, w = graph.edges[lab]
            img = tuple(img)
            if not img:
                raise GraphError(f"edge {lab} has trivial image")
            for v, x in ((u, graph.init(img[0])), (w, graph.term(img[-1]))):
                if vm.setdefault(v, x) != x:
                    raise MalformedPath(f"edge images disagree on the image of vertex {v}")
        return cls(graph, vm, edge_map, check=check)

    def with_graph(self, graph):
        return GraphSelfMap(graph, self.vertex_map, self.edge_map, check=False)

    # -- iteration ---------------------------------------------------------
    def iterate(self, k):
        if k < 1:
            raise ValueError("k must be >= 1")
        result = self
        for _ in range(k - 1):
            result = GraphSelfMap(self.graph,
                                  {v: self.vertex_map[w] for v, w in result.vertex_map.items()},
                                  {lab: self.image_path(p) for lab, p in result.edge_map.items()},
                                  check=False)
        return result

    def vertex_orbit(self, v):
        seen, out = set(), []
        while v not in seen:
            seen.add(v)
            out.append(v)
            v = self.vertex_map[v]
        return out

    def is_periodic_vertex(self, v):
        w = self.vertex_map[v]
        for _ in range(len(self.graph.vertices)):
            if w == v:
                return True
            w = self.vertex_map[w]
        return False

    def vertex_period(self, v):
        w = self.vertex_map[v]
        for k in range(1, len(self.graph.vertices) + 1):
            if w == v:
                return k
            w = self.vertex_map[w]
        return None

    # -- matrices ----------------------------------------------------------
    def transition_matrix(self):
        return transition_matrix(self)

    # -- marking ------------------------------------------------------------
    def automorphism(self):
        """Generator images of a representative automorphism of F_r.

        The loop ``g(rho(x))`` based at ``g(base)`` is conjugated back to the
        base vertex along a fixed tree path, so the result is well defined up
        to an inner automorphism.
        """
        g = self.graph
        b = g.base
        gamma = tree_path(g, b, self.vertex_map[b])
        out = {}
        for x, loop in g.marking.items():
            img = self.raw_image(loop)
            out[x] = g.loop_to_word(tighten_tokens(gamma + img + inverse(gamma)))
        return out

    def abelianization(self):
        gens = list(self.graph.marking)
        phi = self.automorphism()
        cols = [fg.abelianize(phi[x], gens) for x in gens]
        return [[cols[j][i] for j in range(len(gens))] for i in range(len(gens))]

    # -- metric -----------------------------------------------------------
    def stretch_residual(self, lam):
        """max_e |Length(g(e)) - lam Length(e)| as a float."""
        g = self.graph
        return max(abs(float(g.path_length(img) - lam * g.lengths[lab])) for lab, img in self.edge_map.items())

    def is_affine(self, lam):
        g = self.graph
        return all(g.path_length(img) == lam * g.lengths[lab] for lab, img in self.edge_map.items())

    def point_image(self, point, lam):
        """Image of a point under the affine map stretching edges by ``lam``."""
        if point.is_vertex:
            return Point(vertex=self.vertex_map[point.vertex])
        return locate(self.graph, self.edge_map[point.edge], lam * point.offset)

    # -- serialization ----------------------------------------------------
    def to_json(self):
        doc = self.graph.to_json()
        doc["map"] = {
            "vertex_images": dict(self.vertex_map),
            "edge_images": {k: list(v) for k, v in self.edge_map.items()},
        }
        return doc

    @classmethod
    def from_json(cls, doc, validate=True):
        g = MarkedGraph.from_json(doc, validate=validate)
        try:
            m = doc["map"]
            em = {str(k): tuple(str(t) for t in v) for k, v in m["edge_images"].items()}
            vm = {str(k): str(v) for k, v in m.get("vertex_images", {}).items()}
        except (KeyError, TypeError, AttributeError) as exc:
            raise GraphError(f"malformed map document: {exc}") from None
        if set(em) != set(g.edges):
            raise GraphError("edge_images must list every edge exactly once")
        for img in em.values():
            g.check_path(img)
        return cls.from_images(g, em, vm)


def tree_path(g, u, v):
    """Edge path from u to v inside a BFS spanning tree (deterministic)."""
    if u == v:
        return ()
    prev = {u: None}
    queue = [u]
    while queue:
        x = queue.pop(0)
        for d in g.directions(x):
            y = g.term(d)
            if y not in prev:
                prev[y] = d
                queue.append(y)
    if v not in prev:
        raise GraphError("graph is disconnected")
    path = []
    while v != u:
        d = prev[v]
        path.append(d)
        v = g.init(d)
    return tuple(reversed(path))


def iterate(f, k):
    return f.iterate(k)


# ---------------------------------------------------------------------------
# transition matrices and PF data


@dataclass(frozen=True)
class TransitionMatrix:
    """entry[i][j] = times the image of edge labels[j] crosses labels[i]."""

    labels: tuple
    rows: tuple

    def __getitem__(self, key):
        i, j = key
        return self.rows[self.labels.index(i)][self.labels.index(j)]

    def column(self, lab):
        j = self.labels.index(lab)
        return tuple(r[j] for r in self.rows)

    def array(self):
        return np.array(self.rows, dtype=float)

    def power(self, k):
        n = len(self.labels)
        acc = [[int(i == j) for j in range(n)] for i in range(n)]
        for _ in range(k):
            acc = [[sum(acc[i][l] * self.rows[l][j] for l in range(n)) for j in range(n)] for i in range(n)]
        return TransitionMatrix(self.labels, tuple(tuple(r) for r in acc))

    def to_csv(self):
        lines = ["," + ",".join(self.labels)]
        for lab, row in zip(self.labels, self.rows):
            lines.append(lab + "," + ",".join(str(x) for x in row))
        return "\n".join(lines) + "\n"


def transition_matrix(f):
    labels = tuple(f.graph.edges)
    idx = {lab: i for i, lab in enumerate(labels)}
    n = len(labels)
    rows = [[0] * n for _ in range(n)]
    for j, lab in enumerate(labels):
        for t in f.edge_map[lab]:
            rows[idx[base(t)]][j] += 1
    return TransitionMatrix(labels, tuple(tuple(r) for r in rows))


def _rows(M):
    if isinstance(M, TransitionMatrix):
        return [list(r) for r in M.rows]
    return [[int(x) for x in r] for r in M]


def crossing_digraph(M):
    rows = _rows(M)
    n = len(rows)
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    G.add_edges_from((j, i) for i in range(n) for j in range(n) if rows[i][j] > 0)
    return G


def matrix_irreducible(M):
    rows = _rows(M)
    if len(rows) == 1:
        return rows[0][0] > 0
    return nx.is_strongly_connected(crossing_digraph(rows))


def matrix_primitive(M):
    """Positivity of M^k for k = (n-1)^2 + 1 (Wielandt's bound)."""
    rows = _rows(M)
    n = len(rows)
    if not matrix_irreducible(rows):
        return False
    B = np.array([[1 if x > 0 else 0 for x in r] for r in rows], dtype=np.int64)
    P = np.eye(n, dtype=np.int64)
    k = (n - 1) ** 2 + 1
    base_ = B.copy()
    while k:
        if k & 1:
            P = np.minimum(P @ base_, 1)
        base_ = np.minimum(base_ @ base_, 1)
        k >>= 1
    return bool(P.min() > 0)


@dataclass
class PFData:
    """Perron-Frobenius data of a nonnegative integer matrix."""

    lam: float
    interval: tuple
    charpoly: tuple
    minpoly: tuple
    power_estimate: float
    left: np.ndarray
    right: np.ndarray
    irreducible: bool
    warning: str = ""
    _field: object = field(default=None, repr=False)

    @property
    def field(self):
        if self._field is None:
            self._field = algebra.field_for(self.minpoly)
        return self._field

    @property
    def exact(self):
        """lambda as an element of Q(lambda)."""
        return self.field.gen

    def certify_greater(self, bound):
        """Exact check lambda > bound."""
        return self.exact > Fraction(bound)

    def certify_less(self, bound):
        return self.exact < Fraction(bound)


def pf_eigenvalue(M, tol=1e-12):
    rows = _rows(M)
    n = len(rows)
    if n == 0 or all(x == 0 for r in rows for x in r):
        raise DegenerateInput("zero matrix has no Perron-Frobenius eigenvalue")
    cp = algebra.charpoly(rows)
    tolf = Fraction(tol).limit_denominator(10**18) if not isinstance(tol, Fraction) else tol
    if tolf <= 0:
        raise ValueError("tolerance must be positive")
    lo, hi = algebra.largest_real_root(cp, tolf)
    lam = float((lo + hi) / 2)
    A = np.array(rows, dtype=float)
    irreducible = matrix_irreducible(rows)
    warning = "" if irreducible else "matrix is reducible: value is the spectral radius"
    # power iteration on A + I (primitive whenever A is irreducible)
    B = A + np.eye(n)
    v = np.ones(n)
    est = 0.0
    for _ in range(5000):
        w = B @ v
        nrm = np.linalg.norm(w)
        w = w / nrm
        new = float(w @ (B @ w)) - 1.0
        if np.allclose(w, v, rtol=0, atol=1e-15):
            v, est = w, new
            break
        v, est = w, new
    right = np.abs(v) / np.abs(v).sum()
    u = np.ones(n)
    for _ in range(5000):
        w = B.T @ u
        w = w / np.linalg.norm(w)
        if np.allclose(w, u, rtol=0, atol=1e-15):
            u = w
            break
        u = w
    left = np.abs(u) / np.abs(u).sum()
    spectral = float(max(abs(np.linalg.eigvals(A))))
    if abs(spectral - lam) > max(1e-6, 10 * float(tolf)) * max(1.0, lam):
        raise ArithmeticError(f"certified root {lam} disagrees with numerical spectral radius {spectral}")
    if not irreducible:
        warnings.warn(warning, stacklevel=2)
    minpoly = algebra.pf_minimal_polynomial(cp)
    return PFData(lam, (lo, hi), cp, minpoly, est, left, right, irreducible, warning)


# ---------------------------------------------------------------------------
# affine metric


def _nullvector(rows, F):
    """A nonzero vector in the kernel of a square matrix over a field."""
    A = [list(r) for r in rows]
    n = len(A)
    pivots = []
    r = 0
    for c in range(n):
        p = next((i for i in range(r, n) if A[i][c] != 0), None)
        if p is None:
            continue
        A[r], A[p] = A[p], A[r]
        piv = A[r][c].inverse() if isinstance(A[r][c], Elem) else 1 / Fraction(A[r][c])
        A[r] = [x * piv for x in A[r]]
        for i in range(n):
            if i != r and A[i][c] != 0:
                fac = A[i][c]
                A[i] = [a - fac * b for a, b in zip(A[i], A[r])]
        pivots.append(c)
        r += 1
        if r == n:
            break
    free = [c for c in range(n) if c not in pivots]
    if not free:
        raise ArithmeticError("matrix is nonsingular; no eigenvector")
    fc = free[0]
    vec = [F(0)] * n
    vec[fc] = F(1)
    for i, c in enumerate(pivots):
        vec[c] = -A[i][fc]
    return vec


def eigen_lengths(f, pf=None):
    """Exact positive lengths with Length(g(e)) = lambda Length(e), total 1."""
    M = transition_matrix(f)
    pf = pf or pf_eigenvalue(M)
    F = pf.field
    lam = F.gen
    n = len(M.labels)
    rows = [[F(M.rows[j][i]) - (lam if i == j else 0) for j in range(n)] for i in range(n)]
    vec = _nullvector(rows, F)
    total = F(0)
    for x in vec:
        total = total + x
    vec = [x / total for x in vec]
    if not all(x > 0 for x in vec):
        raise PreconditionError("PF eigenvector is not positive (matrix not irreducible)")
    return {lab: as_exact(x) for lab, x in zip(M.labels, vec)}, pf


def affine_normalize(f, tol=1e-9):
    """Marked graph of ``f`` with the normalized eigen-metric (Length(G)=1)."""
    M = transition_matrix(f)
    if not matrix_irreducible(M):
        raise PreconditionError("transition matrix is not irreducible")
    lengths, pf = eigen_lengths(f)
    g = f.graph.replace(lengths=lengths)
    residual = GraphSelfMap(g, f.vertex_map, f.edge_map, check=False).stretch_residual(pf.exact)
    if residual > tol:
        raise ArithmeticError(f"eigen-residual {residual} exceeds {tol}")
    return g


def affine_map(f):
    """Return (f with eigen-metric, PFData)."""
    lengths, pf = eigen_lengths(f)
    g = f.graph.replace(lengths=lengths)
    return GraphSelfMap(g, f.vertex_map, f.edge_map, check=False), pf


# ---------------------------------------------------------------------------
# irreducibility


@dataclass
class IrreducibilityReport:
    matrix_irreducible: bool
    matrix_primitive: bool
    cyclotomic_free: bool
    cyclotomic_factors: list
    sufficient: bool
    note: str

    def to_json(self):
        return {
            "matrix_irreducible": self.matrix_irreducible,
            "matrix_primitive": self.matrix_primitive,
            "cyclotomic_free": self.cyclotomic_free,
            "cyclotomic_factors": list(self.cyclotomic_factors),
            "fully_irreducible_certified": self.sufficient,
            "note": self.note,
        }


def irreducibility_report(f):
    M = transition_matrix(f)
    irr = matrix_irreducible(M)
    prim = matrix_primitive(M) if irr else False
    ab = f.abelianization()
    r = len(ab)
    cp = algebra.charpoly(ab)
    cyc = algebra.cyclotomic_factors(cp, r)
    free = not cyc
    if r == 3:
        note = "rank 3: primitive matrix and no cyclotomic factor suffice"
        sufficient = prim and free
    else:
        note = "necessary conditions only (rank != 3)"
        sufficient = False
    return IrreducibilityReport(irr, prim, free, cyc, sufficient, note)


# ---------------------------------------------------------------------------
# subdividing self-maps


def forward_closure(f, points, lam):
    """Add forward images of interior points until the set is invariant."""
    out = set()
    todo = [p for p in points if not p.is_vertex]
    while todo:
        p = todo.pop()
        if p in out:
            continue
        out.add(p)
        q = f.point_image(p, lam)
        if not q.is_vertex and q not in out:
            todo.append(q)
    return out


def subdivide_self_map(f, points, lam, vertex_names=None):
    """Subdivide at a set of interior ``Point``s whose images are vertices or
    points of the set.  Returns (new map, relabel, point -> new vertex)."""
    from .graph_core import relabel_path, subdivide_many

    g = f.graph
    by_edge = {}
    for p in points:
        if not p.is_vertex:
            by_edge.setdefault(p.edge, set()).add(p.offset)
    names = {(p.edge, p.offset): n for p, n in (vertex_names or {}).items()}
    h, relabel, newv = subdivide_many(g, by_edge, names)
    point_vertex = {Point(edge=e, offset=t): v for (e, t), v in newv.items()}

    def vertex_of(pt):
        if pt.is_vertex:
            return pt.vertex
        try:
            return point_vertex[pt]
        except KeyError:
            raise GraphError(f"image point {pt} is not in the subdivision set") from None

    vm = {v: f.vertex_map[v] for v in g.vertices}
    for pt, v in point_vertex.items():
        vm[v] = vertex_of(f.point_image(pt, lam))
    em = {}
    for lab in g.edges:
        cuts = [0] + sorted(by_edge.get(lab, ()), key=float) + [g.lengths[lab]]
        img = relabel_path(f.edge_map[lab], relabel)
        for piece, s1, s2 in zip(relabel[lab], cuts, cuts[1:]):
            em[piece] = sub_path(h, img, lam * s1, lam * s2)
    return GraphSelfMap(h, vm, em, check=False), relabel, point_vertex
