"""Indivisible Nielsen paths of affine train track maps.

An indivisible Nielsen path (iNp) of h = g^p is a path sigma = alpha * beta^-1
with alpha, beta legal and one illegal turn, such that h_#(sigma) = sigma.
Seen from the junction vertex v the two legs A = alpha^-1 and B = beta^-1
satisfy h(A) = c A and h(B) = c B for one common path c, so both legs have
length L(c) / (Lambda - 1), Lambda = lambda^p.  The search grows whole-edge
legs from every pair of directions at v identified by Dh, using only turns of
the local Whitehead graphs (every turn of a leg is taken by an iterate), and
reads c off as the common prefix of the images once they diverge.
"""
from __future__ import annotations

from dataclasses import dataclass

from .freegroup import inv, inverse
from .graph_core import format_length, tighten_tokens
from .marked_map import (
    Point,
    PreconditionError,
    forward_closure,
    locate,
    pf_eigenvalue,
    sub_path,
    subdivide_self_map,
    transition_matrix,
)
from .train_track import direction_map, gates, is_train_track, turn, turn_levels

DEFAULT_PERIODS = (1, 2)


@dataclass(frozen=True)
class NielsenPath:
    """sigma = alpha * beta^-1, legs given as whole-edge paths.

    ``alpha`` runs towards the junction; its first ``alpha_trim`` units are not
    part of sigma (nonzero when the endpoint lies inside an edge).  Likewise
    for ``beta``.  ``length`` is the common length of the two legs.
    """

    alpha: tuple
    beta: tuple
    period: int
    alpha_trim: object = 0
    beta_trim: object = 0
    length: object = None

    @property
    def sigma(self):
        return self.alpha + inverse(self.beta)

    @property
    def junction_turn(self):
        return turn(inv(self.alpha[-1]), inv(self.beta[-1]))

    def endpoints_on(self, g):
        x = locate(g, self.alpha, self.alpha_trim)
        y = locate(g, self.beta, self.beta_trim)
        return x, y

    def endpoints(self):
        return self._endpoints

    def reversed(self):
        return NielsenPath(self.beta, self.alpha, self.period, self.beta_trim, self.alpha_trim, self.length)

    def is_single_edge_pair(self):
        return len(self.alpha) == 1 and len(self.beta) == 1 and self.alpha_trim == 0 and self.beta_trim == 0

    def to_json(self):
        return {
            "alpha": list(self.alpha),
            "beta": list(self.beta),
            "period": self.period,
            "alpha_trim": format_length(self.alpha_trim),
            "beta_trim": format_length(self.beta_trim),
            "leg_length": format_length(self.length) if self.length is not None else None,
        }


def _attach_endpoints(np_, g):
    x, y = np_.endpoints_on(g)
    object.__setattr__(np_, "_endpoints", (x, y))
    return np_


def _expansion(f, lam=None):
    if lam is None:
        lam = pf_eigenvalue(transition_matrix(f)).exact
    if not f.is_affine(lam):
        raise PreconditionError("map does not have the affine eigen-metric (use affine_map first)")
    if not is_train_track(f):
        raise PreconditionError("map is not a train track map")
    if not lam > 1:
        raise PreconditionError("Nielsen path search needs an expanding map (lambda > 1)")
    return lam


def leg_bound(g, Lam):
    """Upper bound for the leg length of an iNp of an affine map with stretch Lam."""
    LG = g.total_length()
    mx = g.max_edge_length()
    b1 = LG + mx
    b2 = Lam * LG / (Lam - 1)
    return b1 if b1 >= b2 else b2


def _search(f, h, Lam, v, d1, d2, levels, bound):
    g = f.graph
    found = []

    def extensions(X):
        u = g.term(X[-1])
        back = inv(X[-1])
        for e in g.directions(u):
            if e != back and turn(back, e) in levels:
                yield X + (e,)

    stack = [((d1,), (d2,))]
    seen = set()
    while stack:
        A, B = stack.pop()
        if (A, B) in seen:
            continue
        seen.add((A, B))
        P, Q = h.raw_image(A), h.raw_image(B)
        j = 0
        while j < len(P) and j < len(Q) and P[j] == Q[j]:
            j += 1
        if j == 0:
            continue
        LA, LB = g.path_length(A), g.path_length(B)
        if j == len(P) or j == len(Q):
            grow_a = j == len(P)
            grow_b = j == len(Q)
            nas = list(extensions(A)) if grow_a and LA < bound else ([A] if not grow_a else [])
            nbs = list(extensions(B)) if grow_b and LB < bound else ([B] if not grow_b else [])
            for na in nas:
                for nb in nbs:
                    stack.append((na, nb))
            continue
        c = P[:j]
        ell = g.path_length(c) / (Lam - 1)
        if ell > bound:
            continue
        ok = True
        need = []
        for X, R in ((A, P[j:]), (B, Q[j:])):
            off = 0
            for i, t in enumerate(X):
                if not off < ell:
                    break
                if i >= len(R):
                    break
                if R[i] != t:
                    ok = False
                    break
                off = off + g.length(t)
            if not ok:
                break
            need.append(g.path_length(X) < ell)
        if not ok:
            continue
        if not any(need):
            found.append(_make_path(g, A, B, ell))
            continue
        nas = list(extensions(A)) if need[0] else [A]
        nbs = list(extensions(B)) if need[1] else [B]
        for na in nas:
            for nb in nbs:
                stack.append((na, nb))
    return found


def _minimal_leg(g, X, ell):
    out, off = [], 0
    for t in X:
        if not off < ell:
            break
        out.append(t)
        off = off + g.length(t)
    return tuple(out), off - ell


def _make_path(g, A, B, ell, period=1):
    A, ta = _minimal_leg(g, A, ell)
    B, tb = _minimal_leg(g, B, ell)
    return NielsenPath(inverse(A), inverse(B), period, ta, tb, ell)


def find_inps(f, period=1, lam=None, verify=True):
    """All indivisible Nielsen paths sigma with g^period_#(sigma) = sigma.

    Each path is reported once (orientation chosen so the junction directions
    are in increasing order) with its least period.
    """
    lam = _expansion(f, lam)
    g = f.graph
    results = []
    for p in range(1, period + 1):
        if period % p:
            continue
        h = f.iterate(p)
        Lam = lam ** p
        dh = direction_map(h)
        levels = turn_levels(f)
        bound = leg_bound(g, Lam)
        for v in g.vertices:
            dirs = sorted(g.directions(v))
            for i, d1 in enumerate(dirs):
                for d2 in dirs[i + 1:]:
                    if dh[d1] != dh[d2]:
                        continue
                    for np_ in _search(f, h, Lam, v, d1, d2, levels, bound):
                        np_ = NielsenPath(np_.alpha, np_.beta, p, np_.alpha_trim, np_.beta_trim, np_.length)
                        key = (np_.alpha, np_.beta, np_.alpha_trim, np_.beta_trim)
                        if any((r.alpha, r.beta, r.alpha_trim, r.beta_trim) == key for r in results):
                            continue
                        results.append(_attach_endpoints(np_, g))
    if verify:
        for np_ in results:
            if not verify_inp(f, np_, lam):
                raise ArithmeticError(f"search produced a path that is not Nielsen: {np_}")
    results.sort(key=lambda r: (r.period, r.alpha, r.beta))
    return results


def find_all_inps(f, periods=DEFAULT_PERIODS, lam=None):
    out = []
    for p in periods:
        for np_ in find_inps(f, p, lam):
            key = (np_.alpha, np_.beta, np_.alpha_trim, np_.beta_trim)
            if not any((r.alpha, r.beta, r.alpha_trim, r.beta_trim) == key for r in out):
                out.append(np_)
    return out


# ---------------------------------------------------------------------------
# realization: subdivide so that endpoints are vertices


def realize_inps(f, inps, lam):
    """Subdivide at the (orbits of the) interior endpoints.

    Returns the subdivided map and the same Nielsen paths rewritten with
    vertex endpoints and no trims.
    """
    g = f.graph
    pts = set()
    for np_ in inps:
        for pt in np_.endpoints_on(g):
            if not pt.is_vertex:
                pts.add(pt)
    pts = forward_closure(f, pts, lam)
    if not pts:
        return f, [_attach_endpoints(NielsenPath(n.alpha, n.beta, n.period, 0, 0, n.length), g) for n in inps]
    f2, relabel, _ = subdivide_self_map(f, pts, lam)
    from .graph_core import relabel_path

    h = f2.graph
    out = []
    for np_ in inps:
        a = relabel_path(np_.alpha, relabel)
        b = relabel_path(np_.beta, relabel)
        a = sub_path(h, a, np_.alpha_trim, h.path_length(a))
        b = sub_path(h, b, np_.beta_trim, h.path_length(b))
        out.append(_attach_endpoints(NielsenPath(a, b, np_.period, 0, 0, np_.length), h))
    return f2, out


def verify_inp(f, np_, lam):
    """Check g^period_#(sigma) = sigma on a subdivision with vertex endpoints."""
    f2, (n2,) = realize_inps(f, [np_], lam)
    h = f2.iterate(np_.period)
    sigma = n2.sigma
    if tighten_tokens(sigma) != sigma:
        return False
    return h.image_path(sigma) == sigma


# ---------------------------------------------------------------------------
# pre-Nielsen paths and Nielsen classes


def is_periodic_nielsen(f, sigma, max_period=2):
    sigma = tuple(sigma)
    cur = sigma
    for p in range(1, max_period + 1):
        cur = f.image_path(cur)
        if cur == sigma:
            return p
    return None


def is_pre_nielsen(f, sigma, max_iter=10, max_period=2):
    """Least k <= max_iter with g^k_#(sigma) a periodic Nielsen path, else None."""
    cur = tighten_tokens(tuple(sigma))
    if not cur:
        return None
    for k in range(max_iter + 1):
        if is_periodic_nielsen(f, cur, max_period):
            return k
        cur = f.image_path(cur)
        if not cur:
            return None
    return None


@dataclass
class NielsenClassPartition:
    classes: list  # list of sorted lists of fixed points (vertex names or Points)
    witnesses: list  # NielsenPath objects joining members

    def to_json(self):
        return {"classes": [[str(x) for x in c] for c in self.classes],
                "witnesses": [w.to_json() for w in self.witnesses]}


def nielsen_classes(f, lam=None, inps=None):
    """Fixed vertices (and fixed iNp endpoints) grouped by Nielsen paths."""
    from .train_track import is_rotationless, principal_vertices

    lam = _expansion(f, lam)
    if inps is None:
        inps = find_inps(f, 1, lam)
    if not is_rotationless(f, principal_vertices(f, inps=inps)):
        raise PreconditionError("Nielsen classes need a rotationless map")
    elems = [v for v in f.graph.vertices if f.vertex_map[v] == v]
    parent = {}

    def key(pt):
        return pt.vertex if pt.is_vertex else pt

    def find(x):
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for v in elems:
        find(v)
    used = []
    for np_ in inps:
        if np_.period != 1:
            continue
        x, y = (key(p) for p in np_.endpoints())
        rx, ry = find(x), find(y)
        parent[rx] = ry
        used.append(np_)
    groups = {}
    for x in parent:
        groups.setdefault(find(x), []).append(x)
    classes = sorted((sorted(c, key=str) for c in groups.values()), key=lambda c: str(c[0]))
    return NielsenClassPartition(classes, used)
