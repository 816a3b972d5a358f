"""Periodic fold lines of an affine train track map.

The line passes through G_0 = G (total length 1) and G_1 = lambda^-1 G phi.
The train track map, viewed as an edge isometry G_0 -> G_1, is factored into
folds; breakpoint graphs H_0 = G_0, ..., H_n have strictly decreasing total
length and the graph at parameter t is the partial fold of the right H_j
with total length e^-t.  Translating t by log(lambda) rescales by lambda^-1
and precomposes the marking with phi.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

from .freegroup import base, compose, cyclic_reduce, invert_automorphism, parse_word
from .graph_core import GraphError, MarkedGraph, format_length, tighten_tokens
from .marked_map import GraphMap, PreconditionError, pf_eigenvalue, transition_matrix
from .moves import fold_graph, stallings_factorize


@dataclass
class FoldLineConfig:
    """Numerical knobs of fold line sampling."""

    tol: float = 1e-9
    samples: int = 100


def _float_graph(g):
    return g.replace(lengths={k: float(v) for k, v in g.lengths.items()})


def _power(phi, phi_inv, k):
    gens = list(phi)
    out = {x: (x,) for x in gens}
    step = phi if k >= 0 else phi_inv
    for _ in range(abs(k)):
        out = compose(step, out)
    return out


@dataclass
class FoldLine:
    f: object  # affine train track map on G_0
    lam: object  # exact stretch factor
    phi: dict
    phi_inverse: dict
    G0: MarkedGraph
    G1: MarkedGraph
    sequence: object  # FoldSequence of g_{1,0}
    breakpoint_lengths: list = field(default_factory=list)
    _float_cache: dict = field(default_factory=dict, repr=False)

    @property
    def period(self):
        """Parameter length of one fundamental domain, log(lambda)."""
        return math.log(float(self.lam))

    @property
    def graphs(self):
        return self.sequence.graphs

    def breakpoints(self):
        """Parameters t_j = -log Length(H_j) inside [0, log lambda]."""
        return [-math.log(float(L)) for L in self.breakpoint_lengths]

    def schedule(self):
        """(fold move, fold length) for each step of the fundamental domain."""
        return [(mv, fd.length) for mv, fd in zip(self.sequence.moves, self.sequence.folds)]

    # -- evaluation ---------------------------------------------------------
    def _remark(self, g, k, scale):
        if k == 0:
            return g.scaled(scale) if scale != 1 else g
        phik = _power(self.phi, self.phi_inverse, k)
        marking = {x: g.word_to_loop(phik[x]) for x in g.marking}
        out = g.replace(marking=marking)
        return out.scaled(scale)

    def _locate(self, ell):
        Ls = self.breakpoint_lengths
        n = len(Ls) - 1
        for j in range(n):
            if Ls[j] >= ell > Ls[j + 1]:
                return j
        return n

    def graph_at_length(self, ell, k=0, exact=True):
        """Graph on the line with total length ``ell`` times lambda^-k.

        ``ell`` must lie in (Length(H_n), 1]; exact inputs give exact
        lengths, floats give float lengths.
        """
        Ls = self.breakpoint_lengths
        if not (Ls[-1] <= ell <= Ls[0]):
            raise ValueError(f"length {ell} outside the fundamental domain")
        j = self._locate(ell)
        H = self.graphs[j]
        if not exact:
            H = self._float_cache.setdefault(j, _float_graph(H))
        u = (float(Ls[j]) - float(ell)) if not exact else Ls[j] - ell
        if u > 0:
            fd = self.sequence.folds[j]
            H = fold_graph(H, fd.d1, fd.d2, u).target
        lam = self.lam if exact else float(self.lam)
        scale = lam ** (-k) if k else 1
        return self._remark(H, k, scale)

    def evaluate(self, t):
        """Marked graph at parameter t (float lengths, total e^-t)."""
        P = self.period
        k = math.floor(t / P)
        t0 = t - k * P
        ell = math.exp(-t0)
        Lmin = float(self.breakpoint_lengths[-1])
        if ell <= Lmin:
            ell = Lmin
        if ell >= 1.0:
            ell = 1.0
        return self.graph_at_length(ell, k, exact=False)

    def evaluate_breakpoint(self, j, k=0):
        """Exact graph H_j translated by k fundamental domains."""
        return self.graph_at_length(self.breakpoint_lengths[j], k, exact=True)

    # -- connecting maps ----------------------------------------------------
    def fold_map(self, i, j):
        """Composite fold map H_i -> H_j for breakpoints i <= j."""
        if not 0 <= i <= j < len(self.graphs):
            raise ValueError("need 0 <= i <= j <= number of folds")
        if i == j:
            G = self.graphs[i]
            return GraphMap(G, G, {v: v for v in G.vertices}, {e: (e,) for e in G.edges})
        return self.sequence.compose(i, j)

    def period_map(self):
        """Immersion H_n -> G_1 composed with all folds: g_{1,0}."""
        return self.sequence.recompose()

    # -- sampling -------------------------------------------------------------
    def parse_classes(self, lines):
        gens = set(self.G0.marking)
        out = []
        for line in lines:
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            w = parse_word(text)
            bad = [t for t in w if base(t) not in gens]
            if bad:
                raise GraphError(f"unknown generator {bad[0]!r} in class {text!r}")
            if not cyclic_reduce(w):
                raise GraphError(f"class {text!r} is trivial")
            out.append(tuple(w))
        if not out:
            raise GraphError("conjugacy class list is empty")
        return out

    def sample_lengths(self, ts, classes):
        """Rows (t, class, translation length) as floats."""
        for c in classes:
            if not cyclic_reduce(tuple(c)):
                raise GraphError("trivial conjugacy class")
        rows = []
        for t in ts:
            g = self.evaluate(t)
            for c in classes:
                rows.append((t, "".join(c), float(g.translation_length(c))))
        return rows

    @staticmethod
    def to_csv(rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "class", "length"])
        for t, c, L in rows:
            w.writerow([f"{t:.12g}", c, f"{L:.15g}"])
        return buf.getvalue()

    def to_json(self):
        return {
            "lambda": float(self.lam),
            "period": self.period,
            "breakpoints": [
                {"t": t, "length": format_length(L)} for t, L in zip(self.breakpoints(), self.breakpoint_lengths)
            ],
            "folds": self.sequence.to_json(),
        }


def periodic_fold_line(f, lam=None):
    """Fold line through the graph of ``f``, periodic under phi."""
    if lam is None:
        lam = pf_eigenvalue(transition_matrix(f)).exact
    if not f.is_affine(lam):
        raise PreconditionError("map does not carry its affine eigen-metric")
    G = f.graph
    total = G.total_length()
    if total != 1:
        G = G.scaled(1 / total)
        f = f.with_graph(G)
    b = G.base
    G1 = G.scaled(1 / lam).with_marking(
        {x: tighten_tokens(f.raw_image(loop)) for x, loop in G.marking.items()}, f.vertex_map[b])
    h = GraphMap(G, G1, f.vertex_map, f.edge_map)
    seq = stallings_factorize(h)
    Ls = [g.total_length() for g in seq.graphs]
    for a, c in zip(Ls, Ls[1:]):
        if not c < a:
            raise ArithmeticError("fold did not decrease total length")
    if Ls[-1] != G1.total_length():
        raise ArithmeticError("fold sequence does not end at lambda^-1 G")
    phi = f.automorphism()
    return FoldLine(f, lam, phi, invert_automorphism(phi), G, G1, seq, Ls)
