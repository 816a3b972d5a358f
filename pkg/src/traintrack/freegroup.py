"""Words in free groups and Stallings folding with tag words.

A word is a tuple of tokens; a token is a generator name or ``"~"`` followed
by a generator name for its inverse.  Edge paths in graphs use the same
token convention, so the reduction routines here double as path tightening.
"""
from __future__ import annotations

from collections import defaultdict


class NotHomotopyEquivalence(ValueError):
    """Raised when a family of loops does not define a homotopy equivalence."""


def inv(token):
    return token[1:] if token.startswith("~") else "~" + token


def base(token):
    return token[1:] if token.startswith("~") else token


def inverse(word):
    return tuple(inv(t) for t in reversed(word))


def reduce(word):
    out = []
    for t in word:
        if out and out[-1] == inv(t):
            out.pop()
        else:
            out.append(t)
    return tuple(out)


def cyclic_reduce(word):
    w = reduce(word)
    i, j = 0, len(w)
    while j - i >= 2 and w[i] == inv(w[j - 1]):
        i += 1
        j -= 1
    return w[i:j]


def cyclic_conjugator(word):
    """Split a reduced word as u * core * u^-1 and return (u, core)."""
    w = reduce(word)
    core = cyclic_reduce(w)
    k = (len(w) - len(core)) // 2
    return w[:k], core


def substitute(word, images):
    """Apply the substitution token -> images[base] (inverted for ``~``)."""
    out = []
    for t in word:
        img = images[base(t)]
        out.extend(inverse(img) if t.startswith("~") else img)
    return reduce(out)


def compose(outer, inner):
    """The automorphism x -> outer(inner(x))."""
    return {x: substitute(w, outer) for x, w in inner.items()}


def parse_word(text):
    """Parse ``"a b ~c"``, ``"ab~c"`` (single letters) or ``"aBc"``-free forms.

    Space-separated tokens are taken verbatim.  Without spaces each letter is
    a generator and ``~`` inverts the following letter.
    """
    text = text.strip()
    if not text:
        return ()
    if " " in text or "," in text:
        return tuple(t for t in text.replace(",", " ").split() if t)
    out, neg = [], False
    for ch in text:
        if ch == "~":
            neg = not neg
            continue
        out.append("~" + ch if neg else ch)
        neg = False
    if neg:
        raise ValueError(f"dangling '~' in {text!r}")
    return tuple(out)


def format_word(word):
    return " ".join(word)


def abelianize(word, generators):
    idx = {g: i for i, g in enumerate(generators)}
    vec = [0] * len(generators)
    for t in word:
        vec[idx[base(t)]] += -1 if t.startswith("~") else 1
    return vec


# ---------------------------------------------------------------------------
# Stallings folding


def stallings_tags(edges, basepoint, loops):
    """Fold the wedge of ``loops`` onto a graph and read off tag words.

    ``edges`` maps a label to its (initial, terminal) vertex, ``loops`` maps
    a generator name to a closed tight edge path at ``basepoint``.  The loops
    define a map from the rose on those generators to the graph.  If it is a
    homotopy equivalence (folding yields an isomorphism onto the graph), the
    returned dict maps each edge label to a word in the generators such that
    the product of tags along any closed path at the basepoint is its
    preimage.  Otherwise ``NotHomotopyEquivalence`` is raised.
    """
    # Gamma: node -> image vertex; half-edge records (edge id, forward?)
    node_image = {0: basepoint}
    gedges = {}  # id -> [u, w, token, tag]
    next_node, next_edge = 1, 0
    for gen, loop in loops.items():
        if not loop:
            raise NotHomotopyEquivalence(f"loop for {gen} is trivial")
        prev = 0
        for k, tok in enumerate(loop):
            if k == len(loop) - 1:
                nxt = 0
            else:
                nxt = next_node
                next_node += 1
                node_image[nxt] = edges[base(tok)][1 if not tok.startswith("~") else 0]
            gedges[next_edge] = [prev, nxt, tok, (gen,) if k == 0 else ()]
            next_edge += 1
            prev = nxt

    def half_edges(node):
        out = []
        for eid, (u, w, tok, tag) in gedges.items():
            if u == node:
                out.append((eid, True, tok, w, tag))
            if w == node:
                out.append((eid, False, inv(tok), u, inverse(tag)))
        return out

    def conjugate_node(node, c):
        # half-edges entering node get tag*c, leaving node get c^-1*tag
        cinv = inverse(c)
        for e in gedges.values():
            u, w, _, tag = e
            if u == node and w == node:
                e[3] = reduce(cinv + tag + c)
            elif u == node:
                e[3] = reduce(cinv + tag)
            elif w == node:
                e[3] = reduce(tag + c)

    def merge(keep, gone):
        for e in gedges.values():
            if e[0] == gone:
                e[0] = keep
            if e[1] == gone:
                e[1] = keep
        del node_image[gone]

    changed = True
    while changed:
        changed = False
        for node in sorted(node_image):
            seen = {}
            for eid, fwd, tok, other, tag in half_edges(node):
                if tok not in seen:
                    seen[tok] = (eid, fwd, other, tag)
                    continue
                eid1, fwd1, a, t1 = seen[tok]
                eid2, fwd2, b, t2 = eid, fwd, other, tag
                if a != b:
                    if b == 0:
                        a, b, t1, t2, eid1, eid2 = b, a, t2, t1, eid2, eid1
                    # half-edge eid2 enters b: make its tag equal t1
                    conjugate_node(b, reduce(inverse(t2) + t1))
                    merge(a, b)
                    del gedges[eid2]
                else:
                    if reduce(t1) != reduce(t2):
                        raise NotHomotopyEquivalence("loops do not generate freely (nontrivial kernel)")
                    del gedges[eid2]
                changed = True
                break
            if changed:
                break

    # Gamma must now be isomorphic to the target graph
    vertices = set()
    for u, w in edges.values():
        vertices.update((u, w))
    images = list(node_image.values())
    if sorted(images, key=str) != sorted(vertices, key=str) or len(set(images)) != len(images):
        raise NotHomotopyEquivalence("folded graph does not match the target vertices")
    tags = {}
    for u, w, tok, tag in gedges.values():
        lab = base(tok)
        word = tag if not tok.startswith("~") else inverse(tag)
        if lab in tags:
            raise NotHomotopyEquivalence(f"edge {lab} covered twice")
        tags[lab] = reduce(word)
    if set(tags) != set(edges):
        raise NotHomotopyEquivalence("loops do not cover every edge")
    return tags


def invert_automorphism(images):
    """Inverse of an automorphism of F_r given by generator images."""
    gens = list(images)
    rose = {x: ("*", "*") for x in gens}
    return stallings_tags(rose, "*", {x: tuple(w) for x, w in images.items()})


def is_automorphism(images):
    try:
        invert_automorphism(images)
    except NotHomotopyEquivalence:
        return False
    return True
