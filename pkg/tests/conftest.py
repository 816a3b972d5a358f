import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from traintrack.catalog import EXAMPLES, rose_map
from traintrack.freegroup import compose, cyclic_reduce
from traintrack.marked_map import affine_map, matrix_irreducible, transition_matrix

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("default")

GENS = ("a", "b", "c")


@pytest.fixture(scope="session")
def afg():
    return affine_map(EXAMPLES["afg"]())


@pytest.fixture(scope="session")
def two_vertex():
    return affine_map(EXAMPLES["two-vertex"]())


def transvection_product(moves):
    """Positive automorphism x -> xy / yx composed from (x, y, right) triples."""
    phi = {x: (x,) for x in GENS}
    for x, y, right in moves:
        t = {g: (g,) for g in GENS}
        t[x] = (x, y) if right else (y, x)
        phi = compose(phi, t)
    return phi


def rose_from_automorphism(phi):
    return rose_map({x.upper(): "".join(w).upper() for x, w in phi.items()})


_transvection = st.tuples(st.sampled_from(GENS), st.sampled_from(GENS), st.booleans()).filter(
    lambda t: t[0] != t[1])


@st.composite
def positive_seeds(draw, min_moves=3, max_moves=6):
    """Random positive automorphisms of F_3 as rose maps, with their transition matrix irreducible."""
    moves = draw(st.lists(_transvection, min_size=min_moves, max_size=max_moves))
    f = rose_from_automorphism(transvection_product(moves))
    return f


def irreducible(f):
    return matrix_irreducible(transition_matrix(f))


def seed_corpus(count, seed=0, lo=3, hi=6):
    """Deterministic list of irreducible positive rose maps (for loops outside hypothesis)."""
    rng = random.Random(seed)
    out = []
    while len(out) < count:
        moves = []
        for _ in range(rng.randint(lo, hi)):
            x, y = rng.sample(GENS, 2)
            moves.append((x, y, rng.random() < 0.5))
        f = rose_from_automorphism(transvection_product(moves))
        if irreducible(f):
            out.append(f)
    return out


def conjugacy_list(gens, count=50, seed=7):
    rng = random.Random(seed)
    letters = [t for x in gens for t in (x, "~" + x)]
    out = []
    while len(out) < count:
        w = cyclic_reduce(tuple(rng.choice(letters) for _ in range(rng.randint(1, 7))))
        if w and w not in out:
            out.append(w)
    return out


def canonical_cyclic(word):
    """Least rotation of a cyclically reduced word (conjugacy class key)."""
    w = cyclic_reduce(tuple(word))
    if not w:
        return ()
    return min(w[i:] + w[:i] for i in range(len(w)))


def same_outer_class(phi1, phi2, words):
    """phi1(c) and phi2(c) are conjugate for every class c in ``words``."""
    from traintrack.freegroup import substitute

    return all(canonical_cyclic(substitute(w, phi1)) == canonical_cyclic(substitute(w, phi2)) for w in words)


def frac(x):
    return Fraction(x)
