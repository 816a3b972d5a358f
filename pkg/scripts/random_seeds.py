#!/usr/bin/env python3
"""Randomized harness: build positive automorphisms of F_3 from a seed and
push each train track one through the move library, checking invariants.

Exit status is 1 if any invariant fails, so the script can run in a loop
over seeds.
"""
import argparse
import random
import sys

from traintrack.catalog import rose_map
from traintrack.freegroup import compose
from traintrack.marked_map import GraphMap, affine_map, matrix_irreducible, pf_eigenvalue, transition_matrix
from traintrack.moves import finest_decomposition, stallings_factorize
from traintrack.train_track import is_train_track

GENS = "abc"


def random_map(rng, moves):
    phi = {x: (x,) for x in GENS}
    for _ in range(moves):
        x, y = rng.sample(GENS, 2)
        t = {g: (g,) for g in GENS}
        t[x] = (x, y) if rng.random() < 0.5 else (y, x)
        phi = compose(phi, t)
    return rose_map({x.upper(): "".join(w).upper() for x, w in phi.items()})


def check(f):
    f, pf = affine_map(f)
    lam = pf.exact
    g = finest_decomposition(f, lam)
    same_pf = abs(pf_eigenvalue(transition_matrix(g)).lam - pf.lam) < 1e-9
    G = f.graph
    G1 = G.scaled(1 / lam).with_marking({x: f.image_path(l) for x, l in G.marking.items()}, f.vertex_map[G.base])
    h = GraphMap(G, G1, f.vertex_map, f.edge_map)
    seq = stallings_factorize(h)
    return same_pf and seq.recompose() == h and len(seq) <= h.combinatorial_length()


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--count", type=int, default=20)
    ap.add_argument("--moves", type=int, default=5, help="transvections per automorphism")
    args = ap.parse_args()
    rng = random.Random(args.seed)
    done = failed = 0
    while done < args.count:
        f = random_map(rng, args.moves)
        if not (matrix_irreducible(transition_matrix(f)) and is_train_track(f)):
            continue
        ok = check(f)
        done += 1
        failed += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {dict(f.edge_map)}")
    print(f"{done - failed}/{done} passed (seed {args.seed})")
    sys.exit(1 if failed else 0)


if __name__ == "__main__":
    main()
