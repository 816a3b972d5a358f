#!/usr/bin/env python3
"""Sample translation lengths along the periodic fold line of an example map.

Prints CSV rows ``t,class,length`` covering ``--domains`` fundamental domains.
"""
import argparse
import random
import sys

from traintrack.catalog import EXAMPLES
from traintrack.fold_line import FoldLine, periodic_fold_line
from traintrack.freegroup import cyclic_reduce
from traintrack.marked_map import affine_map


def random_classes(gens, count, seed):
    rng = random.Random(seed)
    letters = [t for x in gens for t in (x, "~" + x)]
    out = []
    while len(out) < count:
        w = cyclic_reduce(tuple(rng.choice(letters) for _ in range(rng.randint(1, 6))))
        if w and w not in out:
            out.append(w)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--example", default="afg", choices=sorted(EXAMPLES))
    ap.add_argument("--samples", type=int, default=50, help="samples per fundamental domain")
    ap.add_argument("--domains", type=int, default=1)
    ap.add_argument("--classes", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    f, pf = affine_map(EXAMPLES[args.example]())
    line = periodic_fold_line(f, pf.exact)
    classes = random_classes(sorted(line.G0.marking), args.classes, args.seed)
    n = args.samples * args.domains
    ts = [line.period * i / args.samples for i in range(n + 1)]
    sys.stdout.write(FoldLine.to_csv(line.sample_lengths(ts, classes)))


if __name__ == "__main__":
    main()
