"""Command-line front end: ``traintrack VERB [options]``.

Exit codes: 0 success, 2 unreadable or malformed input, 3 a precondition of
the requested operation fails, 10 the search verb ``nielsen`` found paths.
"""
from __future__ import annotations

import argparse
import json
import math
import random
import sys
from fractions import Fraction

import numpy as np

from . import catalog
from .algebra import Elem, fmt_fraction
from .freegroup import cyclic_reduce, format_word
from .graph_core import GraphError, MarkedGraph, format_length
from .marked_map import (
    GraphMap,
    GraphSelfMap,
    PreconditionError,
    affine_map,
    irreducibility_report,
    pf_eigenvalue,
    transition_matrix,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_FOUND = 10

VERBS = ("check", "pf", "gates", "whitehead", "nielsen", "ideal-whitehead", "index", "evidence",
         "fold", "collapse", "split", "finest", "factorize", "foldline")


class ParseError(ValueError):
    pass


def _default(o):
    if isinstance(o, Fraction):
        return fmt_fraction(o)
    if isinstance(o, Elem):
        return o.to_json()
    if isinstance(o, (set, frozenset)):
        return sorted(o, key=str)
    if isinstance(o, tuple):
        return list(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def dumps(doc):
    return json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n"


# ---------------------------------------------------------------------------
# input


def _read_doc(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path} is not JSON: {exc}") from None


def load_map(args):
    if args.example:
        try:
            return catalog.EXAMPLES[args.example]()
        except KeyError:
            raise ParseError(f"unknown example {args.example!r}; choose from {sorted(catalog.EXAMPLES)}") from None
    if not args.input:
        raise ParseError("an --input document or --example name is required")
    doc = _read_doc(args.input)
    try:
        return GraphSelfMap.from_json(doc)
    except GraphError as exc:
        raise ParseError(str(exc)) from None


def _affine(f):
    h, pf = affine_map(f)
    return h, pf.exact


def _split_list(text):
    return [x for x in (text or "").replace(" ", "").split(",") if x]


# ---------------------------------------------------------------------------
# verbs


def cmd_check(args, f):
    from .train_track import gates, illegal_turns, is_train_track

    gs = gates(f)
    v = is_train_track(f, gs)
    doc = {"train_track": v.verdict, "illegal_turns": sorted([list(t) for t in illegal_turns(f, gs)])}
    if not v.verdict:
        doc["witness"] = v.to_json()["witness"]
    return doc, None


def cmd_pf(args, f):
    M = transition_matrix(f)
    if args.format == "csv":
        return M.to_csv(), None
    tol = Fraction(args.tol).limit_denominator(10**15) if args.tol else Fraction(1, 10**12)
    pf = pf_eigenvalue(M, tol=tol)
    rep = irreducibility_report(f)
    doc = {
        "lambda": pf.lam,
        "interval": [fmt_fraction(pf.interval[0]), fmt_fraction(pf.interval[1])],
        "charpoly": list(pf.charpoly),
        "minpoly": list(pf.minpoly),
        "matrix": {"labels": list(M.labels), "rows": [list(r) for r in M.rows]},
        "irreducibility": rep.to_json(),
    }
    return doc, None


def cmd_gates(args, f):
    from .train_track import gates

    gs = gates(f)
    doc = {
        "gates": {str(v): [sorted(g) for g in gl] for v, gl in gs.gates.items()},
        "direction_map": dict(gs.dg),
        "periodic_directions": sorted(d for d in gs.dg if gs.is_periodic(d)),
    }
    return doc, None


def cmd_whitehead(args, f):
    from .train_track import local_whitehead_graph, stable_whitehead_graph

    for v in (args.local, args.stable):
        if v is not None and v not in f.graph.vertices:
            raise ParseError(f"unknown vertex {v!r}")
    if args.stable is not None:
        graphs = {args.stable: stable_whitehead_graph(f, args.stable)}
    elif args.local is not None:
        graphs = {args.local: local_whitehead_graph(f, args.local)}
    else:
        graphs = {str(v): local_whitehead_graph(f, v) for v in f.graph.vertices}
    if args.format == "dot":
        return "".join(W.to_dot(f"W_{v}") for v, W in graphs.items()), None
    doc = {v: dict(W.to_json(), cut_vertices=W.cut_vertices()) for v, W in graphs.items()}
    return doc, None


def cmd_nielsen(args, f):
    from .nielsen import find_all_inps, find_inps

    h, lam = _affine(f)
    if args.period:
        inps = find_inps(h, args.period, lam)
    else:
        inps = find_all_inps(h, lam=lam)
    doc = {"inps": [n.to_json() for n in inps], "count": len(inps)}
    return doc, (EXIT_FOUND if inps else EXIT_OK)


def cmd_ideal_whitehead(args, f):
    from .whitehead_ideal import ideal_whitehead_graph

    h, lam = _affine(f)
    iwg = ideal_whitehead_graph(h, lam)
    if args.format == "dot":
        return iwg.to_dot(), None
    return iwg.to_json(rank=len(f.graph.marking)), None


def cmd_index(args, f):
    from .whitehead_ideal import index_type

    h, lam = _affine(f)
    return index_type(h, lam).to_json(), None


def cmd_evidence(args, f):
    from .whitehead_ideal import nongeometric_evidence

    finv = None
    if args.inverse:
        doc = _read_doc(args.inverse)
        try:
            finv = GraphSelfMap.from_json(doc)
        except GraphError as exc:
            raise ParseError(str(exc)) from None
    elif args.example and args.example + "-inverse" in catalog.EXAMPLES:
        finv = catalog.EXAMPLES[args.example + "-inverse"]()
    return nongeometric_evidence(f, finv).to_json(), None


def _map_out(args, g):
    return g.to_json(), None


def cmd_fold(args, f):
    from .moves import fold

    edges = _split_list(args.edges)
    if len(edges) != 2:
        raise ParseError("--edges needs two comma-separated edge tokens")
    h, _ = _affine(f)
    return _map_out(args, fold(h, *edges))


def cmd_collapse(args, f):
    from .moves import nielsen_collapse, prepare_collapse
    from .nielsen import find_inps

    h, lam = _affine(f)
    if args.edges:
        edges = _split_list(args.edges)
        if len(edges) != 2:
            raise ParseError("--edges needs two comma-separated edge tokens")
        out = nielsen_collapse(h, tuple(edges))
    else:
        inps = find_inps(h, args.period or 1, lam)
        if not inps:
            raise PreconditionError("no indivisible Nielsen path to collapse")
        h2, n = prepare_collapse(h, inps[0], lam)
        out = nielsen_collapse(h2, n)
    return _map_out(args, out)


def cmd_split(args, f):
    from .moves import metric_split, obstruction_report, tt_split

    if not args.vertex:
        raise ParseError("--vertex is required")
    X1, X2 = set(_split_list(args.x1)), set(_split_list(args.x2))
    if not X1 or not X2:
        raise ParseError("--x1 and --x2 list the two sides of the partition")
    h, lam = _affine(f)
    if args.eps is not None:
        try:
            eps = Fraction(args.eps)
        except ValueError:
            raise ParseError(f"bad split length {args.eps!r}") from None
        ms = metric_split(h, args.vertex, X1, X2, eps)
        doc = ms.to_json()
        doc["obstruction"] = obstruction_report(ms).to_json()
        return doc, None
    return _map_out(args, tt_split(h, args.vertex, X1, X2))


def cmd_finest(args, f):
    from .moves import finest_decomposition

    h, lam = _affine(f)
    record = []
    out = finest_decomposition(h, lam, record=record)
    return {"map": out.to_json(), "moves": [m.to_json() for m in record]}, None


def cmd_factorize(args, f):
    from .graph_core import tighten_tokens
    from .moves import stallings_factorize

    if isinstance(f, GraphMap) and not isinstance(f, GraphSelfMap):
        hm = f
    else:
        h, lam = _affine(f)
        G = h.graph
        G1 = G.scaled(1 / lam).with_marking(
            {x: tighten_tokens(h.raw_image(loop)) for x, loop in G.marking.items()}, h.vertex_map[G.base])
        hm = GraphMap(G, G1, h.vertex_map, h.edge_map)
    seq = stallings_factorize(hm)
    doc = seq.to_json()
    doc["combinatorial_length"] = hm.combinatorial_length()
    return doc, None


def _default_classes(gens, seed=None, count=50):
    """Deterministic list of nontrivial cyclically reduced words."""
    letters = [g for x in gens for g in (x, "~" + x)]
    out = []
    if seed is None:
        words = [()]
        while len(out) < count:
            words = [w + (t,) for w in words for t in letters if not w or w[-1] != ("~" + t if not t.startswith("~") else t[1:])]
            for w in words:
                c = cyclic_reduce(w)
                if c == w and w not in out:
                    out.append(w)
                if len(out) == count:
                    break
        return out
    rng = random.Random(seed)
    while len(out) < count:
        w = cyclic_reduce(tuple(rng.choice(letters) for _ in range(rng.randint(1, 8))))
        if w and w not in out:
            out.append(w)
    return out


def cmd_foldline(args, f):
    from .fold_line import periodic_fold_line

    h, lam = _affine(f)
    line = periodic_fold_line(h, lam)
    if args.classes:
        try:
            with open(args.classes, encoding="utf-8") as fh:
                classes = line.parse_classes(fh.readlines())
        except OSError as exc:
            raise ParseError(f"cannot read {args.classes}: {exc}") from None
        except (GraphError, ValueError) as exc:
            raise ParseError(str(exc)) from None
    else:
        classes = _default_classes(sorted(h.graph.marking), args.seed)
    n = args.samples
    if n < 1:
        raise ParseError("--samples must be positive")
    P = line.period
    ts = [P * i / n for i in range(n)]
    rows = line.sample_lengths(ts, classes)
    if args.format == "csv":
        return line.to_csv(rows), None
    doc = line.to_json()
    doc["samples"] = [{"t": t, "class": c, "length": L} for t, c, L in rows]
    tol = args.tol or 1e-9
    doc["normalization_ok"] = all(
        abs(line.evaluate(t).total_length() - math.exp(-t)) <= tol * math.exp(-t) for t in ts)
    return doc, None


HANDLERS = {
    "check": cmd_check,
    "pf": cmd_pf,
    "gates": cmd_gates,
    "whitehead": cmd_whitehead,
    "nielsen": cmd_nielsen,
    "ideal-whitehead": cmd_ideal_whitehead,
    "index": cmd_index,
    "evidence": cmd_evidence,
    "fold": cmd_fold,
    "collapse": cmd_collapse,
    "split": cmd_split,
    "finest": cmd_finest,
    "factorize": cmd_factorize,
    "foldline": cmd_foldline,
}


def build_parser():
    p = argparse.ArgumentParser(prog="traintrack", description="Train track maps of free group automorphisms.")
    p.add_argument("verb", choices=VERBS)
    p.add_argument("--input", help="graph-map JSON document")
    p.add_argument("--example", help=f"built-in map instead of --input ({', '.join(sorted(catalog.EXAMPLES))})")
    p.add_argument("--out", help="write the result here instead of stdout")
    p.add_argument("--format", choices=("json", "dot", "csv"), default="json")
    p.add_argument("--period", type=int, default=None, help="Nielsen path period")
    p.add_argument("--tol", type=float, default=None, help="numeric tolerance")
    p.add_argument("--samples", type=int, default=100, help="fold line samples per fundamental domain")
    p.add_argument("--seed", type=int, default=None, help="seed for a random conjugacy class list")
    p.add_argument("--classes", help="file with one conjugacy class (generator word) per line")
    p.add_argument("--edges", help="edge pair E1,E2 for fold / collapse")
    p.add_argument("--vertex", help="vertex to split")
    p.add_argument("--local", help="whitehead: only the local graph W(v) of this vertex")
    p.add_argument("--stable", help="whitehead: only the stable graph SW(v) of this vertex")
    p.add_argument("--x1", help="directions of the first side, comma-separated")
    p.add_argument("--x2", help="directions of the second side, comma-separated")
    p.add_argument("--eps", help="metric split length p/q (metric split instead of a train track split)")
    p.add_argument("--inverse", help="map document representing the inverse class (evidence)")
    return p


def _load_input(args):
    if args.verb == "factorize" and args.input:
        doc = _read_doc(args.input)
        if "source" in doc and "target" in doc:
            try:
                src = MarkedGraph.from_json(doc["source"])
                tgt = MarkedGraph.from_json(doc["target"])
                m = doc["map"]
                return GraphMap(src, tgt, m.get("vertex_images", {}),
                                {k: tuple(v) for k, v in m["edge_images"].items()})
            except (GraphError, KeyError, TypeError) as exc:
                raise ParseError(f"malformed graph map document: {exc}") from None
    return load_map(args)


def run(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = build_parser().parse_args(argv)
    if args.format == "dot" and args.verb not in ("whitehead", "ideal-whitehead"):
        print(f"error: --format dot is not available for {args.verb}", file=stderr)
        return EXIT_PARSE
    if args.format == "csv" and args.verb not in ("pf", "foldline"):
        print(f"error: --format csv is not available for {args.verb}", file=stderr)
        return EXIT_PARSE
    try:
        f = _load_input(args)
        doc, code = HANDLERS[args.verb](args, f)
    except ParseError as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_PARSE
    except (PreconditionError, GraphError) as exc:
        print(f"precondition failed: {exc}", file=stderr)
        return EXIT_PRECONDITION
    text = doc if isinstance(doc, str) else dumps(doc)
    return _emit(args, text, stdout, code)


def _emit(args, text, stdout, code):
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return EXIT_OK if code is None else code


def main(argv=None):
    sys.exit(run(argv))
