"""Named example maps, shared by the test suite and the command line."""
from __future__ import annotations

from fractions import Fraction

from .freegroup import parse_word
from .graph_core import MarkedGraph
from .marked_map import GraphSelfMap


def rose(labels, vertex="v"):
    """Rose with one petal per label, each of length 1, marked by its petals."""
    labels = list(labels)
    return MarkedGraph([vertex], {x: (vertex, vertex) for x in labels},
                       {x: Fraction(1) for x in labels}, {x.lower() if x.lower() not in labels else x: (x,) for x in labels})


def rose_map(images):
    """Self-map of a rose from generator images such as ``{"a": "bacaaca"}``."""
    images = {k: parse_word(v) if isinstance(v, str) else tuple(v) for k, v in images.items()}
    return GraphSelfMap.from_images(rose(images), images)


def afg_map():
    """A -> AFGFGF, F -> FGF, G -> GFAFG on the three-petal rose."""
    return rose_map({"A": "AFGFGF", "F": "FGF", "G": "GFAFG"})


def abc_map():
    return rose_map({"a": "bacaaca", "b": "baca", "c": "caaca"})


def abc_inverse_map():
    return rose_map({"a": "~ba~ba~c", "b": "b~ab", "c": "c~abc~ab~ab"})


def abc_slid_map():
    return rose_map({"a": "acabaca", "b": "acab", "c": "acaca"})


def two_vertex_graph():
    edges = {"A": ("q", "p"), "D": ("q", "p"), "E": ("q", "q"), "F": ("p", "q")}
    marking = {"x": ("E",), "y": ("D", "~A"), "z": ("A", "F")}
    return MarkedGraph(["q", "p"], edges, {k: Fraction(1) for k in edges}, marking, "q")


def two_vertex_map():
    """A -> AF, D -> DFAFDFE, E -> DFAFDFE, F -> DF on a two-vertex graph."""
    images = {"A": "AF", "D": "DFAFDFE", "E": "DFAFDFE", "F": "DF"}
    return GraphSelfMap.from_images(two_vertex_graph(), {k: parse_word(v) for k, v in images.items()})


EXAMPLES = {
    "afg": afg_map,
    "abc": abc_map,
    "abc-inverse": abc_inverse_map,
    "abc-slid": abc_slid_map,
    "two-vertex": two_vertex_map,
}
