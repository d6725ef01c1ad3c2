"""Symbolic BPHZ renormalisation of decorated Feynman diagrams, with
numerical valuations against mollified singular kernels."""

from .diagram import Edge, FeynmanDiagram, HalfEdge, Leg, Partition, Subgraph
from .formal import FormalSum, TensorSum, VacuumProduct
from .labels import Label, LabelTable, make_table

__all__ = [
    "Edge",
    "FeynmanDiagram",
    "FormalSum",
    "HalfEdge",
    "Label",
    "LabelTable",
    "Leg",
    "Partition",
    "Subgraph",
    "TensorSum",
    "VacuumProduct",
    "make_table",
]

__version__ = "0.1.0"
