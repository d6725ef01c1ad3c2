"""The fixture library: small diagrams exercising every corner of the
machinery.  Shipping copies live as YAML data files next to this module;
`load_fixture` reads those, `build_fixture` constructs the same objects
programmatically (the round-trip is tested).
"""

from __future__ import annotations

from fractions import Fraction as F
from importlib import resources

from .diagio import DiagramDocument, diagram_from_dict, diagram_to_dict, load_documents
from .diagram import Edge, FeynmanDiagram, Leg
from .labels import Label, LabelTable, NEG_INF

_Z = (0,)


def _doc(name, labels, g, kcfg) -> DiagramDocument:
    return DiagramDocument(name, labels, g, kcfg)


def _e1(name: str, deg: F, deg_inf=NEG_INF) -> DiagramDocument:
    labels = LabelTable(1, (Label("t", deg, deg_inf),))
    g = FeynmanDiagram(1, 2, (Edge(0, 1, "t", _Z),), (Leg(0, _Z), Leg(1, _Z)))
    return _doc(name, labels, g, {"t": {"epsilon": 0.1, "large_scale": False, "rho": None}})


def _tri(name: str, legs) -> DiagramDocument:
    labels = LabelTable(1, (Label("t1", F(-1, 3)), Label("t2", F(-4, 3))))
    g = FeynmanDiagram(
        1,
        3,
        (Edge(0, 1, "t1", _Z), Edge(1, 2, "t2", _Z), Edge(2, 0, "t1", _Z)),
        tuple(Leg(v, _Z) for v in legs),
    )
    cfg = {n: {"epsilon": 0.1, "large_scale": False, "rho": None} for n in ("t1", "t2")}
    return _doc(name, labels, g, cfg)


def _ch2(name: str, deg_inf: F) -> DiagramDocument:
    labels = LabelTable(1, (Label("c1", F(-5, 4), deg_inf), Label("c2", F(-3, 4), deg_inf)))
    g = FeynmanDiagram(
        1,
        3,
        (Edge(0, 1, "c1", _Z), Edge(1, 2, "c2", _Z)),
        (Leg(0, _Z), Leg(2, _Z)),
    )
    cfg = {n: {"epsilon": 0.1, "large_scale": True, "rho": 8.0} for n in ("c1", "c2")}
    return _doc(name, labels, g, cfg)


def _par(name: str) -> DiagramDocument:
    labels = LabelTable(1, (Label("p", F(-5, 4)),))
    g = FeynmanDiagram(
        1,
        2,
        (Edge(0, 1, "p", _Z), Edge(0, 1, "p", _Z)),
        (Leg(0, _Z), Leg(1, _Z)),
    )
    return _doc(name, labels, g, {"p": {"epsilon": 0.1, "large_scale": False, "rho": None}})


def _sl(name: str) -> DiagramDocument:
    labels = LabelTable(1, (Label("s", F(-1, 2)),))
    g = FeynmanDiagram(1, 1, (Edge(0, 0, "s", _Z),), (Leg(0, _Z),))
    return _doc(name, labels, g, {"s": {"epsilon": 0.1, "large_scale": False, "rho": None}})


def _gsl(name: str) -> DiagramDocument:
    # a two-leg edge with a loop hung off one endpoint: the loop is a
    # generalised self-loop of positive degree, so its constant factors out
    labels = LabelTable(1, (Label("a", F(-5, 4)), Label("b", F(-1, 4))))
    g = FeynmanDiagram(
        1,
        3,
        (Edge(0, 1, "a", _Z), Edge(1, 2, "b", _Z), Edge(2, 1, "b", _Z)),
        (Leg(0, _Z), Leg(1, _Z)),
    )
    cfg = {n: {"epsilon": 0.1, "large_scale": False, "rho": None} for n in ("a", "b")}
    return _doc(name, labels, g, cfg)


def _fig2(name: str) -> DiagramDocument:
    labels = LabelTable(1, (Label("f", F(-1, 2)),))
    edges = (
        Edge(0, 1, "f", _Z),
        Edge(1, 2, "f", _Z),
        Edge(2, 3, "f", _Z),
        Edge(0, 4, "f", _Z),
        Edge(1, 4, "f", _Z),
        Edge(0, 5, "f", _Z),
        Edge(4, 5, "f", _Z),
        Edge(5, 3, "f", _Z),
    )
    g = FeynmanDiagram(1, 6, edges, (Leg(0, _Z), Leg(3, _Z), Leg(5, _Z)))
    return _doc(name, labels, g, {"f": {"epsilon": 0.1, "large_scale": False, "rho": None}})


def _vac2(name: str) -> DiagramDocument:
    labels = LabelTable(1, (Label("h", F(-5, 2)),))
    g = FeynmanDiagram(
        1, 2, (Edge(0, 1, "h", _Z),), (), ((1, (1,)),), (0,)
    )
    return _doc(name, labels, g, {"h": {"epsilon": 0.1, "large_scale": False, "rho": None}})


def _vac3(name: str) -> DiagramDocument:
    labels = LabelTable(1, (Label("t1", F(-1, 3)), Label("t2", F(-4, 3))))
    g = FeynmanDiagram(
        1,
        3,
        (Edge(0, 1, "t1", _Z), Edge(1, 2, "t2", _Z), Edge(2, 0, "t1", _Z)),
        (),
        ((2, (1,)),),
        (0,),
    )
    cfg = {n: {"epsilon": 0.1, "large_scale": False, "rho": None} for n in ("t1", "t2")}
    return _doc(name, labels, g, cfg)


_BUILDERS = {
    "e1_32": lambda: _e1("e1_32", F(-3, 2)),
    "e1_1": lambda: _e1("e1_1", F(-1)),
    "e1_54": lambda: _e1("e1_54", F(-5, 4)),
    "e1_52": lambda: _e1("e1_52", F(-5, 2)),
    "e1_12": lambda: _e1("e1_12", F(-1, 2)),
    "ch2": lambda: _ch2("ch2", F(-3, 2)),
    "ch2_slow": lambda: _ch2("ch2_slow", F(-1, 2)),
    "tri": lambda: _tri("tri", (0,)),
    "tri2": lambda: _tri("tri2", (1, 2)),
    "par": lambda: _par("par"),
    "sl": lambda: _sl("sl"),
    "gsl": lambda: _gsl("gsl"),
    "fig2": lambda: _fig2("fig2"),
    "vac2": lambda: _vac2("vac2"),
    "vac3": lambda: _vac3("vac3"),
}

FIXTURE_NAMES = tuple(sorted(_BUILDERS))


def build_fixture(name: str) -> DiagramDocument:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}; known: {', '.join(FIXTURE_NAMES)}")


def fixture_document(name: str) -> dict:
    doc = build_fixture(name)
    return diagram_to_dict(doc.name, doc.labels, doc.diagram, doc.kernel_config)


def load_fixture(name: str) -> DiagramDocument:
    """Load a fixture from the shipped data files."""
    path = resources.files("bphzkit").joinpath(f"fixtures_data/{name}.yaml")
    docs = load_documents(path.read_text(encoding="utf-8"))
    if len(docs) != 1:
        raise ValueError(f"fixture file {name} holds {len(docs)} documents")
    return docs[0]
