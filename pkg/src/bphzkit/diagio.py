"""Diagram file format: YAML documents with exact-rational degree strings.

One document per diagram: dimension, labels (name, deg "p/q", deg_inf "p/q"
or "-inf"), vertex count, edges, legs, optional distinguished vertices and
node decorations, and a kernel section (epsilon, large_scale, rho per label).
Floats never encode degrees.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import yaml

from .diagram import Edge, FeynmanDiagram, Leg
from .formal import FormalSum, TensorSum, VacuumProduct
from .kernels import KernelAssignment, KernelSpec, LargeScaleKernel
from .labels import NEG_INF, Label, LabelTable, frac_str, parse_frac


class ParseError(ValueError):
    pass


@dataclass(frozen=True)
class DiagramDocument:
    name: str
    labels: LabelTable
    diagram: FeynmanDiagram
    kernel_config: dict  # per label: {"epsilon": float, "large_scale": bool, "rho": float|None}

    def assignment(self, epsilon: float | None = None, rho: float | None = None,
                   max_order: int = 2) -> KernelAssignment:
        specs = []
        tails = []
        for lab in self.labels.entries:
            cfg = self.kernel_config.get(lab.name, {})
            eps = epsilon if epsilon is not None else float(cfg.get("epsilon", 0.1))
            specs.append(KernelSpec(lab.name, lab.deg, eps))
            if cfg.get("large_scale"):
                if lab.deg_inf == NEG_INF:
                    raise ParseError(f"label {lab.name!r} has no finite deg_inf for a tail")
                r = rho if rho is not None else cfg.get("rho")
                tails.append(LargeScaleKernel(lab.name, Fraction(lab.deg_inf), r))
        return KernelAssignment(self.labels, tuple(specs), tuple(tails), max_order)


def diagram_to_dict(name: str, labels: LabelTable, g: FeynmanDiagram,
                    kernel_config: dict | None = None) -> dict:
    doc = {
        "name": name,
        "dimension": labels.dimension,
        "labels": [
            {"name": l.name, "deg": frac_str(l.deg), "deg_inf": frac_str(l.deg_inf)}
            for l in labels.entries
        ],
        "vertices": g.n_vertices,
        "edges": [
            {"from": e.src, "to": e.tgt, "label": e.label, "deriv": list(e.deriv)}
            for e in g.edges
        ],
        "legs": [{"vertex": l.vertex, "deriv": list(l.deriv)} for l in g.legs],
    }
    if g.distinguished:
        doc["distinguished"] = list(g.distinguished)
    if g.decorations:
        doc["decorations"] = [{"vertex": v, "deriv": list(k)} for v, k in g.decorations]
    if kernel_config:
        doc["kernels"] = {
            name: dict(cfg) for name, cfg in sorted(kernel_config.items())
        }
    return doc


def diagram_from_dict(doc: dict) -> DiagramDocument:
    try:
        d = int(doc["dimension"])
        labels = LabelTable(
            d,
            tuple(
                Label(l["name"], Fraction(parse_frac(str(l["deg"]))), parse_frac(str(l.get("deg_inf", "-inf"))))
                for l in doc.get("labels", [])
            ),
        )
        n = int(doc["vertices"])
        edges = tuple(
            Edge(int(e["from"]), int(e["to"]), str(e["label"]), tuple(e.get("deriv") or [0] * d))
            for e in doc.get("edges", [])
        )
        legs = tuple(
            Leg(int(l["vertex"]), tuple(l.get("deriv") or [0] * d)) for l in doc.get("legs", [])
        )
        decs = tuple(
            (int(x["vertex"]), tuple(x["deriv"])) for x in doc.get("decorations", [])
        )
        dist = tuple(int(v) for v in doc.get("distinguished", []))
        g = FeynmanDiagram(d, n, edges, legs, decs, dist)
        kcfg = {
            str(name): {
                "epsilon": float(cfg.get("epsilon", 0.1)),
                "large_scale": bool(cfg.get("large_scale", False)),
                "rho": (None if cfg.get("rho") in (None, "inf") else float(cfg["rho"])),
            }
            for name, cfg in (doc.get("kernels") or {}).items()
        }
        return DiagramDocument(str(doc.get("name", "unnamed")), labels, g, kcfg)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad diagram document: {exc}") from exc


def dump_documents(docs: list[dict]) -> str:
    return yaml.safe_dump_all(docs, sort_keys=False, default_flow_style=None)


def load_documents(text: str) -> list[DiagramDocument]:
    return [diagram_from_dict(doc) for doc in yaml.safe_load_all(text) if doc]


def load_file(path) -> list[DiagramDocument]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_documents(fh.read())


def save_file(path, docs: list[dict]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_documents(docs))


# -- serialisation of sums ----------------------------------------------------


def _strip(doc: dict) -> dict:
    doc = dict(doc)
    doc.pop("name", None)
    doc.pop("labels", None)
    doc.pop("dimension", None)
    return doc


def tensor_sum_to_records(labels: LabelTable, ts: TensorSum) -> list[dict]:
    """Deterministic (coefficient, vacuum part, diagram part) records."""
    out = []
    for (vp, right), c in ts:
        rec = {
            "coeff": frac_str(c),
            "vacuum": [_strip(diagram_to_dict("", labels, f)) for f in vp],
        }
        if isinstance(right, FeynmanDiagram):
            rec["diagram"] = _strip(diagram_to_dict("", labels, right))
        elif isinstance(right, VacuumProduct):
            rec["right"] = [_strip(diagram_to_dict("", labels, f)) for f in right]
        out.append(rec)
    return out


def formal_sum_to_records(labels: LabelTable, s: FormalSum) -> list[dict]:
    out = []
    for key, c in s:
        rec = {"coeff": frac_str(c)}
        if isinstance(key, VacuumProduct):
            rec["factors"] = [_strip(diagram_to_dict("", labels, f)) for f in key]
        else:
            rec["diagram"] = _strip(diagram_to_dict("", labels, key))
        out.append(rec)
    return out
