"""Batch front-end: analyse diagram files, expand algebraic maps, evaluate
and study valuations, and run the multiscale diagnostics.  Emits CSV (floats
as repr, rationals as p/q strings) plus structured detail files; exit code 0
means every check in the invoked suite passed."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diagio
from .coaction import coaction, twisted_antipode, twisted_antipode_product
from .diagram import connected_divergent_subgraphs, degree, in_H_plus
from .diagio import DiagramDocument
from .fixtures import FIXTURE_NAMES, load_fixture
from .forests import contract_forest, forest_formula, forests
from .formal import TensorSum
from .hepp import forest_scales, hepp_tree, interval_partition
from .quadrature import QuadratureSpec
from .testfns import product_bump
from .valuation import Evaluator, convergence_study, weinberg_condition


@dataclass
class RunConfig:
    inputs: list[str]
    command: str
    epsilons: list[float] = field(default_factory=lambda: [0.2, 0.1, 0.05])
    tol: float = 1e-9
    rho: float | None = None
    out: str = "out"
    seed: int = 0
    route: str = "twisted-antipode"
    what: str = "coaction"
    configs: int = 20

    def __post_init__(self):
        if any(b >= a for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ValueError("epsilon list must be strictly decreasing")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")


def _load(cfg: RunConfig) -> list[DiagramDocument]:
    docs = []
    for item in cfg.inputs:
        if Path(item).exists():
            docs.extend(diagio.load_file(item))
        elif item in FIXTURE_NAMES:
            docs.append(load_fixture(item))
        else:
            raise diagio.ParseError(f"no such input file or fixture: {item}")
    return docs


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _default_phi(doc: DiagramDocument):
    k = doc.diagram.n_legs
    centers = [(0.0,) * doc.labels.dimension] * k
    return product_bump(doc.labels.dimension, centers, [1.0] * k)


def cmd_analyze(cfg: RunConfig) -> int:
    docs = _load(cfg)
    rows = []
    details = []
    for doc in docs:
        g, labels = doc.diagram, doc.labels
        divs = connected_divergent_subgraphs(g, labels)
        n_forests = len(forests(g, labels))
        rows.append(
            [
                doc.name,
                str(degree(g, labels)),
                len(divs),
                n_forests,
                "pass" if weinberg_condition(g, labels) else "fail",
                "yes" if in_H_plus(g, labels) else "no",
            ]
        )
        details.append(f"# {doc.name}")
        for sub, dg in divs:
            details.append(f"divergent edges={sorted(sub.edge_ids)} degree={dg}")
    outdir = Path(cfg.out)
    _write_csv(outdir / "analyze.csv",
               ["diagram", "degree", "divergent_subgraphs", "forests", "weinberg", "in_H_plus"],
               rows)
    (outdir / "analyze_detail.txt").write_text("\n".join(details) + "\n", encoding="utf-8")
    return 0


def cmd_expand(cfg: RunConfig) -> int:
    docs = _load(cfg)
    payload = []
    for doc in docs:
        g, labels = doc.diagram, doc.labels
        if cfg.what == "coaction":
            records = diagio.tensor_sum_to_records(labels, coaction(g, labels))
        elif cfg.what == "antipode":
            if g.is_vacuum:
                records = diagio.formal_sum_to_records(labels, twisted_antipode(g, labels))
            else:
                ts = TensorSum()
                for (vp, q), c in coaction(g, labels):
                    left = twisted_antipode_product(vp, labels)
                    ts = ts + c * TensorSum(((lvp, q), lc) for lvp, lc in left)
                records = diagio.tensor_sum_to_records(labels, ts)
        elif cfg.what == "forest-formula":
            records = []
            for forest in forests(g, labels):
                sign = (-1) ** len(forest)
                part = contract_forest(g, forest, labels)
                records.append(
                    {
                        "forest": [sorted(e) for e in forest.sorted_elements],
                        "sign": sign,
                        "terms": diagio.tensor_sum_to_records(labels, part),
                    }
                )
        else:
            raise ValueError(f"unknown expansion {cfg.what!r}")
        payload.append({"name": doc.name, "what": cfg.what, "terms": records})
    outdir = Path(cfg.out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "expand.yaml").write_text(diagio.dump_documents(payload), encoding="utf-8")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    docs = _load(cfg)
    routes = (
        ["twisted-antipode", "forest-formula", "full-forest"]
        if cfg.route == "all"
        else [cfg.route]
    )
    rows = []
    details = []
    failures = 0
    quad = QuadratureSpec(rel_tol=cfg.tol, abs_tol=cfg.tol)
    for doc in docs:
        phi = _default_phi(doc)
        for eps in cfg.epsilons:
            ev = Evaluator(doc.assignment(epsilon=eps, rho=cfg.rho), quad)
            per_route = []
            for route in routes:
                rep = ev.bphz(doc.diagram, phi, route=route)
                rows.append([doc.name, route, eps, rep.value, rep.error_estimate, rep.wall_ms])
                per_route.append(rep)
                details.append(f"# {doc.name} route={route} eps={eps}")
                details.extend(f"{v!r} {name}" for name, v in rep.term_breakdown)
            if len(per_route) > 1:
                vals = [r.value for r in per_route]
                errs = [r.error_estimate for r in per_route]
                spread = max(vals) - min(vals)
                budget = 3.0 * (max(errs) + min(errs))
                if spread > max(budget, 1e-12):
                    failures += 1
    outdir = Path(cfg.out)
    _write_csv(outdir / "evaluate.csv",
               ["fixture", "route", "epsilon", "value", "error", "wall_ms"], rows)
    (outdir / "evaluate_detail.txt").write_text("\n".join(details) + "\n", encoding="utf-8")
    return 1 if failures else 0


def cmd_converge(cfg: RunConfig) -> int:
    docs = _load(cfg)
    rows = []
    fit_rows = []
    failures = 0
    quad = QuadratureSpec(rel_tol=cfg.tol, abs_tol=cfg.tol)
    for doc in docs:
        phi = _default_phi(doc)
        for which in ("canonical", "bphz"):
            study = convergence_study(
                doc.assignment(), doc.diagram, phi, cfg.epsilons, which, quad
            )
            for row in study["rows"]:
                rows.append([doc.name, which, row["epsilon"], row["value"], row["error"]])
            fit = study["fit"]
            if fit:
                fit_rows.append(
                    [doc.name, which, fit["slope"], fit["stderr"], fit["r_squared"]]
                )
            if which == "bphz":
                diffs = study["diffs"]
                if any(b >= a for a, b in zip(diffs, diffs[1:])):
                    failures += 1
    outdir = Path(cfg.out)
    _write_csv(outdir / "converge.csv", ["fixture", "which", "epsilon", "value", "error"], rows)
    _write_csv(outdir / "converge_fit.csv", ["fixture", "which", "slope", "stderr", "r_squared"], fit_rows)
    return 1 if failures else 0


def cmd_hepp(cfg: RunConfig) -> int:
    docs = _load(cfg)
    rng = np.random.default_rng(cfg.seed)
    rows = []
    failures = 0
    for doc in docs:
        g, labels = doc.diagram, doc.labels
        if g.n_vertices < 2:
            continue
        full = forests(g, labels, full_only=True)
        for config_id in range(cfg.configs):
            points = {
                v: rng.uniform(-1.0, 1.0, size=labels.dimension)
                for v in range(g.n_vertices)
            }
            tree = hepp_tree(points)
            # ultrametric violations (exact check over all triples)
            viol = 0
            verts = list(range(g.n_vertices))
            for a in verts:
                for b in verts:
                    for c in verts:
                        if len({a, b, c}) < 3:
                            continue
                        if tree.distance(a, b) > max(tree.distance(a, c), tree.distance(c, b)):
                            viol += 1
            intervals = interval_partition(g, tree, labels)
            hits = {frozenset(f.elements): 0 for f in full}
            for iv in intervals:
                for member in iv.members():
                    hits[frozenset(member.elements)] += 1
            covered = all(v == 1 for v in hits.values())
            if viol or not covered:
                failures += 1
            for iv_id, iv in enumerate(intervals):
                scales = forest_scales(g, iv.upper, tree, labels)
                for rec_id, rec in enumerate(scales.records):
                    rows.append(
                        [
                            doc.name,
                            config_id,
                            iv_id,
                            str(sorted(rec.element)),
                            rec.int_scale,
                            rec.ext_scale,
                            int(rec.safe),
                            viol,
                            int(covered),
                        ]
                    )
    outdir = Path(cfg.out)
    _write_csv(
        outdir / "hepp.csv",
        ["fixture", "config", "interval", "gamma", "int", "ext", "safe", "ultrametric_violations", "partition_ok"],
        rows,
    )
    return 1 if failures else 0


COMMANDS = {
    "analyze": cmd_analyze,
    "expand": cmd_expand,
    "evaluate": cmd_evaluate,
    "converge": cmd_converge,
    "hepp": cmd_hepp,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="bphzkit",
        description="analyse, expand and evaluate renormalised Feynman diagrams",
    )
    p.add_argument("--input", action="append", required=True,
                   help="diagram file or fixture name (repeatable)")
    p.add_argument("--command", required=True, choices=sorted(COMMANDS))
    p.add_argument("--epsilons", default="0.2,0.1,0.05",
                   help="strictly decreasing comma-separated mollification scales")
    p.add_argument("--tol", type=float, default=1e-9, help="quadrature tolerance")
    p.add_argument("--rho", type=float, default=None, help="large-scale truncation radius")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="seed for randomized suites")
    p.add_argument("--route", default="twisted-antipode",
                   choices=["twisted-antipode", "forest-formula", "full-forest", "all"])
    p.add_argument("--what", default="coaction",
                   choices=["coaction", "antipode", "forest-formula"],
                   help="expansion kind for --command expand")
    p.add_argument("--configs", type=int, default=20,
                   help="random configurations for --command hepp")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig(
            inputs=args.input,
            command=args.command,
            epsilons=[float(x) for x in args.epsilons.split(",") if x],
            tol=args.tol,
            rho=args.rho,
            out=args.out,
            seed=args.seed,
            route=args.route,
            what=args.what,
            configs=args.configs,
        )
        return COMMANDS[args.command](cfg)
    except diagio.ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
