"""Render the golden corpus; ``python tests/golden_runner.py --update`` rewrites the expectations."""

from __future__ import annotations

import os
import sys
from contextlib import contextmanager
from pathlib import Path

GOLDEN = Path(__file__).parent / "golden"


@contextmanager
def _inside(path: Path):
    old = os.getcwd()
    os.chdir(path)
    try:
        yield
    finally:
        os.chdir(old)


def _summary(model) -> list[str]:
    from hubgraph.assemble import assemble_lp

    lp = assemble_lp(model.graph)
    lines = [f"  wacc {model.wacc!r}",
             f"  nodes {', '.join(n.name for n in model.graph.nodes)}",
             f"  hyperedges {', '.join(e.name for e in model.graph.hyperedges)}",
             f"  rows {lp.n_rows} cols {lp.n_cols} nnz {lp.nnz}",
             f"  fingerprint {lp.fingerprint()}"]
    lines += [f"  {d.format(model.scenario or '-')}" for d in model.warnings]
    return lines


def render(name: str) -> str:
    from hubgraph.dsl import DslError, format_ast, load_model, parse_source

    out = []
    with _inside(GOLDEN):
        source = Path(name).read_text(encoding="utf-8")
        try:
            ast = parse_source(source, name)
        except DslError as exc:
            out.append("parse: error")
            out += [d.format(name) for d in exc.diagnostics]
            return "\n".join(out) + "\n"
        out.append("parse: ok")
        out.append("--- canonical")
        out.append(format_ast(ast).rstrip("\n"))
        out.append("---")
        for scenario in [None] + [s.name for s in ast.scenarios]:
            label = scenario or "(base)"
            try:
                model = load_model(name, scenario)
            except DslError as exc:
                out.append(f"resolve {label}: error")
                out += [d.format(name) for d in exc.diagnostics]
                continue
            out.append(f"resolve {label}: ok")
            out += _summary(model)
    return "\n".join(out) + "\n"


def corpus() -> list[str]:
    return sorted(p.name for p in GOLDEN.glob("*.hub"))


if __name__ == "__main__":
    sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))
    update = "--update" in sys.argv
    for name in corpus():
        text = render(name)
        target = GOLDEN / (name[:-4] + ".expected")
        if update:
            target.write_text(text, encoding="utf-8")
        else:
            print(f"==> {name}")
            print(text)
