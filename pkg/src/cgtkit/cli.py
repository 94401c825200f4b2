"""Command-line entry point for the guidance-tree pipeline.

Exit codes: 0 ok, 1 validation failure, 2 I/O or format error, 3 config
error.  Machine output (JSON, IEET text) goes to stdout; diagnostics to
stderr.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass
from pathlib import Path

import click

from . import engine, ieet, synthgen, transform
from .flowgraph import load_detection, load_flowgraph, reconstruct, save_flowgraph
from .model import Cgt, CgtError, load_cgt, load_kb, save_cgt, validate_cgt
from .synthgen import GenParams, gen_case

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2
EXIT_CONFIG = 3


def _fail(code: int, message: str):
    click.echo(message, err=True)
    sys.exit(code)


@click.group()
def main():
    """Guidance-tree toolkit: reconstruction, normalization, consultation."""


@main.command("reconstruct")
@click.argument("detection", type=click.Path(exists=True, dir_okay=False))
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None,
              help="FlowGraph JSON output (default: stdout)")
def cmd_reconstruct(detection, output):
    """Rebuild a FlowGraph from a detection-primitives file."""
    try:
        det = load_detection(detection)
        graph, warnings = reconstruct(det)
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        _fail(EXIT_IO, f"bad detection file: {exc}")
    except Exception as exc:
        _fail(EXIT_IO, f"reconstruction failed: {exc}")
    for w in warnings:
        click.echo(f"warning: {w.code}: {w.detail}", err=True)
    from .flowgraph import flowgraph_to_dict
    text = json.dumps(flowgraph_to_dict(graph), ensure_ascii=False, indent=2)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


@main.command("transform")
@click.argument("flowgraph", type=click.Path(exists=True, dir_okay=False))
@click.option("--id", "tree_id", default=None, help="tree id (default: file stem)")
@click.option("--title", default="", help="tree title")
@click.option("--kind", default="differential_diagnosis",
              type=click.Choice(["differential_diagnosis", "treatment_suggestion"]))
@click.option("--department", default="")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def cmd_transform(flowgraph, tree_id, title, kind, department, output):
    """Normalize a FlowGraph into a guidance tree (CGT JSON)."""
    try:
        g = load_flowgraph(flowgraph)
    except Exception as exc:
        _fail(EXIT_IO, f"bad flowgraph file: {exc}")
    meta = transform.TreeMeta(
        id=tree_id or Path(flowgraph).stem.removesuffix(".flowgraph"),
        title=title, kind=kind, department=department,
        source=str(flowgraph),
    )
    try:
        tree, report = transform.to_cgt(g, meta)
    except transform.TransformError as exc:
        _fail(EXIT_INVALID, f"transform failed: {exc}")
    for w in report.warnings:
        click.echo(f"warning: {w.code}: {w.detail}", err=True)
    click.echo(
        f"labels_collapsed={report.labels_collapsed} cycles_cut={report.cycles_cut} "
        f"nodes_replicated={report.nodes_replicated}", err=True)
    from .model import cgt_to_dict
    text = json.dumps(cgt_to_dict(tree), ensure_ascii=False, indent=2)
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
    else:
        click.echo(text)


@main.command("validate")
@click.argument("tree", type=click.Path(exists=True, dir_okay=False))
def cmd_validate(tree):
    """Check a CGT JSON file against every structural invariant."""
    try:
        t = load_cgt(tree)
    except Exception as exc:
        _fail(EXIT_IO, f"bad tree file: {exc}")
    report = validate_cgt(t)
    if report.ok:
        click.echo(f"{t.id}: ok ({len(t.nodes)} nodes)")
        sys.exit(EXIT_OK)
    for v in report.violations:
        where = f" (node {v.node_id})" if v.node_id is not None else ""
        click.echo(f"{v.code}{where}: {v.message}", err=True)
    sys.exit(EXIT_INVALID)


@main.command("export-ieet")
@click.argument("tree", type=click.Path(exists=True, dir_okay=False))
def cmd_export_ieet(tree):
    """Print the IEET text form of a CGT JSON file."""
    try:
        t = load_cgt(tree)
    except Exception as exc:
        _fail(EXIT_IO, f"bad tree file: {exc}")
    try:
        doc = ieet.serialize(t)
    except ieet.IeetError as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(doc.text, nl=False)


@main.command("import-ieet")
@click.argument("source", type=click.Path(exists=True, dir_okay=False, allow_dash=True))
@click.option("--id", "tree_id", default="imported")
@click.option("-o", "--output", type=click.Path(dir_okay=False), default=None)
def cmd_import_ieet(source, tree_id, output):
    """Parse IEET text into a CGT JSON file."""
    text = sys.stdin.read() if source == "-" else Path(source).read_text(encoding="utf-8")
    try:
        t = ieet.parse(text, tree_id=tree_id)
    except ieet.IeetError as exc:
        _fail(EXIT_IO, f"parse error: {exc}")
    from .model import cgt_to_dict
    out = json.dumps(cgt_to_dict(t), ensure_ascii=False, indent=2)
    if output:
        Path(output).write_text(out + "\n", encoding="utf-8")
    else:
        click.echo(out)


# ---------------------------------------------------------------------------
# stats

@dataclass(frozen=True)
class StatsRow:
    department: str
    diff_count: int
    diff_pct: float
    treat_count: int
    treat_pct: float


@dataclass(frozen=True)
class StatsTable:
    rows: tuple[StatsRow, ...]
    total_diff: int
    total_treat: int

    @property
    def total(self) -> int:
        return self.total_diff + self.total_treat


def compute_stats(kb_dir: str | Path) -> StatsTable:
    """Tally trees by department and kind.

    A manifest carrying per-tree kind/department is enough on its own, so
    large catalogs can be summarized without their tree files.
    """
    kb_dir = Path(kb_dir)
    records: list[tuple[str, str]] = []
    manifest = kb_dir / "manifest.json"
    if manifest.exists():
        data = json.loads(manifest.read_text(encoding="utf-8"))
        entries = data.get("trees", data) if isinstance(data, dict) else data
        if entries and all(isinstance(e, dict) and "kind" in e and "department" in e
                           for e in entries):
            records = [(e["department"], e["kind"]) for e in entries]
    if not records:
        kb = load_kb(kb_dir)
        records = [(t.department, t.kind) for t in kb.values()]
    if not records:
        raise CgtError("knowledge base is empty", code="EMPTY_KB")

    per_dept: dict[str, list[int]] = {}
    for dept, kind in records:
        counts = per_dept.setdefault(dept, [0, 0])
        if kind == "treatment_suggestion":
            counts[1] += 1
        else:
            counts[0] += 1
    total_diff = sum(c[0] for c in per_dept.values())
    total_treat = sum(c[1] for c in per_dept.values())
    rows = []
    for dept in sorted(per_dept, key=lambda d: (-per_dept[d][0], d)):
        d, t = per_dept[dept]
        rows.append(StatsRow(
            department=dept,
            diff_count=d,
            diff_pct=round(100.0 * d / total_diff, 1) if total_diff else 0.0,
            treat_count=t,
            treat_pct=round(100.0 * t / total_treat, 1) if total_treat else 0.0,
        ))
    return StatsTable(rows=tuple(rows), total_diff=total_diff, total_treat=total_treat)


def format_stats(table: StatsTable) -> str:
    width = max([len("Total")] + [len(r.department) for r in table.rows]) + 2
    lines = [f"{'Department':<{width}}{'Differential':>14}{'%':>8}{'Treatment':>12}{'%':>8}"]
    for r in table.rows:
        lines.append(
            f"{r.department:<{width}}{r.diff_count:>14}{r.diff_pct:>8.1f}"
            f"{r.treat_count:>12}{r.treat_pct:>8.1f}")
    lines.append(f"{'Total':<{width}}{table.total_diff:>14}{'':>8}{table.total_treat:>12}{'':>8}")
    lines.append(f"Overall: {table.total} trees")
    return "\n".join(lines)


@main.command("stats")
@click.argument("kb_dir", type=click.Path(exists=True, file_okay=False))
def cmd_stats(kb_dir):
    """Summarize a knowledge base by department and tree kind."""
    try:
        table = compute_stats(kb_dir)
    except CgtError as exc:
        _fail(EXIT_IO, str(exc))
    click.echo(format_stats(table))


@main.command("gen-synthetic")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--jitter", type=float, default=0.0, show_default=True)
@click.option("-o", "--output", "out_dir", type=click.Path(file_okay=False), required=True)
def cmd_gen_synthetic(seed, count, jitter, out_dir):
    """Emit synthetic detection files plus ground truth into a directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    from .flowgraph import save_detection
    for i in range(count):
        params = GenParams(seed=seed + i, jitter=jitter)
        det, gt = gen_case(params)
        stem = f"case-{seed + i:05d}"
        save_detection(det, out / f"{stem}.detection.json")
        (out / f"{stem}.truth.json").write_text(
            json.dumps(synthgen.truth_to_dict(gt), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8")
    click.echo(f"wrote {count} case(s) to {out}", err=True)


@main.command("consult")
@click.argument("kb_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--tree", "tree_id", default=None, help="tree id (default: retrieval)")
@click.option("--judge", "judge_spec", default="keyword", show_default=True,
              help="keyword | scripted:<file> | llm")
def cmd_consult(kb_dir, tree_id, judge_spec):
    """Interactive terminal consultation against a knowledge base."""
    try:
        kb = load_kb(kb_dir)
    except Exception as exc:
        _fail(EXIT_IO, f"cannot load knowledge base: {exc}")
    if not kb:
        _fail(EXIT_IO, "knowledge base is empty")
    judge = _resolve_judge(judge_spec)

    complaint = click.prompt("Describe your main complaint")
    try:
        session, event = engine.start(kb, complaint, judge, tree_id=tree_id)
    except engine.EngineError as exc:
        _fail(EXIT_INVALID, str(exc))
    click.echo(f"[tree: {session.tree.id} ({session.tree.title})]", err=True)
    while True:
        if isinstance(event, engine.Ask):
            reply = click.prompt(event.question)
            event = engine.answer(session, reply, judge)
            continue
        if isinstance(event, engine.Diagnosis):
            click.echo(f"\nOutcome: {event.text}")
            click.echo("Path: " + " -> ".join(
                f"{session.tree.node(n).text}" + (f" [{l}]" if l else "")
                for n, l in event.path))
        elif isinstance(event, engine.Hypotheses):
            click.echo("\nUnable to narrow down to one outcome. Candidates:")
            for c in event.candidates:
                click.echo(f"  - {c}")
            click.echo("\nDecision subtree:\n" + event.ieet_text, nl=False)
        break
    sys.exit(EXIT_OK)


def _resolve_judge(spec: str):
    if spec == "keyword":
        return engine.keyword_judge
    if spec.startswith("scripted:"):
        path = spec[len("scripted:"):]
        try:
            script = json.loads(Path(path).read_text(encoding="utf-8"))
        except Exception as exc:
            _fail(EXIT_CONFIG, f"cannot load judge script: {exc}")
        return engine.ScriptedJudge(script)
    if spec == "llm":
        _fail(EXIT_CONFIG, "llm judge needs a service config; use `serve`")
    _fail(EXIT_CONFIG, f"unknown judge spec {spec!r}")


@main.command("serve")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              required=True)
def cmd_serve(config_path):
    """Run the HTTP service from a JSON config file."""
    from .service import ServiceConfig, serve

    try:
        cfg = ServiceConfig.from_file(config_path)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        _fail(EXIT_CONFIG, f"bad config: {exc}")
    serve(cfg)


if __name__ == "__main__":
    main()
