"""Task-planning correctness benchmark: labeled queries, per-task and overall scores.

Each query is labeled with the single essential task that solves it; a run is
correct when the executed trace contains a successful invocation of that
task. Extra tools never penalize.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .backends import BackendProvider
from .engine import Engine
from .planner import AgentTrace, PlannerLimits
from .registry import ToolRegistry


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class EvalQuery:
    id: str
    query: str
    essential_task: str
    image: Optional[str] = None


@dataclass
class EvalResult:
    query_id: str
    essential_task: str
    executed_tools: list[str]
    correct: bool
    trace: Optional[AgentTrace] = None
    failure: str = ""


@dataclass
class TaskRow:
    n: int = 0
    correct_n: int = 0

    @property
    def correctness(self) -> Optional[float]:
        return None if self.n == 0 else self.correct_n / self.n


@dataclass
class EvalReport:
    per_task: dict[str, TaskRow] = field(default_factory=dict)
    overall: TaskRow = field(default_factory=TaskRow)


def load_queries(path: Union[Path, str], registry: ToolRegistry) -> list[EvalQuery]:
    """Parse a JSONL dataset, validating every line against the registry."""
    queries: list[EvalQuery] = []
    seen_ids: set[str] = set()
    for line_no, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"line {line_no}: not valid JSON: {exc}") from exc
        try:
            query = EvalQuery(
                id=str(doc["id"]),
                query=str(doc["query"]),
                essential_task=str(doc["essential_task"]),
                image=str(doc["image"]) if doc.get("image") is not None else None,
            )
        except KeyError as exc:
            raise DatasetError(f"line {line_no}: missing field {exc}") from exc
        if query.id in seen_ids:
            raise DatasetError(f"line {line_no}: duplicate id {query.id!r}")
        seen_ids.add(query.id)
        if registry.get(query.essential_task) is None:
            raise DatasetError(
                f"line {line_no}: unknown essential_task {query.essential_task!r}"
            )
        queries.append(query)
    return queries


def run_benchmark(
    queries: list[EvalQuery],
    registry: ToolRegistry,
    backend_provider: BackendProvider,
    fixtures: Union[dict[str, bytes], Path, str, None],
    limits: PlannerLimits = PlannerLimits(),
    store_root: Union[Path, str, None] = None,
    credit: str = "executed",
    tool_timeout: float = 30.0,
) -> list[EvalResult]:
    """Run every query in a fresh session and judge essential-task planning.

    credit="executed" (default) requires the essential task to have run with
    status ok; credit="planned" gives credit for naming it even if the
    invocation then failed. Backend hard failures mark the query incorrect
    with the reason recorded; the run continues.
    """
    if credit not in ("executed", "planned"):
        raise ValueError("credit must be 'executed' or 'planned'")
    import tempfile

    if store_root is None:
        store_root = tempfile.mkdtemp(prefix="rsagent-eval-")
    engine = Engine(
        registry=registry,
        backend_provider=backend_provider,
        store_root=store_root,
        limits=limits,
        tool_timeout=tool_timeout,
    )
    results: list[EvalResult] = []
    for query in queries:
        session = engine.new_session()
        if query.image is not None:
            data = _load_fixture_image(fixtures, query.image)
            engine.upload(session, data, "image/png", stem=Path(query.image).stem)
        trace = engine.ask(session, query.query)
        executed = trace.executed_tools(status="ok" if credit == "executed" else None)
        correct = query.essential_task in executed
        failure = ""
        if trace.final is not None and trace.final.kind == "aborted":
            failure = f"{trace.final.reason}: {trace.final.text}"
        results.append(
            EvalResult(
                query_id=query.id,
                essential_task=query.essential_task,
                executed_tools=executed,
                correct=correct,
                trace=trace,
                failure=failure,
            )
        )
    return results


def _load_fixture_image(fixtures, name: str) -> bytes:
    if isinstance(fixtures, dict):
        if name not in fixtures:
            raise DatasetError(f"fixture image {name!r} not provided")
        return fixtures[name]
    if fixtures is None:
        raise DatasetError(f"query needs fixture image {name!r} but no fixtures were given")
    path = Path(fixtures) / name
    if not path.is_file():
        raise DatasetError(f"fixture image not found: {path}")
    return path.read_bytes()


def score(results: list[EvalResult]) -> EvalReport:
    """Aggregate per essential task (rows in first-appearance order) plus overall."""
    report = EvalReport()
    for result in results:
        row = report.per_task.setdefault(result.essential_task, TaskRow())
        row.n += 1
        report.overall.n += 1
        if result.correct:
            row.correct_n += 1
            report.overall.correct_n += 1
    assert report.overall.n == sum(r.n for r in report.per_task.values())
    assert report.overall.correct_n == sum(r.correct_n for r in report.per_task.values())
    return report


def _percent(value: Optional[float]) -> str:
    return "—" if value is None else f"{100.0 * value:.1f}%"


def emit_report(report: EvalReport, form: str = "table") -> str:
    """Render a report: 'table' for humans, 'structured' for machines (round-trips)."""
    if form == "structured":
        return json.dumps(
            {
                "per_task": {
                    name: {"n": row.n, "correct_n": row.correct_n, "correctness": row.correctness}
                    for name, row in report.per_task.items()
                },
                "overall": {
                    "n": report.overall.n,
                    "correct_n": report.overall.correct_n,
                    "correctness": report.overall.correctness,
                },
            },
            indent=2,
        )
    if form != "table":
        raise ValueError("format must be 'table' or 'structured'")
    width = max([len("Overall")] + [len(name) for name in report.per_task])
    lines = [f"{'Task'.ljust(width)}    n  correct  correctness"]
    for name, row in report.per_task.items():
        lines.append(
            f"{name.ljust(width)}  {row.n:3d}  {row.correct_n:7d}  {_percent(row.correctness):>11}"
        )
    lines.append(
        f"{'Overall'.ljust(width)}  {report.overall.n:3d}  {report.overall.correct_n:7d}  "
        f"{_percent(report.overall.correctness):>11}"
    )
    return "\n".join(lines)


def packaged_benchmark_paths() -> tuple[Path, Path, Path]:
    """Shipped dataset and scripts: (queries.jsonl, baseline script, sabotaged script)."""
    from importlib.resources import files as resource_files

    data = resource_files("rsagent.data")
    return (
        Path(str(data.joinpath("queries.jsonl"))),
        Path(str(data.joinpath("bench_script.yaml"))),
        Path(str(data.joinpath("bench_script_sabotaged.yaml"))),
    )


def report_from_json(text: str) -> EvalReport:
    doc = json.loads(text)
    report = EvalReport()
    for name, row in doc["per_task"].items():
        report.per_task[name] = TaskRow(n=int(row["n"]), correct_n=int(row["correct_n"]))
    report.overall = TaskRow(
        n=int(doc["overall"]["n"]), correct_n=int(doc["overall"]["correct_n"])
    )
    return report
