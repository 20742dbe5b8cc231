"""Tool specs, the frozen registry, system-prompt rendering, and action validation.

Tool specs are configuration, not code: they load from YAML (one document per
tool) so categories and in-context examples are editable without a rebuild.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from importlib.resources import files as resource_files
from pathlib import Path
from typing import Optional, Union

import yaml

from .core import FileRef, Session, UnknownFile

INPUT_KINDS = {
    "image_file",
    "mask_file",
    "detections_file",
    "polygon_file",
    "string",
    "number",
    "category",
    "region",
}
FILE_KINDS = {"image_file", "mask_file", "detections_file", "polygon_file", "region"}

_MIME_BY_KIND = {
    "image_file": ("image/",),
    "mask_file": ("image/",),
    "detections_file": ("application/json",),
    "polygon_file": ("application/json",),
    "region": ("image/", "application/json"),
}


class RegistryError(Exception):
    pass


class DuplicateName(RegistryError):
    pass


class InvalidSpec(RegistryError):
    pass


class ActionValidationError(Exception):
    """Recoverable validation failure; its message is fed back as an observation."""


class UnknownTool(ActionValidationError):
    def __init__(self, name: str, available: list[str]):
        super().__init__(f"unknown tool {name!r}; available tools: {', '.join(available)}")
        self.name = name


class MissingInput(ActionValidationError):
    def __init__(self, tool: str, fields: list[str]):
        super().__init__(f"{tool} is missing required input(s): {', '.join(fields)}")
        self.fields = fields


class InvalidInput(ActionValidationError):
    pass


class UnknownFileInput(ActionValidationError):
    def __init__(self, field_name: str, name: str):
        super().__init__(
            f"input {field_name!r} names a file that does not exist in this session: {name!r}. "
            "Only use file names that were uploaded or appeared in an Observation."
        )
        self.name = name


class UnsupportedCategory(ActionValidationError):
    def __init__(self, tool: str, category: str, supported: list[str]):
        super().__init__(
            f"{tool} does not support category {category!r}; supported categories: "
            f"{', '.join(supported)}"
        )
        self.category = category
        self.supported = supported


@dataclass(frozen=True)
class ToolInput:
    name: str
    kind: str
    required: bool = True


@dataclass(frozen=True)
class ToolOutput:
    name: str
    kind: str


@dataclass(frozen=True)
class ToolExample:
    query: str
    action_input: dict
    observation: str


@dataclass(frozen=True)
class NativeExecution:
    id: str


@dataclass(frozen=True)
class RemoteExecution:
    url: str


Execution = Union[NativeExecution, RemoteExecution]


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    inputs: tuple[ToolInput, ...]
    outputs: tuple[ToolOutput, ...]
    execution: Execution
    categories: tuple[str, ...] = ()
    dependencies: tuple[str, ...] = ()
    examples: tuple[ToolExample, ...] = ()

    def input_named(self, name: str) -> Optional[ToolInput]:
        for inp in self.inputs:
            if inp.name == name:
                return inp
        return None


@dataclass
class ValidatedInvocation:
    """A type-checked invocation: file inputs resolved, scalars coerced."""

    spec: ToolSpec
    files: dict[str, FileRef]
    params: dict[str, Union[str, float, int]]


class ToolRegistry:
    """Ordered tool catalog; immutable (and freely shareable) once frozen."""

    def __init__(self):
        self._specs: dict[str, ToolSpec] = {}
        self._frozen = False

    def register(self, spec: ToolSpec) -> None:
        if self._frozen:
            raise RegistryError("registry is frozen")
        if spec.name in self._specs:
            raise DuplicateName(f"tool {spec.name!r} already registered")
        _check_spec(spec)
        self._specs[spec.name] = spec

    def freeze(self) -> "ToolRegistry":
        """Validate cross-tool invariants (dependencies exist, graph acyclic) and seal."""
        for spec in self._specs.values():
            for dep in spec.dependencies:
                if dep not in self._specs:
                    raise InvalidSpec(f"{spec.name} depends on unregistered tool {dep!r}")
        _check_acyclic({s.name: s.dependencies for s in self._specs.values()})
        for spec in self._specs.values():
            for example in spec.examples:
                _check_example(spec, example)
        self._frozen = True
        return self

    @property
    def frozen(self) -> bool:
        return self._frozen

    def get(self, name: str) -> Optional[ToolSpec]:
        return self._specs.get(name)

    def names(self) -> list[str]:
        return list(self._specs)

    def __iter__(self):
        return iter(self._specs.values())

    def __len__(self) -> int:
        return len(self._specs)


def _check_spec(spec: ToolSpec) -> None:
    if not spec.name or not spec.name.replace("_", "").isalnum() or spec.name != spec.name.lower():
        raise InvalidSpec(f"tool name must be snake_case: {spec.name!r}")
    seen = set()
    for inp in spec.inputs:
        if inp.kind not in INPUT_KINDS:
            raise InvalidSpec(f"{spec.name}.{inp.name}: unknown input kind {inp.kind!r}")
        if inp.name in seen:
            raise InvalidSpec(f"{spec.name}: duplicate input {inp.name!r}")
        seen.add(inp.name)
        if inp.kind == "category" and not spec.categories:
            raise InvalidSpec(f"{spec.name}: category input {inp.name!r} on a category-free tool")
    if not isinstance(spec.execution, (NativeExecution, RemoteExecution)):
        raise InvalidSpec(f"{spec.name}: execution must be native or remote")


def _check_acyclic(graph: dict[str, tuple[str, ...]]) -> None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in graph}

    def visit(node: str, path: list[str]) -> None:
        color[node] = GRAY
        for dep in graph[node]:
            if color[dep] == GRAY:
                raise InvalidSpec(f"dependency cycle: {' -> '.join(path + [node, dep])}")
            if color[dep] == WHITE:
                visit(dep, path + [node])
        color[node] = BLACK

    for node in graph:
        if color[node] == WHITE:
            visit(node, [])


def _check_example(spec: ToolSpec, example: ToolExample) -> None:
    """Structural self-consistency of shipped examples (no session to resolve files)."""
    declared = {inp.name: inp for inp in spec.inputs}
    for key, value in example.action_input.items():
        inp = declared.get(key)
        if inp is None:
            raise InvalidSpec(f"{spec.name} example uses undeclared input {key!r}")
        if inp.kind == "category" and value not in spec.categories:
            raise InvalidSpec(f"{spec.name} example category {value!r} not in spec categories")
        if inp.kind in FILE_KINDS and not isinstance(value, str):
            raise InvalidSpec(f"{spec.name} example file input {key!r} must be a name string")
    missing = [n for n, inp in declared.items() if inp.required and n not in example.action_input]
    if missing:
        raise InvalidSpec(f"{spec.name} example missing required input(s): {', '.join(missing)}")


# ---------------------------------------------------------------------------
# System prompt
# ---------------------------------------------------------------------------

GRAMMAR_TEXT = """Every reply must use exactly one of these three forms.

To call a tool:
Thought: <why this tool, optional>
Action: <tool name>
Action Input: <single-line JSON object; values must be strings or numbers>

To answer the user once the observations contain what you need:
Thought: <optional>
Final Answer: <your answer>

To ask the user for missing information instead of guessing:
Clarify: <one question>

After each Action the engine replies with an "Observation: ..." message
containing the tool results and the names of any files it produced."""


def render_system_prompt(registry: ToolRegistry, session: Session) -> str:
    """Deterministic system prompt: principle, tool blocks, examples, cues, files."""
    if not registry.frozen:
        raise RegistryError("registry must be frozen before rendering prompts")
    lines: list[str] = []
    lines.append(
        "You are a remote sensing image analysis agent. You answer user requests "
        "about uploaded remote sensing imagery by planning tool calls and reading "
        "their observations."
    )
    lines.append("")
    lines.append("Rules:")
    lines.append(
        "1. Use tools to obtain facts about the image; never imagine or invent "
        "image content, tool results, or numbers."
    )
    lines.append(
        "2. Be strict with file names: only name files listed below or produced "
        "by an earlier Observation in this conversation. Never fabricate "
        "nonexistent files."
    )
    lines.append(
        "3. If the request cannot be satisfied with the available tools or the "
        "information given, say so in a Final Answer or ask with Clarify; do not guess."
    )
    lines.append("")
    lines.append("## Reply format")
    lines.append(GRAMMAR_TEXT)
    lines.append("")
    lines.append("## Tools")
    for spec in registry:
        lines.append(f"### {spec.name}")
        lines.append(spec.description.strip())
        if spec.categories:
            lines.append("Supported categories: " + ", ".join(spec.categories))
        else:
            lines.append("Supported categories: (not category-based)")
        lines.append("Inputs: " + (_render_io(spec.inputs) or "(none)"))
        lines.append("Outputs: " + (", ".join(f"{o.name} ({o.kind})" for o in spec.outputs) or "(none)"))
        if spec.dependencies:
            lines.append("Typically consumes output of: " + ", ".join(spec.dependencies))
        lines.append("")
    lines.append("## Examples")
    for spec in registry:
        for example in spec.examples:
            lines.append(f"User query: {example.query}")
            lines.append(f"Action: {spec.name}")
            lines.append("Action Input: " + json.dumps(example.action_input, sort_keys=True))
            lines.append(f"Observation: {example.observation}")
            lines.append("")
    lines.append("## Image captions (visual cues)")
    if session.visual_cues:
        for name, caption in session.visual_cues:
            lines.append(f'- {name}: "{caption}"')
    else:
        lines.append("(no images uploaded)")
    lines.append("")
    lines.append("## Files available in this session")
    if session.files:
        for name, ref in session.files.items():
            lines.append(f"- {name} ({ref.mime})")
    else:
        lines.append("(no files registered yet)")
    return "\n".join(lines)


def _render_io(inputs: tuple[ToolInput, ...]) -> str:
    parts = []
    for inp in inputs:
        suffix = "" if inp.required else ", optional"
        parts.append(f"{inp.name} ({inp.kind}{suffix})")
    return "; ".join(parts)


# ---------------------------------------------------------------------------
# Action validation
# ---------------------------------------------------------------------------

def validate_action(
    registry: ToolRegistry,
    session: Session,
    action_name: str,
    action_input: dict,
) -> ValidatedInvocation:
    """Check an LLM-proposed invocation against the tool's schema and the session registry.

    Guarantees on success: every declared required input is present and of the
    declared kind, every file-kind input resolves to a registered file, and
    every category-kind input is in the tool's supported list. Failures raise
    ActionValidationError subclasses whose messages read as observations.
    """
    if not registry.frozen:
        raise RegistryError("registry must be frozen before validating actions")
    spec = registry.get(action_name)
    if spec is None:
        raise UnknownTool(action_name, registry.names())
    declared = {inp.name: inp for inp in spec.inputs}
    extra = [k for k in action_input if k not in declared]
    if extra:
        raise InvalidInput(
            f"{spec.name} does not take input(s) {', '.join(repr(e) for e in extra)}; "
            f"expected: {', '.join(declared) or '(none)'}"
        )
    missing = [n for n, inp in declared.items() if inp.required and n not in action_input]
    if missing:
        raise MissingInput(spec.name, missing)

    files: dict[str, FileRef] = {}
    params: dict[str, Union[str, float, int]] = {}
    for name, value in action_input.items():
        inp = declared[name]
        if inp.kind in FILE_KINDS:
            if not isinstance(value, str):
                raise InvalidInput(f"{spec.name}.{name} must be a file name string")
            try:
                ref = session.resolve_file(value)
            except UnknownFile:
                raise UnknownFileInput(name, value) from None
            if not any(ref.mime.startswith(p) for p in _MIME_BY_KIND[inp.kind]):
                raise InvalidInput(
                    f"{spec.name}.{name} expects a {inp.kind.replace('_', ' ')} "
                    f"but {value!r} is {ref.mime}"
                )
            files[name] = ref
        elif inp.kind == "category":
            if not isinstance(value, str):
                raise InvalidInput(f"{spec.name}.{name} must be a category name string")
            if value not in spec.categories:
                raise UnsupportedCategory(spec.name, value, list(spec.categories))
            params[name] = value
        elif inp.kind == "number":
            if isinstance(value, bool) or not isinstance(value, (int, float, str)):
                raise InvalidInput(f"{spec.name}.{name} must be a number")
            try:
                params[name] = float(value)
            except ValueError:
                raise InvalidInput(f"{spec.name}.{name} must be a number, got {value!r}") from None
        else:  # string
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise InvalidInput(f"{spec.name}.{name} must be a string")
            params[name] = str(value)
    return ValidatedInvocation(spec=spec, files=files, params=params)


# ---------------------------------------------------------------------------
# YAML configuration
# ---------------------------------------------------------------------------

def specs_from_yaml(text: str) -> list[ToolSpec]:
    """Parse multi-document YAML, one tool spec per document."""
    specs = []
    for doc in yaml.safe_load_all(text):
        if doc is None:
            continue
        specs.append(_spec_from_doc(doc))
    return specs


def load_toolspecs(path: Path | str) -> list[ToolSpec]:
    return specs_from_yaml(Path(path).read_text())


def build_registry(specs: list[ToolSpec]) -> ToolRegistry:
    registry = ToolRegistry()
    for spec in specs:
        registry.register(spec)
    return registry.freeze()


def _spec_from_doc(doc: dict) -> ToolSpec:
    try:
        inputs = tuple(_parse_io_entry(k, v) for k, v in (doc.get("inputs") or {}).items())
        outputs = tuple(
            ToolOutput(name=k, kind=str(v)) for k, v in (doc.get("outputs") or {}).items()
        )
        examples = tuple(
            ToolExample(
                query=str(e["query"]),
                action_input=dict(e["action_input"]),
                observation=str(e.get("observation", "")),
            )
            for e in doc.get("examples") or []
        )
        execution_doc = doc["execution"]
        if execution_doc["kind"] == "native":
            execution: Execution = NativeExecution(id=str(execution_doc["id"]))
        elif execution_doc["kind"] == "remote":
            execution = RemoteExecution(url=str(execution_doc["url"]))
        else:
            raise InvalidSpec(f"unknown execution kind {execution_doc['kind']!r}")
        return ToolSpec(
            name=str(doc["name"]),
            description=str(doc["description"]),
            inputs=inputs,
            outputs=outputs,
            execution=execution,
            categories=tuple(str(c) for c in doc.get("categories") or ()),
            dependencies=tuple(str(d) for d in doc.get("dependencies") or ()),
            examples=examples,
        )
    except (KeyError, TypeError) as exc:
        raise InvalidSpec(f"malformed tool spec document: {exc}") from exc


def _parse_io_entry(name: str, kind) -> ToolInput:
    kind = str(kind)
    required = True
    if kind.endswith("?"):
        required = False
        kind = kind[:-1]
    return ToolInput(name=str(name), kind=kind, required=required)


def default_toolspecs(remote_url: Optional[str] = None) -> list[ToolSpec]:
    """The packaged tool catalog; remote_url rewrites every remote endpoint."""
    text = resource_files("rsagent.data").joinpath("tools.yaml").read_text()
    specs = specs_from_yaml(text)
    if remote_url:
        specs = [
            replace(s, execution=RemoteExecution(url=remote_url))
            if isinstance(s.execution, RemoteExecution)
            else s
            for s in specs
        ]
    return specs


def default_registry(remote_url: Optional[str] = None) -> ToolRegistry:
    return build_registry(default_toolspecs(remote_url))
