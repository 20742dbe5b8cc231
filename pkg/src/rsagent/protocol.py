"""The line-oriented grammar between the LLM and the engine.

A reply is optional Thought lines followed by exactly one of:

    Action: <tool>
    Action Input: {"field": "value", ...}      (single line, flat map)

    Final Answer: <text to end of reply>

    Clarify: <one question, to end of reply>

parse_decision is total: any input returns a decision or a ParseFailure,
never an exception. LLM output is adversarial input.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Union

_TOOL_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_MARKERS = ("Action:", "Final Answer:", "Clarify:")
_ALL_MARKERS = _MARKERS + ("Thought:", "Action Input:", "Observation:")

Scalar = Union[str, int, float]


@dataclass(frozen=True)
class Action:
    tool: str
    input: dict
    thought: str = ""

    def __post_init__(self):
        if not self.tool:
            raise ValueError("Action.tool must be non-empty")


@dataclass(frozen=True)
class FinalAnswer:
    answer: str
    thought: str = ""

    def __post_init__(self):
        if not self.answer:
            raise ValueError("FinalAnswer.answer must be non-empty")


@dataclass(frozen=True)
class Clarify:
    question: str

    def __post_init__(self):
        if not self.question:
            raise ValueError("Clarify.question must be non-empty")


AgentDecision = Union[Action, FinalAnswer, Clarify]


@dataclass(frozen=True)
class ParseFailure:
    reason: str  # no_marker | bad_input_payload | multiple_actions | trailing_garbage
    span: str = ""

    def describe(self) -> str:
        detail = f" near {self.span!r}" if self.span else ""
        return f"{self.reason}{detail}"


def _clip(text: str, limit: int = 80) -> str:
    return text if len(text) <= limit else text[: limit - 1] + "…"


def _marker_of(line: str) -> str | None:
    stripped = line.lstrip()
    for marker in _MARKERS:
        if stripped.startswith(marker):
            return marker
    return None


def _gather_thought(lines: list[str]) -> str:
    parts = []
    for line in lines:
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("Thought:"):
            stripped = stripped[len("Thought:") :].strip()
            if stripped:
                parts.append(stripped)
        else:
            parts.append(stripped)
    return "\n".join(parts)


def parse_decision(text: str) -> Union[AgentDecision, ParseFailure]:
    """Parse one LLM reply. First marker wins; returns ParseFailure, never raises."""
    if not isinstance(text, str):
        return ParseFailure("no_marker", span=_clip(repr(text)))
    lines = text.splitlines()
    marker_idx = marker = None
    for i, line in enumerate(lines):
        found = _marker_of(line)
        if found:
            marker_idx, marker = i, found
            break
    if marker is None:
        return ParseFailure("no_marker", span=_clip(text.strip()))

    thought = _gather_thought(lines[:marker_idx])
    head = lines[marker_idx].lstrip()[len(marker) :]
    tail = lines[marker_idx + 1 :]

    if marker == "Final Answer:":
        answer = "\n".join([head] + tail).strip()
        if not answer:
            return ParseFailure("bad_input_payload", span="empty final answer")
        return FinalAnswer(answer=answer, thought=thought)

    if marker == "Clarify:":
        question = "\n".join([head] + tail).strip()
        if not question:
            return ParseFailure("bad_input_payload", span="empty clarify question")
        return Clarify(question=question)

    # Action
    for later in tail:
        if later.lstrip().startswith("Action:"):
            return ParseFailure("multiple_actions", span=_clip(later.strip()))
    tool = head.strip()
    if not _TOOL_NAME.match(tool):
        return ParseFailure("bad_input_payload", span=_clip(f"bad tool name {tool!r}"))
    payload_idx = None
    for i, line in enumerate(tail):
        if line.strip():
            payload_idx = i
            break
    if payload_idx is None or not tail[payload_idx].lstrip().startswith("Action Input:"):
        return ParseFailure("bad_input_payload", span="expected an 'Action Input:' line")
    payload_text = tail[payload_idx].lstrip()[len("Action Input:") :].strip()
    try:
        payload = json.loads(payload_text)
    except (json.JSONDecodeError, ValueError):
        return ParseFailure("bad_input_payload", span=_clip(payload_text))
    if not isinstance(payload, dict) or any(
        isinstance(v, bool) or not isinstance(v, (str, int, float)) for v in payload.values()
    ):
        return ParseFailure("bad_input_payload", span=_clip(payload_text))
    for later in tail[payload_idx + 1 :]:
        if later.strip():
            return ParseFailure("trailing_garbage", span=_clip(later.strip()))
    return Action(tool=tool, input=payload, thought=thought)


def render_decision(decision: AgentDecision) -> str:
    """Canonical text such that parse_decision(render_decision(d)) == d."""
    thought = getattr(decision, "thought", "")
    _check_free_text(thought, "thought")
    prefix = f"Thought: {thought}\n" if thought else ""
    if isinstance(decision, Action):
        for key, value in decision.input.items():
            if isinstance(value, bool) or not isinstance(value, (str, int, float)):
                raise ValueError(f"action input {key!r} must be a string or number")
        payload = json.dumps(decision.input, sort_keys=True, ensure_ascii=False)
        return f"{prefix}Action: {decision.tool}\nAction Input: {payload}"
    if isinstance(decision, FinalAnswer):
        return f"{prefix}Final Answer: {decision.answer}"
    if isinstance(decision, Clarify):
        return f"Clarify: {decision.question}"
    raise TypeError(f"not a decision: {decision!r}")


def _check_free_text(text: str, label: str) -> None:
    for line in text.splitlines():
        if any(line.lstrip().startswith(m) for m in _ALL_MARKERS):
            raise ValueError(f"{label} may not contain grammar marker lines: {line!r}")


def render_observation(step_index: int, tool: str, outputs: dict, files: list) -> str:
    """One Observation block: structured-output summary plus produced file names.

    files may be FileRefs or plain names.
    """
    names = [getattr(f, "name", f) for f in files]
    parts = [_summarize(key, value) for key, value in outputs.items()]
    parts = [p for p in parts if p]
    if not parts and not names:
        return f"Observation: step {step_index}, {tool} produced no findings."
    text = f"Observation: step {step_index}, {tool}:"
    if parts:
        text += " " + "; ".join(parts)
    if names:
        text += f" Files: {', '.join(names)}."
    return text


def _summarize(key: str, value) -> str:
    if key == "count":
        return f"count = {value}"
    if key == "detections" and isinstance(value, list):
        by_category: dict[str, int] = {}
        for det in value:
            cat = det.get("category", "?") if isinstance(det, dict) else getattr(det, "category", "?")
            by_category[cat] = by_category.get(cat, 0) + 1
        breakdown = ", ".join(f"{c}: {n}" for c, n in sorted(by_category.items()))
        noun = "object" if len(value) == 1 else "objects"
        return f"{len(value)} {noun}" + (f" ({breakdown})" if breakdown else "")
    if key == "caption":
        return f'caption: "{value}"'
    if key == "label":
        return f"label = {value}"
    if key == "confidence":
        return f"confidence = {float(value):.2f}"
    if key == "classes" and isinstance(value, list):
        return "classes: " + ", ".join(str(v) for v in value)
    return f"{key} = {value}"
