"""The planning loop: prompt, decide, validate, execute, observe, answer.

Validation failures and tool crashes become observations the LLM can re-plan
around; only backend failures abort a plan. The loop is bounded: at most
max_steps tool executions and (max_steps + 1) * (1 + max_parse_retries) + 1
LLM calls.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

from .backends import BackendError, ChatMessage
from .core import ChatTurn, FileOrigin, FileRef, Session
from .execution import ToolExecutionError, ToolExecutor
from .protocol import (
    Action,
    Clarify,
    FinalAnswer,
    ParseFailure,
    parse_decision,
    render_decision,
    render_observation,
)
from .registry import ActionValidationError, ToolRegistry, validate_action
from .registry import render_system_prompt as _render_system_prompt

STATUS_OK = "ok"
STATUS_TOOL_ERROR = "tool_error"
STATUS_VALIDATION_ERROR = "validation_error"

FORCED_FINAL_INSTRUCTION = (
    "You must now give a Final Answer using only the observations above."
)


@dataclass(frozen=True)
class PlannerLimits:
    max_steps: int = 10
    max_parse_retries: int = 2
    tool_timeout: float = 30.0

    def __post_init__(self):
        if self.max_steps <= 0 or self.max_parse_retries < 0 or self.tool_timeout <= 0:
            raise ValueError("planner limits must be positive")


@dataclass
class PlanStep:
    index: int
    thought: str
    tool: str
    action_input: dict
    observation: str
    produced_files: list[FileRef] = field(default_factory=list)
    status: str = STATUS_OK


@dataclass
class PlanOutcome:
    kind: str  # final_answer | clarify | aborted
    text: str = ""
    reason: str = ""  # set for aborted: unparseable | step_limit | backend_error


@dataclass
class AgentTrace:
    steps: list[PlanStep] = field(default_factory=list)
    final: Optional[PlanOutcome] = None
    llm_calls: int = 0
    wall_time: float = 0.0

    def executed_tools(self, status: Optional[str] = STATUS_OK) -> list[str]:
        return [s.tool for s in self.steps if status is None or s.status == status]

    def to_dict(self) -> dict:
        return {
            "steps": [
                {
                    "index": s.index,
                    "thought": s.thought,
                    "tool": s.tool,
                    "action_input": s.action_input,
                    "observation": s.observation,
                    "produced_files": [f.name for f in s.produced_files],
                    "status": s.status,
                }
                for s in self.steps
            ],
            "final": None
            if self.final is None
            else {"kind": self.final.kind, "text": self.final.text, "reason": self.final.reason},
            "llm_calls": self.llm_calls,
        }

    def fingerprint(self) -> str:
        """Canonical serialization without timing, for determinism comparisons."""
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass(frozen=True)
class PlanEvent:
    kind: str  # thought | action | observation | final | clarify | error
    step: Optional[int]
    payload: dict


EventCallback = Callable[[PlanEvent], None]


def trace_events(trace: AgentTrace) -> list[PlanEvent]:
    """The event linearization of a finished trace: 3 events per step, then a terminal."""
    events: list[PlanEvent] = []
    for step in trace.steps:
        events.append(PlanEvent("thought", step.index, {"text": step.thought}))
        events.append(
            PlanEvent("action", step.index, {"tool": step.tool, "input": step.action_input})
        )
        events.append(
            PlanEvent(
                "observation",
                step.index,
                {
                    "text": step.observation,
                    "files": [f.name for f in step.produced_files],
                    "status": step.status,
                },
            )
        )
    if trace.final is not None:
        if trace.final.kind == "final_answer":
            events.append(PlanEvent("final", None, {"text": trace.final.text}))
        elif trace.final.kind == "clarify":
            events.append(PlanEvent("clarify", None, {"text": trace.final.text}))
        else:
            events.append(
                PlanEvent("error", None, {"reason": trace.final.reason, "text": trace.final.text})
            )
    return events


def ingest_image(
    session: Session,
    data: bytes,
    mime: str,
    registry: ToolRegistry,
    executor: ToolExecutor,
    stem: str = "input",
    caption_tool: str = "image_captioning",
) -> tuple[FileRef, str]:
    """Register an upload and caption it once; the cue rides every later prompt.

    Captioning failure degrades to "(no caption available)" rather than
    blocking the upload.
    """
    ref = session.register_file(FileOrigin.user_upload, stem, mime, data)
    caption = "(no caption available)"
    if registry.get(caption_tool) is not None:
        try:
            invocation = validate_action(registry, session, caption_tool, {"image": ref.name})
            result = executor.run(session, invocation)
            text = result.outputs.get("caption")
            if isinstance(text, str) and text:
                caption = text
        except (ActionValidationError, ToolExecutionError):
            pass
    session.add_visual_cue(ref.name, caption)
    return ref, caption


class _Unparseable(Exception):
    def __init__(self, failure: ParseFailure):
        self.failure = failure


def run_plan(
    session: Session,
    user_query: str,
    registry: ToolRegistry,
    backend,
    limits: PlannerLimits = PlannerLimits(),
    executor: Optional[ToolExecutor] = None,
    on_event: Optional[EventCallback] = None,
) -> AgentTrace:
    """Run one plan to completion. Always returns a trace with a terminal outcome."""
    executor = executor or ToolExecutor(timeout=limits.tool_timeout)
    trace = AgentTrace()
    started = time.monotonic()
    emit = on_event or (lambda event: None)
    plan_msgs: list[ChatMessage] = []

    def messages() -> list[ChatMessage]:
        msgs = [ChatMessage("system", _render_system_prompt(registry, session))]
        for turn in session.history:
            msgs.append(ChatMessage("user" if turn.role == "user" else "assistant", turn.text))
        msgs.append(ChatMessage("user", user_query))
        msgs.extend(plan_msgs)
        return msgs

    def complete() -> str:
        trace.llm_calls += 1
        return backend.complete(messages())

    def decide() -> object:
        """One decision, with bounded corrective re-prompts on parse failures."""
        raw = complete()
        for _ in range(limits.max_parse_retries):
            decision = parse_decision(raw)
            if not isinstance(decision, ParseFailure):
                return decision
            plan_msgs.append(ChatMessage("assistant", raw or "(empty reply)"))
            plan_msgs.append(
                ChatMessage(
                    "user",
                    f"Your last reply could not be parsed ({decision.describe()}). "
                    "Reply again using exactly the documented format: optional Thought "
                    "lines, then either an Action with a single-line JSON Action Input, "
                    "or a Final Answer, or a Clarify question.",
                )
            )
            raw = complete()
        decision = parse_decision(raw)
        if isinstance(decision, ParseFailure):
            raise _Unparseable(decision)
        return decision

    def finish(outcome: PlanOutcome) -> AgentTrace:
        trace.final = outcome
        trace.wall_time = time.monotonic() - started
        session.history.append(ChatTurn("user", user_query))
        if outcome.kind in ("final_answer", "clarify"):
            session.history.append(ChatTurn("agent", outcome.text))
        session.traces.append(trace)
        if outcome.kind == "final_answer":
            emit(PlanEvent("final", None, {"text": outcome.text}))
        elif outcome.kind == "clarify":
            emit(PlanEvent("clarify", None, {"text": outcome.text}))
        else:
            emit(PlanEvent("error", None, {"reason": outcome.reason, "text": outcome.text}))
        return trace

    try:
        for index in range(limits.max_steps):
            decision = decide()
            if isinstance(decision, FinalAnswer):
                return finish(PlanOutcome(kind="final_answer", text=decision.answer))
            if isinstance(decision, Clarify):
                return finish(PlanOutcome(kind="clarify", text=decision.question))

            emit(PlanEvent("thought", index, {"text": decision.thought}))
            emit(PlanEvent("action", index, {"tool": decision.tool, "input": decision.input}))
            step = _execute_step(session, registry, executor, decision, index)
            trace.steps.append(step)
            emit(
                PlanEvent(
                    "observation",
                    index,
                    {
                        "text": step.observation,
                        "files": [f.name for f in step.produced_files],
                        "status": step.status,
                    },
                )
            )
            plan_msgs.append(ChatMessage("assistant", render_decision(decision)))
            plan_msgs.append(ChatMessage("user", step.observation))

        # Step budget exhausted: force one last completion.
        plan_msgs.append(ChatMessage("user", FORCED_FINAL_INSTRUCTION))
        final_decision = parse_decision(complete())
        if isinstance(final_decision, FinalAnswer):
            return finish(PlanOutcome(kind="final_answer", text=final_decision.answer))
        if isinstance(final_decision, Clarify):
            return finish(PlanOutcome(kind="clarify", text=final_decision.question))
        return finish(
            PlanOutcome(
                kind="aborted",
                reason="step_limit",
                text=f"step limit of {limits.max_steps} reached without a final answer",
            )
        )
    except _Unparseable as exc:
        return finish(
            PlanOutcome(
                kind="aborted",
                reason="unparseable",
                text=f"the model reply could not be parsed: {exc.failure.describe()}",
            )
        )
    except BackendError as exc:
        return finish(
            PlanOutcome(kind="aborted", reason="backend_error", text=str(exc))
        )


def _execute_step(
    session: Session,
    registry: ToolRegistry,
    executor: ToolExecutor,
    decision: Action,
    index: int,
) -> PlanStep:
    step = PlanStep(
        index=index,
        thought=decision.thought,
        tool=decision.tool,
        action_input=dict(decision.input),
        observation="",
    )
    try:
        invocation = validate_action(registry, session, decision.tool, decision.input)
    except ActionValidationError as exc:
        step.status = STATUS_VALIDATION_ERROR
        step.observation = f"Observation: step {index}, {decision.tool} was not executed: {exc}"
        return step
    try:
        result = executor.run(session, invocation)
    except ToolExecutionError as exc:
        step.status = STATUS_TOOL_ERROR
        step.observation = f"Observation: step {index}, {decision.tool} failed: {exc}"
        return step
    refs: list[FileRef] = []
    for produced in result.files:
        ref = session.register_file(
            FileOrigin.tool_output,
            stem=produced.name_hint,
            mime=produced.mime,
            data=produced.data,
            tool=invocation.spec.name,
            producing_step=index,
        )
        if produced.palette is not None:
            session.store.put_palette(session.session_id, ref.name, produced.palette)
        refs.append(ref)
    step.produced_files = refs
    step.observation = render_observation(index, decision.tool, result.outputs, refs)
    return step
