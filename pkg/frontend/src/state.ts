import type { StreamEvent, ToolInfo } from "./types";

// Event-sourced UI state: every change is a UiEvent, the view is a pure
// function of the folded state, and replaying a recorded log reproduces the
// exact same state (and therefore the exact same DOM).

export type UiEvent =
  | { type: "connected"; sessionId: string; tools: ToolInfo[] }
  | { type: "connect_failed"; message: string }
  | { type: "attachment"; name: string; caption: string }
  | { type: "user_message"; messageId: string; text: string }
  | { type: "stream"; messageId: string; event: StreamEvent };

export interface StepCard {
  index: number;
  thought: string;
  tool: string;
  input: Record<string, string | number>;
  observation: string;
  files: string[];
  status: string;
}

export interface Outcome {
  kind: "final" | "clarify" | "error";
  text: string;
  reason?: string;
}

export interface AgentTurn {
  messageId: string;
  steps: StepCard[];
  outcome: Outcome | null;
}

export type Message =
  | { role: "user"; text: string }
  | { role: "agent"; turn: AgentTurn };

export interface UiState {
  sessionId: string | null;
  connectError: string | null;
  tools: ToolInfo[];
  attachments: { name: string; caption: string }[];
  messages: Message[];
  inFlight: boolean;
}

export const initialState: UiState = {
  sessionId: null,
  connectError: null,
  tools: [],
  attachments: [],
  messages: [],
  inFlight: false,
};

function findTurn(state: UiState, messageId: string): AgentTurn | null {
  for (let i = state.messages.length - 1; i >= 0; i--) {
    const message = state.messages[i];
    if (message.role === "agent" && message.turn.messageId === messageId) {
      return message.turn;
    }
  }
  return null;
}

function replaceTurn(state: UiState, turn: AgentTurn): UiState {
  const messages = state.messages.map((m) =>
    m.role === "agent" && m.turn.messageId === turn.messageId ? { role: "agent" as const, turn } : m,
  );
  return { ...state, messages };
}

function applyStream(state: UiState, messageId: string, event: StreamEvent): UiState {
  const turn = findTurn(state, messageId);
  if (turn === null || turn.outcome !== null) {
    return state; // unknown message or already terminal: ignore
  }
  if (event.kind === "final" || event.kind === "clarify" || event.kind === "error") {
    const outcome: Outcome = {
      kind: event.kind,
      text: event.payload.text ?? "",
      reason: event.payload.reason,
    };
    return { ...replaceTurn(state, { ...turn, outcome }), inFlight: false };
  }
  const index = event.step ?? 0;
  const steps = turn.steps.slice();
  let card = steps.find((s) => s.index === index);
  if (!card) {
    card = { index, thought: "", tool: "", input: {}, observation: "", files: [], status: "" };
    steps.push(card);
  } else {
    const at = steps.indexOf(card);
    card = { ...card };
    steps[at] = card;
  }
  if (event.kind === "thought") {
    card.thought = event.payload.text ?? "";
  } else if (event.kind === "action") {
    card.tool = event.payload.tool ?? "";
    card.input = event.payload.input ?? {};
  } else if (event.kind === "observation") {
    card.observation = event.payload.text ?? "";
    card.files = event.payload.files ?? [];
    card.status = event.payload.status ?? "";
  }
  return replaceTurn(state, { ...turn, steps });
}

export function applyEvent(state: UiState, event: UiEvent): UiState {
  switch (event.type) {
    case "connected":
      return { ...state, sessionId: event.sessionId, tools: event.tools, connectError: null };
    case "connect_failed":
      return { ...state, connectError: event.message };
    case "attachment":
      return { ...state, attachments: [...state.attachments, { name: event.name, caption: event.caption }] };
    case "user_message":
      return {
        ...state,
        inFlight: true,
        messages: [
          ...state.messages,
          { role: "user", text: event.text },
          { role: "agent", turn: { messageId: event.messageId, steps: [], outcome: null } },
        ],
      };
    case "stream":
      return applyStream(state, event.messageId, event.event);
  }
}

export function replay(events: UiEvent[], from: UiState = initialState): UiState {
  return events.reduce(applyEvent, from);
}

/** Every file name the state may legally reference (upload + observation names). */
export function knownFiles(state: UiState): Set<string> {
  const names = new Set<string>(state.attachments.map((a) => a.name));
  for (const message of state.messages) {
    if (message.role === "agent") {
      for (const step of message.turn.steps) {
        for (const file of step.files) names.add(file);
      }
    }
  }
  return names;
}
