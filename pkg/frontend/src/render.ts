import type { Message, StepCard, UiState } from "./state";

// Pure DOM construction: the same state always yields the same tree, so
// replaying a recorded event log is snapshot-testable. No fetches happen
// here; file names become data-file attributes the shell resolves through
// GatewayClient.fileUrl.

function el(doc: Document, tag: string, className?: string, text?: string): HTMLElement {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function renderFileChip(doc: Document, name: string): HTMLElement {
  const chip = el(doc, "span", "file-chip", name);
  chip.setAttribute("data-file", name);
  return chip;
}

function renderStepCard(doc: Document, step: StepCard): HTMLElement {
  const card = el(doc, "div", `step-card status-${step.status || "pending"}`);
  card.setAttribute("data-step", String(step.index));
  if (step.thought) {
    card.appendChild(el(doc, "div", "step-thought", step.thought));
  }
  if (step.tool) {
    const action = el(doc, "div", "step-action");
    action.appendChild(el(doc, "span", "step-tool", step.tool));
    action.appendChild(el(doc, "code", "step-input", JSON.stringify(step.input)));
    card.appendChild(action);
  }
  if (step.observation) {
    const observation = el(doc, "div", "step-observation", step.observation);
    card.appendChild(observation);
    if (step.files.length > 0) {
      const files = el(doc, "div", "step-files");
      for (const name of step.files) files.appendChild(renderFileChip(doc, name));
      card.appendChild(files);
    }
  }
  return card;
}

function renderMessage(doc: Document, message: Message): HTMLElement {
  if (message.role === "user") {
    return el(doc, "div", "msg user", message.text);
  }
  const wrap = el(doc, "div", "msg agent");
  const turn = message.turn;
  if (turn.steps.length > 0) {
    const trace = el(doc, "div", "trace");
    for (const step of turn.steps) trace.appendChild(renderStepCard(doc, step));
    wrap.appendChild(trace);
  }
  if (turn.outcome === null) {
    wrap.appendChild(el(doc, "div", "bubble pending", "…"));
  } else if (turn.outcome.kind === "final") {
    wrap.appendChild(el(doc, "div", "bubble final", turn.outcome.text));
  } else if (turn.outcome.kind === "clarify") {
    wrap.appendChild(el(doc, "div", "bubble clarify", turn.outcome.text));
  } else {
    wrap.appendChild(
      el(doc, "div", "bubble error", `${turn.outcome.reason ?? "error"}: ${turn.outcome.text}`),
    );
  }
  return wrap;
}

export function renderApp(state: UiState, doc: Document): HTMLElement {
  const root = el(doc, "div", "app");

  const sidebar = el(doc, "aside", "sidebar");
  sidebar.appendChild(el(doc, "h2", undefined, "Capabilities"));
  const toolList = el(doc, "ul", "tool-list");
  for (const tool of state.tools) {
    const item = el(doc, "li", "tool", tool.name);
    item.title = tool.description;
    toolList.appendChild(item);
  }
  sidebar.appendChild(toolList);
  root.appendChild(sidebar);

  const mainPane = el(doc, "main", "chat");
  if (state.connectError) {
    const banner = el(doc, "div", "banner error", `gateway unreachable: ${state.connectError}`);
    const retry = el(doc, "button", "retry", "retry");
    banner.appendChild(retry);
    mainPane.appendChild(banner);
  }

  if (state.attachments.length > 0) {
    const strip = el(doc, "div", "attachments");
    for (const attachment of state.attachments) {
      const card = el(doc, "figure", "attachment");
      const img = el(doc, "img") as HTMLImageElement;
      img.setAttribute("data-file", attachment.name);
      img.alt = attachment.caption;
      card.appendChild(img);
      card.appendChild(el(doc, "figcaption", undefined, `${attachment.name}: ${attachment.caption}`));
      strip.appendChild(card);
    }
    mainPane.appendChild(strip);
  }

  const conversation = el(doc, "div", "conversation");
  for (const message of state.messages) conversation.appendChild(renderMessage(doc, message));
  mainPane.appendChild(conversation);

  const composer = el(doc, "form", "composer");
  const input = el(doc, "input") as HTMLInputElement;
  input.type = "text";
  input.placeholder = "ask about the imagery…";
  const lastAgent = [...state.messages].reverse().find((m) => m.role === "agent");
  const clarifyPending =
    lastAgent?.role === "agent" && lastAgent.turn.outcome?.kind === "clarify";
  if (clarifyPending) input.setAttribute("data-focus", "true");
  const send = el(doc, "button", "send", "send") as HTMLButtonElement;
  if (state.inFlight) {
    send.disabled = true;
    input.disabled = true;
  }
  composer.appendChild(input);
  composer.appendChild(send);
  mainPane.appendChild(composer);

  root.appendChild(mainPane);
  return root;
}
