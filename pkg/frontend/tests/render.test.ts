import { describe, expect, it } from "vitest";

import { renderApp } from "../src/render";
import { knownFiles, replay, type UiEvent } from "../src/state";
import type { StreamEvent, ToolInfo } from "../src/types";

import fixture from "./fixtures/compound_events.json";

const TOOLS: ToolInfo[] = [
  {
    name: "object_detection",
    description: "Detect objects",
    categories: ["airplane"],
    inputs: [],
    outputs: [],
    dependencies: [],
  },
];

function recordedConversation(): UiEvent[] {
  return [
    { type: "connected", sessionId: "s1", tools: TOOLS },
    { type: "attachment", name: fixture.upload.file_name, caption: fixture.upload.caption },
    { type: "user_message", messageId: "m1", text: fixture.query },
    ...(fixture.events as StreamEvent[]).map(
      (event): UiEvent => ({ type: "stream", messageId: "m1", event }),
    ),
  ];
}

describe("pure DOM rendering", () => {
  it("replaying the recorded stream reproduces a fixed DOM snapshot", () => {
    const state = replay(recordedConversation());
    const root = renderApp(state, document);
    expect(root.outerHTML).toMatchSnapshot();
  });

  it("renders step cards in stream order with exactly one final bubble", () => {
    const state = replay(recordedConversation());
    const root = renderApp(state, document);
    const cards = [...root.querySelectorAll(".step-card")];
    expect(cards.map((c) => c.getAttribute("data-step"))).toEqual(["0", "1", "2"]);
    const tools = cards.map((c) => c.querySelector(".step-tool")?.textContent);
    expect(tools).toEqual(["landuse_classification", "object_detection", "object_counting"]);
    expect(root.querySelectorAll(".bubble.final")).toHaveLength(1);
    expect(root.querySelector(".bubble.final")?.textContent).toBe(
      "There are 2 airplanes on the runway.",
    );
  });

  it("never renders a file reference that did not arrive via events", () => {
    const state = replay(recordedConversation());
    const legal = knownFiles(state);
    const root = renderApp(state, document);
    const referenced = [...root.querySelectorAll("[data-file]")].map(
      (n) => n.getAttribute("data-file")!,
    );
    expect(referenced.length).toBeGreaterThan(0);
    for (const name of referenced) expect(legal.has(name)).toBe(true);
  });

  it("identical state yields identical DOM, replay after replay", () => {
    const a = renderApp(replay(recordedConversation()), document).outerHTML;
    const b = renderApp(replay(recordedConversation()), document).outerHTML;
    expect(a).toBe(b);
  });

  it("clarify outcome renders a question bubble and focuses the composer", () => {
    const state = replay([
      { type: "connected", sessionId: "s1", tools: [] },
      { type: "user_message", messageId: "m1", text: "count the things" },
      {
        type: "stream",
        messageId: "m1",
        event: { kind: "clarify", step: null, payload: { text: "Which things?" } },
      },
    ]);
    const root = renderApp(state, document);
    expect(root.querySelector(".bubble.clarify")?.textContent).toBe("Which things?");
    expect(root.querySelector("input[data-focus='true']")).not.toBeNull();
    expect(root.querySelector<HTMLButtonElement>("button.send")?.disabled).toBe(false);
  });

  it("error events render an error card and re-enable the composer", () => {
    const state = replay([
      { type: "connected", sessionId: "s1", tools: [] },
      { type: "user_message", messageId: "m1", text: "x" },
      {
        type: "stream",
        messageId: "m1",
        event: { kind: "error", step: null, payload: { reason: "backend_error", text: "boom" } },
      },
    ]);
    const root = renderApp(state, document);
    expect(root.querySelector(".bubble.error")?.textContent).toContain("backend_error");
    expect(root.querySelector<HTMLButtonElement>("button.send")?.disabled).toBe(false);
  });

  it("send is disabled while a plan is in flight", () => {
    const state = replay([
      { type: "connected", sessionId: "s1", tools: [] },
      { type: "user_message", messageId: "m1", text: "working…" },
    ]);
    const root = renderApp(state, document);
    expect(root.querySelector<HTMLButtonElement>("button.send")?.disabled).toBe(true);
    expect(root.querySelector(".bubble.pending")).not.toBeNull();
  });

  it("gateway-unreachable renders a retry banner without crashing", () => {
    const state = replay([{ type: "connect_failed", message: "fetch failed" }]);
    const root = renderApp(state, document);
    expect(root.querySelector(".banner.error")?.textContent).toContain("fetch failed");
    expect(root.querySelector("button.retry")).not.toBeNull();
  });

  it("capabilities sidebar lists the tools", () => {
    const state = replay([{ type: "connected", sessionId: "s1", tools: TOOLS }]);
    const root = renderApp(state, document);
    const tools = [...root.querySelectorAll(".tool-list .tool")].map((n) => n.textContent);
    expect(tools).toEqual(["object_detection"]);
  });
});
