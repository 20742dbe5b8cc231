// Minimal server-sent-events parsing over fetch streams. Works in browsers
// and in node 20+, unlike EventSource which node does not ship.

export interface RawServerEvent {
  event: string;
  data: string;
  id?: string;
}

/**
 * Incremental SSE parser: feed arbitrary chunks, get complete events.
 * Handles events split across chunk boundaries and multi-line data fields.
 */
export function createSSEParser(onEvent: (e: RawServerEvent) => void): (chunk: string) => void {
  let buffer = "";
  return (chunk: string) => {
    buffer += chunk.replace(/\r\n/g, "\n");
    let boundary = buffer.indexOf("\n\n");
    while (boundary !== -1) {
      const block = buffer.slice(0, boundary);
      buffer = buffer.slice(boundary + 2);
      const parsed = parseBlock(block);
      if (parsed) onEvent(parsed);
      boundary = buffer.indexOf("\n\n");
    }
  };
}

function parseBlock(block: string): RawServerEvent | null {
  let event = "message";
  let id: string | undefined;
  const data: string[] = [];
  for (const line of block.split("\n")) {
    if (line.startsWith("event:")) event = line.slice(6).trim();
    else if (line.startsWith("data:")) data.push(line.slice(5).trimStart());
    else if (line.startsWith("id:")) id = line.slice(3).trim();
  }
  if (data.length === 0) return null;
  return { event, data: data.join("\n"), id };
}

/** Read a streaming Response body as parsed SSE events. */
export async function* streamServerEvents(response: Response): AsyncGenerator<RawServerEvent> {
  if (!response.body) throw new Error("response has no body to stream");
  const reader = response.body.getReader();
  const decoder = new TextDecoder();
  const pending: RawServerEvent[] = [];
  const feed = createSSEParser((e) => pending.push(e));
  for (;;) {
    const { value, done } = await reader.read();
    if (value) feed(decoder.decode(value, { stream: true }));
    while (pending.length > 0) yield pending.shift()!;
    if (done) return;
  }
}
