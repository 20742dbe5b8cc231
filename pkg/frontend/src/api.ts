import { streamServerEvents } from "./sse";
import type { StreamEvent, ToolInfo, UploadResponse } from "./types";

export class GatewayBusyError extends Error {}

export class GatewayError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

async function orThrow(response: Response): Promise<Response> {
  if (response.status === 409) throw new GatewayBusyError("a plan is already running");
  if (!response.ok) throw new GatewayError(response.status, await response.text());
  return response;
}

/** Thin client over the gateway HTTP routes; no state beyond the base URL. */
export class GatewayClient {
  constructor(
    readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private url(path: string): string {
    return `${this.baseUrl.replace(/\/$/, "")}${path}`;
  }

  async createSession(): Promise<string> {
    const response = await orThrow(await this.fetchFn(this.url("/api/sessions"), { method: "POST" }));
    return (await response.json()).session_id as string;
  }

  async listTools(): Promise<ToolInfo[]> {
    const response = await orThrow(await this.fetchFn(this.url("/api/tools")));
    return (await response.json()) as ToolInfo[];
  }

  async uploadImage(sessionId: string, data: Blob, filename: string): Promise<UploadResponse> {
    const form = new FormData();
    form.append("file", data, filename);
    const response = await orThrow(
      await this.fetchFn(this.url(`/api/sessions/${sessionId}/files`), { method: "POST", body: form }),
    );
    return (await response.json()) as UploadResponse;
  }

  async postMessage(sessionId: string, text: string): Promise<string> {
    const response = await orThrow(
      await this.fetchFn(this.url(`/api/sessions/${sessionId}/messages`), {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify({ text }),
      }),
    );
    return (await response.json()).message_id as string;
  }

  async *streamMessage(sessionId: string, messageId: string): AsyncGenerator<StreamEvent> {
    const response = await orThrow(
      await this.fetchFn(
        this.url(`/api/sessions/${sessionId}/events?message_id=${encodeURIComponent(messageId)}`),
      ),
    );
    for await (const raw of streamServerEvents(response)) {
      yield JSON.parse(raw.data) as StreamEvent;
    }
  }

  /** The only legal way to form a file URL: from a name the gateway reported. */
  fileUrl(sessionId: string, name: string): string {
    return this.url(`/api/files/${sessionId}/${encodeURIComponent(name)}`);
  }
}
