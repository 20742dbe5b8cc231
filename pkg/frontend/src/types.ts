export type StreamEventKind =
  | "thought"
  | "action"
  | "observation"
  | "final"
  | "clarify"
  | "error";

export interface StreamEventPayload {
  text?: string;
  tool?: string;
  input?: Record<string, string | number>;
  files?: string[];
  status?: string;
  reason?: string;
}

export interface StreamEvent {
  kind: StreamEventKind;
  step: number | null;
  payload: StreamEventPayload;
}

export interface Detection {
  category: string;
  bbox: [number, number, number, number]; // x_min, y_min, x_max, y_max
  score: number;
}

export interface PaletteClass {
  id: number;
  name: string;
  color: [number, number, number];
}

export interface ToolInput {
  name: string;
  kind: string;
  required: boolean;
}

export interface ToolInfo {
  name: string;
  description: string;
  categories: string[];
  inputs: ToolInput[];
  outputs: { name: string; kind: string }[];
  dependencies: string[];
}

export interface UploadResponse {
  file_name: string;
  caption: string;
}
