export interface HelloRequest {
  op: "hello";
  id: number;
}

export interface EncodeRequest {
  op: "encode_text" | "encode_image";
  id: number;
  items: string[];
}

export interface VocabRequest {
  op: "vocab";
  id: number;
}

export type BridgeRequest = HelloRequest | EncodeRequest | VocabRequest;

export interface HelloResponse {
  id: number;
  dim: number;
  model: string;
}

export interface VectorsResponse {
  id: number;
  dim: number;
  vectors: number[][];
}

export interface VocabResponse {
  id: number;
  tokens: string[];
}

export interface ErrorResponse {
  id: number;
  error: string;
}

export type BridgeResponse = HelloResponse | VectorsResponse | VocabResponse | ErrorResponse;

export function parseRequest(line: string): BridgeRequest | null {
  let value: unknown;
  try {
    value = JSON.parse(line);
  } catch {
    return null;
  }
  if (typeof value !== "object" || value === null) return null;
  const obj = value as Record<string, unknown>;
  if (typeof obj.id !== "number" || !Number.isInteger(obj.id) || obj.id < 0) return null;
  if (obj.op === "hello" || obj.op === "vocab") {
    return { op: obj.op, id: obj.id };
  }
  if (obj.op === "encode_text" || obj.op === "encode_image") {
    if (!Array.isArray(obj.items) || !obj.items.every((it) => typeof it === "string")) {
      return null;
    }
    return { op: obj.op, id: obj.id, items: obj.items as string[] };
  }
  return null;
}

export function serializeResponse(res: BridgeResponse): string {
  return `${JSON.stringify(res)}\n`;
}
