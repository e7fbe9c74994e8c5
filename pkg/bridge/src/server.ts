import type { Readable, Writable } from "node:stream";

import { EmbeddingBackend, ItemError } from "./backend.js";
import { splitLines } from "./jsonl.js";
import { BridgeRequest, BridgeResponse, parseRequest, serializeResponse } from "./protocol.js";

export interface ServeOptions {
  backend: EmbeddingBackend;
  maxBatch: number;
  normalize: boolean;
}

function l2Normalize(vector: number[]): number[] {
  let sum = 0;
  for (const v of vector) sum += v * v;
  const norm = Math.sqrt(sum);
  if (norm === 0) return vector;
  return vector.map((v) => v / norm);
}

function toWire(vectors: number[][], dim: number, normalize: boolean): number[][] {
  return vectors.map((vector, index) => {
    if (vector.length !== dim) {
      throw new Error(`item ${index}: backend returned length ${vector.length}, expected ${dim}`);
    }
    const prepared = normalize ? l2Normalize(vector) : vector;
    const rounded = prepared.map(Math.fround);
    if (!rounded.every(Number.isFinite)) {
      throw new Error(`item ${index}: backend returned a non-finite value`);
    }
    return rounded;
  });
}

export async function handleRequest(request: BridgeRequest, options: ServeOptions): Promise<BridgeResponse> {
  const { backend, maxBatch, normalize } = options;
  try {
    switch (request.op) {
      case "hello":
        return { id: request.id, dim: backend.dim, model: backend.model };
      case "vocab":
        return { id: request.id, tokens: await backend.vocab() };
      case "encode_text":
      case "encode_image": {
        if (request.items.length === 0) {
          return { id: request.id, error: "empty batch" };
        }
        if (request.items.length > maxBatch) {
          return { id: request.id, error: `batch of ${request.items.length} exceeds max ${maxBatch}` };
        }
        const raw =
          request.op === "encode_text"
            ? await backend.encodeText(request.items)
            : await backend.encodeImage(request.items);
        return { id: request.id, dim: backend.dim, vectors: toWire(raw, backend.dim, normalize) };
      }
    }
  } catch (error) {
    const message = error instanceof ItemError ? error.message : `${(error as Error)?.message ?? error}`;
    return { id: request.id, error: message };
  }
}

/**
 * Answer requests on `input` until it ends. One response per request, in
 * request order; a malformed line gets an error response with id -1 instead
 * of killing the process.
 */
export async function serve(input: Readable, output: Writable, options: ServeOptions): Promise<void> {
  let buffer = "";
  input.setEncoding("utf-8");
  for await (const chunk of input) {
    buffer += chunk;
    const { lines, rest } = splitLines(buffer);
    buffer = rest;
    for (const line of lines) {
      const request = parseRequest(line);
      const response =
        request === null
          ? ({ id: -1, error: "malformed request" } as BridgeResponse)
          : await handleRequest(request, options);
      output.write(serializeResponse(response));
    }
  }
}
