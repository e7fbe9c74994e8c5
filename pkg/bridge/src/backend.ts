import { readFileSync } from "node:fs";

export interface EmbeddingBackend {
  readonly model: string;
  readonly dim: number;
  encodeText(items: string[]): Promise<number[][]>;
  encodeImage(items: string[]): Promise<number[][]>;
  vocab(): Promise<string[]>;
}

export interface BridgeConfig {
  model: string;
  device: string;
  maxBatch: number;
  normalize: boolean;
}

/** Failure tied to one item of a batch; the server reports its index. */
export class ItemError extends Error {
  constructor(public readonly index: number, message: string) {
    super(`item ${index}: ${message}`);
  }
}

function fnv1a(text: string, seed: number): number {
  let hash = 0x811c9dc5 ^ seed;
  for (let i = 0; i < text.length; i++) {
    hash ^= text.charCodeAt(i);
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function fnv1aBytes(bytes: Uint8Array, seed: number): number {
  let hash = 0x811c9dc5 ^ seed;
  for (let i = 0; i < bytes.length; i++) {
    hash ^= bytes[i];
    hash = Math.imul(hash, 0x01000193);
  }
  return hash >>> 0;
}

function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

/**
 * Deterministic hash-derived embeddings, no model download required.
 *
 * Model ids look like `mock:<dim>` or `mock:<dim>:<seed>`. Text items hash
 * by content; image items hash by file bytes, so a missing path fails with
 * the offending index. Every component is rounded to float32 like a real
 * model's outputs on the wire.
 */
export class MockBackend implements EmbeddingBackend {
  readonly model: string;
  readonly dim: number;
  private readonly seed: number;

  constructor(dim: number, seed = 0) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`mock dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
    this.seed = seed >>> 0;
    this.model = seed === 0 ? `mock:${dim}` : `mock:${dim}:${seed}`;
  }

  private vectorFromHash(hash: number): number[] {
    const next = mulberry32(hash);
    const out = new Array<number>(this.dim);
    for (let j = 0; j < this.dim; j++) {
      out[j] = Math.fround(next() * 2 - 1);
    }
    return out;
  }

  async encodeText(items: string[]): Promise<number[][]> {
    return items.map((item) => this.vectorFromHash(fnv1a(item, this.seed)));
  }

  async encodeImage(items: string[]): Promise<number[][]> {
    return items.map((path, index) => {
      let bytes: Uint8Array;
      try {
        bytes = readFileSync(path);
      } catch {
        throw new ItemError(index, "file not found");
      }
      return this.vectorFromHash(fnv1aBytes(bytes, this.seed));
    });
  }

  async vocab(): Promise<string[]> {
    const tokens: string[] = [];
    for (let i = 0; i < 64; i++) {
      tokens.push(`tok${i.toString().padStart(2, "0")}`);
    }
    return tokens;
  }
}

/**
 * Real checkpoints through transformers.js, when the package is installed
 * and the weights are reachable (or cached). Loaded dynamically so the
 * bridge builds and the mock path runs without the dependency.
 */
class TransformersBackend implements EmbeddingBackend {
  readonly model: string;
  readonly dim: number;
  private readonly tokenizer: any;
  private readonly processor: any;
  private readonly textModel: any;
  private readonly visionModel: any;
  private readonly rawImage: any;

  private constructor(model: string, dim: number, parts: Record<string, any>) {
    this.model = model;
    this.dim = dim;
    this.tokenizer = parts.tokenizer;
    this.processor = parts.processor;
    this.textModel = parts.textModel;
    this.visionModel = parts.visionModel;
    this.rawImage = parts.rawImage;
  }

  static async load(model: string, device: string): Promise<TransformersBackend> {
    const moduleName = "@huggingface/transformers";
    let lib: any;
    try {
      lib = await import(moduleName);
    } catch (error) {
      throw new Error(
        `model ${model} needs the optional ${moduleName} package; ` +
          `install it or use a mock:<dim> model (${error})`
      );
    }
    const options = device ? { device } : {};
    const tokenizer = await lib.AutoTokenizer.from_pretrained(model);
    const processor = await lib.AutoProcessor.from_pretrained(model);
    const textModel = await lib.CLIPTextModelWithProjection.from_pretrained(model, options);
    const visionModel = await lib.CLIPVisionModelWithProjection.from_pretrained(model, options);
    const probe = await textModel(tokenizer(["probe"], { padding: true, truncation: true }));
    const dim = probe.text_embeds.dims.at(-1);
    return new TransformersBackend(model, dim, {
      tokenizer,
      processor,
      textModel,
      visionModel,
      rawImage: lib.RawImage,
    });
  }

  async encodeText(items: string[]): Promise<number[][]> {
    const inputs = this.tokenizer(items, { padding: true, truncation: true });
    const output = await this.textModel(inputs);
    return output.text_embeds.tolist();
  }

  async encodeImage(items: string[]): Promise<number[][]> {
    const images = [];
    for (let i = 0; i < items.length; i++) {
      try {
        images.push(await this.rawImage.read(items[i]));
      } catch {
        throw new ItemError(i, "file not found");
      }
    }
    const inputs = await this.processor(images);
    const output = await this.visionModel(inputs);
    return output.image_embeds.tolist();
  }

  async vocab(): Promise<string[]> {
    const table: Map<string, number> | Record<string, number> | undefined =
      this.tokenizer?.model?.tokens_to_ids ?? this.tokenizer?.model?.vocab;
    if (!table) {
      throw new Error(`model ${this.model} does not expose a token inventory`);
    }
    if (table instanceof Map) {
      const tokens = new Array<string>(table.size);
      for (const [token, id] of table.entries()) tokens[id] = token;
      return tokens;
    }
    if (Array.isArray(table)) {
      return table;
    }
    const entries = Object.entries(table);
    const tokens = new Array<string>(entries.length);
    for (const [token, id] of entries) tokens[id] = token;
    return tokens;
  }
}

const MOCK_PATTERN = /^mock:(\d+)(?::(\d+))?$/;

export async function createBackend(cfg: BridgeConfig): Promise<EmbeddingBackend> {
  const mock = MOCK_PATTERN.exec(cfg.model);
  if (mock) {
    return new MockBackend(Number(mock[1]), mock[2] ? Number(mock[2]) : 0);
  }
  return TransformersBackend.load(cfg.model, cfg.device);
}
