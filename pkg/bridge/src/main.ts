import net from "node:net";
import process from "node:process";

import { BridgeConfig, createBackend } from "./backend.js";
import { serve } from "./server.js";

function parseArgs(argv: string[]): BridgeConfig & { port: number | null } {
  const config = {
    model: "mock:32",
    device: "",
    maxBatch: 256,
    normalize: false,
    port: null as number | null,
  };
  for (let i = 0; i < argv.length; i++) {
    const arg = argv[i];
    const next = () => {
      i += 1;
      if (i >= argv.length) throw new Error(`${arg} needs a value`);
      return argv[i];
    };
    switch (arg) {
      case "--model":
        config.model = next();
        break;
      case "--device":
        config.device = next();
        break;
      case "--max-batch":
        config.maxBatch = Number(next());
        break;
      case "--normalize":
        config.normalize = true;
        break;
      case "--port":
        config.port = Number(next());
        break;
      default:
        throw new Error(`unknown argument ${arg}`);
    }
  }
  if (!Number.isInteger(config.maxBatch) || config.maxBatch < 1) {
    throw new Error(`--max-batch must be a positive integer`);
  }
  return config;
}

async function main(): Promise<number> {
  let config;
  try {
    config = parseArgs(process.argv.slice(2));
  } catch (error) {
    console.error(`error: ${(error as Error).message}`);
    return 1;
  }

  // the model must be ready before the first handshake is answered
  const backend = await createBackend(config);
  const options = { backend, maxBatch: config.maxBatch, normalize: config.normalize };
  console.error(`bridge ready: model=${backend.model} dim=${backend.dim}`);

  if (config.port !== null) {
    const server = net.createServer((socket) => {
      serve(socket, socket, options).catch((error) => {
        console.error(`connection error: ${error}`);
        socket.destroy();
      });
    });
    await new Promise<void>((resolve) => server.listen(config.port, resolve));
    console.error(`listening on port ${config.port}`);
    await new Promise(() => undefined); // runs until killed
  }

  await serve(process.stdin, process.stdout, options);
  return 0;
}

main().then(
  (code) => process.exit(code),
  (error) => {
    console.error(`fatal: ${error?.stack ?? error}`);
    process.exit(1);
  }
);
