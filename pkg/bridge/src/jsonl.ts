export function splitLines(buffer: string): { lines: string[]; rest: string } {
  const lines: string[] = [];
  let rest = buffer;

  while (true) {
    const newlineIndex = rest.indexOf("\n");
    if (newlineIndex < 0) break;
    const line = rest.slice(0, newlineIndex);
    rest = rest.slice(newlineIndex + 1);
    if (line.trim().length > 0) {
      lines.push(line);
    }
  }

  return { lines, rest };
}
