/** Minimal server-sent-events reader over a fetch body stream.

The service frames each log entry as "data: <json>" with a blank line after
it, emits ": keep-alive" comments while idle, and closes with an "event: end"
frame once the session has finished and the backlog is drained. EventSource
is not available in Node, so the console parses frames by hand; the same
parser runs in the browser and in tests.
*/

export interface SseMessage {
  event: string;
  data: string;
}

/** Split a raw SSE byte stream into messages. Comments are dropped. */
export async function* parseSseStream(
  stream: ReadableStream<Uint8Array>,
): AsyncGenerator<SseMessage> {
  const decoder = new TextDecoder();
  const reader = stream.getReader();
  let buffer = "";
  try {
    while (true) {
      const { done, value } = await reader.read();
      if (value) buffer += decoder.decode(value, { stream: true });
      let split: number;
      while ((split = buffer.indexOf("\n\n")) >= 0) {
        const frame = buffer.slice(0, split);
        buffer = buffer.slice(split + 2);
        const message = parseFrame(frame);
        if (message) yield message;
      }
      if (done) return;
    }
  } finally {
    reader.releaseLock();
  }
}

function parseFrame(frame: string): SseMessage | null {
  let event = "message";
  const data: string[] = [];
  for (const line of frame.split("\n")) {
    if (line.startsWith(":")) continue;
    if (line.startsWith("event:")) {
      event = line.slice("event:".length).trim();
    } else if (line.startsWith("data:")) {
      data.push(line.slice("data:".length).replace(/^ /, ""));
    }
  }
  if (data.length === 0 && event === "message") return null;
  return { event, data: data.join("\n") };
}
