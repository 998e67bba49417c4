// Line transports: the console speaks newline-delimited JSON over whatever
// byte stream is available. Browsers use a WebSocket (they cannot open raw
// TCP); node tests use a plain socket against the same bridge port.

export interface LineTransport {
  send(line: string): void;
  close(): void;
  onLine: (line: string) => void;
  onOpen: () => void;
  onClose: () => void;
}

type Handler = (line: string) => void;

abstract class BaseTransport implements LineTransport {
  onLine: Handler = () => undefined;
  onOpen: () => void = () => undefined;
  onClose: () => void = () => undefined;
  abstract send(line: string): void;
  abstract close(): void;

  private buffer = "";

  protected feed(text: string): void {
    this.buffer += text;
    let idx = this.buffer.indexOf("\n");
    while (idx >= 0) {
      const line = this.buffer.slice(0, idx).trim();
      this.buffer = this.buffer.slice(idx + 1);
      if (line) this.onLine(line);
      idx = this.buffer.indexOf("\n");
    }
  }

  protected flushRemainder(): void {
    const line = this.buffer.trim();
    this.buffer = "";
    if (line) this.onLine(line);
  }
}

/** Browser transport: one WebSocket message carries one or more lines. */
export class WsTransport extends BaseTransport {
  private ws: WebSocket;

  constructor(url: string) {
    super();
    this.ws = new WebSocket(url);
    this.ws.onopen = () => this.onOpen();
    this.ws.onclose = () => this.onClose();
    this.ws.onerror = () => undefined; // onclose always follows
    this.ws.onmessage = (ev) => {
      if (typeof ev.data === "string") {
        this.feed(ev.data);
        this.flushRemainder(); // message boundary ends a line
      }
    };
  }

  send(line: string): void {
    if (this.ws.readyState === 1) {
      this.ws.send(line.endsWith("\n") ? line : line + "\n");
    }
  }

  close(): void {
    this.ws.close();
  }
}

/** Node transport for tests and headless tooling (raw TCP to the bridge). */
export class TcpTransport extends BaseTransport {
  private sock: import("node:net").Socket | null = null;

  constructor(host: string, port: number) {
    super();
    void this.connect(host, port);
  }

  private async connect(host: string, port: number): Promise<void> {
    const net = await import("node:net");
    const sock = net.createConnection({ host, port });
    this.sock = sock;
    sock.setEncoding("utf-8");
    sock.on("connect", () => this.onOpen());
    sock.on("data", (chunk: string) => this.feed(chunk));
    sock.on("error", () => undefined);
    sock.on("close", () => this.onClose());
  }

  send(line: string): void {
    this.sock?.write(line.endsWith("\n") ? line : line + "\n");
  }

  close(): void {
    this.sock?.destroy();
  }
}
