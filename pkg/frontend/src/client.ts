// Bridge client: streams landmark frames up, dispatches command and telemetry
// broadcasts down, and reconnects with exponential backoff when the socket
// drops. The console never classifies; recognition is server-side.

import {
  CommandRecord,
  LandmarkFrame,
  TelemetrySample,
  parseCommandLine,
  parseTelemetryLine,
  serializeFrame,
} from "./schema.js";
import { LineTransport } from "./transport.js";

export type TransportFactory = () => LineTransport;

export interface BridgeClientOptions {
  reconnect?: boolean;
  backoffInitialMs?: number;
  backoffMaxMs?: number;
  setTimeoutFn?: (fn: () => void, ms: number) => unknown;
}

export class BridgeClient {
  onCommand: (cmd: CommandRecord) => void = () => undefined;
  onTelemetry: (sample: TelemetrySample) => void = () => undefined;
  onStatus: (status: Record<string, unknown>) => void = () => undefined;
  onConnectionChange: (connected: boolean) => void = () => undefined;

  connected = false;
  framesSent = 0;
  reconnects = 0;

  private transport: LineTransport | null = null;
  private closed = false;
  private backoffMs: number;
  private readonly opts: Required<BridgeClientOptions>;

  constructor(private readonly factory: TransportFactory,
              options: BridgeClientOptions = {}) {
    this.opts = {
      reconnect: options.reconnect ?? true,
      backoffInitialMs: options.backoffInitialMs ?? 250,
      backoffMaxMs: options.backoffMaxMs ?? 5000,
      setTimeoutFn: options.setTimeoutFn ?? ((fn, ms) => setTimeout(fn, ms)),
    };
    this.backoffMs = this.opts.backoffInitialMs;
  }

  connect(): void {
    if (this.closed) return;
    const transport = this.factory();
    this.transport = transport;
    transport.onOpen = () => {
      this.connected = true;
      this.backoffMs = this.opts.backoffInitialMs;
      this.onConnectionChange(true);
    };
    transport.onClose = () => {
      const wasConnected = this.connected;
      this.connected = false;
      if (wasConnected) this.onConnectionChange(false);
      if (!this.closed && this.opts.reconnect) {
        const delay = this.backoffMs;
        this.backoffMs = Math.min(this.backoffMs * 2, this.opts.backoffMaxMs);
        this.reconnects += 1;
        this.opts.setTimeoutFn(() => this.connect(), delay);
      }
    };
    transport.onLine = (line) => this.dispatch(line);
  }

  close(): void {
    this.closed = true;
    this.transport?.close();
  }

  private dispatch(line: string): void {
    const telemetry = parseTelemetryLine(line);
    if (telemetry) {
      this.onTelemetry(telemetry);
      return;
    }
    const cmd = parseCommandLine(line);
    if (cmd) {
      this.onCommand(cmd);
      return;
    }
    try {
      const obj = JSON.parse(line);
      if (obj && typeof obj === "object" && "uptime_ms" in obj) {
        this.onStatus(obj);
      }
    } catch {
      /* unknown line: ignore */
    }
  }

  sendFrame(frame: LandmarkFrame): void {
    if (!this.connected || !this.transport) return;
    this.transport.send(serializeFrame(frame));
    this.framesSent += 1;
  }

  /** Manual G1..G5 buttons and other deliberate injections. */
  sendCommand(kind: string): void {
    this.transport?.send(JSON.stringify({ send: kind }));
  }

  requestStatus(): void {
    this.transport?.send("STATUS");
  }
}
