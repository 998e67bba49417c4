// Console session state: what the panels render. Pure bookkeeping so the
// display logic is testable without a DOM.

import { CommandRecord, TelemetrySample } from "./schema.js";

export const TELEMETRY_CAPACITY = 600;
export const STALE_AFTER_MS = 2000;

export class FpsGauge {
  private stamps: number[] = [];

  constructor(private readonly windowMs = 2000) {}

  tick(nowMs: number): void {
    this.stamps.push(nowMs);
    const cutoff = nowMs - this.windowMs;
    while (this.stamps.length && this.stamps[0] < cutoff) this.stamps.shift();
  }

  fps(nowMs: number): number {
    const cutoff = nowMs - this.windowMs;
    while (this.stamps.length && this.stamps[0] < cutoff) this.stamps.shift();
    return (this.stamps.length * 1000) / this.windowMs;
  }
}

export class ConsoleSession {
  connected = false;
  lastCommand: CommandRecord | null = null;
  lastCommandAtMs: number | null = null;
  telemetry: TelemetrySample[] = [];
  lastTelemetryAtMs: number | null = null;
  readonly fpsGauge = new FpsGauge();

  frameSent(nowMs: number): void {
    this.fpsGauge.tick(nowMs);
  }

  commandReceived(cmd: CommandRecord, nowMs: number): void {
    // The panel always shows the most recent seq; a reconnect replays nothing,
    // so stale duplicates with lower seq are dropped.
    if (this.lastCommand === null || cmd.seq >= this.lastCommand.seq) {
      this.lastCommand = cmd;
      this.lastCommandAtMs = nowMs;
    }
  }

  telemetryReceived(sample: TelemetrySample, nowMs: number): void {
    this.telemetry.push(sample);
    if (this.telemetry.length > TELEMETRY_CAPACITY) {
      this.telemetry.splice(0, this.telemetry.length - TELEMETRY_CAPACITY);
    }
    this.lastTelemetryAtMs = nowMs;
  }

  telemetryStale(nowMs: number): boolean {
    return (
      this.lastTelemetryAtMs === null ||
      nowMs - this.lastTelemetryAtMs > STALE_AFTER_MS
    );
  }

  heightSeries(): number[] {
    return this.telemetry.map((t) => t.h);
  }

  rollSeries(): number[] {
    return this.telemetry.map((t) => t.roll);
  }
}
