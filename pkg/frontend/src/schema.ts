// NDJSON wire records shared with the bridge. The frame validator mirrors the
// server-side one: 21 hand points and/or nose+jaw, finite coordinates within
// the jitter tolerance, integer millisecond timestamps.

export const HAND_POINTS = 21;
export const COORD_MIN = -0.5;
export const COORD_MAX = 1.5;

export type Point3 = [number, number, number?] | [number, number];

export interface LandmarkFrame {
  t_ms: number;
  hand?: Point3[];
  face?: { nose: [number, number]; jaw: [number, number] };
}

export interface CommandRecord {
  seq: number;
  t_ms: number;
  cmd: string;
}

export interface TelemetrySample {
  t_ms: number;
  posture: string;
  h: number;
  roll: number;
  pitch: number;
  feet_fz: number[];
  active?: string | null;
  phase?: string | null;
  speed_level?: number;
}

export const GESTURE_BUTTONS = [
  "GESTURE_G1",
  "GESTURE_G2",
  "GESTURE_G3",
  "GESTURE_G4",
  "GESTURE_G5",
] as const;

function coordOk(v: unknown): v is number {
  return (
    typeof v === "number" &&
    Number.isFinite(v) &&
    v >= COORD_MIN &&
    v <= COORD_MAX
  );
}

function pointOk(p: unknown): boolean {
  if (!Array.isArray(p) || p.length < 2 || p.length > 3) return false;
  if (!coordOk(p[0]) || !coordOk(p[1])) return false;
  return p.length === 2 || p[2] === null || typeof p[2] === "number";
}

function pairOk(p: unknown): boolean {
  return Array.isArray(p) && p.length === 2 && coordOk(p[0]) && coordOk(p[1]);
}

/** Validate a parsed frame object; returns null with no throw on bad input. */
export function validateFrame(obj: unknown): LandmarkFrame | null {
  if (typeof obj !== "object" || obj === null || Array.isArray(obj)) return null;
  const rec = obj as Record<string, unknown>;
  if (!Number.isInteger(rec.t_ms)) return null;

  let hand: Point3[] | undefined;
  if (rec.hand !== undefined && rec.hand !== null) {
    if (!Array.isArray(rec.hand) || rec.hand.length !== HAND_POINTS) return null;
    if (!rec.hand.every(pointOk)) return null;
    hand = rec.hand as Point3[];
  }

  let face: LandmarkFrame["face"];
  if (rec.face !== undefined && rec.face !== null) {
    const f = rec.face as Record<string, unknown>;
    if (typeof f !== "object" || !pairOk(f.nose) || !pairOk(f.jaw)) return null;
    face = { nose: f.nose as [number, number], jaw: f.jaw as [number, number] };
  }

  if (!hand && !face) return null;
  return { t_ms: rec.t_ms as number, hand, face };
}

export function parseFrameLine(line: string): LandmarkFrame | null {
  try {
    return validateFrame(JSON.parse(line));
  } catch {
    return null;
  }
}

export function serializeFrame(frame: LandmarkFrame): string {
  const out: Record<string, unknown> = { t_ms: frame.t_ms };
  if (frame.hand) out.hand = frame.hand;
  if (frame.face) out.face = frame.face;
  return JSON.stringify(out);
}

export function parseCommandLine(line: string): CommandRecord | null {
  try {
    const obj = JSON.parse(line);
    if (
      typeof obj === "object" &&
      obj !== null &&
      Number.isInteger(obj.seq) &&
      Number.isInteger(obj.t_ms) &&
      typeof obj.cmd === "string"
    ) {
      return obj as CommandRecord;
    }
  } catch {
    /* fallthrough */
  }
  return null;
}

export function parseTelemetryLine(line: string): TelemetrySample | null {
  try {
    const obj = JSON.parse(line);
    const t = obj?.telemetry;
    if (
      typeof t === "object" &&
      t !== null &&
      typeof t.t_ms === "number" &&
      typeof t.h === "number" &&
      Array.isArray(t.feet_fz)
    ) {
      return t as TelemetrySample;
    }
  } catch {
    /* fallthrough */
  }
  return null;
}
