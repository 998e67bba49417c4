// Synthetic landmark source: schema-identical frames without a camera, for
// tests, demos, and soak runs. The hand geometries match the recorded corpus
// poses, so the server-side classifier recognizes them.

import { LandmarkFrame, Point3 } from "./schema.js";

export const OPEN_PALM: [number, number][] = [
  [0.5, 0.74], [0.445, 0.705], [0.395, 0.67], [0.35, 0.635], [0.305, 0.6],
  [0.425, 0.575], [0.42, 0.4801], [0.4156, 0.3952], [0.4114, 0.3154],
  [0.475, 0.565], [0.475, 0.463], [0.475, 0.373], [0.475, 0.285],
  [0.525, 0.57], [0.53, 0.4751], [0.5344, 0.3902], [0.5386, 0.3104],
  [0.575, 0.585], [0.5889, 0.5062], [0.601, 0.4373], [0.6115, 0.3782],
];

export const FIST: [number, number][] = [
  [0.5, 0.72], [0.43, 0.67], [0.385, 0.63], [0.43, 0.602], [0.478, 0.595],
  [0.39, 0.555], [0.39, 0.477], [0.4632, 0.5348], [0.492, 0.58],
  [0.465, 0.545], [0.465, 0.465], [0.498, 0.5384], [0.5, 0.594],
  [0.54, 0.55], [0.54, 0.472], [0.5352, 0.534], [0.512, 0.582],
  [0.615, 0.565], [0.615, 0.495], [0.5652, 0.551], [0.512, 0.595],
];

export type SyntheticPose = "open_palm" | "fist" | "face_still" | "nod";

export interface SyntheticOptions {
  pose?: SyntheticPose;
  jitter?: number;
  seed?: number;
}

/** Small deterministic PRNG (mulberry32) so tests replay exactly. */
export function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class SyntheticSource {
  private readonly rand: () => number;
  private readonly pose: SyntheticPose;
  private readonly jitter: number;
  framesEmitted = 0;

  constructor(options: SyntheticOptions = {}) {
    this.pose = options.pose ?? "open_palm";
    this.jitter = options.jitter ?? 0.0015;
    this.rand = mulberry32(options.seed ?? 1);
  }

  private noisy(v: number): number {
    return v + (this.rand() - 0.5) * 2 * this.jitter;
  }

  frame(tMs: number): LandmarkFrame {
    this.framesEmitted += 1;
    if (this.pose === "face_still" || this.pose === "nod") {
      const osc =
        this.pose === "nod" ? 0.04 * Math.sin((2 * Math.PI * tMs) / 260.0) : 0;
      return {
        t_ms: tMs,
        face: {
          nose: [this.noisy(0.5), this.noisy(0.4 + osc)],
          jaw: [this.noisy(0.5), this.noisy(0.62)],
        },
      };
    }
    const base = this.pose === "fist" ? FIST : OPEN_PALM;
    const hand: Point3[] = base.map(([x, y]) => [this.noisy(x), this.noisy(y), 0]);
    return { t_ms: tMs, hand };
  }
}

export interface StreamHandle {
  stop(): void;
}

/**
 * Drive a synthetic capture loop at the requested rate, invoking `emit` for
 * every frame. Timer functions are injectable so tests can run 30 simulated
 * seconds instantly.
 */
export function streamSynthetic(
  emit: (frame: LandmarkFrame) => void,
  options: {
    fps?: number;
    source?: SyntheticSource;
    setIntervalFn?: (fn: () => void, ms: number) => unknown;
    clearIntervalFn?: (handle: unknown) => void;
    nowFn?: () => number;
  } = {},
): StreamHandle {
  const fps = options.fps ?? 20;
  const source = options.source ?? new SyntheticSource();
  const setIntervalFn =
    options.setIntervalFn ?? ((fn, ms) => setInterval(fn, ms));
  const clearIntervalFn =
    options.clearIntervalFn ?? ((h) => clearInterval(h as never));
  const now = options.nowFn ?? (() => Date.now());
  const t0 = now();
  const handle = setIntervalFn(() => {
    emit(source.frame(Math.round(now() - t0)));
  }, 1000 / fps);
  return { stop: () => clearIntervalFn(handle) };
}
