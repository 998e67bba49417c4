import { describe, expect, it } from "vitest";

import { LandmarkFrame, validateFrame } from "../src/schema.js";
import { SyntheticSource, streamSynthetic } from "../src/synthetic.js";

describe("SyntheticSource", () => {
  it("emits schema-valid hand frames", () => {
    const source = new SyntheticSource({ pose: "open_palm" });
    for (let i = 0; i < 50; i++) {
      expect(validateFrame(source.frame(i * 50))).not.toBeNull();
    }
  });

  it("is deterministic for a seed", () => {
    const a = new SyntheticSource({ pose: "fist", seed: 9 });
    const b = new SyntheticSource({ pose: "fist", seed: 9 });
    for (let i = 0; i < 10; i++) {
      expect(a.frame(i * 50)).toEqual(b.frame(i * 50));
    }
  });

  it("nod pose oscillates the nose channel", () => {
    const source = new SyntheticSource({ pose: "nod", jitter: 0 });
    const ys: number[] = [];
    for (let t = 0; t <= 520; t += 33) ys.push(source.frame(t).face!.nose[1]);
    expect(Math.max(...ys) - Math.min(...ys)).toBeGreaterThan(0.06);
  });
});

describe("streamSynthetic", () => {
  it("sustains 20 fps of schema-valid frames for 30 simulated seconds", () => {
    // Virtual clock: the 30 s soak criterion runs instantly.
    let now = 0;
    const timers: Array<{ fn: () => void; periodMs: number; next: number }> = [];
    const frames: LandmarkFrame[] = [];
    const handle = streamSynthetic((f) => frames.push(f), {
      fps: 20,
      nowFn: () => now,
      setIntervalFn: (fn, ms) => {
        const timer = { fn, periodMs: ms, next: now + ms };
        timers.push(timer);
        return timer;
      },
      clearIntervalFn: (h) => {
        const i = timers.indexOf(h as never);
        if (i >= 0) timers.splice(i, 1);
      },
    });
    const end = 30_000;
    while (now < end) {
      now += 1;
      for (const timer of timers) {
        if (now >= timer.next) {
          timer.fn();
          timer.next += timer.periodMs;
        }
      }
    }
    handle.stop();
    expect(frames.length).toBeGreaterThanOrEqual(15 * 30); // >= 15 fps for 30 s
    expect(frames.every((f) => validateFrame(f) !== null)).toBe(true);
    const spanMs = frames[frames.length - 1].t_ms - frames[0].t_ms;
    expect(spanMs).toBeGreaterThanOrEqual(29_000);
  });
});
