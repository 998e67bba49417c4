// Webcam landmark capture via the MediaPipe Hands + FaceMesh scripts loaded
// from the CDN in index.html. The console only extracts landmarks and ships
// them in the shared frame schema; all classification stays on the server.
//
// Face channel: nose tip is mesh index 1, the chin/jaw reference is mesh
// index 152 (console-chosen defaults; the schema only names the channels).

import { LandmarkFrame, Point3 } from "./schema.js";

declare const Hands: any;
declare const FaceMesh: any;

const NOSE_TIP_INDEX = 1;
const JAW_INDEX = 152;

export interface CaptureCallbacks {
  onFrame: (frame: LandmarkFrame) => void;
  onError: (message: string) => void;
}

export class WebcamCapture {
  private video: HTMLVideoElement;
  private hands: any = null;
  private faceMesh: any = null;
  private running = false;
  private t0 = 0;
  private lastHand: Point3[] | null = null;
  private lastFace: LandmarkFrame["face"] | null = null;

  constructor(private readonly callbacks: CaptureCallbacks,
              private readonly cameraIndex = 0) {
    this.video = document.createElement("video");
    this.video.playsInline = true;
  }

  async start(): Promise<void> {
    let stream: MediaStream;
    try {
      const devices = await navigator.mediaDevices.enumerateDevices();
      const cams = devices.filter((d) => d.kind === "videoinput");
      const deviceId = cams[this.cameraIndex]?.deviceId;
      stream = await navigator.mediaDevices.getUserMedia({
        video: deviceId ? { deviceId } : true,
      });
    } catch (err) {
      this.callbacks.onError(`camera unavailable: ${err}`);
      return;
    }
    this.video.srcObject = stream;
    await this.video.play();

    this.hands = new Hands({
      locateFile: (f: string) =>
        `https://cdn.jsdelivr.net/npm/@mediapipe/hands/${f}`,
    });
    this.hands.setOptions({
      maxNumHands: 1,
      modelComplexity: 1,
      minDetectionConfidence: 0.6,
      minTrackingConfidence: 0.6,
    });
    this.hands.onResults((results: any) => {
      const lm = results?.multiHandLandmarks?.[0];
      this.lastHand = lm
        ? lm.map((p: any) => [p.x, p.y, p.z] as Point3)
        : null;
    });

    this.faceMesh = new FaceMesh({
      locateFile: (f: string) =>
        `https://cdn.jsdelivr.net/npm/@mediapipe/face_mesh/${f}`,
    });
    this.faceMesh.setOptions({ maxNumFaces: 1, refineLandmarks: false });
    this.faceMesh.onResults((results: any) => {
      const lm = results?.multiFaceLandmarks?.[0];
      if (lm) {
        this.lastFace = {
          nose: [lm[NOSE_TIP_INDEX].x, lm[NOSE_TIP_INDEX].y],
          jaw: [lm[JAW_INDEX].x, lm[JAW_INDEX].y],
        };
      } else {
        this.lastFace = null;
      }
    });

    this.running = true;
    this.t0 = performance.now();
    void this.loop();
  }

  private async loop(): Promise<void> {
    while (this.running) {
      await this.hands.send({ image: this.video });
      await this.faceMesh.send({ image: this.video });
      const frame: LandmarkFrame = {
        t_ms: Math.round(performance.now() - this.t0),
      };
      if (this.lastHand) frame.hand = this.lastHand;
      if (this.lastFace) frame.face = this.lastFace;
      if (frame.hand || frame.face) this.callbacks.onFrame(frame);
      await new Promise((resolve) => requestAnimationFrame(resolve));
    }
  }

  stop(): void {
    this.running = false;
    const stream = this.video.srcObject as MediaStream | null;
    stream?.getTracks().forEach((t) => t.stop());
  }
}
