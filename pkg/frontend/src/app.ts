// Console wiring: capture (webcam or synthetic) -> bridge socket -> panels.
// Query params: ?server=ws://host:port&camera=0&synthetic=open_palm

import { BridgeClient } from "./client.js";
import { WebcamCapture } from "./capture.js";
import { GESTURE_BUTTONS, LandmarkFrame } from "./schema.js";
import { ConsoleSession } from "./session.js";
import { SyntheticSource, SyntheticPose, streamSynthetic } from "./synthetic.js";
import { WsTransport } from "./transport.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function drawSeries(canvas: HTMLCanvasElement, values: number[],
                    lo: number, hi: number, color: string): void {
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#444";
  ctx.strokeRect(0.5, 0.5, canvas.width - 1, canvas.height - 1);
  if (values.length < 2) return;
  ctx.strokeStyle = color;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * (canvas.width - 4) + 2;
    const y = canvas.height - 2 -
      ((v - lo) / (hi - lo)) * (canvas.height - 4);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}

export function startConsole(): void {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? `ws://${window.location.hostname}:9000`;
  const synthetic = params.get("synthetic") as SyntheticPose | null;
  const cameraIndex = Number(params.get("camera") ?? "0");

  const session = new ConsoleSession();
  const client = new BridgeClient(() => new WsTransport(server));

  const badge = el<HTMLSpanElement>("conn-badge");
  const fpsLabel = el<HTMLSpanElement>("fps");
  const cmdLabel = el<HTMLSpanElement>("last-cmd");
  const postureLabel = el<HTMLSpanElement>("posture");
  const errorBox = el<HTMLDivElement>("error");
  const heightChart = el<HTMLCanvasElement>("chart-height");
  const rollChart = el<HTMLCanvasElement>("chart-roll");

  client.onConnectionChange = (connected) => {
    session.connected = connected;
  };
  client.onCommand = (cmd) => {
    session.commandReceived(cmd, Date.now());
    // Render immediately: the panel must reflect a command within 100 ms.
    cmdLabel.textContent = `${cmd.cmd} (seq ${cmd.seq})`;
  };
  client.onTelemetry = (sample) => {
    session.telemetryReceived(sample, Date.now());
    postureLabel.textContent =
      `${sample.posture}${sample.phase ? " / " + sample.phase : ""}`;
  };
  client.connect();

  const buttons = el<HTMLDivElement>("buttons");
  for (const kind of GESTURE_BUTTONS) {
    const button = document.createElement("button");
    button.textContent = kind.replace("GESTURE_", "");
    button.onclick = () => client.sendCommand(kind);
    buttons.appendChild(button);
  }

  const emit = (frame: LandmarkFrame) => {
    client.sendFrame(frame);
    session.frameSent(Date.now());
  };

  if (synthetic) {
    streamSynthetic(emit, { fps: 20, source: new SyntheticSource({ pose: synthetic }) });
  } else {
    const capture = new WebcamCapture({
      onFrame: emit,
      onError: (message) => {
        errorBox.textContent = message;
        const retry = document.createElement("button");
        retry.textContent = "retry camera";
        retry.onclick = () => {
          errorBox.textContent = "";
          void capture.start();
        };
        errorBox.appendChild(retry);
      },
    }, cameraIndex);
    void capture.start();
  }

  setInterval(() => {
    const now = Date.now();
    badge.textContent = session.connected
      ? (session.telemetryStale(now) ? "no telemetry" : "connected")
      : "disconnected";
    badge.className = session.connected && !session.telemetryStale(now)
      ? "badge ok" : "badge bad";
    fpsLabel.textContent = session.fpsGauge.fps(now).toFixed(1);
    drawSeries(heightChart, session.heightSeries(), 0.1, 0.45, "#4ade80");
    drawSeries(rollChart, session.rollSeries(), -0.4, 0.4, "#60a5fa");
  }, 100);
}

startConsole();
