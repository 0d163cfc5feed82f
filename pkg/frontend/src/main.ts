/**
 * Browser entry point: connects to the local simulator, renders the mesh
 * stream, draws pressure gauges and angle sparklines, and forwards keyboard
 * commands. All protocol and state logic lives in the headless modules;
 * this file only does DOM and WebSocket plumbing.
 */

import * as THREE from "three";

import { handleKey } from "./keymap.js";
import {
  DEFAULT_ENDPOINT,
  HandshakeRejected,
  PRESSURE_MAX_KPA,
  PRESSURE_MIN_KPA,
  parseServerMessage,
  serializeCommand,
} from "./protocol.js";
import { MeshView, frameCamera, makeScene } from "./render.js";
import { SessionState } from "./state.js";

const state = new SessionState();

const renderer = new THREE.WebGLRenderer({ antialias: true });
renderer.setSize(window.innerWidth, window.innerHeight);
document.body.appendChild(renderer.domElement);

const banner = document.createElement("div");
banner.style.cssText =
  "position:fixed;top:0;left:0;right:0;padding:6px 12px;font:14px monospace;" +
  "color:#fff;background:#a33;display:none;z-index:10";
document.body.appendChild(banner);

const hud = document.createElement("canvas");
hud.width = 320;
hud.height = 220;
hud.style.cssText = "position:fixed;right:12px;bottom:12px;background:rgba(0,0,0,.55)";
document.body.appendChild(hud);
const hudCtx = hud.getContext("2d")!;

let view: MeshView | null = null;
let scene: THREE.Scene | null = null;
let camera: THREE.PerspectiveCamera | null = null;
let socket: WebSocket | null = null;
let lastFrameArrival = 0;
let latencyMs = 0;

function showBanner(text: string | null): void {
  banner.style.display = text ? "block" : "none";
  banner.textContent = text ?? "";
}

function connect(): void {
  socket = new WebSocket(DEFAULT_ENDPOINT);
  socket.onopen = () => showBanner(null);
  socket.onclose = () => {
    showBanner("connection lost; retrying...");
    setTimeout(connect, 1000); // reconnect: the server re-sends topology
  };
  socket.onmessage = (event) => {
    let msg;
    try {
      msg = parseServerMessage(String(event.data));
    } catch (err) {
      if (err instanceof HandshakeRejected) {
        showBanner(`handshake rejected: ${err.reason}`);
        socket?.close();
        return;
      }
      showBanner(String(err));
      return;
    }
    if (msg.type === "topology") {
      state.applyTopology(msg);
      view = new MeshView(msg);
      scene = makeScene(view);
      camera = frameCamera(msg, window.innerWidth / window.innerHeight);
      showBanner(null);
    } else if (msg.type === "frame") {
      const now = performance.now();
      latencyMs = lastFrameArrival ? now - lastFrameArrival : 0;
      lastFrameArrival = now;
      state.pushFrame(msg);
    } else {
      showBanner(`server error: ${msg.message}`);
    }
  };
}

window.addEventListener("keydown", (event) => {
  const cmd = handleKey({ key: event.key, shiftKey: event.shiftKey, code: event.code });
  if (cmd && socket && socket.readyState === WebSocket.OPEN) {
    socket.send(serializeCommand(cmd));
    event.preventDefault();
  }
});

window.addEventListener("resize", () => {
  renderer.setSize(window.innerWidth, window.innerHeight);
  if (camera) {
    camera.aspect = window.innerWidth / window.innerHeight;
    camera.updateProjectionMatrix();
  }
});

function drawHud(): void {
  hudCtx.clearRect(0, 0, hud.width, hud.height);
  hudCtx.font = "12px monospace";
  hudCtx.fillStyle = "#fff";
  const pressures = state.finalPressures();
  pressures.forEach((p, i) => {
    const y = 18 + i * 22;
    const span = PRESSURE_MAX_KPA - PRESSURE_MIN_KPA;
    const frac = (p - PRESSURE_MIN_KPA) / span;
    hudCtx.fillStyle = "#345";
    hudCtx.fillRect(70, y - 10, 180, 12);
    hudCtx.fillStyle = p >= 0 ? "#6c6" : "#c96";
    hudCtx.fillRect(70, y - 10, 180 * frac, 12);
    hudCtx.fillStyle = "#fff";
    hudCtx.fillText(`cav ${i + 1}`, 8, y);
    hudCtx.fillText(`${p.toFixed(1)} kPa`, 256, y);
  });
  // angle sparkline of the most recent monitor history
  const samples = state.samples;
  if (samples.length > 1) {
    const angles = samples.map((s) => s.angles[0] ?? 0);
    const lo = Math.min(...angles);
    const hi = Math.max(...angles);
    hudCtx.strokeStyle = "#8cf";
    hudCtx.beginPath();
    angles.forEach((a, i) => {
      const x = 8 + (i / (angles.length - 1)) * 244;
      const y = 200 - ((a - lo) / Math.max(hi - lo, 1e-9)) * 50;
      if (i === 0) hudCtx.moveTo(x, y);
      else hudCtx.lineTo(x, y);
    });
    hudCtx.stroke();
    hudCtx.fillText(`${angles[angles.length - 1].toFixed(2)} deg`, 256, 200);
  }
  hudCtx.fillText(`latency ${latencyMs.toFixed(0)} ms`, 8, 216);
  if (state.desync) {
    showBanner("frame stream out of sync with topology; waiting for handshake");
  }
}

function loop(): void {
  requestAnimationFrame(loop);
  state.drainLatest();
  if (view && state.positions && scene && camera) {
    const attr = view.geometry.getAttribute("position") as THREE.BufferAttribute;
    (attr.array as Float32Array).set(state.positions);
    attr.needsUpdate = true;
    view.geometry.computeVertexNormals();
    renderer.render(scene, camera);
  }
  drawHud();
}

connect();
loop();
