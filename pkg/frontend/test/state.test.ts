import { describe, expect, it } from "vitest";

import { FrameMessage, PROTOCOL_VERSION, TopologyMessage } from "../src/protocol.js";
import { SessionState } from "../src/state.js";

function topology(vertexCount = 4): TopologyMessage {
  return {
    type: "topology",
    protocol_version: PROTOCOL_VERSION,
    vertex_count: vertexCount,
    triangles: [[0, 1, 2]],
    rest_positions: Array.from({ length: 3 * vertexCount }, (_, i) => i),
    monitor_ids: [1],
  };
}

function frame(timeMs: number, vertexCount = 4, angle = 0): FrameMessage {
  return {
    type: "frame",
    time_ms: timeMs,
    positions: Array.from({ length: 3 * vertexCount }, (_, i) => i + timeMs),
    pressures: [timeMs / 10, 0, 0, 0, 0],
    angles: [angle],
  };
}

describe("SessionState", () => {
  it("starts from the rest positions after the handshake", () => {
    const state = new SessionState();
    state.applyTopology(topology());
    expect(Array.from(state.positions!)).toEqual(topology().rest_positions);
    expect(state.frameCount).toBe(0);
  });

  it("rejects frames that arrive before any topology", () => {
    expect(() => new SessionState().applyFrame(frame(0))).toThrow(/topology/);
  });

  it("applies frames and records gauge history", () => {
    const state = new SessionState();
    state.applyTopology(topology());
    state.applyFrame(frame(0, 4, 1));
    state.applyFrame(frame(10, 4, 2));
    expect(state.frameCount).toBe(2);
    expect(state.finalTimeMs()).toBe(10);
    expect(state.finalAngles()).toEqual([2]);
    expect(state.finalPressures()[0]).toBe(1);
  });

  it("is idempotent: re-applying the current frame changes nothing", () => {
    const state = new SessionState();
    state.applyTopology(topology());
    const f = frame(10);
    state.applyFrame(f);
    const positions = Array.from(state.positions!);
    const count = state.frameCount;
    expect(state.applyFrame(f)).toBe(true);
    expect(Array.from(state.positions!)).toEqual(positions);
    expect(state.frameCount).toBe(count);
  });

  it("flags desync on a vertex-count mismatch and keeps the last good view", () => {
    const state = new SessionState();
    state.applyTopology(topology(4));
    state.applyFrame(frame(0, 4));
    const positions = Array.from(state.positions!);
    expect(state.applyFrame(frame(10, 5))).toBe(false);
    expect(state.desync).toBe(true);
    expect(Array.from(state.positions!)).toEqual(positions);
  });

  it("treats a new topology as a fresh session", () => {
    const state = new SessionState();
    state.applyTopology(topology(4));
    state.applyFrame(frame(0, 4));
    state.applyFrame(frame(10, 5)); // desync
    state.applyTopology(topology(5));
    expect(state.desync).toBe(false);
    expect(state.frameCount).toBe(0);
    expect(state.positions!.length).toBe(15);
  });

  it("drains buffered frames latest-wins", () => {
    const state = new SessionState();
    state.applyTopology(topology());
    state.pushFrame(frame(0));
    state.pushFrame(frame(10));
    state.pushFrame(frame(20));
    const skipped = state.drainLatest();
    expect(skipped).toBe(2);
    expect(state.finalTimeMs()).toBe(20);
    expect(state.frameCount).toBe(1);
    expect(state.drainLatest()).toBe(0);
  });
});
