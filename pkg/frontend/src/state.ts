/**
 * Client-side session state: the last known topology, the most recently
 * applied frame, and gauge/angle histories for the cockpit plots.
 *
 * The state never touches the simulation; it only reflects what the server
 * streamed. Incoming frames can be buffered and drained latest-wins so a
 * slow render loop skips stale frames instead of falling behind.
 */

import { FrameMessage, TopologyMessage } from "./protocol.js";

export interface HistorySample {
  timeMs: number;
  pressures: number[];
  angles: number[];
}

export class SessionState {
  topology: TopologyMessage | null = null;
  /** Current surface vertex coordinates, flat xyz, or null before any frame. */
  positions: Float64Array | null = null;
  /** Set when a frame disagrees with the topology; cleared by a new topology. */
  desync = false;

  private lastFrame: FrameMessage | null = null;
  private history: HistorySample[] = [];
  private pending: FrameMessage[] = [];

  /**
   * Install the handshake topology. Also called on reconnect, which starts
   * a fresh session: all frame state and history is discarded.
   */
  applyTopology(topology: TopologyMessage): void {
    this.topology = topology;
    this.positions = Float64Array.from(topology.rest_positions);
    this.desync = false;
    this.lastFrame = null;
    this.history = [];
    this.pending = [];
  }

  /**
   * Apply one frame. Re-applying the frame already shown is a no-op, so
   * application is idempotent. A vertex-count mismatch marks the session
   * desynced and leaves the view untouched.
   */
  applyFrame(frame: FrameMessage): boolean {
    if (this.topology === null) {
      throw new Error("frame received before topology handshake");
    }
    if (frame.positions.length !== 3 * this.topology.vertex_count) {
      this.desync = true;
      return false;
    }
    if (this.lastFrame !== null && frame.time_ms === this.lastFrame.time_ms) {
      return true;
    }
    this.positions = Float64Array.from(frame.positions);
    this.lastFrame = frame;
    this.history.push({
      timeMs: frame.time_ms,
      pressures: [...frame.pressures],
      angles: [...frame.angles],
    });
    return true;
  }

  /** Queue a frame for the next render pass without applying it yet. */
  pushFrame(frame: FrameMessage): void {
    this.pending.push(frame);
  }

  /**
   * Apply only the newest queued frame and drop the rest (latest-wins).
   * Returns the number of frames that were skipped.
   */
  drainLatest(): number {
    if (this.pending.length === 0) {
      return 0;
    }
    const newest = this.pending[this.pending.length - 1];
    const skipped = this.pending.length - 1;
    this.pending = [];
    this.applyFrame(newest);
    return skipped;
  }

  get frameCount(): number {
    return this.history.length;
  }

  get samples(): readonly HistorySample[] {
    return this.history;
  }

  /** Gauge values of the most recent frame, cavity 1 first. */
  finalPressures(): number[] {
    return this.lastFrame ? [...this.lastFrame.pressures] : [];
  }

  /** Bending angles of the most recent frame, in monitor-id order. */
  finalAngles(): number[] {
    return this.lastFrame ? [...this.lastFrame.angles] : [];
  }

  finalTimeMs(): number | null {
    return this.lastFrame ? this.lastFrame.time_ms : null;
  }
}
