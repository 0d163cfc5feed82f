/**
 * Offline replay support: parse a recorded frame stream (one JSON message
 * per line, topology first) and the matching run log CSV so a session can
 * be reviewed without a live server.
 */

import {
  FrameMessage,
  ProtocolError,
  TopologyMessage,
  parseServerMessage,
} from "./protocol.js";

export interface Replay {
  topology: TopologyMessage;
  frames: FrameMessage[];
}

export function parseReplay(jsonl: string): Replay {
  const lines = jsonl.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new ProtocolError("replay stream is empty");
  }
  const first = parseServerMessage(lines[0]);
  if (first.type !== "topology") {
    throw new ProtocolError(`replay must start with topology, got ${first.type}`);
  }
  const frames: FrameMessage[] = [];
  for (const line of lines.slice(1)) {
    const msg = parseServerMessage(line);
    if (msg.type !== "frame") {
      throw new ProtocolError(`unexpected ${msg.type} message inside replay stream`);
    }
    if (msg.positions.length !== 3 * first.vertex_count) {
      throw new ProtocolError("frame vertex count differs from topology");
    }
    frames.push(msg);
  }
  return { topology: first, frames };
}

export interface RunLog {
  columns: string[];
  rows: number[][];
}

export function parseRunLog(csv: string): RunLog {
  const lines = csv.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length < 2) {
    throw new Error("run log needs a header and at least one row");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line, i) => {
    const fields = line.split(",");
    if (fields.length !== columns.length) {
      throw new Error(`run log row ${i + 1} has ${fields.length} fields, expected ${columns.length}`);
    }
    return fields.map((field) => {
      const value = Number(field);
      if (Number.isNaN(value)) {
        throw new Error(`run log row ${i + 1} has non-numeric field ${JSON.stringify(field)}`);
      }
      return value;
    });
  });
  return { columns, rows };
}

export function logColumn(log: RunLog, name: string): number[] {
  const index = log.columns.indexOf(name);
  if (index < 0) {
    throw new Error(`run log has no column ${JSON.stringify(name)}`);
  }
  return log.rows.map((row) => row[index]);
}
