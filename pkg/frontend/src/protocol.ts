/**
 * Wire protocol for the simulator's teleoperation stream.
 *
 * The server speaks one JSON document per WebSocket frame, discriminated by
 * a "type" field: it sends {type: "topology"} once per connection, then
 * {type: "frame"} after every simulation step, and {type: "error"} replies
 * for bad commands. The client sends {type: "command"} messages only.
 */

export const PROTOCOL_VERSION = 1;

export const DEFAULT_ENDPOINT = "ws://localhost:8337";

export const PRESSURE_MIN_KPA = -50;
export const PRESSURE_MAX_KPA = 50;

export interface TopologyMessage {
  type: "topology";
  protocol_version: number;
  vertex_count: number;
  /** Triangle corner indices into the surface vertex array. */
  triangles: number[][];
  /** Flat xyz rest coordinates, length 3 * vertex_count, in mm. */
  rest_positions: number[];
  monitor_ids: number[];
}

export interface FrameMessage {
  type: "frame";
  time_ms: number;
  /** Flat xyz coordinates, length 3 * vertex_count, in mm. */
  positions: number[];
  /** Per-cavity pressures in kPa, cavity 1 first. */
  pressures: number[];
  /** Monitor bending angles in degrees, one per monitor id. */
  angles: number[];
}

export interface ErrorMessage {
  type: "error";
  message: string;
}

export type ServerMessage = TopologyMessage | FrameMessage | ErrorMessage;

export type CommandKind = "inc" | "dec" | "translate" | "rotate" | "stop";

export interface CommandMessage {
  type: "command";
  kind: CommandKind;
  cavity?: number;
  axis?: "x" | "y" | "z";
  step?: number;
}

/** Malformed or out-of-contract message from the server. */
export class ProtocolError extends Error {}

/** Topology handshake refused; `reason` explains why. */
export class HandshakeRejected extends Error {
  constructor(public readonly reason: string) {
    super(reason);
  }
}

function expectNumberArray(value: unknown, what: string): number[] {
  if (!Array.isArray(value) || value.some((v) => typeof v !== "number" || !Number.isFinite(v))) {
    throw new ProtocolError(`${what} must be an array of finite numbers`);
  }
  return value as number[];
}

export function parseServerMessage(raw: string): ServerMessage {
  let doc: unknown;
  try {
    doc = JSON.parse(raw);
  } catch {
    throw new ProtocolError("message is not valid JSON");
  }
  if (typeof doc !== "object" || doc === null) {
    throw new ProtocolError("message must be a JSON object");
  }
  const msg = doc as Record<string, unknown>;
  switch (msg.type) {
    case "topology":
      return validateTopology(msg);
    case "frame":
      return validateFrame(msg);
    case "error":
      if (typeof msg.message !== "string") {
        throw new ProtocolError("error message missing text");
      }
      return { type: "error", message: msg.message };
    default:
      throw new ProtocolError(`unknown message type ${JSON.stringify(msg.type)}`);
  }
}

function validateTopology(msg: Record<string, unknown>): TopologyMessage {
  const version = msg.protocol_version;
  if (version !== PROTOCOL_VERSION) {
    throw new HandshakeRejected(
      `protocol version mismatch: server sent ${String(version)}, viewer speaks ${PROTOCOL_VERSION}`,
    );
  }
  const vertexCount = msg.vertex_count;
  if (typeof vertexCount !== "number" || !Number.isInteger(vertexCount) || vertexCount <= 0) {
    throw new ProtocolError("vertex_count must be a positive integer");
  }
  if (!Array.isArray(msg.triangles)) {
    throw new ProtocolError("triangles must be an array");
  }
  const triangles = msg.triangles.map((tri) => {
    const corners = expectNumberArray(tri, "triangle");
    if (corners.length !== 3 || corners.some((c) => !Number.isInteger(c) || c < 0 || c >= vertexCount)) {
      throw new ProtocolError("triangle corners must be three vertex indices");
    }
    return corners;
  });
  const rest = expectNumberArray(msg.rest_positions, "rest_positions");
  if (rest.length !== 3 * vertexCount) {
    throw new ProtocolError(
      `rest_positions has ${rest.length} values, expected ${3 * vertexCount}`,
    );
  }
  const monitorIds = expectNumberArray(msg.monitor_ids, "monitor_ids");
  return {
    type: "topology",
    protocol_version: PROTOCOL_VERSION,
    vertex_count: vertexCount,
    triangles,
    rest_positions: rest,
    monitor_ids: monitorIds,
  };
}

function validateFrame(msg: Record<string, unknown>): FrameMessage {
  if (typeof msg.time_ms !== "number" || !Number.isFinite(msg.time_ms)) {
    throw new ProtocolError("frame time_ms must be a finite number");
  }
  const positions = expectNumberArray(msg.positions, "positions");
  if (positions.length % 3 !== 0) {
    throw new ProtocolError("positions length must be a multiple of 3");
  }
  const pressures = expectNumberArray(msg.pressures, "pressures");
  for (const p of pressures) {
    if (p < PRESSURE_MIN_KPA || p > PRESSURE_MAX_KPA) {
      throw new ProtocolError(
        `pressure ${p} kPa outside [${PRESSURE_MIN_KPA}, ${PRESSURE_MAX_KPA}]`,
      );
    }
  }
  const angles = expectNumberArray(msg.angles, "angles");
  return { type: "frame", time_ms: msg.time_ms, positions, pressures, angles };
}

export function serializeCommand(cmd: CommandMessage): string {
  const doc: Record<string, unknown> = { type: "command", kind: cmd.kind };
  if (cmd.cavity !== undefined) doc.cavity = cmd.cavity;
  if (cmd.axis !== undefined) doc.axis = cmd.axis;
  if (cmd.step !== undefined) doc.step = cmd.step;
  return JSON.stringify(doc);
}
