/**
 * Keyboard bindings for teleoperation.
 *
 * Number keys 1-5 raise the matching cavity's pressure; the same keys with
 * shift held lower it. Arrow keys translate the rest pose in the horizontal
 * plane, '.' and '/' rotate it about the vertical axis, and escape stops
 * the run. Any other key maps to nothing.
 */

import { CommandMessage } from "./protocol.js";

export interface KeyInput {
  /** KeyboardEvent.key, e.g. "3", "ArrowUp", ".". */
  key: string;
  shiftKey?: boolean;
  /** KeyboardEvent.code, e.g. "Digit3"; used so shift+digit works on any layout. */
  code?: string;
}

const ARROW_BINDINGS: Record<string, { axis: "x" | "y" | "z"; sign: 1 | -1 }> = {
  ArrowRight: { axis: "x", sign: 1 },
  ArrowLeft: { axis: "x", sign: -1 },
  ArrowUp: { axis: "y", sign: 1 },
  ArrowDown: { axis: "y", sign: -1 },
};

export interface KeymapOptions {
  /** kPa added or removed per key press. */
  pressureStep?: number;
  /** mm moved per arrow press. */
  moveStep?: number;
  /** degrees turned per '.' or '/' press. */
  rotateStep?: number;
}

export function handleKey(input: KeyInput, options: KeymapOptions = {}): CommandMessage | null {
  const { pressureStep = 5, moveStep = 1, rotateStep = 5 } = options;

  const digit = digitOf(input);
  if (digit !== null) {
    return {
      type: "command",
      kind: input.shiftKey ? "dec" : "inc",
      cavity: digit,
      step: pressureStep,
    };
  }

  const arrow = ARROW_BINDINGS[input.key];
  if (arrow) {
    return { type: "command", kind: "translate", axis: arrow.axis, step: arrow.sign * moveStep };
  }

  if (input.key === ".") {
    return { type: "command", kind: "rotate", step: rotateStep };
  }
  if (input.key === "/") {
    return { type: "command", kind: "rotate", step: -rotateStep };
  }
  if (input.key === "Escape") {
    return { type: "command", kind: "stop" };
  }
  return null;
}

function digitOf(input: KeyInput): number | null {
  // Shifted digits report punctuation in .key ("!", "@", ...), so prefer the
  // physical key code when present.
  const codeMatch = input.code?.match(/^Digit([1-5])$/);
  if (codeMatch) {
    return Number(codeMatch[1]);
  }
  if (/^[1-5]$/.test(input.key)) {
    return Number(input.key);
  }
  return null;
}
