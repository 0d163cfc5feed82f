import { describe, expect, it } from "vitest";

import { handleKey } from "../src/keymap.js";

describe("handleKey", () => {
  it("maps number keys 1-5 to pressure increases on the matching cavity", () => {
    for (let k = 1; k <= 5; k++) {
      const cmd = handleKey({ key: String(k), code: `Digit${k}` });
      expect(cmd).toEqual({ type: "command", kind: "inc", cavity: k, step: 5 });
    }
  });

  it("maps shift + number keys to pressure decreases", () => {
    for (let k = 1; k <= 5; k++) {
      const cmd = handleKey({ key: String(k), shiftKey: true, code: `Digit${k}` });
      expect(cmd).toEqual({ type: "command", kind: "dec", cavity: k, step: 5 });
    }
  });

  it("recognises shifted digits even when the layout reports punctuation", () => {
    const cmd = handleKey({ key: "!", shiftKey: true, code: "Digit1" });
    expect(cmd).toEqual({ type: "command", kind: "dec", cavity: 1, step: 5 });
  });

  it("maps arrow keys to rest-pose translations", () => {
    expect(handleKey({ key: "ArrowRight" })).toEqual({
      type: "command",
      kind: "translate",
      axis: "x",
      step: 1,
    });
    expect(handleKey({ key: "ArrowLeft" })).toEqual({
      type: "command",
      kind: "translate",
      axis: "x",
      step: -1,
    });
    expect(handleKey({ key: "ArrowUp" })).toEqual({
      type: "command",
      kind: "translate",
      axis: "y",
      step: 1,
    });
    expect(handleKey({ key: "ArrowDown" })).toEqual({
      type: "command",
      kind: "translate",
      axis: "y",
      step: -1,
    });
  });

  it("maps '.' to a positive rotation and '/' to a negative one", () => {
    expect(handleKey({ key: "." })).toEqual({ type: "command", kind: "rotate", step: 5 });
    expect(handleKey({ key: "/" })).toEqual({ type: "command", kind: "rotate", step: -5 });
  });

  it("maps escape to stop", () => {
    expect(handleKey({ key: "Escape" })).toEqual({ type: "command", kind: "stop" });
  });

  it("honours configured step sizes", () => {
    expect(handleKey({ key: "2" }, { pressureStep: 2.5 })).toEqual({
      type: "command",
      kind: "inc",
      cavity: 2,
      step: 2.5,
    });
    expect(handleKey({ key: "ArrowUp" }, { moveStep: 0.5 })?.step).toBe(0.5);
    expect(handleKey({ key: "/" }, { rotateStep: 15 })?.step).toBe(-15);
  });

  it("returns null for unmapped keys", () => {
    for (const key of ["q", "0", "6", "9", "Enter", " ", "a", "F1"]) {
      expect(handleKey({ key })).toBeNull();
    }
  });
});
