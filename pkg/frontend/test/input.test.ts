import { describe, expect, it } from "vitest";

import { InputMapper, clampToBox, pixelToLeader, type LeaderBox, type UiState } from "../src/input.js";

const BOX: LeaderBox = { center: [0.3, 0.0, 0.1], half: [0.12, 0.1, 0.09] };
const VP = { x: 100, y: 50, w: 200, h: 160 };

function harness(state: Partial<UiState> = {}) {
  const sent: any[] = [];
  const hints: string[] = [];
  const ui: UiState = {
    connected: true,
    mode: "teleop",
    gripperCmd: 1.0,
    clipOpen: false,
    ...state,
  };
  const mapper = new InputMapper(
    BOX,
    (raw) => sent.push(JSON.parse(raw)),
    () => ui,
    (t) => hints.push(t),
  );
  return { mapper, sent, hints, ui };
}

describe("pixel mapping", () => {
  it("viewport center maps to the box center", () => {
    const p = pixelToLeader(VP, BOX, 0.1, 200, 130);
    expect(p[0]).toBeCloseTo(0.3, 10);
    expect(p[1]).toBeCloseTo(0.0, 10);
  });

  it("half the viewport width displaces by the half extent", () => {
    // drag from the box center to the right edge midline: +half width
    const p = pixelToLeader(VP, BOX, 0.1, 200 + VP.w / 2, 130);
    expect(p[0]).toBeCloseTo(BOX.center[0] + BOX.half[0], 10);
  });

  it("canvas y grows downward, leader y upward", () => {
    const p = pixelToLeader(VP, BOX, 0.1, 200, 130 - VP.h / 2);
    expect(p[1]).toBeCloseTo(BOX.center[1] + BOX.half[1], 10);
  });

  it("targets clamp into the box", () => {
    const p = clampToBox(BOX, [99, -99, 0.1]);
    expect(p[0]).toBeCloseTo(0.42, 10);
    expect(p[1]).toBeCloseTo(-0.1, 10);
  });
});

describe("drag emission", () => {
  it("sustains at least 30 leader_target messages per simulated second", () => {
    const { mapper, sent } = harness();
    mapper.pointerDown(0.32, 0.02);
    for (let now = 0; now <= 1000; now += 5) mapper.tick(now);
    const targets = sent.filter((m) => m.type === "leader_target");
    expect(targets.length).toBeGreaterThanOrEqual(30);
    expect(targets[0].position[0]).toBeCloseTo(0.32, 10);
    expect(targets[0].orientation).toHaveLength(4);
  });

  it("emits even when the pointer holds still", () => {
    const { mapper, sent } = harness();
    mapper.pointerDown(0.3, 0.0);
    for (let now = 0; now <= 300; now += 5) mapper.tick(now);
    const n = sent.filter((m) => m.type === "leader_target").length;
    expect(n).toBeGreaterThanOrEqual(9);
  });

  it("stops on pointer up", () => {
    const { mapper, sent } = harness();
    mapper.pointerDown(0.3, 0.0);
    mapper.tick(0);
    mapper.pointerUp();
    mapper.tick(100);
    mapper.tick(200);
    expect(sent.filter((m) => m.type === "leader_target")).toHaveLength(1);
  });

  it("drops input while disconnected", () => {
    const { mapper, sent, hints } = harness({ connected: false });
    mapper.pointerDown(0.3, 0.0);
    mapper.tick(0);
    expect(sent).toHaveLength(0);
    expect(hints.length).toBeGreaterThan(0);
  });
});

describe("keys", () => {
  it("M toggles the mode once per press (debounced)", () => {
    const { mapper, sent } = harness({ mode: "policy" });
    mapper.keyDown("m");
    mapper.keyDown("m"); // auto-repeat while held
    expect(sent).toEqual([{ type: "set_mode", mode: "teleop" }]);
    mapper.keyUp("m");
    mapper.keyDown("m");
    expect(sent).toHaveLength(2);
  });

  it("space toggles the gripper against the server value", () => {
    const { mapper, sent } = harness({ gripperCmd: 1.0 });
    mapper.keyDown(" ");
    expect(sent).toEqual([{ type: "gripper", value: 0.0 }]);
  });

  it("R opens a clip in teleop and closes an open one", () => {
    const { mapper, sent, ui } = harness();
    mapper.keyDown("r");
    expect(sent).toEqual([{ type: "clip", action: "begin", reason: "manual" }]);
    mapper.keyUp("r");
    ui.clipOpen = true; // server confirmed
    mapper.keyDown("r");
    expect(sent[1]).toEqual({ type: "clip", action: "end" });
  });

  it("R in policy mode is refused with a hint", () => {
    const { mapper, sent, hints } = harness({ mode: "policy" });
    mapper.keyDown("r");
    expect(sent).toHaveLength(0);
    expect(hints[0]).toMatch(/teleop/);
  });
});

describe("wrist dial", () => {
  it("shift-drag rotates without emitting position from the gesture", () => {
    const { mapper, sent } = harness();
    mapper.pointerDown(0.3, 0.0, true, 100);
    mapper.pointerMove(0.35, 0.05, true, 180);
    expect(mapper.wristDial).toBeCloseTo(0.8, 10);
    expect(mapper.isDragging).toBe(false);
    expect(sent).toHaveLength(0);
  });
});
