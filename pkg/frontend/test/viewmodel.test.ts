import { describe, expect, it } from "vitest";

import type { Handshake, Snapshot } from "../src/protocol.js";
import { parseInbound, encode, yawQuat } from "../src/protocol.js";
import { buildViewModel, mapLeaderToTask } from "../src/viewmodel.js";

const HANDSHAKE: Handshake = {
  type: "handshake",
  schema_version: 1,
  chains: { leader: "lift3", follower: "lift4" },
  task: "peg_insert",
  alpha: 2.0,
  leader_center: [0.3, 0.0, 0.1],
  task_center: [0.32, 0.0, 0.05],
  leader_box_half: [0.12, 0.1, 0.09],
  stream_hz: 30,
};

function snapshot(mode: "teleop" | "policy", clipOpen = false): Snapshot {
  return {
    type: "state",
    seq: 5,
    t: 0.5,
    mode,
    leader: { q: [0.1, 0.2, 0.3], ee_pos: [0.31, 0.01, 0.1],
              ee_quat: [1, 0, 0, 0], points: [[0, 0, 0.1], [0.31, 0.01, 0.1]] },
    follower: { q: [0.1, 0.2, 0.3, 0.4], ee_pos: [0.33, 0.02, 0.05],
                ee_quat: [1, 0, 0, 0], points: [[0, 0, 0.05], [0.33, 0.02, 0.05]] },
    world: {
      objects: [{ id: "disk", color: "disk", pos: [0.3, 0.0, 0.01], attached: false }],
      fixtures: [{ id: "pole", color: "pole", pos: [0.355, 0.0, 0.0], half_extent: 0.0068 }],
      gripper: { pos: [0.33, 0.02, 0.05], aperture: 1.0, held: null },
    },
    sync_error: 0.0012,
    alpha: 2.0,
    gripper_cmd: 1.0,
    recording: { clip_open: clipOpen, clip_count: 2 },
  };
}

describe("view model", () => {
  it("banner mirrors the server mode", () => {
    expect(buildViewModel(HANDSHAKE, snapshot("policy"), true).banner).toBe("POLICY");
    expect(buildViewModel(HANDSHAKE, snapshot("teleop"), true).banner).toBe("TELEOP");
  });

  it("clip indicator follows the snapshot", () => {
    const vm = buildViewModel(HANDSHAKE, snapshot("teleop", true), true);
    expect(vm.clipOpen).toBe(true);
    expect(vm.clipCount).toBe(2);
  });

  it("task box edges scale with alpha relative to the leader box", () => {
    const vm = buildViewModel(HANDSHAKE, snapshot("teleop"), true);
    expect(vm.taskBoxTop.hx).toBeCloseTo(2.0 * vm.leaderBoxTop.hx, 10);
    expect(vm.taskBoxTop.hy).toBeCloseTo(2.0 * vm.leaderBoxTop.hy, 10);
  });

  it("sync readout renders millimeters", () => {
    const vm = buildViewModel(HANDSHAKE, snapshot("teleop"), true);
    expect(vm.syncText).toBe("sync 1.20 mm");
  });

  it("workspace map matches the affine definition", () => {
    const p = mapLeaderToTask(HANDSHAKE, [0.4, 0.1, 0.1]);
    expect(p[0]).toBeCloseTo(2.0 * (0.4 - 0.3) + 0.32, 12);
    expect(p[1]).toBeCloseTo(0.2, 12);
  });
});

describe("protocol", () => {
  it("parses known inbound kinds and rejects junk", () => {
    expect(parseInbound(JSON.stringify(snapshot("teleop")))?.type).toBe("state");
    expect(parseInbound("{}")).toBeNull();
    expect(parseInbound("garbage")).toBeNull();
  });

  it("encodes outbound messages as plain JSON", () => {
    expect(JSON.parse(encode({ type: "gripper", value: 0.5 }))).toEqual(
      { type: "gripper", value: 0.5 });
  });

  it("wrist dial quaternion is unit length", () => {
    const q = yawQuat(0.7);
    const n = Math.hypot(...q);
    expect(n).toBeCloseTo(1.0, 12);
  });
});
