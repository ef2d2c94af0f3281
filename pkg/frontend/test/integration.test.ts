// Scripted end-to-end session against the live gateway: connect, drag the
// leader, toggle the mode, record one clip, and check the server-side
// recorder saw exactly one all-teleop clip while the banner tracked the
// server's mode reports the whole way.

import { spawn, type ChildProcess } from "node:child_process";
import { afterAll, beforeAll, describe, expect, it } from "vitest";
import WebSocket from "ws";

import { InputMapper, type LeaderBox } from "../src/input.js";
import { parseInbound, type Handshake, type Snapshot } from "../src/protocol.js";
import { buildViewModel } from "../src/viewmodel.js";

const PORT = 8900 + (process.pid % 500);
const BASE = `http://127.0.0.1:${PORT}`;

let server: ChildProcess;
let ws: WebSocket;
let handshake: Handshake;
let latest: Snapshot | null = null;
const banners: { mode: string; banner: string }[] = [];

function sleep(ms: number) {
  return new Promise((r) => setTimeout(r, ms));
}

async function connectWithRetry(url: string, attempts = 50): Promise<WebSocket> {
  for (let i = 0; i < attempts; i++) {
    try {
      const sock = new WebSocket(url);
      await new Promise<void>((resolve, reject) => {
        sock.once("open", resolve);
        sock.once("error", reject);
      });
      return sock;
    } catch {
      await sleep(200);
    }
  }
  throw new Error("gateway did not come up");
}

async function waitFor(pred: () => boolean, ms = 8000): Promise<void> {
  const t0 = Date.now();
  while (Date.now() - t0 < ms) {
    if (pred()) return;
    await sleep(25);
  }
  throw new Error("condition not met in time");
}

beforeAll(async () => {
  server = spawn("python3", ["-m", "teleloop.cli", "serve", "--task", "peg_insert",
                             "--port", String(PORT)],
                 { stdio: "ignore" });
  ws = await connectWithRetry(`ws://127.0.0.1:${PORT}/session`);
  const first = await new Promise<string>((resolve) =>
    ws.once("message", (d) => resolve(String(d))));
  handshake = parseInbound(first) as Handshake;
  ws.on("message", (d) => {
    const msg = parseInbound(String(d));
    if (msg?.type === "state") {
      latest = msg;
      // the banner the UI would render for this snapshot
      banners.push({
        mode: msg.mode,
        banner: buildViewModel(handshake, msg, true).banner,
      });
    }
  });
}, 30_000);

afterAll(() => {
  ws?.close();
  server?.kill();
});

function makeMapper(sent: string[]): InputMapper {
  const box: LeaderBox = {
    center: [...handshake.leader_center],
    half: [...handshake.leader_box_half],
  };
  return new InputMapper(
    box,
    (raw) => {
      sent.push(raw);
      ws.send(raw);
    },
    () => ({
      connected: true,
      mode: latest?.mode ?? "teleop",
      gripperCmd: latest?.gripper_cmd ?? 1.0,
      clipOpen: latest?.recording.clip_open ?? false,
    }),
  );
}

describe("console loop against the live gateway", () => {
  it("handshakes with the expected schema", () => {
    expect(handshake.type).toBe("handshake");
    expect(handshake.schema_version).toBe(1);
    expect(handshake.chains.follower).toBe("lift4");
  });

  it("drag streams leader targets at >= 30 Hz and the leader tracks", async () => {
    await waitFor(() => latest !== null);
    const sent: string[] = [];
    const mapper = makeMapper(sent);
    const target: [number, number] = [
      handshake.leader_center[0] + 0.06,
      handshake.leader_center[1] + 0.04,
    ];
    mapper.pointerDown(target[0], target[1]);
    const t0 = Date.now();
    while (Date.now() - t0 < 1000) {
      mapper.tick(performance.now());
      await sleep(5);
    }
    mapper.pointerUp();
    const n = sent.filter((r) => JSON.parse(r).type === "leader_target").length;
    expect(n).toBeGreaterThanOrEqual(30);
    await waitFor(() => {
      if (!latest) return false;
      const ee = latest.leader.ee_pos;
      return Math.hypot(ee[0] - target[0], ee[1] - target[1]) < 0.01;
    });
  }, 20_000);

  it("records exactly one all-teleop clip via R, then toggles mode with M", async () => {
    const sent: string[] = [];
    const mapper = makeMapper(sent);
    // open a clip in teleop, keep driving, close it
    mapper.keyDown("r");
    mapper.keyUp("r");
    await waitFor(() => latest?.recording.clip_open === true);
    mapper.pointerDown(handshake.leader_center[0], handshake.leader_center[1] - 0.03);
    const t0 = Date.now();
    while (Date.now() - t0 < 500) {
      mapper.tick(performance.now());
      await sleep(5);
    }
    mapper.pointerUp();
    mapper.keyDown("r");
    mapper.keyUp("r");
    await waitFor(() => latest?.recording.clip_open === false
                        && latest?.recording.clip_count === 1);

    // server-side recorder: one clip, all frames teleop-channel
    const res = await fetch(`${BASE}/recording`);
    const body = await res.json();
    expect(body.clips).toHaveLength(1);
    expect(body.clips[0].channels).toEqual(["teleop"]);
    expect(body.clips[0].frames).toBeGreaterThan(10);

    // mode toggle: policy then back; clip attempt in policy must be refused
    mapper.keyDown("m");
    mapper.keyUp("m");
    await waitFor(() => latest?.mode === "policy");
    const before = sent.length;
    mapper.keyDown("r");
    mapper.keyUp("r");
    expect(sent.length).toBe(before); // refused client-side, nothing sent
    mapper.keyDown("m");
    mapper.keyUp("m");
    await waitFor(() => latest?.mode === "teleop");
  }, 30_000);

  it("rendered banner matched the server mode for every snapshot", () => {
    expect(banners.length).toBeGreaterThan(30);
    for (const b of banners) {
      expect(b.banner).toBe(b.mode.toUpperCase());
    }
    const modes = new Set(banners.map((b) => b.mode));
    expect(modes.has("policy")).toBe(true);
    expect(modes.has("teleop")).toBe(true);
  });
});
