// Pointer/keyboard to command-stream mapping. No DOM here: main.ts feeds
// events in, an injected sender takes messages out, so the mapping logic is
// directly testable. While a drag is active the mapper emits leader_target
// on every tick() at the emit interval, whether or not the pointer moved.

import { encode, yawQuat, type Outbound, type Vec3 } from "./protocol.js";

export const EMIT_INTERVAL_MS = 30; // >= 33 Hz sustained during drag

export interface LeaderBox {
  center: Vec3;
  half: Vec3;
}

export interface Viewport {
  x: number;
  y: number;
  w: number;
  h: number;
}

// Linear inset mapping: viewport center is the box center, full viewport
// width spans the full box width; canvas y grows downward.
export function pixelToLeader(vp: Viewport, box: LeaderBox, z: number,
                              px: number, py: number): Vec3 {
  const fx = (px - (vp.x + vp.w / 2)) / vp.w;
  const fy = ((vp.y + vp.h / 2) - py) / vp.h;
  return [
    box.center[0] + fx * 2 * box.half[0],
    box.center[1] + fy * 2 * box.half[1],
    z,
  ];
}

export function clampToBox(box: LeaderBox, p: Vec3): Vec3 {
  const out: Vec3 = [0, 0, 0];
  for (let i = 0; i < 3; i++) {
    const lo = box.center[i] - box.half[i];
    const hi = box.center[i] + box.half[i];
    out[i] = Math.min(hi, Math.max(lo, p[i]));
  }
  return out;
}

export interface UiState {
  connected: boolean;
  mode: "teleop" | "policy";
  gripperCmd: number;
  clipOpen: boolean;
}

export class InputMapper {
  private dragging = false;
  private target: Vec3;
  private zTarget: number;
  private dial = 0;
  private shiftRef: { px: number; dial: number } | null = null;
  private lastEmit = -Infinity;
  private heldKeys = new Set<string>();

  constructor(
    private box: LeaderBox,
    private send: (raw: string) => void,
    private getState: () => UiState,
    private hint: (text: string) => void = () => {},
  ) {
    this.target = [...box.center] as Vec3;
    this.zTarget = box.center[2];
  }

  get wristDial(): number {
    return this.dial;
  }

  get isDragging(): boolean {
    return this.dragging;
  }

  private blocked(): boolean {
    if (!this.getState().connected) {
      this.hint("disconnected: input dropped");
      return true;
    }
    return false;
  }

  private emit(msg: Outbound): void {
    this.send(encode(msg));
  }

  pointerDown(leaderX: number, leaderY: number, shift = false, px = 0): void {
    if (this.blocked()) return;
    if (shift) {
      this.shiftRef = { px, dial: this.dial };
      return;
    }
    this.dragging = true;
    this.pointerMove(leaderX, leaderY, false, px);
  }

  pointerMove(leaderX: number, leaderY: number, shift = false, px = 0): void {
    if (this.shiftRef !== null && shift) {
      // wrist dial: horizontal drag with the modifier key held
      this.dial = this.shiftRef.dial + (px - this.shiftRef.px) * 0.01;
      return;
    }
    if (!this.dragging) return;
    this.target = clampToBox(this.box, [leaderX, leaderY, this.zTarget]);
  }

  pointerUp(): void {
    this.dragging = false;
    this.shiftRef = null;
  }

  wheel(deltaY: number): void {
    // scroll adjusts the commanded height within the leader box
    this.zTarget = clampToBox(this.box, [
      this.box.center[0], this.box.center[1],
      this.zTarget - Math.sign(deltaY) * 0.005,
    ])[2];
    this.target = clampToBox(this.box, [this.target[0], this.target[1], this.zTarget]);
  }

  keyDown(key: string): void {
    const k = key.toLowerCase();
    if (this.heldKeys.has(k)) return; // auto-repeat: one action per press
    this.heldKeys.add(k);
    if (this.blocked()) return;
    const state = this.getState();
    if (k === "m") {
      this.emit({ type: "set_mode", mode: state.mode === "policy" ? "teleop" : "policy" });
    } else if (k === " ") {
      this.emit({ type: "gripper", value: state.gripperCmd < 0.5 ? 1.0 : 0.0 });
    } else if (k === "r") {
      if (state.clipOpen) {
        this.emit({ type: "clip", action: "end" });
      } else if (state.mode !== "teleop") {
        this.hint("clips require teleop mode: press M to take over first");
      } else {
        this.emit({ type: "clip", action: "begin", reason: "manual" });
      }
    }
  }

  keyUp(key: string): void {
    this.heldKeys.delete(key.toLowerCase());
  }

  tick(nowMs: number): void {
    if (!this.dragging || this.blocked()) return;
    if (nowMs - this.lastEmit < EMIT_INTERVAL_MS) return;
    this.lastEmit = nowMs;
    this.emit({
      type: "leader_target",
      position: [...this.target] as Vec3,
      orientation: yawQuat(this.dial),
    });
  }
}
