// Wire types for the /session WebSocket (schema_version 1).

export type Vec3 = [number, number, number];
export type Quat = [number, number, number, number];

export interface Handshake {
  type: "handshake";
  schema_version: number;
  chains: { leader: string; follower: string };
  task: string;
  alpha: number;
  leader_center: Vec3;
  task_center: Vec3;
  leader_box_half: Vec3;
  stream_hz: number;
}

export interface ArmView {
  q: number[];
  ee_pos: Vec3;
  ee_quat: Quat;
  points: Vec3[];
}

export interface WorldObject {
  id: string;
  color: string;
  pos: Vec3;
  attached: boolean;
}

export interface WorldFixture {
  id: string;
  color: string;
  pos: Vec3;
  half_extent: number;
}

export interface Snapshot {
  type: "state";
  seq: number;
  t: number;
  mode: "teleop" | "policy";
  leader: ArmView;
  follower: ArmView;
  world: {
    objects: WorldObject[];
    fixtures: WorldFixture[];
    gripper: { pos: Vec3; aperture: number; held: string | null };
  };
  sync_error: number;
  alpha: number;
  gripper_cmd: number;
  recording: { clip_open: boolean; clip_count: number };
}

export interface ErrorMsg {
  type: "error";
  error: string;
  detail: string;
}

export type Inbound = Handshake | Snapshot | ErrorMsg;

export type Outbound =
  | { type: "set_mode"; mode: "teleop" | "policy" }
  | { type: "leader_target"; position: Vec3; orientation?: Quat }
  | { type: "gripper"; value: number }
  | { type: "clip"; action: "begin" | "end"; reason?: string }
  | { type: "set_scale"; alpha: number; c_l: Vec3; c_t: Vec3 };

export function parseInbound(raw: string): Inbound | null {
  let msg: unknown;
  try {
    msg = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof msg !== "object" || msg === null) return null;
  const t = (msg as { type?: string }).type;
  if (t === "handshake" || t === "state" || t === "error") return msg as Inbound;
  return null;
}

export function encode(msg: Outbound): string {
  return JSON.stringify(msg);
}

// Yaw-only wrist dial -> unit quaternion (w, x, y, z).
export function yawQuat(angle: number): Quat {
  return [Math.cos(angle / 2), 0, 0, Math.sin(angle / 2)];
}
