// Pure reduction from server messages to what the renderer draws. The only
// state here is "latest snapshot": indicators always reflect the server,
// never optimistic local intent.

import type { Handshake, Snapshot, Vec3 } from "./protocol.js";

export interface Box2 {
  cx: number;
  cy: number;
  hx: number;
  hy: number;
}

export interface ViewModel {
  banner: string;
  bannerClass: "teleop" | "policy";
  syncText: string;
  clipOpen: boolean;
  clipCount: number;
  alpha: number;
  connected: boolean;
  // task-space geometry (meters)
  taskBoxTop: Box2; // x/y footprint of the leader box image
  taskBoxSide: Box2; // x/z footprint
  leaderBoxTop: Box2; // raw leader box (leader frame)
  followerTop: [number, number][];
  followerSide: [number, number][];
  leaderTop: [number, number][]; // leader chain in its own frame
  leaderImageTop: [number, number][]; // leader EE mapped into task space
  objects: { id: string; color: string; top: [number, number]; side: [number, number]; attached: boolean }[];
  fixtures: { id: string; color: string; top: [number, number]; half: number }[];
  gripper: { top: [number, number]; side: [number, number]; aperture: number };
}

export function mapLeaderToTask(h: Handshake, p: Vec3): Vec3 {
  return [
    h.alpha * (p[0] - h.leader_center[0]) + h.task_center[0],
    h.alpha * (p[1] - h.leader_center[1]) + h.task_center[1],
    h.alpha * (p[2] - h.leader_center[2]) + h.task_center[2],
  ];
}

const top = (p: Vec3): [number, number] => [p[0], p[1]];
const side = (p: Vec3): [number, number] => [p[0], p[2]];

export function buildViewModel(h: Handshake, s: Snapshot, connected: boolean): ViewModel {
  const alpha = s.alpha;
  return {
    banner: s.mode.toUpperCase(),
    bannerClass: s.mode,
    syncText: `sync ${(s.sync_error * 1000).toFixed(2)} mm`,
    clipOpen: s.recording.clip_open,
    clipCount: s.recording.clip_count,
    alpha,
    connected,
    taskBoxTop: {
      cx: h.task_center[0],
      cy: h.task_center[1],
      hx: alpha * h.leader_box_half[0],
      hy: alpha * h.leader_box_half[1],
    },
    taskBoxSide: {
      cx: h.task_center[0],
      cy: h.task_center[2],
      hx: alpha * h.leader_box_half[0],
      hy: alpha * h.leader_box_half[2],
    },
    leaderBoxTop: {
      cx: h.leader_center[0],
      cy: h.leader_center[1],
      hx: h.leader_box_half[0],
      hy: h.leader_box_half[1],
    },
    followerTop: s.follower.points.map(top),
    followerSide: s.follower.points.map(side),
    leaderTop: s.leader.points.map(top),
    leaderImageTop: [top(mapLeaderToTask(h, s.leader.ee_pos))],
    objects: s.world.objects.map((o) => ({
      id: o.id,
      color: o.color,
      top: top(o.pos),
      side: side(o.pos),
      attached: o.attached,
    })),
    fixtures: s.world.fixtures.map((f) => ({
      id: f.id,
      color: f.color,
      top: top(f.pos),
      half: f.half_extent,
    })),
    gripper: {
      top: top(s.world.gripper.pos),
      side: side(s.world.gripper.pos),
      aperture: s.world.gripper.aperture,
    },
  };
}
