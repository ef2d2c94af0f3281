// Canvas drawing: two orthographic task-space views (top-down, side) plus a
// leader-device inset. One shared meters-to-pixels scale, so the task box
// visibly grows with alpha relative to the leader box.

import type { Viewport } from "./input.js";
import type { Box2, ViewModel } from "./viewmodel.js";

export const SCALE = 620; // px per meter, shared by all views

export interface Layout {
  top: Viewport;
  sideView: Viewport;
  leaderInset: Viewport;
}

export function layout(w: number, h: number): Layout {
  return {
    top: { x: 10, y: 40, w: w * 0.56, h: h - 60 },
    sideView: { x: w * 0.58, y: 40, w: w * 0.4, h: h * 0.42 },
    leaderInset: { x: w * 0.58, y: h * 0.52, w: w * 0.4, h: h * 0.44 },
  };
}

class View {
  constructor(public vp: Viewport, public cx: number, public cy: number,
              public scale: number) {}

  px(x: number, y: number): [number, number] {
    return [
      this.vp.x + this.vp.w / 2 + (x - this.cx) * this.scale,
      this.vp.y + this.vp.h / 2 - (y - this.cy) * this.scale,
    ];
  }
}

function strokePolyline(ctx: CanvasRenderingContext2D, view: View,
                        pts: [number, number][], color: string, width: number) {
  if (pts.length < 2) return;
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.lineJoin = "round";
  ctx.lineCap = "round";
  ctx.beginPath();
  const [x0, y0] = view.px(pts[0][0], pts[0][1]);
  ctx.moveTo(x0, y0);
  for (const [x, y] of pts.slice(1)) {
    const [px, py] = view.px(x, y);
    ctx.lineTo(px, py);
  }
  ctx.stroke();
}

function strokeBox(ctx: CanvasRenderingContext2D, view: View, box: Box2,
                   color: string) {
  const [x, y] = view.px(box.cx - box.hx, box.cy + box.hy);
  ctx.strokeStyle = color;
  ctx.lineWidth = 1.5;
  ctx.setLineDash([6, 4]);
  ctx.strokeRect(x, y, 2 * box.hx * view.scale, 2 * box.hy * view.scale);
  ctx.setLineDash([]);
}

const OBJECT_COLORS: Record<string, string> = {
  red: "#e05555",
  green: "#4fb36a",
  blue: "#5a7de0",
  disk: "#5a9bd0",
  pole: "#b0885a",
};

export function render(ctx: CanvasRenderingContext2D, vm: ViewModel,
                       lay: Layout, dialAngle: number): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = "#14181f";
  ctx.fillRect(0, 0, width, height);

  const topView = new View(lay.top, vm.taskBoxTop.cx, vm.taskBoxTop.cy, SCALE);
  const sideView = new View(lay.sideView, vm.taskBoxSide.cx, vm.taskBoxSide.cy, SCALE);
  const insetView = new View(lay.leaderInset, vm.leaderBoxTop.cx, vm.leaderBoxTop.cy, SCALE);

  for (const [view, label] of [[topView, "task: top-down"],
                               [sideView, "task: side"],
                               [insetView, "leader device"]] as const) {
    ctx.strokeStyle = "#2c3440";
    ctx.lineWidth = 1;
    ctx.strokeRect(view.vp.x, view.vp.y, view.vp.w, view.vp.h);
    ctx.fillStyle = "#7f8b9d";
    ctx.font = "12px system-ui, sans-serif";
    ctx.fillText(label, view.vp.x + 6, view.vp.y + 14);
  }

  // workspace boxes (the task box is the alpha-scaled leader box image)
  strokeBox(ctx, topView, vm.taskBoxTop, "#4f90d0");
  strokeBox(ctx, sideView, vm.taskBoxSide, "#4f90d0");
  strokeBox(ctx, insetView, vm.leaderBoxTop, "#cccccc");

  // fixtures then objects (top view); side view gets objects only
  for (const f of vm.fixtures) {
    const [x, y] = topView.px(f.top[0], f.top[1]);
    ctx.strokeStyle = OBJECT_COLORS[f.color] ?? "#999";
    ctx.lineWidth = 2;
    if (f.half > 0) {
      ctx.strokeRect(x - f.half * SCALE, y - f.half * SCALE,
                     2 * f.half * SCALE, 2 * f.half * SCALE);
    } else {
      ctx.beginPath();
      ctx.arc(x, y, 5, 0, 2 * Math.PI);
      ctx.stroke();
    }
  }
  for (const o of vm.objects) {
    for (const [view, p] of [[topView, o.top], [sideView, o.side]] as const) {
      const [x, y] = view.px(p[0], p[1]);
      ctx.fillStyle = OBJECT_COLORS[o.color] ?? "#bbb";
      ctx.beginPath();
      ctx.arc(x, y, o.attached ? 7 : 5, 0, 2 * Math.PI);
      ctx.fill();
    }
  }

  // arms: follower in the task views, leader in its inset
  strokePolyline(ctx, topView, vm.followerTop, "#e8b94f", 3);
  strokePolyline(ctx, sideView, vm.followerSide, "#e8b94f", 3);
  strokePolyline(ctx, insetView, vm.leaderTop, "#cccccc", 3);
  // leader EE image in the task view: where the operator's hand commands
  for (const [x, y] of vm.leaderImageTop) {
    const [px, py] = topView.px(x, y);
    ctx.strokeStyle = "#cccccc";
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    ctx.arc(px, py, 6, 0, 2 * Math.PI);
    ctx.stroke();
  }

  // gripper aperture marker
  const [gx, gy] = topView.px(vm.gripper.top[0], vm.gripper.top[1]);
  ctx.strokeStyle = "#f0f0f0";
  ctx.lineWidth = 2;
  const gap = 3 + vm.gripper.aperture * 6;
  ctx.beginPath();
  ctx.moveTo(gx - gap, gy - 6);
  ctx.lineTo(gx - gap, gy + 6);
  ctx.moveTo(gx + gap, gy - 6);
  ctx.lineTo(gx + gap, gy + 6);
  ctx.stroke();

  // banner, sync readout, clip indicator, wrist dial
  ctx.fillStyle = vm.bannerClass === "policy" ? "#d08a3c" : "#47a96c";
  ctx.fillRect(10, 8, 120, 24);
  ctx.fillStyle = "#0c0e12";
  ctx.font = "bold 15px system-ui, sans-serif";
  ctx.fillText(vm.banner, 22, 25);
  ctx.fillStyle = "#aab6c8";
  ctx.font = "13px system-ui, sans-serif";
  ctx.fillText(`${vm.syncText}   alpha ${vm.alpha.toFixed(2)}   clips ${vm.clipCount}`,
               145, 25);
  if (vm.clipOpen) {
    ctx.fillStyle = "#e05555";
    ctx.beginPath();
    ctx.arc(width - 30, 20, 8, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = "#e8a0a0";
    ctx.fillText("REC", width - 72, 25);
  }
  const dial = insetView;
  const [dx, dy] = [dial.vp.x + dial.vp.w - 26, dial.vp.y + 26];
  ctx.strokeStyle = "#7f8b9d";
  ctx.beginPath();
  ctx.arc(dx, dy, 12, 0, 2 * Math.PI);
  ctx.stroke();
  ctx.beginPath();
  ctx.moveTo(dx, dy);
  ctx.lineTo(dx + 12 * Math.cos(dialAngle), dy - 12 * Math.sin(dialAngle));
  ctx.stroke();

  if (!vm.connected) {
    ctx.fillStyle = "rgba(10, 12, 16, 0.75)";
    ctx.fillRect(0, 0, width, height);
    ctx.fillStyle = "#d8e0ea";
    ctx.font = "bold 18px system-ui, sans-serif";
    ctx.fillText("disconnected — click to reconnect", width / 2 - 140, height / 2);
  }
}
