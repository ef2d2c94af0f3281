import { InputMapper, pixelToLeader, type LeaderBox } from "./input.js";
import { SocketClient } from "./net.js";
import { layout, render } from "./render.js";
import { buildViewModel } from "./viewmodel.js";

const canvas = document.getElementById("console") as HTMLCanvasElement;
const ctx = canvas.getContext("2d")!;
const hintEl = document.getElementById("hint")!;

const url = `ws://${location.host}/session`;
const client = new SocketClient(url);
client.connect();

let mapper: InputMapper | null = null;
let lay = layout(canvas.width, canvas.height);

function hint(text: string) {
  hintEl.textContent = text;
  window.setTimeout(() => {
    if (hintEl.textContent === text) hintEl.textContent = "";
  }, 2500);
}

function ensureMapper(): InputMapper | null {
  if (mapper || !client.handshake) return mapper;
  const h = client.handshake;
  const box: LeaderBox = { center: [...h.leader_center], half: [...h.leader_box_half] };
  mapper = new InputMapper(
    box,
    (raw) => client.send(raw),
    () => ({
      connected: client.connected,
      mode: client.snapshot?.mode ?? "teleop",
      gripperCmd: client.snapshot?.gripper_cmd ?? 1.0,
      clipOpen: client.snapshot?.recording.clip_open ?? false,
    }),
    hint,
  );
  return mapper;
}

function insetPoint(ev: PointerEvent): [number, number] {
  const h = client.handshake!;
  const rect = canvas.getBoundingClientRect();
  const px = ((ev.clientX - rect.left) / rect.width) * canvas.width;
  const py = ((ev.clientY - rect.top) / rect.height) * canvas.height;
  const box: LeaderBox = { center: [...h.leader_center], half: [...h.leader_box_half] };
  const p = pixelToLeader(lay.leaderInset, box, 0, px, py);
  return [p[0], p[1]];
}

canvas.addEventListener("pointerdown", (ev) => {
  const m = ensureMapper();
  if (!m) return;
  if (!client.connected) {
    client.reconnect();
    return;
  }
  canvas.setPointerCapture(ev.pointerId);
  const [lx, ly] = insetPoint(ev);
  m.pointerDown(lx, ly, ev.shiftKey, ev.clientX);
});
canvas.addEventListener("pointermove", (ev) => {
  const m = ensureMapper();
  if (!m || !client.handshake) return;
  const [lx, ly] = insetPoint(ev);
  m.pointerMove(lx, ly, ev.shiftKey, ev.clientX);
});
canvas.addEventListener("pointerup", () => mapper?.pointerUp());
canvas.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  mapper?.wheel(ev.deltaY);
}, { passive: false });
window.addEventListener("keydown", (ev) => {
  if (ev.repeat) return;
  ensureMapper()?.keyDown(ev.key);
});
window.addEventListener("keyup", (ev) => ensureMapper()?.keyUp(ev.key));

window.setInterval(() => ensureMapper()?.tick(performance.now()), 10);

function frame() {
  if (client.handshake && client.snapshot) {
    const vm = buildViewModel(client.handshake, client.snapshot, client.connected);
    render(ctx, vm, lay, mapper?.wristDial ?? 0);
  }
  requestAnimationFrame(frame);
}
requestAnimationFrame(frame);
