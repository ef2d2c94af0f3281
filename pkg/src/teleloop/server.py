"""WebSocket gateway: one live session streamed to one operator.

The control loop runs at 500 Hz in its own thread; the endpoint streams
state snapshots at the configured rate (conflated: a slow consumer always
gets the latest) and drains operator commands into the session's ordered
queue. Malformed or rejected commands produce error replies; the session
never stops for them.
"""

import asyncio
import json
import math
import threading
import time
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .errors import MalformedMessage
from .kinematics import chain_points
from .recording import Recorder
from .session import CopilotSession

SCHEMA_VERSION = 1


def _points(chain, q):
    return [[float(x) for x in p] for p in chain_points(chain, q)]


class SessionService:
    """Owns the session and its real-time thread."""

    def __init__(self, cfg, seed=0, policy=None):
        self.cfg = cfg
        recorder = Recorder(cfg.task_kind, cfg.workspace.alpha, cfg.record_dt)
        recorder.begin_episode()
        self.session = CopilotSession(cfg, seed, policy=policy, recorder=recorder)
        self.recorder = recorder
        self.lock = threading.Lock()
        self._thread = None
        self._running = False
        self.operator_connected = False

    def start(self):
        if self._thread is not None:
            return
        self._running = True
        self._thread = threading.Thread(target=self._loop, daemon=True)
        self._thread.start()

    def stop(self):
        self._running = False
        if self._thread is not None:
            self._thread.join(timeout=2.0)
            self._thread = None

    def _loop(self):
        dt = self.cfg.dt
        next_t = time.perf_counter()
        while self._running:
            with self.lock:
                self.session.tick()
            next_t += dt
            sleep = next_t - time.perf_counter()
            if sleep > 0:
                time.sleep(sleep)
            else:
                next_t = time.perf_counter()  # fell behind: drop the debt

    def submit(self, msg):
        with self.lock:
            self.session.submit(msg)

    def pop_errors(self):
        out = []
        with self.lock:
            while self.session.errors:
                out.append(self.session.errors.popleft())
        return out

    def handshake(self):
        cfg = self.cfg
        return {
            "type": "handshake",
            "schema_version": SCHEMA_VERSION,
            "chains": {"leader": cfg.leader_chain.name,
                       "follower": cfg.follower_chain.name},
            "task": cfg.task_kind,
            "alpha": self.session.wm.alpha,
            "leader_center": [float(x) for x in self.session.wm.c_l],
            "task_center": [float(x) for x in self.session.wm.c_t],
            "leader_box_half": [float(x) for x in cfg.leader_box_half],
            "stream_hz": cfg.stream_hz,
        }

    def snapshot(self):
        with self.lock:
            s = self.session
            lee = s.leader_ee()
            fee = s.follower_ee()
            ws = s.world
            return {
                "type": "state",
                "seq": s.seq,
                "t": round(s.t, 6),
                "mode": s.mode.value,
                "leader": {
                    "q": [float(x) for x in s.leader.q],
                    "ee_pos": [float(x) for x in lee.position],
                    "ee_quat": [float(x) for x in lee.orientation],
                    "points": _points(self.cfg.leader_chain, s.leader.q),
                },
                "follower": {
                    "q": [float(x) for x in s.follower.q],
                    "ee_pos": [float(x) for x in fee.position],
                    "ee_quat": [float(x) for x in fee.orientation],
                    "points": _points(self.cfg.follower_chain, s.follower.q),
                },
                "world": {
                    "objects": [
                        {"id": o.id, "color": o.color,
                         "pos": [float(x) for x in o.pos], "attached": o.attached}
                        for o in ws.objects
                    ],
                    "fixtures": [
                        {"id": f.id, "color": f.color,
                         "pos": [float(x) for x in f.pos],
                         "half_extent": f.half_extent}
                        for f in ws.fixtures
                    ],
                    "gripper": {
                        "pos": [float(x) for x in ws.gripper.pos],
                        "aperture": ws.gripper.aperture,
                        "held": ws.gripper.held_object,
                    },
                },
                "sync_error": float(s.sync_error),
                "alpha": s.wm.alpha,
                "gripper_cmd": s.gripper_cmd,
                "recording": {
                    "clip_open": self.recorder.clip_open,
                    "clip_count": len(self.recorder.clip_buffer),
                },
            }

    def release_operator(self):
        self.operator_connected = False
        with self.lock:
            self.session.idle = True  # idle-session transition: scale changes allowed


def _finite_vec(value, n, name):
    try:
        v = [float(x) for x in value]
    except (TypeError, ValueError):
        raise MalformedMessage(f"{name} must be a {n}-vector") from None
    if len(v) != n or not all(math.isfinite(x) for x in v):
        raise MalformedMessage(f"{name} must be a finite {n}-vector")
    return v


def validate_inbound(raw):
    """Parse one wire message; raises MalformedMessage on anything invalid."""
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise MalformedMessage(f"not valid JSON: {e}") from None
    if not isinstance(msg, dict):
        raise MalformedMessage("message must be an object")
    kind = msg.get("type")
    if kind == "set_mode":
        if msg.get("mode") not in ("teleop", "policy"):
            raise MalformedMessage("set_mode.mode must be 'teleop' or 'policy'")
        return {"type": "set_mode", "mode": msg["mode"]}
    if kind == "leader_target":
        out = {"type": "leader_target",
               "position": _finite_vec(msg.get("position"), 3, "position")}
        if msg.get("orientation") is not None:
            q = _finite_vec(msg["orientation"], 4, "orientation")
            norm = math.sqrt(sum(x * x for x in q))
            if abs(norm - 1.0) > 1e-3:
                raise MalformedMessage("orientation must be a unit quaternion")
            out["orientation"] = [x / norm for x in q]
        return out
    if kind == "gripper":
        v = msg.get("value")
        if not isinstance(v, (int, float)) or not math.isfinite(float(v)):
            raise MalformedMessage("gripper.value must be a finite number")
        return {"type": "gripper", "value": float(v)}
    if kind == "clip":
        if msg.get("action") not in ("begin", "end"):
            raise MalformedMessage("clip.action must be 'begin' or 'end'")
        out = {"type": "clip", "action": msg["action"]}
        if msg.get("reason") is not None:
            if msg["reason"] not in ("failure", "deviation", "manual"):
                raise MalformedMessage("clip.reason must be failure|deviation|manual")
            out["reason"] = msg["reason"]
        return out
    if kind == "set_scale":
        alpha = msg.get("alpha")
        if not isinstance(alpha, (int, float)) or not math.isfinite(float(alpha)) or alpha <= 0:
            raise MalformedMessage("set_scale.alpha must be > 0")
        return {
            "type": "set_scale",
            "alpha": float(alpha),
            "c_l": _finite_vec(msg.get("c_l"), 3, "c_l"),
            "c_t": _finite_vec(msg.get("c_t"), 3, "c_t"),
        }
    raise MalformedMessage(f"unknown message type {kind!r}")


def build_app(cfg, seed=0, policy=None, ui_dir=None):
    service = SessionService(cfg, seed=seed, policy=policy)

    @asynccontextmanager
    async def lifespan(app):
        service.start()
        yield
        service.stop()

    app = FastAPI(lifespan=lifespan)
    app.state.service = service

    @app.get("/recording")
    def recording_summary():
        """Inspection surface for tests and tooling: what the recorder holds."""
        with service.lock:
            rec = service.recorder
            return {
                "clip_open": rec.clip_open,
                "clips": [
                    {
                        "frames": len(c.frames),
                        "channels": sorted({f.active_channel for f in c.frames}),
                        "start_reason": c.start_reason,
                        "wall_time": c.wall_time,
                    }
                    for c in rec.clip_buffer
                ],
            }

    @app.websocket("/session")
    async def session_ws(ws: WebSocket):
        await ws.accept()
        if service.operator_connected:
            await ws.send_text(json.dumps(
                {"type": "error", "error": "SessionBusy",
                 "detail": "one operator session at a time"}))
            await ws.close()
            return
        service.operator_connected = True
        await ws.send_text(json.dumps(service.handshake()))
        stream_task = asyncio.create_task(_stream(ws))
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = validate_inbound(raw)
                except MalformedMessage as e:
                    await ws.send_text(json.dumps(
                        {"type": "error", "error": "MalformedMessage",
                         "detail": str(e)}))
                    continue
                service.submit(msg)
        except WebSocketDisconnect:
            pass
        finally:
            stream_task.cancel()
            service.release_operator()

    async def _stream(ws):
        period = 1.0 / service.cfg.stream_hz
        last_seq = -1
        while True:
            snap = service.snapshot()
            if snap["seq"] != last_seq:
                last_seq = snap["seq"]
                await ws.send_text(json.dumps(snap))
            for err in service.pop_errors():
                await ws.send_text(json.dumps(err))
            await asyncio.sleep(period)

    ui = ui_dir or Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if Path(ui).is_dir():
        app.mount("/", StaticFiles(directory=str(ui), html=True), name="ui")
    return app
