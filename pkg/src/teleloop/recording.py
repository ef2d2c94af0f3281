"""Synchronized frame recording, clip lifecycle, dataset assembly and storage.

Frames are logged at the record rate (control rate / decimation). Full
episodes capture everything; clips capture only the teleop-channel segments
recorded while a human (or scripted expert) has taken over, which is what
fine-tuning consumes. Storage is JSON Lines: one header record then one frame
per line, plus a manifest with counts and content hashes. Timestamps are
simulated time, so identical seeds give byte-identical files.
"""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    ClipAlreadyOpen,
    CorruptRecord,
    EmptyClip,
    EmptyDataset,
    NonMonotonicTimestamp,
    SchemaVersionMismatch,
    WrongChannel,
    WrongMode,
)

SCHEMA_VERSION = 1
TELEOP_CHANNEL = "teleop"
POLICY_CHANNEL = "policy"


@dataclass(frozen=True)
class Frame:
    t: float
    mode: str
    active_channel: str
    leader_cmd_q: np.ndarray
    leader_obs_q: np.ndarray
    follower_cmd_q: np.ndarray
    follower_obs_q: np.ndarray
    ee_pos: np.ndarray
    ee_quat: np.ndarray
    gripper: float
    obs: np.ndarray


@dataclass(frozen=True)
class Clip:
    frames: tuple
    task_id: str
    alpha_used: float
    start_reason: str  # failure | deviation | manual | timeout
    wall_time: float
    seq: int = 0


@dataclass(frozen=True)
class Episode:
    frames: tuple
    task_id: str
    outcome: dict
    wall_time: float
    seq: int = 0


@dataclass(frozen=True)
class Dataset:
    episodes: tuple = ()
    clips: tuple = ()
    meta: dict = field(default_factory=dict)


def merge_dataset(d0, clips):
    """Base episodes plus corrective clips; the base dataset is untouched."""
    ordered = sorted(clips, key=lambda c: c.seq)
    return Dataset(episodes=d0.episodes, clips=tuple(ordered), meta=dict(d0.meta))


class Recorder:
    """Owns the open-clip/open-episode state for one session.

    Clips only accept teleop-channel frames with strictly increasing
    timestamps; sealed clips accumulate in the buffer in start order.
    """

    def __init__(self, task_id, alpha, record_dt):
        self.task_id = task_id
        self.alpha = alpha
        self.record_dt = record_dt
        self.clip_buffer = []
        self.episodes = []
        self._clip_frames = None
        self._clip_reason = None
        self._episode_frames = None
        self._seq = 0

    @property
    def clip_open(self):
        return self._clip_frames is not None

    # ------------------------------------------------------------ episodes

    def begin_episode(self):
        self._episode_frames = []

    def abort_episode(self):
        """Drop the open episode without keeping it (e.g. discarded demo)."""
        self._episode_frames = None

    def end_episode(self, outcome):
        frames = self._episode_frames or []
        self._episode_frames = None
        if not frames:
            return None
        ep = Episode(
            frames=tuple(frames),
            task_id=self.task_id,
            outcome=dict(outcome),
            wall_time=self._duration(frames),
            seq=self._next_seq(),
        )
        self.episodes.append(ep)
        return ep

    # --------------------------------------------------------------- clips

    def begin_clip(self, reason, mode):
        if self._clip_frames is not None:
            raise ClipAlreadyOpen("a clip is already being recorded")
        if mode != TELEOP_CHANNEL:
            raise WrongMode(f"clips start in teleop mode, not {mode!r}")
        self._clip_frames = []
        self._clip_reason = reason

    def append_frame(self, frame):
        if self._episode_frames is not None:
            if self._episode_frames and frame.t <= self._episode_frames[-1].t:
                raise NonMonotonicTimestamp(
                    f"episode frame t={frame.t} after t={self._episode_frames[-1].t}"
                )
            self._episode_frames.append(frame)
        if self._clip_frames is not None:
            self._append_clip_frame(frame)

    def _append_clip_frame(self, frame):
        if frame.active_channel != TELEOP_CHANNEL:
            raise WrongChannel("policy-channel frames are never clip content")
        if self._clip_frames and frame.t <= self._clip_frames[-1].t:
            raise NonMonotonicTimestamp(
                f"clip frame t={frame.t} after t={self._clip_frames[-1].t}"
            )
        self._clip_frames.append(frame)

    def end_clip(self):
        frames = self._clip_frames
        reason = self._clip_reason
        self._clip_frames = None
        self._clip_reason = None
        if frames is None or not frames:
            raise EmptyClip("clip closed with no frames; discarded")
        clip = Clip(
            frames=tuple(frames),
            task_id=self.task_id,
            alpha_used=self.alpha,
            start_reason=reason,
            wall_time=self._duration(frames),
            seq=self._next_seq(),
        )
        self.clip_buffer.append(clip)
        return clip

    def take_clips(self):
        clips, self.clip_buffer = self.clip_buffer, []
        return clips

    def _duration(self, frames):
        return frames[-1].t - frames[0].t + self.record_dt

    def _next_seq(self):
        self._seq += 1
        return self._seq

    def dataset(self, meta=None):
        m = {
            "schema_version": SCHEMA_VERSION,
            "task_id": self.task_id,
            "alpha": self.alpha,
            "record_dt": self.record_dt,
        }
        if meta:
            m.update(meta)
        return Dataset(episodes=tuple(self.episodes), clips=tuple(self.clip_buffer), meta=m)


# ------------------------------------------------------------------- storage


def _vec(x):
    return [float(v) for v in np.asarray(x).ravel()]


def _frame_record(f):
    return {
        "t": float(f.t),
        "mode": f.mode,
        "channel": f.active_channel,
        "leader_cmd": _vec(f.leader_cmd_q),
        "leader_obs": _vec(f.leader_obs_q),
        "follower_cmd": _vec(f.follower_cmd_q),
        "follower_obs": _vec(f.follower_obs_q),
        "ee_pos": _vec(f.ee_pos),
        "ee_quat": _vec(f.ee_quat),
        "gripper": float(f.gripper),
        "obs": _vec(f.obs),
    }


def _frame_from_record(r):
    return Frame(
        t=r["t"],
        mode=r["mode"],
        active_channel=r["channel"],
        leader_cmd_q=np.array(r["leader_cmd"]),
        leader_obs_q=np.array(r["leader_obs"]),
        follower_cmd_q=np.array(r["follower_cmd"]),
        follower_obs_q=np.array(r["follower_obs"]),
        ee_pos=np.array(r["ee_pos"]),
        ee_quat=np.array(r["ee_quat"]),
        gripper=r["gripper"],
        obs=np.array(r["obs"]),
    )


def _write_jsonl(path, header, frames):
    lines = [json.dumps(header)]
    lines.extend(json.dumps(_frame_record(f)) for f in frames)
    data = ("\n".join(lines) + "\n").encode("utf-8")
    path.write_bytes(data)
    return hashlib.sha256(data).hexdigest(), len(frames)


def write_dataset(dataset, path):
    """Write {manifest, header, episodes/*.jsonl, clips/*.jsonl}; returns the
    manifest dict. Round trips bit-exactly through read_dataset."""
    root = Path(path)
    (root / "episodes").mkdir(parents=True, exist_ok=True)
    (root / "clips").mkdir(parents=True, exist_ok=True)
    header = {"schema_version": SCHEMA_VERSION}
    header.update(dataset.meta)
    header["schema_version"] = SCHEMA_VERSION
    files = []
    for i, ep in enumerate(dataset.episodes):
        rel = f"episodes/ep_{i:05d}.jsonl"
        h = {
            "schema_version": SCHEMA_VERSION,
            "kind": "episode",
            "task_id": ep.task_id,
            "outcome": ep.outcome,
            "wall_time": float(ep.wall_time),
            "seq": ep.seq,
        }
        digest, nframes = _write_jsonl(root / rel, h, ep.frames)
        files.append({"path": rel, "sha256": digest, "frames": nframes})
    for i, clip in enumerate(dataset.clips):
        rel = f"clips/clip_{i:05d}.jsonl"
        h = {
            "schema_version": SCHEMA_VERSION,
            "kind": "clip",
            "task_id": clip.task_id,
            "alpha_used": float(clip.alpha_used),
            "start_reason": clip.start_reason,
            "wall_time": float(clip.wall_time),
            "seq": clip.seq,
        }
        digest, nframes = _write_jsonl(root / rel, h, clip.frames)
        files.append({"path": rel, "sha256": digest, "frames": nframes})
    (root / "header.json").write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "counts": {"episodes": len(dataset.episodes), "clips": len(dataset.clips)},
        "files": files,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return manifest


def _read_jsonl(path):
    data = path.read_bytes()
    if not data:
        raise CorruptRecord(path, 0, "empty file")
    records = []
    offset = 0
    for raw in data.split(b"\n"):
        if raw == b"":
            offset += 1
            continue
        try:
            records.append((offset, json.loads(raw)))
        except json.JSONDecodeError as e:
            raise CorruptRecord(path, offset, str(e)) from e
        offset += len(raw) + 1
    if not records:
        raise CorruptRecord(path, 0, "no records")
    return records


def read_dataset(path):
    """Load a dataset directory, verifying schema version, hashes and counts."""
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"no manifest at {manifest_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"manifest schema {manifest.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    meta = json.loads((root / "header.json").read_text(encoding="utf-8"))
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise SchemaVersionMismatch(
            f"header schema {meta.get('schema_version')!r}, expected {SCHEMA_VERSION}"
        )
    episodes, clips = [], []
    for entry in manifest["files"]:
        fpath = root / entry["path"]
        data = fpath.read_bytes()
        digest = hashlib.sha256(data).hexdigest()
        if digest != entry["sha256"]:
            raise CorruptRecord(fpath, 0, "content hash does not match the manifest")
        records = _read_jsonl(fpath)
        _, header = records[0]
        if header.get("schema_version") != SCHEMA_VERSION:
            raise SchemaVersionMismatch(
                f"{fpath}: record schema {header.get('schema_version')!r}"
            )
        frames = []
        for off, rec in records[1:]:
            try:
                frames.append(_frame_from_record(rec))
            except KeyError as e:
                raise CorruptRecord(fpath, off, f"missing field {e}") from e
        if len(frames) != entry["frames"]:
            raise CorruptRecord(
                fpath, len(data), f"expected {entry['frames']} frames, found {len(frames)}"
            )
        if header["kind"] == "episode":
            episodes.append(Episode(
                frames=tuple(frames), task_id=header["task_id"],
                outcome=header["outcome"], wall_time=header["wall_time"],
                seq=header.get("seq", 0),
            ))
        else:
            clips.append(Clip(
                frames=tuple(frames), task_id=header["task_id"],
                alpha_used=header["alpha_used"], start_reason=header["start_reason"],
                wall_time=header["wall_time"], seq=header.get("seq", 0),
            ))
    counts = manifest["counts"]
    if counts != {"episodes": len(episodes), "clips": len(clips)}:
        raise CorruptRecord(manifest_path, 0, "manifest counts disagree with files")
    return Dataset(episodes=tuple(episodes), clips=tuple(clips), meta=meta)


def dataset_frames(dataset):
    if not dataset.episodes and not dataset.clips:
        raise EmptyDataset("dataset has no episodes or clips")
    for ep in dataset.episodes:
        yield ep
    for clip in dataset.clips:
        yield clip
