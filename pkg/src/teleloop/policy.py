"""Chunked nonparametric behavior cloning.

The policy memorizes (observation, action-chunk) pairs from demonstrations
and answers queries with the chunk of the nearest standardized neighbor
(or the per-step mean of the k nearest). Training is a table build, so a
fine-tune round is just a rebuild over base episodes plus corrective clips;
base pairs are never discarded, which rules out forgetting by construction.
"""

import hashlib
import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyDataset
from .recording import read_dataset

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class ActionChunk:
    """h follower joint targets plus a gripper command per step."""

    commands: np.ndarray  # (h, n_f + 1)

    @property
    def horizon(self):
        return self.commands.shape[0]


def build_pairs(dataset, h):
    """One pair per recorded frame: the observation at t and the next h
    follower commands (joint targets + gripper), repeating the final command
    past the end of the segment."""
    if h < 1:
        raise ValueError("chunk horizon must be >= 1")
    segments = list(dataset.episodes) + list(dataset.clips)
    if not segments:
        raise EmptyDataset("no episodes or clips to build pairs from")
    pairs = []
    for seg in segments:
        frames = seg.frames
        cmds = np.array(
            [np.concatenate([f.follower_cmd_q, [f.gripper]]) for f in frames]
        )
        m = len(frames)
        for i in range(m):
            chunk = np.empty((h, cmds.shape[1]))
            for j in range(h):
                chunk[j] = cmds[min(i + 1 + j, m - 1)]
            pairs.append((frames[i].obs.astype(float), chunk))
    return pairs


class BcPolicy:
    """k-NN lookup over standardized observations."""

    def __init__(self, observations, chunks, mean, std, k, h):
        self.observations = observations  # (P, D) raw
        self.chunks = chunks  # (P, h, n_f + 1)
        self.mean = mean
        self.std = std
        self.k = k
        self.h = h
        self._z = (observations - mean) / std

    @property
    def n_pairs(self):
        return self.observations.shape[0]

    @property
    def obs_dim(self):
        return self.observations.shape[1]

    def predict(self, obs):
        obs = np.asarray(obs, dtype=float)
        if obs.shape != (self.obs_dim,):
            raise DimensionMismatch(
                f"observation has shape {obs.shape}, policy expects ({self.obs_dim},)"
            )
        z = (obs - self.mean) / self.std
        d2 = ((self._z - z) ** 2).sum(axis=1)
        if self.k == 1:
            idx = int(np.argmin(d2))  # first minimum: earliest-insertion tie-break
            return ActionChunk(self.chunks[idx].copy())
        order = np.argsort(d2, kind="stable")[: self.k]
        return ActionChunk(self.chunks[order].mean(axis=0))

    def content_equal(self, other):
        return (
            self.k == other.k
            and self.h == other.h
            and np.array_equal(self.observations, other.observations)
            and np.array_equal(self.chunks, other.chunks)
            and np.array_equal(self.mean, other.mean)
            and np.array_equal(self.std, other.std)
        )


def _fit(pairs, k, h, mean=None, std=None):
    obs = np.array([p[0] for p in pairs])
    chunks = np.array([p[1] for p in pairs])
    if mean is None:
        mean = obs.mean(axis=0)
        std = obs.std(axis=0)
        std = np.where(std > STD_FLOOR, std, 1.0)  # constant dims carry no weight
    return BcPolicy(obs, chunks, mean, std, k, h)


def train_base(dataset, h=10, k=1):
    """Fit the base policy on the warmup demonstrations."""
    return _fit(build_pairs(dataset, h), k, h)


def finetune(policy, merged):
    """Rebuild the table over base episodes plus clips, keeping the base
    feature scaling frozen. Corrective pairs dominate queries near the states
    they were recorded in; any query whose nearest base pair is closer than
    every clip pair keeps its original answer."""
    return _fit(build_pairs(merged, policy.h), policy.k, policy.h,
                mean=policy.mean, std=policy.std)


# ----------------------------------------------------------------- save/load


def _dataset_digest(dataset_dir):
    return hashlib.sha256((Path(dataset_dir) / "manifest.json").read_bytes()).hexdigest()


def save_policy(policy, out_dir, dataset_dir):
    """Persist as a manifest referencing the training dataset (no blobs):
    the table is rebuilt deterministically on load. The dataset reference is
    stored relative to the policy directory so the pair stays relocatable."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema_version": 1,
        "kind": "knn_chunk_policy",
        "k": policy.k,
        "h": policy.h,
        "pairs": policy.n_pairs,
        "obs_dim": policy.obs_dim,
        "dataset": os.path.relpath(os.path.abspath(dataset_dir), out.resolve()),
        "dataset_manifest_sha256": _dataset_digest(dataset_dir),
        "scaling": {
            "mean": [float(x) for x in policy.mean],
            "std": [float(x) for x in policy.std],
        },
    }
    (out / "policy.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return doc


def load_policy(policy_dir):
    doc = json.loads((Path(policy_dir) / "policy.json").read_text(encoding="utf-8"))
    dataset_dir = Path(policy_dir).resolve() / doc["dataset"]
    if _dataset_digest(dataset_dir) != doc["dataset_manifest_sha256"]:
        raise ValueError(f"dataset at {dataset_dir} changed since the policy was saved")
    dataset = read_dataset(dataset_dir)
    # the saved scaling is authoritative: a fine-tuned policy keeps the base
    # policy's scaling, which a fresh fit of the merged dataset would not
    mean = np.array(doc["scaling"]["mean"])
    std = np.array(doc["scaling"]["std"])
    policy = _fit(build_pairs(dataset, doc["h"]), doc["k"], doc["h"], mean=mean, std=std)
    if policy.n_pairs != doc["pairs"]:
        raise ValueError("rebuilt policy disagrees with its manifest")
    return policy
