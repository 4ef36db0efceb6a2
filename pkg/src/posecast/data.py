"""Pose sequences: container format, windowing, and synthetic motion.

The on-disk container ("MGPS") is a flat little-endian binary file:

    bytes 0-3   ASCII magic "MGPS"
    byte  4     format version (currently 1)
    then per-sequence records:
        uint32  V (joints per frame)
        uint32  frame count
        float64 rate (frames per second)
        uint32  label byte length, followed by that many UTF-8 bytes
        float64 x frames*V*3, frame-major (frame, joint, coordinate)

A CSV import path (header ``frame,joint,x,y,z``) exists for hand-authored
fixtures. Round-trips through save/load are bit-exact.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field

import numpy as np

from .graphs import SkeletonGraph

__all__ = [
    "PoseSequence",
    "WindowSet",
    "PoseFormatError",
    "save_sequences",
    "load_sequences",
    "load_csv",
    "make_windows",
    "synth_kinematic",
    "skeleton_preset",
    "SKELETON_PRESETS",
]

MAGIC = b"MGPS"
VERSION = 1


class PoseFormatError(ValueError):
    """Malformed pose container or CSV input."""


@dataclass
class PoseSequence:
    frames: np.ndarray            # [frames, V, 3], millimeters
    rate: float = 25.0
    label: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise PoseFormatError(
                f"pose frames must be [frames, V, 3], got {self.frames.shape}"
            )
        if not np.isfinite(self.frames).all():
            raise PoseFormatError("pose coordinates must be finite")

    @property
    def joint_count(self):
        return self.frames.shape[1]

    def __len__(self):
        return self.frames.shape[0]


@dataclass
class WindowSet:
    """(input, target) frame pairs, consecutive and non-overlapping."""

    inputs: np.ndarray            # [N, T, V, 3]
    targets: np.ndarray           # [N, K, V, 3]
    skeleton: SkeletonGraph | None = None

    def __len__(self):
        return self.inputs.shape[0]


def save_sequences(path, sequences):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(bytes([VERSION]))
        for seq in sequences:
            label = seq.label.encode("utf-8")
            f.write(struct.pack("<II", seq.joint_count, len(seq)))
            f.write(struct.pack("<d", seq.rate))
            f.write(struct.pack("<I", len(label)))
            f.write(label)
            f.write(seq.frames.astype("<f8").tobytes())


def load_sequences(path):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) == 0:
        return []
    if blob[:4] != MAGIC:
        raise PoseFormatError(f"bad magic {blob[:4]!r} at byte 0, expected {MAGIC!r}")
    if len(blob) < 5:
        raise PoseFormatError("truncated header at byte 4: missing version byte")
    if blob[4] != VERSION:
        raise PoseFormatError(f"unsupported version {blob[4]} at byte 4")

    sequences = []
    offset = 5
    while offset < len(blob):
        try:
            v, n_frames = struct.unpack_from("<II", blob, offset)
            rate, = struct.unpack_from("<d", blob, offset + 8)
            label_len, = struct.unpack_from("<I", blob, offset + 16)
            offset_data = offset + 20 + label_len
            label = blob[offset + 20: offset_data].decode("utf-8")
        except (struct.error, UnicodeDecodeError) as exc:
            raise PoseFormatError(
                f"truncated or corrupt record header at byte {offset}: {exc}"
            ) from exc
        if v == 0:
            raise PoseFormatError(f"record at byte {offset} declares 0 joints")
        n_values = n_frames * v * 3
        end = offset_data + 8 * n_values
        if end > len(blob):
            raise PoseFormatError(
                f"truncated record at byte {offset_data}: "
                f"need {8 * n_values} coordinate bytes, have {len(blob) - offset_data}"
            )
        coords = np.frombuffer(blob[offset_data:end], dtype="<f8")
        frames = coords.reshape(n_frames, v, 3).astype(np.float64)
        if not np.isfinite(frames).all():
            raise PoseFormatError(f"non-finite coordinate in record at byte {offset}")
        sequences.append(PoseSequence(frames=frames, rate=rate, label=label))
        offset = end

    joint_counts = {s.joint_count for s in sequences}
    if len(joint_counts) > 1:
        raise PoseFormatError(f"inconsistent joint counts across records: {joint_counts}")
    return sequences


def load_csv(path, rate=25.0, label=""):
    """Read a frame,joint,x,y,z table into a single PoseSequence."""
    rows = {}
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        required = {"frame", "joint", "x", "y", "z"}
        if reader.fieldnames is None or not required.issubset(reader.fieldnames):
            raise PoseFormatError(
                f"CSV header must contain {sorted(required)}, got {reader.fieldnames}"
            )
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (int(row["frame"]), int(row["joint"]))
                rows[key] = (float(row["x"]), float(row["y"]), float(row["z"]))
            except (TypeError, ValueError) as exc:
                raise PoseFormatError(f"bad CSV record at line {lineno}: {exc}") from exc
    if not rows:
        return PoseSequence(frames=np.zeros((0, 1, 3)), rate=rate, label=label)
    n_frames = max(f for f, _ in rows) + 1
    v = max(j for _, j in rows) + 1
    frames = np.zeros((n_frames, v, 3))
    for (f_idx, j_idx), xyz in rows.items():
        frames[f_idx, j_idx] = xyz
    return PoseSequence(frames=frames, rate=rate, label=label)


def make_windows(sequences, t_in, k_out, stride=1, skeleton=None):
    """All maximal (T-input, K-target) windows at the given stride."""
    if t_in < 1 or k_out < 1 or stride < 1:
        raise ValueError("t_in, k_out, and stride must all be >= 1")
    inputs, targets = [], []
    span = t_in + k_out
    for seq in sequences:
        for start in range(0, len(seq) - span + 1, stride):
            inputs.append(seq.frames[start: start + t_in])
            targets.append(seq.frames[start + t_in: start + span])
    if not inputs:
        v = sequences[0].joint_count if sequences else 0
        return WindowSet(
            inputs=np.zeros((0, t_in, v, 3)),
            targets=np.zeros((0, k_out, v, 3)),
            skeleton=skeleton,
        )
    return WindowSet(
        inputs=np.stack(inputs), targets=np.stack(targets), skeleton=skeleton
    )


def synth_kinematic(v_chain, frames, period, amplitude=0.6, seed=0, noise=0.0,
                    rate=25.0, label="synthetic"):
    """Periodic articulated-chain motion with unit-length segments.

    Each segment's direction oscillates sinusoidally (period in frames)
    around a per-segment rest orientation drawn from the seed; forward
    kinematics from a root fixed at the origin gives 3D coordinates.
    Gaussian noise, when requested, is added after kinematics.
    """
    if v_chain < 2:
        raise ValueError(f"chain needs >= 2 joints, got {v_chain}")
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    rng = np.random.default_rng(seed)
    n_seg = v_chain - 1
    rest_polar = rng.uniform(0.3, np.pi - 0.3, size=n_seg)
    rest_azimuth = rng.uniform(0.0, 2 * np.pi, size=n_seg)
    phase = rng.uniform(0.0, 2 * np.pi, size=n_seg)

    t = np.arange(frames)[:, None]
    angle = 2 * np.pi * t / period + phase[None, :]
    polar = rest_polar[None, :] + amplitude * np.sin(angle)
    azimuth = rest_azimuth[None, :] + amplitude * np.cos(angle)

    directions = np.stack(
        [
            np.sin(polar) * np.cos(azimuth),
            np.sin(polar) * np.sin(azimuth),
            np.cos(polar),
        ],
        axis=-1,
    )                                               # [frames, n_seg, 3], unit rows
    joints = np.zeros((frames, v_chain, 3))
    joints[:, 1:] = np.cumsum(directions, axis=1)
    if noise > 0.0:
        joints = joints + rng.normal(0.0, noise, size=joints.shape)
    return PoseSequence(frames=joints, rate=rate, label=label)


def _chain(n):
    return SkeletonGraph(
        joint_count=n, edges=frozenset((i, i + 1) for i in range(n - 1))
    )


# 22-joint kinematic tree (root pelvis; legs 1-4 / 5-8; spine 9-12 with a
# head-top node 21; arms 13-16 / 17-20). Parent of joint j:
_H36M22_PARENTS = (
    -1, 0, 1, 2, 3,          # pelvis, right leg: hip, knee, ankle, foot
    0, 5, 6, 7,              # left leg
    0, 9, 10, 11,            # spine, thorax, neck, head
    10, 13, 14, 15,          # left arm: shoulder, elbow, wrist, hand
    10, 17, 18, 19,          # right arm
    12,                      # head top
)


def _h36m22():
    edges = frozenset(
        (j, p) for j, p in enumerate(_H36M22_PARENTS) if p >= 0
    )
    return SkeletonGraph(joint_count=22, edges=edges)


SKELETON_PRESETS = ("chain_n", "h36m22")


def skeleton_preset(name):
    """Named skeletons: ``chain_<n>`` (path graph) or ``h36m22`` (22-joint tree)."""
    if name == "h36m22":
        return _h36m22()
    if name.startswith("chain_"):
        try:
            n = int(name.removeprefix("chain_"))
        except ValueError:
            n = 0
        if n >= 2:
            return _chain(n)
    raise ValueError(f"unknown skeleton preset {name!r}; available: {SKELETON_PRESETS}")
