"""Sequence ingestion, normalization, windowing, splits and synthetic motion.

Sequence CSV columns: ``seq_id,action,couple,fps,frame,body,joint,x,y,z``.
Frames are 0-based and consecutive per ``seq_id``; ``body`` is 0 or 1;
``joint`` indexes the skeleton file order; coordinates are millimeters
written with at most 6 decimals.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from twobody.errors import ConfigError, IngestionError
from twobody.model.skeleton import SkeletonSpec, rest_pose
from twobody.numerics import Rng

CSV_HEADER = ["seq_id", "action", "couple", "fps", "frame", "body", "joint", "x", "y", "z"]
NORMALIZATION_MODES = ("none", "center_last", "center_mean")


@dataclass
class SequenceRecord:
    seq_id: str
    action: str
    couple: int
    fps: float
    frames: np.ndarray  # [F, bodies*J, 3] millimeters
    meta: dict = field(default_factory=dict)

    @property
    def length(self) -> int:
        return self.frames.shape[0]


@dataclass
class WindowSet:
    """Observed/future window pairs cut from sequences.

    ``source[i] = (sequence index, first frame)`` records where window ``i``
    came from.
    """

    x_in: np.ndarray  # [W, T_obs, V, 3]
    x_out: np.ndarray  # [W, N, V, 3]
    actions: list[str]
    source: list[tuple[int, int]] = field(default_factory=list)

    def __len__(self) -> int:
        return self.x_in.shape[0]

    def subset(self, idx) -> "WindowSet":
        idx = list(idx)
        return WindowSet(self.x_in[idx], self.x_out[idx], [self.actions[i] for i in idx], [self.source[i] for i in idx])


# -- CSV ---------------------------------------------------------------------


def load_sequences(path: str | Path, skeleton: SkeletonSpec) -> list[SequenceRecord]:
    """Read the sequence CSV; one record per ``seq_id`` in first-seen order."""
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"sequence file not found: {path}")
    J, bodies = skeleton.J, skeleton.bodies
    per_frame = J * bodies
    seqs: dict[str, dict] = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return []
        if [h.strip() for h in header] != CSV_HEADER:
            raise IngestionError(f"{path}: header must be {','.join(CSV_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                seq_id, action, couple, fps, frame, body, joint = row[0], row[1], int(row[2]), float(row[3]), int(row[4]), int(row[5]), int(row[6])
                xyz = (float(row[7]), float(row[8]), float(row[9]))
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"{path}:{lineno}: malformed row ({exc})") from exc
            if not (0 <= body < bodies and 0 <= joint < J):
                raise IngestionError(f"{path}:{lineno}: body {body} / joint {joint} outside skeleton")
            rec = seqs.get(seq_id)
            if rec is None:
                rec = seqs[seq_id] = {"action": action, "couple": couple, "fps": fps, "frames": [], "current": -1}
            if frame == rec["current"] + 1:
                if rec["current"] >= 0:
                    _close_frame(rec, seq_id, per_frame)
                rec["current"] = frame
                rec["frames"].append(np.full((per_frame, 3), np.nan))
            elif frame != rec["current"]:
                raise IngestionError(f"sequence {seq_id}: frame index {frame} after {rec['current']} is not consecutive")
            rec["frames"][-1][body * J + joint] = xyz
    out = []
    for seq_id, rec in seqs.items():
        _close_frame(rec, seq_id, per_frame)
        out.append(SequenceRecord(seq_id, rec["action"], rec["couple"], rec["fps"], np.stack(rec["frames"])))
    return out


def _close_frame(rec, seq_id, per_frame):
    missing = np.isnan(rec["frames"][-1]).any(axis=1)
    if missing.any():
        raise IngestionError(
            f"sequence {seq_id}, frame {rec['current']}: missing {int(missing.sum())} of {per_frame} joints"
        )


def save_sequences(path: str | Path, seqs: list[SequenceRecord], skeleton: SkeletonSpec) -> None:
    J = skeleton.J
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for s in seqs:
            fps = f"{s.fps:g}"
            for f in range(s.length):
                for node in range(s.frames.shape[1]):
                    x, y, z = s.frames[f, node]
                    w.writerow([s.seq_id, s.action, s.couple, fps, f, node // J, node % J, f"{x:.6f}", f"{y:.6f}", f"{z:.6f}"])


# -- normalization and windows ------------------------------------------------


def reference_point(frames: np.ndarray, skeleton: SkeletonSpec, mode: str, t_obs: int | None = None) -> np.ndarray:
    """Translation subtracted by ``mode``: midpoint of the bodies' roots at the
    last observed frame, or averaged over the observed frames."""
    if mode not in NORMALIZATION_MODES:
        raise ConfigError(f"unknown normalization {mode!r}; expected one of {NORMALIZATION_MODES}")
    if mode == "none":
        return np.zeros(3)
    t_obs = frames.shape[0] if t_obs is None else t_obs
    roots = [b * skeleton.J + skeleton.root for b in range(skeleton.bodies)]
    mid = frames[:t_obs, roots].mean(axis=1)  # [t_obs, 3]
    return mid[-1] if mode == "center_last" else mid.mean(axis=0)


def normalize_pair(seq: SequenceRecord, mode: str, skeleton: SkeletonSpec, t_obs: int | None = None) -> SequenceRecord:
    """Translate both bodies by the same vector so the reference point sits at
    the origin. ``t_obs`` is the observed length when ``seq`` is a window."""
    ref = reference_point(seq.frames, skeleton, mode, t_obs)
    if mode == "none":
        return seq
    return SequenceRecord(seq.seq_id, seq.action, seq.couple, seq.fps, seq.frames - ref, dict(seq.meta))


def window_count(F: int, T_obs: int, N: int, stride: int) -> int:
    span = F - T_obs - N
    return span // stride + 1 if span >= 0 else 0


def window(
    seqs: list[SequenceRecord],
    T_obs: int,
    N: int,
    stride: int = 1,
    normalization: str = "none",
    skeleton: SkeletonSpec | None = None,
) -> WindowSet:
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    if normalization != "none" and skeleton is None:
        raise ConfigError("normalization needs the skeleton (root joint)")
    xs, ys, actions, source = [], [], [], []
    for si, s in enumerate(seqs):
        for w in range(window_count(s.length, T_obs, N, stride)):
            start = w * stride
            chunk = s.frames[start:start + T_obs + N]
            if normalization != "none":
                chunk = chunk - reference_point(chunk, skeleton, normalization, T_obs)
            xs.append(chunk[:T_obs])
            ys.append(chunk[T_obs:])
            actions.append(s.action)
            source.append((si, start))
    V = seqs[0].frames.shape[1] if seqs else 0
    if not xs:
        return WindowSet(np.zeros((0, T_obs, V, 3)), np.zeros((0, N, V, 3)), [], [])
    return WindowSet(np.stack(xs), np.stack(ys), actions, source)


# -- splits -----------------------------------------------------------------


@dataclass(frozen=True)
class SplitConfig:
    """Which sequences train and which test. ``None`` lists mean "any"."""

    train_actions: tuple[str, ...] | None = None
    test_actions: tuple[str, ...] | None = None
    train_couples: tuple[int, ...] | None = None
    test_couples: tuple[int, ...] | None = None

    def __post_init__(self):
        ta, sa = self.train_actions, self.test_actions
        tc, sc = self.train_couples, self.test_couples
        couples_separate = tc is not None and sc is not None and not set(tc) & set(sc)
        if ta is not None and sa is not None and set(ta) & set(sa) and not couples_separate:
            raise ConfigError(f"actions {sorted(set(ta) & set(sa))} appear on both sides of the split")
        if ta is None and sa is None and not couples_separate:
            raise ConfigError("split needs disjoint action lists or disjoint couple lists")

    @classmethod
    def from_dict(cls, doc: dict) -> "SplitConfig":
        allowed = {"train_actions", "test_actions", "train_couples", "test_couples"}
        unknown = sorted(set(doc) - allowed)
        if unknown:
            raise ConfigError(f"unknown split keys: {unknown}")

        def tup(key, conv):
            v = doc.get(key)
            return None if v is None else tuple(conv(i) for i in v)

        return cls(tup("train_actions", str), tup("test_actions", str), tup("train_couples", int), tup("test_couples", int))

    @classmethod
    def load(cls, path_or_name: str | Path) -> "SplitConfig":
        from twobody.resources import shipped

        name = str(path_or_name)
        path = Path(name)
        if not path.exists() and shipped(name) is not None:
            path = shipped(name)
        if not path.exists():
            raise ConfigError(f"split file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()))

    @classmethod
    def single_action(cls, action: str) -> "SplitConfig":
        """One action of couple 2 to train, the same action of couple 1 to test."""
        return cls((action,), (action,), (2,), (1,))

    def side(self, seq: SequenceRecord) -> str | None:
        def ok(values, v):
            return values is None or v in values

        train = ok(self.train_actions, seq.action) and ok(self.train_couples, seq.couple)
        test = ok(self.test_actions, seq.action) and ok(self.test_couples, seq.couple)
        if train and test:
            raise ConfigError(f"sequence {seq.seq_id} matches both sides of the split")
        return "train" if train else "test" if test else None


def split(seqs: list[SequenceRecord], protocol: SplitConfig) -> tuple[list[SequenceRecord], list[SequenceRecord]]:
    """Partition by the declared lists; sequences matching neither are dropped."""
    train, test = [], []
    for s in seqs:
        side = protocol.side(s)
        if side == "train":
            train.append(s)
        elif side == "test":
            test.append(s)
    return train, test


# -- synthetic motion -------------------------------------------------------


@dataclass(frozen=True)
class SynthStyle:
    min_components: int = 2
    max_components: int = 4
    min_freq_hz: float = 0.2
    max_freq_hz: float = 1.0
    min_amp_mm: float = 50.0
    max_amp_mm: float = 300.0
    min_lag_frames: int = 2
    max_lag_frames: int = 10
    partner_distance_mm: float = 1500.0
    fps: float = 25.0
    actions: int = 4
    test_sequences: int = 2  # the last ones are labeled couple 2
    per_action: bool = True  # sequences of one action replay a shared template
    amp_jitter: float = 0.1  # relative per-sequence amplitude scatter (per_action only)

    @classmethod
    def from_dict(cls, doc: dict) -> "SynthStyle":
        from dataclasses import fields

        known = {f.name for f in fields(cls)}
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown synth style keys: {unknown}")
        return cls(**doc)


def mirror(points: np.ndarray) -> np.ndarray:
    """Reflect across the ``x = 0`` plane (partners face each other)."""
    return points * np.array([-1.0, 1.0, 1.0])


def synth_generate(
    rng: Rng,
    n_sequences: int,
    F: int,
    skeleton: SkeletonSpec,
    style: SynthStyle = SynthStyle(),
) -> list[SequenceRecord]:
    """Deterministic coupled 2-body motion.

    Body 1: every joint coordinate is its rest value plus a sum of 2-4
    sinusoids whose frequencies are shared within a sequence (phases and
    amplitudes per coordinate). With ``style.per_action`` the components are
    drawn once per action label and each sequence replays them from a random
    start time with jittered amplitudes. Body 2 replays body 1 mirrored,
    delayed by an integer lag and shifted by the partner distance along x.
    """
    if F < 2:
        raise ConfigError("synthetic sequences need F >= 2")
    J = skeleton.J
    rest = rest_pose(skeleton)
    offset = np.array([style.partner_distance_mm, 0.0, 0.0])

    def components(g):
        n_comp = int(g.integers(style.min_components, style.max_components + 1))
        freqs = g.uniform(style.min_freq_hz, style.max_freq_hz, n_comp)
        amps = g.uniform(style.min_amp_mm, style.max_amp_mm, (n_comp, J, 3))
        phases = g.uniform(0.0, 2.0 * np.pi, (n_comp, J, 3))
        return freqs, amps, phases

    templates = [components(rng.spawn(n_sequences + a).generator) for a in range(style.actions)]
    out = []
    for s in range(n_sequences):
        g = rng.spawn(s).generator
        freqs, amps, phases = components(g)
        lag = int(g.integers(style.min_lag_frames, style.max_lag_frames + 1))
        if style.per_action:
            freqs, amps, phases = templates[s % style.actions]
            start = g.uniform(0.0, 10.0 * style.fps)
            scale = 1.0 + style.amp_jitter * g.uniform(-1.0, 1.0, amps.shape)
            amps = np.clip(amps * scale, style.min_amp_mm, style.max_amp_mm)
            phases = phases + 2.0 * np.pi * freqs[:, None, None] * start / style.fps

        def body1(t, freqs=freqs, amps=amps, phases=phases):
            t = np.asarray(t, dtype=np.float64)[:, None, None, None]
            wave = amps * np.sin(2.0 * np.pi * freqs[:, None, None] * t / style.fps + phases)
            return rest + wave.sum(axis=1)

        frames_t = np.arange(F)
        b1 = body1(frames_t)
        if skeleton.bodies == 2:
            b2 = mirror(body1(frames_t - lag)) + offset
            frames = np.concatenate([b1, b2], axis=1)
        else:
            frames = b1
        couple = 2 if s >= n_sequences - style.test_sequences else 1
        out.append(
            SequenceRecord(f"synth{s:03d}", f"A{s % style.actions + 1}", couple, style.fps, frames, {"lag": lag})
        )
    return out
