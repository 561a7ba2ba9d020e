"""Loss, optimizers, the training loop and horizon-wise evaluation."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from twobody.data import WindowSet
from twobody.errors import ArgumentError, ConfigError, DimensionError, DivergenceError
from twobody.model import Model
from twobody.numerics import Rng, Tape, ops

DEFAULT_HORIZONS_MS = (200, 400, 600, 1000)


# -- metrics -----------------------------------------------------------------


def mpjpe(pred, gt) -> float:
    """Mean over joints of the Euclidean distance between ``[V, 3]`` poses."""
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 2 or pred.shape[1] != 3:
        raise DimensionError(f"mpjpe needs matching [V, 3] poses, got {pred.shape} and {gt.shape}")
    # correctly rounded sum: joint order cannot change the result
    return math.fsum(ops.norm(pred - gt).tolist()) / pred.shape[0]


def sequence_loss(pred, gt):
    """Frame-averaged MPJPE of ``[..., N, V, 3]`` predictions (array or node)."""
    ps, gs = ops.value(pred).shape, np.shape(ops.value(gt))
    if ps != gs:
        raise DimensionError(f"prediction {ps} and target {gs} differ")
    return ops.reduce_mean(ops.norm(ops.sub(pred, gt)))


def zero_velocity(x_in: np.ndarray, N: int) -> np.ndarray:
    """Repeat the last observed pose ``N`` times."""
    last = x_in[..., -1:, :, :]
    return np.repeat(last, N, axis=-3)


# -- optimizers --------------------------------------------------------------


@dataclass
class TrainConfig:
    lr: float = 3e-3
    optimizer: str = "adam"  # or "sgd"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum: float = 0.9
    batch_size: int = 32
    steps: int = 2000
    decay_every: int | None = None  # default: a quarter of the steps
    decay_factor: float = 0.5
    clip_norm: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.lr < 0 or self.batch_size < 1 or self.steps < 0:
            raise ConfigError("lr must be >= 0, batch_size >= 1 and steps >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.decay_every is not None and self.decay_every < 1:
            raise ConfigError("decay_every must be >= 1")

    def lr_at(self, step: int) -> float:
        every = self.decay_every or max(1, self.steps // 4)
        return self.lr * self.decay_factor ** (step // every)

    def replace(self, **changes) -> "TrainConfig":
        data = asdict(self)
        data.update(changes)
        return TrainConfig(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown train config keys: {unknown}")
        return cls(**data)


@dataclass
class OptState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def _check_finite(grads, step):
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise DivergenceError(step, f"non-finite gradient for {name}")


def adam_step(params: dict, grads: dict, state: OptState, cfg: TrainConfig, lr: float | None = None):
    """One bias-corrected Adam update; returns ``(params, state)`` as new objects."""
    _check_finite(grads, state.step)
    lr = cfg.lr if lr is None else lr
    t = state.step + 1
    new_params, m, v = {}, {}, {}
    bc1 = 1.0 - cfg.beta1 ** t
    bc2 = 1.0 - cfg.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m[name] = cfg.beta1 * state.m.get(name, 0.0) + (1.0 - cfg.beta1) * g
        v[name] = cfg.beta2 * state.v.get(name, 0.0) + (1.0 - cfg.beta2) * (g * g)
        new_params[name] = p - lr * (m[name] / bc1) / (np.sqrt(v[name] / bc2) + cfg.eps)
    return new_params, OptState(t, m, v)


def sgd_step(params: dict, grads: dict, state: OptState, cfg: TrainConfig, lr: float | None = None):
    _check_finite(grads, state.step)
    lr = cfg.lr if lr is None else lr
    new_params, m = {}, {}
    for name, p in params.items():
        m[name] = cfg.momentum * state.m.get(name, 0.0) + grads[name]
        new_params[name] = p - lr * m[name]
    return new_params, OptState(state.step + 1, m, {})


def clip_gradients(grads: dict, max_norm: float) -> dict:
    total = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
    if total <= max_norm:
        return grads
    factor = max_norm / total
    return {k: g * factor for k, g in grads.items()}


# -- training loop -----------------------------------------------------------


@dataclass
class TrainResult:
    params: dict
    losses: list[float]  # minibatch loss before each update
    lrs: list[float]


def loss_and_grads(model: Model, params: dict, x_in: np.ndarray, x_out: np.ndarray):
    tape = Tape()
    loss = sequence_loss(model.forward(tape.parameters(params), x_in), x_out)
    return float(loss.value), tape.backward(loss)


def dataset_loss(model: Model, params: dict, windows: WindowSet, batch: int = 256) -> float:
    """Frame-averaged MPJPE over all windows (no gradients)."""
    total = 0.0
    for i in range(0, len(windows), batch):
        pred = model.forward(params, windows.x_in[i:i + batch])
        total += float(ops.norm(pred - windows.x_out[i:i + batch]).mean(axis=(-1, -2)).sum())
    return total / len(windows)


def train(model: Model, params: dict, windows: WindowSet, cfg: TrainConfig) -> TrainResult:
    """Minibatch training on shuffled windows.

    Shuffling draws from stream 1 of ``cfg.seed``. Tree-constrained adjacencies
    are re-projected after every update. A non-finite loss or gradient raises
    :class:`DivergenceError` carrying the losses recorded so far.
    """
    if len(windows) == 0:
        raise ArgumentError("training needs at least one window")
    model.check_params(params)
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    rng = Rng(cfg.seed, stream=1)
    batch = min(cfg.batch_size, len(windows))
    order = rng.permutation(len(windows))
    cursor = 0
    state = OptState()
    step_fn = adam_step if cfg.optimizer == "adam" else sgd_step
    losses, lrs = [], []
    for step in range(cfg.steps):
        if cursor + batch > len(order):
            order = rng.permutation(len(windows))
            cursor = 0
        idx = np.sort(order[cursor:cursor + batch])
        cursor += batch
        loss, grads = loss_and_grads(model, params, windows.x_in[idx], windows.x_out[idx])
        if not math.isfinite(loss):
            raise DivergenceError(step, "non-finite loss", losses)
        if cfg.clip_norm is not None:
            grads = clip_gradients(grads, cfg.clip_norm)
        lr = cfg.lr_at(step)
        try:
            params, state = step_fn(params, grads, state, cfg, lr)
        except DivergenceError as exc:
            raise DivergenceError(step, str(exc), losses) from exc
        model.project(params)
        losses.append(loss)
        lrs.append(lr)
    return TrainResult(params, losses, lrs)


# -- evaluation --------------------------------------------------------------


@dataclass
class EvalReport:
    horizons_ms: list[int]
    frames: list[int]  # 1-based future frame per horizon
    overall: dict[int, float]  # horizon_ms -> mm, averaged over windows
    per_action: dict[str, dict[int, float]]
    windows: int

    def rows(self):
        for action in ["ALL"] + sorted(self.per_action):
            values = self.overall if action == "ALL" else self.per_action[action]
            for h, f in zip(self.horizons_ms, self.frames):
                yield action, h, f, values[h]

    def to_csv(self) -> str:
        lines = ["action,horizon_ms,frame,mpjpe_mm"]
        lines += [f"{a},{h},{f},{v:.6f}" for a, h, f, v in self.rows()]
        return "\n".join(lines) + "\n"

    def table(self) -> str:
        head = "action".ljust(10) + "".join(f"{h:>10d}" for h in self.horizons_ms)
        out = [head, "-" * len(head)]
        for action in sorted(self.per_action) + ["ALL"]:
            values = self.overall if action == "ALL" else self.per_action[action]
            out.append(action.ljust(10) + "".join(f"{values[h]:10.2f}" for h in self.horizons_ms))
        return "\n".join(out)


def horizon_frames(horizons_ms, N: int, fps: float = 25.0) -> list[int]:
    """Map horizons in ms to 1-based future frame indices."""
    frame_ms = 1000.0 / fps
    frames = []
    for h in horizons_ms:
        f = h / frame_ms
        if h <= 0 or abs(f - round(f)) > 1e-9:
            raise ArgumentError(f"horizon {h} ms is not a positive multiple of {frame_ms:g} ms")
        if round(f) > N:
            raise ArgumentError(f"horizon {h} ms exceeds the {N}-frame prediction ({N * frame_ms:g} ms)")
        frames.append(int(round(f)))
    return frames


def evaluate_predictions(pred: np.ndarray, windows: WindowSet, horizons_ms=DEFAULT_HORIZONS_MS, fps: float = 25.0) -> EvalReport:
    """MPJPE at each horizon's frame, averaged over windows (and per action)."""
    horizons_ms = [int(h) for h in horizons_ms]
    frames = horizon_frames(horizons_ms, windows.x_out.shape[1], fps)
    idx = [f - 1 for f in frames]
    errs = ops.norm(pred[:, idx] - windows.x_out[:, idx]).mean(axis=-1)  # [W, H]
    overall = {h: float(errs[:, i].mean()) for i, h in enumerate(horizons_ms)}
    per_action = {}
    actions = np.array(windows.actions)
    for a in sorted(set(windows.actions)):
        sel = errs[actions == a]
        per_action[a] = {h: float(sel[:, i].mean()) for i, h in enumerate(horizons_ms)}
    return EvalReport(horizons_ms, frames, overall, per_action, len(windows))


def predict(model: Model, params: dict, windows: WindowSet, batch: int = 256) -> np.ndarray:
    chunks = [model.forward(params, windows.x_in[i:i + batch]) for i in range(0, len(windows), batch)]
    return np.concatenate(chunks, axis=0)


def evaluate(model: Model, params: dict, windows: WindowSet, horizons_ms=DEFAULT_HORIZONS_MS, fps: float = 25.0) -> EvalReport:
    if len(windows) == 0:
        raise ArgumentError("evaluation needs at least one window")
    horizon_frames(horizons_ms, model.cfg.N_fut, fps)
    return evaluate_predictions(predict(model, params, windows), windows, horizons_ms, fps)
