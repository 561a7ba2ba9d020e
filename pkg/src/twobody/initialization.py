"""Parameter initialization schemes and studies of their effect.

Every learnable matrix is drawn from a zero-mean uniform ``U[-a, a]``; the
schemes differ only in the bound ``a``:

``paper``
    ``a = sqrt(k / n)`` where ``n`` is the fan-in of ``W``, the node count for
    the spatial adjacency and the frame count for the temporal one, and
    ``k = 2`` for ReLU (``1`` otherwise). Sampled variance is ``k / (3n)``.
``paper_strict``
    ``a = sqrt(3k / n)``, so the sampled variance is exactly ``k / n``.
``glorot``
    ``a = sqrt(6 / (fan_in + fan_out))``.
``he``
    ``a = sqrt(6 / fan_in)``.
``naive_uniform``
    a fixed bound, 1 by default.

Biases start at zero under every scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from twobody.errors import ArgumentError, DivergenceError
from twobody.model import LayerParams, Model, ModelConfig, ParamSpec, layer_forward, nonseparable_layer_forward
from twobody.numerics import Rng, uniform

SCHEMES = ("paper", "paper_strict", "glorot", "he", "naive_uniform")
ALIASES = {"uniform": "naive_uniform", "ours": "paper", "xavier": "glorot", "kaiming": "he"}


def k_for_activation(activation: str) -> int:
    return 2 if activation == "relu" else 1


@dataclass(frozen=True)
class InitSpec:
    scheme: str = "paper"
    k: int = 2
    seed: int = 0
    bound: float = 1.0

    def __post_init__(self):
        scheme = ALIASES.get(self.scheme, self.scheme)
        if scheme not in SCHEMES:
            raise ArgumentError(f"unknown init scheme {self.scheme!r}; expected one of {SCHEMES}")
        object.__setattr__(self, "scheme", scheme)
        if self.k not in (1, 2):
            raise ArgumentError("k must be 1 or 2")
        if self.bound <= 0:
            raise ArgumentError("naive_uniform bound must be positive")

    @classmethod
    def parse(cls, text: str, activation: str = "relu", seed: int = 0) -> "InitSpec":
        """``"he"``, ``"paper_strict"``, ``"naive_uniform:0.1"`` and friends."""
        name, _, bound = text.partition(":")
        return cls(name, k_for_activation(activation), seed, float(bound) if bound else 1.0)

    @classmethod
    def for_model(cls, cfg: ModelConfig, seed: int = 0) -> "InitSpec":
        return cls(cfg.init_scheme, k_for_activation(cfg.activation), seed, cfg.init_bound)

    @property
    def label(self) -> str:
        return f"naive_uniform:{self.bound:g}" if self.scheme == "naive_uniform" else self.scheme


def init_bound(scheme: str, k: int, fan_in: int, fan_out: int, bound: float = 1.0) -> float:
    scheme = ALIASES.get(scheme, scheme)
    if scheme == "paper":
        return math.sqrt(k / fan_in)
    if scheme == "paper_strict":
        return math.sqrt(3.0 * k / fan_in)
    if scheme == "glorot":
        return math.sqrt(6.0 / (fan_in + fan_out))
    if scheme == "he":
        return math.sqrt(6.0 / fan_in)
    if scheme == "naive_uniform":
        return bound
    raise ArgumentError(f"unknown init scheme {scheme!r}")


def sample(spec: ParamSpec, init: InitSpec, rng: Rng) -> np.ndarray:
    if spec.role == "bias":
        return np.zeros(spec.shape)
    a = init_bound(init.scheme, init.k, spec.fan_in, spec.fan_out, init.bound)
    return uniform(rng, -a, a, spec.shape)


def init_layer(p: LayerParams, spec: InitSpec, rng: Rng) -> LayerParams:
    """Fresh ``A_s``, ``A_t``, ``W`` with the shapes of ``p``."""
    n_v = p.A_s.shape[-1]
    n_t = p.A_t.shape[-1]
    c_in, c_out = p.W.shape
    return LayerParams(
        sample(ParamSpec(p.A_s.shape, "spatial", n_v, n_v), spec, rng),
        sample(ParamSpec(p.A_t.shape, "temporal", n_t, n_t), spec, rng),
        sample(ParamSpec(p.W.shape, "weight", c_in, c_out), spec, rng),
        p.activation,
    )


def init_params(model: Model, spec: InitSpec | None = None, rng: Rng | None = None) -> dict[str, np.ndarray]:
    """Draw every parameter of ``model``; tree-masked adjacencies are projected."""
    if spec is None:
        spec = InitSpec.for_model(model.cfg)
    if rng is None:
        rng = Rng(spec.seed, stream=0)
    params = {name: sample(ps, spec, rng) for name, ps in model.specs.items()}
    return model.project(params)


# -- variance propagation --------------------------------------------------


@dataclass
class ProbeResult:
    """Std ratio ``std(layer output) / std(input)`` per depth, over trials.

    Index 0 is the input itself (ratio exactly 1).
    """

    mean: list[float]
    std: list[float]
    ratios: np.ndarray = field(repr=False)  # [trials, depth + 1]


def variance_probe(cfg: ModelConfig, spec: InitSpec, trials: int = 100, input_std: float = 1.0, seed: int = 0) -> ProbeResult:
    """Push zero-mean Gaussian input through freshly initialized encoder
    layers and record how the activation spread evolves with depth.

    Only the GCN layer stack (with the configured per-layer skips) is probed;
    attention, hierarchy and decoder are left out.
    """
    if trials < 1:
        raise ArgumentError("trials must be >= 1")
    probe_cfg = cfg.replace(attention=False, hierarchy=None)
    model = Model(probe_cfg)
    K, V = probe_cfg.time_extent, probe_cfg.nodes
    root = Rng(seed, stream=11)
    ratios = np.ones((trials, probe_cfg.depth + 1))
    for trial in range(trials):
        rng = root.spawn(trial)
        params = init_params(model, spec, rng)
        x = rng.normal(input_std, (K, V, probe_cfg.channels[0]))
        base = x.std()
        with np.errstate(over="ignore", invalid="ignore"):
            for l in range(probe_cfg.depth):
                if probe_cfg.separable:
                    y = layer_forward(x, model.layer(params, l), probe_cfg.leaky_slope)
                else:
                    y = nonseparable_layer_forward(
                        x, params[f"layer{l}.A_st"], params[f"layer{l}.W"], model.layer_activation(l)
                    )
                if probe_cfg.layer_skip and probe_cfg.channels[l] == probe_cfg.channels[l + 1]:
                    y = y + x
                x = y
                ratios[trial, l + 1] = x.std() / base
    return ProbeResult(ratios.mean(axis=0).tolist(), ratios.std(axis=0).tolist(), ratios)


# -- seed stability ----------------------------------------------------------


@dataclass
class StudyRun:
    scheme: str
    seed: int
    mpjpe: dict[int, float]  # horizon_ms -> mm; NaN when diverged
    diverged: bool = False
    message: str = ""


@dataclass
class StudyResult:
    runs: list[StudyRun]
    horizons_ms: list[int]

    def summary(self) -> dict[str, dict[int, tuple[float, float]]]:
        """``scheme -> horizon -> (mean, std)`` over the non-diverged runs."""
        out: dict[str, dict[int, tuple[float, float]]] = {}
        for run in self.runs:
            out.setdefault(run.scheme, {})
        for scheme in out:
            good = [r for r in self.runs if r.scheme == scheme and not r.diverged]
            for h in self.horizons_ms:
                vals = np.array([r.mpjpe[h] for r in good])
                out[scheme][h] = (float(vals.mean()), float(vals.std())) if len(vals) else (math.nan, math.nan)
        return out


def seed_stability_study(
    cfg: ModelConfig,
    schemes: list[str],
    seeds: list[int],
    train_cfg,
    train_windows,
    test_windows,
    horizons_ms=(200, 400, 600, 1000),
    skeleton=None,
    fps: float = 25.0,
) -> StudyResult:
    """Train the model once per (scheme, seed) and evaluate each run.

    Divergent runs are recorded with NaN errors instead of aborting.
    """
    from twobody.training import evaluate, train

    if len(seeds) < 3:
        raise ArgumentError("a stability study needs at least 3 seeds")
    model = Model(cfg, skeleton)
    runs = []
    for text in schemes:
        for seed in seeds:
            spec = InitSpec.parse(text, cfg.activation, seed)
            params = init_params(model, spec, Rng(seed, stream=0))
            try:
                result = train(model, params, train_windows, train_cfg.replace(seed=seed))
                report = evaluate(model, result.params, test_windows, horizons_ms, fps)
                runs.append(StudyRun(spec.label, seed, dict(report.overall)))
                if not all(np.isfinite(v) for v in report.overall.values()):
                    runs[-1].diverged = True
            except DivergenceError as exc:
                runs.append(StudyRun(spec.label, seed, {h: math.nan for h in horizons_ms}, True, str(exc)))
    return StudyResult(runs, list(horizons_ms))
