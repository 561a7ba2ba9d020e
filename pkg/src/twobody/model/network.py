"""The full forecaster: frequency encoding, GCN encoder, decoder, inverse."""

from __future__ import annotations

import numpy as np

from twobody.errors import ConfigError, DimensionError
from twobody.frequency import dct_basis
from twobody.model.config import ModelConfig, ParamSpec
from twobody.model.layers import (
    AttentionParams,
    LayerParams,
    cross_attention,
    fc_decode,
    hierarchy_apply,
    layer_forward,
    mix_time,
    nonseparable_layer_forward,
    tcn_decode,
)
from twobody.model.skeleton import SkeletonSpec, default_skeleton, kinematic_mask
from twobody.numerics import ops


class Model:
    """Parameter layout and forward pass for one :class:`ModelConfig`.

    Parameters live in a plain ``dict[str, ndarray]`` owned by the caller;
    ``forward`` accepts either arrays (inference) or tape nodes (training).
    """

    def __init__(self, cfg: ModelConfig, skeleton: SkeletonSpec | None = None):
        self.cfg = cfg
        if skeleton is None:
            skeleton = default_skeleton(cfg.J, cfg.bodies)
        if skeleton.J != cfg.J or skeleton.bodies != cfg.bodies:
            raise ConfigError(
                f"skeleton has {skeleton.J} joints x {skeleton.bodies} bodies, config wants {cfg.J} x {cfg.bodies}"
            )
        self.skeleton = skeleton
        self.mask = kinematic_mask(skeleton) if cfg.connectivity == "kinematic_tree" else None
        self.specs = self._layout()

    # -- layout ---------------------------------------------------------
    def layer_nodes(self, layer: int) -> int:
        """Graph size seen by ``layer`` (0-based)."""
        cfg = self.cfg
        if cfg.hierarchy is not None and 0 < layer < cfg.depth - 1:
            return cfg.hierarchy
        return cfg.nodes

    def _layout(self) -> dict[str, ParamSpec]:
        cfg = self.cfg
        K = cfg.time_extent
        specs: dict[str, ParamSpec] = {}
        for l in range(cfg.depth):
            V = self.layer_nodes(l)
            c_in, c_out = cfg.channels[l], cfg.channels[l + 1]
            if cfg.separable:
                per_frame = cfg.adjacency_sharing == "per_frame"
                masked = self.mask is not None and V == cfg.nodes
                specs[f"layer{l}.A_s"] = ParamSpec((K, V, V) if per_frame else (V, V), "spatial", V, V, masked)
                specs[f"layer{l}.A_t"] = ParamSpec((V, K, K) if per_frame else (K, K), "temporal", K, K)
            else:
                specs[f"layer{l}.A_st"] = ParamSpec((K * V, K * V), "spacetime", K * V, K * V)
            specs[f"layer{l}.W"] = ParamSpec((c_in, c_out), "weight", c_in, c_out)
        if cfg.attention:
            C = cfg.channels[cfg.attention_after]
            specs["attn.W1"] = ParamSpec((C, C), "weight", C, C)
            specs["attn.W2"] = ParamSpec((C, C), "weight", C, C)
            specs["attn.W3"] = ParamSpec((C, 1), "weight", C, 1)
            specs["attn.W4"] = ParamSpec((C, 1), "weight", C, 1)
        if cfg.hierarchy is not None:
            V, P = cfg.nodes, cfg.hierarchy
            specs["hier.down"] = ParamSpec((V, P), "weight", V, P)
            specs["hier.up"] = ParamSpec((P, V), "weight", P, V)
        if cfg.decoder == "tcn":
            C, k = cfg.channels[-1], cfg.tcn_kernel
            for i in range(cfg.tcn_layers):
                specs[f"dec.conv{i}"] = ParamSpec((k, C, C), "weight", k * C, k * C)
        specs["dec.D"] = ParamSpec((K, cfg.N_fut), "weight", K, cfg.N_fut)
        specs["dec.b"] = ParamSpec((cfg.N_fut,), "bias", K, cfg.N_fut)
        return specs

    def param_count(self) -> int:
        total = 0
        for spec in self.specs.values():
            n = int(np.prod(spec.shape))
            if spec.masked:
                n = n // (self.cfg.nodes ** 2) * int(self.mask.sum())
            total += n
        return total

    def project(self, params: dict) -> dict:
        """Zero the adjacency entries outside the kinematic tree, in place."""
        if self.mask is not None:
            for name, spec in self.specs.items():
                if spec.masked:
                    params[name] *= self.mask
        return params

    def check_params(self, params: dict) -> None:
        missing = sorted(set(self.specs) - set(params))
        extra = sorted(set(params) - set(self.specs))
        if missing or extra:
            raise ConfigError(f"parameter set mismatch: missing {missing}, unexpected {extra}")
        for name, spec in self.specs.items():
            if tuple(ops.value(params[name]).shape) != spec.shape:
                raise ConfigError(f"{name}: expected shape {spec.shape}, got {ops.value(params[name]).shape}")

    # -- forward --------------------------------------------------------
    def layer_activation(self, l: int) -> str:
        cfg = self.cfg
        if l == cfg.depth - 1 and not cfg.output_activation:
            return "linear"
        return cfg.activation

    def layer(self, params, l: int) -> LayerParams:
        return LayerParams(
            params[f"layer{l}.A_s"], params[f"layer{l}.A_t"], params[f"layer{l}.W"], self.layer_activation(l)
        )

    def _attend(self, params, x):
        V = ops.value(x).shape[-2]
        half = V // 2
        sel1 = np.eye(V)[:half]
        sel2 = np.eye(V)[half:]
        p = AttentionParams(params["attn.W1"], params["attn.W2"], params["attn.W3"], params["attn.W4"])
        o1, o2 = cross_attention(ops.matmul(sel1, x), ops.matmul(sel2, x), p, self.cfg.leaky_slope)
        merged = ops.add(ops.matmul(sel1.T, o1), ops.matmul(sel2.T, o2))
        return ops.add(x, merged) if self.cfg.layer_skip else merged

    def encode(self, params, x):
        """Encoder on ``[..., K, V, 3]`` frequency (or time) inputs."""
        cfg = self.cfg
        L = cfg.depth
        x_enc = x
        if cfg.attention and cfg.attention_after == 0:
            x = self._attend(params, x)
        for l in range(L):
            if cfg.hierarchy is not None and l == L - 1:
                x = hierarchy_apply(x, params["hier.up"])
            if cfg.separable:
                y = layer_forward(x, self.layer(params, l), cfg.leaky_slope)
            else:
                y = nonseparable_layer_forward(
                    x, params[f"layer{l}.A_st"], params[f"layer{l}.W"], self.layer_activation(l), cfg.leaky_slope
                )
            if cfg.layer_skip and cfg.channels[l] == cfg.channels[l + 1]:
                y = ops.add(y, x)
            x = y
            if cfg.attention and l + 1 == cfg.attention_after:
                x = self._attend(params, x)
            if cfg.hierarchy is not None and l == 0:
                x = hierarchy_apply(x, params["hier.down"])
        if cfg.encoder_skip and L >= 2:
            x = ops.add(x, x_enc)
        return x

    def decode(self, params, h):
        cfg = self.cfg
        if cfg.decoder == "fc":
            return fc_decode(h, params["dec.D"], params["dec.b"])
        convs = [params[f"dec.conv{i}"] for i in range(cfg.tcn_layers)]
        return tcn_decode(h, convs, params["dec.D"], params["dec.b"], cfg.activation, cfg.leaky_slope)

    def to_frequency(self, x):
        if not self.cfg.frequency:
            return x
        return mix_time(dct_basis(self.cfg.T_obs).matrix[: self.cfg.time_extent], x)

    def from_frequency(self, c):
        if not self.cfg.frequency:
            return c
        return mix_time(dct_basis(self.cfg.N_fut).matrix.T, c)

    def forward(self, params, x_in):
        """Predict ``[..., N, V, 3]`` future poses from ``[..., T_obs, V, 3]``."""
        cfg = self.cfg
        xv = np.asarray(ops.value(x_in))
        if xv.shape[-3:] != (cfg.T_obs, cfg.nodes, 3):
            raise DimensionError(f"expected input [..., {cfg.T_obs}, {cfg.nodes}, 3], got {xv.shape}")
        out = self.from_frequency(self.decode(params, self.encode(params, self.to_frequency(x_in))))
        if cfg.global_residual:
            out = ops.add(out, xv[..., -1:, :, :])
        return out


def encoder_forward(x, cfg: ModelConfig, params, skeleton: SkeletonSpec | None = None):
    model = Model(cfg, skeleton)
    return model.encode(params, x)


def model_forward(x_in, cfg: ModelConfig, params, skeleton: SkeletonSpec | None = None):
    return Model(cfg, skeleton).forward(params, x_in)


def param_count(cfg: ModelConfig, skeleton: SkeletonSpec | None = None) -> int:
    return Model(cfg, skeleton).param_count()
