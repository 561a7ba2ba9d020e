"""Forecasting architecture and its ablation variants."""

from twobody.model.config import DEFAULT_CHANNELS, ModelConfig, ParamSpec
from twobody.model.layers import (
    AttentionParams,
    HierarchyParams,
    LayerParams,
    attention_weights,
    conv_time,
    cross_attention,
    fc_decode,
    hierarchy_apply,
    layer_forward,
    nonseparable_layer_forward,
    tcn_decode,
)
from twobody.model.network import Model, encoder_forward, model_forward, param_count
from twobody.model.skeleton import (
    SkeletonSpec,
    chain_skeleton,
    default_skeleton,
    kinematic_mask,
    load_skeleton,
    rest_pose,
)

__all__ = [
    "DEFAULT_CHANNELS",
    "AttentionParams",
    "HierarchyParams",
    "LayerParams",
    "Model",
    "ModelConfig",
    "ParamSpec",
    "SkeletonSpec",
    "attention_weights",
    "chain_skeleton",
    "conv_time",
    "cross_attention",
    "default_skeleton",
    "encoder_forward",
    "fc_decode",
    "hierarchy_apply",
    "kinematic_mask",
    "layer_forward",
    "load_skeleton",
    "model_forward",
    "nonseparable_layer_forward",
    "param_count",
    "rest_pose",
    "tcn_decode",
]
