import numpy as np
import pytest

from twobody.errors import ConfigError, DimensionError
from twobody.frequency import dct_basis
from twobody.initialization import InitSpec, init_params
from twobody.model import (
    Model,
    ModelConfig,
    chain_skeleton,
    kinematic_mask,
    load_skeleton,
    param_count,
    rest_pose,
)
from twobody.numerics import Rng

MICRO = dict(T_obs=8, N_fut=4, J=3, bodies=2, channels=(3, 8, 8, 3))


def test_mask_examples():
    assert np.array_equal(kinematic_mask(chain_skeleton(2, bodies=1)), np.ones((2, 2)))
    m = kinematic_mask(chain_skeleton(2, bodies=2))
    assert np.array_equal(m[:2, :2], np.ones((2, 2))) and np.array_equal(m[2:, 2:], np.ones((2, 2)))
    assert not m[:2, 2:].any() and not m[2:, :2].any()


def test_shipped_skeleton_mask():
    spec = load_skeleton("expi18")
    m = kinematic_mask(spec)
    assert m.shape == (36, 36) and np.array_equal(m, m.T)
    # self loop plus one entry per incident edge
    degree = np.zeros(18)
    for u, v in spec.tree_edges:
        degree[u] += 1
        degree[v] += 1
    assert np.array_equal(m.sum(axis=1), np.tile(degree + 1, 2))


def test_skeleton_validation():
    with pytest.raises(ConfigError):
        load_skeleton("/nonexistent/skeleton.json")
    from twobody.model import SkeletonSpec

    with pytest.raises(ConfigError):
        SkeletonSpec(("a", "b", "c"), ((0, 1), (1, 0)), 0)
    with pytest.raises(ConfigError):
        SkeletonSpec(("a", "b"), ((0, 1),), 5)


def test_rest_pose_distinct_joints():
    pose = rest_pose(load_skeleton("expi18"))
    dists = np.linalg.norm(pose[:, None] - pose[None], axis=-1)
    assert dists[~np.eye(18, dtype=bool)].min() > 1.0


def test_param_count_hand_example():
    cfg = ModelConfig(T_obs=4, N_fut=2, J=3, bodies=2, channels=(3, 3))
    assert param_count(cfg) == 71


def test_param_count_attention_and_depth():
    base = ModelConfig(**MICRO)
    C = base.channels[base.attention_after]
    assert param_count(base.replace(attention=True)) - param_count(base) == 2 * C * C + 2 * C
    counts = [param_count(ModelConfig(**{**MICRO, "channels": (3,) + (8,) * d + (3,)})) for d in range(1, 5)]
    assert all(a < b for a, b in zip(counts, counts[1:]))


def test_param_count_kinematic_difference():
    cfg = ModelConfig(**MICRO)
    tree = cfg.replace(connectivity="kinematic_tree")
    mask = kinematic_mask(Model(tree).skeleton)
    hidden = int(mask.size - mask.sum())
    assert param_count(cfg) - param_count(tree) == cfg.depth * hidden


def test_config_invariants():
    with pytest.raises(ConfigError):
        ModelConfig(channels=(4, 3))
    with pytest.raises(ConfigError):
        ModelConfig(connectivity="kinematic_tree", separable=False)
    with pytest.raises(ConfigError):
        ModelConfig(retain=60)
    with pytest.raises(ConfigError):
        ModelConfig(decoder="tcn", tcn_kernel=2)
    with pytest.raises(ConfigError):
        ModelConfig(attention=True, bodies=1)
    with pytest.raises(ConfigError):
        ModelConfig.from_dict({"bogus": 1})


def _micro_params(cfg, seed=0):
    model = Model(cfg)
    return model, init_params(model, InitSpec.for_model(cfg, seed), Rng(seed))


def test_single_identity_layer_passes_input():
    cfg = ModelConfig(T_obs=4, N_fut=4, J=3, channels=(3, 3), activation="linear", output_activation=True, layer_skip=False)
    model = Model(cfg)
    params = {"layer0.A_s": np.eye(6), "layer0.A_t": np.eye(4), "layer0.W": np.eye(3)}
    x = np.random.default_rng(0).normal(size=(4, 6, 3))
    assert np.array_equal(model.encode(params, x), x)


def test_default_shapes():
    cfg = ModelConfig(channels=(3, 64, 64, 3))
    model, params = _micro_params(cfg)
    x = np.random.default_rng(0).normal(size=(50, 36, 3))
    assert model.encode(params, x).shape == (50, 36, 3)
    assert model.forward(params, x).shape == (25, 36, 3)


def _time_mix(M, x):
    T, V, C = x.shape
    return np.matmul(M, x.reshape(T, V * C)).reshape(M.shape[0], V, C)


def test_micro_model_against_staged_composition():
    cfg = ModelConfig(**MICRO)
    model, p = _micro_params(cfg, seed=3)
    x = np.random.default_rng(1).normal(size=(8, 6, 3))
    h = _time_mix(dct_basis(8).matrix, x)
    h0 = h
    for l, act in enumerate(["relu", "relu", "linear"]):
        z = np.matmul(np.matmul(p[f"layer{l}.A_s"], _time_mix(p[f"layer{l}.A_t"], h)), p[f"layer{l}.W"])
        z = np.maximum(z, 0.0) if act == "relu" else z
        if cfg.channels[l] == cfg.channels[l + 1]:
            z = z + h
        h = z
    h = h + h0
    coef = _time_mix(p["dec.D"].T, h) + p["dec.b"].reshape(4, 1, 1)
    want = _time_mix(dct_basis(4).matrix.T, coef) + x[-1:]
    assert np.array_equal(model.forward(p, x), want)
    # a differently ordered contraction agrees to rounding
    alt = np.einsum("nt,nvc->tvc", dct_basis(4).matrix, coef) + x[-1]
    assert np.abs(alt - want).max() < 1e-12


def test_static_input_with_zero_decoder_returns_last_pose():
    cfg = ModelConfig(**MICRO)
    model, p = _micro_params(cfg)
    p["dec.D"][:] = 0.0
    pose = np.random.default_rng(2).normal(size=(6, 3))
    out = model.forward(p, np.broadcast_to(pose, (8, 6, 3)))
    assert np.allclose(out, np.broadcast_to(pose, (4, 6, 3)), atol=1e-12)


def test_batched_forward_matches_single(rng):
    cfg = ModelConfig(**MICRO)
    model, p = _micro_params(cfg)
    xs = rng.normal(size=(3, 8, 6, 3))
    batched = model.forward(p, xs)
    for i in range(3):
        assert np.abs(batched[i] - model.forward(p, xs[i])).max() < 1e-12


def test_forward_deterministic_and_shape_checked(rng):
    cfg = ModelConfig(**MICRO)
    model, p = _micro_params(cfg)
    _, p2 = _micro_params(cfg)
    x = rng.normal(size=(8, 6, 3))
    assert np.array_equal(model.forward(p, x), model.forward(p2, x))
    with pytest.raises(DimensionError):
        model.forward(p, rng.normal(size=(7, 6, 3)))
    del p["dec.b"]
    with pytest.raises(ConfigError):
        model.check_params(p)


@pytest.mark.parametrize(
    "changes",
    [
        {"decoder": "tcn"},
        {"attention": True},
        {"hierarchy": 4},
        {"separable": False},
        {"connectivity": "kinematic_tree"},
        {"adjacency_sharing": "per_frame"},
        {"frequency": False},
        {"retain": 5},
    ],
)
def test_variants_run(changes, rng):
    cfg = ModelConfig(**MICRO).replace(**changes)
    model, p = _micro_params(cfg)
    out = model.forward(p, rng.normal(size=(2, 8, 6, 3)))
    assert out.shape == (2, 4, 6, 3) and np.isfinite(out).all()


def test_tree_projection_zeroes_hidden_entries():
    cfg = ModelConfig(**MICRO, connectivity="kinematic_tree")
    model, p = _micro_params(cfg)
    hidden = model.mask == 0
    assert not p["layer0.A_s"][hidden].any()
    p["layer0.A_s"][:] = 1.0
    model.project(p)
    assert np.array_equal(p["layer0.A_s"], model.mask)
