import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from twobody.data import WindowSet, synth_generate, window
from twobody.errors import ArgumentError, DimensionError, DivergenceError
from twobody.initialization import init_params
from twobody.model import Model, ModelConfig, load_skeleton
from twobody.numerics import Rng
from twobody.training import (
    OptState,
    TrainConfig,
    adam_step,
    evaluate,
    evaluate_predictions,
    horizon_frames,
    mpjpe,
    sequence_loss,
    train,
    zero_velocity,
)


def loop_mpjpe(pred, gt):
    total = 0.0
    for v in range(len(pred)):
        total += sum((float(pred[v][c]) - float(gt[v][c])) ** 2 for c in range(3)) ** 0.5
    return total / len(pred)


def test_mpjpe_examples():
    assert mpjpe([[3.0, 4.0, 0.0], [0.0, 0.0, 0.0]], np.zeros((2, 3))) == 2.5
    x = np.random.default_rng(0).normal(size=(5, 3))
    assert mpjpe(x, x) == 0.0
    with pytest.raises(DimensionError):
        mpjpe(np.zeros((2, 3)), np.zeros((3, 3)))


@given(st.integers(1, 10), st.integers(0, 2**31 - 1))
def test_mpjpe_loop_oracle_and_invariances(V, seed):
    g = np.random.default_rng(seed)
    p, q = g.normal(size=(V, 3)) * 100, g.normal(size=(V, 3)) * 100
    assert abs(mpjpe(p, q) - loop_mpjpe(p, q)) < 1e-12
    shift = g.normal(size=3)
    assert abs(mpjpe(p + shift, q + shift) - mpjpe(p, q)) < 1e-9
    perm = g.permutation(V)
    assert abs(mpjpe(p[perm], q[perm]) - mpjpe(p, q)) < 1e-12


def test_sequence_loss_cases():
    gt = np.random.default_rng(1).normal(size=(4, 6, 3))
    assert float(sequence_loss(gt, gt)) == 0.0
    pred = gt + np.array([0.0, 0.0, 2.5])
    assert abs(float(sequence_loss(pred, gt)) - 2.5) < 1e-12
    with pytest.raises(DimensionError):
        sequence_loss(gt, gt[:3])


def test_zero_velocity_repeats_last_pose():
    x = np.random.default_rng(2).normal(size=(3, 8, 6, 3))
    zv = zero_velocity(x, 4)
    assert zv.shape == (3, 4, 6, 3)
    assert all(np.array_equal(zv[:, n], x[:, -1]) for n in range(4))


def test_adam_first_step():
    p, state = adam_step({"p": np.array(0.0)}, {"p": np.array(1.0)}, OptState(), TrainConfig(lr=0.1))
    assert abs(float(p["p"]) + 0.1) < 1e-6
    assert state.step == 1


def test_adam_zero_gradient_keeps_params():
    params = {"w": np.random.default_rng(3).normal(size=(3, 4))}
    new, _ = adam_step(params, {"w": np.zeros((3, 4))}, OptState(), TrainConfig())
    assert np.array_equal(new["w"], params["w"])


def test_adam_divergence_carries_step():
    with pytest.raises(DivergenceError) as info:
        adam_step({"w": np.zeros(2)}, {"w": np.array([1.0, np.nan])}, OptState(step=7), TrainConfig())
    assert info.value.step == 7


def test_lr_schedule():
    cfg = TrainConfig(lr=1.0, steps=100)
    assert [cfg.lr_at(s) for s in (0, 24, 25, 50, 99)] == [1.0, 1.0, 0.5, 0.25, 0.125]


def test_horizon_mapping():
    assert horizon_frames([1000], 25) == [25]
    assert horizon_frames([200, 400, 600], 25) == [5, 10, 15]
    with pytest.raises(ArgumentError):
        horizon_frames([1040], 25)
    with pytest.raises(ArgumentError):
        horizon_frames([50], 25)


def _micro(n_windows=None):
    skel = load_skeleton("toy3")
    seqs = synth_generate(Rng(0), 2, 16, skel)
    ws = window(seqs, 8, 4, 1, "center_last", skel)
    if n_windows is not None:
        ws = ws.subset(range(n_windows))
    cfg = ModelConfig(T_obs=8, N_fut=4, J=3, channels=(3, 8, 8, 3))
    model = Model(cfg, skel)
    return model, init_params(model), ws


def test_perfect_predictor_scores_zero():
    _, _, ws = _micro()
    rep = evaluate_predictions(ws.x_out.copy(), ws, [40, 80, 160])
    assert all(v == 0.0 for v in rep.overall.values())
    assert set(rep.per_action) == set(ws.actions)


def test_eval_horizon_error():
    model, params, ws = _micro()
    with pytest.raises(ArgumentError):
        evaluate(model, params, ws, [200])


def test_zero_steps_leave_params_unchanged():
    model, params, ws = _micro()
    res = train(model, params, ws, TrainConfig(steps=0))
    assert all(np.array_equal(res.params[k], params[k]) for k in params)
    assert res.losses == []


def test_training_is_deterministic():
    model, params, ws = _micro()
    cfg = TrainConfig(steps=5, batch_size=4)
    a, b = train(model, params, ws, cfg), train(model, params, ws, cfg)
    assert a.losses == b.losses
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_divergence_reports_step():
    model, params, ws = _micro()
    params = {k: v * 1e200 for k, v in params.items()}
    with pytest.raises(DivergenceError) as info:
        train(model, params, ws, TrainConfig(steps=3))
    assert info.value.step == 0


def test_overfit_four_windows():
    model, params, ws = _micro(4)
    res = train(model, params, ws, TrainConfig(steps=2000, batch_size=4))
    first = res.losses[0]
    final = float(sequence_loss(model.forward(res.params, ws.x_in), ws.x_out))
    assert final < 0.05 * first
    rep = evaluate(model, res.params, ws, [40, 80, 160])
    zv = evaluate_predictions(zero_velocity(ws.x_in, 4), ws, [40, 80, 160])
    assert all(rep.overall[h] < zv.overall[h] for h in rep.overall)


def test_empty_training_set():
    model, params, ws = _micro()
    empty = WindowSet(ws.x_in[:0], ws.x_out[:0], [], [])
    with pytest.raises(ArgumentError):
        train(model, params, empty, TrainConfig(steps=1))


def test_zero_lr_is_bitwise_noop():
    model, params, ws = _micro()
    res = train(model, params, ws, TrainConfig(lr=0.0, steps=3, batch_size=4))
    assert all(np.array_equal(res.params[k], params[k]) for k in params)
