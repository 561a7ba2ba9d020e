import numpy as np
import pytest

from twobody.checkpoint import load_checkpoint, save_checkpoint
from twobody.errors import CheckpointError
from twobody.initialization import init_params
from twobody.model import Model, ModelConfig, load_skeleton


def test_roundtrip(tmp_path):
    model = Model(ModelConfig(T_obs=8, N_fut=4, J=3, channels=(3, 8, 3), decoder="tcn"), load_skeleton("toy3"))
    params = init_params(model)
    save_checkpoint(tmp_path / "c.npz", model, params)
    again, loaded = load_checkpoint(tmp_path / "c.npz")
    assert again.cfg == model.cfg and again.skeleton == model.skeleton
    assert all(np.array_equal(loaded[k], params[k]) for k in params)


def test_bad_files(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.npz")
    (tmp_path / "junk.npz").write_text("not an archive")
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "junk.npz")
    np.savez(tmp_path / "other.npz", __format__=np.array("something-else/1"))
    with pytest.raises(CheckpointError, match="format tag"):
        load_checkpoint(tmp_path / "other.npz")
