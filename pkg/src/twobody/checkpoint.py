"""Checkpoint files: every parameter tensor plus the model config and skeleton.

Stored as an uncompressed ``.npz`` archive with a ``__format__`` tag.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from twobody.errors import CheckpointError
from twobody.model import Model, ModelConfig
from twobody.model.skeleton import skeleton_from_dict

FORMAT_TAG = "twobody-checkpoint/1"


def save_checkpoint(path: str | Path, model: Model, params: dict) -> None:
    model.check_params(params)
    meta = {
        "model": model.cfg.to_dict(),
        "skeleton": model.skeleton.to_dict(),
        "bodies": model.skeleton.bodies,
    }
    arrays = {f"param/{k}": np.asarray(v) for k, v in params.items()}
    with Path(path).open("wb") as fh:
        np.savez(fh, __format__=np.array(FORMAT_TAG), __meta__=np.array(json.dumps(meta, sort_keys=True)), **arrays)


def load_checkpoint(path: str | Path) -> tuple[Model, dict]:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as z:
            tag = str(z["__format__"]) if "__format__" in z.files else None
            if tag != FORMAT_TAG:
                raise CheckpointError(f"{path}: format tag {tag!r}, expected {FORMAT_TAG!r}")
            meta = json.loads(str(z["__meta__"]))
            params = {k[len("param/"):]: z[k].astype(np.float64) for k in z.files if k.startswith("param/")}
    except (OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc})") from exc
    model = Model(ModelConfig.from_dict(meta["model"]), skeleton_from_dict(meta["skeleton"], meta["bodies"]))
    try:
        model.check_params(params)
    except Exception as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
    return model, params
