"""Run configuration files (JSON) shared by every CLI command.

Unknown keys anywhere are errors. Relative paths are resolved against the
directory of the config file. Names without a path separator or suffix
refer to files shipped in ``twobody.resources``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from twobody.errors import ConfigError
from twobody.model import ModelConfig, load_skeleton
from twobody.resources import shipped
from twobody.training import DEFAULT_HORIZONS_MS, TrainConfig

CONFIG_VERSION = 1
TOP_KEYS = {"version", "seed", "out", "model", "train", "data", "eval", "ablation", "init_study"}
DATA_KEYS = {"sequences", "synthetic", "skeleton", "split", "normalization", "stride", "fps"}
SYNTH_KEYS = {"sequences", "frames", "seed", "style"}
EVAL_KEYS = {"horizons_ms", "on"}
ABLATION_KEYS = {"rows", "init_off", "hierarchy_size"}
ROW_KEYS = {"label", "freq", "learn", "sep", "init", "att", "hier", "fc"}
FLAGS = ("freq", "learn", "sep", "init", "att", "hier", "fc")
STUDY_KEYS = {"schemes", "seeds", "probe_trials", "probe_input_std"}


def _check_keys(doc, allowed, where):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {unknown}")


def _resolve(base: Path, value: str) -> str:
    """Shipped names stay names; everything else becomes an absolute path."""
    if "/" not in value and "." not in value and shipped(value) is not None:
        return value
    p = Path(value)
    if not p.is_absolute():
        p = base / p
    if not p.exists():
        raise ConfigError(f"referenced file not found: {p}")
    return str(p.resolve())


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig
    data: dict
    eval_horizons: list[int]
    eval_on: str = "test"
    out: str = "runs/out"
    seed: int = 0
    ablation: dict = field(default_factory=dict)
    init_study: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "out": self.out,
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": self.data,
            "eval": {"horizons_ms": list(self.eval_horizons), "on": self.eval_on},
        }
        if self.ablation:
            doc["ablation"] = self.ablation
        if self.init_study:
            doc["init_study"] = self.init_study
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _data_section(doc: dict, base: Path) -> dict:
    _check_keys(doc, DATA_KEYS, "data")
    has_file, has_synth = "sequences" in doc, "synthetic" in doc
    if has_file == has_synth:
        raise ConfigError("data needs exactly one of 'sequences' (CSV) or 'synthetic'")
    out = {
        "skeleton": doc.get("skeleton", "body9"),
        "split": doc.get("split", "synth_couples"),
        "normalization": doc.get("normalization", "center_last"),
        "stride": int(doc.get("stride", 1)),
        "fps": float(doc.get("fps", 25.0)),
    }
    if out["stride"] < 1 or out["fps"] <= 0:
        raise ConfigError("data.stride must be >= 1 and data.fps > 0")
    out["skeleton"] = _resolve(base, out["skeleton"])
    if isinstance(out["split"], str):
        out["split"] = _resolve(base, out["split"])
    elif not isinstance(out["split"], dict):
        raise ConfigError("data.split must be a name, a path or an object")
    if has_file:
        out["sequences"] = _resolve(base, str(doc["sequences"]))
    else:
        synth = doc["synthetic"]
        _check_keys(synth, SYNTH_KEYS, "data.synthetic")
        style = synth.get("style", "synth_style")
        if isinstance(style, str):
            style = _resolve(base, style)
        out["synthetic"] = {
            "sequences": int(synth.get("sequences", 8)),
            "frames": int(synth.get("frames", 100)),
            "seed": int(synth.get("seed", 0)),
            "style": style,
        }
    return out


def parse_config(doc: dict, base: Path | None = None) -> RunConfig:
    base = Path.cwd() if base is None else base
    _check_keys(doc, TOP_KEYS, "config")
    if doc.get("version") != CONFIG_VERSION:
        raise ConfigError(f"config version must be {CONFIG_VERSION}, got {doc.get('version')!r}")
    if "data" not in doc:
        raise ConfigError("config needs a 'data' section")
    seed = int(doc.get("seed", 0))
    data = _data_section(doc["data"], base)
    model_doc = dict(doc.get("model", {}))
    if not isinstance(model_doc, dict):
        raise ConfigError("model must be an object")
    skeleton = load_skeleton(data["skeleton"])
    model_doc.setdefault("J", skeleton.J)
    model = ModelConfig.from_dict(model_doc)
    if model.J != skeleton.J:
        raise ConfigError(f"model.J={model.J} but skeleton {data['skeleton']} has {skeleton.J} joints")
    train_doc = dict(doc.get("train", {}))
    train_doc.setdefault("seed", seed)
    try:
        train = TrainConfig.from_dict(train_doc)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    ev = doc.get("eval", {})
    _check_keys(ev, EVAL_KEYS, "eval")
    horizons = [int(h) for h in ev.get("horizons_ms", DEFAULT_HORIZONS_MS)]
    on = ev.get("on", "test")
    if on not in ("train", "test"):
        raise ConfigError("eval.on must be 'train' or 'test'")
    ablation = doc.get("ablation", {})
    if ablation:
        _check_keys(ablation, ABLATION_KEYS, "ablation")
        rows = ablation.get("rows")
        if not isinstance(rows, list) or not rows:
            raise ConfigError("ablation.rows must be a nonempty list")
        for i, row in enumerate(rows):
            _check_keys(row, ROW_KEYS, f"ablation.rows[{i}]")
        ablation = {
            "rows": [{"label": str(r.get("label", f"row{i + 1}")), **{f: bool(r.get(f, False)) for f in FLAGS}} for i, r in enumerate(rows)],
            "init_off": str(ablation.get("init_off", "glorot")),
            "hierarchy_size": ablation.get("hierarchy_size"),
        }
    study = doc.get("init_study", {})
    if study:
        _check_keys(study, STUDY_KEYS, "init_study")
        study = {
            "schemes": [str(s) for s in study.get("schemes", ["naive_uniform:0.1", "glorot", "he", "paper"])],
            "seeds": [int(s) for s in study.get("seeds", [0, 1, 2, 3, 4])],
            "probe_trials": int(study.get("probe_trials", 100)),
            "probe_input_std": float(study.get("probe_input_std", 1.0)),
        }
    out = str(doc.get("out", "runs/out"))
    return RunConfig(model, train, data, horizons, on, out, seed, ablation, study)


def load_config(path_or_name: str | Path) -> RunConfig:
    name = str(path_or_name)
    path = Path(name)
    if not path.exists():
        found = shipped(name) if "/" not in name else None
        if found is None:
            raise ConfigError(f"config file not found: {path}")
        path = found
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return parse_config(doc, path.parent.resolve())


@dataclass
class Prepared:
    """Everything a command needs from the ``data`` section."""

    skeleton: object
    sequences: list
    train: object  # WindowSet
    test: object  # WindowSet


def load_style(spec) -> "SynthStyle":
    from twobody.data import SynthStyle

    if isinstance(spec, dict):
        return SynthStyle.from_dict(spec)
    path = Path(spec) if Path(spec).exists() else shipped(str(spec))
    if path is None:
        raise ConfigError(f"synthetic style not found: {spec}")
    return SynthStyle.from_dict(json.loads(path.read_text()))


def prepare_data(cfg: RunConfig) -> Prepared:
    """Load or generate sequences, split them and cut normalized windows."""
    from twobody.data import SplitConfig, load_sequences, split, synth_generate, window
    from twobody.numerics import Rng

    d = cfg.data
    skeleton = load_skeleton(d["skeleton"], cfg.model.bodies)
    if "sequences" in d:
        path = Path(d["sequences"]) if Path(d["sequences"]).exists() else shipped(d["sequences"])
        seqs = load_sequences(path, skeleton)
    else:
        s = d["synthetic"]
        seqs = synth_generate(Rng(s["seed"]), s["sequences"], s["frames"], skeleton, load_style(s["style"]))
    protocol = SplitConfig.from_dict(d["split"]) if isinstance(d["split"], dict) else SplitConfig.load(d["split"])
    train_seqs, test_seqs = split(seqs, protocol)
    m = cfg.model
    args = (m.T_obs, m.N_fut, d["stride"], d["normalization"], skeleton)
    return Prepared(skeleton, seqs, window(train_seqs, *args), window(test_seqs, *args))
