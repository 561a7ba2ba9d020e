"""``twobody`` command line.

Exit codes: 0 success, 1 DCT self-check breach, 2 config or argument error,
3 data error, 4 training divergence, 5 checkpoint mismatch.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_DCT, EXIT_CONFIG, EXIT_DATA, EXIT_DIVERGED, EXIT_CHECKPOINT = 0, 1, 2, 3, 4, 5
THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="\n") as fh:
        fh.write(text)


def _gnuplot(path: Path, csv_name: str, title: str, columns: list[tuple[int, int, str]]) -> None:
    plots = ", ".join(f"'{csv_name}' using {x}:{y} with lines title '{t}'" for x, y, t in columns)
    _write(path, f"set datafile separator ','\nset key autotitle columnhead\nset title '{title}'\nplot {plots}\n")


def _load(args):
    from twobody.config import load_config

    if not args.config:
        from twobody.errors import ConfigError

        raise ConfigError("--config is required for this command")
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.train = cfg.train.replace(seed=args.seed)
    if args.out is not None:
        cfg.out = args.out
    return cfg


def _split_scheme(text: str) -> dict:
    name, _, bound = text.partition(":")
    return {"init_scheme": name, "init_bound": float(bound) if bound else 1.0}


# -- commands ----------------------------------------------------------------


def cmd_train(args) -> int:
    from twobody.checkpoint import save_checkpoint
    from twobody.config import prepare_data
    from twobody.errors import IngestionError
    from twobody.initialization import InitSpec, init_params
    from twobody.model import Model
    from twobody.numerics import Rng
    from twobody.training import dataset_loss, evaluate, train

    cfg = _load(args)
    data = prepare_data(cfg)
    if len(data.train) == 0:
        raise IngestionError("the split leaves no training windows")
    out = Path(cfg.out)
    _write(out / "resolved_config.json", cfg.dumps())
    model = Model(cfg.model, data.skeleton)
    params = init_params(model, InitSpec.for_model(cfg.model, cfg.seed), Rng(cfg.seed, stream=0))
    before = dataset_loss(model, params, data.train)
    result = train(model, params, data.train, cfg.train)
    after = dataset_loss(model, result.params, data.train)
    save_checkpoint(out / "checkpoint.npz", model, result.params)
    curve = ["step,lr,loss"] + [f"{i},{lr!r},{loss!r}" for i, (lr, loss) in enumerate(zip(result.lrs, result.losses))]
    _write(out / "loss_curve.csv", "\n".join(curve) + "\n")
    if args.emit_gnuplot:
        _gnuplot(out / "loss_curve.gp", "loss_curve.csv", "training loss (mm)", [(1, 3, "loss")])
    print(f"params {model.param_count()}  train windows {len(data.train)}  test windows {len(data.test)}")
    print(f"train-set loss: {before:.3f} mm before, {after:.3f} mm after ({100.0 * after / before:.2f}%)")
    windows = data.test if cfg.eval_on == "test" else data.train
    if len(windows):
        report = evaluate(model, result.params, windows, cfg.eval_horizons, cfg.data["fps"])
        _write(out / "eval.csv", report.to_csv())
        print(report.table())
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from twobody.checkpoint import load_checkpoint
    from twobody.config import prepare_data
    from twobody.errors import CheckpointError, IngestionError
    from twobody.training import evaluate

    if not args.checkpoint:
        from twobody.errors import ConfigError

        raise ConfigError("eval needs --checkpoint")
    model, params = load_checkpoint(args.checkpoint)
    cfg = _load(args)
    m = model.cfg
    if (m.J, m.bodies, m.T_obs, m.N_fut) != (cfg.model.J, cfg.model.bodies, cfg.model.T_obs, cfg.model.N_fut):
        raise CheckpointError(
            f"checkpoint model (J={m.J}, bodies={m.bodies}, T_obs={m.T_obs}, N={m.N_fut}) does not match the data config "
            f"(J={cfg.model.J}, bodies={cfg.model.bodies}, T_obs={cfg.model.T_obs}, N={cfg.model.N_fut})"
        )
    cfg.model = m
    horizons = cfg.eval_horizons if not args.horizons else [int(h) for h in args.horizons.split(",")]
    data = prepare_data(cfg)
    windows = data.test if cfg.eval_on == "test" else data.train
    if len(windows) == 0:
        raise IngestionError(f"no {cfg.eval_on} windows to evaluate")
    report = evaluate(model, params, windows, horizons, cfg.data["fps"])
    out = Path(cfg.out)
    _write(out / "eval.csv", report.to_csv())
    if args.emit_gnuplot:
        _gnuplot(out / "eval.gp", "eval.csv", "MPJPE (mm)", [(2, 4, "mpjpe")])
    print(report.table())
    return EXIT_OK


def ablation_model(base, row: dict, init_off: str, hierarchy_size):
    """Model config for one flag row of the ablation matrix."""
    changes = {
        "frequency": row["freq"],
        "connectivity": "learnable" if row["learn"] else "kinematic_tree",
        "separable": row["sep"],
        "attention": row["att"],
        "hierarchy": (hierarchy_size or base.nodes // 2) if row["hier"] else None,
        "decoder": "fc" if row["fc"] else "tcn",
        "retain": None,
    }
    changes.update(_split_scheme("paper" if row["init"] else init_off))
    return base.replace(**changes)


def cmd_ablate(args) -> int:
    from twobody.config import FLAGS, prepare_data
    from twobody.errors import ConfigError, DivergenceError, TwoBodyError
    from twobody.initialization import InitSpec, init_params
    from twobody.model import Model
    from twobody.numerics import Rng
    from twobody.training import evaluate, train

    cfg = _load(args)
    if not cfg.ablation:
        raise ConfigError("config has no 'ablation' section")
    data = prepare_data(cfg)
    windows = data.test if cfg.eval_on == "test" else data.train
    hs = cfg.eval_horizons
    lines = ["row,label," + ",".join(FLAGS) + ",param_count,status," + ",".join(f"mpjpe_{h}" for h in hs)]
    for i, row in enumerate(cfg.ablation["rows"], start=1):
        flags = ",".join(str(int(row[f])) for f in FLAGS)
        count, status, values = "", "ok", ["" for _ in hs]
        try:
            mcfg = ablation_model(cfg.model, row, cfg.ablation["init_off"], cfg.ablation["hierarchy_size"])
            model = Model(mcfg, data.skeleton)
            count = str(model.param_count())
            params = init_params(model, InitSpec.for_model(mcfg, cfg.seed), Rng(cfg.seed, stream=0))
            result = train(model, params, data.train, cfg.train)
            report = evaluate(model, result.params, windows, hs, cfg.data["fps"])
            values = [f"{report.overall[h]:.6f}" for h in hs]
        except DivergenceError as exc:
            status = f"diverged at step {exc.step}"
        except TwoBodyError as exc:
            status = "error: " + str(exc).replace(",", ";")
        lines.append(f"{i},{row['label']},{flags},{count},{status}," + ",".join(values))
        print(lines[-1], flush=True)
    out = Path(cfg.out)
    _write(out / "ablation.csv", "\n".join(lines) + "\n")
    if args.emit_gnuplot:
        _gnuplot(out / "ablation.gp", "ablation.csv", "MPJPE per row (mm)", [(1, 12 + j, f"{h} ms") for j, h in enumerate(hs)])
    print(f"wrote {out / 'ablation.csv'}")
    return EXIT_OK


def cmd_init_study(args) -> int:
    from twobody.config import prepare_data
    from twobody.errors import ConfigError
    from twobody.initialization import InitSpec, seed_stability_study, variance_probe

    cfg = _load(args)
    if not cfg.init_study:
        raise ConfigError("config has no 'init_study' section")
    st = cfg.init_study
    data = prepare_data(cfg)
    windows = data.test if cfg.eval_on == "test" else data.train
    result = seed_stability_study(
        cfg.model, st["schemes"], st["seeds"], cfg.train, data.train, windows, cfg.eval_horizons, data.skeleton, cfg.data["fps"]
    )
    runs = ["scheme,seed,horizon_ms,mpjpe_mm,diverged"]
    for r in result.runs:
        runs += [f"{r.scheme},{r.seed},{h},{r.mpjpe[h]:.6f},{int(r.diverged)}" for h in result.horizons_ms]
    summary = ["scheme,horizon_ms,mean_mm,std_mm,runs,diverged"]
    for scheme, per_h in result.summary().items():
        mine = [r for r in result.runs if r.scheme == scheme]
        bad = sum(r.diverged for r in mine)
        summary += [f"{scheme},{h},{m:.6f},{s:.6f},{len(mine) - bad},{bad}" for h, (m, s) in per_h.items()]
    probe = ["scheme,layer,ratio_mean,ratio_std"]
    for text in st["schemes"]:
        spec = InitSpec.parse(text, cfg.model.activation, cfg.seed)
        res = variance_probe(cfg.model, spec, st["probe_trials"], st["probe_input_std"], cfg.seed)
        probe += [f"{spec.label},{layer},{m:.6g},{s:.6g}" for layer, (m, s) in enumerate(zip(res.mean, res.std))]
    out = Path(cfg.out)
    _write(out / "init_runs.csv", "\n".join(runs) + "\n")
    _write(out / "init_summary.csv", "\n".join(summary) + "\n")
    _write(out / "init_probe.csv", "\n".join(probe) + "\n")
    if args.emit_gnuplot:
        _gnuplot(out / "init_probe.gp", "init_probe.csv", "std ratio per layer", [(2, 3, "ratio")])
    print("\n".join(summary))
    print(f"wrote {out}")
    return EXIT_OK


def dct_residuals(max_t: int, signals: int = 100, seed: int = 0) -> list[tuple[int, float, float]]:
    """``(T, orthonormality residual, round-trip residual)`` for T = 1..max_t."""
    import numpy as np

    from twobody.frequency import dct_apply, dct_basis, idct_apply
    from twobody.numerics import Rng

    rng = Rng(seed, stream=7)
    rows = []
    for T in range(1, max_t + 1):
        B = dct_basis(T)
        ortho = float(np.abs(B.matrix @ B.matrix.T - np.eye(T)).max())
        x = rng.normal(1.0, (T, signals))
        trip = float(np.abs(idct_apply(dct_apply(x, B), T) - x).max())
        rows.append((T, ortho, trip))
    return rows


def cmd_dct_check(args) -> int:
    from twobody.errors import ArgumentError

    if args.max_t < 1:
        raise ArgumentError("--max-t must be >= 1")
    rows = dct_residuals(args.max_t)
    worst = max(max(o, t) for _, o, t in rows)
    bad = [T for T, o, t in rows if max(o, t) >= 1e-10]
    print(f"T=1..{args.max_t}: max residual {worst:.3e}")
    if bad:
        print(f"residual >= 1e-10 for T = {bad}", file=sys.stderr)
        return EXIT_DCT
    return EXIT_OK


def cmd_synth(args) -> int:
    import json

    from twobody.config import load_style
    from twobody.data import save_sequences, synth_generate
    from twobody.errors import ArgumentError
    from twobody.model import default_skeleton
    from twobody.numerics import Rng

    if args.sequences < 1 or args.frames < 2 or args.joints < 1:
        raise ArgumentError("--sequences >= 1, --frames >= 2 and --joints >= 1 are required")
    skeleton = default_skeleton(args.joints)
    style = load_style(args.style)
    seqs = synth_generate(Rng(args.seed or 0), args.sequences, args.frames, skeleton, style)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    save_sequences(out / "sequences.csv", seqs, skeleton)
    _write(out / "skeleton.json", json.dumps(skeleton.to_dict(), indent=2) + "\n")
    print(f"wrote {len(seqs)} sequences x {args.frames} frames ({skeleton.J} joints, {skeleton.bodies} bodies) to {out}")
    return EXIT_OK


COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "init-study": cmd_init_study,
    "dct-check": cmd_dct_check,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run config JSON (path or shipped name)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=int, help="seed (overrides the config)")
    common.add_argument("--threads", type=int, help="BLAS threads")
    common.add_argument("--emit-gnuplot", action="store_true", help="write a gnuplot script next to each CSV")
    parser = argparse.ArgumentParser(prog="twobody", description="Two-body pose forecasting toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("train", parents=[common], help="train and evaluate one model")
    p = sub.add_parser("eval", parents=[common], help="evaluate a checkpoint")
    p.add_argument("--checkpoint", help="checkpoint .npz written by train")
    p.add_argument("--horizons", help="comma-separated horizons in ms (default from config)")
    sub.add_parser("ablate", parents=[common], help="train every row of an ablation matrix")
    sub.add_parser("init-study", parents=[common], help="initialization seed study and variance probe")
    p = sub.add_parser("dct-check", parents=[common], help="DCT orthonormality and round-trip self-check")
    p.add_argument("--max-t", type=int, default=128)
    p = sub.add_parser("synth", parents=[common], help="write a synthetic sequence CSV")
    p.add_argument("--sequences", type=int, default=8)
    p.add_argument("--frames", type=int, default=100)
    p.add_argument("--joints", type=int, default=9)
    p.add_argument("--style", default="synth_style", help="style JSON (path or shipped name)")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be >= 1", file=sys.stderr)
            return EXIT_CONFIG
        for var in THREAD_VARS:
            os.environ[var] = str(args.threads)
    from twobody.errors import (
        ArgumentError,
        CheckpointError,
        ConfigError,
        DimensionError,
        DivergenceError,
        IngestionError,
        TwoBodyError,
    )

    codes = [
        (CheckpointError, EXIT_CHECKPOINT),
        (DivergenceError, EXIT_DIVERGED),
        (IngestionError, EXIT_DATA),
        ((ConfigError, ArgumentError, DimensionError), EXIT_CONFIG),
    ]
    try:
        return COMMANDS[args.command](args)
    except TwoBodyError as exc:
        for kind, code in codes:
            if isinstance(exc, kind):
                print(f"error: {exc}", file=sys.stderr)
                return code
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
