"""Command-line entry point: generate, train, identify, evaluate, report.

Every command writes a ``<output>.manifest.txt`` recording how the artifact
was produced. With fixed seeds, rerunning a command reproduces its result
CSVs byte-for-byte (timing columns excepted, since wall-clock is part of
the mandated CSV formats).
"""

from __future__ import annotations

import argparse
import configparser
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .datagen import (
    DatagenConfig,
    DatasetFormatError,
    GenerationQualityError,
    add_noise,
    generate_dataset,
    read_csv,
    write_csv,
)
from .evaluate import (
    SpeedAccuracyEntry,
    eval_in_simulation,
    eval_online,
    eval_transfer,
    eval_transfer_coulomb,
    format_eval_table,
    make_eval_trajectory,
    make_transfer_trace,
    pareto_front,
    speed_accuracy_report,
    steady_state_map,
    write_eval_csv,
    write_map_csv,
    write_speed_accuracy_csv,
)
from .friction import GROUND_TRUTH, PARAM_NAMES, LuGreParams
from .ident import (
    IdentObjective,
    IdentResult,
    default_start,
    genetic_algorithm,
    nelder_mead,
    nonlinear_least_squares,
    write_ident_csv,
)
from .numerics import IntegrationError
from .pinn import (
    VARIANTS,
    ModelConfig,
    TrainConfig,
    TrainingDivergedError,
    train,
)
from .pinn_io import load_trained_model, save_trained_model, write_loss_csv

# held-out noise seeds for the evaluation trajectories
EVAL_SEED_TRAJ1 = 1001
EVAL_SEED_TRAJ2 = 1002
EVAL_SEED_TRANSFER = 2000


class UsageError(ValueError):
    pass


def _write_manifest(out_path, command, options):
    path = Path(str(out_path) + ".manifest.txt")
    lines = [
        f"command = {command}",
        f"version = {__version__}",
        f"timestamp = {datetime.now(timezone.utc).isoformat()}",
    ]
    for key in sorted(options):
        lines.append(f"{key} = {options[key]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _load_config(path) -> dict:
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise UsageError(f"config file not found: {path}")
    return {section: dict(parser[section]) for section in parser.sections()}


def _apply_section(instance, section: dict):
    """Override dataclass fields from a config section (strings coerced)."""
    kwargs = {}
    field_types = {f.name: f for f in dataclasses.fields(instance)}
    for key, raw in section.items():
        if key not in field_types:
            raise UsageError(f"unknown config key {key!r} for {type(instance).__name__}")
        current = getattr(instance, key)
        if isinstance(current, bool):
            kwargs[key] = raw.lower() in ("1", "true", "yes")
        elif isinstance(current, int) and not isinstance(current, bool):
            kwargs[key] = int(raw)
        elif isinstance(current, float):
            kwargs[key] = float(raw)
        elif isinstance(current, tuple):
            kwargs[key] = tuple(float(tok) for tok in raw.split(","))
        else:
            kwargs[key] = raw
    return dataclasses.replace(instance, **kwargs)


def _datagen_config(args) -> DatagenConfig:
    cfg = DatagenConfig()
    if args.config:
        sections = _load_config(args.config)
        if "datagen" in sections:
            cfg = _apply_section(cfg, sections["datagen"])
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    if getattr(args, "noise", None) is not None:
        cfg = dataclasses.replace(cfg, noise_fraction=args.noise)
    return cfg


def cmd_generate(args):
    cfg = _datagen_config(args)
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    clean = generate_dataset(cfg)
    clean_path = out_dir / "dataset_clean.csv"
    write_csv(clean, clean_path)
    options = {f.name: getattr(cfg, f.name) for f in dataclasses.fields(cfg)
               if f.name not in ("pob", "friction")}
    _write_manifest(clean_path, "generate", options)
    print(f"wrote {clean_path} ({len(clean)} samples, {len(clean)/cfg.rate:.1f} s)")
    if cfg.noise_fraction > 0:
        noisy = add_noise(clean, cfg.noise_fraction, seed=cfg.seed, p=cfg.pob)
        noisy_path = out_dir / "dataset_noisy.csv"
        write_csv(noisy, noisy_path)
        _write_manifest(noisy_path, "generate", options)
        print(f"wrote {noisy_path} (noise {cfg.noise_fraction:.0%}, seed {cfg.seed})")
    return 0


def cmd_train(args):
    if args.variant not in VARIANTS:
        raise UsageError(f"--variant must be one of {VARIANTS}")
    dataset = read_csv(args.dataset)
    model_cfg = ModelConfig(args.variant, width=args.width)
    train_cfg = TrainConfig(seed=args.seed if args.seed is not None else 0)
    if args.config:
        sections = _load_config(args.config)
        if "train" in sections:
            train_cfg = _apply_section(train_cfg, sections["train"])
    if args.epochs is not None:
        train_cfg = dataclasses.replace(train_cfg, epochs=args.epochs)
    if args.seed is not None:
        train_cfg = dataclasses.replace(train_cfg, seed=args.seed)

    trained = train(model_cfg, train_cfg, dataset)
    out = Path(args.out or f"{args.variant}.npz")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_trained_model(trained, out)
    loss_path = out.with_name(out.stem + "_loss.csv")
    write_loss_csv(trained, loss_path)
    _write_manifest(
        out,
        "train",
        {
            "variant": args.variant,
            "dataset": args.dataset,
            "epochs": train_cfg.epochs,
            "seed": train_cfg.seed,
            "wall_clock_s": f"{trained.wall_clock_s:.1f}",
        },
    )
    final = trained.loss_history[-1] if train_cfg.epochs else None
    if final is not None:
        print(
            f"{args.variant}: final loss {final[0]:.6g} "
            f"(physics {final[1]:.6g}, zdot {final[2]:.6g}) "
            f"in {trained.wall_clock_s:.1f} s"
        )
    if trained.scalars is not None:
        print("recovered LuGre parameters:")
        for name, value in trained.recovered_params().items():
            print(f"  {name:>8} = {value:.6g}")
    print(f"wrote {out}")
    return 0


METHODS = ("nelder-mead", "ga", "nls")


def cmd_identify(args):
    methods = METHODS if args.method == "all" else (args.method,)
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"--method must be one of {METHODS + ('all',)}")
    dataset = read_csv(args.dataset)
    objective = IdentObjective.from_dataset(dataset)
    x0 = default_start()
    seed = args.seed if args.seed is not None else 0
    results = []
    for method in methods:
        if method == "nelder-mead":
            res = nelder_mead(objective, x0, max_iters=args.max_iters or 4000)
        elif method == "ga":
            res = genetic_algorithm(
                objective,
                population=args.population,
                generations=args.generations,
                seed=seed,
            )
        else:
            res = nonlinear_least_squares(objective.residuals, x0, max_iters=args.max_iters or 100)
        results.append(res)
        print(
            f"{res.method}: obj={res.objective:.6g} N^2, {res.n_evals} evals, "
            f"{res.wall_clock_s:.1f} s, converged={res.converged}"
        )
        for name, value in zip(PARAM_NAMES, res.values):
            print(f"  {name:>8} = {value:.6g}")
    out = Path(args.out or "ident.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    write_ident_csv(results, out)
    _write_manifest(out, "identify", {"dataset": args.dataset, "methods": ",".join(methods), "seed": seed})
    print(f"wrote {out}")
    return 0


def _read_ident_csv(path):
    rows = []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    header = lines[0].split(",")
    for line in lines[1:]:
        if not line:
            continue
        vals = dict(zip(header, line.split(",")))
        values = np.array([float(vals[name]) for name in PARAM_NAMES])
        rows.append((vals["method"], values, float(vals["wall_clock_s"])))
    return rows


def cmd_evaluate(args):
    cfg = _datagen_config(args)
    out = Path(args.out or f"eval_{args.mode}.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    models = [load_trained_model(p) for p in (args.model or [])]

    if args.mode == "insim":
        traj = args.traj or 1
        reports = [eval_in_simulation(None, traj, cfg)]
        for model in models:
            reports.append(eval_in_simulation(model, traj, cfg))
        write_eval_csv(reports, out)
    elif args.mode == "online":
        traj = args.traj or 2
        seed = EVAL_SEED_TRAJ1 if traj == 1 else EVAL_SEED_TRAJ2
        clean, noisy = make_eval_trajectory(traj, noise_seed=seed, cfg=cfg)
        reports = [eval_online(m, noisy, clean, trajectory=traj) for m in models]
        write_eval_csv(reports, out)
    elif args.mode == "transfer":
        trace = make_transfer_trace(noise_fraction=cfg.noise_fraction, noise_seed=EVAL_SEED_TRANSFER)
        reports = [eval_transfer(m, trace) for m in models]
        reports.append(eval_transfer_coulomb(trace))
        write_eval_csv(reports, out)
    elif args.mode == "steady-map":
        v_grid = np.linspace(-1.0, 1.0, 80)  # even count: excludes v = 0
        f_n_grid = np.linspace(0.0, 20.0, 21)
        target = models[0] if models else GROUND_TRUTH
        grid = steady_state_map(target, v_grid, f_n_grid)
        write_map_csv(v_grid, f_n_grid, grid, out)
        label = models[0].variant if models else "lugre-truth"
        _write_manifest(out, "evaluate", {"mode": args.mode, "model": label})
        print(f"wrote {out}")
        return 0
    elif args.mode == "pareto":
        if not args.ident_csv:
            raise UsageError("--mode pareto needs --ident-csv")
        clean, noisy = make_eval_trajectory(2, noise_seed=EVAL_SEED_TRAJ2, cfg=cfg)
        entries = []
        for method, params, t_comp in _read_ident_csv(args.ident_csv):
            entries.append(SpeedAccuracyEntry(method=method, t_comp_s=t_comp, params=params))
        for path, model in zip(args.model or [], models):
            t_comp = _model_wall_clock(path)
            entries.append(SpeedAccuracyEntry(method=model.variant, t_comp_s=t_comp, model=model))
        rows = speed_accuracy_report(entries, clean)
        write_speed_accuracy_csv(rows, out)
        front = pareto_front(rows)
        print("speed/accuracy rows (method, t_comp_s, MSE):")
        for row in rows:
            star = " *" if row in front else ""
            print(f"  {row[0]:>12}  {row[1]:10.1f}  {row[2]:.6g}{star}")
        print("(* on the Pareto frontier)")
        _write_manifest(out, "evaluate", {"mode": args.mode})
        print(f"wrote {out}")
        return 0
    else:
        raise UsageError(f"unknown --mode {args.mode!r}")

    _write_manifest(out, "evaluate", {"mode": args.mode, "traj": args.traj,
                                      "models": ",".join(args.model or [])})
    print(format_eval_table(reports))
    print(f"wrote {out}")
    return 0


def _model_wall_clock(model_path):
    """Training time from the loss CSV written next to a model file."""
    loss_path = Path(model_path).with_name(Path(model_path).stem + "_loss.csv")
    if not loss_path.exists():
        return float("nan")
    last = loss_path.read_text(encoding="utf-8").splitlines()[-1]
    return float(last.split(",")[-1])


def cmd_report(args):
    reports = []
    for path in args.inputs:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        reports.extend(lines[1:])
    header = "method,trajectory,mode,mse,stick_mse,slip_mse,correlation,wall_clock_s,failed"
    print(header.replace(",", "  "))
    for line in reports:
        print(line.replace(",", "  "))
    if args.out:
        Path(args.out).write_text(header + "\n" + "\n".join(reports) + "\n", encoding="utf-8")
        print(f"wrote {args.out}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frictionlab",
        description="LuGre friction learning: data generation, PINN training, "
        "identification baselines, evaluation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate the six training trials and write CSVs")
    p.add_argument("--config")
    p.add_argument("--seed", type=int)
    p.add_argument("--noise", type=float, help="noise fraction (0 disables the noisy CSV)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one estimator variant")
    p.add_argument("--dataset", required=True)
    p.add_argument("--variant", required=True, choices=VARIANTS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--width", type=int, help="override the hidden width")
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("identify", help="run classical LuGre identification")
    p.add_argument("--dataset", required=True)
    p.add_argument("--method", default="all", choices=METHODS + ("all",))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iters", type=int)
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=200)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("evaluate", help="run one evaluation mode")
    p.add_argument("--mode", required=True,
                   choices=("insim", "online", "transfer", "steady-map", "pareto"))
    p.add_argument("--traj", type=int, choices=(1, 2))
    p.add_argument("--model", action="append", help="trained model file (repeatable)")
    p.add_argument("--ident-csv")
    p.add_argument("--noise", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="merge evaluation CSVs into one table")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except (
        IntegrationError,
        TrainingDivergedError,
        DatasetFormatError,
        GenerationQualityError,
        FileNotFoundError,
    ) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
