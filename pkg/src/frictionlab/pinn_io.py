"""Serialization for trained estimators.

Models are stored as flat npz archives: named weight arrays, normalization
statistics, learned LuGre scalars (PE variants), the loss history, and a
JSON metadata entry. Timing is deliberately kept out of the model file so
fixed-seed retraining reproduces it byte-for-byte; wall-clock lives in the
loss-history CSV written alongside.
"""

from __future__ import annotations

import numpy as np

from .network import TrainableScalars, load_model, save_model
from .pinn import SCALAR_NAMES, Normalization, TrainedModel


def save_trained_model(model: TrainedModel, path):
    meta = {
        "kind": "frictionlab-model",
        "variant": model.variant,
        "output_scale": model.output_scale,
        "seed": model.seed,
        "lambda_zdot": model.lambda_zdot,
        "input_names": list(model.input_names),
        "is_pe": model.is_pe,
    }
    extra = {
        "norm_mean": model.norm.mean,
        "norm_std": model.norm.std,
        "loss_history": model.loss_history,
    }
    if model.scalars is not None:
        extra["log_scalars"] = np.array(
            [model.scalars.log_values[name] for name in SCALAR_NAMES]
        )
    save_model(path, model.net, meta, extra)


def load_trained_model(path) -> TrainedModel:
    net, meta, extra = load_model(path)
    if meta.get("kind") != "frictionlab-model":
        raise ValueError(f"{path}: not a frictionlab model file")
    scalars = None
    if "log_scalars" in extra:
        scalars = TrainableScalars(
            {name: extra["log_scalars"][i] for i, name in enumerate(SCALAR_NAMES)}
        )
    history = extra["loss_history"]
    return TrainedModel(
        variant=meta["variant"],
        net=net,
        norm=Normalization(extra["norm_mean"], extra["norm_std"]),
        output_scale=float(meta["output_scale"]),
        scalars=scalars,
        loss_history=history,
        wall_clock=np.zeros(len(history)),
        wall_clock_s=0.0,
        seed=int(meta["seed"]),
        lambda_zdot=float(meta["lambda_zdot"]),
    )


def write_loss_csv(model: TrainedModel, path):
    """Per-epoch training log: epoch, total, physics, zdot terms, lr, wall clock."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,total,l_physics,l_zdot,lr,wall_clock_s\n")
        for i, (row, wc) in enumerate(zip(model.loss_history, model.wall_clock)):
            fh.write(
                f"{i},{row[0]:.17g},{row[1]:.17g},{row[2]:.17g},{row[3]:.17g},{wc:.3f}\n"
            )


def model_file_bytes(model: TrainedModel) -> bytes:
    """Serialized bytes of a model (used by determinism checks)."""
    from .network import model_bytes

    meta = {
        "kind": "frictionlab-model",
        "variant": model.variant,
        "output_scale": model.output_scale,
        "seed": model.seed,
        "lambda_zdot": model.lambda_zdot,
        "input_names": list(model.input_names),
        "is_pe": model.is_pe,
    }
    extra = {
        "norm_mean": model.norm.mean,
        "norm_std": model.norm.std,
        "loss_history": model.loss_history,
    }
    if model.scalars is not None:
        extra["log_scalars"] = np.array(
            [model.scalars.log_values[name] for name in SCALAR_NAMES]
        )
    return model_bytes(model.net, meta, extra)
