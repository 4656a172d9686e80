"""Physics-informed friction estimators: losses, training loop, online inference.

Four variants share one training signal, the equation-of-motion residual of
the box axis; no friction measurement is ever used.

* bb1 / bb2 ("blackbox"): the network outputs the friction force directly.
* pe1 / pe2 ("parameter estimation"): the network outputs the internal
  bristle state; the friction force is assembled through the LuGre
  structure from six positive scalars learned alongside the network, and a
  consistency loss ties the network's time derivative (via its input
  Jacobian) to the LuGre state evolution.

Variant 1 models see (xdot_b, |F_N|); variant 2 models additionally see the
would-be acceleration, which carries the information needed during
stationary phases.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .datagen import Dataset
from .network import (
    AdamState,
    Mlp,
    TrainableScalars,
    adam_step,
    forward,
    forward_with_tangent,
    init_network,
)
from .numerics import finite_diff_central
from .systems import PoBParams

VARIANTS = ("bb1", "bb2", "pe1", "pe2")

VARIANT_INPUTS = {
    "bb1": ("xdot_b", "f_n_est"),
    "pe1": ("xdot_b", "f_n_est"),
    "bb2": ("xdot_b", "f_n_est", "xddot_star"),
    "pe2": ("xdot_b", "f_n_est", "xddot_star"),
}

VARIANT_WIDTH = {"bb1": 128, "pe1": 128, "bb2": 512, "pe2": 512}
VARIANT_LR = {"bb1": 1e-4, "pe1": 1e-4, "bb2": 1e-3, "pe2": 1e-3}

# order-of-magnitude priors for the learnable LuGre scalars
SCALAR_INIT = {
    "sigma0": 1e4,
    "sigma1": 1e2,
    "sigma2": 1.0,
    "mu_c": 0.2,
    "mu_s": 0.5,
    "v_s": 1e-2,
}

SCALAR_NAMES = tuple(SCALAR_INIT)

# cap on (|v|/v_s)^2 so tiny v_s candidates keep finite gradients
STRIBECK_EXPONENT_CAP = 50.0


class TrainingDivergedError(RuntimeError):
    """Training hit a non-finite loss."""


@dataclass(frozen=True)
class ModelConfig:
    """Architecture selection; width defaults follow the variant."""

    variant: str
    hidden_layers: int = 4
    width: int | None = None
    output_scale: float | None = None  # PE nets predict ~1e-4 m deflections
    dtype: str = "float32"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")

    @property
    def inputs(self):
        return VARIANT_INPUTS[self.variant]

    @property
    def is_pe(self):
        return self.variant.startswith("pe")

    @property
    def resolved_width(self):
        return self.width if self.width is not None else VARIANT_WIDTH[self.variant]

    @property
    def resolved_output_scale(self):
        if self.output_scale is not None:
            return self.output_scale
        return 1e-4 if self.is_pe else 1.0

    @property
    def layer_sizes(self):
        return [len(self.inputs)] + [self.resolved_width] * self.hidden_layers + [1]


@dataclass(frozen=True)
class TrainConfig:
    """Full-batch Adam training recipe."""

    epochs: int = 10000
    lr: float | None = None  # default: 1e-4 fixed (bb1/pe1), 1e-3 + plateau (bb2/pe2)
    lambda_zdot: float = 1e5
    plateau_patience: int = 200
    plateau_factor: float = 0.5
    plateau_min_lr: float = 1e-5
    plateau_threshold: float = 1e-3  # relative improvement that resets patience
    # the six log-space scalars step faster than the network: their gradients
    # fight network compensation, and crossing an order of magnitude at the
    # network rate would need more epochs than the budget provides
    scalar_lr_scale: float = 10.0
    seed: int = 0
    scalar_init: dict = field(default_factory=lambda: dict(SCALAR_INIT))

    def resolved_lr(self, variant):
        return self.lr if self.lr is not None else VARIANT_LR[variant]

    def uses_plateau(self, variant):
        return variant.endswith("2") and self.lr is None


@dataclass
class Batch:
    """Training arrays in physical units; rows aligned across fields."""

    inputs: np.ndarray  # (N, d)
    input_rates: np.ndarray  # (N, d) time derivatives of each input channel
    eom_term: np.ndarray  # (N, 1) friction-free side of the box EoM residual
    input_names: tuple
    dt: float = 1.0 / 400.0  # sample period, sets the consistency-residual scale


def _smooth_centered(x, window):
    """Zero-phase moving average with edge padding."""
    if window <= 1:
        return x
    pad = window // 2
    kernel = np.ones(window) / window
    return np.convolve(np.pad(x, pad, mode="edge"), kernel, mode="valid")


RATE_SMOOTH_WINDOW = 5  # zero-phase window for differentiating derived channels


def build_batch(
    dataset: Dataset,
    variant,
    p: PoBParams | None = None,
    drop_trial_ends=None,
    rate_smooth_window=RATE_SMOOTH_WINDOW,
) -> Batch:
    """Assemble the training batch for a variant from a (noisy) dataset.

    Input time derivatives: d(xdot_b)/dt is the measured acceleration; the
    derived channels are smoothed over a short centered window and then
    differentiated per trial with central differences (differencing raw
    5%-noise samples at 400 Hz would bury the rates in noise). PE variants
    drop each trial's two endpoint samples, where only first-order
    one-sided differences exist.
    """
    p = p or PoBParams()
    names = VARIANT_INPUTS[variant]
    if drop_trial_ends is None:
        drop_trial_ends = variant.startswith("pe")
    dt = 1.0 / dataset.rate

    cols = []
    rates = []
    keep = np.ones(len(dataset), dtype=bool)
    trial_ids = dataset["trial_id"]
    for name in names:
        cols.append(dataset[name])
        if name == "xdot_b":
            rates.append(dataset["xddot_b"])
        else:
            rate = np.empty(len(dataset))
            for tid in np.unique(trial_ids):
                mask = trial_ids == tid
                smoothed = _smooth_centered(dataset[name][mask], rate_smooth_window)
                rate[mask] = finite_diff_central(smoothed, dt)
            rates.append(rate)
    if drop_trial_ends:
        for tid in np.unique(trial_ids):
            idx = np.flatnonzero(trial_ids == tid)
            keep[idx[0]] = False
            keep[idx[-1]] = False

    inputs = np.stack(cols, axis=1)[keep]
    input_rates = np.stack(rates, axis=1)[keep]
    eom = eom_friction_free_term(dataset, p)[keep]
    return Batch(inputs, input_rates, eom[:, None], names, dt=dt)


def eom_friction_free_term(dataset: Dataset, p: PoBParams):
    """(m_b+m_L) xddot_b + m_L d (thetaddot cos(theta) - thetadot^2 sin(theta)).

    Adding the friction force to this term gives the box EoM residual, which
    is zero on noiseless data.
    """
    theta = dataset["theta"]
    return (p.m_b + p.m_l) * dataset["xddot_b"] + p.m_l * p.d * (
        dataset["thetaddot"] * np.cos(theta) - dataset["thetadot"] ** 2 * np.sin(theta)
    )


@dataclass
class Normalization:
    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, inputs):
        std = inputs.std(axis=0)
        return cls(inputs.mean(axis=0), np.maximum(std, 1e-12))

    def apply(self, inputs):
        return (inputs - self.mean) / self.std

    def apply_rates(self, rates):
        return rates / self.std


@dataclass
class TrainedModel:
    """A trained estimator plus everything needed to reproduce its outputs."""

    variant: str
    net: Mlp
    norm: Normalization
    output_scale: float
    scalars: TrainableScalars | None
    loss_history: np.ndarray  # (epochs, 4): total, l_physics, l_zdot, lr
    wall_clock: np.ndarray  # (epochs,) cumulative seconds
    wall_clock_s: float
    seed: int
    lambda_zdot: float

    @property
    def input_names(self):
        return VARIANT_INPUTS[self.variant]

    @property
    def is_pe(self):
        return self.variant.startswith("pe")

    def recovered_params(self) -> dict:
        if self.scalars is None:
            raise ValueError("blackbox models carry no LuGre scalars")
        return self.scalars.natural()


# ---------------------------------------------------------------------------
# losses (plain-numpy evaluation paths)


def pe_forward(batch: Batch, net: Mlp, scalars: TrainableScalars, norm: Normalization, output_scale):
    """Evaluate all intermediate PE quantities for a batch.

    Returns (zhat, zdot_model, zdot_lugre, f_f), each (N,). zdot_model is
    the chain-rule derivative of the network output along the measured
    input rates; zdot_lugre is the LuGre state evolution evaluated with the
    learned scalars; f_f is the structural friction force
    sigma0 zhat + sigma1 zdot_model + sigma2 xdot_b.
    """
    u = norm.apply(batch.inputs)
    udot = norm.apply_rates(batch.input_rates)
    zr, zdr = forward_with_tangent(net, u, udot)
    zhat = zr[:, 0].astype(float) * output_scale
    zdot_model = zdr[:, 0].astype(float) * output_scale

    s = scalars.natural()
    v = batch.inputs[:, 0]
    f_n = np.abs(batch.inputs[:, 1])
    f_c = s["mu_c"] * f_n
    f_s = s["mu_s"] * f_n
    expo = np.minimum((np.abs(v) / s["v_s"]) ** 2, STRIBECK_EXPONENT_CAP)
    g = f_c + (f_s - f_c) * np.exp(-expo)
    zdot_lugre = v - s["sigma0"] * np.abs(v) * zhat / g
    f_f = s["sigma0"] * zhat + s["sigma1"] * zdot_model + s["sigma2"] * v
    return zhat, zdot_model, zdot_lugre, f_f


def consistency_damping(batch: Batch, scalars: TrainableScalars):
    """Per-sample conditioning factor 1 + sigma0 |v| dt / g for the z-dot loss.

    The bristle equation is a stiff relaxation: the raw residual's
    sensitivity to the predicted state is the relaxation rate
    sigma0 |v| / g, which reaches thousands per second during slip. Scoring
    the raw residual rewards shrinking sigma0 instead of matching the
    dynamics; dividing by the implicit-step factor keeps the same zero set
    (consistency still means zdot_lugre = zdot_model) under a metric that
    is uniformly conditioned across stick and slip.
    """
    s = scalars.natural()
    v = batch.inputs[:, 0]
    f_n = np.abs(batch.inputs[:, 1])
    expo = np.minimum((np.abs(v) / s["v_s"]) ** 2, STRIBECK_EXPONENT_CAP)
    g = s["mu_c"] * f_n + (s["mu_s"] - s["mu_c"]) * f_n * np.exp(-expo)
    return 1.0 + s["sigma0"] * np.abs(v) * batch.dt / np.maximum(g, 1e-300)


def physics_loss_bb(batch: Batch, net: Mlp, norm: Normalization, output_scale=1.0):
    """Mean squared box-EoM residual with the network's force estimate."""
    f_f = forward(net, norm.apply(batch.inputs))[:, 0].astype(float) * output_scale
    resid = batch.eom_term[:, 0] + f_f
    return float(np.mean(resid**2))


def total_loss_pe(batch: Batch, net: Mlp, scalars, norm, output_scale, lambda_zdot):
    """Physics loss plus weighted LuGre-consistency loss; returns (total, l_p, l_z)."""
    _, zdot_model, zdot_lugre, f_f = pe_forward(batch, net, scalars, norm, output_scale)
    resid = batch.eom_term[:, 0] + f_f
    l_p = float(np.mean(resid**2))
    damp = consistency_damping(batch, scalars)
    l_z = float(np.mean(((zdot_lugre - zdot_model) / damp) ** 2))
    return l_p + lambda_zdot * l_z, l_p, l_z


# ---------------------------------------------------------------------------
# autodiff graph construction (training path)


def _wrap_params(net: Mlp, scalars: TrainableScalars | None):
    params = {}
    for name, arr in net.params().items():
        params[name] = ad.param(arr, name=name)
    if scalars is not None:
        for name, arr in scalars.params().items():
            params[name] = ad.param(arr, name=name)
    return params


def _mlp_graph(params, n_layers, u_const, udot_const=None):
    """Forward (and optionally tangent) pass as graph nodes."""
    h = u_const
    t = udot_const
    for i in range(n_layers - 1):
        s = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
        h = ad.relu(s)
        if t is not None:
            # gate the tangent with the (piecewise-constant) activation mask
            t = ad.mul(ad.matmul(t, params[f"w{i}"]), ad.constant(s.value > 0))
    i = n_layers - 1
    y = ad.add(ad.matmul(h, params[f"w{i}"]), params[f"b{i}"])
    ydot = ad.matmul(t, params[f"w{i}"]) if t is not None else None
    return y, ydot


def _graph_loss(model_cfg: ModelConfig, params, consts, lambda_zdot):
    """Build the variant's scalar loss node; returns (loss, l_p value, l_z value)."""
    n_layers = model_cfg.hidden_layers + 1
    out_scale = model_cfg.resolved_output_scale
    if not model_cfg.is_pe:
        y, _ = _mlp_graph(params, n_layers, consts["u"])
        f_f = ad.mul(y, out_scale) if out_scale != 1.0 else y
        resid = ad.add(consts["eom"], f_f)
        loss = ad.mean(ad.square(resid))
        return loss, float(loss.value), 0.0

    y, ydot = _mlp_graph(params, n_layers, consts["u"], consts["udot"])
    zhat = ad.mul(y, out_scale)
    zdot_model = ad.mul(ydot, out_scale)
    sigma0 = ad.exp(params["log_sigma0"])
    sigma1 = ad.exp(params["log_sigma1"])
    sigma2 = ad.exp(params["log_sigma2"])
    mu_c = ad.exp(params["log_mu_c"])
    mu_s = ad.exp(params["log_mu_s"])
    v_s = ad.exp(params["log_v_s"])

    f_n = consts["f_n"]  # (N,1) |F_N| >= 0
    v = consts["v"]  # (N,1)
    absv = consts["absv"]
    f_c = ad.mul(mu_c, f_n)
    f_s = ad.mul(mu_s, f_n)
    expo = ad.clip_max(ad.square(ad.div(absv, v_s)), STRIBECK_EXPONENT_CAP)
    g = ad.add(f_c, ad.mul(ad.sub(f_s, f_c), ad.exp(ad.neg(expo))))
    relax = ad.div(ad.mul(sigma0, absv), g)  # relaxation rate sigma0 |v| / g
    zdot_lugre = ad.sub(v, ad.mul(relax, zhat))
    f_f = ad.add(
        ad.add(ad.mul(sigma0, zhat), ad.mul(sigma1, zdot_model)), ad.mul(sigma2, v)
    )
    resid = ad.add(consts["eom"], f_f)
    l_p = ad.mean(ad.square(resid))
    # implicit-factor damping keeps the consistency metric well conditioned
    # across the stiff slip regime (see consistency_damping)
    damp = ad.add(ad.mul(relax, consts["dt"]), 1.0)
    l_z = ad.mean(ad.square(ad.div(ad.sub(zdot_lugre, zdot_model), damp)))
    loss = ad.add(l_p, ad.mul(l_z, lambda_zdot))
    return loss, float(l_p.value), float(l_z.value)


# ---------------------------------------------------------------------------
# learning-rate plateau schedule


class PlateauScheduler:
    """Halve the learning rate when the loss stops improving.

    An epoch "improves" when the loss beats the best seen so far by more
    than ``threshold`` relative; ``patience`` non-improving epochs in a row
    trigger one decay, floored at ``min_lr``.
    """

    def __init__(self, lr0, patience=200, factor=0.5, min_lr=1e-5, threshold=1e-3):
        self.lr = lr0
        self.patience = patience
        self.factor = factor
        self.min_lr = min_lr
        self.threshold = threshold
        self.best = np.inf
        self.stall = 0

    def update(self, loss):
        if loss < self.best * (1.0 - self.threshold):
            self.best = loss
            self.stall = 0
        else:
            self.stall += 1
            if self.stall >= self.patience:
                self.lr = max(self.lr * self.factor, self.min_lr)
                self.stall = 0
        return self.lr


def lr_plateau_schedule(history, lr0, patience=200, factor=0.5, min_lr=1e-5, threshold=1e-3):
    """Learning rate after replaying a loss history through the plateau rule."""
    if not 0.0 < factor < 1.0:
        raise ValueError("factor must be in (0, 1)")
    sched = PlateauScheduler(lr0, patience, factor, min_lr, threshold)
    lr = sched.lr
    for loss in history:
        lr = sched.update(loss)
    return lr


# ---------------------------------------------------------------------------
# training


def train(
    model_cfg: ModelConfig,
    train_cfg: TrainConfig,
    dataset: Dataset,
    p: PoBParams | None = None,
    progress_fn=None,
    progress_every=500,
) -> TrainedModel:
    """Full-batch Adam training of one estimator variant.

    The loss history records the loss evaluated at the start of each epoch,
    before that epoch's update; entry 0 is therefore the initialization
    loss. PE variants return the learned LuGre scalars in natural units.
    ``progress_fn(epoch, history_row, scalars_dict)`` is called every
    ``progress_every`` epochs when given.
    """
    p = p or PoBParams()
    dtype = np.dtype(model_cfg.dtype)
    batch = build_batch(dataset, model_cfg.variant, p)
    norm = Normalization.fit(batch.inputs)
    net = init_network(model_cfg.layer_sizes, seed=train_cfg.seed, dtype=dtype)
    scalars = (
        TrainableScalars.from_natural(train_cfg.scalar_init, dtype=dtype)
        if model_cfg.is_pe
        else None
    )

    consts = {
        "u": ad.constant(norm.apply(batch.inputs).astype(dtype)),
        "eom": ad.constant(batch.eom_term.astype(dtype)),
    }
    if model_cfg.is_pe:
        consts["udot"] = ad.constant(norm.apply_rates(batch.input_rates).astype(dtype))
        consts["v"] = ad.constant(batch.inputs[:, :1].astype(dtype))
        consts["absv"] = ad.constant(np.abs(batch.inputs[:, :1]).astype(dtype))
        consts["f_n"] = ad.constant(np.abs(batch.inputs[:, 1:2]).astype(dtype))
        consts["dt"] = ad.constant(np.asarray(batch.dt, dtype=dtype))

    lr = train_cfg.resolved_lr(model_cfg.variant)
    sched = (
        PlateauScheduler(
            lr,
            train_cfg.plateau_patience,
            train_cfg.plateau_factor,
            train_cfg.plateau_min_lr,
            train_cfg.plateau_threshold,
        )
        if train_cfg.uses_plateau(model_cfg.variant)
        else None
    )
    adam = AdamState()
    adam_scalars = AdamState()
    history = np.zeros((train_cfg.epochs, 4))
    wall = np.zeros(train_cfg.epochs)
    t0 = time.perf_counter()
    lam = train_cfg.lambda_zdot

    for epoch in range(train_cfg.epochs):
        params = _wrap_params(net, scalars)
        loss, l_p, l_z = _graph_loss(model_cfg, params, consts, lam)
        total = float(loss.value)
        if not np.isfinite(total):
            term = "physics" if not np.isfinite(l_p) else "zdot-consistency"
            raise TrainingDivergedError(
                f"non-finite loss at epoch {epoch} ({term} term; "
                f"l_p={l_p:.3g}, l_z={l_z:.3g})"
            )
        history[epoch] = (total, l_p, l_z, lr)
        if progress_fn is not None and epoch % progress_every == 0:
            progress_fn(epoch, history[epoch], scalars.natural() if scalars else None)
        ad.backward(loss)
        net_arrays, net_grads, sc_arrays, sc_grads = {}, {}, {}, {}
        for name, var in params.items():
            if name.startswith("log_"):
                sc_arrays[name] = var.value
                sc_grads[name] = var.grad
            else:
                net_arrays[name] = var.value
                net_grads[name] = var.grad
        adam_step(net_arrays, net_grads, adam, lr)
        if sc_arrays:
            adam_step(sc_arrays, sc_grads, adam_scalars, lr * train_cfg.scalar_lr_scale)
        if sched is not None:
            lr = sched.update(total)
        wall[epoch] = time.perf_counter() - t0

    return TrainedModel(
        variant=model_cfg.variant,
        net=net,
        norm=norm,
        output_scale=model_cfg.resolved_output_scale,
        scalars=scalars,
        loss_history=history,
        wall_clock=wall,
        wall_clock_s=float(wall[-1]) if train_cfg.epochs else 0.0,
        seed=train_cfg.seed,
        lambda_zdot=lam,
    )


# ---------------------------------------------------------------------------
# inference


def estimate_online(model: TrainedModel, sample: dict):
    """Friction estimate for one sample given as a column dict.

    Requires the variant's input columns; PE variants additionally need a
    ``<name>_rate`` entry per input (time derivative of that channel).
    """
    names = model.input_names
    try:
        u = np.array([sample[n] for n in names], dtype=float)
    except KeyError as exc:
        raise KeyError(f"sample is missing required input column {exc}") from None
    if not model.is_pe:
        return float(forward(model.net, model.norm.apply(u))[0]) * model.output_scale
    try:
        udot = np.array([sample[f"{n}_rate"] for n in names], dtype=float)
    except KeyError as exc:
        raise KeyError(f"PE estimate needs rate column {exc}") from None
    return float(
        estimate_online_batch(model, u[None, :], udot[None, :])[0]
    )


def estimate_online_batch(model: TrainedModel, inputs, input_rates=None):
    """Vectorized online friction estimates for (N, d) inputs."""
    inputs = np.asarray(inputs, dtype=float)
    u = model.norm.apply(inputs)
    if not model.is_pe:
        return forward(model.net, u)[:, 0].astype(float) * model.output_scale
    if input_rates is None:
        raise ValueError("PE models need input_rates for online estimation")
    udot = model.norm.apply_rates(np.asarray(input_rates, dtype=float))
    zr, zdr = forward_with_tangent(model.net, u, udot)
    zhat = zr[:, 0].astype(float) * model.output_scale
    zdot_model = zdr[:, 0].astype(float) * model.output_scale
    s = model.scalars.natural()
    v = inputs[:, 0]
    return s["sigma0"] * zhat + s["sigma1"] * zdot_model + s["sigma2"] * v
