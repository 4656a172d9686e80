"""Training-data generation: controlled PoB trials, sensor noise, CSV persistence.

Six trials are produced at 400 Hz: five constant-amplitude swings (35..65
degrees) and one asymmetric swing that translates the box in +x through
stick-slip, 14.5 s of data in total. Gaussian noise at a fraction of each
signal's standard deviation simulates sensor noise; the derived channels
(normal-force estimate and would-be acceleration) are recomputed from the
noisy states, while the ground-truth friction and bristle state stay clean
for evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from .friction import GROUND_TRUTH, LuGreParams, lugre_force, lugre_zdot
from .numerics import resample
from .systems import (
    PoBParams,
    normal_force_estimate,
    pob_solve_accel,
    simulate_pob,
    would_be_acceleration,
)

COLUMNS = (
    "t",
    "trial_id",
    "x_b",
    "xdot_b",
    "xddot_b",
    "theta",
    "thetadot",
    "thetaddot",
    "tau",
    "f_n_est",
    "xddot_star",
    "f_fric_true",
    "z_true",
)

# channels that a sensor would measure and that therefore receive noise
MEASURED_CHANNELS = ("x_b", "xdot_b", "xddot_b", "theta", "thetadot", "thetaddot", "tau")
# evaluation-only channels, never noised
CLEAN_CHANNELS = ("f_fric_true", "z_true")


class GenerationQualityError(RuntimeError):
    """A generated trial failed its quality contract (e.g. no net displacement)."""


class DatasetFormatError(ValueError):
    """A dataset file failed to parse."""


class Sample(NamedTuple):
    t: float
    trial_id: int
    x_b: float
    xdot_b: float
    xddot_b: float
    theta: float
    thetadot: float
    thetaddot: float
    tau: float
    f_n_est: float
    xddot_star: float
    f_fric_true: float
    z_true: float


@dataclass
class Dataset:
    """Column-oriented sample store for one generation run."""

    columns: dict
    noise_fraction: float = 0.0
    seed: int | None = None
    rate: float = 400.0

    def __getitem__(self, name):
        return self.columns[name]

    def __len__(self):
        return len(self.columns["t"])

    @property
    def n_samples(self):
        return len(self)

    def sample(self, i) -> Sample:
        return Sample(*(self.columns[c][i] for c in COLUMNS))

    def trial_ids(self):
        return np.unique(self.columns["trial_id"])

    def trial_mask(self, trial_id):
        return self.columns["trial_id"] == trial_id

    def copy(self):
        return Dataset(
            columns={k: v.copy() for k, v in self.columns.items()},
            noise_fraction=self.noise_fraction,
            seed=self.seed,
            rate=self.rate,
        )


@dataclass(frozen=True)
class DatagenConfig:
    """Recipe for the six-trial training set."""

    rate: float = 400.0
    swing_amplitudes_deg: tuple = (35.0, 42.5, 50.0, 57.5, 65.0)
    excitation_freq: float = 0.85  # Hz; keeps the 65 deg trial clear of contact break
    swing_duration: float = 2.0
    translation_amplitude_deg: float = 40.0
    translation_t_slow: float = 0.8
    translation_t_fast: float = 0.4
    translation_duration: float = 4.5
    kp: float = 50.0  # N m / rad
    kd: float = 5.0  # N m s / rad
    noise_fraction: float = 0.05
    seed: int = 0
    pob: PoBParams = field(default_factory=PoBParams)
    friction: LuGreParams = field(default_factory=lambda: GROUND_TRUTH)


def _pd_controller(ref_fn, kp, kd):
    def tau_fn(t, y):
        th_ref, thd_ref = ref_fn(t)
        return kp * (th_ref - y[2]) + kd * (thd_ref - y[3])

    return tau_fn


def _record_trial(sol, tau_fn, rate, p, fric):
    """Resample a trajectory and evaluate all per-sample channels.

    Accelerations come from the dynamics function at the sampled states,
    not from numerical differentiation.
    """
    ts, states = resample(sol, rate)
    n = len(ts)
    cols = {c: np.empty(n) for c in COLUMNS if c != "trial_id"}
    cols["t"] = ts - ts[0]
    for i in range(n):
        y = states[i]
        tau = tau_fn(ts[i], y)
        f_n_signed = normal_force_estimate(y[2], y[3], p)
        zdot = lugre_zdot(y[1], y[4], abs(f_n_signed), fric)
        f_f = lugre_force(y[4], zdot, y[1], fric)
        xddot, thetaddot = pob_solve_accel(y[2], y[3], tau, f_f, p)
        cols["x_b"][i] = y[0]
        cols["xdot_b"][i] = y[1]
        cols["xddot_b"][i] = xddot
        cols["theta"][i] = y[2]
        cols["thetadot"][i] = y[3]
        cols["thetaddot"][i] = thetaddot
        cols["tau"][i] = tau
        cols["f_n_est"][i] = abs(f_n_signed)
        cols["xddot_star"][i] = would_be_acceleration(y[2], y[3], thetaddot, p)
        cols["f_fric_true"][i] = f_f
        cols["z_true"][i] = y[4]
    return cols


def generate_swing_trial(amplitude_deg, freq, duration, p=None, fric=None, *, rate=400.0, kp=50.0, kd=5.0):
    """Simulate one PD-tracked sinusoidal swing trial and record its samples.

    The reference is theta_ref(t) = A sin(2 pi f t); the recorded torque is
    whatever the tracking controller produced.
    """
    if not 0.0 <= amplitude_deg < 90.0:
        raise ValueError("amplitude must be in [0, 90) degrees")
    if duration <= 0:
        raise ValueError("duration must be positive")
    p = p or PoBParams()
    fric = fric or GROUND_TRUTH
    amp = math.radians(amplitude_deg)
    w = 2.0 * math.pi * freq

    def ref(t):
        return amp * math.sin(w * t), amp * w * math.cos(w * t)

    tau_fn = _pd_controller(ref, kp, kd)
    # start on the reference to avoid an artificial transient
    sol = simulate_pob(tau_fn, [0.0, duration], p, fric, state0=[0, 0, 0, amp * w, 0])
    return _record_trial(sol, tau_fn, rate, p, fric)


def translation_reference(amplitude_deg=40.0, t_slow=0.8, t_fast=0.4):
    """Asymmetric swing reference that walks the box in +x.

    Each cycle swings the link slowly from -A to +A (box sticks) and snaps
    back quickly (box slips forward).
    """
    amp = math.radians(amplitude_deg)
    period = t_slow + t_fast

    def ref(t):
        u = t % period
        if u < t_slow:
            ph = math.pi * u / t_slow
            return -amp * math.cos(ph), amp * math.pi / t_slow * math.sin(ph)
        ph = math.pi * (u - t_slow) / t_fast
        return amp * math.cos(ph), -amp * math.pi / t_fast * math.sin(ph)

    return ref, amp


def generate_translation_trial(
    duration=4.5,
    p=None,
    fric=None,
    *,
    amplitude_deg=40.0,
    t_slow=0.8,
    t_fast=0.4,
    rate=400.0,
    kp=50.0,
    kd=5.0,
):
    """Simulate the stick-slip +x translation trial.

    Raises :class:`GenerationQualityError` if the net box displacement is
    not positive (the reference then needs retuning).
    """
    if duration < 2.0:
        raise ValueError("translation trial needs at least 2 s")
    p = p or PoBParams()
    fric = fric or GROUND_TRUTH
    ref, amp = translation_reference(amplitude_deg, t_slow, t_fast)
    tau_fn = _pd_controller(ref, kp, kd)
    sol = simulate_pob(tau_fn, [0.0, duration], p, fric, state0=[0, 0, -amp, 0, 0])
    cols = _record_trial(sol, tau_fn, rate, p, fric)
    net = cols["x_b"][-1] - cols["x_b"][0]
    if net <= 0:
        raise GenerationQualityError(
            f"translation trial produced non-positive net displacement ({net:.4g} m)"
        )
    return cols


def generate_dataset(cfg: DatagenConfig | None = None) -> Dataset:
    """Generate the full clean six-trial dataset."""
    cfg = cfg or DatagenConfig()
    trials = []
    for amp in cfg.swing_amplitudes_deg:
        trials.append(
            generate_swing_trial(
                amp,
                cfg.excitation_freq,
                cfg.swing_duration,
                cfg.pob,
                cfg.friction,
                rate=cfg.rate,
                kp=cfg.kp,
                kd=cfg.kd,
            )
        )
    trials.append(
        generate_translation_trial(
            cfg.translation_duration,
            cfg.pob,
            cfg.friction,
            amplitude_deg=cfg.translation_amplitude_deg,
            t_slow=cfg.translation_t_slow,
            t_fast=cfg.translation_t_fast,
            rate=cfg.rate,
            kp=cfg.kp,
            kd=cfg.kd,
        )
    )
    columns = {}
    for name in COLUMNS:
        if name == "trial_id":
            columns[name] = np.concatenate(
                [np.full(len(tr["t"]), i, dtype=int) for i, tr in enumerate(trials)]
            )
        else:
            columns[name] = np.concatenate([tr[name] for tr in trials])
    return Dataset(columns=columns, noise_fraction=0.0, seed=cfg.seed, rate=cfg.rate)


def add_noise(dataset: Dataset, fraction=0.05, seed=0, p: PoBParams | None = None) -> Dataset:
    """Add zero-mean Gaussian noise at ``fraction`` of each measured channel's std.

    Channel stds are taken over the whole dataset. The derived channels
    f_n_est and xddot_star are recomputed from the noisy states; the
    ground-truth channels are left untouched.
    """
    if fraction < 0:
        raise ValueError("noise fraction must be non-negative")
    out = dataset.copy()
    out.noise_fraction = fraction
    out.seed = seed
    if fraction == 0:
        return out
    p = p or PoBParams()
    rng = np.random.default_rng(seed)
    for ch in MEASURED_CHANNELS:
        clean = dataset.columns[ch]
        std = float(np.std(clean))
        if std > 0:
            out.columns[ch] = clean + rng.normal(0.0, fraction * std, size=len(clean))
    out.columns["f_n_est"] = np.abs(
        normal_force_estimate(out.columns["theta"], out.columns["thetadot"], p)
    )
    out.columns["xddot_star"] = would_be_acceleration(
        out.columns["theta"], out.columns["thetadot"], out.columns["thetaddot"], p
    )
    return out


def write_csv(dataset: Dataset, path):
    """Write a dataset as CSV: one metadata comment, a header, one row per sample.

    Floats carry 17 significant digits so the round trip is lossless.
    """
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# noise_fraction={dataset.noise_fraction!r} seed={dataset.seed!r} "
            f"rate={dataset.rate!r}\n"
        )
        fh.write(",".join(COLUMNS) + "\n")
        cols = [dataset.columns[c] for c in COLUMNS]
        for i in range(len(dataset)):
            fields = []
            for name, col in zip(COLUMNS, cols):
                if name == "trial_id":
                    fields.append(str(int(col[i])))
                else:
                    fields.append(f"{col[i]:.17g}")
            fh.write(",".join(fields) + "\n")


def read_csv(path) -> Dataset:
    """Read a dataset written by :func:`write_csv`."""
    meta = {"noise_fraction": 0.0, "seed": None, "rate": 400.0}
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise DatasetFormatError(f"{path}: empty file")
    start = 0
    if lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            if "=" in tok:
                key, val = tok.split("=", 1)
                if key in meta:
                    meta[key] = None if val == "None" else float(val)
        start = 1
    header = lines[start].split(",")
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise DatasetFormatError(f"{path}: missing column(s) {', '.join(missing)}")
    index = [header.index(c) for c in COLUMNS]
    rows = []
    for ln, line in enumerate(lines[start + 1 :], start=start + 2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != len(header):
            raise DatasetFormatError(
                f"{path}: line {ln}: expected {len(header)} fields, got {len(parts)}"
            )
        try:
            rows.append([float(parts[j]) for j in index])
        except ValueError as exc:
            raise DatasetFormatError(f"{path}: line {ln}: {exc}") from None
    if not rows:
        raise DatasetFormatError(f"{path}: no sample rows")
    arr = np.asarray(rows)
    columns = {}
    for j, name in enumerate(COLUMNS):
        columns[name] = arr[:, j].astype(int) if name == "trial_id" else arr[:, j]
    seed = meta["seed"]
    return Dataset(
        columns=columns,
        noise_fraction=float(meta["noise_fraction"]),
        seed=None if seed is None else int(seed),
        rate=float(meta["rate"]),
    )
