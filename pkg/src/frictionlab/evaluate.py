"""Evaluation suite: in-simulation fidelity, online estimation, transfer, speed/accuracy.

Two held-out trajectories mirror the training excitation families:

* Traj. 1 — a constant-amplitude 50-degree swing;
* Traj. 2 — the stick-slip +x translation, whose extended stationary
  periods expose estimators that lack the would-be-acceleration input.

Both are regenerated fresh with held-out noise seeds. Learned models are
scored against the clean ground-truth friction; reports carry overall,
stick-phase, and slip-phase MSE plus the correlation coefficient.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import (
    DatagenConfig,
    Dataset,
    add_noise,
    generate_swing_trial,
    generate_translation_trial,
)
from .friction import GROUND_TRUTH, LuGreParams, lugre_steady_state_force
from .ident import IdentObjective, predict_friction_trial
from .network import forward, input_jacobian
from .numerics import IntegrationError, finite_diff_central, integrate_rk45, resample
from .pinn import TrainedModel, estimate_online_batch
from .systems import (
    PoBParams,
    SDoBParams,
    normal_force_estimate,
    sdob_normal_force,
    simulate_pob,
    simulate_sdob,
)

STICK_THRESHOLD = 1e-3  # |v| below this counts as the stick phase [m/s]

# in-simulation runs use looser tolerances: learned force laws are only
# piecewise smooth, and the comparison happens at 400 Hz anyway
SIM_REL_TOL = 1e-6
SIM_ABS_TOL = 1e-8


@dataclass
class EvalReport:
    method: str
    trajectory: str
    mode: str
    mse: float
    stick_mse: float
    slip_mse: float
    correlation: float
    wall_clock_s: float
    failed: bool = False

    def row(self):
        return (
            f"{self.method},{self.trajectory},{self.mode},{self.mse:.17g},"
            f"{self.stick_mse:.17g},{self.slip_mse:.17g},{self.correlation:.17g},"
            f"{self.wall_clock_s:.3f},{int(self.failed)}"
        )


EVAL_CSV_HEADER = (
    "method,trajectory,mode,mse,stick_mse,slip_mse,correlation,wall_clock_s,failed"
)


def write_eval_csv(reports, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(EVAL_CSV_HEADER + "\n")
        for rep in reports:
            fh.write(rep.row() + "\n")


def format_eval_table(reports):
    """Aligned text table of evaluation reports."""
    headers = ("method", "traj", "mode", "MSE [N^2]", "stick MSE", "slip MSE", "corr")
    rows = [
        (
            r.method,
            r.trajectory,
            r.mode,
            f"{r.mse:.4g}",
            f"{r.stick_mse:.4g}",
            f"{r.slip_mse:.4g}",
            f"{r.correlation:.3f}",
        )
        for r in reports
    ]
    widths = [max(len(h), *(len(row[i]) for row in rows)) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines)


def _phase_metrics(estimate, truth, stick_mask):
    err2 = (estimate - truth) ** 2
    mse = float(np.mean(err2))
    stick = float(np.mean(err2[stick_mask])) if stick_mask.any() else 0.0
    slip = float(np.mean(err2[~stick_mask])) if (~stick_mask).any() else 0.0
    if np.std(estimate) > 0 and np.std(truth) > 0:
        corr = float(np.corrcoef(estimate, truth)[0, 1])
    else:
        corr = 0.0
    return mse, stick, slip, corr


# ---------------------------------------------------------------------------
# held-out evaluation trajectories


def make_eval_trajectory(traj, noise_seed=1000, cfg: DatagenConfig | None = None):
    """Generate one held-out trajectory as (clean, noisy) datasets.

    ``traj`` is 1 (constant 50-degree swing) or 2 (stick-slip translation).
    """
    cfg = cfg or DatagenConfig()
    if traj == 1:
        cols = generate_swing_trial(
            50.0,
            cfg.excitation_freq,
            cfg.swing_duration,
            cfg.pob,
            cfg.friction,
            rate=cfg.rate,
            kp=cfg.kp,
            kd=cfg.kd,
        )
    elif traj == 2:
        cols = generate_translation_trial(
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
    else:
        raise ValueError("traj must be 1 or 2")
    columns = dict(cols)
    columns["trial_id"] = np.zeros(len(cols["t"]), dtype=int)
    clean = Dataset(columns=columns, noise_fraction=0.0, seed=None, rate=cfg.rate)
    noisy = add_noise(clean, cfg.noise_fraction, seed=noise_seed, p=cfg.pob)
    return clean, noisy


def online_inputs(dataset: Dataset, input_names):
    """Input matrix and per-channel time derivatives for online estimation."""
    dt = 1.0 / dataset.rate
    cols, rates = [], []
    for name in input_names:
        cols.append(dataset[name])
        if name == "xdot_b":
            rates.append(dataset["xddot_b"])
        else:
            rate = np.empty(len(dataset))
            for tid in dataset.trial_ids():
                m = dataset.trial_mask(tid)
                rate[m] = finite_diff_central(dataset[name][m], dt)
            rates.append(rate)
    return np.stack(cols, axis=1), np.stack(rates, axis=1)


# ---------------------------------------------------------------------------
# online estimation


def eval_online(model: TrainedModel, noisy: Dataset, clean: Dataset, trajectory="?"):
    """Feed noisy samples through a trained model; score against clean truth."""
    t0 = time.perf_counter()
    inputs, rates = online_inputs(noisy, model.input_names)
    est = estimate_online_batch(model, inputs, rates if model.is_pe else None)
    truth = clean["f_fric_true"]
    stick = np.abs(clean["xdot_b"]) < STICK_THRESHOLD
    mse, stick_mse, slip_mse, corr = _phase_metrics(est, truth, stick)
    return EvalReport(
        method=model.variant,
        trajectory=str(trajectory),
        mode="online",
        mse=mse,
        stick_mse=stick_mse,
        slip_mse=slip_mse,
        correlation=corr,
        wall_clock_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# in-simulation evaluation


def _tau_controller(traj, cfg: DatagenConfig):
    if traj == 1:
        amp = math.radians(50.0)
        w = 2.0 * math.pi * cfg.excitation_freq

        def ref(t):
            return amp * math.sin(w * t), amp * w * math.cos(w * t)

        state0 = [0, 0, 0, amp * w, 0]
        duration = cfg.swing_duration
    elif traj == 2:
        from .datagen import translation_reference

        ref, amp = translation_reference(
            cfg.translation_amplitude_deg, cfg.translation_t_slow, cfg.translation_t_fast
        )
        state0 = [0, 0, -amp, 0, 0]
        duration = cfg.translation_duration
    else:
        raise ValueError("traj must be 1 or 2")

    def tau_fn(t, y):
        th_ref, thd_ref = ref(t)
        return cfg.kp * (th_ref - y[2]) + cfg.kd * (thd_ref - y[3])

    return tau_fn, state0, duration


def _model_force_and_accel(model, theta, thetadot, v, tau, p: PoBParams):
    """Friction force and accelerations under a learned model at one state.

    Blackbox models give the force explicitly. PE models evaluate the
    structural force sigma0 zhat + sigma1 zdot_model + sigma2 v, where
    zdot_model follows the chain rule along the simulated state, making the
    force linear in the unknown accelerations: the 2x2 system absorbs it.
    """
    m00 = p.m_b + p.m_l
    m01 = p.m_l * p.d * math.cos(theta)
    m11 = p.j_l + p.m_l * p.d**2
    rhs0_base = p.m_l * p.d * thetadot**2 * math.sin(theta)
    rhs1 = p.m_l * p.d * p.g * math.sin(theta) + tau

    fn_signed = normal_force_estimate(theta, thetadot, p)
    fn_abs = abs(fn_signed)
    u = np.array([v, fn_abs])
    u_std = model.norm.apply(u)

    if not model.is_pe:
        f_f = float(forward(model.net, u_std)[0]) * model.output_scale
        det = m00 * m11 - m01 * m01
        a = ((rhs0_base - f_f) * m11 - m01 * rhs1) / det
        b = (m00 * rhs1 - m01 * (rhs0_base - f_f)) / det
        return f_f, a, b

    s = model.scalars.natural()
    zhat = float(forward(model.net, u_std)[0]) * model.output_scale
    jac = input_jacobian(model.net, u_std)[0] * model.output_scale / model.norm.std
    j_v, j_f = float(jac[0]), float(jac[1])
    s_f = math.copysign(1.0, fn_signed) if fn_signed != 0 else 0.0
    # d|F_N|/dt = s_f * m_L d (2 thetadot cos(theta) thetaddot - thetadot^3 sin(theta))
    dfn_b = s_f * p.m_l * p.d * 2.0 * thetadot * math.cos(theta)
    dfn_0 = -s_f * p.m_l * p.d * thetadot**3 * math.sin(theta)
    c0 = s["sigma0"] * zhat + s["sigma2"] * v + s["sigma1"] * j_f * dfn_0
    ca = s["sigma1"] * j_v
    cb = s["sigma1"] * j_f * dfn_b
    a00 = m00 + ca
    a01 = m01 + cb
    det = a00 * m11 - a01 * m01
    if abs(det) < 1e-9:
        raise IntegrationError("singular coupled system under PE model")
    r0 = rhs0_base - c0
    a = (r0 * m11 - a01 * rhs1) / det
    b = (a00 * rhs1 - m01 * r0) / det
    f_f = c0 + ca * a + cb * b
    return f_f, a, b


def simulate_pob_with_model(model: TrainedModel, tau_fn, t_span, p: PoBParams, state0):
    """Closed-loop PoB simulation with the learned friction law.

    Only 2-input variants are simulatable: the would-be-acceleration input
    of the *2 variants depends on the accelerations being solved for.
    """
    if len(model.input_names) != 2:
        raise ValueError(
            f"in-simulation evaluation needs a 2-input model, got {model.variant}"
        )

    def rhs(t, y):
        tau = tau_fn(t, y)
        _, a, b = _model_force_and_accel(model, y[2], y[3], y[1], tau, p)
        return np.array([y[1], a, y[3], b])

    y0 = np.asarray(state0, dtype=float)[:4]
    return integrate_rk45(rhs, y0, t_span, rel_tol=SIM_REL_TOL, abs_tol=SIM_ABS_TOL)


def eval_in_simulation(model: TrainedModel | None, traj, cfg: DatagenConfig | None = None):
    """Replace ground-truth friction with the learned model inside the simulator.

    Both the reference (ground-truth LuGre) and the model-driven system
    track the same excitation; the score is the MSE between the two
    friction traces at 400 Hz. ``model=None`` re-runs the ground truth
    against itself (self-consistency check).
    """
    cfg = cfg or DatagenConfig()
    p = cfg.pob
    tau_fn, state0, duration = _tau_controller(traj, cfg)
    t0 = time.perf_counter()

    ref_sol = simulate_pob(tau_fn, [0.0, duration], p, cfg.friction, state0=state0)
    ts, ref_states = resample(ref_sol, cfg.rate)
    from .systems import pob_friction_terms

    f_ref = np.array(
        [pob_friction_terms(ref_states[i], p, cfg.friction)[2] for i in range(len(ts))]
    )
    stick = np.abs(ref_states[:, 1]) < STICK_THRESHOLD

    label = model.variant if model is not None else "lugre-truth"
    try:
        if model is None:
            sol = simulate_pob(tau_fn, [0.0, duration], p, cfg.friction, state0=state0)
            _, states = resample(sol, cfg.rate)
            f_model = np.array(
                [pob_friction_terms(states[i], p, cfg.friction)[2] for i in range(len(ts))]
            )
        else:
            sol = simulate_pob_with_model(model, tau_fn, [0.0, duration], p, state0)
            _, states = resample(sol, cfg.rate)
            f_model = np.empty(len(ts))
            for i in range(len(ts)):
                y = states[i]
                tau = tau_fn(ts[i], np.array([y[0], y[1], y[2], y[3], 0.0]))
                f_model[i], _, _ = _model_force_and_accel(model, y[2], y[3], y[1], tau, p)
    except IntegrationError:
        return EvalReport(
            method=label,
            trajectory=str(traj),
            mode="insim",
            mse=float("inf"),
            stick_mse=float("inf"),
            slip_mse=float("inf"),
            correlation=0.0,
            wall_clock_s=time.perf_counter() - t0,
            failed=True,
        )

    mse, stick_mse, slip_mse, corr = _phase_metrics(f_model, f_ref, stick)
    return EvalReport(
        method=label,
        trajectory=str(traj),
        mode="insim",
        mse=mse,
        stick_mse=stick_mse,
        slip_mse=slip_mse,
        correlation=corr,
        wall_clock_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# transfer to the SDoB system


@dataclass(frozen=True)
class SdobPullSpec:
    """External-force profile and initial spring deflection for the pull test."""

    duration: float = 3.0
    y2_0: float = 0.004  # initial top-mass offset excites the normal force [m]
    # (time, force) knots of a piecewise-linear pull profile [s, N]
    knots: tuple = (
        (0.0, 0.0),
        (1.2, 10.0),
        (1.6, 10.0),
        (1.8, 1.0),
        (2.2, 1.0),
        (2.4, 9.5),
        (2.6, 9.5),
        (2.8, 0.0),
        (3.0, 0.0),
    )

    def force(self, t):
        ts = [k[0] for k in self.knots]
        fs = [k[1] for k in self.knots]
        return float(np.interp(t, ts, fs))


@dataclass
class TransferTrace:
    """Sampled SDoB run with noisy estimator inputs and clean truth."""

    t: np.ndarray
    inputs: np.ndarray  # (N, 3): xdot1, F_N estimate, xddot1_star
    rates: np.ndarray  # (N, 3)
    f_true: np.ndarray
    stick: np.ndarray


def make_transfer_trace(
    spec: SdobPullSpec | None = None,
    sdob: SDoBParams | None = None,
    fric: LuGreParams | None = None,
    noise_fraction=0.05,
    noise_seed=2000,
    rate=400.0,
) -> TransferTrace:
    """Simulate the SDoB pull and assemble estimator inputs.

    The estimator sees the same input triplet it was trained on, computed
    from SDoB states: sliding velocity, the state-only normal-force
    estimate, and the frictionless would-be acceleration F_ext / m1.
    """
    spec = spec or SdobPullSpec()
    sdob = sdob or SDoBParams()
    fric = fric or GROUND_TRUTH
    sol = simulate_sdob(
        spec.force, [0.0, spec.duration], sdob, fric, state0=[0, 0, spec.y2_0, 0, 0]
    )
    ts, states = resample(sol, rate)
    n = len(ts)
    from .friction import lugre_force, lugre_zdot

    v = states[:, 1]
    f_n = sdob_normal_force(states[:, 2], states[:, 3], sdob)
    f_ext = np.array([spec.force(t) for t in ts])
    zdot = lugre_zdot(v, states[:, 4], f_n, fric)
    f_true = lugre_force(states[:, 4], zdot, v, fric)
    xddot1 = (f_ext - f_true) / sdob.m1
    xddot1_star = f_ext / sdob.m1

    rng = np.random.default_rng(noise_seed)

    def noised(x):
        std = float(np.std(x))
        if noise_fraction <= 0 or std == 0:
            return x.copy()
        return x + rng.normal(0.0, noise_fraction * std, size=n)

    v_n = noised(v)
    f_n_n = np.maximum(noised(f_n), 0.0)
    star_n = noised(xddot1_star)
    xddot1_n = noised(xddot1)
    dt = 1.0 / rate
    inputs = np.stack([v_n, f_n_n, star_n], axis=1)
    rates = np.stack(
        [xddot1_n, finite_diff_central(f_n_n, dt), finite_diff_central(star_n, dt)],
        axis=1,
    )
    return TransferTrace(
        t=ts,
        inputs=inputs,
        rates=rates,
        f_true=f_true,
        stick=np.abs(v) < STICK_THRESHOLD,
    )


def eval_transfer(model: TrainedModel, trace: TransferTrace | None = None):
    """Online friction estimation on the SDoB system for a PoB-trained model."""
    trace = trace or make_transfer_trace()
    t0 = time.perf_counter()
    d = len(model.input_names)
    est = estimate_online_batch(
        model, trace.inputs[:, :d], trace.rates[:, :d] if model.is_pe else None
    )
    mse, stick_mse, slip_mse, corr = _phase_metrics(est, trace.f_true, trace.stick)
    return EvalReport(
        method=model.variant,
        trajectory="sdob-pull",
        mode="transfer",
        mse=mse,
        stick_mse=stick_mse,
        slip_mse=slip_mse,
        correlation=corr,
        wall_clock_s=time.perf_counter() - t0,
    )


def eval_transfer_coulomb(trace: TransferTrace | None = None, mu_c=0.30, sigma2=0.40):
    """Reference point: the simplified Coulomb+viscous model on the same trace."""
    from .friction import coulomb_viscous_force

    trace = trace or make_transfer_trace()
    t0 = time.perf_counter()
    est = coulomb_viscous_force(trace.inputs[:, 0], trace.inputs[:, 1], mu_c, sigma2)
    mse, stick_mse, slip_mse, corr = _phase_metrics(est, trace.f_true, trace.stick)
    return EvalReport(
        method="coulomb-viscous",
        trajectory="sdob-pull",
        mode="transfer",
        mse=mse,
        stick_mse=stick_mse,
        slip_mse=slip_mse,
        correlation=corr,
        wall_clock_s=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# steady-state friction maps


def steady_state_map(model, v_grid, f_n_grid):
    """Constant-velocity friction force over a (v, F_N) grid.

    ``model`` may be a TrainedModel (blackbox: direct forward with zero
    would-be acceleration; PE: closed-form steady state of the learned
    parameters) or a LuGreParams (reference closed form). Returns a matrix
    with one row per velocity.
    """
    v_grid = np.asarray(v_grid, dtype=float)
    f_n_grid = np.asarray(f_n_grid, dtype=float)
    if v_grid.size == 0 or f_n_grid.size == 0:
        raise ValueError("grids must be non-empty")
    vv, ff = np.meshgrid(v_grid, f_n_grid, indexing="ij")
    if isinstance(model, LuGreParams):
        out = lugre_steady_state_force(vv, ff, model)
    elif isinstance(model, TrainedModel) and model.is_pe:
        out = lugre_steady_state_force(vv, ff, LuGreParams(**model.recovered_params()))
    elif isinstance(model, TrainedModel):
        pts = np.stack([vv.ravel(), ff.ravel()], axis=1)
        if len(model.input_names) == 3:
            pts = np.column_stack([pts, np.zeros(len(pts))])
        est = estimate_online_batch(model, pts)
        out = est.reshape(vv.shape)
    else:
        raise TypeError(f"unsupported model type {type(model)!r}")
    return np.asarray(out)


def write_map_csv(v_grid, f_n_grid, grid, path):
    """Matrix CSV: first column v, remaining columns one per normal force."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("v\\f_n," + ",".join(f"{f:.17g}" for f in f_n_grid) + "\n")
        for v, row in zip(v_grid, grid):
            fh.write(f"{v:.17g}," + ",".join(f"{x:.17g}" for x in row) + "\n")


# ---------------------------------------------------------------------------
# speed / accuracy comparison


@dataclass
class SpeedAccuracyEntry:
    method: str
    t_comp_s: float
    params: object = None  # LuGreParams or a 6-vector of natural values
    model: TrainedModel | None = None


def speed_accuracy_report(entries, clean: Dataset):
    """Rows (method, computation time, friction MSE on a held-out trajectory).

    All methods reconstruct the friction force from the clean held-out
    signals (parameter sets by integrating the bristle state along the
    trajectory, networks by direct estimation), so the error column
    measures model fidelity rather than sensor-noise robustness.
    """
    truth = clean["f_fric_true"]
    rows = []
    for entry in entries:
        if entry.model is not None:
            inputs, rates = online_inputs(clean, entry.model.input_names)
            est = estimate_online_batch(
                entry.model, inputs, rates if entry.model.is_pe else None
            )
        elif entry.params is not None:
            obj = IdentObjective.from_dataset(clean)
            vec = (
                entry.params.as_vector()
                if isinstance(entry.params, LuGreParams)
                else np.asarray(entry.params, dtype=float)
            )
            x = np.log(vec)
            parts = [
                predict_friction_trial(v, f_n, obj.dt, x) for v, f_n, _ in obj.trials
            ]
            est = np.concatenate([p if p is not None else np.full(1, np.nan) for p in parts])
        else:
            raise ValueError(f"entry {entry.method!r} has neither params nor model")
        mse = float(np.mean((est - truth) ** 2))
        rows.append((entry.method, entry.t_comp_s, mse))
    return rows


def pareto_front(rows):
    """Subset of (method, time, mse) rows not dominated in both time and error."""
    front = []
    for i, (_, t_i, e_i) in enumerate(rows):
        dominated = any(
            (t_j <= t_i and e_j <= e_i and (t_j < t_i or e_j < e_i))
            for j, (_, t_j, e_j) in enumerate(rows)
            if j != i
        )
        if not dominated:
            front.append(rows[i])
    return front


def write_speed_accuracy_csv(rows, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,t_comp_s,mse\n")
        for method, t_comp, mse in rows:
            fh.write(f"{method},{t_comp:.3f},{mse:.17g}\n")
