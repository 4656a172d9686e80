"""Classical LuGre parameter identification baselines.

All three optimizers minimize one shared objective: integrate the bristle
state along each trial from the measured velocity and normal-force
channels, predict the friction force, and score the mean squared error
against the friction implied by the box equation of motion. Parameters are
searched in log-space so every candidate is positive.

The bristle ODE is stiff during slip (relaxation rate sigma0 |v| / g can
exceed 1e4 /s), so each 400 Hz sample interval is integrated with enough
fixed RK4 substeps to keep the scheme stable for the candidate at hand.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .friction import PARAM_NAMES, LuGreParams
from .pinn import SCALAR_INIT
from .systems import PoBParams, friction_from_eom

PENALTY = 1e12  # objective value for non-finite / diverged candidates

# search bounds in natural units, [low, high] per parameter
DEFAULT_BOUNDS = {
    "sigma0": (1e3, 1e7),
    "sigma1": (1e0, 1e4),
    "sigma2": (1e-3, 1e2),
    "mu_c": (0.02, 2.0),
    "mu_s": (0.02, 3.0),
    "v_s": (1e-5, 1e0),
}


def log_vector(params: dict) -> np.ndarray:
    return np.array([math.log(params[name]) for name in PARAM_NAMES])


def params_from_log(x) -> LuGreParams:
    """Validated LuGre parameters from a 6-vector of logs."""
    return LuGreParams(*(math.exp(v) for v in x))


def default_start() -> np.ndarray:
    """Optimization start: the same priors the PINN scalars initialize from."""
    return log_vector(SCALAR_INIT)


def default_log_bounds() -> np.ndarray:
    return np.array([(math.log(lo), math.log(hi)) for lo, hi in
                     (DEFAULT_BOUNDS[n] for n in PARAM_NAMES)])


@dataclass
class IdentResult:
    """Outcome of one identification run.

    ``values`` holds the recovered parameters in natural units in the
    [sigma0, sigma1, sigma2, mu_c, mu_s, v_s] layout (or exp of the raw
    optimum for non-LuGre test objectives); ``params`` validates them as a
    LuGreParams, which can fail for non-physical optima (mu_c > mu_s).
    """

    method: str
    values: np.ndarray
    objective: float
    wall_clock_s: float
    converged: bool
    n_evals: int
    best_history: list = field(default_factory=list)

    @property
    def params(self) -> LuGreParams:
        return LuGreParams(*self.values)


def predict_friction_trial(v, f_n, dt, x_log):
    """Friction prediction along one trial for a log-space candidate.

    Integrates dz/dt = v - sigma0 |v| z / g(v, F_N) on the sample grid with
    stability-driven RK4 substepping, then evaluates
    sigma0 z + sigma1 zdot + sigma2 v at the samples. Between samples the
    measured channels follow a Catmull-Rom cubic, which resolves the
    stick-slip transitions far better than linear interpolation. Returns
    None if the integration left the finite range.
    """
    sigma0, sigma1, sigma2, mu_c, mu_s, v_s = (math.exp(c) for c in x_log)
    v = np.asarray(v, dtype=float)
    f_n = np.asarray(f_n, dtype=float)
    # per-sample tangents (in units of the sample spacing)
    v_t = np.gradient(v).tolist()
    f_t = np.gradient(f_n).tolist()
    v = v.tolist()
    f_n = f_n.tolist()
    n = len(v)
    out = np.empty(n)
    inv_vs2 = 1.0 / (v_s * v_s)
    z = 0.0
    z_cap = 100.0 * mu_s * (max(f_n) + 1.0) / sigma0 + 1.0

    def g_of(vk, fk):
        e = vk * vk * inv_vs2
        w = math.exp(-e) if e < 700.0 else 0.0
        return (mu_c + (mu_s - mu_c) * w) * fk

    exp = math.exp
    mu_d = mu_s - mu_c
    for k in range(n):
        vk, fk = v[k], f_n[k]
        gk = g_of(vk, fk)
        zdot = vk - sigma0 * abs(vk) * z / gk if gk > 0 else vk
        out[k] = sigma0 * z + sigma1 * zdot + sigma2 * vk
        if k == n - 1:
            break
        vk1, fk1 = v[k + 1], f_n[k + 1]
        gk1 = g_of(vk1, fk1)
        g_min = min(gk, gk1)
        v_max = max(abs(vk), abs(vk1))
        lam = sigma0 * v_max / g_min if g_min > 0 else 0.0
        n_sub = min(400, max(2, int(dt * lam / 0.8) + 1))
        h = dt / n_sub
        mv0, mv1 = v_t[k], v_t[k + 1]
        mf0, mf1 = f_t[k], f_t[k + 1]
        # interpolated channels and g at the 2*n_sub+1 RK4 stage abscissae
        n2 = 2 * n_sub
        vv_pts = [0.0] * (n2 + 1)
        gg_pts = [0.0] * (n2 + 1)
        for i in range(n2 + 1):
            s = i / n2
            s2 = s * s
            s3 = s2 * s
            h00 = 2.0 * s3 - 3.0 * s2 + 1.0
            h10 = s3 - 2.0 * s2 + s
            h01 = 3.0 * s2 - 2.0 * s3
            h11 = s3 - s2
            vv = h00 * vk + h10 * mv0 + h01 * vk1 + h11 * mv1
            ff = h00 * fk + h10 * mf0 + h01 * fk1 + h11 * mf1
            e = vv * vv * inv_vs2
            w = exp(-e) if e < 700.0 else 0.0
            vv_pts[i] = vv
            gg_pts[i] = (mu_c + mu_d * w) * ff
        for j in range(n_sub):
            i0 = 2 * j
            v0, g0 = vv_pts[i0], gg_pts[i0]
            vm, gm = vv_pts[i0 + 1], gg_pts[i0 + 1]
            v1, g1 = vv_pts[i0 + 2], gg_pts[i0 + 2]
            k1 = v0 - sigma0 * abs(v0) * z / g0 if g0 > 0 else v0
            zz = z + 0.5 * h * k1
            k2 = vm - sigma0 * abs(vm) * zz / gm if gm > 0 else vm
            zz = z + 0.5 * h * k2
            k3 = vm - sigma0 * abs(vm) * zz / gm if gm > 0 else vm
            zz = z + h * k3
            k4 = v1 - sigma0 * abs(v1) * zz / g1 if g1 > 0 else v1
            z += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not (-z_cap < z < z_cap):
            return None
    return out


@dataclass
class IdentObjective:
    """Shared fitting objective over one (noisy) dataset."""

    trials: list  # (v, f_n, target) per trial
    dt: float
    n_samples: int

    @classmethod
    def from_dataset(cls, dataset: Dataset, p: PoBParams | None = None):
        p = p or PoBParams()
        target_all = friction_from_eom(
            dataset["xddot_b"],
            dataset["theta"],
            dataset["thetadot"],
            dataset["thetaddot"],
            p,
        )
        trials = []
        for tid in dataset.trial_ids():
            m = dataset.trial_mask(tid)
            trials.append((dataset["xdot_b"][m], dataset["f_n_est"][m], target_all[m]))
        return cls(trials=trials, dt=1.0 / dataset.rate, n_samples=len(dataset))

    def __call__(self, x_log) -> float:
        sq_sum = 0.0
        for v, f_n, target in self.trials:
            pred = predict_friction_trial(v, f_n, self.dt, x_log)
            if pred is None:
                return PENALTY
            sq_sum += float(np.sum((pred - target) ** 2))
        value = sq_sum / self.n_samples
        return value if math.isfinite(value) else PENALTY

    def residuals(self, x_log) -> np.ndarray:
        """Per-sample friction errors (for least-squares methods)."""
        parts = []
        for v, f_n, target in self.trials:
            pred = predict_friction_trial(v, f_n, self.dt, x_log)
            if pred is None:
                return np.full(self.n_samples, math.sqrt(PENALTY))
            parts.append(pred - target)
        res = np.concatenate(parts)
        return np.where(np.isfinite(res), res, math.sqrt(PENALTY))


class _CountedFn:
    def __init__(self, fn):
        self.fn = fn
        self.count = 0

    def __call__(self, x):
        self.count += 1
        return self.fn(x)


def nelder_mead(objective, x0, max_iters=4000, tol=1e-10, step=0.4):
    """Nelder-Mead simplex minimization in log-parameter space.

    Standard coefficients (reflection 1, expansion 2, contraction 0.5,
    shrink 0.5); converged when both the simplex diameter and the value
    spread fall below ``tol``.
    """
    f = _CountedFn(objective)
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    simplex = [x0.copy()]
    for i in range(n):
        x = x0.copy()
        x[i] += step
        simplex.append(x)
    values = [f(x) for x in simplex]
    t_start = time.perf_counter()
    best_history = [min(values)]
    converged = False

    for _ in range(max_iters):
        order = np.argsort(values)
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        best_history.append(values[0])
        diameter = max(np.max(np.abs(s - simplex[0])) for s in simplex[1:])
        if diameter < tol and values[-1] - values[0] < tol:
            converged = True
            break
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        reflected = centroid + (centroid - worst)
        f_r = f(reflected)
        if f_r < values[0]:
            expanded = centroid + 2.0 * (centroid - worst)
            f_e = f(expanded)
            if f_e < f_r:
                simplex[-1], values[-1] = expanded, f_e
            else:
                simplex[-1], values[-1] = reflected, f_r
        elif f_r < values[-2]:
            simplex[-1], values[-1] = reflected, f_r
        else:
            contracted = centroid + 0.5 * (worst - centroid)
            f_c = f(contracted)
            if f_c < values[-1]:
                simplex[-1], values[-1] = contracted, f_c
            else:
                for i in range(1, n + 1):
                    simplex[i] = simplex[0] + 0.5 * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
    i_best = int(np.argmin(values))
    return IdentResult(
        method="nelder-mead",
        values=np.exp(simplex[i_best]),
        objective=values[i_best],
        wall_clock_s=time.perf_counter() - t_start,
        converged=converged,
        n_evals=f.count,
        best_history=best_history,
    )


def genetic_algorithm(
    objective,
    bounds=None,
    population=50,
    generations=200,
    seed=0,
    mutation_rate=0.1,
    mutation_scale=0.05,
    blend_alpha=0.5,
    tournament_k=3,
):
    """Real-coded GA in log-parameter space.

    Tournament selection, blend (BLX-alpha) crossover, Gaussian mutation at
    a fraction of each gene's range, one elite per generation. Deterministic
    for a fixed seed.
    """
    if population < 10:
        raise ValueError("population must be at least 10")
    bounds = np.asarray(bounds if bounds is not None else default_log_bounds())
    lo, hi = bounds[:, 0], bounds[:, 1]
    span = hi - lo
    rng = np.random.default_rng(seed)
    f = _CountedFn(objective)
    t_start = time.perf_counter()

    pop = rng.uniform(lo, hi, size=(population, lo.size))
    fitness = np.array([f(x) for x in pop])
    best_history = [float(fitness.min())]

    def tournament():
        idx = rng.integers(population, size=tournament_k)
        return pop[idx[np.argmin(fitness[idx])]]

    for _ in range(generations):
        elite_i = int(np.argmin(fitness))
        new_pop = [pop[elite_i].copy()]
        while len(new_pop) < population:
            p1, p2 = tournament(), tournament()
            d = np.abs(p1 - p2)
            c_lo = np.minimum(p1, p2) - blend_alpha * d
            c_hi = np.maximum(p1, p2) + blend_alpha * d
            child = rng.uniform(c_lo, c_hi)
            mutate = rng.random(lo.size) < mutation_rate
            child = child + mutate * rng.normal(0.0, mutation_scale * span)
            new_pop.append(np.clip(child, lo, hi))
        pop = np.asarray(new_pop)
        fitness = np.array([f(x) for x in pop])
        best_history.append(float(fitness.min()))

    i_best = int(np.argmin(fitness))
    return IdentResult(
        method="genetic",
        values=np.exp(pop[i_best]),
        objective=float(fitness[i_best]),
        wall_clock_s=time.perf_counter() - t_start,
        converged=True,
        n_evals=f.count,
        best_history=best_history,
    )


def nonlinear_least_squares(
    residual_fn,
    x0,
    max_iters=100,
    rel_step=1e-6,
    damping0=1e-3,
    step_tol=1e-10,
):
    """Levenberg-Marquardt with a forward-difference Jacobian.

    Damping scales a Marquardt diagonal; it divides by 10 on accepted steps
    and multiplies by 10 on rejections (or singular normal equations),
    giving up when it exceeds 1e12.
    """
    x = np.asarray(x0, dtype=float).copy()
    evals = [0]

    def eval_res(xx):
        evals[0] += 1
        return np.asarray(residual_fn(xx), dtype=float)

    t_start = time.perf_counter()
    r = eval_res(x)
    cost = float(r @ r)
    n = x.size
    lam = damping0
    converged = False
    best_history = [cost / len(r)]

    for _ in range(max_iters):
        if cost == 0.0:
            converged = True
            break
        jac = np.empty((r.size, n))
        for i in range(n):
            h = rel_step * max(1.0, abs(x[i]))
            xp = x.copy()
            xp[i] += h
            jac[:, i] = (eval_res(xp) - r) / h
        jtj = jac.T @ jac
        jtr = jac.T @ r
        if np.max(np.abs(jtr)) < 1e-14:
            converged = True
            break
        accepted = False
        while lam <= 1e12:
            try:
                delta = np.linalg.solve(jtj + lam * np.diag(np.diag(jtj)), -jtr)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            r_new = eval_res(x + delta)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                x = x + delta
                r, cost = r_new, cost_new
                lam = max(lam / 10.0, 1e-12)
                accepted = True
                best_history.append(cost / len(r))
                if np.max(np.abs(delta)) < step_tol:
                    converged = True
                break
            lam *= 10.0
        if not accepted or converged:
            break

    return IdentResult(
        method="nls",
        values=np.exp(x),
        objective=cost / len(r),
        wall_clock_s=time.perf_counter() - t_start,
        converged=converged,
        n_evals=evals[0],
        best_history=best_history,
    )


IDENT_CSV_HEADER = (
    "method,sigma0,sigma1,sigma2,mu_c,mu_s,v_s,objective,wall_clock_s,converged"
)


def ident_csv_row(result: IdentResult) -> str:
    fields = [result.method]
    fields += [f"{v:.17g}" for v in result.values]
    fields += [f"{result.objective:.17g}", f"{result.wall_clock_s:.3f}",
               "1" if result.converged else "0"]
    return ",".join(fields)


def write_ident_csv(results, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(IDENT_CSV_HEADER + "\n")
        for res in results:
            fh.write(ident_csv_row(res) + "\n")
