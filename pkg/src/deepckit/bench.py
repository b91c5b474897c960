"""Experiment harness: equivalence certification, Monte Carlo cost benchmarks,
hyperparameter sweeps, nonlinearity sweeps, and CSV/SVG emission.

Every command is deterministic given (config, master seed): trial i draws its
data from seed ``master + i`` and its online window from an independent salted
stream, and aggregation runs in trial-index order.  Wall-clock timings are the
one exception and are written to a separate ``timings.csv`` so the remaining
outputs stay byte-identical across reruns.

CLI::

    deepckit-bench equivalence|benchmark|sweep|nonlinearity [flags]

with ``--config`` pointing at a JSON file whose keys mirror
:class:`ExperimentConfig`; flags override file values.  The resolved config is
echoed into the output directory next to the results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import variants as va
from .hankel import partition
from .matlib import numeric_rank
from .plants import (
    LinearPlant,
    NoiseSpec,
    NonlinearPlant,
    collect_trajectory,
    lv_linearized_plant,
    lv_step,
    seeded_generator,
    standard_normal,
    step_linear,
    triple_mass_spring,
)

__all__ = [
    "ExperimentConfig",
    "BenchRow",
    "make_instance",
    "cmd_equivalence",
    "cmd_benchmark",
    "cmd_sweep",
    "cmd_nonlinearity",
    "emit_svg",
    "main",
]

_ONLINE_SALT = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1

VARIANT_CHOICES = ("basic", "hybrid", "svd", "ddspc", "svd-iter", "spc")
DEFAULT_VARIANTS = ("hybrid", "svd", "ddspc", "svd-iter")
_FAIL_SENTINEL = float("nan")


@dataclass
class ExperimentConfig:
    """Fully resolved experiment parameters; validated before any run."""

    plant: str = "triple-mass-spring"
    eps: float = 1.0
    T: int = 200
    t_ini: int = 4
    n_horizon: int = 40
    noise_var: float = 0.01
    lambda1: float = 30.0
    lambda2: float = 30.0
    lambda_y: float = 100.0
    q_scale: float = 1.0
    r_scale: float = 0.1
    u_min: float = -0.7
    u_max: float = 0.7
    trials: int = 100
    seed: int = 12345
    variants: tuple = DEFAULT_VARIANTS
    out_dir: str = "bench-out"
    slra_order: int | None = None
    slra_eps: float = 1e-6
    x0_scale: float = 2.0
    excitation_scale: float = 1.0

    def __post_init__(self):
        if self.plant not in ("triple-mass-spring", "lotka-volterra"):
            raise ValueError(f"unknown plant '{self.plant}'")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        if self.t_ini + self.n_horizon >= self.T:
            raise ValueError("t_ini + n_horizon must be smaller than T")
        if self.noise_var < 0.0 or min(self.lambda1, self.lambda2, self.lambda_y) < 0:
            raise ValueError("noise variance and lambdas must be nonnegative")
        if self.u_min > self.u_max:
            raise ValueError("u_min must not exceed u_max")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        self.variants = tuple(self.variants)
        for name in self.variants:
            if name not in VARIANT_CHOICES:
                raise ValueError(f"unknown variant '{name}'")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def echo(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(out_dir / "config.json", "w", encoding="ascii") as fh:
            json.dump(asdict(self), fh, sort_keys=True, indent=2)
            fh.write("\n")


@dataclass
class BenchRow:
    """Aggregate of one variant over all completed trials."""

    variant: str
    mean_cost: float
    increase_rate_pct: float
    mean_time_s: float
    trials: int
    failures: int


def _make_plant(cfg: ExperimentConfig):
    if cfg.plant == "triple-mass-spring":
        return triple_mass_spring()
    return NonlinearPlant(eps=cfg.eps)


def _make_spec(cfg: ExperimentConfig, plant) -> va.ControlSpec:
    m, p = plant.m, plant.p
    return va.ControlSpec(
        t_ini=cfg.t_ini,
        n_horizon=cfg.n_horizon,
        q_weight=cfg.q_scale * np.eye(p),
        r_weight=cfg.r_scale * np.eye(m),
        lambda1=cfg.lambda1,
        lambda2=cfg.lambda2,
        lambda_y=cfg.lambda_y,
        u_box=(np.full(m, cfg.u_min), np.full(m, cfg.u_max)),
    )


def make_instance(
    plant,
    *,
    T: int,
    t_ini: int,
    n_horizon: int,
    noise_var: float,
    u_lo,
    u_hi,
    seed: int,
    x0_scale: float = 1.0,
    excitation_scale: float = 1.0,
):
    """One seeded trial: offline library, online window, and the true state.

    Collects a length-T noisy trajectory (seeded ``seed``), then drives the
    plant from a random initial state (a Gaussian displacement of the measured
    coordinates, scaled by ``x0_scale``) for ``t_ini`` steps with fresh box
    excitation (independent salted stream) while measuring outputs with the
    same noise level.  Returns ``(lib, online, x_true)`` where ``x_true`` is
    the plant's internal state at decision time.
    """
    m, p = plant.m, plant.p
    u_lo = excitation_scale * np.broadcast_to(np.asarray(u_lo, dtype=float), (m,))
    u_hi = excitation_scale * np.broadcast_to(np.asarray(u_hi, dtype=float), (m,))
    traj = collect_trajectory(plant, T, (u_lo, u_hi), NoiseSpec(noise_var, seed))
    lib = partition(traj, t_ini, n_horizon)

    rng = seeded_generator((seed ^ _ONLINE_SALT) & _MASK64)
    # excite the measured coordinates only: disc angles for the mass-spring
    # chain, both error states for the interpolated predator-prey plant
    if isinstance(plant, NonlinearPlant):
        x = x0_scale * standard_normal(rng, 2)
    else:
        x = x0_scale * (plant.c.T @ standard_normal(rng, p))
    u_ini = u_lo + (u_hi - u_lo) * rng.random((t_ini, m))
    w_ini = (
        np.sqrt(noise_var) * standard_normal(rng, (t_ini, p))
        if noise_var > 0.0
        else np.zeros((t_ini, p))
    )
    y_ini = np.empty((t_ini, p))
    if isinstance(plant, NonlinearPlant):
        for k in range(t_ini):
            y_ini[k] = x + w_ini[k]
            x = lv_step(plant, x, u_ini[k, 0])
    else:
        for k in range(t_ini):
            x_next, y = step_linear(plant, x, u_ini[k])
            y_ini[k] = y + w_ini[k]
            x = x_next
    online = va.OnlineData(u_ini=u_ini.ravel(), y_ini=y_ini.ravel())
    return lib, online, x


def _gt_plant(cfg: ExperimentConfig, plant):
    """Model used by the ground-truth controller (linearization for eps < 1)."""
    if isinstance(plant, NonlinearPlant):
        return lv_linearized_plant(plant)
    return plant


def _solve_variant(name, lib, online, spec, cfg, caches, **solve_opts):
    """Dispatch one variant, reusing preprocessed libraries per instance."""
    if name == "basic":
        return va.solve_basic_deepc(lib, online, spec, **solve_opts)
    if name == "hybrid":
        return va.solve_hybrid(lib, online, spec, **solve_opts)
    if name == "svd":
        if "svd" not in caches:
            caches["svd"] = va.preprocess_svd(lib)
        return va.solve_svd(caches["svd"], online, spec, **solve_opts)
    if name == "ddspc":
        if "spc" not in caches:
            caches["spc"] = va.build_spc_library(lib)
        return va.solve_dd_spc(caches["spc"], online, spec, **solve_opts)
    if name == "spc":
        return va.solve_classical_spc(lib, online, spec, **solve_opts)
    if name == "svd-iter":
        if "slra" not in caches:
            order = cfg.slra_order
            if order is None:
                order = 8 if cfg.plant == "triple-mass-spring" else 2
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                caches["slra"] = va.preprocess_svd_iter(
                    lib, order, eps=cfg.slra_eps
                )
        return va.solve_svd_iter(caches["slra"], online, spec, **solve_opts)
    raise ValueError(f"unknown variant '{name}'")


def _write_csv(path: Path, cfg: ExperimentConfig, command: str, header, rows):
    """CSV with a leading comment naming the command, config hash, and units."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(
            f"# deepckit-bench {command}; config_hash={cfg.config_hash()}; "
            "units: cost=weighted squared output, time=s, deviations=max abs\n"
        )
        fh.write(",".join(header) + "\n")
        for row in rows:
            cells = [
                f"{v:.17g}" if isinstance(v, float) else str(v) for v in row
            ]
            fh.write(",".join(cells) + "\n")


# ---------------------------------------------------------------------------
# equivalence certification
# ---------------------------------------------------------------------------

EQUIVALENCE_TOLERANCES = {
    "fact1": 1e-6,
    "theorem2": 1e-5,
    "theorem3": 1e-4,
    "theorem1": 1e-6,
}


def _deviation(sol_a, sol_b, with_sigma: bool) -> tuple[float, float, float]:
    du = float(np.max(np.abs(sol_a.u - sol_b.u)))
    dy = float(np.max(np.abs(sol_a.y_pred - sol_b.y_pred)))
    ds = (
        float(np.max(np.abs(sol_a.sigma_y - sol_b.sigma_y))) if with_sigma else 0.0
    )
    return du, dy, ds


def _instance_scale(lib, online, spec) -> float:
    """Spectral norm of the assembled quadratic term, for scaling lambda2."""
    from . import qp as qp_mod

    red = qp_mod.assemble_reduced(
        lib.up, lib.yp, lib.uf, lib.yf,
        online.u_ini, online.y_ini,
        spec.r_bar(), spec.q_bar(), spec.y_ref_vec(),
        lambda_y=spec.lambda_y,
    )
    return max(1.0, float(np.linalg.norm(red.qp.p_mat, 2)) / 2.0)


def cmd_equivalence(cfg: ExperimentConfig) -> tuple[Path, bool]:
    """Certify the cross-variant agreement regimes; nonzero exit on violation.

    Four regimes are run on identical seeded instances: noise-free data with
    both regularizers off and the slack suppressed (all variants against the
    model-based controller), the hybrid/svd pair for any positive ridge, the
    large-ridge regime adding the projected-library variant, and the
    projected-library variant against the least-squares subspace predictor.
    """
    plant = _make_plant(cfg)
    out_dir = Path(cfg.out_dir)
    cfg.echo(out_dir)
    rows = []
    all_ok = True

    def record(regime, pair, du, dy, ds, tolerance):
        nonlocal all_ok
        ok = max(du, dy, ds) <= tolerance
        all_ok = all_ok and ok
        rows.append((regime, pair, du, dy, ds, tolerance, int(ok)))

    # regime 1: noise-free, lambda1 = lambda2 = 0, slack suppressed
    spec_f1 = _make_spec(cfg, plant)
    spec_f1.lambda1 = 0.0
    spec_f1.lambda2 = 0.0
    spec_f1.lambda_y = 1e14  # slack suppression; keeps the modeling gap << 1e-6
    tol_f1 = EQUIVALENCE_TOLERANCES["fact1"]
    cert = dict(tol=1e-11, max_iter=200, accept_tol=1e-9)
    n_fact1 = min(cfg.trials, 3)
    for trial in range(n_fact1):
        lib, online, x_true = make_instance(
            plant,
            T=cfg.T, t_ini=cfg.t_ini, n_horizon=cfg.n_horizon,
            noise_var=0.0,
            u_lo=cfg.u_min, u_hi=cfg.u_max,
            seed=cfg.seed + trial, x0_scale=cfg.x0_scale,
            excitation_scale=cfg.excitation_scale,
        )
        caches: dict = {}
        try:
            sols = {
                "ground-truth": va.solve_ground_truth(
                    _gt_plant(cfg, plant), x_true, spec_f1, **cert
                )
            }
            for name in ("basic", "hybrid", "svd", "ddspc", "svd-iter"):
                sols[name] = _solve_variant(name, lib, online, spec_f1, cfg, caches, **cert)
        except va.VariantError as err:
            record(f"fact1[{trial}]", f"{err.variant} failed", np.inf, np.inf, np.inf, tol_f1)
            continue
        names = list(sols)
        for i, a in enumerate(names):
            for b in names[i + 1:]:
                du, dy, ds = _deviation(sols[a], sols[b], with_sigma=False)
                record(f"fact1[{trial}]", f"{a}|{b}", du, dy, ds, tol_f1)

    # noisy instances shared by the remaining regimes
    noisy = [
        make_instance(
            plant,
            T=cfg.T, t_ini=cfg.t_ini, n_horizon=cfg.n_horizon,
            noise_var=cfg.noise_var,
            u_lo=cfg.u_min, u_hi=cfg.u_max,
            seed=cfg.seed + trial, x0_scale=cfg.x0_scale,
            excitation_scale=cfg.excitation_scale,
        )
        for trial in range(cfg.trials)
    ]

    # regime 2: lambda1 = 0, any lambda2 > 0 -- hybrid vs svd
    spec_t2 = _make_spec(cfg, plant)
    spec_t2.lambda1 = 0.0
    spec_t2.lambda2 = 30.0
    spec_t2.lambda_y = 100.0
    tol_t2 = EQUIVALENCE_TOLERANCES["theorem2"]
    for trial, (lib, online, _) in enumerate(noisy):
        caches = {}
        opts2 = dict(tol=1e-10, max_iter=200, accept_tol=1e-8)
        try:
            sol_h = va.solve_hybrid(lib, online, spec_t2, **opts2)
            sol_s = _solve_variant("svd", lib, online, spec_t2, cfg, caches, **opts2)
        except va.VariantError as err:
            record(f"theorem2[{trial}]", f"{err.variant} failed", np.inf, np.inf, np.inf, tol_t2)
            continue
        du, dy, ds = _deviation(sol_h, sol_s, with_sigma=True)
        record(f"theorem2[{trial}]", "hybrid|svd", du, dy, ds, tol_t2)

    # regime 3: large lambda2 adds the projected-library variant
    tol_t3 = EQUIVALENCE_TOLERANCES["theorem3"]
    for trial, (lib, online, _) in enumerate(noisy):
        spec_t3 = _make_spec(cfg, plant)
        spec_t3.lambda1 = 0.0
        spec_t3.lambda_y = 100.0
        spec_t3.lambda2 = 1e4 * _instance_scale(lib, online, spec_t3)
        spec_dd = _make_spec(cfg, plant)
        spec_dd.lambda1 = 0.0
        spec_dd.lambda2 = 0.0
        spec_dd.lambda_y = 100.0
        caches = {}
        opts3 = dict(tol=1e-11, max_iter=200, accept_tol=1e-7)
        try:
            sols3 = {
                "hybrid": va.solve_hybrid(lib, online, spec_t3, **opts3),
                "svd": _solve_variant("svd", lib, online, spec_t3, cfg, caches, **opts3),
                "ddspc": _solve_variant("ddspc", lib, online, spec_dd, cfg, caches, **opts3),
            }
        except va.VariantError as err:
            record(f"theorem3[{trial}]", f"{err.variant} failed", np.inf, np.inf, np.inf, tol_t3)
            continue
        names3 = list(sols3)
        for i, a in enumerate(names3):
            for b in names3[i + 1:]:
                du, dy, ds = _deviation(sols3[a], sols3[b], with_sigma=True)
                record(f"theorem3[{trial}]", f"{a}|{b}", du, dy, ds, tol_t3)

    # regime 4: projected library vs least-squares subspace predictor
    spec_t1 = _make_spec(cfg, plant)
    spec_t1.lambda1 = 0.0
    spec_t1.lambda2 = 0.0
    spec_t1.lambda_y = 100.0
    tol_t1 = EQUIVALENCE_TOLERANCES["theorem1"]
    for trial, (lib, online, _) in enumerate(noisy):
        h1 = va.stack_past_inputs(lib)
        if numeric_rank(h1) < h1.shape[0]:
            record(f"theorem1[{trial}]", "H1 rank-deficient", np.inf, np.inf, np.inf, tol_t1)
            continue
        caches = {}
        opts1 = dict(tol=1e-11, max_iter=200, accept_tol=1e-9)
        try:
            sol_d = _solve_variant("ddspc", lib, online, spec_t1, cfg, caches, **opts1)
            sol_c = va.solve_classical_spc(lib, online, spec_t1, **opts1)
        except va.VariantError as err:
            record(f"theorem1[{trial}]", f"{err.variant} failed", np.inf, np.inf, np.inf, tol_t1)
            continue
        du, dy, ds = _deviation(sol_d, sol_c, with_sigma=True)
        record(f"theorem1[{trial}]", "ddspc|spc", du, dy, ds, tol_t1)

    path = out_dir / "equivalence.csv"
    _write_csv(
        path, cfg, "equivalence",
        ["regime", "pair", "max_du", "max_dy", "max_dsigma", "tolerance", "pass"],
        rows,
    )
    return path, all_ok


# ---------------------------------------------------------------------------
# Monte Carlo benchmark
# ---------------------------------------------------------------------------

def _run_trials(cfg: ExperimentConfig, plant, spec, variant_names):
    """Per-trial realized costs and solve times for each variant plus ground truth."""
    gt_model = _gt_plant(cfg, plant)
    costs = {name: [] for name in ("ground-truth", *variant_names)}
    times = {name: [] for name in costs}
    failures = {name: 0 for name in costs}
    first_traj: dict = {}
    for trial in range(cfg.trials):
        lib, online, x_true = make_instance(
            plant,
            T=cfg.T, t_ini=cfg.t_ini, n_horizon=cfg.n_horizon,
            noise_var=cfg.noise_var,
            u_lo=cfg.u_min, u_hi=cfg.u_max,
            seed=cfg.seed + trial, x0_scale=cfg.x0_scale,
            excitation_scale=cfg.excitation_scale,
        )
        caches: dict = {}
        opts = dict(tol=1e-9, max_iter=150, accept_tol=1e-6)
        for name in costs:
            t0 = time.perf_counter()
            try:
                if name == "ground-truth":
                    sol = va.solve_ground_truth(gt_model, x_true, spec, **opts)
                else:
                    sol = _solve_variant(name, lib, online, spec, cfg, caches, **opts)
            except va.VariantError:
                failures[name] += 1
                costs[name].append(_FAIL_SENTINEL)
                times[name].append(time.perf_counter() - t0)
                continue
            times[name].append(time.perf_counter() - t0)
            try:
                cost = va.realized_cost(plant, x_true, sol.u, spec)
            except ValueError:  # true plant diverged under the planned inputs
                failures[name] += 1
                cost = _FAIL_SENTINEL
            costs[name].append(cost)
            if trial == 0 and np.isfinite(cost):
                first_traj[name] = _realized_outputs(plant, x_true, sol.u, spec)
    return costs, times, failures, first_traj


def _realized_outputs(plant, x_true, u_applied, spec) -> np.ndarray:
    """True output sequence under the applied inputs (for trajectory plots)."""
    u_seq = np.asarray(u_applied, dtype=float).reshape(spec.n_horizon, spec.m)
    y_seq = np.empty((spec.n_horizon, spec.p))
    if isinstance(plant, NonlinearPlant):
        x = np.asarray(x_true, dtype=float).reshape(2)
        for k in range(spec.n_horizon):
            y_seq[k] = x
            x = lv_step(plant, x, u_seq[k, 0])
    else:
        x = np.asarray(x_true, dtype=float).reshape(plant.n)
        for k in range(spec.n_horizon):
            x, y_seq[k] = step_linear(plant, x, u_seq[k])
    return y_seq


def _aggregate(costs, times, failures, trials) -> list[BenchRow]:
    gt_mean = mean_val([c for c in costs["ground-truth"] if np.isfinite(c)])
    rows = []
    for name in costs:
        mean = mean_val([c for c in costs[name] if np.isfinite(c)])
        if np.isfinite(mean) and np.isfinite(gt_mean) and gt_mean != 0.0:
            rate = 100.0 * (mean - gt_mean) / gt_mean
        else:
            rate = float("nan")
        rows.append(
            BenchRow(
                variant=name,
                mean_cost=mean,
                increase_rate_pct=rate,
                mean_time_s=mean_val(times[name]),
                trials=trials,
                failures=failures[name],
            )
        )
    return rows


def mean_val(vals) -> float:
    return float(np.mean(vals)) if vals else float("nan")


def cmd_benchmark(cfg: ExperimentConfig) -> tuple[Path, list[BenchRow]]:
    """Monte Carlo realized-cost comparison across variants (plus ground truth).

    Writes ``benchmark.csv`` (deterministic), ``timings.csv`` (wall-clock,
    excluded from the determinism guarantee), and a representative open-loop
    trajectory overlay as SVG.
    """
    plant = _make_plant(cfg)
    spec = _make_spec(cfg, plant)
    out_dir = Path(cfg.out_dir)
    cfg.echo(out_dir)
    costs, times, failures, first_traj = _run_trials(cfg, plant, spec, cfg.variants)
    rows = _aggregate(costs, times, failures, cfg.trials)
    path = out_dir / "benchmark.csv"
    _write_csv(
        path, cfg, "benchmark",
        ["variant", "mean_cost", "increase_rate_pct", "trials", "failures"],
        [(r.variant, r.mean_cost, r.increase_rate_pct, r.trials, r.failures) for r in rows],
    )
    _write_csv(
        out_dir / "timings.csv", cfg, "benchmark",
        ["variant", "mean_time_s"],
        [(r.variant, r.mean_time_s) for r in rows],
    )
    channel = min(1, spec.p - 1)
    series = [
        (name, np.arange(spec.n_horizon, dtype=float), traj[:, channel])
        for name, traj in first_traj.items()
    ]
    emit_svg(
        series,
        out_dir / "trajectory.svg",
        title=f"open-loop output channel {channel + 1} (trial 0)",
        x_label="step",
        y_label="output",
    )
    return path, rows


# ---------------------------------------------------------------------------
# hyperparameter sweep
# ---------------------------------------------------------------------------

def cmd_sweep(cfg: ExperimentConfig, lambda1_grid, lambda2_grid) -> Path:
    """Realized cost per (variant, lambda1, lambda2) cell on one fixed seeded instance.

    The slack weight is pinned at 100; variants without one of the knobs are
    still evaluated on every cell (their cost is constant along that axis).
    Failures are recorded as NaN sentinels.
    """
    lambda1_grid = [float(v) for v in lambda1_grid]
    lambda2_grid = [float(v) for v in lambda2_grid]
    if not lambda1_grid or not lambda2_grid:
        raise ValueError("lambda grids must be nonempty")
    plant = _make_plant(cfg)
    out_dir = Path(cfg.out_dir)
    cfg.echo(out_dir)
    lib, online, x_true = make_instance(
        plant,
        T=cfg.T, t_ini=cfg.t_ini, n_horizon=cfg.n_horizon,
        noise_var=cfg.noise_var,
        u_lo=cfg.u_min, u_hi=cfg.u_max,
        seed=cfg.seed, x0_scale=cfg.x0_scale,
        excitation_scale=cfg.excitation_scale,
    )
    caches: dict = {}
    rows = []
    for name in cfg.variants:
        for lam1 in lambda1_grid:
            for lam2 in lambda2_grid:
                spec = _make_spec(cfg, plant)
                spec.lambda1 = lam1
                spec.lambda2 = lam2
                spec.lambda_y = 100.0
                try:
                    sol = _solve_variant(
                        name, lib, online, spec, cfg, caches,
                        tol=1e-9, max_iter=150, accept_tol=1e-6,
                    )
                    cost = va.realized_cost(plant, x_true, sol.u, spec)
                except (va.VariantError, ValueError):
                    cost = _FAIL_SENTINEL
                rows.append((name, lam1, lam2, cost))
    path = out_dir / "sweep.csv"
    _write_csv(
        path, cfg, "sweep",
        ["variant", "lambda1", "lambda2", "realized_cost"], rows,
    )
    return path


# ---------------------------------------------------------------------------
# nonlinearity sweep
# ---------------------------------------------------------------------------

def cmd_nonlinearity(cfg: ExperimentConfig, eps_list) -> Path:
    """Monte Carlo benchmark on the interpolated error dynamics for each eps.

    Uses the nonlinear-study parameter block (T=300, horizon 60, past window
    4, Q=I, R=0.5 I, inputs in [-20, 20], lambdas (300, 100, 1e4), denoiser
    model order 2) regardless of the config's plant-specific values; trials,
    seed, and noise variance come from the config.  The ground-truth row uses
    the linearized model (exact at eps=1, a fixed-linearization baseline
    below).
    """
    eps_list = [float(e) for e in eps_list]
    if not eps_list or any(not 0.0 <= e <= 1.0 for e in eps_list):
        raise ValueError("eps values must lie in [0, 1]")
    out_dir = Path(cfg.out_dir)
    rows = []
    base = replace(
        cfg,
        plant="lotka-volterra",
        T=300,
        t_ini=4,
        n_horizon=60,
        lambda1=300.0,
        lambda2=100.0,
        lambda_y=1e4,
        q_scale=1.0,
        r_scale=0.5,
        u_min=-20.0,
        u_max=20.0,
        slra_order=2,
        excitation_scale=0.1,
    )
    base.echo(out_dir)
    for eps in eps_list:
        cfg_eps = replace(base, eps=eps)
        plant = _make_plant(cfg_eps)
        spec = _make_spec(cfg_eps, plant)
        costs, _times, failures, _ = _run_trials(cfg_eps, plant, spec, cfg_eps.variants)
        for name in costs:
            vals = [c for c in costs[name] if np.isfinite(c)]
            rows.append((eps, name, mean_val(vals), len(vals), failures[name]))
    path = out_dir / "nonlinearity.csv"
    _write_csv(
        path, base, "nonlinearity",
        ["eps", "variant", "mean_cost", "completed", "failures"], rows,
    )
    return path


# ---------------------------------------------------------------------------
# SVG emission
# ---------------------------------------------------------------------------

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)


def emit_svg(series, path, title: str = "", x_label: str = "", y_label: str = "") -> None:
    """Write a standalone SVG line chart: axes, ticks, legend, one polyline per series.

    ``series`` is an iterable of ``(name, x, y)`` with finite, equal-length
    arrays.  An empty list still yields a valid SVG with axes only.
    """
    width, height = 800.0, 500.0
    ml, mr, mt, mb = 70.0, 170.0, 45.0, 55.0
    plot_w = width - ml - mr
    plot_h = height - mt - mb

    cleaned = []
    for name, xs, ys in series:
        xs = np.asarray(xs, dtype=float).ravel()
        ys = np.asarray(ys, dtype=float).ravel()
        if xs.size != ys.size:
            raise ValueError(f"series '{name}' has mismatched lengths")
        if xs.size and not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise ValueError(f"series '{name}' contains non-finite values")
        cleaned.append((str(name), xs, ys))

    if any(xs.size for _, xs, _ in cleaned):
        x_min = min(float(xs.min()) for _, xs, _ in cleaned if xs.size)
        x_max = max(float(xs.max()) for _, xs, _ in cleaned if xs.size)
        y_min = min(float(ys.min()) for _, _, ys in cleaned if ys.size)
        y_max = max(float(ys.max()) for _, _, ys in cleaned if ys.size)
    else:
        x_min, x_max, y_min, y_max = 0.0, 1.0, 0.0, 1.0
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_max = y_min + 1.0

    def sx(v):
        return ml + (v - x_min) / (x_max - x_min) * plot_w

    def sy(v):
        return mt + (y_max - v) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0f}" '
        f'height="{height:.0f}" viewBox="0 0 {width:.0f} {height:.0f}">',
        f'<rect x="0" y="0" width="{width:.0f}" height="{height:.0f}" fill="white"/>',
        f'<line x1="{ml:.1f}" y1="{mt + plot_h:.1f}" x2="{ml + plot_w:.1f}" '
        f'y2="{mt + plot_h:.1f}" stroke="black"/>',
        f'<line x1="{ml:.1f}" y1="{mt:.1f}" x2="{ml:.1f}" y2="{mt + plot_h:.1f}" '
        'stroke="black"/>',
    ]
    if title:
        parts.append(
            f'<text x="{ml + plot_w / 2:.1f}" y="{mt - 15:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="15">{title}</text>'
        )
    if x_label:
        parts.append(
            f'<text x="{ml + plot_w / 2:.1f}" y="{height - 12:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{x_label}</text>'
        )
    if y_label:
        parts.append(
            f'<text x="18" y="{mt + plot_h / 2:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13" '
            f'transform="rotate(-90 18 {mt + plot_h / 2:.1f})">{y_label}</text>'
        )
    for frac in np.linspace(0.0, 1.0, 5):
        xv = x_min + frac * (x_max - x_min)
        yv = y_min + frac * (y_max - y_min)
        parts.append(
            f'<line x1="{sx(xv):.1f}" y1="{mt + plot_h:.1f}" x2="{sx(xv):.1f}" '
            f'y2="{mt + plot_h + 5:.1f}" stroke="black"/>'
            f'<text x="{sx(xv):.1f}" y="{mt + plot_h + 20:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{xv:.4g}</text>'
        )
        parts.append(
            f'<line x1="{ml - 5:.1f}" y1="{sy(yv):.1f}" x2="{ml:.1f}" y2="{sy(yv):.1f}" '
            f'stroke="black"/>'
            f'<text x="{ml - 9:.1f}" y="{sy(yv) + 4:.1f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{yv:.4g}</text>'
        )
    for i, (name, xs, ys) in enumerate(cleaned):
        color = _PALETTE[i % len(_PALETTE)]
        if xs.size:
            pts = " ".join(f"{sx(x):.3f},{sy(y):.3f}" for x, y in zip(xs, ys))
            parts.append(
                f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                f'points="{pts}"/>'
            )
        ly = mt + 18 + 20 * i
        parts.append(
            f'<line x1="{ml + plot_w + 12:.1f}" y1="{ly:.1f}" '
            f'x2="{ml + plot_w + 36:.1f}" y2="{ly:.1f}" stroke="{color}" '
            'stroke-width="2"/>'
            f'<text x="{ml + plot_w + 42:.1f}" y="{ly + 4:.1f}" '
            f'font-family="sans-serif" font-size="12">{name}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", help="JSON config file (keys mirror ExperimentConfig)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--out", dest="out_dir")
    sp.add_argument("--variants", help="comma-separated variant names")
    sp.add_argument("--lambda1", type=float)
    sp.add_argument("--lambda2", type=float)
    sp.add_argument("--lambday", dest="lambda_y", type=float)
    sp.add_argument("--noise-var", dest="noise_var", type=float)
    sp.add_argument("--plant", choices=("triple-mass-spring", "lotka-volterra"))
    sp.add_argument("--eps", help="interpolation weight(s); comma list for nonlinearity")


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        with open(args.config, "r", encoding="ascii") as fh:
            values.update(json.load(fh))
    for key in (
        "seed", "trials", "out_dir", "lambda1", "lambda2", "lambda_y",
        "noise_var", "plant",
    ):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if args.variants:
        values["variants"] = tuple(v.strip() for v in args.variants.split(","))
    if args.eps and args.command != "nonlinearity":
        values["eps"] = float(args.eps)
    return ExperimentConfig(**values)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="deepckit-bench",
        description="Equivalence certification and cost benchmarks for the "
        "trajectory-library controller variants.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("equivalence", "certify cross-variant agreement regimes"),
        ("benchmark", "Monte Carlo realized-cost comparison"),
        ("sweep", "lambda1 x lambda2 realized-cost surface"),
        ("nonlinearity", "cost vs nonlinearity interpolation weight"),
    ):
        sp = sub.add_parser(name, help=blurb)
        _add_common(sp)
        if name == "sweep":
            sp.add_argument("--lambda1-grid", default="1e-5,1e-2,1e1,1e4")
            sp.add_argument("--lambda2-grid", default="1e-5,1e-2,1e1,1e4")
    args = parser.parse_args(argv)
    cfg = _resolve_config(args)

    if args.command == "equivalence":
        path, ok = cmd_equivalence(cfg)
        print(f"wrote {path}")
        return 0 if ok else 1
    if args.command == "benchmark":
        path, rows = cmd_benchmark(cfg)
        for row in rows:
            print(
                f"{row.variant:>14s}: mean cost {row.mean_cost:10.3f}  "
                f"(+{row.increase_rate_pct:.1f}% vs ground truth, "
                f"{row.failures} failures)"
            )
        print(f"wrote {path}")
        return 0
    if args.command == "sweep":
        grid1 = [float(v) for v in args.lambda1_grid.split(",")]
        grid2 = [float(v) for v in args.lambda2_grid.split(",")]
        path = cmd_sweep(cfg, grid1, grid2)
        print(f"wrote {path}")
        return 0
    if args.command == "nonlinearity":
        eps_list = [float(v) for v in (args.eps or "0,0.25,0.5,0.75,1").split(",")]
        path = cmd_nonlinearity(cfg, eps_list)
        print(f"wrote {path}")
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
