"""Training and evaluation drivers plus all file artifacts.

Everything a run writes is derived from (master seed, resolved config):
CSV traces, the optimizer history, weight checkpoints and run metadata.
Float cells are written with repr so outputs are byte-identical across
runs and parallelism levels; the one exception is the wallclock column of
the optimizer history, which is wall time by definition.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .cem import CemConfig, minimize
from .config import config_digest
from .dynamics import CurrentSpec, VehicleModel, model_from_dict
from .episode import (ControllerSpec, ScenarioSpec, StepRecord,
                      cumulative_stability, run_episode,
                      stability_percentages)
from .errors import ConfigError
from .lyapunov import SimilarityBasis, make_basis
from .policy import (NUM_WEIGHTS, default_state_scale, load_weights,
                     save_weights, weights_digest)
from .seeding import (CONTROLLER_CODES, PURPOSE_EVAL, PURPOSE_TRAIN,
                      SCENARIO_CODES, derive_rng, derive_seed)

logger = logging.getLogger(__name__)

HISTORY_HEADER = ["epoch", "best_cost", "mean_cost", "elite_mean_cost",
                  "wallclock_s"]

TRACE_HEADER = (
    ["step", "t"]
    + [f"eta_{n}" for n in ("x", "y", "z", "roll", "pitch", "yaw")]
    + ["cost", "V", "V_dot", "state_stable"]
    + [f"c{i}" for i in range(1, 6)]
    + ["kp_eig_min", "kp_eig_max", "ki_eig_min", "ki_eig_max",
       "kd_eig_min", "kd_eig_max", "alpha"]
    + [f"u_{i}" for i in range(1, 7)]
    + [f"u_noise_{i}" for i in range(1, 7)]
    + ["saturated", "cum_state_pct", "cum_param_pct"]
)

AGGREGATE_HEADER = ["controller", "scenario", "episodes", "j_mean", "j_std",
                    "state_pct_mean", "state_pct_std", "param_pct_mean",
                    "param_pct_std", "param1235_pct_mean", "param4_pct_mean"]


@dataclass
class RunMetadata:
    master_seed: int
    config_digest: str
    basis_seed: int
    scenario: str
    controller_id: str
    code_version: str

    def write(self, path: Path, **extra) -> None:
        payload = asdict(self)
        payload.update(extra)
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def build_vehicle(cfg: dict) -> VehicleModel:
    return model_from_dict(cfg["vehicle"])


def build_scenario(cfg: dict, name: str) -> ScenarioSpec:
    """Scenario from the config: 'train', or an eval kind
    none / sensor / actuator-current."""
    if name == "train":
        sc = cfg["scenarios"]["train"]
        return ScenarioSpec(kind="none",
                            episode_steps=sc["episode_steps"],
                            init_pose_bounds=np.asarray(sc["init_pose_bounds"]))
    ev = cfg["scenarios"]["eval"]
    common = dict(episode_steps=ev["episode_steps"],
                  init_pose_bounds=np.asarray(ev["init_pose_bounds"]))
    if name == "none":
        return ScenarioSpec(kind="none", **common)
    if name == "sensor":
        return ScenarioSpec(kind="sensor_noise",
                            sensor_noise_std=np.asarray(ev["sensor_noise_std"]),
                            **common)
    if name == "actuator-current":
        cur = ev["current"]
        return ScenarioSpec(kind="actuator_noise_with_current",
                            actuator_noise_std=np.asarray(ev["actuator_noise_std"]),
                            current=CurrentSpec(cur["v_c"], cur["h_c"], cur["j_c"]),
                            **common)
    raise ConfigError(f"unknown scenario {name!r}")


def _state_scale(cfg: dict, model: VehicleModel) -> np.ndarray:
    configured = cfg["controller"]["state_scale"]
    if configured is None:
        return default_state_scale(model)
    scale = np.asarray(configured, dtype=float)
    if scale.shape != (18,) or np.any(scale <= 0):
        raise ConfigError("controller.state_scale must be 18 positive numbers")
    return scale


def save_checkpoint(path: Path, best_weights: np.ndarray, mean: np.ndarray,
                    variance: np.ndarray, iteration: int,
                    state_scale: np.ndarray, seed: int, digest: str) -> None:
    """Weight-file payload extended with the search distribution."""
    payload = {
        "weights": list(map(float, best_weights)),
        "state_scale": list(map(float, state_scale)),
        "seed": seed,
        "config_digest": digest,
        "cem": {
            "mean": list(map(float, mean)),
            "variance": list(map(float, variance)),
            "iteration": iteration,
        },
    }
    path.write_text(json.dumps(payload))


def train(cfg: dict, out_dir: str | Path, master_seed: int | None = None,
          epochs: int | None = None, workers: int | None = None) -> dict:
    """Optimize policy weights on the training scenario; returns a summary
    with the best cost and artifact paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["rng"]["master_seed"] if master_seed is None else int(master_seed)
    n_epochs = cfg["cem"]["epochs"] if epochs is None else int(epochs)
    n_workers = cfg["cem"]["workers"] if workers is None else int(workers)
    digest = config_digest(cfg)

    model = build_vehicle(cfg)
    basis = make_basis(cfg["rng"]["basis_seed"])
    scale = _state_scale(cfg, model)
    scenario = build_scenario(cfg, "train")
    dt = cfg["controller"]["dt"]
    deterministic = cfg["controller"]["deterministic_actions"]
    u_max = cfg["controller"]["u_max"]

    def objective(weights: np.ndarray, epoch: int, candidate: int) -> float:
        spec = ControllerSpec(kind="lb_pid", weights=weights, state_scale=scale,
                              deterministic=deterministic, u_max=u_max)
        ep_seed = derive_seed(seed, PURPOSE_TRAIN, epoch, candidate)
        _, cost = run_episode(spec, scenario, model, basis, ep_seed, dt=dt,
                              record_steps=False)
        return cost

    cem_cfg = CemConfig(population_N=cfg["cem"]["population"],
                        elite_fraction_rho=cfg["cem"]["elite_fraction"],
                        noise_var=cfg["cem"]["noise_var"],
                        init_mean=np.zeros(NUM_WEIGHTS),
                        init_var=cfg["cem"]["init_var"])
    elite_n = cem_cfg.elite_count
    checkpoint_every = cfg["cem"]["checkpoint_every"]
    history_rows: list[list] = []
    t0 = time.perf_counter()

    def on_epoch(epoch, costs, state, best_so_far):
        elite_mean = float(np.sort(costs)[:elite_n].mean())
        _, running_best, mean_cost = state.history[-1]
        history_rows.append([epoch, running_best, mean_cost, elite_mean,
                             round(time.perf_counter() - t0, 3)])
        logger.info("epoch %d best %.6g mean %.6g", epoch, running_best, mean_cost)
        if checkpoint_every and epoch % checkpoint_every == 0:
            save_checkpoint(out / f"checkpoint_{epoch:04d}.json", best_so_far,
                            state.mean, state.variance, state.iteration,
                            scale, seed, digest)

    rng = derive_rng(seed, PURPOSE_TRAIN, 0)
    best_weights, state = minimize(objective, cem_cfg, n_epochs, rng,
                                   workers=n_workers, on_epoch=on_epoch)

    _write_csv(out / "history.csv", HISTORY_HEADER, history_rows)
    save_weights(out / "weights_best.json", best_weights, state_scale=scale,
                 seed=seed, config_digest=digest)
    save_checkpoint(out / "checkpoint_final.json", best_weights, state.mean,
                    state.variance, state.iteration, scale, seed, digest)
    meta = RunMetadata(master_seed=seed, config_digest=digest,
                       basis_seed=cfg["rng"]["basis_seed"], scenario="none",
                       controller_id="lb_pid", code_version=__version__)
    meta.write(out / "run_metadata.json",
               weights_digest=weights_digest(best_weights),
               epochs=n_epochs, workers=n_workers)
    best = state.history[-1][1]
    return {"best_cost": best, "weights": str(out / "weights_best.json"),
            "history": str(out / "history.csv")}


def trace_rows(records: list[StepRecord]) -> list[list]:
    """Flatten step records plus cumulative stability columns."""
    state_curve, param_curve = cumulative_stability(records)
    rows = []
    for rec, cum_s, cum_p in zip(records, state_curve, param_curve):
        rows.append(
            [rec.step, rec.t] + list(rec.eta)
            + [rec.cost, rec.V, rec.V_dot, rec.state_stable]
            + list(rec.param_flags)
            + [rec.kp_eig_min, rec.kp_eig_max, rec.ki_eig_min, rec.ki_eig_max,
               rec.kd_eig_min, rec.kd_eig_max, rec.alpha]
            + list(rec.u) + list(rec.u_noise)
            + [rec.saturated, cum_s, cum_p])
    return rows


def write_trace(path: Path, records: list[StepRecord]) -> None:
    _write_csv(path, TRACE_HEADER, trace_rows(records))


def _controller_specs(cfg: dict, weights_path: str | Path | None,
                      model: VehicleModel) -> list[ControllerSpec]:
    """With trained weights: the learned controller plus the baseline for
    comparison.  Without: the baseline alone."""
    ctl = cfg["controller"]
    naive = ControllerSpec(kind="naive_pid", naive_epsilon=ctl["naive_epsilon"],
                           u_max=ctl["u_max"])
    if weights_path is None:
        return [naive]
    weights, scale, _ = load_weights(weights_path)
    lb = ControllerSpec(kind="lb_pid", weights=weights, state_scale=scale,
                        deterministic=ctl["deterministic_actions"],
                        u_max=ctl["u_max"])
    return [lb, naive]


def _mean(vals: list[float]) -> float:
    with np.errstate(invalid="ignore"):
        return float(np.mean(vals)) if vals else math.nan


def _std(vals: list[float]) -> float:
    with np.errstate(invalid="ignore"):
        return float(np.std(vals)) if vals else math.nan


def evaluate(cfg: dict, out_dir: str | Path, scenario_name: str,
             weights_path: str | Path | None = None,
             episodes: int | None = None,
             master_seed: int | None = None, workers: int = 1) -> dict:
    """Run evaluation episodes for one scenario and write traces, the
    aggregate table and plots.  Returns the aggregate rows keyed by
    controller.  Episodes may run concurrently; each derives its own RNG
    stream, so the artifacts do not depend on the parallelism level."""
    from . import plots  # deferred: matplotlib import is slow

    if scenario_name not in SCENARIO_CODES:
        raise ConfigError(f"unknown scenario {scenario_name!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg["rng"]["master_seed"] if master_seed is None else int(master_seed)
    n_episodes = cfg["scenarios"]["eval"]["episodes"] if episodes is None \
        else int(episodes)
    digest = config_digest(cfg)

    model = build_vehicle(cfg)
    basis = make_basis(cfg["rng"]["basis_seed"])
    scenario = build_scenario(cfg, scenario_name)
    dt = cfg["controller"]["dt"]
    specs = _controller_specs(cfg, weights_path, model)

    aggregate_rows = []
    summary = {}
    for spec in specs:
        def _one(ep: int):
            ep_seed = derive_seed(seed, PURPOSE_EVAL,
                                  SCENARIO_CODES[scenario_name],
                                  CONTROLLER_CODES[spec.kind], ep)
            return run_episode(spec, scenario, model, basis, ep_seed, dt=dt)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_one, range(n_episodes)))
        else:
            results = [_one(ep) for ep in range(n_episodes)]

        costs, state_pcts, param_pcts = [], [], []
        pcts_1235, pcts_4 = [], []
        for ep, (records, cost) in enumerate(results):
            write_trace(out / f"trace_{spec.kind}_{scenario_name}_ep{ep:03d}.csv",
                        records)
            costs.append(cost)
            if len(records) >= 2:
                s_pct, p_pct = stability_percentages(records)
                state_pcts.append(s_pct)
                param_pcts.append(p_pct)
                pcts_1235.append(stability_percentages(records, (0, 1, 2, 4))[1])
                pcts_4.append(stability_percentages(records, (3,))[1])

        row = [spec.kind, scenario_name, n_episodes,
               _mean(costs), _std(costs),
               _mean(state_pcts), _std(state_pcts),
               _mean(param_pcts), _std(param_pcts),
               _mean(pcts_1235), _mean(pcts_4)]
        aggregate_rows.append(row)
        summary[spec.kind] = dict(zip(AGGREGATE_HEADER, row))
        logger.info("%s on %s: J = %.6g +- %.3g, state %.1f%%, param %.1f%%",
                    spec.kind, scenario_name, row[3], row[4], row[5], row[7])

    _write_csv(out / "aggregate.csv", AGGREGATE_HEADER, aggregate_rows)
    controller_id = "+".join(spec.kind for spec in specs)
    meta = RunMetadata(master_seed=seed, config_digest=digest,
                       basis_seed=cfg["rng"]["basis_seed"],
                       scenario=scenario_name, controller_id=controller_id,
                       code_version=__version__)
    extra = {"episodes": n_episodes}
    if weights_path is not None:
        weights, _, _ = load_weights(weights_path)
        extra["weights_digest"] = weights_digest(weights)
    meta.write(out / "run_metadata.json", **extra)
    plots.plot_eval_dir(out, out)
    return summary
