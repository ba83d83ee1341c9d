"""Experiment dispatch with deterministic, reproducible outputs.

Each experiment writes a JSON summary plus CSV detail files; a run record
is appended to ``runlog.jsonl``.  Result blobs are byte-identical across
reruns with the same config and seed, including under a worker pool:
per-task seeds derive from (master seed, task index) and merges happen in
index order, so thread count cannot change any output byte.  Timestamps
live only in the run log.
"""

from __future__ import annotations

import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .config import ExperimentConfig, canonical_text, config_hash
from .engine import derive_seed, dump_trajectory, random_base_point, sample_trajectory
from .oseledets import (
    Spectrum,
    backward_flag,
    flag_equivariance_defect,
    forward_flag,
    lyapunov_spectrum,
    subspace_distance,
    top_space_E1,
)
from .origami import (
    OrbitData,
    kz_spectrum,
    orbit_edges_csv,
    parse_origami,
    stratum,
)
from .probes import (
    e1_concentration,
    estimate_inert_space,
    furstenberg_lambda1,
    measure_Qj,
    unique_ergodicity_gap,
)
from .reps import parse_rep_spec
from .sl2 import get_lattice

__all__ = ["RunRecord", "run_experiment", "NumericalFailure"]


class NumericalFailure(RuntimeError):
    """Raised when an experiment completes with failed convergence flags."""


@dataclass(frozen=True)
class RunRecord:
    config_hash: str
    experiment: str
    started: float
    finished: float
    version: str
    results: dict
    outputs: list[str]


def _json_bytes(data) -> bytes:
    return json.dumps(data, sort_keys=True, indent=2, allow_nan=True).encode() + b"\n"


def _spectrum_dict(spec: Spectrum) -> dict:
    return {
        "exponents": list(spec.exponents),
        "multiplicities": list(spec.multiplicities),
        "stderr": list(spec.stderr),
        "raw_exponents": list(spec.raw_exponents),
        "horizon": spec.horizon,
        "converged": spec.converged,
        "truncation_fraction": spec.truncation_fraction,
        "exponent_sum": spec.exponent_sum(),
    }


def _spectrum_csv(spec: Spectrum) -> str:
    lines = ["exponent,multiplicity,stderr,horizon,truncation_fraction"]
    for e, m, s in zip(spec.exponents, spec.multiplicities, spec.stderr):
        lines.append(
            f"{e:.17g},{m},{s:.17g},{spec.horizon:.17g},{spec.truncation_fraction:.17g}"
        )
    return "\n".join(lines) + "\n"


def _trajectory_task(args) -> tuple:
    (index, lattice_mode, rep_spec, n_steps, dt, flow_kind, seed) = args
    lattice = get_lattice(lattice_mode)
    rep = parse_rep_spec(rep_spec, lattice)
    x0 = random_base_point(derive_seed(seed, 100 + index), lattice)
    traj = sample_trajectory(
        x0, n_steps, dt, flow_kind, rep, lattice, derive_seed(seed, 200 + index)
    )
    return index, traj


def _run_spectrum(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    total_time = config.get("spectrum.total_time")
    n_traj = config.get("spectrum.n_trajectories")
    dt = config.get("spectrum.dt")
    flow = config.get("spectrum.flow")
    n_steps = max(1, int(round(total_time / (n_traj * dt))))
    tasks = [
        (i, config.get("lattice.mode"), config.get("representation.rep"),
         n_steps, dt, flow, config.seed)
        for i in range(n_traj)
    ]
    if config.threads > 1:
        with ProcessPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(_trajectory_task, tasks))
    else:
        results = [_trajectory_task(t) for t in tasks]
    results.sort(key=lambda pair: pair[0])
    trajectories = [t for _, t in results]
    spec = lyapunov_spectrum(trajectories, rep.dim)
    outputs = []
    csv_path = os.path.join(outdir, "spectrum.csv")
    with open(csv_path, "w") as fh:
        fh.write(_spectrum_csv(spec))
    outputs.append(csv_path)
    if config.get("spectrum.dump_trajectories"):
        for k, traj in enumerate(trajectories):
            path = os.path.join(outdir, f"trajectory-{k}.txt")
            with open(path, "w") as fh:
                dump_trajectory(traj, fh)
            outputs.append(path)
    summary = {"spectrum": _spectrum_dict(spec), "flow": flow, "dim": rep.dim}
    if not spec.converged:
        summary["failure"] = "spectrum did not converge (stderr above threshold)"
    return summary, outputs


def _run_flags(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    horizon = config.get("flags.horizon")
    n_points = config.get("flags.n_points")
    param = config.get("flags.element_param")
    trajs = [
        sample_trajectory(
            random_base_point(derive_seed(config.seed, 300 + i), lattice),
            2000, 1.0, "geodesic", rep, lattice, derive_seed(config.seed, 400 + i))
        for i in range(4)
    ]
    spec = lyapunov_spectrum(trajs, rep.dim)
    rows = []
    pairings = [
        ("backward", 1, ("horocycle+", param)),
        ("backward", min(2, spec.n_blocks), ("geodesic", param)),
        ("forward", min(2, spec.n_blocks), ("horocycle+", param)),
        ("forward", min(2, spec.n_blocks), ("horocycle-", param)),
    ]
    for kind, level, element in pairings:
        defects = []
        for i in range(n_points):
            x = random_base_point(derive_seed(config.seed, 500 + i), lattice)
            try:
                defects.append(
                    flag_equivariance_defect(x, kind, level, element, horizon, rep, lattice, spec)
                )
            except Exception:
                continue
        rows.append({
            "flag": kind, "level": level, "element": list(element),
            "median_defect": float(np.median(defects)) if defects else None,
            "n_ok": len(defects),
        })
    csv_path = os.path.join(outdir, "flag-defects.csv")
    with open(csv_path, "w") as fh:
        fh.write("flag,level,element_kind,element_param,median_defect,n_ok\n")
        for r in rows:
            fh.write(
                f"{r['flag']},{r['level']},{r['element'][0]},{r['element'][1]},"
                f"{'' if r['median_defect'] is None else format(r['median_defect'], '.17g')},{r['n_ok']}\n"
            )
    return {"spectrum": _spectrum_dict(spec), "defects": rows}, [csv_path]


def _run_furstenberg(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    est, err = furstenberg_lambda1(
        rep, lattice, config.get("furstenberg.n_trajectories"),
        config.get("furstenberg.horizon"), config.seed,
    )
    trajs = [
        sample_trajectory(
            random_base_point(derive_seed(config.seed, 600 + i), lattice),
            2000, 1.0, "geodesic", rep, lattice, derive_seed(config.seed, 700 + i))
        for i in range(4)
    ]
    spec = lyapunov_spectrum(trajs, rep.dim)
    frame_top = spec.raw_exponents[0]
    tol = max(0.05, 3.0 * (err + spec.stderr[0]))
    summary = {
        "sigma_average": est,
        "stderr": err,
        "frame_lambda1": frame_top,
        "agreement_tolerance": tol,
        "agrees": bool(abs(est - frame_top) <= tol),
    }
    return summary, []


def _run_inert(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    level = config.get("inert.level")
    rows = []
    rng_points = range(config.get("inert.n_points"))
    for i in rng_points:
        x = random_base_point(derive_seed(config.seed, 800 + i), lattice)
        rng = np.random.default_rng(np.random.SeedSequence(derive_seed(config.seed, 900 + i)))
        v = rng.standard_normal(rep.dim)
        frac = measure_Qj(
            x, v, level, config.get("inert.n_samples"), config.get("inert.angle_tol"),
            config.get("inert.horizon"), rep, lattice, derive_seed(config.seed, 1000 + i),
        )
        inert = estimate_inert_space(
            x, level, rep, lattice, budget=config.get("inert.budget"),
            T=config.get("inert.horizon"), seed=derive_seed(config.seed, 1100 + i),
        )
        rows.append({"point": i, "ball_fraction": frac, "inert_dim": int(inert.shape[1])})
    csv_path = os.path.join(outdir, "inert.csv")
    with open(csv_path, "w") as fh:
        fh.write("point,ball_fraction,inert_dim\n")
        for r in rows:
            fh.write(f"{r['point']},{r['ball_fraction']:.17g},{r['inert_dim']}\n")
    dichotomy = all(r["ball_fraction"] <= 0.05 or r["ball_fraction"] >= 0.95 for r in rows)
    return {"rows": rows, "level": level, "dichotomy_holds": dichotomy}, [csv_path]


def _run_unique_ergodicity(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    horizon = config.get("unique-ergodicity.horizon")
    n_starts = config.get("unique-ergodicity.n_starts")
    gap = unique_ergodicity_gap(rep, lattice, n_starts, horizon, seed=config.seed)
    gap2 = unique_ergodicity_gap(rep, lattice, n_starts, 2 * horizon, seed=config.seed)
    summary = {
        "spread": gap, "spread_doubled_horizon": gap2,
        "horizon": horizon, "n_starts": n_starts,
        "decreases": bool(gap2 <= gap),
    }
    return summary, []


def _run_e1_concentration(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    lattice = get_lattice(config.get("lattice.mode"))
    rep = parse_rep_spec(config.get("representation.rep"), lattice)
    curve = e1_concentration(
        rep, lattice, config.get("e1-concentration.n_starts"),
        config.get("e1-concentration.horizon"), config.seed,
        pull_horizon=config.get("e1-concentration.pull_horizon"),
    )
    csv_path = os.path.join(outdir, "e1-decay.csv")
    with open(csv_path, "w") as fh:
        fh.write("t,median,q25,q75\n")
        for t, med, q25, q75 in curve:
            fh.write(f"{t:.17g},{med:.17g},{q25:.17g},{q75:.17g}\n")
    summary = {
        "final_median": curve[-1][1] if curve else None,
        "initial_median": curve[0][1] if curve else None,
        "rows": len(curve),
    }
    return summary, [csv_path]


def _run_origami(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    origami = parse_origami(config.get("origami.surface"))
    strat = stratum(origami)
    spec = kz_spectrum(
        origami, config.get("origami.total_time"), config.seed,
        mode=config.get("origami.mode"), max_orbit=config.get("origami.max_orbit"),
        n_trajectories=config.get("origami.n_trajectories"),
    )
    csv_path = os.path.join(outdir, "kz-spectrum.csv")
    with open(csv_path, "w") as fh:
        fh.write(_spectrum_csv(spec))
    summary = {
        "surface": config.get("origami.surface"),
        "stratum": str(strat),
        "genus": strat.genus,
        "spectrum": _spectrum_dict(spec),
        "symmetry_defect": max(
            abs(a + b) for a, b in zip(spec.raw_exponents, reversed(spec.raw_exponents))
        ),
    }
    return summary, [csv_path]


def _run_orbit(config: ExperimentConfig, outdir: str) -> tuple[dict, list[str]]:
    origami = parse_origami(config.get("orbit.surface"))
    data = OrbitData(origami, max_size=config.get("orbit.max_size"))
    csv_path = os.path.join(outdir, "orbit-edges.csv")
    with open(csv_path, "w") as fh:
        fh.write(orbit_edges_csv(origami, config.get("orbit.max_size")))
    summary = {
        "surface": config.get("orbit.surface"),
        "orbit_size": data.size,
        "genus": data.genus,
        "nodes": [str(node) for node in data.nodes],
    }
    return summary, [csv_path]


_DISPATCH = {
    "spectrum": _run_spectrum,
    "flags": _run_flags,
    "furstenberg": _run_furstenberg,
    "inert": _run_inert,
    "unique-ergodicity": _run_unique_ergodicity,
    "e1-concentration": _run_e1_concentration,
    "origami": _run_origami,
    "orbit": _run_orbit,
}


def run_experiment(config: ExperimentConfig, outdir: str | None = None) -> RunRecord:
    """Run the configured experiment; writes outputs and appends to the log.

    Identical (config, seed) reproduce byte-identical result blobs; thread
    count does not affect them.
    """
    outdir = outdir or config.out or os.environ.get("COCYCLELAB_OUT", ".")
    os.makedirs(outdir, exist_ok=True)
    started = time.time()
    summary, outputs = _DISPATCH[config.experiment](config, outdir)
    finished = time.time()
    chash = config_hash(config)
    summary_path = os.path.join(outdir, f"{config.experiment}-summary.json")
    blob = {
        "experiment": config.experiment,
        "config_hash": chash,
        "canonical_config": canonical_text(config),
        "results": summary,
    }
    with open(summary_path, "wb") as fh:
        fh.write(_json_bytes(blob))
    outputs = [summary_path] + outputs
    record = RunRecord(chash, config.experiment, started, finished, __version__, summary, outputs)
    log_path = os.path.join(outdir, "runlog.jsonl")
    with open(log_path, "a") as fh:
        fh.write(json.dumps({
            "config_hash": chash, "experiment": config.experiment,
            "started": started, "finished": finished, "version": __version__,
            "outputs": [os.path.basename(p) for p in outputs],
        }, sort_keys=True) + "\n")
    if isinstance(summary, dict) and summary.get("failure"):
        raise NumericalFailure(str(summary["failure"]))
    return record
