"""Numerical probes of horocycle invariance and projective concentration.

These exercise the dynamical statements the workbench exists to test: the
norm-growth cocycle and the top-exponent integral formula, concentration of
upper-triangular-invariant lifts on the top projective subspace, the inert
subspace and its zero-one ball-measure dichotomy, Birkhoff-average spread
of the foliated horocycle flow, and the backward-averaging device.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .engine import (
    CocycleIncrement,
    derive_seed,
    random_base_point,
    sample_trajectory,
)
from .oseledets import (
    FlagError,
    Spectrum,
    forward_flag,
    lyapunov_spectrum,
    subspace_distance,
    top_space_E1,
    vector_subspace_distance,
)
from .reps import Representation, rho_of_word
from .sl2 import BasePoint, Lattice, flow_geodesic, flow_horocycle

__all__ = [
    "ProjectivePoint",
    "EmpiricalLift",
    "sigma",
    "evolve_projective",
    "furstenberg_lambda1",
    "e1_concentration",
    "measure_Qj",
    "estimate_inert_space",
    "unique_ergodicity_gap",
    "backward_average_lift",
    "default_test_functions",
    "lift_distance_to_top",
    "TEST_FUNCTION_FAMILY_VERSION",
    "BASE_HEIGHT_CUTOFF",
]

TEST_FUNCTION_FAMILY_VERSION = 1
BASE_HEIGHT_CUTOFF = 10.0


def _canonical_direction(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float).ravel()
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero vector has no direction")
    v = v / n
    for entry in v:
        if abs(entry) > 1e-12:
            return v if entry > 0 else -v
    return v


@dataclass(frozen=True)
class ProjectivePoint:
    """A base point with a sign-quotiented unit fiber direction."""

    base: BasePoint
    direction: np.ndarray

    @staticmethod
    def make(base: BasePoint, v: np.ndarray) -> "ProjectivePoint":
        return ProjectivePoint(base, _canonical_direction(v))


@dataclass(frozen=True)
class EmpiricalLift:
    """Weighted sample cloud standing in for a lift of the base measure."""

    samples: tuple[tuple[ProjectivePoint, float], ...]
    flow_kind: str
    horizon: float
    seed: int

    def __post_init__(self):
        total = sum(w for _, w in self.samples)
        if self.samples and abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {total}")


def sigma(increment: CocycleIncrement, p: ProjectivePoint) -> float:
    """Log norm growth of the increment on the direction of p.

    Independent of the chosen representative since the matrix is linear.
    """
    if not p.base.close_to(increment.base_from, tol=1e-6):
        raise ValueError("projective point is not based at the increment start")
    w = increment.matrix @ p.direction
    return float(np.log(np.linalg.norm(w)))


def evolve_projective(
    p: ProjectivePoint,
    flow_kind: str,
    t: float,
    rep: Representation,
    lattice: Lattice,
) -> ProjectivePoint:
    """Flow the base and map the direction by the cocycle matrix."""
    if flow_kind == "geodesic":
        base2, word = flow_geodesic(p.base, t, lattice)
    elif flow_kind == "horocycle+":
        base2, word = flow_horocycle(p.base, t, "+", lattice)
    elif flow_kind == "horocycle-":
        base2, word = flow_horocycle(p.base, t, "-", lattice)
    else:
        raise ValueError(f"unknown flow kind {flow_kind!r}")
    v = rho_of_word(rep, word) @ p.direction
    return ProjectivePoint.make(base2, v)


def _spectrum_for(
    rep: Representation, lattice: Lattice, seed: int, total_time: float | None = None
) -> Spectrum:
    total = total_time if total_time is not None else max(200.0 * rep.dim, 2000.0)
    n_traj = 4
    steps = max(1, int(total / n_traj))
    trajs = [
        sample_trajectory(
            random_base_point(derive_seed(seed, 1000 + i), lattice),
            steps, 1.0, "geodesic", rep, lattice, derive_seed(seed, 2000 + i),
        )
        for i in range(n_traj)
    ]
    return lyapunov_spectrum(trajs, rep.dim)


def furstenberg_lambda1(
    rep: Representation,
    lattice: Lattice,
    n_traj: int,
    T: float,
    seed: int,
) -> tuple[float, float]:
    """Top exponent as the time average of sigma along aligned lifts.

    Generic fiber directions are evolved under the geodesic flow; after a
    burn-in their empirical law stands in for a lift carried by the top
    projective subspace, and the unit-time sigma averages recover the top
    exponent.  Returns (estimate, block-bootstrap stderr).
    """
    spec = _spectrum_for(rep, lattice, seed)
    if not spec.is_top_simple():
        raise FlagError("top exponent is not simple; the formula needs a gap")
    burn_in = 30
    n_steps = int(T)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    per_block: list[float] = []
    for i in range(n_traj):
        x = random_base_point(derive_seed(seed, 10 + i), lattice)
        v = rng.standard_normal(rep.dim)
        p = ProjectivePoint.make(x, v)
        for _ in range(burn_in):
            p = evolve_projective(p, "geodesic", 1.0, rep, lattice)
        vals = np.empty(n_steps)
        for k in range(n_steps):
            base2, word = flow_geodesic(p.base, 1.0, lattice)
            mat = rho_of_word(rep, word)
            w = mat @ p.direction
            norm = float(np.linalg.norm(w))
            vals[k] = math.log(norm)
            p = ProjectivePoint(base2, _canonical_direction(w / norm))
        block = max(1, n_steps // 10)
        for a in range(0, n_steps - block + 1, block):
            per_block.append(float(vals[a : a + block].mean()))
    per_block_arr = np.array(per_block)
    estimate = float(per_block_arr.mean())
    boot_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(99,)))
    m = len(per_block_arr)
    boots = np.array([
        per_block_arr[boot_rng.integers(0, m, size=m)].mean() for _ in range(200)
    ])
    return estimate, float(boots.std(ddof=1))


def e1_concentration(
    rep: Representation,
    lattice: Lattice,
    n_starts: int,
    T: float,
    seed: int,
    pull_horizon: float = 40.0,
) -> list[tuple[float, float, float, float]]:
    """Median distance to the top space along discretized P-orbits.

    Starts are Haar-like bases with uniform random directions; the orbit
    alternates a unit-ball upper-horocycle step with a unit geodesic step.
    Rows are (t, median, q25, q75) of the distance between the direction and
    the estimated top space at the current base.  Failed top-space estimates
    drop the sample; the drop fraction is appended as an attribute row by
    the caller if needed.
    """
    spec = _spectrum_for(rep, lattice, seed)
    if not spec.is_top_simple():
        raise FlagError("top exponent is not simple")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_steps = int(T)
    distances = np.full((n_starts, n_steps + 1), np.nan)
    for i in range(n_starts):
        x = random_base_point(derive_seed(seed, 40 + i), lattice)
        p = ProjectivePoint.make(x, rng.standard_normal(rep.dim))
        for t in range(n_steps + 1):
            try:
                e1 = top_space_E1(p.base, rep, lattice, pull_horizon, spec,
                                  seed=derive_seed(seed, 7_000 + t))
                distances[i, t] = vector_subspace_distance(p.direction, e1)
            except FlagError:
                pass
            if t == n_steps:
                break
            s = float(rng.uniform(-1.0, 1.0))
            p = evolve_projective(p, "horocycle+", s, rep, lattice)
            p = evolve_projective(p, "geodesic", 1.0, rep, lattice)
    curve = []
    for t in range(n_steps + 1):
        col = distances[:, t]
        col = col[~np.isnan(col)]
        if col.size == 0:
            continue
        curve.append(
            (float(t), float(np.median(col)), float(np.quantile(col, 0.25)),
             float(np.quantile(col, 0.75)))
        )
    return curve


def measure_Qj(
    x: BasePoint,
    v: np.ndarray,
    j: int,
    n_samples: int,
    angle_tol: float,
    T: float,
    rep: Representation,
    lattice: Lattice,
    seed: int,
    spectrum: Spectrum | None = None,
) -> float:
    """Fraction of the unit horocycle ball carrying v into the slow flag.

    Samples u = u+^s with s uniform in [-1,1], moves v by the cocycle matrix
    of u, and tests containment in the forward flag level j at the moved
    base within angle_tol.  Failed flag estimates are dropped from the
    denominator.
    """
    if j < 1:
        raise ValueError("flag level must be >= 1")
    if j == 1:
        return 1.0
    spec = spectrum if spectrum is not None else _spectrum_for(rep, lattice, seed)
    if j > spec.n_blocks:
        raise ValueError(f"level {j} exceeds the {spec.n_blocks} spectral blocks")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    hits = 0
    used = 0
    for _ in range(n_samples):
        s = float(rng.uniform(-1.0, 1.0))
        base2, word = flow_horocycle(x, s, "+", lattice)
        w = rho_of_word(rep, word) @ v
        try:
            flag = forward_flag(base2, rep, lattice, T, spec)
        except FlagError:
            continue
        used += 1
        if vector_subspace_distance(w, flag.level(j)) <= angle_tol:
            hits += 1
    if used == 0:
        raise FlagError("all flag estimates failed")
    return hits / used


def estimate_inert_space(
    x: BasePoint,
    j: int,
    rep: Representation,
    lattice: Lattice,
    budget: int = 40,
    T: float = 40.0,
    seed: int = 0,
    spectrum: Spectrum | None = None,
    rank_tol: float = 1e-6,
) -> np.ndarray:
    """Common subspace carried into the level-j forward flag by ball samples.

    Accumulates, over sampled u in the unit ball, the orthogonal-complement
    constraints pulled back through the cocycle matrix, and returns the
    numerical null space (d x k, possibly k = 0).
    """
    if j < 1:
        raise ValueError("flag level must be >= 1")
    dim = rep.dim
    if j == 1:
        return np.eye(dim)
    spec = spectrum if spectrum is not None else _spectrum_for(rep, lattice, seed)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    rows: list[np.ndarray] = []
    for _ in range(budget):
        s = float(rng.uniform(-1.0, 1.0))
        base2, word = flow_horocycle(x, s, "+", lattice)
        mat = rho_of_word(rep, word)
        try:
            flag = forward_flag(base2, rep, lattice, T, spec)
        except FlagError:
            continue
        basis = flag.level(j)
        # v must satisfy (I - P) mat v = 0 with P the projection onto the flag
        proj = basis @ basis.T
        rows.append((np.eye(dim) - proj) @ mat)
    if not rows:
        raise FlagError("all flag estimates failed")
    stacked = np.vstack(rows)
    _, svals, vt = np.linalg.svd(stacked)
    scale = svals[0] if svals.size else 1.0
    null_mask = np.concatenate([svals, np.zeros(dim - len(svals))]) <= rank_tol * max(scale, 1.0)
    return vt[null_mask.nonzero()[0], :].T if null_mask.any() else np.zeros((dim, 0))


def _height_bump(y: float) -> float:
    if y >= BASE_HEIGHT_CUTOFF:
        return 0.0
    r = y / BASE_HEIGHT_CUTOFF
    return (1.0 - r * r) ** 2


def default_test_functions(dim: int) -> list[Callable[[BasePoint, np.ndarray], float]]:
    """Versioned family: quadratic forms in the direction times a height bump."""
    forms: list[np.ndarray] = []
    for i in range(min(dim, 3)):
        q = np.zeros((dim, dim))
        q[i, i] = 1.0
        forms.append(q)
    if dim >= 2:
        q = np.zeros((dim, dim))
        q[0, 1] = q[1, 0] = 0.5
        forms.append(q)

    def make(qm: np.ndarray):
        def f(base: BasePoint, v: np.ndarray) -> float:
            return float(v @ qm @ v) * _height_bump(base.image().imag)

        return f

    return [make(q) for q in forms]


def unique_ergodicity_gap(
    rep: Representation,
    lattice: Lattice,
    n_starts: int,
    T: float,
    test_fns: Sequence[Callable[[BasePoint, np.ndarray], float]] | None = None,
    seed: int = 0,
) -> float:
    """Spread of horocycle Birkhoff averages over independent starts.

    Each start evolves under unit upper-horocycle steps for T steps; the
    result is the maximum over test functions of (max - min) of the time
    averages across starts.  A truncation fraction above 20% flags the run
    by raising.
    """
    if n_starts < 1:
        raise ValueError("need at least one start")
    fns = list(test_fns) if test_fns is not None else default_test_functions(rep.dim)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_steps = int(T)
    averages = np.zeros((n_starts, len(fns)))
    truncated = 0
    for i in range(n_starts):
        x = random_base_point(derive_seed(seed, 300 + i), lattice)
        p = ProjectivePoint.make(x, rng.standard_normal(rep.dim))
        sums = np.zeros(len(fns))
        steps_done = 0
        for _ in range(n_steps):
            for k, f in enumerate(fns):
                sums[k] += f(p.base, p.direction)
            try:
                p = evolve_projective(p, "horocycle+", 1.0, rep, lattice)
            except Exception:
                truncated += 1
                break
            steps_done += 1
        averages[i] = sums / max(steps_done, 1)
    if truncated / n_starts > 0.2:
        raise RuntimeError(f"truncation fraction {truncated / n_starts:.2f} exceeds 20%")
    spreads = averages.max(axis=0) - averages.min(axis=0)
    return float(spreads.max())


def backward_average_lift(
    rep: Representation,
    lattice: Lattice,
    start_lift: EmpiricalLift,
    T_avg: float,
    seed: int,
) -> EmpiricalLift:
    """Average of backward-geodesic pushforwards of the cloud over [0, T_avg].

    T_avg = 0 returns the start lift unchanged.  Reduction failures drop the
    affected sample path; remaining weights are renormalized.
    """
    n = int(T_avg)
    if n == 0:
        return start_lift
    out: list[tuple[ProjectivePoint, float]] = []
    for p0, w in start_lift.samples:
        cloud = [p0]
        p = p0
        ok = True
        for _ in range(n):
            try:
                p = evolve_projective(p, "geodesic", -1.0, rep, lattice)
            except Exception:
                ok = False
                break
            cloud.append(p)
        if not ok:
            continue
        share = w / len(cloud)
        out.extend((q, share) for q in cloud)
    if not out:
        raise RuntimeError("all sample paths failed")
    total = sum(w for _, w in out)
    out = [(q, w / total) for q, w in out]
    return EmpiricalLift(tuple(out), "backward-average", float(n), seed)


def lift_distance_to_top(
    lift: EmpiricalLift,
    rep: Representation,
    lattice: Lattice,
    pull_horizon: float = 40.0,
    spectrum: Spectrum | None = None,
    seed: int = 0,
) -> tuple[float, float]:
    """Weighted median and max distance of the cloud to the top space.

    Samples based above the height cutoff are discarded; the discarded mass
    is available from the returned tuple's complement to 1 if needed.
    """
    spec = spectrum if spectrum is not None else _spectrum_for(rep, lattice, seed)
    dists: list[tuple[float, float]] = []
    for p, w in lift.samples:
        if p.base.image().imag > BASE_HEIGHT_CUTOFF:
            continue
        e1 = top_space_E1(p.base, rep, lattice, pull_horizon, spec, seed=seed)
        dists.append((vector_subspace_distance(p.direction, e1), w))
    if not dists:
        raise RuntimeError("no samples below the height cutoff")
    dists.sort()
    total = sum(w for _, w in dists)
    acc = 0.0
    median = dists[-1][0]
    for d, w in dists:
        acc += w
        if acc >= total / 2:
            median = d
            break
    return median, max(d for d, _ in dists)
