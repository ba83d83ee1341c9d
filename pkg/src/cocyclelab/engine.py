"""Trajectory generation: suspension-cocycle increments over flows and walks.

Increments are kept per step and never collapsed into one long product; the
spectrum estimators re-orthonormalize as they consume them, so conditioning
stays bounded even for horizons of 1e5.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .reps import Representation, rho_of_word
from .sl2 import (
    BasePoint,
    GroupWord,
    Lattice,
    ReductionError,
    basepoint_from_upper_half_plane,
    flow_geodesic,
    flow_horocycle,
    identity_basepoint,
    in_fundamental_domain,
)

__all__ = [
    "CocycleIncrement",
    "Trajectory",
    "FlowKind",
    "cocycle_matrix",
    "sample_trajectory",
    "random_base_point",
    "derive_seed",
    "dump_trajectory",
    "WORD_LETTER_BUDGET",
]

FlowKind = Literal["geodesic", "horocycle+", "horocycle-", "word-walk"]

WORD_LETTER_BUDGET = 10**4


@dataclass(frozen=True)
class CocycleIncrement:
    base_from: BasePoint
    base_to: BasePoint
    word: GroupWord
    matrix: np.ndarray
    dt: float


@dataclass(frozen=True)
class Trajectory:
    seed: int
    start: BasePoint
    increments: tuple[CocycleIncrement, ...]
    flow_kind: FlowKind
    valid: bool = True
    truncation_fraction: float = 0.0

    @property
    def total_time(self) -> float:
        return sum(inc.dt for inc in self.increments)

    @property
    def end(self) -> BasePoint:
        return self.increments[-1].base_to if self.increments else self.start


def cocycle_matrix(
    x: BasePoint, t: float, rep: Representation, lattice: Lattice
) -> tuple[np.ndarray, BasePoint]:
    """Fiber matrix of the geodesic flow over time t, and the moved point."""
    x2, word = flow_geodesic(x, t, lattice)
    return rho_of_word(rep, word), x2


def _flow_step(
    x: BasePoint, dt: float, flow_kind: FlowKind, lattice: Lattice
) -> tuple[BasePoint, GroupWord]:
    if flow_kind == "geodesic":
        return flow_geodesic(x, dt, lattice)
    if flow_kind == "horocycle+":
        return flow_horocycle(x, dt, "+", lattice)
    if flow_kind == "horocycle-":
        return flow_horocycle(x, dt, "-", lattice)
    raise ValueError(f"unknown flow kind {flow_kind!r}")


def sample_trajectory(
    x0: BasePoint,
    n_steps: int,
    dt: float,
    flow_kind: FlowKind,
    rep: Representation,
    lattice: Lattice,
    seed: int,
) -> Trajectory:
    """Generate a chained sequence of cocycle increments.

    Flow kinds step the base by dt per increment.  The word-walk kind draws
    i.i.d. uniform generators and inverses (one letter per increment) and
    keeps a formal identity marker as the base point.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if flow_kind != "word-walk" and dt <= 0:
        raise ValueError("dt must be positive for flow kinds")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    increments: list[CocycleIncrement] = []
    if flow_kind == "word-walk":
        marker = identity_basepoint()
        names = lattice.generator_names
        for _ in range(n_steps):
            gen = names[int(rng.integers(0, len(names)))]
            power = 1 if rng.integers(0, 2) == 0 else -1
            word = GroupWord(((gen, power),))
            increments.append(
                CocycleIncrement(marker, marker, word, rho_of_word(rep, word), 1.0)
            )
        return Trajectory(seed, marker, tuple(increments), flow_kind)
    x = x0
    for k in range(n_steps):
        try:
            x2, word = _flow_step(x, dt, flow_kind, lattice)
        except ReductionError:
            return Trajectory(
                seed, x0, tuple(increments), flow_kind,
                valid=False, truncation_fraction=1.0 - k / n_steps,
            )
        if word.letter_count() > WORD_LETTER_BUDGET:
            return Trajectory(
                seed, x0, tuple(increments), flow_kind,
                valid=False, truncation_fraction=1.0 - k / n_steps,
            )
        # per-increment words carry the history; dragging the accumulated
        # word through every step would cost O(n^2) over long trajectories
        x2 = BasePoint(x2.rep)
        increments.append(CocycleIncrement(x, x2, word, rho_of_word(rep, word), dt))
        x = x2
    return Trajectory(seed, x0, tuple(increments), flow_kind)


def random_base_point(seed: int, lattice: Lattice) -> BasePoint:
    """Haar-like sample: Moebius point from dx dy / y^2 on a truncated domain,
    frame angle uniform.  Deterministic in the seed."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if lattice.mode == "sl2z":
        x_half, y_lo, y_hi = 0.5, math.sqrt(3.0) / 2.0, 10.0
    else:
        x_half, y_lo, y_hi = 1.0, 0.2, 10.0
    for _ in range(10_000):
        x = float(rng.uniform(-x_half, x_half))
        # inverse CDF of density ~ 1/y^2 on [y_lo, y_hi]
        u = float(rng.uniform(0.0, 1.0))
        y = 1.0 / (1.0 / y_lo - u * (1.0 / y_lo - 1.0 / y_hi))
        z = complex(x, y)
        if in_fundamental_domain(z, lattice, tol=0.0):
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            return basepoint_from_upper_half_plane(z, theta)
    raise RuntimeError("rejection sampling failed to hit the fundamental domain")


def derive_seed(master_seed: int, index: int) -> int:
    """Per-task seed stream: independent, deterministic in (master, index)."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def _format_word(word: GroupWord) -> str:
    return str(word)


def dump_trajectory(traj: Trajectory, fh) -> None:
    """One increment per line: index, dt, word, then matrix entries row-major."""
    for k, inc in enumerate(traj.increments):
        entries = " ".join(f"{v:.17e}" for v in inc.matrix.ravel())
        fh.write(f"{k} {inc.dt:.17e} {_format_word(inc.word)} {entries}\n")
