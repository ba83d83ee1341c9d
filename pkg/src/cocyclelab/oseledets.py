"""Lyapunov spectra, Oseledets flags, and flag-equivariance defects.

Spectra come from orthonormal-frame evolution with a QR step after every
increment.  Flags are finite-horizon singular-subspace proxies:

* forward flag  E_>=j(x): slow right-singular subspaces of the forward
  product over [0, T];
* backward flag E_<=j(x): slow right-singular subspaces of the backward
  product over [-T, 0] (slow under backward flow = fast under forward);
* top space E_1(x): a generic frame pulled from the past, pushed to x.

Right-singular data of a product A_n ... A_1 is extracted stably by pushing
a frame through the transposes in reversed order (the product of which is
the transpose), QR-normalizing each step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .engine import CocycleIncrement, Trajectory, sample_trajectory
from .reps import Representation
from .sl2 import BasePoint, Lattice, flow_geodesic, flow_horocycle

__all__ = [
    "Spectrum",
    "Flag",
    "SpectrumError",
    "FlagError",
    "lyapunov_spectrum",
    "forward_flag",
    "backward_flag",
    "top_space_E1",
    "subspace_distance",
    "vector_subspace_distance",
    "flag_equivariance_defect",
    "geodesic_increments",
    "backward_increments",
]

CLUSTER_GAP_FLOOR = 0.05
NONCONVERGENCE_STDERR = 0.1
BOOTSTRAP_RESAMPLES = 200


class SpectrumError(RuntimeError):
    """Spectrum estimation failed (no valid data or degenerate input)."""


class FlagError(RuntimeError):
    """Flag estimation failed (horizon too short or degenerate spectrum)."""


@dataclass(frozen=True)
class Spectrum:
    """Exponent blocks in descending order with multiplicities."""

    exponents: tuple[float, ...]
    multiplicities: tuple[int, ...]
    stderr: tuple[float, ...]
    horizon: float
    raw_exponents: tuple[float, ...]
    converged: bool = True
    truncation_fraction: float = 0.0

    @property
    def dim(self) -> int:
        return sum(self.multiplicities)

    def exponent_sum(self) -> float:
        return sum(m * e for m, e in zip(self.multiplicities, self.exponents))

    def top_gap(self) -> float:
        if len(self.exponents) < 2:
            return 0.0
        return self.exponents[0] - self.exponents[1]

    def is_top_simple(self) -> bool:
        return self.multiplicities[0] == 1 and len(self.exponents) > 1

    def dims_geq(self, j: int) -> int:
        return sum(self.multiplicities[j - 1 :])

    def dims_leq(self, j: int) -> int:
        return sum(self.multiplicities[:j])

    @property
    def n_blocks(self) -> int:
        return len(self.exponents)


@dataclass(frozen=True)
class Flag:
    """Nested orthonormal subspace bases keyed by block level."""

    base: BasePoint
    kind: Literal["forward", "backward", "inert"]
    subspaces: dict[int, np.ndarray]
    exponents: tuple[float, ...]

    def level(self, j: int) -> np.ndarray:
        return self.subspaces[j]

    @property
    def levels(self) -> tuple[int, ...]:
        return tuple(sorted(self.subspaces))


def _qr_step(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q, r = np.linalg.qr(frame)
    diag = np.diag(r)
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs, np.abs(diag)


def _frame_logs(increments: Sequence[CocycleIncrement], dim: int) -> np.ndarray:
    """Per-step log diagonal growth of a full evolving orthonormal frame."""
    q = _generic_frame(dim)
    logs = np.zeros((len(increments), dim))
    for k, inc in enumerate(increments):
        q, diag = _qr_step(inc.matrix @ q)
        logs[k] = np.log(diag)
    return logs


def _block_bootstrap_stderr(logs: np.ndarray, dts: np.ndarray, n_blocks: int = 50) -> np.ndarray:
    """Stderr of the time-averaged exponents from resampled step blocks."""
    n, dim = logs.shape
    if n < 4:
        return np.full(dim, np.inf)
    size = max(1, n // n_blocks)
    edges = list(range(0, n, size))
    block_sums = np.array([logs[a : a + size].sum(axis=0) for a in edges])
    block_times = np.array([dts[a : a + size].sum() for a in edges])
    m = len(edges)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=0xB00757AB, spawn_key=(n, dim)))
    estimates = np.empty((BOOTSTRAP_RESAMPLES, dim))
    for b in range(BOOTSTRAP_RESAMPLES):
        pick = rng.integers(0, m, size=m)
        estimates[b] = block_sums[pick].sum(axis=0) / block_times[pick].sum()
    return estimates.std(axis=0, ddof=1)


def _cluster(raw: np.ndarray, stderr: np.ndarray) -> tuple[tuple, tuple, tuple]:
    gap = max(CLUSTER_GAP_FLOOR, 3.0 * float(np.max(stderr[np.isfinite(stderr)], initial=0.0)))
    blocks: list[list[int]] = [[0]]
    for i in range(1, len(raw)):
        if raw[i - 1] - raw[i] < gap:
            blocks[-1].append(i)
        else:
            blocks.append([i])
    exps = tuple(float(np.mean(raw[b])) for b in blocks)
    mults = tuple(len(b) for b in blocks)
    errs = tuple(float(np.max(stderr[b])) for b in blocks)
    return exps, mults, errs


def lyapunov_spectrum(trajectories: Sequence[Trajectory], dim: int) -> Spectrum:
    """Estimate the spectrum from one or more trajectories.

    Frames evolve with per-step QR; per-direction rates are pooled with
    time weights, deliberately keeping per-step data for the bootstrap.
    """
    valid = [t for t in trajectories if t.valid and t.increments]
    if not valid:
        raise SpectrumError("all trajectories invalid")
    total_time = sum(t.total_time for t in valid)
    if total_time < 100.0 * dim:
        raise SpectrumError(
            f"total time {total_time:.1f} below the 100*dim = {100 * dim} floor"
        )
    all_logs = []
    all_dts = []
    for t in valid:
        all_logs.append(_frame_logs(t.increments, dim))
        all_dts.append(np.array([inc.dt for inc in t.increments]))
    logs = np.concatenate(all_logs)
    dts = np.concatenate(all_dts)
    raw = logs.sum(axis=0) / dts.sum()
    order = np.argsort(-raw)
    raw = raw[order]
    stderr = _block_bootstrap_stderr(logs[:, order], dts)
    exps, mults, errs = _cluster(raw, stderr)
    truncated = [t for t in trajectories if not t.valid]
    frac = (
        sum(t.truncation_fraction for t in truncated) / len(trajectories)
        if trajectories
        else 0.0
    )
    return Spectrum(
        exponents=exps,
        multiplicities=mults,
        stderr=errs,
        horizon=float(total_time),
        raw_exponents=tuple(float(v) for v in raw),
        converged=bool(np.max(stderr) <= NONCONVERGENCE_STDERR),
        truncation_fraction=frac,
    )


def geodesic_increments(
    x: BasePoint, n: int, rep: Representation, lattice: Lattice, dt: float = 1.0
) -> list[CocycleIncrement]:
    traj = sample_trajectory(x, n, dt, "geodesic", rep, lattice, seed=0)
    if not traj.valid:
        raise FlagError("trajectory truncated while collecting increments")
    return list(traj.increments)


def backward_increments(
    x: BasePoint, n: int, rep: Representation, lattice: Lattice, dt: float = 1.0
) -> list[CocycleIncrement]:
    """Increments of the backward geodesic flow (time -dt per step)."""
    from .engine import CocycleIncrement as CI
    from .reps import rho_of_word

    out: list[CI] = []
    cur = x
    for _ in range(n):
        nxt, word = flow_geodesic(cur, -dt, lattice)
        out.append(CI(cur, nxt, word, rho_of_word(rep, word), dt))
        cur = nxt
    return out


def _generic_frame(dim: int) -> np.ndarray:
    """Fixed full orthonormal frame with no invariant coordinate alignment.

    The identity frame is non-generic for block-structured cocycles (it
    contains invariant coordinate directions exactly), which permutes the
    QR growth ordering; a fixed random rotation avoids that.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=0xF7A3E, spawn_key=(dim,)))
    q, _ = _qr_step(rng.standard_normal((dim, dim)))
    return q


def _right_singular_frame(
    increments: Sequence[CocycleIncrement], dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Orthonormal right-singular frame of the product, descending exponents.

    Pushes a frame through the transposed increments in reversed order; the
    k-th column converges to the k-th right-singular direction and the
    accumulated log growth to the k-th singular exponent.
    """
    q = _generic_frame(dim)
    logs = np.zeros(dim)
    total = 0.0
    for inc in reversed(increments):
        q, diag = _qr_step(inc.matrix.T @ q)
        logs += np.log(diag)
        total += inc.dt
    rates = logs / total
    order = np.argsort(-rates, kind="stable")
    return q[:, order], rates[order]


def _flag_from_columns(
    base: BasePoint,
    kind: Literal["forward", "backward"],
    q: np.ndarray,
    sing_exponents: np.ndarray,
    spectrum: Spectrum,
) -> Flag:
    dim = q.shape[0]
    subspaces: dict[int, np.ndarray] = {}
    n_blocks = spectrum.n_blocks
    for j in range(1, n_blocks + 1):
        size = spectrum.dims_geq(j) if kind == "forward" else spectrum.dims_leq(j)
        subspaces[j] = q[:, dim - size :].copy()
    return Flag(base, kind, subspaces, tuple(float(v) for v in sing_exponents))


def _check_gaps(sing_exponents: np.ndarray, spectrum: Spectrum, kind: str) -> None:
    """The singular exponents must separate at block boundaries.

    Forward products carry block sizes in spectrum order; backward products
    carry them reversed (their descending singular exponents are the negated
    forward ones, reversed).
    """
    mults = spectrum.multiplicities
    if kind == "backward":
        mults = tuple(reversed(mults))
    idx = 0
    cuts = []
    for m in mults[:-1]:
        idx += m
        cuts.append(idx)
    for cut in cuts:
        gap = sing_exponents[cut - 1] - sing_exponents[cut]
        if gap < 0.25 * CLUSTER_GAP_FLOOR:
            raise FlagError(
                f"horizon too short: singular gap {gap:.4f} at cut {cut} ({kind})"
            )


def forward_flag(
    x: BasePoint,
    rep: Representation,
    lattice: Lattice,
    T: float,
    spectrum: Spectrum,
) -> Flag:
    """E_>=j(x) for all block levels j, nested by construction."""
    n = max(1, int(round(T)))
    incs = geodesic_increments(x, n, rep, lattice)
    q, sing = _right_singular_frame(incs, rep.dim)
    _check_gaps(sing, spectrum, "forward")
    return _flag_from_columns(x, "forward", q, sing, spectrum)


def backward_flag(
    x: BasePoint,
    rep: Representation,
    lattice: Lattice,
    T: float,
    spectrum: Spectrum,
) -> Flag:
    """E_<=j(x): mirror of the forward flag along the backward orbit."""
    n = max(1, int(round(T)))
    incs = backward_increments(x, n, rep, lattice)
    q, sing = _right_singular_frame(incs, rep.dim)
    _check_gaps(sing, spectrum, "backward")
    return _flag_from_columns(x, "backward", q, sing, spectrum)


def top_space_E1(
    x: BasePoint,
    rep: Representation,
    lattice: Lattice,
    T: float,
    spectrum: Spectrum | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Pull-from-the-past estimate of the top Oseledets space at x.

    A generic frame of dim = multiplicity(lambda_1) is pushed from the point
    T units in the past up to x; its arriving span aligns with E_1(x) at
    rate exp(-(lambda_1 - lambda_2) T).

    The past-to-x increments are obtained as inverses of the backward
    increments from x, in reverse order.  Flowing backward and then
    re-flowing forward would not arrive at x in floating point (orbit
    separation grows exponentially); the inverse-increment form chains back
    to x exactly.
    """
    if T < 20:
        raise ValueError("pull horizon must be at least 20")
    n = int(round(T))
    incs = backward_increments(x, n, rep, lattice)
    if spectrum is None:
        logs = _frame_logs(incs, rep.dim)
        # backward rates are the negated forward ones
        raw = np.sort(-logs.sum(axis=0) / n)[::-1]
        stderr = np.full(rep.dim, 1e-6)
        exps, mults, errs = _cluster(raw, stderr)
        spectrum = Spectrum(exps, mults, errs, float(n), tuple(raw))
    if spectrum.n_blocks < 2:
        raise FlagError("degenerate spectrum: top space is ill-posed")
    m1 = spectrum.multiplicities[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    frame = rng.standard_normal((rep.dim, m1))
    frame, _ = _qr_step(frame)
    for inc in reversed(incs):
        frame, _ = _qr_step(np.linalg.solve(inc.matrix, frame))
    return frame


def subspace_distance(u: np.ndarray, v: np.ndarray) -> float:
    """Sine of the largest principal angle; 1.0 when dimensions differ."""
    u = np.atleast_2d(u.T).T
    v = np.atleast_2d(v.T).T
    if u.shape != v.shape:
        return 1.0
    qu, _ = np.linalg.qr(u)
    qv, _ = np.linalg.qr(v)
    s = np.linalg.svd(qu.T @ qv, compute_uv=False)
    smin = float(np.clip(np.min(s), -1.0, 1.0))
    return math.sqrt(max(0.0, 1.0 - smin * smin))


def vector_subspace_distance(vec: np.ndarray, basis: np.ndarray) -> float:
    """Sine of the angle between a vector and a subspace (containment test)."""
    v = vec / np.linalg.norm(vec)
    proj = basis @ (basis.T @ v)
    return float(np.linalg.norm(v - proj))


def flag_equivariance_defect(
    x: BasePoint,
    flag_kind: Literal["forward", "backward"],
    j: int,
    group_element: tuple[str, float],
    T: float,
    rep: Representation,
    lattice: Lattice,
    spectrum: Spectrum,
) -> float:
    """Distance between the pushed flag level and the flag at the moved point.

    ``group_element`` is ("geodesic", t), ("horocycle+", s) or
    ("horocycle-", s).  Lawful pairings (the diagonal on either flag, the
    upper unipotent on the backward flag, the lower on the forward flag)
    have defects vanishing with T; unlawful ones stay macroscopic unless the
    action is reducible.
    """
    kind, param = group_element
    if kind == "geodesic":
        x2, word = flow_geodesic(x, param, lattice)
    elif kind == "horocycle+":
        x2, word = flow_horocycle(x, param, "+", lattice)
    elif kind == "horocycle-":
        x2, word = flow_horocycle(x, param, "-", lattice)
    else:
        raise ValueError(f"unknown group element kind {kind!r}")
    from .reps import rho_of_word

    mat = rho_of_word(rep, word)
    estimator = forward_flag if flag_kind == "forward" else backward_flag
    flag_x = estimator(x, rep, lattice, T, spectrum)
    flag_x2 = estimator(x2, rep, lattice, T, spectrum)
    pushed = mat @ flag_x.level(j)
    return subspace_distance(pushed, flag_x2.level(j))
