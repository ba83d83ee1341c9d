"""Square-tiled surfaces: strata, the integer shear/rotate action, orbits,
and homology-cocycle Lyapunov spectra.

Permutations act on the right (i followed by sigma is sigma[i]); the
commutator convention for cone angles is sigma_h sigma_v sigma_h^{-1}
sigma_v^{-1}.  The generator action is

    T: (sh, sv) -> (sh, sv sh^{-1})        S: (sh, sv) -> (sv^{-1}, sh)

with inverses accordingly.  The homology cocycle composes the exact integer
chain maps of these moves along return words of the modular-surface
geodesic flow, one increment per unit time, driving the orbit graph of the
surface (the coset space of its stabilizer).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .engine import CocycleIncrement, Trajectory, derive_seed, random_base_point
from .homology import (
    IntMatrix,
    SquareComplexHomology,
    imat_identity,
    imat_mul,
    imat_pow,
    imat_vec,
    move_basis_change,
)
from .oseledets import Spectrum, lyapunov_spectrum
from .sl2 import SL2Z, BasePoint, flow_geodesic, identity_basepoint

__all__ = [
    "Origami",
    "StratumData",
    "OrbitData",
    "stratum",
    "sl2z_act",
    "canonical_form",
    "veech_orbit",
    "homology_action",
    "kz_spectrum",
    "exponent_family_experiment",
    "parse_origami",
    "format_origami",
    "l_shaped_origami",
    "orbit_edges_csv",
]

GENERATORS = ("S", "T", "S^-1", "T^-1")


def _invert(sigma: tuple[int, ...]) -> tuple[int, ...]:
    inv = [0] * len(sigma)
    for i, img in enumerate(sigma):
        inv[img] = i
    return tuple(inv)


def _compose(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    """Right-action composition: i -> b[a[i]] (a first, then b)."""
    return tuple(b[a[i]] for i in range(len(a)))


@dataclass(frozen=True)
class Origami:
    """A transitive permutation pair encoding a square-tiled surface."""

    n: int
    sigma_h: tuple[int, ...]
    sigma_v: tuple[int, ...]

    def __post_init__(self):
        for name, sigma in (("sigma_h", self.sigma_h), ("sigma_v", self.sigma_v)):
            if sorted(sigma) != list(range(self.n)):
                raise ValueError(f"{name} is not a permutation of 0..{self.n - 1}")
        seen = {0}
        stack = [0]
        while stack:
            i = stack.pop()
            for j in (self.sigma_h[i], self.sigma_v[i], self.sigma_h.index(i), self.sigma_v.index(i)):
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        if len(seen) != self.n:
            raise ValueError("permutation pair is not transitive (disconnected surface)")

    def __str__(self) -> str:
        return format_origami(self)


@dataclass(frozen=True)
class StratumData:
    beta: tuple[int, ...]
    genus: int

    def __post_init__(self):
        if any(b < 1 for b in self.beta):
            raise ValueError("zero orders must be positive")
        if sum(self.beta) != 2 * self.genus - 2:
            raise ValueError("zero orders must sum to 2g-2")

    def __str__(self) -> str:
        return "H(" + ",".join(map(str, self.beta)) + ")" if self.beta else "H()"


def stratum(origami: Origami) -> StratumData:
    """Cone-point data: commutator cycle lengths minus one, zeros dropped."""
    sh, sv = origami.sigma_h, origami.sigma_v
    comm = _compose(_compose(_compose(sh, sv), _invert(sh)), _invert(sv))
    seen = [False] * origami.n
    orders = []
    for i in range(origami.n):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = comm[j]
            length += 1
        if length > 1:
            orders.append(length - 1)
    orders.sort(reverse=True)
    total = sum(orders)
    if total % 2 != 0:
        raise ArithmeticError("zero orders must sum to an even number")
    return StratumData(tuple(orders), genus=total // 2 + 1)


def sl2z_act(origami: Origami, generator: str) -> Origami:
    sh, sv = origami.sigma_h, origami.sigma_v
    if generator == "T":
        return Origami(origami.n, sh, _compose(sv, _invert(sh)))
    if generator == "T^-1":
        return Origami(origami.n, sh, _compose(sv, sh))
    if generator == "S":
        return Origami(origami.n, _invert(sv), sh)
    if generator == "S^-1":
        return Origami(origami.n, sv, _invert(sh))
    raise ValueError(f"unknown generator {generator!r}; use one of {GENERATORS}")


def canonical_form(origami: Origami) -> tuple[Origami, tuple[int, ...]]:
    """Lexicographically minimal relabeling, with the relabeling map.

    Squares are renamed in breadth-first discovery order (horizontal
    neighbor first, then vertical) from every possible start square; the
    smallest resulting pair wins.  Returns (canonical, tau) with
    tau[old] = new.
    """
    n, sh, sv = origami.n, origami.sigma_h, origami.sigma_v
    best: tuple[tuple[int, ...], tuple[int, ...]] | None = None
    best_tau: tuple[int, ...] | None = None
    for start in range(n):
        tau = [-1] * n
        tau[start] = 0
        order = [start]
        head = 0
        count = 1
        while head < len(order):
            cur = order[head]
            head += 1
            for nxt in (sh[cur], sv[cur]):
                if tau[nxt] < 0:
                    tau[nxt] = count
                    count += 1
                    order.append(nxt)
        new_sh = tuple(tau[sh[i]] for i in np.argsort(tau))
        new_sv = tuple(tau[sv[i]] for i in np.argsort(tau))
        pair = (new_sh, new_sv)
        if best is None or pair < best:
            best = pair
            best_tau = tuple(tau)
    assert best is not None and best_tau is not None
    return Origami(n, best[0], best[1]), best_tau


class OrbitData:
    """The modular-group orbit of an origami with exact homology transitions.

    Nodes are canonical forms; for each node and generator the target node,
    the relabeling, and the induced integer matrix on H_1 (node basis to
    target basis) are cached.
    """

    def __init__(self, origami: Origami, max_size: int = 10_000):
        if max_size < 1:
            raise ValueError("max_size must be positive")
        start, _ = canonical_form(origami)
        self.nodes: list[Origami] = [start]
        index = {(start.sigma_h, start.sigma_v): 0}
        self.transitions: dict[tuple[int, str], int] = {}
        self._relabelings: dict[tuple[int, str], tuple[int, ...]] = {}
        frontier = [0]
        while frontier:
            node_id = frontier.pop(0)
            node = self.nodes[node_id]
            for gen in GENERATORS:
                moved = sl2z_act(node, gen)
                canon, tau = canonical_form(moved)
                key = (canon.sigma_h, canon.sigma_v)
                if key not in index:
                    if len(self.nodes) >= max_size:
                        raise RuntimeError(f"orbit exceeds max_size={max_size}")
                    index[key] = len(self.nodes)
                    self.nodes.append(canon)
                    frontier.append(index[key])
                self.transitions[(node_id, gen)] = index[key]
                self._relabelings[(node_id, gen)] = tau
        self.homology = [
            SquareComplexHomology(o.n, o.sigma_h, o.sigma_v) for o in self.nodes
        ]
        self.genus = stratum(start).genus
        if any(h.betti != 2 * self.genus for h in self.homology):
            raise ArithmeticError("betti number disagrees with the stratum genus")
        self._step_cache: dict[tuple[int, str], tuple[int, IntMatrix]] = {}

    @property
    def size(self) -> int:
        return len(self.nodes)

    def node_index(self, origami: Origami) -> int:
        canon, _ = canonical_form(origami)
        for k, node in enumerate(self.nodes):
            if node.sigma_h == canon.sigma_h and node.sigma_v == canon.sigma_v:
                return k
        raise KeyError("origami not in this orbit")

    def step(self, node_id: int, gen: str) -> tuple[int, IntMatrix]:
        """Target node and the H_1 coordinate change of one generator move."""
        cached = self._step_cache.get((node_id, gen))
        if cached is not None:
            return cached
        target = self.transitions[(node_id, gen)]
        node = self.nodes[node_id]
        canon = self.nodes[target]
        mat = move_basis_change(
            node.n, node.sigma_h, node.sigma_v, gen,
            canon.sigma_h, canon.sigma_v, self._relabelings[(node_id, gen)],
            src=self.homology[node_id], dst=self.homology[target],
        )
        self._step_cache[(node_id, gen)] = (target, mat)
        return target, mat

    def apply_letter(self, node_id: int, gen: str, power: int) -> tuple[int, IntMatrix]:
        """Node and H_1 matrix of gen^power, with cycle exponentiation.

        Large powers (deep cusp excursions give T-powers of cusp width
        scale) are handled by detecting the node cycle and powering its
        matrix exactly.
        """
        if power == 0:
            return node_id, imat_identity(2 * self.genus)
        letter = gen if power > 0 else (gen + "^-1" if len(gen) == 1 else gen[0])
        count = abs(power)
        # walk until the node path cycles
        path_nodes = [node_id]
        path_mats: list[IntMatrix] = []
        cur = node_id
        acc = imat_identity(2 * self.genus)
        for k in range(count):
            cur2, mat = self.step(cur, letter)
            acc = imat_mul(mat, acc)
            path_mats.append(mat)
            cur = cur2
            if cur == node_id and k + 1 < count:
                cycle_len = k + 1
                reps, rem = divmod(count, cycle_len)
                acc = imat_pow(acc, reps)
                for _ in range(rem):
                    cur2, mat = self.step(cur, letter)
                    acc = imat_mul(mat, acc)
                    cur = cur2
                return cur, acc
            path_nodes.append(cur)
        return cur, acc


def veech_orbit(origami: Origami, max_size: int) -> tuple[list[Origami], dict[tuple[int, str], int]]:
    """BFS closure under the generator moves, canonical forms as nodes."""
    data = OrbitData(origami, max_size=max_size)
    return data.nodes, data.transitions


def homology_action(origami: Origami, path: list[str], orbit: OrbitData | None = None) -> np.ndarray:
    """Integer H_1 matrix along a closed generator path in the orbit graph."""
    data = orbit if orbit is not None else OrbitData(origami)
    node = data.node_index(origami)
    start = node
    mat = imat_identity(2 * data.genus)
    for gen in path:
        if gen not in GENERATORS:
            raise ValueError(f"unknown generator {gen!r}")
        node, step = data.step(node, gen)
        mat = imat_mul(step, mat)
    if node != start:
        raise ValueError("path is not closed in the orbit graph")
    return np.array(mat, dtype=object)


def _symplectic_defect(mat: np.ndarray, j: IntMatrix) -> bool:
    m = [[int(v) for v in row] for row in mat]
    jm = imat_mul([list(r) for r in j], m)
    mtjm = imat_mul([list(r) for r in zip(*m)], jm)
    return mtjm == [list(r) for r in j]


def kz_spectrum(
    origami: Origami,
    T: float,
    seed: int,
    mode: str = "flow",
    max_orbit: int = 10_000,
    n_trajectories: int = 4,
    orbit: OrbitData | None = None,
) -> Spectrum:
    """Lyapunov spectrum of the homology cocycle over the origami's orbit.

    In flow mode the modular-surface geodesic flow runs at a Haar-like
    start; every return-word letter moves the orbit node and multiplies the
    exact integer H_1 step matrix, one increment per unit time.  The
    word-walk mode draws i.i.d. uniform generator letters instead.
    """
    data = orbit if orbit is not None else OrbitData(origami, max_size=max_orbit)
    dim = 2 * data.genus
    n_steps = max(1, int(round(T / n_trajectories)))
    marker = identity_basepoint()
    trajectories = []
    for i in range(n_trajectories):
        node = data.node_index(origami)
        increments: list[CocycleIncrement] = []
        if mode == "flow":
            x = random_base_point(derive_seed(seed, 500 + i), SL2Z)
            for _ in range(n_steps):
                x2, word = flow_geodesic(x, 1.0, SL2Z)
                mat = imat_identity(dim)
                for gen, power in reversed(word.letters):
                    node, step = data.apply_letter(node, gen, power)
                    mat = imat_mul(step, mat)
                increments.append(
                    CocycleIncrement(
                        BasePoint(x.rep), BasePoint(x2.rep), word,
                        np.array(mat, dtype=float), 1.0,
                    )
                )
                x = x2
        elif mode == "word-walk":
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(900 + i,))
            )
            from .sl2 import GroupWord

            for _ in range(n_steps):
                gen = ("S", "T")[int(rng.integers(0, 2))]
                power = 1 if rng.integers(0, 2) == 0 else -1
                node, mat = data.apply_letter(node, gen, power)
                increments.append(
                    CocycleIncrement(
                        marker, marker, GroupWord(((gen, power),)),
                        np.array(mat, dtype=float), 1.0,
                    )
                )
        else:
            raise ValueError(f"unknown mode {mode!r}")
        trajectories.append(
            Trajectory(derive_seed(seed, i), marker, tuple(increments), "geodesic")
        )
    return lyapunov_spectrum(trajectories, dim)


def exponent_family_experiment(
    origamis: list[Origami], T: float, seed: int
) -> list[dict]:
    """kz_spectrum per origami plus cross-family dispersion of the spectra.

    All inputs must lie in one stratum; per-origami failures are reported
    row-wise rather than aborting the family.
    """
    if not origamis:
        return []
    strata = [stratum(o) for o in origamis]
    if len({s.beta for s in strata}) > 1:
        raise ValueError("origamis span more than one stratum")
    rows = []
    for k, o in enumerate(origamis):
        row: dict = {"origami": format_origami(o), "stratum": str(strata[k])}
        try:
            spec = kz_spectrum(o, T, derive_seed(seed, k))
            row["exponents"] = spec.raw_exponents
            row["stderr"] = spec.stderr
            row["second_exponent"] = spec.raw_exponents[1]
        except Exception as exc:  # pragma: no cover - per-row reporting
            row["error"] = str(exc)
        rows.append(row)
    seconds = [r["second_exponent"] for r in rows if "second_exponent" in r]
    if seconds:
        spread = max(seconds) - min(seconds)
        for r in rows:
            r["family_second_exponent_spread"] = spread
    return rows


# -- text formats ------------------------------------------------------------


def _cycles_of(sigma: tuple[int, ...]) -> str:
    seen = [False] * len(sigma)
    parts = []
    for i in range(len(sigma)):
        if seen[i]:
            continue
        cycle = [i]
        seen[i] = True
        j = sigma[i]
        while j != i:
            cycle.append(j)
            seen[j] = True
            j = sigma[j]
        if len(cycle) > 1:
            parts.append("(" + " ".join(str(c + 1) for c in cycle) + ")")
    return "".join(parts) if parts else "()"


def format_origami(origami: Origami) -> str:
    return f"{origami.n}; {_cycles_of(origami.sigma_h)}; {_cycles_of(origami.sigma_v)}"


def _parse_cycles(text: str, n: int) -> tuple[int, ...]:
    sigma = list(range(n))
    for group in re.findall(r"\(([^()]*)\)", text):
        entries = [int(tok) - 1 for tok in re.split(r"[,\s]+", group.strip()) if tok]
        if not entries:
            continue
        for a, b in zip(entries, entries[1:] + entries[:1]):
            if not (0 <= a < n):
                raise ValueError(f"cycle entry {a + 1} out of range 1..{n}")
            sigma[a] = b
    return tuple(sigma)


def parse_origami(text: str) -> Origami:
    """Parse the line format 'n; sigma_h cycles; sigma_v cycles'."""
    parts = [p.strip() for p in text.split(";")]
    if len(parts) != 3:
        raise ValueError("expected 'n; sigma_h; sigma_v'")
    n = int(parts[0])
    return Origami(n, _parse_cycles(parts[1], n), _parse_cycles(parts[2], n))


def l_shaped_origami(a: int, b: int) -> Origami:
    """L-shaped surface: a horizontal strip of a squares, a vertical strip of
    b squares, sharing the corner square.  Genus 2 when a, b >= 2."""
    if a < 2 or b < 2:
        raise ValueError("both arms need at least 2 squares")
    n = a + b - 1
    sh = list(range(n))
    for i in range(a):
        sh[i] = (i + 1) % a
    sv = list(range(n))
    column = [0] + list(range(a, n))
    for idx, sq in enumerate(column):
        sv[sq] = column[(idx + 1) % len(column)]
    return Origami(n, tuple(sh), tuple(sv))


def orbit_edges_csv(origami: Origami, max_size: int) -> str:
    """Edge list of the orbit graph: source, generator, target."""
    nodes, transitions = veech_orbit(origami, max_size)
    lines = ["source,generator,target"]
    for (src, gen), dst in sorted(transitions.items()):
        lines.append(f"{src},{gen},{dst}")
    return "\n".join(lines) + "\n"
