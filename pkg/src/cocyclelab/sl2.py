"""SL(2,R) arithmetic, hyperbolic reduction, and the geodesic/horocycle flows.

States of the homogeneous space are stored through the right-coset picture:
a point is kept as a 2x2 representative whose Moebius image of i lies in the
chosen fundamental domain, together with the accumulated reduction word.
Flowing by a group element right-multiplies the representative by its inverse
and re-reduces; the return word handed back to callers is the step's
reduction word with every letter inverted in place.  With this bookkeeping
the return words satisfy the left cocycle law
``word(s+t, x) == word(s, flow_t x) * word(t, x)`` after free reduction.

Two lattices are supported:

* ``sanov`` (default): the free group generated by [[1,2],[0,1]] and
  [[1,0],[2,1]].  Fundamental domain: the strip |Re z| <= 1 minus the two
  disks of radius 1/2 centered at +-1/2.  Reduction alternates strip
  translations with isometric-circle inversions; every inversion strictly
  increases Im z, which forces termination.
* ``sl2z``: generators S = [[0,-1],[1,0]], T = [[1,1],[0,1]], with the
  classical domain |Re z| <= 1/2, |z| >= 1.  Reduced representatives are
  additionally sign-canonicalized (bottom row (c,d): c > 0, or c ~ 0 and
  d > 0) so that reduction is canonical in SL and not merely PSL; a flip
  contributes an S^2 = -I letter.  Without this the matrix cocycle identity
  would only hold projectively.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Iterable, Literal, Sequence

__all__ = [
    "Mat2",
    "GroupWord",
    "Lattice",
    "BasePoint",
    "ReductionError",
    "SANOV",
    "SL2Z",
    "get_lattice",
    "make_generator",
    "bruhat_factor",
    "reduce_to_fundamental_domain",
    "flow_geodesic",
    "flow_horocycle",
    "identity_basepoint",
    "basepoint_from_upper_half_plane",
    "in_fundamental_domain",
]

DET_TOL = 1e-12
DOMAIN_TOL = 1e-9
STEP_BUDGET = 10**6


class ReductionError(RuntimeError):
    """Fundamental-domain reduction did not terminate within the budget."""


@dataclass(frozen=True, slots=True)
class Mat2:
    """A 2x2 real matrix of determinant 1 (renormalized on drift)."""

    a: float
    b: float
    c: float
    d: float

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def __matmul__(self, other: "Mat2") -> "Mat2":
        a = self.a * other.a + self.b * other.c
        b = self.a * other.b + self.b * other.d
        c = self.c * other.a + self.d * other.c
        d = self.c * other.b + self.d * other.d
        det = a * d - b * c
        if abs(det - 1.0) > DET_TOL:
            r = math.sqrt(det)
            a, b, c, d = a / r, b / r, c / r, d / r
        return Mat2(a, b, c, d)

    def inv(self) -> "Mat2":
        return Mat2(self.d, -self.b, -self.c, self.a)

    def neg(self) -> "Mat2":
        return Mat2(-self.a, -self.b, -self.c, -self.d)

    def act_on_i(self) -> complex:
        """Moebius image of i under the matrix."""
        return (complex(self.b, self.a)) / (complex(self.d, self.c))

    def act(self, z: complex) -> complex:
        return (self.a * z + self.b) / (self.c * z + self.d)

    def max_abs(self) -> float:
        return max(abs(self.a), abs(self.b), abs(self.c), abs(self.d))

    def close_to(self, other: "Mat2", tol: float = 1e-9) -> bool:
        return (
            abs(self.a - other.a) <= tol
            and abs(self.b - other.b) <= tol
            and abs(self.c - other.c) <= tol
            and abs(self.d - other.d) <= tol
        )

    def rows(self) -> tuple[tuple[float, float], tuple[float, float]]:
        return ((self.a, self.b), (self.c, self.d))


IDENTITY = Mat2(1.0, 0.0, 0.0, 1.0)


def _free_reduce(letters: Iterable[tuple[str, int]]) -> tuple[tuple[str, int], ...]:
    out: list[tuple[str, int]] = []
    for gen, power in letters:
        if power == 0:
            continue
        if out and out[-1][0] == gen:
            merged = out[-1][1] + power
            out.pop()
            if merged != 0:
                out.append((gen, merged))
        else:
            out.append((gen, power))
    return tuple(out)


@dataclass(frozen=True, slots=True)
class GroupWord:
    """A freely reduced word in lattice generators.

    Letters are (generator-id, integer power) pairs; the leftmost letter is
    the leftmost factor of the group element.
    """

    letters: tuple[tuple[str, int], ...] = ()

    @staticmethod
    def from_letters(letters: Iterable[tuple[str, int]]) -> "GroupWord":
        return GroupWord(_free_reduce(letters))

    def __mul__(self, other: "GroupWord") -> "GroupWord":
        return GroupWord(_free_reduce(self.letters + other.letters))

    def inverse(self) -> "GroupWord":
        return GroupWord(tuple((g, -p) for g, p in reversed(self.letters)))

    def letterwise_inverse(self) -> "GroupWord":
        """Invert every letter, keeping the order.

        This is the automorphism sending each generator to its inverse
        (conjugation by diag(1,-1) for the lattices used here); unlike plain
        inversion it preserves concatenation order, hence cocycle laws.
        """
        return GroupWord(tuple((g, -p) for g, p in self.letters))

    def is_identity(self) -> bool:
        return not self.letters

    def letter_count(self) -> int:
        return len(self.letters)

    def syllable_length(self) -> int:
        return sum(abs(p) for _, p in self.letters)

    def __str__(self) -> str:
        if not self.letters:
            return "e"
        return ".".join(f"{g}^{p}" if p != 1 else g for g, p in self.letters)


IDENTITY_WORD = GroupWord()


class Lattice:
    """A finite-covolume subgroup of SL(2,Z) with a reduction algorithm.

    Immutable after construction; instances are shared constants.
    """

    def __init__(self, mode: str, generators: dict[str, Mat2]):
        self.mode = mode
        self.generators = dict(generators)
        self.generator_names = tuple(sorted(generators))
        for name, g in generators.items():
            if abs(g.det() - 1.0) > 0:
                raise ValueError(f"generator {name} must have determinant exactly 1")
            for row in g.rows():
                for entry in row:
                    if entry != int(entry):
                        raise ValueError(f"generator {name} must have integer entries")

    def __repr__(self) -> str:
        return f"Lattice(mode={self.mode!r})"

    def letter_matrix(self, gen: str, power: int) -> Mat2:
        """Exact matrix of a generator power (closed forms, no roundoff)."""
        if self.mode == "sl2z":
            if gen == "T":
                return Mat2(1.0, float(power), 0.0, 1.0)
            if gen == "S":
                k = power % 4
                return (IDENTITY, Mat2(0.0, -1.0, 1.0, 0.0),
                        Mat2(-1.0, 0.0, 0.0, -1.0), Mat2(0.0, 1.0, -1.0, 0.0))[k]
        else:
            if gen == "U":
                return Mat2(1.0, 2.0 * power, 0.0, 1.0)
            if gen == "L":
                return Mat2(1.0, 0.0, 2.0 * power, 1.0)
        raise KeyError(f"unknown generator {gen!r} for lattice mode {self.mode!r}")

    def word_matrix(self, word: GroupWord) -> Mat2:
        m = IDENTITY
        for gen, power in word.letters:
            m = m @ self.letter_matrix(gen, power)
        return m

    def word_matrix_exact(self, word: GroupWord) -> tuple[int, int, int, int]:
        """Exact integer entries of a word, for faithful word comparison."""
        a, b, c, d = 1, 0, 0, 1
        for gen, power in word.letters:
            m = self.letter_matrix(gen, power)
            ga, gb, gc, gd = int(m.a), int(m.b), int(m.c), int(m.d)
            a, b, c, d = a * ga + b * gc, a * gb + b * gd, c * ga + d * gc, c * gb + d * gd
        return a, b, c, d


SANOV = Lattice("sanov", {"U": Mat2(1.0, 2.0, 0.0, 1.0), "L": Mat2(1.0, 0.0, 2.0, 1.0)})
SL2Z = Lattice("sl2z", {"S": Mat2(0.0, -1.0, 1.0, 0.0), "T": Mat2(1.0, 1.0, 0.0, 1.0)})


def get_lattice(mode: str) -> Lattice:
    if mode == "sanov":
        return SANOV
    if mode == "sl2z":
        return SL2Z
    raise ValueError(f"unknown lattice mode {mode!r}")


def in_fundamental_domain(z: complex, lattice: Lattice, tol: float = DOMAIN_TOL) -> bool:
    if z.imag <= 0:
        return False
    if lattice.mode == "sl2z":
        return abs(z.real) <= 0.5 + tol and abs(z) >= 1.0 - tol
    return (
        abs(z.real) <= 1.0 + tol
        and abs(z - 0.5) >= 0.5 - tol
        and abs(z + 0.5) >= 0.5 - tol
    )


@dataclass(frozen=True, slots=True)
class BasePoint:
    """A point of the homogeneous space in reduced representative form."""

    rep: Mat2
    accumulated_word: GroupWord = IDENTITY_WORD

    def image(self) -> complex:
        return self.rep.act_on_i()

    def close_to(self, other: "BasePoint", tol: float = 1e-9) -> bool:
        return self.rep.close_to(other.rep, tol)


def identity_basepoint() -> BasePoint:
    return BasePoint(IDENTITY, IDENTITY_WORD)


def basepoint_from_upper_half_plane(z: complex, theta: float = 0.0) -> BasePoint:
    """Representative with Moebius image z and frame angle theta (unreduced)."""
    if z.imag <= 0:
        raise ValueError("point must lie in the upper half plane")
    ry = math.sqrt(z.imag)
    h = Mat2(ry, z.real / ry, 0.0, 1.0 / ry)
    rot = Mat2(math.cos(theta), -math.sin(theta), math.sin(theta), math.cos(theta))
    return BasePoint(h @ rot, IDENTITY_WORD)


def make_generator(kind: Literal["A", "Uplus", "Uminus"], t: float) -> Mat2:
    """The one-parameter subgroup elements a^t, u+^t, u-^t."""
    if not math.isfinite(t):
        raise ValueError(f"parameter must be finite, got {t!r}")
    if kind == "A":
        e = math.exp(t)
        return Mat2(e, 0.0, 0.0, 1.0 / e)
    if kind == "Uplus":
        return Mat2(1.0, t, 0.0, 1.0)
    if kind == "Uminus":
        return Mat2(1.0, 0.0, t, 1.0)
    raise ValueError(f"unknown generator kind {kind!r}")


def bruhat_factor(u: Mat2, ubar: Mat2) -> tuple[Mat2, Mat2, Mat2]:
    """Factor u*ubar = ubar' * u' * a with a positive diagonal.

    ``u`` must be upper unipotent and ``ubar`` lower unipotent.  The
    factorization exists iff the product's upper-left entry 1 + t*s is
    positive; otherwise the degenerate case is reported.
    """
    if abs(u.a - 1.0) > 1e-12 or abs(u.d - 1.0) > 1e-12 or abs(u.c) > 1e-12:
        raise ValueError("first factor must be upper unipotent")
    if abs(ubar.a - 1.0) > 1e-12 or abs(ubar.d - 1.0) > 1e-12 or abs(ubar.b) > 1e-12:
        raise ValueError("second factor must be lower unipotent")
    t, s = u.b, ubar.c
    alpha = 1.0 + t * s
    if alpha <= 1e-14:
        raise ArithmeticError(
            "factorization impossible: product has nonpositive upper-left entry"
        )
    ubar_new = Mat2(1.0, 0.0, s / alpha, 1.0)
    u_new = Mat2(1.0, t * alpha, 0.0, 1.0)
    a = Mat2(alpha, 0.0, 0.0, 1.0 / alpha)
    return ubar_new, u_new, a


def _reduce_sl2z(h: Mat2, budget: int) -> tuple[Mat2, list[tuple[str, int]]]:
    letters: list[tuple[str, int]] = []
    for _ in range(budget):
        z = h.act_on_i()
        n = math.floor(z.real + 0.5)
        if abs(z.real) <= 0.5 + DOMAIN_TOL:
            n = 0
        if n != 0:
            h = SL2Z.letter_matrix("T", -n) @ h
            letters.insert(0, ("T", -n))
            z = h.act_on_i()
        if abs(z) < 1.0 - DOMAIN_TOL:
            h = SL2Z.letter_matrix("S", 1) @ h
            letters.insert(0, ("S", 1))
        else:
            break
    else:
        raise ReductionError("reduction exceeded the step budget")
    # sign canonicalization in SL(2,Z): bottom row (c,d) with c > 0,
    # or c ~ 0 and d > 0; a flip contributes S^2 = -I.
    scale = h.max_abs()
    if h.c < -1e-12 * scale or (abs(h.c) <= 1e-12 * scale and h.d < 0.0):
        h = h.neg()
        letters = list(_free_reduce([("S", 2)] + letters))
    return h, letters


def _reduce_sanov(h: Mat2, budget: int) -> tuple[Mat2, list[tuple[str, int]]]:
    letters: list[tuple[str, int]] = []
    for _ in range(budget):
        z = h.act_on_i()
        x = z.real
        if abs(x) > 1.0 + DOMAIN_TOL:
            k = math.floor(x / 2.0 + 0.5)
            if k != 0:
                h = SANOV.letter_matrix("U", -k) @ h
                letters.insert(0, ("U", -k))
                z = h.act_on_i()
        if abs(z - 0.5) < 0.5 - DOMAIN_TOL:
            h = SANOV.letter_matrix("L", -1) @ h
            letters.insert(0, ("L", -1))
        elif abs(z + 0.5) < 0.5 - DOMAIN_TOL:
            h = SANOV.letter_matrix("L", 1) @ h
            letters.insert(0, ("L", 1))
        else:
            if abs(z.real) <= 1.0 + DOMAIN_TOL:
                break
    else:
        raise ReductionError("reduction exceeded the step budget")
    return h, letters


def reduce_to_fundamental_domain(
    g: Mat2, lattice: Lattice, step_budget: int = STEP_BUDGET
) -> tuple[Mat2, GroupWord]:
    """Reduce g into the fundamental domain.

    Returns (reduced, word) with word * g = reduced; the word is the literal
    product of the reduction steps, freely reduced.
    """
    if abs(g.det() - 1.0) > 1e-9:
        raise ValueError("input must have determinant 1")
    if lattice.mode == "sl2z":
        h, letters = _reduce_sl2z(g, step_budget)
    else:
        h, letters = _reduce_sanov(g, step_budget)
    return h, GroupWord(_free_reduce(letters))


def _push_left(rev: list[tuple[str, int]], letters: Sequence[tuple[str, int]]) -> None:
    """Prepend `letters` to the word stored reversed in `rev`, cancelling at
    the junction.  Amortized O(len(letters))."""
    for gen, power in reversed(letters):
        if power == 0:
            continue
        if rev and rev[-1][0] == gen:
            merged = rev[-1][1] + power
            rev.pop()
            if merged != 0:
                rev.append((gen, merged))
        else:
            rev.append((gen, power))


def _flow(
    x: BasePoint,
    kind: Literal["A", "Uplus", "Uminus"],
    param: float,
    lattice: Lattice,
    max_chunk: float = 1.0,
) -> tuple[BasePoint, GroupWord]:
    """Apply the flow of `kind` for the given parameter, in bounded chunks.

    Internally the representative is right-multiplied by the inverse group
    element chunk by chunk, with reduction after each chunk to bound entry
    growth on cusp excursions.
    """
    if not math.isfinite(param):
        raise ValueError(f"flow parameter must be finite, got {param!r}")
    remaining = float(param)
    rep = x.rep
    acc_rev = list(reversed(x.accumulated_word.letters))
    out_rev: list[tuple[str, int]] = []
    while remaining != 0.0:
        chunk = max(-max_chunk, min(max_chunk, remaining))
        rep = rep @ make_generator(kind, -chunk)
        rep, step_word = reduce_to_fundamental_domain(rep, lattice)
        if step_word.letters:
            _push_left(out_rev, step_word.letterwise_inverse().letters)
            _push_left(acc_rev, step_word.letters)
        remaining -= chunk
        if remaining != 0.0 and abs(remaining) < 1e-15:
            remaining = 0.0
    return (
        BasePoint(rep, GroupWord(tuple(reversed(acc_rev)))),
        GroupWord(tuple(reversed(out_rev))),
    )


def flow_geodesic(x: BasePoint, t: float, lattice: Lattice) -> tuple[BasePoint, GroupWord]:
    """Flow x for time t along the diagonal subgroup; returns (x', return word)."""
    return _flow(x, "A", t, lattice)


def flow_horocycle(
    x: BasePoint, s: float, sign: Literal["+", "-"], lattice: Lattice
) -> tuple[BasePoint, GroupWord]:
    """Flow x along the upper (+) or lower (-) unipotent subgroup."""
    if sign not in ("+", "-"):
        raise ValueError(f"sign must be '+' or '-', got {sign!r}")
    return _flow(x, "Uplus" if sign == "+" else "Uminus", s, lattice)
