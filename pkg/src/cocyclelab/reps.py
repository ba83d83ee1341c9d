"""Representations of the lattice generators and fiber-matrix evaluation.

A Representation maps each lattice generator to an invertible real d x d
matrix; evaluating it on return words produces the fiber matrices of the
suspension cocycle.  Fibers carry the constant Euclidean norm: Lyapunov
exponents do not depend on the Finsler choice under integrability, and an
empirical integrability diagnostic is provided instead of a certificate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .sl2 import GroupWord, Lattice, Mat2, get_lattice

__all__ = [
    "Representation",
    "RepresentationError",
    "build_representation",
    "standard_representation",
    "trivial_representation",
    "sym_power",
    "direct_sum",
    "rho_of_word",
    "parse_rep_spec",
    "integrability_diagnostic",
]

RELATION_TOL = 1e-9


class RepresentationError(ValueError):
    """Invalid representation data (singular image or broken relation)."""


@dataclass(frozen=True)
class Representation:
    dim: int
    lattice_mode: str
    generator_images: dict[str, np.ndarray]
    label: str = ""
    determinants: dict[str, float] = field(default_factory=dict)
    generator_inverses: dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    def image(self, gen: str) -> np.ndarray:
        try:
            return self.generator_images[gen]
        except KeyError:
            raise KeyError(f"unknown generator id {gen!r}") from None

    def image_inverse(self, gen: str) -> np.ndarray:
        try:
            return self.generator_inverses[gen]
        except KeyError:
            raise KeyError(f"unknown generator id {gen!r}") from None

    def __repr__(self) -> str:
        return f"Representation(dim={self.dim}, mode={self.lattice_mode!r}, label={self.label!r})"


def build_representation(
    dim: int,
    generator_images: dict[str, np.ndarray],
    lattice_mode: str,
    label: str = "",
) -> Representation:
    """Validate generator images and, in sl2z mode, the group relations."""
    images: dict[str, np.ndarray] = {}
    dets: dict[str, float] = {}
    for name, m in generator_images.items():
        arr = np.asarray(m, dtype=float)
        if arr.shape != (dim, dim):
            raise RepresentationError(
                f"image of {name!r} has shape {arr.shape}, expected {(dim, dim)}"
            )
        det = float(np.linalg.det(arr))
        if abs(det) < 1e-12 or not np.isfinite(np.linalg.cond(arr)):
            raise RepresentationError(f"image of {name!r} is singular")
        arr = arr.copy()
        arr.setflags(write=False)
        images[name] = arr
        dets[name] = det
    lattice = get_lattice(lattice_mode)
    missing = set(lattice.generator_names) - set(images)
    if missing:
        raise RepresentationError(f"missing generator images: {sorted(missing)}")
    if lattice_mode == "sl2z":
        s, t = images["S"], images["T"]
        eye = np.eye(dim)
        if not np.allclose(np.linalg.matrix_power(s, 4), eye, atol=RELATION_TOL):
            raise RepresentationError("relation S^4 = I violated")
        if not np.allclose(np.linalg.matrix_power(s @ t, 6), eye, atol=RELATION_TOL):
            raise RepresentationError("relation (ST)^6 = I violated")
    inverses = {}
    for name, arr in images.items():
        inv = np.linalg.inv(arr)
        inv.setflags(write=False)
        inverses[name] = inv
    return Representation(dim, lattice_mode, images, label, dets, inverses)


def _mat2_array(m: Mat2) -> np.ndarray:
    return np.array([[m.a, m.b], [m.c, m.d]])


def standard_representation(lattice: Lattice, label: str = "standard") -> Representation:
    """The tautological inclusion: each generator maps to itself."""
    images = {name: _mat2_array(g) for name, g in lattice.generators.items()}
    return build_representation(2, images, lattice.mode, label)


def trivial_representation(dim: int, lattice: Lattice, label: str = "trivial") -> Representation:
    images = {name: np.eye(dim) for name in lattice.generator_names}
    return build_representation(dim, images, lattice.mode, label)


def _sym_power_matrix(m: np.ndarray, k: int) -> np.ndarray:
    """Matrix of the k-th symmetric power in the basis e1^k, e1^{k-1}e2, ..., e2^k.

    Column j is the expansion of (a e1 + c e2)^{k-j} (b e1 + d e2)^j.
    """
    a, b, c, d = m[0, 0], m[0, 1], m[1, 0], m[1, 1]
    out = np.zeros((k + 1, k + 1))
    for j in range(k + 1):
        # coefficients of (a x + c)^(k-j) as a polynomial in the "e2 degree"
        poly1 = np.zeros(k + 1)
        for r in range(k - j + 1):
            poly1[r] = math.comb(k - j, r) * a ** (k - j - r) * c**r
        poly2 = np.zeros(k + 1)
        for r in range(j + 1):
            poly2[r] = math.comb(j, r) * b ** (j - r) * d**r
        col = np.convolve(poly1[: k - j + 1], poly2[: j + 1])
        out[:, j] = col
    return out


def sym_power(rep: Representation, k: int) -> Representation:
    """k-th symmetric power of a 2-dimensional representation."""
    if rep.dim != 2:
        raise RepresentationError("symmetric powers are defined for dim-2 inputs")
    if k < 1:
        raise RepresentationError("power must be a positive integer")
    if k == 1:
        return rep
    images = {name: _sym_power_matrix(m, k) for name, m in rep.generator_images.items()}
    label = f"sym{k}({rep.label})" if rep.label else f"sym{k}"
    return build_representation(k + 1, images, rep.lattice_mode, label)


def direct_sum(rep1: Representation, rep2: Representation) -> Representation:
    if rep1.lattice_mode != rep2.lattice_mode:
        raise RepresentationError(
            f"lattice mode mismatch: {rep1.lattice_mode!r} vs {rep2.lattice_mode!r}"
        )
    dim = rep1.dim + rep2.dim
    images = {}
    for name in rep1.generator_images:
        m = np.zeros((dim, dim))
        m[: rep1.dim, : rep1.dim] = rep1.image(name)
        m[rep1.dim :, rep1.dim :] = rep2.image(name)
        images[name] = m
    label = f"{rep1.label or 'rep'}+{rep2.label or 'rep'}"
    return build_representation(dim, images, rep1.lattice_mode, label)


def rho_of_word(rep: Representation, word: GroupWord) -> np.ndarray:
    """Ordered product of generator-image powers; the empty word gives I."""
    letters = word.letters
    if not letters:
        return np.eye(rep.dim)
    out: np.ndarray | None = None
    for gen, power in letters:
        base = rep.image(gen) if power >= 0 else rep.image_inverse(gen)
        k = abs(power)
        factor = base if k == 1 else np.linalg.matrix_power(base, k)
        out = factor.copy() if out is None else out @ factor
    return out


def parse_rep_spec(spec: str, lattice: Lattice) -> Representation:
    """Build a representation from a compact textual description.

    Grammar: atom ('+' atom)* with atom one of
      ``standard`` | ``trivial:<dim>`` | ``sym:<k>`` (symmetric power of the
      standard inclusion) | ``free2`` (a determinant-1 pair for the free
      lattice).
    """
    parts = [p.strip() for p in spec.split("+")]
    reps: list[Representation] = []
    for part in parts:
        if part == "standard":
            reps.append(standard_representation(lattice))
        elif part.startswith("trivial"):
            dim = int(part.split(":", 1)[1]) if ":" in part else 1
            reps.append(trivial_representation(dim, lattice))
        elif part.startswith("sym:"):
            k = int(part.split(":", 1)[1])
            reps.append(sym_power(standard_representation(lattice), k))
        elif part == "free2":
            if lattice.mode != "sanov":
                raise RepresentationError("free2 requires the free lattice mode")
            images = {
                "U": np.array([[2.0, 1.0], [1.0, 1.0]]),
                "L": np.array([[1.0, 1.0], [1.0, 2.0]]),
            }
            reps.append(build_representation(2, images, lattice.mode, "free2"))
        else:
            raise RepresentationError(f"unknown representation atom {part!r}")
    out = reps[0]
    for r in reps[1:]:
        out = direct_sum(out, r)
    if len(reps) == 1 and not out.label:
        out = Representation(out.dim, out.lattice_mode, out.generator_images, spec)
    return out


def integrability_diagnostic(
    rep: Representation,
    lattice: Lattice,
    n_samples: int = 50,
    seed: int = 0,
    t_grid: int = 8,
) -> float:
    """Empirical estimate of E[ sup_{|t|<=1} log ||a^t_*|| ] over random bases.

    A finite, moderate value is consistent with integrability; this is a
    diagnostic, not a certificate.
    """
    from .engine import cocycle_matrix, random_base_point

    rng = np.random.default_rng(seed)
    total = 0.0
    ts = np.linspace(-1.0, 1.0, t_grid)
    for k in range(n_samples):
        x = random_base_point(int(rng.integers(0, 2**63 - 1)), lattice)
        worst = 0.0
        for t in ts:
            if t == 0.0:
                continue
            a, _ = cocycle_matrix(x, float(t), rep, lattice)
            worst = max(worst, math.log(float(np.linalg.norm(a, 2))))
        total += worst
    return total / n_samples
