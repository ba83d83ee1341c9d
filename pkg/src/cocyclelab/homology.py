"""Integer homology of square-tiled surfaces and the monodromy transport.

The square complex of a permutation pair has one face per square, a bottom
edge b_i and a left edge l_i per square, and vertices obtained by gluing
corners.  H_1 is computed exactly over the integers: a spanning tree gives
cycle coordinates and the face relations are quotiented out through a Smith
normal form with unimodular transforms.

Monodromy of the shear/rotate moves is computed as a change of H_1 bases on
one and the same underlying surface: applying a generator changes the
translation atlas, not the points, so the old and new square structures
share a common refinement (squares cut along the relevant diagonals).  Both
structures' homology bases are expressed in the refined complex and the
step matrix is the resulting coordinate change.  Per-edge "chain maps" are
a trap here: a face can traverse the same edge twice with different
geometric images, so no edge-linear map over the unrefined complex induces
the right action.

The intersection pairing routes cycles through a ribbon neighborhood of
the 1-skeleton (strands in edge tubes, chords in vertex disks ordered by
the counterclockwise corner rotation); translation pushes fail at cone
points, where a translated closed cycle need not close up.

All matrices here are plain Python int lists; dimensions are tiny and
exactness is the point.
"""

from __future__ import annotations

from typing import Sequence

__all__ = [
    "smith_normal_form",
    "imat_mul",
    "imat_vec",
    "imat_pow",
    "imat_identity",
    "imat_inverse_unimodular",
    "CellComplexH1",
    "SquareComplexHomology",
    "move_basis_change",
    "MOVE_NAMES",
]

IntMatrix = list[list[int]]

MOVE_NAMES = ("S", "T", "S^-1", "T^-1")


def imat_identity(n: int) -> IntMatrix:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def imat_mul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        ai = a[i]
        oi = out[i]
        for k in range(inner):
            v = ai[k]
            if v:
                bk = b[k]
                for j in range(cols):
                    oi[j] += v * bk[j]
    return out


def imat_vec(a: IntMatrix, v: Sequence[int]) -> list[int]:
    return [sum(row[k] * v[k] for k in range(len(v))) for row in a]


def imat_pow(a: IntMatrix, k: int) -> IntMatrix:
    if k < 0:
        raise ValueError("negative powers not supported here")
    n = len(a)
    result = imat_identity(n)
    base = [row[:] for row in a]
    while k:
        if k & 1:
            result = imat_mul(result, base)
        base = imat_mul(base, base)
        k >>= 1
    return result


def smith_normal_form(mat: IntMatrix) -> tuple[IntMatrix, IntMatrix, IntMatrix, IntMatrix]:
    """Return (U, D, V, Vinv) with U*mat*V = D diagonal and U, V unimodular."""
    d = [row[:] for row in mat]
    rows = len(d)
    cols = len(d[0]) if rows else 0
    u = imat_identity(rows)
    v = imat_identity(cols)
    vinv = imat_identity(cols)

    def row_swap(i, j):
        d[i], d[j] = d[j], d[i]
        u[i], u[j] = u[j], u[i]

    def row_add(i, j, c):
        d[i] = [a + c * b for a, b in zip(d[i], d[j])]
        u[i] = [a + c * b for a, b in zip(u[i], u[j])]

    def row_neg(i):
        d[i] = [-a for a in d[i]]
        u[i] = [-a for a in u[i]]

    def col_swap(i, j):
        for r in d:
            r[i], r[j] = r[j], r[i]
        for r in v:
            r[i], r[j] = r[j], r[i]
        vinv[i], vinv[j] = vinv[j], vinv[i]

    def col_add(i, j, c):
        for r in d:
            r[i] += c * r[j]
        for r in v:
            r[i] += c * r[j]
        vinv[j] = [a - c * b for a, b in zip(vinv[j], vinv[i])]

    def col_neg(i):
        for r in d:
            r[i] = -r[i]
        for r in v:
            r[i] = -r[i]
        vinv[i] = [-a for a in vinv[i]]

    k = 0
    while k < rows and k < cols:
        pivot = None
        best = None
        for i in range(k, rows):
            for j in range(k, cols):
                val = abs(d[i][j])
                if val and (best is None or val < best):
                    best = val
                    pivot = (i, j)
        if pivot is None:
            break
        pi, pj = pivot
        if pi != k:
            row_swap(pi, k)
        if pj != k:
            col_swap(pj, k)
        if d[k][k] < 0:
            row_neg(k)
        done = False
        while not done:
            done = True
            for i in range(k + 1, rows):
                if d[i][k]:
                    q = d[i][k] // d[k][k]
                    row_add(i, k, -q)
                    if d[i][k]:
                        row_swap(i, k)
                        if d[k][k] < 0:
                            row_neg(k)
                        done = False
            for j in range(k + 1, cols):
                if d[k][j]:
                    q = d[k][j] // d[k][k]
                    col_add(j, k, -q)
                    if d[k][j]:
                        col_swap(j, k)
                        if d[k][k] < 0:
                            col_neg(k)
                        done = False
        k += 1
    changed = True
    while changed:
        changed = False
        for i in range(min(rows, cols) - 1):
            a, b = d[i][i], d[i + 1][i + 1]
            if a and b and b % a != 0:
                col_add(i, i + 1, 1)
                while d[i + 1][i]:
                    q = d[i + 1][i] // d[i][i] if d[i][i] else 0
                    if d[i][i]:
                        row_add(i + 1, i, -q)
                    if d[i + 1][i]:
                        row_swap(i + 1, i)
                while d[i][i + 1]:
                    q = d[i][i + 1] // d[i][i] if d[i][i] else 0
                    if d[i][i]:
                        col_add(i + 1, i, -q)
                    if d[i][i + 1]:
                        col_swap(i + 1, i)
                if d[i][i] < 0:
                    row_neg(i)
                if d[i + 1][i + 1] < 0:
                    row_neg(i + 1)
                changed = True
    return u, d, v, vinv


def imat_inverse_unimodular(a: IntMatrix) -> IntMatrix:
    """Exact inverse of an integer matrix with determinant +-1."""
    u, d, v, _ = smith_normal_form(a)
    n = len(a)
    for k in range(n):
        if d[k][k] not in (1, -1):
            raise ArithmeticError("matrix is not unimodular")
        if d[k][k] == -1:
            for j in range(n):
                u[k][j] = -u[k][j]
    return imat_mul(v, u)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


class CellComplexH1:
    """H_1 of a 2-complex given by edge endpoints and face boundary chains.

    Chains are integer vectors indexed by edges.  The quotient coordinates
    come from a Smith normal form of the face relations expressed on
    non-tree edges: with U R V = D, the relation lattice is spanned by the
    leading coordinate axes of y = V^T x, quotient coordinates are the
    trailing entries of y, and basis lifts are the trailing rows of V^{-1}.
    """

    def __init__(self, n_vertices: int, edge_ends: list[tuple[int, int]], faces: list[list[int]]):
        self.n_vertices = n_vertices
        self.edge_ends = list(edge_ends)
        n_edges = len(edge_ends)
        adjacency: dict[int, list[tuple[int, int, int]]] = {}
        for e, (t, h) in enumerate(edge_ends):
            adjacency.setdefault(t, []).append((h, e, +1))
            adjacency.setdefault(h, []).append((t, e, -1))
        parent_edge: dict[int, tuple[int, int, int]] = {}
        visited = {0}
        queue = [0]
        tree_edges: set[int] = set()
        while queue:
            cur = queue.pop(0)
            for nxt, e, sign in sorted(adjacency.get(cur, [])):
                if nxt not in visited:
                    visited.add(nxt)
                    parent_edge[nxt] = (cur, e, sign)
                    tree_edges.add(e)
                    queue.append(nxt)
        if len(visited) != n_vertices:
            raise ValueError("complex is not connected")
        self.tree_edges = tree_edges
        self.nontree = [e for e in range(n_edges) if e not in tree_edges]
        self._parent_edge = parent_edge
        self.n_edges = n_edges

        m = len(self.nontree)
        relations = [self.cycle_coords(f) for f in faces]
        if relations:
            _, dmat, vmat, vinv = smith_normal_form(relations)
        else:
            dmat, vmat, vinv = [], imat_identity(m), imat_identity(m)
        rank = 0
        for k in range(min(len(dmat), m)):
            if dmat[k][k] != 0:
                if abs(dmat[k][k]) != 1:
                    raise ArithmeticError("H_1 of an orientable surface must be torsion-free")
                rank += 1
        self.rank_relations = rank
        self.betti = m - rank
        self._vt = [list(row) for row in zip(*vmat)]
        self.basis_chains: list[list[int]] = []
        for k in range(rank, m):
            self.basis_chains.append(self._lift_cycle(list(vinv[k])))

    def cycle_coords(self, chain: Sequence[int]) -> list[int]:
        return [chain[e] for e in self.nontree]

    def _tree_path_chain(self, frm: int, to: int) -> list[int]:
        chain = [0] * self.n_edges

        def root_path(vtx):
            path = []
            while vtx != 0:
                par, e, sign = self._parent_edge[vtx]
                path.append((e, sign))
                vtx = par
            return path

        # boundary must come out as (to) - (frm)
        for e, sign in root_path(frm):
            chain[e] -= sign
        for e, sign in root_path(to):
            chain[e] += sign
        return chain

    def _lift_cycle(self, nontree_coords: Sequence[int]) -> list[int]:
        chain = [0] * self.n_edges
        for k, c in enumerate(nontree_coords):
            if c == 0:
                continue
            e = self.nontree[k]
            tail, head = self.edge_ends[e]
            chain[e] += c
            path = self._tree_path_chain(head, tail)
            for j in range(self.n_edges):
                chain[j] += c * path[j]
        return chain

    def boundary(self, chain: Sequence[int]) -> list[int]:
        out = [0] * self.n_vertices
        for e, c in enumerate(chain):
            if c:
                tail, head = self.edge_ends[e]
                out[head] += c
                out[tail] -= c
        return out

    def homology_class(self, chain: Sequence[int]) -> list[int]:
        if any(self.boundary(chain)):
            raise ValueError("chain is not a cycle")
        y = imat_vec(self._vt, self.cycle_coords(chain))
        return y[self.rank_relations :]


def _invert(sigma: Sequence[int]) -> list[int]:
    inv = [0] * len(sigma)
    for i, img in enumerate(sigma):
        inv[img] = i
    return inv


def _corner_classes(n: int, sh: Sequence[int], sv: Sequence[int]) -> tuple[int, list[int]]:
    """Vertex classes of the 4n square corners (0 BL, 1 BR, 2 TL, 3 TR)."""
    uf = _UnionFind(4 * n)
    for i in range(n):
        uf.union(4 * i + 1, 4 * sh[i] + 0)
        uf.union(4 * i + 3, 4 * sh[i] + 2)
        uf.union(4 * i + 2, 4 * sv[i] + 0)
        uf.union(4 * i + 3, 4 * sv[i] + 1)
    roots = sorted({uf.find(c) for c in range(4 * n)})
    index = {r: k for k, r in enumerate(roots)}
    return len(roots), [index[uf.find(c)] for c in range(4 * n)]


def _square_edges(n: int, corner: list[int]) -> list[tuple[int, int]]:
    """Edge endpoints: b_i from BL(i) to BR(i), l_i from BL(i) to TL(i)."""
    ends = []
    for i in range(n):
        ends.append((corner[4 * i + 0], corner[4 * i + 1]))
    for i in range(n):
        ends.append((corner[4 * i + 0], corner[4 * i + 2]))
    return ends


def _square_faces(n: int, sh: Sequence[int], sv: Sequence[int]) -> list[list[int]]:
    faces = []
    for i in range(n):
        chain = [0] * (2 * n)
        chain[i] += 1
        chain[n + sh[i]] += 1
        chain[sv[i]] -= 1
        chain[n + i] -= 1
        faces.append(chain)
    return faces


class SquareComplexHomology(CellComplexH1):
    """H_1 data of an origami's square complex, exact over Z.

    Edge chains are length-2n integer vectors (b_0..b_{n-1}, l_0..l_{n-1}).
    """

    def __init__(self, n: int, sigma_h: Sequence[int], sigma_v: Sequence[int]):
        self.n = n
        self.sigma_h = tuple(sigma_h)
        self.sigma_v = tuple(sigma_v)
        n_vertices, corner = _corner_classes(n, sigma_h, sigma_v)
        self.corner_class = corner
        super().__init__(n_vertices, _square_edges(n, corner), _square_faces(n, sigma_h, sigma_v))

    # -- intersection pairing (ribbon routing) -----------------------------

    def _ray_order(self) -> dict[tuple[int, int], tuple[int, int]]:
        """CCW positions of edge-end rays around each vertex.

        Keys are (edge, end) with end 0 = tail, 1 = head; values (vertex,
        position).  Derived by rotating counterclockwise through the square
        corners around each vertex class.
        """
        n, sh, sv = self.n, self.sigma_h, self.sigma_v
        sh_inv, sv_inv = _invert(sh), _invert(sv)

        def next_corner(square: int, corner: int) -> tuple[int, int]:
            if corner == 0:
                return sh_inv[square], 1
            if corner == 1:
                return sv_inv[square], 3
            if corner == 3:
                return sh[square], 2
            return sv[square], 0

        def opening_ray(square: int, corner: int) -> tuple[int, int]:
            if corner == 0:
                return square, 0            # b tail, east
            if corner == 1:
                return n + sh[square], 0    # right edge tail, north
            if corner == 3:
                return sv[square], 1        # top edge head, west
            return n + square, 1            # l head, south

        corner_vertex: dict[tuple[int, int], int] = {}
        for i in range(n):
            corner_vertex[(i, 0)] = self.corner_class[4 * i + 0]
            corner_vertex[(i, 1)] = self.corner_class[4 * i + 1]
            corner_vertex[(i, 2)] = self.corner_class[4 * i + 2]
            corner_vertex[(i, 3)] = self.corner_class[4 * i + 3]
        out: dict[tuple[int, int], tuple[int, int]] = {}
        seen: set[tuple[int, int]] = set()
        for i in range(n):
            for c in range(4):
                if (i, c) in seen:
                    continue
                vertex = corner_vertex[(i, c)]
                pos = 0
                sq, corner = i, c
                while (sq, corner) not in seen:
                    seen.add((sq, corner))
                    out[opening_ray(sq, corner)] = (vertex, pos)
                    pos += 1
                    sq, corner = next_corner(sq, corner)
        return out

    def _walks(self, chain: Sequence[int]) -> list[list[tuple[int, int]]]:
        remaining: dict[tuple[int, int], int] = {}
        for e, c in enumerate(chain):
            if c > 0:
                remaining[(e, 1)] = c
            elif c < 0:
                remaining[(e, -1)] = -c
        outgoing: dict[int, list[tuple[int, int]]] = {}
        for (e, d), _count in remaining.items():
            tail = self.edge_ends[e][0] if d > 0 else self.edge_ends[e][1]
            outgoing.setdefault(tail, []).append((e, d))
        for v in outgoing:
            outgoing[v].sort()
        walks = []
        while any(remaining.values()):
            start = min(k for k, cnt in remaining.items() if cnt > 0)
            walk = []
            cur = start
            while True:
                remaining[cur] -= 1
                walk.append(cur)
                e, d = cur
                head = self.edge_ends[e][1] if d > 0 else self.edge_ends[e][0]
                nxt = None
                for cand in outgoing.get(head, []):
                    if remaining.get(cand, 0) > 0:
                        nxt = cand
                        break
                if nxt is None:
                    break
                cur = nxt
            walks.append(walk)
        return walks

    def _chords(self, chain: Sequence[int], low_band: bool):
        rays = self._ray_order()
        walks = self._walks(chain)
        totals: dict[int, int] = {}
        for walk in walks:
            for e, _ in walk:
                totals[e] = totals.get(e, 0) + 1
        next_track: dict[int, int] = {}
        chords = []
        for walk in walks:
            if not walk:
                continue
            entries = []
            for e, d in walk:
                k = next_track.get(e, 0)
                next_track[e] = k + 1
                u = (k + 1) / (totals[e] + 1) / 2
                if not low_band:
                    u += 0.5
                entries.append((e, d, u))
            m = len(entries)
            for idx in range(m):
                e1, d1, u1 = entries[idx]
                e2, d2, u2 = entries[(idx + 1) % m]
                arr_end = 1 if d1 > 0 else 0
                dep_end = 0 if d2 > 0 else 1
                v1, ray1 = rays[(e1, arr_end)]
                v2, ray2 = rays[(e2, dep_end)]
                if v1 != v2:
                    raise AssertionError("walk is not vertex-consistent")
                pos1 = ray1 + (u1 if arr_end == 0 else 1.0 - u1)
                pos2 = ray2 + (u2 if dep_end == 0 else 1.0 - u2)
                chords.append((v1, pos1, pos2))
        return chords

    def intersection(self, z: Sequence[int], w: Sequence[int]) -> int:
        """Algebraic intersection number of two 1-cycles."""
        if any(self.boundary(z)) or any(self.boundary(w)):
            raise ValueError("intersection needs cycles")
        ray_count: dict[int, int] = {}
        for (_e, _end), (v, pos) in self._ray_order().items():
            ray_count[v] = max(ray_count.get(v, 0), pos + 1)
        za = self._chords(z, low_band=True)
        wa = self._chords(w, low_band=False)
        by_vertex: dict[int, list[tuple[float, float]]] = {}
        for v, p1, p2 in wa:
            by_vertex.setdefault(v, []).append((p1, p2))
        total = 0
        for v, a1, a2 in za:
            period = ray_count[v]
            for b1, b2 in by_vertex.get(v, ()):
                arc = (a2 - a1) % period
                in1 = 0.0 < (b1 - a1) % period < arc
                in2 = 0.0 < (b2 - a1) % period < arc
                if in1 and not in2:
                    total += 1
                elif in2 and not in1:
                    total -= 1
        return total

    def intersection_matrix(self) -> IntMatrix:
        g2 = self.betti
        return [
            [self.intersection(self.basis_chains[i], self.basis_chains[j]) for j in range(g2)]
            for i in range(g2)
        ]


# -- monodromy transport -----------------------------------------------------
#
# Applying a generator move changes the translation atlas of the surface,
# not its points.  The old cells and the new cells share the refinement by
# the relevant diagonal family; both H_1 bases are expressed there and the
# step matrix is the change of coordinates.
#
# New-edge dictionaries below give each new edge as a signed old refined
# edge.  Refined edge indexing: b_i -> i, l_i -> n+i, diagonal of square i
# -> 2n+i (main diagonal BL->TR for T^-1, anti-diagonal BR->TL for T).


def _refined_complex(n: int, sh, sv, corner, kind: str) -> CellComplexH1:
    ends = _square_edges(n, corner)
    if kind == "none":
        n_vertices = max(max(t, h) for t, h in ends) + 1
        return CellComplexH1(n_vertices, ends, _square_faces(n, sh, sv))
    faces: list[list[int]] = []
    if kind == "main":
        for i in range(n):
            ends.append((corner[4 * i + 0], corner[4 * i + 3]))  # BL -> TR
        for i in range(n):
            low = [0] * (3 * n)
            low[i] += 1            # b_i
            low[n + sh[i]] += 1    # right edge
            low[2 * n + i] -= 1    # minus diagonal
            up = [0] * (3 * n)
            up[2 * n + i] += 1
            up[sv[i]] -= 1         # minus top edge
            up[n + i] -= 1         # minus left edge
            faces.extend([low, up])
    elif kind == "anti":
        for i in range(n):
            ends.append((corner[4 * i + 1], corner[4 * i + 2]))  # BR -> TL
        for i in range(n):
            left = [0] * (3 * n)
            left[i] += 1           # b_i
            left[2 * n + i] += 1   # anti-diagonal
            left[n + i] -= 1       # minus left edge
            right = [0] * (3 * n)
            right[n + sh[i]] += 1  # right edge
            right[sv[i]] -= 1      # minus top edge
            right[2 * n + i] -= 1  # minus anti-diagonal
            faces.extend([left, right])
    else:
        raise ValueError(kind)
    n_vertices = max(max(t, h) for t, h in ends) + 1
    return CellComplexH1(n_vertices, ends, faces)


def _new_edge_dictionary(n: int, sh, sv, gen: str) -> tuple[str, list[tuple[int, int]]]:
    """Refinement kind and the signed refined-edge index of each new edge.

    Output list is indexed by new edges (b'_0..b'_{n-1}, l'_0..l'_{n-1});
    entries are (refined edge index, sign).
    """
    sh_inv = _invert(sh)
    if gen == "T":
        # sheared cells anchor at the bottom edge of the horizontal right
        # neighbor; left sides are the anti-diagonals.  Walking the cell
        # boundary (not edge paths through cone points) fixes the anchors.
        table = [(sh[j], 1) for j in range(n)]
        table += [(2 * n + j, 1) for j in range(n)]
        return "anti", table
    if gen == "T^-1":
        table = [(sh_inv[j], 1) for j in range(n)]
        table += [(2 * n + sh_inv[j], 1) for j in range(n)]
        return "main", table
    if gen == "S":
        # quarter turn: new bottoms are old left edges downward, new lefts
        # are old top edges rightward
        table = [(n + j, -1) for j in range(n)]
        table += [(sv[j], 1) for j in range(n)]
        return "none", table
    if gen == "S^-1":
        table = [(n + sh[j], 1) for j in range(n)]
        table += [(j, -1) for j in range(n)]
        return "none", table
    raise ValueError(f"unknown generator {gen!r}")


def move_basis_change(
    n: int,
    sh: Sequence[int],
    sv: Sequence[int],
    gen: str,
    canon_sh: Sequence[int],
    canon_sv: Sequence[int],
    tau: Sequence[int],
    src: SquareComplexHomology | None = None,
    dst: SquareComplexHomology | None = None,
) -> IntMatrix:
    """H_1 coordinate change from the (sh, sv) basis to the canonical basis
    of the moved structure.

    ``tau`` is the relabeling with tau[moved label] = canonical label.  The
    returned matrix sends coordinates in the source basis to coordinates in
    the target basis; composing along paths multiplies these on the left.
    """
    sh = tuple(sh)
    sv = tuple(sv)
    if src is None:
        src = SquareComplexHomology(n, sh, sv)
    if dst is None:
        dst = SquareComplexHomology(n, tuple(canon_sh), tuple(canon_sv))
    kind, table = _new_edge_dictionary(n, sh, sv, gen)
    refined = _refined_complex(n, sh, sv, src.corner_class, kind)
    tau_inv = _invert(tau)

    def old_chain_to_refined(chain: Sequence[int]) -> list[int]:
        out = [0] * refined.n_edges
        for e in range(2 * n):
            out[e] = chain[e]
        return out

    def canon_chain_to_refined(chain: Sequence[int]) -> list[int]:
        out = [0] * refined.n_edges
        for k in range(n):
            for offset, coeff in ((0, chain[k]), (n, chain[n + k])):
                if coeff:
                    moved_edge = offset + tau_inv[k]
                    ref_edge, sign = table[moved_edge]
                    out[ref_edge] += sign * coeff
        return out

    b_cols = [refined.homology_class(old_chain_to_refined(c)) for c in src.basis_chains]
    c_cols = [refined.homology_class(canon_chain_to_refined(c)) for c in dst.basis_chains]
    g2 = src.betti
    bmat = [[b_cols[j][i] for j in range(g2)] for i in range(g2)]
    cmat = [[c_cols[j][i] for j in range(g2)] for i in range(g2)]
    return imat_mul(imat_inverse_unimodular(cmat), bmat)
