"""Finitely generated abelian groups, integer normal forms, and the
six-term computation of crossed-product K-groups by a single automorphism.

Everything is exact: Smith normal forms run over Python integers with the
transform matrices tracked, groups are kept in invariant-factor form, and
kernels and cokernels of homomorphisms between presented groups come out
canonical. The crossed-product routine assembles K-groups from the exact
sequence's kernel and cokernel pieces, reports whether each extension is
forced to split (free kernel piece), and annotates the ordered K-data in
the one unambiguous scalar case.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


# ---------------------------------------------------------------------------
# Smith normal form with transforms, pure integer arithmetic


def _eye(n: int) -> list:
    return [[1 if i == j else 0 for j in range(n)] for i in range(n)]


def _row_op(mat, i, k, c):
    """row_i += c * row_k"""
    mat[i] = [a + c * b for a, b in zip(mat[i], mat[k])]


def _col_op(mat, j, k, c):
    """col_j += c * col_k"""
    for row in mat:
        row[j] += c * row[k]


def _swap_rows(mat, i, k):
    mat[i], mat[k] = mat[k], mat[i]


def _swap_cols(mat, j, k):
    for row in mat:
        row[j], row[k] = row[k], row[j]


def smith_normal_form(a):
    """(U, S, V) with U a V = S diagonal, d_i >= 0 and d_i | d_{i+1}.

    Input is any integer matrix (nested lists or an array); outputs are
    nested lists of Python integers, so no entry ever overflows. U and V
    are products of elementary integer operations, hence unimodular.
    """
    mat = [[int(v) for v in row] for row in np.asarray(a, dtype=object)]
    m = len(mat)
    n = len(mat[0]) if m else 0
    u = _eye(m)
    v = _eye(n)
    t = 0
    while t < min(m, n):
        # find a nonzero pivot of minimal magnitude in the trailing block
        piv = None
        for i in range(t, m):
            for j in range(t, n):
                val = mat[i][j]
                if val != 0 and (piv is None or abs(val) < abs(mat[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        pi, pj = piv
        if pi != t:
            _swap_rows(mat, t, pi)
            _swap_rows(u, t, pi)
        if pj != t:
            _swap_cols(mat, t, pj)
            _swap_cols(v, t, pj)
        while True:
            # clear the pivot column
            dirty = False
            for i in range(t + 1, m):
                if mat[i][t] != 0:
                    q = mat[i][t] // mat[t][t]
                    if q != 0:
                        _row_op(mat, i, t, -q)
                        _row_op(u, i, t, -q)
                    if mat[i][t] != 0:
                        _swap_rows(mat, t, i)
                        _swap_rows(u, t, i)
                        dirty = True
            if dirty:
                continue
            # clear the pivot row
            for j in range(t + 1, n):
                if mat[t][j] != 0:
                    q = mat[t][j] // mat[t][t]
                    if q != 0:
                        _col_op(mat, j, t, -q)
                        _col_op(v, j, t, -q)
                    if mat[t][j] != 0:
                        _swap_cols(mat, t, j)
                        _swap_cols(v, t, j)
                        dirty = True
            if dirty:
                continue
            # force divisibility of the trailing block by the pivot
            culprit = None
            d = mat[t][t]
            for i in range(t + 1, m):
                for j in range(t + 1, n):
                    if mat[i][j] % d != 0:
                        culprit = i
                        break
                if culprit is not None:
                    break
            if culprit is None:
                break
            _row_op(mat, t, culprit, 1)
            _row_op(u, t, culprit, 1)
        if mat[t][t] < 0:
            for j in range(n):
                mat[t][j] = -mat[t][j]
            for j in range(m):
                u[t][j] = -u[t][j]
        t += 1
    return u, mat, v


def _diagonal(s) -> list:
    m = len(s)
    n = len(s[0]) if m else 0
    return [s[i][i] for i in range(min(m, n))]


# ---------------------------------------------------------------------------
# groups


def _invariant_factors(factors) -> tuple:
    """Canonical divisibility chain from an arbitrary torsion list."""
    fs = [int(f) for f in factors if int(f) != 1]
    if any(f <= 0 for f in fs):
        raise ValueError("torsion orders must be positive")
    if not fs:
        return ()
    diag = [[fs[i] if i == j else 0 for j in range(len(fs))] for i in range(len(fs))]
    _, s, _ = smith_normal_form(diag)
    return tuple(d for d in _diagonal(s) if d > 1)


@dataclass(frozen=True)
class FGAbelianGroup:
    """Z**rank plus cyclic factors in invariant-factor (divisibility) order."""

    rank: int
    torsion: tuple = ()

    def __post_init__(self):
        if self.rank < 0:
            raise ValueError("rank must be nonnegative")
        object.__setattr__(self, "torsion", _invariant_factors(self.torsion))

    @property
    def ngens(self) -> int:
        """Generators in presentation order: torsion first, then free."""
        return len(self.torsion) + self.rank

    def is_trivial(self) -> bool:
        return self.rank == 0 and not self.torsion

    def is_free(self) -> bool:
        return not self.torsion

    def order(self):
        """Group order, None when infinite."""
        if self.rank > 0:
            return None
        return int(math.prod(self.torsion)) if self.torsion else 1

    def relation_matrix(self) -> list:
        """Columns d_j e_j presenting the group on its ngens generators."""
        n = self.ngens
        cols = len(self.torsion)
        rel = [[0] * cols for _ in range(n)]
        for j, d in enumerate(self.torsion):
            rel[j][j] = int(d)
        return rel

    def __str__(self) -> str:
        parts = []
        if self.rank == 1:
            parts.append("Z")
        elif self.rank > 1:
            parts.append(f"Z^{self.rank}")
        parts.extend(f"Z/{d}" for d in self.torsion)
        return " + ".join(parts) if parts else "0"

    @staticmethod
    def from_string(text: str) -> "FGAbelianGroup":
        """Parse the display grammar: "0", "Z", "Z^3 + Z/2 + Z/4"."""
        s = text.strip()
        if s == "0":
            return FGAbelianGroup(0, ())
        rank = 0
        torsion = []
        for raw in s.split("+"):
            term = raw.strip()
            if term == "Z":
                rank += 1
            elif term.startswith("Z^"):
                k = int(term[2:])
                if k < 1:
                    raise ValueError(f"bad free part {term!r}")
                rank += k
            elif term.startswith("Z/"):
                d = int(term[2:])
                if d < 2:
                    raise ValueError(f"bad cyclic order {term!r}")
                torsion.append(d)
            else:
                raise ValueError(f"cannot parse group term {term!r}")
        return FGAbelianGroup(rank, tuple(torsion))


def direct_sum(a: FGAbelianGroup, b: FGAbelianGroup) -> FGAbelianGroup:
    return FGAbelianGroup(a.rank + b.rank, a.torsion + b.torsion)


def _group_from_presentation(ngens: int, relation_cols: list) -> FGAbelianGroup:
    """Z**ngens modulo the column lattice of `relation_cols`."""
    if ngens == 0:
        return FGAbelianGroup(0, ())
    if not relation_cols or not relation_cols[0]:
        return FGAbelianGroup(ngens, ())
    _, s, _ = smith_normal_form(relation_cols)
    diag = _diagonal(s)
    nonzero = [d for d in diag if d != 0]
    rank = ngens - len(nonzero)
    torsion = tuple(d for d in nonzero if d > 1)
    return FGAbelianGroup(rank, torsion)


# ---------------------------------------------------------------------------
# homomorphisms


@dataclass
class GroupHom:
    """Hom of presented groups: an integer matrix on generator coordinates.

    Generator order is the group's presentation order (torsion generators
    first, then free ones); column i is the image of source generator i.
    """

    source: FGAbelianGroup
    target: FGAbelianGroup
    matrix: object

    def __post_init__(self):
        mat = [[int(v) for v in row] for row in np.atleast_2d(self.matrix)]
        if self.source.ngens == 0 or self.target.ngens == 0:
            mat = [[0] * self.source.ngens for _ in range(self.target.ngens)]
        if len(mat) != self.target.ngens or (
            mat and len(mat[0]) != self.source.ngens
        ):
            raise ValueError(
                f"matrix must be {self.target.ngens} x {self.source.ngens}"
            )
        self.matrix = mat

    @staticmethod
    def identity(g: FGAbelianGroup) -> "GroupHom":
        return GroupHom(g, g, _eye(g.ngens))

    @staticmethod
    def zero(source: FGAbelianGroup, target: FGAbelianGroup) -> "GroupHom":
        return GroupHom(
            source, target, [[0] * source.ngens for _ in range(target.ngens)]
        )

    def well_defined(self) -> bool:
        """Do source relations land in the target relation lattice?

        Source generator i of order d kills d * (column i); the target
        coordinate j then needs d * m_ji to vanish modulo the j-th target
        order (exactly, on free coordinates).
        """
        tt = self.target.torsion
        nt = len(tt)
        for i, d in enumerate(self.source.torsion):
            for j in range(self.target.ngens):
                val = d * self.matrix[j][i]
                if j < nt:
                    if val % tt[j] != 0:
                        return False
                elif val != 0:
                    return False
        return True

    def is_identity(self) -> bool:
        return self.source == self.target and self.matrix == _eye(self.source.ngens)


def _matmul(a: list, b: list) -> list:
    if not a:
        return []
    inner = len(b)
    cols = len(b[0]) if b else 0
    return [
        [sum(a[i][k] * b[k][j] for k in range(inner)) for j in range(cols)]
        for i in range(len(a))
    ]


def _column_lattice_basis(cols: list) -> list:
    """Independent columns generating the same lattice (integer col ops)."""
    if not cols or not cols[0]:
        return [[] for _ in cols]
    mat = [list(row) for row in cols]
    m, n = len(mat), len(mat[0])
    c = 0
    for r in range(m):
        if c >= n:
            break
        while True:
            piv = None
            for j in range(c, n):
                if mat[r][j] != 0 and (piv is None or abs(mat[r][j]) < abs(mat[r][piv])):
                    piv = j
            if piv is None:
                break
            if piv != c:
                _swap_cols(mat, c, piv)
            done = True
            for j in range(c + 1, n):
                if mat[r][j] != 0:
                    q = mat[r][j] // mat[r][c]
                    if q:
                        _col_op(mat, j, c, -q)
                    if mat[r][j] != 0:
                        done = False
            if done:
                break
        if mat[r][c] != 0:
            c += 1
    keep = [j for j in range(n) if any(mat[i][j] != 0 for i in range(m))]
    return [[mat[i][j] for j in keep] for i in range(m)]


def _solve_integer(basis: list, rhs: list) -> list:
    """Solve basis @ x = rhs exactly; every rhs column must be in the lattice."""
    u, s, v = smith_normal_form(basis)
    m = len(basis)
    n = len(basis[0]) if m else 0
    urhs = _matmul(u, rhs)
    k = len(rhs[0]) if rhs else 0
    y = [[0] * k for _ in range(n)]
    diag = _diagonal(s)
    for i in range(m):
        for j in range(k):
            val = urhs[i][j]
            if i < len(diag) and diag[i] != 0:
                if val % diag[i] != 0:
                    raise ArithmeticError("rhs outside the basis lattice")
                y[i][j] = val // diag[i]
            elif val != 0:
                raise ArithmeticError("rhs outside the basis lattice")
    return _matmul(v, y)


def kernel_cokernel(hom: GroupHom) -> tuple:
    """Exact kernel and cokernel of a well-defined homomorphism.

    Cokernel: target generators modulo image columns plus target
    relations. Kernel: the preimage lattice of the target relations
    (zero columns of the stacked Smith form, projected to source
    coordinates), modulo the source relations expressed in a basis of
    that lattice.
    """
    if not hom.well_defined():
        raise ValueError("homomorphism does not respect the relations")
    ns, nt = hom.source.ngens, hom.target.ngens
    rel_t = hom.target.relation_matrix()
    rel_s = hom.source.relation_matrix()
    kt = len(rel_t[0]) if rel_t else 0

    stacked = [hom.matrix[i] + rel_t[i] for i in range(nt)] if nt else []
    if nt == 0:
        coker = FGAbelianGroup(0, ())
        # everything maps to zero, kernel is all of the source
        return hom.source, coker
    coker = _group_from_presentation(nt, stacked)

    # kernel lattice: x with M x in the target relation lattice
    u, s, v = smith_normal_form(stacked)
    total = ns + kt
    diag = _diagonal(s)
    zero_cols = [
        j
        for j in range(total)
        if j >= len(diag) or diag[j] == 0
    ]
    gens = [[v[i][j] for j in zero_cols] for i in range(ns)]
    basis = _column_lattice_basis(gens)
    width = len(basis[0]) if basis and basis[0] else 0
    if width == 0:
        return FGAbelianGroup(0, ()), coker
    if rel_s and rel_s[0]:
        coords = _solve_integer(basis, rel_s)
    else:
        coords = [[] for _ in range(width)]
    kernel = _group_from_presentation(width, coords)
    return kernel, coker


# ---------------------------------------------------------------------------
# crossed-product K-groups


@dataclass
class PVResult:
    """K-groups of the crossed product by one automorphism.

    k0 pairs the cokernel of (1 - alpha) on K0 with the kernel of
    (1 - alpha) on K1; k1 symmetrically. A piece with free kernel forces
    its extension to split, making the direct sum unconditional; a
    non-split-guaranteed extension leaves the group field None with the
    pieces still reported. order_annotation carries the ordered K-data
    (K0, positive cone, unit class, K1) in the scalar case.
    """

    k0: FGAbelianGroup | None
    k1: FGAbelianGroup | None
    split0: bool
    split1: bool
    coker0: FGAbelianGroup
    ker0: FGAbelianGroup
    coker1: FGAbelianGroup
    ker1: FGAbelianGroup
    order_annotation: tuple | None

    def to_dict(self) -> dict:
        return {
            "kind": "pv-crossed-kgroups",
            "k0": None if self.k0 is None else str(self.k0),
            "k1": None if self.k1 is None else str(self.k1),
            "split0": bool(self.split0),
            "split1": bool(self.split1),
            "pieces": {
                "coker0": str(self.coker0),
                "ker0": str(self.ker0),
                "coker1": str(self.coker1),
                "ker1": str(self.ker1),
            },
            "order_annotation": (
                None
                if self.order_annotation is None
                else [str(x) for x in self.order_annotation]
            ),
        }


def _one_minus(alpha: GroupHom) -> GroupHom:
    n = alpha.source.ngens
    mat = [
        [(1 if i == j else 0) - alpha.matrix[i][j] for j in range(n)]
        for i in range(n)
    ]
    return GroupHom(alpha.source, alpha.target, mat)


def pv_crossed_kgroups(
    k0: FGAbelianGroup,
    k1: FGAbelianGroup,
    alpha0: GroupHom | None = None,
    alpha1: GroupHom | None = None,
) -> PVResult:
    """Crossed-product K-groups from the induced automorphism action.

    alpha0 and alpha1 are the maps induced on K0 and K1 (identity when
    omitted). The exact sequence gives, for each degree, an extension of
    the kernel of 1 - alpha in the other degree by the cokernel in the
    same degree; a free kernel splits it and the group is the direct sum.
    """
    a0 = GroupHom.identity(k0) if alpha0 is None else alpha0
    a1 = GroupHom.identity(k1) if alpha1 is None else alpha1
    if a0.source != k0 or a0.target != k0:
        raise ValueError("alpha0 must be an endomorphism of k0")
    if a1.source != k1 or a1.target != k1:
        raise ValueError("alpha1 must be an endomorphism of k1")
    ker0, coker0 = kernel_cokernel(_one_minus(a0))
    ker1, coker1 = kernel_cokernel(_one_minus(a1))
    split0 = ker1.is_free()
    split1 = ker0.is_free()
    g0 = direct_sum(coker0, ker1) if split0 else None
    g1 = direct_sum(coker1, ker0) if split1 else None
    annotation = None
    if (
        k0 == FGAbelianGroup(1, ())
        and a0.is_identity()
        and ker1.is_trivial()
        and g1 is not None
    ):
        # K0 of the crossed product is the unperturbed copy of Z, so the
        # order data (positive cone and unit class) carries over verbatim.
        annotation = ("Z", "N", 1, str(g1))
    return PVResult(
        k0=g0,
        k1=g1,
        split0=split0,
        split1=split1,
        coker0=coker0,
        ker0=ker0,
        coker1=coker1,
        ker1=ker1,
        order_annotation=annotation,
    )
