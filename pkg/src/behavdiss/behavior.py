"""Linear differential behaviors and their polynomial structure.

A :class:`Behavior` wraps a kernel matrix ``R`` (``R(d/dt) w = 0``), an
image matrix ``M`` (``w = M(d/dt) l``) or an i/s/o state-space model.
Everything structural (controllability, uncontrollable modes, the
controllable part, superbehaviors) is answered exactly from the Smith
form of the kernel matrix.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import NotControllable, NotUnimodular, ShapeMismatch, SingularSigma
from .polymat import (Poly, PolyMatrix, frac_inverse, is_unimodular,
                      left_annihilator, normal_rank, polymat_from_json,
                      polymat_to_json, smith_form, solve_left, to_fraction)
from .realization import StateSpace, kalman

__all__ = ["Behavior", "ModeSet", "input_cardinality", "uncontrollable_modes",
           "is_controllable", "unmixing_check", "controllable_part",
           "observable_image", "superbehavior", "intersect", "is_autonomous",
           "sigma_image", "contains", "equal", "pair_multisets"]

ROOT_CLUSTER_TOL = 1e-7


class ModeSet:
    """Multiset of complex modes, symmetrized under conjugation."""

    def __init__(self, modes=(), tol=ROOT_CLUSTER_TOL):
        self.modes = _conjugate_clean(np.asarray(list(modes), dtype=complex), tol)

    def __len__(self):
        return len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __repr__(self):
        return f"ModeSet({np.round(self.modes, 10).tolist()})"

    def negated(self):
        return ModeSet(-self.modes)

    def union(self, *others):
        return ModeSet(np.concatenate([self.modes] + [o.modes for o in others]))

    def matches(self, other, tol):
        _, ua, ub = pair_multisets(self.modes, np.asarray(list(other), complex), tol)
        return not ua and not ub

    def to_json(self):
        return [[float(z.real), float(z.imag)] for z in self.modes]


def _conjugate_clean(z, tol):
    """Snap nearly-real values to the real line and pair conjugates exactly."""
    z = z.copy()
    real = np.abs(z.imag) <= tol * (1 + np.abs(z))
    z[real] = z[real].real
    used = np.zeros(len(z), bool)
    for i in np.where(~real)[0]:
        if used[i] or z[i].imag <= 0:
            continue
        cands = [j for j in np.where(~real & ~used)[0] if j != i and z[j].imag < 0]
        if not cands:
            continue
        j = min(cands, key=lambda k: abs(z[k] - np.conj(z[i])))
        mid = 0.5 * (z[i] + np.conj(z[j]))
        z[i], z[j] = mid, np.conj(mid)
        used[i] = used[j] = True
    order = np.lexsort((z.imag, z.real))
    return z[order]


def pair_multisets(a, b, tol):
    """Optimal one-to-one pairing of two complex multisets.

    Returns ``(pairs, unmatched_a, unmatched_b)``; a pair only counts when
    its distance is at most ``tol``.
    """
    a = np.asarray(a, complex)
    b = np.asarray(b, complex)
    if len(a) == 0 or len(b) == 0:
        return [], list(a), list(b)
    cost = np.abs(a[:, None] - b[None, :])
    ri, ci = linear_sum_assignment(cost)
    pairs, ma, mb = [], set(), set()
    for i, j in zip(ri, ci):
        if cost[i, j] <= tol:
            pairs.append((a[i], b[j]))
            ma.add(i)
            mb.add(j)
    return (pairs, [a[i] for i in range(len(a)) if i not in ma],
            [b[j] for j in range(len(b)) if j not in mb])


@dataclass(frozen=True)
class Behavior:
    """A behavior in ``w`` variables.

    ``kind`` is ``"kernel"``, ``"image"`` or ``"iso"``.  Kernel matrices are
    kept with full row rank.  ``io`` is an optional ``(inputs, outputs)``
    pair of variable-index tuples.
    """

    kind: str
    w: int
    matrix: Optional[PolyMatrix] = None
    state_space: Optional[StateSpace] = None
    io: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("kernel", "image", "iso"):
            raise ValueError(f"unknown behavior kind {self.kind!r}")
        if self.kind == "kernel" and self.matrix.cols != self.w:
            raise ShapeMismatch("kernel matrix must have w columns")
        if self.kind == "image" and self.matrix.rows != self.w:
            raise ShapeMismatch("image matrix must have w rows")
        if self.io is not None:
            ins, outs = (tuple(int(i) for i in x) for x in self.io)
            if sorted(ins + outs) != list(range(self.w)):
                raise ShapeMismatch("io partition must cover every variable once")
            object.__setattr__(self, "io", (ins, outs))
        if self.kind == "iso":
            ss = self.state_space
            io = self.io or (tuple(range(ss.m)), tuple(range(ss.m, ss.m + ss.p_out)))
            if ss.m + ss.p_out != self.w or len(io[0]) != ss.m:
                raise ShapeMismatch("state-space dimensions do not match w / io")
            object.__setattr__(self, "io", io)

    # -- constructors -----------------------------------------------------
    @classmethod
    def kernel(cls, R, io=None):
        r = normal_rank(R)
        if r < R.rows:
            sd = smith_form(R)
            R = (sd.S @ sd.V)[:r, :]
        return cls("kernel", R.cols, matrix=R, io=io)

    @classmethod
    def image(cls, M, io=None):
        return cls("image", M.rows, matrix=M, io=io)

    @classmethod
    def iso(cls, ss, io=None):
        return cls("iso", ss.m + ss.p_out, state_space=ss, io=io)

    @classmethod
    def full(cls, w):
        return cls("kernel", w, matrix=PolyMatrix.zeros(0, w))

    # -- conversions ------------------------------------------------------
    def kernel_matrix(self):
        """Full-row-rank kernel matrix of this behavior."""
        if self.kind == "kernel":
            return self.matrix
        if self.kind == "image":
            return left_annihilator(self.matrix)
        return _iso_kernel(self.state_space, self.io, self.w)

    def as_kernel(self):
        if self.kind == "kernel":
            return self
        return Behavior.kernel(self.kernel_matrix(), io=self.io)

    # -- JSON ---------------------------------------------------------------
    def to_json(self):
        out = {"kind": self.kind, "w": self.w}
        if self.kind == "iso":
            out["matrix"] = self.state_space.to_json()
        else:
            out["matrix"] = polymat_to_json(self.matrix)
        if self.io is not None:
            out["io"] = {"inputs": list(self.io[0]), "outputs": list(self.io[1])}
        return out

    @classmethod
    def from_json(cls, obj):
        kind, w = obj["kind"], int(obj["w"])
        io = obj.get("io")
        if io is not None:
            io = (tuple(io["inputs"]), tuple(io["outputs"]))
        data = obj.get("matrix", obj.get("state_space"))
        if kind == "iso":
            return cls.iso(StateSpace.from_json(data), io=io)
        if kind == "kernel":
            return cls.kernel(polymat_from_json(data, cols=w), io=io)
        if kind == "image":
            M = polymat_from_json(data) if data else PolyMatrix.zeros(w, 0)
            return cls.image(M, io=io)
        raise ValueError(f"unknown behavior kind {kind!r}")


def _iso_kernel(ss, io, w):
    """Eliminate the state from ``x' = Ax + Bw1, w2 = Cx + Dw1`` exactly."""
    n, m, p = ss.n, ss.m, ss.p_out
    if p == 0:
        return PolyMatrix.zeros(0, w)
    ex = lambda a, r, c: np.array([[to_fraction(float(v)) for v in row]
                                   for row in np.asarray(a).reshape(r, c)],
                                  dtype=object).reshape(r, c)
    A, Bm, C, Dm = ex(ss.A, n, n), ex(ss.B, n, m), ex(ss.C, p, n), ex(ss.D, p, m)
    if n:
        X = PolyMatrix.xi_minus(A).vstack(PolyMatrix.from_constant(-C))
        sd = smith_form(X)
        L2 = sd.L[sd.rank:, :]
        w1_block = PolyMatrix.from_constant(np.vstack([-Bm, -Dm]))
        w2_block = PolyMatrix.from_constant(
            np.vstack([np.zeros((n, p), dtype=int), np.eye(p, dtype=int)]))
    else:
        L2 = PolyMatrix.identity(p)
        w1_block = PolyMatrix.from_constant(-Dm)
        w2_block = PolyMatrix.identity(p)
    Rw1, Rw2 = L2 @ w1_block, L2 @ w2_block
    ins, outs = io
    cols = [None] * w
    for k, i in enumerate(ins):
        cols[i] = Rw1[:, [k]]
    for k, i in enumerate(outs):
        cols[i] = Rw2[:, [k]]
    R = cols[0]
    for c in cols[1:]:
        R = R.hstack(c)
    return R


# ---------------------------------------------------------------------------
# structural queries

def input_cardinality(B):
    if B.kind == "kernel":
        return B.w - normal_rank(B.matrix)
    if B.kind == "image":
        return normal_rank(B.matrix)
    return B.state_space.m


def uncontrollable_modes(B):
    """Roots (with multiplicity) of the nontrivial invariant factors of ``R``."""
    if B.kind == "image":
        return ModeSet()
    if B.kind == "iso":
        return ModeSet(kalman(B.state_space).uncontrollable_modes)
    R = B.matrix
    if R.rows == 0:
        return ModeSet()
    roots = [r for d in smith_form(R).nontrivial_factors for r in d.roots()]
    return ModeSet(roots)


def is_controllable(B):
    if B.kind == "image":
        return True
    R = B.kernel_matrix()
    if R.rows == 0:
        return True
    return not smith_form(R).nontrivial_factors


def unmixing_check(modes, tol=ROOT_CLUSTER_TOL):
    """True iff no two modes (a mode paired with itself included) sum to zero."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    z = np.asarray(list(modes), complex)
    if len(z) == 0:
        return True
    scale = 1 + np.max(np.abs(z))
    sums = np.abs(z[:, None] + z[None, :])
    return not np.any(sums <= tol * scale)


def controllable_part(B):
    """Kernel ``V[:r, :]`` obtained by dropping the invariant factors of ``R``."""
    if B.kind == "image":
        return B
    R = B.kernel_matrix()
    if R.rows == 0:
        return Behavior("kernel", B.w, matrix=R, io=B.io)
    sd = smith_form(R)
    return Behavior("kernel", B.w, matrix=sd.V[:sd.rank, :], io=B.io)


def observable_image(B):
    """Image matrix ``M`` with ``R M = 0`` and ``M(lam)`` full column rank everywhere."""
    if B.kind == "image":
        M = B.matrix
        sd = smith_form(M) if M.cols else None
        if sd is None or (sd.rank == M.cols and not sd.nontrivial_factors):
            return M
        B = B.as_kernel()
    R = B.kernel_matrix()
    if R.rows == 0:
        return PolyMatrix.identity(B.w)
    sd = smith_form(R)
    if sd.nontrivial_factors:
        raise NotControllable("behavior has uncontrollable modes")
    return sd.R[:, sd.rank:]


def superbehavior(B, F1=None, F2=None):
    """Controllable behavior of least input cardinality containing ``B``.

    With ``R = U [S 0] V``, ``S = diag(1, .., 1, d_1, .., d_k)``, the result
    is ``ker [F1, F2 diag(d), 0] V``.  ``F1`` (unimodular) and ``F2`` are the
    free parameters of the non-unique solution; defaults ``I`` and ``0``.
    Returns ``(B2, k)``.
    """
    R = B.kernel_matrix()
    p = R.rows
    if p == 0:
        if F1 is not None and F1.rows:
            raise ShapeMismatch("F1 must be 0x0 for the full behavior")
        return Behavior.full(B.w), 0
    sd = smith_form(R)
    k = len(sd.nontrivial_factors)
    keep = p - k
    if F1 is None:
        F1 = PolyMatrix.identity(keep)
    if F2 is None:
        F2 = PolyMatrix.zeros(keep, k)
    if F1.shape != (keep, keep) or F2.shape != (keep, k):
        raise ShapeMismatch(f"F1 must be {keep}x{keep} and F2 {keep}x{k}")
    if keep and not is_unimodular(F1):
        raise NotUnimodular("F1 must be unimodular")
    F = F1.hstack(F2)
    # [F1 F2] [[I 0 0], [0 D 0]] V  ==  F (S V)
    R2 = F @ (sd.S @ sd.V)[:p, :] if keep else PolyMatrix.zeros(0, B.w)
    return Behavior("kernel", B.w, matrix=R2), k


def contains(big, small):
    """True iff ``small`` is a sub-behavior of ``big`` (exact)."""
    R_big, R_small = big.kernel_matrix(), small.kernel_matrix()
    return solve_left(R_small, R_big) is not None


def equal(B1, B2):
    return contains(B1, B2) and contains(B2, B1)


def intersect(B1, B2):
    if B1.w != B2.w:
        raise ShapeMismatch("behaviors live in different variable spaces")
    return Behavior.kernel(B1.kernel_matrix().vstack(B2.kernel_matrix()))


def is_autonomous(B):
    R = B.kernel_matrix()
    return normal_rank(R) == B.w


def sigma_image(B, sigma):
    """Behavior ``{Sigma v : v in B}`` for nonsingular constant ``Sigma``."""
    S = [[to_fraction(v) for v in row] for row in np.atleast_2d(np.asarray(sigma, dtype=object))]
    if len(S) != B.w or any(len(r) != B.w for r in S):
        raise ShapeMismatch("Sigma must be w x w")
    try:
        S_inv = frac_inverse(S)
    except ZeroDivisionError:
        raise SingularSigma("Sigma is singular")
    if B.kind == "image":
        return Behavior.image(PolyMatrix.from_constant(S) @ B.matrix)
    R = B.kernel_matrix()
    return Behavior("kernel", B.w, matrix=R @ PolyMatrix.from_constant(S_inv))


def is_full(B):
    return B.kernel_matrix().rows == 0


def describe(B):
    return {"w": B.w, "m": input_cardinality(B), "controllable": is_controllable(B)}
