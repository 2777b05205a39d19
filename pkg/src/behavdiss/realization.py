"""Input/state/output realizations of kernel representations.

The realization path stays exact until the very end: the output block of
the kernel matrix is row-reduced over the rationals, the left matrix
fraction is put into observer form, and only then are the matrices
converted to floats.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .exceptions import (ImproperTransfer, PoleEvaluation, ShapeMismatch,
                         SingularOutputBlock)
from .polymat import Poly, PolyMatrix, det, frac_inverse, frac_nullspace

__all__ = ["StateSpace", "KalmanForm", "realize", "kalman", "feedthrough",
           "transfer_eval", "is_observable", "row_reduce", "observability_map"]

KALMAN_TOL = 1e-10


def _mat(a, rows=None, cols=None):
    a = np.asarray(a, dtype=float)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.size == 0:
        a = a.reshape(rows if rows is not None else 0, cols if cols is not None else 0)
    if a.ndim != 2:
        raise ShapeMismatch("state-space matrices must be 2-D")
    return a


@dataclass(frozen=True)
class StateSpace:
    """``x' = A x + B w1``, ``w2 = C x + D w1``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self):
        A = _mat(self.A)
        n = A.shape[0]
        D = np.atleast_2d(np.asarray(self.D, dtype=float))
        p, m = D.shape
        B = _mat(self.B, n, m).reshape(n, m)
        C = _mat(self.C, p, n).reshape(p, n)
        if A.shape != (n, n):
            raise ShapeMismatch("A must be square")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "D", D)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.D.shape[1]

    @property
    def p_out(self):
        return self.D.shape[0]

    def to_json(self):
        return {k: getattr(self, k).tolist() for k in "ABCD"}

    @classmethod
    def from_json(cls, obj):
        D = np.atleast_2d(np.asarray(obj["D"], dtype=float))
        n = len(obj["A"])
        return cls(np.asarray(obj["A"], dtype=float).reshape(n, n),
                   np.asarray(obj["B"], dtype=float).reshape(n, D.shape[1]),
                   np.asarray(obj["C"], dtype=float).reshape(D.shape[0], n), D)


@dataclass(frozen=True)
class KalmanForm:
    """Controllability staircase ``T^{-1} A T = [[A_c, A_cp], [0, A_u]]``."""

    T: np.ndarray
    A_c: np.ndarray
    A_cp: np.ndarray
    A_u: np.ndarray
    B_c: np.ndarray
    C_c: np.ndarray
    C_u: np.ndarray
    lower_left: np.ndarray = field(repr=False)
    B_u: np.ndarray = field(repr=False)

    @property
    def n_c(self):
        return self.A_c.shape[0]

    @property
    def n_u(self):
        return self.A_u.shape[0]

    @property
    def uncontrollable_modes(self):
        return np.linalg.eigvals(self.A_u) if self.n_u else np.zeros(0, complex)


def kalman(ss, tol=KALMAN_TOL):
    """Orthogonal controllability staircase of ``(A, B)``.

    Rank decisions use singular values relative to ``max(1, |A|, |B|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    A, B, C = ss.A.copy(), ss.B.copy(), ss.C.copy()
    n = A.shape[0]
    scale = max(1.0, np.linalg.norm(A, 2) if n else 0.0,
                np.linalg.norm(B, 2) if B.size else 0.0)
    T = np.eye(n)
    offset = 0
    block = B
    while offset < n and block.size:
        U, s, _ = np.linalg.svd(block, full_matrices=True)
        r = int(np.sum(s > tol * scale))
        if r == 0:
            break
        Tk = np.eye(n)
        Tk[offset:, offset:] = U
        A = Tk.T @ A @ Tk
        if offset == 0:
            B = Tk.T @ B
        C = C @ Tk
        T = T @ Tk
        block = A[offset + r:, offset:offset + r]
        offset += r
    nc = offset
    return KalmanForm(
        T=T, A_c=A[:nc, :nc], A_cp=A[:nc, nc:], A_u=A[nc:, nc:],
        B_c=B[:nc, :], C_c=C[:, :nc], C_u=C[:, nc:],
        lower_left=A[nc:, :nc], B_u=B[nc:, :])


def is_observable(ss, tol=1e-8):
    """PBH test: ``rank [lam I - A; C] == n`` at every eigenvalue of ``A``."""
    n = ss.n
    if n == 0:
        return True
    for lam in np.linalg.eigvals(ss.A):
        pbh = np.vstack([lam * np.eye(n) - ss.A, ss.C.astype(complex)])
        s = np.linalg.svd(pbh, compute_uv=False)
        if s[-1] <= tol * max(1.0, s[0]):
            return False
    return True


def transfer_eval(ss, s):
    """``C (sI - A)^{-1} B + D``."""
    n = ss.n
    if n == 0:
        return ss.D.astype(complex)
    if np.min(np.abs(np.linalg.eigvals(ss.A) - s)) < 1e-12 * max(1.0, abs(s)):
        raise PoleEvaluation(f"s = {s} is an eigenvalue of A")
    X = np.linalg.solve(s * np.eye(n) - ss.A, ss.B.astype(complex))
    return ss.C @ X + ss.D


# ---------------------------------------------------------------------------
# exact row reduction and observer form

def _leading_row_matrix(P, degs):
    return [[P[i, j].coeffs[degs[i]] if 0 <= degs[i] < len(P[i, j].coeffs)
             else Fraction(0) for j in range(P.cols)] for i in range(P.rows)]


def row_reduce(Dl, Nl):
    """Unimodular row operations making ``Dl`` row reduced; ``Nl`` follows along.

    Returns ``(Dl', Nl')`` with nonsingular leading row-coefficient matrix.
    """
    rows_d = [list(r) for r in Dl.entries]
    rows_n = [list(r) for r in Nl.entries]
    p = Dl.rows
    for _ in range(10 * (Dl.degree + 1) * max(p, 1) + 10):
        cur = PolyMatrix(rows_d, p, Dl.cols)
        degs = cur.row_degrees()
        if any(d < 0 for d in degs):
            raise SingularOutputBlock("output block has a zero row")
        lead = _leading_row_matrix(cur, degs)
        null = frac_nullspace([list(col) for col in zip(*lead)], p)
        if not null:
            return cur, PolyMatrix(rows_n, p, Nl.cols)
        alpha = null[0]
        active = [i for i in range(p) if alpha[i] != 0]
        top = max(active, key=lambda i: (degs[i], i))
        new_d = [Poly() for _ in range(Dl.cols)]
        new_n = [Poly() for _ in range(Nl.cols)]
        for i in active:
            shift = Poly.monomial(degs[top] - degs[i], alpha[i] / alpha[top])
            new_d = [a + shift * b for a, b in zip(new_d, rows_d[i])]
            new_n = [a + shift * b for a, b in zip(new_n, rows_n[i])]
        rows_d[top], rows_n[top] = new_d, new_n
    raise SingularOutputBlock("row reduction did not terminate")


def _observer_form(Dl, Nl):
    """Observable realization of ``Dl^{-1} Nl`` with ``Dl`` row reduced.

    Built as the transpose of the controller form of
    ``Nl^T Dl^{-T}``; the state dimension is ``deg det Dl``.
    """
    D, N = Dl.T, Nl.T                       # column-reduced right fraction
    m = D.cols
    ks = D.col_degrees()
    if any(k < 0 for k in ks):
        raise SingularOutputBlock("output block has a zero row")
    Dhc = [[D[i, j].coeffs[ks[j]] if ks[j] < len(D[i, j].coeffs) else Fraction(0)
            for j in range(m)] for i in range(m)]
    try:
        Dhc_inv = frac_inverse(Dhc)
    except ZeroDivisionError:
        raise SingularOutputBlock("leading coefficient matrix is singular")
    nc = N.col_degrees()
    for j in range(m):
        if nc[j] > ks[j]:
            raise ImproperTransfer("transfer function is not proper for this partition")
    q = N.rows
    Nhc = [[N[i, j].coeffs[ks[j]] if ks[j] < len(N[i, j].coeffs) else Fraction(0)
            for j in range(m)] for i in range(q)]
    Dff = [[sum((Nhc[i][k] * Dhc_inv[k][j] for k in range(m)), Fraction(0))
            for j in range(m)] for i in range(q)]
    Nsp = N - PolyMatrix.from_constant(Dff) @ D
    n = sum(ks)
    offs = np.cumsum([0] + ks)
    # Psi(s) stacks [1, s, ..., s^{k_j - 1}] blockwise; D = Dhc S + Dlc Psi
    Dlc = [[Fraction(0)] * n for _ in range(m)]
    Nc = [[Fraction(0)] * n for _ in range(q)]
    for j in range(m):
        for t in range(ks[j]):
            col = offs[j] + t
            for i in range(m):
                c = D[i, j].coeffs
                Dlc[i][col] = c[t] if t < len(c) else Fraction(0)
            for i in range(q):
                c = Nsp[i, j].coeffs
                Nc[i][col] = c[t] if t < len(c) else Fraction(0)
    A0 = [[Fraction(0)] * n for _ in range(n)]
    B0 = [[Fraction(0)] * m for _ in range(n)]
    for j in range(m):
        for t in range(ks[j] - 1):
            A0[offs[j] + t][offs[j] + t + 1] = Fraction(1)
        if ks[j]:
            B0[offs[j] + ks[j] - 1][j] = Fraction(1)
    # A_c = A0 - B0 Dhc^{-1} Dlc,  B_c = B0 Dhc^{-1}
    HD = [[sum((Dhc_inv[a][b] * Dlc[b][c] for b in range(m)), Fraction(0))
           for c in range(n)] for a in range(m)]
    Ac = [[A0[r][c] - sum((B0[r][a] * HD[a][c] for a in range(m)), Fraction(0))
           for c in range(n)] for r in range(n)]
    Bc = [[sum((B0[r][a] * Dhc_inv[a][j] for a in range(m)), Fraction(0))
           for j in range(m)] for r in range(n)]
    f = lambda rows, r, c: np.array([[float(v) for v in row] for row in rows],
                                    dtype=float).reshape(r, c)
    Ac_f, Bc_f, Nc_f, Dff_f = f(Ac, n, n), f(Bc, n, m), f(Nc, q, n), f(Dff, q, m)
    # transpose back to the left fraction
    return StateSpace(Ac_f.T, Nc_f.T, Bc_f.T, Dff_f.T), (Ac, Bc, Nc, Dff)


def realize(B, partition=None):
    """Observable i/s/o realization of a kernel behavior.

    ``partition`` is ``(inputs, outputs)`` as variable indices; it defaults
    to ``B.io``.  With ``R = [R1 R2]`` split accordingly, ``R2`` must be
    square and nonsingular and ``-R2^{-1} R1`` proper.
    """
    R = B.kernel_matrix()
    if partition is None:
        partition = B.io
    if partition is None:
        raise ValueError("an input/output partition is required")
    inputs, outputs = [list(x) for x in partition]
    if sorted(inputs + outputs) != list(range(R.cols)):
        raise ShapeMismatch("partition must cover every variable exactly once")
    if len(outputs) != R.rows:
        raise SingularOutputBlock(
            f"{len(outputs)} outputs but kernel has {R.rows} independent rows")
    R1, R2 = R[:, inputs], R[:, outputs]
    if R2.rows and det(R2).is_zero():
        raise SingularOutputBlock("output block of the kernel matrix is singular")
    if not outputs:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, len(inputs))),
                          np.zeros((0, 0)), np.zeros((0, len(inputs))))
    Dl, Nl = row_reduce(R2, -R1)
    ss, _ = _observer_form(Dl, Nl)
    return ss


def feedthrough(M, partition):
    """Constant ``lim_{s->oo} W2(s) W1(s)^{-1}`` by exact polynomial division.

    ``M`` is an image matrix; ``partition = (inputs, outputs)`` selects the
    rows ``W1`` (square) and ``W2``.
    """
    inputs, outputs = [list(x) for x in partition]
    W1, W2 = M[inputs, :], M[outputs, :]
    if W1.rows != W1.cols:
        raise ShapeMismatch("W1 must be square")
    dW = det(W1)
    if dW.is_zero():
        raise ImproperTransfer("W1 is singular")
    m = W1.cols
    # adjugate of W1
    adj = [[Poly() for _ in range(m)] for _ in range(m)]
    for i in range(m):
        for j in range(m):
            minor = W1[[r for r in range(m) if r != j], [c for c in range(m) if c != i]]
            adj[i][j] = det(minor) * ((-1) ** (i + j)) if m > 1 else Poly.const(1)
    num = W2 @ PolyMatrix(adj, m, m)
    out = np.zeros((W2.rows, m))
    for i in range(W2.rows):
        for j in range(m):
            q, _ = divmod(num[i, j], dW)
            if q.degree > 0:
                raise ImproperTransfer("W2 W1^{-1} is not proper")
            out[i, j] = float(q.coeffs[0]) if q.coeffs else 0.0
    return out


def observability_map(ss):
    """Coefficients ``X_k`` with ``x = sum_k X_k w^{(k)}`` (w ordered inputs, outputs).

    Uses ``x = O^+ (Y - T U)`` where ``Y`` stacks output derivatives and
    ``T`` is the block Toeplitz matrix of Markov parameters.
    """
    n, m, p = ss.n, ss.m, ss.p_out
    if n == 0:
        return []
    blocks = [ss.C @ np.linalg.matrix_power(ss.A, k) for k in range(n)]
    O = np.vstack(blocks)
    Opinv = np.linalg.pinv(O)
    markov = [ss.D] + [ss.C @ np.linalg.matrix_power(ss.A, k) @ ss.B for k in range(n)]
    coeffs = []
    for k in range(n):
        Xk = np.zeros((n, m + p))
        # output derivative k appears in block row k
        Xk[:, m:] = Opinv[:, k * p:(k + 1) * p]
        # input derivative k appears in block rows i >= k with Markov parameter i-k
        for i in range(k, n):
            Xk[:, :m] -= Opinv[:, i * p:(i + 1) * p] @ markov[i - k]
        coeffs.append(Xk)
    return coeffs


def proper_partitions(R, candidates, m):
    """Yield ``(inputs, outputs)`` choosing ``m`` inputs from ``candidates``."""
    w = R.cols
    for inputs in combinations(candidates, m):
        outputs = [i for i in range(w) if i not in inputs]
        yield list(inputs), outputs
