"""Exact univariate polynomial matrices over the rationals.

Polynomials keep their coefficients as :class:`fractions.Fraction` in
ascending powers; floating point only appears when a matrix is evaluated
at a complex point.  The module also carries the two-variable matrices
used for quadratic differential forms and the ``partial`` operator
``Phi(zeta, eta) -> Phi(-xi, xi)``.
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
import scipy.linalg

from .exceptions import NonSquare, ShapeMismatch

__all__ = [
    "Poly", "PolyMatrix", "TwoVarPolyMatrix", "SmithDecomposition",
    "to_fraction", "eval_matrix", "normal_rank", "rank_at", "smith_form",
    "det", "partial_op", "two_var_from_images", "solve_left",
    "left_annihilator", "frac_inverse", "frac_nullspace",
    "poly_to_json", "poly_from_json", "polymat_to_json", "polymat_from_json",
]

DEFAULT_RANK_TOL = 1e-8


def to_fraction(x):
    """Convert ``x`` to an exact :class:`Fraction`.

    Floats go through their shortest decimal ``repr`` so that ``0.1``
    becomes ``1/10`` rather than the binary expansion.  Strings of the
    form ``"num/den"`` or decimals are accepted.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)) and not isinstance(x, bool):
        return Fraction(x)
    if isinstance(x, (float, np.floating)):
        if not np.isfinite(x):
            raise ValueError(f"non-finite coefficient {x!r}")
        return Fraction(repr(float(x)))
    if isinstance(x, np.integer):
        return Fraction(int(x))
    if isinstance(x, str):
        return Fraction(x.strip())
    raise TypeError(f"cannot convert {type(x).__name__} to an exact rational")


class Poly:
    """Immutable univariate polynomial with rational coefficients.

    ``Poly([c0, c1, c2])`` is ``c0 + c1*xi + c2*xi**2``.  Trailing zeros are
    stripped, so the zero polynomial has ``coeffs == ()``.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs=()):
        if isinstance(coeffs, Poly):
            coeffs = coeffs.coeffs
        elif not isinstance(coeffs, (list, tuple)):
            coeffs = (coeffs,)
        c = [to_fraction(v) for v in coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @classmethod
    def const(cls, c):
        return cls((c,))

    @classmethod
    def monomial(cls, k, c=1):
        return cls((0,) * k + (c,))

    @classmethod
    def from_roots(cls, roots):
        p = cls.const(1)
        for r in roots:
            p = p * cls((-to_fraction(r), 1))
        return p

    @property
    def degree(self):
        """Degree; ``-1`` for the zero polynomial."""
        return len(self.coeffs) - 1

    @property
    def lead(self):
        return self.coeffs[-1] if self.coeffs else Fraction(0)

    def is_zero(self):
        return not self.coeffs

    def is_constant(self):
        return len(self.coeffs) <= 1

    def __bool__(self):
        return bool(self.coeffs)

    def __eq__(self, other):
        if not isinstance(other, Poly):
            try:
                other = Poly(other)
            except TypeError:
                return NotImplemented
        return self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Poly({[str(c) for c in self.coeffs]})"

    def __str__(self):
        if not self.coeffs:
            return "0"
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0:
                continue
            mono = "" if k == 0 else ("xi" if k == 1 else f"xi^{k}")
            if mono and c == 1:
                terms.append(mono)
            elif mono and c == -1:
                terms.append("-" + mono)
            else:
                terms.append(f"{c}{'*' + mono if mono else ''}")
        return " + ".join(terms).replace("+ -", "- ")

    def _coerce(self, other):
        return other if isinstance(other, Poly) else Poly(other)

    def __add__(self, other):
        other = self._coerce(other)
        a, b = self.coeffs, other.coeffs
        if len(a) < len(b):
            a, b = b, a
        return Poly([x + (b[i] if i < len(b) else 0) for i, x in enumerate(a)])

    __radd__ = __add__

    def __neg__(self):
        return Poly([-c for c in self.coeffs])

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        if not self.coeffs or not other.coeffs:
            return Poly()
        out = [Fraction(0)] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Poly(out)

    __rmul__ = __mul__

    def __pow__(self, k):
        out = Poly.const(1)
        for _ in range(k):
            out = out * self
        return out

    def __divmod__(self, other):
        other = self._coerce(other)
        if other.is_zero():
            raise ZeroDivisionError("polynomial division by zero")
        rem = list(self.coeffs)
        dd = other.degree
        if len(rem) - 1 < dd:
            return Poly(), self
        quot = [Fraction(0)] * (len(rem) - dd)
        lead = other.lead
        for k in range(len(rem) - 1 - dd, -1, -1):
            c = rem[k + dd] / lead
            quot[k] = c
            if c:
                for i, b in enumerate(other.coeffs):
                    rem[k + i] -= c * b
        return Poly(quot), Poly(rem[:dd])

    def __floordiv__(self, other):
        return divmod(self, other)[0]

    def __mod__(self, other):
        return divmod(self, other)[1]

    def divides(self, other):
        """True if ``self`` divides ``other`` exactly (0 divides only 0)."""
        other = self._coerce(other)
        if self.is_zero():
            return other.is_zero()
        return (other % self).is_zero()

    def monic(self):
        if self.is_zero():
            return self
        lead = self.lead
        return Poly([c / lead for c in self.coeffs])

    def gcd(self, other):
        a, b = self, self._coerce(other)
        while b:
            a, b = b, a % b
        return a.monic()

    def scale_var(self, s):
        """Return ``p(s * xi)``."""
        s = to_fraction(s)
        return Poly([c * s ** k for k, c in enumerate(self.coeffs)])

    def derivative(self):
        return Poly([k * c for k, c in enumerate(self.coeffs)][1:])

    def __call__(self, x):
        if isinstance(x, (Fraction, int)) and not isinstance(x, bool):
            acc = Fraction(0)
            for c in reversed(self.coeffs):
                acc = acc * x + c
            return acc
        x = np.asarray(x, dtype=complex)
        acc = np.zeros_like(x)
        for c in reversed(self.coeffs):
            acc = acc * x + float(c)
        return acc if acc.ndim else complex(acc)

    def to_numpy(self):
        """Ascending float coefficient array."""
        return np.array([float(c) for c in self.coeffs], dtype=float)

    def roots(self):
        """Complex roots (with multiplicity) from the balanced companion matrix."""
        if self.degree < 1:
            return np.zeros(0, dtype=complex)
        mon = self.monic().coeffs
        # strip roots at zero exactly
        k0 = 0
        while mon[k0] == 0:
            k0 += 1
        core = mon[k0:]
        n = len(core) - 1
        out = [0j] * k0
        if n > 0:
            comp = np.zeros((n, n))
            comp[1:, :-1] = np.eye(n - 1)
            comp[:, -1] = [-float(c) for c in core[:-1]]
            out.extend(scipy.linalg.eigvals(comp))
        return np.array(out, dtype=complex)


def _as_poly(x):
    return x if isinstance(x, Poly) else Poly(x)


class PolyMatrix:
    """Immutable ``rows x cols`` matrix of :class:`Poly` entries.

    Zero-row and zero-column matrices are allowed; a ``0 x w`` kernel
    matrix describes the full behavior.
    """

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, entries, rows=None, cols=None):
        entries = [[_as_poly(e) for e in row] for row in entries]
        if rows is None:
            rows = len(entries)
        if cols is None:
            if not entries:
                raise ShapeMismatch("cols must be given for an empty matrix")
            cols = len(entries[0])
        if len(entries) != rows or any(len(r) != cols for r in entries):
            raise ShapeMismatch(f"entries do not form a {rows}x{cols} grid")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "cols", cols)
        object.__setattr__(self, "entries", tuple(tuple(r) for r in entries))

    def __setattr__(self, name, value):
        raise AttributeError("PolyMatrix is immutable")

    # -- constructors -----------------------------------------------------
    @classmethod
    def zeros(cls, rows, cols):
        return cls([[Poly()] * cols for _ in range(rows)], rows, cols)

    @classmethod
    def identity(cls, n):
        return cls([[Poly.const(1) if i == j else Poly() for j in range(n)]
                    for i in range(n)], n, n)

    @classmethod
    def from_constant(cls, a):
        """Degree-zero matrix from a 2-D array-like of numbers."""
        shape = np.shape(a)
        if len(shape) != 2:
            raise ShapeMismatch("constant matrix must be 2-D")
        a = [[to_fraction(v) for v in row] for row in _rows_of(a)]
        return cls([[Poly.const(v) for v in row] for row in a], shape[0], shape[1])

    @classmethod
    def from_coefficients(cls, coeffs):
        """Build from a list of constant matrices ``[P0, P1, ...]``."""
        coeffs = [np.atleast_2d(np.asarray(c, dtype=object)) for c in coeffs]
        rows, cols = coeffs[0].shape
        return cls([[Poly([c[i, j] for c in coeffs]) for j in range(cols)]
                    for i in range(rows)], rows, cols)

    @classmethod
    def xi_minus(cls, a):
        """Return ``xi*I - A`` for a constant square ``A``."""
        a = [[to_fraction(v) for v in row] for row in _rows_of(a)]
        n = len(a)
        return cls([[Poly((-a[i][j], 1 if i == j else 0)) for j in range(n)]
                    for i in range(n)], n, n)

    # -- basic protocol ---------------------------------------------------
    @property
    def shape(self):
        return (self.rows, self.cols)

    def __getitem__(self, idx):
        i, j = idx
        if isinstance(i, slice) or isinstance(j, slice) or \
                isinstance(i, (list, tuple)) or isinstance(j, (list, tuple)):
            ri = _index_list(i, self.rows)
            cj = _index_list(j, self.cols)
            return PolyMatrix([[self.entries[a][b] for b in cj] for a in ri],
                              len(ri), len(cj))
        return self.entries[i][j]

    def __eq__(self, other):
        if not isinstance(other, PolyMatrix):
            return NotImplemented
        return self.shape == other.shape and self.entries == other.entries

    def __hash__(self):
        return hash((self.shape, self.entries))

    def __repr__(self):
        body = "; ".join(", ".join(str(e) for e in row) for row in self.entries)
        return f"PolyMatrix({self.rows}x{self.cols}: [{body}])"

    @property
    def degree(self):
        return max((e.degree for row in self.entries for e in row), default=-1)

    def is_zero(self):
        return all(e.is_zero() for row in self.entries for e in row)

    def is_constant(self):
        return all(e.is_constant() for row in self.entries for e in row)

    @property
    def T(self):
        return PolyMatrix([[self.entries[i][j] for i in range(self.rows)]
                           for j in range(self.cols)], self.cols, self.rows)

    def __add__(self, other):
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} + {other.shape}")
        return PolyMatrix([[a + b for a, b in zip(r1, r2)]
                           for r1, r2 in zip(self.entries, other.entries)],
                          self.rows, self.cols)

    def __neg__(self):
        return PolyMatrix([[-a for a in r] for r in self.entries],
                          self.rows, self.cols)

    def __sub__(self, other):
        return self + (-other)

    def __matmul__(self, other):
        if not isinstance(other, PolyMatrix):
            other = PolyMatrix.from_constant(other)
        if self.cols != other.rows:
            raise ShapeMismatch(f"{self.shape} @ {other.shape}")
        out = []
        for i in range(self.rows):
            row = []
            for j in range(other.cols):
                acc = Poly()
                for k in range(self.cols):
                    a = self.entries[i][k]
                    if a:
                        b = other.entries[k][j]
                        if b:
                            acc = acc + a * b
                row.append(acc)
            out.append(row)
        return PolyMatrix(out, self.rows, other.cols)

    def __rmatmul__(self, other):
        return PolyMatrix.from_constant(other) @ self

    def scale(self, c):
        c = _as_poly(c)
        return PolyMatrix([[c * a for a in r] for r in self.entries],
                          self.rows, self.cols)

    def map(self, fn):
        return PolyMatrix([[fn(a) for a in r] for r in self.entries],
                          self.rows, self.cols)

    def hstack(self, other):
        if self.rows != other.rows:
            raise ShapeMismatch("hstack row mismatch")
        return PolyMatrix([r1 + r2 for r1, r2 in zip(self.entries, other.entries)],
                          self.rows, self.cols + other.cols)

    def vstack(self, other):
        if self.cols != other.cols:
            raise ShapeMismatch("vstack column mismatch")
        return PolyMatrix(list(self.entries) + list(other.entries),
                          self.rows + other.rows, self.cols)

    def coefficient(self, k):
        """Float matrix of the ``xi**k`` coefficients."""
        out = np.zeros((self.rows, self.cols))
        for i, row in enumerate(self.entries):
            for j, e in enumerate(row):
                if k < len(e.coeffs):
                    out[i, j] = float(e.coeffs[k])
        return out

    def coefficient_exact(self, k):
        return [[e.coeffs[k] if k < len(e.coeffs) else Fraction(0) for e in row]
                for row in self.entries]

    def row_degrees(self):
        return [max((e.degree for e in row), default=-1) for row in self.entries]

    def col_degrees(self):
        return self.T.row_degrees()

    def __call__(self, lam):
        return eval_matrix(self, lam)


def _rows_of(a):
    if isinstance(a, np.ndarray):
        return a.tolist()
    return [list(r) for r in a]


def _index_list(i, n):
    if isinstance(i, slice):
        return list(range(n))[i]
    if isinstance(i, (list, tuple)):
        return list(i)
    return [i]


def eval_matrix(P, lam):
    """Evaluate ``P`` entrywise at the complex point ``lam``."""
    out = np.zeros(P.shape, dtype=complex)
    for i, row in enumerate(P.entries):
        for j, e in enumerate(row):
            out[i, j] = e(complex(lam))
    return out


def rank_at(P, lam, tol=DEFAULT_RANK_TOL):
    """Numerical rank of ``P(lam)`` relative to its largest singular value."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if 0 in P.shape:
        return 0
    s = np.linalg.svd(eval_matrix(P, lam), compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


# ---------------------------------------------------------------------------
# exact constant-matrix helpers

def frac_inverse(a):
    """Exact inverse of a square rational matrix (list of lists)."""
    n = len(a)
    m = [[to_fraction(v) for v in row] + [Fraction(int(i == j)) for j in range(n)]
         for i, row in enumerate(a)]
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            raise ZeroDivisionError("singular matrix")
        m[c], m[piv] = m[piv], m[c]
        p = m[c][c]
        m[c] = [v / p for v in m[c]]
        for r in range(n):
            if r != c and m[r][c] != 0:
                f = m[r][c]
                m[r] = [x - f * y for x, y in zip(m[r], m[c])]
    return [row[n:] for row in m]


def frac_nullspace(a, ncols=None):
    """Basis (list of vectors) of the right nullspace of a rational matrix."""
    m = [[to_fraction(v) for v in row] for row in a]
    ncols = len(m[0]) if m else (ncols or 0)
    pivots = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        m[r] = [v / p for v in m[r]]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                f = m[i][c]
                m[i] = [x - f * y for x, y in zip(m[i], m[r])]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        v = [Fraction(0)] * ncols
        v[fcol] = Fraction(1)
        for row, pc in enumerate(pivots):
            v[pc] = -m[row][fcol]
        basis.append(v)
    return basis


# ---------------------------------------------------------------------------
# determinant

def det(P):
    """Exact determinant via fraction-free (Bareiss) elimination over Q[xi]."""
    if P.rows != P.cols:
        raise NonSquare(f"determinant of a {P.rows}x{P.cols} matrix")
    n = P.rows
    if n == 0:
        return Poly.const(1)
    m = [list(r) for r in P.entries]
    sign = 1
    prev = Poly.const(1)
    for k in range(n - 1):
        if m[k][k].is_zero():
            swap = next((i for i in range(k + 1, n) if m[i][k]), None)
            if swap is None:
                return Poly()
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                num = m[i][j] * m[k][k] - m[i][k] * m[k][j]
                q, r = divmod(num, prev)
                assert r.is_zero(), "Bareiss division must be exact"
                m[i][j] = q
        prev = m[k][k]
    d = m[n - 1][n - 1]
    return -d if sign < 0 else d


# ---------------------------------------------------------------------------
# Smith form

@dataclass(frozen=True)
class SmithDecomposition:
    """``U @ S @ V == P`` with ``U``, ``V`` unimodular.

    ``L`` and ``R`` are the accumulated row and column operations, i.e.
    ``L @ P @ R == S``, ``L == U^{-1}`` and ``R == V^{-1}``.
    """

    U: PolyMatrix
    S: PolyMatrix
    V: PolyMatrix
    L: PolyMatrix
    R: PolyMatrix
    invariant_factors: tuple

    @property
    def rank(self):
        return len(self.invariant_factors)

    @property
    def nontrivial_factors(self):
        return tuple(d for d in self.invariant_factors if d.degree > 0)


class _Work:
    """Mutable scratch state for the Smith reduction."""

    def __init__(self, P):
        self.a = [list(r) for r in P.entries]
        self.m, self.n = P.rows, P.cols
        eye = lambda k: [[Poly.const(1) if i == j else Poly() for j in range(k)]
                         for i in range(k)]
        self.L, self.U = eye(self.m), eye(self.m)
        self.R, self.V = eye(self.n), eye(self.n)

    def swap_rows(self, i, j):
        if i == j:
            return
        for mat in (self.a, self.L):
            mat[i], mat[j] = mat[j], mat[i]
        for row in self.U:
            row[i], row[j] = row[j], row[i]

    def swap_cols(self, i, j):
        if i == j:
            return
        for mat in (self.a, self.R):
            for row in mat:
                row[i], row[j] = row[j], row[i]
        self.V[i], self.V[j] = self.V[j], self.V[i]

    def add_row(self, i, j, q):
        """row_i += q * row_j."""
        for mat in (self.a, self.L):
            mat[i] = [x + q * y for x, y in zip(mat[i], mat[j])]
        for row in self.U:
            row[j] = row[j] - q * row[i]

    def add_col(self, j, i, q):
        """col_j += q * col_i."""
        for mat in (self.a, self.R):
            for row in mat:
                row[j] = row[j] + q * row[i]
        self.V[i] = [x - q * y for x, y in zip(self.V[i], self.V[j])]

    def scale_row(self, i, c):
        c = Fraction(c)
        for mat in (self.a, self.L):
            mat[i] = [x * c for x in mat[i]]
        for row in self.U:
            row[i] = row[i] * (1 / c)


def smith_form(P):
    """Smith normal form with unimodular transforms, in exact arithmetic.

    Pivots on the nonzero entry of least degree in the trailing submatrix,
    ties broken by the smallest ``(row, col)`` index.  Invariant factors are
    made monic.
    """
    w = _Work(P)
    a = w.a
    t = 0
    while t < min(w.m, w.n):
        while True:
            best = None
            for i in range(t, w.m):
                for j in range(t, w.n):
                    e = a[i][j]
                    if e and (best is None or e.degree < best[0]):
                        best = (e.degree, i, j)
            if best is None:
                break
            _, pi, pj = best
            w.swap_rows(t, pi)
            w.swap_cols(t, pj)
            piv = a[t][t]
            dirty = False
            for i in range(t + 1, w.m):
                if a[i][t]:
                    q, r = divmod(a[i][t], piv)
                    w.add_row(i, t, -q)
                    dirty = dirty or bool(r)
            for j in range(t + 1, w.n):
                if a[t][j]:
                    q, r = divmod(a[t][j], piv)
                    w.add_col(j, t, -q)
                    dirty = dirty or bool(r)
            if dirty:
                continue
            bad = next(((i, j) for i in range(t + 1, w.m) for j in range(t + 1, w.n)
                        if not piv.divides(a[i][j])), None)
            if bad is not None:
                w.add_row(t, bad[0], Poly.const(1))
                continue
            break
        if best is None:
            break
        w.scale_row(t, 1 / a[t][t].lead)
        t += 1

    factors = tuple(a[i][i] for i in range(t))
    mk = lambda mat, r, c: PolyMatrix(mat, r, c)
    return SmithDecomposition(
        U=mk(w.U, w.m, w.m), S=mk(a, w.m, w.n), V=mk(w.V, w.n, w.n),
        L=mk(w.L, w.m, w.m), R=mk(w.R, w.n, w.n), invariant_factors=factors)


def normal_rank(P):
    """Rank over the field of rational functions (count of invariant factors)."""
    if 0 in P.shape:
        return 0
    return smith_form(P).rank


def solve_left(R, Q):
    """Polynomial ``X`` with ``X @ R == Q``, or ``None`` if none exists.

    Decides kernel inclusion: ``ker R`` is contained in ``ker Q`` exactly
    when such an ``X`` exists.
    """
    if R.cols != Q.cols:
        raise ShapeMismatch("solve_left column mismatch")
    if Q.rows == 0:
        return PolyMatrix.zeros(0, R.rows)
    if R.rows == 0:
        return PolyMatrix.zeros(Q.rows, 0) if Q.is_zero() else None
    sd = smith_form(R)
    # X U S V = Q  <=>  Y S = Q V^{-1} = Z   with Y = X U
    Z = Q @ sd.R
    r = sd.rank
    y = [[Poly() for _ in range(R.rows)] for _ in range(Q.rows)]
    for i in range(Q.rows):
        for j in range(R.cols):
            z = Z[i, j]
            if j < r:
                q, rem = divmod(z, sd.invariant_factors[j])
                if rem:
                    return None
                y[i][j] = q
            elif z:
                return None
    return PolyMatrix(y, Q.rows, R.rows) @ sd.L


def left_annihilator(M):
    """Minimal left annihilator ``N`` (full row rank, ``N @ M == 0``).

    These are the trailing rows of ``U^{-1}`` from the Smith form of ``M``;
    ``ker N(d/dt) == im M(d/dt)``.
    """
    if M.cols == 0:
        return PolyMatrix.identity(M.rows)
    sd = smith_form(M)
    return sd.L[sd.rank:, :]


def is_unimodular(P):
    if P.rows != P.cols:
        return False
    d = det(P)
    return d.degree == 0


# ---------------------------------------------------------------------------
# two-variable matrices

class TwoVarPolyMatrix:
    """``Phi(zeta, eta) = sum_{j,k} Phi_jk zeta**j eta**k`` with exact coefficients.

    ``coeffs`` maps ``(j, k)`` to a ``size x size`` nested tuple of
    Fractions; zero blocks are dropped.
    """

    def __init__(self, coeffs, size):
        clean = {}
        for key, block in coeffs.items():
            block = tuple(tuple(to_fraction(v) for v in row) for row in _rows_of(block))
            if len(block) != size or any(len(r) != size for r in block):
                raise ShapeMismatch(f"block {key} is not {size}x{size}")
            if any(v for row in block for v in row):
                clean[(int(key[0]), int(key[1]))] = block
        self.coeffs = clean
        self.size = size

    def coefficient(self, j, k):
        block = self.coeffs.get((j, k))
        if block is None:
            return np.zeros((self.size, self.size))
        return np.array([[float(v) for v in row] for row in block])

    def is_zero(self):
        return not self.coeffs

    def is_symmetric(self):
        for (j, k), block in self.coeffs.items():
            other = self.coeffs.get((k, j))
            if other is None:
                return False
            if any(block[a][b] != other[b][a]
                   for a in range(self.size) for b in range(self.size)):
                return False
        return True

    def __call__(self, zeta, eta):
        out = np.zeros((self.size, self.size), dtype=complex)
        for (j, k) in self.coeffs:
            out += self.coefficient(j, k) * (complex(zeta) ** j) * (complex(eta) ** k)
        return out


def partial_op(Phi):
    """Return the one-variable matrix ``Phi(-xi, xi)``."""
    n = Phi.size
    acc = [[[] for _ in range(n)] for _ in range(n)]
    for (j, k), block in Phi.coeffs.items():
        sgn = -1 if j % 2 else 1
        for a in range(n):
            for b in range(n):
                if block[a][b]:
                    acc[a][b].append(Poly.monomial(j + k, sgn * block[a][b]))
    return PolyMatrix([[sum(acc[a][b], Poly()) for b in range(n)] for a in range(n)],
                      n, n)


def two_var_from_images(M1, sigma, M2):
    """Coefficients of ``M1(zeta)^T Sigma M2(eta)``."""
    S = [[to_fraction(v) for v in row] for row in _rows_of(sigma)]
    if len(S) != M1.rows or len(S) != M2.rows or any(len(r) != len(S) for r in S):
        raise ShapeMismatch("Sigma must be square and match the rows of M1 and M2")
    if M1.cols != M2.cols:
        raise ShapeMismatch("M1 and M2 must have the same number of columns")
    d1, d2 = max(M1.degree, 0), max(M2.degree, 0)
    coeffs = {}
    for j in range(d1 + 1):
        Aj = M1.coefficient_exact(j)          # rows x c
        AjT_S = [[sum((Aj[r][a] * S[r][s] for r in range(M1.rows)), Fraction(0))
                  for s in range(M1.rows)] for a in range(M1.cols)]
        for k in range(d2 + 1):
            Bk = M2.coefficient_exact(k)
            coeffs[(j, k)] = [[sum((AjT_S[a][s] * Bk[s][b] for s in range(M1.rows)),
                                   Fraction(0)) for b in range(M2.cols)]
                              for a in range(M1.cols)]
    return TwoVarPolyMatrix(coeffs, M1.cols)


# ---------------------------------------------------------------------------
# JSON

def poly_to_json(p):
    return [f"{c.numerator}/{c.denominator}" for c in p.coeffs]


def poly_from_json(obj):
    if isinstance(obj, (int, float, str)):
        obj = [obj]
    return Poly([to_fraction(c) for c in obj])


def polymat_to_json(P):
    return [[poly_to_json(e) for e in row] for row in P.entries]


def polymat_from_json(obj, cols=None):
    """Nested arrays row-major; each entry is a polynomial (list or scalar)."""
    rows = [[poly_from_json(e) for e in row] for row in obj]
    if not rows:
        if cols is None:
            raise ShapeMismatch("empty matrix needs an explicit column count")
        return PolyMatrix.zeros(0, cols)
    return PolyMatrix(rows)
