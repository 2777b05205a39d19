from fractions import Fraction

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from behavdiss.exceptions import NonSquare, ShapeMismatch
from behavdiss.polymat import (Poly, PolyMatrix, det, eval_matrix, is_unimodular,
                               left_annihilator, normal_rank, partial_op,
                               polymat_from_json, polymat_to_json, rank_at,
                               smith_form, solve_left, to_fraction,
                               two_var_from_images)

from conftest import P, pm
from oracles import invariant_factors_by_minors, to_sympy, xi


# -- strategies --------------------------------------------------------------

small = st.integers(-3, 3)
polys = st.lists(small, min_size=0, max_size=4).map(Poly)


@st.composite
def polymats(draw, max_rows=3, max_cols=4, max_deg=3):
    r = draw(st.integers(1, max_rows))
    c = draw(st.integers(1, max_cols))
    coeffs = st.lists(small, min_size=0, max_size=max_deg + 1).map(Poly)
    return PolyMatrix([[draw(coeffs) for _ in range(c)] for _ in range(r)], r, c)


# -- Poly ----------------------------------------------------------------------

def test_poly_normalizes_trailing_zeros():
    assert Poly([1, 2, 0, 0]) == Poly([1, 2])
    assert Poly([0, 0]).is_zero()
    assert Poly().degree < 0


def test_poly_arithmetic_and_division():
    a = P(1, 2, 1)
    b = P(1, 1)
    q, r = divmod(a, b)
    assert q == P(1, 1) and r.is_zero()
    assert a.gcd(P(-1, 0, 1)) == P(1, 1)
    assert (a * b) == P(1, 3, 3, 1)
    assert (a - a).is_zero()


@given(polys, polys.filter(lambda p: not p.is_zero()))
def test_divmod_identity(a, b):
    q, r = divmod(a, b)
    assert q * b + r == a
    assert r.is_zero() or r.degree < b.degree


@given(polys, polys)
def test_gcd_divides_both(a, b):
    g = a.gcd(b)
    if g.is_zero():
        assert a.is_zero() and b.is_zero()
    else:
        assert g.lead == 1
        assert g.divides(a) and g.divides(b)


def test_poly_evaluation_exact_and_complex():
    p = P(1, 1, 1)
    assert p(Fraction(1, 2)) == Fraction(7, 4)
    assert abs(p(1j) - 1j) < 1e-15


def test_roots_from_roots_round_trip():
    p = Poly.from_roots([-1, -2, 3])
    assert sorted(np.round(p.roots().real, 10)) == [-2, -1, 3]


def test_to_fraction_floats_use_shortest_repr():
    assert to_fraction(0.1) == Fraction(1, 10)
    assert to_fraction(-1.5) == Fraction(-3, 2)


# -- PolyMatrix ----------------------------------------------------------------

def test_matmul_and_transpose():
    A = pm([[(0, 1), 1], [0, (1, 1)]])
    B = pm([[1, 0], [(0, -1), 1]])
    C = A @ B
    assert C == pm([[0, 1], [(0, -1, -1), (1, 1)]])
    assert C.T.T == C


def test_from_constant_rejects_non_2d():
    with pytest.raises(ShapeMismatch):
        PolyMatrix.from_constant([1, 2, 3])


def test_det_against_sympy():
    R = pm([[-3, (4, 1)], [(5, 1), -2]])
    d = det(R)
    assert d == P(-14, -9, -1)
    assert sp.expand(to_sympy(R).det()) == -xi ** 2 - 9 * xi - 14


def test_det_nonsquare():
    with pytest.raises(NonSquare):
        det(pm([[1, 2]]))


def test_rank_at_drops_at_uncontrollable_mode():
    R = pm([[(1, 2, 1), (-1, -3, -2)]])
    assert normal_rank(R) == 1
    assert rank_at(R, -1) == 0
    assert rank_at(R, 0) == 1


def test_eval_matrix():
    R = pm([[(1, 1), 2]])
    assert np.allclose(eval_matrix(R, 2.0), [[3, 2]])


# -- Smith form ----------------------------------------------------------------

def _check_smith(Pm):
    sd = smith_form(Pm)
    assert sd.U @ sd.S @ sd.V == Pm
    assert sd.L @ Pm @ sd.R == sd.S
    assert sd.L @ sd.U == PolyMatrix.identity(Pm.rows)
    assert sd.V @ sd.R == PolyMatrix.identity(Pm.cols)
    assert is_unimodular(sd.U) and is_unimodular(sd.V)
    for i in range(Pm.rows):
        for j in range(Pm.cols):
            if i != j:
                assert sd.S[i, j].is_zero()
    f = sd.invariant_factors
    for a, b in zip(f, f[1:]):
        assert a.divides(b)
    assert all(d.lead == 1 for d in f)
    return sd


def test_smith_example_kernel():
    sd = _check_smith(pm([[(1, 2, 1), (-1, -3, -2)]]))
    assert sd.invariant_factors == (P(1, 1),)


def test_smith_zero_matrix():
    sd = smith_form(PolyMatrix.zeros(2, 3))
    assert sd.rank == 0


@given(polymats())
def test_smith_decomposition_properties(Pm):
    _check_smith(Pm)


@given(polymats(max_rows=3, max_cols=3, max_deg=2))
def test_smith_matches_determinantal_divisors(Pm):
    sd = smith_form(Pm)
    oracle = invariant_factors_by_minors(to_sympy(Pm))
    mine = [sp.Poly(sum(sp.Rational(c.numerator, c.denominator) * xi ** k
                        for k, c in enumerate(d.coeffs)), xi) for d in sd.invariant_factors]
    assert len(mine) == len(oracle)
    for a, b in zip(mine, oracle):
        assert sp.expand(a.as_expr() - b.as_expr()) == 0


@given(polymats(max_rows=2, max_cols=3, max_deg=2), polymats(max_rows=2, max_cols=2, max_deg=1))
def test_solve_left_recovers_multiplier(R, X):
    if X.cols != R.rows:
        X = PolyMatrix([[X[i % X.rows, j % X.cols] for j in range(R.rows)]
                        for i in range(X.rows)], X.rows, R.rows)
    Q = X @ R
    Y = solve_left(R, Q)
    assert Y is not None
    assert Y @ R == Q


def test_solve_left_detects_non_inclusion():
    R = pm([[1, 0]])
    Q = pm([[0, 1]])
    assert solve_left(R, Q) is None


def test_left_annihilator():
    M = pm([[(4, 1)], [3]])
    N = left_annihilator(M)
    assert (N @ M).is_zero()
    assert N.rows == 1 and normal_rank(N) == 1


# -- two-variable matrices -------------------------------------------------------

def test_partial_op_of_example_image():
    M = pm([[(1, 2)], [(1, 1)]])
    dphi = partial_op(two_var_from_images(M, [[1, 0], [0, -1]], M))
    assert dphi[0, 0] == P(0, 0, -3)


def test_two_var_symmetry_for_symmetric_sigma():
    M = pm([[(1, 2), 1], [(1, 1), (0, 1)]])
    Phi = two_var_from_images(M, [[1, 0], [0, -1]], M)
    assert Phi.is_symmetric()


# -- JSON ----------------------------------------------------------------------

@given(polymats())
def test_polymat_json_round_trip(Pm):
    assert polymat_from_json(polymat_to_json(Pm), cols=Pm.cols) == Pm
