"""Acceptance suite: one PASS/FAIL line per criterion.

Lines are printed at the end of the pytest run (see ``conftest.py``) and
also when the module is executed directly with ``python3``.
"""

import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest
import scipy.linalg as sl

sys.path.insert(0, str(Path(__file__).parent))

from behavdiss import analysis as an  # noqa: E402
from behavdiss import behavior as bh  # noqa: E402
from behavdiss import riccati as rc  # noqa: E402
from behavdiss.cli import load_behavior, load_json  # noqa: E402
from behavdiss.polymat import Poly, PolyMatrix, polymat_from_json  # noqa: E402
from behavdiss.realization import StateSpace  # noqa: E402

from instances import ORACLE_GRID, controllable_siso, uncontrollable_unmixed  # noqa: E402
from oracles import dphi_det, invariant_factors_by_minors, popov_oracle, to_sympy  # noqa: E402

RESULTS = []

SIGMA = np.diag([1.0, -1.0])
J1 = -np.eye(1)
REF_K1 = np.array([[7, -1], [-1, 1]]) / 6
REF_K2 = np.array([[3, -0.5], [-0.5, 0.25]])
REF_BASIS1 = np.array([[1j, 2], [1j, 8], [1j, 1], [0, 1]])
EX2 = StateSpace([[0, -1], [4, -4]], [[1], [2]], [[0, 1]], [[0]])
# sigma(H) for Example 1, from the exact sympy eigenvalues of H
SIGMA_H1 = [0, 0, -1, 1]


def record(n, ok, msg):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {msg}"
    RESULTS.append(line)
    print(line)
    return ok


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def _ex1():
    return load_behavior(load_json("bundled:ex1_iso.json"))


def _sympy_to_poly(p):
    return Poly([Fraction(int(c.p), int(c.q)) for c in reversed(p.all_coeffs())])


# -- 1 ------------------------------------------------------------------------------

def check_1():
    cert, dt = _timed(lambda: rc.certify(_ex1(), SIGMA))
    ok = isinstance(cert, rc.StorageCertificate)
    err = float(np.max(np.abs(6 * cert.K - [[7, -1], [-1, 1]]))) if ok else np.inf
    ok = ok and err <= 1e-6 and cert.lmi_max_eig <= 1e-8 and cert.are_residual <= 1e-8
    res, lmi = rc.verify_certificate(cert.ss, cert.J, REF_K1)
    hd = rc.build_hamiltonian(rc.build_tilde(cert.ss, cert.J))
    X = rc.neutral_invariant_subspace(hd, rc.CSet((-1j,), (1,)))
    angle = float(np.max(sl.subspace_angles(X, REF_BASIS1)))
    ok = ok and res <= 1e-8 and lmi <= 1e-8 and angle <= 1e-6 and dt < 1.0
    return record(1, ok, f"|6K - ref|={err:.1e} res={cert.are_residual:.1e} "
                         f"lmi={cert.lmi_max_eig:.1e} ref_K res={res:.1e} lmi={lmi:.1e} "
                         f"angle={angle:.1e} t={dt:.3f}s")


# -- 2 ------------------------------------------------------------------------------

def check_2():
    res, lmi = rc.verify_certificate(EX2, J1, REF_K2)
    cert, dt = _timed(lambda: rc.certify(bh.Behavior.iso(EX2), SIGMA))
    ok = isinstance(cert, rc.StorageCertificate)
    r2, l2 = rc.verify_certificate(EX2, J1, cert.K) if ok else (np.inf, np.inf)
    ok = ok and res <= 1e-8 and lmi <= 1e-8 and r2 <= 1e-8 and l2 <= 1e-8 and dt < 1.0
    return record(2, ok, f"ref_K res={res:.1e} lmi={lmi:.1e}; certify "
                         f"res={r2:.1e} lmi={l2:.1e} t={dt:.3f}s")


# -- 3 ------------------------------------------------------------------------------

def _spectrum_identity(ss, tol):
    B = bh.Behavior.iso(ss)
    Mc = bh.observable_image(bh.controllable_part(B.as_kernel()))
    d = _sympy_to_poly(dphi_det(Mc, [[1, 0], [0, -1]]))
    hd = rc.build_hamiltonian(rc.build_tilde(ss, J1))
    return rc.spectrum_identity_check(hd.H, d, bh.uncontrollable_modes(B).modes, tol)


def check_3():
    ss = _ex1().state_space
    hd = rc.build_hamiltonian(rc.build_tilde(ss, J1))
    _, ua, ub = bh.pair_multisets(np.linalg.eigvals(hd.H), SIGMA_H1, 1e-6)
    ex1_ok = not ua and not ub and _spectrum_identity(ss, 1e-6)["passed"]
    rng = np.random.default_rng(2024)
    passed = 0
    for i in range(10):
        modes = [-1.0, -3.0] if i % 2 else [-2.0]
        ss = uncontrollable_unmixed(rng, 1 + i % 3, modes)
        passed += _spectrum_identity(ss, 1e-5)["passed"]
    return record(3, ex1_ok and passed == 10,
                  f"Example 1 pairs with {{0,0,-1,1}}: {ex1_ok}; random {passed}/10")


# -- 4 ------------------------------------------------------------------------------

def _real_blocks(ss):
    hd = rc.build_hamiltonian(rc.build_tilde(ss, J1))
    blocks = []
    for c in rc.eigen_clusters(hd.M):
        if c.is_real():
            blocks.extend(rc.partial_multiplicities(hd.M, c.center.real))
    return blocks


def check_4():
    b1 = _real_blocks(_ex1().state_space)
    b2 = _real_blocks(EX2)
    even = all(b % 2 == 0 for b in b1 + b2) and b1 and b2
    # det dPhi = xi^4 + xi^2 - 3 has a simple pair of imaginary roots
    B = bh.Behavior.image(PolyMatrix([[Poly([1, 1, 1])], [Poly.const(2)]], 2, 1))
    out = rc.certify(B, SIGMA, check_popov=False)
    refused = out.verdict == "refused:even_multiplicities"
    return record(4, bool(even and refused),
                  f"real block sizes Ex1={b1} Ex2={b2}; odd instance -> {out.verdict}")


# -- 5 ------------------------------------------------------------------------------

def _random_kernel(rng):
    rows, cols = int(rng.integers(1, 4)), int(rng.integers(2, 5))
    rows = min(rows, cols - 1) if rng.random() < 0.8 else rows
    deg = int(rng.integers(0, 4))
    entries = [[Poly([int(c) for c in rng.integers(-2, 3, size=int(rng.integers(1, deg + 2)))])
                for _ in range(cols)] for _ in range(rows)]
    R = PolyMatrix(entries, rows, cols)
    if rng.random() < 0.6:
        F = PolyMatrix.identity(rows)
        F = PolyMatrix([[Poly([int(rng.integers(-2, 3)), 1]) if i == j == 0 else F[i, j]
                         for j in range(rows)] for i in range(rows)], rows, rows)
        R = F @ R
    return R


def check_5():
    rng = np.random.default_rng(5)
    good = 0
    ks = []
    for _ in range(20):
        R = _random_kernel(rng)
        B = bh.Behavior.kernel(R)
        B2, k = bh.superbehavior(B)
        factors = invariant_factors_by_minors(to_sympy(R))
        k_oracle = sum(1 for f in factors if f.degree() > 0)
        ks.append(k_oracle)
        good += (k == k_oracle
                 and bh.input_cardinality(B2) == bh.input_cardinality(B) + k_oracle
                 and bh.contains(B2, B))
    return record(5, good == 20, f"{good}/20 kernels; nontrivial factor counts {ks}")


# -- 6 ------------------------------------------------------------------------------

def check_6():
    obj = load_json("bundled:embed_pair.json")
    B, rep = an.embed_both_ways(np.asarray(obj["sigma"], float),
                                polymat_from_json(obj["M_plus"]),
                                polymat_from_json(obj["M_minus"]))
    x = Poly([0, 1])
    target = bh.Behavior.kernel(PolyMatrix([[Poly.const(-3), x + Poly.const(4)],
                                            [x + Poly.const(5), Poly.const(-2)]], 2, 2))
    ok = rep["autonomous"] and bh.equal(B, target) and min(rep["eps_plus"],
                                                           rep["eps_minus"]) >= rep["margin"]
    return record(6, ok, f"autonomous={rep['autonomous']} kernel match={bh.equal(B, target)} "
                         f"margins=({rep['eps_plus']:.3g}, {rep['eps_minus']:.3g})")


# -- 7 ------------------------------------------------------------------------------

def check_7():
    B1 = load_behavior(load_json("bundled:ortho_b1.json"))
    B2 = load_behavior(load_json("bundled:ortho_b2.json"))
    v = an.orthogonality_check(B1, B2, np.eye(2))
    rejected = v.verdict == "fail" and "necessity" in v.label
    e1 = bh.Behavior.image(PolyMatrix([[Poly.const(1)], [Poly.const(0)]], 2, 1))
    e2 = bh.Behavior.image(PolyMatrix([[Poly.const(0)], [Poly.const(1)]], 2, 1))
    w = an.orthogonality_check(e1, e2, np.eye(2))
    exact = w.verdict == "pass" and w.label == "exact"
    return record(7, rejected and exact, f"autonomous pair -> {v.verdict} ({v.label}); "
                                         f"constant images -> {w.verdict} ({w.label})")


# -- 8 ------------------------------------------------------------------------------

def check_8():
    rng = np.random.default_rng(8)
    t0 = time.perf_counter()
    agree = 0
    for gain, expect in ((0.5, True), (2.0, False)):
        for i in range(25):
            ss = controllable_siso(rng, 1 + i % 4, gain)
            oracle_ok = popov_oracle(ss, J1, ORACLE_GRID) > 1e-6
            oracle_fail = popov_oracle(ss, J1, ORACLE_GRID) < -1e-6
            out = rc.certify(bh.Behavior.iso(ss), SIGMA)
            if expect:
                agree += oracle_ok and out.verdict == "dissipative"
            else:
                agree += oracle_fail and out.verdict.startswith("refused:")
    dt = time.perf_counter() - t0
    return record(8, agree == 50 and dt < 30, f"{agree}/50 agree with grid oracle, t={dt:.1f}s")


# -- 9 ------------------------------------------------------------------------------

def check_9():
    obj = load_json("bundled:lossless.json")
    rep = an.lossless_obstruction(obj["A"], obj["C"])
    ss = StateSpace(obj["A"], np.zeros((2, 0)), obj["C"], np.zeros((1, 0)))
    out = rc.certify(bh.Behavior.iso(ss), -np.eye(1))
    ok = rep.verdict == "unobservable storage required" and out.verdict.startswith("refused:")
    return record(9, ok, f"analysis -> {rep.verdict}; pipeline -> {out.verdict}")


CHECKS = [check_1, check_2, check_3, check_4, check_5, check_6, check_7, check_8, check_9]


@pytest.mark.parametrize("check", CHECKS, ids=[f"criterion_{i}" for i in range(1, 10)])
def test_criterion(check):
    assert check()


if __name__ == "__main__":
    sys.exit(0 if all([c() for c in CHECKS]) else 1)
