"""Obstructions and constructions around dissipativity of uncontrollable behaviors.

* static controllable part with imaginary uncontrollable modes: no ARE solution;
* supply ``-w^T w`` with lossless autonomous dynamics: storage must see unobservable states;
* Sigma-orthogonality of (possibly uncontrollable) behaviors;
* behaviors that embed in both a strictly Sigma- and a strictly (-Sigma)-dissipative one.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import behavior as bh
from . import riccati as rc
from .exceptions import (BehavDissError, ShapeMismatch, StrictnessNotVerified)
from .polymat import PolyMatrix, polymat_to_json, to_fraction
from .realization import StateSpace, is_observable

__all__ = ["ObstructionReport", "NotApplicable", "OrthogonalityVerdict",
           "static_part_nonexistence", "lossless_obstruction", "orthogonality_check",
           "embed_both_ways", "cardinality_bounds"]


@dataclass
class ObstructionReport:
    kind: str
    verdict: str
    details: dict = field(default_factory=dict)

    def to_json(self):
        return {"kind": self.kind, "verdict": self.verdict,
                "details": rc._jsonable(self.details)}


@dataclass
class NotApplicable:
    kind: str
    reason: str

    verdict = "not_applicable"

    def to_json(self):
        return {"kind": self.kind, "verdict": self.verdict, "reason": self.reason}


def _on_imag_axis(lam, tol):
    return abs(lam.real) <= tol * (1 + abs(lam))


def _supply_for_iso(m, J):
    J = np.atleast_2d(np.asarray(J, dtype=float)) if np.size(J) else np.zeros((0, 0))
    return scipy.linalg.block_diag(np.eye(m), J) if m else J


def static_part_nonexistence(ss, J, tol=1e-8):
    """Nonexistence of a symmetric ARE solution when ``B = 0`` and ``sigma(A)`` is imaginary.

    Applicable only if ``B = 0``, ``(C, A)`` observable, ``I + D^T J D > 0``
    and ``sigma(A)`` lies on the imaginary axis.  The claim is checked
    two ways: the Lyapunov equation ``K A + A^T K = C~`` (the ARE with
    ``D~ = 0``) has no solution in the least-squares sense, and
    :func:`riccati.certify` refuses.
    """
    kind = "static-nonexistence"
    J = np.atleast_2d(np.asarray(J, dtype=float)) if ss.p_out else np.zeros((0, 0))
    if np.linalg.norm(ss.B) > tol:
        return NotApplicable(kind, "B is nonzero: controllable part is not static")
    if not is_observable(ss):
        return NotApplicable(kind, "(C, A) is not observable")
    strict = rc.strictness_at_infinity(ss.D, J)
    if not strict > tol:
        return NotApplicable(kind, "I + D^T J D is not positive definite")
    eig = np.linalg.eigvals(ss.A) if ss.n else np.zeros(0, complex)
    if not all(_on_imag_axis(z, tol) for z in eig):
        return NotApplicable(kind, "uncontrollable modes are not all on the imaginary axis")

    details = {"eigenvalues": eig, "strictness_at_infinity": strict}
    try:
        At, _, Ct = rc.build_tilde(ss, J)
    except BehavDissError as exc:
        return NotApplicable(kind, str(exc))
    n = ss.n
    op = np.kron(np.eye(n), At.T) + np.kron(At.T, np.eye(n))
    sol, *_ = np.linalg.lstsq(op, Ct.reshape(-1, order="F"), rcond=None)
    K = sol.reshape(n, n, order="F")
    K = 0.5 * (K + K.T)
    lyap_res = float(np.linalg.norm(K @ At + At.T @ K - Ct))
    details["lyapunov_residual"] = lyap_res
    details["least_squares_K"] = K

    sigma = _supply_for_iso(ss.m, J)
    outcome = rc.certify(bh.Behavior.iso(ss), sigma, tol=tol, check_popov=False)
    details["pipeline_verdict"] = outcome.verdict
    refused = isinstance(outcome, rc.Refusal)
    verdict = "nonexistence" if refused and lyap_res > tol else "unconfirmed"
    return ObstructionReport(kind, verdict, details)


def lossless_obstruction(A, C, tol=1e-8, check_pipeline=True):
    """For supply ``-w^T w``: imaginary-axis modes seen by ``C`` rule out observable storage.

    Every eigenvector ``x`` of ``A`` at an imaginary eigenvalue must satisfy
    ``C x = 0`` for an observable storage function to exist.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    n = A.shape[0]
    if C.shape[1] != n:
        raise ShapeMismatch("C must have as many columns as A")
    eig = np.linalg.eigvals(A) if n else np.zeros(0, complex)
    scale = max(1.0, np.linalg.norm(A, 2)) if n else 1.0
    items = []
    seen = []
    for lam in eig:
        if not _on_imag_axis(lam, tol) or any(abs(lam - s) <= 1e-6 * scale for s in seen):
            continue
        seen.append(lam)
        _, s, vh = np.linalg.svd(A - lam * np.eye(n))
        r = int(np.sum(s > 1e-8 * scale))
        for x in vh[r:].conj():
            items.append({"eigenvalue": complex(lam),
                          "eigenvector": x,
                          "norm_Cx": float(np.linalg.norm(C @ x))})
    required = any(it["norm_Cx"] > tol for it in items)
    details = {"modes": items, "supply": "-w^T w"}
    if check_pipeline and C.shape[0]:
        ss = StateSpace(A, np.zeros((n, 0)), C, np.zeros((C.shape[0], 0)))
        outcome = rc.certify(bh.Behavior.iso(ss), -np.eye(C.shape[0]), tol=tol,
                             check_popov=False)
        details["pipeline_verdict"] = outcome.verdict
    verdict = "unobservable storage required" if required else "no obstruction"
    return ObstructionReport("lossless-unobservable", verdict, details)


# ---------------------------------------------------------------------------
# orthogonality

@dataclass
class OrthogonalityVerdict:
    verdict: str            # "pass" | "fail" | "inconclusive"
    label: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_json(self):
        return {"kind": "orthogonality", "verdict": self.verdict, "label": self.label,
                "details": rc._jsonable(self.details)}


def _exact_sigma(sigma):
    S = sigma.sigma_raw if isinstance(sigma, rc.SupplyRate) else sigma
    return [[to_fraction(v) for v in row] for row in np.atleast_2d(np.asarray(S, dtype=object))]


def _controllable_orthogonal(B1, B2, S):
    M1 = bh.observable_image(B1)
    M2 = bh.observable_image(B2)
    # M1(-xi)^T Sigma M2(xi)
    dphi = M1.map(lambda p: p.scale_var(-1)).T @ PolyMatrix.from_constant(S) @ M2
    return dphi.is_zero(), dphi


def orthogonality_check(B1, B2, sigma, tol=1e-8):
    """Three-valued Sigma-orthogonality test.

    Controllable pairs are decided exactly by ``dPhi = 0`` with
    ``Phi = M1(zeta)^T Sigma M2(eta)``.  Otherwise the strict bound
    ``m(B1) + m(B2) < w`` is necessary; past it, only the default
    superbehavior witnesses are tried and a failure is inconclusive.
    """
    if B1.w != B2.w:
        raise ShapeMismatch("behaviors must have the same number of variables")
    S = _exact_sigma(sigma)
    if len(S) != B1.w:
        raise ShapeMismatch("Sigma must be w x w")
    c1, c2 = bh.is_controllable(B1), bh.is_controllable(B2)
    m1, m2 = bh.input_cardinality(B1), bh.input_cardinality(B2)
    details = {"m1": m1, "m2": m2, "w": B1.w, "controllable": [c1, c2]}
    if c1 and c2:
        ok, dphi = _controllable_orthogonal(B1, B2, S)
        details["dPhi"] = polymat_to_json(dphi)
        return OrthogonalityVerdict("pass" if ok else "fail", "exact", details)
    if m1 + m2 >= B1.w:
        return OrthogonalityVerdict(
            "fail", "necessity: m(B1) + m(B2) < w violated", details)
    W1 = bh.superbehavior(B1)[0] if not c1 else B1
    W2 = bh.superbehavior(B2)[0] if not c2 else B2
    ok, dphi = _controllable_orthogonal(W1, W2, S)
    details["dPhi_default_witness"] = polymat_to_json(dphi)
    if ok:
        return OrthogonalityVerdict("pass", "witness-based: PASS", details)
    return OrthogonalityVerdict("inconclusive", "default-witness FAIL (inconclusive)", details)


# ---------------------------------------------------------------------------
# embedding in strictly Sigma- and (-Sigma)-dissipative behaviors

EMBED_MARGIN = 1e-6


def _strict_margin(M, S, grid):
    verdict = rc.controllable_dissipativity(M, S, grid=grid, tol=0.0)
    boundary = verdict.boundary_omegas
    if np.isscalar(grid) or np.ndim(grid) == 0:
        omegas = rc.default_grid(grid)
    else:
        omegas = np.asarray(grid, dtype=float)
    omegas = np.concatenate([omegas, boundary])
    eig, _ = rc.popov_values(M, S, omegas)
    k = int(np.argmin(eig[:, 0]))
    return float(eig[k, 0]), float(omegas[k])


def embed_both_ways(sigma, M_plus, M_minus, tol=1e-8, grid=2000, margin=EMBED_MARGIN):
    """Intersect ``im M_plus`` (strictly Sigma-dissipative) with ``im M_minus``
    (strictly (-Sigma)-dissipative).  The intersection must be autonomous.
    """
    S = np.atleast_2d(np.asarray(
        sigma.sigma_raw if isinstance(sigma, rc.SupplyRate) else sigma, dtype=float))
    if M_plus.rows != len(S) or M_minus.rows != len(S):
        raise ShapeMismatch("image matrices must have w rows")
    if margin <= tol:
        raise ValueError("margin must exceed tol")
    eps_plus, w_plus = _strict_margin(M_plus, S, grid)
    if eps_plus < margin:
        raise StrictnessNotVerified(
            f"M_plus not strictly Sigma-dissipative: min eigenvalue {eps_plus:.3e} "
            f"at w = {w_plus:.6g}")
    eps_minus, w_minus = _strict_margin(M_minus, -S, grid)
    if eps_minus < margin:
        raise StrictnessNotVerified(
            f"M_minus not strictly (-Sigma)-dissipative: min eigenvalue {eps_minus:.3e} "
            f"at w = {w_minus:.6g}")
    B = bh.intersect(bh.Behavior.image(M_plus), bh.Behavior.image(M_minus))
    evals = np.linalg.eigvalsh(S)
    sp, sm = int(np.sum(evals > 0)), int(np.sum(evals < 0))
    m = bh.input_cardinality(B)
    report = {
        "kind": "embedding",
        "eps_plus": eps_plus,
        "eps_minus": eps_minus,
        "margin": margin,
        "autonomous": bh.is_autonomous(B),
        "kernel": polymat_to_json(B.kernel_matrix()),
        "m": m,
        "sigma_plus": sp,
        "sigma_minus": sm,
        "m_le_min_signature": m <= min(sp, sm),
    }
    return B, report


def cardinality_bounds(B, sigma):
    """Input-cardinality necessary conditions for Sigma-dissipativity."""
    S = np.atleast_2d(np.asarray(
        sigma.sigma_raw if isinstance(sigma, rc.SupplyRate) else sigma, dtype=float))
    evals = np.linalg.eigvalsh(0.5 * (S + S.T))
    sp, sm = int(np.sum(evals > 0)), int(np.sum(evals < 0))
    m = bh.input_cardinality(B)
    controllable = bh.is_controllable(B)
    report = {"m": m, "sigma_plus": sp, "sigma_minus": sm, "controllable": controllable,
              "m_le_sigma_plus": m <= sp}
    if not controllable and sp and sm:
        report["uncontrollable_strict_bound"] = m < min(sp, sm)
    return report
