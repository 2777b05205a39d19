"""Storage functions from neutral invariant subspaces of the Hamiltonian.

The certification pipeline (:func:`certify`) works as follows.  Bring the
supply rate to signature form, realize the behavior observably, check
unmixing of the uncontrollable modes and strictness at infinity, and check
the Popov function of the controllable part.  Then build the Hamiltonian
``H`` and ``M = jH``, select a c-set containing ``j * Lambda_un``, compute
the n-dimensional M-invariant neutral subspace and read ``K = X2 X1^{-1}``
off it.  The result is verified against the Riccati equation and the
dissipation LMI.
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
import scipy.linalg

from . import behavior as bh
from .exceptions import (BehavDissError, IllConditioned, ImproperTransfer,
                         InputCardinalityExceeded, NeutralityFailed, NonHermitian,
                         NonReal, NotGraphSubspace, OddMultiplicity,
                         SelfAdjointnessFailed, ShapeMismatch, SingularJDD,
                         SingularOutputBlock, SingularSigma, StrictnessViolated,
                         UnmixingViolated)
from .polymat import (PolyMatrix, det, eval_matrix, partial_op, to_fraction,
                      two_var_from_images)
from .realization import (StateSpace, feedthrough, is_observable, kalman,
                          observability_map, realize)

__all__ = [
    "SupplyRate", "HamiltonianData", "CSet", "StorageCertificate", "Refusal",
    "PopovVerdict", "canonicalize_supply", "strictness_at_infinity",
    "build_tilde", "build_hamiltonian", "spectrum_identity_check",
    "partial_multiplicities", "eigen_clusters", "build_cset",
    "neutral_invariant_subspace", "extract_K", "verify_certificate",
    "controllable_dissipativity", "popov_values", "polish_K", "certify",
]

CERT_TOL = 1e-8
CLUSTER_TOL = 1e-5       # relative to max(1, |M|); covers Jordan-block splitting
REAL_TOL = 1e-7
SUBSPACE_TOL = 1e-6
COND_MAX = 1e10
HERMITIAN_TOL = 1e-8


# ---------------------------------------------------------------------------
# supply rate

@dataclass(frozen=True)
class SupplyRate:
    """Supply rate in signature form.

    ``W`` is the change of variables ``w = W v`` with
    ``W^T Sigma_raw W = diag(signs)``.  When ``Sigma_raw`` is diagonal the
    variables keep their order and ``signs`` is simply ``sign(diag)``;
    otherwise positive directions come first.  ``J`` is ``diag(I_q, -I_p)``.
    """

    sigma_raw: np.ndarray
    W: np.ndarray
    signs: np.ndarray
    m: int
    q: int
    p: int
    J: np.ndarray

    @property
    def sigma(self):
        return np.diag(self.signs.astype(float))

    @property
    def sigma_plus(self):
        return self.m + self.q

    @property
    def sigma_minus(self):
        return self.p

    @property
    def diagonal(self):
        return np.count_nonzero(self.sigma_raw - np.diag(np.diag(self.sigma_raw))) == 0


def canonicalize_supply(sigma_raw, m_B, tol=1e-12):
    """Congruence ``W`` bringing ``Sigma_raw`` to ``diag(+-1)``; split ``sigma_+ = m + q``."""
    S = np.atleast_2d(np.asarray(sigma_raw, dtype=float))
    if S.shape[0] != S.shape[1]:
        raise ShapeMismatch("Sigma must be square")
    if not np.allclose(S, S.T, atol=tol * max(1.0, np.abs(S).max(initial=0.0))):
        raise ValueError("Sigma must be symmetric")
    S = 0.5 * (S + S.T)
    evals = np.linalg.eigvalsh(S) if S.size else np.zeros(0)
    if S.size and np.min(np.abs(evals)) <= tol * max(1.0, np.max(np.abs(evals))):
        raise SingularSigma("Sigma is singular")
    diag = np.count_nonzero(S - np.diag(np.diag(S))) == 0
    if diag:
        d = np.diag(S)
        W = np.diag(1.0 / np.sqrt(np.abs(d)))
        signs = np.sign(d).astype(int)
    else:
        lam, Q = np.linalg.eigh(S)
        order = np.concatenate([np.where(lam > 0)[0][::-1], np.where(lam < 0)[0]])
        lam, Q = lam[order], Q[:, order]
        W = Q / np.sqrt(np.abs(lam))
        signs = np.sign(lam).astype(int)
    sp = int(np.sum(signs > 0))
    sm = int(np.sum(signs < 0))
    if m_B > sp:
        raise InputCardinalityExceeded(
            f"input cardinality {m_B} exceeds positive signature {sp}")
    q = sp - m_B
    J = np.diag(np.concatenate([np.ones(q), -np.ones(sm)]))
    return SupplyRate(S, W, signs, m_B, q, sm, J)


def strictness_at_infinity(D, J):
    """Smallest eigenvalue of ``I + D^T J D``."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    J = np.atleast_2d(np.asarray(J, dtype=float)) if np.size(J) else np.zeros((0, 0))
    m = D.shape[1]
    if m == 0:
        return np.inf
    Rm = np.eye(m) + D.T @ J @ D
    return float(np.linalg.eigvalsh(0.5 * (Rm + Rm.T))[0])


# ---------------------------------------------------------------------------
# Hamiltonian

def build_tilde(ss, J):
    """``(A~, D~, C~)`` of the Riccati equation ``K A~ + A~^T K + K D~ K - C~ = 0``."""
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    J = np.atleast_2d(np.asarray(J, dtype=float)) if ss.p_out else np.zeros((0, 0))
    if J.shape != (ss.p_out, ss.p_out):
        raise ShapeMismatch("J must match the number of outputs")
    m = ss.m
    Rm = np.eye(m) + D.T @ J @ D
    if m and np.linalg.eigvalsh(0.5 * (Rm + Rm.T))[0] <= 0:
        raise StrictnessViolated("I + D^T J D is not positive definite")
    JDD = J + D @ D.T
    if ss.p_out:
        s = np.linalg.svd(JDD, compute_uv=False)
        if s[-1] <= 1e-12 * max(1.0, s[0]):
            raise SingularJDD("J + D D^T is singular")
    Rinv = np.linalg.inv(Rm) if m else np.zeros((0, 0))
    At = A - B @ Rinv @ D.T @ J @ C
    Dt = B @ Rinv @ B.T
    Ct = C.T @ np.linalg.solve(JDD, C) if ss.p_out else np.zeros_like(A)
    Dt = 0.5 * (Dt + Dt.T)
    Ct = 0.5 * (Ct + Ct.T)
    return At, Dt, Ct


@dataclass(frozen=True)
class HamiltonianData:
    Atilde: np.ndarray
    Dtilde: np.ndarray
    Ctilde: np.ndarray
    H: np.ndarray
    M: np.ndarray
    P: np.ndarray
    Phat: np.ndarray

    @property
    def n(self):
        return self.Atilde.shape[0]

    @property
    def self_adjoint_residual(self):
        return float(np.linalg.norm(self.P @ self.M - self.M.conj().T @ self.P))

    @property
    def P_invertible(self):
        if self.n == 0:
            return True
        s = np.linalg.svd(self.P, compute_uv=False)
        return bool(s[-1] > 1e-12 * max(1.0, s[0]))


def build_hamiltonian(tilde, tol=1e-12):
    """Assemble ``H``, ``M = jH``, ``P`` and ``P^``; check ``P M = M^* P``."""
    At, Dt, Ct = tilde
    n = At.shape[0]
    H = np.block([[At, Dt], [Ct, -At.T]])
    M = 1j * H
    P = np.block([[-Ct, At.T], [At, Dt]]).astype(complex)
    Phat = 1j * np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    hd = HamiltonianData(At, Dt, Ct, H, M, P, Phat)
    if n:
        scale = max(1.0, np.linalg.norm(P, 2) * np.linalg.norm(M, 2))
        if hd.self_adjoint_residual > tol * scale * 2 * n:
            raise SelfAdjointnessFailed(
                f"|PM - M*P| = {hd.self_adjoint_residual:.3e}")
    return hd


def spectrum_identity_check(H, dphi_det, modes, tol=1e-6):
    """Pair ``sigma(H)`` with ``roots(det dPhi) + Lambda_un + (-Lambda_un)``."""
    modes = np.asarray(list(modes), complex)
    expected = np.concatenate([dphi_det.roots(), modes, -modes])
    eig = np.linalg.eigvals(H) if H.size else np.zeros(0, complex)
    report = {"degree_condition": dphi_det.degree + 2 * len(modes) == H.shape[0],
              "sigma_H": eig, "expected": expected}
    pairs, ua, ub = bh.pair_multisets(eig, expected, tol)
    report.update(pairs=pairs, unmatched_H=ua, unmatched_expected=ub)
    report["passed"] = bool(report["degree_condition"] and not ua and not ub)
    return report


# ---------------------------------------------------------------------------
# eigenvalue clusters and partial multiplicities

@dataclass
class Cluster:
    center: complex
    count: int
    members: np.ndarray = field(repr=False)

    def is_real(self, tol=REAL_TOL):
        return abs(self.center.imag) <= tol * (1 + abs(self.center))


def eigen_clusters(M, tol=CLUSTER_TOL, eigvals=None):
    """Single-linkage clusters of the spectrum of ``M`` at distance ``tol*max(1,|M|)``.

    A Jordan block splits into a ring of computed eigenvalues around the
    true one; the mean of the cluster recovers it to high accuracy.
    """
    ev = np.linalg.eigvals(M) if eigvals is None else np.asarray(eigvals, complex)
    if len(ev) == 0:
        return []
    delta = tol * max(1.0, np.linalg.norm(M, 2) if np.ndim(M) == 2 else 1.0)
    label = -np.ones(len(ev), int)
    nxt = 0
    for i in range(len(ev)):
        if label[i] >= 0:
            continue
        stack, label[i] = [i], nxt
        while stack:
            k = stack.pop()
            close = np.where((label < 0) & (np.abs(ev - ev[k]) <= delta))[0]
            label[close] = nxt
            stack.extend(close.tolist())
        nxt += 1
    out = []
    for c in range(nxt):
        mem = ev[label == c]
        out.append(Cluster(complex(np.mean(mem)), len(mem), mem))
    out.sort(key=lambda c: (round(c.center.real, 9), round(c.center.imag, 9)))
    return out


def _ordered_schur(M, select):
    T, Z, sdim = scipy.linalg.schur(M.astype(complex), output="complex", sort=select)
    return T, Z, sdim


def _cluster_block(M, cluster, tol=CLUSTER_TOL):
    delta = tol * max(1.0, np.linalg.norm(M, 2))
    members = cluster.members

    def select(z):
        return bool(np.min(np.abs(members - z)) <= delta)

    T, Z, sdim = _ordered_schur(M, select)
    if sdim != cluster.count:
        raise IllConditioned(
            f"Schur reordering selected {sdim} eigenvalues, expected {cluster.count}")
    return T[:sdim, :sdim], Z[:, :sdim]


def _rank(a, thresh):
    if a.size == 0:
        return 0
    return int(np.sum(np.linalg.svd(a, compute_uv=False) > thresh))


def _jordan_sizes(N, scale, tol):
    """Jordan block sizes of a nearly nilpotent ``N`` from its rank staircase."""
    a = N.shape[0]
    ranks = [a]
    Nk = np.eye(a, dtype=complex)
    for k in range(1, a + 2):
        Nk = Nk @ N
        s = np.linalg.svd(Nk, compute_uv=False) if a else np.zeros(0)
        thresh = tol * scale ** k
        near = np.sum((s > thresh) & (s <= 1e3 * thresh))
        if near:
            raise IllConditioned("rank decision falls inside the tolerance band")
        ranks.append(int(np.sum(s > thresh)))
        if ranks[-1] == 0:
            break
    ranks += [0, 0]
    sizes = []
    for k in range(1, a + 1):
        cnt = ranks[k - 1] - 2 * ranks[k] + ranks[k + 1]
        if cnt < 0:
            raise IllConditioned("inconsistent rank staircase")
        sizes += [k] * cnt
    if sum(sizes) != a:
        raise IllConditioned("Jordan structure does not account for the multiplicity")
    return sorted(sizes, reverse=True)


def partial_multiplicities(M, lam, tol=1e-8, cluster_tol=CLUSTER_TOL):
    """Jordan block sizes of ``M`` at the eigenvalue ``lam``.

    The generalized eigenspace is isolated by an ordered Schur form, then
    ``r_k = rank((T11 - lam I)^k)`` gives the block counts
    ``r_{k-1} - 2 r_k + r_{k+1}``.
    """
    M = np.asarray(M, dtype=complex)
    clusters = eigen_clusters(M, cluster_tol)
    cl = min(clusters, key=lambda c: abs(c.center - lam))
    delta = cluster_tol * max(1.0, np.linalg.norm(M, 2))
    if abs(cl.center - lam) > delta:
        raise ValueError(f"{lam} is not an eigenvalue of M")
    T11, _ = _cluster_block(M, cl, cluster_tol)
    N = T11 - cl.center * np.eye(cl.count)
    return _jordan_sizes(N, max(1.0, np.linalg.norm(M, 2)), tol)


# ---------------------------------------------------------------------------
# c-sets and neutral subspaces

@dataclass(frozen=True)
class CSet:
    """One representative of every conjugate pair of nonreal eigenvalues of ``M``.

    ``members`` are cluster centres; ``counts`` their algebraic multiplicities.
    """

    members: tuple
    counts: tuple

    def to_json(self):
        return [[float(z.real), float(z.imag)] for z in self.members]


def build_cset(M_spectrum, modes=(), tol=CLUSTER_TOL, scale=1.0):
    """c-set containing ``j * Lambda_un``; free pairs take the member with ``Im > 0``."""
    spectrum = list(M_spectrum)
    if spectrum and isinstance(spectrum[0], Cluster):
        clusters = spectrum
    else:
        clusters = eigen_clusters(None, tol * max(1.0, scale), eigvals=spectrum) if spectrum else []
    modes = np.asarray(list(modes), complex)
    if not bh.unmixing_check(modes):
        raise UnmixingViolated("uncontrollable modes are mixed")
    delta = tol * max(1.0, scale)
    nonreal = [c for c in clusters if not c.is_real()]
    forced = set()
    for lam in modes:
        mu = 1j * lam
        idx = min(range(len(nonreal)), key=lambda i: abs(nonreal[i].center - mu),
                  default=None)
        if idx is None or abs(nonreal[idx].center - mu) > max(delta, 1e-6 * (1 + abs(mu))):
            raise UnmixingViolated(f"j*{lam} is not a nonreal eigenvalue of M")
        forced.add(idx)
    chosen = []
    for i, c in enumerate(nonreal):
        partner = min((k for k in range(len(nonreal)) if k != i),
                      key=lambda k: abs(nonreal[k].center - np.conj(c.center)),
                      default=None)
        if partner is None:
            raise IllConditioned(f"no conjugate partner for {c.center}")
        if i in forced and partner in forced:
            raise UnmixingViolated("both members of a conjugate pair are forced")
        if i in forced:
            chosen.append(i)
        elif partner in forced:
            continue
        elif c.center.imag > 0:
            chosen.append(i)
    sel = [nonreal[i] for i in sorted(set(chosen))]
    return CSet(tuple(c.center for c in sel), tuple(c.count for c in sel))


def _nullspace(a, thresh):
    if a.shape[1] == 0:
        return np.zeros((0, 0), complex)
    _, s, vh = np.linalg.svd(a)
    r = int(np.sum(s > thresh))
    return vh[r:].conj().T


def _half_chain(N, scale, tol):
    """``sum_j N^j ker N^{2j}``: the first half of every Jordan chain of nilpotent ``N``."""
    a = N.shape[0]
    cols = []
    Nj = np.eye(a, dtype=complex)
    for j in range(1, a // 2 + 1):
        Nj = Nj @ N
        ker = _nullspace(Nj @ Nj, tol * scale ** (2 * j))
        if ker.size:
            cols.append(Nj @ ker)
    if not cols:
        return np.zeros((a, 0), complex)
    Y = np.hstack(cols)
    u, s, _ = np.linalg.svd(Y, full_matrices=False)
    r = int(np.sum(s > 1e-8 * max(1.0, s[0])))
    return u[:, :r]


def neutral_invariant_subspace(hd, cset, tol=SUBSPACE_TOL, cluster_tol=CLUSTER_TOL,
                               rank_tol=1e-8):
    """Orthonormal basis of the n-dimensional M-invariant neutral subspace for ``cset``.

    Nonreal eigenvalues contribute their full generalized eigenspaces
    (c-set members only); every real eigenvalue of ``M`` contributes the
    first half of each of its Jordan chains.
    """
    M = hd.M
    n = hd.n
    if n == 0:
        return np.zeros((0, 0), complex)
    scale = max(1.0, np.linalg.norm(M, 2))
    delta = cluster_tol * scale
    clusters = eigen_clusters(M, cluster_tol)
    parts = []
    for cl in clusters:
        if not cl.is_real():
            continue
        T11, Z = _cluster_block(M, cl, cluster_tol)
        N = T11 - cl.center * np.eye(cl.count)
        sizes = _jordan_sizes(N, scale, rank_tol)
        if any(s % 2 for s in sizes):
            raise OddMultiplicity(
                f"real eigenvalue {cl.center.real:.6g} of M has partial "
                f"multiplicities {sizes}")
        Y = _half_chain(N, scale, rank_tol)
        if Y.shape[1] != cl.count // 2:
            raise IllConditioned("half-chain subspace has the wrong dimension")
        parts.append(Z @ Y)
    members = np.asarray(cset.members, complex)
    selected = [cl for cl in clusters if not cl.is_real()
                and len(members) and np.min(np.abs(members - cl.center)) <= delta]
    if selected:
        sel_members = np.concatenate([cl.members for cl in selected])

        def pick(z):
            return bool(np.min(np.abs(sel_members - z)) <= delta)

        _, Z, sdim = _ordered_schur(M, pick)
        if sdim != len(sel_members):
            raise IllConditioned("Schur reordering lost c-set eigenvalues")
        parts.insert(0, Z[:, :sdim])
    X = np.hstack(parts) if parts else np.zeros((2 * n, 0), complex)
    if X.shape[1] != n:
        raise NeutralityFailed(
            f"subspace has dimension {X.shape[1]}, expected {n}; invalid c-set")
    X, _ = np.linalg.qr(X)
    inv_res = np.linalg.norm(M @ X - X @ (X.conj().T @ M @ X))
    if inv_res > tol * scale:
        raise NeutralityFailed(f"subspace is not M-invariant (residual {inv_res:.3e})")
    res_p = np.linalg.norm(X.conj().T @ hd.P @ X)
    res_ph = np.linalg.norm(X.conj().T @ hd.Phat @ X)
    if res_p > tol * max(1.0, np.linalg.norm(hd.P, 2)) or res_ph > tol:
        raise NeutralityFailed(
            f"subspace is not neutral (|X*PX| = {res_p:.3e}, |X*P^X| = {res_ph:.3e})")
    return X


def extract_K(basis, tol=HERMITIAN_TOL, cond_max=COND_MAX):
    """Real symmetric ``K = X2 X1^{-1}`` from a graph-subspace basis ``[X1; X2]``."""
    basis = np.asarray(basis, complex)
    n = basis.shape[1]
    if basis.shape[0] != 2 * n:
        raise ShapeMismatch("basis must be 2n x n")
    if n == 0:
        return np.zeros((0, 0))
    X1, X2 = basis[:n], basis[n:]
    cond = np.linalg.cond(X1)
    if not np.isfinite(cond) or cond > cond_max:
        raise NotGraphSubspace(f"X1 is numerically singular (cond {cond:.3e})")
    K = np.linalg.solve(X1.T, X2.T).T
    normK = max(np.linalg.norm(K), 1e-300)
    skew = 0.5 * np.linalg.norm(K - K.conj().T)
    if skew > tol * max(1.0, normK):
        raise NonHermitian(f"|K - K*|/2 = {skew:.3e}")
    K = 0.5 * (K + K.conj().T)
    if np.linalg.norm(K.imag) > tol * max(1.0, normK):
        raise NonReal(f"|Im K| = {np.linalg.norm(K.imag):.3e}")
    return np.ascontiguousarray(K.real)


def are_residual_matrix(tilde, K):
    At, Dt, Ct = tilde
    return K @ At + At.T @ K + K @ Dt @ K - Ct


def lmi_matrix(ss, J, K):
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    J = np.atleast_2d(np.asarray(J, dtype=float)) if ss.p_out else np.zeros((0, 0))
    top_left = K @ A + A.T @ K - C.T @ J @ C
    off = K @ B - C.T @ J @ D
    bottom = -(np.eye(ss.m) + D.T @ J @ D)
    L = np.block([[top_left, off], [off.T, bottom]])
    return 0.5 * (L + L.T)


def verify_certificate(ss, J, K, tol=CERT_TOL):
    """``(are_residual, lmi_max_eig)``; the certificate passes when both are ``<= tol``."""
    K = np.asarray(K, dtype=float)
    if not np.allclose(K, K.T, atol=1e-12 * max(1.0, np.abs(K).max(initial=0.0))):
        raise ValueError("K must be symmetric")
    L = lmi_matrix(ss, J, K)
    lmi_max = float(np.linalg.eigvalsh(L)[-1]) if L.size else -np.inf
    try:
        res = float(np.linalg.norm(are_residual_matrix(build_tilde(ss, J), K)))
    except (StrictnessViolated, SingularJDD):
        res = np.inf
    return res, lmi_max


def certificate_scales(ss, J, K):
    """Magnitudes of the terms summed in the ARE and LMI, floored at 1.

    Residuals are judged relative to these, so the absolute tolerance
    applies whenever the data and ``K`` are of order one.
    """
    A, B, C, D = ss.A, ss.B, ss.C, ss.D
    J = np.atleast_2d(np.asarray(J, dtype=float)) if ss.p_out else np.zeros((0, 0))
    nK = np.linalg.norm(K, 2) if K.size else 0.0
    try:
        At, Dt, Ct = build_tilde(ss, J)
        are = 2 * np.linalg.norm(At, 2) * nK + np.linalg.norm(Dt, 2) * nK ** 2 \
            + np.linalg.norm(Ct, 2)
    except (StrictnessViolated, SingularJDD):
        are = np.inf
    nrm = lambda x: np.linalg.norm(x, 2) if x.size else 0.0
    lmi = 2 * nrm(A) * nK + nrm(C) ** 2 + 2 * nK * nrm(B) + 2 * nrm(C) * nrm(D) \
        + 1 + nrm(D) ** 2
    return max(1.0, float(are)), max(1.0, float(lmi))


def polish_K(tilde, K, iters=30):
    """Minimum-norm Newton refinement of a Riccati solution.

    Near purely imaginary closed-loop eigenvalues the Lyapunov operator is
    singular; least squares keeps the step in its range.
    """
    At, Dt, _ = tilde
    n = K.shape[0]
    if n == 0 or n > 30:
        return K
    best = K
    best_res = np.linalg.norm(are_residual_matrix(tilde, K))
    cur = K
    for _ in range(iters):
        F = are_residual_matrix(tilde, cur)
        Acl = At + Dt @ cur
        op = np.kron(np.eye(n), Acl.T) + np.kron(Acl.T, np.eye(n))
        step, *_ = np.linalg.lstsq(op, -F.reshape(-1, order="F"), rcond=1e-13)
        delta = step.reshape(n, n, order="F")
        cur = cur + 0.5 * (delta + delta.T)
        res = np.linalg.norm(are_residual_matrix(tilde, cur))
        if res < best_res:
            best, best_res = cur, res
        if res <= 1e-15 * max(1.0, np.linalg.norm(cur)) or res > 1e3 * best_res:
            break
    return best


# ---------------------------------------------------------------------------
# Popov function of the controllable part

@dataclass
class PopovVerdict:
    passed: bool
    min_eig: float
    witness_omega: Optional[float]
    boundary_omegas: list
    grid_size: int
    label: str = "grid-certified"

    def to_json(self):
        return {"passed": self.passed, "min_eig": self.min_eig,
                "witness_omega": self.witness_omega,
                "boundary_omegas": [float(w) for w in self.boundary_omegas],
                "grid_size": self.grid_size, "label": self.label}


def _sigma_matrix(sigma):
    if isinstance(sigma, SupplyRate):
        return sigma.sigma
    return np.atleast_2d(np.asarray(sigma, dtype=float))


def popov_values(M, sigma, omegas):
    """Eigenvalues of ``M^T(-jw) Sigma M(jw)`` for each ``w``; shape ``(len(w), cols)``."""
    S = _sigma_matrix(sigma)
    omegas = np.asarray(omegas, dtype=float)
    deg = max(M.degree, 0)
    coeffs = np.stack([M.coefficient(k) for k in range(deg + 1)])  # (d+1, w, c)
    powers = (1j * omegas)[:, None] ** np.arange(deg + 1)[None, :]  # (N, d+1)
    Mj = np.einsum("nk,kwc->nwc", powers, coeffs)
    Pi = np.einsum("nwa,wv,nvb->nab", Mj.conj(), S, Mj)
    Pi = 0.5 * (Pi + np.conj(np.swapaxes(Pi, 1, 2)))
    return np.linalg.eigvalsh(Pi), np.linalg.norm(Pi, axis=(1, 2), ord=2)


def _boundary_omegas(M, sigma):
    S = _sigma_matrix(sigma)
    d = det(partial_op(two_var_from_images(M, _exact(S), M)))
    if d.degree < 1:
        return [], d
    roots = d.roots()
    imag_axis = roots[np.abs(roots.real) <= 1e-6 * (1 + np.abs(roots))]
    return sorted({round(abs(float(z.imag)), 12) for z in imag_axis}), d


def _exact(S):
    return [[to_fraction(float(v)) for v in row] for row in np.atleast_2d(S)]


def default_grid(n_points, scale=1.0):
    n_points = max(int(n_points), 2)
    return np.concatenate([[0.0], scale * np.logspace(-3, 3, n_points - 1)])


def controllable_dissipativity(M, sigma, grid=2000, tol=CERT_TOL):
    """Sampled check of ``M^T(-jw) Sigma M(jw) >= 0``.

    Evaluated on a frequency grid plus every real ``w`` at which
    ``det dPhi(jw) = 0``.  The verdict is sampled, not symbolic.
    """
    if M.cols == 0:
        return PopovVerdict(True, np.inf, None, [], 0)
    boundary, d = _boundary_omegas(M, sigma)
    if np.isscalar(grid) or np.ndim(grid) == 0:
        roots = np.abs(d.roots()) if d.degree >= 1 else np.zeros(0)
        scale = max(1.0, float(np.max(roots))) if len(roots) else 1.0
        omegas = default_grid(grid, scale)
    else:
        omegas = np.asarray(grid, dtype=float)
    omegas = np.concatenate([omegas, boundary])
    eig, norms = popov_values(M, sigma, omegas)
    mins = eig[:, 0]
    slack = mins + tol * np.maximum(1.0, norms)
    k = int(np.argmin(slack))
    passed = bool(slack[k] >= 0)
    return PopovVerdict(passed, float(np.min(mins)), None if passed else float(omegas[k]),
                        list(boundary), len(omegas))


# ---------------------------------------------------------------------------
# certification pipeline

@dataclass
class StorageCertificate:
    """``K`` such that ``d/dt x^T K x <= w^T Sigma w`` along the behavior."""

    K: np.ndarray
    cset: CSet
    basis: np.ndarray
    are_residual: float
    lmi_max_eig: float
    state_map: list
    ss: StateSpace
    J: np.ndarray
    partition: tuple
    assumptions: dict
    details: dict

    verdict = "dissipative"

    def storage(self, x):
        x = np.asarray(x, dtype=float)
        return float(x @ self.K @ x)

    def to_json(self):
        return {
            "verdict": self.verdict,
            "K": self.K.tolist(),
            "cset": self.cset.to_json(),
            "are_residual": self.are_residual,
            "lmi_max_eig": self.lmi_max_eig,
            "assumptions": dict(self.assumptions),
            "state_space": self.ss.to_json(),
            "J": self.J.tolist(),
            "partition": {"inputs": list(self.partition[0]),
                          "outputs": list(self.partition[1])},
            "state_map": [X.tolist() for X in self.state_map],
            "details": _jsonable(self.details),
        }


@dataclass
class Refusal:
    """Structured refusal naming the first assumption that failed."""

    stage: str
    reason: str
    assumptions: dict
    details: dict = field(default_factory=dict)

    @property
    def verdict(self):
        return f"refused:{self.stage}"

    def to_json(self):
        return {"verdict": self.verdict, "reason": self.reason,
                "assumptions": dict(self.assumptions),
                "details": _jsonable(self.details)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if hasattr(obj, "to_json"):
        return obj.to_json()
    return obj


STAGES = ("input_cardinality", "unmixing", "realization", "strictness_at_infinity",
          "controllable_dissipativity", "hamiltonian", "even_multiplicities", "cset",
          "neutral_subspace", "graph_subspace", "verification")

REASONS = {
    "input_cardinality": "input cardinality exceeds the positive signature of Sigma",
    "unmixing": "unmixing violated: two uncontrollable modes add to zero",
    "realization": "no proper observable i/s/o realization for the given partition",
    "strictness_at_infinity": "I + D^T J D is not positive definite",
    "controllable_dissipativity": "controllable part is not Sigma-dissipative",
    "hamiltonian": "Hamiltonian construction failed",
    "even_multiplicities": "odd partial multiplicity at a real eigenvalue of M",
    "cset": "no admissible c-set containing j*Lambda_un",
    "neutral_subspace": "no M-invariant neutral subspace of dimension n",
    "graph_subspace": "neutral subspace is not a graph subspace",
    "verification": "extracted K fails the Riccati/LMI verification",
}


def _scaled_iso(ss, io, W):
    c = np.diag(W)
    cin, cout = c[list(io[0])], c[list(io[1])]
    return StateSpace(ss.A, ss.B * cin[None, :], ss.C / cout[:, None],
                      ss.D * cin[None, :] / cout[:, None])


def _working_kernel(B, supply):
    """Kernel matrix in the signature coordinates ``v`` (``w = W v``)."""
    R = B.kernel_matrix()
    W = supply.W
    if np.allclose(W, np.eye(len(W))):
        return R
    return R @ PolyMatrix.from_constant(_exact(W))


def _choose_partition(Rv, B, supply):
    """Return ``(partition, ss)``: user partition if usable, else search positive channels."""
    m = supply.m
    if B.io is not None and supply.diagonal:
        part = B.io
        if any(supply.signs[i] < 0 for i in part[0]):
            raise ImproperTransfer("inputs must correspond to positive supply channels")
        return part, realize(bh.Behavior.kernel(Rv), part)
    positives = [i for i in range(Rv.cols) if supply.signs[i] > 0]
    last = None
    for inputs in combinations(positives, m):
        outputs = tuple(i for i in range(Rv.cols) if i not in inputs)
        try:
            return (tuple(inputs), outputs), realize(bh.Behavior.kernel(Rv),
                                                     (inputs, outputs))
        except (ImproperTransfer, SingularOutputBlock) as exc:
            last = exc
    raise last or ImproperTransfer("no admissible input/output partition")


def certify(B, sigma_raw, m_B=None, tol=CERT_TOL, grid=2000, check_popov=True,
            polish=True, cset=None, subspace_tol=SUBSPACE_TOL):
    """Decide and certify Sigma-dissipativity of ``B`` with an observable state storage.

    Returns a :class:`StorageCertificate` or a :class:`Refusal`.  With
    ``check_popov=False`` the sampled Popov test is skipped and the
    Hamiltonian structure alone decides.  ``cset`` overrides the default
    c-set (it must still be admissible).
    """
    assumptions = {s: None for s in STAGES}
    details = {"cluster_tol": CLUSTER_TOL, "real_axis_tol": REAL_TOL}

    def refuse(stage, exc=None):
        assumptions[stage] = False
        reason = REASONS[stage] + (f" ({exc})" if exc is not None else "")
        return Refusal(stage, reason, assumptions, details)

    if m_B is None:
        m_B = bh.input_cardinality(B)
    details["m"] = m_B
    try:
        supply = canonicalize_supply(sigma_raw, m_B)
    except InputCardinalityExceeded as exc:
        return refuse("input_cardinality", exc)
    assumptions["input_cardinality"] = True
    details.update(sigma_plus=supply.sigma_plus, sigma_minus=supply.sigma_minus)

    Rv = _working_kernel(B, supply)
    Bv = bh.Behavior.kernel(Rv)
    modes = bh.uncontrollable_modes(Bv)
    details["uncontrollable_modes"] = modes.modes
    if not bh.unmixing_check(modes):
        return refuse("unmixing")
    assumptions["unmixing"] = True

    use_iso = (B.kind == "iso" and supply.diagonal
               and all(supply.signs[i] > 0 for i in B.io[0])
               and is_observable(B.state_space))
    try:
        if use_iso:
            partition = B.io
            ss = _scaled_iso(B.state_space, partition, supply.W)
        else:
            partition, ss = _choose_partition(Rv, B, supply)
    except (ImproperTransfer, SingularOutputBlock, ShapeMismatch) as exc:
        return refuse("realization", exc)
    assumptions["realization"] = True
    J = np.diag(supply.signs[list(partition[1])].astype(float))
    details["partition"] = {"inputs": list(partition[0]), "outputs": list(partition[1])}
    details["observable"] = is_observable(ss)

    kf = kalman(ss)
    details["n"] = ss.n
    details["n_c"] = kf.n_c
    details["kalman_modes_match"] = bh.ModeSet(kf.uncontrollable_modes).matches(modes, 1e-6)

    Mc = bh.observable_image(bh.controllable_part(Bv))
    try:
        Dfeed = feedthrough(Mc, partition)
    except ImproperTransfer as exc:
        return refuse("realization", exc)
    details["feedthrough"] = Dfeed
    details["feedthrough_matches_realization"] = bool(np.allclose(Dfeed, ss.D, atol=1e-8))
    strict = strictness_at_infinity(Dfeed, J)
    details["strictness_at_infinity"] = strict
    if not strict > tol:
        return refuse("strictness_at_infinity")
    assumptions["strictness_at_infinity"] = True

    sig_v = supply.sigma
    if check_popov:
        verdict = controllable_dissipativity(Mc, sig_v, grid=grid, tol=tol)
        details["popov"] = verdict
        if not verdict.passed:
            return refuse("controllable_dissipativity",
                          f"min eigenvalue {verdict.min_eig:.3e} at w = {verdict.witness_omega}")
        assumptions["controllable_dissipativity"] = True

    try:
        tilde = build_tilde(ss, J)
        hd = build_hamiltonian(tilde)
    except BehavDissError as exc:
        return refuse("hamiltonian", exc)
    assumptions["hamiltonian"] = True
    details["P_invertible"] = hd.P_invertible

    dphi = det(partial_op(two_var_from_images(Mc, _exact(sig_v), Mc)))
    spec = spectrum_identity_check(hd.H, dphi, modes, tol=1e-5)
    details["spectrum_identity"] = {"passed": spec["passed"],
                                    "degree_condition": spec["degree_condition"]}

    clusters = eigen_clusters(hd.M)
    real_blocks = {}
    try:
        scale = max(1.0, np.linalg.norm(hd.M, 2)) if ss.n else 1.0
        for cl in clusters:
            if cl.is_real():
                T11, _ = _cluster_block(hd.M, cl)
                sizes = _jordan_sizes(T11 - cl.center * np.eye(cl.count), scale, 1e-8)
                real_blocks[round(cl.center.real, 10)] = sizes
                if any(s % 2 for s in sizes):
                    raise OddMultiplicity(f"eigenvalue {cl.center.real:.6g}: blocks {sizes}")
    except (OddMultiplicity, IllConditioned) as exc:
        details["real_partial_multiplicities"] = real_blocks
        return refuse("even_multiplicities", exc)
    details["real_partial_multiplicities"] = real_blocks
    assumptions["even_multiplicities"] = True

    try:
        cs = cset if cset is not None else build_cset(
            clusters, modes.modes, scale=np.linalg.norm(hd.M, 2) if ss.n else 1.0)
    except (UnmixingViolated, IllConditioned) as exc:
        return refuse("cset", exc)
    assumptions["cset"] = True

    try:
        X = neutral_invariant_subspace(hd, cs, tol=subspace_tol)
    except (NeutralityFailed, IllConditioned, OddMultiplicity) as exc:
        return refuse("neutral_subspace", exc)
    assumptions["neutral_subspace"] = True

    try:
        K = extract_K(X, tol=max(HERMITIAN_TOL, subspace_tol))
    except (NotGraphSubspace, NonHermitian, NonReal) as exc:
        return refuse("graph_subspace", exc)
    assumptions["graph_subspace"] = True

    if polish:
        K = polish_K(tilde, K)
    K = 0.5 * (K + K.T)
    res, lmi = verify_certificate(ss, J, K, tol)
    are_scale, lmi_scale = certificate_scales(ss, J, K)
    details.update(are_scale=are_scale, lmi_scale=lmi_scale)
    details["graph_invariance_residual"] = float(np.linalg.norm(
        hd.H @ np.vstack([np.eye(ss.n), K]) -
        np.vstack([np.eye(ss.n), K]) @ (tilde[0] + tilde[1] @ K))) if ss.n else 0.0
    if not (res <= tol * are_scale and lmi <= tol * lmi_scale):
        details.update(are_residual=res, lmi_max_eig=lmi)
        return refuse("verification", f"ARE residual {res:.3e}, LMI max eig {lmi:.3e}")
    assumptions["verification"] = True
    return StorageCertificate(K, cs, X, res, lmi, observability_map(ss), ss, J,
                              partition, assumptions, details)
