"""Small dense real linear algebra used throughout the package.

Everything here works on ``numpy`` arrays of modest size (d <= 8). The
matrix exponential and the eigenvalue solver are delegated to SciPy/LAPACK
(Pade-13 scaling and squaring, Hessenberg + shifted QR respectively).
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InputError, NumericsError

RHO_TOL = 1e-8
RANK_TOL = 1e-10


def as_matrix(M, name="matrix", square=False):
    """Convert ``M`` to a finite 2-D float array, raising InputError otherwise."""
    arr = np.array(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise InputError(f"{name} must be non-empty")
    if square and arr.shape[0] != arr.shape[1]:
        raise InputError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} has non-finite entries")
    return arr


def expm(A, t=1.0):
    """Return ``exp(t * A)``."""
    A = as_matrix(A, "A", square=True)
    t = float(t)
    if not np.isfinite(t):
        raise InputError("t must be finite")
    return scipy.linalg.expm(t * A)


@dataclass(frozen=True)
class SpectralSummary:
    """Real parts of the spectrum grouped into Lyapunov spaces.

    ``groups`` holds ``(rho_j, d_j)`` pairs with strictly increasing ``rho_j``
    and algebraic multiplicities ``d_j`` summing to the dimension.
    """

    groups: tuple
    hyperbolic: bool
    eigenvalues: tuple = ()

    @property
    def dim(self):
        return sum(d for _, d in self.groups)

    @property
    def rhos(self):
        return tuple(rho for rho, _ in self.groups)

    @property
    def multiplicities(self):
        return tuple(d for _, d in self.groups)


def eigenvalues(A):
    A = as_matrix(A, "A", square=True)
    try:
        ev = scipy.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise NumericsError(f"eigenvalue iteration did not converge: {exc}") from exc
    # sort by real part then imaginary part so reports are stable
    order = np.lexsort((ev.imag, ev.real))
    return ev[order]


def spectral_groups(A, rho_tol=RHO_TOL):
    """Cluster eigenvalue real parts of ``A`` within ``rho_tol``.

    Consecutive sorted real parts closer than ``rho_tol`` fall in the same
    group; the group's representative is the mean of its members.
    """
    A = as_matrix(A, "A", square=True)
    if A.shape[0] > 8:
        raise InputError("spectral_groups supports d <= 8")
    ev = eigenvalues(A)
    re = np.sort(ev.real)
    clusters = [[re[0]]]
    for r in re[1:]:
        if r - clusters[-1][-1] < rho_tol:
            clusters[-1].append(r)
        else:
            clusters.append([r])
    groups = []
    for cl in clusters:
        rho = float(np.mean(cl))
        if abs(rho) < rho_tol:
            rho = 0.0
        groups.append((rho, len(cl)))
    hyperbolic = all(abs(rho) >= rho_tol for rho, _ in groups)
    return SpectralSummary(
        groups=tuple(groups),
        hyperbolic=hyperbolic,
        eigenvalues=tuple(complex(z) for z in ev),
    )


def gramian(A, B, tau0):
    """Controllability Gramian ``int_0^tau0 e^{As} B B^T e^{A^T s} ds``.

    Uses Van Loan's block exponential of ``[[-A, B B^T], [0, A^T]]``.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    d = A.shape[0]
    if B.shape[0] != d:
        raise InputError(f"B has {B.shape[0]} rows, expected {d}")
    tau0 = float(tau0)
    if not tau0 > 0:
        raise InputError("tau0 must be positive")
    M = np.zeros((2 * d, 2 * d))
    M[:d, :d] = -A
    M[:d, d:] = B @ B.T
    M[d:, d:] = A.T
    E = scipy.linalg.expm(M * tau0)
    W = E[d:, d:].T @ E[:d, d:]
    return 0.5 * (W + W.T)


def controllability_matrix(A, B):
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    if B.shape[0] != A.shape[0]:
        raise InputError("A and B have inconsistent row counts")
    blocks = [B]
    for _ in range(A.shape[0] - 1):
        blocks.append(A @ blocks[-1])
    return np.hstack(blocks)


def kalman_rank(A, B, rank_tol=None):
    """Numerical rank of ``[B, AB, ..., A^{d-1}B]``.

    ``rank_tol`` defaults to ``1e-10 * ||C||_2``.
    """
    C = controllability_matrix(A, B)
    sv = np.linalg.svd(C, compute_uv=False)
    if rank_tol is None:
        rank_tol = RANK_TOL * (sv[0] if sv.size else 0.0)
    return int(np.sum(sv > rank_tol))


def diagonalizer(A, max_cond=1e8):
    """Return ``(T, diag)`` with ``T A T^{-1} = diag(diag)`` for real-spectrum ``A``.

    Eigenvalues are sorted ascending; eigenvectors are normalised to unit
    length with a positive leading nonzero entry, so the result is
    deterministic. Returns ``None`` if ``A`` has complex eigenvalues or is
    (numerically) not diagonalizable.
    """
    A = as_matrix(A, "A", square=True)
    d = A.shape[0]
    if np.count_nonzero(A - np.diag(np.diag(A))) == 0:
        vals = np.diag(A)
        perm = np.argsort(vals, kind="stable")
        T = np.eye(d)[perm]
        return T, vals[perm].copy()
    vals, V = scipy.linalg.eig(A)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(vals.imag)) > 1e-10 * scale:
        return None
    vals = vals.real
    V = V.real
    order = np.argsort(vals, kind="stable")
    vals, V = vals[order], V[:, order]
    for j in range(d):
        col = V[:, j]
        col /= np.linalg.norm(col)
        lead = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        if lead < 0:
            col *= -1
    if np.linalg.cond(V) > max_cond:
        return None
    return np.linalg.inv(V), vals
