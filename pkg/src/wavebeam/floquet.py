"""Floquet stability of Galerkin periodic solutions.

Perturbations ``v = sum_k a_k(tau) sin((k+1) x)``, ``k < K``, of a solution
``u`` obey

    omega**2 a'' + L(tau) a = 0,
    L(tau) = diag((k+1)**(2 nu)) + G[3 u(tau, .)**2],

where ``G[f]`` is the Galerkin matrix of multiplication by ``f``.  With
``p = a`` and ``q = a'`` this is the linear Hamiltonian system
``p' = q``, ``q' = -L p / omega**2``.  One period is integrated with a Gauss
collocation method (symplectic for quadratic Hamiltonians) and the
monodromy eigenvalues are the Floquet multipliers.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .continuation import BranchCurve, hyperplane, newton_correct, tangent_at
from .errors import NonConvergence, SingularJacobian, StepCountTooSmall
from .model import SolutionPoint, make_point

logger = logging.getLogger(__name__)

__all__ = [
    "MonodromyMatrix",
    "FloquetSpectrum",
    "ScanResult",
    "build_L",
    "gauss_legendre_tableau",
    "monodromy",
    "multipliers",
    "symplectic_form",
    "refine_background",
    "classify_point",
    "stability_scan",
]

STABILITY_THRESHOLD = 1e-12
# |mu**2 - 4| below this counts as a multiplier pair next to +1 or -1
NEAR_UNIT_WINDOW = 1e-6


def _check_K(K: int) -> int:
    if int(K) != K or K < 1 or K % 2 == 0:
        raise ValueError(f"perturbation basis size K must be odd and positive, got {K!r}")
    return int(K)


@lru_cache(maxsize=32)
def _space_quadrature(N: int, K: int):
    # integrand u**2 sin sin is even and 2 pi periodic with harmonics < 4N + 2K
    P = 4 * N + 2 * K
    x = 2 * np.pi * np.arange(P) / P
    X = np.sin(np.outer(x, 2 * np.arange(N) + 1))
    S = np.sin(np.outer(x, np.arange(1, K + 1)))
    return X, S


def _L_batch(coeffs, nu: int, K: int, taus) -> np.ndarray:
    """``L(tau)`` for an array of times, shape ``(len(taus), K, K)``."""
    c = np.asarray(coeffs, float)
    M, N = c.shape
    X, S = _space_quadrature(N, K)
    taus = np.atleast_1d(np.asarray(taus, float))
    a = np.cos(np.outer(taus, 2 * np.arange(M) + 1)) @ c
    u2 = (a @ X.T) ** 2
    G = (2.0 / X.shape[0]) * np.einsum("tp,pi,pj->tij", 3.0 * u2, S, S)
    k = np.arange(1, K + 1, dtype=float)
    G[:, np.arange(K), np.arange(K)] += k ** (2 * nu)
    return G


def build_L(point: SolutionPoint, K: int, tau: float) -> np.ndarray:
    """Symmetric ``K x K`` matrix of the linearised spatial operator at ``tau``."""
    K = _check_K(K)
    return _L_batch(point.coeffs, point.nu, K, [tau])[0]


@lru_cache(maxsize=8)
def gauss_legendre_tableau(stages: int):
    """Butcher tableau ``(A, b, c)`` of the ``stages``-stage Gauss method (order 2s)."""
    x, w = np.polynomial.legendre.leggauss(stages)
    c = 0.5 * (x + 1.0)
    b = 0.5 * w
    # a_ij = int_0^{c_i} l_j(t) dt via the collocation conditions sum_j a_ij c_j^(k-1) = c_i^k / k
    V = np.vander(c, stages, increasing=True)
    rhs = np.array([[ci ** (k + 1) / (k + 1) for k in range(stages)] for ci in c])
    A = np.linalg.solve(V.T, rhs.T).T
    return A, b, c


def symplectic_form(K: int) -> np.ndarray:
    J = np.zeros((2 * K, 2 * K))
    J[:K, K:] = np.eye(K)
    J[K:, :K] = -np.eye(K)
    return J


@dataclass(frozen=True)
class MonodromyMatrix:
    entries: np.ndarray
    steps: int
    order: int
    error_estimate: float = math.nan

    @property
    def K(self) -> int:
        return self.entries.shape[0] // 2

    def symplectic_defect(self) -> float:
        J = symplectic_form(self.K)
        M = self.entries
        return float(np.max(np.abs(M.T @ J @ M - J)))


def _propagate(coeffs, omega, nu, K, steps, order):
    s = order // 2
    A, b, c = gauss_legendre_tableau(s)
    h = 2 * np.pi / steps
    t0 = h * np.arange(steps)
    taus = (t0[:, None] + h * c[None, :]).ravel()
    L = _L_batch(coeffs, nu, K, taus).reshape(steps, s, K, K) / omega**2
    n = 2 * K
    # stage operators F_j = [[0, I], [-L_j, 0]]
    F = np.zeros((steps, s, n, n))
    F[:, :, :K, K:] = np.eye(K)
    F[:, :, K:, :K] = -L
    # (I - h (A kron F)) Y = 1 kron y
    big = np.eye(s * n) - h * np.einsum("ij,tjab->tiajb", A, F).reshape(steps, s * n, s * n)
    rhs = np.tile(np.eye(n), (s, 1))
    Y = np.linalg.solve(big, np.broadcast_to(rhs, (steps, s * n, n))).reshape(steps, s, n, n)
    step_maps = np.eye(n) + h * np.einsum("j,tjab,tjbc->tac", b, F, Y)
    # product S_{n-1} ... S_0 by pairwise reduction
    mats = step_maps
    while mats.shape[0] > 1:
        if mats.shape[0] % 2:
            tail = mats[-1:]
            mats = np.concatenate([mats[1:-1:2] @ mats[0:-1:2], tail])
        else:
            mats = mats[1::2] @ mats[0::2]
    return mats[0]


def monodromy(point: SolutionPoint, K: int, steps: int = 4096, order: int = 6,
              symplectic_tol: float = 1e-9) -> MonodromyMatrix:
    """Monodromy matrix of the linearised flow over one period ``2 pi``.

    Columns are the images of the ``2K`` canonical unit vectors in ``(p, q)``.
    ``error_estimate`` is ``max|M(steps) - M(steps/2)|``, which bounds the
    change on doubling ``steps`` for a converged integration.
    """
    K = _check_K(K)
    if steps < 64:
        raise ValueError("steps must be at least 64")
    if order not in (4, 6, 8):
        raise ValueError("order must be 4, 6 or 8")
    M = _propagate(point.coeffs, point.omega, point.nu, K, steps, order)
    coarse = _propagate(point.coeffs, point.omega, point.nu, K, steps // 2, order)
    out = MonodromyMatrix(M, steps, order, float(np.max(np.abs(M - coarse))))
    defect = out.symplectic_defect()
    if defect > symplectic_tol:
        raise StepCountTooSmall(f"symplecticity defect {defect:.2e} exceeds {symplectic_tol:g}")
    return out


@dataclass(frozen=True)
class FloquetSpectrum:
    """Floquet multipliers and the stability verdict.

    ``trivial`` flags the multipliers excluded from the verdict (the pair
    tied to time translation along the family, see :func:`multipliers`).
    """

    multipliers: np.ndarray
    verdict: str
    max_deviation: float
    trivial: np.ndarray = field(default=None)


def _pair_eigenvalues(W: np.ndarray) -> np.ndarray:
    """Average the doubly degenerate eigenvalues of ``M + M^-1``."""
    mu = np.linalg.eigvals(W)
    mu = mu[np.lexsort((mu.imag, mu.real))]
    return 0.5 * (mu[0::2] + mu[1::2])


def multipliers(M, threshold: float = STABILITY_THRESHOLD, trivial_pairs: int = 0,
                trivial_window: float = 1e-6) -> FloquetSpectrum:
    """Eigenvalues of a symplectic monodromy matrix and their verdict.

    For symplectic ``M`` the matrix ``W = M + M^-1`` (with the exact
    symplectic inverse ``-J M^T J``) has each ``mu = lambda + 1/lambda`` as a
    double eigenvalue, and multipliers on the unit circle correspond to real
    ``mu`` in [-2, 2].  Solving ``lambda**2 - mu lambda + 1 = 0`` for each
    ``mu`` keeps the reciprocal pairing exact and puts elliptic multipliers
    on the circle to rounding accuracy.

    ``trivial_pairs`` reciprocal pairs with ``|mu - 2| <= trivial_window``
    (closest to 1 first) are left out of the verdict.  A Jordan block at
    ``lambda = 1`` splits by ``sqrt(eps)`` under any perturbation, so the
    translation pair of a solution family cannot be classified at 1e-12.

    Pairs next to ``+-1`` are reported as direct eigenvalues of ``M``.  At a
    degenerate multiplier the two estimates fail in different ways (``mu``
    splits by ``sqrt(eps)`` for a diagonalizable ``M``, the direct values for
    a Jordan block), so the smaller of the two deviations is used there.
    """
    E = M.entries if isinstance(M, MonodromyMatrix) else np.asarray(M, float)
    n = E.shape[0]
    if E.shape != (n, n) or n % 2:
        raise ValueError("monodromy matrix must be square with even size")
    K = n // 2
    J = symplectic_form(K)
    W = E - J @ E.T @ J
    mu = _pair_eigenvalues(W)
    disc = np.sqrt(mu.astype(complex) ** 2 - 4.0)
    lam1 = 0.5 * (mu + disc)
    lam2 = 0.5 * (mu - disc)
    lam = np.empty(n, dtype=complex)
    lam[0::2], lam[1::2] = lam1, lam2
    dev = np.abs(np.abs(lam) - 1.0)
    near_one = np.abs(mu.astype(complex) ** 2 - 4.0) < NEAR_UNIT_WINDOW
    if np.any(near_one):
        # lambda(mu) has a square-root branch at mu = +-2
        pool = list(np.linalg.eigvals(E))
        for j in np.flatnonzero(near_one):
            for slot in (2 * j, 2 * j + 1):
                i = int(np.argmin([abs(z - lam[slot]) for z in pool]))
                lam[slot] = pool.pop(i)
                dev[slot] = min(dev[slot], abs(abs(lam[slot]) - 1.0))
    trivial = np.zeros(n, dtype=bool)
    if trivial_pairs:
        dist = np.abs(mu - 2.0)
        for j in np.argsort(dist)[:trivial_pairs]:
            if dist[j] <= trivial_window:
                trivial[2 * j:2 * j + 2] = True
    max_dev = float(np.max(dev[~trivial])) if np.any(~trivial) else 0.0
    verdict = "stable" if max_dev <= threshold else "unstable"
    return FloquetSpectrum(lam, verdict, max_dev, trivial)


def refine_background(point: SolutionPoint, M: Optional[int] = None,
                      tol: Optional[float] = None) -> SolutionPoint:
    """Re-solve ``point`` on a longer time truncation (default ``max(M, 3 N**2)``).

    The zero-padded point is corrected on the hyperplane through it that is
    orthogonal to the local curve tangent, which stays regular at folds
    where a fixed-frequency correction would not.
    """
    if M is None:
        M = max(point.M, 3 * point.N**2)
    tol = tol if tol is not None else (point.tol or 1e-11)
    if M == point.M and point.residual_norm <= tol:
        return point
    c = np.zeros((M, point.N))
    c[:point.M] = point.coeffs[:M]
    seed = make_point(c, point.omega, point.nu)
    t = tangent_at(point.vector(), (point.M, point.N), point.nu)
    t_pad = np.zeros((M, point.N))
    t_pad[:point.M] = t[:-1].reshape(point.M, point.N)[:M]
    t_pad = np.append(t_pad.ravel(), t[-1])
    return newton_correct(seed, hyperplane(t_pad, seed.vector()), tol=tol)


@dataclass(frozen=True)
class ScanResult:
    """Per-point outcome of :func:`stability_scan`."""

    verdict: str
    max_deviation: float
    multipliers: Optional[np.ndarray] = None
    error: Optional[str] = None


def classify_point(point: SolutionPoint, K: Optional[int] = None, steps: int = 4096,
                   order: int = 6, threshold: float = STABILITY_THRESHOLD,
                   refine_M: Optional[int] = None, exclude_trivial: bool = True,
                   symplectic_tol: float = 1e-10, max_steps: int = 65536) -> ScanResult:
    """Refine the background, integrate, and classify one solution."""
    K = _check_K(2 * point.N - 1 if K is None else K)
    bg = refine_background(point, refine_M)
    while True:
        try:
            mono = monodromy(bg, K, steps, order, symplectic_tol)
            break
        except StepCountTooSmall:
            if 2 * steps > max_steps:
                raise
            steps *= 2
    spec = multipliers(mono, threshold, trivial_pairs=1 if exclude_trivial else 0)
    return ScanResult(spec.verdict, spec.max_deviation, spec.multipliers)


def _classify_safely(args):
    i, p, K, kwargs = args
    try:
        return classify_point(p, K, **kwargs)
    except (NonConvergence, SingularJacobian, StepCountTooSmall, np.linalg.LinAlgError) as exc:
        logger.warning("stability of point %d failed: %s", i, exc)
        return ScanResult("unknown", math.nan, None, str(exc))


def stability_scan(curve: BranchCurve, K: Optional[int] = None, threads: int = 1, **kwargs):
    """Classify every point of ``curve``.

    Returns ``(annotated_curve, results)``.  A point whose refinement or
    integration fails gets the verdict ``"unknown"`` and the scan goes on.
    With ``threads > 1`` points are classified concurrently; results keep
    the curve order.
    """
    jobs = [(i, p, K, kwargs) for i, p in enumerate(curve.points)]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_classify_safely, jobs))
    else:
        results = [_classify_safely(j) for j in jobs]
    points = [p.with_stability(r.verdict) for p, r in zip(curve.points, results)]
    out = BranchCurve(points, list(curve.events), curve.provenance, list(curve.tangents))
    return out, results
