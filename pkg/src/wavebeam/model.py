"""Galerkin model of the cubic wave (nu=1) and beam (nu=2) equations.

A time-periodic solution with frequency ``omega`` solves

    omega**2 u_tt + (-1)**nu d_x^(2 nu) u + u**3 = 0,   x in [0, pi],

with the period normalised to 2 pi.  It is represented on the odd-mode
lattice

    u(tau, x) = sum_{m<M, n<N} c[m, n] cos((2m+1) tau) sin((2n+1) x),

which satisfies the Dirichlet (wave) and Navier (beam) conditions by
construction.  Coefficient grids are plain ``(M, N)`` float arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np

__all__ = [
    "SolutionPoint",
    "RescaleParams",
    "check_nu",
    "linear_weights",
    "evaluate_field",
    "cubic_projection",
    "residual",
    "jacobian",
    "energy",
    "energy_defect",
    "make_point",
    "rescale",
    "rescaled_shape",
]


def check_nu(nu: int) -> int:
    if nu not in (1, 2):
        raise ValueError(f"nu must be 1 (wave) or 2 (beam), got {nu!r}")
    return int(nu)


def _check_grid(coeffs) -> np.ndarray:
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 2 or c.shape[0] < 1 or c.shape[1] < 1:
        raise ValueError(f"coefficient grid must be a non-empty 2-D array, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficient grid contains non-finite entries")
    return c


def _check_omega(omega: float) -> float:
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    return omega


@lru_cache(maxsize=64)
def _quadrature(M: int, N: int, refine: int = 1):
    """Collocation matrices for degree-3 products on the odd lattice.

    The projection integrands only carry even harmonics in tau and x, up to
    8M-4 and 8N-4, so 4M (4N) equispaced nodes on [0, pi) integrate them
    exactly.
    """
    pt, px = 4 * M * refine, 4 * N * refine
    tau = np.pi * np.arange(pt) / pt
    x = np.pi * np.arange(px) / px
    T = np.cos(np.outer(tau, 2 * np.arange(M) + 1))
    X = np.sin(np.outer(x, 2 * np.arange(N) + 1))
    T.setflags(write=False)
    X.setflags(write=False)
    return T, X


@lru_cache(maxsize=64)
def _basis(M: int, N: int) -> np.ndarray:
    T, X = _quadrature(M, N)
    B = np.einsum("jm,kn->jkmn", T, X).reshape(T.shape[0] * X.shape[0], M * N)
    B.setflags(write=False)
    return B


def linear_weights(M: int, N: int, omega: float, nu: int) -> np.ndarray:
    """Diagonal part ``-omega**2 (2m+1)**2 + (2n+1)**(2 nu)`` of the system."""
    k = (2 * np.arange(M) + 1.0)[:, None]
    l = (2 * np.arange(N) + 1.0)[None, :]
    return -(omega**2) * k**2 + l ** (2 * nu)


def evaluate_field(coeffs, tau, x):
    """Evaluate ``u(tau, x)``; ``tau`` and ``x`` broadcast against each other."""
    c = _check_grid(coeffs)
    M, N = c.shape
    tau = np.asarray(tau, dtype=float)
    x = np.asarray(x, dtype=float)
    T = np.cos(tau[..., None] * (2 * np.arange(M) + 1))
    X = np.sin(x[..., None] * (2 * np.arange(N) + 1))
    out = np.einsum("...m,mn,...n->...", T, c, X)
    return float(out) if out.ndim == 0 else out


def cubic_projection(coeffs) -> np.ndarray:
    """Project ``u**3`` back onto the retained modes.

    Uses the amplitude convention of the ansatz, so a lone mode of amplitude
    ``A`` at (0, 0) yields ``9 A**3 / 16`` at (0, 0).  The result is exact for
    the trigonometric polynomial (no aliasing).
    """
    c = _check_grid(coeffs)
    M, N = c.shape
    T, X = _quadrature(M, N)
    u = T @ c @ X.T
    return (4.0 / (T.shape[0] * X.shape[0])) * (T.T @ u**3 @ X)


def cubic_jacobian(coeffs) -> np.ndarray:
    """Galerkin matrix of multiplication by ``3 u**2`` (MN x MN, symmetric)."""
    c = _check_grid(coeffs)
    M, N = c.shape
    B = _basis(M, N)
    u = B @ c.ravel()
    return (4.0 / B.shape[0]) * (B.T * (3.0 * u**2)) @ B


def residual(coeffs, omega: float, nu: int) -> np.ndarray:
    """Galerkin residual ``R[m, n]``; zero exactly at truncated solutions."""
    c = _check_grid(coeffs)
    omega = _check_omega(omega)
    nu = check_nu(nu)
    return linear_weights(*c.shape, omega, nu) * c + cubic_projection(c)


def jacobian(coeffs, omega: float, nu: int) -> np.ndarray:
    """Jacobian of the flattened residual w.r.t. ``(coeffs.ravel(), omega)``.

    Returns an ``MN x (MN + 1)`` array; the last column is d/d omega.
    Flattening is row-major (time index major).
    """
    c = _check_grid(coeffs)
    omega = _check_omega(omega)
    nu = check_nu(nu)
    M, N = c.shape
    w = linear_weights(M, N, omega, nu).ravel()
    J = np.empty((M * N, M * N + 1))
    J[:, :-1] = cubic_jacobian(c)
    J[:, :-1][np.diag_indices(M * N)] += w
    k = (2 * np.arange(M) + 1.0)[:, None]
    J[:, -1] = (-2.0 * omega * k**2 * c).ravel()
    return J


def energy(coeffs, omega: float, nu: int, tau: float = 0.0, refine: int = 1) -> float:
    """Energy functional of the field at rescaled time ``tau``.

    Quadratic terms are summed analytically from the coefficients; the
    quartic term uses an equispaced rule exact for the truncated field
    (``refine`` only multiplies the node count).
    """
    c = _check_grid(coeffs)
    omega = _check_omega(omega)
    nu = check_nu(nu)
    M, N = c.shape
    k = 2 * np.arange(M) + 1.0
    l = 2 * np.arange(N) + 1.0
    a = np.cos(k * tau) @ c
    adot = -(k * np.sin(k * tau)) @ c
    quad = 0.25 * np.pi * np.sum(omega**2 * adot**2 + l ** (2 * nu) * a**2)
    _, X = _quadrature(M, N, refine)
    u = X @ a
    quart = 0.25 * (np.pi / X.shape[0]) * np.sum(u**4)
    return float(quad + quart)


def energy_defect(coeffs, omega: float, nu: int, samples: int = 64) -> float:
    """Relative conservation defect ``max_tau |E(tau) - E(0)| / E(0)``.

    Diagnostic only: truncated solutions conserve energy approximately.
    """
    e0 = energy(coeffs, omega, nu)
    if e0 == 0.0:
        return 0.0
    taus = np.linspace(0.0, np.pi, samples, endpoint=False)
    return max(abs(energy(coeffs, omega, nu, t) - e0) for t in taus) / e0


@dataclass(frozen=True)
class SolutionPoint:
    """A (truncated) periodic solution and its diagnostics.

    ``energy`` is the canonical energy E(0) and ``residual_norm`` the max-norm
    of the Galerkin residual.  ``stability`` is ``None`` until classified,
    then one of ``"stable"``, ``"unstable"``, ``"unknown"``.
    """

    coeffs: np.ndarray
    omega: float
    nu: int
    energy: float
    residual_norm: float
    tol: Optional[float] = None
    stability: Optional[str] = None

    def __post_init__(self):
        c = _check_grid(self.coeffs).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "omega", _check_omega(self.omega))
        object.__setattr__(self, "nu", check_nu(self.nu))
        if self.stability not in (None, "stable", "unstable", "unknown"):
            raise ValueError(f"invalid stability verdict {self.stability!r}")

    @property
    def M(self) -> int:
        return self.coeffs.shape[0]

    @property
    def N(self) -> int:
        return self.coeffs.shape[1]

    @property
    def fundamental(self) -> float:
        """Amplitude of the cos(tau) sin(x) mode."""
        return float(self.coeffs[0, 0])

    def vector(self) -> np.ndarray:
        """Continuation unknowns ``(coeffs.ravel(), omega)``."""
        return np.append(self.coeffs.ravel(), self.omega)

    def with_stability(self, verdict: Optional[str]) -> "SolutionPoint":
        return replace(self, stability=verdict)


def make_point(coeffs, omega: float, nu: int, tol: Optional[float] = None,
               stability: Optional[str] = None) -> SolutionPoint:
    """Build a :class:`SolutionPoint`, computing energy and residual norm."""
    c = _check_grid(coeffs)
    res = residual(c, omega, nu)
    return SolutionPoint(c, omega, nu, energy(c, omega, nu), float(np.max(np.abs(res))),
                         tol, stability)


def point_from_vector(y, M: int, N: int, nu: int, tol=None) -> SolutionPoint:
    y = np.asarray(y, dtype=float)
    return make_point(y[:-1].reshape(M, N), y[-1], nu, tol)


@dataclass(frozen=True)
class RescaleParams:
    """Odd integers of the symmetry ``u -> n**nu u(m tau, n x)``."""

    m_scale: int
    n_scale: int

    def __post_init__(self):
        for name in ("m_scale", "n_scale"):
            v = getattr(self, name)
            if int(v) != v or v < 1 or v % 2 == 0:
                raise ValueError(f"{name} must be an odd positive integer, got {v!r}")


def rescaled_shape(M: int, N: int, params: RescaleParams) -> tuple[int, int]:
    """Smallest grid holding the image of an ``(M, N)`` grid."""
    return ((params.m_scale * (2 * M - 1) + 1) // 2,
            (params.n_scale * (2 * N - 1) + 1) // 2)


def rescale(point: SolutionPoint, params: RescaleParams, shape=None) -> SolutionPoint:
    """Apply the scaling symmetry to a solution.

    Mode (a, b) moves to the time index with ``2a'+1 = m_scale (2a+1)`` and
    the space index with ``2b'+1 = n_scale (2b+1)``, amplitude multiplied by
    ``n_scale**nu``; ``omega -> n_scale**nu omega / m_scale``.  The grid is
    enlarged to :func:`rescaled_shape` unless a larger ``shape`` is given.
    The residual of the image is ``n_scale**(3 nu)`` times that of the source
    and the energy scales by ``n_scale**(4 nu)``.
    """
    if not isinstance(params, RescaleParams):
        params = RescaleParams(*params)
    p, q = params.m_scale, params.n_scale
    M, N = point.M, point.N
    M2, N2 = rescaled_shape(M, N, params)
    if shape is not None:
        if shape[0] < M2 or shape[1] < N2:
            raise ValueError(f"shape {shape} too small for the image, need at least {(M2, N2)}")
        M2, N2 = shape
    out = np.zeros((M2, N2))
    ia = (p * (2 * np.arange(M) + 1) - 1) // 2
    ib = (q * (2 * np.arange(N) + 1) - 1) // 2
    out[np.ix_(ia, ib)] = q**point.nu * point.coeffs
    omega = q**point.nu * point.omega / p
    return make_point(out, omega, point.nu, point.tol)
