"""Closed forms for minimally coupled mode sets.

A mode set is *reducible* when every restricted Galerkin equation only holds
monomials ``c_i c_j**2``.  The system is then linear in the squared
amplitudes and can be solved support by support.  The beam pair
``{(0, 0), (1, 1)}`` is the one two-mode set that produces a branch without
being reducible; :func:`nonreducible_11_beam` handles it by Newton's method.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import NotReducible, WindowViolation
from .model import check_nu, energy, residual

__all__ = [
    "ModePair",
    "ReducibleSolution",
    "trunk_amplitude",
    "branch_window",
    "two_mode_branch",
    "coupling_tensor",
    "is_reducible",
    "solve_reducible",
    "s11_residual",
    "nonreducible_11_beam",
    "admissible_pairs",
    "TreeRow",
    "reducible_tree",
]

OFF_PATTERN_TOL = 1e-14
DEDUP_TOL = 1e-9


@dataclass(frozen=True)
class ModePair:
    """Secondary mode ``(m, n)`` paired with the fundamental ``(0, 0)``."""

    m: int
    n: int
    nu: int

    def __post_init__(self):
        check_nu(self.nu)
        if self.m < 1 or self.n < 1:
            raise ValueError(f"mode pair needs m >= 1 and n >= 1, got ({self.m}, {self.n})")
        if not (2 * self.m + 1) < (2 * self.n + 1) ** self.nu:
            raise ValueError(
                f"mode pair ({self.m}, {self.n}) violates (2m+1) < (2n+1)**nu for nu={self.nu}")

    @property
    def time_factor(self) -> int:
        return 2 * self.m + 1

    @property
    def space_weight(self) -> int:
        return (2 * self.n + 1) ** (2 * self.nu)


@dataclass(frozen=True)
class ReducibleSolution:
    """Amplitudes on a small mode set at frequency ``omega``."""

    modes: tuple
    amplitudes: tuple
    omega: float
    nu: int

    def __post_init__(self):
        modes = tuple((int(a), int(b)) for a, b in self.modes)
        amps = tuple(self.amplitudes)
        if len(modes) != len(amps):
            raise ValueError("modes and amplitudes differ in length")
        for a in amps:
            if isinstance(a, complex) or not math.isfinite(a):
                raise ValueError(f"amplitudes must be finite reals, got {a!r}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "amplitudes", tuple(float(a) for a in amps))
        object.__setattr__(self, "nu", check_nu(self.nu))

    def grid(self, shape: Optional[tuple] = None) -> np.ndarray:
        """Embed the amplitudes into the smallest coefficient grid holding them."""
        M = max(m for m, _ in self.modes) + 1 if self.modes else 1
        N = max(n for _, n in self.modes) + 1 if self.modes else 1
        if shape is not None:
            if shape[0] < M or shape[1] < N:
                raise ValueError(f"shape {shape} cannot hold modes {self.modes}")
            M, N = shape
        c = np.zeros((M, N))
        for (m, n), a in zip(self.modes, self.amplitudes):
            c[m, n] = a
        return c

    def restricted_residual(self) -> float:
        """Max-norm of the Galerkin residual restricted to ``modes``."""
        if not self.modes:
            return 0.0
        r = residual(self.grid(), self.omega, self.nu)
        return float(max(abs(r[m, n]) for m, n in self.modes))

    def energy(self) -> float:
        return energy(self.grid(), self.omega, self.nu)

    def amplitude(self, mode) -> float:
        mode = tuple(mode)
        return self.amplitudes[self.modes.index(mode)] if mode in self.modes else 0.0


def trunk_amplitude(omega: float) -> float:
    """One-mode trunk amplitude ``(4/3) sqrt(omega**2 - 1)``."""
    omega = float(omega)
    if not omega >= 1.0:
        raise ValueError(f"trunk amplitude needs omega >= 1, got {omega}")
    return 4.0 / 3.0 * math.sqrt(omega * omega - 1.0)


def branch_window(pair: ModePair, exact: bool = False):
    """Range of ``omega**2`` where the two-mode family has real amplitudes.

    Returns ``(low, high)`` with low = (4 l - 3)/(4 k - 3) and
    high = (3 l - 4)/(3 k - 4), where k = (2m+1)**2 and l = (2n+1)**(2 nu).
    With ``exact=True`` the bounds are :class:`fractions.Fraction`.
    """
    k = pair.time_factor**2
    l = pair.space_weight
    low = Fraction(4 * l - 3, 4 * k - 3)
    high = Fraction(3 * l - 4, 3 * k - 4)
    if exact:
        return low, high
    return float(low), float(high)


def _two_mode_squares(pair: ModePair, omega: float):
    k = pair.time_factor**2
    l = pair.space_weight
    w2 = omega * omega
    a2 = 16.0 / 21.0 * ((4 * k - 3) * w2 - (4 * l - 3))
    b2 = 16.0 / 21.0 * ((3 * l - 4) - (3 * k - 4) * w2)
    return a2, b2


def two_mode_branch(pair: ModePair, omega: float) -> ReducibleSolution:
    """Two-mode solution on ``{(0, 0), (m, n)}`` from the closed form.

    The window is taken closed so that its endpoints return the limiting
    one-mode solutions (``B = 0`` at the top, ``A = 0`` at the bottom).

    Raises
    ------
    WindowViolation
        If ``omega**2`` lies outside the window.
    """
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    low, high = branch_window(pair)
    w2 = omega * omega
    slack = 4 * np.finfo(float).eps
    if w2 < low * (1 - slack) or w2 > high * (1 + slack):
        raise WindowViolation(
            f"omega**2 = {omega * omega:.17g} outside window [{float(low):.17g}, {float(high):.17g}] "
            f"for pair ({pair.m}, {pair.n}), nu={pair.nu}")
    a2, b2 = _two_mode_squares(pair, omega)
    # clip round-off at the window edges
    A = math.sqrt(max(a2, 0.0))
    B = math.sqrt(max(b2, 0.0))
    return ReducibleSolution(((0, 0), (pair.m, pair.n)), (A, B), omega, pair.nu)


def _lattice_grids(modes):
    M = max(m for m, _ in modes) + 1
    N = max(n for _, n in modes) + 1
    # 4M x 4N equispaced nodes integrate degree-4 products exactly
    pt, px = 4 * M, 4 * N
    tau = np.pi * np.arange(pt) / pt
    x = np.pi * np.arange(px) / px
    phi = np.array([np.outer(np.cos((2 * m + 1) * tau), np.sin((2 * n + 1) * x)).ravel()
                    for m, n in modes])
    return phi, 4.0 / (pt * px)


@lru_cache(maxsize=256)
def _coupling_tensor_cached(modes: tuple) -> np.ndarray:
    phi, w = _lattice_grids(modes)
    T = w * np.einsum("ip,jp,kp,lp->ijkl", phi, phi, phi, phi)
    T.setflags(write=False)
    return T


def coupling_tensor(modes: Sequence) -> np.ndarray:
    """Projection of all basis triple products onto each mode.

    ``T[i, j, k, l]`` is the coefficient of ``c_j c_k c_l`` (summed over
    ordered index triples) in the cubic term of equation ``i``.
    """
    modes = tuple((int(a), int(b)) for a, b in modes)
    if len(set(modes)) != len(modes):
        raise ValueError(f"modes must be distinct, got {modes}")
    if any(a < 0 or b < 0 for a, b in modes):
        raise ValueError(f"mode indices must be nonnegative, got {modes}")
    return _coupling_tensor_cached(modes)


def _off_pattern_max(T: np.ndarray) -> float:
    worst = 0.0
    for i, j, k, l in itertools.product(range(T.shape[0]), repeat=4):
        trip = sorted((j, k, l))
        allowed = any(trip == sorted((i, a, a)) for a in range(T.shape[0]))
        if not allowed:
            worst = max(worst, abs(T[i, j, k, l]))
    return worst


def is_reducible(modes: Sequence, nu: int = 1) -> bool:
    """True when every restricted equation only contains ``c_i c_j**2`` terms.

    The cubic projection does not depend on ``nu``; the argument is kept so
    that callers can state which equation they mean.  A single mode or the
    empty set is always reducible.
    """
    check_nu(nu)
    modes = tuple(modes)
    if len(modes) <= 1:
        return True
    return _off_pattern_max(coupling_tensor(modes)) <= OFF_PATTERN_TOL


def _linear_weight(mode, omega, nu):
    m, n = mode
    return (2 * n + 1) ** (2 * nu) - (2 * m + 1) ** 2 * omega**2


def solve_reducible(modes: Sequence, omega: float, nu: int,
                    check: bool = True) -> list[ReducibleSolution]:
    """All real solutions of a reducible mode set at frequency ``omega``.

    Every support subset is tried in turn: on a support ``S`` the equations
    ``w_i + sum_j K_ij c_j**2 = 0`` form a linear system for the squares.
    Solutions with a negative square are discarded.  The zero solution
    (empty support) always comes first; amplitudes are returned nonnegative.

    Raises
    ------
    NotReducible
        If ``check`` is set and the mode set fails :func:`is_reducible`.
    """
    nu = check_nu(nu)
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    modes = tuple((int(a), int(b)) for a, b in modes)
    if check and not is_reducible(modes, nu):
        raise NotReducible(f"mode set {modes} is not reducible")
    out = [ReducibleSolution(modes, (0.0,) * len(modes), omega, nu)]
    if not modes:
        return out
    T = coupling_tensor(modes)
    idx = np.arange(len(modes))
    # K_ij: coefficient of c_i c_j**2 in equation i (three orderings when j != i)
    K = np.where(idx[:, None] == idx[None, :], T[idx, idx, idx, idx],
                 3.0 * T[idx[:, None], idx[:, None], idx[None, :], idx[None, :]])
    w = np.array([_linear_weight(md, omega, nu) for md in modes])
    for size in range(1, len(modes) + 1):
        for support in itertools.combinations(range(len(modes)), size):
            S = list(support)
            sub = K[np.ix_(S, S)]
            if abs(np.linalg.det(sub)) < 1e-14 * max(1.0, np.abs(sub).max() ** len(S)):
                continue
            sq = np.linalg.solve(sub, -w[S])
            if np.any(sq <= 0.0):
                continue
            amps = np.zeros(len(modes))
            amps[S] = np.sqrt(sq)
            out.append(ReducibleSolution(modes, tuple(amps), omega, nu))
    return out


def s11_residual(A: float, B: float, omega: float) -> np.ndarray:
    """Residual of the beam ``{(0,0), (1,1)}`` system, scaled by 16."""
    w2 = omega * omega
    return np.array([
        A * (9 * A * A + 12 * B * B - 16 * w2 + 16) - 3 * A * A * B,
        B * (12 * A * A + 9 * B * B - 144 * w2 + 1296) - A**3,
    ])


def _s11_jacobian(A, B, omega):
    w2 = omega * omega
    return np.array([
        [27 * A * A + 12 * B * B - 16 * w2 + 16 - 6 * A * B, 24 * A * B - 3 * A * A],
        [24 * A * B - 3 * A * A, 12 * A * A + 27 * B * B - 144 * w2 + 1296],
    ])


def _canonical(A, B):
    if A < 0 or (A == 0 and B < 0):
        return -A, -B
    return A, B


def nonreducible_11_beam(omega: float, max_iter: int = 50,
                         tol: float = 1e-12) -> list[ReducibleSolution]:
    """Real solutions of the full beam ``{(0, 0), (1, 1)}`` system.

    Newton's method is started from the reducible approximations at the same
    frequency: the trunk ``(A, 0)``, the rescaled trunk ``(0, B)`` and the
    two-mode closed form, each with both signs of ``B``.  Converged solutions
    are reduced modulo ``u -> -u`` (``A >= 0``) and deduplicated.  The zero
    solution is always included.
    """
    omega = float(omega)
    if not omega > 0:
        raise ValueError(f"omega must be positive, got {omega}")
    w2 = omega * omega
    seeds = [(0.0, 0.0)]
    if w2 >= 1:
        seeds.append((trunk_amplitude(omega), 0.0))
    if w2 >= 9:
        seeds.append((0.0, 4.0 * math.sqrt(w2 - 9.0)))
    a2, b2 = _two_mode_squares(ModePair(1, 1, 2), omega)
    if a2 > 0 and b2 > 0:
        seeds.append((math.sqrt(a2), math.sqrt(b2)))
    seeds += [(a, -b) for a, b in seeds if b != 0]

    found: list[tuple] = []
    for a0, b0 in seeds:
        z = np.array([a0, b0], dtype=float)
        for _ in range(max_iter):
            F = s11_residual(z[0], z[1], omega)
            scale = max(1.0, np.abs(z).max() ** 3, 16 * w2 * np.abs(z).max())
            if np.abs(F).max() <= tol * scale:
                break
            try:
                z = z - np.linalg.solve(_s11_jacobian(z[0], z[1], omega), F)
            except np.linalg.LinAlgError:
                break
            if not np.all(np.isfinite(z)):
                break
        else:
            continue
        if not np.all(np.isfinite(z)):
            continue
        F = s11_residual(z[0], z[1], omega)
        if np.abs(F).max() > tol * max(1.0, np.abs(z).max() ** 3, 16 * w2 * np.abs(z).max()):
            continue
        A, B = _canonical(float(z[0]), float(z[1]))
        if abs(A) < DEDUP_TOL:
            A = 0.0
        if abs(B) < DEDUP_TOL:
            B = 0.0
        if not any(abs(A - p) <= DEDUP_TOL and abs(B - q) <= DEDUP_TOL for p, q in found):
            found.append((A, B))
    found.sort()
    return [ReducibleSolution(((0, 0), (1, 1)), ab, omega, 2) for ab in found]


def admissible_pairs(N: int, nu: int, m_max: Optional[int] = None) -> list[ModePair]:
    """Mode pairs with ``n < N``, ``m <= m_max`` and ``(2m+1) < (2n+1)**nu``.

    ``m_max`` defaults to ``N**2 - 1``, the largest time index of the usual
    ``M = N**2`` truncation.  Pairs are sorted by ``(n, m)``.
    """
    nu = check_nu(nu)
    if N < 1:
        raise ValueError(f"N must be positive, got {N}")
    m_max = N * N - 1 if m_max is None else int(m_max)
    pairs = []
    for n in range(1, N):
        for m in range(1, m_max + 1):
            if 2 * m + 1 < (2 * n + 1) ** nu:
                pairs.append(ModePair(m, n, nu))
    return pairs


@dataclass(frozen=True)
class TreeRow:
    omega: float
    energy: float
    family: str
    m: int
    n: int
    A: float
    B: float


def _window_omegas(low: float, high: float, grid: np.ndarray) -> np.ndarray:
    lo, hi = math.sqrt(low), math.sqrt(high)
    inner = grid[(grid > lo) & (grid < hi)]
    return np.concatenate(([lo], inner, [hi]))


def reducible_tree(N: int, nu: int, omega_grid: Iterable[float],
                   m_max: Optional[int] = None) -> list[TreeRow]:
    """Trunk and two-mode families sampled on ``omega_grid``.

    Each branch is additionally sampled at both window endpoints.  Rows come
    trunk first, then pairs in ``(n, m)`` order, each by increasing omega.
    """
    nu = check_nu(nu)
    grid = np.unique(np.asarray(list(omega_grid), dtype=float))
    if np.any(grid <= 0):
        raise ValueError("omega grid must be positive")
    rows = []
    for om in grid[grid >= 1.0]:
        A = trunk_amplitude(om)
        c = np.array([[A]])
        rows.append(TreeRow(float(om), energy(c, om, nu), "trunk", 0, 0, A, 0.0))
    for pair in admissible_pairs(N, nu, m_max):
        low, high = branch_window(pair)
        for om in _window_omegas(low, high, grid):
            sol = two_mode_branch(pair, om)
            rows.append(TreeRow(float(om), sol.energy(), "branch", pair.m, pair.n,
                                sol.amplitudes[0], sol.amplitudes[1]))
    return rows
