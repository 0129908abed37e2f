"""Pseudo-arclength continuation of Galerkin periodic solutions.

Unknowns are ``y = (coeffs.ravel(), omega)``; the Galerkin residual supplies
``M*N`` equations and one affine constraint closes the system.  The curve is
traced with a tangent predictor and a Newton corrector on the hyperplane
orthogonal to the tangent (Keller's scheme).  Folds are flagged where the
omega component of the tangent changes sign, branch points where the sign of
the bordered Jacobian determinant flips.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NonConvergence, SingularJacobian
from .model import SolutionPoint, jacobian, make_point, point_from_vector, residual

logger = logging.getLogger(__name__)

__all__ = [
    "Constraint",
    "ContinuationConfig",
    "ContinuationState",
    "BranchCurve",
    "TraceLimits",
    "fixed_omega",
    "hyperplane",
    "newton_correct",
    "tangent_at",
    "predict",
    "detect_events",
    "trace",
    "null_direction",
    "switch_branch",
    "trunk_seed",
    "is_trunk_like",
    "connection_mode",
    "sweep_trunk",
    "branch_segments",
    "structure_census",
    "join_pieces",
]


@dataclass(frozen=True)
class Constraint:
    """Affine functional ``normal . y == value`` on the continuation unknowns."""

    normal: np.ndarray
    value: float

    def __call__(self, y) -> float:
        return float(np.dot(self.normal, y) - self.value)


def fixed_omega(omega: float, size: int) -> Constraint:
    """Constraint pinning the frequency; ``size`` is ``M*N + 1``."""
    e = np.zeros(size)
    e[-1] = 1.0
    return Constraint(e, float(omega))


def hyperplane(normal, through) -> Constraint:
    normal = np.asarray(normal, dtype=float)
    return Constraint(normal, float(np.dot(normal, through)))


@dataclass(frozen=True)
class ContinuationConfig:
    step_min: float = 1e-8
    step_max: float = 0.1
    initial_step: float = 0.01
    tol: float = 1e-11
    max_iter: int = 12
    cond_max: float = 1e14
    # corrections at most this many iterations count as "easy" for step growth
    fast_iter: int = 3
    grow_after: int = 3
    # reject a step when consecutive tangents turn by more than this
    max_turn: float = 0.5
    bisect_tol: float = 1e-10
    # a determinant sign flip counts as a branch point only if it persists
    # down to this step length
    bp_confirm_step: float = 1e-6
    fundamental_tol: float = 1e-10
    # revisiting a connection within this distance closes the curve
    loop_tol: float = 1e-7

    def __post_init__(self):
        if not 0 < self.step_min <= self.step_max:
            raise ValueError("need 0 < step_min <= step_max")
        if self.tol <= 0:
            raise ValueError("tol must be positive")


def _solve_newton(y0, shape, nu, constraint: Constraint, tol, max_iter, cond_max=1e14):
    """Newton iteration on the bordered system; returns ``(y, iterations)``."""
    M, N = shape
    y = np.array(y0, dtype=float)
    for it in range(max_iter + 1):
        if y[-1] <= 0:
            raise NonConvergence("frequency left the positive half-line")
        F = residual(y[:-1].reshape(M, N), y[-1], nu).ravel()
        g = constraint(y)
        if np.max(np.abs(F)) <= tol and abs(g) <= tol * max(1.0, np.max(np.abs(y))):
            return y, it
        if it == max_iter or not np.all(np.isfinite(F)):
            break
        A = np.vstack([jacobian(y[:-1].reshape(M, N), y[-1], nu), constraint.normal])
        if np.linalg.cond(A) > cond_max:
            raise SingularJacobian(f"bordered Jacobian condition number above {cond_max:g}")
        y = y - np.linalg.solve(A, np.append(F, g))
    raise NonConvergence(f"no convergence to tol={tol:g} after {max_iter} iterations "
                         f"(residual {np.max(np.abs(F)):.3e})")


def newton_correct(seed: SolutionPoint, constraint: Optional[Constraint] = None,
                   tol: float = 1e-11, max_iter: int = 12) -> SolutionPoint:
    """Correct ``seed`` onto the solution set subject to ``constraint``.

    With ``constraint=None`` the frequency of the seed is held fixed.
    Raises :class:`NonConvergence` or :class:`SingularJacobian`.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    y0 = seed.vector()
    if constraint is None:
        constraint = fixed_omega(seed.omega, y0.size)
    y, _ = _solve_newton(y0, (seed.M, seed.N), seed.nu, constraint, tol, max_iter)
    return point_from_vector(y, seed.M, seed.N, seed.nu, tol)


def tangent_at(y, shape, nu, previous=None) -> np.ndarray:
    """Unit kernel vector of the Jacobian at ``y``.

    Oriented to have positive overlap with ``previous`` when given, otherwise
    towards increasing omega.
    """
    M, N = shape
    J = jacobian(y[:-1].reshape(M, N), y[-1], nu)
    if previous is None:
        _, _, vt = np.linalg.svd(J)
        t = vt[-1]
        ref = t[-1] if abs(t[-1]) > 1e-14 else t[0]
        return t if ref >= 0 else -t
    A = np.vstack([J, previous])
    rhs = np.zeros(A.shape[0])
    rhs[-1] = 1.0
    t = np.linalg.solve(A, rhs)
    return t / np.linalg.norm(t)


def _det_sign(y, t, shape, nu) -> float:
    M, N = shape
    A = np.vstack([jacobian(y[:-1].reshape(M, N), y[-1], nu), t])
    sign, _ = np.linalg.slogdet(A)
    return float(sign)


@dataclass(frozen=True)
class ContinuationState:
    current: SolutionPoint
    tangent: np.ndarray
    step: float
    orientation: int = 1

    def __post_init__(self):
        t = np.asarray(self.tangent, dtype=float)
        if t.shape != (self.current.M * self.current.N + 1,):
            raise ValueError("tangent has the wrong length")
        if abs(np.linalg.norm(t) - 1.0) > 1e-12:
            raise ValueError("tangent must be a unit vector")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if not self.step > 0:
            raise ValueError("step must be positive")
        object.__setattr__(self, "tangent", t)


def predict(state: ContinuationState) -> SolutionPoint:
    """Euler predictor ``y + step * orientation * tangent`` (not converged)."""
    p = state.current
    y = p.vector() + state.step * state.orientation * state.tangent
    return point_from_vector(y, p.M, p.N, p.nu)


@dataclass
class BranchCurve:
    """Ordered solution points plus event markers.

    ``events`` holds ``(index, kind)`` pairs with kind in ``fold``,
    ``branch_point``, ``connection``, ``endpoint`` (plus ``restart`` and
    ``aborted`` on swept trunks).  A ``connection`` marks a
    point where the fundamental mode vanishes, i.e. where the curve meets a
    rescaled trunk; it is also a branch point.
    """

    points: list = field(default_factory=list)
    events: list = field(default_factory=list)
    provenance: str = ""
    tangents: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    def event_indices(self, kind: str) -> list:
        return [i for i, k in self.events if k == kind]

    def events_at(self, index: int) -> list:
        return [k for i, k in self.events if i == index]

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.points])

    @property
    def energies(self) -> np.ndarray:
        return np.array([p.energy for p in self.points])

    @property
    def fundamentals(self) -> np.ndarray:
        return np.array([p.fundamental for p in self.points])

    def reversed(self) -> "BranchCurve":
        n = len(self.points)
        return BranchCurve(self.points[::-1], sorted((n - 1 - i, k) for i, k in self.events),
                           self.provenance, [-t for t in self.tangents[::-1]])


def detect_events(omega_tangents: Sequence[float], det_signs: Sequence[float]) -> list:
    """Scan consecutive tangent/determinant data for folds and branch points.

    A fold is reported at index ``i`` when the omega component of the tangent
    changes sign between points ``i-1`` and ``i``; a branch point when the
    bordered determinant changes sign there without a fold.
    """
    events = []
    for i in range(1, len(omega_tangents)):
        fold = np.sign(omega_tangents[i]) * np.sign(omega_tangents[i - 1]) < 0
        if fold:
            events.append((i, "fold"))
        elif np.sign(det_signs[i]) * np.sign(det_signs[i - 1]) < 0:
            events.append((i, "branch_point"))
    return events


# repeated visits of a connection are located by bisection to about 1e-9
SAME_POINT_RTOL = 1e-7


@dataclass(frozen=True)
class TraceLimits:
    max_points: int = 2000
    e_max: float = math.inf
    omega_range: tuple = (0.0, math.inf)


class _Tracer:
    def __init__(self, shape, nu, config: ContinuationConfig):
        self.shape = shape
        self.nu = nu
        self.cfg = config

    def correct(self, y_pred, t):
        return _solve_newton(y_pred, self.shape, self.nu, hyperplane(t, y_pred),
                             self.cfg.tol, self.cfg.max_iter, self.cfg.cond_max)

    def step_to(self, y, t, s):
        """Point on the curve at predictor distance ``s`` from ``y``."""
        yn, _ = self.correct(y + s * t, t)
        return yn

    def bisect(self, y, t, h, indicator, tol=None):
        """Shrink ``[0, h]`` around a sign flip of ``indicator`` along the curve.

        Each midpoint is predicted from the nearest point already on the
        near side, so predictor errors shrink with the bracket; this keeps
        Newton inside its (small) basin next to a singular point.  Returns
        the bracketing point with the smaller ``|indicator|``.
        """
        tol = self.cfg.bisect_tol if tol is None else tol
        ya, ta, fa = y, t, indicator(y)
        yb, fb = None, None
        length = h
        while length > tol:
            d = 0.5 * length
            try:
                ym = self.step_to(ya, ta, d)
            except (NonConvergence, SingularJacobian, np.linalg.LinAlgError):
                break
            fm = indicator(ym)
            if np.sign(fm) == np.sign(fa):
                ta = tangent_at(ym, self.shape, self.nu, previous=ta)
                ya, fa = ym, fm
            else:
                yb, fb = ym, fm
            length = d
        if yb is None:
            yb, fb = self.step_to(ya, ta, length), indicator(self.step_to(ya, ta, length))
        return (ya, ta) if abs(fa) <= abs(fb) else (yb, tangent_at(yb, self.shape, self.nu, previous=ta))


def trunk_seed(M: int, N: int, nu: int, omega0: float = 1.0 + 1e-4,
               tol: float = 1e-11) -> SolutionPoint:
    """Converged small-amplitude trunk point at ``omega0``.

    Seeded with the one-mode closed form ``(4/3) sqrt(omega0**2 - 1)`` and
    corrected at fixed frequency.
    """
    if omega0 <= 1.0:
        raise ValueError("trunk seed frequency must exceed 1")
    c = np.zeros((M, N))
    c[0, 0] = 4.0 / 3.0 * math.sqrt(omega0**2 - 1.0)
    return newton_correct(make_point(c, omega0, nu), tol=tol)


def trace(start: SolutionPoint, direction: int = 1, limits: TraceLimits = TraceLimits(),
          tol: Optional[float] = None, config: ContinuationConfig = ContinuationConfig(),
          tangent=None, stop_at_connection: bool = True, provenance: str = "") -> BranchCurve:
    """Trace the solution curve through ``start``.

    ``direction=+1`` follows increasing omega at the start (or ``tangent``
    when given, ``direction`` then flips it).  Tracing stops at the limits,
    or, with ``stop_at_connection``, where the fundamental amplitude changes
    sign (the curve has reached a rescaled trunk).
    Every stored point satisfies ``residual_norm <= tol``.
    """
    cfg = config if tol is None else ContinuationConfig(**{**config.__dict__, "tol": tol})
    tol = cfg.tol
    if direction not in (1, -1):
        raise ValueError("direction must be +1 or -1")
    if start.residual_norm > tol:
        start = newton_correct(start, tol=tol, max_iter=cfg.max_iter)
    shape, nu = (start.M, start.N), start.nu
    tr = _Tracer(shape, nu, cfg)
    lo, hi = limits.omega_range

    def mk(y):
        return point_from_vector(y, *shape, nu, tol)

    y = start.vector()
    t = tangent_at(y, shape, nu) if tangent is None else np.asarray(tangent, float)
    t = direction * t / np.linalg.norm(t)
    curve = BranchCurve([start], [], provenance, [t])
    dets = [_det_sign(y, t, shape, nu)]
    h = cfg.initial_step
    easy = 0

    def append(yn, tn):
        curve.points.append(mk(yn))
        curve.tangents.append(tn)
        dets.append(_det_sign(yn, tn, shape, nu))

    def grow(its):
        nonlocal h, easy
        if its <= cfg.fast_iter:
            easy += 1
            if easy >= cfg.grow_after:
                h = min(2 * h, cfg.step_max)
                easy = 0
        else:
            easy = 0

    skip_events = False
    connections = []
    while len(curve.points) < limits.max_points:
        try:
            yn, its = tr.correct(y + h * t, t)
            tn = tangent_at(yn, shape, nu, previous=t)
            if np.linalg.norm(yn - y) > 2 * h or np.dot(t, tn) < 1 - cfg.max_turn:
                raise NonConvergence("step jumped or turned too sharply")
            if abs(yn[0]) <= cfg.fundamental_tol < abs(y[0]):
                raise NonConvergence("step landed on the rescaled-trunk subspace")
        except (NonConvergence, SingularJacobian, np.linalg.LinAlgError) as exc:
            h *= 0.5
            easy = 0
            if h < cfg.step_min:
                curve.events.append((len(curve.points) - 1, "endpoint"))
                err = NonConvergence(f"trace aborted after {len(curve.points)} points: {exc}")
                err.curve = curve
                raise err from exc
            continue

        if not (lo <= yn[-1] <= hi) or mk(yn).energy > limits.e_max:
            curve.events.append((len(curve.points) - 1, "endpoint"))
            return curve

        d_new = _det_sign(yn, tn, shape, nu)
        if skip_events:
            # the reference point sat on a branch point; restart the bookkeeping
            append(yn, tn)
            skip_events = False
            y, t = yn, tn
            grow(its)
            continue

        if np.sign(yn[0]) * np.sign(y[0]) < 0:
            # fundamental crosses zero: the curve meets a rescaled trunk
            yc, _ = tr.bisect(y, t, h, lambda v: v[0], tol=1e-3 * cfg.fundamental_tol)
            append(yc, t)
            curve.events.append((len(curve.points) - 1, "connection"))
            if stop_at_connection:
                curve.events.append((len(curve.points) - 1, "endpoint"))
                return curve
            if any(np.max(np.abs(yc - v)) <= cfg.loop_tol for v in connections):
                # back at a connection already passed: the curve is a closed loop
                logger.info("curve closed on itself at omega=%.12g", yc[-1])
                curve.events.append((len(curve.points) - 1, "endpoint"))
                return curve
            connections.append(yc)
            # cross with the incoming tangent; the kernel is 2-D here
            y = yc
            skip_events = True
            continue

        new_events = detect_events([t[-1], tn[-1]], [dets[-1], d_new])
        if any(k == "branch_point" for _, k in new_events):
            if h > cfg.bp_confirm_step:
                # large steps hop between the sheets of an imperfect bifurcation
                h *= 0.5
                easy = 0
                continue
            yb, tb = tr.bisect(y, t, h, lambda v: _det_sign(
                v, tangent_at(v, shape, nu, previous=t), shape, nu))
            append(yb, tb)
            curve.events.append((len(curve.points) - 1, "branch_point"))
        append(yn, tn)
        if any(k == "fold" for _, k in new_events):
            curve.events.append((len(curve.points) - 1, "fold"))
        y, t = yn, tn
        grow(its)
    curve.events.append((len(curve.points) - 1, "endpoint"))
    return curve


def null_direction(point: SolutionPoint, tangent) -> np.ndarray:
    """Approximate second kernel direction of the Jacobian at a branch point.

    Takes the two smallest right singular vectors of the ``MN x (MN+1)``
    Jacobian and returns the unit combination orthogonal to ``tangent``.
    """
    J = jacobian(point.coeffs, point.omega, point.nu)
    _, _, vt = np.linalg.svd(J)
    V = vt[-2:].T
    t = np.asarray(tangent, float)
    # component of the 2-D kernel orthogonal to t
    coef = V.T @ t
    phi = V @ np.array([-coef[1], coef[0]])
    if np.linalg.norm(phi) < 1e-12:
        phi = V[:, 0] - np.dot(V[:, 0], t) * t
    return phi / np.linalg.norm(phi)


def switch_branch(at: SolutionPoint, null_dir, epsilon: float = 1e-3,
                  tol: float = 1e-11, max_iter: int = 20) -> SolutionPoint:
    """Hop from a branch point onto the crossing branch.

    Perturbs along ``null_dir`` by ``epsilon`` and corrects under
    ``null_dir . (y - y_at) == epsilon``; ``-epsilon`` is tried if that fails.
    """
    phi = np.asarray(null_dir, float)
    phi = phi / np.linalg.norm(phi)
    y0 = at.vector()
    last = None
    for eps in (epsilon, -epsilon):
        c = Constraint(phi, float(np.dot(phi, y0) + eps))
        try:
            y, _ = _solve_newton(y0 + eps * phi, (at.M, at.N), at.nu, c, tol, max_iter)
        except (NonConvergence, SingularJacobian, np.linalg.LinAlgError) as exc:
            last = exc
            continue
        return point_from_vector(y, at.M, at.N, at.nu, tol)
    raise NonConvergence(f"branch switching failed for both signs: {last}")


def is_trunk_like(point: SolutionPoint, dominance: float = 2.0) -> bool:
    """Fundamental amplitude exceeds ``dominance`` times every other mode."""
    c = np.abs(point.coeffs).ravel()
    return c[0] > 0 and (c.size == 1 or c[0] >= dominance * c[1:].max())


def connection_mode(point: SolutionPoint) -> tuple:
    """Index of the dominant mode, which labels the rescaled trunk met at a connection."""
    c = np.abs(point.coeffs).copy()
    c[0, 0] = 0.0
    m, n = np.unravel_index(int(np.argmax(c)), c.shape)
    return int(m), int(n)


def sweep_trunk(M: int, N: int, nu: int, omega_max: float,
                limits: TraceLimits = TraceLimits(max_points=20000),
                config: ContinuationConfig = ContinuationConfig(),
                restart_gap: float = 1e-4, max_pieces: int = 50,
                seed_omega: float = 1.0 + 1e-4) -> list:
    """Trace the trunk up to ``omega_max``, restarting past closed loops.

    A trace that enters a structure which closes on itself (or aborts) never
    comes back to the trunk.  The sweep then restarts at fixed frequency
    slightly above the largest frequency reached by a trunk-like point
    (see :func:`is_trunk_like`), and continues towards higher omega.
    Returns the list of traced pieces, in order.  A piece whose trace gave
    up carries an ``"aborted"`` event on its last point.  ``limits.max_points``
    bounds the total number of points over all pieces.
    """
    seed = trunk_seed(M, N, nu, seed_omega, tol=config.tol)
    pieces = []
    reached = seed.omega
    budget = limits.max_points
    while len(pieces) < max_pieces and budget > 0:
        lims = TraceLimits(budget, limits.e_max, (limits.omega_range[0], omega_max))
        try:
            piece = trace(seed, 1, lims, config=config, stop_at_connection=False,
                          provenance=f"trunk sweep piece {len(pieces)}")
        except NonConvergence as exc:
            piece = exc.curve
            piece.events.append((len(piece.points) - 1, "aborted"))
        pieces.append(piece)
        budget -= len(piece.points)
        last = piece.points[-1]
        step_guard = 2 * config.step_max
        if last.omega >= omega_max - step_guard and is_trunk_like(last):
            break
        trunk_pts = [p for p in piece.points if is_trunk_like(p)]
        if not trunk_pts:
            break
        best = max(trunk_pts, key=lambda p: p.omega)
        reached = max(reached, best.omega)
        gap = restart_gap
        seed = None
        while gap < 0.1 and seed is None:
            om = reached + gap
            if om >= omega_max:
                break
            try:
                cand = newton_correct(make_point(best.coeffs, om, nu), tol=config.tol,
                                      max_iter=config.max_iter)
            except (NonConvergence, SingularJacobian, np.linalg.LinAlgError):
                cand = None
            if cand is not None and cand.energy > limits.e_max:
                break
            if cand is not None and is_trunk_like(cand) and \
                    np.sign(cand.fundamental) == np.sign(best.fundamental):
                seed = cand
            gap *= 2
        if seed is None:
            break
        reached = seed.omega
    return pieces


def branch_segments(pieces) -> list:
    """Cut traced pieces into branch datasets, one per connection.

    A segment runs from the last trunk-like point before a connection up to
    the connection itself and is labelled with the mode it connects to.
    At finite truncation branches are usually not separated from the trunk
    by a genuine branch point (the bifurcation is imperfect), so the
    departure is located by trunk-likeness instead.  Repeated visits of the
    same connection (closed loops) are skipped.
    """
    out = []
    seen = []
    for piece in pieces:
        start = 0
        for idx in sorted(set(piece.event_indices("connection"))):
            p = piece.points[idx]
            key = np.array([p.omega, p.energy])
            if any(np.all(np.abs(key - k) <= SAME_POINT_RTOL * np.abs(k)) for k in seen):
                start = idx
                continue
            seen.append(key)
            first = start
            for j in range(idx, start - 1, -1):
                if is_trunk_like(piece.points[j]):
                    first = j
                    break
            m, n = connection_mode(p)
            seg = BranchCurve(piece.points[first:idx + 1],
                              [(i - first, k) for i, k in piece.events if first <= i <= idx],
                              f"branch (m,n)=({m},{n})",
                              piece.tangents[first:idx + 1])
            if not any(k == "endpoint" for _, k in seg.events if _ == len(seg) - 1):
                seg.events.append((len(seg) - 1, "endpoint"))
            out.append(seg)
            start = idx
    return out


def structure_census(pieces) -> list:
    """Distinct connections and branch points met by a sweep.

    Returns sorted ``(omega, energy, kind, mode)`` tuples; repeated visits of
    the same point are counted once.
    """
    found = []
    for piece in pieces:
        for i, kind in piece.events:
            if kind not in ("connection", "branch_point"):
                continue
            p = piece.points[i]
            if any(k == kind and abs(om - p.omega) <= SAME_POINT_RTOL * p.omega
                   and abs(e - p.energy) <= SAME_POINT_RTOL * max(p.energy, 1.0)
                   for om, e, k, _ in found):
                continue
            found.append((p.omega, p.energy, kind, connection_mode(p)))
    return sorted(found)


def join_pieces(pieces, provenance: str = "trunk") -> BranchCurve:
    """Concatenate sweep pieces into one curve.

    The first point of every piece after the first is marked ``restart``.
    """
    out = BranchCurve(provenance=provenance)
    for k, piece in enumerate(pieces):
        off = len(out.points)
        if k > 0 and piece.points:
            out.events.append((off, "restart"))
        out.points.extend(piece.points)
        out.tangents.extend(piece.tangents)
        out.events.extend((i + off, kind) for i, kind in piece.events)
    return out
