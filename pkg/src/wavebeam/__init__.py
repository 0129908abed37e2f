"""Time-periodic solutions of the cubic wave and beam equations.

The package computes, continues and classifies solutions of

    omega**2 u_tt + (-1)**nu d_x**(2 nu) u + u**3 = 0

(``nu = 1`` wave, ``nu = 2`` beam) on ``[0, pi]`` with ``u`` 2 pi periodic
in ``tau``, represented by odd Galerkin modes ``cos((2m+1) tau) sin((2n+1) x)``.

Submodules
----------
model
    Residual, Jacobian, energy, scaling symmetry.
continuation
    Pseudo-arclength tracing, events, branch switching, trunk sweeps.
reducible
    Closed forms for minimally coupled mode sets.
floquet
    Monodromy matrices, Floquet multipliers, stability scans.
serialization
    CSV and JSON formats.
cli
    Command-line front end.
"""

from .continuation import (
    BranchCurve,
    ContinuationConfig,
    TraceLimits,
    branch_segments,
    join_pieces,
    newton_correct,
    structure_census,
    sweep_trunk,
    switch_branch,
    trace,
    trunk_seed,
)
from .errors import (
    NonConvergence,
    NotReducible,
    SingularJacobian,
    StepCountTooSmall,
    WavebeamError,
    WindowViolation,
)
from .floquet import classify_point, monodromy, multipliers, stability_scan
from .model import (
    RescaleParams,
    SolutionPoint,
    energy,
    evaluate_field,
    jacobian,
    make_point,
    rescale,
    residual,
)
from .reducible import (
    ModePair,
    ReducibleSolution,
    branch_window,
    nonreducible_11_beam,
    reducible_tree,
    solve_reducible,
    two_mode_branch,
)

__version__ = "0.1.0"

__all__ = [
    "BranchCurve",
    "ContinuationConfig",
    "TraceLimits",
    "branch_segments",
    "join_pieces",
    "newton_correct",
    "structure_census",
    "sweep_trunk",
    "switch_branch",
    "trace",
    "trunk_seed",
    "NonConvergence",
    "NotReducible",
    "SingularJacobian",
    "StepCountTooSmall",
    "WavebeamError",
    "WindowViolation",
    "classify_point",
    "monodromy",
    "multipliers",
    "stability_scan",
    "RescaleParams",
    "SolutionPoint",
    "energy",
    "evaluate_field",
    "jacobian",
    "make_point",
    "rescale",
    "residual",
    "ModePair",
    "ReducibleSolution",
    "branch_window",
    "nonreducible_11_beam",
    "reducible_tree",
    "solve_reducible",
    "two_mode_branch",
]
