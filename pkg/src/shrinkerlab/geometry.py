"""Weighted half-plane geometry and the profile-curve geodesic integrator.

Rotationally symmetric self-shrinkers in R^{n+1} correspond to curves in the
open upper half-plane {(x, r) : r > 0} that are geodesics of the length
density

    w(x, r) = r^(n-1) * exp(-(x^2 + r^2) / 4).

Parametrized by Euclidean arclength with tangent angle theta, such a curve
satisfies the autonomous system

    x' = cos(theta)
    r' = sin(theta)
    theta' = (x/2) sin(theta) + ((n-1)/r - r/2) cos(theta),

which this module integrates with an adaptive embedded Runge-Kutta scheme
(DOP853), dense output, and event detection for crossings of the section
x = 0. The angle is integrated as an unwrapped real number so winding
information survives multi-crossing returns.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp

__all__ = [
    "GeodesicState",
    "SolverConfig",
    "CrossingEvent",
    "Trajectory",
    "Termination",
    "StepSizeUnderflow",
    "NonTransversalStart",
    "TangentialCrossing",
    "check_dimension",
    "cylinder_radius",
    "sphere_radius",
    "weight",
    "rhs",
    "rhs_jacobian",
    "integrate",
    "integrate_with_variations",
]

# Crossings recorded below this arclength from an on-section start are the
# departure artifact, not returns (a transversal start needs O(1) arclength
# to turn around).
_MIN_RETURN_TIME = 1e-6


class StepSizeUnderflow(RuntimeError):
    """The adaptive integrator failed to advance (stiffness/singularity)."""


class NonTransversalStart(ValueError):
    """Initial state lies on the section x = 0 with tangent along the r-axis."""


class TangentialCrossing(RuntimeError):
    """A section crossing was detected with |cos(theta)| below the margin."""


class Termination(enum.Enum):
    """Why an integration stopped."""

    EVENT_LIMIT = "EventLimit"
    R_FLOOR = "RFloor"
    ESCAPE = "Escape"
    TIME_BUDGET = "TimeBudget"


def check_dimension(n: int) -> int:
    """Validate the surface dimension n (the ambient space is R^{n+1})."""
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
        raise TypeError(f"dimension must be an integer, got {n!r}")
    if n < 2:
        raise ValueError(f"dimension must satisfy n >= 2, got {n}")
    return int(n)


def cylinder_radius(n: int) -> float:
    """Radius sqrt(2(n-1)) of the cylindrical equilibrium line r = const."""
    return math.sqrt(2.0 * (check_dimension(n) - 1))


def sphere_radius(n: int) -> float:
    """Radius sqrt(2n) of the circular sphere profile x^2 + r^2 = 2n."""
    return math.sqrt(2.0 * check_dimension(n))


@dataclass(frozen=True)
class GeodesicState:
    """A point of the shooting ODE: position (x, r), tangent angle theta.

    r must be positive (open upper half-plane); theta is stored unwrapped.
    """

    x: float
    r: float
    theta: float

    def __post_init__(self) -> None:
        if not self.r > 0.0:
            raise ValueError(f"r must be positive, got {self.r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.r, self.theta], dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and guards for the geodesic integrator.

    crossing_tol bounds |x| at recorded section crossings; r_floor stops
    trajectories approaching the singular axis r = 0; escape_radius bounds
    x^2 + r^2; t_max is the arclength budget; transversality_margin is the
    minimum |cos(theta)| at a recorded crossing.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.1
    r_floor: float = 1e-6
    t_max: float = 200.0
    escape_radius: float = 20.0
    crossing_tol: float = 1e-10
    transversality_margin: float = 1e-8

    def __post_init__(self) -> None:
        for name in ("rel_tol", "abs_tol", "max_step", "r_floor", "t_max",
                     "escape_radius", "crossing_tol", "transversality_margin"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be strictly positive")
        if not self.r_floor < 1.0:
            raise ValueError("r_floor must be below 1")
        if self.crossing_tol > self.abs_tol * 1e3:
            raise ValueError("crossing_tol must not exceed abs_tol * 1e3")

    def tightened(self, factor: float = 100.0) -> "SolverConfig":
        """Copy with integration tolerances reduced by `factor` (floored)."""
        return replace(
            self,
            rel_tol=min(self.rel_tol, self.rel_tol / factor),
            abs_tol=min(self.abs_tol, self.abs_tol / factor),
            crossing_tol=min(self.crossing_tol, self.abs_tol * 1e3 / factor),
        )


@dataclass(frozen=True)
class CrossingEvent:
    """A transversal crossing of the section x = 0 at t > 0.

    index counts crossings from 1; direction is the sign of cos(theta).
    """

    index: int
    t: float
    state: GeodesicState
    direction: int


@dataclass
class Trajectory:
    """Integration record: samples, dense-output interpolant, crossings.

    `t` holds the accepted step times, `y` the matching states (rows
    (x, r, theta)); `interpolant` evaluates the dense output on [0, t_end].
    """

    t: np.ndarray
    y: np.ndarray
    interpolant: Callable[[float], np.ndarray]
    crossings: list[CrossingEvent]
    termination: Termination
    n: int
    config: SolverConfig

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    @property
    def initial(self) -> GeodesicState:
        return GeodesicState(*self.y[0])

    @property
    def final(self) -> GeodesicState:
        return GeodesicState(*self.y[-1])

    def state_at(self, t: float) -> GeodesicState:
        """Dense-output state at arclength t in [0, t_end]."""
        if not 0.0 <= t <= self.t_end:
            raise ValueError(f"t={t} outside [0, {self.t_end}]")
        return GeodesicState(*np.asarray(self.interpolant(t), dtype=float)[:3])

    def sample(self, spacing: float) -> np.ndarray:
        """Dense states on a uniform grid with gaps <= spacing.

        Returns an array of rows (t, x, r, theta).
        """
        if spacing <= 0.0:
            raise ValueError("spacing must be positive")
        k = max(1, math.ceil(self.t_end / spacing))
        tg = np.linspace(0.0, self.t_end, k + 1)
        yg = np.asarray(self.interpolant(tg), dtype=float)[:3]
        return np.column_stack([tg, yg.T])


def weight(x: float, r: float, n: int) -> float:
    """Length density w(x, r) = r^(n-1) exp(-(x^2 + r^2)/4) of the metric."""
    check_dimension(n)
    if not r > 0.0:
        raise ValueError(f"weight requires r > 0, got r={r}")
    return r ** (n - 1) * math.exp(-(x * x + r * r) / 4.0)


def rhs(state: GeodesicState, n: int) -> tuple[float, float, float]:
    """Right-hand side (x', r', theta') of the geodesic system."""
    check_dimension(n)
    if not state.r > 0.0:
        raise ValueError(f"rhs requires r > 0, got r={state.r}")
    return _rhs(0.0, (state.x, state.r, state.theta), n)


def _rhs(t: float, y: Sequence[float], n: int) -> tuple[float, float, float]:
    x, r, th = y[0], y[1], y[2]
    c = math.cos(th)
    s = math.sin(th)
    return (c, s, 0.5 * x * s + ((n - 1) / r - 0.5 * r) * c)


def rhs_jacobian(state: GeodesicState, n: int) -> np.ndarray:
    """3x3 Jacobian of the geodesic right-hand side at `state`.

    Rows follow (x', r', theta'); the theta' row has entries
    d(theta')/dx = sin(theta)/2,
    d(theta')/dr = -((n-1)/r^2 + 1/2) cos(theta),
    d(theta')/dtheta = (x/2) cos(theta) - ((n-1)/r - r/2) sin(theta).
    """
    check_dimension(n)
    x, r, th = state.x, state.r, state.theta
    if not r > 0.0:
        raise ValueError(f"rhs_jacobian requires r > 0, got r={r}")
    c = math.cos(th)
    s = math.sin(th)
    return np.array([
        [0.0, 0.0, -s],
        [0.0, 0.0, c],
        [0.5 * s, -((n - 1) / r**2 + 0.5) * c, 0.5 * x * c - ((n - 1) / r - 0.5 * r) * s],
    ])


def _rhs_with_variations(t: float, y: np.ndarray, n: int) -> np.ndarray:
    x, r, th = y[0], y[1], y[2]
    c = math.cos(th)
    s = math.sin(th)
    core = (c, s, 0.5 * x * s + ((n - 1) / r - 0.5 * r) * c)
    J = np.array([
        [0.0, 0.0, -s],
        [0.0, 0.0, c],
        [0.5 * s, -((n - 1) / r**2 + 0.5) * c, 0.5 * x * c - ((n - 1) / r - 0.5 * r) * s],
    ])
    M = y[3:].reshape(3, 3)
    return np.concatenate((core, (J @ M).ravel()))


def _run(y0: np.ndarray, n: int, config: SolverConfig, stop_after_crossings: int,
         with_variations: bool):
    """Shared solve_ivp driver; returns the raw scipy solution."""
    on_section = abs(y0[0]) <= config.crossing_tol

    def ev_cross(t, y, *args):
        return y[0]

    def ev_floor(t, y, *args):
        return y[1] - config.r_floor

    def ev_escape(t, y, *args):
        return y[0] * y[0] + y[1] * y[1] - config.escape_radius**2

    if stop_after_crossings > 0:
        # The start sitting on the section fires one spurious event at t=0.
        ev_cross.terminal = stop_after_crossings + (1 if on_section else 0)
    ev_floor.terminal = True
    ev_floor.direction = -1
    ev_escape.terminal = True
    ev_escape.direction = 1

    fun = _rhs_with_variations if with_variations else _rhs
    sol = solve_ivp(
        fun,
        (0.0, config.t_max),
        y0,
        args=(n,),
        method="DOP853",
        rtol=config.rel_tol,
        atol=config.abs_tol,
        max_step=config.max_step,
        dense_output=True,
        events=[ev_cross, ev_floor, ev_escape],
    )
    if sol.status == -1:
        raise StepSizeUnderflow(sol.message)
    return sol


def _build_trajectory(sol, n: int, config: SolverConfig, stop_after_crossings: int,
                      with_variations: bool) -> tuple[Trajectory, list[np.ndarray]]:
    t_cross = np.asarray(sol.t_events[0], dtype=float)
    y_cross = np.asarray(sol.y_events[0], dtype=float)
    keep = t_cross > _MIN_RETURN_TIME
    t_cross = t_cross[keep]
    y_cross = y_cross[keep] if y_cross.size else y_cross.reshape(0, sol.y.shape[0])

    if stop_after_crossings > 0 and len(t_cross) > stop_after_crossings:
        # The spurious start event did not fire, so the terminal count
        # overshot by one genuine crossing; trim back to the requested one.
        t_cross = t_cross[:stop_after_crossings]
        y_cross = y_cross[:stop_after_crossings]

    crossings: list[CrossingEvent] = []
    matrices: list[np.ndarray] = []
    for i, (tc, yc) in enumerate(zip(t_cross, y_cross), start=1):
        if abs(yc[0]) > config.crossing_tol:
            raise RuntimeError(
                f"event refinement left |x|={abs(yc[0]):.3e} above crossing_tol")
        c = math.cos(yc[2])
        if abs(c) <= config.transversality_margin:
            raise TangentialCrossing(
                f"crossing {i} at t={tc:.6f} has |cos(theta)|={abs(c):.3e} "
                f"<= margin {config.transversality_margin:.3e}")
        crossings.append(CrossingEvent(
            index=i, t=float(tc),
            state=GeodesicState(float(yc[0]), float(yc[1]), float(yc[2])),
            direction=1 if c > 0 else -1))
        if with_variations:
            matrices.append(yc[3:].reshape(3, 3).copy())

    reached_limit = stop_after_crossings > 0 and len(crossings) >= stop_after_crossings
    if reached_limit:
        termination = Termination.EVENT_LIMIT
        t_end = crossings[stop_after_crossings - 1].t
        mask = sol.t < t_end
        t_rec = np.append(sol.t[mask], t_end)
        y_rec = np.column_stack([sol.y[:, mask], sol.sol(t_end)])
    elif sol.status == 1:
        termination = Termination.R_FLOOR if len(sol.t_events[1]) else Termination.ESCAPE
        t_rec, y_rec = sol.t, sol.y
    else:
        termination = Termination.TIME_BUDGET
        t_rec, y_rec = sol.t, sol.y

    traj = Trajectory(
        t=np.asarray(t_rec, dtype=float),
        y=np.asarray(y_rec[:3].T, dtype=float),
        interpolant=sol.sol,
        crossings=crossings,
        termination=termination,
        n=n,
        config=config,
    )
    return traj, matrices


def _check_start(initial: GeodesicState, config: SolverConfig) -> None:
    if not initial.r > config.r_floor:
        raise ValueError(
            f"initial r={initial.r} must exceed r_floor={config.r_floor}")
    if abs(initial.x) <= config.crossing_tol and \
            abs(math.cos(initial.theta)) <= config.transversality_margin:
        raise NonTransversalStart(
            f"start on the section with cos(theta)={math.cos(initial.theta):.3e}: "
            "the trajectory runs along the r-axis")


def integrate(initial: GeodesicState, n: int, config: SolverConfig,
              stop_after_crossings: int = 0) -> Trajectory:
    """Integrate the geodesic system from `initial`.

    Parameters
    ----------
    initial : GeodesicState
        Starting point; `initial.r` must exceed `config.r_floor`.
    n : int
        Surface dimension (n >= 2).
    config : SolverConfig
        Tolerances and termination guards.
    stop_after_crossings : int
        Stop at the k-th transversal crossing of x = 0 at t > 0;
        0 integrates until t_max, the r-floor, or escape.

    Returns
    -------
    Trajectory
        Dense-output record with refined crossing events and the
        termination reason. Crossings are refined on the interpolant to
        |x| <= config.crossing_tol.

    Raises
    ------
    StepSizeUnderflow, NonTransversalStart, TangentialCrossing, ValueError
    """
    check_dimension(n)
    if stop_after_crossings < 0:
        raise ValueError("stop_after_crossings must be >= 0")
    _check_start(initial, config)
    sol = _run(initial.as_array(), n, config, stop_after_crossings, False)
    traj, _ = _build_trajectory(sol, n, config, stop_after_crossings, False)
    return traj


def integrate_with_variations(initial: GeodesicState, n: int, config: SolverConfig,
                              stop_after_crossings: int = 0
                              ) -> tuple[Trajectory, list[np.ndarray]]:
    """Integrate jointly with the 3x3 fundamental matrix of the linearized flow.

    The variational system M' = J(y) M starts from the identity; the matrix
    is recorded at each crossing event. Returns (trajectory, matrices) with
    one matrix per crossing, in crossing order.
    """
    check_dimension(n)
    if stop_after_crossings < 0:
        raise ValueError("stop_after_crossings must be >= 0")
    _check_start(initial, config)
    y0 = np.concatenate((initial.as_array(), np.eye(3).ravel()))
    sol = _run(y0, n, config, stop_after_crossings, True)
    return _build_trajectory(sol, n, config, stop_after_crossings, True)
