"""Poincare return map of the section x = 0 and its fixed-point machinery.

The map sends (R, theta) to the (r, theta) coordinates of the trajectory
started at (0, R, theta) when it meets x = 0 for the m-th time at t > 0
(m = 2 by default, one full loop for a closed profile). Closed geodesics of
the weighted half-plane metric, hence closed rotationally symmetric
self-shrinkers, are fixed points.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Literal, Sequence

import numpy as np

from .analysis import ProfileSource, ShrinkerProfile
from .geometry import (
    GeodesicState,
    NonTransversalStart,
    SolverConfig,
    Termination,
    Trajectory,
    check_dimension,
    cylinder_radius,
    integrate,
    integrate_with_variations,
    rhs,
    sphere_radius,
)

__all__ = [
    "NoReturn",
    "FixedPointError",
    "NoBracket",
    "NewtonDiverged",
    "JacobianMismatch",
    "ReturnMapResult",
    "FixedPointRecord",
    "ScanPoint",
    "ScanResult",
    "return_map",
    "forgetful_map",
    "symmetric_shooting_residual",
    "scan",
    "default_scan_window",
    "find_fixed_point",
    "jacobian",
    "classify_fixed_point",
    "wrap_angle",
    "assemble_symmetric_profile",
    "assemble_loop_profile",
    "PROFILE_SPACING",
]

# Sample spacing of assembled profiles; well below the default max_step so
# the "gaps <= max_step" invariant holds, and fine enough for the spline
# differentiation tolerances downstream.
PROFILE_SPACING = 0.005

# Residual tolerance for the scalar shooting root and closure tolerance for
# the full return map at a reported fixed point.
RESIDUAL_TOL = 1e-10
CLOSURE_TOL = 1e-8

Classification = Literal["Isolated", "CurveCandidate", "Degenerate"]


class NoReturn(RuntimeError):
    """The trajectory terminated before the requested crossing occurred."""

    def __init__(self, message: str, termination: Termination,
                 trajectory: Trajectory | None = None) -> None:
        super().__init__(message)
        self.termination = termination
        self.trajectory = trajectory


class FixedPointError(RuntimeError):
    """Fixed-point search failure."""


class NoBracket(FixedPointError):
    """No sign-change bracket, or the bracket pins a discontinuity."""


class NewtonDiverged(FixedPointError):
    """Damped Newton failed to reach the closure tolerance."""


class JacobianMismatch(RuntimeError):
    """Finite-difference and variational Jacobians disagree beyond tolerance."""


@dataclass(frozen=True)
class ReturnMapResult:
    """Image of the generalized m-th-crossing return map, with provenance."""

    r_out: float
    theta_out: float
    t_star: float
    m: int
    trajectory: Trajectory


@dataclass(frozen=True)
class FixedPointRecord:
    """A located fixed point of the return map.

    residual is the max-norm of P - id at the point (theta compared modulo
    2*pi); jacobian is dP on the section in (r, theta) coordinates.
    """

    R_star: float
    theta_star: float
    residual: float
    jacobian: np.ndarray
    classification: Classification
    n: int


@dataclass(frozen=True)
class ScanPoint:
    """One grid point of a residual scan; failure holds the termination name
    when the residual is undefined (NoReturn)."""

    R: float
    residual: float | None
    failure: str | None = None


@dataclass(frozen=True)
class ScanResult:
    points: list[ScanPoint]
    brackets: list[tuple[float, float]]


def wrap_angle(angle: float) -> float:
    """Reduce an angle difference to (-pi, pi]."""
    wrapped = math.fmod(angle, 2.0 * math.pi)
    if wrapped > math.pi:
        wrapped -= 2.0 * math.pi
    elif wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def _check_transversal(theta: float, config: SolverConfig) -> None:
    if abs(math.cos(theta)) <= config.transversality_margin:
        raise NonTransversalStart(
            f"cos(theta)={math.cos(theta):.3e} at the section start: "
            "the trajectory runs along the r-axis")


def return_map(R: float, theta: float, m: int, n: int,
               config: SolverConfig) -> ReturnMapResult:
    """Evaluate the m-th-crossing return map at (R, theta).

    Integrates from (0, R, theta) to the m-th transversal crossing of x = 0
    at t > 0 and returns (r, theta) there together with the return time.
    Raises NoReturn if the trajectory hits the r-floor, escapes, or runs out
    of arclength first, and NonTransversalStart for cos(theta) ~ 0.
    """
    check_dimension(n)
    if m < 1:
        raise ValueError(f"crossing index m must be >= 1, got {m}")
    if not R > config.r_floor:
        raise ValueError(f"R={R} must exceed r_floor={config.r_floor}")
    _check_transversal(theta, config)
    traj = integrate(GeodesicState(0.0, R, theta), n, config,
                     stop_after_crossings=m)
    if len(traj.crossings) < m:
        raise NoReturn(
            f"trajectory from (0, {R}, {theta}) terminated by "
            f"{traj.termination.value} after {len(traj.crossings)} of {m} "
            "crossings", traj.termination, traj)
    ev = traj.crossings[m - 1]
    return ReturnMapResult(r_out=ev.state.r, theta_out=ev.state.theta,
                           t_star=ev.t, m=m, trajectory=traj)


def forgetful_map(R: float, n: int, config: SolverConfig) -> float:
    """Radial component of the return map at initial angle 0 (m = 2)."""
    return return_map(R, 0.0, 2, n, config).r_out


def symmetric_shooting_residual(R: float, n: int, config: SolverConfig) -> float:
    """theta at the first crossing plus pi, unwrapped.

    A zero means the trajectory from (0, R, 0) meets the r-axis
    perpendicularly after half a loop, so the full loop closes up by
    reflection; such R are fixed points of the forgetful map.
    """
    result = return_map(R, 0.0, 1, n, config)
    return result.theta_out + math.pi


def default_scan_window(n: int, step: float = 0.01) -> tuple[float, float]:
    """Scan window (cylinder radius + 0.02, sphere radius + 2.0) for dimension n."""
    check_dimension(n)
    lo = cylinder_radius(n) + max(0.02, 2.0 * step)
    return (lo, sphere_radius(n) + 2.0)


def scan(r_range: tuple[float, float], step: float, n: int, config: SolverConfig,
         jobs: int = 1) -> ScanResult:
    """Evaluate the symmetric shooting residual on a grid.

    Returns the grid values (NoReturn recorded inline as a failure marker)
    plus every bracket of adjacent grid points with finite residuals of
    opposite sign. Grid points evaluate independently; with jobs > 1 they
    run concurrently and merge in grid order.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    lo, hi = r_range
    if not lo < hi:
        raise ValueError(f"empty scan range {r_range}")
    grid = np.arange(lo, hi, step)

    def evaluate(R: float) -> ScanPoint:
        try:
            return ScanPoint(R=float(R),
                             residual=symmetric_shooting_residual(R, n, config))
        except NoReturn as exc:
            return ScanPoint(R=float(R), residual=None,
                             failure=exc.termination.value)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(evaluate, grid))
    else:
        points = [evaluate(R) for R in grid]

    brackets: list[tuple[float, float]] = []
    for left, right in zip(points[:-1], points[1:]):
        if left.residual is not None and right.residual is not None \
                and left.residual * right.residual < 0.0:
            brackets.append((left.R, right.R))
    return ScanResult(points=points, brackets=brackets)


def _refine_bracket(f: Callable[[float], float], lo: float, hi: float,
                    f_lo: float, f_hi: float, ftol: float,
                    max_iter: int = 120) -> tuple[float, float]:
    """Safeguarded bisection+secant on a bracketed scalar root.

    Iterates until |f| < ftol. If the bracket collapses to rounding width
    while the residual stays large, the sign change is a discontinuity (the
    shooting residual jumps by 2*pi where the half-loop dives near the
    axis), not a root: raises NoBracket.
    """
    best_x, best_f = (lo, f_lo) if abs(f_lo) < abs(f_hi) else (hi, f_hi)
    for _ in range(max_iter):
        trial = hi - f_hi * (hi - lo) / (f_hi - f_lo)
        margin = 1e-3 * (hi - lo)
        if not lo + margin < trial < hi - margin:
            trial = 0.5 * (lo + hi)
        f_trial = f(trial)
        if abs(f_trial) < abs(best_f):
            best_x, best_f = trial, f_trial
        if abs(f_trial) < ftol:
            return trial, f_trial
        if hi - lo < 4e-16 * max(1.0, abs(trial)):
            raise NoBracket(
                f"bracket collapsed at R={trial:.12g} with residual "
                f"{best_f:.3e} still above {ftol:.1e}: the sign change is a "
                "discontinuity of the shooting residual, not a root")
        if f_lo * f_trial < 0.0:
            hi, f_hi = trial, f_trial
        else:
            lo, f_lo = trial, f_trial
    raise NoBracket(
        f"no convergence after {max_iter} iterations; best residual {best_f:.3e}")


def _closure_residual(R: float, theta: float, result: ReturnMapResult) -> float:
    return max(abs(result.r_out - R), abs(wrap_angle(result.theta_out - theta)))


def _jacobian_variational(R: float, theta: float, m: int, n: int,
                          config: SolverConfig) -> np.ndarray:
    traj, matrices = integrate_with_variations(
        GeodesicState(0.0, R, theta), n, config, stop_after_crossings=m)
    if len(traj.crossings) < m:
        raise NoReturn(
            f"variational trajectory terminated by {traj.termination.value} "
            f"after {len(traj.crossings)} of {m} crossings",
            traj.termination, traj)
    state = traj.crossings[m - 1].state
    M = matrices[m - 1]
    flow = np.array(rhs(state, n))
    # Crossing-time correction: subtract the flow direction times the
    # linearized shift of the crossing time, then restrict to (r, theta).
    corrected = M - np.outer(flow, M[0, :]) / flow[0]
    return corrected[1:, 1:]


def _jacobian_fd(R: float, theta: float, m: int, n: int,
                 config: SolverConfig) -> np.ndarray:
    h = max(1e-6, 1e-6 * abs(R))

    def image(Rv: float, tv: float) -> np.ndarray:
        res = return_map(Rv, tv, m, n, config)
        return np.array([res.r_out, res.theta_out])

    d_r = (image(R + h, theta) - image(R - h, theta)) / (2.0 * h)
    d_theta = (image(R, theta + h) - image(R, theta - h)) / (2.0 * h)
    return np.column_stack([d_r, d_theta])


def jacobian(R: float, theta: float, n: int,
             method: Literal["FiniteDifference", "Variational"] = "Variational",
             config: SolverConfig = SolverConfig(), m: int = 2,
             cross_validate: bool = False) -> np.ndarray:
    """dP of the m-th-crossing return map at (R, theta), in (r, theta).

    FiniteDifference uses central differences with step max(1e-6, 1e-6|R|);
    Variational propagates the 3x3 fundamental matrix and applies the
    section correction for the crossing-time variation. With cross_validate
    the other method is computed too and a disagreement beyond 1e-4 raises
    JacobianMismatch.
    """
    check_dimension(n)
    if method not in ("FiniteDifference", "Variational"):
        raise ValueError(f"unknown jacobian method {method!r}")
    if method == "Variational":
        out = _jacobian_variational(R, theta, m, n, config)
        other: Callable[[], np.ndarray] = lambda: _jacobian_fd(R, theta, m, n, config)
    else:
        out = _jacobian_fd(R, theta, m, n, config)
        other = lambda: _jacobian_variational(R, theta, m, n, config)
    if cross_validate:
        alt = other()
        gap = float(np.max(np.abs(out - alt)))
        if gap > 1e-4:
            raise JacobianMismatch(
                f"FiniteDifference and Variational dP disagree by {gap:.3e} "
                f"at (R={R}, theta={theta})")
    return out


def classify_jacobian(dP: np.ndarray, tol: float = 1e-6) -> Classification:
    """Classify a fixed point from the singular values of dP - I.

    Isolated when both exceed tol; CurveCandidate when exactly one falls
    below (rank 1, the analytic-curve branch); Degenerate when both do.
    Numerical evidence only.
    """
    sv = np.linalg.svd(np.asarray(dP, dtype=float) - np.eye(2), compute_uv=False)
    below = int(np.sum(sv < tol))
    if below == 0:
        return "Isolated"
    if below == 1:
        return "CurveCandidate"
    return "Degenerate"


def classify_fixed_point(record: FixedPointRecord, tol: float = 1e-6) -> Classification:
    """Classify a located fixed point (see classify_jacobian)."""
    if record.residual > CLOSURE_TOL:
        raise ValueError(
            f"record residual {record.residual:.3e} exceeds the fixed-point "
            f"tolerance {CLOSURE_TOL:.1e}")
    return classify_jacobian(record.jacobian, tol)


def find_fixed_point(seed_or_bracket: Sequence[float], n: int,
                     mode: Literal["Symmetric", "FullMap"],
                     config: SolverConfig,
                     classification_tol: float = 1e-6) -> FixedPointRecord:
    """Locate a fixed point of the return map.

    Symmetric mode takes a bracket (R_lo, R_hi) with opposite signs of the
    symmetric shooting residual and drives it below 1e-10 by safeguarded
    bisection+secant, then verifies full-map closure below 1e-8. FullMap
    mode takes a seed (R, theta) and runs damped Newton on P - id (step
    halving up to 20 times on residual increase).
    """
    check_dimension(n)
    if mode == "Symmetric":
        lo, hi = (float(v) for v in seed_or_bracket)
        if not lo < hi:
            raise ValueError(f"invalid bracket ({lo}, {hi})")
        f = lambda R: symmetric_shooting_residual(R, n, config)
        f_lo, f_hi = f(lo), f(hi)
        if not f_lo * f_hi < 0.0:
            raise NoBracket(
                f"residual signs at ({lo}, {hi}) are ({f_lo:.3e}, {f_hi:.3e}): "
                "not a bracket")
        R_star, _ = _refine_bracket(f, lo, hi, f_lo, f_hi, RESIDUAL_TOL)
        theta_star = 0.0
    elif mode == "FullMap":
        R_star, theta_star = (float(v) for v in seed_or_bracket)
        R_star, theta_star = _newton_full_map(R_star, theta_star, n, config)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    verification = return_map(R_star, theta_star, 2, n, config)
    residual = _closure_residual(R_star, theta_star, verification)
    if residual > CLOSURE_TOL:
        raise FixedPointError(
            f"full-map closure {residual:.3e} at (R={R_star:.12g}, "
            f"theta={theta_star:.3g}) exceeds {CLOSURE_TOL:.1e}")
    dP = _jacobian_variational(R_star, theta_star, 2, n, config)
    return FixedPointRecord(
        R_star=R_star, theta_star=theta_star, residual=residual,
        jacobian=dP, classification=classify_jacobian(dP, classification_tol),
        n=n)


def _newton_full_map(R: float, theta: float, n: int, config: SolverConfig,
                     tol: float = RESIDUAL_TOL, max_iter: int = 50) -> tuple[float, float]:
    u = np.array([R, theta], dtype=float)

    def residual_vec(v: np.ndarray) -> np.ndarray:
        res = return_map(v[0], v[1], 2, n, config)
        return np.array([res.r_out - v[0],
                         wrap_angle(res.theta_out - v[1])])

    g = residual_vec(u)
    for _ in range(max_iter):
        norm = float(np.max(np.abs(g)))
        if norm < tol:
            return float(u[0]), float(u[1])
        J = _jacobian_variational(u[0], u[1], 2, n, config) - np.eye(2)
        try:
            step = np.linalg.solve(J, -g)
        except np.linalg.LinAlgError as exc:
            raise NewtonDiverged(f"singular Jacobian at {u}: {exc}") from exc
        # damping: halve on residual increase, up to 20 times
        scale = 1.0
        for _ in range(20):
            trial = u + scale * step
            if trial[0] > config.r_floor:
                try:
                    g_trial = residual_vec(trial)
                except NoReturn:
                    g_trial = None
                if g_trial is not None and float(np.max(np.abs(g_trial))) < norm:
                    u, g = trial, g_trial
                    break
            scale *= 0.5
        else:
            raise NewtonDiverged(
                f"damping exhausted at {u} with residual {norm:.3e}")
    raise NewtonDiverged(f"no convergence after {max_iter} iterations")


def _assembly_config(config: SolverConfig) -> SolverConfig:
    """Tightened tolerances for profile sampling.

    The curvature and stability-operator checks differentiate the samples
    twice through splines, which amplifies dense-output noise; two extra
    orders of integration accuracy keep those residuals inside their
    tolerances.
    """
    return config.tightened(100.0)


def assemble_symmetric_profile(R_star: float, n: int, config: SolverConfig,
                               spacing: float = PROFILE_SPACING,
                               config_digest: str = "") -> ShrinkerProfile:
    """Closed profile from a symmetric fixed point, built by reflection.

    Integrates the half-loop from (0, R_star, 0) to the first crossing and
    mirrors it across the r-axis; closure and reflection symmetry are then
    exact by construction.
    """
    check_dimension(n)
    tight = _assembly_config(config)
    traj = integrate(GeodesicState(0.0, R_star, 0.0), n, tight,
                     stop_after_crossings=1)
    if len(traj.crossings) < 1:
        raise NoReturn("half-loop terminated before the first crossing",
                       traj.termination, traj)
    t_half = traj.crossings[0].t
    residual = traj.crossings[0].state.theta + math.pi
    k = max(4, math.ceil(t_half / spacing))
    tg = np.linspace(0.0, t_half, k + 1)
    states = np.asarray(traj.interpolant(tg), dtype=float)[:3]
    x_half, r_half, theta_half = states[0].copy(), states[1], states[2]
    x_half[0] = 0.0
    x_half[-1] = 0.0  # crossing event: |x| below crossing_tol
    t = np.concatenate([tg, t_half + tg[1:]])
    x = np.concatenate([x_half, -x_half[-2::-1]])
    r = np.concatenate([r_half, r_half[-2::-1]])
    theta = np.concatenate([theta_half, -2.0 * math.pi - theta_half[-2::-1]])
    return ShrinkerProfile(
        n=n, t=t, x=x, r=r, theta=theta, closed=True,
        source=ProfileSource(R_star=float(R_star), residual=float(residual),
                             config_digest=config_digest))


def assemble_loop_profile(R: float, theta: float, n: int, config: SolverConfig,
                          m: int = 2, spacing: float = PROFILE_SPACING,
                          config_digest: str = "") -> ShrinkerProfile:
    """Profile sampled along the full loop to the m-th crossing.

    For fixed points found in FullMap mode (no reflection symmetry assumed);
    the profile is marked closed when the loop closes within tolerance.
    """
    check_dimension(n)
    tight = _assembly_config(config)
    traj = integrate(GeodesicState(0.0, R, theta), n, tight,
                     stop_after_crossings=m)
    if len(traj.crossings) < m:
        raise NoReturn(f"loop terminated after {len(traj.crossings)} of {m} "
                       "crossings", traj.termination, traj)
    t_end = traj.crossings[m - 1].t
    end = traj.crossings[m - 1].state
    closure = max(abs(end.r - R),
                  abs(wrap_angle(end.theta - theta)))
    k = max(4, math.ceil(t_end / spacing))
    tg = np.linspace(0.0, t_end, k + 1)
    states = np.asarray(traj.interpolant(tg), dtype=float)[:3]
    x, r, th = states[0].copy(), states[1].copy(), states[2]
    closed = closure < CLOSURE_TOL
    if closed:
        x[0] = x[-1] = 0.0
        r[-1] = r[0]
    return ShrinkerProfile(
        n=n, t=tg, x=x, r=r, theta=th, closed=closed,
        source=ProfileSource(R_star=float(R), residual=float(closure),
                             config_digest=config_digest))
