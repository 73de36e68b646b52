"""Analytic reference solutions and fixture curves.

The geodesic system has two explicit solutions per dimension: the cylinder
line r = sqrt(2(n-1)) and the sphere circle x^2 + r^2 = 2n. Both serve as
integrator oracles and as reference geometry in plots. The grim-reaper
curve is a plane-curve fixture for the curvature machinery: it translates
at speed 1/2, so its curvature equals cos(theta)/2 pointwise.
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import ProfileSource, ShrinkerProfile
from .geometry import check_dimension, cylinder_radius, sphere_radius

__all__ = [
    "cylinder_radius",
    "sphere_radius",
    "cylinder_state",
    "sphere_circle_states",
    "sphere_profile",
    "cylinder_profile",
    "grim_reaper_curve",
]


def cylinder_state(n: int, t: np.ndarray) -> np.ndarray:
    """Exact cylinder-line solution from (0, sqrt(2(n-1)), 0): rows (x, r, theta)."""
    t = np.asarray(t, dtype=float)
    rc = cylinder_radius(n)
    return np.vstack([t, np.full_like(t, rc), np.zeros_like(t)])


def sphere_circle_states(n: int, t: np.ndarray) -> np.ndarray:
    """Exact sphere-circle solution from (0, sqrt(2n), 0): rows (x, r, theta).

    x = rho sin(t/rho), r = rho cos(t/rho), theta = -t/rho for rho = sqrt(2n),
    valid until the circle meets the axis at t = rho*pi/2.
    """
    t = np.asarray(t, dtype=float)
    rho = sphere_radius(n)
    return np.vstack([rho * np.sin(t / rho), rho * np.cos(t / rho), -t / rho])


def sphere_profile(n: int, spacing: float = 0.005,
                   end_trim: float = 1e-6) -> ShrinkerProfile:
    """Open semicircle profile of the round sphere of radius sqrt(2n).

    Parametrized by arclength from just above the axis at x ~ -rho to just
    above it at x ~ +rho; the end trim keeps r > 0 at every sample.
    """
    check_dimension(n)
    rho = sphere_radius(n)
    length = math.pi * rho
    k = max(8, math.ceil((length - 2 * end_trim) / spacing))
    t = np.linspace(end_trim, length - end_trim, k + 1)
    phi = math.pi - t / rho
    return ShrinkerProfile(
        n=n,
        t=t,
        x=rho * np.cos(phi),
        r=rho * np.sin(phi),
        theta=phi - math.pi / 2.0,
        closed=False,
        source=ProfileSource(R_star=rho, residual=0.0, config_digest="analytic"),
    )


def cylinder_profile(n: int, length: float = 6.0,
                     spacing: float = 0.005) -> ShrinkerProfile:
    """Straight cylinder-line profile segment of arclength `length`."""
    check_dimension(n)
    rc = cylinder_radius(n)
    k = max(8, math.ceil(length / spacing))
    t = np.linspace(0.0, length, k + 1)
    return ShrinkerProfile(
        n=n,
        t=t,
        x=t.copy(),
        r=np.full_like(t, rc),
        theta=np.zeros_like(t),
        closed=False,
        source=ProfileSource(R_star=rc, residual=0.0, config_digest="analytic"),
    )


def grim_reaper_curve(x_max: float = 2.4, m: int = 1201
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """The translating curve y = 1 - 2 log(cos(x/2)) sampled over [-x_max, x_max].

    Returns (t, x, y, theta) with t the curve parameter (= x, not arclength)
    and theta = x/2 the exact tangent angle. Its curvature satisfies
    kappa = cos(theta)/2 pointwise, an independent oracle for the
    curvature-by-spline machinery. The vertical shift keeps y positive.
    """
    if not 0.0 < x_max < math.pi:
        raise ValueError("x_max must lie in (0, pi)")
    x = np.linspace(-x_max, x_max, m)
    y = 1.0 - 2.0 * np.log(np.cos(x / 2.0))
    theta = x / 2.0
    return x.copy(), x, y, theta
