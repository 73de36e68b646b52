"""Entropy, Gaussian length, F-functionals and curvature diagnostics.

Everything here operates on sampled profile curves; no integration happens
in this module. Line integrals are evaluated with composite Gauss-Legendre
quadrature on spline reconstructions of the samples, so all quantities are
parametrization independent (the sample parameter need not be arclength).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline, make_interp_spline

from .geometry import check_dimension

__all__ = [
    "ProfileSource",
    "ShrinkerProfile",
    "CurvatureDiagnostics",
    "DiagnosticsReport",
    "unit_sphere_area",
    "gaussian_length_bound",
    "line_integral",
    "gaussian_length",
    "entropy",
    "f_functional",
    "f_functional_grid",
    "signed_curvature",
    "curvature_diagnostics",
    "jacobi_identity_check",
    "count_axis_crossings",
    "audit",
]

# Endpoints with r below this count as sitting on the rotation axis, in
# which case the revolved hypersurface closes up even though the curve does
# not (sphere-type profiles).
AXIS_ANCHOR_TOL = 1e-3

_GL_NODES, _GL_WEIGHTS = leggauss(7)


class ProfileValidationError(ValueError):
    """A profile violates its structural invariants."""


@dataclass(frozen=True)
class ProfileSource:
    """Provenance of a profile: fixed-point radius, residual, config digest."""

    R_star: float
    residual: float
    config_digest: str


@dataclass
class ShrinkerProfile:
    """A sampled profile curve of a rotationally symmetric hypersurface.

    Arrays t, x, r, theta have equal length; r > 0 at every sample. If
    `closed`, the first and last samples coincide in (x, r) and theta turns
    by -2*pi (or +2*pi) over the loop.
    """

    n: int
    t: np.ndarray
    x: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    closed: bool
    source: ProfileSource

    def __post_init__(self) -> None:
        check_dimension(self.n)
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.r = np.asarray(self.r, dtype=float)
        self.theta = np.asarray(self.theta, dtype=float)
        m = len(self.t)
        if not (len(self.x) == len(self.r) == len(self.theta) == m):
            raise ProfileValidationError("sample channels have unequal lengths")
        if m == 0:
            raise ProfileValidationError("profile has no samples")
        if np.any(~np.isfinite(self.t)) or np.any(~np.isfinite(self.x)) or \
                np.any(~np.isfinite(self.r)) or np.any(~np.isfinite(self.theta)):
            raise ProfileValidationError("profile contains non-finite samples")
        if np.any(self.r <= 0.0):
            raise ProfileValidationError("profile has samples with r <= 0")
        if m > 1 and np.any(np.diff(self.t) <= 0.0):
            raise ProfileValidationError("sample parameter must strictly increase")
        if self.closed:
            if m < 8:
                raise ProfileValidationError("closed profile needs >= 8 samples")
            gap = math.hypot(self.x[-1] - self.x[0], self.r[-1] - self.r[0])
            if gap > 1e-6:
                raise ProfileValidationError(
                    f"closed profile endpoints differ by {gap:.3e}")
            turning = self.theta[-1] - self.theta[0]
            if abs(abs(turning) - 2.0 * math.pi) > 1e-6:
                raise ProfileValidationError(
                    f"closed profile turning {turning:.6f} is not +-2*pi")

    def __len__(self) -> int:
        return len(self.t)

    @property
    def samples(self) -> np.ndarray:
        """Samples as rows (t, x, r, theta)."""
        return np.column_stack([self.t, self.x, self.r, self.theta])

    @property
    def period(self) -> float:
        return float(self.t[-1] - self.t[0])

    def surface_closed(self) -> bool:
        """Whether the revolved hypersurface is closed.

        True for closed loops and for open curves whose both endpoints sit
        on the rotation axis (r below AXIS_ANCHOR_TOL).
        """
        if self.closed:
            return True
        return bool(self.r[0] < AXIS_ANCHOR_TOL and self.r[-1] < AXIS_ANCHOR_TOL)

    def max_sample_gap(self) -> float:
        if len(self) < 2:
            return 0.0
        return float(np.max(np.diff(self.t)))


@dataclass
class CurvatureDiagnostics:
    """Pointwise curvature data plus the report's curvature scalars.

    kappa is the signed profile curvature from spline differentiation of the
    (x, r) samples; lambda_rot = -cos(theta)/r is the rotational principal
    curvature (n-1 copies); H = kappa + (n-1) lambda_rot. The `mask` marks
    the samples over which the scalar maxima were taken (interior samples
    for open curves).
    """

    kappa: np.ndarray
    lambda_rot: np.ndarray
    H: np.ndarray
    A_sq: np.ndarray
    shrinker_residual_pointwise: np.ndarray
    mask: np.ndarray
    max_H: float
    farthest_point_norm: float
    shrinker_residual: float
    min_r: float
    max_r: float
    convex: bool


@dataclass
class DiagnosticsReport:
    """Aggregate diagnostics of a profile (see audit)."""

    entropy: float
    gaussian_length: float
    diameter: float
    max_H: float
    farthest_point_norm: float
    crossing_count: int
    convex: bool
    min_r: float
    max_r: float
    shrinker_residual: float
    jacobi_residual_H: float
    jacobi_residual_nu: float
    length_bound: float
    length_margin: float
    entropy_margin: float
    farthest_identity_residual: float
    entropy_below_two: bool
    length_below_bound: bool
    surface_closed: bool


def unit_sphere_area(n: int) -> float:
    """Area n * pi^(n/2) / Gamma(n/2 + 1) of the unit sphere S^(n-1)."""
    check_dimension(n)
    return n * math.pi ** (n / 2.0) / math.gamma(n / 2.0 + 1.0)


def gaussian_length_bound(n: int) -> float:
    """The a-priori bound 2^n * Gamma(n/2) on the Gaussian length of a donut."""
    check_dimension(n)
    return 2.0**n * math.gamma(n / 2.0)


def _padded_spline(t: np.ndarray, y: np.ndarray, closed: bool, shift: float = 0.0,
                   k: int = 5, pad: int = 10) -> BSpline:
    """Interpolating spline; closed data is extended periodically.

    `shift` is the per-period increment of the channel (0 for x/r,
    the total turning for theta).
    """
    m = len(t)
    k = min(k, m - 1)
    if k % 2 == 0:
        k = max(1, k - 1)
    if not closed:
        return make_interp_spline(t, y, k=k)
    period = t[-1] - t[0]
    pad = min(pad, m - 1)
    tp = np.concatenate([t[:-1][-pad:] - period, t, t[1:pad + 1] + period])
    yp = np.concatenate([y[:-1][-pad:] - shift, y, y[1:pad + 1] + shift])
    return make_interp_spline(tp, yp, k=k)


def _curve_splines(profile: ShrinkerProfile, k: int = 5) -> tuple[BSpline, BSpline]:
    return (_padded_spline(profile.t, profile.x, profile.closed, k=k),
            _padded_spline(profile.t, profile.r, profile.closed, k=k))


def line_integral(profile: ShrinkerProfile, integrand) -> float:
    """Integral of integrand(x, r) against Euclidean arclength along the curve.

    Composite 7-point Gauss-Legendre per sample interval on the spline
    reconstruction; the speed factor makes the value independent of the
    sample parametrization.
    """
    if len(profile) < 2:
        return 0.0
    sx, sr = _curve_splines(profile)
    a = profile.t[:-1]
    b = profile.t[1:]
    half = 0.5 * (b - a)
    tm = (0.5 * (a + b)[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    xv = sx(tm)
    rv = sr(tm)
    speed = np.hypot(sx(tm, 1), sr(tm, 1))
    vals = integrand(xv, rv) * speed
    return float(np.sum(half[:, None] * (_GL_WEIGHTS[None, :] * vals.reshape(len(a), -1))))


def gaussian_length(profile: ShrinkerProfile) -> float:
    """Length of the profile under the density r^(n-1) exp(-(x^2+r^2)/4)."""
    n = profile.n
    return line_integral(
        profile, lambda x, r: r ** (n - 1) * np.exp(-(x * x + r * r) / 4.0))


def entropy(profile: ShrinkerProfile) -> float:
    """Gaussian density (4*pi)^(-n/2) Vol(S^(n-1)) L_n of the revolved surface.

    Requires the revolved hypersurface to be closed (a closed loop or an
    axis-anchored open curve); equals the Gaussian area normalized so the
    plane has value 1. Warns if the curve is visibly far from solving the
    shrinker equation, since only then does the value equal the entropy.
    """
    n = profile.n
    if not profile.surface_closed():
        raise ProfileValidationError(
            "entropy needs a closed revolved surface: a closed profile loop "
            "or an open profile with both endpoints on the axis")
    if len(profile) >= 16:
        resid = curvature_diagnostics(profile).shrinker_residual
        if resid > 1e-3:
            warnings.warn(
                f"profile has shrinker residual {resid:.3e}; the computed "
                "value equals the entropy only on self-shrinkers",
                stacklevel=2)
    return (4.0 * math.pi) ** (-n / 2.0) * unit_sphere_area(n) * gaussian_length(profile)


def f_functional(profile: ShrinkerProfile, a: float, tau: float) -> float:
    """Gaussian density at axis center (a, 0, ..., 0) and scale tau.

    Returns (4*pi*tau)^(-n/2) Vol(S^(n-1)) * integral of
    r^(n-1) exp(-((x-a)^2 + r^2) / (4*tau)) over the curve.
    """
    if not tau > 0.0:
        raise ValueError(f"tau must be positive, got {tau}")
    n = profile.n
    integral = line_integral(
        profile,
        lambda x, r: r ** (n - 1) * np.exp(-((x - a) ** 2 + r * r) / (4.0 * tau)))
    return (4.0 * math.pi * tau) ** (-n / 2.0) * unit_sphere_area(n) * integral


def f_functional_grid(profile: ShrinkerProfile, a_values: np.ndarray,
                      tau_values: np.ndarray) -> np.ndarray:
    """F-functional on a grid of axis offsets and scales.

    Returns an array of shape (len(a_values), len(tau_values)); the curve
    splines are fitted once and reused for every grid point, assembled in
    deterministic grid order.
    """
    a_values = np.asarray(a_values, dtype=float)
    tau_values = np.asarray(tau_values, dtype=float)
    if np.any(tau_values <= 0.0):
        raise ValueError("all tau values must be positive")
    n = profile.n
    sx, sr = _curve_splines(profile)
    lo = profile.t[:-1]
    hi = profile.t[1:]
    half = 0.5 * (hi - lo)
    tm = (0.5 * (lo + hi)[:, None] + half[:, None] * _GL_NODES[None, :]).ravel()
    xv = sx(tm)
    rv = sr(tm)
    speed = np.hypot(sx(tm, 1), sr(tm, 1))
    base = rv ** (n - 1) * speed
    wgt = (half[:, None] * _GL_WEIGHTS[None, :]).ravel()
    out = np.empty((len(a_values), len(tau_values)))
    vol = unit_sphere_area(n)
    for i, av in enumerate(a_values):
        d2 = (xv - av) ** 2 + rv * rv
        for j, tv in enumerate(tau_values):
            integral = float(np.sum(wgt * base * np.exp(-d2 / (4.0 * tv))))
            out[i, j] = (4.0 * math.pi * tv) ** (-n / 2.0) * vol * integral
    return out


def signed_curvature(t: np.ndarray, x: np.ndarray, y: np.ndarray,
                     closed: bool = False) -> np.ndarray:
    """Signed curvature of a sampled plane curve by spline differentiation.

    Uses kappa = (x' y'' - y' x'') / speed^3, so the samples need not be
    arclength parametrized.
    """
    t = np.asarray(t, dtype=float)
    sx = _padded_spline(t, np.asarray(x, dtype=float), closed)
    sy = _padded_spline(t, np.asarray(y, dtype=float), closed)
    xp, yp = sx(t, 1), sy(t, 1)
    xpp, ypp = sx(t, 2), sy(t, 2)
    return (xp * ypp - yp * xpp) / np.hypot(xp, yp) ** 3


def _interior_mask(profile: ShrinkerProfile, edge_trim: int,
                   min_radius: float) -> np.ndarray:
    mask = np.ones(len(profile), dtype=bool)
    if not profile.closed and edge_trim > 0 and len(profile) > 2 * edge_trim + 4:
        mask[:edge_trim] = False
        mask[-edge_trim:] = False
    if min_radius > 0.0:
        mask &= profile.r > min_radius
    if not np.any(mask):
        raise ProfileValidationError("diagnostic mask excludes every sample")
    return mask


def curvature_diagnostics(profile: ShrinkerProfile, *, edge_trim: int = 8,
                          min_radius: float = 0.0) -> CurvatureDiagnostics:
    """Curvature fields of the revolved hypersurface.

    With normal nu = (sin(theta), -cos(theta)): the profile curvature kappa
    comes from spline differentiation of the sampled (x, r) data alone
    (independent of the theta channel), lambda_rot = -cos(theta)/r carries
    multiplicity n-1, H = kappa + (n-1) lambda_rot, and the shrinker
    residual is max |H - (x sin(theta) - r cos(theta))/2| over the mask.
    Scalar maxima for open curves drop `edge_trim` samples at each end and
    samples with r <= min_radius (spline derivatives degrade there).
    """
    if len(profile) < 8:
        raise ProfileValidationError(
            "curvature diagnostics needs at least 8 samples")
    n = profile.n
    kappa = signed_curvature(profile.t, profile.x, profile.r, profile.closed)
    lam_rot = -np.cos(profile.theta) / profile.r
    H = kappa + (n - 1) * lam_rot
    A_sq = kappa**2 + (n - 1) * lam_rot**2
    resid = H - (profile.x * np.sin(profile.theta)
                 - profile.r * np.cos(profile.theta)) / 2.0
    mask = _interior_mask(profile, edge_trim, min_radius)
    # Convexity: kappa keeps one sign along the curve; entries below the
    # noise threshold do not count as sign changes.
    sig = kappa[mask][np.abs(kappa[mask]) > 1e-8]
    convex = bool(sig.size == 0 or np.all(sig > 0) or np.all(sig < 0))
    return CurvatureDiagnostics(
        kappa=kappa,
        lambda_rot=lam_rot,
        H=H,
        A_sq=A_sq,
        shrinker_residual_pointwise=resid,
        mask=mask,
        max_H=float(np.max(np.abs(H[mask]))),
        farthest_point_norm=float(np.max(np.hypot(profile.x, profile.r))),
        shrinker_residual=float(np.max(np.abs(resid[mask]))),
        min_r=float(np.min(profile.r)),
        max_r=float(np.max(profile.r)),
        convex=convex,
    )


def jacobi_identity_check(profile: ShrinkerProfile, *, edge_trim: int = 8,
                          min_radius: float = 0.0) -> tuple[float, float]:
    """Residuals of the stability-operator eigen-identities on a shrinker.

    For rotationally symmetric f(t) on the revolved surface,

        L f = f'' + ((n-1) r'/r - (x x' + r r')/2) f' + (|A|^2 + 1/2) f

    with primes in Euclidean arclength. Returns

        (max |L H - H| / max |H|,  max |L phi - phi/2|)   for phi = sin(theta),

    maxima over the interior mask, all derivatives by spline
    differentiation. The curvature entering H and |A|^2 here is taken from
    the tangent-angle channel (kappa = theta'), which tolerates the double
    differentiation; the (x, r)-route curvature check lives in
    curvature_diagnostics.
    """
    if len(profile) < 16:
        raise ProfileValidationError("jacobi check needs at least 16 samples")
    n = profile.n
    t = profile.t
    closed = profile.closed
    sx, sr = _curve_splines(profile)
    xp, rp = sx(t, 1), sr(t, 1)
    speed = np.hypot(xp, rp)
    turning = profile.theta[-1] - profile.theta[0] if closed else 0.0
    sth = _padded_spline(t, profile.theta, closed, shift=turning)
    kappa = sth(t, 1) / speed
    lam_rot = -np.cos(profile.theta) / profile.r
    H = kappa + (n - 1) * lam_rot
    A_sq = kappa**2 + (n - 1) * lam_rot**2
    drift = (n - 1) * rp / (profile.r * speed) - \
        (profile.x * xp + profile.r * rp) / (2.0 * speed)

    def L(f: np.ndarray) -> np.ndarray:
        sf = _padded_spline(t, f, closed)
        fp = sf(t, 1) / speed
        fpp = (sf(t, 2) - sf(t, 1) * (sx(t, 1) * sx(t, 2) + sr(t, 1) * sr(t, 2))
               / speed**2) / speed**2
        return fpp + drift * fp + (A_sq + 0.5) * f

    mask = _interior_mask(profile, edge_trim, min_radius)
    res_H = float(np.max(np.abs((L(H) - H)[mask])) / np.max(np.abs(H[mask])))
    phi = np.sin(profile.theta)
    res_nu = float(np.max(np.abs((L(phi) - 0.5 * phi)[mask])))
    return res_H, res_nu


def count_axis_crossings(x: np.ndarray, closed: bool, tol: float = 1e-7) -> int:
    """Number of intersections of the sampled curve with the axis x = 0.

    Samples with |x| <= tol form on-axis runs; each run counts once, and so
    does every direct sign flip between consecutive off-axis samples. Closed
    curves are traversed cyclically (the duplicate endpoint is dropped).
    """
    x = np.asarray(x, dtype=float)
    if closed:
        x = x[:-1]
    sign = np.where(np.abs(x) <= tol, 0, np.sign(x)).astype(int)
    # collapse consecutive duplicates into runs
    runs: list[int] = []
    for s in sign:
        if not runs or runs[-1] != s:
            runs.append(int(s))
    if closed and len(runs) > 1 and runs[0] == runs[-1]:
        runs.pop()
    if not runs:
        return 0
    if len(runs) == 1:
        return 1 if runs[0] == 0 else 0
    count = 0
    m = len(runs)
    last = m if closed else m - 1
    for i in range(last):
        a, b = runs[i], runs[(i + 1) % m]
        if a == 0:
            count += 1  # an on-axis run is one intersection
        elif b != 0 and a * b < 0:
            count += 1  # direct sign flip without an on-axis sample
    if not closed and runs[-1] == 0:
        count += 1
    return count


def _revolved_diameter(x: np.ndarray, r: np.ndarray, chunk: int = 256) -> float:
    """Extrinsic Euclidean diameter of the revolved hypersurface.

    The farthest pair of revolved points sits at antipodal angles, giving
    distance^2 = (x_i - x_j)^2 + (r_i + r_j)^2; maximized in chunks to keep
    memory flat.
    """
    best = 0.0
    for i in range(0, len(x), chunk):
        dx = x[i:i + chunk, None] - x[None, :]
        sr = r[i:i + chunk, None] + r[None, :]
        best = max(best, float(np.max(dx * dx + sr * sr)))
    return math.sqrt(best)


def audit(profile: ShrinkerProfile, *, edge_trim: int = 8,
          min_radius: float = 0.0) -> DiagnosticsReport:
    """Fill every diagnostics field for a profile.

    Failed checks are report fields, not errors. The entropy field holds the
    F_{0,1} value for any profile; it equals the entropy when the revolved
    surface is closed and the curve solves the shrinker equation.
    """
    n = profile.n
    curv = curvature_diagnostics(profile, edge_trim=edge_trim, min_radius=min_radius)
    length = gaussian_length(profile)
    lam = (4.0 * math.pi) ** (-n / 2.0) * unit_sphere_area(n) * length
    if len(profile) >= 16:
        jac_H, jac_nu = jacobi_identity_check(
            profile, edge_trim=edge_trim, min_radius=min_radius)
    else:
        jac_H = jac_nu = float("inf")
    bound = gaussian_length_bound(n)
    return DiagnosticsReport(
        entropy=lam,
        gaussian_length=length,
        diameter=_revolved_diameter(profile.x, profile.r),
        max_H=curv.max_H,
        farthest_point_norm=curv.farthest_point_norm,
        crossing_count=count_axis_crossings(profile.x, profile.closed),
        convex=curv.convex,
        min_r=curv.min_r,
        max_r=curv.max_r,
        shrinker_residual=curv.shrinker_residual,
        jacobi_residual_H=jac_H,
        jacobi_residual_nu=jac_nu,
        length_bound=bound,
        length_margin=bound - length,
        entropy_margin=2.0 - lam,
        farthest_identity_residual=abs(curv.max_H - curv.farthest_point_norm / 2.0),
        entropy_below_two=bool(lam < 2.0),
        length_below_bound=bool(length < bound),
        surface_closed=profile.surface_closed(),
    )
