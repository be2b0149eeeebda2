"""Angular detection densities for 2D Gaussian packets.

Two screens are supported: a flat screen at distance L whose outward
normal is n(alpha) = (sin alpha, -cos alpha), and the L-shaped screen
max(x, y) = L. The packet starts at the origin as G(x) G(y) exp(i k0.r).
Angles theta are polar angles of the detection point seen from the
origin; all angular functions are vectorised over theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form_1d import UnphysicalBetaError, as_beta, phi_tG, psi_tG
from .numerics import DEFAULT_SPEC, QuadratureSpec, geometric_points, integrate, integrate_semi_infinite

__all__ = [
    "Packet2D",
    "Inclined",
    "LShaped",
    "AngularDensitySample",
    "GRAZING_MARGIN",
    "dp_st_dtheta",
    "psi_t_2d_inclined",
    "psi_t_2d_lshaped",
    "dp_abc_dtheta_farfield",
    "dp_abc_dtheta_finite_L",
    "section_totals_lshaped",
    "section_totals_separable",
    "admissible_interval",
    "angular_grid",
    "OutOfDomainError",
    "find_density_peaks",
    "refine_peak",
    "angular_density",
]

# samples closer than this to a grazing direction are rejected
GRAZING_MARGIN = 1e-3


class OutOfDomainError(ValueError):
    """Angle outside the screen's admissible interval (or grazing)."""


@dataclass(frozen=True)
class Packet2D:
    k0x: float
    k0y: float

    @property
    def k0(self) -> float:
        return math.hypot(self.k0x, self.k0y)

    @property
    def theta0(self) -> float:
        return math.atan2(self.k0y, self.k0x)


@dataclass(frozen=True)
class Inclined:
    """Flat screen {r : n(alpha).r = L}."""

    alpha: float
    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def normal(self) -> np.ndarray:
        return np.array([math.sin(self.alpha), -math.cos(self.alpha)])

    @property
    def tangent(self) -> np.ndarray:
        # n(alpha + pi/2)
        return np.array([math.cos(self.alpha), math.sin(self.alpha)])


@dataclass(frozen=True)
class LShaped:
    """Screen {r : max(x, y) = L}; vertical arm x = L, horizontal arm y = L."""

    L: float

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")


@dataclass(frozen=True)
class AngularDensitySample:
    theta: float
    dP_dtheta: float
    method: str  # "st", "abc_farfield" or "abc_finite_L"


def admissible_interval(geom) -> tuple[float, float]:
    if isinstance(geom, Inclined):
        return geom.alpha - math.pi, geom.alpha
    if isinstance(geom, LShaped):
        return -math.pi / 2, math.pi
    raise TypeError(f"unknown screen geometry {geom!r}")


def angular_grid(geom, n: int = 721, margin: float = GRAZING_MARGIN) -> np.ndarray:
    """n uniform samples over the admissible interval, grazing ends excluded."""
    lo, hi = admissible_interval(geom)
    return np.linspace(lo + margin, hi - margin, n)


def _check_theta(theta, geom, margin: float = GRAZING_MARGIN) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    lo, hi = admissible_interval(geom)
    slack = 1e-12  # so that angular_grid's own end points are accepted
    bad = ~((theta >= lo + margin - slack) & (theta <= hi - margin + slack))
    if np.any(bad):
        raise OutOfDomainError(
            f"theta must lie in ({lo:.6g}, {hi:.6g}) at least {margin:g} from either end")
    return theta


def _log_radial_weight(k, theta, p: Packet2D):
    # log of G^2(k0) G^2(k) exp(2 k k0 cos(theta - theta0)) = log|<k|psi0>|^2
    c = np.cos(np.asarray(theta) - p.theta0)
    return -np.log(np.pi) - (k - p.k0 * c) ** 2 - p.k0 ** 2 * (1.0 - c * c)


def _radial_cutoff(p: Packet2D, spec: QuadratureSpec):
    cutoff = p.k0 + spec.k_max
    points = [q for q in (p.k0 - spec.k_max, p.k0) if 0 < q < cutoff]
    return cutoff, points


def dp_st_dtheta(p: Packet2D, theta, spec: QuadratureSpec = DEFAULT_SPEC):
    """Scattering-theory angular density int_0^inf k |<k|psi0>|^2 dk.

    Depends only on the direction theta; no screen enters.
    """
    scalar = np.ndim(theta) == 0
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    cutoff, points = _radial_cutoff(p, spec)

    def integrand(k):
        return k[:, None] * np.exp(_log_radial_weight(k[:, None], theta[None, :], p))

    res = integrate_semi_infinite(integrand, spec, cutoff=cutoff, points=points)
    out = np.asarray(res.value, dtype=float)
    return float(out[0]) if scalar else out


def dp_abc_dtheta_farfield(p: Packet2D, theta, beta, alpha: float,
                           spec: QuadratureSpec = DEFAULT_SPEC):
    """Exact L -> infinity ABC density for the inclined screen.

    4 Im(b) int_0^inf k^2 |<k|psi0>|^2 / |k - i b|^2 dk with the effective
    parameter b = beta / sin(alpha - theta).
    """
    beta = as_beta(beta)
    scalar = np.ndim(theta) == 0
    theta = _check_theta(np.atleast_1d(theta), Inclined(alpha, 1.0))
    bbar = beta / np.sin(alpha - theta)
    cutoff, points = _radial_cutoff(p, spec)

    def integrand(k):
        kk = k[:, None]
        weight = np.exp(_log_radial_weight(kk, theta[None, :], p))
        return kk * kk * weight / np.abs(kk - 1j * bbar[None, :]) ** 2

    res = integrate_semi_infinite(integrand, spec, cutoff=cutoff, points=points)
    out = 4.0 * bbar.imag * np.asarray(res.value)
    return float(out[0]) if scalar else out


def psi_t_2d_inclined(r, t, p: Packet2D, beta, geom: Inclined):
    """Separable solution: ABC evolution along the normal, free along the screen.

    ``r`` is an array of shape (..., 2).
    """
    r = np.asarray(r, dtype=float)
    n, tau = geom.normal, geom.tangent
    k_par = n @ np.array([p.k0x, p.k0y])
    k_perp = tau @ np.array([p.k0x, p.k0y])
    r_par = r @ n
    r_perp = r @ tau
    return psi_tG(r_par, t, k_par, beta, geom.L) * phi_tG(r_perp, t, k_perp)


def psi_t_2d_lshaped(r, t, p: Packet2D, beta, L: float):
    """Product of two 1D ABC solutions, one per arm of the L-shaped screen."""
    r = np.asarray(r, dtype=float)
    return psi_tG(r[..., 0], t, p.k0x, beta, L) * psi_tG(r[..., 1], t, p.k0y, beta, L)


def _screen_point(theta, geom):
    """Detection point R(theta) on the screen and the line element dl/dtheta."""
    c, s = np.cos(theta), np.sin(theta)
    if isinstance(geom, Inclined):
        dist = geom.L / np.sin(geom.alpha - theta)
    else:
        dist = geom.L / np.maximum(c, s)
    point = np.stack([dist * c, dist * s], axis=-1)
    # |dR/dtheta| restricted to the screen: R^2 / L for both screen shapes
    return point, dist * dist / geom.L


def _arrival_points(momenta, L, cutoff):
    points = geometric_points(cutoff, 40)
    for k in momenta:
        if k > 0:
            arrival = L / k
            spread = math.sqrt(1.0 + arrival * arrival) / k
            points += [arrival + m * spread for m in (-6, -3, -1, 0, 1, 3, 6)]
    return sorted(q for q in set(points) if 0.0 < q < cutoff)


def _density_time_integral(p, theta, beta, geom, spec):
    point, dl = _screen_point(theta, geom)
    if isinstance(geom, Inclined):
        normal_speed = float(geom.normal @ np.array([p.k0x, p.k0y]))
        momenta = [normal_speed]
        wave = lambda t: psi_t_2d_inclined(point[None, :, :], t[:, None], p, beta, geom)
    else:
        momenta = [p.k0x, p.k0y]
        wave = lambda t: psi_t_2d_lshaped(point[None, :, :], t[:, None], p, beta, geom.L)
    speed = max(max(momenta), p.k0, 1.0)
    cutoff = 10.0 * geom.L / min(speed, max(max(momenta), 1.0)) + 100.0
    res = integrate_semi_infinite(lambda t: np.abs(wave(t)) ** 2, spec, cutoff=cutoff,
                                  points=_arrival_points(momenta, geom.L, cutoff))
    return dl * beta.imag * np.asarray(res.value), dl * beta.imag * np.asarray(res.error)


def dp_abc_dtheta_finite_L(p: Packet2D, theta, beta, geom, spec: QuadratureSpec = DEFAULT_SPEC):
    """ABC density at finite screen distance: (dl/dtheta) Im(beta) int |psi_t(R)|^2 dt.

    R(theta) is where the ray at angle theta meets the screen; the line
    element is |R|^2 / L dtheta for both geometries.
    """
    beta = as_beta(beta)
    if not beta.imag > 0:
        raise UnphysicalBetaError("detection densities need Im(beta) > 0")
    scalar = np.ndim(theta) == 0
    theta = _check_theta(np.atleast_1d(theta), geom)
    value, _ = _density_time_integral(p, theta, beta, geom, spec)
    return float(value[0]) if scalar else value


def section_totals_lshaped(p: Packet2D, beta, L: float, spec: QuadratureSpec = DEFAULT_SPEC):
    """Detection probability on the vertical and horizontal arms.

    Integrates the finite-L angular density over (-pi/2, pi/4) for the
    vertical arm and [pi/4, pi) for the horizontal one; the corner ray
    belongs to the horizontal arm (a measure-zero choice).
    """
    beta = as_beta(beta)
    if not beta.imag > 0:
        raise UnphysicalBetaError("detection densities need Im(beta) > 0")
    geom = LShaped(L)
    outer = spec.with_(abs_tol=max(spec.abs_tol, 1e-8), rel_tol=max(spec.rel_tol, 1e-7))

    def density(theta):
        value, _ = _density_time_integral(p, theta, beta, geom, spec)
        return value

    # the peaks sit near the directions of the incident and reflected packets
    hints = [math.atan2(p.k0y, p.k0x), math.atan2(p.k0y, -p.k0x)]
    totals = []
    for lo, hi in ((-math.pi / 2, math.pi / 4), (math.pi / 4, math.pi)):
        points = [h for h in hints if lo < h < hi]
        res = integrate(density, lo, hi, abs_tol=outer.abs_tol, rel_tol=outer.rel_tol,
                        max_subdivisions=outer.max_subdivisions, points=points)
        totals.append(float(res.value))
    return tuple(totals)


def section_totals_separable(p: Packet2D, beta, L: float, spec: QuadratureSpec = DEFAULT_SPEC):
    """Arm totals from the product structure instead of an angular integral.

    vertical = Im(b) int dt |psi_x(L, t)|^2 N_y(t), where N_y(t) is the
    norm of the y-factor on (-inf, L]; horizontal likewise with x and y
    swapped. Used to cross-check :func:`section_totals_lshaped`.
    """
    beta = as_beta(beta)

    def half_norm(t, k):
        # int_{-inf}^{L} |psi_tG(y)|^2 dy for each t
        lo = min(-12.0 - abs(k) * float(np.max(t)), L - 40.0)

        def f(y):
            return np.abs(psi_tG(y[:, None], t[None, :], k, beta, L)) ** 2

        return integrate(f, lo, L, abs_tol=1e-12, rel_tol=1e-10,
                         points=np.linspace(lo, L, 64)[1:-1]).value

    results = []
    for k_hit, k_other in ((p.k0x, p.k0y), (p.k0y, p.k0x)):
        cutoff = 10.0 * L / max(min(abs(p.k0x), abs(p.k0y)), 1.0) + 100.0

        def integrand(t, k_hit=k_hit, k_other=k_other):
            edge = np.abs(psi_tG(L, t, k_hit, beta, L)) ** 2
            return edge * half_norm(t, k_other)

        res = integrate_semi_infinite(integrand, spec.with_(abs_tol=max(spec.abs_tol, 1e-9)),
                                      cutoff=cutoff,
                                      points=_arrival_points([p.k0x, p.k0y], L, cutoff))
        results.append(beta.imag * float(res.value))
    return tuple(results)


def find_density_peaks(theta, density, rel_prominence: float = 1e-3):
    """Local maxima of a sampled angular density.

    Peaks must stand out by ``rel_prominence`` times the global maximum,
    which suppresses ripples from quadrature noise. Returns
    ``(theta_peaks, density_peaks)`` arrays ordered by angle.
    """
    from scipy.signal import find_peaks

    theta = np.asarray(theta, dtype=float)
    density = np.asarray(density, dtype=float)
    if theta.shape != density.shape or theta.ndim != 1:
        raise ValueError("theta and density must be 1D arrays of equal length")
    top = float(np.max(density)) if density.size else 0.0
    if top <= 0.0:
        return np.empty(0), np.empty(0)
    # pad with zeros so that maxima at the ends of the grid are found too
    padded = np.concatenate(([0.0], density, [0.0]))
    idx, _ = find_peaks(padded, prominence=rel_prominence * top)
    idx = idx - 1
    return theta[idx], density[idx]


def refine_peak(density_fn, theta, density, xatol: float = 1e-8):
    """Location and height of the global maximum, refined between grid neighbours."""
    from scipy.optimize import minimize_scalar

    theta = np.asarray(theta, dtype=float)
    i = int(np.argmax(density))
    lo, hi = theta[max(i - 1, 0)], theta[min(i + 1, theta.size - 1)]
    res = minimize_scalar(lambda th: -float(density_fn(th)), bounds=(lo, hi),
                          method="bounded", options={"xatol": xatol})
    if -res.fun >= density[i]:
        return float(res.x), float(-res.fun)
    return float(theta[i]), float(density[i])


def angular_density(p: Packet2D, geom, beta=None, method: str = "st", n: int = 721,
                    spec: QuadratureSpec = DEFAULT_SPEC) -> list[AngularDensitySample]:
    """Sample one of the three angular densities on the default grid."""
    theta = angular_grid(geom, n)
    if method == "st":
        values = dp_st_dtheta(p, theta, spec)
    elif method == "abc_farfield":
        if not isinstance(geom, Inclined):
            raise TypeError("the far-field ABC density is only available for the inclined screen")
        values = dp_abc_dtheta_farfield(p, theta, beta, geom.alpha, spec)
    elif method == "abc_finite_L":
        values = dp_abc_dtheta_finite_L(p, theta, beta, geom, spec)
    else:
        raise ValueError(f"unknown method {method!r}")
    return [AngularDensitySample(float(th), float(v), method) for th, v in zip(theta, values)]
