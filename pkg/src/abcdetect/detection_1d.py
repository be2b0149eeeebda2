"""1D detection probabilities: scattering theory versus the ABC screen.

All functions take a :class:`Packet1D` and return plain floats unless
noted; the ``*_estimate`` helpers return ``(value, error)`` pairs for
callers that want the quadrature error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form_1d import (
    AbcParameter,
    Packet1D,
    SingularInputError,
    UnphysicalBetaError,
    as_beta,
    momentum_wavefunction,
    psi_t_packet,
    rho_beta,
    rho_beta_abs2,
)
from .numerics import DEFAULT_SPEC, QuadratureSpec, geometric_points, integrate_semi_infinite

__all__ = [
    "ContrastReport",
    "DomainError",
    "p_st_1d",
    "p_st_deficit",
    "p_abc_time_integral",
    "p_abc_dollard",
    "contrast_L",
    "contrast_infinity",
    "contrast_laplace_approx",
    "laplace_minimum_formula",
    "laplace_minimum_scan",
    "time_cutoff",
]


class DomainError(ValueError):
    """Formula used outside the parameter range it was derived for."""


@dataclass(frozen=True)
class ContrastReport:
    """P_ST, P_ABC at finite L and their difference.

    ``p_st``/``p_abc`` are clamped to [0, 1] when quadrature noise pushes
    them marginally outside; the unclamped values are kept in ``raw_*``.
    """

    p_st: float
    p_abc: float
    contrast: float
    quadrature_error: float
    raw_p_st: float
    raw_p_abc: float


def _physical_beta(beta) -> complex:
    if isinstance(beta, AbcParameter):
        return beta.require_physical()
    beta = complex(beta)
    if not beta.imag > 0:
        raise UnphysicalBetaError(f"detection probabilities need Im(beta) > 0, got {beta!r}")
    return beta


def _momentum_window(packet: Packet1D, spec: QuadratureSpec, reflected: bool = False):
    """Cutoff and breakpoints covering every packet component on k >= 0.

    ``spec.k_max`` is the half-width (in packet widths) kept around each
    central momentum; ``reflected`` includes the mirrored centres -k_i.
    """
    centres = list(packet.momenta)
    if reflected:
        centres += [-c for c in centres]
    width = spec.k_max
    cutoff = max(max(centres) + width, width)
    points = sorted({max(c + d, 0.0) for c in centres for d in (-width, 0.0, width)})
    return cutoff, [p for p in points if 0.0 < p < cutoff]


def _clamp(p: float, tol: float) -> float:
    if -tol <= p < 0.0:
        return 0.0
    if 1.0 < p <= 1.0 + tol:
        return 1.0
    return p


def p_st_estimate(packet: Packet1D, spec: QuadratureSpec = DEFAULT_SPEC):
    cutoff, points = _momentum_window(packet, spec)
    res = integrate_semi_infinite(
        lambda k: np.square(momentum_wavefunction(packet, k)),
        spec, cutoff=cutoff, points=points)
    return float(res.value), float(res.error)


def p_st_1d(packet: Packet1D, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Scattering-theory detection probability: weight of k > 0 components.

    Computed by quadrature of the full |psi0(k)|^2, including any
    interference term between superposed packets.
    """
    value, err = p_st_estimate(packet, spec)
    return _clamp(value, max(err, spec.abs_tol))


def p_st_deficit(packet: Packet1D, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """1 - P_ST computed directly as the weight of k < 0 components.

    Resolves deficits far below double-precision epsilon (e.g. erfc(20)/2
    for k0 = 20) because the small quantity is integrated on its own
    with a purely relative tolerance.
    """
    rel_spec = spec.with_(abs_tol=0.0, rel_tol=max(spec.rel_tol, 1e-12))
    mirrored = Packet1D(-packet.k0, None if packet.k1 is None else -packet.k1)
    cutoff, points = _momentum_window(mirrored, rel_spec)
    res = integrate_semi_infinite(
        lambda k: np.square(momentum_wavefunction(packet, -k)),
        rel_spec, cutoff=cutoff, points=points)
    return float(res.value)


def time_cutoff(packet: Packet1D, L: float) -> float:
    """Truncation for time integrals: roughly ten arrival times plus slack."""
    speed = max(max(packet.momenta), 1.0)
    return 10.0 * abs(L) / speed + 100.0


def _time_points(packet: Packet1D, L: float, cutoff: float) -> list[float]:
    points = geometric_points(cutoff, 40)
    for k in packet.momenta:
        if k > 0:
            arrival = L / k
            spread = math.sqrt(1.0 + arrival * arrival) / k
            points += [arrival + m * spread for m in (-6, -3, -1, 0, 1, 3, 6)]
    return sorted(p for p in set(points) if 0.0 < p < cutoff)


def p_abc_time_estimate(packet: Packet1D, beta, L: float, spec: QuadratureSpec = DEFAULT_SPEC):
    b = _physical_beta(beta)
    if not L > 0:
        raise ValueError("screen position L must be positive")
    cutoff = time_cutoff(packet, L)

    def density(t):
        with np.errstate(over="ignore"):
            out = np.abs(psi_t_packet(packet, L, t, b, L)) ** 2
        if not np.all(np.isfinite(out)):
            # for Re(beta) well above k0 + Im(beta) the closed-form initial
            # data carries an astronomically large surface-bound component
            raise OverflowError(
                f"|psi_t(L)|^2 overflows for beta = {b!r}, L = {L!r}; "
                "the closed form is unusable in this parameter range")
        return out

    res = integrate_semi_infinite(density, spec, cutoff=cutoff,
                                  points=_time_points(packet, L, cutoff))
    return b.imag * float(res.value), b.imag * float(res.error)


def p_abc_time_integral(packet: Packet1D, beta, L: float,
                        spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """ABC detection probability Im(beta) * int_0^inf |psi_t(L)|^2 dt,
    using the exact closed-form evolution."""
    value, err = p_abc_time_estimate(packet, beta, L, spec)
    return _clamp(value, max(err, spec.abs_tol))


def p_abc_dollard(packet: Packet1D, beta, L: float,
                  spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """ABC detection probability from the asymptotic momentum distribution.

    1 - int_0^inf |psi0(-k) + rho(k) psi0(k) exp(2ikL)|^2 dk, the weight
    of the long-time state that has moved away from the screen. Only valid
    for Re(beta) <= 0; use :func:`p_abc_time_integral` otherwise.
    """
    b = _physical_beta(beta)
    if b.real > 0:
        raise DomainError("momentum-space form requires Re(beta) <= 0")
    cutoff, points = _momentum_window(packet, spec, reflected=True)

    def outgoing(k):
        amp = momentum_wavefunction(packet, -k) + rho_beta(k, b) * momentum_wavefunction(packet, k) * np.exp(2j * L * k)
        return np.abs(amp) ** 2

    res = integrate_semi_infinite(outgoing, spec, cutoff=cutoff, points=points)
    return _clamp(1.0 - float(res.value), max(float(res.error), spec.abs_tol))


def contrast_L(packet: Packet1D, beta, L: float,
               spec: QuadratureSpec = DEFAULT_SPEC) -> ContrastReport:
    """C_L = P_ST - P_ABC(L) with P_ABC from the time integral."""
    st, st_err = p_st_estimate(packet, spec)
    abc, abc_err = p_abc_time_estimate(packet, beta, L, spec)
    err = st_err + abc_err
    p_st = _clamp(st, max(st_err, spec.abs_tol))
    p_abc = _clamp(abc, max(abc_err, spec.abs_tol))
    return ContrastReport(p_st=p_st, p_abc=p_abc, contrast=p_st - p_abc,
                          quadrature_error=err, raw_p_st=st, raw_p_abc=abc)


def contrast_infinity(packet: Packet1D, beta, spec: QuadratureSpec = DEFAULT_SPEC) -> float:
    """Far-field contrast int_0^inf |rho(k)|^2 |psi0(k)|^2 dk (always >= 0)."""
    b = as_beta(beta)
    if b.real == 0 and b.imag <= 0:
        raise SingularInputError("rho_beta has a pole on k >= 0 for this beta")
    cutoff, points = _momentum_window(packet, spec)
    res = integrate_semi_infinite(
        lambda k: rho_beta_abs2(k, b) * np.square(momentum_wavefunction(packet, k)),
        spec, cutoff=cutoff, points=points)
    return float(res.value)


def contrast_laplace_approx(k0: float, k1: float, beta) -> float:
    """Peak-value approximation (|rho(k0)|^2 + |rho(k1)|^2) / (2N) of the
    far-field contrast for a two-packet superposition with well-separated
    momenta."""
    b = as_beta(beta)
    norm = Packet1D.superposition(k0, k1).norm_N
    return float((rho_beta_abs2(k0, b) + rho_beta_abs2(k1, b)) / (2.0 * norm))


def laplace_minimum_formula(k0: float, k1: float) -> float:
    """(1 - 4 k0 k1 / (k0 - k1)^2) / (2N), returned verbatim.

    This is the global minimum over purely imaginary beta of
    :func:`contrast_laplace_approx` whenever the momenta are well separated
    (max/min ratio at least 7 + 4 sqrt(3) ~ 13.93); it tends to 1/2 as
    |k1 - k0| grows. For closer momenta the minimum moves to
    Im(beta) = sqrt(k0 k1) and this expression undershoots it, going
    negative; no clamping is applied. :func:`laplace_minimum_scan` gives
    the minimum in every regime.
    """
    if k0 == k1:
        raise ZeroDivisionError("formula undefined for k0 == k1")
    norm = Packet1D.superposition(k0, k1).norm_N
    return (1.0 - 4.0 * k0 * k1 / (k0 - k1) ** 2) / (2.0 * norm)


def laplace_minimum_scan(k0: float, k1: float, im_beta_range=(1e-3, 1e4), n: int = 4001):
    """Minimum of :func:`contrast_laplace_approx` over purely imaginary beta.

    Returns ``(minimum, im_beta_at_minimum)`` from a log-spaced scan
    refined by a bounded scalar minimisation.
    """
    from scipy.optimize import minimize_scalar

    grid = np.geomspace(*im_beta_range, n)
    norm = Packet1D.superposition(k0, k1).norm_N
    vals = (((k0 - grid) / (k0 + grid)) ** 2 + ((k1 - grid) / (k1 + grid)) ** 2) / (2.0 * norm)
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    res = minimize_scalar(lambda kappa: contrast_laplace_approx(k0, k1, 1j * kappa),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    if res.fun < vals[i]:
        return float(res.fun), float(res.x)
    return float(vals[i]), float(grid[i])
