"""Exact time-dependent 1D wave functions in front of an absorbing screen.

Units are dimensionless: lengths in packet widths, times in m*sigma^2/hbar,
momenta in 1/sigma. The screen sits at x = L with the Robin condition
psi'(L) = beta * psi(L); the physical region is x <= L, but every function
here accepts any real x (the closed forms extend smoothly past L).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import exp_erfc_shifted

__all__ = [
    "AbcParameter",
    "Packet1D",
    "gaussian_G",
    "rho_beta",
    "rho_beta_abs2",
    "phi_tG",
    "psi_tG",
    "psi_tG_terms",
    "psi_t_superposition",
    "psi_t_packet",
    "momentum_wavefunction",
    "initial_mismatch_bound",
    "SingularInputError",
    "UnphysicalBetaError",
]

_PI_QUARTER = math.pi ** -0.25
_SQRT_2PI = math.sqrt(2.0 * math.pi)


class SingularInputError(ZeroDivisionError):
    """Reflection amplitude evaluated at its pole k = i*beta."""


class UnphysicalBetaError(ValueError):
    """Detection quantities need Im(beta) > 0."""


@dataclass(frozen=True)
class AbcParameter:
    """Boundary parameter beta of the Robin condition psi' = beta psi.

    ``physical`` is True in the absorbing regime Im(beta) > 0. Values with
    Im(beta) = 0 are still representable for Neumann/Dirichlet/unitary
    limit studies; ``require_physical`` rejects them.
    """

    beta: complex

    def __post_init__(self):
        b = complex(self.beta)
        if not (math.isfinite(b.real) and math.isfinite(b.imag)):
            raise ValueError("beta must be finite")
        if b.imag < 0:
            raise UnphysicalBetaError(f"Im(beta) must be >= 0, got {b!r}")
        object.__setattr__(self, "beta", b)

    @property
    def physical(self) -> bool:
        return self.beta.imag > 0

    def require_physical(self) -> complex:
        if not self.physical:
            raise UnphysicalBetaError(
                f"detection probabilities need Im(beta) > 0, got {self.beta!r}")
        return self.beta

    def __complex__(self) -> complex:
        return self.beta


def as_beta(beta) -> complex:
    return beta.beta if isinstance(beta, AbcParameter) else complex(beta)


@dataclass(frozen=True)
class Packet1D:
    """Unit-width Gaussian packet centred at x = 0, or an equal-weight
    superposition of two such packets with central momenta k0 and k1."""

    k0: float
    k1: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.k0) or (self.k1 is not None and not math.isfinite(self.k1)):
            raise ValueError("momenta must be finite")

    @classmethod
    def gaussian(cls, k0: float) -> "Packet1D":
        return cls(float(k0))

    @classmethod
    def superposition(cls, k0: float, k1: float) -> "Packet1D":
        return cls(float(k0), float(k1))

    @property
    def kind(self) -> str:
        return "gaussian" if self.k1 is None else "superposition"

    @property
    def norm_N(self) -> float:
        """1 + exp(-(k0-k1)^2/4); equals 1 for a single Gaussian by convention."""
        if self.k1 is None:
            return 1.0
        return 1.0 + math.exp(-((self.k0 - self.k1) ** 2) / 4.0)

    @property
    def momenta(self) -> tuple[float, ...]:
        return (self.k0,) if self.k1 is None else (self.k0, self.k1)


def gaussian_G(x):
    """pi^(-1/4) exp(-x^2/2); accepts complex arguments."""
    return _PI_QUARTER * np.exp(-np.square(x) / 2.0)


def rho_beta(k, beta):
    """Reflection amplitude (k + i beta) / (k - i beta) of the ABC screen."""
    beta = as_beta(beta)
    k = np.asarray(k, dtype=float)
    den = k - 1j * beta
    if np.any(den == 0):
        raise SingularInputError(f"rho_beta is singular at k = i*beta = {1j * beta!r}")
    out = (k + 1j * beta) / den
    return out[()] if out.ndim == 0 else out


def rho_beta_abs2(k, beta):
    """|rho_beta(k)|^2 = 1 - 4 k Im(b) / ((Re b)^2 + (k + Im b)^2)."""
    beta = as_beta(beta)
    k = np.asarray(k, dtype=float)
    den = beta.real ** 2 + (k + beta.imag) ** 2
    if np.any(den == 0):
        raise SingularInputError("|rho_beta|^2 is singular at k = i*beta")
    out = 1.0 - 4.0 * k * beta.imag / den
    return out[()] if out.ndim == 0 else out


def _free_exponent(x, t, k0):
    # -k0^2/2 - (x - i k0)^2 / (2(1+it)), rearranged so that no k0^2 terms cancel
    s = 1.0 + 1j * t
    return (-x * x + 2j * k0 * x - 1j * k0 * k0 * t) / (2.0 * s)


def phi_tG(x, t, k0):
    """Free evolution of exp(i k0 x) G(x).

    exp(-k0^2/2) / sqrt(1+it) * G((x - i k0)/sqrt(1+it)), with the
    principal square root (continuous for t >= 0).
    """
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    s = 1.0 + 1j * t
    out = _PI_QUARTER / np.sqrt(s) * np.exp(_free_exponent(x, t, k0))
    return out[()] if np.ndim(out) == 0 else out


def psi_tG_terms(x, t, k0, beta, L):
    """The three terms of the closed-form ABC solution, returned separately:
    the incident packet, its mirror image about L, and the erfc correction.

    The correction is (2 sqrt(pi))^(1/2) beta exp(a) erfc(z) with
    a = -(k0 - i beta)^2/2 + i t beta^2/2 - beta (2L - x) and
    z = (2L - x - i k0 - beta (1+it)) / (sqrt 2 sqrt(1+it)). Algebraically
    a - z^2 equals the free-packet exponent at 2L - x, which is what gets
    passed to the overflow-safe product.
    """
    beta = as_beta(beta)
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    mirror = 2.0 * L - x
    s = 1.0 + 1j * t
    root_s = np.sqrt(s)
    incident = phi_tG(x, t, k0)
    image = phi_tG(mirror, t, k0)
    if beta == 0:
        correction = np.zeros(np.broadcast(x, t).shape, dtype=complex)
    else:
        z = (mirror - 1j * k0 - beta * s) / (math.sqrt(2.0) * root_s)
        shifted = _free_exponent(mirror, t, k0)
        correction = math.sqrt(2.0 * math.sqrt(math.pi)) * beta * exp_erfc_shifted(shifted, z)
    return incident, image, correction


def psi_tG(x, t, k0, beta, L):
    """Closed-form solution for a Gaussian packet exp(i k0 x) G(x) hitting
    an ABC screen at L. Satisfies psi' = beta psi at x = L for any beta."""
    incident, image, correction = psi_tG_terms(x, t, k0, beta, L)
    out = incident + image + correction
    return out[()] if np.ndim(out) == 0 else out


def psi_t_superposition(x, t, k0, k1, beta, L):
    """(psi_tG(k0) + psi_tG(k1)) / sqrt(2N) for the two-packet superposition."""
    norm = Packet1D.superposition(k0, k1).norm_N
    return (psi_tG(x, t, k0, beta, L) + psi_tG(x, t, k1, beta, L)) / math.sqrt(2.0 * norm)


def psi_t_packet(packet: Packet1D, x, t, beta, L):
    if packet.k1 is None:
        return psi_tG(x, t, packet.k0, beta, L)
    return psi_t_superposition(x, t, packet.k0, packet.k1, beta, L)


def momentum_wavefunction(packet: Packet1D, k):
    """Momentum-space amplitude of the initial packet (real for these packets)."""
    k = np.asarray(k, dtype=float)
    if packet.k1 is None:
        out = gaussian_G(k - packet.k0)
    else:
        out = (gaussian_G(k - packet.k0) + gaussian_G(k - packet.k1)) / math.sqrt(2.0 * packet.norm_N)
    return out[()] if np.ndim(out) == 0 else out


def initial_mismatch_bound(k0: float, beta, L: float) -> float:
    """Upper bound on |psi_0^G(x) - exp(i k0 x) G(x)| for x <= L.

    G(L) {1 + 2|beta|/(L - Re b) * sqrt(1 + ((k0 + Im b)/(L - Re b))^2)};
    valid for Re(beta) < L.
    """
    beta = as_beta(beta)
    gap = L - beta.real
    if gap <= 0:
        raise ValueError("bound requires Re(beta) < L")
    ratio = (k0 + beta.imag) / gap
    return float(gaussian_G(L)) * (1.0 + 2.0 * abs(beta) / gap * math.sqrt(1.0 + ratio * ratio))
