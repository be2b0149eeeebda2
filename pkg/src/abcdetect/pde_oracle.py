"""Crank-Nicolson solver for 2i psi_t = -psi_xx on [x_min, L] with a Robin
(ABC) condition psi'(L) = beta psi(L).

The left end is a homogeneous Dirichlet wall standing in for decay at
-infinity. The Robin condition is imposed through a ghost point,
psi_{N+1} = psi_{N-1} + 2 h beta psi_N, which is second order. Norms use
trapezoidal weights (h inside, h/2 at the screen node); with these weights
the scheme satisfies the discrete norm-loss identity

    ||psi^{n+1}||^2 - ||psi^n||^2 = -dt Im(beta) |(psi_N^n + psi_N^{n+1}) / 2|^2

exactly in exact arithmetic, the discrete counterpart of the continuous
statement d/dt ||psi||^2 = -Im(beta) |psi(L)|^2.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .closed_form_1d import as_beta, psi_tG

__all__ = [
    "Grid1D",
    "AbsorptionLedger",
    "InstabilityError",
    "UnderResolvedGridError",
    "evolve_robin",
    "evolve_pair",
    "contractivity_check",
    "validate_closed_form",
    "gaussian_on_grid",
]


class InstabilityError(ArithmeticError):
    """Norm grew although Im(beta) >= 0 should make the evolution contractive."""


class UnderResolvedGridError(ValueError):
    """Grid spacing too coarse to resolve the packet's oscillations."""


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    L: float
    n_points: int
    dt: float

    def __post_init__(self):
        if self.n_points < 3:
            raise ValueError("n_points must be at least 3")
        if not self.x_min < self.L:
            raise ValueError("x_min must lie left of the screen L")
        if not self.dt > 0:
            raise ValueError("dt must be positive")

    @property
    def h(self) -> float:
        return (self.L - self.x_min) / (self.n_points - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.L, self.n_points)

    @property
    def weights(self) -> np.ndarray:
        """Trapezoidal norm weights; the Dirichlet node carries none."""
        w = np.full(self.n_points, self.h)
        w[0] = 0.0
        w[-1] = self.h / 2.0
        return w

    def norm2(self, psi) -> np.ndarray:
        return np.sum(self.weights[:, None] * np.abs(np.reshape(psi, (self.n_points, -1))) ** 2, axis=0)

    @classmethod
    def for_packet(cls, k0: float, L: float, t_final: float, h: float, dt: float,
                   margin: float = 10.0) -> "Grid1D":
        """Grid with the left wall margin + |k0| t_final widths left of the origin.

        The wall is nudged so that h divides L - x_min exactly.
        """
        span = L + margin + abs(k0) * t_final
        n = int(math.ceil(span / h)) + 1
        return cls(L - (n - 1) * h, L, n, dt)


@dataclass
class AbsorptionLedger:
    """Per-step record of the detection bookkeeping.

    ``absorbed_density`` holds Im(beta)|psi(L)|^2 at each recorded time and
    ``flux_integral`` its trapezoidal time integral. ``midpoint_density``
    uses the time-averaged boundary value of each step, for which the
    scheme's norm loss is exact; ``cumulative`` is its running sum (so it
    never decreases) and ``norms`` the measured ||psi||^2. Conservation,
    ``cumulative + norms == norm0``, is therefore an independent check.
    """

    beta: complex
    norm0: float
    times: np.ndarray
    absorbed_density: np.ndarray
    cumulative: np.ndarray
    flux_integral: np.ndarray
    midpoint_density: np.ndarray
    left_edge_max: float
    norms: np.ndarray = None
    snapshots: dict = field(default_factory=dict)

    @property
    def final_absorption(self) -> float:
        return float(self.cumulative[-1])

    def norm_loss_residuals(self, dt: float) -> np.ndarray:
        """Per-step measured norm loss minus dt * midpoint density; zero up to rounding."""
        return -np.diff(self.norms) - dt * self.midpoint_density

    def conservation_error(self) -> float:
        """max |cumulative + ||psi||^2 - norm0| over the run."""
        return float(np.max(np.abs(self.cumulative + self.norms - self.norm0)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "lambda_abc", "cumulative"])
            for row in zip(self.times, self.absorbed_density, self.cumulative):
                writer.writerow([f"{v:.17g}" for v in row])


def _factorize(grid: Grid1D, beta: complex):
    """Thomas-algorithm factors of A = I - (i dt / 4) D on the unknown nodes 1..N.

    A is strictly diagonally dominant for Im(beta) >= 0 and h Re(beta) <= 1,
    so elimination without pivoting is stable; zero or non-finite pivots
    are reported as instability.
    """
    h2 = grid.h ** 2
    m = grid.n_points - 1
    c = 1j * grid.dt / 4.0
    diag = np.full(m, 1.0 + 2.0 * c / h2, dtype=complex)
    diag[-1] = 1.0 - c * (-2.0 + 2.0 * grid.h * beta) / h2
    lower = np.full(m - 1, -c / h2, dtype=complex)
    lower[-1] = -2.0 * c / h2  # ghost point doubles the coupling into the screen node
    upper = np.full(m - 1, -c / h2, dtype=complex)
    inv_pivot, c_prime = _thomas_factors(lower, diag, upper)
    if not (np.all(np.isfinite(inv_pivot)) and np.all(np.isfinite(c_prime))):
        raise InstabilityError("Crank-Nicolson matrix is singular or ill-conditioned")
    return lower, inv_pivot, c_prime


@njit(cache=True)
def _thomas_factors(lower, diag, upper):
    m = diag.shape[0]
    inv_pivot = np.empty(m, dtype=np.complex128)
    c_prime = np.empty(m - 1, dtype=np.complex128)
    inv_pivot[0] = 1.0 / diag[0]
    for i in range(m - 1):
        c_prime[i] = upper[i] * inv_pivot[i]
        inv_pivot[i + 1] = 1.0 / (diag[i + 1] - lower[i] * c_prime[i])
    return inv_pivot, c_prime


@njit(cache=True)
def _run(states, lower, inv_pivot, c_prime, weights, n_steps, snap_steps, snaps,
         growth_tol, check_growth):
    """March every row of ``states`` n_steps in place.

    Returns per-step norms and screen values per state, the squared
    difference norm of the first two states (if there are two), the
    largest |psi| next to the wall, and the failing step (-1 if none).
    """
    n_states, n = states.shape
    m = n - 1
    norms = np.empty((n_steps + 1, n_states))
    edge = np.empty((n_steps + 1, n_states), dtype=np.complex128)
    diff = np.zeros(n_steps + 1)
    work = np.empty(m, dtype=np.complex128)
    left = 0.0
    k = 0
    for s in range(n_states):
        acc = 0.0
        for j in range(n):
            v = states[s, j]
            acc += weights[j] * (v.real * v.real + v.imag * v.imag)
        norms[0, s] = acc
        edge[0, s] = states[s, n - 1]
        left = max(left, abs(states[s, 1]))
    if n_states >= 2:
        acc = 0.0
        for j in range(n):
            v = states[0, j] - states[1, j]
            acc += weights[j] * (v.real * v.real + v.imag * v.imag)
        diff[0] = acc
    while k < snap_steps.shape[0] and snap_steps[k] == 0:
        snaps[k, :, :] = states
        k += 1
    for step in range(1, n_steps + 1):
        for s in range(n_states):
            # forward sweep on rhs 2 psi, back substitution, then psi_new = y - psi
            work[0] = 2.0 * states[s, 1] * inv_pivot[0]
            for i in range(1, m):
                work[i] = (2.0 * states[s, i + 1] - lower[i - 1] * work[i - 1]) * inv_pivot[i]
            for i in range(m - 2, -1, -1):
                work[i] -= c_prime[i] * work[i + 1]
            acc = 0.0
            for i in range(m):
                v = work[i] - states[s, i + 1]
                states[s, i + 1] = v
                acc += weights[i + 1] * (v.real * v.real + v.imag * v.imag)
            norms[step, s] = acc
            edge[step, s] = states[s, n - 1]
            left = max(left, abs(states[s, 1]))
            if not np.isfinite(acc) or (check_growth and acc > norms[step - 1, s] * (1.0 + growth_tol) + 1e-300):
                return norms, edge, diff, left, step
        if n_states >= 2:
            acc = 0.0
            for j in range(n):
                v = states[0, j] - states[1, j]
                acc += weights[j] * (v.real * v.real + v.imag * v.imag)
            diff[step] = acc
        while k < snap_steps.shape[0] and snap_steps[k] == step:
            snaps[k, :, :] = states
            k += 1
    return norms, edge, diff, left, -1


def _march(states, beta, grid: Grid1D, t_final: float, snapshot_times=(), growth_tol=1e-12):
    n = _n_steps(t_final, grid.dt)
    lower, inv_pivot, c_prime = _factorize(grid, beta)
    times = sorted(float(t) for t in snapshot_times)
    snap_steps = np.array([_n_steps(t, grid.dt) for t in times], dtype=np.int64)
    if snap_steps.size and (snap_steps[-1] > n or snap_steps[0] < 0):
        raise ValueError("snapshot times must lie in [0, t_final]")
    snaps = np.empty((snap_steps.size,) + states.shape, dtype=complex)
    norms, edge, diff, left, failed = _run(states, lower, inv_pivot, c_prime, grid.weights, n,
                                           snap_steps, snaps, growth_tol, beta.imag >= 0)
    if failed >= 0:
        raise InstabilityError(
            f"norm grew or became non-finite at step {failed} (t = {failed * grid.dt:.6g}) "
            f"although Im(beta) = {beta.imag:g} >= 0")
    return norms, edge, diff, left, dict(zip(times, snaps))


def _n_steps(t, dt) -> int:
    n = int(round(t / dt))
    if abs(n * dt - t) > 1e-9 * max(1.0, abs(t)):
        raise ValueError(f"time {t} is not a multiple of dt = {dt}")
    return n


def _prepare(psi0, grid: Grid1D) -> np.ndarray:
    psi = np.array(psi0, dtype=complex)
    if psi.shape[0] != grid.n_points:
        raise ValueError("initial state does not match the grid")
    if not np.all(np.isfinite(psi)):
        raise ValueError("initial state must be finite")
    psi[0] = 0.0
    return psi


def evolve_robin(psi0, beta, grid: Grid1D, t_final: float, snapshot_times=(),
                 growth_tol: float = 1e-12):
    """Evolve ``psi0`` to ``t_final``; returns ``(final_state, ledger)``.

    ``snapshot_times`` (multiples of dt) are stored in ``ledger.snapshots``.
    Raises :class:`InstabilityError` if the norm grows by more than
    ``growth_tol`` (relative) in a step although Im(beta) >= 0.
    """
    beta = as_beta(beta)
    states = _prepare(psi0, grid)[None, :].copy()
    norms, edge, _, left, snaps = _march(states, beta, grid, t_final, snapshot_times, growth_tol)
    norms, edge = norms[:, 0], edge[:, 0]
    times = grid.dt * np.arange(norms.size)
    density = beta.imag * np.abs(edge) ** 2
    flux = np.concatenate(([0.0], np.cumsum(0.5 * grid.dt * (density[1:] + density[:-1]))))
    mid = beta.imag * np.abs(0.5 * (edge[1:] + edge[:-1])) ** 2
    ledger = AbsorptionLedger(beta=beta, norm0=float(norms[0]), times=times,
                              absorbed_density=density,
                              cumulative=np.concatenate(([0.0], np.cumsum(grid.dt * mid))),
                              flux_integral=flux, midpoint_density=mid,
                              left_edge_max=float(left), norms=norms,
                              snapshots={t: v[0] for t, v in snaps.items()})
    return states[0], ledger


def evolve_pair(psiA, psiB, beta, grid: Grid1D, t_final: float):
    """Evolve two states together and return the per-step difference norms
    ||psiA - psiB||^2 and the identity residuals

        (||D^{n+1}||^2 - ||D^n||^2) / dt + Im(beta) |mean boundary value of D|^2.
    """
    beta = as_beta(beta)
    states = np.stack([_prepare(psiA, grid), _prepare(psiB, grid)])
    _, edge, diff, _, _ = _march(states, beta, grid, t_final)
    d_edge = edge[:, 0] - edge[:, 1]
    mean_edge = 0.5 * (d_edge[1:] + d_edge[:-1])
    residuals = np.diff(diff) / grid.dt + beta.imag * np.abs(mean_edge) ** 2
    return diff, residuals


def contractivity_check(psiA, psiB, beta, grid: Grid1D, t_final: float) -> float:
    """Largest per-step value of d/dt||psiA - psiB||^2 + Im(beta)|(psiA - psiB)(L)|^2.

    Zero up to rounding for this scheme (exactly 0.0 when psiA == psiB).
    """
    _, residuals = evolve_pair(psiA, psiB, beta, grid, t_final)
    return float(np.max(residuals)) if residuals.size else 0.0


def gaussian_on_grid(grid: Grid1D, k0: float) -> np.ndarray:
    """exp(i k0 x) G(x) restricted to the grid (the wall node set to zero)."""
    x = grid.x
    psi = math.pi ** -0.25 * np.exp(-x * x / 2.0 + 1j * k0 * x)
    psi[0] = 0.0
    return psi


def validate_closed_form(k0: float, beta, L: float, grid: Grid1D, t_samples) -> float:
    """Max relative L2 discrepancy between the oracle and the closed form.

    The restricted Gaussian exp(i k0 x) G(x) is evolved on ``grid`` and
    compared with psi_tG at each time in ``t_samples``.
    """
    if not math.isclose(grid.L, L):
        raise ValueError("grid must end at the screen position L")
    if grid.h > 0.02 / max(1.0, abs(k0)) * (1.0 + 1e-12):
        raise UnderResolvedGridError(
            f"h = {grid.h:.3g} exceeds 0.02/max(1, |k0|) = {0.02 / max(1.0, abs(k0)):.3g}")
    t_samples = sorted(float(t) for t in t_samples)
    _, ledger = evolve_robin(gaussian_on_grid(grid, k0), beta, grid, t_samples[-1],
                             snapshot_times=t_samples)
    w = grid.weights
    worst = 0.0
    for t in t_samples:
        exact = psi_tG(grid.x, t, k0, beta, L)
        exact[0] = 0.0
        err = math.sqrt(np.sum(w * np.abs(ledger.snapshots[t] - exact) ** 2))
        worst = max(worst, err / math.sqrt(np.sum(w * np.abs(exact) ** 2)))
    return worst
