"""Clebsch-parameterized (canonical) ideal MHD.

The canonical fields are stored as one ``(14, nx, ny, nz)`` array laid out as
``phi0, rho, alpha[0:3], mu[0:3], phi[0:3], beta[0:3]``.  Conjugate pairs are
``(phi0, rho)``, ``(alpha, mu)`` and ``(phi, beta)`` with the first member the
coordinate ``q`` and the second the momentum ``p``.

Physical fields are recovered as::

    V = -grad phi0 - sigma^l grad alpha^l - b^l grad phi^l
    B = grad sigma^l x grad phi^l
    A = sigma^l grad phi^l          (curl A = B)

with ``sigma = mu / rho`` and ``b = beta / rho``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import spectral as sp
from .spectral import Grid

N_FIELDS = 14
RHO_FLOOR = 0.1

PHI0, RHO = 0, 1
ALPHA = slice(2, 5)
MU = slice(5, 8)
PHI = slice(8, 11)
BETA = slice(11, 14)

Q_INDEX = np.array([0, 2, 3, 4, 8, 9, 10])
P_INDEX = np.array([1, 5, 6, 7, 11, 12, 13])
FIELD_NAMES = (
    ["phi0", "rho"]
    + [f"alpha{i}" for i in (1, 2, 3)]
    + [f"mu{i}" for i in (1, 2, 3)]
    + [f"phi{i}" for i in (1, 2, 3)]
    + [f"beta{i}" for i in (1, 2, 3)]
)


@dataclass(frozen=True)
class EquationOfState:
    """Polytropic barotropic closure ``E(rho) = K rho^(gamma-1) / (gamma-1)``."""

    gamma: float = 5.0 / 3.0
    K: float = 1.0
    rho_floor: float = RHO_FLOOR

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError("gamma must exceed 1")
        if not self.K > 0.0:
            raise ValueError("K must be positive")
        if not self.rho_floor > 0.0:
            raise ValueError("rho_floor must be positive")

    def check(self, rho: np.ndarray) -> None:
        low = float(np.min(rho))
        if not low >= self.rho_floor:
            raise sp.DensityFloorError(f"density minimum {low:.4g} is below the floor {self.rho_floor:g}")


def internal_energy(rho: np.ndarray, eos: EquationOfState) -> np.ndarray:
    eos.check(rho)
    g1 = eos.gamma - 1.0
    return eos.K * rho**g1 / g1


def enthalpy(rho: np.ndarray, eos: EquationOfState) -> np.ndarray:
    """Specific enthalpy ``h = d(rho E)/d rho``."""
    eos.check(rho)
    g1 = eos.gamma - 1.0
    return eos.K * eos.gamma * rho**g1 / g1


def sound_speed(rho: np.ndarray, eos: EquationOfState) -> np.ndarray:
    return np.sqrt(eos.K * eos.gamma * rho ** (eos.gamma - 1.0))


class _CanonicalFields:
    """Shared storage and vector-space algebra for states and tangents."""

    grid: Grid
    data: np.ndarray

    def _validate(self):
        if self.data.shape != (N_FIELDS, *self.grid.shape):
            raise sp.GridMismatchError(f"canonical data has shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise sp.NonFiniteFieldError("canonical fields contain non-finite values")

    @property
    def phi0(self) -> np.ndarray:
        return self.data[PHI0]

    @property
    def rho(self) -> np.ndarray:
        return self.data[RHO]

    @property
    def alpha(self) -> np.ndarray:
        return self.data[ALPHA]

    @property
    def mu(self) -> np.ndarray:
        return self.data[MU]

    @property
    def phi(self) -> np.ndarray:
        return self.data[PHI]

    @property
    def beta(self) -> np.ndarray:
        return self.data[BETA]

    @property
    def q(self) -> np.ndarray:
        return self.data[Q_INDEX]

    @property
    def p(self) -> np.ndarray:
        return self.data[P_INDEX]


@dataclass(frozen=True, eq=False)
class ClebschTangent(_CanonicalFields):
    """A perturbation or time derivative of a :class:`ClebschState`."""

    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self._validate()

    @classmethod
    def zeros(cls, grid: Grid) -> "ClebschTangent":
        return cls(grid, np.zeros((N_FIELDS, *grid.shape)))

    @classmethod
    def from_fields(cls, grid, phi0=None, rho=None, alpha=None, mu=None, phi=None, beta=None):
        return cls(grid, _pack(grid, phi0, rho, alpha, mu, phi, beta))

    def __add__(self, other: "ClebschTangent") -> "ClebschTangent":
        return ClebschTangent(self.grid, self.data + other.data)

    def __sub__(self, other: "ClebschTangent") -> "ClebschTangent":
        return ClebschTangent(self.grid, self.data - other.data)

    def __mul__(self, c: float) -> "ClebschTangent":
        return ClebschTangent(self.grid, c * self.data)

    __rmul__ = __mul__

    def symplectic(self) -> "ClebschTangent":
        """Apply the canonical Poisson matrix: ``(g_q, g_p) -> (g_p, -g_q)``."""
        out = np.empty_like(self.data)
        out[Q_INDEX] = self.data[P_INDEX]
        out[P_INDEX] = -self.data[Q_INDEX]
        return ClebschTangent(self.grid, out)

    def symplectic_inverse(self) -> "ClebschTangent":
        """Inverse of :meth:`symplectic`: ``(v_q, v_p) -> (-v_p, v_q)``."""
        out = np.empty_like(self.data)
        out[Q_INDEX] = -self.data[P_INDEX]
        out[P_INDEX] = self.data[Q_INDEX]
        return ClebschTangent(self.grid, out)


@dataclass(frozen=True, eq=False)
class ClebschState(_CanonicalFields):
    """Canonical field tuple ``(phi0, rho, alpha, mu, phi, beta)`` at a time."""

    grid: Grid
    data: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self._validate()
        if not float(np.min(self.data[RHO])) > 0.0:
            raise sp.DensityFloorError("density must be strictly positive")

    @classmethod
    def from_fields(cls, grid, phi0=None, rho=None, alpha=None, mu=None, phi=None, beta=None, time=0.0):
        if rho is None:
            raise ValueError("rho is required")
        return cls(grid, _pack(grid, phi0, rho, alpha, mu, phi, beta), time)

    def displaced(self, tangent: ClebschTangent | np.ndarray, scale: float = 1.0, time: float | None = None):
        """Return ``self + scale * tangent`` as a new state."""
        d = tangent.data if isinstance(tangent, ClebschTangent) else tangent
        return ClebschState(self.grid, self.data + scale * d, self.time if time is None else time)

    def with_time(self, time: float) -> "ClebschState":
        return ClebschState(self.grid, self.data, time)


def _pack(grid, phi0, rho, alpha, mu, phi, beta) -> np.ndarray:
    data = np.zeros((N_FIELDS, *grid.shape))
    for sl, value in ((PHI0, phi0), (RHO, rho), (ALPHA, alpha), (MU, mu), (PHI, phi), (BETA, beta)):
        if value is not None:
            data[sl] = value
    return data


class Reconstruction(NamedTuple):
    """Intermediate fields shared by the physics routines."""

    rho: np.ndarray
    sigma: np.ndarray  # mu / rho, shape (3, ...)
    b: np.ndarray  # beta / rho
    grad_phi0: np.ndarray  # (3, ...)
    grad_alpha: np.ndarray  # (3 pairs, 3 components, ...)
    grad_phi: np.ndarray
    grad_sigma: np.ndarray
    V: np.ndarray
    B: np.ndarray
    A: np.ndarray


def reconstruct(s: ClebschState, rho_floor: float = RHO_FLOOR) -> Reconstruction:
    g = s.grid
    rho = s.rho
    sigma = sp.divide(s.mu, rho, rho_floor)
    b = sp.divide(s.beta, rho, rho_floor)
    grad_phi0 = sp.grad(g, s.phi0)
    grad_alpha = sp.grad(g, s.alpha)
    grad_phi = sp.grad(g, s.phi)
    grad_sigma = sp.grad(g, sigma)
    V = -grad_phi0 - np.sum(sigma[:, None] * grad_alpha + b[:, None] * grad_phi, axis=0)
    B = np.sum(sp.cross(grad_sigma, grad_phi), axis=0)
    A = np.sum(sigma[:, None] * grad_phi, axis=0)
    return Reconstruction(rho, sigma, b, grad_phi0, grad_alpha, grad_phi, grad_sigma, V, B, A)


def reconstruct_velocity(s: ClebschState, rho_floor: float = RHO_FLOOR) -> np.ndarray:
    return reconstruct(s, rho_floor).V


def reconstruct_magnetic(s: ClebschState, rho_floor: float = RHO_FLOOR) -> np.ndarray:
    return reconstruct(s, rho_floor).B


def vector_potential_clebsch(s: ClebschState, rho_floor: float = RHO_FLOOR) -> np.ndarray:
    return reconstruct(s, rho_floor).A


def primed_velocity(r: Reconstruction) -> np.ndarray:
    """``V' = V + grad phi0``."""
    return r.V + r.grad_phi0


class EnergyBudget(NamedTuple):
    kinetic: float
    thermal: float
    magnetic: float

    @property
    def total(self) -> float:
        return self.kinetic + self.thermal + self.magnetic


def hamiltonian_density(s: ClebschState, eos: EquationOfState) -> np.ndarray:
    r = reconstruct(s, eos.rho_floor)
    W = r.grad_phi0 + np.sum(r.sigma[:, None] * r.grad_alpha + r.b[:, None] * r.grad_phi, axis=0)
    return 0.5 * r.rho * sp.dot(W, W) + r.rho * internal_energy(r.rho, eos) + 0.5 * sp.dot(r.B, r.B)


def energy_budget(s: ClebschState, eos: EquationOfState) -> EnergyBudget:
    r = reconstruct(s, eos.rho_floor)
    return physical_energy_budget(s.grid, r.rho, r.V, r.B, eos)


def physical_energy_budget(grid: Grid, rho, V, B, eos: EquationOfState) -> EnergyBudget:
    return EnergyBudget(
        sp.integrate(grid, 0.5 * rho * sp.dot(V, V)),
        sp.integrate(grid, rho * internal_energy(rho, eos)),
        sp.integrate(grid, 0.5 * sp.dot(B, B)),
    )


def hamiltonian(s: ClebschState, eos: EquationOfState) -> float:
    """Total energy evaluated directly from the Clebsch fields."""
    return sp.integrate(s.grid, hamiltonian_density(s, eos))


RHS_FORMS = ("printed", "variational")


def canonical_rhs(s: ClebschState, eos: EquationOfState, form: str = "variational") -> ClebschTangent:
    """Canonical equations of motion ``d/dt u_c``.

    ``form="printed"`` evaluates the Lorentz-type couplings literally as
    ``J.grad(phi)/rho`` and ``J.grad(sigma)`` with ``J = curl B``.
    ``form="variational"`` uses the equivalent divergence forms
    ``-div(grad(phi) x B)/rho`` and ``div(B x grad(sigma))``, which make the
    right-hand side the exact symplectic gradient of the discrete Hamiltonian,
    so the semi-discrete flow conserves it to rounding.  The two differ only by
    aliasing error.
    """
    if form not in RHS_FORMS:
        raise ValueError(f"form must be one of {RHS_FORMS}")
    g = s.grid
    r = reconstruct(s, eos.rho_floor)
    V, rho = r.V, r.rho
    if form == "printed":
        J = sp.curl(g, r.B)
        j_phi = sp.dot(J, r.grad_phi)
        j_sigma = sp.dot(J, r.grad_sigma)
    else:
        coupling = sp.div(g, np.concatenate([sp.cross(r.B, r.grad_phi), sp.cross(r.B, r.grad_sigma)]))
        j_phi, j_sigma = coupling[:3], coupling[3:]
    out = np.empty_like(s.data)
    out[PHI0] = (
        -sp.dot(V, r.grad_phi0) + enthalpy(rho, eos) - 0.5 * sp.dot(V, V) - np.sum(r.sigma * j_phi, axis=0) / rho
    )
    fluxes = np.concatenate([rho[None], s.mu, s.beta])[:, None] * V
    div_flux = sp.div(g, fluxes)
    out[RHO] = -div_flux[0]
    out[ALPHA] = -sp.dot(V, r.grad_alpha) + j_phi / rho
    out[MU] = -div_flux[1:4]
    out[PHI] = -sp.dot(V, r.grad_phi)
    out[BETA] = -div_flux[4:7] + j_sigma
    return ClebschTangent(g, out)


def lagrangian_density(s: ClebschState, sdot: ClebschTangent, eos: EquationOfState) -> np.ndarray:
    """``rho phi0_t + mu.alpha_t + beta.phi_t - Hamiltonian density``."""
    if s.grid != sdot.grid:
        raise sp.GridMismatchError("state and tangent live on different grids")
    return np.sum(s.p * sdot.q, axis=0) - hamiltonian_density(s, eos)


def lagrangian(s: ClebschState, sdot: ClebschTangent, eos: EquationOfState) -> float:
    return sp.integrate(s.grid, lagrangian_density(s, sdot, eos))
