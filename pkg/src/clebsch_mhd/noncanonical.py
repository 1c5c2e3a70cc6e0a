"""Eulerian (noncanonical) ideal MHD: direct equations, Poisson operator, Casimirs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spectral as sp
from .clebsch import ClebschState, EquationOfState, enthalpy, reconstruct
from .spectral import Grid

DIV_B_TOL = 1e-10
CASIMIRS = ("C1", "C2", "C3")


class _PhysicalFields:
    grid: Grid
    data: np.ndarray  # (7, nx, ny, nz): rho, V, B

    @property
    def rho(self) -> np.ndarray:
        return self.data[0]

    @property
    def V(self) -> np.ndarray:
        return self.data[1:4]

    @property
    def B(self) -> np.ndarray:
        return self.data[4:7]

    def _validate(self):
        if self.data.shape != (7, *self.grid.shape):
            raise sp.GridMismatchError(f"physical data has shape {self.data.shape}")
        if not np.all(np.isfinite(self.data)):
            raise sp.NonFiniteFieldError("physical fields contain non-finite values")


@dataclass(frozen=True, eq=False)
class PhysicalTangent(_PhysicalFields):
    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        self._validate()

    @classmethod
    def from_fields(cls, grid: Grid, rho=0.0, V=0.0, B=0.0) -> "PhysicalTangent":
        data = np.zeros((7, *grid.shape))
        data[0] = rho
        data[1:4] = V
        data[4:7] = B
        return cls(grid, data)


@dataclass(frozen=True, eq=False)
class PhysicalState(_PhysicalFields):
    """Eulerian state ``(rho, V, B)``.

    ``B`` must be divergence-free and mean-free; this is checked at
    construction unless ``check_b=False`` (used for RK4 stages, where the
    property is inherited from the curl-form induction equation).
    """

    grid: Grid
    data: np.ndarray
    time: float = 0.0
    check_b: bool = True

    def __post_init__(self):
        self._validate()
        if not float(np.min(self.rho)) > 0.0:
            raise sp.DensityFloorError("density must be strictly positive")
        if self.check_b:
            scale = sp.max_norm(self.B)
            if scale > 0.0:
                div_b = sp.max_norm(sp.div(self.grid, self.B))
                if div_b > DIV_B_TOL * scale:
                    raise sp.InadmissibleFieldError(f"div B = {div_b:.3e} relative to |B| = {scale:.3e}")
                mean = float(np.max(np.abs(self.B.mean(axis=(1, 2, 3)))))
                if mean > DIV_B_TOL * scale:
                    raise sp.InadmissibleFieldError(f"B has nonzero mean {mean:.3e}")

    @classmethod
    def from_fields(cls, grid: Grid, rho, V, B, time: float = 0.0, check_b: bool = True) -> "PhysicalState":
        data = np.empty((7, *grid.shape))
        data[0] = rho
        data[1:4] = V
        data[4:7] = B
        return cls(grid, data, time, check_b)

    @classmethod
    def from_clebsch(cls, s: ClebschState, rho_floor: float | None = None,
                     check_b: bool = True) -> "PhysicalState":
        """Physical fields of a Clebsch state.

        The pointwise product ``grad sigma x grad phi`` is only divergence-free up
        to truncation once the potentials carry power near the grid cutoff, so
        diagnostics along a trajectory pass ``check_b=False``.
        """
        r = reconstruct(s) if rho_floor is None else reconstruct(s, rho_floor)
        return cls.from_fields(s.grid, r.rho, r.V, r.B, s.time, check_b)

    def displaced(self, tangent: PhysicalTangent | np.ndarray, scale: float = 1.0, time: float | None = None):
        d = tangent.data if isinstance(tangent, PhysicalTangent) else tangent
        return PhysicalState(self.grid, self.data + scale * d, self.time if time is None else time, check_b=False)


def mhd_rhs(u: PhysicalState, eos: EquationOfState) -> PhysicalTangent:
    """Ideal MHD right-hand side in curl form."""
    g = u.grid
    eos.check(u.rho)
    rho, V, B = u.rho, u.V, u.B
    omega = sp.curl(g, V)
    J = sp.curl(g, B)
    out = np.empty_like(u.data)
    out[0] = -sp.div(g, rho * V)
    out[1:4] = -sp.cross(omega, V) - sp.grad(g, enthalpy(rho, eos) + 0.5 * sp.dot(V, V)) + sp.cross(J, B) / rho
    out[4:7] = sp.curl(g, sp.cross(V, B))
    return PhysicalTangent(g, out)


def hamiltonian_gradient(u: PhysicalState, eos: EquationOfState) -> PhysicalTangent:
    """``dH/du = (h + V^2/2, rho V, B)``."""
    return PhysicalTangent.from_fields(
        u.grid, enthalpy(u.rho, eos) + 0.5 * sp.dot(u.V, u.V), u.rho * u.V, u.B
    )


def hamiltonian(u: PhysicalState, eos: EquationOfState) -> float:
    from .clebsch import physical_energy_budget

    return physical_energy_budget(u.grid, u.rho, u.V, u.B, eos).total


def poisson_terms(u: PhysicalState, g: PhysicalTangent, rho_floor: float) -> list[list[tuple[np.ndarray, float]]]:
    """The individual operator terms of ``J g`` grouped by row.

    Each term comes with a magnitude scale: the product of the max norms of its
    factors, with ``max|k|`` standing in for a derivative.
    """
    grid = u.grid
    inv_rho = sp.divide(1.0, u.rho, rho_floor)
    omega = sp.curl(grid, u.V)
    curl_gB = sp.curl(grid, g.B)
    k = float(np.sqrt(grid.k_squared.max()))
    n = sp.max_norm
    return [
        [(-sp.div(grid, g.V), k * n(g.V))],
        [
            (-sp.grad(grid, g.rho), k * n(g.rho)),
            (-inv_rho * sp.cross(omega, g.V), n(inv_rho) * n(omega) * n(g.V)),
            (inv_rho * sp.cross(curl_gB, u.B), n(inv_rho) * n(curl_gB) * n(u.B)),
        ],
        [(sp.curl(grid, sp.cross(g.V, inv_rho * u.B)), k * n(g.V) * n(inv_rho) * n(u.B))],
    ]


def poisson_apply(u: PhysicalState, g: PhysicalTangent, rho_floor: float = 0.1) -> PhysicalTangent:
    """Apply the noncanonical Poisson operator to a gradient ``g``."""
    rows = poisson_terms(u, g, rho_floor)
    data = np.empty_like(u.data)
    data[0] = rows[0][0][0]
    data[1:4] = rows[1][0][0] + rows[1][1][0] + rows[1][2][0]
    data[4:7] = rows[2][0][0]
    return PhysicalTangent(u.grid, data)


def casimir_gradient(u: PhysicalState, which: str) -> PhysicalTangent:
    if which == "C1":
        return PhysicalTangent.from_fields(u.grid, rho=1.0)
    if which == "C2":
        return PhysicalTangent.from_fields(u.grid, B=2.0 * sp.inverse_curl(u.grid, u.B))
    if which == "C3":
        return PhysicalTangent.from_fields(u.grid, V=u.B, B=u.V)
    raise ValueError(f"unknown Casimir {which!r}; expected one of {CASIMIRS}")


def casimir_values(u: PhysicalState) -> dict[str, float]:
    g = u.grid
    return {
        "C1": sp.integrate(g, u.rho),
        "C2": sp.integrate(g, sp.dot(sp.inverse_curl(g, u.B), u.B)),
        "C3": sp.integrate(g, sp.dot(u.V, u.B)),
    }


def casimir_nullity_residual(u: PhysicalState, rho_floor: float = 0.1) -> dict[str, float]:
    """``max|J dC_i|`` normalized by the magnitude scale of the operator terms.

    The scale is the largest product of factor norms entering ``J dC_i``, so a
    residual of 1 means no cancellation at all.  A zero numerator gives zero.
    """
    out = {}
    for which in CASIMIRS:
        rows = poisson_terms(u, casimir_gradient(u, which), rho_floor)
        num = max(sp.max_norm(sum(term for term, _ in row)) for row in rows)
        scale = max(s for row in rows for _, s in row)
        out[which] = 0.0 if num == 0.0 else num / scale
    return out


def pairing(u: PhysicalState, g1: PhysicalTangent, g2: PhysicalTangent, rho_floor: float = 0.1) -> float:
    """``<g1, J g2>``."""
    return sp.inner(u.grid, g1.data, poisson_apply(u, g2, rho_floor).data)
