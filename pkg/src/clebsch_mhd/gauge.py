"""Gauge symmetries of the Clebsch parameterization and their Noether charges.

A gauge generator is a velocity field on Clebsch space whose flow leaves the
physical fields ``(rho, V, B)`` unchanged.  Each conserved generator pairs
with a Noether charge ``int (p.dq - Lambda0)``; the non-conserving generator
moves the same orbit but does not leave the action invariant up to a boundary
term.

Throughout, ``X^l = grad phi^l . B / rho``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import NamedTuple

import numpy as np

from . import spectral as sp
from .clebsch import (
    ALPHA,
    BETA,
    MU,
    PHI,
    PHI0,
    RHO_FLOOR,
    ClebschState,
    ClebschTangent,
    EquationOfState,
    Reconstruction,
    canonical_rhs,
    enthalpy,
    primed_velocity,
    reconstruct,
)
from .invariants import WeightFunction, weight_by_name
from .rk4 import rk4_step


class GaugeKind(str, Enum):
    MASS = "C1"
    MAGNETIC_HELICITY = "C2"
    CROSS_HELICITY = "C3"
    GENERALIZED_MASS = "GM"
    GENERALIZED_HELICITY = "GH"
    NON_CONSERVING = "remark"


_WEIGHTED = (GaugeKind.GENERALIZED_MASS, GaugeKind.GENERALIZED_HELICITY)


@dataclass(frozen=True, eq=False)
class GaugeGenerator:
    kind: GaugeKind
    weight: WeightFunction | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", GaugeKind(self.kind))
        if self.kind in _WEIGHTED and self.weight is None:
            raise ValueError(f"generator {self.kind.value} needs a weight function")
        if self.kind not in _WEIGHTED and self.weight is not None:
            raise ValueError(f"generator {self.kind.value} takes no weight")

    @property
    def name(self) -> str:
        return self.kind.value if self.weight is None else f"{self.kind.value}:{self.weight.name}"

    @property
    def conserving(self) -> bool:
        return self.kind is not GaugeKind.NON_CONSERVING

    @classmethod
    def parse(cls, name: str) -> "GaugeGenerator":
        """``C1``, ``C2``, ``C3``, ``remark``, ``GM:<weight>`` or ``GH:<weight>``."""
        kind, _, weight = name.partition(":")
        try:
            kind = GaugeKind(kind)
        except ValueError:
            raise ValueError(f"unknown generator {name!r}") from None
        if kind in _WEIGHTED:
            return cls(kind, weight_by_name(weight or "one"))
        if weight:
            raise ValueError(f"generator {kind.value} takes no weight")
        return cls(kind)


def all_generators(weight: WeightFunction | None = None) -> list[GaugeGenerator]:
    """One generator of every kind, the weighted ones sharing ``weight``."""
    weight = weight or WeightFunction.mixed()
    return [GaugeGenerator(k, weight if k in _WEIGHTED else None) for k in GaugeKind]


# -- generator velocities -----------------------------------------------------------


def gauge_velocity(s: ClebschState, g: GaugeGenerator, rho_floor: float = RHO_FLOOR,
                   r: Reconstruction | None = None) -> ClebschTangent:
    """The Clebsch-space velocity of the gauge flow generated by ``g``."""
    r = r if r is not None else reconstruct(s, rho_floor)
    grid = s.grid
    rho, sigma = r.rho, r.sigma
    out = np.zeros_like(s.data)
    kind = g.kind
    if kind is GaugeKind.MASS:
        out[PHI0] = 1.0
    elif kind in (GaugeKind.MAGNETIC_HELICITY, GaugeKind.NON_CONSERVING):
        X = sp.dot(r.grad_phi, r.B) / rho
        scale = 2.0 if kind is GaugeKind.MAGNETIC_HELICITY else s.phi0
        out[PHI0] = -scale * np.sum(sigma * X, axis=0)
        out[ALPHA] = scale * X
        out[BETA] = scale * sp.dot(r.grad_sigma, r.B)
    elif kind is GaugeKind.CROSS_HELICITY:
        omega = sp.curl(grid, r.V)
        grad_b = sp.grad(grid, r.b)
        phi_B = sp.dot(r.grad_phi, r.B) / rho
        phi_w = sp.dot(r.grad_phi, omega) / rho
        alpha_B = sp.dot(r.grad_alpha, r.B) / rho
        out[PHI0] = np.sum(sigma * alpha_B + r.b * phi_B - sigma * phi_w, axis=0)
        out[ALPHA] = -alpha_B + phi_w
        out[MU] = -sp.dot(r.grad_sigma, r.B)
        out[PHI] = -phi_B
        out[BETA] = -sp.dot(grad_b, r.B) + sp.dot(r.grad_sigma, omega)
    elif kind is GaugeKind.GENERALIZED_MASS:
        f, f1, f2 = g.weight(sigma, s.phi)
        out[PHI0] = f - np.sum(sigma * f1, axis=0)
        out[ALPHA] = f1
        out[BETA] = -rho * f2
    elif kind is GaugeKind.GENERALIZED_HELICITY:
        f, f1, f2 = g.weight(sigma, s.phi)
        AB = sp.dot(r.A, r.B)
        M = f * r.B + sp.curl(grid, f * r.A)
        Y = (f1 * AB + sp.dot(r.grad_phi, M)) / rho
        out[PHI0] = -np.sum(sigma * Y, axis=0)
        out[ALPHA] = Y
        out[BETA] = -f2 * AB + sp.div(grid, sigma[:, None] * M)
    return ClebschTangent(grid, out)


def lambda0_density(s: ClebschState, g: GaugeGenerator, r: Reconstruction) -> np.ndarray | float:
    """Temporal component of the boundary term in the action variation."""
    kind = g.kind
    if kind in (GaugeKind.MASS, GaugeKind.GENERALIZED_MASS):
        return 0.0
    AB = sp.dot(r.A, r.B)
    if kind is GaugeKind.MAGNETIC_HELICITY:
        return -AB
    if kind is GaugeKind.CROSS_HELICITY:
        return -sp.dot(primed_velocity(r), r.B)
    if kind is GaugeKind.GENERALIZED_HELICITY:
        return -g.weight(r.sigma, s.phi)[0] * AB
    return -s.phi0 * AB


# -- linearized reconstruction ------------------------------------------------------


class Linearization(NamedTuple):
    """First-order changes of the derived fields along a Clebsch tangent."""

    d_rho: np.ndarray
    d_sigma: np.ndarray
    d_b: np.ndarray
    d_V: np.ndarray
    d_B: np.ndarray
    d_A: np.ndarray
    V_terms: tuple[np.ndarray, ...]
    B_terms: tuple[np.ndarray, ...]


def linearize(s: ClebschState, du: ClebschTangent, r: Reconstruction) -> Linearization:
    grid = s.grid
    d_rho = du.rho
    d_sigma = (du.mu - r.sigma * d_rho) / r.rho
    d_b = (du.beta - r.b * d_rho) / r.rho
    g_phi0 = sp.grad(grid, du.phi0)
    g_alpha = sp.grad(grid, du.alpha)
    g_phi = sp.grad(grid, du.phi)
    g_sigma = sp.grad(grid, d_sigma)
    V_terms = (
        g_phi0,
        np.sum(d_sigma[:, None] * r.grad_alpha, axis=0),
        np.sum(r.sigma[:, None] * g_alpha, axis=0),
        np.sum(d_b[:, None] * r.grad_phi, axis=0),
        np.sum(r.b[:, None] * g_phi, axis=0),
    )
    B_terms = (
        np.sum(sp.cross(g_sigma, r.grad_phi), axis=0),
        np.sum(sp.cross(r.grad_sigma, g_phi), axis=0),
    )
    d_A = np.sum(d_sigma[:, None] * r.grad_phi + r.sigma[:, None] * g_phi, axis=0)
    return Linearization(d_rho, d_sigma, d_b, -sum(V_terms), sum(B_terms), d_A, V_terms, B_terms)


class PhysicalResiduals(NamedTuple):
    rho: float
    V: float
    B: float

    def max(self) -> float:
        return max(self)


def _cancellation(total: np.ndarray, terms) -> float:
    num = sp.max_norm(total)
    if num == 0.0:
        return 0.0
    return num / max(sp.max_norm(t) for t in terms)


def physical_invariance_infinitesimal(s: ClebschState, g: GaugeGenerator,
                                      rho_floor: float = RHO_FLOOR) -> PhysicalResiduals:
    """First-order changes of ``(rho, V, B)`` along the generator.

    ``rho`` is measured against ``max|rho|``; ``V`` and ``B`` against the largest
    of the terms whose cancellation the gauge identity asserts.
    """
    r = reconstruct(s, rho_floor)
    lin = linearize(s, gauge_velocity(s, g, rho_floor, r), r)
    return PhysicalResiduals(
        sp.max_norm(lin.d_rho) / sp.max_norm(r.rho),
        _cancellation(lin.d_V, lin.V_terms),
        _cancellation(lin.d_B, lin.B_terms),
    )


# -- finite flows ---------------------------------------------------------------------


def flow(s: ClebschState, g: GaugeGenerator, epsilon: float, substeps: int = 20,
         rho_floor: float = RHO_FLOOR, callback=None) -> ClebschState:
    """Transport ``s`` a parameter distance ``epsilon`` along the gauge flow (RK4).

    ``callback(k, state)`` is called after each substep.
    """
    if int(substeps) != substeps or substeps < 1:
        raise ValueError("substeps must be a positive integer")
    if not np.isfinite(epsilon):
        raise ValueError("epsilon must be finite")
    h = epsilon / substeps
    velocity = lambda u: gauge_velocity(u, g, rho_floor).data  # noqa: E731
    for k in range(substeps):
        s = rk4_step(velocity, s, h)
        if callback is not None:
            callback(k + 1, s)
    return s


class PhysicalChange(NamedTuple):
    rho: float
    V: float
    B: float

    def max(self) -> float:
        return max(self)


def _relative_change(new: np.ndarray, old: np.ndarray) -> float:
    ref = sp.max_norm(old)
    diff = sp.max_norm(new - old)
    return diff / ref if ref > 0 else diff


def physical_change(s0: ClebschState, s1: ClebschState, rho_floor: float = RHO_FLOOR) -> PhysicalChange:
    """Max-norm changes of ``(rho, V, B)`` relative to the initial fields."""
    r0, r1 = reconstruct(s0, rho_floor), reconstruct(s1, rho_floor)
    return PhysicalChange(
        _relative_change(r1.rho, r0.rho), _relative_change(r1.V, r0.V), _relative_change(r1.B, r0.B)
    )


SATURATION_FLOOR = 1e-12


@dataclass
class FlowConvergence:
    """Finite-flow errors for a ladder of substep counts.

    ``changes`` are the changes of the physical fields from the initial state.
    ``increments`` are the changes between neighbouring substep counts; they
    isolate the integrator error from any part of the change that the substep
    count does not control.  ``order`` comes from the increments and is
    ``None`` (saturated) when they sit at the rounding floor.
    """

    substeps: list[int]
    changes: list[float]
    increments: list[float]
    order: float | None
    saturated: bool


def _fields_distance(a: Reconstruction, b: Reconstruction) -> float:
    return max(_relative_change(a.rho, b.rho), _relative_change(a.V, b.V), _relative_change(a.B, b.B))


def flow_convergence(s: ClebschState, g: GaugeGenerator, epsilon: float = 0.1,
                     substeps: tuple[int, ...] = (5, 10, 20), rho_floor: float = RHO_FLOOR,
                     floor: float = SATURATION_FLOOR) -> FlowConvergence:
    """Order of the finite-flow integration error as the substep count grows."""
    substeps = sorted(int(n) for n in substeps)
    if len(substeps) < 3:
        raise ValueError("need at least three substep counts")
    r0 = reconstruct(s, rho_floor)
    finals = [reconstruct(flow(s, g, epsilon, n, rho_floor), rho_floor) for n in substeps]
    changes = [_fields_distance(r, r0) for r in finals]
    increments = [_fields_distance(a, b) for a, b in zip(finals, finals[1:])]
    if max(increments) < floor:
        return FlowConvergence(substeps, changes, increments, None, True)
    slope = np.polyfit(np.log(substeps[1:]), np.log(np.maximum(increments, 1e-300)), 1)[0]
    return FlowConvergence(substeps, changes, increments, float(-slope), False)


# -- action variation and Noether charges -------------------------------------------


def noether_charge(s: ClebschState, g: GaugeGenerator, rho_floor: float = RHO_FLOOR) -> float:
    """``int (rho dphi0 + mu.dalpha + beta.dphi - Lambda0)``."""
    r = reconstruct(s, rho_floor)
    du = gauge_velocity(s, g, rho_floor, r)
    pairing = np.sum(s.p * du.q, axis=0)
    return sp.integrate(s.grid, pairing - lambda0_density(s, g, r))


def _lambda0_rate(s: ClebschState, sdot: ClebschTangent, g: GaugeGenerator, r: Reconstruction,
                  lin: Linearization) -> list[np.ndarray]:
    """Terms of ``d/dt Lambda0`` by the chain rule along ``sdot``."""
    kind = g.kind
    if kind in (GaugeKind.MASS, GaugeKind.GENERALIZED_MASS):
        return []
    dAB = [sp.dot(lin.d_A, r.B), sp.dot(r.A, lin.d_B)]
    if kind is GaugeKind.MAGNETIC_HELICITY:
        return [-t for t in dAB]
    if kind is GaugeKind.CROSS_HELICITY:
        d_Vp = lin.d_V + sp.grad(s.grid, sdot.phi0)
        return [-sp.dot(d_Vp, r.B), -sp.dot(primed_velocity(r), lin.d_B)]
    AB = sp.dot(r.A, r.B)
    if kind is GaugeKind.GENERALIZED_HELICITY:
        f, f1, f2 = g.weight(r.sigma, s.phi)
        df = np.sum(f1 * lin.d_sigma + f2 * sdot.phi, axis=0)
        return [-df * AB] + [-f * t for t in dAB]
    return [-sdot.phi0 * AB] + [-s.phi0 * t for t in dAB]


def directional_derivative(fn, s: ClebschState, direction: ClebschTangent, h: float | None = None) -> np.ndarray:
    """Fourth-order central derivative of ``fn(state) -> array`` along ``direction``."""
    if h is None:
        h = 1e-3 * sp.max_norm(s.data) / max(sp.max_norm(direction.data), 1e-300)
    f = lambda c: fn(s.displaced(direction, c * h))  # noqa: E731
    return (8.0 * (f(1) - f(-1)) - (f(2) - f(-2))) / (12.0 * h)


@dataclass
class ActionVariation:
    """Two evaluations of ``int dL`` for a generator, their gap and a magnitude scale."""

    generator: str
    direct: float
    predicted: float
    scale: float

    @property
    def gap(self) -> float:
        return abs(self.direct - self.predicted)

    @property
    def relative_gap(self) -> float:
        return self.gap / self.scale if self.scale > 0 else self.gap


def action_variation(s: ClebschState, g: GaugeGenerator, eos: EquationOfState = EquationOfState(),
                     sdot: ClebschTangent | None = None) -> ActionVariation:
    """Compare ``int dL`` computed from the varied Lagrangian with ``d/dt int Lambda0``.

    The direct path sums ``dp.q_t + p.(dq)_t - dH`` where ``(dq)_t`` is the
    derivative of the generator along the dynamics and ``dH`` uses the
    linearized physical fields.  The predicted path differentiates ``Lambda0``
    analytically along ``sdot``.  The scale is the sum of the L1 norms of all
    contributing terms.
    """
    if sdot is None:
        sdot = canonical_rhs(s, eos)
    grid = s.grid
    r = reconstruct(s, eos.rho_floor)
    du = gauge_velocity(s, g, eos.rho_floor, r)
    du_dot = directional_derivative(lambda u: gauge_velocity(u, g, eos.rho_floor).data, s, sdot)
    du_dot = ClebschTangent(grid, du_dot)
    lin_g = linearize(s, du, r)
    direct_terms = [
        np.sum(du.p * sdot.q, axis=0),
        np.sum(s.p * du_dot.q, axis=0),
        -(enthalpy(r.rho, eos) + 0.5 * sp.dot(r.V, r.V)) * lin_g.d_rho,
        -r.rho * sp.dot(r.V, lin_g.d_V),
        -sp.dot(r.B, lin_g.d_B),
    ]
    lin_t = linearize(s, sdot, r)
    predicted_terms = _lambda0_rate(s, sdot, g, r, lin_t)
    total = lambda terms: sum(sp.integrate(grid, t) for t in terms)  # noqa: E731
    l1 = sum(sp.integrate(grid, np.abs(t)) for t in direct_terms + predicted_terms)
    return ActionVariation(g.name, total(direct_terms), total(predicted_terms), l1)


@dataclass
class ChargeDrift:
    times: list[float]
    charges: list[float]

    @property
    def max_relative_drift(self) -> float:
        c = np.asarray(self.charges)
        ref = max(abs(c[0]), 1e-300)
        return float(np.max(np.abs(c - c[0])) / ref)


def charge_conservation_probe(states, g: GaugeGenerator, rho_floor: float = RHO_FLOOR) -> ChargeDrift:
    """Noether charge of ``g`` along a sequence of states from one trajectory."""
    times, charges = [], []
    for st in states:
        times.append(st.time)
        charges.append(noether_charge(st, g, rho_floor))
    return ChargeDrift(times, charges)


# -- report -------------------------------------------------------------------------


@dataclass
class GaugeReport:
    generator: str
    epsilon: float
    substeps: int
    change: PhysicalChange
    infinitesimal: PhysicalResiduals
    action: ActionVariation
    charge_before: float
    charge_after: float
    per_substep: list[tuple[int, float, float, float]] = field(default_factory=list)
    phi0_mean_shift: float = 0.0
    final: ClebschState | None = field(default=None, repr=False, compare=False)

    def items(self) -> list[tuple[str, object]]:
        return [
            ("generator", self.generator),
            ("epsilon", self.epsilon),
            ("substeps", self.substeps),
            ("change_rho", self.change.rho),
            ("change_V", self.change.V),
            ("change_B", self.change.B),
            ("infinitesimal_rho", self.infinitesimal.rho),
            ("infinitesimal_V", self.infinitesimal.V),
            ("infinitesimal_B", self.infinitesimal.B),
            ("action_direct", self.action.direct),
            ("action_predicted", self.action.predicted),
            ("action_gap", self.action.gap),
            ("action_scale", self.action.scale),
            ("action_relative_gap", self.action.relative_gap),
            ("charge_before", self.charge_before),
            ("charge_after", self.charge_after),
            ("phi0_mean_shift", self.phi0_mean_shift),
        ]

    def to_text(self) -> str:
        return "".join(f"{k}: {v!r}\n" if isinstance(v, float) else f"{k}: {v}\n" for k, v in self.items())

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["substep", "change_rho", "change_V", "change_B"])
            for row in self.per_substep:
                w.writerow([row[0], *(repr(x) for x in row[1:])])


def gauge_report(s: ClebschState, g: GaugeGenerator, epsilon: float, substeps: int,
                 eos: EquationOfState = EquationOfState()) -> GaugeReport:
    rows = []

    def record(k, st):
        rows.append((k, *physical_change(s, st, eos.rho_floor)))

    s1 = flow(s, g, epsilon, substeps, eos.rho_floor, record)
    report = GaugeReport(
        generator=g.name,
        epsilon=float(epsilon),
        substeps=int(substeps),
        change=physical_change(s, s1, eos.rho_floor),
        infinitesimal=physical_invariance_infinitesimal(s, g, eos.rho_floor),
        action=action_variation(s, g, eos),
        charge_before=noether_charge(s, g, eos.rho_floor),
        charge_after=noether_charge(s1, g, eos.rho_floor),
        per_substep=rows,
        phi0_mean_shift=float(s1.phi0.mean() - s.phi0.mean()),
        final=s1,
    )
    for name, value in report.items():
        if isinstance(value, float) and not np.isfinite(value):
            raise sp.NonFiniteFieldError(f"gauge report entry {name} is not finite")
    return report
