"""Conserved functionals, weight functions and the G1/G2 advection-law machinery.

``G1`` holds scalars advected by the flow (``a_t + V.grad a = 0``) and ``G2``
holds densities obeying a continuity law (``l_t + div(l V) = 0``).  Members are
carried as :class:`Tracked` pairs ``(value, rate)`` whose rate is assembled from
a canonical tangent by the chain rule, so each closure rule can be certified
by a pointwise residual.
"""

from __future__ import annotations

import csv
import json
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from . import spectral as sp
from .clebsch import (
    RHO_FLOOR,
    ClebschState,
    ClebschTangent,
    EquationOfState,
    canonical_rhs,
    hamiltonian,
    primed_velocity,
    reconstruct,
)
from .spectral import Grid

# -- basic functionals ------------------------------------------------------------


def total_mass(grid: Grid, rho: np.ndarray) -> float:
    return sp.integrate(grid, rho)


def magnetic_helicity(grid: Grid, B: np.ndarray, A: np.ndarray | None = None) -> float:
    """``int A.B``; ``A`` defaults to the Coulomb-gauge potential of ``B``."""
    if A is None:
        A = sp.inverse_curl(grid, B)
    return sp.integrate(grid, sp.dot(A, B))


def cross_helicity(grid: Grid, V: np.ndarray, B: np.ndarray) -> float:
    return sp.integrate(grid, sp.dot(V, B))


def cross_helicity_primed(s: ClebschState, rho_floor: float = RHO_FLOOR) -> float:
    """``int V'.B`` with ``V' = V + grad phi0``."""
    r = reconstruct(s, rho_floor)
    return sp.integrate(s.grid, sp.dot(primed_velocity(r), r.B))


# -- weight functions --------------------------------------------------------------

WeightCallable = Callable[[np.ndarray, np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]


class WeightValidationError(ValueError):
    """Supplied weight derivatives disagree with finite differences."""


@dataclass(frozen=True, eq=False)
class WeightFunction:
    """A smooth weight ``f(sigma^1..3, phi^1..3)`` that carries its own derivatives.

    ``func(sigma, phi)`` takes two ``(3, ...)`` stacks and returns
    ``(f, f1, f2)`` with ``f1[l] = df/dsigma^l`` and ``f2[l] = df/dphi^l``.
    The derivatives are checked against central differences on random samples
    when the weight is created.
    """

    name: str
    func: WeightCallable
    validate: bool = True

    def __post_init__(self):
        if self.validate:
            self.check()

    def __call__(self, sigma: np.ndarray, phi: np.ndarray):
        f, f1, f2 = self.func(sigma, phi)
        shape = np.shape(sigma)[1:]
        return (
            np.broadcast_to(f, shape).astype(float),
            np.broadcast_to(f1, (3, *shape)).astype(float),
            np.broadcast_to(f2, (3, *shape)).astype(float),
        )

    def check(self, samples: int = 32, seed: int = 12345, h: float = 1e-5, rtol: float = 1e-7) -> float:
        """Largest relative mismatch between supplied and finite-difference derivatives."""
        rng = np.random.default_rng(seed)
        sigma = rng.uniform(-1.5, 1.5, (3, samples))
        phi = rng.uniform(-1.5, 1.5, (3, samples))
        f, f1, f2 = self(sigma, phi)
        supplied = np.concatenate([f1, f2])
        fd = np.empty_like(supplied)
        for i in range(6):
            bump = np.zeros((6, samples))
            bump[i] = h
            args = np.concatenate([sigma, phi])
            fp = self(*np.split(args + bump, 2))[0]
            fm = self(*np.split(args - bump, 2))[0]
            fd[i] = (fp - fm) / (2 * h)
        scale = max(float(np.max(np.abs(supplied))), float(np.max(np.abs(f))), 1.0)
        err = float(np.max(np.abs(fd - supplied))) / scale
        if err > rtol:
            raise WeightValidationError(f"weight {self.name!r}: derivative mismatch {err:.2e} > {rtol:g}")
        return err

    # -- stock weights --------------------------------------------------------

    @classmethod
    def constant(cls, c: float = 1.0) -> "WeightFunction":
        name = "one" if c == 1.0 else f"const({c:g})"
        return cls(name, lambda sigma, phi: (np.full(sigma.shape[1:], float(c)), 0.0, 0.0))

    @classmethod
    def sigma_component(cls, l: int) -> "WeightFunction":
        def func(sigma, phi):
            f1 = np.zeros_like(sigma)
            f1[l] = 1.0
            return sigma[l], f1, 0.0

        return cls(f"sigma{l + 1}", func)

    @classmethod
    def sin_phi(cls, l: int) -> "WeightFunction":
        def func(sigma, phi):
            f2 = np.zeros_like(phi)
            f2[l] = np.cos(phi[l])
            return np.sin(phi[l]), 0.0, f2

        return cls(f"sin_phi{l + 1}", func)

    @classmethod
    def bump(cls, center=(0.5, -0.3, 0.2), width: float = 0.5) -> "WeightFunction":
        """Gaussian bump in ``sigma``: a smooth stand-in for a co-moving indicator."""
        c = np.asarray(center, dtype=float).reshape(3, *([1] * 1))

        def func(sigma, phi):
            d = sigma - c.reshape((3,) + (1,) * (sigma.ndim - 1))
            f = np.exp(-np.sum(d * d, axis=0) / (2 * width**2))
            return f, -d / width**2 * f, 0.0

        return cls("bump", func)

    @classmethod
    def mixed(cls) -> "WeightFunction":
        """``cos(sigma^2) sin(phi^1) + sigma^1 phi^3``, coupling both families."""

        def func(sigma, phi):
            f = np.cos(sigma[1]) * np.sin(phi[0]) + sigma[0] * phi[2]
            f1 = np.zeros_like(sigma)
            f2 = np.zeros_like(phi)
            f1[0] = phi[2]
            f1[1] = -np.sin(sigma[1]) * np.sin(phi[0])
            f2[0] = np.cos(sigma[1]) * np.cos(phi[0])
            f2[2] = sigma[0]
            return f, f1, f2

        return cls("mixed", func)

    @classmethod
    def polynomial(cls) -> "WeightFunction":
        """``sigma^1 phi^2 + (sigma^3)^2 / 2 + phi^1``."""

        def func(sigma, phi):
            f1 = np.zeros_like(sigma)
            f2 = np.zeros_like(phi)
            f1[0] = phi[1]
            f1[2] = sigma[2]
            f2[0] = 1.0
            f2[1] = sigma[0]
            return sigma[0] * phi[1] + 0.5 * sigma[2] ** 2 + phi[0], f1, f2

        return cls("poly", func)


WEIGHTS: dict[str, Callable[[], WeightFunction]] = {
    "one": WeightFunction.constant,
    "sigma1": lambda: WeightFunction.sigma_component(0),
    "sin_phi1": lambda: WeightFunction.sin_phi(0),
    "bump": WeightFunction.bump,
    "mixed": WeightFunction.mixed,
    "poly": WeightFunction.polynomial,
}


def weight_by_name(name: str) -> WeightFunction:
    try:
        return WEIGHTS[name]()
    except KeyError:
        raise ValueError(f"unknown weight {name!r}; choose from {sorted(WEIGHTS)}") from None


def generalized_mass(s: ClebschState, f: WeightFunction, rho_floor: float = RHO_FLOOR) -> float:
    """``int rho f(sigma, phi)``."""
    sigma = sp.divide(s.mu, s.rho, rho_floor)
    return sp.integrate(s.grid, s.rho * f(sigma, s.phi)[0])


def generalized_helicity(s: ClebschState, f: WeightFunction, rho_floor: float = RHO_FLOOR) -> float:
    """``int f(sigma, phi) A.B`` with the Clebsch potential ``A``."""
    r = reconstruct(s, rho_floor)
    return sp.integrate(s.grid, f(r.sigma, s.phi)[0] * sp.dot(r.A, r.B))


@dataclass(frozen=True, eq=False)
class GeneralizedInvariant:
    kind: str  # "mass" or "helicity"
    weight: WeightFunction

    def __post_init__(self):
        if self.kind not in ("mass", "helicity"):
            raise ValueError(f"kind must be 'mass' or 'helicity', got {self.kind!r}")

    @property
    def name(self) -> str:
        return f"{'GM' if self.kind == 'mass' else 'GH'}[{self.weight.name}]"

    def __call__(self, s: ClebschState, rho_floor: float = RHO_FLOOR) -> float:
        fn = generalized_mass if self.kind == "mass" else generalized_helicity
        return fn(s, self.weight, rho_floor)


def standard_invariants(s: ClebschState, eos: EquationOfState,
                        extra: tuple[GeneralizedInvariant, ...] = ()) -> dict[str, float]:
    """``H, C1, C2, C3`` followed by any generalized invariants."""
    r = reconstruct(s, eos.rho_floor)
    g = s.grid
    out = {
        "H": hamiltonian(s, eos),
        "C1": total_mass(g, s.rho),
        "C2": magnetic_helicity(g, r.B, r.A),
        "C3": cross_helicity(g, r.V, r.B),
    }
    for inv in extra:
        out[inv.name] = inv(s, eos.rho_floor)
    return out


# -- chain-rule tracked quantities -------------------------------------------------


@dataclass(frozen=True, eq=False)
class Tracked:
    """A field together with its time derivative."""

    value: np.ndarray
    rate: np.ndarray

    def __add__(self, other):
        if isinstance(other, Tracked):
            return Tracked(self.value + other.value, self.rate + other.rate)
        return Tracked(self.value + other, self.rate)

    __radd__ = __add__

    def __neg__(self):
        return Tracked(-self.value, -self.rate)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, Tracked):
            return Tracked(self.value * other.value, self.rate * other.value + self.value * other.rate)
        return Tracked(self.value * other, self.rate * other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Tracked):
            return quotient(self, other)
        return Tracked(self.value / other, self.rate / other)


def quotient(lam: Tracked, eta: Tracked, floor: float = RHO_FLOOR) -> Tracked:
    """``lam / eta`` by the quotient rule; ``eta`` must stay above ``floor``."""
    ratio = sp.divide(lam.value, eta.value, floor)
    return Tracked(ratio, (lam.rate - ratio * eta.rate) / eta.value)


def track(s: ClebschState, sdot: ClebschTangent, rho_floor: float = RHO_FLOOR) -> dict[str, Tracked]:
    """Canonical fields and the derived ratios ``sigma^l``, ``b^l`` as tracked members.

    Keys: ``rho, phi0, alpha1..3, mu1..3, phi1..3, beta1..3, sigma1..3, b1..3``.
    """
    if s.grid != sdot.grid:
        raise sp.GridMismatchError("state and tangent live on different grids")
    out = {"phi0": Tracked(s.phi0, sdot.phi0), "rho": Tracked(s.rho, sdot.rho)}
    for l in range(3):
        for name in ("alpha", "mu", "phi", "beta"):
            out[f"{name}{l + 1}"] = Tracked(getattr(s, name)[l], getattr(sdot, name)[l])
    for l in range(1, 4):
        out[f"sigma{l}"] = quotient(out[f"mu{l}"], out["rho"], rho_floor)
        out[f"b{l}"] = quotient(out[f"beta{l}"], out["rho"], rho_floor)
    return out


def weighted(f: WeightFunction, sigma: list[Tracked], phi: list[Tracked]) -> Tracked:
    """``f(sigma, phi)`` with rate ``f1.sigma_t + f2.phi_t``."""
    sv = np.stack([t.value for t in sigma])
    pv = np.stack([t.value for t in phi])
    value, f1, f2 = f(sv, pv)
    rate = sum(f1[l] * sigma[l].rate + f2[l] * phi[l].rate for l in range(3))
    return Tracked(value, rate)


def smooth_pair(a: Tracked, b: Tracked) -> Tracked:
    """A fixed nonlinear function of two members, ``a b^2 - a^3/3 + b``.

    A polynomial keeps band-limited members band-limited, so the pointwise
    residual measures the rule rather than aliasing.
    """
    value = a.value * b.value**2 - a.value**3 / 3 + b.value
    fa = b.value**2 - a.value**2
    fb = 2 * a.value * b.value + 1.0
    return Tracked(value, fa * a.rate + fb * b.rate)


def triple_product(grid: Grid, a: Tracked, b: Tracked, c: Tracked) -> Tracked:
    """``grad a . (grad b x grad c)``, differentiated term by term."""
    ga, gb, gc = sp.grad(grid, np.stack([a.value, b.value, c.value]))
    ra, rb, rc = sp.grad(grid, np.stack([a.rate, b.rate, c.rate]))
    value = sp.dot(ga, sp.cross(gb, gc))
    rate = sp.dot(ra, sp.cross(gb, gc)) + sp.dot(ga, sp.cross(rb, gc)) + sp.dot(ga, sp.cross(gb, rc))
    return Tracked(value, rate)


def _relative(total: np.ndarray, *parts: np.ndarray) -> float:
    num = sp.max_norm(total)
    if num == 0.0:
        return 0.0
    return num / max(sp.max_norm(p) for p in parts)


def advection_residual(a: Tracked, s: ClebschState, rho_floor: float = RHO_FLOOR) -> float:
    """``max|a_t + V.grad a|`` relative to the larger of its two terms."""
    V = reconstruct(s, rho_floor).V
    transport = sp.dot(V, sp.grad(s.grid, a.value))
    return _relative(a.rate + transport, a.rate, transport)


def continuity_residual(lam: Tracked, s: ClebschState, rho_floor: float = RHO_FLOOR) -> float:
    """``max|l_t + div(l V)|`` relative to the larger of its two terms."""
    V = reconstruct(s, rho_floor).V
    flux = sp.div(s.grid, lam.value * V)
    return _relative(lam.rate + flux, lam.rate, flux)


def helicity_density(grid: Grid, members: dict[str, Tracked]) -> Tracked:
    """``A.B`` assembled as a sum of ``sigma^i`` times rule-5 triple products."""
    total = None
    for i in range(1, 4):
        phi_i = members[f"phi{i}"]
        for k in range(1, 4):
            term = members[f"sigma{i}"] * triple_product(grid, phi_i, members[f"sigma{k}"], members[f"phi{k}"])
            total = term if total is None else total + term
    return total


@dataclass
class ClosureReport:
    """Residuals of the closure rules on a consistent tangent and on a mismatched one."""

    members: dict[str, str]
    residuals: dict[str, float]
    controls: dict[str, float]

    def passed(self, tol: float = 1e-9, control_min: float = 1e-3) -> bool:
        return all(v <= tol for v in self.residuals.values()) and all(
            v >= control_min for v in self.controls.values()
        )

    def lines(self) -> list[str]:
        out = [f"{k}: residual {v:.3e} ({self.members.get(k, '')})" for k, v in self.residuals.items()]
        out += [f"{k}: control {v:.3e}" for k, v in self.controls.items()]
        return out


def mismatched_tangent(sdot: ClebschTangent) -> ClebschTangent:
    """A negative-control tangent: the true one shifted a quarter box in x."""
    shift = sdot.grid.n_x // 4
    return ClebschTangent(sdot.grid, np.roll(sdot.data, shift, axis=1))


def _rule_members(s, sdot, eos, rng, weight):
    m = track(s, sdot, eos.rho_floor)
    advected = [f"phi{l}" for l in range(1, 4)] + [f"sigma{l}" for l in range(1, 4)]
    a_name, b_name, c_name = rng.choice(advected, 3, replace=False)
    dens = ["rho", "mu1", "mu2", "mu3", "rho_f"]
    lam_name, eta_name = rng.choice(dens, 2, replace=False)
    sigma = [m[f"sigma{l}"] for l in range(1, 4)]
    phi = [m[f"phi{l}"] for l in range(1, 4)]
    m["rho_f"] = m["rho"] * weighted(weight, sigma, phi)
    coeffs = rng.uniform(-2.0, 2.0, 2)
    g = s.grid
    a, b, c, lam, eta = m[a_name], m[b_name], m[c_name], m[lam_name], m[eta_name]
    # the quotient needs a strictly positive denominator, so rho always takes that role
    num_name = lam_name if lam_name != "rho" else eta_name
    quantities = {
        "rule1": ("G2", coeffs[0] * lam + coeffs[1] * eta, f"{coeffs[0]:.3f} {lam_name} + {coeffs[1]:.3f} {eta_name}"),
        "rule2": ("G1", smooth_pair(a, b), f"f({a_name}, {b_name})"),
        "rule3": ("G1", quotient(m[num_name], m["rho"], eos.rho_floor), f"{num_name} / rho"),
        "rule4": ("G2", a * lam, f"{a_name} {lam_name}"),
        "rule5": ("G2", triple_product(g, a, b, c), f"grad {a_name} . (grad {b_name} x grad {c_name})"),
        "A.B": ("G2", helicity_density(g, m), "sum_ik sigma^i grad phi^i . (grad sigma^k x grad phi^k)"),
    }
    return quantities


def rule_closure_suite(s: ClebschState, eos: EquationOfState = EquationOfState(),
                       sdot: ClebschTangent | None = None, seed: int = 0,
                       weight: WeightFunction | None = None) -> ClosureReport:
    """Certify the five closure rules (and ``A.B`` in G2) on randomly chosen members."""
    if sdot is None:
        sdot = canonical_rhs(s, eos)
    weight = weight or WeightFunction.polynomial()
    members, residuals, controls = {}, {}, {}
    for tangent, sink in ((sdot, residuals), (mismatched_tangent(sdot), controls)):
        quantities = _rule_members(s, tangent, eos, np.random.default_rng(seed), weight)
        for key, (family, q, desc) in quantities.items():
            fn = advection_residual if family == "G1" else continuity_residual
            sink[key] = fn(q, s, eos.rho_floor)
            members[key] = f"{family}: {desc}"
    return ClosureReport(members, residuals, controls)


# -- time series --------------------------------------------------------------------


@dataclass
class InvariantSeries:
    """Sampled invariant values along a trajectory."""

    names: list[str]
    times: list[float] = field(default_factory=list)
    values: list[list[float]] = field(default_factory=list)
    floor: float = 1e-300

    def append(self, time: float, sample: dict[str, float]) -> None:
        if self.times and not time > self.times[-1]:
            raise ValueError(f"time {time!r} does not increase past {self.times[-1]!r}")
        row = [float(sample[n]) for n in self.names]
        if not all(np.isfinite(row)):
            raise sp.NonFiniteFieldError(f"non-finite invariant at t={time}")
        self.times.append(float(time))
        self.values.append(row)

    def __len__(self) -> int:
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.array([row[self.names.index(name)] for row in self.values])

    def drift(self, name: str) -> np.ndarray:
        """``|value - value0| / max(|value0|, floor)`` at each sample."""
        col = self.column(name)
        return np.abs(col - col[0]) / max(abs(col[0]), self.floor)

    def max_drift(self) -> dict[str, float]:
        return {n: float(np.max(self.drift(n))) for n in self.names}

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", *self.names])
            for t, row in zip(self.times, self.values):
                w.writerow([repr(t), *(repr(v) for v in row)])

    def write_drift_report(self, path) -> None:
        report = {
            "initial": dict(zip(self.names, self.values[0])) if self.values else {},
            "max_relative_drift": self.max_drift() if self.values else {},
            "samples": len(self),
        }
        with open(path, "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
