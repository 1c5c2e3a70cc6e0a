"""Time integration of both formulations, trajectory sampling and convergence studies."""

from __future__ import annotations

import math
import time as _time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from . import recipes
from . import spectral as sp
from .clebsch import RHS_FORMS, ClebschState, EquationOfState, canonical_rhs, reconstruct
from .invariants import GeneralizedInvariant, InvariantSeries, standard_invariants, weight_by_name
from .noncanonical import PhysicalState, casimir_values, hamiltonian, mhd_rhs
from .rk4 import rk4_step
from .spectral import Grid

FORMULATIONS = ("clebsch", "eulerian", "both")
SATURATION_FLOOR = 1e-12


class ConfigError(ValueError):
    """Invalid simulation configuration."""


class CFLWarning(UserWarning):
    pass


class SimulationAborted(RuntimeError):
    """A run stopped early; ``record`` holds every sample taken before the failure."""

    def __init__(self, step: int, cause: Exception, record: "TrajectoryRecord"):
        super().__init__(f"aborted at step {step}: {cause}")
        self.step = step
        self.cause = cause
        self.record = record


# -- configuration --------------------------------------------------------------------


@dataclass(frozen=True)
class SimulationConfig:
    """Everything needed to reproduce a run.  Serializes to and from JSON-style dicts."""

    n: tuple[int, int, int] = (16, 16, 16)
    lengths: tuple[float, float, float] = (2 * math.pi,) * 3
    gamma: float = 5.0 / 3.0
    K: float = 1.0
    rho_floor: float = 0.1
    dt: float = 1e-3
    n_steps: int = 100
    sample_every: int = 5
    recipe: str = "random"
    recipe_params: dict = field(default_factory=dict)
    formulation: str = "clebsch"
    seed: int = 0
    rhs_form: str = "variational"
    dealias: bool = False
    generalized: tuple[str, ...] = ()
    gauge_weight: str = "poly"
    cross_steps: int = 50

    def __post_init__(self):
        def fix(name, value):
            object.__setattr__(self, name, value)

        n = (self.n,) * 3 if isinstance(self.n, int) else tuple(self.n)
        lengths = (self.lengths,) * 3 if isinstance(self.lengths, (int, float)) else tuple(self.lengths)
        fix("n", tuple(int(x) for x in n))
        fix("lengths", tuple(float(x) for x in lengths))
        fix("generalized", tuple(self.generalized))
        if len(self.n) != 3 or len(self.lengths) != 3:
            raise ConfigError("n and lengths need three entries")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigError("dt must be finite and positive")
        if int(self.n_steps) != self.n_steps or self.n_steps < 0:
            raise ConfigError("n_steps must be a non-negative integer")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError("sample_every must be a positive integer")
        if self.formulation not in FORMULATIONS:
            raise ConfigError(f"formulation must be one of {FORMULATIONS}")
        if self.recipe not in recipes.RECIPES:
            raise ConfigError(f"recipe must be one of {recipes.RECIPES}")
        if int(self.cross_steps) != self.cross_steps or self.cross_steps < 1:
            raise ConfigError("cross_steps must be a positive integer")
        if self.rhs_form not in RHS_FORMS:
            raise ConfigError(f"rhs_form must be one of {RHS_FORMS}")
        try:
            self.grid()
            self.eos()
            self.invariants()
            weight_by_name(self.gauge_weight)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n"], d["lengths"], d["generalized"] = list(self.n), list(self.lengths), list(self.generalized)
        return d

    def replace(self, **changes) -> "SimulationConfig":
        return SimulationConfig.from_dict({**self.to_dict(), **changes})

    def grid(self) -> Grid:
        return Grid(*self.n, *self.lengths)

    def eos(self) -> EquationOfState:
        return EquationOfState(self.gamma, self.K, self.rho_floor)

    def invariants(self) -> tuple[GeneralizedInvariant, ...]:
        out = []
        for name in self.generalized:
            kind, _, weight = name.partition(":")
            if kind not in ("GM", "GH"):
                raise ConfigError(f"generalized invariant {name!r} must look like GM:<weight> or GH:<weight>")
            out.append(GeneralizedInvariant("mass" if kind == "GM" else "helicity", weight_by_name(weight)))
        return tuple(out)

    def initial_state(self) -> ClebschState:
        params = dict(self.recipe_params)
        if self.recipe in ("random", "hydro"):
            params["seed"] = self.seed
        try:
            return recipes.build(self.recipe, self.grid(), params)
        except TypeError as exc:
            raise ConfigError(f"bad recipe parameters: {exc}") from exc


def config_schema() -> dict:
    """JSON Schema describing :class:`SimulationConfig`."""
    triple = lambda t: {"oneOf": [{"type": t}, {"type": "array", "items": {"type": t}, "minItems": 3, "maxItems": 3}]}  # noqa: E731
    return {
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "title": "SimulationConfig",
        "type": "object",
        "additionalProperties": False,
        "properties": {
            "n": {**triple("integer"), "description": "grid points per axis (even, >= 4)", "default": 16},
            "lengths": {**triple("number"), "description": "box lengths", "default": 2 * math.pi},
            "gamma": {"type": "number", "exclusiveMinimum": 1, "default": 5 / 3},
            "K": {"type": "number", "exclusiveMinimum": 0, "default": 1.0, "description": "polytropic constant"},
            "rho_floor": {"type": "number", "exclusiveMinimum": 0, "default": 0.1},
            "dt": {"type": "number", "exclusiveMinimum": 0, "default": 1e-3},
            "n_steps": {"type": "integer", "minimum": 0, "default": 100},
            "sample_every": {"type": "integer", "minimum": 1, "default": 5},
            "recipe": {"enum": list(recipes.RECIPES), "default": "random"},
            "recipe_params": {"type": "object", "description": "recipe keyword arguments", "default": {}},
            "formulation": {"enum": list(FORMULATIONS), "default": "clebsch"},
            "seed": {"type": "integer", "default": 0},
            "rhs_form": {"enum": list(RHS_FORMS), "default": "variational"},
            "dealias": {"type": "boolean", "default": False, "description": "2/3-rule filter on stage tendencies"},
            "generalized": {
                "type": "array",
                "items": {"type": "string", "pattern": "^G[MH]:[a-z_0-9]+$"},
                "default": [],
                "description": "extra invariants, e.g. GM:sin_phi1 or GH:poly",
            },
            "gauge_weight": {"type": "string", "default": "poly",
                             "description": "weight for the generalized gauge generators in verify"},
            "cross_steps": {"type": "integer", "minimum": 1, "default": 50,
                            "description": "steps of the cross-formulation comparison in verify"},
        },
    }


# -- steppers -----------------------------------------------------------------------


def _filtered(grid: Grid, data: np.ndarray, dealias: bool) -> np.ndarray:
    return sp.ifft(sp.fft(data) * grid.dealias_mask, grid) if dealias else data


def rk4_step_clebsch(s: ClebschState, dt: float, eos: EquationOfState, form: str = "variational",
                     dealias: bool = False, time: float | None = None) -> ClebschState:
    velocity = lambda u: _filtered(u.grid, canonical_rhs(u, eos, form).data, dealias)  # noqa: E731
    return rk4_step(velocity, s, dt, s.time + dt if time is None else time)


def rk4_step_eulerian(u: PhysicalState, dt: float, eos: EquationOfState, dealias: bool = False,
                      time: float | None = None) -> PhysicalState:
    velocity = lambda v: _filtered(v.grid, mhd_rhs(v, eos).data, dealias)  # noqa: E731
    return rk4_step(velocity, u, dt, u.time + dt if time is None else time)


# -- trajectories -------------------------------------------------------------------


def eulerian_invariants(u: PhysicalState, eos: EquationOfState) -> dict[str, float]:
    return {"H": hamiltonian(u, eos), **casimir_values(u)}


def cfl_number(s: ClebschState, dt: float, eos: EquationOfState) -> float:
    """Advective estimate ``dt max|V| / min dx``.

    Wave speeds are not included, so a small value does not rule out an
    acoustic or Alfvenic step-size limit.
    """
    V = reconstruct(s, eos.rho_floor).V
    speed = float(np.max(np.sqrt(sp.dot(V, V))))
    return dt * speed / min(s.grid.spacing)


@dataclass
class TrajectoryRecord:
    config: SimulationConfig
    series: dict[str, InvariantSeries] = field(default_factory=dict)
    states: dict[str, list] = field(default_factory=dict)
    distances: list[tuple[float, float]] = field(default_factory=list)
    wall_time: float = 0.0
    cfl: float = 0.0

    @property
    def max_distance(self) -> float:
        return max((d for _, d in self.distances), default=0.0)


def physical_distance(a: PhysicalState, b: PhysicalState) -> float:
    """Largest relative max-norm difference over ``rho``, ``V`` and ``B`` (``b`` is the reference)."""
    out = 0.0
    for x, y in ((a.rho, b.rho), (a.V, b.V), (a.B, b.B)):
        ref = sp.max_norm(y)
        diff = sp.max_norm(x - y)
        out = max(out, diff / ref if ref > 0 else diff)
    return out


def simulate(config: SimulationConfig, keep_states: bool = False) -> TrajectoryRecord:
    """Run the configured formulation(s) and sample invariants every ``sample_every`` steps.

    Sample times are ``step * dt`` exactly.  On failure a :class:`SimulationAborted`
    carries the partial record.
    """
    started = _time.perf_counter()
    eos = config.eos()
    extra = config.invariants()
    s = config.initial_state()
    record = TrajectoryRecord(config)
    record.cfl = cfl_number(s, config.dt, eos)
    if record.cfl > 0.5:
        warnings.warn(f"CFL estimate {record.cfl:.3f} exceeds 0.5", CFLWarning, stacklevel=2)
    run_c = config.formulation in ("clebsch", "both")
    run_e = config.formulation in ("eulerian", "both")
    u = PhysicalState.from_clebsch(s, eos.rho_floor) if run_e else None
    if run_c:
        record.series["clebsch"] = InvariantSeries(["H", "C1", "C2", "C3", *(inv.name for inv in extra)])
        record.states["clebsch"] = []
    if run_e:
        record.series["eulerian"] = InvariantSeries(["H", "C1", "C2", "C3"])
        record.states["eulerian"] = []

    def sample(step):
        t = step * config.dt
        if run_c:
            record.series["clebsch"].append(t, standard_invariants(s, eos, extra))
            if keep_states:
                record.states["clebsch"].append(s)
        if run_e:
            record.series["eulerian"].append(t, eulerian_invariants(u, eos))
            if keep_states:
                record.states["eulerian"].append(u)
        if run_c and run_e:
            record.distances.append((t, physical_distance(PhysicalState.from_clebsch(s, eos.rho_floor, check_b=False), u)))

    step = 0
    try:
        sample(0)
        for step in range(1, config.n_steps + 1):
            t = step * config.dt
            if run_c:
                s = rk4_step_clebsch(s, config.dt, eos, config.rhs_form, config.dealias, time=t)
            if run_e:
                u = rk4_step_eulerian(u, config.dt, eos, config.dealias, time=t)
            if step % config.sample_every == 0 or step == config.n_steps:
                sample(step)
    except (sp.DensityFloorError, sp.NonFiniteFieldError, FloatingPointError) as exc:
        record.wall_time = _time.perf_counter() - started
        raise SimulationAborted(step, exc, record) from exc
    record.wall_time = _time.perf_counter() - started
    return record


@dataclass
class CrossFormulationReport:
    times: list[float]
    distances: list[float]
    discrepancy: np.ndarray  # reconstructed Clebsch fields minus Eulerian fields at the final time

    @property
    def max_distance(self) -> float:
        return max(self.distances, default=0.0)


def cross_formulation_check(config: SimulationConfig) -> CrossFormulationReport:
    """Distance between the reconstructed Clebsch trajectory and the direct Eulerian one."""
    if config.formulation != "both":
        config = config.replace(formulation="both")
    rec = simulate(config, keep_states=True)
    eos = config.eos()
    c, e = rec.states["clebsch"][-1], rec.states["eulerian"][-1]
    gap = PhysicalState.from_clebsch(c, eos.rho_floor, check_b=False).data - e.data
    return CrossFormulationReport([t for t, _ in rec.distances], [d for _, d in rec.distances], gap)


@dataclass
class CrossConvergenceReport:
    """Cross-formulation discrepancy along a step-size ladder at a fixed horizon.

    ``distances`` are the final-time relative distances.  ``increments`` are the
    relative sizes of the change in the discrepancy field between neighbouring
    step sizes; they isolate the part of the discrepancy that the step size
    controls from the part set by the spatial truncation.
    """

    dt_list: list[float]
    distances: list[float]
    increments: list[float]

    @property
    def distance_ratios(self) -> list[float]:
        return [a / b if b > 0 else float("inf") for a, b in zip(self.distances, self.distances[1:])]

    @property
    def increment_ratios(self) -> list[float]:
        return [a / b if b > 0 else float("inf") for a, b in zip(self.increments, self.increments[1:])]


def _relative_fields(grid: Grid, diff: np.ndarray, ref: PhysicalState) -> float:
    d = PhysicalState(grid, ref.data + diff, check_b=False)
    return physical_distance(d, ref)


def cross_formulation_convergence(config: SimulationConfig, dt_list=None) -> CrossConvergenceReport:
    """Run :func:`cross_formulation_check` at ``2 dt``, ``dt``, ``dt/2`` over ``n_steps * dt``."""
    if dt_list is None:
        dt_list = (2 * config.dt, config.dt, config.dt / 2)
    dt_list = sorted((float(d) for d in dt_list), reverse=True)
    horizon = config.n_steps * config.dt
    reports = []
    reference = None
    for dt in dt_list:
        steps = horizon / dt
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError(f"dt {dt} does not divide the horizon {horizon}")
        steps = int(round(steps))
        cfg = config.replace(dt=dt, n_steps=steps, sample_every=steps, formulation="both")
        reports.append(cross_formulation_check(cfg))
        if reference is None:
            rec = simulate(cfg.replace(formulation="eulerian"), keep_states=True)
            reference = rec.states["eulerian"][-1]
    grid = config.grid()
    increments = [_relative_fields(grid, a.discrepancy - b.discrepancy, reference)
                  for a, b in zip(reports, reports[1:])]
    return CrossConvergenceReport(dt_list, [r.distances[-1] for r in reports], increments)


# -- convergence --------------------------------------------------------------------


@dataclass
class ConvergenceReport:
    """Per-invariant drift ladder and convergence orders.

    ``orders`` is the observed order from successive trajectory differences,
    ``max|I_2h(t) - I_h(t)|``, which cancels any drift that does not depend on
    the step size (the spatial truncation floor).  ``drift_slopes`` is the plain
    least-squares slope of the maximum drift against ``dt``.  ``None`` marks an
    invariant whose differences sit at the rounding floor.
    """

    dt_list: list[float]
    drifts: dict[str, list[float]]
    differences: dict[str, list[float]]
    orders: dict[str, float | None]
    drift_slopes: dict[str, float | None]

    @property
    def saturated(self) -> list[str]:
        return [k for k, v in self.orders.items() if v is None]


def fit_order(dt_list, errors, floor: float = SATURATION_FLOOR) -> float | None:
    """Least-squares slope of ``log(error)`` against ``log(dt)``; ``None`` at the rounding floor."""
    errors = np.asarray(errors, dtype=float)
    if np.all(errors <= floor):
        return None
    return float(np.polyfit(np.log(dt_list), np.log(np.maximum(errors, 1e-300)), 1)[0])


def convergence_study(config: SimulationConfig, dt_list=(2e-3, 1e-3, 5e-4),
                      floor: float = SATURATION_FLOOR) -> ConvergenceReport:
    """Invariant drift over a fixed horizon for each step size, and its order.

    The horizon is ``config.n_steps * config.dt`` and every run samples the same
    physical times, so the runs can be compared sample by sample.
    """
    dt_list = sorted((float(d) for d in dt_list), reverse=True)
    if len(dt_list) < 3:
        raise ValueError("need at least three step sizes")
    horizon = config.n_steps * config.dt
    # sample on a common set of times that the coarsest step size can reach
    interval = max(1, round(config.sample_every * config.dt / dt_list[0])) * dt_list[0]
    runs = []
    for dt in dt_list:
        steps, every = horizon / dt, interval / dt
        if abs(steps - round(steps)) > 1e-9 or abs(every - round(every)) > 1e-9:
            raise ValueError(f"dt {dt} does not divide the horizon {horizon} and sample interval {interval}")
        cfg = config.replace(dt=dt, n_steps=int(round(steps)), sample_every=int(round(every)),
                             formulation="clebsch")
        runs.append(simulate(cfg).series["clebsch"])
    names = runs[0].names
    drifts = {n: [r.max_drift()[n] for r in runs] for n in names}
    differences = {}
    for n in names:
        scale = max(abs(runs[0].column(n)[0]), 1e-300)
        differences[n] = [float(np.max(np.abs(a.column(n) - b.column(n)))) / scale
                          for a, b in zip(runs, runs[1:])]
    orders = {n: fit_order(dt_list[:-1], differences[n], floor) for n in names}
    slopes = {n: fit_order(dt_list, drifts[n], floor) for n in names}
    return ConvergenceReport(dt_list, drifts, differences, orders, slopes)
