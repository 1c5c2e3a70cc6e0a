"""Initial-condition recipes producing valid Clebsch states by construction.

Recipes:

* ``static``       uniform density, every other field zero.
* ``single_mode``  the closed-form configuration ``mu1 = sin x``, ``phi1 = sin y``
                   with optional ``phi0 = sin x``.
* ``random``       seeded random band-limited fields.
* ``hydro``        like ``random`` but with ``mu = 0`` (no magnetic field).

The random recipe draws ``sigma = mu/rho`` and ``b = beta/rho`` as band-limited
fields and forms ``mu = rho sigma``, ``beta = rho b``, so every canonical field
and both ratios are trigonometric polynomials.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from . import spectral as sp
from .clebsch import ClebschState
from .spectral import Grid

RECIPES = ("static", "single_mode", "random", "hydro")


@dataclass(frozen=True)
class RandomRecipe:
    """Amplitudes of the seeded random recipe.

    Each ``*_amp`` is the max-norm of the zero-mean fluctuation; ``sigma_mean``
    and ``rho_mean`` set the backgrounds.  With ``solenoidal`` set, ``phi0`` is
    replaced by the potential that makes the initial velocity divergence-free,
    which keeps the start free of compressive (acoustic) motion.
    """

    mode_cap: int = 1
    rho_mean: float = 1.0
    rho_amp: float = 0.05
    phi0_amp: float = 0.1
    alpha_amp: float = 0.3
    sigma_mean: tuple[float, float, float] = (0.5, -0.3, 0.2)
    sigma_amp: float = 0.3
    phi_amp: float = 0.3
    b_amp: float = 0.1
    solenoidal: bool = False
    seed: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


def band_limited(grid: Grid, rng: np.random.Generator, mode_cap: int, amplitude: float = 1.0,
                 count: int | None = None) -> np.ndarray:
    """Random real zero-mean trigonometric polynomial with ``|k_i| <= mode_cap``.

    Normalized so that the max-norm equals ``amplitude``.  With ``count`` set, a
    stack of that many independent fields is returned.
    """
    if count is not None:
        return np.stack([band_limited(grid, rng, mode_cap, amplitude) for _ in range(count)])
    if mode_cap < 1 or 3 * mode_cap > min(grid.shape) // 2 * 2:
        raise ValueError(f"mode_cap {mode_cap} unsuitable for grid {grid.shape}")
    ix, iy, iz = grid._index
    inside = (np.abs(ix) <= mode_cap) & (np.abs(iy) <= mode_cap) & (np.abs(iz) <= mode_cap)
    shape_hat = (grid.n_x, grid.n_y, grid.n_z // 2 + 1)
    coeffs = rng.standard_normal(shape_hat) + 1j * rng.standard_normal(shape_hat)
    coeffs = np.where(inside, coeffs, 0.0)
    coeffs[0, 0, 0] = 0.0
    f = sp.ifft(coeffs, grid)
    peak = np.max(np.abs(f))
    return f * (amplitude / peak) if peak > 0 else f


def static_state(grid: Grid, rho0: float = 1.0) -> ClebschState:
    return ClebschState.from_fields(grid, rho=np.full(grid.shape, float(rho0)))


def single_mode_state(grid: Grid, with_phi0: bool = False) -> ClebschState:
    """``rho = 1``, ``mu1 = sin x``, ``phi1 = sin y`` (B = (0, 0, cos x cos y))."""
    x, y, _ = grid.coordinates()
    kx = 2 * np.pi / grid.L_x
    ky = 2 * np.pi / grid.L_y
    mu = np.zeros((3, *grid.shape))
    phi = np.zeros((3, *grid.shape))
    mu[0] = np.sin(kx * x)
    phi[0] = np.sin(ky * y)
    phi0 = np.sin(kx * x) if with_phi0 else None
    return ClebschState.from_fields(grid, phi0=phi0, rho=np.ones(grid.shape), mu=mu, phi=phi)


def random_state(grid: Grid, recipe: RandomRecipe = RandomRecipe(), magnetic: bool = True) -> ClebschState:
    rng = np.random.default_rng(recipe.seed)
    cap = recipe.mode_cap
    rho = recipe.rho_mean * (1.0 + band_limited(grid, rng, cap, recipe.rho_amp))
    phi0 = band_limited(grid, rng, cap, recipe.phi0_amp)
    alpha = band_limited(grid, rng, cap, recipe.alpha_amp, count=3)
    sigma = np.asarray(recipe.sigma_mean)[:, None, None, None] + band_limited(grid, rng, cap, recipe.sigma_amp, count=3)
    phi = band_limited(grid, rng, cap, recipe.phi_amp, count=3)
    b = band_limited(grid, rng, cap, recipe.b_amp, count=3)
    mu = rho * sigma if magnetic else np.zeros_like(sigma)
    if recipe.solenoidal:
        sig = sigma if magnetic else np.zeros_like(sigma)
        W = np.sum(sig[:, None] * sp.grad(grid, alpha) + b[:, None] * sp.grad(grid, phi), axis=0)
        phi0 = -sp.ifft(sp.fft(sp.div(grid, W)) * -grid.inverse_k_squared, grid)
    return ClebschState.from_fields(grid, phi0=phi0, rho=rho, alpha=alpha, mu=mu, phi=phi, beta=rho * b)


def hydro_state(grid: Grid, recipe: RandomRecipe = RandomRecipe()) -> ClebschState:
    return random_state(grid, recipe, magnetic=False)


def build(name: str, grid: Grid, params: dict | None = None) -> ClebschState:
    params = dict(params or {})
    if name == "static":
        return static_state(grid, params.get("rho0", 1.0))
    if name == "single_mode":
        return single_mode_state(grid, bool(params.get("with_phi0", False)))
    if name in ("random", "hydro"):
        if "sigma_mean" in params:
            params["sigma_mean"] = tuple(params["sigma_mean"])
        recipe = RandomRecipe(**params)
        return random_state(grid, recipe, magnetic=(name == "random"))
    raise ValueError(f"unknown recipe {name!r}; choose from {RECIPES}")
