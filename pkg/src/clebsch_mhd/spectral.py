"""Fourier pseudo-spectral field algebra on a uniform periodic 3-D grid.

Scalar fields are real arrays of shape ``grid.shape``; vector fields are
arrays of shape ``(3, *grid.shape)``.  All derivatives are taken in Fourier
space with the Nyquist wavenumber zeroed, so the discrete operators are real,
skew-adjoint and satisfy ``curl grad = 0`` and ``div curl = 0`` exactly in
exact arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

TWO_PI = 2.0 * np.pi


class GridMismatchError(ValueError):
    pass


class NonFiniteFieldError(ValueError):
    pass


class InadmissibleFieldError(ValueError):
    """Raised when a magnetic field is not divergence- or mean-free."""


class DensityFloorError(ArithmeticError):
    """Raised when a density divisor drops below the configured floor."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``[0, L_x) x [0, L_y) x [0, L_z)``."""

    n_x: int
    n_y: int
    n_z: int
    L_x: float = TWO_PI
    L_y: float = TWO_PI
    L_z: float = TWO_PI

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_z"):
            n = getattr(self, name)
            if int(n) != n or n < 4 or n % 2:
                raise ValueError(f"{name} must be an even integer >= 4, got {n!r}")
        for name in ("L_x", "L_y", "L_z"):
            if not (np.isfinite(getattr(self, name)) and getattr(self, name) > 0):
                raise ValueError(f"{name} must be strictly positive")

    @classmethod
    def cube(cls, n: int, length: float = TWO_PI) -> "Grid":
        return cls(n, n, n, length, length, length)

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.n_x, self.n_y, self.n_z)

    @property
    def lengths(self) -> tuple[float, float, float]:
        return (self.L_x, self.L_y, self.L_z)

    @property
    def volume(self) -> float:
        return self.L_x * self.L_y * self.L_z

    @property
    def spacing(self) -> tuple[float, float, float]:
        return tuple(L / n for L, n in zip(self.lengths, self.shape))

    def coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Meshgrid of node coordinates, ``indexing='ij'``."""
        axes = [np.arange(n) * (L / n) for n, L in zip(self.shape, self.lengths)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    # -- spectral tables (rfftn layout: last axis halved) ---------------------

    @cached_property
    def _index(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ix = np.fft.fftfreq(self.n_x, 1.0 / self.n_x)
        iy = np.fft.fftfreq(self.n_y, 1.0 / self.n_y)
        iz = np.fft.rfftfreq(self.n_z, 1.0 / self.n_z)
        return ix[:, None, None], iy[None, :, None], iz[None, None, :]

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Derivative wavenumbers with the Nyquist entries set to zero."""
        out = []
        for idx, n, L in zip(self._index, self.shape, self.lengths):
            k = idx * (TWO_PI / L)
            out.append(np.where(np.abs(idx) == n // 2, 0.0, k))
        return tuple(out)

    @cached_property
    def k_squared(self) -> np.ndarray:
        kx, ky, kz = self.wavenumbers
        return kx**2 + ky**2 + kz**2

    @cached_property
    def inverse_k_squared(self) -> np.ndarray:
        k2 = self.k_squared
        with np.errstate(divide="ignore"):
            inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes whose index is <= 2/3 of Nyquist on every axis."""
        keep = np.ones(1, dtype=bool)
        for idx, n in zip(self._index, self.shape):
            keep = keep & (np.abs(idx) <= (2.0 / 3.0) * (n // 2))
        return keep

    def mode_index_max(self, f_hat: np.ndarray, tol: float = 0.0) -> int:
        """Largest per-axis mode index carrying a coefficient above ``tol``."""
        ix, iy, iz = self._index
        level = np.maximum(np.maximum(np.abs(ix), np.abs(iy)), np.abs(iz))
        mag = np.abs(f_hat)
        if mag.ndim == 4:
            mag = mag.max(axis=0)
        active = np.broadcast_to(level, mag.shape)[mag > tol]
        return int(active.max()) if active.size else 0


# -- transforms ---------------------------------------------------------------


def fft(f: np.ndarray) -> np.ndarray:
    return np.fft.rfftn(f, axes=(-3, -2, -1))


def ifft(f_hat: np.ndarray, grid: Grid) -> np.ndarray:
    return np.fft.irfftn(f_hat, s=grid.shape, axes=(-3, -2, -1))


def _check_scalar(grid: Grid, f: np.ndarray, name: str = "field") -> None:
    if f.shape[-3:] != grid.shape:
        raise GridMismatchError(f"{name} has shape {f.shape}, grid is {grid.shape}")
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError(f"{name} contains non-finite values")


def _check_vector(grid: Grid, F: np.ndarray, name: str = "field") -> None:
    if F.ndim < 4 or F.shape[-4] != 3 or F.shape[-3:] != grid.shape:
        raise GridMismatchError(f"{name} has shape {F.shape}, expected (..., 3, *{grid.shape})")
    if not np.all(np.isfinite(F)):
        raise NonFiniteFieldError(f"{name} contains non-finite values")


# -- differential operators -----------------------------------------------------
# Leading batch axes are allowed: grad maps (..., nx, ny, nz) -> (..., 3, nx, ny, nz)
# and div/curl act on the component axis just before the spatial ones.


def grad(grid: Grid, f: np.ndarray) -> np.ndarray:
    _check_scalar(grid, f)
    f_hat = fft(f)
    kx, ky, kz = grid.wavenumbers
    return ifft(np.stack([1j * kx * f_hat, 1j * ky * f_hat, 1j * kz * f_hat], axis=-4), grid)


def div(grid: Grid, F: np.ndarray) -> np.ndarray:
    _check_vector(grid, F)
    F_hat = fft(F)
    kx, ky, kz = grid.wavenumbers
    return ifft(1j * (kx * F_hat[..., 0, :, :, :] + ky * F_hat[..., 1, :, :, :] + kz * F_hat[..., 2, :, :, :]), grid)


def _curl_hat(grid: Grid, F_hat: np.ndarray) -> np.ndarray:
    kx, ky, kz = grid.wavenumbers
    fx, fy, fz = F_hat[..., 0, :, :, :], F_hat[..., 1, :, :, :], F_hat[..., 2, :, :, :]
    return 1j * np.stack([ky * fz - kz * fy, kz * fx - kx * fz, kx * fy - ky * fx], axis=-4)


def curl(grid: Grid, F: np.ndarray) -> np.ndarray:
    _check_vector(grid, F)
    return ifft(_curl_hat(grid, fft(F)), grid)


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    _check_scalar(grid, f)
    return ifft(-grid.k_squared * fft(f), grid)


def inverse_curl(grid: Grid, B: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Coulomb-gauge vector potential ``A`` with ``curl A = B``, ``div A = 0``.

    ``A_k = i k x B_k / |k|^2`` with the mean mode set to zero.  ``B`` must be
    divergence-free and mean-free to within ``tol`` relative to ``max|B|``.
    """
    _check_vector(grid, B, "B")
    if B.shape != (3, *grid.shape):
        raise GridMismatchError("inverse_curl takes a single vector field")
    scale = float(np.max(np.abs(B)))
    if scale > 0.0:
        div_b = float(np.max(np.abs(div(grid, B))))
        if div_b > tol * scale:
            raise InadmissibleFieldError(f"div B = {div_b:.3e} exceeds {tol:g} x |B| = {tol * scale:.3e}")
        means = np.abs(B.mean(axis=(1, 2, 3)))
        if np.max(means) > tol * scale:
            raise InadmissibleFieldError(f"B has nonzero volume mean {means.max():.3e}")
    A_hat = _curl_hat(grid, fft(B)) * grid.inverse_k_squared
    return ifft(A_hat, grid)


# -- quadrature and projection -------------------------------------------------


def integrate(grid: Grid, f: np.ndarray) -> float:
    """Periodic trapezoid rule, i.e. ``mean(f) * volume``."""
    _check_scalar(grid, f)
    return float(np.mean(f) * grid.volume)


def inner(grid: Grid, f: np.ndarray, g: np.ndarray) -> float:
    """L2 inner product of equally shaped stacks of scalar fields."""
    if f.shape != g.shape:
        raise GridMismatchError(f"shape mismatch {f.shape} vs {g.shape}")
    return float(np.sum(f * g) * grid.volume / np.prod(grid.shape))


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Project a scalar or vector field onto the 2/3-rule mask."""
    _check_scalar(grid, f)
    return ifft(fft(f) * grid.dealias_mask, grid)


# -- pointwise algebra -----------------------------------------------------------


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise dot product over the component axis (axis -4)."""
    return np.sum(a * b, axis=-4)


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Right-handed pointwise cross product over the component axis (axis -4)."""
    ax, ay, az = (a[..., i, :, :, :] for i in range(3))
    bx, by, bz = (b[..., i, :, :, :] for i in range(3))
    return np.stack([ay * bz - az * by, az * bx - ax * bz, ax * by - ay * bx], axis=-4)


def divide(f: np.ndarray, rho: np.ndarray, floor: float) -> np.ndarray:
    """``f / rho`` guarded by a positivity floor on ``rho``."""
    low = float(np.min(rho))
    if low < floor:
        raise DensityFloorError(f"density minimum {low:.4g} is below the floor {floor:g}")
    return f / rho


def max_norm(f: np.ndarray) -> float:
    return float(np.max(np.abs(f)))
