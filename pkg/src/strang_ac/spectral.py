"""Periodic grids, the FFT-diagonalised discrete Laplacian and the heat semigroup.

Fourier coefficients follow the normalisation

    u_j   = sum_k  uhat_k exp(2 pi i j.k / N)
    uhat_k = N^-d sum_j u_j exp(-2 pi i j.k / N)

so that ``sum_j |u_j|^2 = N^d sum_k |uhat_k|^2``.  The Laplacian is the
second-order finite-difference stencil, whose symbol is

    w_k = h^-2 * sum_axes (2 cos(2 pi k_axis / N) - 2).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform mesh with ``n`` nodes per axis on ``[0, length]^dim``."""

    n: int
    length: float
    dim: int

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n:
            raise ValueError(f"n must be an integer, got {self.n!r}")
        if self.n < 4 or self.n % 2:
            raise ValueError(f"n must be even and >= 4, got {self.n}")
        if not self.length > 0 or not np.isfinite(self.length):
            raise ValueError(f"length must be positive, got {self.length}")
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @property
    def h(self) -> float:
        return self.length / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(self.dim))

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def volume(self) -> float:
        return self.length**self.dim

    @cached_property
    def axis_nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.h

    def nodes(self) -> tuple[np.ndarray, ...]:
        """Node coordinates ``x_j = j h`` as ``indexing='ij'`` mesh arrays."""
        return tuple(np.meshgrid(*([self.axis_nodes] * self.dim), indexing="ij"))

    def _axis_symbol(self, k: np.ndarray) -> np.ndarray:
        return (2.0 * np.cos(2.0 * np.pi * k / self.n) - 2.0) / self.h**2

    @cached_property
    def symbol(self) -> np.ndarray:
        """w_k on the full ``fftn`` layout, shape ``self.shape``."""
        k = np.fft.fftfreq(self.n, d=1.0 / self.n)
        ax = self._axis_symbol(k)
        w = ax if self.dim == 1 else ax[:, None] + ax[None, :]
        w = np.array(w)
        w.flat[0] = 0.0
        w.setflags(write=False)
        return w

    @cached_property
    def half_symbol(self) -> np.ndarray:
        """w_k on the ``rfftn`` layout (last axis truncated to n//2 + 1)."""
        k_full = np.fft.fftfreq(self.n, d=1.0 / self.n)
        k_half = np.fft.rfftfreq(self.n, d=1.0 / self.n)
        last = self._axis_symbol(k_half)
        w = last if self.dim == 1 else self._axis_symbol(k_full)[:, None] + last[None, :]
        w = np.array(w)
        w.flat[0] = 0.0
        w.setflags(write=False)
        return w


def make_grid(n: int, length: float, dim: int) -> PeriodicGrid:
    return PeriodicGrid(n, length, dim)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples on a grid; the array is copied and frozen on construction."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        if values.size != self.grid.n**self.grid.dim:
            raise ValueError(
                f"expected {self.grid.n ** self.grid.dim} values, got {values.size}"
            )
        values = values.reshape(self.grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field contains non-finite values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def _wrap(cls, grid: PeriodicGrid, values: np.ndarray) -> Field:
        # Internal fast path for arrays the caller owns; skips the copy.
        obj = object.__new__(cls)
        values = np.asarray(values, dtype=np.float64).reshape(grid.shape)
        values.setflags(write=False)
        object.__setattr__(obj, "grid", grid)
        object.__setattr__(obj, "values", values)
        return obj

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def mean(self) -> float:
        return float(np.mean(self.values))

    def map(self, fn) -> Field:
        out = np.asarray(fn(self.values), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError("pointwise map produced non-finite values")
        return Field._wrap(self.grid, out)


def dft(values: np.ndarray) -> np.ndarray:
    """Fourier coefficients with the 1/N^d analysis normalisation."""
    return np.fft.fftn(values) / values.size


def apply_heat_propagator(u: Field, coeff: float) -> Field:
    """Return ``exp(coeff * Delta_h) u`` where ``coeff`` plays the role of eps^2 t."""
    if not coeff >= 0:
        raise ValueError(f"propagator coefficient must be >= 0, got {coeff}")
    if coeff == 0:
        return u
    grid = u.grid
    uh = np.fft.rfftn(u.values)
    uh *= np.exp(coeff * grid.half_symbol)
    return Field._wrap(grid, np.fft.irfftn(uh, s=grid.shape, axes=grid.axes))


def _check_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise ValueError(f"grid mismatch: {u.grid} vs {v.grid}")


def inner(u: Field, v: Field) -> float:
    _check_same_grid(u, v)
    return u.grid.cell_volume * float(np.sum(u.values * v.values))


def l2_norm(u: Field) -> float:
    return np.sqrt(inner(u, u))


def quadratic_form(u: Field, multiplier: np.ndarray) -> float:
    """``h^d N^d sum_k m_k |uhat_k|^2`` for a real multiplier symmetric in k -> -k."""
    grid = u.grid
    m = np.asarray(multiplier, dtype=np.float64)
    if m.shape != grid.shape:
        raise ValueError(f"multiplier shape {m.shape} does not match grid {grid.shape}")
    flipped = np.roll(np.flip(m), 1, axis=tuple(range(grid.dim)))
    if not np.allclose(m, flipped, rtol=1e-12, atol=1e-12 * np.max(np.abs(m), initial=0.0)):
        raise ValueError("multiplier is not symmetric under k -> -k")
    uh = dft(u.values)
    power = uh.real**2 + uh.imag**2
    return grid.cell_volume * u.values.size * float(np.sum(m * power))
