"""Periodic grid, Fourier differentiation, quadrature and Sobolev norms.

The real line is replaced by the box ``[-L/2, L/2)`` with ``N`` equispaced
points.  Everything here is a pure function of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

MAX_DERIVATIVE_ORDER = 6


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform periodic grid on ``[-L/2, L/2)``.

    Attributes
    ----------
    L : float
        Box length.
    N : int
        Number of points (even, at least 8).
    """

    L: float
    N: int
    dx: float = field(init=False)
    x: np.ndarray = field(init=False, repr=False, compare=False)
    k: np.ndarray = field(init=False, repr=False, compare=False)
    krfft: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"box length must be positive, got L={self.L}")
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ValueError(f"N must be an even integer >= 8, got N={self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "dx", self.L / self.N)
        x = -self.L / 2 + self.dx * np.arange(self.N)
        m = np.arange(-self.N // 2, self.N // 2)
        k = 2 * np.pi * m / self.L
        kr = 2 * np.pi * np.arange(self.N // 2 + 1) / self.L
        for arr in (x, k, kr):
            arr.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "krfft", kr)

    @property
    def kmax(self) -> float:
        return np.pi * self.N / self.L

    # array-level kernels; the Field wrappers below call into these

    def deriv(self, values: np.ndarray, order: int = 1, axis: int = -1) -> np.ndarray:
        """Spectral derivative of real samples along ``axis``; Nyquist mode is dropped."""
        if order == 0:
            return np.array(values, dtype=float, copy=True)
        if order < 0 or order > MAX_DERIVATIVE_ORDER:
            raise ValueError(f"derivative order must be in 1..{MAX_DERIVATIVE_ORDER}")
        fh = np.fft.rfft(values, axis=axis)
        mult = (1j * self.krfft) ** order
        mult[-1] = 0.0
        shape = [1] * fh.ndim
        shape[axis] = -1
        return np.fft.irfft(fh * mult.reshape(shape), n=self.N, axis=axis)

    def integrate(self, values: np.ndarray) -> float:
        return float(self.dx * np.sum(values))

    def sobolev_norm(self, values: np.ndarray, s: float) -> float:
        if s < 0:
            raise ValueError("Sobolev index must be non-negative")
        fh = np.fft.rfft(values)
        w = np.full(fh.shape, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        dens = w * (1.0 + self.krfft**2) ** s * np.abs(fh) ** 2
        return float(np.sqrt(self.L / self.N**2 * np.sum(dens)))

    def derivative_matrix(self, order: int) -> np.ndarray:
        """Dense matrix ``D`` with ``D @ f`` equal to ``deriv(f, order)``."""
        return self.deriv(np.eye(self.N), order, axis=0)

    def sobolev_metric(self, s: float = 2.0) -> np.ndarray:
        """Dense Gram matrix ``G`` with ``f @ G @ f == sobolev_norm(f, s)**2``."""
        eye = np.eye(self.N)
        fh = np.fft.rfft(eye, axis=0)
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        mult = (w * (1.0 + self.krfft**2) ** s)[:, None]
        g = self.L / self.N**2 * np.real(fh.conj().T @ (mult * fh))
        return 0.5 * (g + g.T)


def make_grid(L: float, N: int) -> PeriodicGrid:
    return PeriodicGrid(L, N)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a function on a :class:`PeriodicGrid`."""

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ValueError(f"expected {self.grid.N} samples, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise FloatingPointError("field contains NaN or Inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "Field":
        return cls(grid, np.zeros(grid.N))

    @classmethod
    def from_function(cls, grid: PeriodicGrid, fn) -> "Field":
        return cls(grid, fn(grid.x))

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def __pow__(self, p):
        return Field(self.grid, self.values**p)

    def __len__(self) -> int:
        return self.grid.N


def _check(f: Field) -> Field:
    if not isinstance(f, Field):
        raise TypeError("expected a Field")
    return f


def spectral_derivative(f: Field, order: int) -> Field:
    """Apply ``(ik)**order`` mode-wise; exact for band-limited ``f``."""
    _check(f)
    if order < 1:
        raise ValueError("order must be >= 1")
    return Field(f.grid, f.grid.deriv(f.values, order))


def integrate(f: Field) -> float:
    """Rectangle rule ``dx * sum(f)``, spectrally accurate for periodic integrands."""
    _check(f)
    return f.grid.integrate(f.values)


def sobolev_norm(f: Field, s: float) -> float:
    """Discrete H^s norm with multiplier ``(1 + k**2)**(s/2)``."""
    _check(f)
    return f.grid.sobolev_norm(f.values, s)
