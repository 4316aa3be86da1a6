"""Exact soliton and breather solutions of mKdV and their partial derivatives.

Solitons are ``kappa * Q_c(x - x0 - c t)`` with ``Q_c(y) = sqrt(2c) sech(sqrt(c) y)``.
Breathers are ``2 sqrt(2) d/dx arctan(g)`` with
``g = (beta/alpha) sin(alpha y1) / cosh(beta y2)``, ``y1 = x + delta t + x1``,
``y2 = x + gamma t + x2``.

All derivatives (in x, t, the breather phases and the soliton scale) are
evaluated in closed form from Taylor jets, so no finite differences or
spectral differentiation enter the exact profiles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import comb, sqrt
from typing import Iterable, Sequence, Union

import numpy as np

from .grid import Field, PeriodicGrid

SQRT2 = sqrt(2.0)


# ---------------------------------------------------------------------------
# parameter records
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SolitonParams:
    c: float
    kappa: int = 1
    x0: float = 0.0

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise ValueError(f"soliton scale must be positive, got c={self.c}")
        if self.kappa not in (-1, 1):
            raise ValueError(f"kappa must be +1 or -1, got {self.kappa}")

    @property
    def velocity(self) -> float:
        return float(self.c)

    @property
    def a(self) -> float:
        return 0.0

    @property
    def b(self) -> float:
        return sqrt(self.c)

    def center(self, t: float) -> float:
        return self.x0 + self.c * t


@dataclass(frozen=True)
class BreatherParams:
    alpha: float
    beta: float
    x1: float = 0.0
    x2: float = 0.0

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"alpha, beta must be positive, got {self.alpha}, {self.beta}")

    @property
    def delta(self) -> float:
        return self.alpha**2 - 3 * self.beta**2

    @property
    def gamma(self) -> float:
        return 3 * self.alpha**2 - self.beta**2

    @property
    def velocity(self) -> float:
        return self.beta**2 - 3 * self.alpha**2

    @property
    def a(self) -> float:
        return float(self.alpha)

    @property
    def b(self) -> float:
        return float(self.beta)

    def center(self, t: float) -> float:
        return -self.x2 + self.velocity * t


Profile = Union[SolitonParams, BreatherParams]


@dataclass(frozen=True)
class ProfileSet:
    """Solitons and breathers sorted by increasing velocity."""

    objects: tuple
    velocities: tuple = field(init=False)

    def __post_init__(self) -> None:
        for p in self.objects:
            if not isinstance(p, (SolitonParams, BreatherParams)):
                raise TypeError(f"unknown profile object {p!r}")
        objs = tuple(sorted(self.objects, key=lambda p: p.velocity))
        vs = tuple(float(p.velocity) for p in objs)
        for i in range(len(vs) - 1):
            if np.isclose(vs[i], vs[i + 1], rtol=0.0, atol=1e-12):
                raise ValueError(
                    f"velocities must be distinct: {objs[i]!r} and {objs[i + 1]!r} "
                    f"both move at {vs[i]}"
                )
        object.__setattr__(self, "objects", objs)
        object.__setattr__(self, "velocities", vs)

    def __len__(self) -> int:
        return len(self.objects)

    def __iter__(self):
        return iter(self.objects)

    def __getitem__(self, j):
        return self.objects[j]

    @property
    def beta_min(self) -> float:
        return min(p.b for p in self.objects)

    @property
    def tau(self) -> float:
        if len(self.velocities) < 2:
            return float("inf")
        return float(np.min(np.diff(self.velocities)))

    @property
    def theta(self) -> float:
        return self.beta_min * self.tau / 32

    @property
    def a(self) -> list[float]:
        return [p.a for p in self.objects]

    @property
    def b(self) -> list[float]:
        return [p.b for p in self.objects]

    def centers(self, t: float) -> list[float]:
        return [p.center(t) for p in self.objects]

    @property
    def solitons(self) -> list[int]:
        return [j for j, p in enumerate(self.objects) if isinstance(p, SolitonParams)]

    @property
    def breathers(self) -> list[int]:
        return [j for j, p in enumerate(self.objects) if isinstance(p, BreatherParams)]


def make_profile_set(objects: Iterable[Profile]) -> ProfileSet:
    return ProfileSet(tuple(objects))


def derived_constants(ps: ProfileSet):
    """Return ``(velocities, beta_min, tau, theta)``."""
    return list(ps.velocities), ps.beta_min, ps.tau, ps.theta


# ---------------------------------------------------------------------------
# jets
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _sech_polys(n: int) -> tuple:
    """Coefficients of P_m(T) with d^m/dz^m sech z = sech z * P_m(tanh z)."""
    polys = [np.array([1.0])]
    for _ in range(n):
        p = polys[-1]
        # P_{m+1} = -T P_m + (1 - T^2) P_m'
        dp = np.polynomial.polynomial.polyder(p) if len(p) > 1 else np.array([0.0])
        a = np.polynomial.polynomial.polymul([0.0, -1.0], p)
        b = np.polynomial.polynomial.polymul([1.0, 0.0, -1.0], dp)
        polys.append(np.polynomial.polynomial.polyadd(a, b))
    return tuple(polys)


def _sech_tanh(z: np.ndarray):
    az = np.abs(z)
    e = np.exp(-2 * az)
    h = 2 * np.exp(-az) / (1 + e)
    return h, np.tanh(z)


def sech_jet(z: np.ndarray, n: int) -> list[np.ndarray]:
    """``[d^m/dz^m sech(z) for m = 0..n]``."""
    h, T = _sech_tanh(np.asarray(z, dtype=float))
    return [h * np.polynomial.polynomial.polyval(T, p) for p in _sech_polys(n)]


def soliton_y_jet(c: float, y: np.ndarray, n: int) -> list[np.ndarray]:
    """``[d^m/dy^m Q_c(y) for m = 0..n]``."""
    rc = sqrt(c)
    sj = sech_jet(rc * y, n)
    return [sqrt(2 * c) * rc**m * sj[m] for m in range(n + 1)]


def soliton_c_derivatives(c: float, y: np.ndarray) -> dict:
    """Derivatives of ``Q_c(y)`` in scale and position at fixed ``y``.

    Keys are ``(i, m)`` meaning ``d^i/dc^i d^m/dy^m``; available for
    ``i + m <= 2`` plus ``(1, 2)`` and ``(2, 1)``.
    """
    q = soliton_y_jet(c, y, 3)
    out = {(0, m): q[m] for m in range(3)}
    # dQ/dc = (Q + y Q_y) / 2c, so d^m/dy^m of it is ((m+1) Q^(m) + y Q^(m+1)) / 2c
    for m in range(3):
        out[(1, m)] = ((m + 1) * q[m] + y * q[m + 1]) / (2 * c)
    out[(2, 0)] = (-q[0] + y * q[1] + y**2 * q[2]) / (4 * c * c)
    out[(2, 1)] = (3 * y * q[2] + y**2 * q[3]) / (4 * c * c)
    return out


def _breather_jet(p: BreatherParams, t: float, x: np.ndarray, n: int) -> np.ndarray:
    """Array ``J[a, b]`` of ``d1^a d2^b B`` for ``a + b <= n``, shape (n+1, n+1, len(x))."""
    al, be = p.alpha, p.beta
    y1 = x + p.delta * t + p.x1
    y2 = x + p.gamma * t + p.x2
    m = n + 1  # g is needed one order higher than B
    s = [al**a * np.sin(al * y1 + a * np.pi / 2) for a in range(m + 1)]
    hj = sech_jet(be * y2, m)
    h = [be**b * hj[b] for b in range(m + 1)]
    g = np.zeros((m + 1, m + 1, x.size))
    for a in range(m + 1):
        for b in range(m + 1 - a):
            g[a, b] = (be / al) * s[a] * h[b]
    # u = 1 + g^2
    u = np.zeros_like(g)
    for a in range(m + 1):
        for b in range(m + 1 - a):
            acc = np.zeros(x.size)
            for i in range(a + 1):
                for j in range(b + 1):
                    acc += comb(a, i) * comb(b, j) * g[i, j] * g[a - i, b - j]
            u[a, b] = acc
    u[0, 0] += 1.0
    # w = 1/u by the Leibniz recursion
    w = np.zeros((n + 1, n + 1, x.size))
    w[0, 0] = 1.0 / u[0, 0]
    for tot in range(1, n + 1):
        for a in range(tot + 1):
            b = tot - a
            acc = np.zeros(x.size)
            for i in range(a + 1):
                for j in range(b + 1):
                    if i == 0 and j == 0:
                        continue
                    acc += comb(a, i) * comb(b, j) * u[i, j] * w[a - i, b - j]
            w[a, b] = -acc * w[0, 0]
    out = np.zeros((n + 1, n + 1, x.size))
    for a in range(n + 1):
        for b in range(n + 1 - a):
            acc = np.zeros(x.size)
            for i in range(a + 1):
                for j in range(b + 1):
                    gsum = g[i + 1, j] + g[i, j + 1]
                    acc += comb(a, i) * comb(b, j) * gsum * w[a - i, b - j]
            out[a, b] = 2 * SQRT2 * acc
    return out


def _expand(xo: int, to: int, extra: tuple, delta: float, gamma: float) -> dict:
    """Coefficients of (d1 + d2)^xo (delta d1 + gamma d2)^to d1^e1 d2^e2."""
    poly = {(extra[0], extra[1]): 1.0}

    def mul(poly, c1, c2):
        out: dict = {}
        for (a, b), v in poly.items():
            out[(a + 1, b)] = out.get((a + 1, b), 0.0) + v * c1
            out[(a, b + 1)] = out.get((a, b + 1), 0.0) + v * c2
        return out

    for _ in range(xo):
        poly = mul(poly, 1.0, 1.0)
    for _ in range(to):
        poly = mul(poly, delta, gamma)
    return poly


_WHICH = {"value": (0, 0), "d_x1": (1, 0), "d_x2": (0, 1)}


def breather_partial(
    p: BreatherParams,
    t: float,
    x: np.ndarray,
    x_order: int = 0,
    t_order: int = 0,
    phase: tuple = (0, 0),
) -> np.ndarray:
    """``d_x^x_order d_t^t_order d_x1^phase[0] d_x2^phase[1] B`` sampled at ``x``."""
    x = np.asarray(x, dtype=float)
    poly = _expand(x_order, t_order, tuple(phase), p.delta, p.gamma)
    n = x_order + t_order + sum(phase)
    J = _breather_jet(p, t, x, n)
    out = np.zeros(x.size)
    for (a, b), coef in poly.items():
        if coef != 0.0:
            out += coef * J[a, b]
    return out


def soliton_partial(
    p: SolitonParams,
    t: float,
    x: np.ndarray,
    x_order: int = 0,
    t_order: int = 0,
) -> np.ndarray:
    """``kappa d_x^x_order d_t^t_order Q_c(x - x0 - c t)``; ``d_t = -c d_x``."""
    y = np.asarray(x, dtype=float) - p.x0 - p.c * t
    n = x_order + t_order
    q = soliton_y_jet(p.c, y, n)[n]
    return p.kappa * (-p.c) ** t_order * q


# ---------------------------------------------------------------------------
# Field-level evaluation
# ---------------------------------------------------------------------------


def eval_soliton(p: SolitonParams, t: float, grid: PeriodicGrid, x_order: int = 0, t_order: int = 0) -> Field:
    return Field(grid, soliton_partial(p, t, grid.x, x_order, t_order))


def eval_breather(
    p: BreatherParams,
    t: float,
    grid: PeriodicGrid,
    x_order: int = 0,
    t_order: int = 0,
    which: str = "value",
) -> Field:
    if which not in _WHICH:
        raise ValueError(f"which must be one of {sorted(_WHICH)}")
    return Field(grid, breather_partial(p, t, grid.x, x_order, t_order, _WHICH[which]))


def eval_object(p: Profile, t: float, grid: PeriodicGrid, x_order: int = 0, t_order: int = 0) -> Field:
    if isinstance(p, SolitonParams):
        return eval_soliton(p, t, grid, x_order, t_order)
    return eval_breather(p, t, grid, x_order, t_order)


def eval_profile_sum(ps: ProfileSet | Sequence[Profile], t: float, grid: PeriodicGrid, x_order: int = 0, t_order: int = 0) -> Field:
    vals = np.zeros(grid.N)
    for p in ps:
        vals += eval_object(p, t, grid, x_order, t_order).values
    return Field(grid, vals)


def kernel_basis(p: Profile, t: float, grid: PeriodicGrid) -> list[Field]:
    """Null directions of the linearized operator around a single object.

    Soliton: ``{Q_x, Q + y Q_x}``.  Breather: ``{d_x1 B, d_x2 B}``.
    """
    if isinstance(p, SolitonParams):
        y = grid.x - p.x0 - p.c * t
        q = soliton_y_jet(p.c, y, 1)
        return [Field(grid, p.kappa * q[1]), Field(grid, p.kappa * (q[0] + y * q[1]))]
    return [eval_breather(p, t, grid, which="d_x1"), eval_breather(p, t, grid, which="d_x2")]
