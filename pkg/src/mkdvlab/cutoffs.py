"""Moving cutoff functions that isolate one object of a profile set.

Two families are provided:

* ``phi``: built from the compact transition ``psi``, which rises from 0 at
  ``x = -1`` to 1 at ``x = 1``.  The transitions sit at the mean velocities
  ``sigma_j = (v_{j-1} + v_j) / 2`` and widen linearly in time (width
  ``delta * t``), so ``sum_j phi_j == 1``.
* ``Phi``: the smooth step ``Psi(x) = (2/pi) arctan(exp(-sqrt(sigma) x / 2))``
  translated to the midpoints ``m_j``; ``chi_j = Phi_{j+1} - Phi_j``.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, pi, sqrt
from typing import Optional, Sequence

import numpy as np

from .grid import PeriodicGrid
from .profiles import ProfileSet


# ---------------------------------------------------------------------------
# compact transition psi
# ---------------------------------------------------------------------------


def _psi_jet(x: np.ndarray, n: int) -> list[np.ndarray]:
    """``[psi, psi', ..., psi^(n)]`` on ``(-1, 1)`` via the quotient rule on jets."""
    p, m = 1 + x, 1 - x
    a = [p**4, 4 * p**3, 12 * p**2, 24 * p, np.full_like(x, 24.0)]
    b = [m**4, -4 * m**3, 12 * m**2, -24 * m, np.full_like(x, 24.0)]
    s = [a[i] + b[i] for i in range(5)]
    out: list[np.ndarray] = []
    for k in range(n + 1):
        acc = a[k].copy()
        for i in range(1, k + 1):
            acc -= comb(k, i) * s[i] * out[k - i]
        out.append(acc / s[0])
    return out


def psi_eval(x, order: int = 0):
    """Transition ``psi = (1+x)^4 / ((1+x)^4 + (1-x)^4)`` on [-1, 1], 0 left, 1 right."""
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    xa = np.asarray(x, dtype=float)
    out = np.zeros_like(xa)
    inside = np.abs(xa) < 1
    if order == 0:
        out[xa >= 1] = 1.0
    if np.any(inside):
        out[inside] = _psi_jet(xa[inside], order)[order]
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# arctan step Psi
# ---------------------------------------------------------------------------


def arctan_step(x, sigma: float, order: int = 0):
    """``Psi(x) = (2/pi) arctan(exp(-sqrt(sigma) x / 2))`` and derivatives up to 3."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if order not in (0, 1, 2, 3):
        raise ValueError("order must be 0..3")
    xa = np.asarray(x, dtype=float)
    r = sqrt(sigma) / 2
    z = r * xa
    if order == 0:
        # evaluate on the decaying side of each half-line to avoid cancellation
        out = np.where(z >= 0, 2 / pi * np.arctan(np.exp(-np.abs(z))), 1 - 2 / pi * np.arctan(np.exp(-np.abs(z))))
    else:
        h = 2 * np.exp(-np.abs(z)) / (1 + np.exp(-2 * np.abs(z)))
        T = np.tanh(z)
        base = -sqrt(sigma) / (2 * pi) * h
        if order == 1:
            out = base
        elif order == 2:
            out = -r * T * base
        else:
            out = r * r * (2 * T * T - 1) * base
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# weight families on a grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CutoffFamily:
    """Weight fields for each object of a profile set at a fixed time.

    ``w[j]`` is the cutoff around object ``j``.  For the ``phi`` family
    ``d1[j]`` and ``d2[j]`` hold the psi' and psi'' analogues.  For the
    ``Phi`` family ``w`` holds ``Phi_1..Phi_{J+1}`` and ``chi`` the
    differences.
    """

    kind: str
    grid: PeriodicGrid
    t: float
    w: tuple
    d1: tuple = ()
    d2: tuple = ()
    chi: tuple = ()
    params: tuple = ()

    def __len__(self) -> int:
        return len(self.w)


def default_delta(ps: ProfileSet) -> float:
    return min(1.0, ps.tau / 4) / 2


def default_sigma(ps: ProfileSet) -> float:
    m = midpoints(ps)
    m2 = m[0] if m else ps.velocities[0]
    return min(m2, ps.beta_min**2) / 4


def midpoints(ps: ProfileSet) -> list[float]:
    v = ps.velocities
    return [(v[j - 1] + v[j]) / 2 for j in range(1, len(v))]


def initial_shifts(ps: ProfileSet) -> list[float]:
    """Transition offsets that follow the initial positions of neighbouring objects."""
    c0 = ps.centers(0.0)
    return [(c0[j - 1] + c0[j]) / 2 for j in range(1, len(c0))]


def phi_weights(
    ps: ProfileSet,
    t: float,
    grid: PeriodicGrid,
    delta: Optional[float] = None,
    shifts: Optional[Sequence[float]] = None,
) -> CutoffFamily:
    """Partition of unity ``phi_1..phi_J`` with transitions at the mean velocities.

    ``shifts`` (one per transition, ``J - 1`` values) offsets the transition
    centres; :func:`initial_shifts` gives the offsets matching the initial
    positions.
    """
    if not t > 0:
        raise ValueError("phi weights need t > 0")
    J = len(ps)
    if delta is None:
        delta = default_delta(ps)
    if J > 1 and not 0 < delta < min(1.0, ps.tau / 4):
        raise ValueError(f"delta must lie in (0, {min(1.0, ps.tau / 4)}), got {delta}")
    sig = midpoints(ps)
    if shifts is None:
        shifts = [0.0] * (J - 1)
    if len(shifts) != J - 1:
        raise ValueError(f"expected {J - 1} shifts, got {len(shifts)}")
    width = delta * t
    # step[i] is the transition between object i and i+1 (0-based), rising in x
    steps = []
    for i in range(J - 1):
        z = (grid.x - sig[i] * t - shifts[i]) / width
        steps.append([psi_eval(z, o) for o in range(3)])
    w, d1, d2 = [], [], []
    zero = np.zeros(grid.N)
    for j in range(J):
        left = steps[j - 1] if j > 0 else [np.ones(grid.N), zero, zero]
        right = steps[j] if j < J - 1 else [zero, zero, zero]
        w.append(left[0] - right[0])
        d1.append(left[1] - right[1])
        d2.append(left[2] - right[2])
    return CutoffFamily("phi", grid, t, tuple(w), tuple(d1), tuple(d2), params=(delta, tuple(shifts)))


def Phi_weights(ps: ProfileSet, t: float, grid: PeriodicGrid, sigma: Optional[float] = None) -> CutoffFamily:
    """Arctan steps ``Phi_1 = 0, Phi_j = Psi(x - m_j t), Phi_{J+1} = 1``."""
    if sigma is None:
        sigma = default_sigma(ps)
    J = len(ps)
    m = midpoints(ps)
    Phis = [np.zeros(grid.N)]
    for j in range(J - 1):
        Phis.append(arctan_step(grid.x - m[j] * t, sigma))
    Phis.append(np.ones(grid.N))
    chi = tuple(Phis[j + 1] - Phis[j] for j in range(J))
    return CutoffFamily("Phi", grid, t, tuple(Phis), chi=chi, params=(sigma,))


def global_weights(ps: ProfileSet, grid: PeriodicGrid, t: float = 0.0) -> CutoffFamily:
    """Single-object family with weight identically one (only valid for J = 1)."""
    if len(ps) != 1:
        raise ValueError("global weights need exactly one object")
    zero = np.zeros(grid.N)
    return CutoffFamily("phi", grid, t, (np.ones(grid.N),), (zero,), (zero,))


def Phi_time_derivative(ps: ProfileSet, t: float, grid: PeriodicGrid, sigma: float) -> list[np.ndarray]:
    """``d/dt Phi_j = -m_j Psi'(x - m_j t)`` for ``j = 1..J+1``."""
    m = midpoints(ps)
    out = [np.zeros(grid.N)]
    for j in range(len(ps) - 1):
        out.append(-m[j] * arctan_step(grid.x - m[j] * t, sigma, 1))
    out.append(np.zeros(grid.N))
    return out
