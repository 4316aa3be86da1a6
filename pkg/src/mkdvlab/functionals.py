"""Conserved functionals of mKdV, their localized versions and Lyapunov combinations.

    M[u] = 1/2 int u^2
    E[u] = 1/2 int u_x^2 - 1/4 int u^4
    F[u] = 1/2 int u_xx^2 - 5/2 int u^2 u_x^2 + 1/4 int u^6

All densities use spectral derivatives of the sampled field, so the same code
serves exact profiles and numerical solutions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cutoffs import CutoffFamily
from .grid import Field, PeriodicGrid
from .profiles import ProfileSet, SolitonParams, eval_soliton

# ground-state values for q = Q_1
M_Q = 2.0
E_Q = -2.0 / 3.0
F_Q = 2.0 / 5.0


@dataclass(frozen=True)
class ConservedTriple:
    M: float
    E: float
    F: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.M, self.E, self.F)


@dataclass(frozen=True)
class LocalizedSeries:
    """Per-weight values; index ``j`` follows the weight family order."""

    kind: str
    M: np.ndarray
    E: np.ndarray
    F: np.ndarray


def densities(grid: PeriodicGrid, u: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ux = grid.deriv(u, 1)
    uxx = grid.deriv(u, 2)
    u2 = u * u
    m = 0.5 * u2
    e = 0.5 * ux * ux - 0.25 * u2 * u2
    f = 0.5 * uxx * uxx - 2.5 * u2 * ux * ux + 0.25 * u2**3
    return m, e, f


def conserved(u: Field) -> ConservedTriple:
    g = u.grid
    m, e, f = densities(g, u.values)
    return ConservedTriple(g.integrate(m), g.integrate(e), g.integrate(f))


def _weights_for(weights: CutoffFamily, variant: str) -> Sequence[np.ndarray]:
    if variant == "phi":
        if weights.kind != "phi":
            raise ValueError("variant 'phi' needs a phi weight family")
        return weights.w
    if variant == "sqrt_phi":
        if weights.kind != "phi":
            raise ValueError("variant 'sqrt_phi' needs a phi weight family")
        return [np.sqrt(np.clip(w, 0.0, None)) for w in weights.w]
    if variant == "Phi":
        if weights.kind != "Phi":
            raise ValueError("variant 'Phi' needs a Phi weight family")
        return weights.w
    if variant == "chi":
        if weights.kind != "Phi":
            raise ValueError("variant 'chi' needs a Phi weight family")
        return weights.chi
    raise ValueError(f"unknown variant {variant!r}")


def localized_conserved(u: Field, weights: CutoffFamily, variant: str = "phi") -> LocalizedSeries:
    """``M_j, E_j, F_j`` for every weight in the family."""
    if weights.grid != u.grid:
        raise ValueError("weights and field live on different grids")
    g = u.grid
    m, e, f = densities(g, u.values)
    ws = _weights_for(weights, variant)
    M = np.array([g.integrate(m * w) for w in ws])
    E = np.array([g.integrate(e * w) for w in ws])
    F = np.array([g.integrate(f * w) for w in ws])
    return LocalizedSeries(variant, M, E, F)


def lyapunov(u: Field, ps: ProfileSet, weights: CutoffFamily, index: Optional[int] = None) -> float:
    """Lyapunov functional built from F and the localized mass and energy.

    With ``index=None`` returns ``F + sum_j [2(b_j^2 - a_j^2) E_j + (a_j^2 + b_j^2)^2 M_j]``
    over a phi family.  With ``index=j`` (1-based, ``2 <= j <= J+1``) over a
    Phi family returns ``F_j + 2(b^2 - a^2) E_j + (a^2 + b^2)^2 M_j`` where
    ``(a, b)`` belong to object ``j - 1``.
    """
    a, b = ps.a, ps.b
    if index is None:
        loc = localized_conserved(u, weights, "phi")
        F = conserved(u).F
        return float(F + sum(2 * (b[j] ** 2 - a[j] ** 2) * loc.E[j] + (a[j] ** 2 + b[j] ** 2) ** 2 * loc.M[j] for j in range(len(ps))))
    if not 2 <= index <= len(ps) + 1:
        raise ValueError("index must lie in 2..J+1")
    loc = localized_conserved(u, weights, "Phi")
    i = index - 1
    aj, bj = a[index - 2], b[index - 2]
    return float(loc.F[i] + 2 * (bj**2 - aj**2) * loc.E[i] + (aj**2 + bj**2) ** 2 * loc.M[i])


def soliton_taylor_identities(grid: Optional[PeriodicGrid] = None, cs: Sequence[float] = (0.5, 1.0, 2.0)) -> dict:
    """Evaluate the vanishing combinations of (M, E, F)[q] and R(c) = F + 2cE + c^2 M."""
    if grid is None:
        from .grid import make_grid

        grid = make_grid(80.0, 2048)
    q = conserved(eval_soliton(SolitonParams(1.0), 0.0, grid))
    report = {
        "M": q.M,
        "E": q.E,
        "F": q.F,
        "combo_a": 2.5 * q.F + 3 * q.E + 0.5 * q.M,
        "combo_b": 15 / 8 * q.F + 0.75 * q.E - 0.125 * q.M,
        "F+2E+M": q.F + 2 * q.E + q.M,
        "R": {},
    }
    for c in cs:
        t = conserved(eval_soliton(SolitonParams(float(c)), 0.0, grid))
        R = t.F + 2 * c * t.E + c * c * t.M
        report["R"][float(c)] = {"value": R, "expected": 16 / 15 * c**2.5, "rel_err": abs(R / (16 / 15 * c**2.5) - 1)}
    return report


# ---------------------------------------------------------------------------
# time derivatives of weighted functionals along the flow
# ---------------------------------------------------------------------------


def weighted_rates(grid: PeriodicGrid, u: np.ndarray, f1: np.ndarray, f2: np.ndarray, f3: np.ndarray) -> tuple[float, float, float]:
    """Closed-form ``d/dt`` of ``int rho f`` for the M, E, F densities and a time-independent weight.

    ``f1, f2, f3`` are the first three x-derivatives of the weight.
    """
    ux = grid.deriv(u, 1)
    uxx = grid.deriv(u, 2)
    uxxx = grid.deriv(u, 3)
    u2 = u * u
    dM = grid.integrate((-1.5 * ux**2 + 0.75 * u2**2) * f1 + 0.5 * u2 * f3)
    dE = grid.integrate(
        (-0.5 * (uxx + u2 * u) ** 2 - uxx**2 + 3 * ux**2 * u2) * f1 + 0.5 * ux**2 * f3
    )
    dF = grid.integrate(
        (
            -1.5 * uxxx**2
            + 9 * uxx**2 * u2
            + 15 * ux**2 * u * uxx
            + 9 / 16 * u2**4
            + 0.25 * ux**4
            + 1.5 * uxx * u2**2 * u
            - 45 / 4 * u2**2 * ux**2
        )
        * f1
        + 5 * u2 * ux * uxx * f2
        + 0.5 * uxx**2 * f3
    )
    return dM, dE, dF


def mkdv_rhs(grid: PeriodicGrid, u: np.ndarray) -> np.ndarray:
    """``u_t = -(u_xx + u^3)_x`` evaluated spectrally."""
    return -grid.deriv(grid.deriv(u, 2) + u**3, 1)


def chain_rule_rates(grid: PeriodicGrid, u: np.ndarray, f: np.ndarray) -> tuple[float, float, float]:
    """``d/dt int rho f`` by differentiating the densities along ``u_t`` (independent route)."""
    ut = mkdv_rhs(grid, u)
    ux = grid.deriv(u, 1)
    uxx = grid.deriv(u, 2)
    utx = grid.deriv(ut, 1)
    utxx = grid.deriv(ut, 2)
    dM = grid.integrate(u * ut * f)
    dE = grid.integrate((ux * utx - u**3 * ut) * f)
    dF = grid.integrate((uxx * utxx - 5 * u * ut * ux**2 - 5 * u**2 * ux * utx + 1.5 * u**5 * ut) * f)
    return dM, dE, dF
