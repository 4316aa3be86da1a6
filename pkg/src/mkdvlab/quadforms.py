"""Quadratic forms around solitons and breathers, their discretized operators and coercivity checks.

For a background profile ``A`` with parameters ``(a, b)`` (``(alpha, beta)`` for
a breather, ``(0, sqrt(c))`` for a soliton) the quadratic form is

    Q[eps] = 1/2 int eps_xx^2 - 5/2 int A^2 eps_x^2 + 5/2 int A_x^2 eps^2
             + 5 int A A_xx eps^2 + 15/4 int A^4 eps^2
             + (b^2 - a^2) (int eps_x^2 - 3 int A^2 eps^2)
             + (a^2 + b^2)^2 / 2 int eps^2

and ``Q[eps] = 1/2 <eps, L eps>`` with ``L`` the linearized operator of the
fourth-order elliptic equation satisfied by the profile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .cutoffs import CutoffFamily
from .grid import Field, PeriodicGrid
from .profiles import (
    BreatherParams,
    Profile,
    ProfileSet,
    SolitonParams,
    eval_object,
    kernel_basis,
)

MAX_OPERATOR_DIM = 4096


def _ab(p: Profile) -> tuple[float, float]:
    return p.a, p.b


# ---------------------------------------------------------------------------
# elliptic identities
# ---------------------------------------------------------------------------


def elliptic_lhs(grid: PeriodicGrid, A: np.ndarray, a: float, b: float) -> np.ndarray:
    """``A_4x - 2(b^2-a^2)(A_xx + A^3) + (a^2+b^2)^2 A + 5 A A_x^2 + 5 A^2 A_xx + 3/2 A^5``."""
    Ax = grid.deriv(A, 1)
    Axx = grid.deriv(A, 2)
    A4 = grid.deriv(A, 4)
    s = b * b - a * a
    return A4 - 2 * s * (Axx + A**3) + (a * a + b * b) ** 2 * A + 5 * A * Ax**2 + 5 * A**2 * Axx + 1.5 * A**5


def elliptic_residual(p: Profile, grid: PeriodicGrid, t: float = 0.0, values: Optional[np.ndarray] = None) -> float:
    """Max-norm residual of the elliptic equation for the profile ``p`` at time ``t``.

    ``values`` overrides the sampled profile (used for negative controls).
    """
    A = eval_object(p, t, grid).values if values is None else np.asarray(values, dtype=float)
    a, b = _ab(p)
    return float(np.max(np.abs(elliptic_lhs(grid, A, a, b))))


def modulated_soliton_residual(c: float, c0: float, grid: PeriodicGrid) -> float:
    """Pointwise mismatch between the ``c``-equation applied to ``Q_{c+c0}`` and its exact right side."""
    Q = eval_object(SolitonParams(c + c0), 0.0, grid).values
    lhs = elliptic_lhs(grid, Q, 0.0, np.sqrt(c))
    Qxx = grid.deriv(Q, 2)
    rhs = 2 * c0 * (Qxx + Q**3) - 2 * c * c0 * Q - c0**2 * Q
    return float(np.max(np.abs(lhs - rhs)))


def wronskian_deviation(c: float, grid: PeriodicGrid) -> float:
    """Max of ``|2 Q_x^2 - Q Q_xx - c Q^2|``, i.e. the Wronskian of the two kernel functions minus ``c Q^2``."""
    from .profiles import soliton_y_jet

    q = soliton_y_jet(c, grid.x, 2)
    Q, Qx, Qxx = q
    y = grid.x
    w = Qx * (2 * Qx + y * Qxx) - (Q + y * Qx) * Qxx
    return float(np.max(np.abs(w - c * Q**2)))


# ---------------------------------------------------------------------------
# quadratic forms
# ---------------------------------------------------------------------------


def _coefficients(grid: PeriodicGrid, A: np.ndarray, a: float, b: float):
    Ax = grid.deriv(A, 1)
    Axx = grid.deriv(A, 2)
    s = b * b - a * a
    c1 = -2.5 * A**2 + s
    c0 = 2.5 * Ax**2 + 5 * A * Axx + 3.75 * A**4 - 3 * s * A**2 + 0.5 * (a * a + b * b) ** 2
    return c1, c0


def qform(p: Profile, eps: Field, background: Optional[Field] = None, t: float = 0.0) -> float:
    """Quadratic form of ``eps`` around ``background`` (defaults to the profile at ``t``)."""
    grid = eps.grid
    A = eval_object(p, t, grid).values if background is None else background.values
    a, b = _ab(p)
    e = eps.values
    ex = grid.deriv(e, 1)
    exx = grid.deriv(e, 2)
    c1, c0 = _coefficients(grid, A, a, b)
    return grid.integrate(0.5 * exx**2 + c1 * ex**2 + c0 * e**2)


def h2(eps: Field, background: Field, ps: ProfileSet, weights: CutoffFamily) -> float:
    """Localized second variation: global quartic part plus per-object weighted lower-order parts."""
    grid = eps.grid
    P = background.values
    e = eps.values
    ex = grid.deriv(e, 1)
    exx = grid.deriv(e, 2)
    Px = grid.deriv(P, 1)
    Pxx = grid.deriv(P, 2)
    val = grid.integrate(
        0.5 * exx**2 - 2.5 * P**2 * ex**2 + 2.5 * Px**2 * e**2 + 5 * P * Pxx * e**2 + 3.75 * P**4 * e**2
    )
    for j, (aj, bj) in enumerate(zip(ps.a, ps.b)):
        phi = weights.w[j]
        val += (bj**2 - aj**2) * (grid.integrate(ex**2 * phi) - 3 * grid.integrate(P**2 * e**2 * phi))
        val += 0.5 * (aj**2 + bj**2) ** 2 * grid.integrate(e**2 * phi)
    return float(val)


# ---------------------------------------------------------------------------
# discretized operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetricOperator:
    """Dense symmetric matrix ``entries`` with ``x @ entries @ x == qform(x)``.

    The linearized operator itself acts as ``(2 / dx) * entries``.
    """

    entries: np.ndarray
    grid: PeriodicGrid
    kind: str
    params: Profile
    background: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def operator(self) -> np.ndarray:
        return (2.0 / self.grid.dx) * self.entries

    def operator_eigenvalues(self) -> np.ndarray:
        return sla.eigvalsh(self.operator)

    def apply(self, v: np.ndarray) -> np.ndarray:
        return self.operator @ v

    def quad(self, v: np.ndarray) -> float:
        return float(v @ self.entries @ v)


def assemble_operator(p: Profile, grid: PeriodicGrid, t: float = 0.0, background: Optional[Field] = None) -> SymmetricOperator:
    """Discretize the quadratic form as ``dx [1/2 D2^T D2 + D1^T diag(c1) D1 + diag(c0)]``."""
    if grid.N > MAX_OPERATOR_DIM:
        raise ValueError(f"dense operator limited to N <= {MAX_OPERATOR_DIM}, got {grid.N}")
    A = eval_object(p, t, grid).values if background is None else background.values
    a, b = _ab(p)
    c1, c0 = _coefficients(grid, A, a, b)
    D1 = grid.derivative_matrix(1)
    D2 = grid.derivative_matrix(2)
    M = 0.5 * D2.T @ D2 + D1.T @ (c1[:, None] * D1) + np.diag(c0)
    M = grid.dx * M
    M = 0.5 * (M + M.T)
    kind = "soliton" if isinstance(p, SolitonParams) else "breather"
    return SymmetricOperator(M, grid, kind, p, A)


def strong_form_soliton(grid: PeriodicGrid, c: float, eps: np.ndarray, Q: Optional[np.ndarray] = None) -> np.ndarray:
    """Strong form of the soliton operator applied to ``eps`` (cross-check for the assembled matrix)."""
    if Q is None:
        Q = eval_object(SolitonParams(c), 0.0, grid).values
    Qx = grid.deriv(Q, 1)
    Qxx = grid.deriv(Q, 2)
    d = [eps] + [grid.deriv(eps, k) for k in (1, 2, 4)]
    e, ex, exx, e4 = d
    return (
        e4
        - 2 * c * exx
        + c * c * e
        + 5 * Q**2 * exx
        + 10 * Q * Qx * ex
        + (5 * Qx**2 + 10 * Q * Qxx + 7.5 * Q**4 - 6 * c * Q**2) * e
    )


def kernel_fields(op: SymmetricOperator, t: float = 0.0) -> list[Field]:
    return kernel_basis(op.params, t, op.grid)


def nyquist_mode(grid: PeriodicGrid) -> np.ndarray:
    return np.cos(np.pi * np.arange(grid.N))


def _complement_basis(grid: PeriodicGrid, constraints: Sequence[Field]) -> np.ndarray:
    """Orthonormal basis of the band-limited functions L2-orthogonal to ``constraints``.

    The Nyquist mode is always removed: derivatives annihilate it, so it
    would otherwise appear as a spurious direction with vanishing
    Rayleigh quotient against the H^2 metric.
    """
    cols = [c.values for c in constraints]
    if cols:
        C = np.column_stack(cols)
        gram = grid.dx * C.T @ C
        ev = np.linalg.eigvalsh(gram)
        if ev[0] <= 1e-12 * max(ev[-1], 1e-300):
            raise np.linalg.LinAlgError("constraint set is degenerate (singular Gram matrix)")
    return sla.null_space(np.column_stack(cols + [nyquist_mode(grid)]).T)


def constrained_eigenpairs(op: SymmetricOperator, constraints: Sequence[Field] = (), count: int = 1, metric_s: float = 2.0):
    """Lowest ``count`` values of ``Q[x] / ||x||_{H^s}^2`` on the constrained subspace, with full-grid vectors."""
    Z = _complement_basis(op.grid, constraints)
    A = Z.T @ op.entries @ Z
    G = Z.T @ op.grid.sobolev_metric(metric_s) @ Z
    A = 0.5 * (A + A.T)
    G = 0.5 * (G + G.T)
    w, V = sla.eigh(A, G, subset_by_index=[0, count - 1])
    return w, Z @ V


def constrained_min_eigenvalue(op: SymmetricOperator, constraints: Sequence[Field] = (), metric_s: float = 2.0) -> float:
    """Minimum of ``Q[x] / ||x||_{H^2}^2`` over ``x`` L2-orthogonal to every constraint."""
    w, _ = constrained_eigenpairs(op, constraints, 1, metric_s)
    return float(w[0])


def penalized_coercivity_constant(op: SymmetricOperator, constraints: Sequence[Field], penalty: Field) -> float:
    """Largest ``mu`` with ``Q[x] + (int x B)^2 / mu >= mu ||x||_{H^2}^2`` on the constrained subspace."""
    grid = op.grid
    G = grid.sobolev_metric(2.0)
    Z = _complement_basis(grid, constraints)
    A = Z.T @ op.entries @ Z
    G = Z.T @ G @ Z
    bvec = grid.dx * (Z.T @ penalty.values)
    B = np.outer(bvec, bvec)

    def gap(mu):
        w = sla.eigh(A + B / mu, G, eigvals_only=True, subset_by_index=[0, 0])
        return float(w[0]) - mu

    lo, hi = 1e-8, 1.0
    while gap(hi) > 0:
        hi *= 2
    if gap(lo) <= 0:
        return 0.0
    return float(brentq(gap, lo, hi, xtol=1e-12, rtol=1e-10))


@dataclass
class MarginResult:
    passed: bool
    mu: float
    trials: int
    min_slack: float
    witness: Optional[np.ndarray] = None
    witness_info: dict = field(default_factory=dict)


def _random_smooth(grid: PeriodicGrid, rng: np.random.Generator, center: float, width: float) -> np.ndarray:
    """Random band-limited bump: Gaussian envelope times a random Fourier series."""
    nk = 24
    kk = rng.uniform(0.0, 4.0, nk)
    amp = rng.normal(size=nk) * np.exp(-0.25 * kk**2)
    ph = rng.uniform(0, 2 * np.pi, nk)
    y = grid.x - center
    s = (amp[:, None] * np.cos(kk[:, None] * y[None, :] + ph[:, None])).sum(axis=0)
    return s * np.exp(-((y / width) ** 2))


def almost_orthogonality_margin(
    op: SymmetricOperator,
    constraints: Sequence[Field],
    nu: float,
    trials: int = 1000,
    seed: int = 0,
    penalty: Optional[Field] = None,
    mu: Optional[float] = None,
) -> MarginResult:
    """Randomized check of the quartered coercivity bound under approximate orthogonality.

    Draws ``eps`` with ``|<eps, K_i>| <= nu ||eps||_{H^2}`` (``K_i`` the
    L2-normalized constraints) and checks
    ``Q[eps] >= mu/4 ||eps||^2 - 4/mu (int eps B)^2`` (penalty term only when
    ``penalty`` is given).  ``mu`` defaults to the measured coercivity constant
    under exact orthogonality.  Kernel-aligned candidates are always tried
    first when they are admissible.
    """
    if nu < 0:
        raise ValueError("nu must be non-negative")
    grid = op.grid
    dx = grid.dx
    K = np.column_stack([c.values for c in constraints])
    Qm, _ = np.linalg.qr(K * np.sqrt(dx))
    Kn = Qm / np.sqrt(dx)  # L2-orthonormal columns
    if mu is None:
        if penalty is None:
            mu = constrained_min_eigenvalue(op, constraints)
        else:
            mu = penalized_coercivity_constant(op, constraints, penalty)
    if not mu > 0:
        raise ValueError(f"no positive coercivity constant available (mu={mu})")
    G = grid.sobolev_metric(2.0)
    bvals = None if penalty is None else penalty.values

    def check(e):
        n2 = float(e @ G @ e)
        inner = dx * (Kn.T @ e)
        # absolute slack so that nu = 0 accepts projections exact up to roundoff
        admissible = np.all(np.abs(inner) <= (nu * (1 + 1e-12) + 1e-12) * np.sqrt(n2))
        pen = 0.0 if bvals is None else (dx * float(e @ bvals)) ** 2
        slack = op.quad(e) - (0.25 * mu * n2 - 4.0 / mu * pen)
        return admissible, slack / n2

    rng = np.random.default_rng(seed)
    center = float(np.sum(grid.x * op.background**2) / max(np.sum(op.background**2), 1e-300))
    # the softest admissible directions make the random draws adversarial
    _, low = constrained_eigenpairs(op, constraints, 8)
    low = low / np.sqrt(np.einsum("ij,ij->j", low, G @ low))
    min_slack = np.inf
    done = 0
    candidates = [Kn[:, i].copy() for i in range(Kn.shape[1])]
    for e in candidates:
        ok, sl = check(e)
        if ok:
            done += 1
            min_slack = min(min_slack, sl)
            if sl < 0:
                return MarginResult(False, mu, done, sl, e, {"source": "kernel"})
    attempts = 0
    while done < trials:
        attempts += 1
        if attempts > 100 * trials:
            raise RuntimeError(f"only {done} admissible draws in {attempts - 1} attempts")
        e = _random_smooth(grid, rng, center, rng.uniform(2.0, 8.0))
        e *= rng.uniform(0.0, 1.0) / np.sqrt(float(e @ G @ e))
        e += low @ rng.normal(size=low.shape[1])
        e -= Kn @ (dx * (Kn.T @ e))
        n_perp = np.sqrt(float(e @ G @ e))
        if n_perp == 0:
            continue
        theta = nu * n_perp * rng.uniform(-1, 1, Kn.shape[1]) / np.sqrt(Kn.shape[1])
        e_full = e + Kn @ theta
        ok, sl = check(e_full)
        shrink = 0
        while not ok and shrink < 60:
            theta *= 0.5
            e_full = e + Kn @ theta
            ok, sl = check(e_full)
            shrink += 1
        if not ok:
            continue
        done += 1
        min_slack = min(min_slack, sl)
        if sl < 0:
            return MarginResult(False, mu, done, sl, e_full, {"source": "random"})
    return MarginResult(True, mu, done, float(min_slack))
