"""Dense discretisation of the linearised operator tau d^2 + D^alpha - h' Id.

The operator acts on the truncated half-line [-L, 0].  The left truncation
is closed either by slaving an exponential tail exp(lam xi) to the boundary
value (the asymptotic behaviour every admissible solution shares) or by a
hard zero.  The right boundary carries the Dirichlet data.

For tau = 0 the collocation row at the left endpoint degenerates (it reduces
to P(lam) v_0 = 0, identically zero when the closure rate is the root), so
the row layout differs between the two cases; see `assemble`.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import get_lapack_funcs, lu_factor, lu_solve, svdvals
from scipy.special import gamma as gamma_fn

from .charroots import WaveParams, find_lambda
from .fracops import ExponentialApproach, Grid, GridFunction, ZeroTail, _exp_gammaincc, l1_kernel


@dataclass(frozen=True)
class AsymptoticExponential:
    """Left closure: v(xi) = v(x0) exp(lam (xi - x0)) for xi <= x0."""

    lam: float


@dataclass(frozen=True)
class Dirichlet0:
    """Left closure: v = 0 beyond (and at) the left endpoint."""


@dataclass(frozen=True)
class DirichletValue:
    """Right boundary condition v(0) = value."""

    value: float


@dataclass
class LinearizedOperator:
    params: WaveParams
    grid: Grid
    matrix: np.ndarray
    bc_left: AsymptoticExponential | Dirichlet0
    bc_right: DirichletValue
    consistency_residual: float
    lam: float

    @property
    def n(self) -> int:
        return self.grid.n


def _dalpha_matrix(n: int, h: float, alpha: float) -> np.ndarray:
    """Dense lower-triangular matrix of the on-grid L1 rule."""
    b = l1_kernel(n, alpha)
    c = h ** (-alpha) / gamma_fn(2.0 - alpha)
    M = np.zeros((n, n))
    i, k = np.tril_indices(n, -1)
    M[i, i] = c * b[0]
    M[0, 0] = 0.0
    M[i, k] = np.where(k > 0, c * (b[i - k] - b[i - k - 1]), -c * b[i - 1])
    return M


def _tail_column(n: int, h: float, alpha: float, lam: float) -> np.ndarray:
    """d/dv0 of the tail contribution of D^alpha under the slaved closure."""
    u = lam * h * np.arange(n)
    return lam**alpha * _exp_gammaincc(1.0 - alpha, u)


def assemble(
    w: WaveParams,
    grid: Grid,
    bc_left: AsymptoticExponential | Dirichlet0 | None = None,
    bc_right: DirichletValue = DirichletValue(0.0),
    consistency_warn: float = 1e-1,
) -> LinearizedOperator:
    """Dense matrix for tau d^2 + D^alpha - h' Id with the declared closures.

    Row layout, tau > 0: row 0 encodes the left closure (decay relation
    v0 - phi-tail form, or v0 = 0), rows 1..n-2 collocate the equation, row
    n-1 is the Dirichlet row.  For tau = 0 rows 0..n-2 collocate at
    x_1..x_{n-1} (the x_0 row would be identically zero under the
    asymptotic closure) and row n-1 is the Dirichlet row.

    The interior consistency residual on samples of exp(lam xi) is computed
    at assembly and stored; it should scale like h^(2-alpha).
    """
    if abs(grid.xmax) > 1e-12:
        raise ValueError("the linearised operator lives on [-L, 0]")
    lam = find_lambda(w)
    if bc_left is None:
        bc_left = AsymptoticExponential(lam)
    n, h = grid.n, grid.h
    alpha = w.frac.alpha
    A = _dalpha_matrix(n, h, alpha)
    slaved = isinstance(bc_left, AsymptoticExponential)
    if slaved:
        lam_bc = bc_left.lam
        A[:, 0] += _tail_column(n, h, alpha, lam_bc)
    if w.tau > 0:
        d2 = (
            np.diag(np.full(n - 1, 1.0), -1)
            - 2.0 * np.eye(n)
            + np.diag(np.full(n - 1, 1.0), 1)
        ) / h**2
        A += w.tau * d2
        if slaved:
            A[0, 0] += w.tau * np.exp(-lam_bc * h) / h**2  # ghost via the closure
    A -= w.hprime * np.eye(n)

    # interior consistency on the exact kernel element before boundary rows
    v_exact = np.exp(lam * grid.points)
    if w.tau > 0:
        interior = A[1:-1] @ v_exact
    else:
        interior = A[1:-1] @ v_exact  # same rows end up interior below
    consistency = float(np.max(np.abs(interior)))

    if w.tau > 0:
        A[0, :] = 0.0
        if slaved:
            A[0, 0] = 1.0
            A[0, 1] = -np.exp(-lam_bc * h)
        else:
            A[0, 0] = 1.0
    else:
        # drop the degenerate x_0 row; collocate through the right endpoint
        A = np.vstack([A[1:, :], np.zeros((1, n))])
        if isinstance(bc_left, Dirichlet0):
            A[-1, :] = 0.0  # replaced below by the Dirichlet row anyway
    A[-1, :] = 0.0
    A[-1, -1] = 1.0

    bound = consistency_warn * h ** (2.0 - alpha) / h**alpha
    if consistency > max(bound, 1e-2):
        warnings.warn(
            f"interior consistency residual {consistency:.3e} is large for "
            f"h={h}; the grid may be too coarse",
            stacklevel=2,
        )
    return LinearizedOperator(w, grid, A, bc_left, bc_right, consistency, lam)


def solve_bvp(op: LinearizedOperator) -> GridFunction:
    """Solve the dense system with the assembled boundary rows.

    The right-hand side is zero except for the Dirichlet row.  An LU-based
    reciprocal condition estimate guards against near-singularity.
    """
    n = op.n
    rhs = np.zeros(n)
    rhs[-1] = op.bc_right.value
    a_norm = np.linalg.norm(op.matrix, 1)
    lu, piv = lu_factor(op.matrix)
    (gecon,) = get_lapack_funcs(("gecon",), (op.matrix,))
    rcond, _ = gecon(lu, a_norm)
    if rcond < 1e-12:
        warnings.warn(
            f"linearised system condition estimate {1.0 / max(rcond, 1e-300):.2e} "
            "exceeds 1e12",
            stacklevel=2,
        )
    v = lu_solve((lu, piv), rhs)
    if isinstance(op.bc_left, AsymptoticExponential) and abs(v[0]) > 0:
        xmin = op.grid.xmin
        tail = ExponentialApproach(
            0.0, float(v[0] * np.exp(-op.bc_left.lam * xmin)), op.bc_left.lam
        )
    else:
        tail = ZeroTail()
    return GridFunction(op.grid, v, tail)


def null_space_check(op: LinearizedOperator, k: int = 3):
    """Smallest singular values of the collocation block on the bc subspace.

    The boundary rows are constraints, not part of the operator, so the
    scale-free injectivity measure is the singular spectrum of the interior
    collocation rows restricted to vectors satisfying the boundary rows
    exactly.  A bounded-below sigma_min under refinement certifies the
    absence of a spurious kernel; raw-matrix sigma_min would instead decay
    with the consistency order of the scheme.
    """
    if abs(op.bc_right.value) > 0:
        raise ValueError("null-space check requires homogeneous Dirichlet data")
    A = op.matrix
    n = op.n
    if op.params.tau > 0:
        interior = A[1:-1, :]
        if isinstance(op.bc_left, AsymptoticExponential):
            M = interior[:, 1:-1].copy()
            M[:, 0] += np.exp(-op.bc_left.lam * op.grid.h) * interior[:, 0]
        else:
            M = interior[:, 1:-1].copy()
    else:
        interior = A[:-1, :]
        M = interior[:, :-1].copy()
    sv = svdvals(M)
    return {
        "sigma_min": float(sv[-1]),
        "smallest": [float(s) for s in sv[-k:][::-1]],
        "sigma_max": float(sv[0]),
        "ratio": float(sv[-1] / sv[0]),
    }
