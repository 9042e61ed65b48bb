"""Independent finite-difference solver for the static power-grid voltage equation.

The continuous model is div(sigma * grad V) = -J with the supply held at vdd
on a set of pad nodes. Discretized with the classic 5-point stencil on the
pixel grid: the conductance of each edge is the harmonic mean of the two
pixel conductivities, the outer boundary is zero-flux, and pad nodes are
eliminated symmetrically (their coupling moves to the right-hand side), which
keeps the reduced matrix symmetric positive definite. Positive current demand
J pulls node voltage below vdd, so the reported drop vdd - V is nonnegative.

This solver is the physics-grade reference the learned surrogate is compared
against; it shares no code with the synthetic label formula.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy import stats

from .grids import as_grid

__all__ = [
    "PdeProblem",
    "SolverConfig",
    "LinearSystem",
    "SolveResult",
    "CorrelationReport",
    "ConvergenceError",
    "corner_pads",
    "assemble_system",
    "solve_pde",
    "compare_labels",
]


class ConvergenceError(RuntimeError):
    """Conjugate gradient failed to reach the requested residual."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


def corner_pads(height: int, width: int) -> tuple[tuple[int, int], ...]:
    """Default pad placement: the four corner pixels."""
    return ((0, 0), (0, width - 1), (height - 1, 0), (height - 1, width - 1))


@dataclass
class PdeProblem:
    sigma: np.ndarray
    current: np.ndarray
    vdd: float = 1.0
    pads: tuple[tuple[int, int], ...] = field(default=None)

    def __post_init__(self):
        self.sigma = as_grid(self.sigma, "sigma")
        self.current = as_grid(self.current, "current")
        if self.sigma.shape != self.current.shape:
            raise ValueError(
                f"sigma and current shapes differ: {self.sigma.shape} vs {self.current.shape}"
            )
        if (self.sigma <= 0).any():
            raise ValueError("sigma must be strictly positive everywhere")
        if (self.current < 0).any():
            raise ValueError("current must be nonnegative")
        h, w = self.sigma.shape
        if self.pads is None:
            self.pads = corner_pads(h, w)
        self.pads = tuple((int(r), int(c)) for r, c in self.pads)
        if not self.pads:
            raise ValueError("at least one pad is required")
        for r, c in self.pads:
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"pad ({r}, {c}) outside {h}x{w} grid")


@dataclass
class SolverConfig:
    tol: float = 1e-8
    max_iter: int = 20000

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be positive")


@dataclass
class LinearSystem:
    """Reduced SPD system over the non-pad nodes, A @ v_free = rhs."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    free_index: np.ndarray  # flat node index of each unknown
    shape: tuple[int, int]
    vdd: float


@dataclass
class SolveResult:
    ir_drop: np.ndarray
    voltage: np.ndarray
    iterations: int
    residual: float


def _edge_conductances(sigma: np.ndarray):
    """Harmonic-mean conductance of horizontal and vertical neighbor edges."""
    a, b = sigma[:, :-1], sigma[:, 1:]
    g_h = 2.0 * a * b / (a + b)
    a, b = sigma[:-1, :], sigma[1:, :]
    g_v = 2.0 * a * b / (a + b)
    return g_h, g_v


def assemble_system(problem: PdeProblem) -> LinearSystem:
    """Build the reduced 5-point finite-difference system for the free nodes.

    Diagonal entries are the full sum of incident edge conductances (including
    edges into pads); couplings to pads appear on the right-hand side as
    vdd * conductance, and current demand enters with a negative sign.
    """
    h, w = self_shape = problem.sigma.shape
    n = h * w
    pad_mask = np.zeros(n, dtype=bool)
    for r, c in problem.pads:
        pad_mask[r * w + c] = True
    n_free = n - int(pad_mask.sum())
    if n_free == 0:
        raise ValueError("every node is a pad: nothing to solve")

    g_h, g_v = _edge_conductances(problem.sigma)
    idx = np.arange(n).reshape(h, w)
    # undirected edge lists (i, j, g)
    ei = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    ej = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    eg = np.concatenate([g_h.ravel(), g_v.ravel()])

    degree = np.zeros(n)
    np.add.at(degree, ei, eg)
    np.add.at(degree, ej, eg)

    free_index = np.flatnonzero(~pad_mask)
    reduced = np.full(n, -1, dtype=np.int64)
    reduced[free_index] = np.arange(n_free)

    both_free = ~pad_mask[ei] & ~pad_mask[ej]
    rows = np.concatenate(
        [reduced[ei[both_free]], reduced[ej[both_free]], reduced[free_index]]
    )
    cols = np.concatenate(
        [reduced[ej[both_free]], reduced[ei[both_free]], reduced[free_index]]
    )
    vals = np.concatenate([-eg[both_free], -eg[both_free], degree[free_index]])
    matrix = sp.coo_matrix((vals, (rows, cols)), shape=(n_free, n_free)).tocsr()

    pad_coupling = np.zeros(n)
    i_free_j_pad = ~pad_mask[ei] & pad_mask[ej]
    np.add.at(pad_coupling, ei[i_free_j_pad], eg[i_free_j_pad])
    j_free_i_pad = pad_mask[ei] & ~pad_mask[ej]
    np.add.at(pad_coupling, ej[j_free_i_pad], eg[j_free_i_pad])

    rhs = -problem.current.ravel()[free_index] + problem.vdd * pad_coupling[free_index]
    return LinearSystem(
        matrix=matrix,
        rhs=rhs,
        free_index=free_index,
        shape=self_shape,
        vdd=problem.vdd,
    )


def _conjugate_gradient(matrix, rhs, x0, tol: float, max_iter: int):
    """Plain CG on an SPD system; returns (x, iterations, relative residual).

    Convergence is judged on the true residual (recomputed when the recursive
    residual first passes), so the reported value is trustworthy.
    """
    denom = float(np.linalg.norm(rhs))
    if denom == 0.0:
        denom = 1.0
    x = x0.copy()
    r = rhs - matrix @ x
    res = float(np.linalg.norm(r)) / denom
    if res <= tol:
        return x, 0, res
    p = r.copy()
    rs = float(r @ r)
    for k in range(1, max_iter + 1):
        ap = matrix @ p
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if np.sqrt(rs_new) / denom <= tol:
            true_r = rhs - matrix @ x
            res = float(np.linalg.norm(true_r)) / denom
            if res <= tol:
                return x, k, res
            # recursive residual drifted; restart from the true one
            r = true_r
            rs_new = float(r @ r)
            p = r.copy()
            rs = rs_new
            continue
        beta = rs_new / rs
        p = r + beta * p
        rs = rs_new
    res = float(np.linalg.norm(rhs - matrix @ x)) / denom
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations (relative residual {res:.3e})",
        residual=res,
        iterations=max_iter,
    )


def solve_pde(problem: PdeProblem, config: SolverConfig | None = None) -> SolveResult:
    """Solve for the voltage field and return the drop map vdd - V.

    Starting from V = vdd makes the zero-demand case exact immediately, and
    pad pixels are exactly zero drop by construction.
    """
    cfg = config or SolverConfig()
    system = assemble_system(problem)
    x0 = np.full(system.rhs.shape, problem.vdd)
    v_free, iterations, residual = _conjugate_gradient(
        system.matrix, system.rhs, x0, cfg.tol, cfg.max_iter
    )
    voltage = np.full(problem.sigma.size, problem.vdd)
    voltage[system.free_index] = v_free
    voltage = voltage.reshape(system.shape)
    ir_drop = problem.vdd - voltage
    for r, c in problem.pads:
        ir_drop[r, c] = 0.0
    return SolveResult(
        ir_drop=ir_drop, voltage=voltage, iterations=iterations, residual=residual
    )


@dataclass
class CorrelationReport:
    pearson: float | None
    spearman: float | None
    degenerate: bool


def compare_labels(synthetic, physical) -> CorrelationReport:
    """Pearson and Spearman rank correlation between two drop maps.

    A constant map has no defined correlation; that case is flagged instead of
    reported as a number.
    """
    a = as_grid(synthetic, "synthetic").ravel()
    b = as_grid(physical, "physical").ravel()
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if np.all(a == a[0]) or np.all(b == b[0]):
        return CorrelationReport(pearson=None, spearman=None, degenerate=True)
    pearson = float(stats.pearsonr(a, b).statistic)
    spearman = float(stats.spearmanr(a, b).statistic)
    return CorrelationReport(pearson=pearson, spearman=spearman, degenerate=False)
