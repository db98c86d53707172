"""Sparse SPD solving (Jacobi-preconditioned CG) and condition estimation."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np


class SolverError(ValueError):
    pass


@dataclass
class SolveReport:
    iterations: int
    relative_residual: float
    converged: bool
    wall_time: float


def solve_cg(system, tol=1e-12, maxit=None):
    """Conjugate gradients with diagonal (Jacobi) preconditioning.

    Returns (x, SolveReport).  Convergence is measured in the norm the
    preconditioned iteration minimizes: the Jacobi-scaled relative residual
    sqrt(r' D^-1 r / b' D^-1 b) with r = b - Ax.  (For strongly contrasted
    systems the plain 2-norm of the residual has a round-off floor of
    eps * ||A|| ||x|| / ||b|| regardless of the solver, so it is useless as
    a convergence test there; the scaled norm weights each row by its own
    magnitude.)  The final report always carries the exact, freshly
    recomputed residual, and the iteration restarts from b - Ax whenever
    the internal residual recursion claims convergence, which repairs any
    accumulated drift.  Refuses matrices with a non-positive diagonal
    (symptom of a broken assembly).
    """
    A = system.A if hasattr(system, "A") else system
    b = system.b if hasattr(system, "b") else None
    if b is None:
        raise SolverError("solve_cg needs a system with A and b")
    n = A.shape[0]
    if maxit is None:
        maxit = 20 * n
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("matrix has a non-positive diagonal entry")
    inv_diag = 1.0 / diag

    def scaled_norm(v):
        return float(np.sqrt(v @ (inv_diag * v)))

    t_start = time.perf_counter()
    norm_b = scaled_norm(b)
    if norm_b == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True, time.perf_counter() - t_start)

    x = np.zeros(n)
    it = 0
    best_true = np.inf
    flat_restarts = 0
    while it < maxit:
        r = b - A @ x
        true_relres = scaled_norm(r) / norm_b
        if true_relres <= tol:
            break
        if true_relres < 0.5 * best_true:
            best_true = true_relres
            flat_restarts = 0
        else:
            flat_restarts += 1
            if flat_restarts > 4:
                break  # round-off floor: restarts stopped helping
        z = inv_diag * r
        rz = float(r @ z)
        p = z.copy()
        relres = true_relres
        stalled = 0
        best_relres = relres
        while it < maxit and relres > tol:
            Ap = A @ p
            pAp = float(p @ Ap)
            if pAp <= 0.0:
                raise SolverError("matrix is not positive definite (p'Ap <= 0 in CG)")
            alpha = rz / pAp
            x += alpha * p
            r -= alpha * Ap
            it += 1
            z = inv_diag * r
            rz_new = float(r @ z)
            relres = np.sqrt(max(rz_new, 0.0)) / norm_b
            if relres < best_relres * (1.0 - 1e-6):
                best_relres = relres
                stalled = 0
            else:
                stalled += 1
                if stalled > 300:
                    break
            p = z + (rz_new / rz) * p
            rz = rz_new

    true_relres = scaled_norm(b - A @ x) / norm_b
    return x, SolveReport(it, true_relres, true_relres <= tol, time.perf_counter() - t_start)


@dataclass
class CondEstimate:
    value: float
    lambda_max: float
    lambda_min: float
    reliable: bool


class _PlainSystem:
    def __init__(self, A, b):
        self.A = A
        self.b = b


def estimate_cond2(system, power_steps=200, cg_tol=1e-10):
    """2-norm condition estimate of the reduced SPD matrix.

    lambda_max by power iteration, lambda_min by inverse power iteration
    with CG solves; accurate to the order of magnitude, which is what the
    estimate is for.
    """
    A = system.A if hasattr(system, "A") else system
    n = A.shape[0]
    rng = np.random.default_rng(0)

    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_max = 0.0
    for _ in range(power_steps):
        w = A @ v
        lam_max = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            break
        v = w / nw

    reliable = True
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    lam_min = lam_max
    prev = None
    for _ in range(100):
        w, report = solve_cg(_PlainSystem(A, v), tol=cg_tol, maxit=50 * n)
        if not report.converged:
            reliable = False
            break
        mu = float(v @ w)  # Rayleigh quotient of A^-1
        lam_min = 1.0 / mu
        nw = np.linalg.norm(w)
        v = w / nw
        if prev is not None and abs(lam_min - prev) <= 1e-6 * abs(lam_min):
            break
        prev = lam_min

    if lam_min <= 0.0:
        return CondEstimate(np.inf, lam_max, lam_min, False)
    return CondEstimate(lam_max / lam_min, lam_max, lam_min, reliable)
