"""ADMM splitting for the finite-dimensional tensor problem

    min_c  (1/N) sum_i L(y_i, (A c^{2m-1})_i) + lam * A c^{2m}

split as alpha = A c^{2m-1}. Each outer iteration does

1. alpha-step: N independent scalar proximal problems,
2. c-step: Newton's method on the strictly convex tensor equation
   A c^{2m-1} + kappa c = alpha + gamma/beta,  kappa = 2m lam / ((2m-1) beta),
3. gamma-step: gamma = 2m lam / (2m-1) * c, which is what the usual
   multiplier update reduces to at an exact c-step.

It stops once |alpha - A c^{2m-1}| < eps2.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.linalg.lapack import dposv as posv

from .losses import LossSpec, prox_vector
from .tensor import (
    TensorHandle,
    contract_2m_minus_1,
    int_power,
    objective_value,
)

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e8
MAX_HALVINGS = 30
# default stopping level for the primal residual, per coordinate (RMS)
DEFAULT_RESIDUAL_RMS = 1e-12
TRACE_COLUMNS = ("k", "lagrangian", "primal_residual", "psi_increment", "newton_iters", "objective")


class SolverDivergence(RuntimeError):
    """Raised when the iterates blow up or stop being finite."""


class NewtonSolveError(RuntimeError):
    """The Newton system could not be factored (should not happen for lam > 0)."""


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.04
    beta: float = 0.1
    m: int = 1
    eps1: float = 1e-10
    eps2: float | None = None
    max_outer: int = 5000
    max_newton: int = 50
    restarts: int = 20
    seed: int = 0
    init_box: tuple = (-1.0, 1.0)

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam}")
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError(f"m must be a positive integer, got {self.m}")
        if not (self.eps1 > 0 and (self.eps2 is None or self.eps2 > 0)):
            raise ValueError("tolerances must be positive")
        for name in ("max_outer", "max_newton", "restarts"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        lo, hi = self.init_box
        if not lo < hi:
            raise ValueError(f"init_box needs lo < hi, got {self.init_box}")
        object.__setattr__(self, "init_box", (float(lo), float(hi)))

    @property
    def kappa(self) -> float:
        """Coefficient of c in the tensor equation solved by the c-step."""
        return 2 * self.m * self.lam / ((2 * self.m - 1) * self.beta)

    def residual_tolerance(self, N: int) -> float:
        """Stopping threshold on |alpha - A c^{2m-1}|; 1e-12 * sqrt(N) unless ``eps2`` is set."""
        return DEFAULT_RESIDUAL_RMS * math.sqrt(N) if self.eps2 is None else float(self.eps2)

    @property
    def gamma_factor(self) -> float:
        return 2 * self.m * self.lam / (2 * self.m - 1)


@dataclass(frozen=True)
class TraceRecord:
    k: int
    lagrangian: float
    primal_residual: float
    psi_increment: float
    newton_iters: int
    objective: float


@dataclass
class SolveResult:
    c_star: np.ndarray
    objective: float
    converged: bool
    iterations: int
    trace: list = field(default_factory=list)
    restart_index: int = 0


@dataclass(frozen=True)
class NewtonResult:
    c: np.ndarray
    newton_iters: int
    grad_norm: float


@dataclass(frozen=True)
class DescentAudit:
    monotone_from: int | None
    violations: tuple


def _newton_directions(t: TensorHandle, U: np.ndarray, G: np.ndarray, kappa: float, cache: dict) -> np.ndarray:
    """Solve [(2m-1) B^T diag(u_r^{2m-2}) B + kappa I] d_r = -g_r for every column r.

    For m = 1 the matrix does not depend on u, so one Cholesky factor is
    shared by all columns and kept in ``cache``. Otherwise each column gets
    its own factorization, of size M x M via Woodbury when M < N and
    kappa > 0, else N x N.
    """
    B = t.B
    try:
        if t.m == 1:
            fac = cache.get("m1")
            if fac is None:
                if kappa > 0 and t.M < t.N:
                    K = t.gram_rows.copy()
                    K[np.diag_indices_from(K)] += kappa
                else:
                    K = B.T @ B
                    K = 0.5 * (K + K.T)
                    K[np.diag_indices_from(K)] += kappa
                fac = cache["m1"] = cho_factor(K, lower=True, check_finite=False)
            if kappa > 0 and t.M < t.N:
                inner = cho_solve(fac, B @ G, check_finite=False)
                return -(G - B.T @ inner) / kappa
            return -cho_solve(fac, G, check_finite=False)

        W = (2 * t.m - 1) * int_power(U, 2 * t.m - 2)
        if kappa > 0 and t.M < t.N:
            # Woodbury: only M x M systems are needed when M < N
            S = np.sqrt(W)
            K = S.T[:, :, None] * t.gram_rows[None] * S.T[:, None, :]
            K[:, np.arange(t.M), np.arange(t.M)] += kappa
            inner = _posv_columns(K, S * (B @ G))
            return -(G - B.T @ (S * inner)) / kappa
        H = np.einsum("mi,mr,mj->rij", B, W, B)
        H = 0.5 * (H + np.swapaxes(H, 1, 2))
        H[:, np.arange(t.N), np.arange(t.N)] += kappa
        return -_posv_columns(H, G)
    except (LinAlgError, ValueError) as exc:
        raise NewtonSolveError(f"Newton system is numerically singular: {exc}") from exc


def _posv_columns(K: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    # column r of the result solves K[r] x = rhs[:, r] by Cholesky
    out = np.empty_like(rhs)
    for r in range(K.shape[0]):
        _, x, info = posv(K[r], rhs[:, r], lower=True)
        if info != 0:
            raise NewtonSolveError(f"Newton system is not positive definite (LAPACK info {info})")
        out[:, r] = x
    return out


def tensor_equation_gradient(t: TensorHandle, c, r, kappa: float) -> np.ndarray:
    """Gradient of H(c) = A c^{2m}/(2m) + kappa/2 |c|^2 - r^T c."""
    return contract_2m_minus_1(t, c) + kappa * np.asarray(c, dtype=float) - r


def _gradients(t: TensorHandle, C: np.ndarray, Rhs: np.ndarray, kappa: float):
    U = t.B @ C
    G = t.B.T @ int_power(U, 2 * t.m - 1) + kappa * C - Rhs
    return U, G, np.linalg.norm(G, axis=0)


def _newton_batch(t: TensorHandle, Rhs: np.ndarray, kappa: float, C0: np.ndarray, eps1: float,
                  max_newton: int, cache: dict | None = None):
    """Newton's method column by column on A c^{2m-1} + kappa c = r.

    Returns the solutions, per-column iteration counts and final gradient
    norms. Columns are independent; they are only stacked to share the
    matrix products.
    """
    cache = {} if cache is None else cache
    C = np.array(C0, dtype=float)
    U, G, gnorm = _gradients(t, C, Rhs, kappa)
    iters = np.zeros(C.shape[1], dtype=int)
    active = gnorm > 0.0
    for _ in range(max_newton):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        Ca, Ra, ga = C[:, idx], Rhs[:, idx], gnorm[idx]
        D = _newton_directions(t, U[:, idx], G[:, idx], kappa, cache)
        iters[idx] += 1
        step = D
        Cn = Ca + step
        Un, Gn, gn = _gradients(t, Cn, Ra, kappa)
        if t.m > 1:
            pending = ~(gn < ga)
            step = step.copy()
            for _ in range(MAX_HALVINGS):
                if not pending.any():
                    break
                p = np.flatnonzero(pending)
                step[:, p] *= 0.5
                Ct = Ca[:, p] + step[:, p]
                Ut, Gt, gt = _gradients(t, Ct, Ra[:, p], kappa)
                ok = gt < ga[p]
                q = p[ok]
                Cn[:, q], Un[:, q], Gn[:, q], gn[q] = Ct[:, ok], Ut[:, ok], Gt[:, ok], gt[ok]
                pending[q] = False
            # nothing helped: keep the full step
            step[:, pending] = D[:, pending]
        C[:, idx], U[:, idx], G[:, idx], gnorm[idx] = Cn, Un, Gn, gn
        if not np.all(np.isfinite(Cn)):
            raise SolverDivergence("Newton iterate is not finite")
        done = np.linalg.norm(step, axis=0) < eps1
        if t.m == 1:
            done[:] = True
        active[idx[done | (gn == 0.0)]] = False
    return C, iters, gnorm


def solve_tensor_equation(t: TensorHandle, r, kappa: float, c0, eps1: float = 1e-10,
                          max_newton: int = 50) -> NewtonResult:
    """Newton's method for A c^{2m-1} + kappa c = r, warm-started at ``c0``.

    Full Newton steps are taken unless they fail to shrink |grad H|, in
    which case the step is halved (at most 30 times; if nothing helps the
    full step is kept). Stops when the step norm drops below ``eps1``; for
    m = 1 the equation is linear and one step is exact.
    """
    r = np.asarray(r, dtype=float).reshape(-1, 1)
    c0 = np.asarray(c0, dtype=float).reshape(-1, 1)
    C, iters, gnorm = _newton_batch(t, r, kappa, c0, eps1, max_newton)
    return NewtonResult(C[:, 0], int(iters[0]), float(gnorm[0]))


def alpha_step(t: TensorHandle, c, gamma, loss: LossSpec, labels, beta: float) -> np.ndarray:
    """Proximal step on every coordinate, centred at A c^{2m-1} - gamma/beta."""
    labels = np.asarray(getattr(labels, "labels", labels), dtype=float)
    e = contract_2m_minus_1(t, c) - np.asarray(gamma, dtype=float) / beta
    return prox_vector(loss, labels, e, beta, t.N)


def newton_c_step(t: TensorHandle, alpha, gamma, config: SolverConfig, c0) -> NewtonResult:
    r = np.asarray(alpha, dtype=float) + np.asarray(gamma, dtype=float) / config.beta
    return solve_tensor_equation(t, r, config.kappa, c0, config.eps1, config.max_newton)


def gamma_step(c, lam: float, m: int) -> np.ndarray:
    return (2 * m * lam / (2 * m - 1)) * np.asarray(c, dtype=float)


def psi_increment(t: TensorHandle, c_prev, c_next) -> float:
    """(sum_n |Phi_n^T (c_next - c_prev)|^{2m})^{1/(2m)}."""
    diff = np.asarray(c_next, dtype=float) - np.asarray(c_prev, dtype=float)
    return float(_psi_columns(t, diff[:, None])[0])


def _solve_batch(t: TensorHandle, loss: LossSpec, labels: np.ndarray, config: SolverConfig,
                 C0: np.ndarray) -> list:
    """Run one independent splitting iteration per column of ``C0``.

    Every column follows exactly its own iteration and stops on its own
    residual test; stacking them only amortizes interpreter overhead.
    Returns a ``SolveResult`` or the raised error for each column.
    """
    N, R = C0.shape
    beta, lam, m = config.beta, config.lam, config.m
    eps2 = config.residual_tolerance(N)
    cache: dict = {}
    C = np.array(C0, dtype=float)
    Gam = config.gamma_factor * C
    lab = labels[:, None]
    columns = {key: [[] for _ in range(R)] for key in TRACE_COLUMNS[1:]}
    outcome: list = [None] * R
    active = np.arange(R)
    k = 0
    for k in range(1, config.max_outer + 1):
        if active.size == 0:
            break
        Ca, Ga = C[:, active], Gam[:, active]
        E = t.B.T @ int_power(t.B @ Ca, 2 * m - 1) - Ga / beta
        alpha = prox_vector(loss, lab, E, beta, N)
        try:
            Cn, iters, _ = _newton_batch(t, alpha + Ga / beta, config.kappa, Ca, config.eps1,
                                         config.max_newton, cache)
        except (SolverDivergence, NewtonSolveError) as exc:
            # isolate the offending columns by retrying them one at a time
            Cn = np.full_like(Ca, np.nan)
            iters = np.zeros(active.size, dtype=int)
            for j in range(active.size):
                try:
                    Cn[:, j:j + 1], iters[j:j + 1], _ = _newton_batch(
                        t, alpha[:, j:j + 1] + Ga[:, j:j + 1] / beta, config.kappa, Ca[:, j:j + 1],
                        config.eps1, config.max_newton, cache)
                except (SolverDivergence, NewtonSolveError) as col_exc:
                    exc = col_exc
        Gn = config.gamma_factor * Cn
        Un = t.B @ Cn
        F = t.B.T @ int_power(Un, 2 * m - 1)
        reg = lam * np.sum(int_power(Un, 2 * m), axis=0)
        resid_vec = alpha - F
        residual = np.linalg.norm(resid_vec, axis=0)
        lagr = (np.mean(loss.evaluate(lab, alpha), axis=0) + reg
                + np.sum(Gn * resid_vec, axis=0) + 0.5 * beta * np.sum(resid_vec * resid_vec, axis=0))
        objective = np.mean(loss.evaluate(lab, F), axis=0) + reg
        psi = _psi_columns(t, Cn - Ca)
        C[:, active], Gam[:, active] = Cn, Gn

        finite = np.isfinite(lagr) & np.all(np.isfinite(Cn), axis=0)
        keep = np.ones(active.size, dtype=bool)
        for j, col in enumerate(active):
            for key, val in (("lagrangian", lagr[j]), ("primal_residual", residual[j]),
                             ("psi_increment", psi[j]), ("newton_iters", iters[j]), ("objective", objective[j])):
                columns[key][col].append(val)
            if not finite[j]:
                outcome[col] = SolverDivergence(f"non-finite iterate or Lagrangian at outer iteration {k}")
            elif residual[j] > DIVERGENCE_LIMIT:
                outcome[col] = SolverDivergence(
                    f"primal residual {residual[j]:.3e} exceeds {DIVERGENCE_LIMIT:.0e} at iteration {k}")
            elif residual[j] < eps2:
                outcome[col] = True
            if outcome[col] is not None:
                keep[j] = False
                _finish(outcome, columns, col, C, k)
        active = active[keep]
    for col in active:
        outcome[col] = False
        _finish(outcome, columns, col, C, k)
    for col in range(R):
        if isinstance(outcome[col], SolveResult):
            res = outcome[col]
            res.objective = objective_value(t, res.c_star, loss, labels, lam)
    return outcome


def _run_batch(t, loss, labels, config, C0):
    # overflow is caught by the explicit divergence checks, so keep numpy quiet
    with np.errstate(over="ignore", invalid="ignore"):
        return _solve_batch(t, loss, labels, config, C0)


def _finish(outcome: list, columns: dict, col: int, C: np.ndarray, k: int) -> None:
    flag = outcome[col]
    if isinstance(flag, Exception):
        return
    n = len(columns["lagrangian"][col])
    trace = [TraceRecord(i + 1, float(columns["lagrangian"][col][i]), float(columns["primal_residual"][col][i]),
                         float(columns["psi_increment"][col][i]), int(columns["newton_iters"][col][i]),
                         float(columns["objective"][col][i]))
             for i in range(n)]
    for key in columns:
        columns[key][col] = None
    outcome[col] = SolveResult(C[:, col].copy(), math.nan, bool(flag), n, trace)


def _psi_columns(t: TensorHandle, Dc: np.ndarray) -> np.ndarray:
    U = t.B @ Dc
    scale = np.max(np.abs(U), axis=0) if U.shape[0] else np.zeros(U.shape[1])
    safe = np.where(scale > 0.0, scale, 1.0)
    # scale out the largest entry so high powers cannot overflow
    val = safe * np.sum(int_power(U / safe, 2 * t.m), axis=0) ** (1.0 / (2 * t.m))
    return np.where(scale > 0.0, val, 0.0)


def _check_problem(t: TensorHandle, data, config: SolverConfig) -> np.ndarray:
    if t.m != config.m:
        raise ValueError(f"tensor handle has m={t.m} but config has m={config.m}")
    labels = np.asarray(getattr(data, "labels", data), dtype=float)
    if labels.shape != (t.N,):
        raise ValueError(f"expected {t.N} labels, got shape {labels.shape}")
    return labels


def solve(t: TensorHandle, loss: LossSpec, data, config: SolverConfig, c0) -> SolveResult:
    """Run the splitting iteration from ``c0``.

    ``gamma`` starts at the value consistent with ``c0``. One trace record
    is kept per outer iteration.
    """
    labels = _check_problem(t, data, config)
    c = np.asarray(c0, dtype=float)
    if c.shape != (t.N,):
        raise ValueError(f"c0 must have shape ({t.N},), got {c.shape}")
    out = _run_batch(t, loss, labels, config, c[:, None])[0]
    if isinstance(out, Exception):
        raise out
    return out


def initial_coefficients(config: SolverConfig, N: int, restart: int) -> np.ndarray:
    """Uniform draw from ``init_box`` for the given restart (seed XOR restart)."""
    rng = np.random.default_rng(config.seed ^ restart)
    lo, hi = config.init_box
    return rng.uniform(lo, hi, size=N)


def solve_restarts(t: TensorHandle, loss: LossSpec, data, config: SolverConfig, n_jobs: int = 1) -> list:
    """Every restart's ``SolveResult`` (or the error it raised), in restart order.

    Restarts are stacked into one batch, or ``n_jobs`` contiguous batches run
    on threads. The partition never changes which iterates a restart visits.
    """
    labels = _check_problem(t, data, config)
    C0 = np.stack([initial_coefficients(config, t.N, j) for j in range(config.restarts)], axis=1)
    chunks = np.array_split(np.arange(config.restarts), max(1, min(n_jobs, config.restarts)))
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(lambda ix: _run_batch(t, loss, labels, config, C0[:, ix]), chunks))
    else:
        parts = [_run_batch(t, loss, labels, config, C0)]
    outcomes = [o for part in parts for o in part]
    for j, o in enumerate(outcomes):
        if isinstance(o, SolveResult):
            o.restart_index = j
        else:
            log.warning("restart %d failed: %s", j, o)
    return outcomes


def multi_start_solve(t: TensorHandle, loss: LossSpec, data, config: SolverConfig,
                      n_jobs: int = 1) -> SolveResult:
    """Best of ``config.restarts`` runs by final objective (ties: lowest restart).

    Restarts that diverge are logged and skipped; if all of them diverge
    the last error is raised.
    """
    outcomes = solve_restarts(t, loss, data, config, n_jobs)
    results = [o for o in outcomes if isinstance(o, SolveResult)]
    if not results:
        raise outcomes[-1]
    # min() keeps the first of equal objectives, i.e. the lowest restart index
    return min(results, key=lambda r: r.objective)


def _lagrangians(trace) -> list[float]:
    return [rec.lagrangian if isinstance(rec, TraceRecord) else float(rec) for rec in trace]


def descent_audit(trace, slack: float = 1e-8) -> DescentAudit:
    """Locate where the recorded Lagrangian values stop increasing.

    A violation at index k means L[k] > L[k-1] + slack * (1 + |L[k-1]|).
    ``monotone_from`` is the index of the last violation (the sequence is
    nonincreasing from there on), 0 when there is none, and None when the
    very last step is itself an increase.
    """
    values = _lagrangians(trace)
    if not values:
        raise ValueError("trace is empty")
    violations = tuple(
        k for k in range(1, len(values))
        if values[k] > values[k - 1] + slack * (1.0 + abs(values[k - 1]))
    )
    if not violations:
        return DescentAudit(0, ())
    last = violations[-1]
    return DescentAudit(None if last == len(values) - 1 else last, violations)


def write_trace_csv(trace: Sequence[TraceRecord], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for rec in trace:
            writer.writerow([rec.k, repr(rec.lagrangian), repr(rec.primal_residual),
                             repr(rec.psi_increment), rec.newton_iters, repr(rec.objective)])


def read_trace_csv(path) -> list[TraceRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [TraceRecord(int(r["k"]), float(r["lagrangian"]), float(r["primal_residual"]),
                        float(r["psi_increment"]), int(r["newton_iters"]), float(r["objective"]))
            for r in rows]
