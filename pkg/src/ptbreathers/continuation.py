"""Continuation of dimer points into lattice breathers by damped Newton iteration."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .dimer import DimerPoint, solve_for_E
from .errors import DivergenceError, DomainError, PreconditionError, SingularityError
from .model import ModelParams, UVState, as_field, half_width_of, stationary_residual, zero_field

log = logging.getLogger(__name__)

ENDPOINT_EXCLUSION = 1e-3


@dataclass
class BreatherSolution:
    params: ModelParams
    field: np.ndarray
    seed: DimerPoint | None
    residual_norm: float
    newton_iters: int
    symmetric: bool

    @property
    def half_width(self) -> int:
        return half_width_of(self.field)

    @property
    def state(self) -> UVState:
        return UVState.from_stationary(self.field)

    @property
    def center(self) -> complex:
        return complex(self.field[self.half_width])

    def deviation_from_seed(self) -> float:
        """|U_0 - A e^{i theta}| + sup_{n != 0} |U_n|."""
        if self.seed is None:
            raise PreconditionError("solution carries no dimer seed")
        tail = np.delete(np.abs(self.field), self.half_width)
        return abs(self.center - self.seed.U0) + float(tail.max(initial=0.0))


def seed(pt: DimerPoint, half_width: int) -> np.ndarray:
    if half_width < 1:
        raise DomainError("half_width must be >= 1")
    U = zero_field(half_width)
    U[half_width] = pt.U0
    return U


def _laplacian_matrix(m: int, folded: bool) -> np.ndarray:
    lap = -2.0 * np.eye(m) + np.eye(m, k=1) + np.eye(m, k=-1)
    if folded:
        # unknowns n = 0..N_h with U_{-1} = U_1
        lap[0, 1] = 2.0
    return lap


def _unfold(half: np.ndarray) -> np.ndarray:
    return np.concatenate([half[:0:-1], half])


class _System:
    """Residual and real Jacobian in the unknowns (Re U, Im U)."""

    def __init__(self, p: ModelParams, m: int, folded: bool):
        self.p = p
        self.m = m
        self.folded = folded
        self.lap = _laplacian_matrix(m, folded)

    def full(self, U: np.ndarray) -> np.ndarray:
        return _unfold(U) if self.folded else U

    def residual(self, U: np.ndarray) -> np.ndarray:
        res = stationary_residual(self.full(U), self.p)
        return res[self.m - 1 :] if self.folded else res

    def jacobian(self, U: np.ndarray) -> np.ndarray:
        p = self.p
        a = 1j * p.gamma + 6.0 * (U**2 + U.conj() ** 2) - p.E
        B = p.eps * self.lap + np.diag(p.omega + 12.0 * np.abs(U) ** 2)
        ra, ia = np.diag(a.real), np.diag(a.imag)
        return np.block([[ra + B, -ia], [ia, ra - B]])


def _pack(U):
    return np.concatenate([U.real, U.imag])


def _unpack(x):
    m = x.size // 2
    return x[:m] + 1j * x[m:]


def _sup(res):
    return float(np.max(np.abs(res), initial=0.0))


def newton_solve(
    seed_field,
    p: ModelParams,
    tol: float = 1e-12,
    max_iters: int = 50,
    *,
    seed_point: DimerPoint | None = None,
    enforce_symmetry: bool = False,
    rcond_min: float = 1e-13,
) -> BreatherSolution:
    """Damped Newton iteration on the truncated stationary equation.

    The Jacobian is checked at the starting point, so an exactly solved but
    degenerate seed (e.g. the exceptional dimer point) is still reported.
    """
    U_full = as_field(seed_field)
    N = half_width_of(U_full)
    system = _System(p, N + 1 if enforce_symmetry else 2 * N + 1, enforce_symmetry)
    U = U_full[N:].copy() if enforce_symmetry else U_full.copy()

    def solve_step(U, res):
        J = system.jacobian(U)
        sv = np.linalg.svd(J, compute_uv=False)
        if sv[-1] <= rcond_min * sv[0]:
            raise SingularityError(
                f"stationary Jacobian is singular (rcond={sv[-1] / sv[0]:.2e}) "
                f"at gamma={p.gamma}, omega={p.omega}, E={p.E}, eps={p.eps}"
            )
        return _unpack(np.linalg.solve(J, -_pack(res)))

    res = system.residual(U)
    norm = _sup(res)
    step = solve_step(U, res)
    iters = 0
    while norm > tol:
        if iters >= max_iters:
            raise DivergenceError(
                f"Newton did not converge in {max_iters} iterations (residual {norm:.3e})",
                residual=norm,
            )
        if iters:
            step = solve_step(U, res)
        t = 1.0
        for _ in range(40):
            trial = U + t * step
            trial_res = system.residual(trial)
            trial_norm = _sup(trial_res)
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            t *= 0.5
        else:
            raise DivergenceError(
                f"damped Newton stalled at residual {norm:.3e}", residual=norm
            )
        U, res, norm = trial, trial_res, trial_norm
        iters += 1

    if iters:
        # one polishing step; kept only if it helps
        trial = U + solve_step(U, res)
        trial_res = system.residual(trial)
        if _sup(trial_res) < norm:
            U, res, norm = trial, trial_res, _sup(trial_res)

    out = system.full(U)
    return BreatherSolution(
        params=p,
        field=out,
        seed=seed_point,
        residual_norm=_sup(stationary_residual(out, p)),
        newton_iters=iters,
        symmetric=bool(np.max(np.abs(out - out[::-1])) <= 1e-12),
    )


@dataclass
class EpsContinuation:
    solutions: list[BreatherSolution]
    eps_target: float
    failure: str | None = None

    @property
    def eps_reached(self) -> float:
        return self.solutions[-1].params.eps if self.solutions else math.nan

    @property
    def completed(self) -> bool:
        return self.failure is None

    def __len__(self):
        return len(self.solutions)

    def __iter__(self):
        return iter(self.solutions)

    def __getitem__(self, i):
        return self.solutions[i]


def continue_eps(
    pt: DimerPoint,
    p: ModelParams,
    eps_values,
    half_width: int = 20,
    *,
    tol: float = 1e-12,
    max_iters: int = 50,
    max_halvings: int = 6,
) -> EpsContinuation:
    """Continue the dimer point ``pt`` along an ascending list of couplings.

    Each converged solution warm-starts the next one (with a secant predictor
    once two are available).  A failing step is bisected up to ``max_halvings``
    times; if it still fails the run stops and reports the coupling reached.
    """
    eps_values = [float(e) for e in eps_values]
    if not eps_values:
        raise DomainError("eps_values is empty")
    if any(b <= a for a, b in zip(eps_values, eps_values[1:])):
        raise DomainError("eps_values must be strictly ascending")
    base = p.with_(E=pt.E)

    first = newton_solve(
        seed(pt, half_width),
        base.with_(eps=eps_values[0]),
        tol,
        max_iters,
        seed_point=pt,
    )
    sols = [first]
    # accepted (eps, field) pairs including intermediate bisection steps
    history = [(eps_values[0], first.field)]

    def predict(eps):
        if len(history) < 2:
            return history[-1][1]
        (e1, f1), (e2, f2) = history[-2], history[-1]
        return f2 + (eps - e2) / (e2 - e1) * (f2 - f1)

    for target in eps_values[1:]:
        goal = target
        halvings = 0
        while True:
            try:
                sol = newton_solve(
                    predict(goal), base.with_(eps=goal), tol, max_iters, seed_point=pt
                )
            except (DivergenceError, SingularityError) as exc:
                if halvings >= max_halvings:
                    reason = f"failed at eps={goal:.6g}: {exc}"
                    log.info("continuation stopped: %s", reason)
                    return EpsContinuation(sols, eps_values[-1], failure=reason)
                goal = 0.5 * (history[-1][0] + goal)
                halvings += 1
                continue
            history.append((goal, sol.field))
            if goal == target:
                sols.append(sol)
                break
            goal = target
    return EpsContinuation(sols, eps_values[-1])


def eps_ladder(eps: float, step: float = 0.005) -> list[float]:
    n = max(1, math.ceil(eps / step - 1e-9))
    return list(np.linspace(0.0, eps, n + 1))


def solve_breather(
    branch: str,
    p: ModelParams,
    half_width: int = 20,
    *,
    eps_step: float = 0.005,
    tol: float = 1e-12,
) -> BreatherSolution:
    """Breather at (p.E, p.eps) on ``branch``, continued from the dimer limit."""
    pt = solve_for_E(p.E, p, branch)
    if p.eps == 0.0:
        return newton_solve(seed(pt, half_width), p, tol, seed_point=pt)
    run = continue_eps(pt, p, eps_ladder(p.eps, eps_step), half_width, tol=tol)
    if not run.completed:
        raise DivergenceError(f"branch {branch}, E={p.E}: {run.failure}")
    return run.solutions[-1]


def near_endpoint(E: float, p: ModelParams, margin: float = ENDPOINT_EXCLUSION) -> bool:
    marks = [0.0]
    if abs(p.omega) > abs(p.gamma):
        marks += [p.E0, -p.E0]
    return any(abs(E - m) < margin for m in marks)


@dataclass
class ESweep:
    branch: str
    E_grid: list[float]
    solutions: list[BreatherSolution | None]
    failures: dict[int, str] = field(default_factory=dict)

    def converged(self) -> list[BreatherSolution]:
        return [s for s in self.solutions if s is not None]


def continue_E(
    branch: str,
    E_grid,
    p: ModelParams,
    half_width: int = 20,
    *,
    tol: float = 1e-12,
    exclude_endpoints: bool = True,
) -> ESweep:
    """Warm-started sweep along E at fixed coupling ``p.eps``; failures are recorded."""
    E_grid = [float(E) for E in E_grid]
    sols: list[BreatherSolution | None] = []
    failures: dict[int, str] = {}
    prev: BreatherSolution | None = None
    for i, E in enumerate(E_grid):
        q = p.with_(E=E)
        if exclude_endpoints and near_endpoint(E, q):
            failures[i] = "excluded: within endpoint margin of E in {0, +-E0}"
            sols.append(None)
            prev = None
            continue
        sol = None
        if prev is not None:
            try:
                pt = solve_for_E(E, q, branch)
                sol = newton_solve(prev.field, q, tol, seed_point=pt)
                if abs(sol.center - pt.U0) > 0.5 * max(pt.amplitude, 1e-3) + 10 * q.eps:
                    # drifted onto a different solution family
                    sol = None
            except (DivergenceError, SingularityError):
                sol = None
        if sol is None:
            try:
                sol = solve_breather(branch, q, half_width, tol=tol)
            except (DivergenceError, SingularityError, DomainError) as exc:
                failures[i] = f"{type(exc).__name__}: {exc}"
        sols.append(sol)
        prev = sol
    return ESweep(branch, E_grid, sols, failures)
