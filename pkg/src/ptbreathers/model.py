"""Lattice state, PT-symmetric dNLS vector field, energy, charge and symmetries.

Fields live on the truncated lattice n = -N_h..N_h (index 0 of the array is
site -N_h) with zero Dirichlet values beyond the ends.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionError, DomainError


@dataclass(frozen=True)
class ModelParams:
    gamma: float
    omega: float
    eps: float = 0.0
    E: float = 0.0

    def __post_init__(self):
        if not self.eps >= 0.0:
            raise DomainError(f"coupling eps must be >= 0, got {self.eps}")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def require_gain(self) -> None:
        if self.gamma == 0.0:
            raise DomainError("gamma must be nonzero for branch-dependent operations")

    @property
    def E0(self) -> float:
        """sqrt(omega^2 - gamma^2), or nan when |omega| <= |gamma|."""
        rad = self.omega**2 - self.gamma**2
        return math.sqrt(rad) if rad > 0 else math.nan


def half_width_of(values) -> int:
    n = len(values)
    if n % 2 != 1:
        raise DimensionError(f"lattice field must have odd length 2*N_h+1, got {n}")
    return (n - 1) // 2


def as_field(values) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.ndim != 1:
        raise DimensionError("lattice field must be one-dimensional")
    half_width_of(arr)
    if not np.all(np.isfinite(arr)):
        raise DomainError("lattice field has non-finite entries")
    return arr


def zero_field(half_width: int) -> np.ndarray:
    return np.zeros(2 * half_width + 1, dtype=complex)


def site_index(n: int, half_width: int) -> int:
    return n + half_width


@dataclass
class UVState:
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        self.u = as_field(self.u)
        self.v = as_field(self.v)
        if self.u.shape != self.v.shape:
            raise DimensionError(
                f"u and v have different lengths ({self.u.size} != {self.v.size})"
            )

    @property
    def half_width(self) -> int:
        return half_width_of(self.u)

    @classmethod
    def from_stationary(cls, U) -> "UVState":
        """PT-symmetric state (U, conj(U))."""
        U = as_field(U)
        return cls(U.copy(), U.conj())

    def is_pt_symmetric(self, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.v - self.u.conj()), initial=0.0) <= tol)

    def rotated(self, alpha: float) -> "UVState":
        phase = np.exp(1j * alpha)
        return UVState(phase * self.u, phase * self.v)

    def copy(self) -> "UVState":
        return UVState(self.u.copy(), self.v.copy())


def laplacian(x: np.ndarray) -> np.ndarray:
    """Discrete Laplacian x_{n+1} - 2 x_n + x_{n-1} with zero Dirichlet ends."""
    out = -2.0 * x
    out[1:] += x[:-1]
    out[:-1] += x[1:]
    return out


def rhs(u: np.ndarray, v: np.ndarray, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """Right-hand sides of 2i du/dt and 2i dv/dt."""
    au = u.real**2 + u.imag**2
    av = v.real**2 + v.imag**2
    fu = p.omega * v + 1j * p.gamma * u + 2.0 * ((2.0 * au + av) * v + u * u * v.conj())
    fv = p.omega * u - 1j * p.gamma * v + 2.0 * ((au + 2.0 * av) * u + u.conj() * v * v)
    if p.eps:
        fu += p.eps * laplacian(v)
        fv += p.eps * laplacian(u)
    return fu, fv


def vector_field(state: UVState, p: ModelParams) -> UVState:
    """Time derivatives (du/dt, dv/dt) of the PT-dNLS lattice."""
    fu, fv = rhs(state.u, state.v, p)
    return UVState(fu / 2j, fv / 2j)


def stationary_residual(U, p: ModelParams) -> np.ndarray:
    """Residual of the scalar stationary equation for PT-symmetric breathers (V = conj U)."""
    U = as_field(U)
    Ub = U.conj()
    res = p.omega * Ub + 1j * p.gamma * U + 6.0 * np.abs(U) ** 2 * Ub + 2.0 * U**3 - p.E * U
    if p.eps:
        res += p.eps * laplacian(Ub)
    return res


def _link_differences(x: np.ndarray) -> np.ndarray:
    # includes the two links to the zero boundary values
    return np.diff(np.pad(x, 1))


def energy(state: UVState, p: ModelParams) -> float:
    u, v = state.u, state.v
    mass = np.abs(u) ** 2 + np.abs(v) ** 2
    cross = u * v.conj() + u.conj() * v
    total = np.sum(
        mass**2 + cross**2 + p.omega * mass + 1j * p.gamma * (u * v.conj() - u.conj() * v)
    )
    if p.eps:
        total -= p.eps * np.sum(
            np.abs(_link_differences(u)) ** 2 + np.abs(_link_differences(v)) ** 2
        )
    total = complex(total)
    if abs(total.imag) > 1e-12 * (1.0 + abs(total.real)):
        raise ArithmeticError(f"energy acquired an imaginary part {total.imag:.3e}")
    return total.real


def charge(state: UVState) -> float:
    return float(2.0 * np.sum(state.u * state.v.conj()).real)


def ab_to_uv(A, B) -> UVState:
    A = as_field(A)
    B = as_field(B)
    if A.shape != B.shape:
        raise DimensionError("A and B must have equal lengths")
    return UVState((A - 1j * B.conj()) / 4.0, (A + 1j * B.conj()) / 4.0)


def uv_to_ab(state: UVState) -> tuple[np.ndarray, np.ndarray]:
    A = 2.0 * (state.u + state.v)
    B = 2j * (state.v - state.u).conj()
    return A, B


def pt_apply(state: UVState, reverse_time: bool = False) -> UVState:
    """Parity swaps the u and v blocks; with ``reverse_time`` entries are also conjugated.

    The t -> -t part of time reversal is left to whoever handles trajectories.
    """
    if reverse_time:
        return UVState(state.v.conj(), state.u.conj())
    return UVState(state.v.copy(), state.u.copy())
