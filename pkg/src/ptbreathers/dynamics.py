"""Time integration of the PT-dNLS lattice, its linearization and the pendula chain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuation import BreatherSolution
from .dimer import DimerPoint
from .errors import DomainError, PreconditionError
from .model import (
    ModelParams,
    UVState,
    ab_to_uv,
    as_field,
    charge,
    energy,
    laplacian,
    rhs,
    uv_to_ab,
    zero_field,
)

BLOWUP_NORM = 1e6


def rk4_step(f, t, y, h):
    k1 = f(t, y)
    k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
    k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
    k4 = f(t + h, y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _steps(T: float, dt: float) -> tuple[int, float]:
    if not dt > 0:
        raise DomainError("dt must be positive")
    n = max(1, math.ceil(abs(T) / dt - 1e-9))
    return n, T / n


@dataclass
class TrajectorySample:
    t: float
    state: UVState
    H: float
    Q: float


@dataclass
class Trajectory:
    samples: list[TrajectorySample]
    diverged: bool = False
    blowup_time: float | None = None

    def __len__(self):
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    def __getitem__(self, i):
        return self.samples[i]

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.samples])


def _sample(t, y, m, p):
    state = UVState(y[:m].copy(), y[m:].copy())
    return TrajectorySample(t, state, energy(state, p), charge(state))


def integrate_pt_dnls(
    initial: UVState,
    p: ModelParams,
    T: float,
    dt: float = 1e-3,
    sample_every: int = 100,
) -> Trajectory:
    """Classical RK4 for the PT-dNLS lattice; negative T integrates backwards."""
    if dt > 1e-2:
        raise DomainError(f"dt must be <= 1e-2, got {dt}")
    n, h = _steps(T, dt)
    m = initial.u.size
    y = np.concatenate([initial.u, initial.v]).astype(complex)

    def f(_t, y):
        fu, fv = rhs(y[:m], y[m:], p)
        return np.concatenate([fu, fv]) / 2j

    samples = [_sample(0.0, y, m, p)]
    for k in range(1, n + 1):
        y = rk4_step(f, (k - 1) * h, y, h)
        t = k * h
        if not np.all(np.isfinite(y)) or np.max(np.abs(y)) > BLOWUP_NORM:
            return Trajectory(samples, diverged=True, blowup_time=t)
        if k % sample_every == 0 or k == n:
            samples.append(_sample(t, y, m, p))
    return Trajectory(samples)


def linearized_rhs(U: np.ndarray, p: ModelParams):
    """Right side of d(u, v)/dt for perturbations of the breather in the rotating frame."""
    U = as_field(U)
    V = U.conj()
    aU, aV = np.abs(U) ** 2, np.abs(V) ** 2

    def f(_t, y):
        m = y.size // 2
        a, b = y[:m], y[m:]
        du = U.conj() * a + U * a.conj()
        dv = V.conj() * b + V * b.conj()
        fu = (
            p.omega * b
            + 1j * p.gamma * a
            + 2.0 * ((2.0 * du + dv) * V + (2.0 * aU + aV) * b + 2.0 * U * a * V.conj() + U * U * b.conj())
            - p.E * a
        )
        fv = (
            p.omega * a
            - 1j * p.gamma * b
            + 2.0 * ((du + 2.0 * dv) * U + (aU + 2.0 * aV) * a + a.conj() * V * V + 2.0 * U.conj() * V * b)
            - p.E * b
        )
        if p.eps:
            fu += p.eps * laplacian(b)
            fv += p.eps * laplacian(a)
        return np.concatenate([fu, fv]) / 2j

    return f


@dataclass
class LinearizedGrowth:
    growth_rate: float
    inconclusive: bool
    fit_residual: float
    times: np.ndarray
    log_norm: np.ndarray


def integrate_linearized(
    sol: BreatherSolution,
    perturbation: UVState,
    T: float,
    dt: float = 1e-3,
    sample_every: int = 100,
) -> LinearizedGrowth:
    """Growth rate of the linearized flow: slope of log|perturbation| over the second half of [0, T]."""
    if T <= 0:
        raise DomainError("T must be positive")
    f = linearized_rhs(sol.field, sol.params)
    n, h = _steps(T, dt)
    y = np.concatenate([perturbation.u, perturbation.v]).astype(complex)
    nrm = np.linalg.norm(y)
    if nrm == 0:
        raise DomainError("perturbation must be nonzero")
    y /= nrm
    log_scale = 0.0
    times, logs = [0.0], [0.0]
    for k in range(1, n + 1):
        y = rk4_step(f, (k - 1) * h, y, h)
        nrm = np.linalg.norm(y)
        if nrm > 1e3 or nrm < 1e-3:
            log_scale += math.log(nrm)
            y /= nrm
            nrm = 1.0
        if k % sample_every == 0 or k == n:
            times.append(k * h)
            logs.append(log_scale + math.log(nrm))
    times, logs = np.array(times), np.array(logs)
    tail = times >= 0.5 * times[-1]
    slope, icpt = np.polyfit(times[tail], logs[tail], 1)
    resid = logs[tail] - (slope * times[tail] + icpt)
    rise = abs(slope) * (times[tail][-1] - times[tail][0])
    rel = float(np.sqrt(np.mean(resid**2)) / rise) if rise > 0 else math.inf
    inconclusive = bool(slope > 1e-3 and rel > 0.1)
    return LinearizedGrowth(float(slope), inconclusive, rel, times, logs)


def orbit_deviation(state: UVState, ref: UVState) -> float:
    """min over alpha of |e^{i alpha} psi - Phi| in l2, using the optimal phase -arg<Phi, psi>."""
    psi = np.concatenate([state.u, state.v])
    phi = np.concatenate([ref.u, ref.v])
    overlap = np.vdot(phi, psi)
    phase = np.conj(overlap) / abs(overlap) if overlap != 0 else 1.0
    return float(np.linalg.norm(phase * psi - phi))


@dataclass
class ProbeResult:
    max_deviation: float
    times: np.ndarray
    deviations: np.ndarray
    blowup_time: float | None = None


def random_perturbation(half_width: int, delta: float, seed: int = 0) -> UVState:
    rng = np.random.default_rng(seed)
    m = 2 * half_width + 1
    z = rng.standard_normal((2, m)) + 1j * rng.standard_normal((2, m))
    z *= delta / np.linalg.norm(z)
    return UVState(z[0], z[1])


def orbital_probe(
    sol: BreatherSolution,
    delta: float,
    T: float,
    dt: float = 1e-2,
    *,
    sample_every: int = 10,
    seed: int = 0,
    perturbation: UVState | None = None,
) -> ProbeResult:
    """Largest gauge-reduced distance from the breather orbit along a perturbed trajectory."""
    if delta > 1e-2:
        raise DomainError("delta must be <= 1e-2")
    ref = sol.state
    if perturbation is None:
        perturbation = random_perturbation(sol.half_width, delta, seed) if delta > 0 else None
    start = ref.copy()
    if perturbation is not None:
        start = UVState(start.u + perturbation.u, start.v + perturbation.v)
    traj = integrate_pt_dnls(start, sol.params, T, dt, sample_every)
    E = sol.params.E
    times = traj.times
    devs = np.array(
        [orbit_deviation(s.state.rotated(0.5 * E * s.t), ref) for s in traj.samples]
    )
    if traj.diverged:
        return ProbeResult(math.inf, times, devs, traj.blowup_time)
    return ProbeResult(float(devs.max()), times, devs)


@dataclass(frozen=True)
class PendulaParams:
    mu: float
    gamma: float
    omega_detune: float
    eps_coupling: float

    def __post_init__(self):
        if not 0.0 < self.mu <= 0.5:
            raise PreconditionError(f"mu must lie in (0, 0.5], got {self.mu}")
        if 1.0 + self.mu**2 * self.omega_detune <= 0.0:
            raise DomainError("1 + mu^2 Omega must be positive")

    @property
    def C(self) -> float:
        return self.eps_coupling * self.mu**2

    @property
    def D_amplitude(self) -> float:
        return 2.0 * self.gamma * self.mu**2

    @property
    def omega(self) -> float:
        return math.sqrt(1.0 + self.mu**2 * self.omega_detune)

    def D(self, t: float) -> float:
        return self.D_amplitude * math.cos(2.0 * self.omega * t)


@dataclass
class PendulaState:
    x: np.ndarray
    y: np.ndarray
    xdot: np.ndarray
    ydot: np.ndarray

    def __post_init__(self):
        self.x, self.y, self.xdot, self.ydot = (
            np.asarray(a, dtype=float) for a in (self.x, self.y, self.xdot, self.ydot)
        )
        if not (self.x.shape == self.y.shape == self.xdot.shape == self.ydot.shape):
            raise DomainError("pendula arrays must have equal lengths")

    def pack(self) -> np.ndarray:
        return np.concatenate([self.x, self.y, self.xdot, self.ydot])

    @classmethod
    def unpack(cls, z: np.ndarray) -> "PendulaState":
        x, y, xd, yd = np.split(z, 4)
        return cls(x.copy(), y.copy(), xd.copy(), yd.copy())


def _real_laplacian(x):
    out = -2.0 * x
    out[1:] += x[:-1]
    out[:-1] += x[1:]
    return out


def pendula_energy(state: PendulaState, pp: PendulaParams, t: float) -> float:
    x, y = state.x, state.y
    kinetic = 0.5 * np.sum(state.xdot**2 + state.ydot**2)
    potential = np.sum(2.0 - np.cos(x) - np.cos(y))
    springs = 0.5 * pp.C * (np.sum(np.diff(np.pad(x, 1)) ** 2) + np.sum(np.diff(np.pad(y, 1)) ** 2))
    return float(kinetic + potential + springs - pp.D(t) * np.sum(x * y))


@dataclass
class PendulaTrajectory:
    times: np.ndarray
    states: list[PendulaState]
    energies: np.ndarray
    diverged: bool = False
    blowup_time: float | None = None


def integrate_pendula(
    initial: PendulaState,
    pp: PendulaParams,
    T: float,
    dt: float = 1e-3,
    sample_every: int = 100,
) -> PendulaTrajectory:
    n, h = _steps(T, dt)
    C = pp.C

    def f(t, z):
        x, y, xd, yd = np.split(z, 4)
        D = pp.D(t)
        xdd = -np.sin(x) + C * _real_laplacian(x) + D * y
        ydd = -np.sin(y) + C * _real_laplacian(y) + D * x
        return np.concatenate([xd, yd, xdd, ydd])

    z = initial.pack()
    times, states = [0.0], [initial]
    energies = [pendula_energy(initial, pp, 0.0)]
    for k in range(1, n + 1):
        z = rk4_step(f, (k - 1) * h, z, h)
        t = k * h
        if not np.all(np.isfinite(z)) or np.max(np.abs(z)) > BLOWUP_NORM:
            return PendulaTrajectory(np.array(times), states, np.array(energies), True, t)
        if k % sample_every == 0 or k == n:
            s = PendulaState.unpack(z)
            times.append(t)
            states.append(s)
            energies.append(pendula_energy(s, pp, t))
    return PendulaTrajectory(np.array(times), states, np.array(energies))


def dnls_rhs(A: np.ndarray, B: np.ndarray, p: ModelParams) -> tuple[np.ndarray, np.ndarray]:
    """dA/dt and dB/dt of the coupled parametrically forced dNLS amplitudes."""
    fa = p.eps * laplacian(A) + p.omega * A + p.gamma * B.conj() + 0.5 * np.abs(A) ** 2 * A
    fb = p.eps * laplacian(B) + p.omega * B + p.gamma * A.conj() + 0.5 * np.abs(B) ** 2 * B
    return fa / 2j, fb / 2j


def synthesize_pendula(A: np.ndarray, B: np.ndarray, pp: PendulaParams) -> PendulaState:
    """Pendula data at t = 0 from the leading terms of the multiscale expansion."""
    p = ModelParams(pp.gamma, pp.omega_detune, pp.eps_coupling)
    dA, dB = dnls_rhs(A, B, p)
    mu, w = pp.mu, pp.omega
    x = 2.0 * mu * A.real
    y = 2.0 * mu * B.real
    # d/dt [mu (A e^{iwt} + cc)] with A evolving on the slow time mu^2 t
    xdot = 2.0 * mu * (1j * w * A).real + 2.0 * mu**3 * dA.real
    ydot = 2.0 * mu * (1j * w * B).real + 2.0 * mu**3 * dB.real
    return PendulaState(x, y, xdot, ydot)


@dataclass
class MultiscaleResult:
    error_norm: float
    mu_used: float
    times: np.ndarray = field(repr=False)
    errors: np.ndarray = field(repr=False)


def _amplitudes(data, half_width: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(data, DimerPoint):
        U = zero_field(half_width)
        U[half_width] = data.U0
        return uv_to_ab(UVState.from_stationary(U))
    A, B = data
    return as_field(A), as_field(B)


def multiscale_validate(
    data,
    pp: PendulaParams,
    T_slow: float = 1.0,
    *,
    half_width: int = 5,
    n_samples: int = 50,
    dt_slow: float = 1e-3,
    dt_fast: float = 1e-2,
) -> MultiscaleResult:
    """Compare the pendula chain with the dNLS reconstruction mu (A e^{iwt} + cc).

    ``data`` is a DimerPoint (embedded at site 0) or a pair of amplitude arrays (A, B).
    """
    A, B = _amplitudes(data, half_width)
    mu, w = pp.mu, pp.omega
    p = ModelParams(pp.gamma, pp.omega_detune, pp.eps_coupling)

    per_slow = max(1, math.ceil(T_slow / n_samples / dt_slow))
    slow = integrate_pt_dnls(ab_to_uv(A, B), p, T_slow, T_slow / (n_samples * per_slow), per_slow)
    T_fast = T_slow / mu**2
    per_fast = max(1, math.ceil(T_fast / n_samples / dt_fast))
    fast = integrate_pendula(
        synthesize_pendula(A, B, pp), pp, T_fast, T_fast / (n_samples * per_fast), per_fast
    )
    if slow.diverged or fast.diverged:
        return MultiscaleResult(math.inf, mu, np.array([]), np.array([]))

    errors = []
    for sample, t, state in zip(slow.samples, fast.times, fast.states):
        a, _ = uv_to_ab(sample.state)
        approx = 2.0 * mu * (a * np.exp(1j * w * t)).real
        errors.append(float(np.max(np.abs(state.x - approx))))
    errors = np.array(errors)
    return MultiscaleResult(float(errors.max()), mu, fast.times, errors)
