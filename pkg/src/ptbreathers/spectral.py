"""Linear stability of breathers: Hessian, symplectic structure, spectra and index counts.

Vectors use the site-major ordering (u_n, conj u_n, v_n, conj v_n).  The
linearized problem is  -i S H phi = lambda phi  with H the Hessian of the
combined energy H - E Q and S the per-site symplectic block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .continuation import BreatherSolution, newton_solve
from .dimer import solve_for_E
from .errors import BrokenSymmetryError, DomainError, PreconditionError, SingularityError
from .model import ModelParams, charge

ZERO_TOL = 1e-6
IMAG_TOL = 1e-8
KREIN_TOL = 1e-8
CENTRAL_SITES = 2  # |n| <= 2 counts as the core of a localized mode
BAND_MASS = 0.5

S_BLOCK = np.array(
    [[0, 0, 1, 0], [0, 0, 0, -1], [1, 0, 0, 0], [0, -1, 0, 0]], dtype=float
)


def hessian_block(U, p: ModelParams):
    """4x4 on-site block of the Hessian as nested lists.

    Written with plain arithmetic so that it also works for mpmath numbers.
    """
    Uc = U.conjugate()
    m = (U * Uc).real
    w = U * U + Uc * Uc
    d = p.omega + 8 * m
    c = 2 * w
    g = 4 * w
    lo = -p.E - 1j * p.gamma + g
    hi = -p.E + 1j * p.gamma + g
    return [
        [d, c, lo, 4 * m],
        [c, d, 4 * m, hi],
        [hi, 4 * m, d, c],
        [4 * m, lo, c, d],
    ]


def symplectic_matrix(half_width: int) -> np.ndarray:
    return np.kron(np.eye(2 * half_width + 1), S_BLOCK)


@dataclass
class HessianOperator:
    matrix: np.ndarray
    params: ModelParams
    half_width: int

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    def apply(self, phi: np.ndarray) -> np.ndarray:
        return self.matrix @ phi

    def quadratic_form(self, phi: np.ndarray) -> float:
        return float(np.vdot(phi, self.matrix @ phi).real)

    def inertia(self, tol: float = ZERO_TOL) -> dict[str, int]:
        mu = np.linalg.eigvalsh(self.matrix)
        return {
            "n_neg": int(np.sum(mu < -tol)),
            "n_zero": int(np.sum(np.abs(mu) <= tol)),
            "n_pos": int(np.sum(mu > tol)),
        }

    def hamiltonian(self) -> np.ndarray:
        """The matrix -i S H whose eigenvalues are the stability exponents."""
        return -1j * (symplectic_matrix(self.half_width) @ self.matrix)


def hessian_matrix(U: np.ndarray, p: ModelParams) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    N = U.size
    blocks = np.array(hessian_block(U, p), dtype=complex)  # (4, 4, N)
    M = np.zeros((4 * N, 4 * N), dtype=complex)
    for n in range(N):
        M[4 * n : 4 * n + 4, 4 * n : 4 * n + 4] = blocks[:, :, n]
    if p.eps:
        lap = -2.0 * np.eye(N) + np.eye(N, k=1) + np.eye(N, k=-1)
        M += p.eps * np.kron(lap, np.eye(4))
    return M


def assemble_hessian(sol: BreatherSolution) -> HessianOperator:
    M = hessian_matrix(sol.field, sol.params)
    herm = float(np.max(np.abs(M - M.conj().T)))
    assert herm <= 1e-14, f"Hessian not Hermitian ({herm:.2e})"
    return HessianOperator(M, sol.params, sol.half_width)


def stack_phi(U: np.ndarray) -> np.ndarray:
    """Phi with blocks (U, conj U, V, conj V) for V = conj U."""
    U = np.asarray(U, dtype=complex)
    return np.column_stack([U, U.conj(), U.conj(), U]).ravel()


def gauge_mode(U: np.ndarray) -> np.ndarray:
    """sigma Phi with blocks (U, -conj U, V, -conj V)."""
    U = np.asarray(U, dtype=complex)
    return np.column_stack([U, -U.conj(), U.conj(), -U]).ravel()


def site_mass(vec: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(vec.reshape(-1, 4)) ** 2, axis=1)


def mass_outside_core(vec: np.ndarray, half_width: int, core: int = CENTRAL_SITES) -> float:
    mass = site_mass(vec)
    total = mass.sum()
    inner = mass[max(0, half_width - core) : half_width + core + 1].sum()
    return float((total - inner) / total) if total > 0 else 0.0


def band_krein_value(p: ModelParams, sign: int) -> float:
    """Quadratic form 2 Omega E0 (E0 +- E) of the uncoupled band eigenvector (-Omega, 0, +-E0 + i gamma, 0)."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    E0 = p.E0
    if math.isnan(E0):
        raise DomainError("band Krein values need |omega| > |gamma|")
    return 2.0 * p.omega * E0 * (E0 + sign * p.E)


def band_centers(p: ModelParams) -> dict[str, float]:
    """Imaginary parts of the uncoupled band points +-lambda_+-."""
    E0 = p.E0
    return {
        "+lambda_plus": p.E + E0,
        "+lambda_minus": p.E - E0,
        "-lambda_plus": -(p.E + E0),
        "-lambda_minus": -(p.E - E0),
    }


def band_cluster_sign(p: ModelParams, imag_part: float) -> int:
    """Krein sign assigned to a band eigenvalue from its uncoupled limit."""
    E0 = p.E0
    if math.isnan(E0):
        raise DomainError("bands are off the imaginary axis for |omega| <= |gamma|")
    # nearest of the four band points; the pair +-lambda shares one sign
    y = abs(imag_part)
    d_plus = abs(y - abs(p.E + E0))
    d_minus = abs(y - abs(p.E - E0))
    value = band_krein_value(p, 1 if d_plus <= d_minus else -1)
    return int(np.sign(value))


def krein_signature(lam: complex, eigvec: np.ndarray, H: HessianOperator, tol: float = KREIN_TOL) -> int:
    """Sign of <H phi, phi> for an imaginary eigenvalue; 0 when indeterminate."""
    if abs(complex(lam).real) > IMAG_TOL:
        raise DomainError(f"Krein signature needs an imaginary eigenvalue, got {lam}")
    vec = np.asarray(eigvec, dtype=complex)
    vec = vec / np.linalg.norm(vec)
    form = H.quadratic_form(vec)
    if abs(form) < tol:
        return 0
    return 1 if form > 0 else -1


@dataclass
class KreinEntry:
    index: int
    eigenvalue: complex
    form: float
    sign: int
    band: bool
    mass_outside: float


@dataclass
class SpectrumReport:
    params: ModelParams
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    max_real: float
    zero_multiplicity: int
    zero_gap_ratio: float
    krein: list[KreinEntry]
    counts: dict[str, int]
    hessian_inertia: dict[str, int]
    indeterminate: list[int] = field(default_factory=list)

    @property
    def krein_signs(self) -> dict[int, int]:
        return {k.index: k.sign for k in self.krein if not k.band}

    def isolated_imaginary(self) -> list[KreinEntry]:
        return [k for k in self.krein if not k.band]


def _is_band(lam: complex, vec: np.ndarray, p: ModelParams, half_width: int):
    out = mass_outside_core(vec, half_width)
    if out > BAND_MASS:
        return True, out
    if p.eps == 0.0 and not math.isnan(p.E0):
        # uncoupled band modes sit on single sites, possibly inside the core
        on_point = min(abs(lam.imag - c) for c in band_centers(p).values()) <= IMAG_TOL
        return on_point, out
    return False, out


def eigen_spectrum(sol: BreatherSolution, H: HessianOperator | None = None) -> SpectrumReport:
    H = assemble_hessian(sol) if H is None else H
    p = sol.params
    M = H.hamiltonian()
    try:
        lam, vecs = np.linalg.eig(M)
    except np.linalg.LinAlgError as exc:
        raise ArithmeticError(
            f"eigensolver failed: {exc}; cond(H) = {np.linalg.cond(H.matrix):.3e}"
        ) from exc
    order = np.lexsort((lam.real, lam.imag))
    lam, vecs = lam[order], vecs[:, order]

    mod = np.abs(lam)
    zero = mod < ZERO_TOL
    nonzero = mod[~zero]
    max_real = float(np.max(lam.real[~zero], initial=0.0))
    zero_scale = float(mod[zero].max(initial=0.0))
    gap = float(nonzero.min(initial=math.inf))
    gap_ratio = gap / zero_scale if zero_scale > 0 else math.inf

    krein: list[KreinEntry] = []
    indeterminate: list[int] = []
    k_r = k_c = k_i = 0
    has_bands = not math.isnan(p.E0)
    for i in np.flatnonzero(~zero):
        z = complex(lam[i])
        if z.real > IMAG_TOL:
            if abs(z.imag) <= IMAG_TOL:
                k_r += 1
            elif z.imag > 0:
                k_c += 1
            continue
        if abs(z.real) > IMAG_TOL:
            continue
        vec = vecs[:, i]
        form = H.quadratic_form(vec / np.linalg.norm(vec))
        band, out = _is_band(z, vec, p, H.half_width)
        if band and has_bands:
            sign = band_cluster_sign(p, z.imag)
        else:
            band = False
            sign = 0 if abs(form) < KREIN_TOL else int(np.sign(form))
            if sign == 0:
                indeterminate.append(int(i))
        krein.append(KreinEntry(int(i), z, form, sign, band, out))
        # pairs are counted once, through their member in the upper half plane;
        # positive H-form means negative for L = -H
        if z.imag > 0 and sign > 0:
            k_i += 1

    counts = {
        "k_r": k_r,
        "k_c": k_c,
        "k_i_minus": k_i,
        "K_HAM": k_r + 2 * k_c + 2 * k_i,
    }
    return SpectrumReport(
        params=p,
        eigenvalues=lam,
        eigenvectors=vecs,
        max_real=max_real,
        zero_multiplicity=int(zero.sum()),
        zero_gap_ratio=gap_ratio,
        krein=krein,
        counts=counts,
        hessian_inertia=H.inertia(),
        indeterminate=indeterminate,
    )


@dataclass
class IndexCounts:
    k_r: int
    k_c: int
    k_i_minus: int
    K_HAM: int
    n_L: int
    D: float
    K_from_inertia: int
    indeterminate: int

    @property
    def consistent(self) -> bool:
        return self.K_HAM == self.K_from_inertia


def hamilton_krein_index(report: SpectrumReport, H: HessianOperator, dQ_dE: float) -> IndexCounts:
    """Eigenvalue count K_HAM and its inertia/slope prediction.

    ``dQ_dE`` is the slope of the charge along the family; D = -dQ/dE.
    """
    if report.zero_multiplicity != 2:
        raise PreconditionError(
            f"index theorem needs a double zero eigenvalue, found {report.zero_multiplicity}"
        )
    D = -float(dQ_dE)
    if abs(D) < 1e-10:
        raise SingularityError("degenerate slope: dQ/dE vanishes")
    n_L = report.hessian_inertia["n_pos"]  # negative eigenvalues of L = -H
    c = report.counts
    return IndexCounts(
        k_r=c["k_r"],
        k_c=c["k_c"],
        k_i_minus=c["k_i_minus"],
        K_HAM=c["K_HAM"],
        n_L=n_L,
        D=D,
        K_from_inertia=n_L - 1 if D < 0 else n_L,
        indeterminate=len(report.indeterminate),
    )


def neighbor_solutions(sol: BreatherSolution, dE: float) -> tuple[BreatherSolution, BreatherSolution]:
    """Solutions at E - dE and E + dE on the same branch, warm-started from ``sol``."""
    if sol.seed is None:
        raise PreconditionError("solution has no dimer seed; branch unknown")
    out = []
    for step in (-dE, dE):
        q = sol.params.with_(E=sol.params.E + step)
        pt = solve_for_E(q.E, q, sol.seed.branch)
        out.append(newton_solve(sol.field, q, seed_point=pt))
    return out[0], out[1]


@dataclass
class KernelCheck:
    kernel_residual: float
    gen_kernel_residual: float
    slope_Q_numeric: float


def kernel_and_generalized_kernel(
    sol: BreatherSolution,
    dE: float,
    neighbors: tuple[BreatherSolution, BreatherSolution] | None = None,
) -> KernelCheck:
    """Check H(sigma Phi) = 0 and S H (d Phi/dE) = sigma Phi by central differences."""
    if neighbors is None:
        raise PreconditionError("neighbouring solutions at E -+ dE are required")
    lower, upper = neighbors
    E = sol.params.E
    if not (
        math.isclose(lower.params.E, E - dE, abs_tol=1e-14)
        and math.isclose(upper.params.E, E + dE, abs_tol=1e-14)
    ):
        raise PreconditionError("neighbours must sit at E - dE and E + dE")
    H = assemble_hessian(sol)
    sigma = gauge_mode(sol.field)
    dPhi = (stack_phi(upper.field) - stack_phi(lower.field)) / (2 * dE)
    S = symplectic_matrix(sol.half_width)
    slope = (charge(upper.state) - charge(lower.state)) / (2 * dE)
    return KernelCheck(
        kernel_residual=float(np.max(np.abs(H.apply(sigma)))),
        gen_kernel_residual=float(np.max(np.abs(S @ H.apply(dPhi) - sigma))),
        slope_Q_numeric=float(slope),
    )


def stability_index(sol: BreatherSolution, dE: float = 1e-5) -> tuple[SpectrumReport, IndexCounts, KernelCheck]:
    H = assemble_hessian(sol)
    report = eigen_spectrum(sol, H)
    kc = kernel_and_generalized_kernel(sol, dE, neighbor_solutions(sol, dE))
    return report, hamilton_krein_index(report, H, kc.slope_Q_numeric), kc


@dataclass
class ZeroEquilibrium:
    gamma0: float
    stable: bool
    k: np.ndarray
    omega: np.ndarray  # (len(k), 2) complex frequencies +-
    edge: bool = False


def _detuned(p: ModelParams, k):
    return p.omega - 4.0 * p.eps * np.sin(np.asarray(k) / 2.0) ** 2


def zero_equilibrium_stability(p: ModelParams, n_k: int = 1001) -> ZeroEquilibrium:
    """Dispersion 4 w^2 + gamma^2 = (Omega - 4 eps sin^2(k/2))^2 of the zero state."""
    k = np.linspace(-math.pi, math.pi, n_k)
    rad = (_detuned(p, k) ** 2 - p.gamma**2).astype(complex)
    w = 0.5 * np.sqrt(rad)
    omega = np.column_stack([w, -w])
    if p.omega > 0:
        gamma0 = p.omega - 4.0 * p.eps
    else:
        gamma0 = abs(p.omega)
    stable = bool(np.all(rad.real > 0))
    return ZeroEquilibrium(gamma0, stable, k, omega, edge=p.omega == 0.0)


@dataclass
class BandEdges:
    intervals: dict[str, tuple[float, float]]
    E0_k0: float
    E0_kpi: float


def band_edges(p: ModelParams) -> BandEdges:
    """Imaginary-part intervals of the four continuous bands +-i(E +- E0(eps, k))."""
    if abs(p.omega) <= abs(p.gamma):
        raise BrokenSymmetryError("bands need |omega| > |gamma|")
    s_vals = [0.0, 1.0]
    if p.eps > 0 and 0.0 < p.omega / (4 * p.eps) < 1.0:
        s_vals.append(p.omega / (4 * p.eps))
    for s in s_vals:
        if (p.omega - 4 * p.eps * s) ** 2 <= p.gamma**2:
            raise BrokenSymmetryError(
                f"band leaves the imaginary axis: (Omega - 4 eps sin^2)^2 < gamma^2 at sin^2 = {s:.4g}"
            )
    # (Omega - 4 eps s)^2 is monotone on [0, 1] once it stays above gamma^2
    r0 = math.sqrt(p.omega**2 - p.gamma**2)
    r1 = math.sqrt((p.omega - 4 * p.eps) ** 2 - p.gamma**2)
    lo, hi = min(r0, r1), max(r0, r1)
    E = p.E
    intervals = {
        "+lambda_plus": (E + lo, E + hi),
        "+lambda_minus": (E - hi, E - lo),
        "-lambda_plus": (-E - hi, -E - lo),
        "-lambda_minus": (-E + lo, -E + hi),
    }
    return BandEdges(intervals, r0, r1)
