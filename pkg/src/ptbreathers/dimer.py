"""Closed-form analysis of the single-site (eps = 0) PT dimer.

Branch tags follow the usual classification:

* ``"a"`` exists for omega > |gamma|, with |E| > E0,
* ``"b"`` exists for omega < |gamma|, for every E,
* ``"c"`` exists for omega < -|gamma|, with |E| < E0,

where E0 = sqrt(omega^2 - gamma^2).  Points are parametrized by the squared
amplitude A^2 of the central site, U_0 = A exp(i theta).
"""

from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, EndpointError, SingularityError
from .model import ModelParams

log = logging.getLogger(__name__)

BRANCHES = ("a", "b", "c")
_AMP_SQ_MAX = 1e6


@dataclass(frozen=True)
class DimerPoint:
    amp_sq: float
    theta: float
    E: float
    branch: str

    @property
    def amplitude(self) -> float:
        return math.sqrt(self.amp_sq)

    @property
    def U0(self) -> complex:
        return self.amplitude * cmath.exp(1j * self.theta)


@dataclass(frozen=True)
class BranchDescriptor:
    branch: str
    abs_E_range: tuple[float, float]
    amp_sq_range: tuple[float, float]
    exists: bool = True
    E0: float = math.nan
    A_plus_sq: float = math.nan
    A_minus_sq: float = math.nan

    def contains_E(self, E: float) -> bool:
        lo, hi = self.abs_E_range
        return lo <= abs(E) <= hi


def E0_of(p: ModelParams) -> float:
    return p.E0


def A_plus_sq(p: ModelParams) -> float:
    return (abs(p.gamma) - p.omega) / 4.0


def A_minus_sq(p: ModelParams) -> float:
    return min((abs(p.omega) - abs(p.gamma)) / 4.0, abs(p.omega) / 8.0)


def branch_exists(branch: str, p: ModelParams) -> bool:
    g = abs(p.gamma)
    if branch == "a":
        return p.omega > g
    if branch == "b":
        return p.omega < g
    if branch == "c":
        return p.omega < -g
    raise DomainError(f"unknown branch tag {branch!r}")


def _descriptor(branch: str, p: ModelParams) -> BranchDescriptor:
    E0 = p.E0
    if branch == "a":
        return BranchDescriptor("a", (E0, math.inf), (0.0, math.inf), E0=E0)
    if branch == "b":
        return BranchDescriptor(
            "b", (0.0, math.inf), (A_plus_sq(p), math.inf), E0=E0, A_plus_sq=A_plus_sq(p)
        )
    return BranchDescriptor("c", (0.0, E0), (0.0, A_minus_sq(p)), E0=E0, A_minus_sq=A_minus_sq(p))


def classify_branches(gamma: float, omega: float) -> list[BranchDescriptor]:
    p = ModelParams(gamma, omega)
    p.require_gain()
    return [_descriptor(b, p) for b in BRANCHES if branch_exists(b, p)]


def describe_branch(branch: str, p: ModelParams) -> BranchDescriptor:
    p.require_gain()
    if not branch_exists(branch, p):
        raise DomainError(f"branch {branch!r} does not exist for gamma={p.gamma}, omega={p.omega}")
    return _descriptor(branch, p)


def E_squared(amp_sq, p: ModelParams):
    """E^2 as a function of A^2 along the dimer branches (vectorized)."""
    s = 4.0 * amp_sq + p.omega
    return (8.0 * amp_sq + p.omega) ** 2 * (1.0 - p.gamma**2 / s**2)


def dE2_dA2(amp_sq, p: ModelParams):
    s = 4.0 * amp_sq + p.omega
    return 8.0 * (8.0 * amp_sq + p.omega) / s**3 * (2.0 * s**3 - p.gamma**2 * p.omega)


def _branch_sign(branch: str) -> float:
    # sign of 8A^2 + omega along the branch
    return -1.0 if branch == "c" else 1.0


def point_from_amplitude(amp_sq: float, e_sign: int, p: ModelParams, branch: str) -> DimerPoint:
    desc = describe_branch(branch, p)
    lo, hi = desc.amp_sq_range
    scale = max(1.0, abs(p.omega), abs(p.gamma))
    if not (lo - 1e-14 * scale <= amp_sq <= hi + 1e-14 * scale):
        raise DomainError(f"A^2={amp_sq} outside branch {branch} range [{lo}, {hi}]")
    amp_sq = min(max(amp_sq, lo), hi)
    s = 4.0 * amp_sq + p.omega
    if s == 0.0:
        raise SingularityError("4A^2 + omega = 0")
    sin2 = p.gamma / s
    bracket = 1.0 - sin2 * sin2
    if bracket < -1e-12:
        raise DomainError(f"E^2 would be negative at A^2={amp_sq} on branch {branch}")
    bracket = max(bracket, 0.0)
    sign = 1.0 if e_sign >= 0 else -1.0
    E = sign * abs(8.0 * amp_sq + p.omega) * math.sqrt(bracket)
    cos2 = sign * _branch_sign(branch) * math.sqrt(bracket)
    theta = 0.5 * math.atan2(sin2, cos2)
    return DimerPoint(amp_sq=amp_sq, theta=theta, E=E, branch=branch)


def solve_for_E(E: float, p: ModelParams, branch: str) -> DimerPoint:
    """Invert the monotone map A^2 -> E^2 on one branch."""
    desc = describe_branch(branch, p)
    E0 = desc.E0
    absE = abs(E)
    sign = 1 if E >= 0 else -1
    if branch in ("a", "c") and absE == E0:
        raise EndpointError(f"E = +-E0 = {E0} is the zero-amplitude endpoint of branch {branch}")
    if branch == "a" and absE < E0:
        raise DomainError(f"branch a requires |E| > E0 = {E0}, got {E}")
    if branch == "c" and absE > E0:
        raise DomainError(f"branch c requires |E| < E0 = {E0}, got {E}")
    if branch == "b" and absE == 0.0:
        return point_from_amplitude(A_plus_sq(p), 1, p, "b")
    if branch == "c" and absE == 0.0:
        return point_from_amplitude(A_minus_sq(p), 1, p, "c")

    target = E * E
    lo, hi = desc.amp_sq_range
    if branch == "c":
        a_lo, a_hi = lo, hi
    else:
        a_lo, a_hi = lo + 1e-14, _AMP_SQ_MAX
        if E_squared(a_hi, p) < target:
            raise DomainError(f"|E|={absE} beyond the bracket A^2 <= {_AMP_SQ_MAX}")

    def g(a2):
        return E_squared(a2, p) - target

    a2 = brentq(g, a_lo, a_hi, xtol=1e-300, rtol=8.9e-16, maxiter=400)
    resid = abs(g(a2))
    if resid > 1e-12 * max(1.0, target):
        raise ArithmeticError(f"E^2 inversion residual {resid:.2e} on branch {branch}")
    return point_from_amplitude(a2, sign, p, branch)


def cos2theta(pt: DimerPoint) -> float:
    return math.cos(2.0 * pt.theta)


def dimer_jacobian(pt: DimerPoint, p: ModelParams) -> tuple[np.ndarray, bool]:
    """Jacobian of the central-site equation with respect to (U_0, conj U_0).

    The invertibility flag is False only on the surface 2(omega + 4A^2)^3 = omega gamma^2.
    """
    A2 = pt.amp_sq
    diag = pt.E - 12.0 * A2 * cos2theta(pt)
    off = -p.omega - 12.0 * A2
    jac = np.array([[diag - 1j * p.gamma, off], [off, diag + 1j * p.gamma]], dtype=complex)
    lhs = 2.0 * (p.omega + 4.0 * A2) ** 3
    rhs = p.omega * p.gamma**2
    invertible = abs(lhs - rhs) > 1e-10 * max(1.0, abs(lhs), abs(rhs))
    return jac, invertible


@dataclass(frozen=True)
class LimitSpectrum:
    """Eps = 0 eigenvalues of the Hessian blocks and of -i S H''."""

    mu1: float
    mu2: float
    mu3: float
    mu_plus: float
    mu_minus: float
    lambda0: complex
    lambda_plus: complex
    lambda_minus: complex

    @property
    def lambda0_unstable(self) -> bool:
        return self.lambda0.real != 0.0


def lambda0_radicand(amp_sq: float, p: ModelParams) -> float:
    s = 4.0 * amp_sq + p.omega
    if s == 0.0:
        raise SingularityError("4A^2 + omega = 0")
    return s * s - p.omega * p.gamma**2 / s


def limit_spectrum(pt: DimerPoint, p: ModelParams) -> LimitSpectrum:
    p.require_gain()
    A2 = pt.amp_sq
    s = 4.0 * A2 + p.omega
    if s == 0.0:
        raise SingularityError("4A^2 + omega = 0")
    g2 = p.gamma**2
    root = math.sqrt((4.0 * A2 - p.omega) ** 2 + 16.0 * p.omega * A2 * g2 / s**2)
    rad = lambda0_radicand(A2, p)
    lam0 = complex(0.0, 2.0 * math.sqrt(rad)) if rad >= 0 else complex(2.0 * math.sqrt(-rad), 0.0)
    E0c = cmath.sqrt(p.omega**2 - g2)
    shift = math.sqrt(pt.E**2 + g2)
    return LimitSpectrum(
        mu1=2.0 * s,
        mu2=12.0 * A2 + p.omega + root,
        mu3=12.0 * A2 + p.omega - root,
        mu_plus=p.omega + shift,
        mu_minus=p.omega - shift,
        lambda0=lam0,
        lambda_plus=1j * (pt.E + E0c),
        lambda_minus=1j * (pt.E - E0c),
    )


def slope_Q(pt: DimerPoint, p: ModelParams) -> float:
    """dQ/dE at eps = 0 along the branch through ``pt``."""
    A2 = pt.amp_sq
    w = 8.0 * A2 + p.omega
    if w == 0.0:
        raise SingularityError("8A^2 + omega = 0 in the slope formula")
    s = 4.0 * A2 + p.omega
    return 4.0 * w / dE2_dA2(A2, p) * (1.0 - p.omega * p.gamma**2 / s**3)


def index_discriminant(amp_sq: float, p: ModelParams) -> float:
    """(4A^2 + omega)^3 - omega gamma^2; its sign decides the branch (c) index."""
    return (4.0 * amp_sq + p.omega) ** 3 - p.omega * p.gamma**2


def locate_E_s(p: ModelParams, tol: float = 1e-9) -> float:
    """Bisection for the sign change of the index discriminant along branch (c)."""
    g = abs(p.gamma)
    if not (-2.0 * math.sqrt(2.0) * g < p.omega < -g):
        raise DomainError("E_s exists only for omega in (-2 sqrt(2)|gamma|, -|gamma|)")

    def h(E):
        if E == 0.0:
            return index_discriminant(A_minus_sq(p), p)
        return index_discriminant(solve_for_E(E, p, "c").amp_sq, p)

    lo, hi = 0.0, p.E0 * (1.0 - 1e-12)
    if not (h(lo) > 0.0 > h(hi)):
        raise ArithmeticError("index discriminant does not change sign on branch (c)")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if h(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def predicted_khm(p: ModelParams, E: float, branch: str) -> tuple[int, float | None]:
    """Small-eps Hamilton-Krein index predicted from the eps = 0 limit.

    Returns the index and, when it is relevant, the switching value E_s.
    """
    p.require_gain()
    g = abs(p.gamma)
    if not p.omega < -g:
        raise DomainError("index prediction needs omega < -|gamma|")
    if not 0.0 < abs(E) < p.E0:
        raise DomainError(f"index prediction needs 0 < |E| < E0 = {p.E0}")
    if branch == "b":
        return 2, None
    if branch != "c":
        raise DomainError("index prediction covers branches b and c only")
    if p.omega <= -2.0 * math.sqrt(2.0) * g:
        return 0, None
    E_s = locate_E_s(p)
    return (1 if abs(E) < E_s else 0), E_s


def omega_star(gamma: float) -> float:
    return -math.sqrt((1.0 + 5.0 * math.sqrt(2.0)) / 2.0) * abs(gamma)


@dataclass
class Resonance:
    E_star: float
    kind: str
    side: str
    found: bool = True
    scan_bounds: tuple[float, float] = (0.0, 0.0)
    additional_crossings: list[float] = field(default_factory=list)


def resonance(p: ModelParams, n_scan: int = 4000, tol: float = 1e-9) -> Resonance:
    """Locate the first crossing of lambda_0 with the band point along branch (b), E >= 0.

    The crossing partner is lambda_+ for omega >= -5|gamma| and -lambda_- below.
    """
    p.require_gain()
    g = abs(p.gamma)
    if not p.omega < -g:
        raise DomainError("resonance search needs omega < -|gamma| on branch (b)")
    E0 = p.E0
    kind = "lambda_plus" if p.omega >= -5.0 * g else "minus_lambda_minus"

    def mismatch(a2):
        pt = point_from_amplitude(a2, 1, p, "b")
        im0 = 2.0 * math.sqrt(lambda0_radicand(a2, p))
        target = pt.E + E0 if kind == "lambda_plus" else E0 - pt.E
        return im0 - target, pt.E

    a_lo = A_plus_sq(p)
    E_max = max(10.0 * E0, 10.0 * g, 10.0)
    # E ~ 8 A^2 for large amplitudes
    a_hi = a_lo + E_max / 4.0
    grid = np.linspace(a_lo, a_hi, n_scan)
    vals = [mismatch(a)[0] for a in grid]
    bounds = (0.0, mismatch(a_hi)[1])

    scale = max(1.0, E0)
    if abs(vals[0]) <= 1e-12 * scale:
        return Resonance(0.0, kind, "below_E0", scan_bounds=bounds)

    crossings = []
    for i in range(len(grid) - 1):
        if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0.0:
            crossings.append(i)
    if not crossings:
        return Resonance(math.nan, kind, "none", found=False, scan_bounds=bounds)

    def bisect(i):
        lo, hi = grid[i], grid[i + 1]
        f_lo = vals[i]
        if f_lo == 0.0:
            return mismatch(lo)[1]
        while True:
            mid = 0.5 * (lo + hi)
            f_mid, E_mid = mismatch(mid)
            if f_mid == 0.0:
                return E_mid
            if (f_mid > 0) == (f_lo > 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
            E_lo, E_hi = mismatch(lo)[1], mismatch(hi)[1]
            if E_hi - E_lo <= tol:
                return 0.5 * (E_lo + E_hi)

    E_star = bisect(crossings[0])
    extra = [bisect(i) for i in crossings[1:]]
    if extra:
        log.info("additional lambda_0 resonances on branch (b) at E = %s", extra)
    side = "above_E0" if E_star > E0 else "below_E0"
    return Resonance(E_star, kind, side, scan_bounds=bounds, additional_crossings=extra)
