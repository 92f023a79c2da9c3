"""
Purity, Rényi-2 entropy, thermal current and weak-squeezing perturbation theory.

Two entropy conventions coexist here.  ``renyi2_single_mode`` works on
quadrature moments normalised so that the vacuum has <x^2> = 1 and reports
S2 = ½ ln(4 det V), which equals ln 2 for the vacuum.  ``renyi2_gaussian``
works on any (a, a†)-ordered covariance and reports the standard
S2 = ½ ln det(2 sigma_s), zero for pure states, where sigma_s is the
symmetrized covariance.  Entropy shifts are differences, and the two agree on
those up to the choice of matrix.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .core import (
    ComplexMatrix,
    CovarianceState,
    DiffusionConvention,
    ModeSpec,
    SystemSpec,
    as_matrix,
    commutator_matrix,
    diffusion_matrix,
    drift_matrix,
    max_physical_squeezing,
)
from .dynamics import QuadratureMoments, quadrature_steady_variances, solve_lyapunov, steady_state_lyapunov

logger = logging.getLogger(__name__)

DET_FLOOR = 0.25
SINGULAR_TOL = 1e-14
WEAK_SQUEEZING_FRACTION = 0.2


class SingularParameterError(ZeroDivisionError):
    pass


class UncertaintyViolation(ValueError):
    pass


class WeakSqueezingWarning(UserWarning):
    pass


# --------------------------------------------------------------------------
# entropy and purity


@dataclass(frozen=True)
class EntropyReport:
    s2: float
    purity: float
    det_sigma: float

    def __post_init__(self) -> None:
        if not self.det_sigma > 0:
            raise ValueError(f"det_sigma must be positive, got {self.det_sigma}")
        if not 0 < self.purity <= 1 + 1e-12:
            raise ValueError(f"purity must lie in (0, 1], got {self.purity}")


def renyi2_single_mode(V: "QuadratureMoments | np.ndarray", tol: float = 1e-12) -> EntropyReport:
    """Rényi-2 entropy S2 = ½ ln(4 det V) with det V = AB - C²/4.

    ``V`` is either a :class:`QuadratureMoments` (A = xx, B = pp, C = xp) or
    a real symmetric 2x2 matrix [[xx, xp/2], [xp/2, pp]].
    """
    if isinstance(V, QuadratureMoments):
        a, b, c = V.xx, V.pp, V.xp
    else:
        V = np.asarray(V, dtype=float)
        if V.shape != (2, 2):
            raise ValueError(f"expected a 2x2 quadrature covariance, got shape {V.shape}")
        a, b, c = V[0, 0], V[1, 1], V[0, 1] + V[1, 0]
    det = a * b - 0.25 * c * c
    if det < DET_FLOOR - tol:
        raise UncertaintyViolation(f"det V = {det:.6g} violates the uncertainty floor det V >= {DET_FLOOR}")
    det = max(det, DET_FLOOR)
    return EntropyReport(s2=0.5 * math.log(4 * det), purity=1.0 / math.sqrt(4 * det), det_sigma=float(det))


def det_v_simplified(mode: ModeSpec, N: float, R: float) -> float:
    """The simplified determinant (2N+1)² - 4R²(γ²-8ω²)²/(γ²+8ω²)², evaluated as written.

    This does not equal AB - C²/4 built from :func:`quadrature_steady_variances`;
    compare with :func:`det_v_direct`.
    """
    g2, w2 = mode.gamma**2, mode.omega**2
    return (2 * N + 1) ** 2 - 4 * R**2 * (g2 - 8 * w2) ** 2 / (g2 + 8 * w2) ** 2


def det_v_direct(mode: ModeSpec, N: float, R: float) -> float:
    q = quadrature_steady_variances(mode, N, R)
    return q.det


def _symmetrize(x, symmetrize: bool) -> ComplexMatrix:
    S = as_matrix(x)
    if symmetrize:
        S = S - 0.5 * commutator_matrix(S.shape[0] // 2)
    return S


def _logdet(S: ComplexMatrix, what: str) -> float:
    det = np.linalg.det(S)
    if abs(det.imag) > 1e-9 * max(1.0, abs(det.real)) or not det.real > 0:
        raise ValueError(f"{what} has non-positive determinant {det:.6g}")
    return math.log(det.real)


def renyi2_gaussian(sigma: "CovarianceState | np.ndarray") -> EntropyReport:
    """S2 = ½ ln det(2 sigma_s) for an n-mode Gaussian state in (a, a†) ordering."""
    S = _symmetrize(sigma, True)
    n = S.shape[0] // 2
    ld = _logdet(2 * S, "2 sigma_s")
    return EntropyReport(s2=0.5 * ld, purity=math.exp(-0.5 * ld), det_sigma=math.exp(ld) / 2 ** (2 * n))


class RPoint(NamedTuple):
    R: float
    purity: float
    error: str | None


def validate_R_grid(N: float, R_grid: Sequence[float]) -> list[str | None]:
    """Per-point error markers: ``None`` when 0 <= R <= sqrt(N(N+1))."""
    bound = max_physical_squeezing(N)
    marks: list[str | None] = []
    for R in R_grid:
        if not math.isfinite(R):
            marks.append(f"R={R} is not finite")
        elif R < 0:
            marks.append(f"R={R:.6g} is negative; the grid covers [0, {bound:.6g}]")
        elif R > bound * (1 + 1e-12):
            marks.append(f"R={R:.6g} exceeds sqrt(N(N+1))={bound:.6g}; bath state unphysical")
        else:
            marks.append(None)
    return marks


def purity_vs_R_curve(mode: ModeSpec, N: float, R_grid: Sequence[float], strict: bool = False) -> list[RPoint]:
    """Steady-state purity along R = Re(M); out-of-range points carry an error marker.

    With ``strict=True`` the first invalid point raises instead.
    """
    out = []
    for R, mark in zip(R_grid, validate_R_grid(N, R_grid)):
        if mark is not None:
            if strict:
                raise ValueError(mark)
            out.append(RPoint(float(R), math.nan, mark))
            continue
        rep = renyi2_single_mode(quadrature_steady_variances(mode, N, R))
        out.append(RPoint(float(R), rep.purity, None))
    return out


# --------------------------------------------------------------------------
# thermal current


def thermal_current(J: float, gamma: float, n1: float, n2: float) -> float:
    """Energy current 2Jγ(n2 - n1)/(4J² + γ²) between hopping-coupled modes."""
    if not gamma > 0:
        raise ValueError(f"gamma must satisfy gamma > 0, got {gamma}")
    return 2 * J * gamma * (n2 - n1) / (4 * J**2 + gamma**2)


def energy_current_from_covariance(sigma: "CovarianceState | np.ndarray") -> float:
    """2 Im<a1† a2> read from a two-mode covariance.

    <a1† a2> sits at position (1, 3) of <R R†> (0-based), between the
    creation component of mode 1 and the annihilation component of mode 2.
    """
    S = as_matrix(sigma)
    if S.shape != (4, 4):
        raise ValueError("energy current needs a two-mode covariance")
    return float(2 * S[1, 3].imag)


def sigma23_plus_sigma32(sigma: "CovarianceState | np.ndarray") -> complex:
    """Literal sum of the (2,3) and (3,2) entries (1-based) of <R R†>.

    In (a1, a1†, a2, a2†) ordering this is 2 Re<a1† a2†>, which vanishes
    without squeezing; kept for comparison with the energy current.
    """
    S = as_matrix(sigma)
    return complex(S[1, 2] + S[2, 1])


# --------------------------------------------------------------------------
# perturbation theory in the squeezing


@dataclass(frozen=True)
class PerturbationInput:
    """Mean/difference parametrization of two baths with real squeezing."""

    n: float
    dn: float
    m: float
    dm: float
    eta: float = 1.0

    def __post_init__(self) -> None:
        if not 0 < self.eta <= 1:
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")
        if self.N1 < 0 or self.N2 < 0:
            raise ValueError(f"occupations N1={self.N1}, N2={self.N2} must be >= 0 (need |dn|/2 <= n)")

    @property
    def N1(self) -> float:
        return self.n + self.dn / 2

    @property
    def N2(self) -> float:
        return self.n - self.dn / 2

    @property
    def M1(self) -> float:
        return self.m + self.dm / 2

    @property
    def M2(self) -> float:
        return self.m - self.dm / 2

    def system(self, omega: float, gamma: float, J: float) -> SystemSpec:
        """Two-mode system with equal frequencies; squeezing scaled by eta."""
        return SystemSpec.two_mode(omega, omega, gamma, J, self.N1, self.N2, self.eta * self.M1, self.eta * self.M2)


@dataclass(frozen=True)
class PerturbativeSplit:
    """A(η) = A0 + ηA1 and D(η) = D0 + ηD1 + η²D2 for squeezing scaled by η."""

    A0: ComplexMatrix
    A1: ComplexMatrix
    D0: ComplexMatrix
    D1: ComplexMatrix
    D2: ComplexMatrix

    def drift(self, eta: float) -> ComplexMatrix:
        return self.A0 + eta * self.A1

    def diffusion(self, eta: float) -> ComplexMatrix:
        return self.D0 + eta * self.D1 + eta**2 * self.D2


def perturbative_split(spec: SystemSpec, convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED) -> PerturbativeSplit:
    """Separate the squeezing-dependent parts of the drift and diffusion.

    The drift is linear in M.  The diffusion is linear in M for the literal
    convention; the corrected convention adds a |M|² piece, which lands in D2.
    """
    conv = DiffusionConvention.parse(convention)
    M = [b.M for b in spec.baths]
    zero = spec.with_squeezing(*(0j for _ in M))
    neg = spec.with_squeezing(*(-m for m in M))
    A0 = drift_matrix(zero)
    A1 = drift_matrix(spec) - A0
    D0 = diffusion_matrix(zero, conv)
    Dp = diffusion_matrix(spec, conv)
    Dm = diffusion_matrix(neg, conv)
    return PerturbativeSplit(A0=A0, A1=A1, D0=D0, D1=0.5 * (Dp - Dm), D2=0.5 * (Dp + Dm) - D0)


def first_order_covariance(
    A0: ComplexMatrix,
    D0: ComplexMatrix,
    A1: ComplexMatrix,
    D1: ComplexMatrix,
    sigma0: "CovarianceState | np.ndarray",
) -> CovarianceState:
    """Solve A0 σ1 + σ1 A0† = -(A1 σ0 + σ0 A1† + D1)."""
    del D0  # the zeroth-order diffusion only enters through sigma0
    S0 = as_matrix(sigma0)
    rhs = A1 @ S0 + S0 @ np.conj(A1).T + D1
    X = solve_lyapunov(A0, rhs)
    return CovarianceState(0.5 * (X + X.conj().T))


def second_order_covariance(
    A0: ComplexMatrix,
    A1: ComplexMatrix,
    D2: ComplexMatrix,
    sigma1: "CovarianceState | np.ndarray",
) -> CovarianceState:
    """Solve A0 σ2 + σ2 A0† = -(A1 σ1 + σ1 A1† + D2)."""
    S1 = as_matrix(sigma1)
    X = solve_lyapunov(A0, A1 @ S1 + S1 @ np.conj(A1).T + D2)
    return CovarianceState(0.5 * (X + X.conj().T))


@dataclass(frozen=True)
class PerturbationSeries:
    split: PerturbativeSplit
    sigma0: CovarianceState
    sigma1: CovarianceState
    sigma2: CovarianceState
    warning: str | None = None

    def truncated(self, eta: float, order: int = 1) -> ComplexMatrix:
        S = self.sigma0.sigma + eta * self.sigma1.sigma
        if order >= 2:
            S = S + eta**2 * self.sigma2.sigma
        return S

    def exact(self, eta: float) -> CovarianceState:
        return steady_state_lyapunov(self.split.drift(eta), self.split.diffusion(eta))


def squeezing_validity_warning(spec: SystemSpec) -> str | None:
    """Message when some |M_i| exceeds 0.2 ω_i/γ, else ``None``."""
    bad = [
        f"|M{i + 1}|={abs(b.M):.3g} > {WEAK_SQUEEZING_FRACTION}*omega/gamma={WEAK_SQUEEZING_FRACTION * m.omega / m.gamma:.3g}"
        for i, (m, b) in enumerate(zip(spec.modes, spec.baths))
        if abs(b.M) > WEAK_SQUEEZING_FRACTION * m.omega / m.gamma
    ]
    return "; ".join(bad) if bad else None


def perturbation_series(
    spec: SystemSpec, convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED
) -> PerturbationSeries:
    split = perturbative_split(spec, convention)
    s0 = steady_state_lyapunov(split.A0, split.D0)
    s1 = first_order_covariance(split.A0, split.D0, split.A1, split.D1, s0)
    s2 = second_order_covariance(split.A0, split.A1, split.D2, s1)
    msg = squeezing_validity_warning(spec)
    if msg is not None:
        warnings.warn(f"weak-squeezing expansion outside its validity range: {msg}", WeakSqueezingWarning, stacklevel=2)
    return PerturbationSeries(split=split, sigma0=s0, sigma1=s1, sigma2=s2, warning=msg)


def _closed_form_denominator(J: float, gamma: float, omega: float, sign: int) -> complex:
    den = (4 * J**2 + gamma**2) * (4 * J**2 + (gamma + sign * 2j * omega) ** 2)
    if abs(den) < SINGULAR_TOL:
        raise SingularParameterError(f"closed-form denominator vanishes (|den| = {abs(den):.3e})")
    return den


def sigma14_closed_form(p: PerturbationInput, J: float, gamma: float, omega: float) -> complex:
    """2iJγ(8J²m(1+n) + γ[2m(1+n)γ + ΔmΔn(γ + iω)]) / ((4J²+γ²)(4J²+(γ+2iω)²))."""
    n, m, dn, dm, g = p.n, p.m, p.dn, p.dm, gamma
    num = 2j * J * g * (8 * J**2 * m * (1 + n) + g * (2 * m * (1 + n) * g + dm * dn * (g + 1j * omega)))
    return complex(num / _closed_form_denominator(J, g, omega, +1))


def sigma23_closed_form(p: PerturbationInput, J: float, gamma: float, omega: float) -> complex:
    """-2iJγ(8J²m(1+n) + γ[2m(1+n)γ + ΔmΔn(γ - iω)]) / ((4J²+γ²)(4J²+(γ-2iω)²))."""
    n, m, dn, dm, g = p.n, p.m, p.dn, p.dm, gamma
    num = -2j * J * g * (8 * J**2 * m * (1 + n) + g * (2 * m * (1 + n) * g + dm * dn * (g - 1j * omega)))
    return complex(num / _closed_form_denominator(J, g, omega, -1))


# --------------------------------------------------------------------------
# entropy shifts


class PerturbativeShift(NamedTuple):
    value: float
    trace: complex


def entropy_shift_exact(sigma0, sigma, symmetrize: bool = True) -> float:
    """½ ln(det σ / det σ0).

    With ``symmetrize`` (the default) both arguments are taken as <R R†>
    covariances and the commutator part is removed first; pass ``False`` to
    use the matrices as given.
    """
    S0 = _symmetrize(sigma0, symmetrize)
    S = _symmetrize(sigma, symmetrize)
    return 0.5 * (_logdet(S, "sigma") - _logdet(S0, "sigma0"))


def _relative(sigma0, sigma1, symmetrize: bool) -> ComplexMatrix:
    S0 = _symmetrize(sigma0, symmetrize)
    if np.linalg.cond(S0) > 1e14:
        raise np.linalg.LinAlgError("sigma0 is singular")
    return np.linalg.solve(S0, as_matrix(sigma1))


def entropy_shift_perturbative(sigma0, sigma1, symmetrize: bool = True) -> PerturbativeShift:
    """-¼ Tr[(σ0⁻¹σ1)²], together with the first-order trace Tr(σ0⁻¹σ1).

    ``sigma1`` is a correction and is never shifted; ``symmetrize`` applies to
    ``sigma0`` only.
    """
    X = _relative(sigma0, sigma1, symmetrize)
    return PerturbativeShift(value=float(-0.25 * np.trace(X @ X).real), trace=complex(np.trace(X)))


def entropy_shift_second_order(sigma0, sigma1, sigma2, symmetrize: bool = True) -> float:
    """Complete O(η²) term: ½ Tr(σ0⁻¹σ1) + ½ Tr(σ0⁻¹σ2) - ¼ Tr[(σ0⁻¹σ1)²]."""
    X1 = _relative(sigma0, sigma1, symmetrize)
    X2 = _relative(sigma0, sigma2, symmetrize)
    return float((0.5 * np.trace(X1) + 0.5 * np.trace(X2) - 0.25 * np.trace(X1 @ X1)).real)


def entropy_shift_fourth_power(sigma14: complex) -> float:
    """The alternative leading-order estimate ½|σ14|⁴."""
    return 0.5 * abs(sigma14) ** 4


def alpha_beta_coefficients(n: float, m: float, gamma: float, J: float, omega: float) -> tuple[float, float]:
    """Coefficients of the quadratic model ΔS2 ∝ α + βΔm²."""
    g2, w2, J2 = gamma**2, omega**2, J**2
    den_a = (2 * n + 1) ** 2 * ((g2 + 4 * w2) ** 2 + 16 * J2**2 + 8 * J2 * (g2 - 4 * w2))
    den_b = (2 * n + 1) ** 2 * (g2 + 4 * w2)
    if abs(den_a) < SINGULAR_TOL or abs(den_b) < SINGULAR_TOL:
        raise SingularParameterError("alpha/beta denominators vanish")
    alpha = 16 * g2 * m**2 * (n + 1) ** 2 * (g2 + 4 * J2 + 4 * w2) / den_a
    beta = 4 * g2 * (n + 1) ** 2 / den_b
    return float(alpha), float(beta)


@dataclass(frozen=True)
class EntropyShiftReport:
    """Exact and approximate entropy shifts for one two-mode configuration."""

    exact: float
    quartic_trace: float
    first_order_trace: complex
    second_order: float
    fourth_power: float
    sigma14_numeric: complex
    sigma14_closed: complex
    warning: str | None


def entropy_shift_report(
    p: PerturbationInput,
    J: float,
    gamma: float,
    omega: float,
    convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED,
) -> EntropyShiftReport:
    """Compare the exact squeezing-induced entropy shift with every approximation."""
    spec = p.system(omega, gamma, J)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", WeakSqueezingWarning)
        series = perturbation_series(spec, convention)
    exact = entropy_shift_exact(series.sigma0, series.exact(1.0))
    pert = entropy_shift_perturbative(series.sigma0, series.sigma1)
    closed = sigma14_closed_form(p, J, gamma, omega) * p.eta
    return EntropyShiftReport(
        exact=exact,
        quartic_trace=pert.value,
        first_order_trace=pert.trace,
        second_order=entropy_shift_second_order(series.sigma0, series.sigma1, series.sigma2),
        fourth_power=entropy_shift_fourth_power(closed),
        sigma14_numeric=complex(series.sigma1.sigma[0, 3]),
        sigma14_closed=closed,
        warning=series.warning,
    )

