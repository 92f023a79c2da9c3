"""
Domain types and matrix builders for bosonic modes in squeezed thermal baths.

Operator ordering is fixed to R = (a1, a1†, a2, a2†) and covariances are the
non-symmetrized second moments sigma = <R R†>, so for a single mode

    sigma = [[<a a†>, <a a>], [<a† a†>, <a† a>]].

All quantities are dimensionless with hbar = 1; frequencies and rates share
one inverse-time unit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

ComplexMatrix = NDArray[np.complex128]

TWO_PI = 2.0 * math.pi


class DiffusionConvention(str, enum.Enum):
    """Which diffusion matrix feeds the covariance equation.

    ``LITERAL`` is the block matrix with gamma*(N+2) on the diagonal and 2*gamma*M
    off the diagonal.  ``CORRECTED`` is the block matrix whose decoupled
    steady state equals the single-mode closed form (<a†a> = N,
    <a a> = gamma*M/(gamma + 2i*omega)) under the same drift matrix.
    """

    LITERAL = "literal"
    CORRECTED = "corrected"

    @classmethod
    def parse(cls, value: "str | DiffusionConvention") -> "DiffusionConvention":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "literal": cls.LITERAL,
            "paper": cls.LITERAL,
            "paperliteral": cls.LITERAL,
            "paper_literal": cls.LITERAL,
            "corrected": cls.CORRECTED,
            "consistencycorrected": cls.CORRECTED,
            "consistency_corrected": cls.CORRECTED,
        }
        if key not in aliases:
            raise ValueError(f"unknown diffusion convention {value!r}; expected 'literal' or 'corrected'")
        return aliases[key]


@dataclass(frozen=True)
class SqueezingInput:
    """Thermal occupation, squeezing amplitude and phase of one reservoir."""

    nbar: float
    r: float
    phi: float = 0.0

    def __post_init__(self) -> None:
        if not self.nbar >= 0:
            raise ValueError(f"nbar must satisfy nbar >= 0, got {self.nbar}")
        if not self.r >= 0:
            raise ValueError(f"r must satisfy r >= 0, got {self.r}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi}")
        object.__setattr__(self, "phi", float(self.phi) % TWO_PI)


@dataclass(frozen=True)
class BathMoments:
    """Effective occupation ``N`` and anomalous correlation ``M`` of a bath."""

    N: float
    M: complex = 0j

    def __post_init__(self) -> None:
        if not self.N >= 0:
            raise ValueError(f"N must satisfy N >= 0, got {self.N}")
        object.__setattr__(self, "N", float(self.N))
        object.__setattr__(self, "M", complex(self.M))

    @property
    def physical(self) -> bool:
        return check_physical(self)


@dataclass(frozen=True)
class ModeSpec:
    omega: float
    gamma: float

    def __post_init__(self) -> None:
        if not self.omega > 0:
            raise ValueError(f"omega must satisfy omega > 0, got {self.omega}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must satisfy gamma > 0, got {self.gamma}")


@dataclass(frozen=True)
class SystemSpec:
    """One or two modes, each attached to its own bath, with hopping ``J``."""

    modes: tuple[ModeSpec, ...]
    baths: tuple[BathMoments, ...]
    J: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", tuple(self.modes))
        object.__setattr__(self, "baths", tuple(self.baths))
        if len(self.modes) not in (1, 2):
            raise ValueError(f"a system has 1 or 2 modes, got {len(self.modes)}")
        if len(self.baths) != len(self.modes):
            raise ValueError("need exactly one bath per mode")
        if len(self.modes) == 1 and self.J != 0:
            raise ValueError("hopping J requires two modes")

    @property
    def n_modes(self) -> int:
        return len(self.modes)

    @classmethod
    def single(cls, omega: float, gamma: float, N: float, M: complex = 0j) -> "SystemSpec":
        return cls(modes=(ModeSpec(omega, gamma),), baths=(BathMoments(N, M),))

    @classmethod
    def two_mode(
        cls,
        omega1: float,
        omega2: float,
        gamma: float,
        J: float,
        N1: float,
        N2: float,
        M1: complex = 0j,
        M2: complex = 0j,
    ) -> "SystemSpec":
        return cls(
            modes=(ModeSpec(omega1, gamma), ModeSpec(omega2, gamma)),
            baths=(BathMoments(N1, M1), BathMoments(N2, M2)),
            J=J,
        )

    def with_squeezing(self, *M: complex) -> "SystemSpec":
        """Copy with the anomalous correlations replaced (occupations kept)."""
        if len(M) != self.n_modes:
            raise ValueError(f"expected {self.n_modes} squeezing values, got {len(M)}")
        baths = tuple(BathMoments(b.N, m) for b, m in zip(self.baths, M))
        return SystemSpec(modes=self.modes, baths=baths, J=self.J)

    def with_gamma(self, gamma: float) -> "SystemSpec":
        modes = tuple(ModeSpec(m.omega, gamma) for m in self.modes)
        return SystemSpec(modes=modes, baths=self.baths, J=self.J)


@dataclass(frozen=True)
class CovarianceState:
    """Second moments sigma = <R R†> in the (a_i, a_i†) ordering."""

    sigma: ComplexMatrix = field(repr=False)

    def __post_init__(self) -> None:
        s = np.array(self.sigma, dtype=complex)
        if s.ndim != 2 or s.shape[0] != s.shape[1] or s.shape[0] % 2:
            raise ValueError(f"covariance must be a square matrix of even size, got shape {s.shape}")
        s.setflags(write=False)
        object.__setattr__(self, "sigma", s)

    @property
    def n_modes(self) -> int:
        return self.sigma.shape[0] // 2

    def occupation(self, i: int = 0) -> float:
        """<a_i† a_i>."""
        return float(self.sigma[2 * i + 1, 2 * i + 1].real)

    def anomalous(self, i: int = 0) -> complex:
        """<a_i a_i>."""
        return complex(self.sigma[2 * i, 2 * i + 1])

    def hermiticity_error(self) -> float:
        return float(np.linalg.norm(self.sigma - self.sigma.conj().T))

    def symmetrized(self) -> ComplexMatrix:
        """Return ½<{R, R†}>, i.e. sigma with the commutator part removed."""
        return self.sigma - 0.5 * commutator_matrix(self.n_modes)

    def conjugation_defect(self) -> float:
        """Distance between P sigma P and conj(sigma), P the pair-swap permutation."""
        P = pair_swap(self.n_modes)
        return float(np.linalg.norm(P @ self.sigma @ P - self.sigma.conj()))


def as_matrix(x: "CovarianceState | NDArray") -> ComplexMatrix:
    if isinstance(x, CovarianceState):
        return x.sigma
    return np.asarray(x, dtype=complex)


def commutator_matrix(n_modes: int) -> NDArray[np.float64]:
    """[R_i, R_j†] for the (a, a†) ordering: diag(1, -1, 1, -1, ...)."""
    return np.diag(np.tile([1.0, -1.0], n_modes))


def pair_swap(n_modes: int) -> NDArray[np.float64]:
    """Permutation exchanging a_i <-> a_i† within every mode."""
    block = np.array([[0.0, 1.0], [1.0, 0.0]])
    return np.kron(np.eye(n_modes), block)


def vacuum_covariance(n_modes: int = 1) -> CovarianceState:
    return CovarianceState(np.diag(np.tile([1.0, 0.0], n_modes)).astype(complex))


def bath_moments_from_squeezing(inp: SqueezingInput) -> BathMoments:
    """Effective occupation and anomalous correlation of a squeezed thermal bath."""
    nbar, r, phi = inp.nbar, inp.r, inp.phi
    N = nbar * math.cosh(2 * r) + math.sinh(r) ** 2
    M = -0.5 * math.sinh(2 * r) * np.exp(2j * phi) * (2 * nbar + 1)
    return BathMoments(N=N, M=complex(M))


def check_physical(moments: BathMoments, tol: float = 0.0) -> bool:
    """True iff |M|^2 <= N(N+1) + tol."""
    return abs(moments.M) ** 2 <= moments.N * (moments.N + 1) + tol


def max_physical_squeezing(N: float) -> float:
    return math.sqrt(N * (N + 1))


def wigner_covariance(inp: SqueezingInput) -> NDArray[np.float64]:
    """Real 2x2 quadrature covariance of the squeezed thermal state (vacuum = I/2)."""
    c, s = math.cosh(2 * inp.r), math.sinh(2 * inp.r)
    c2, s2 = math.cos(2 * inp.phi), math.sin(2 * inp.phi)
    return (inp.nbar + 0.5) * np.array([[c - s * c2, -s * s2], [-s * s2, c + s * c2]])


def single_mode_drift(mode: ModeSpec, M: complex) -> ComplexMatrix:
    w, g = mode.omega, mode.gamma
    M = complex(M)
    return np.array(
        [
            [-1j * w - g / 2, -g * M],
            [-g * M.conjugate(), 1j * w - g / 2],
        ],
        dtype=complex,
    )


def _shared_gamma(spec: SystemSpec) -> float:
    if spec.n_modes != 2:
        raise ValueError("two-mode builder needs a system with exactly two modes")
    g1, g2 = spec.modes[0].gamma, spec.modes[1].gamma
    if g1 != g2:
        raise ValueError(f"two-mode drift is defined for a shared gamma; got gamma1={g1}, gamma2={g2}")
    return g1


def two_mode_drift(spec: SystemSpec) -> ComplexMatrix:
    """4x4 drift in the (a1, a1†, a2, a2†) ordering.

    Diagonal blocks are the single-mode drifts; the hopping enters as
    -iJ between a1 and a2 and +iJ between a1† and a2†.
    """
    _shared_gamma(spec)
    A = np.zeros((4, 4), dtype=complex)
    for i, (mode, bath) in enumerate(zip(spec.modes, spec.baths)):
        A[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = single_mode_drift(mode, bath.M)
    hop = -1j * spec.J * np.diag([1.0, -1.0])
    A[0:2, 2:4] = hop
    A[2:4, 0:2] = hop
    return A


def drift_matrix(spec: SystemSpec) -> ComplexMatrix:
    if spec.n_modes == 1:
        return single_mode_drift(spec.modes[0], spec.baths[0].M)
    return two_mode_drift(spec)


def corrected_diffusion_block(mode: ModeSpec, bath: BathMoments) -> ComplexMatrix:
    """Diffusion block that makes the closed-form moments a steady state.

    Obtained from D = -(A sigma* + sigma* A†) with A the single-mode drift and
    sigma* = [[N+1, s], [s*, N]], s = gamma*M/(gamma + 2i*omega).  Expanded:

        D = [[gamma(N+1) + q, 2 gamma M (N+1)],
             [2 gamma M* (N+1), gamma N + q]],   q = 2 gamma^3 |M|^2 / (gamma^2 + 4 omega^2).
    """
    g, w = mode.gamma, mode.omega
    N, M = bath.N, bath.M
    q = 2 * g**3 * abs(M) ** 2 / (g**2 + 4 * w**2)
    off = 2 * g * M * (N + 1)
    return np.array(
        [[g * (N + 1) + q, off], [off.conjugate(), g * N + q]],
        dtype=complex,
    )


def literal_diffusion_block(mode: ModeSpec, bath: BathMoments) -> ComplexMatrix:
    g, N, M = mode.gamma, bath.N, bath.M
    return np.array(
        [[g * (N + 2), 2 * g * M], [2 * g * M.conjugate(), g * (N + 2)]],
        dtype=complex,
    )


def diffusion_block(
    mode: ModeSpec,
    bath: BathMoments,
    convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED,
) -> ComplexMatrix:
    convention = DiffusionConvention.parse(convention)
    if convention is DiffusionConvention.LITERAL:
        return literal_diffusion_block(mode, bath)
    return corrected_diffusion_block(mode, bath)


def diffusion_matrix(
    spec: SystemSpec,
    convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED,
) -> ComplexMatrix:
    """Block-diagonal diffusion; inter-mode blocks are exactly zero."""
    n = spec.n_modes
    D = np.zeros((2 * n, 2 * n), dtype=complex)
    for i, (mode, bath) in enumerate(zip(spec.modes, spec.baths)):
        D[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = diffusion_block(mode, bath, convention)
    return D


def two_mode_diffusion(
    spec: SystemSpec,
    convention: "DiffusionConvention | str" = DiffusionConvention.CORRECTED,
) -> ComplexMatrix:
    _shared_gamma(spec)
    return diffusion_matrix(spec, convention)


def direct_sum(*blocks: NDArray) -> ComplexMatrix:
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n), dtype=complex)
    k = 0
    for b in blocks:
        m = b.shape[0]
        out[k : k + m, k : k + m] = b
        k += m
    return out

