"""
Moment dynamics and steady states.

First moments evolve as dR/dt = A R and covariances as
dsigma/dt = A sigma + sigma A† + D.  The steady state solves the Lyapunov
equation A sigma + sigma A† = -D by Kronecker vectorization.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
from numpy.typing import NDArray

from .core import BathMoments, ComplexMatrix, CovarianceState, ModeSpec, as_matrix
from .spectral import eigendecompose

logger = logging.getLogger(__name__)

STABILITY_TOL = 1e-12
RESIDUAL_TOL = 1e-10
INTEGRATOR_TOL = 1e-10


class LyapunovError(ArithmeticError):
    pass


class UnstableDriftError(LyapunovError):
    def __init__(self, eigenvalue: complex):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"drift matrix is not Hurwitz stable: eigenvalue {eigenvalue:.6g} has real part "
            f"{eigenvalue.real:.3e} >= {-STABILITY_TOL:g}"
        )


class IntegrationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# Lyapunov solver


def check_stable(A: ComplexMatrix, tol: float = STABILITY_TOL) -> None:
    lam = eigendecompose(A).eigenvalues
    worst = lam[np.argmax(lam.real)]
    if not worst.real < -tol:
        raise UnstableDriftError(complex(worst))


def solve_lyapunov(A: ComplexMatrix, D: ComplexMatrix, check: bool = True) -> ComplexMatrix:
    """Solve A X + X A† = -D with a dense Kronecker system.

    Column-major vectorization gives ((I ⊗ A) + (conj(A) ⊗ I)) vec(X) = -vec(D).
    """
    A = np.asarray(A, dtype=complex)
    D = np.asarray(D, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n) or D.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, D {D.shape}")
    if check:
        check_stable(A)
    eye = np.eye(n)
    K = np.kron(eye, A) + np.kron(A.conj(), eye)
    if np.linalg.cond(K) > 1.0 / (1e3 * np.finfo(float).eps):
        raise LyapunovError("Kronecker system is numerically singular")
    x = np.linalg.solve(K, -D.reshape(-1, order="F"))
    X = x.reshape(n, n, order="F")
    dnorm = np.linalg.norm(D)
    residual = np.linalg.norm(A @ X + X @ A.conj().T + D)
    if residual > RESIDUAL_TOL * dnorm + 1e3 * np.finfo(float).eps * np.linalg.norm(A) * np.linalg.norm(X):
        raise LyapunovError(f"Lyapunov residual {residual:.3e} exceeds bound for ||D|| = {dnorm:.3e}")
    return X


def lyapunov_residual(A: ComplexMatrix, sigma, D: ComplexMatrix) -> float:
    S = as_matrix(sigma)
    return float(np.linalg.norm(A @ S + S @ np.conj(A).T + D))


def steady_state_lyapunov(A: ComplexMatrix, D: ComplexMatrix) -> CovarianceState:
    """Unique Hermitian steady state of dsigma/dt = A sigma + sigma A† + D."""
    X = solve_lyapunov(A, D)
    return CovarianceState(0.5 * (X + X.conj().T))


def single_mode_steady_closed_form(mode: ModeSpec, bath: BathMoments) -> CovarianceState:
    """[[N+1, s], [s*, N]] with s = <a a> = gamma M / (gamma + 2i omega)."""
    g, w = mode.gamma, mode.omega
    s = g * bath.M / (g + 2j * w)
    return CovarianceState(np.array([[bath.N + 1, s], [np.conj(s), bath.N]], dtype=complex))


# --------------------------------------------------------------------------
# time evolution


@dataclass(frozen=True)
class Trajectory:
    times: NDArray[np.float64]
    states: NDArray[np.complex128]
    corrections: NDArray[np.float64]

    def __post_init__(self) -> None:
        if len(self.times) != len(self.states):
            raise ValueError("times and states must have equal length")
        if len(self.times) > 1 and not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def covariance(self, k: int) -> CovarianceState:
        return CovarianceState(self.states[k])


def _check_grid(t_grid: Sequence[float]) -> NDArray[np.float64]:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a nonempty 1-d sequence")
    if t[0] < 0 or not np.all(np.isfinite(t)):
        raise ValueError("t_grid must be finite and start at t >= 0")
    if t.size > 1 and not np.all(np.diff(t) > 0):
        raise ValueError("t_grid must be strictly increasing")
    return t


def evolve_first_moments(A: ComplexMatrix, r0: Sequence[complex], t_grid: Sequence[float]) -> Trajectory:
    """R(t) = expm(A t) r0 on every grid time (scaling-and-squaring exponential)."""
    A = np.asarray(A, dtype=complex)
    r0 = np.asarray(r0, dtype=complex)
    if r0.shape != (A.shape[0],):
        raise ValueError(f"r0 has shape {r0.shape}, drift is {A.shape}")
    t = _check_grid(t_grid)
    states = np.array([scipy.linalg.expm(A * tk) @ r0 for tk in t])
    return Trajectory(times=t, states=states, corrections=np.zeros(t.size))


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4


def integrate_dopri(
    f: Callable[[float, NDArray], NDArray],
    y0: NDArray,
    t_grid: Sequence[float],
    rtol: float = INTEGRATOR_TOL,
    atol: float = INTEGRATOR_TOL,
    max_steps: int = 1_000_000,
    on_output: Callable[[NDArray], NDArray] | None = None,
) -> NDArray:
    """Adaptive Dormand-Prince integration landing exactly on each grid time.

    ``on_output`` may replace the state at each output time (the returned value
    is stored and integration continues from it).
    """
    t_out = _check_grid(t_grid)
    y = np.array(y0, dtype=complex)
    t = 0.0
    out = []
    h = None
    steps = 0
    k1 = f(t, y)
    for target in t_out:
        while t < target:
            if h is None:
                scale = atol + rtol * np.abs(y)
                d0 = np.sqrt(np.mean(np.abs(y / scale) ** 2))
                d1 = np.sqrt(np.mean(np.abs(k1 / scale) ** 2))
                h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
                h = min(h, target - t)
            h_step = min(h, target - t)
            if h_step <= 16 * np.finfo(float).eps * max(abs(t), 1.0):
                raise IntegrationError(f"step size underflow at t={t:.6g} (h={h_step:.3e}); drift may be unstable")
            k = [k1]
            for i in range(1, 7):
                yi = y + h_step * sum(a * kj for a, kj in zip(_A[i], k))
                k.append(f(t + _C[i] * h_step, yi))
            y_new = y + h_step * sum(b * kj for b, kj in zip(_B5, k) if b != 0.0)
            err_vec = h_step * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            err = np.sqrt(np.mean(np.abs(err_vec / scale) ** 2))
            if not np.isfinite(err):
                raise IntegrationError(f"non-finite error estimate at t={t:.6g}")
            if err <= 1.0:
                t = target if target - t <= h_step else t + h_step
                y = y_new
                k1 = k[6]
                fac = 5.0 if err == 0.0 else min(5.0, max(0.2, 0.9 * err ** -0.2))
                h = max(h, h_step) * fac if h_step < h else h_step * fac
            else:
                h = h_step * max(0.2, 0.9 * err ** -0.2)
            steps += 1
            if steps > max_steps:
                raise IntegrationError(f"exceeded {max_steps} steps before t={target:.6g}")
        if on_output is not None:
            replaced = on_output(y)
            if replaced is not y:
                y = np.array(replaced, dtype=complex)
                k1 = f(t, y)
        out.append(y.copy())
    return np.array(out)


def evolve_covariance(
    A: ComplexMatrix,
    D: ComplexMatrix,
    sigma0,
    t_grid: Sequence[float],
    tol: float = INTEGRATOR_TOL,
) -> Trajectory:
    """Integrate dsigma/dt = A sigma + sigma A† + D and Hermitize each output."""
    A = np.asarray(A, dtype=complex)
    D = np.asarray(D, dtype=complex)
    S0 = as_matrix(sigma0)
    n = A.shape[0]
    if D.shape != (n, n) or S0.shape != (n, n):
        raise ValueError(f"shape mismatch: A {A.shape}, D {D.shape}, sigma0 {S0.shape}")
    if np.linalg.norm(S0 - S0.conj().T) > 1e-12 * max(1.0, np.linalg.norm(S0)):
        raise ValueError("sigma0 must be Hermitian")
    Ah = A.conj().T
    corrections: list[float] = []

    def rhs(_t: float, y: NDArray) -> NDArray:
        S = y.reshape(n, n)
        return (A @ S + S @ Ah + D).reshape(-1)

    def hermitize(y: NDArray) -> NDArray:
        S = y.reshape(n, n)
        H = 0.5 * (S + S.conj().T)
        corr = float(np.linalg.norm(H - S))
        corrections.append(corr)
        logger.debug("re-Hermitization correction %.3e", corr)
        return H.reshape(-1)

    ys = integrate_dopri(rhs, S0.reshape(-1), t_grid, rtol=tol, atol=tol, on_output=hermitize)
    t = np.asarray(t_grid, dtype=float)
    return Trajectory(times=t, states=ys.reshape(-1, n, n), corrections=np.array(corrections))


def covariance_propagator(A: ComplexMatrix, D: ComplexMatrix, sigma0, t: float) -> ComplexMatrix:
    """Exact sigma(t) = sigma_ss + e^{At}(sigma0 - sigma_ss)e^{A†t} for stable A."""
    ss = solve_lyapunov(A, D)
    E = scipy.linalg.expm(np.asarray(A, dtype=complex) * t)
    return ss + E @ (as_matrix(sigma0) - ss) @ E.conj().T


# --------------------------------------------------------------------------
# quadratures


@dataclass(frozen=True)
class QuadratureMoments:
    """<x^2>, <p^2> and <{x, p}> with vacuum normalised to 1."""

    xx: float
    pp: float
    xp: float

    def __post_init__(self) -> None:
        if not (self.xx > 0 and self.pp > 0):
            raise ValueError(f"quadrature variances must be positive, got xx={self.xx}, pp={self.pp}")

    @property
    def det(self) -> float:
        return self.xx * self.pp - 0.25 * self.xp**2


def quadrature_steady_variances(mode: ModeSpec, N: float, R: float) -> QuadratureMoments:
    """Steady-state quadrature moments for anomalous correlation with real part ``R``."""
    g, w = mode.gamma, mode.omega
    den = g**2 + 8 * w**2
    shift = 2 * g**2 * R / den
    return QuadratureMoments(
        xx=2 * N + 1 + shift,
        pp=2 * N + 1 - shift,
        xp=8 * g * w * R / den,
    )


def anomalous_normalization_check(mode: ModeSpec, bath: BathMoments) -> dict[str, float]:
    """Compare <a a> from the closed-form covariance with the quadrature asymmetry.

    Both routes are evaluated literally; ``abs_a2`` is |gamma M/(gamma+2i omega)|
    and ``quadrature_quarter_asym`` is (xx - pp)/4 from the quadrature
    variances with R = Re(M).
    """
    s = mode.gamma * bath.M / (mode.gamma + 2j * mode.omega)
    q = quadrature_steady_variances(mode, bath.N, bath.M.real)
    a = abs(s)
    b = (q.xx - q.pp) / 4
    return {
        "abs_a2": float(a),
        "re_a2": float(s.real),
        "quadrature_quarter_asym": float(b),
        "difference": float(a - b),
    }


def quadrature_moment_rhs(mode: ModeSpec, N: float, M: complex) -> tuple[NDArray, NDArray]:
    """Linear system d/dt (xx, pp, xp) = L (xx, pp, xp) + c of the quadrature moments."""
    g, w = mode.gamma, mode.omega
    two_re = 2 * complex(M).real
    L = np.array(
        [
            [-g, 0.0, -2 * w],
            [0.0, -g, 2 * w],
            [2 * w, -2 * w, -g],
        ]
    )
    c = np.array([g * (2 * N + 1 + two_re), g * (2 * N + 1 - two_re), 0.0])
    return L, c


def relaxation_time(A: ComplexMatrix) -> float:
    """1 / (slowest decay rate) of the covariance, i.e. 1 / (2 min |Re lambda|)."""
    lam = eigendecompose(A).eigenvalues
    rate = -2 * float(np.max(lam.real))
    return math.inf if rate <= 0 else 1.0 / rate
