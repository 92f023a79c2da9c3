"""
Non-Hermitian eigen-analysis of drift matrices.

The eigensolver reduces to upper Hessenberg form with Householder reflectors
and then runs single-shift complex QR (Wilkinson shifts, Givens rotations)
until the Schur form is reached.  Right eigenvectors come from back
substitution on the triangular factor.  Exceptional points are located by
bisection on a one-parameter family of drift matrices.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from .core import ComplexMatrix, SystemSpec, check_physical, drift_matrix, pair_swap

IM_TOL = 1e-9
GAP_TOL = 1e-6
COND_THRESHOLD = 1e8
MAX_DIM = 8
_EPS = np.finfo(float).eps


class EigenConvergenceError(RuntimeError):
    pass


class BracketError(ValueError):
    pass


class PTPhase(str, enum.Enum):
    UNBROKEN = "Unbroken"
    BROKEN = "Broken"
    DEGENERATE = "Degenerate"


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: NDArray[np.complex128]
    eigenvectors: NDArray[np.complex128]
    cond_V: float
    pt_phase: PTPhase

    @property
    def gap(self) -> float:
        return min_pairwise_gap(self.eigenvalues)

    @property
    def degenerate(self) -> bool:
        return self.pt_phase is PTPhase.DEGENERATE

    def residuals(self, A: ComplexMatrix) -> NDArray[np.float64]:
        """||A v - lambda v||_2 for every eigenpair."""
        A = np.asarray(A, dtype=complex)
        R = A @ self.eigenvectors - self.eigenvectors * self.eigenvalues
        return np.linalg.norm(R, axis=0)


@dataclass(frozen=True)
class EPPoint:
    location: tuple[float, ...]
    s: float
    gap: float
    cond_V: float
    bracket: tuple[float, float]


# --------------------------------------------------------------------------
# eigensolver


def _householder_vector(x: NDArray) -> tuple[NDArray, complex]:
    """Return (v, beta) with (I - beta v v†) x = alpha e1."""
    scale = np.max(np.abs(x))
    if scale == 0.0:
        return x.astype(complex), 0.0
    # the reflector is invariant under rescaling x, which keeps subnormal inputs finite
    x = x / scale
    alpha = np.linalg.norm(x)
    v = x.astype(complex).copy()
    phase = np.exp(1j * np.angle(x[0])) if x[0] != 0 else 1.0
    v[0] += phase * alpha
    vnorm2 = np.vdot(v, v).real
    if vnorm2 == 0.0:
        return v, 0.0
    return v, 2.0 / vnorm2


def hessenberg(A: ComplexMatrix) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Unitary reduction A = Q H Q† with H upper Hessenberg."""
    H = np.array(A, dtype=complex)
    n = H.shape[0]
    Q = np.eye(n, dtype=complex)
    for k in range(n - 2):
        x = H[k + 1 :, k]
        if np.linalg.norm(x[1:]) == 0.0:
            continue
        v, beta = _householder_vector(x)
        if beta == 0.0:
            continue
        # left: rows k+1.., right: columns k+1..
        H[k + 1 :, k:] -= beta * np.outer(v, v.conj() @ H[k + 1 :, k:])
        H[:, k + 1 :] -= beta * np.outer(H[:, k + 1 :] @ v, v.conj())
        Q[:, k + 1 :] -= beta * np.outer(Q[:, k + 1 :] @ v, v.conj())
        H[k + 2 :, k] = 0.0
    return H, Q


def _givens(a: complex, b: complex) -> tuple[float, complex]:
    """c, s with [[c, s], [-conj(s), c]] @ [a, b] = [r, 0]."""
    if b == 0:
        return 1.0, 0j
    if a == 0:
        return 0.0, 1.0 + 0j
    norm = math.hypot(abs(a), abs(b))
    c = abs(a) / norm
    s = np.exp(1j * np.angle(a)) * (np.conj(b) / norm)
    return c, s


def _wilkinson_shift(a: complex, b: complex, c: complex, d: complex) -> complex:
    """Eigenvalue of [[a, b], [c, d]] closest to d."""
    half_tr = 0.5 * (a + d)
    disc = np.sqrt(0.25 * (a - d) ** 2 + b * c)
    l1, l2 = half_tr + disc, half_tr - disc
    return l1 if abs(l1 - d) <= abs(l2 - d) else l2


def schur(A: ComplexMatrix, max_iter_per_eig: int = 60) -> tuple[ComplexMatrix, ComplexMatrix]:
    """Complex Schur decomposition A = Z T Z† by shifted QR iteration."""
    T, Z = hessenberg(A)
    n = T.shape[0]
    if n <= 1:
        return T, Z
    norm_scale = max(np.linalg.norm(T), np.finfo(float).tiny)
    hi = n - 1
    iters = 0
    while hi > 0:
        # locate the start of the trailing unreduced block
        lo = hi
        while lo > 0:
            off = abs(T[lo, lo - 1])
            scale = abs(T[lo, lo]) + abs(T[lo - 1, lo - 1])
            if scale == 0.0:
                scale = norm_scale
            if off <= _EPS * scale:
                T[lo, lo - 1] = 0.0
                break
            lo -= 1
        if lo == hi:
            hi -= 1
            iters = 0
            continue
        iters += 1
        if iters > max_iter_per_eig:
            raise EigenConvergenceError(
                f"QR iteration did not converge after {max_iter_per_eig} sweeps "
                f"(block {lo}..{hi}, subdiagonal {abs(T[hi, hi - 1]):.3e})"
            )
        if iters % 11 == 0:
            mu = T[hi, hi] + 0.75 * abs(T[hi, hi - 1]) * (1 + 1j)
        else:
            mu = _wilkinson_shift(T[hi - 1, hi - 1], T[hi - 1, hi], T[hi, hi - 1], T[hi, hi])

        for k in range(lo, hi + 1):
            T[k, k] -= mu
        rotations = []
        for k in range(lo, hi):
            c, s = _givens(T[k, k], T[k + 1, k])
            G = np.array([[c, s], [-np.conj(s), c]])
            T[k : k + 2, k:] = G @ T[k : k + 2, k:]
            T[k + 1, k] = 0.0
            rotations.append((k, G))
        for k, G in rotations:
            Gh = G.conj().T
            rows = min(k + 2, hi) + 1
            T[:rows, k : k + 2] = T[:rows, k : k + 2] @ Gh
            Z[:, k : k + 2] = Z[:, k : k + 2] @ Gh
        for k in range(lo, hi + 1):
            T[k, k] += mu
    return np.triu(T), Z


def _triangular_eigenvectors(T: ComplexMatrix) -> ComplexMatrix:
    n = T.shape[0]
    smin = max(_EPS * np.linalg.norm(T), np.finfo(float).tiny)
    Y = np.zeros((n, n), dtype=complex)
    for k in range(n):
        lam = T[k, k]
        y = np.zeros(n, dtype=complex)
        y[k] = 1.0
        for i in range(k - 1, -1, -1):
            den = T[i, i] - lam
            if abs(den) < smin:
                den = smin
            y[i] = -(T[i, i + 1 : k + 1] @ y[i + 1 : k + 1]) / den
        Y[:, k] = y
    return Y


def _sort_order(eigenvalues: NDArray[np.complex128], scale: float) -> NDArray[np.intp]:
    # quantize so rounding noise cannot reorder conjugate partners
    q = max(scale, 1.0) * 1e-11
    re = np.round(eigenvalues.real / q)
    im = np.round(eigenvalues.imag / q)
    return np.lexsort((-im, -re))


def min_pairwise_gap(eigenvalues: Sequence[complex]) -> float:
    vals = list(eigenvalues)
    if len(vals) < 2:
        return math.inf
    return min(abs(a - b) for a, b in itertools.combinations(vals, 2))


def condition_number(V: ComplexMatrix) -> float:
    sv = np.linalg.svd(V, compute_uv=False)
    if sv[-1] == 0.0:
        return math.inf
    return float(sv[0] / sv[-1])


def _phase_from_eigenvalues(eigenvalues: NDArray, im_tol: float) -> PTPhase:
    if np.all(np.abs(eigenvalues.imag) > im_tol):
        return PTPhase.UNBROKEN
    return PTPhase.BROKEN


def eigendecompose(
    A: ComplexMatrix,
    im_tol: float = IM_TOL,
    cond_threshold: float = COND_THRESHOLD,
) -> SpectralReport:
    """Eigenvalues, unit right eigenvectors and eigenvector conditioning of ``A``.

    Eigenpairs are sorted by real part, then imaginary part, both descending.
    ``pt_phase`` is ``Degenerate`` when cond(V) exceeds ``cond_threshold``.
    """
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    if n > MAX_DIM:
        raise ValueError(f"eigendecompose supports dim <= {MAX_DIM}, got {n}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    T, Z = schur(A)
    Y = _triangular_eigenvectors(T)
    V = Z @ Y
    V /= np.linalg.norm(V, axis=0)
    lam = np.diag(T).copy()
    order = _sort_order(lam, float(np.linalg.norm(A, 2)) if n else 1.0)
    lam, V = lam[order], V[:, order]
    cond = condition_number(V)
    if cond > cond_threshold:
        phase = PTPhase.DEGENERATE
    else:
        phase = _phase_from_eigenvalues(lam, im_tol)
    return SpectralReport(eigenvalues=lam, eigenvectors=V, cond_V=cond, pt_phase=phase)


def eigenvalues(A: ComplexMatrix) -> NDArray[np.complex128]:
    return eigendecompose(A).eigenvalues


def single_mode_eigenvalues(omega: float, gamma: float, M: complex) -> tuple[complex, complex]:
    """Closed-form pair -gamma/2 ± sqrt(gamma^2 |M|^2 - omega^2), principal root."""
    root = np.sqrt(complex(gamma**2 * abs(M) ** 2 - omega**2))
    return complex(-gamma / 2 + root), complex(-gamma / 2 - root)


def classify_pt_phase(
    A: ComplexMatrix,
    im_tol: float = IM_TOL,
    cond_threshold: float = COND_THRESHOLD,
) -> PTPhase:
    return eigendecompose(A, im_tol=im_tol, cond_threshold=cond_threshold).pt_phase


def spectrum_symmetry_defect(A: ComplexMatrix) -> float:
    """Distance between the spectra of A and P conj(A) P (P = pair swap)."""
    A = np.asarray(A, dtype=complex)
    P = pair_swap(A.shape[0] // 2)
    lam = eigendecompose(A).eigenvalues
    mu = eigendecompose(P @ A.conj() @ P).eigenvalues
    return multiset_distance(lam, mu)


def multiset_distance(a: Sequence[complex], b: Sequence[complex]) -> float:
    a, b = np.asarray(a), np.asarray(b)
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max()) if len(rows) else 0.0


# --------------------------------------------------------------------------
# EP location


def _im_label(lam: NDArray, im_tol: float) -> PTPhase:
    return _phase_from_eigenvalues(lam, im_tol)


def _im_multiplicity(lam: NDArray, im_tol: float) -> int:
    """Number of distinct imaginary parts (clustered at ``im_tol``)."""
    ims = np.sort(lam.imag)
    return 1 + int(np.sum(np.diff(ims) > im_tol))


Builder = Callable[[float], ComplexMatrix]


def find_ep_on_ray(
    builder: Builder,
    s_lo: float,
    s_hi: float,
    tol: float = 1e-12,
    im_tol: float = IM_TOL,
    cond_threshold: float = COND_THRESHOLD,
    predicate: str = "pt",
    locate: Callable[[float], tuple[float, ...]] | None = None,
    max_iter: int = 200,
) -> EPPoint:
    """Bisect the ray parameter ``s`` onto a change of spectral character.

    ``predicate="pt"`` bisects on the PT classification (some eigenvalue
    turning real).  ``predicate="im_multiplicity"`` bisects on the number of
    distinct imaginary parts, which also catches coalescences off the real axis
    where the PT label does not change.
    """
    if not s_lo < s_hi:
        raise BracketError(f"need s_lo < s_hi, got [{s_lo}, {s_hi}]")
    if predicate not in ("pt", "im_multiplicity"):
        raise ValueError(f"unknown predicate {predicate!r}")

    def label(s: float) -> object:
        lam = eigendecompose(builder(s), im_tol=im_tol, cond_threshold=cond_threshold).eigenvalues
        if predicate == "pt":
            return _im_label(lam, im_tol)
        return _im_multiplicity(lam, im_tol)

    if predicate == "pt":
        for s in (s_lo, s_hi):
            if eigendecompose(builder(s), im_tol=im_tol, cond_threshold=cond_threshold).degenerate:
                raise BracketError(
                    f"bracket endpoint s={s} is numerically defective; move the bracket away from the EP"
                )
    lab_lo, lab_hi = label(s_lo), label(s_hi)
    if lab_lo == lab_hi:
        raise BracketError(
            f"no change of spectral character on [{s_lo}, {s_hi}] (both ends {lab_lo!s})"
        )
    lo, hi = float(s_lo), float(s_hi)
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if label(mid) == lab_lo:
            lo = mid
        else:
            hi = mid
    s_star = 0.5 * (lo + hi)
    rep = eigendecompose(builder(s_star), im_tol=im_tol, cond_threshold=cond_threshold)
    loc = locate(s_star) if locate is not None else (s_star,)
    return EPPoint(location=tuple(float(x) for x in loc), s=s_star, gap=float(rep.gap), cond_V=float(rep.cond_V), bracket=(lo, hi))


def track_eigenvalues(sequence: Iterable[NDArray]) -> NDArray[np.complex128]:
    """Reorder each spectrum to follow the previous one by nearest-neighbour assignment."""
    out = []
    prev = None
    for lam in sequence:
        lam = np.asarray(lam, dtype=complex)
        if prev is not None:
            cost = np.abs(prev[:, None] - lam[None, :])
            _, cols = linear_sum_assignment(cost)
            lam = lam[cols]
        out.append(lam)
        prev = lam
    return np.array(out)


@dataclass(frozen=True)
class RayScan:
    s: NDArray[np.float64]
    eigenvalues: NDArray[np.complex128]
    gap: NDArray[np.float64]
    cond_V: NDArray[np.float64]
    phase: tuple[PTPhase, ...]


def ray_scan(builder: Builder, s_values: Sequence[float], im_tol: float = IM_TOL) -> RayScan:
    """Dense evaluation along a ray with mode continuity tracking."""
    reports = [eigendecompose(builder(s), im_tol=im_tol) for s in s_values]
    return RayScan(
        s=np.asarray(s_values, dtype=float),
        eigenvalues=track_eigenvalues(r.eigenvalues for r in reports),
        gap=np.array([r.gap for r in reports]),
        cond_V=np.array([r.cond_V for r in reports]),
        phase=tuple(r.pt_phase for r in reports),
    )


def single_mode_ray(omega: float, gamma: float, direction: complex = 1.0) -> Builder:
    """Builder for the single-mode drift along M = s * direction."""
    from .core import ModeSpec, single_mode_drift

    mode = ModeSpec(omega, gamma)
    return lambda s: single_mode_drift(mode, s * direction)


def two_mode_ray(base: SystemSpec, direction: tuple[complex, complex]) -> Builder:
    """Builder for the two-mode drift along (M1, M2) = s * direction."""
    d1, d2 = direction
    return lambda s: drift_matrix(base.with_squeezing(s * d1, s * d2))


# --------------------------------------------------------------------------
# EP fan


def _fan_columns(dim: int) -> list[str]:
    return (
        ["gamma", "M1", "M2"]
        + [f"re_lambda_{k + 1}" for k in range(dim)]
        + [f"im_lambda_{k + 1}" for k in range(dim)]
        + ["cond_V", "pt_phase", "physical_flag"]
    )


CONTOUR_COLUMNS = ["gamma", "M1", "M2", "gap", "cond_V", "status"]


def ep_fan_scan(
    base: SystemSpec,
    m1_grid: Sequence[float],
    m2_grid: Sequence[float],
    gammas: Sequence[float],
    im_tol: float = IM_TOL,
    tol: float = 1e-10,
    cond_threshold: float = COND_THRESHOLD,
):
    """Classify the two-mode drift on an (M1, M2) grid for each gamma.

    Returns a :class:`~squeezedbath.io.ScanResult` whose main section holds one
    row per grid point (gamma-major, then M1, then M2) and whose ``contours``
    section holds the refined phase-boundary crossings, ordered by angle
    about the origin.  Crossings whose refinement fails are kept with
    ``status = "failed"``.
    """
    from .io import ScanResult

    if base.n_modes != 2:
        raise ValueError("ep_fan_scan needs a two-mode base system")
    m1_grid = [float(x) for x in m1_grid]
    m2_grid = [float(x) for x in m2_grid]
    if not m1_grid or not m2_grid or not gammas:
        raise ValueError("grids and gamma list must be nonempty")

    rows: list[list] = []
    contours: list[list] = []
    failures = 0
    for gamma in gammas:
        spec_g = base.with_gamma(float(gamma))
        labels = np.empty((len(m1_grid), len(m2_grid)), dtype=object)
        defective = np.zeros((len(m1_grid), len(m2_grid)), dtype=bool)
        for i, m1 in enumerate(m1_grid):
            for j, m2 in enumerate(m2_grid):
                spec = spec_g.with_squeezing(m1, m2)
                rep = eigendecompose(drift_matrix(spec), im_tol=im_tol, cond_threshold=cond_threshold)
                labels[i, j] = _im_label(rep.eigenvalues, im_tol)
                defective[i, j] = rep.degenerate
                physical = all(check_physical(b) for b in spec.baths)
                rows.append(
                    [float(gamma), m1, m2]
                    + [float(x) for x in rep.eigenvalues.real]
                    + [float(x) for x in rep.eigenvalues.imag]
                    + [rep.cond_V, rep.pt_phase.value, int(physical)]
                )

        found = []
        nodes_done: set[tuple[int, int]] = set()
        for i, j in itertools.product(range(len(m1_grid)), range(len(m2_grid))):
            for di, dj in ((1, 0), (0, 1)):
                i2, j2 = i + di, j + dj
                if i2 >= len(m1_grid) or j2 >= len(m2_grid) or labels[i, j] == labels[i2, j2]:
                    continue
                node = next(((a, b) for a, b in ((i, j), (i2, j2)) if defective[a, b]), None)
                if node is not None:
                    # a grid node sits on the EP itself; report it instead of refining
                    if node not in nodes_done:
                        nodes_done.add(node)
                        a, b = node
                        rep = eigendecompose(
                            drift_matrix(spec_g.with_squeezing(m1_grid[a], m2_grid[b])),
                            im_tol=im_tol, cond_threshold=cond_threshold,
                        )
                        found.append([float(gamma), m1_grid[a], m2_grid[b], float(rep.gap), rep.cond_V, "node"])
                    continue
                p0 = (m1_grid[i], m2_grid[j])
                p1 = (m1_grid[i2], m2_grid[j2])

                def locate(s, p0=p0, p1=p1):
                    return (p0[0] + s * (p1[0] - p0[0]), p0[1] + s * (p1[1] - p0[1]))

                def builder(s, locate=locate):
                    return drift_matrix(spec_g.with_squeezing(*locate(s)))

                try:
                    ep = find_ep_on_ray(
                        builder, 0.0, 1.0, tol=tol, im_tol=im_tol,
                        cond_threshold=cond_threshold, locate=locate,
                    )
                    found.append([float(gamma), ep.location[0], ep.location[1], ep.gap, ep.cond_V, "ok"])
                except (BracketError, EigenConvergenceError):
                    failures += 1
                    mid = locate(0.5)
                    found.append([float(gamma), mid[0], mid[1], math.nan, math.nan, "failed"])
        found.sort(key=lambda r: (math.atan2(r[2], r[1]) % (2 * math.pi), math.hypot(r[1], r[2])))
        contours.extend(found)

    return ScanResult(
        columns=_fan_columns(4),
        rows=rows,
        sections={"contours": (list(CONTOUR_COLUMNS), contours)},
        failures=failures,
    )


def single_mode_ep_scan(
    omega: float,
    gamma: float,
    m_grid: Sequence[float],
    N: float = 0.5,
    im_tol: float = IM_TOL,
    tol: float = 1e-12,
    cond_threshold: float = COND_THRESHOLD,
):
    """One-dimensional analogue of :func:`ep_fan_scan` along real M."""
    from .core import BathMoments
    from .io import ScanResult

    builder = single_mode_ray(omega, gamma)
    m_grid = [float(x) for x in m_grid]
    rows, labels, reports = [], [], []
    for m in m_grid:
        rep = eigendecompose(builder(m), im_tol=im_tol, cond_threshold=cond_threshold)
        labels.append(_im_label(rep.eigenvalues, im_tol))
        reports.append(rep)
        rows.append(
            [float(gamma), m]
            + [float(x) for x in rep.eigenvalues.real]
            + [float(x) for x in rep.eigenvalues.imag]
            + [rep.cond_V, rep.pt_phase.value, int(check_physical(BathMoments(N, m)))]
        )
    contours, failures = [], 0
    for k in range(len(m_grid) - 1):
        if labels[k] == labels[k + 1]:
            continue
        node = next((q for q in (k, k + 1) if reports[q].degenerate), None)
        if node is not None:
            if not contours or contours[-1][1] != m_grid[node]:
                contours.append([float(gamma), m_grid[node], float(reports[node].gap), reports[node].cond_V, "node"])
            continue
        try:
            ep = find_ep_on_ray(builder, m_grid[k], m_grid[k + 1], tol=tol, im_tol=im_tol,
                                cond_threshold=cond_threshold)
            contours.append([float(gamma), ep.s, ep.gap, ep.cond_V, "ok"])
        except (BracketError, EigenConvergenceError):
            failures += 1
            contours.append([float(gamma), 0.5 * (m_grid[k] + m_grid[k + 1]), math.nan, math.nan, "failed"])
    columns = (
        ["gamma", "M", "re_lambda_1", "re_lambda_2", "im_lambda_1", "im_lambda_2"]
        + ["cond_V", "pt_phase", "physical_flag"]
    )
    return ScanResult(
        columns=columns,
        rows=rows,
        sections={"contours": (["gamma", "M", "gap", "cond_V", "status"], contours)},
        failures=failures,
    )
