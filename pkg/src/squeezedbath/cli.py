"""
Command-line front end.

Usage::

    squeezedbath <command> --config run.json [--out result.csv] [--format csv|json]
                 [--convention literal|corrected] [key=value ...]

Commands are ``single-mode``, ``two-mode``, ``evolve``, ``ep-scan``,
``purity-scan`` and ``entropy-scan``.  The config is a flat JSON object;
``key=value`` overrides replace (or, with dotted keys such as
``m1_grid.count=41``, patch) entries after the file is read.  Values are parsed
as JSON when possible and kept as strings otherwise.

Exit status is 0 when every row was computed, 1 when rows were written but
some points were flagged as failed, 2 for configuration errors and 3 for
runtime errors.  Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
import warnings
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from . import __version__
from .core import (
    BathMoments,
    DiffusionConvention,
    ModeSpec,
    SystemSpec,
    check_physical,
    diffusion_matrix,
    drift_matrix,
    max_physical_squeezing,
    vacuum_covariance,
)
from .dynamics import (
    evolve_covariance,
    lyapunov_residual,
    quadrature_steady_variances,
    single_mode_steady_closed_form,
    steady_state_lyapunov,
)
from .io import ScanResult, write_output
from .spectral import COND_THRESHOLD, IM_TOL, eigendecompose, ep_fan_scan, single_mode_ep_scan
from .thermo import (
    PerturbationInput,
    alpha_beta_coefficients,
    energy_current_from_covariance,
    entropy_shift_report,
    purity_vs_R_curve,
    renyi2_gaussian,
    renyi2_single_mode,
    sigma23_plus_sigma32,
    thermal_current,
)

logger = logging.getLogger(__name__)

COMMANDS = ("single-mode", "two-mode", "evolve", "ep-scan", "purity-scan", "entropy-scan")
EXIT_OK, EXIT_FLAGGED, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


# --------------------------------------------------------------------------
# field parsers


def _number(key: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(key, f"expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(key, "must be finite")
    return float(value)


def positive(key: str, value: Any) -> float:
    x = _number(key, value)
    if not x > 0:
        raise ConfigError(key, f"must satisfy {key} > 0, got {x}")
    return x


def nonnegative(key: str, value: Any) -> float:
    x = _number(key, value)
    if not x >= 0:
        raise ConfigError(key, f"must satisfy {key} >= 0, got {x}")
    return x


def real(key: str, value: Any) -> float:
    return _number(key, value)


def complex_value(key: str, value: Any) -> list[float]:
    """A number or a [re, im] pair; normalised to [re, im]."""
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(key, f"complex values are [re, im], got {value!r}")
        return [_number(key, value[0]), _number(key, value[1])]
    return [_number(key, value), 0.0]


def mode_count(key: str, value: Any) -> int:
    if value not in (1, 2) or isinstance(value, bool):
        raise ConfigError(key, f"must be 1 or 2, got {value!r}")
    return int(value)


def convention(key: str, value: Any) -> str:
    try:
        return DiffusionConvention.parse(value).value
    except ValueError as exc:
        raise ConfigError(key, str(exc)) from None


def choice(*options: str) -> Callable[[str, Any], str]:
    def parse(key: str, value: Any) -> str:
        if value not in options:
            raise ConfigError(key, f"must be one of {', '.join(options)}; got {value!r}")
        return value

    return parse


def positive_list(key: str, value: Any) -> list[float]:
    if not isinstance(value, list) or not value:
        raise ConfigError(key, "expected a nonempty list of numbers")
    return [positive(f"{key}[{i}]", v) for i, v in enumerate(value)]


def grid(key: str, value: Any, bound: Callable[[], float] | None = None) -> dict[str, Any] | list[float]:
    """Either an explicit list of numbers or {min, max, count} with count >= 1 and min <= max."""
    if isinstance(value, list):
        if not value:
            raise ConfigError(key, "grid list must be nonempty")
        return [real(f"{key}[{i}]", v) for i, v in enumerate(value)]
    if not isinstance(value, dict):
        raise ConfigError(key, "expected {min, max, count} or a list of numbers")
    extra = set(value) - {"min", "max", "count"}
    if extra:
        raise ConfigError(f"{key}.{sorted(extra)[0]}", "unknown grid key; allowed keys are min, max, count")
    for k in ("min", "max", "count"):
        if k not in value:
            raise ConfigError(f"{key}.{k}", "required grid key is missing")
    count = value["count"]
    if isinstance(count, bool) or not isinstance(count, int) or count < 1:
        raise ConfigError(f"{key}.count", f"must be an integer >= 1, got {count!r}")
    lo = real(f"{key}.min", value["min"])
    hi_raw = value["max"]
    if hi_raw == "physical_bound" and bound is not None:
        hi = hi_raw
        hi_val = bound()
    else:
        hi = hi_val = real(f"{key}.max", hi_raw)
    if lo > hi_val:
        raise ConfigError(key, f"must satisfy min <= max, got min={lo}, max={hi_val}")
    return {"min": lo, "max": hi, "count": count}


def grid_values(g: dict[str, Any] | list[float], bound: float | None = None) -> list[float]:
    if isinstance(g, list):
        return list(g)
    hi = bound if g["max"] == "physical_bound" else g["max"]
    if g["count"] == 1:
        return [float(g["min"])]
    vals = [float(v) for v in np.linspace(g["min"], hi, g["count"])]
    vals[-1] = float(hi)
    return vals


# --------------------------------------------------------------------------
# schemas


_TOLERANCES = {
    "im_tol": (positive, IM_TOL),
    "cond_threshold": (positive, COND_THRESHOLD),
}
_SINGLE = {
    "omega": (positive, 1.0),
    "gamma": (positive, 0.5),
    "N": (nonnegative, 0.5),
    "M": (complex_value, [0.0, 0.0]),
}
_TWO = {
    "omega1": (positive, 1.0),
    "omega2": (positive, 1.0),
    "gamma": (positive, 0.5),
    "J": (real, 0.2),
    "N1": (nonnegative, 0.5),
    "N2": (nonnegative, 0.5),
    "M1": (complex_value, [0.0, 0.0]),
    "M2": (complex_value, [0.0, 0.0]),
}

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "single-mode": {**_SINGLE, **_TOLERANCES, "convention": (convention, "corrected")},
    "two-mode": {**_TWO, **_TOLERANCES, "convention": (convention, "corrected")},
    "evolve": {
        "modes": (mode_count, 1),
        **_SINGLE,
        **{k: v for k, v in _TWO.items() if k != "gamma"},
        "times": (grid, {"min": 0.0, "max": 200.0, "count": 5}),
        "initial": (choice("vacuum", "zero"), "vacuum"),
        "diffusion": (choice("bath", "none"), "bath"),
        "tol": (positive, 1e-10),
        "convention": (convention, "corrected"),
    },
    "ep-scan": {
        "modes": (mode_count, 2),
        "omega": (positive, 1.0),
        "omega1": (positive, 1.0),
        "omega2": (positive, 1.0),
        "J": (real, 0.2),
        "N": (nonnegative, 0.5),
        "N1": (nonnegative, 0.5),
        "N2": (nonnegative, 0.5),
        "gammas": (positive_list, [0.1, 0.5, 0.9]),
        "m_grid": (grid, {"min": 0.0, "max": 1.0, "count": 11}),
        "m1_grid": (grid, {"min": -1.2, "max": 1.2, "count": 41}),
        "m2_grid": (grid, {"min": -1.2, "max": 1.2, "count": 41}),
        "tol": (positive, 1e-10),
        **_TOLERANCES,
    },
    "purity-scan": {
        "omega": (positive, 1.0),
        "N": (nonnegative, 0.5),
        "gammas": (positive_list, [0.5, 1.0, 2.0]),
        "R_grid": (grid, {"min": 0.0, "max": "physical_bound", "count": 51}),
    },
    "entropy-scan": {
        "omega": (positive, 1.0),
        "gamma": (positive, 0.5),
        "J": (real, 0.2),
        "n": (nonnegative, 0.5),
        "dn": (real, 0.0),
        "m_grid": (grid, {"min": 0.001, "max": 0.01, "count": 10}),
        "dm_grid": (grid, [0.0]),
        "convention": (convention, "corrected"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    command: str
    values: dict[str, Any]

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    @property
    def convention(self) -> DiffusionConvention:
        return DiffusionConvention.parse(self.values.get("convention", "corrected"))

    def echo(self) -> dict[str, Any]:
        return {"command": self.command, **self.values}


def apply_override(doc: dict[str, Any], assignment: str) -> None:
    """Apply ``key=value`` (``a.b=value`` patches nested objects) to ``doc`` in place."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key:
        raise ConfigError(assignment, "overrides must look like key=value")
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    parts = key.split(".")
    node = doc
    for p in parts[:-1]:
        child = node.get(p)
        if not isinstance(child, dict):
            child = {}
            node[p] = child
        node = child
    node[parts[-1]] = value


def parse_config(command: str, doc: dict[str, Any] | str, overrides: list[str] = ()) -> RunConfig:
    """Validate a config document for ``command`` and fill in defaults."""
    if command not in SCHEMAS:
        raise ConfigError("command", f"must be one of {', '.join(COMMANDS)}; got {command!r}")
    if isinstance(doc, str):
        try:
            doc = json.loads(doc) if doc.strip() else {}
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    doc = json.loads(json.dumps(doc))
    doc.pop("command", None)
    schema = SCHEMAS[command]
    for ov in overrides:
        head = ov.partition("=")[0].split(".")[0]
        if "." in ov.partition("=")[0] and head not in doc and head in schema:
            default = schema[head][1]
            if isinstance(default, dict):
                doc[head] = dict(default)
        apply_override(doc, ov)
    unknown = sorted(set(doc) - set(schema))
    if unknown:
        raise ConfigError(unknown[0], f"unknown key for '{command}'; allowed keys are {', '.join(sorted(schema))}")
    values: dict[str, Any] = {}
    N_bound = lambda: max_physical_squeezing(values.get("N", 0.5))  # noqa: E731
    for key, (parser, default) in schema.items():
        raw = doc.get(key, default)
        if parser is grid:
            values[key] = grid(key, raw, bound=N_bound)
        else:
            values[key] = parser(key, raw)
    return RunConfig(command=command, values=values)


# --------------------------------------------------------------------------
# commands


def _complex(pair: list[float]) -> complex:
    return complex(pair[0], pair[1])


def _spectral_cells(A: np.ndarray, cfg: RunConfig) -> list[Any]:
    rep = eigendecompose(A, im_tol=cfg["im_tol"], cond_threshold=cfg["cond_threshold"])
    return [float(x) for x in rep.eigenvalues.real] + [float(x) for x in rep.eigenvalues.imag] + [
        rep.cond_V,
        rep.pt_phase.value,
    ]


def _lambda_columns(dim: int) -> list[str]:
    return [f"re_lambda_{k + 1}" for k in range(dim)] + [f"im_lambda_{k + 1}" for k in range(dim)]


def _covariance_section(sigma: np.ndarray) -> tuple[list[str], list[list[Any]]]:
    n = sigma.shape[0]
    rows = [[i, j, float(sigma[i, j].real), float(sigma[i, j].imag)] for i in range(n) for j in range(n)]
    return ["i", "j", "re", "im"], rows


def run_single_mode(cfg: RunConfig) -> ScanResult:
    M = _complex(cfg["M"])
    mode, bath = ModeSpec(cfg["omega"], cfg["gamma"]), BathMoments(cfg["N"], M)
    spec = SystemSpec(modes=(mode,), baths=(bath,))
    A, D = drift_matrix(spec), diffusion_matrix(spec, cfg.convention)
    closed = single_mode_steady_closed_form(mode, bath)
    solved = steady_state_lyapunov(A, D)
    quad = quadrature_steady_variances(mode, bath.N, M.real)
    q_ent = renyi2_single_mode(quad)
    ent = renyi2_gaussian(solved)
    columns = (
        ["omega", "gamma", "N", "M_re", "M_im", "n_closed", "a2_closed_re", "a2_closed_im"]
        + ["n_solver", "a2_solver_re", "a2_solver_im", "max_abs_diff", "lyapunov_residual"]
        + _lambda_columns(2)
        + ["cond_V", "pt_phase", "physical_flag", "s2", "purity", "xx", "pp", "xp", "s2_quadrature", "purity_quadrature"]
    )
    row = (
        [mode.omega, mode.gamma, bath.N, M.real, M.imag]
        + [closed.occupation(), closed.anomalous().real, closed.anomalous().imag]
        + [solved.occupation(), solved.anomalous().real, solved.anomalous().imag]
        + [float(np.max(np.abs(closed.sigma - solved.sigma))), lyapunov_residual(A, solved, D)]
        + _spectral_cells(A, cfg)
        + [int(check_physical(bath)), ent.s2, ent.purity, quad.xx, quad.pp, quad.xp, q_ent.s2, q_ent.purity]
    )
    return ScanResult(columns=columns, rows=[row], sections={"covariance": _covariance_section(solved.sigma)})


def _two_mode_spec(cfg: RunConfig, gamma: float) -> SystemSpec:
    return SystemSpec.two_mode(
        cfg["omega1"], cfg["omega2"], gamma, cfg["J"], cfg["N1"], cfg["N2"], _complex(cfg["M1"]), _complex(cfg["M2"])
    )


def run_two_mode(cfg: RunConfig) -> ScanResult:
    spec = _two_mode_spec(cfg, cfg["gamma"])
    A, D = drift_matrix(spec), diffusion_matrix(spec, cfg.convention)
    st = steady_state_lyapunov(A, D)
    ent = renyi2_gaussian(st)
    literal = sigma23_plus_sigma32(st)
    columns = (
        ["n1", "n2", "a2_1_re", "a2_1_im", "a2_2_re", "a2_2_im"]
        + ["energy_current", "thermal_current_formula", "sigma23_plus_sigma32_re", "sigma23_plus_sigma32_im"]
        + ["s2", "purity", "lyapunov_residual"]
        + _lambda_columns(4)
        + ["cond_V", "pt_phase", "physical_flag"]
    )
    row = (
        [st.occupation(0), st.occupation(1)]
        + [st.anomalous(0).real, st.anomalous(0).imag, st.anomalous(1).real, st.anomalous(1).imag]
        + [energy_current_from_covariance(st), thermal_current(spec.J, cfg["gamma"], cfg["N1"], cfg["N2"])]
        + [literal.real, literal.imag, ent.s2, ent.purity, lyapunov_residual(A, st, D)]
        + _spectral_cells(A, cfg)
        + [int(all(check_physical(b) for b in spec.baths))]
    )
    return ScanResult(columns=columns, rows=[row], sections={"covariance": _covariance_section(st.sigma)})


def run_evolve(cfg: RunConfig) -> ScanResult:
    if cfg["modes"] == 1:
        spec = SystemSpec.single(cfg["omega"], cfg["gamma"], cfg["N"], _complex(cfg["M"]))
    else:
        spec = _two_mode_spec(cfg, cfg["gamma"])
    n = 2 * spec.n_modes
    A = drift_matrix(spec)
    D = diffusion_matrix(spec, cfg.convention) if cfg["diffusion"] == "bath" else np.zeros((n, n), complex)
    sigma0 = vacuum_covariance(spec.n_modes).sigma if cfg["initial"] == "vacuum" else np.zeros((n, n), complex)
    times = grid_values(cfg["times"])
    traj = evolve_covariance(A, D, sigma0, times, tol=cfg["tol"])
    columns = ["t"]
    for i in range(n):
        for j in range(n):
            columns += [f"s{i + 1}{j + 1}_re", f"s{i + 1}{j + 1}_im"]
    columns.append("hermitization_correction")
    rows = []
    for t, S, corr in zip(traj.times, traj.states, traj.corrections):
        cells: list[Any] = [float(t)]
        for v in S.reshape(-1):
            cells += [float(v.real), float(v.imag)]
        rows.append(cells + [float(corr)])
    return ScanResult(columns=columns, rows=rows)


def run_ep_scan(cfg: RunConfig) -> ScanResult:
    tols = dict(im_tol=cfg["im_tol"], tol=cfg["tol"], cond_threshold=cfg["cond_threshold"])
    if cfg["modes"] == 1:
        parts = [single_mode_ep_scan(cfg["omega"], g, grid_values(cfg["m_grid"]), N=cfg["N"], **tols) for g in cfg["gammas"]]
        rows = [r for p in parts for r in p.rows]
        cols, _ = parts[0].sections["contours"]
        contours = [r for p in parts for r in p.sections["contours"][1]]
        return ScanResult(
            columns=parts[0].columns,
            rows=rows,
            sections={"contours": (cols, contours)},
            failures=sum(p.failures for p in parts),
        )
    base = SystemSpec.two_mode(cfg["omega1"], cfg["omega2"], cfg["gammas"][0], cfg["J"], cfg["N1"], cfg["N2"])
    return ep_fan_scan(base, grid_values(cfg["m1_grid"]), grid_values(cfg["m2_grid"]), cfg["gammas"], **tols)


def run_purity_scan(cfg: RunConfig) -> ScanResult:
    N = cfg["N"]
    R = grid_values(cfg["R_grid"], bound=max_physical_squeezing(N))
    rows, failures = [], 0
    for g in cfg["gammas"]:
        mode = ModeSpec(cfg["omega"], g)
        for pt in purity_vs_R_curve(mode, N, R):
            if pt.error is None:
                det = quadrature_steady_variances(mode, N, pt.R).det
                rows.append([g, pt.R, pt.purity, 0.5 * math.log(4 * det), det, ""])
            else:
                failures += 1
                rows.append([g, pt.R, math.nan, math.nan, math.nan, pt.error])
    return ScanResult(columns=["gamma", "R", "purity", "s2", "det_V", "error"], rows=rows, failures=failures)


def run_entropy_scan(cfg: RunConfig) -> ScanResult:
    J, g, w = cfg["J"], cfg["gamma"], cfg["omega"]
    columns = (
        ["m", "dm", "exact", "quartic_trace", "first_order_trace_abs", "second_order", "fourth_power"]
        + ["alpha", "beta", "sigma14_numeric_re", "sigma14_numeric_im", "sigma14_closed_re", "sigma14_closed_im"]
        + ["weak_squeezing_warning"]
    )
    rows = []
    for m in grid_values(cfg["m_grid"]):
        for dm in grid_values(cfg["dm_grid"]):
            p = PerturbationInput(n=cfg["n"], dn=cfg["dn"], m=m, dm=dm)
            rep = entropy_shift_report(p, J, g, w, cfg.convention)
            alpha, beta = alpha_beta_coefficients(p.n, m, g, J, w)
            rows.append(
                [m, dm, rep.exact, rep.quartic_trace, abs(rep.first_order_trace), rep.second_order, rep.fourth_power]
                + [alpha, beta, rep.sigma14_numeric.real, rep.sigma14_numeric.imag]
                + [rep.sigma14_closed.real, rep.sigma14_closed.imag, int(rep.warning is not None)]
            )
    return ScanResult(columns=columns, rows=rows)


RUNNERS: dict[str, Callable[[RunConfig], ScanResult]] = {
    "single-mode": run_single_mode,
    "two-mode": run_two_mode,
    "evolve": run_evolve,
    "ep-scan": run_ep_scan,
    "purity-scan": run_purity_scan,
    "entropy-scan": run_entropy_scan,
}


def run(cfg: RunConfig) -> ScanResult:
    """Execute ``cfg`` and attach the metadata block (config echo, version, duration)."""
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        result = RUNNERS[cfg.command](cfg)
    result.metadata = {
        "config": cfg.echo(),
        "version": __version__,
        "duration_s": round(time.perf_counter() - start, 6),
        "failures": result.failures,
    }
    return result


# --------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="squeezedbath", description="Gaussian open-system calculations for modes in squeezed thermal baths.")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("overrides", nargs="*", metavar="key=value", help="config overrides applied after --config")
    parser.add_argument("--config", help="JSON run configuration (defaults are used when omitted)")
    parser.add_argument("--out", help="output path; standard output when omitted")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--convention", metavar="{literal,corrected}", help="diffusion convention override")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def _fail(kind: str, message: str, code: int, **extra: Any) -> int:
    record = {"error": kind, "message": message, **extra}
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_intermixed_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    overrides = list(args.overrides)
    if args.convention is not None:
        overrides.append(f"convention={args.convention}")
    try:
        text = ""
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        cfg = parse_config(args.command, text, overrides)
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG, key=exc.key)
    except OSError as exc:
        return _fail("config", f"cannot read {args.config}: {exc.strerror}", EXIT_CONFIG)
    try:
        result = run(cfg)
    except Exception as exc:  # every downstream error becomes a machine-readable record
        logger.debug("run failed", exc_info=True)
        return _fail(type(exc).__name__, str(exc), EXIT_RUNTIME, command=cfg.command)
    try:
        text_out = write_output(result, args.out, args.format)
    except OSError as exc:
        return _fail("io", str(exc), EXIT_RUNTIME, command=cfg.command)
    if args.out is None:
        sys.stdout.write(text_out)
        sys.stdout.flush()
    if result.failures:
        return _fail("flagged", f"{result.failures} point(s) failed", EXIT_FLAGGED, command=cfg.command)
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
