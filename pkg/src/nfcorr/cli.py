"""Command-line driver.

Subcommands: correlation, sweep, spectrum, validate and the presets fig3 to
fig6.  Experiments are configured by a flat ``key = value`` file (SI units in
the key names) with command-line overrides; the metadata sidecar written next
to each matrix is itself a valid config file.

Exit codes: 0 success, 1 numerical or validation failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import sys
import warnings
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import io
from .correlation import (BUILDERS, CorrelationMatrix, QuadratureSpec, QuadratureWarning,
                          ff_closed_form, ff_lemma3_correlation, ff_one_ring_correlation,
                          nf_closed_form, nf_lemma2_correlation, nf_one_ring_correlation)
from .errors import DomainError, NfcorrError, ValidationError
from .geometry import ArrayGeometry, TransmitterLocation
from .montecarlo import ExponentialRcs, MonteCarloSpec, UnitGain, estimate_correlation
from .scattering import (GeneralizedOneRing, UniformPdf, VonMisesPdf, load_angular_pdf_csv,
                         load_pls_csv)
from .spectrum import hermitian_eigendecompose, significant_count, stationarity_deviation

METHODS = tuple(BUILDERS) + ("monte-carlo",)
HEATMAP_VARIANTS = ("magnitude", "real", "imag")
CLOSED_FORM_MIN_RATIO = 5.0  # closed forms need S >= 5 R
DEFAULT_SWEEP = tuple(float(s) for s in range(10, 71, 10))
FIG4_SWEEP = tuple(float(s) for s in range(10, 71, 4))


class UsageError(Exception):
    """Invalid invocation or configuration (exit status 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    num_elements: int = 512
    spacing_wavelengths: float = 0.5
    carrier_frequency_hz: float = 3.5e9
    ring_center_distance_m: float = 10.0
    ring_center_angle_rad: float = math.pi / 3
    ring_radius_m: float = 3.0
    vonmises_kappa: float = 0.0
    vonmises_mu_rad: float = 0.0
    pdf_file: str = ""
    pas_file: str = ""
    pls_file: str = ""
    method: str = "nf-integral"
    nodes: int = 4096
    refinement_tolerance: float = 1e-8
    max_doublings: int = 4
    beta0: float = 1.0
    mc_num_scatterers: int = 1
    mc_num_trials: int = 10_000
    seed: int = 0
    rcs_model: str = "unit-gain"
    rcs_mean_m2: float = 1.0
    tx_distance_m: float = 0.0
    tx_angle_rad: float = 0.0
    heatmap: str = "magnitude"
    out_dir: str = "."

    def __post_init__(self):
        positive = ("num_elements", "spacing_wavelengths", "carrier_frequency_hz", "ring_radius_m",
                    "refinement_tolerance", "beta0", "mc_num_scatterers", "mc_num_trials", "rcs_mean_m2")
        for name in positive:
            value = getattr(self, name)
            if not (value > 0 and math.isfinite(value)):
                raise UsageError(f"{name} must be positive, got {value}")
        if not self.ring_center_distance_m >= 0:
            raise UsageError("ring_center_distance_m must be >= 0")
        if not self.vonmises_kappa >= 0:
            raise UsageError("vonmises_kappa must be >= 0")
        if self.tx_distance_m < 0:
            raise UsageError("tx_distance_m must be >= 0 (0 means no transmitter)")
        if self.method not in METHODS:
            raise UsageError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.rcs_model not in ("unit-gain", "exponential"):
            raise UsageError("rcs_model must be 'unit-gain' or 'exponential'")
        if self.heatmap not in HEATMAP_VARIANTS:
            raise UsageError(f"heatmap must be one of {', '.join(HEATMAP_VARIANTS)}")
        if not 0 <= self.seed < 2 ** 64:
            raise UsageError("seed must be an unsigned 64-bit integer")

    # -- construction -------------------------------------------------------------

    @classmethod
    def from_mapping(cls, values: dict, strict: bool = True) -> "ExperimentConfig":
        """Build from string or typed values; unknown keys are errors when ``strict``."""
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in types:
                if strict:
                    raise UsageError(f"unknown config key {key!r}")
                continue
            kwargs[key] = _coerce(key, raw, types[key])
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        # sidecars also carry provenance keys (tool_version, node_count, ...)
        try:
            values = io.read_key_values(path)
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        except ValidationError as exc:
            raise UsageError(str(exc)) from None
        return cls.from_mapping(values, strict=False)

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    # -- model objects ------------------------------------------------------------

    @property
    def geometry(self) -> ArrayGeometry:
        return ArrayGeometry.from_carrier(self.num_elements, self.carrier_frequency_hz, self.spacing_wavelengths)

    @property
    def quadrature(self) -> QuadratureSpec:
        return QuadratureSpec(self.nodes, self.refinement_tolerance, self.max_doublings)

    def angular_pdf(self):
        if self.pdf_file:
            return load_angular_pdf_csv(self.pdf_file)
        if self.vonmises_kappa > 0:
            return VonMisesPdf(self.vonmises_kappa, self.vonmises_mu_rad)
        return UniformPdf()

    def ring(self) -> GeneralizedOneRing:
        return GeneralizedOneRing(self.ring_center_distance_m, self.ring_center_angle_rad,
                                  self.ring_radius_m, self.angular_pdf())

    def location_spectrum(self):
        return load_pls_csv(self.pls_file) if self.pls_file else self.ring()

    def monte_carlo(self) -> MonteCarloSpec:
        rcs = ExponentialRcs(self.rcs_mean_m2) if self.rcs_model == "exponential" else UnitGain()
        return MonteCarloSpec(self.mc_num_scatterers, self.mc_num_trials, self.seed, rcs, self.beta0)

    def transmitter(self):
        if self.tx_distance_m == 0:
            return None
        return TransmitterLocation(self.tx_distance_m, self.tx_angle_rad)


def _coerce(key, raw, typ):
    if not isinstance(raw, str):
        return raw
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise UsageError(f"config key {key}: cannot parse {raw!r} as {typ}") from None
    return raw


# -- building -------------------------------------------------------------------------

def _check_closed_form_regime(config: ExperimentConfig):
    ratio = config.ring_center_distance_m / config.ring_radius_m
    if ratio < CLOSED_FORM_MIN_RATIO:
        raise DomainError(
            f"closed forms assume S >> R; refusing at S/R = {ratio:.3g} < {CLOSED_FORM_MIN_RATIO:g}. "
            "Use nf-integral / ff-integral instead.")


def build_matrix(config: ExperimentConfig, method: str | None = None) -> CorrelationMatrix:
    """Build the correlation matrix of ``method`` (default ``config.method``)."""
    method = method or config.method
    geom = config.geometry
    quad = config.quadrature
    beta0 = config.beta0
    if method == "monte-carlo":
        est = estimate_correlation(config.location_spectrum(), geom, config.monte_carlo(), config.transmitter())
        return est.matrix
    if method == "nf-general":
        return BUILDERS[method](config.location_spectrum(), geom, quad, beta0)
    if method == "ff-general":
        pas = load_angular_pdf_csv(config.pas_file) if config.pas_file else config.location_spectrum()
        return BUILDERS[method](pas, geom, quad, beta0)
    if method in ("nf-closed", "ff-closed"):
        return BUILDERS[method](config.ring(), geom, beta0)
    return BUILDERS[method](config.ring(), geom, quad, beta0)


def check_matrix(matrix: CorrelationMatrix, toeplitz_tol: float | None = None) -> list[str]:
    """Invariant failures; FF-type matrices are also checked for stationarity."""
    failures = matrix.invariant_failures()
    if toeplitz_tol is not None and matrix.method_tag.startswith("ff"):
        if stationarity_deviation(matrix) > toeplitz_tol:
            failures.append("toeplitz")
    return failures


def _heatmap_values(entries: np.ndarray, variant: str) -> np.ndarray:
    return {"magnitude": np.abs, "real": np.real, "imag": np.imag}[variant](entries)


def _run_params(config: ExperimentConfig, method: str) -> dict:
    """Parameters that determine the numbers (the output location does not)."""
    params = config.as_dict()
    del params["out_dir"]
    params["method"] = method
    return params


def write_outputs(config: ExperimentConfig, matrix: CorrelationMatrix, method: str) -> Path:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = _run_params(config, method)
    geom = matrix.geometry
    path = io.write_matrix_csv(out / f"correlation_{method}.csv", matrix.entries, geom, params)
    heat = _heatmap_values(matrix.entries, config.heatmap) / matrix.beta0
    idx = geom.indices
    io.write_csv(out / f"heatmap_{method}_{config.heatmap}.csv", ("n", "m", "value_over_beta0"),
                 ((n, m, float(heat[i, j])) for i, n in enumerate(idx) for j, m in enumerate(idx)), params)
    meta = dict(params, out_dir=config.out_dir)
    meta.update(tool_version=io.__version__, param_hash=io.parameter_hash(params),
                method_tag=matrix.method_tag, node_count=matrix.node_count if matrix.node_count else "",
                converged=matrix.converged)
    io.write_key_values(out / f"correlation_{method}.meta", meta)
    return path


# -- subcommands --------------------------------------------------------------------------

def run_correlation(config: ExperimentConfig) -> int:
    matrix = build_matrix(config)
    failures = check_matrix(matrix, 10 * config.refinement_tolerance)
    path = write_outputs(config, matrix, config.method)
    if failures:
        print(f"error: {config.method}: invariant check failed: {', '.join(failures)}", file=sys.stderr)
        return 1
    print(f"wrote {path}")
    return 0


SWEEP_METHODS = ("nf-integral", "ff-integral", "nf-closed", "ff-closed")


def sweep_rows(config: ExperimentConfig, param: str, values, methods=SWEEP_METHODS):
    """Rows (value, method, trace/beta0, significant count, closed-form regime flag)."""
    for value in values:
        cfg = ExperimentConfig.from_mapping({**config.as_dict(), param: value})
        regime_ok = cfg.ring_center_distance_m >= CLOSED_FORM_MIN_RATIO * cfg.ring_radius_m
        for method in methods:
            matrix = build_matrix(cfg, method)
            spec = hermitian_eigendecompose(matrix)
            yield (value, method, matrix.trace() / matrix.beta0, significant_count(spec, matrix.beta0),
                   regime_ok or not method.endswith("closed"))


def run_sweep(config: ExperimentConfig, param: str, values) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = dict(_run_params(config, "sweep"), sweep_param=param, sweep_values=" ".join(map(repr, values)))
    path = io.write_csv(out / "sweep.csv", (param, "method", "trace_over_beta0", "significant_count", "regime_ok"),
                        sweep_rows(config, param, values), params)
    print(f"wrote {path}")
    return 0


def spectrum_methods(config: ExperimentConfig, explicit_method: str | None) -> list[str]:
    if explicit_method:
        if explicit_method.endswith("closed"):
            _check_closed_form_regime(config)
        return [explicit_method]
    methods = ["nf-integral", "ff-integral"]
    if config.ring_center_distance_m >= CLOSED_FORM_MIN_RATIO * config.ring_radius_m:
        methods += ["nf-closed", "ff-closed"]
    return methods


def run_spectrum(config: ExperimentConfig, explicit_method: str | None = None) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for method in spectrum_methods(config, explicit_method):
        matrix = build_matrix(config, method)
        spec = hermitian_eigendecompose(matrix)
        params = _run_params(config, method)
        path = io.write_csv(out / f"spectrum_{method}.csv", ("rank", "eigenvalue_over_beta0"),
                            enumerate(spec.eigenvalues / matrix.beta0, start=1), params)
        print(f"wrote {path}  significant={significant_count(spec, matrix.beta0)}")
    return 0


# -- validation ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    metric: float
    tolerance: float
    passed: bool

    @property
    def line(self) -> str:
        return f"{self.name},{self.metric!r},{self.tolerance!r},{'pass' if self.passed else 'fail'}"


def max_relative_entry_error(a: np.ndarray, b: np.ndarray) -> float:
    """max |a - b| / |b| over all entries (``b`` is the reference)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.abs(a - b) / np.abs(b)
    rel = np.where(np.abs(a - b) == 0, 0.0, rel)
    return float(np.max(rel))


def frobenius_relative(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))


def _hermitian_check(name: str, entries: np.ndarray, beta0: float) -> Check:
    metric = float(np.max(np.abs(entries - entries.conj().T))) / beta0
    return Check(f"{name}:hermitian", metric, 0.0, metric == 0.0)


def matrix_file_checks(path, beta0: float = 1.0) -> list[Check]:
    entries = io.read_matrix_csv(path)
    checks = [_hermitian_check("matrix-file", entries, beta0)]
    if checks[0].passed:
        lam = np.linalg.eigvalsh(entries)
        trace = float(np.trace(entries).real)
        checks.append(Check("matrix-file:psd", float(-lam[0] / trace), 1e-8, lam[0] >= -1e-8 * trace))
    return checks


def validation_checks(config: ExperimentConfig) -> list[Check]:
    """Cross-method checks at the configured parameters."""
    geom = config.geometry
    quad = config.quadrature
    beta0 = config.beta0
    ring = config.ring()
    tol = config.refinement_tolerance
    checks = []

    nf = nf_one_ring_correlation(ring, geom, quad, beta0)
    ff = ff_one_ring_correlation(ring, geom, quad, beta0)
    for m in (nf, ff):
        checks.append(_hermitian_check(m.method_tag, m.entries, beta0))
        lam = hermitian_eigendecompose(m).eigenvalues
        checks.append(Check(f"{m.method_tag}:psd", float(-lam[-1] / m.trace()), 1e-8, lam[-1] >= -1e-8 * m.trace()))
    dev = stationarity_deviation(ff)
    checks.append(Check("ff-integral:toeplitz", dev, 10 * tol, dev <= 10 * tol))
    diag_err = float(abs(nf.entries[-geom.min_index, -geom.min_index] - beta0) / beta0)
    checks.append(Check("nf-integral:reference-power", diag_err, tol, diag_err <= tol))

    if ring.center_distance > 0 and isinstance(ring.angular_pdf, (UniformPdf, VonMisesPdf)):
        pairs = ((nf_closed_form(ring, geom, beta0), nf_lemma2_correlation(ring, geom, quad, beta0)),
                 (ff_closed_form(ring, geom, beta0), ff_lemma3_correlation(ring, geom, quad, beta0)))
        for closed, integral in pairs:
            err = max_relative_entry_error(closed.entries, integral.entries)
            checks.append(Check(f"{closed.method_tag}-vs-{integral.method_tag}", err, 1e-8, err <= 1e-8))

        # first-order expansions in R/S must improve as S grows
        far = GeneralizedOneRing(4 * ring.center_distance, ring.center_angle, ring.radius, ring.angular_pdf)
        for name, approx, exact in (("nf-lemma2", nf_lemma2_correlation, nf_one_ring_correlation),
                                    ("ff-lemma3", ff_lemma3_correlation, ff_one_ring_correlation)):
            near_err = np.max(np.abs(approx(ring, geom, quad, beta0).entries - exact(ring, geom, quad, beta0).entries))
            far_err = np.max(np.abs(approx(far, geom, quad, beta0).entries - exact(far, geom, quad, beta0).entries))
            ratio = float(far_err / near_err) if near_err > 0 else 0.0
            checks.append(Check(f"{name}:error-shrinks-with-S", ratio, 1.0, ratio < 1.0))

    # plane-wave limit: scale the ring away from the array
    gaps = []
    for factor in (1.0, 10.0, 100.0):
        scaled = ring.scaled(factor)
        gaps.append(frobenius_relative(nf_one_ring_correlation(scaled, geom, quad, beta0).entries,
                                     ff_one_ring_correlation(scaled, geom, quad, beta0).entries))
    ratio = gaps[-1] / gaps[0]
    checks.append(Check("plane-wave-limit:nf-ff-gap-shrinks", ratio, 1.0, bool(gaps[2] < gaps[1] < gaps[0])))

    # Monte Carlo oracle on a small array
    small = ArrayGeometry(min(geom.num_elements, 16), geom.spacing, geom.wavelength)
    mc_spec = config.monte_carlo()
    if mc_spec.rcs_model == UnitGain():
        est = estimate_correlation(config.location_spectrum(), small, mc_spec)
        ref = BUILDERS["nf-general"](config.location_spectrum(), small, quad, beta0)
        bound = 5 * beta0 / math.sqrt(mc_spec.num_scatterers * mc_spec.num_trials)
        err = float(np.max(np.abs(est.matrix.entries - ref.entries)))
        checks.append(Check("monte-carlo-vs-integral", err, bound, err <= bound))
    return checks


def run_validate(config: ExperimentConfig, matrix_file: str | None = None, corrupt_self_test: bool = False) -> int:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if corrupt_self_test:
        geom = ArrayGeometry(8, config.geometry.spacing, config.geometry.wavelength)
        good = nf_one_ring_correlation(config.ring(), geom, config.quadrature, config.beta0)
        bad = good.entries.copy()
        bad[0, 1] += 1e-3 * config.beta0
        matrix_file = str(out / "corrupted_matrix.csv")
        io.write_matrix_csv(matrix_file, bad, geom, dict(_run_params(config, "nf-integral"), corrupted=True))
    checks = matrix_file_checks(matrix_file, config.beta0) if matrix_file else validation_checks(config)
    params = dict(_run_params(config, "validate"), matrix_file=matrix_file or "")
    lines = [c.line for c in checks]
    io.write_csv(out / "validate_report.csv", ("name", "metric", "tolerance", "verdict"),
                 (line.split(",") for line in lines), params)
    for line in lines:
        print(line)
    return 0 if all(c.passed for c in checks) else 1


# -- figure presets -------------------------------------------------------------------------

def run_fig3(config: ExperimentConfig) -> int:
    cfg = config.replace(ring_center_distance_m=10.0)
    status = 0
    for method in ("nf-integral", "ff-integral"):
        status |= run_correlation(cfg.replace(method=method))
    return status


# -- argument parsing ------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file (a .meta sidecar works too)")
    common.add_argument("--method", choices=METHODS, help="correlation builder")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", type=int, metavar="U64", help="Monte Carlo seed")
    common.add_argument("--nodes", type=int, metavar="K", help="initial quadrature node count (power of two)")
    common.add_argument("--beta0", type=float, metavar="X", help="reference-element power")
    common.add_argument("--heatmap", choices=HEATMAP_VARIANTS, help="heatmap functional of R (default magnitude)")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key, e.g. --set ring_center_distance_m=20")

    parser = argparse.ArgumentParser(
        prog="nfcorr",
        description="Near-field and far-field spatial correlation matrices for large uniform linear arrays.",
        epilog="Tabulated densities: pdf_file/pas_file rows 'angle,density'; pls_file rows "
               "'radius,angle,density' on a full grid. Angles in radians, lengths in meters.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("correlation", parents=[common], help="build one matrix and write CSV + sidecar")
    sw = sub.add_parser("sweep", parents=[common], help="trace and significant count versus a parameter")
    sw.add_argument("--param", default="ring_center_distance_m")
    sw.add_argument("--values", help="comma-separated values (default 10,20,...,70)")
    sub.add_parser("spectrum", parents=[common], help="ranked eigenvalues over beta0")
    va = sub.add_parser("validate", parents=[common], help="cross-method checks; nonzero exit on failure")
    va.add_argument("--matrix", metavar="CSV", help="check a matrix file instead")
    va.add_argument("--corrupt-self-test", action="store_true",
                    help="write a deliberately non-Hermitian matrix and check it (must fail)")
    for name, text in (("fig3", "heatmap data at S = 10 m"), ("fig4", "sweep over S"),
                       ("fig5", "spectra at S = 10 m"), ("fig6", "spectra at S = 70 m")):
        sub.add_parser(name, parents=[common], help=text)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[key.strip()] = value.strip()
    flag_keys = dict(method="method", out="out_dir", seed="seed", nodes="nodes", beta0="beta0", heatmap="heatmap")
    for attr, key in flag_keys.items():
        value = getattr(args, attr)
        if value is not None:
            overrides[key] = value
    return ExperimentConfig.from_mapping({**config.as_dict(), **overrides})


def _parse_values(text: str | None):
    if text is None:
        return DEFAULT_SWEEP
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise UsageError(f"--values must be comma-separated numbers, got {text!r}") from None


def _dispatch(args, config: ExperimentConfig) -> int:
    cmd = args.command
    if cmd == "correlation":
        if config.method.endswith("closed"):
            _check_closed_form_regime(config)
        return run_correlation(config)
    if cmd == "sweep":
        return run_sweep(config, args.param, _parse_values(args.values))
    if cmd == "spectrum":
        return run_spectrum(config, args.method)
    if cmd == "validate":
        return run_validate(config, args.matrix, args.corrupt_self_test)
    if cmd == "fig3":
        return run_fig3(config)
    if cmd == "fig4":
        return run_sweep(config, "ring_center_distance_m", FIG4_SWEEP)
    if cmd == "fig5":
        return run_spectrum(config.replace(ring_center_distance_m=10.0), args.method)
    if cmd == "fig6":
        return run_spectrum(config.replace(ring_center_distance_m=70.0), args.method)
    raise UsageError(f"unknown command {cmd}")


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    try:
        config = _config_from_args(args)
        if args.command == "sweep" and args.param not in {f.name for f in fields(ExperimentConfig)}:
            raise UsageError(f"unknown sweep parameter {args.param!r}")
        config.geometry, config.quadrature  # surface invalid combinations as usage errors
        config.ring()
    except (UsageError, ValidationError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", QuadratureWarning)
            return _dispatch(args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except QuadratureWarning as exc:
        print(f"error: quadrature: {exc}", file=sys.stderr)
        return 1
    except (NfcorrError, ArithmeticError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
