"""Command-line runner: ``steklov run`` and ``steklov validate``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .dtn import assemble_dtn, cluster_report, steklov_spectrum
from .exceptions import IoError, SchemaError, SteklovError
from .geometry import build_curve, fourier_field
from .genericity import criticality_scan, random_split_experiment, unique_continuation_check
from .perturbation import fd_eigenvalue_derivative

logger = logging.getLogger("steklov")

__all__ = ["Check", "RunReport", "run", "write_report", "main"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_ERROR = 2
EXIT_IO = 3


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    relation: str = "<"

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "value": float(self.value),
            "tolerance": float(self.tolerance),
            "relation": self.relation,
            "passed": bool(self.passed),
        }


def _below(name, value, tol) -> Check:
    return Check(name, float(value), float(tol), bool(value < tol), "<")


def _above(name, value, tol) -> Check:
    return Check(name, float(value), float(tol), bool(value > tol), ">")


@dataclass
class RunReport:
    """Outcome of one configured run.

    ``data`` maps output file names to their payloads; only ``report.json``
    carries the wall time.
    """

    config: ExperimentConfig
    version: str = __version__
    wall_time: float = 0.0
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    error: str | None = None
    data: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return self.error is None and all(c.passed for c in self.checks)

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_ERROR
        return EXIT_OK if self.passed else EXIT_CHECK_FAILED

    def to_dict(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "version": self.version,
            "wall_time": self.wall_time,
            "status": "pass" if self.passed else ("error" if self.error else "fail"),
            "checks": [c.to_dict() for c in self.checks],
            "warnings": list(self.warnings),
            "error": self.error,
            "files": sorted(self.data),
        }


def _solver_setup(cfg: ExperimentConfig, k_max: int, report: RunReport):
    s = cfg.solver
    curve = build_curve(cfg.curve_spec())
    dtn = assemble_dtn(curve, s["basis_order"], s["svd_tol"])
    spectrum = steklov_spectrum(dtn, k_max, s["cluster_tol"])
    if dtn.asymmetry > 1e-6:
        report.warnings.append(f"DtN matrix asymmetry {dtn.asymmetry:.3e} exceeds 1e-6")
    lam = spectrum.eigenvalues
    rel = spectrum.residuals / (1 + np.abs(lam))
    if rel.max() > 1e-6:
        report.warnings.append(f"max relative eigen residual {rel.max():.3e} exceeds 1e-6")
    return curve, dtn, spectrum


def _spectrum_payload(spectrum) -> dict:
    out = spectrum.to_dict()
    out["cluster_table"] = [row._asdict() for row in cluster_report(spectrum)]
    return out


def _add_fields_csv(cfg, report, curve, spectrum):
    if cfg.output["format"] == "json+csv":
        report.data["eigenfields.csv"] = spectrum.to_csv(curve)


def _run_spectrum(cfg, report):
    p = cfg.params
    curve, dtn, spectrum = _solver_setup(cfg, p["k_max"], report)
    report.data["spectrum.json"] = _spectrum_payload(spectrum)
    _add_fields_csv(cfg, report, curve, spectrum)
    report.checks.append(_below("lambda0_is_zero", abs(spectrum.eigenvalues[0]), 1e-8))
    sym = np.max(np.abs(dtn.ritz - dtn.ritz.T)) / max(1.0, np.max(np.abs(dtn.ritz)))
    report.checks.append(_below("trial_space_symmetry", sym, 1e-8))


def _run_derivative(cfg, report):
    p = cfg.params
    s = cfg.solver
    curve, dtn, spectrum = _solver_setup(cfg, p["k_max"], report)
    sig = p["sigma"]
    sigma = fourier_field(curve, sig["const"], sig["cos"], sig["sin"])
    rep = fd_eigenvalue_derivative(
        cfg.curve_spec(), p["cluster"], sigma, p["t_step"], s["basis_order"], s["svd_tol"],
        p["k_max"], s["cluster_tol"], p["tolerance"], p["richardson"], (curve, dtn, spectrum),
    )
    report.data["derivative.json"] = rep.to_dict()
    report.checks.append(_below("fd_rel_error", rep.rel_error, p["tolerance"]))
    if rep.richardson_error is not None:
        report.checks.append(_below("richardson_rel_error", rep.richardson_error, p["tolerance"]))


def _run_split(cfg, report):
    p = cfg.params
    s = cfg.solver
    trials, summary = random_split_experiment(
        cfg.curve_spec(), p["n_trials"], p["amplitude"], p["max_mode"], p["seed"], p["t_step"],
        s["basis_order"], s["svd_tol"], p["n_eigs"], p["gap_min"], s["cluster_tol"],
        p["check_rates"],
    )
    report.data["trials.jsonl"] = trials
    report.data["summary.json"] = summary.to_dict()
    report.checks.append(_above("valid_trials", summary.n_valid, 0))
    if p["check_rates"]:
        bad = sum(t.rates_ok is False for t in trials)
        report.checks.append(Check("rate_mismatches", bad, 0, bad == 0, "=="))
    for t in trials:
        if t.status != "ok":
            report.warnings.append(f"trial {t.index} skipped: {t.message}")
        elif not t.passed:
            report.warnings.append(f"trial {t.index}: a multiple cluster did not split; flagged")


def _run_scan(cfg, report):
    p = cfg.params
    curve, _, spectrum = _solver_setup(cfg, p["k_max"], report)
    result = criticality_scan(curve, spectrum, p["cluster"], p["n_grid"], p["eps_crit"])
    report.data["spectrum.json"] = _spectrum_payload(spectrum)
    report.data["scan.json"] = result.to_dict()
    if result.verdict != "no-critical-pair-detected":
        report.warnings.append(result.message)


def _run_uc(cfg, report):
    p = cfg.params
    curve, _, spectrum = _solver_setup(cfg, p["n_fields"], report)
    rows = []
    for i in range(1, p["n_fields"] + 1):
        uc = unique_continuation_check(curve, spectrum.eigenfields[i], p["arc_length_fraction"], p["tol"])
        rows.append({"index": i, "eigenvalue": float(spectrum.eigenvalues[i]), **uc.to_dict()})
        report.checks.append(_above(f"uc_field_{i}", uc.min_window_max, p["tol"]))
    report.data["uc.json"] = {"fields": rows}
    _add_fields_csv(cfg, report, curve, spectrum)


_RUNNERS = {
    "spectrum": _run_spectrum,
    "derivative-check": _run_derivative,
    "split": _run_split,
    "critical-scan": _run_scan,
    "uc-check": _run_uc,
}


def run(config: ExperimentConfig) -> RunReport:
    """Execute one experiment.  Module errors are captured in the report."""
    report = RunReport(config)
    start = time.perf_counter()
    try:
        _RUNNERS[config.experiment](config, report)
    except (SteklovError, ValueError, np.linalg.LinAlgError) as exc:
        report.error = f"{type(exc).__name__}: {exc}"
        logger.error("%s", report.error)
    report.wall_time = time.perf_counter() - start
    return report


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _serialize(name: str, payload) -> str:
    if name.endswith(".jsonl"):
        return "".join(json.dumps(t.to_dict(), sort_keys=True) + "\n" for t in payload)
    if name.endswith(".csv"):
        return payload
    return _dumps(payload)


def write_report(report: RunReport, path=None, format: str | None = None) -> list[Path]:
    """Write data files plus ``report.json`` into directory ``path``.

    Data files are byte-deterministic for identical configs; ``format="json"``
    drops CSV tables.

    Raises
    ------
    IoError
        If the directory or any file cannot be written.
    """
    out = Path(path if path is not None else report.config.output["path"])
    fmt = format or report.config.output["format"]
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name in sorted(report.data):
            if name.endswith(".csv") and fmt != "json+csv":
                continue
            target = out / name
            with open(target, "w", encoding="utf-8", newline="") as fh:
                fh.write(_serialize(name, report.data[name]))
            written.append(target)
        target = out / "report.json"
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(_dumps(report.to_dict()))
        written.append(target)
    except OSError as exc:
        bad = getattr(exc, "filename", None) or out
        raise IoError(bad, exc.strerror or str(exc)) from exc
    return written


def _summary_lines(report: RunReport) -> list[str]:
    lines = [f"experiment: {report.config.experiment}  status: {report.to_dict()['status']}"]
    for c in report.checks:
        mark = "PASS" if c.passed else "FAIL"
        lines.append(f"  [{mark}] {c.name}: {c.value:.6g} {c.relation} {c.tolerance:.3g}")
    scan = report.data.get("scan.json")
    if scan is not None:
        lines.append(f"  scan: min ||Q|| = {scan['min_q_norm']:.6g}; {scan['message']}")
    lines += [f"  warning: {w}" for w in report.warnings]
    if report.error:
        lines.append(f"  error: {report.error}")
    return lines


def _cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except SchemaError as exc:
        for path, reason in exc.errors:
            print(f"{path}: {reason}", file=sys.stderr)
        return EXIT_ERROR
    except IoError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    print(cfg.to_json())
    return EXIT_OK


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except SchemaError as exc:
        for path, reason in exc.errors:
            print(f"{path}: {reason}", file=sys.stderr)
        return EXIT_ERROR
    except IoError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    if args.out:
        cfg = cfg.with_output(args.out)
    report = run(cfg)
    try:
        write_report(report)
    except IoError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        print("\n".join(_summary_lines(report)))
    return report.exit_code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="steklov", description="Steklov spectra and shape perturbation experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="output directory (overrides output.path)")
    p_run.add_argument("--quiet", action="store_true", help="suppress the summary")
    p_run.set_defaults(func=_cmd_run)
    p_val = sub.add_parser("validate", help="validate a config and print it with defaults")
    p_val.add_argument("config")
    p_val.set_defaults(func=_cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if getattr(args, "quiet", False) else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
