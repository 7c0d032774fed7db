"""Acceptance gate: one test per criterion, summarized at the end of the run."""

import filecmp
import json
import time

import numpy as np
import pytest

from conftest import DISK, TREFOIL_ORDER
from steklov.cli import main
from steklov.dtn import assemble_dtn, steklov_spectrum
from steklov.genericity import (
    NO_CRITICAL,
    criticality_scan,
    psi_functional,
    q_functional,
    random_split_experiment,
    unique_continuation_check,
)
from steklov.geometry import CurveSpec, build_curve
from steklov.harmonic import solve_dirichlet
from steklov.perturbation import (
    PerturbationField,
    dt_dtn_general,
    dt_dtn_normal,
    dt_harmonic_extension,
    eigenvalue_derivative,
    fd_dtn_variation,
    fd_eigenvalue_derivative,
    fd_harmonic_extension,
    splitting_matrix,
)

POINTS = np.array([[0.0, 0.0], [0.3, 0.2], [-0.4, 0.1], [0.1, -0.6], [0.6, 0.5]])


def _rel(a, b):
    return np.max(np.abs(a - b) / (1 + np.abs(a)))


def _line(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


@pytest.mark.criterion(1, "disk spectrum {0,1,1,...,5,5} within 1e-8 at M=16, N=64 in < 1 s")
def test_criterion_1_disk_spectrum():
    start = time.perf_counter()
    spec = steklov_spectrum(assemble_dtn(build_curve(DISK), 16), 10)
    elapsed = time.perf_counter() - start
    err = np.max(np.abs(spec.eigenvalues - [0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5]))
    ok = err < 1e-8 and elapsed < 1.0
    _line(1, ok, f"max error {err:.2e}, {elapsed:.3f} s")
    assert ok


@pytest.mark.criterion(2, "dilation: eigenvalue_derivative = -lambda within 1e-8, FD within 1e-6")
def test_criterion_2_dilation(disk):
    curve, dtn, spec = disk
    sigma = np.ones(64)
    formula = np.array(
        [eigenvalue_derivative(curve, spec.eigenfields[i], spec.eigenvalues[i], sigma, dtn) for i in range(1, 8)]
    )
    err_formula = np.max(np.abs(formula + spec.eigenvalues[1:8]))
    fd = []
    for c in range(1, 5):
        rep = fd_eigenvalue_derivative(DISK, c, sigma, 1e-4, 16, base=disk)
        fd.extend(rep.fd_value)
    fd = np.array(fd)[:7]
    err_fd = np.max(np.abs(fd - formula))
    ok = err_formula < 1e-8 and err_fd < 1e-6
    _line(2, ok, f"formula {err_formula:.2e}, FD {err_fd:.2e}")
    assert ok


@pytest.mark.criterion(3, "harmonic-extension variation vs FD at 5 points < 1e-5 with Richardson")
def test_criterion_3_harmonic_variation(disk, trefoil):
    cases = [
        (disk[0], 16, np.ones(64)),
        (trefoil[0], TREFOIL_ORDER, np.cos(2 * trefoil[0].theta)),
    ]
    worst = 0.0
    for curve, order, sigma in cases:
        f = np.cos(curve.theta)
        u = solve_dirichlet(curve, f, order)
        v = dt_harmonic_extension(curve, u, sigma)(POINTS)
        d1 = fd_harmonic_extension(curve, f, sigma, POINTS, 1e-4, order)
        d2 = fd_harmonic_extension(curve, f, sigma, POINTS, 5e-5, order)
        rich = (4 * d2 - d1) / 3
        worst = max(worst, _rel(v, d1), _rel(v, rich))
    ok = worst < 1e-5
    _line(3, ok, f"worst relative error {worst:.2e}")
    assert ok


@pytest.mark.criterion(4, "DtN variation vs FD sup-norm < 1e-4; tau=0 general form equals normal form within 1e-10")
def test_criterion_4_dtn_variation(disk, trefoil):
    worst_fd = worst_red = 0.0
    for curve, dtn, spec, order in (disk + (16,), trefoil + (TREFOIL_ORDER,)):
        f = spec.eigenfields[1]
        sigma = np.cos(2 * curve.theta)
        formula = dt_dtn_normal(curve, f, sigma, dtn).values
        fd = fd_dtn_variation(curve, f, sigma, 1e-4, order)
        worst_fd = max(worst_fd, np.max(np.abs(formula - fd)) / np.max(np.abs(formula)))
        general = dt_dtn_general(curve, f, PerturbationField.normal(curve, sigma), dtn).values
        worst_red = max(worst_red, np.max(np.abs(general - formula)))
    ok = worst_fd < 1e-4 and worst_red < 1e-10
    _line(4, ok, f"FD {worst_fd:.2e}, reduction {worst_red:.2e}")
    assert ok


@pytest.mark.criterion(5, "splitting matrix: disk lambda=1, cos2theta -> -3/2, +3/2; cos4theta -> 0")
def test_criterion_5_splitting(disk):
    curve, dtn, spec = disk
    th = curve.theta
    M = splitting_matrix(curve, spec.cluster_fields(1), np.cos(2 * th), dtn)
    rates = np.linalg.eigvalsh(M)
    err_an = np.max(np.abs(rates - [-1.5, 1.5]))
    rep = fd_eigenvalue_derivative(DISK, 1, np.cos(2 * th), 1e-4, 16, base=disk)
    err_fd = np.max(np.abs(rep.fd_value - rates))
    zero = np.max(np.abs(splitting_matrix(curve, spec.cluster_fields(1), np.cos(4 * th), dtn)))
    ok = err_an < 1e-8 and err_fd < 1e-4 and zero < 1e-8
    _line(5, ok, f"analytic {err_an:.2e}, FD {err_fd:.2e}, cos4 {zero:.2e}")
    assert ok


@pytest.mark.criterion(6, "Psi - Q < 1e-7 (1 + lambda^2) on eigenpairs of the first 4 clusters")
def test_criterion_6_psi_q(disk, trefoil):
    worst = 0.0
    n_pairs = 0
    for curve, dtn, spec in (disk, trefoil):
        for c in range(4):
            members = spec.clusters[c]
            lam = float(spec.cluster_values(c).mean())
            for i in members:
                for j in members:
                    if i == j:
                        continue
                    f, psi = spec.eigenfields[i], spec.eigenfields[j]
                    diff = psi_functional(curve, f, psi, lam, dtn).values - q_functional(curve, f, psi, lam).values
                    worst = max(worst, np.max(np.abs(diff)) / (1 + lam**2))
                    n_pairs += 1
    ok = n_pairs > 0 and worst < 1e-7
    _line(6, ok, f"{n_pairs} ordered pairs, worst scaled gap {worst:.2e}")
    assert ok


@pytest.mark.criterion(7, "criticality scan on disk: min ||Q|| = k(2k+1)/(2 pi) within 1e-5")
def test_criterion_7_scan(disk):
    curve, _, spec = disk
    errs = []
    verdicts = []
    for k in (1, 2, 3):
        res = criticality_scan(curve, spec, k, 64)
        errs.append(abs(res.min_q_norm - k * (2 * k + 1) / (2 * np.pi)))
        verdicts.append(res.verdict)
    ok = max(errs) < 1e-5 and all(v == NO_CRITICAL for v in verdicts)
    _line(7, ok, f"max error {max(errs):.2e}, verdicts {set(verdicts)}")
    assert ok


@pytest.mark.criterion(8, "random splitting on the disk: all double eigenvalues split > 1e-4, FD rates within 1e-3, < 60 s")
def test_criterion_8_split():
    start = time.perf_counter()
    trials, summary = random_split_experiment(CurveSpec((), ()), 20, 0.05, 6, 42, gap_min=1e-4)
    elapsed = time.perf_counter() - start
    min_gap = min(min(t.cluster_gaps) for t in trials)
    rate_err = max(
        np.max(np.abs(np.array(p) - np.array(f))) for t in trials for p, f in zip(t.predicted_rates, t.fd_rates)
    )
    ok = (
        summary.n_valid == 20
        and summary.fraction_passed == 1.0
        and summary.multiple_clusters == [[1, 2], [3, 4], [5, 6]]
        and min_gap > 1e-4
        and rate_err < 1e-3
        and elapsed < 60
    )
    _line(8, ok, f"min gap {min_gap:.2e}, rate error {rate_err:.2e}, {elapsed:.1f} s")
    assert ok


@pytest.mark.criterion(9, "unique continuation surrogate passes for the first 10 eigenfields")
def test_criterion_9_uc(disk, trefoil):
    worst = np.inf
    for curve, _, spec in (disk, trefoil):
        for i in range(1, 11):
            rep = unique_continuation_check(curve, spec.eigenfields[i], 1 / 16, 1e-3)
            worst = min(worst, rep.min_window_max)
    ok = worst > 1e-3
    _line(9, ok, f"smallest window maximum {worst:.3f}")
    assert ok


CONFIGS = {
    "spectrum": {"output": {"format": "json+csv"}},
    "derivative-check": {"params": {"sigma": {"cos": [0, 1]}}},
    "split": {"params": {"n_trials": 6}},
    "critical-scan": {"params": {"cluster": 2}},
    "uc-check": {"output": {"format": "json+csv"}},
}


@pytest.mark.criterion(10, "identical configs give byte-identical data files")
def test_criterion_10_determinism(tmp_path, monkeypatch):
    mismatched = []
    for name, extra in CONFIGS.items():
        cfg = {"curve": {}, "solver": {"basis_order": 16, "n_nodes": 64}, "experiment": name}
        cfg.update(extra)
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(cfg))
        dirs = []
        for run_idx, threads in enumerate(("1", "3")):
            monkeypatch.setenv("STEKLOV_THREADS", threads)
            out = tmp_path / f"{name}-{run_idx}"
            assert main(["run", str(path), "--out", str(out), "--quiet"]) == 0
            dirs.append(out)
        names = sorted(p.name for p in dirs[0].iterdir() if p.name != "report.json")
        assert names
        _, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], names, shallow=False)
        mismatched += mismatch + errors
    ok = not mismatched
    _line(10, ok, f"mismatched files: {mismatched or 'none'}")
    assert ok
