"""Acceptance run: the ten criteria on P0 plus ten random parameter draws.

Run directly (``python3 tests/test_acceptance.py``) or through pytest; either
way one PASS/FAIL line per criterion is printed.
"""

import time

import numpy as np
import pytest

from bigqjacobi.lattice import P0, random_parameters
from bigqjacobi.spectral import spectral_measure
from bigqjacobi.suites import MEASURE_SUITES, polynomial_defaults, random_polynomial_parameters, run_suite

CRITERIA = [
    (1, "eigen-equation residuals", "eigen"),
    (2, "Wronskian closed form and constancy", "wronskian"),
    (3, "connection formulas", "connection"),
    (4, "Green kernel resolvent identity", "green"),
    (5, "Plancherel isometry and inversion", "plancherel"),
    (6, "discrete spectrum masses and norms", "discrete"),
    (7, "dual orthogonality Gram matrix", "hahn"),
    (8, "compact polynomial case", "polynomial"),
    (9, "Stone formula projections", "stone"),
    (10, "q-analysis kernel identities", "theta-identity"),
]
N_DRAWS = 10
SEED = 7
TIME_LIMIT = 60.0
N_THETA = 512


def run_acceptance():
    """Return (results, seconds); results maps criterion number to its failing rows and row count."""
    t0 = time.perf_counter()
    params = [P0] + random_parameters(np.random.default_rng(SEED), N_DRAWS)
    poly = [polynomial_defaults()] + random_polynomial_parameters(np.random.default_rng(SEED), N_DRAWS)
    results = {n: {"rows": 0, "failed": []} for n, _, _ in CRITERIA}
    for i, p in enumerate(params):
        measure = spectral_measure(p, n_theta=N_THETA)
        for n, _, suite in CRITERIA:
            target = poly[i] if suite == "polynomial" else p
            rows = run_suite(suite, target, seed=SEED + i, measure=measure if suite in MEASURE_SUITES else None)
            results[n]["rows"] += len(rows)
            results[n]["failed"] += [r for r in rows if not r.passed]
    return results, time.perf_counter() - t0


def report_lines(results, seconds):
    lines = []
    for n, label, _ in CRITERIA:
        res = results[n]
        status = "PASS" if not res["failed"] else "FAIL"
        line = f"criterion {n:2d} {status}  {label} ({res['rows']} checks)"
        if res["failed"]:
            worst = max(res["failed"], key=lambda r: r.residual / r.tol)
            line += f"; worst: {worst.identity} at {worst.params}, residual {worst.residual:.3g} > {worst.tol:.0e}"
        lines.append(line)
    status = "PASS" if seconds < TIME_LIMIT else "FAIL"
    lines.append(f"runtime      {status}  {seconds:.1f} s (limit {TIME_LIMIT:.0f} s)")
    return lines


REPORT = []


@pytest.fixture(scope="module")
def acceptance():
    results, seconds = run_acceptance()
    REPORT[:] = report_lines(results, seconds)
    for line in REPORT:
        print(line)
    return results, seconds


@pytest.mark.parametrize("number,label,suite", CRITERIA, ids=[c[2] for c in CRITERIA])
def test_criterion(acceptance, number, label, suite):
    results, _ = acceptance
    res = results[number]
    assert res["rows"] > 0
    assert not res["failed"], [f"{r.identity} at {r.params}: {r.residual:.3g} > {r.tol:.0e}" for r in res["failed"]]


def test_runtime(acceptance):
    _, seconds = acceptance
    assert seconds < TIME_LIMIT


if __name__ == "__main__":
    for line in report_lines(*run_acceptance()):
        print(line)
