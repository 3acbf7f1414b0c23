"""Acceptance gate: one check per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))
from conftest import ACCEPTANCE_LINES, b_grid_oracle  # noqa: E402

from sparsecompliance.experiments import ExperimentConfig, run, run_compliance, run_phase, run_theorem1
from sparsecompliance.model import SparseModel, sample_atoms
from sparsecompliance.recovery import (RecoveryInstance, gaussian_operator, nonuniform_certificate,
                                       solve, sparse_unit_vector)
from sparsecompliance.regularizers import L1, FiniteAtomic, WeightedL1
from sparsecompliance.rip import b_sigma, delta_nec, projector_operator, rip_constant, rip_projector

SEED = 20240601


def report(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


def _sweep(functional, tol):
    start = time.perf_counter()
    lines, ok = [], True
    for n, k in ((3, 1), (4, 2)):
        cfg = ExperimentConfig.from_dict(dict(experiment="theorem1", n=n, k=k, seed=SEED, budget=10**4,
                                              weighted_draws=200, atom_sets=100, atoms_per_set=32,
                                              tol_b=1e-4, tol_d=1e-3, plots=False))
        summary = run_theorem1(cfg, (functional,))
        l1 = summary.rows[0]["value"]
        worst = min(r["value"] for r in summary.rows[1:])
        ok &= not summary.violations and worst >= l1 - tol
        lines.append(f"({n},{k}) l1={l1:.6g} min competitor={worst:.6g} violations={len(summary.violations)}")
    elapsed = time.perf_counter() - start
    return ok and elapsed <= 600, "; ".join(lines) + f"; {elapsed:.0f}s of 600s"


def test_criterion_1_theorem1_b_sigma():
    ok, detail = _sweep("b_sigma", 1e-4)
    report(1, ok, "B(l1) <= B(R) + 1e-4 over 200 wl1 + 100 atom sets: " + detail)


def test_criterion_2_theorem1_d_sigma():
    ok, detail = _sweep("d_sigma", 1e-3)
    report(2, ok, "D(l1) <= D(R) + 1e-3 over 200 wl1 + 100 atom sets: " + detail)


def test_criterion_3_b_l1_grid_oracle():
    oracle = b_grid_oracle(1e-4)
    value = b_sigma(L1(), SparseModel(3, 1), 10**4, SEED).value
    report(3, abs(value - oracle) <= 1e-3 and abs(oracle - 0.2) <= 1e-3,
           f"B(l1) at (3,1) = {value:.10f}, grid oracle = {oracle:.10f}")


def test_criterion_4_projector_identity_and_nec():
    rng = np.random.default_rng(SEED)
    shapes = [(n, k) for n in range(2, 7) for k in (1, 2) if n >= 2 * k]
    worst = 0.0
    for i in range(1000):
        n, k = shapes[i % len(shapes)]
        model = SparseModel(n, k)
        z = rng.standard_normal(n)
        worst = max(worst, abs(rip_projector(z, model) - rip_constant(projector_operator(z), model).delta))
    pairs = [(L1(), SparseModel(3, 1)), (WeightedL1([1, 2, 0.5, 3]), SparseModel(4, 1)),
             (FiniteAtomic(sample_atoms(SparseModel(4, 1), 16, seed=SEED)), SparseModel(4, 1)),
             (FiniteAtomic(sample_atoms(SparseModel(5, 2), 24, seed=SEED)), SparseModel(5, 2))]
    gap = max(abs(r.value - r.reference) for r in (delta_nec(R, m, 10**4, SEED) for R, m in pairs))
    report(4, worst <= 1e-10 and gap <= 1e-6,
           f"max |rip_projector - brute force| = {worst:.2e} over 1000 z; "
           f"max |delta_nec - 1/(1+B)| = {gap:.2e} over {len(pairs)} pairs")


def test_criterion_5_certificate_solver_equivalence():
    model = SparseModel(6, 1)
    disagreements = banded = holds = 0
    for t in range(200):
        rng = np.random.default_rng([SEED, t])
        M = gaussian_operator(4, 6, rng)
        x0 = sparse_unit_vector(model, rng)
        cert = nonuniform_certificate(M, x0, L1())
        x = solve(RecoveryInstance(M, M @ x0, L1(), x0))
        recovered = np.linalg.norm(x - x0) <= 1e-5
        holds += cert.holds
        if cert.holds != recovered:
            if abs(cert.margin) <= 1e-4:
                banded += 1
            else:
                disagreements += 1
    report(5, disagreements == 0,
           f"200 instances (6,4,1): {holds} certified, {disagreements} disagreements, "
           f"{banded} inside the margin band")


def test_criterion_6_compliance_ordering():
    start = time.perf_counter()
    cfg = ExperimentConfig.from_dict(dict(experiment="compliance", n=3, k=1, seed=SEED,
                                          samples=10**5, plots=False))
    summary = run_compliance(cfg)
    elapsed = time.perf_counter() - start
    est = {(r["regularizer"], r["measure"]): r for r in summary.rows}
    l1 = est[("l1", "uniform")]
    worst = max((r["estimate"] - l1["estimate"]) / math.hypot(r["half_width"], l1["half_width"])
                for r in summary.rows if r["measure"] == "uniform" and r["regularizer"] != "l1")
    ok = all(a["passed"] for a in summary.assertions) and elapsed <= 300
    report(6, ok, f"A_U(l1) = {l1['estimate']:.4f}; largest competitor excess = {worst:.2f} "
                  f"combined half-widths (limit 3); A_NU >= A_U for all "
                  f"{len(summary.rows) // 2} specs; {elapsed:.0f}s of 300s")


def test_criterion_7_phase_transition():
    cfg = ExperimentConfig.from_dict(dict(experiment="phase", n=8, k=1, seed=SEED, trials=500,
                                          plots=False))
    summary = run_phase(cfg)
    rates = [r["rate"] for r in summary.rows]
    report(7, summary.ok and rates[-1] == 1.0,
           f"(8,1) 500 trials per m, rates = {', '.join(f'{r:.3f}' for r in rates)}")


DETERMINISM_CONFIGS = [
    dict(experiment="theorem1", n=4, k=2, weighted_draws=12, atom_sets=6, budget=2000),
    dict(experiment="compliance", n=4, k=2, samples=20_000,
         regularizers=["l1", "wl1:1,2,3,4", "random-atoms:16:3", "ksupport:2"]),
    dict(experiment="phase", n=6, k=1, trials=100),
    dict(experiment="rip", n=4, k=1, budget=2000, matrices=["identity", "zero", "gaussian:3"],
         regularizers=["l1", "random-atoms:12:5"]),
]


def test_criterion_8_determinism():
    same = []
    for base in DETERMINISM_CONFIGS:
        texts = [run(ExperimentConfig.from_dict(dict(base, seed=SEED, workers=w, plots=False))).csv_text()
                 for w in (1, 2, 1)]
        same.append(len(set(texts)) == 1)
    names = [b["experiment"] for b in DETERMINISM_CONFIGS]
    report(8, all(same), "byte-identical CSV for workers 1, 2, 1: "
           + ", ".join(f"{n}={'yes' if s else 'no'}" for n, s in zip(names, same)))


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
