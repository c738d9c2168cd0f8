"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline;
without ``-s`` they are still written through ``capsys.disabled``.
"""

import math
import os
import subprocess
import sys
import time

from ncfa.harness import run_theorem
from ncfa.independence import Ensemble
from ncfa.oracles import run_check
from ncfa.spaces import Lp, make_Mpq


def announce(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


def oracle_criterion(capsys, number, name, trials, seed=0, budget=None):
    start = time.perf_counter()
    rep = run_check(name, trials, seed)
    elapsed = time.perf_counter() - start
    ok = rep.passed and (budget is None or elapsed < budget)
    detail = f"{name}: {trials} trials, max residual {rep.max_residual:.2e}, {elapsed:.1f}s"
    if budget is not None:
        detail += f" (budget {budget:.0f}s)"
    announce(capsys, number, ok, detail)
    assert rep.passed, rep.failures
    if budget is not None:
        assert elapsed < budget
    return rep


def test_criterion_01_l2_orthogonality(capsys):
    oracle_criterion(capsys, 1, "l2-orthogonality", 1000, budget=60.0)


def test_criterion_02_rank_one_square(capsys):
    oracle_criterion(capsys, 2, "rank-one-square", 1)


def test_criterion_03_symmetrization(capsys):
    # kinds cycle with the trial index: 100 draws per kind
    oracle_criterion(capsys, 3, "symmetrization", 300)


def test_criterion_04_column_contraction(capsys):
    oracle_criterion(capsys, 4, "column-contraction", 200)


def test_criterion_05_conditional_expectation(capsys):
    oracle_criterion(capsys, 5, "cond-exp", 500)


def test_criterion_06_phi_moment(capsys):
    oracle_criterion(capsys, 6, "phi-moment", 200)


def test_criterion_07_mpq_sandwich(capsys):
    oracle_criterion(capsys, 7, "mpq-sandwich", 1)


STABILITY_KINDS = ("classical", "gue_like", "fermionic")
STABILITY_SEEDS = (101, 202, 303, 404, 505)
STABILITY_TRIALS = 100


def stability_cells():
    M24 = make_Mpq(2, 4)
    yield "rosenthal p=4", "rosenthal", dict(p=4)
    yield "js Lp(3) both", "js", dict(spec=Lp(3), direction="both")
    yield "khinchine Lp(1.5)", "khinchine", dict(spec=Lp(1.5))
    yield "khinchine Lp(3)", "khinchine", dict(spec=Lp(3))
    for variant in ("positive", "mean_zero", "khinchine"):
        yield f"modular M:2,4 {variant}", "modular", dict(phi=M24, variant=variant)


def test_criterion_08_constant_stability(capsys):
    start = time.perf_counter()
    problems, worst = [], 1.0
    for kind in STABILITY_KINDS:
        for label, theorem, params in stability_cells():
            gms = []
            for seed in STABILITY_SEEDS:
                (rep,) = run_theorem(theorem, Ensemble(kind, 4, 2, seed), STABILITY_TRIALS, **params)
                if not math.isfinite(rep.spread):
                    problems.append(f"{label}/{kind}/seed {seed}: spread {rep.spread}")
                gms.append(rep.ratio_geomean)
            variation = max(gms) / min(gms)
            worst = max(worst, variation)
            if not variation < 2:
                problems.append(f"{label}/{kind}: geomean varies by {variation:.3f}")
    elapsed = time.perf_counter() - start
    ok = not problems and elapsed < 600
    announce(capsys, 8, ok, f"{len(STABILITY_KINDS) * 7} cells x {len(STABILITY_SEEDS)} seeds, "
             f"worst geomean variation {worst:.3f}, {elapsed:.1f}s (budget 600s)")
    assert not problems, problems
    assert elapsed < 600


def test_criterion_09_duality(capsys):
    oracle_criterion(capsys, 9, "duality", 200)


def test_criterion_10_cli_determinism(tmp_path, capsys):
    runs = [
        ["verify", "--theorem", "rosenthal", "--ensemble", "classical:K=4,n=2", "--p", "4",
         "--trials", "50", "--seed", "7"],
        ["verify", "--theorem", "modular", "--ensemble", "gue_like:K=3", "--phi", "M:2,4",
         "--variant", "all", "--trials", "10", "--seed", "3"],
        ["oracle", "--check", "all", "--trials", "5", "--seed", "1"],
    ]
    mismatched = []
    for i, argv in enumerate(runs):
        outputs = []
        # separate processes with different hash seeds and thread counts
        for hash_seed, threads in (("1", "1"), ("2", "2")):
            out = tmp_path / f"run{i}_{hash_seed}.json"
            env = dict(os.environ, PYTHONHASHSEED=hash_seed, NCFA_THREADS=threads)
            proc = subprocess.run([sys.executable, "-m", "ncfa", *argv, "--out", str(out)], env=env,
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            outputs.append(out.read_bytes())
        if outputs[0] != outputs[1]:
            mismatched.append(" ".join(argv))
    announce(capsys, 10, not mismatched, f"{len(runs)} CLI runs repeated in fresh processes, byte-identical JSON")
    assert not mismatched
