"""Exact identities and explicit-constant bounds checked on random inputs.

Each check draws ``trials`` random instances from streams keyed by
``(seed, trial, check)`` and records the worst residual. A check passes iff
no instance violates its tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .algebra import AlgElement, TracialAlgebra, element, matrix_algebra, trace_product
from .independence import (
    DirectSumElement,
    TensorFamily,
    box_muller,
    conditional_expectation,
    rademacher_expand,
    sample_ensemble,
)
from .majorization import hl_submajorize
from .operators import BlockMatrix, ColumnElement, op_L, op_S, op_Sstar, op_T, op_Tstar, square_mu
from .rearrangement import StepFunction, singular_value_function
from .spaces import Lp, make_Mpq, norm, parse_orlicz, phi_moment

__all__ = ["OracleReport", "CHECKS", "run_check", "run_checks", "random_family", "random_element"]

INDEPENDENT_KINDS = ("classical", "gue_like", "fermionic")
MAX_FAILURES_LISTED = 20


@dataclass
class OracleReport:
    check: str
    trials: int
    seed: int
    max_residual: float = 0.0
    failures: list[str] = field(default_factory=list)
    failure_count: int = 0

    @property
    def passed(self) -> bool:
        return self.failure_count == 0

    def fail(self, message: str) -> None:
        self.failure_count += 1
        if len(self.failures) < MAX_FAILURES_LISTED:
            self.failures.append(message)

    def residual(self, r: float) -> None:
        self.max_residual = max(self.max_residual, float(r))

    def to_json(self) -> dict:
        return {
            "check": self.check,
            "trials": self.trials,
            "seed": self.seed,
            "passed": self.passed,
            "max_residual": self.max_residual,
            "failure_count": self.failure_count,
            "failures": list(self.failures),
        }


def _rng(seed: int, trial: int, check: str) -> np.random.Generator:
    code = sum(ord(c) * 31**i for i, c in enumerate(check)) % (2**32)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), trial, code])))


def random_element(alg: TracialAlgebra, rng: np.random.Generator, hermitian: bool = False) -> AlgElement:
    blocks = []
    for d in alg.dims:
        g = box_muller(rng, (2, d, d))
        a = g[0] + 1j * g[1]
        blocks.append((a + a.conj().T) / 2 if hermitian else a)
    return element(alg, blocks, hermitian)


def random_family(
    rng: np.random.Generator, seed: int, trial: int, max_dim: int = 64, kinds=INDEPENDENT_KINDS, max_K: int = 6
) -> TensorFamily:
    """A mean-zero family with random kind, ``K <= max_K`` and ``n in {2, 4}``, ambient size ``<= max_dim``."""
    kind = kinds[int(rng.integers(len(kinds)))]
    while True:
        K = int(rng.integers(1, max_K + 1))
        n = 2 if kind == "fermionic" else int(rng.choice([2, 4]))
        if n**K <= max_dim:
            break
    return sample_ensemble(kind, K, n, seed, True, trial)


def _sq_l2(x: AlgElement) -> float:
    return float(trace_product(x.H, x).real)


# checks ------------------------------------------------------------------


def check_l2_orthogonality(trials: int, seed: int, max_dim: int = 256) -> OracleReport:
    """``||sum x_k||_2^2 = sum ||x_k||_2^2`` for mean-zero independent families."""
    rep = OracleReport("l2-orthogonality", trials, seed)
    for t in range(trials):
        fam = random_family(_rng(seed, t, rep.check), seed, t, max_dim=max_dim)
        lhs = _sq_l2(fam.total())
        rhs = math.fsum(_sq_l2(x) for x in fam.embedded)
        r = abs(lhs - rhs) / rhs if rhs > 0 else abs(lhs)
        rep.residual(r)
        if r > 1e-9:
            rep.fail(f"trial {t}: {lhs!r} vs {rhs!r}")
    return rep


RANK_ONE_N = (2, 4, 8)
RANK_ONE_P = (2, 4)


def check_rank_one_square(trials: int = 1, seed: int = 0) -> OracleReport:
    """Square functions of ``x_k = e_{k,0}`` in ``(M_n, Tr/n)``.

    ``||(sum |x_k|^2)^{1/2}||_p = n^{1/2 - 1/p}`` and
    ``||(sum |x_k*|^2)^{1/2}||_p = 1``. Deterministic, so ``trials`` only
    repeats the computation.
    """
    rep = OracleReport("rank-one-square", trials, seed)
    for _ in range(max(1, trials)):
        for n in RANK_ONE_N:
            xs = sample_ensemble("rank_one", n, n)
            for p in RANK_ONE_P:
                col = norm(Lp(p), square_mu(xs))
                row = norm(Lp(p), square_mu(xs, adjoint=True))
                for got, want, what in ((col, n ** (0.5 - 1.0 / p), "column"), (row, 1.0, "row")):
                    r = abs(got - want)
                    rep.residual(r)
                    if r > 1e-10:
                        rep.fail(f"n={n}, p={p}, {what}: {got!r} != {want!r}")
    return rep


SYMMETRIZATION_Q = (2, 4, 8)


def check_symmetrization(trials: int, seed: int, max_K: int = 5) -> OracleReport:
    """``||sum x_k||_q <= 2 ||sum x_k (x) r_k||_q + 1e-9``; kinds cycle with the trial index."""
    rep = OracleReport("symmetrization", trials, seed)
    for t in range(trials):
        rng = _rng(seed, t, rep.check)
        kind = INDEPENDENT_KINDS[t % len(INDEPENDENT_KINDS)]
        fam = random_family(rng, seed, t, max_dim=32, kinds=(kind,), max_K=max_K)
        mu_sum = singular_value_function(fam.total())
        mu_rad = rademacher_expand(fam).mu()
        for q in SYMMETRIZATION_Q:
            a, b = norm(Lp(q), mu_sum), norm(Lp(q), mu_rad)
            rep.residual(max(0.0, a - 2 * b))
            if a > 2 * b + 1e-9:
                rep.fail(f"trial {t} ({kind}, K={fam.K}), q={q}: {a!r} > 2 * {b!r}")
    return rep


def _random_column_input(rng: np.random.Generator):
    n = int(rng.integers(1, 5))
    rows = int(rng.integers(1, 5))
    alg = matrix_algebra(n)
    if rng.random() < 0.5:
        return ColumnElement(tuple(random_element(alg, rng) for _ in range(rows)))
    cols = 2
    return BlockMatrix(tuple(tuple(random_element(alg, rng) for _ in range(cols)) for _ in range(rows)))


def check_column_contraction(trials: int, seed: int) -> OracleReport:
    """``||Lz||_q <= ||z||_q + 1e-9`` (q = 2, 4) and ``|Lz|^2 << |z|^2`` for random columns and 2-column matrices."""
    rep = OracleReport("column-contraction", trials, seed)
    for t in range(trials):
        z = _random_column_input(_rng(seed, t, rep.check))
        mu_l = op_L(z).mu()
        mu_z = z.mu()
        for q in (2, 4):
            a, b = norm(Lp(q), mu_l), norm(Lp(q), mu_z)
            rep.residual(max(0.0, a - b))
            if a > b + 1e-9:
                rep.fail(f"trial {t}, q={q}: {a!r} > {b!r}")
        if not hl_submajorize(mu_l.power(2), mu_z.power(2)):
            rep.fail(f"trial {t}: |Lz|^2 not submajorized by |z|^2")
    return rep


def check_conditional_expectation(trials: int, seed: int) -> OracleReport:
    """``mu(E_k(y)) << mu(y)`` for random families, indices and elements."""
    rep = OracleReport("cond-exp", trials, seed)
    for t in range(trials):
        rng = _rng(seed, t, rep.check)
        fam = random_family(rng, seed, t, max_dim=64)
        k = int(rng.integers(fam.K))
        y = random_element(fam.ambient, rng, hermitian=bool(rng.random() < 0.5))
        ok = hl_submajorize(singular_value_function(conditional_expectation(fam, k, y)), singular_value_function(y))
        if not ok:
            rep.fail(f"trial {t}: E_{k}(y) not submajorized by y")
    return rep


def check_duality(trials: int, seed: int) -> OracleReport:
    """``tau(T(z) w) = (tau (x) Sigma)(z T*(w))`` and ``tau(S*(z) w) = sum_k tau(z_k S(w)_k)``."""
    rep = OracleReport("duality", trials, seed)
    for t in range(trials):
        rng = _rng(seed, t, rep.check)
        fam = random_family(rng, seed, t, max_dim=64)
        alg = fam.ambient
        z = DirectSumElement(tuple(random_element(alg, rng) for _ in range(fam.K)))
        w = random_element(alg, rng)
        a = trace_product(op_T(fam, z), w)
        b = z.pairing(op_Tstar(fam, w))
        r = abs(a - b) / (1.0 + abs(b))
        rep.residual(r)
        if r > 1e-8:
            rep.fail(f"trial {t} (T): {a!r} vs {b!r}")
        col = ColumnElement(tuple(random_element(alg, rng) for _ in range(fam.K)))
        a = trace_product(op_Sstar(fam, col), w)
        b = col.pairing_with(op_S(fam, w).entries)
        r = abs(a - b) / (1.0 + abs(b))
        rep.residual(r)
        if r > 1e-8:
            rep.fail(f"trial {t} (S): {a!r} vs {b!r}")
    return rep


PHI_LABELS = ("M:2,4", "M:1.5,3", "pow:2")


def _submajorized_pair(rng: np.random.Generator) -> tuple[StepFunction, StepFunction]:
    # |P x| << x for doubly stochastic P, scaled down by c <= 1
    m = int(rng.integers(1, 9))
    h = float(rng.choice([0.125, 0.25, 0.5, 1.0]))
    x = np.abs(box_muller(rng, m)) * float(np.exp(box_muller(rng, 1)[0]))
    weights = rng.dirichlet(np.ones(3))
    P = sum(w * np.eye(m)[rng.permutation(m)] for w in weights)
    y = rng.uniform(0.3, 1.0) * (P @ x)
    return StepFunction.from_pairs(y, np.full(m, h)), StepFunction.from_pairs(x, np.full(m, h))


def check_phi_monotone(trials: int, seed: int) -> OracleReport:
    """``phi_moment(Phi, y) <= phi_moment(Phi, x) + 1e-9`` whenever ``y << x``.

    Half the pairs are built to be submajorized, half are random and kept
    only if the check accepts them.
    """
    phis = [parse_orlicz(s) for s in PHI_LABELS]
    rep = OracleReport("phi-moment", trials, seed)
    t = 0
    tried = 0
    while t < trials:
        rng = _rng(seed, tried, rep.check)
        tried += 1
        if tried % 2:
            y, x = _submajorized_pair(rng)
        else:
            y = StepFunction.from_pairs(np.abs(box_muller(rng, 4)), rng.uniform(0.1, 1.0, 4))
            x = StepFunction.from_pairs(np.abs(box_muller(rng, 4)) * 2, rng.uniform(0.1, 1.0, 4))
        if not hl_submajorize(y, x):
            if tried % 2:
                rep.fail(f"pair {tried}: constructed pair rejected by hl_submajorize")
            continue
        for phi in phis:
            a, b = phi_moment(phi, y), phi_moment(phi, x)
            rep.residual(max(0.0, a - b))
            if a > b + 1e-9:
                rep.fail(f"pair {tried}, {phi.label}: {a!r} > {b!r}")
        t += 1
    return rep


MPQ_PAIRS = ((1.5, 3.0), (2.0, 4.0), (2.0, 2.0))


def check_mpq_sandwich(trials: int = 1, seed: int = 0) -> OracleReport:
    """``p min(t^p, t^q) <= M_{p,q}(t) <= q min(t^p, t^q)`` on 256 log-spaced points."""
    rep = OracleReport("mpq-sandwich", trials, seed)
    t = np.logspace(-3, 3, 256)
    for p, q in MPQ_PAIRS:
        m = make_Mpq(p, q)(t)
        low = p * np.minimum(t**p, t**q)
        high = q * np.minimum(t**p, t**q)
        slack = 1e-12 * (1.0 + high)
        worst = float(max(np.max(low - m - slack), np.max(m - high - slack)))
        rep.residual(max(0.0, worst))
        if worst > 0.0:
            rep.fail(f"M_{{{p},{q}}}: sandwich violated by {worst:.3e}")
    return rep


CHECKS: dict[str, Callable[[int, int], OracleReport]] = {
    "l2-orthogonality": check_l2_orthogonality,
    "rank-one-square": check_rank_one_square,
    "symmetrization": check_symmetrization,
    "column-contraction": check_column_contraction,
    "cond-exp": check_conditional_expectation,
    "duality": check_duality,
    "phi-moment": check_phi_monotone,
    "mpq-sandwich": check_mpq_sandwich,
}


def run_check(name: str, trials: int, seed: int = 0) -> OracleReport:
    if name not in CHECKS:
        raise ValueError(f"unknown check {name!r}; expected one of {sorted(CHECKS)} or 'all'")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    return CHECKS[name](trials, seed)


def run_checks(names, trials: int, seed: int = 0) -> list[OracleReport]:
    """Run the named checks; ``"all"`` expands to every check in a fixed order."""
    expanded = []
    for name in names:
        expanded.extend(CHECKS if name == "all" else [name])
    return [run_check(n, trials, seed) for n in expanded]
