import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ncfa.algebra import element, identity, matrix_algebra, trace, trace_product
from ncfa.independence import (
    BudgetExceededError,
    Ensemble,
    box_muller,
    build_fermionic_family,
    build_tensor_family,
    conditional_expectation,
    jordan_wigner,
    rademacher_expand,
    sample_ensemble,
)
from ncfa.majorization import hl_submajorize
from ncfa.rearrangement import StepFunction, singular_value_function
from ncfa.spaces import Lp, norm

from conftest import random_element, random_matrix, seeds

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def factor(m):
    alg = matrix_algebra(m.shape[0])
    return alg, element(alg, [m])


def test_two_pauli_factors():
    fam = build_tensor_family([factor(SZ), factor(SZ)])
    assert fam.ambient.dims == (4,)
    assert np.allclose(fam.embedded[0].blocks[0], np.diag([1, 1, -1, -1]))
    assert np.allclose(fam.embedded[1].blocks[0], np.diag([1, -1, 1, -1]))


def test_single_factor_embedding_is_identity_map():
    m = random_matrix(np.random.default_rng(0), 3, hermitian=True)
    fam = build_tensor_family([factor(m)])
    assert np.allclose(fam.embedded[0].blocks[0], m)


@pytest.mark.parametrize("seed", range(5))
def test_independence_with_generated_algebra(seed):
    rng = np.random.default_rng(seed)
    fam = build_tensor_family([factor(random_matrix(rng, 2, True)), factor(random_matrix(rng, 3, True))])
    x0, x1 = fam.embedded
    lhs = trace(x0 @ x1 @ x0)
    rhs = trace(fam.factors[0][1] @ fam.factors[0][1]) * trace(fam.factors[1][1])
    assert abs(lhs - rhs) <= 1e-10


def test_budget_limits():
    small = factor(np.eye(2))
    with pytest.raises(BudgetExceededError):
        build_tensor_family([small] * 9)
    big = factor(np.eye(65))
    with pytest.raises(BudgetExceededError):
        build_tensor_family([big, big])
    with pytest.raises(BudgetExceededError):
        sample_ensemble("gue_like", 7, 4)


def _partial_trace_oracle(y, d0, d1, k):
    # explicit sums over basis vectors of the traced-out factor
    out = np.zeros((d0 * d1, d0 * d1), dtype=complex)
    if k == 0:
        red = np.zeros((d0, d0), dtype=complex)
        for j in range(d1):
            e = np.zeros((d1, 1)); e[j] = 1
            v = np.kron(np.eye(d0), e)
            red += v.T @ y @ v
        out = np.kron(red / d1, np.eye(d1))
    else:
        red = np.zeros((d1, d1), dtype=complex)
        for j in range(d0):
            e = np.zeros((d0, 1)); e[j] = 1
            v = np.kron(e, np.eye(d1))
            red += v.T @ y @ v
        out = np.kron(np.eye(d0), red / d0)
    return out


@pytest.mark.parametrize("seed", range(4))
def test_conditional_expectation_is_partial_trace(seed):
    rng = np.random.default_rng(seed)
    fam = build_tensor_family([factor(random_matrix(rng, 2, True)), factor(random_matrix(rng, 3, True))])
    y = random_element(fam.ambient, rng)
    for k in (0, 1):
        assert np.allclose(conditional_expectation(fam, k, y).blocks[0], _partial_trace_oracle(y.blocks[0], 2, 3, k))


def _families(seed):
    yield sample_ensemble("gue_like", 3, 2, seed, mean_zero=False)
    yield sample_ensemble("classical", 2, 3, seed, mean_zero=False)
    yield sample_ensemble("fermionic", 3, 2, seed, mean_zero=False)


@pytest.mark.parametrize("seed", range(3))
def test_conditional_expectation_properties(seed):
    rng = np.random.default_rng(100 + seed)
    for fam in _families(seed):
        one = identity(fam.ambient)
        for k in range(fam.K):
            y = random_element(fam.ambient, rng)
            ey = conditional_expectation(fam, k, y)
            assert conditional_expectation(fam, k, ey).allclose(ey, atol=1e-9)
            assert conditional_expectation(fam, k, one).allclose(one, atol=1e-9)
            assert abs(trace(ey) - trace(y)) <= 1e-9
            assert ey.opnorm() <= y.opnorm() + 1e-9
            xk = fam.embedded[k]
            assert conditional_expectation(fam, k, xk).allclose(xk, atol=1e-9)
            # module property over the k-th subalgebra
            assert conditional_expectation(fam, k, xk @ y @ xk).allclose(xk @ ey @ xk, atol=1e-8)
            for j in range(fam.K):
                if j != k:
                    xj = fam.embedded[j]
                    assert conditional_expectation(fam, k, xj).allclose(trace(xj) * one, atol=1e-9)
            assert hl_submajorize(singular_value_function(ey), singular_value_function(y))


def test_conditional_expectation_index_errors():
    fam = sample_ensemble("classical", 2, 2)
    with pytest.raises(IndexError):
        conditional_expectation(fam, 2, identity(fam.ambient))
    with pytest.raises(ValueError):
        conditional_expectation(fam, 0, identity(matrix_algebra(3)))


def test_jordan_wigner_k2():
    c0, c1 = jordan_wigner(2)
    assert np.allclose(c0, np.kron(SX, np.eye(2)))
    assert np.allclose(c1, np.kron(SZ, SX))
    assert np.allclose(c0 @ c1 + c1 @ c0, 0)
    assert np.allclose(c0 @ c0, np.eye(4)) and np.allclose(c1 @ c1, np.eye(4))


@pytest.mark.parametrize("K", [1, 3, 5])
def test_jordan_wigner_anticommute(K):
    cs = jordan_wigner(K)
    for i, j in itertools.product(range(K), repeat=2):
        anti = cs[i] @ cs[j] + cs[j] @ cs[i]
        assert np.allclose(anti, 2 * np.eye(2**K) if i == j else 0)


def test_fermionic_family_spectral_model():
    fam = build_fermionic_family([(0.5, 2.0), (0.0, -1.0)])
    for (alg, model), x in zip(fam.factors, fam.embedded):
        assert singular_value_function(model).isclose(singular_value_function(x))


def test_rademacher_single_factor():
    fam = sample_ensemble("gue_like", 1, 3, seed=4)
    rad = rademacher_expand(fam)
    assert len(rad) == 2
    assert rad.summands[0].allclose(fam.embedded[0]) and rad.summands[1].allclose(-fam.embedded[0])
    for q in (1, 2, 4):
        assert norm(Lp(q), rad.mu()) == pytest.approx(norm(Lp(q), singular_value_function(fam.embedded[0])))


def test_rademacher_zero_family():
    fam = build_tensor_family([factor(np.zeros((2, 2)))] * 3)
    assert rademacher_expand(fam).mu().is_zero


def test_rademacher_two_signs():
    fam = build_tensor_family([factor(SZ), factor(SZ)])
    rad = rademacher_expand(fam)
    assert rad.atom_weights() == (0.25,) * 4
    assert rad.mu().isclose(StepFunction.from_pairs([2.0], [0.5]))
    assert norm(Lp(2), rad.mu()) == pytest.approx(math.sqrt(2))


def test_rank_one_square_functions():
    xs = sample_ensemble("rank_one", 4, 4)
    from ncfa.operators import square_mu

    assert norm(Lp(4), square_mu(xs)) == pytest.approx(math.sqrt(2), abs=1e-12)
    assert norm(Lp(4), square_mu(xs, adjoint=True)) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("kind", ["classical", "gue_like", "fermionic"])
def test_mean_zero_and_determinism(kind):
    a = sample_ensemble(kind, 3, 2, seed=9, trial=2)
    b = sample_ensemble(kind, 3, 2, seed=9, trial=2)
    c = sample_ensemble(kind, 3, 2, seed=9, trial=3)
    for x in a.embedded:
        assert abs(trace(x)) <= 1e-10
    assert all(np.array_equal(x.blocks[0], y.blocks[0]) for x, y in zip(a.embedded, b.embedded))
    assert not all(np.array_equal(x.blocks[0], y.blocks[0]) for x, y in zip(a.embedded, c.embedded))


@pytest.mark.parametrize("kind", ["classical", "gue_like", "fermionic"])
def test_positive_ensembles(kind):
    fam = Ensemble(kind, 3, 2, seed=1, positive=True).sample(0)
    for x in fam.embedded:
        assert np.linalg.eigvalsh(x.blocks[0]).min() >= -1e-10


def test_unknown_kind():
    with pytest.raises(ValueError):
        sample_ensemble("free", 2, 2)


def test_ensemble_descriptor():
    e = Ensemble.parse("classical:K=4,n=2", seed=7)
    assert (e.kind, e.K, e.n, e.seed, e.mean_zero) == ("classical", 4, 2, 7, True)
    assert Ensemble.parse(e.label()) == Ensemble("classical", 4, 2)
    assert Ensemble.parse("fermionic:K=3,positive=true").positive
    assert Ensemble.parse("rank_one:n=4").K == 4
    for bad in ("classical:K", "classical:K=2,m=3", "nope:K=2", "classical:K=2,positive=maybe"):
        with pytest.raises(ValueError):
            Ensemble.parse(bad)


def test_box_muller_moments():
    z = box_muller(np.random.default_rng(0), 200_001)
    assert z.shape == (200_001,)
    assert abs(z.mean()) < 0.01 and abs(z.std() - 1) < 0.01


@given(seeds, st.sampled_from(["classical", "gue_like", "fermionic"]), st.integers(1, 4))
def test_independence_identity_for_polynomials(seed, kind, K):
    fam = sample_ensemble(kind, K, 2, seed % 1000, mean_zero=False)
    rng = np.random.default_rng(seed)
    for k in range(fam.K):
        others = [fam.embedded[j] for j in range(fam.K) if j != k]
        if not others:
            continue
        y = identity(fam.ambient) * float(rng.standard_normal())
        for _ in range(3):
            a, b = rng.choice(len(others), 2)
            y = y + float(rng.standard_normal()) * (others[a] @ others[b])
        lhs = trace_product(fam.embedded[k], y)
        assert abs(lhs - trace(fam.embedded[k]) * trace(y)) <= 1e-8


@given(seeds, st.sampled_from(["classical", "gue_like", "fermionic"]), st.integers(1, 5))
def test_mean_zero_orthogonality(seed, kind, K):
    fam = sample_ensemble(kind, K, 2, seed % 10_000)
    total = fam.total()
    lhs = trace_product(total.H, total).real
    rhs = math.fsum(trace_product(x.H, x).real for x in fam.embedded)
    assert abs(lhs - rhs) <= 1e-9 * rhs
