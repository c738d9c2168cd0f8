"""Independent families built from tensor products and fermions.

``build_tensor_family`` places factor elements ``x_k`` in
``M_{d_0} (x) ... (x) M_{d_{K-1}}`` as ``1 (x) ... (x) x_k (x) ... (x) 1``; the
factor subalgebras are independent for the normalised trace and the
conditional expectation onto the k-th factor is the normalised partial
trace over the other factors.

``build_fermionic_family`` uses Jordan-Wigner generators
``c_k = sz (x) ... (x) sz (x) sx (x) 1 (x) ... (x) 1``. They anticommute, yet
the algebras ``span{1, c_k}`` they generate are independent. The
conditional expectation onto ``span{1, c_k}`` is
``y -> tau(y) 1 + tau(y c_k) c_k``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .algebra import (
    AlgElement,
    TracialAlgebra,
    abs_op,
    element,
    identity,
    matrix_algebra,
    matrix_unit,
    trace,
    trace_product,
)
from .rearrangement import StepFunction, mu_of_direct_sum, singular_value_function

__all__ = [
    "BudgetExceededError",
    "IndependenceError",
    "TensorFamily",
    "DirectSumElement",
    "Ensemble",
    "ENSEMBLE_KINDS",
    "build_tensor_family",
    "build_fermionic_family",
    "jordan_wigner",
    "conditional_expectation",
    "rademacher_expand",
    "sample_ensemble",
    "rng_for",
    "box_muller",
]

MAX_FACTORS = 8
MAX_DIM = 4096
MAX_RADEMACHER = 12
INDEPENDENCE_ATOL = 1e-10

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)

ENSEMBLE_KINDS = ("classical", "gue_like", "fermionic", "rank_one")


class BudgetExceededError(ValueError):
    """Requested family exceeds the factor count or dimension budget."""


class IndependenceError(RuntimeError):
    """Constructed family failed its independence self-check (a bug, not user error)."""


@dataclass(frozen=True, eq=False)
class TensorFamily:
    """Independent family ``embedded[k]`` in a probability algebra ``ambient``.

    ``factors`` are ``(algebra, x_k)`` pairs with each algebra a single-block
    probability space. For fermionic families ``generators`` holds the
    Jordan-Wigner ``c_k`` and ``factors`` records the spectral model of each
    ``x_k = a_k 1 + b_k c_k`` as ``diag(a_k + b_k, a_k - b_k)`` in ``M_2``.
    """

    factors: tuple[tuple[TracialAlgebra, AlgElement], ...]
    ambient: TracialAlgebra
    embedded: tuple[AlgElement, ...]
    generators: tuple[AlgElement, ...] | None = None

    @property
    def K(self) -> int:
        return len(self.embedded)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(a.dims[0] for a, _ in self.factors)

    @property
    def kind(self) -> str:
        return "fermionic" if self.generators is not None else "tensor"

    def total(self) -> AlgElement:
        """``sum_k x_k`` in the ambient algebra."""
        return reduce(lambda u, v: u + v, self.embedded)

    def direct_sum(self) -> "DirectSumElement":
        """``sum_k x_k (x) e_k`` in ``ambient (x) l_inf``."""
        return DirectSumElement(tuple(self.embedded))

    def scaled(self, alpha: float) -> "TensorFamily":
        factors = tuple((a, alpha * x) for a, x in self.factors)
        return TensorFamily(factors, self.ambient, tuple(alpha * x for x in self.embedded), self.generators)


@dataclass(frozen=True, eq=False)
class DirectSumElement:
    """``X = sum_k x_k (x) e_k``; summand k sits on an atom of mass ``weights[k]``.

    The default weights are one (the counting trace on ``l_inf``). The
    Rademacher expansion uses ``2^-K`` for each sign pattern.
    """

    summands: tuple[AlgElement, ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        if not self.summands:
            raise ValueError("a direct sum needs at least one summand")
        alg = self.summands[0].algebra
        if any(s.algebra != alg for s in self.summands):
            raise ValueError("all summands must share one algebra")
        if self.weights is not None and len(self.weights) != len(self.summands):
            raise ValueError("one weight per summand")

    @property
    def algebra(self) -> TracialAlgebra:
        return self.summands[0].algebra

    def atom_weights(self) -> tuple[float, ...]:
        return self.weights if self.weights is not None else (1.0,) * len(self.summands)

    def mu(self) -> StepFunction:
        return mu_of_direct_sum([singular_value_function(s) for s in self.summands], self.atom_weights())

    def pairing(self, other: "DirectSumElement") -> complex:
        """``(tau (x) Sigma)(X Y)`` for two direct sums over the same index set."""
        if len(other.summands) != len(self.summands):
            raise ValueError("direct sums have different lengths")
        return sum(w * trace_product(a, b) for w, a, b in zip(self.atom_weights(), self.summands, other.summands))

    def __len__(self):
        return len(self.summands)


def _kron_all(mats: Sequence[np.ndarray]) -> np.ndarray:
    return reduce(np.kron, mats)


def _embed(dims: Sequence[int], k: int, block: np.ndarray) -> np.ndarray:
    left = int(np.prod(dims[:k], dtype=np.int64))
    right = int(np.prod(dims[k + 1 :], dtype=np.int64))
    return np.kron(np.kron(np.eye(left), block), np.eye(right))


def _check_budget(K: int, dim: int) -> None:
    if K > MAX_FACTORS:
        raise BudgetExceededError(f"{K} factors exceed the limit of {MAX_FACTORS}")
    if dim > MAX_DIM:
        raise BudgetExceededError(f"ambient dimension {dim} exceeds the limit of {MAX_DIM}")


def _verify_pairwise(embedded: Sequence[AlgElement], means: Sequence[complex]) -> None:
    l2 = [
        math.sqrt(sum(w * float(np.sum(np.abs(b) ** 2)) for (_, w), b in zip(e.algebra.blocks, e.blocks)))
        for e in embedded
    ]
    for j, k in itertools.combinations(range(len(embedded)), 2):
        lhs = trace_product(embedded[j], embedded[k])
        rhs = means[j] * means[k]
        scale = 1.0 + l2[j] * l2[k]
        if abs(lhs - rhs) > INDEPENDENCE_ATOL * scale:
            raise IndependenceError(
                f"tau(x_{j} x_{k}) = {lhs:.3e} differs from tau(x_{j}) tau(x_{k}) = {rhs:.3e}"
            )


def build_tensor_family(factors: Sequence[tuple[TracialAlgebra, AlgElement]]) -> TensorFamily:
    """Embed each ``x_k`` into the k-th tensor slot of the product algebra."""
    factors = tuple(factors)
    if not factors:
        raise ValueError("a family needs at least one factor")
    for alg, x in factors:
        if len(alg.blocks) != 1 or not alg.is_probability:
            raise ValueError("factor algebras must be single-block probability spaces")
        if x.algebra != alg:
            raise ValueError("factor element does not belong to its algebra")
    dims = [alg.dims[0] for alg, _ in factors]
    D = int(np.prod(dims, dtype=np.int64))
    _check_budget(len(factors), D)
    ambient = matrix_algebra(D)
    embedded = tuple(
        AlgElement(ambient, (_embed(dims, k, x.blocks[0]),), x.hermitian) for k, (_, x) in enumerate(factors)
    )
    means = [trace(x) for _, x in factors]
    for e, m in zip(embedded, means):
        if abs(trace(e) - m) > INDEPENDENCE_ATOL * (1.0 + abs(m)):
            raise IndependenceError("embedding changed the trace")
    _verify_pairwise(embedded, means)
    return TensorFamily(factors, ambient, embedded)


def jordan_wigner(K: int) -> list[np.ndarray]:
    """``K`` anticommuting self-adjoint unitaries on ``(C^2)^{(x) K}``."""
    _check_budget(K, 2**K)
    gens = []
    for k in range(K):
        mats = [SIGMA_Z] * k + [SIGMA_X] + [np.eye(2)] * (K - k - 1)
        gens.append(_kron_all(mats))
    return gens


def build_fermionic_family(coefficients: Sequence[tuple[float, float]]) -> TensorFamily:
    """Family ``x_k = a_k 1 + b_k c_k`` for real pairs ``(a_k, b_k)``."""
    K = len(coefficients)
    if K == 0:
        raise ValueError("a family needs at least one factor")
    gens_np = jordan_wigner(K)
    D = 2**K
    ambient = matrix_algebra(D)
    gens = tuple(AlgElement(ambient, (g,), True) for g in gens_np)
    for j in range(K):
        if np.abs(gens_np[j] @ gens_np[j] - np.eye(D)).max() > INDEPENDENCE_ATOL:
            raise IndependenceError("generator does not square to 1")
        for k in range(j + 1, K):
            anti = gens_np[j] @ gens_np[k] + gens_np[k] @ gens_np[j]
            if np.abs(anti).max() > INDEPENDENCE_ATOL:
                raise IndependenceError("generators do not anticommute")
    m2 = matrix_algebra(2)
    factors, embedded = [], []
    for (a, b), c in zip(coefficients, gens_np):
        a, b = float(a), float(b)
        factors.append((m2, element(m2, np.diag([a + b, a - b]), True)))
        embedded.append(AlgElement(ambient, (a * np.eye(D) + b * c,), True))
    _verify_pairwise(embedded, [complex(a) for a, _ in coefficients])
    return TensorFamily(tuple(factors), ambient, tuple(embedded), gens)


def conditional_expectation(family: TensorFamily, k: int, y: AlgElement) -> AlgElement:
    """``E_k(y)``: trace-preserving expectation onto the k-th independent subalgebra."""
    if not 0 <= k < family.K:
        raise IndexError(f"factor index {k} out of range for {family.K} factors")
    if y.algebra != family.ambient:
        raise ValueError("element is not in the family's ambient algebra")
    if family.generators is not None:
        c = family.generators[k]
        return trace(y) * identity(family.ambient) + trace(y @ c) * c
    dims = family.dims
    left = int(np.prod(dims[:k], dtype=np.int64))
    right = int(np.prod(dims[k + 1 :], dtype=np.int64))
    d = dims[k]
    t = y.blocks[0].reshape(left, d, right, left, d, right)
    reduced = np.einsum("aibajb->ij", t) / (left * right)
    out = np.kron(np.kron(np.eye(left), reduced), np.eye(right))
    return AlgElement(family.ambient, (out,), y.hermitian)


def rademacher_expand(family: TensorFamily) -> DirectSumElement:
    """``sum_k x_k (x) r_k`` as a direct sum over the ``2^K`` sign patterns.

    Pattern ``eps`` carries ``sum_k eps_k x_k`` on an atom of mass ``2^-K``,
    which is exact for functions of the first K Rademacher variables.
    """
    K = family.K
    if K > MAX_RADEMACHER:
        raise BudgetExceededError(f"{K} summands exceed the sign-enumeration limit {MAX_RADEMACHER}")
    xs = np.stack([x.blocks[0] for x in family.embedded])
    summands = []
    for eps in itertools.product((1.0, -1.0), repeat=K):
        block = np.tensordot(np.array(eps), xs, axes=1)
        summands.append(AlgElement(family.ambient, (block,), all(x.hermitian for x in family.embedded)))
    w = 2.0**-K
    return DirectSumElement(tuple(summands), (w,) * len(summands))


# random ensembles ---------------------------------------------------------

_KIND_CODES = {k: i for i, k in enumerate(ENSEMBLE_KINDS)}


def rng_for(kind: str, K: int, n: int, seed: int, trial: int = 0) -> np.random.Generator:
    """PCG64 stream for one trial.

    The stream is keyed by ``SeedSequence([seed, trial, kind code, K, n])``,
    so distinct cells and trials never share a stream and any single trial can
    be regenerated on its own.
    """
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(trial), _KIND_CODES[kind], int(K), int(n)])
    return np.random.Generator(np.random.PCG64(ss))


def box_muller(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normals from pairs of uniforms (Box-Muller)."""
    size = tuple(np.atleast_1d(size))
    count = int(np.prod(size))
    half = (count + 1) // 2
    u1 = 1.0 - rng.random(half)  # in (0, 1]
    u2 = rng.random(half)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)])
    return z[:count].reshape(size)


@dataclass(frozen=True)
class Ensemble:
    """Descriptor of a random family: ``kind:K=4,n=2[,mean_zero=false][,positive=true]``."""

    kind: str
    K: int
    n: int = 2
    seed: int = 0
    mean_zero: bool = True
    positive: bool = False

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}; expected one of {ENSEMBLE_KINDS}")
        if self.K < 1 or self.n < 1:
            raise ValueError("K and n must be positive")
        if self.positive and self.mean_zero:
            object.__setattr__(self, "mean_zero", False)

    @classmethod
    def parse(cls, text: str, seed: int | None = None) -> "Ensemble":
        kind, _, rest = text.strip().partition(":")
        fields: dict = {"kind": kind}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, val = item.partition("=")
            if not eq:
                raise ValueError(f"expected key=value in ensemble {text!r}")
            key = key.strip()
            if key in ("K", "n", "seed"):
                fields[key] = int(val)
            elif key in ("mean_zero", "positive"):
                if val.lower() not in ("true", "false", "1", "0"):
                    raise ValueError(f"bad boolean {val!r} in ensemble {text!r}")
                fields[key] = val.lower() in ("true", "1")
            else:
                raise ValueError(f"unknown ensemble field {key!r}")
        if "K" not in fields:
            fields["K"] = fields.get("n", 2) if kind == "rank_one" else 2
        if kind == "rank_one" and "n" not in fields:
            fields["n"] = fields["K"]
        if seed is not None and "seed" not in fields:
            fields["seed"] = seed
        return cls(**fields)

    def label(self) -> str:
        suffix = ""
        if self.positive:
            suffix = ",positive=true"
        elif not self.mean_zero:
            suffix = ",mean_zero=false"
        return f"{self.kind}:K={self.K},n={self.n}{suffix}"

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "K": self.K,
            "n": self.n,
            "seed": self.seed,
            "mean_zero": self.mean_zero,
            "positive": self.positive,
        }

    def dimension(self) -> int:
        """Size of the ambient matrix algebra."""
        if self.kind == "fermionic":
            return 2**self.K
        if self.kind == "rank_one":
            return self.n
        return self.n**self.K

    def check_budget(self) -> None:
        """Raise :class:`BudgetExceededError` if sampling would exceed the size limits."""
        _check_budget(1 if self.kind == "rank_one" else self.K, self.dimension())

    def sample(self, trial: int = 0):
        return sample_ensemble(self.kind, self.K, self.n, self.seed, self.mean_zero, trial, self.positive)


def _random_factor(kind: str, n: int, rng: np.random.Generator) -> np.ndarray:
    if kind == "classical":
        return np.diag(box_muller(rng, n)).astype(np.complex128)
    g = box_muller(rng, (2, n, n))
    a = g[0] + 1j * g[1]
    return (a + a.conj().T) / 2.0


def sample_ensemble(
    kind: str,
    K: int,
    n: int = 2,
    seed: int = 0,
    mean_zero: bool = True,
    trial: int = 0,
    positive: bool = False,
):
    """Draw a random family.

    ``classical``
        random diagonal ``n x n`` factors (commuting, classical independence).
    ``gue_like``
        random Hermitian ``n x n`` factors with Gaussian entries.
    ``fermionic``
        ``x_k = a_k 1 + b_k c_k`` on ``M_{2^K}`` with Gaussian ``a_k, b_k``;
        ``n`` is ignored.
    ``rank_one``
        the list ``x_k = e_{k,0}`` in ``(M_n, Tr/n)``, ``k < min(K, n)``; not
        independent, used as a negative control.

    ``mean_zero`` subtracts ``tau(x_k) 1`` from each factor before embedding;
    ``positive`` replaces each factor by its modulus instead.
    """
    if kind not in ENSEMBLE_KINDS:
        raise ValueError(f"unknown ensemble kind {kind!r}")
    if kind == "rank_one":
        alg = matrix_algebra(n)
        return [matrix_unit(alg, k, 0) for k in range(min(K, n))]
    rng = rng_for(kind, K, n, seed, trial)
    if kind == "fermionic":
        _check_budget(K, 2**K)
        ab = box_muller(rng, (K, 2))
        coeffs = []
        for a, b in ab:
            if positive:
                a, b = (abs(a + b) + abs(a - b)) / 2, (abs(a + b) - abs(a - b)) / 2
            elif mean_zero:
                a = 0.0
            coeffs.append((a, b))
        return build_fermionic_family(coeffs)
    _check_budget(K, n**K)
    alg = matrix_algebra(n)
    factors = []
    for _ in range(K):
        x = element(alg, _random_factor(kind, n, rng), True)
        if positive:
            x = abs_op(x)
        elif mean_zero:
            x = x - trace(x).real
        factors.append((alg, x))
    return build_tensor_family(factors)
