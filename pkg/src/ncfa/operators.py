"""Linear maps between an independent family's ambient algebra and its amplifications.

With ``E_k`` the conditional expectations of a :class:`TensorFamily` and
``tau`` its trace:

* ``op_T``:     ``sum_k z_k (x) e_k  ->  sum_k E_k(z_k) - tau(z_k)``
* ``op_Tstar``: ``w  ->  sum_k (E_k(w) - tau(w)) (x) e_k``
* ``op_S``:     ``z  ->  sum_k (E_k(z) - tau(z)) (x) e_{k,0}``
* ``op_Sstar``: ``sum_k z_k (x) e_{k,0}  ->  sum_k E_k(z_k) - tau(z_k)``
* ``op_L``:     ``sum_{k,l} z_{k,l} (x) e_{k,l}  ->  sum_k z_{k,0} (x) e_k``

Columns in ``M (x) L(l_2)`` are kept as a list of entries; the only thing
ever needed from them is ``|z| = (sum_k z_k* z_k)^{1/2} (x) e_{0,0}``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from . import eigen
from .algebra import (
    AlgElement,
    TracialAlgebra,
    functional_calculus,
    identity,
    trace,
    trace_product,
    zero,
)
from .independence import DirectSumElement, TensorFamily, conditional_expectation
from .rearrangement import StepFunction, singular_value_function

__all__ = [
    "ColumnElement",
    "BlockMatrix",
    "op_T",
    "op_Tstar",
    "op_S",
    "op_Sstar",
    "op_L",
    "square_function",
    "square_mu",
    "mu_of_sqrt",
]


def _sum(elements: Sequence[AlgElement], algebra: TracialAlgebra) -> AlgElement:
    return reduce(lambda u, v: u + v, elements, zero(algebra))


def _gram(elements: Sequence[AlgElement], adjoint: bool = False) -> AlgElement:
    """``sum_k x_k* x_k`` (or ``sum_k x_k x_k*``), symmetrised to be exactly Hermitian."""
    alg = elements[0].algebra
    blocks = []
    for i in range(len(alg.blocks)):
        acc = np.zeros((alg.dims[i], alg.dims[i]), dtype=np.complex128)
        for x in elements:
            b = x.blocks[i]
            acc += (b @ b.conj().T) if adjoint else (b.conj().T @ b)
        blocks.append((acc + acc.conj().T) / 2)
    return AlgElement(alg, tuple(blocks), True)


def mu_of_sqrt(positive: AlgElement) -> StepFunction:
    """``mu(a^{1/2})`` for a positive element ``a``."""
    vals, lens = [], []
    for b, (_, w) in zip(positive.blocks, positive.algebra.blocks):
        ev = eigen.eigvalsh((b + b.conj().T) / 2)
        vals.append(np.sqrt(np.clip(ev, 0.0, None)))
        lens.append(np.full(ev.shape, w))
    return StepFunction.from_pairs(np.concatenate(vals), np.concatenate(lens))


def square_mu(x_list: Sequence[AlgElement], adjoint: bool = False) -> StepFunction:
    """``mu`` of :func:`square_function` from a single eigendecomposition."""
    return mu_of_sqrt(_gram(x_list, adjoint))


def square_function(x_list: Sequence[AlgElement], adjoint: bool = False) -> AlgElement:
    """``(sum_k x_k* x_k)^{1/2}``, or ``(sum_k x_k x_k*)^{1/2}`` with ``adjoint=True``.

    For self-adjoint ``x_k`` both reduce to ``(sum_k x_k^2)^{1/2}``.
    """
    if not x_list:
        raise ValueError("square function of an empty list")
    alg = x_list[0].algebra
    if any(x.algebra != alg for x in x_list):
        raise ValueError("all elements must share one algebra")
    return functional_calculus(_gram(x_list, adjoint), lambda w: np.sqrt(np.clip(w, 0.0, None)))


@dataclass(frozen=True, eq=False)
class ColumnElement:
    """``sum_k z_k (x) e_{k,0}`` in ``M (x) L(l_2)`` with trace ``tau (x) Tr``."""

    entries: tuple[AlgElement, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError("a column needs at least one entry")
        alg = self.entries[0].algebra
        if any(e.algebra != alg for e in self.entries):
            raise ValueError("all column entries must share one algebra")

    @property
    def algebra(self) -> TracialAlgebra:
        return self.entries[0].algebra

    def __len__(self):
        return len(self.entries)

    def modulus(self) -> AlgElement:
        """``(sum_k |z_k|^2)^{1/2}``, the (0,0) corner of ``|z|``."""
        return square_function(self.entries)

    def mu(self) -> StepFunction:
        return mu_of_sqrt(_gram(self.entries))

    def pairing_with(self, row: Sequence[AlgElement]) -> complex:
        """``(tau (x) Tr)(z r)`` against the row ``r = sum_k r_k (x) e_{0,k}``: ``sum_k tau(z_k r_k)``."""
        if len(row) != len(self.entries):
            raise ValueError("row and column have different lengths")
        return sum(trace_product(z, r) for z, r in zip(self.entries, row))

    def to_matrix(self) -> "BlockMatrix":
        return BlockMatrix(tuple((e,) for e in self.entries))


@dataclass(frozen=True, eq=False)
class BlockMatrix:
    """Finite matrix ``sum_{k,l} z_{k,l} (x) e_{k,l}`` over a common algebra.

    ``entries[k][l]`` may be ``None`` for a zero entry.
    """

    entries: tuple[tuple[AlgElement | None, ...], ...]

    def __post_init__(self):
        rows = tuple(tuple(r) for r in self.entries)
        if not rows or not rows[0]:
            raise ValueError("empty block matrix")
        if len({len(r) for r in rows}) != 1:
            raise ValueError("rows of a block matrix must have equal length")
        present = [e for r in rows for e in r if e is not None]
        if not present:
            raise ValueError("block matrix needs at least one nonzero entry to fix its algebra")
        alg = present[0].algebra
        if any(e.algebra != alg for e in present):
            raise ValueError("all entries must share one algebra")
        object.__setattr__(self, "entries", rows)

    @property
    def algebra(self) -> TracialAlgebra:
        return next(e for r in self.entries for e in r if e is not None).algebra

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.entries), len(self.entries[0])

    def entry(self, k: int, l: int) -> AlgElement:
        e = self.entries[k][l]
        return zero(self.algebra) if e is None else e

    def assemble(self) -> AlgElement:
        """The element of ``M (x) M_N`` (``N = max(rows, cols)``, zero padded).

        Block ``i`` of ``M`` with weight ``w_i`` becomes a block of size
        ``N d_i`` with the same weight, which is the trace ``tau (x) Tr``.
        """
        R, C = self.shape
        N = max(R, C)
        alg = self.algebra
        big_alg = TracialAlgebra(tuple((d * N, w) for d, w in alg.blocks))
        blocks = []
        for i, d in enumerate(alg.dims):
            big = np.zeros((N * d, N * d), dtype=np.complex128)
            for k in range(R):
                for l in range(C):
                    e = self.entries[k][l]
                    if e is not None:
                        big[k * d : (k + 1) * d, l * d : (l + 1) * d] = e.blocks[i]
            blocks.append(big)
        return AlgElement(big_alg, tuple(blocks), False)

    def mu(self) -> StepFunction:
        return singular_value_function(self.assemble())

    def first_column(self) -> ColumnElement:
        return ColumnElement(tuple(self.entry(k, 0) for k in range(self.shape[0])))


def _check_family_element(family: TensorFamily, y: AlgElement) -> None:
    if y.algebra != family.ambient:
        raise ValueError("element is not in the family's ambient algebra")


def _centered_expectation(family: TensorFamily, k: int, y: AlgElement) -> AlgElement:
    return conditional_expectation(family, k, y) - trace(y) * identity(family.ambient)


def op_T(family: TensorFamily, z: DirectSumElement) -> AlgElement:
    """``T(sum_k z_k (x) e_k) = sum_k E_k(z_k) - tau(z_k)``."""
    if len(z) != family.K:
        raise ValueError(f"direct sum has {len(z)} summands, family has {family.K} factors")
    for s in z.summands:
        _check_family_element(family, s)
    return _sum([_centered_expectation(family, k, s) for k, s in enumerate(z.summands)], family.ambient)


def op_Tstar(family: TensorFamily, w: AlgElement) -> DirectSumElement:
    """``T*(w) = sum_k (E_k(w) - tau(w)) (x) e_k``."""
    _check_family_element(family, w)
    return DirectSumElement(tuple(_centered_expectation(family, k, w) for k in range(family.K)))


def op_S(family: TensorFamily, z: AlgElement) -> ColumnElement:
    """``S(z) = sum_k (E_k(z) - tau(z)) (x) e_{k,0}``."""
    _check_family_element(family, z)
    return ColumnElement(tuple(_centered_expectation(family, k, z) for k in range(family.K)))


def op_Sstar(family: TensorFamily, z: ColumnElement) -> AlgElement:
    """``S*(sum_k z_k (x) e_{k,0}) = sum_k E_k(z_k) - tau(z_k)``."""
    if len(z) != family.K:
        raise ValueError(f"column has {len(z)} entries, family has {family.K} factors")
    for e in z.entries:
        _check_family_element(family, e)
    return _sum([_centered_expectation(family, k, e) for k, e in enumerate(z.entries)], family.ambient)


def op_L(z: BlockMatrix | ColumnElement) -> DirectSumElement:
    """``L(z) = sum_k z_{k,0} (x) e_k``: the first column laid out disjointly."""
    column = z if isinstance(z, ColumnElement) else z.first_column()
    return DirectSumElement(tuple(column.entries))
