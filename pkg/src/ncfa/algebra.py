"""Finite-dimensional tracial algebras.

A :class:`TracialAlgebra` is a finite direct sum of full matrix blocks
``M_{d_1} + ... + M_{d_m}`` with trace ``tau(x) = sum_i w_i Tr(x_i)``. This
covers ``(M_n, Tr/n)``, discretised ``L_inf(0,1)`` (all blocks of size one),
and ``M (x) l_inf`` (repeated blocks).

Elements are immutable; every operation returns a new :class:`AlgElement`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import eigen

__all__ = [
    "AlgebraMismatchError",
    "NotHermitianError",
    "TracialAlgebra",
    "AlgElement",
    "matrix_algebra",
    "diagonal_algebra",
    "identity",
    "zero",
    "matrix_unit",
    "element",
    "trace",
    "trace_product",
    "adjoint",
    "add",
    "scale",
    "multiply",
    "functional_calculus",
    "abs_op",
    "spectral_projection_above",
    "singular_values",
    "element_from_json",
    "element_to_json",
]

HERMITIAN_ATOL = 1e-10
MASS_RTOL = 1e-12


class AlgebraMismatchError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class TracialAlgebra:
    """Direct sum of matrix blocks; ``blocks`` holds ``(dim, weight)`` pairs."""

    blocks: tuple[tuple[int, float], ...]
    total_mass: float = field(init=False)

    def __post_init__(self):
        blocks = tuple((int(d), float(w)) for d, w in self.blocks)
        if not blocks:
            raise ValueError("a tracial algebra needs at least one block")
        for d, w in blocks:
            if d < 1:
                raise ValueError(f"block dimension must be >= 1, got {d}")
            if not (w > 0 and np.isfinite(w)):
                raise ValueError(f"block weight must be positive and finite, got {w}")
        object.__setattr__(self, "blocks", blocks)
        object.__setattr__(self, "total_mass", float(sum(d * w for d, w in blocks)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for d, _ in self.blocks)

    @property
    def weights(self) -> tuple[float, ...]:
        return tuple(w for _, w in self.blocks)

    @property
    def is_probability(self) -> bool:
        return abs(self.total_mass - 1.0) <= MASS_RTOL

    @property
    def size(self) -> int:
        return sum(self.dims)


def matrix_algebra(n: int, normalized: bool = True) -> TracialAlgebra:
    """``(M_n, Tr/n)``, or ``(M_n, Tr)`` when ``normalized`` is false."""
    return TracialAlgebra(((n, 1.0 / n if normalized else 1.0),))


def diagonal_algebra(masses: Sequence[float]) -> TracialAlgebra:
    """Commutative algebra of functions on len(masses) atoms."""
    return TracialAlgebra(tuple((1, m) for m in masses))


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _is_hermitian_block(b: np.ndarray, atol: float = HERMITIAN_ATOL) -> bool:
    return bool(np.all(np.abs(b - b.conj().T) <= atol))


@dataclass(frozen=True, eq=False)
class AlgElement:
    """Block-diagonal element of a :class:`TracialAlgebra`.

    ``hermitian`` is conservative metadata: when true every block is Hermitian
    within ``HERMITIAN_ATOL``. Operations that need self-adjointness re-check
    at run time instead of trusting it.
    """

    algebra: TracialAlgebra
    blocks: tuple[np.ndarray, ...]
    hermitian: bool = False

    def __post_init__(self):
        if len(self.blocks) != len(self.algebra.blocks):
            raise ValueError(
                f"expected {len(self.algebra.blocks)} blocks, got {len(self.blocks)}"
            )
        frozen = []
        for b, (d, _) in zip(self.blocks, self.algebra.blocks):
            b = np.array(b, dtype=np.complex128)
            if b.shape != (d, d):
                raise ValueError(f"block of shape {b.shape} does not match dimension {d}")
            frozen.append(_freeze(b))
        object.__setattr__(self, "blocks", tuple(frozen))
        if self.hermitian and not all(_is_hermitian_block(b) for b in frozen):
            raise NotHermitianError("blocks flagged hermitian are not self-adjoint")

    # arithmetic sugar
    def __add__(self, other):
        if isinstance(other, AlgElement):
            return add(self, other)
        return add(self, scale(other, identity(self.algebra)))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-1.0) * other

    def __rsub__(self, other):
        return (-1.0) * self + other

    def __neg__(self):
        return scale(-1.0, self)

    def __mul__(self, alpha):
        return scale(alpha, self)

    __rmul__ = __mul__

    def __matmul__(self, other):
        return multiply(self, other)

    @property
    def H(self) -> "AlgElement":
        return adjoint(self)

    def check_hermitian(self, atol: float = HERMITIAN_ATOL) -> bool:
        return all(_is_hermitian_block(b, atol) for b in self.blocks)

    def opnorm(self) -> float:
        """Operator norm (largest singular value over all blocks)."""
        return max(float(np.linalg.norm(b, 2)) if b.size else 0.0 for b in self.blocks)

    def to_dense(self) -> np.ndarray:
        """The block-diagonal matrix, mostly for debugging and small tests."""
        n = self.algebra.size
        out = np.zeros((n, n), dtype=np.complex128)
        i = 0
        for b in self.blocks:
            d = b.shape[0]
            out[i : i + d, i : i + d] = b
            i += d
        return out

    def allclose(self, other: "AlgElement", atol: float = 1e-10) -> bool:
        _same_algebra(self, other)
        return all(np.allclose(a, b, rtol=0.0, atol=atol) for a, b in zip(self.blocks, other.blocks))


def element(algebra: TracialAlgebra, blocks, hermitian: bool | None = None) -> AlgElement:
    """Build an element; ``hermitian=None`` detects self-adjointness."""
    if isinstance(blocks, np.ndarray) and len(algebra.blocks) == 1 and blocks.ndim == 2:
        blocks = (blocks,)
    blocks = tuple(np.array(b, dtype=np.complex128) for b in blocks)
    if hermitian is None:
        hermitian = all(_is_hermitian_block(b) for b in blocks)
    return AlgElement(algebra, blocks, hermitian)


def identity(algebra: TracialAlgebra) -> AlgElement:
    return AlgElement(algebra, tuple(np.eye(d) for d in algebra.dims), True)


def zero(algebra: TracialAlgebra) -> AlgElement:
    return AlgElement(algebra, tuple(np.zeros((d, d)) for d in algebra.dims), True)


def matrix_unit(algebra: TracialAlgebra, k: int, l: int, block: int = 0) -> AlgElement:
    """The matrix unit ``e_{k,l}`` placed in one block."""
    blocks = [np.zeros((d, d)) for d in algebra.dims]
    blocks[block][k, l] = 1.0
    return AlgElement(algebra, tuple(blocks), k == l)


def _same_algebra(x: AlgElement, y: AlgElement) -> None:
    if x.algebra != y.algebra:
        raise AlgebraMismatchError("elements belong to different algebras")


def trace(x: AlgElement) -> complex:
    """Weighted trace ``sum_i w_i Tr(x_i)``."""
    return complex(sum(w * np.trace(b) for (_, w), b in zip(x.algebra.blocks, x.blocks)))


def trace_product(x: AlgElement, y: AlgElement) -> complex:
    """``tau(x y)`` without forming the product."""
    _same_algebra(x, y)
    return complex(
        sum(w * np.sum(a * b.T) for (_, w), a, b in zip(x.algebra.blocks, x.blocks, y.blocks))
    )


def adjoint(x: AlgElement) -> AlgElement:
    return AlgElement(x.algebra, tuple(b.conj().T for b in x.blocks), x.hermitian)


def add(x: AlgElement, y: AlgElement) -> AlgElement:
    _same_algebra(x, y)
    return AlgElement(
        x.algebra, tuple(a + b for a, b in zip(x.blocks, y.blocks)), x.hermitian and y.hermitian
    )


def scale(alpha: complex, x: AlgElement) -> AlgElement:
    alpha = complex(alpha)
    return AlgElement(
        x.algebra, tuple(alpha * b for b in x.blocks), x.hermitian and alpha.imag == 0.0
    )


def multiply(x: AlgElement, y: AlgElement) -> AlgElement:
    _same_algebra(x, y)
    return AlgElement(x.algebra, tuple(a @ b for a, b in zip(x.blocks, y.blocks)), False)


def _require_hermitian(x: AlgElement) -> None:
    if not x.check_hermitian():
        raise NotHermitianError("operation requires a self-adjoint element")


def functional_calculus(x: AlgElement, f: Callable[[np.ndarray], np.ndarray]) -> AlgElement:
    """``f(x)`` for self-adjoint ``x``, computed blockwise as ``U f(D) U*``.

    ``f`` receives a real numpy array of eigenvalues and must be vectorised.
    """
    _require_hermitian(x)
    out = []
    real_valued = True
    for b in x.blocks:
        w, v = eigen.eigh((b + b.conj().T) / 2)
        fw = np.asarray(f(w))
        if np.iscomplexobj(fw):
            if np.any(fw.imag != 0):
                real_valued = False
            else:
                fw = fw.real
        out.append((v * fw) @ v.conj().T)
    if real_valued:
        out = [(b + b.conj().T) / 2 for b in out]
    return AlgElement(x.algebra, tuple(out), real_valued)


def abs_op(x: AlgElement) -> AlgElement:
    """``|x| = (x* x)^{1/2}``."""
    if x.check_hermitian():
        return functional_calculus(x, np.abs)
    xx = multiply(adjoint(x), x)
    xx = AlgElement(xx.algebra, tuple((b + b.conj().T) / 2 for b in xx.blocks), True)
    return functional_calculus(xx, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def _tie_tolerance(x: AlgElement) -> float:
    return 1e-12 * (1.0 + x.opnorm())


def spectral_projection_above(x: AlgElement, s: float) -> AlgElement:
    """Projection onto the eigenspaces of ``|x|`` with eigenvalue strictly above ``s``.

    Eigenvalues within ``1e-12 (1 + ||x||)`` of ``s`` count as equal to ``s``
    and are excluded.
    """
    if s < 0:
        raise ValueError("threshold must be nonnegative")
    tol = _tie_tolerance(x)
    a = x if x.check_hermitian() else abs_op(x)
    blocks = []
    for b in a.blocks:
        w, v = eigen.eigh((b + b.conj().T) / 2)
        keep = np.abs(w) > s + tol
        vk = v[:, keep]
        blocks.append(vk @ vk.conj().T)
    return AlgElement(x.algebra, tuple(blocks), True)


def singular_values(x: AlgElement) -> list[np.ndarray]:
    """Eigenvalues of ``|x|`` per block (unsorted within each block).

    Self-adjoint blocks use ``|eig(x)|``. Other blocks use the Hermitian
    dilation ``[[0, x], [x*, 0]]``, whose spectrum is ``+-`` the singular
    values, so small singular values keep absolute accuracy instead of
    passing through a square root.
    """
    out = []
    for b in x.blocks:
        d = b.shape[0]
        if _is_hermitian_block(b, 1e-13 * (1.0 + np.abs(b).max())):
            out.append(np.abs(eigen.eigvalsh((b + b.conj().T) / 2)))
        else:
            dil = np.zeros((2 * d, 2 * d), dtype=np.complex128)
            dil[:d, d:] = b
            dil[d:, :d] = b.conj().T
            w = eigen.eigvalsh(dil)
            out.append(np.clip(w[d:], 0.0, None))
    return out


def element_to_json(x: AlgElement) -> dict:
    """Serialise to ``{"blocks": [{"dim", "weight", "entries"}]}``; entries are ``[re, im]`` pairs."""
    return {
        "blocks": [
            {
                "dim": d,
                "weight": w,
                "entries": [[[float(z.real), float(z.imag)] for z in row] for row in b],
            }
            for (d, w), b in zip(x.algebra.blocks, x.blocks)
        ]
    }


def element_from_json(doc) -> AlgElement:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    try:
        specs = doc["blocks"]
        algebra = TracialAlgebra(tuple((b["dim"], b["weight"]) for b in specs))
        blocks = []
        for b in specs:
            entries = np.asarray(b["entries"], dtype=float)
            if entries.shape != (b["dim"], b["dim"], 2):
                raise ValueError(
                    f"entries of a dim-{b['dim']} block must have shape "
                    f"({b['dim']}, {b['dim']}, 2), got {entries.shape}"
                )
            blocks.append(entries[..., 0] + 1j * entries[..., 1])
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed matrix document: {exc}") from exc
    return element(algebra, blocks)
