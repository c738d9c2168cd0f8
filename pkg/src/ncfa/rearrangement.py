"""Singular value functions as exact decreasing step functions.

For an element of a finite tracial algebra, ``mu(t, x)`` is a decreasing
step function: each eigenvalue of ``|x|`` in block ``i`` contributes an
interval of length ``w_i``. Storing the steps exactly means every norm
below is a finite sum, with no quadrature error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .algebra import AlgElement, singular_values

__all__ = [
    "StepFunction",
    "singular_value_function",
    "mu_of_direct_sum",
    "restrict",
    "integrate_power",
]

MERGE_RTOL = 1e-12


@dataclass(frozen=True, eq=False)
class StepFunction:
    """``t -> values[j]`` on the j-th consecutive interval of length ``lengths[j]``.

    Values are strictly decreasing and positive, lengths positive and finite;
    the function vanishes past the total length. The zero function has no
    steps. Use :meth:`from_pairs` to build one from unsorted data.
    """

    values: np.ndarray
    lengths: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        l = np.asarray(self.lengths, dtype=float).copy()
        if v.shape != l.shape or v.ndim != 1:
            raise ValueError("values and lengths must be 1-d arrays of equal length")
        if v.size:
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ValueError("step values must be positive and finite")
            if np.any(np.diff(v) >= 0):
                raise ValueError("step values must be strictly decreasing")
            if np.any(l <= 0) or not np.all(np.isfinite(l)):
                raise ValueError("step lengths must be positive and finite")
        v.flags.writeable = False
        l.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "lengths", l)

    @classmethod
    def zero(cls) -> "StepFunction":
        return cls(np.zeros(0), np.zeros(0))

    @classmethod
    def from_pairs(cls, values: Iterable[float], lengths: Iterable[float]) -> "StepFunction":
        """Normalise arbitrary ``(value, length)`` data.

        Sorts by value, drops zero values and empty intervals, and merges
        values within ``1e-12 (1 + max value)`` into a single step whose
        value is the length-weighted mean.
        """
        v = np.abs(np.asarray(list(values) if not isinstance(values, np.ndarray) else values, dtype=float)).ravel()
        l = np.asarray(list(lengths) if not isinstance(lengths, np.ndarray) else lengths, dtype=float).ravel()
        if v.shape != l.shape:
            raise ValueError("values and lengths differ in size")
        if v.size == 0:
            return cls.zero()
        if np.any(l < 0):
            raise ValueError("lengths must be nonnegative")
        tol = MERGE_RTOL * (1.0 + v.max())
        keep = (v > tol) & (l > 0)
        v, l = v[keep], l[keep]
        if v.size == 0:
            return cls.zero()
        order = np.argsort(-v, kind="stable")
        v, l = v[order], l[order]
        out_v, out_l = [], []
        head = v[0]
        acc_vl, acc_l = 0.0, 0.0
        for vi, li in zip(v, l):
            if head - vi > tol:
                out_v.append(acc_vl / acc_l)
                out_l.append(acc_l)
                head, acc_vl, acc_l = vi, 0.0, 0.0
            acc_vl += vi * li
            acc_l += li
        out_v.append(acc_vl / acc_l)
        out_l.append(acc_l)
        return cls(np.array(out_v), np.array(out_l))

    @property
    def is_zero(self) -> bool:
        return self.values.size == 0

    @property
    def total_length(self) -> float:
        return float(self.lengths.sum())

    @property
    def top(self) -> float:
        return float(self.values[0]) if self.values.size else 0.0

    def breakpoints(self) -> np.ndarray:
        """Right endpoints of the steps, starting with 0."""
        return np.concatenate([[0.0], np.cumsum(self.lengths)])

    def __call__(self, t):
        """Evaluate at ``t >= 0`` (right-continuous)."""
        t = np.asarray(t, dtype=float)
        edges = np.cumsum(self.lengths)
        idx = np.searchsorted(edges, t, side="right")
        padded = np.concatenate([self.values, [0.0]])
        return padded[idx]

    def partial_integral(self, t):
        """``int_0^t mu(s) ds``, piecewise linear and concave in t."""
        t = np.asarray(t, dtype=float)
        edges = self.breakpoints()
        cum = np.concatenate([[0.0], np.cumsum(self.values * self.lengths)])
        idx = np.clip(np.searchsorted(edges, t, side="right") - 1, 0, len(edges) - 1)
        slope = np.concatenate([self.values, [0.0]])[idx]
        return cum[idx] + slope * (t - edges[idx])

    def scaled(self, alpha: float) -> "StepFunction":
        """``alpha * mu`` for real alpha (uses |alpha|)."""
        a = abs(float(alpha))
        if a == 0.0 or self.is_zero:
            return StepFunction.zero()
        return StepFunction(self.values * a, self.lengths)

    def dilated(self, factor: float) -> "StepFunction":
        """``t -> mu(t / factor)``: stretches lengths by ``factor``."""
        return StepFunction(self.values, self.lengths * float(factor))

    def power(self, p: float) -> "StepFunction":
        """``mu ** p``; equals mu(|x|^p) for p > 0."""
        if self.is_zero:
            return self
        return StepFunction.from_pairs(self.values**p, self.lengths)

    def to_json(self) -> list[dict]:
        return [{"v": float(v), "len": float(l)} for v, l in zip(self.values, self.lengths)]

    @classmethod
    def from_json(cls, doc) -> "StepFunction":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        try:
            values = [float(s["v"]) for s in doc]
            lengths = [float(s["len"]) for s in doc]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed step function document: {exc}") from exc
        return cls(np.array(values), np.array(lengths))

    def isclose(self, other: "StepFunction", atol: float = 1e-10) -> bool:
        """Sup-distance at most ``atol`` and same support up to ``atol``."""
        edges = np.union1d(self.breakpoints(), other.breakpoints())
        mids = (edges[:-1] + edges[1:]) / 2 if edges.size > 1 else np.zeros(0)
        # lengths may disagree slightly; skip intervals shorter than atol
        wide = np.diff(edges) > atol
        diff = np.abs(self(mids[wide]) - other(mids[wide])) if mids.size else np.zeros(0)
        return bool(diff.size == 0 or diff.max() <= atol) and abs(
            self.total_length - other.total_length
        ) <= atol * (1 + self.total_length)

    def __repr__(self):
        steps = ", ".join(f"({v:.6g}, {l:.6g})" for v, l in zip(self.values, self.lengths))
        return f"StepFunction([{steps}])"


def singular_value_function(x: AlgElement) -> StepFunction:
    """``mu(x)`` as a step function: eigenvalues of ``|x|`` with their block weights."""
    vals, lens = [], []
    for sv, (_, w) in zip(singular_values(x), x.algebra.blocks):
        vals.append(sv)
        lens.append(np.full(sv.shape, w))
    if not vals:
        return StepFunction.zero()
    return StepFunction.from_pairs(np.concatenate(vals), np.concatenate(lens))


def mu_of_direct_sum(parts: Sequence[StepFunction], weights: Sequence[float] | None = None) -> StepFunction:
    """Decreasing rearrangement of the disjoint sum of ``parts``.

    ``weights`` rescales the interval lengths of each part (the mass of the
    atom it sits on); by default every atom has mass one, which is the
    counting trace of ``l_inf``.
    """
    if not parts:
        raise ValueError("direct sum of an empty list")
    if weights is None:
        weights = [1.0] * len(parts)
    if len(weights) != len(parts):
        raise ValueError("one weight per part")
    vals = np.concatenate([p.values for p in parts])
    lens = np.concatenate([p.lengths * w for p, w in zip(parts, weights)])
    return StepFunction.from_pairs(vals, lens)


def restrict(mu: StepFunction, a: float, b: float = math.inf) -> StepFunction:
    """``t -> mu(a + t)`` on ``(0, b - a)``, zero afterwards."""
    if not a < b:
        raise ValueError(f"restrict needs a < b, got a={a}, b={b}")
    if a < 0:
        raise ValueError("restrict needs a >= 0")
    if mu.is_zero:
        return mu
    right = np.cumsum(mu.lengths)
    left = right - mu.lengths
    overlap = np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None)
    keep = overlap > 0
    if not keep.any():
        return StepFunction.zero()
    return StepFunction(mu.values[keep], overlap[keep])


def integrate_power(mu: StepFunction, p: float, a: float = 0.0, b: float = math.inf) -> float:
    """``int_a^b mu(t)^p dt``, summed exactly over the steps."""
    if not a < b:
        raise ValueError(f"integrate_power needs a < b, got a={a}, b={b}")
    if mu.is_zero:
        return 0.0
    right = np.cumsum(mu.lengths)
    left = right - mu.lengths
    overlap = np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None)
    return float(np.sum(mu.values**p * overlap))
