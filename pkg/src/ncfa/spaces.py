"""Symmetric norms and Orlicz moments of singular value functions.

All functions take a :class:`~ncfa.rearrangement.StepFunction` ``mu`` and
work on ``(0, inf)`` with Lebesgue measure, so the noncommutative norm of
``x`` is ``norm(spec, singular_value_function(x))``.

The ``L_p + L_q`` norm is the Holmstedt expression

    (int_0^1 mu^p)^{1/p} + (int_1^inf mu^q)^{1/q},

which agrees with the true K-functional norm only up to constants. Reports
that depend on it carry a surrogate flag.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .rearrangement import StepFunction, integrate_power, restrict

__all__ = [
    "OrliczFunction",
    "OrliczValidationError",
    "LuxemburgBracketError",
    "make_Mpq",
    "power_function",
    "tlog_function",
    "parse_orlicz",
    "Lp",
    "Cap",
    "Sum",
    "Orlicz",
    "ZE",
    "NormSpec",
    "NormSpecError",
    "parse_norm_spec",
    "format_norm_spec",
    "split_specs",
    "uses_surrogate",
    "norm",
    "luxemburg_norm",
    "phi_moment",
]

GRID_POINTS = 256
GRID_SLACK = 1e-9
LUX_BRACKET = 1e12
LUX_RTOL = 1e-10
LUX_MAX_ITER = 200


class OrliczValidationError(ValueError):
    pass


class LuxemburgBracketError(RuntimeError):
    pass


class NormSpecError(ValueError):
    pass


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _grid() -> np.ndarray:
    return np.logspace(-3, 3, GRID_POINTS)


def _midpoint_violation(g: Callable, s: np.ndarray, convex: bool) -> float:
    """Largest relative violation of midpoint convexity (or concavity) of g on s."""
    worst = 0.0
    for k in (1, 2, 4, 8, 16, 32, 64, 128):
        if k >= s.size:
            break
        a, b = s[:-k], s[k:]
        ga, gb, gm = g(a), g(b), g((a + b) / 2)
        avg = (ga + gb) / 2
        gap = (gm - avg) if convex else (avg - gm)
        worst = max(worst, float(np.max(gap / (1.0 + np.abs(avg)))))
    return worst


@dataclass(frozen=True, eq=False)
class OrliczFunction:
    """A vectorised Orlicz function with declared convexity exponents.

    ``p_convex`` means ``t -> Phi(t**(1/p))`` is convex, ``q_concave`` that
    ``t -> Phi(t**(1/q))`` is concave (``q = inf`` declares nothing). Both are
    checked on a log-spaced grid at construction.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    p_convex: float
    q_concave: float
    label: str
    validate: bool = True

    def __post_init__(self):
        if not self.p_convex >= 1:
            raise OrliczValidationError(f"p_convex must be >= 1, got {self.p_convex}")
        if not self.q_concave >= self.p_convex:
            raise OrliczValidationError("q_concave must be >= p_convex")
        if self.validate:
            self.check()

    def __call__(self, t):
        return self.evaluate(np.asarray(t, dtype=float))

    def check(self) -> None:
        t = _grid()
        if abs(float(self(np.array([0.0]))[0])) > 0.0:
            raise OrliczValidationError(f"{self.label}: Phi(0) must be 0")
        vals = self(t)
        if np.any(np.diff(vals) < -GRID_SLACK * (1.0 + np.abs(vals[1:]))):
            raise OrliczValidationError(f"{self.label}: not nondecreasing")
        p, q = self.p_convex, self.q_concave
        worst = _midpoint_violation(lambda s: self(s ** (1.0 / p)), t**p, convex=True)
        if worst > GRID_SLACK:
            raise OrliczValidationError(f"{self.label}: not {p}-convex (violation {worst:.2e})")
        if math.isfinite(q):
            worst = _midpoint_violation(lambda s: self(s ** (1.0 / q)), t**q, convex=False)
            if worst > GRID_SLACK:
                raise OrliczValidationError(f"{self.label}: not {q}-concave (violation {worst:.2e})")


def make_Mpq(p: float, q: float) -> OrliczFunction:
    """``M_{p,q}(t) = p t^q`` on ``[0, 1)`` and ``q t^p + p - q`` on ``[1, inf)``.

    Both branches equal ``p`` at ``t = 1``. The function is p-convex and
    q-concave and sits between ``p min(t^p, t^q)`` and ``q min(t^p, t^q)``.
    """
    p, q = float(p), float(q)
    if not (1.0 <= p <= q < math.inf):
        raise OrliczValidationError(f"M_(p,q) needs 1 <= p <= q < inf, got p={p}, q={q}")

    def mpq(t):
        t = np.abs(t)
        small = t < 1.0
        # evaluate each branch only where it applies to avoid overflow noise
        out = np.empty_like(t, dtype=float)
        out[small] = p * t[small] ** q
        out[~small] = q * t[~small] ** p + p - q
        return out

    return OrliczFunction(mpq, p, q, f"M:{_fmt(p)},{_fmt(q)}")


def power_function(p: float) -> OrliczFunction:
    """``t^p``; p-convex and p-concave."""
    p = float(p)
    return OrliczFunction(lambda t: np.abs(t) ** p, p, p, f"pow:{_fmt(p)}")


def tlog_function(p: float, q: float) -> OrliczFunction:
    """``t^p log(1 + t^q)``: p-convex and (p+q)-concave for p > 1, q > 0."""
    p, q = float(p), float(q)
    return OrliczFunction(
        lambda t: np.abs(t) ** p * np.log1p(np.abs(t) ** q), p, p + q, f"tlog:{_fmt(p)},{_fmt(q)}"
    )


_ORLICZ_FACTORIES = {"M": (make_Mpq, 2), "pow": (power_function, 1), "tlog": (tlog_function, 2)}


def parse_orlicz(text: str) -> OrliczFunction:
    """Parse ``"M:2,4"``, ``"pow:2"`` or ``"tlog:2,1"``."""
    name, _, args = text.strip().partition(":")
    if name not in _ORLICZ_FACTORIES:
        raise NormSpecError(f"unknown Orlicz family {name!r} in {text!r}")
    factory, arity = _ORLICZ_FACTORIES[name]
    try:
        values = [float(a) for a in args.split(",")] if args else []
    except ValueError as exc:
        raise NormSpecError(f"bad Orlicz parameters in {text!r}") from exc
    if len(values) != arity:
        raise NormSpecError(f"{name} takes {arity} parameter(s), got {len(values)}")
    try:
        return factory(*values)
    except OrliczValidationError as exc:
        raise NormSpecError(str(exc)) from exc


# norm specifications ------------------------------------------------------


def _check_exponent(x: float) -> float:
    x = float(x)
    if not x >= 1.0:
        raise NormSpecError(f"exponents must lie in [1, inf], got {x}")
    return x


@dataclass(frozen=True)
class Lp:
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))


@dataclass(frozen=True)
class Cap:
    """``L_p cap L_q`` with norm ``max(||f||_p, ||f||_q)``."""

    p: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))
        object.__setattr__(self, "q", _check_exponent(self.q))
        if self.p > self.q:
            raise NormSpecError("cap(p, q) needs p <= q")


@dataclass(frozen=True)
class Sum:
    """``L_p + L_q`` through the Holmstedt expression."""

    p: float
    q: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))
        object.__setattr__(self, "q", _check_exponent(self.q))
        if self.p > self.q:
            raise NormSpecError("sum(p, q) needs p <= q")
        if math.isinf(self.p):
            raise NormSpecError("sum(p, q) needs finite p")


@dataclass(frozen=True)
class Orlicz:
    phi: OrliczFunction

    def __eq__(self, other):
        return isinstance(other, Orlicz) and other.phi.label == self.phi.label

    def __hash__(self):
        return hash(("orlicz", self.phi.label))


@dataclass(frozen=True)
class ZE:
    """``Z_E^p``: ``||mu chi_(0,1)||_E + ||f||_{L_1 + L_p}``."""

    inner: "NormSpec"
    p: float

    def __post_init__(self):
        object.__setattr__(self, "p", _check_exponent(self.p))


NormSpec = Union[Lp, Cap, Sum, Orlicz, ZE]


def format_norm_spec(spec: NormSpec) -> str:
    if isinstance(spec, Lp):
        return f"Lp({_fmt(spec.p)})"
    if isinstance(spec, Cap):
        return f"cap({_fmt(spec.p)},{_fmt(spec.q)})"
    if isinstance(spec, Sum):
        return f"sum({_fmt(spec.p)},{_fmt(spec.q)})"
    if isinstance(spec, Orlicz):
        return f"orlicz({spec.phi.label})"
    if isinstance(spec, ZE):
        return f"ZE{_fmt(spec.p)}({format_norm_spec(spec.inner)})"
    raise NormSpecError(f"not a norm spec: {spec!r}")


_NUM = r"(?:inf|[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)"
_RE_LP = re.compile(rf"^Lp\(\s*({_NUM})\s*\)$")
_RE_PAIR = re.compile(rf"^(cap|sum)\(\s*({_NUM})\s*,\s*({_NUM})\s*\)$")
_RE_ORLICZ = re.compile(r"^orlicz\((.+)\)$")
_RE_ZE = re.compile(rf"^ZE({_NUM})\((.+)\)$")


def parse_norm_spec(text: str) -> NormSpec:
    """Parse the compact grammar: ``Lp(2)``, ``cap(1,4)``, ``sum(1,2)``,
    ``orlicz(M:2,4)``, ``ZE2(Lp(3))``."""
    s = text.strip()
    if m := _RE_LP.match(s):
        return Lp(float(m.group(1)))
    if m := _RE_PAIR.match(s):
        cls = Cap if m.group(1) == "cap" else Sum
        return cls(float(m.group(2)), float(m.group(3)))
    if m := _RE_ORLICZ.match(s):
        return Orlicz(parse_orlicz(m.group(1)))
    if m := _RE_ZE.match(s):
        return ZE(parse_norm_spec(m.group(2)), float(m.group(1)))
    raise NormSpecError(f"cannot parse norm spec {text!r}")


def split_specs(text: str) -> list[str]:
    """Split a comma-separated list of specs, ignoring commas inside parentheses."""
    out, depth, cur = [], 0, []
    for ch in text:
        if ch == "," and depth == 0:
            out.append("".join(cur).strip())
            cur = []
            continue
        depth += (ch == "(") - (ch == ")")
        if depth < 0:
            raise NormSpecError(f"unbalanced parentheses in {text!r}")
        cur.append(ch)
    if depth:
        raise NormSpecError(f"unbalanced parentheses in {text!r}")
    out.append("".join(cur).strip())
    return [s for s in out if s]


def uses_surrogate(spec: NormSpec) -> bool:
    """Whether the norm involves the Holmstedt ``L_p + L_q`` expression."""
    if isinstance(spec, Sum):
        return spec.p != spec.q
    if isinstance(spec, ZE):
        return spec.p != 1.0 or uses_surrogate(spec.inner)
    return False


# evaluation ---------------------------------------------------------------


def _lp(mu: StepFunction, p: float) -> float:
    if mu.is_zero:
        return 0.0
    if math.isinf(p):
        return mu.top
    return integrate_power(mu, p) ** (1.0 / p)


def _holmstedt(mu: StepFunction, p: float, q: float) -> float:
    if mu.is_zero:
        return 0.0
    head = integrate_power(mu, p, 0.0, 1.0) ** (1.0 / p)
    if math.isinf(q):
        return head + float(mu(1.0))
    if mu.total_length <= 1.0:
        return head
    return head + integrate_power(mu, q, 1.0, math.inf) ** (1.0 / q)


def norm(spec: NormSpec, mu: StepFunction) -> float:
    """Norm of the function with decreasing rearrangement ``mu``."""
    if isinstance(spec, Lp):
        return _lp(mu, spec.p)
    if isinstance(spec, Cap):
        return max(_lp(mu, spec.p), _lp(mu, spec.q))
    if isinstance(spec, Sum):
        return _holmstedt(mu, spec.p, spec.q)
    if isinstance(spec, Orlicz):
        return luxemburg_norm(spec.phi, mu)
    if isinstance(spec, ZE):
        head = norm(spec.inner, restrict(mu, 0.0, 1.0)) if not mu.is_zero else 0.0
        return head + _holmstedt(mu, 1.0, spec.p)
    raise NormSpecError(f"not a norm spec: {spec!r}")


def phi_moment(phi: Callable, mu: StepFunction) -> float:
    """``int_0^inf Phi(mu(t)) dt`` as an exact sum over steps."""
    if mu.is_zero:
        return 0.0
    return float(np.sum(phi(mu.values) * mu.lengths))


def luxemburg_norm(phi: OrliczFunction, mu: StepFunction) -> float:
    """``inf{lam > 0 : int Phi(mu / lam) <= 1}`` by bisection.

    The modular ``G(lam)`` is nonincreasing in ``lam``; the bracket is
    ``[1e-12, 1e12]`` times the top value of ``mu``.
    """
    if mu.is_zero:
        return 0.0

    def G(lam: float) -> float:
        return float(np.sum(phi(mu.values / lam) * mu.lengths))

    lo, hi = mu.top / LUX_BRACKET, mu.top * LUX_BRACKET
    if G(hi) > 1.0:
        raise LuxemburgBracketError(
            f"modular of {phi.label} stays above 1 for lambda up to {hi:.3e}"
        )
    if G(lo) <= 1.0:
        return lo
    for _ in range(LUX_MAX_ITER):
        mid = math.sqrt(lo * hi) if hi > 4.0 * lo else 0.5 * (lo + hi)
        if G(mid) <= 1.0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= LUX_RTOL * hi:
            break
    return hi
