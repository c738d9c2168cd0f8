"""Evaluate both sides of the moment inequalities on sampled families.

Every verifier takes one family or a sequence of families (one per trial)
and returns :class:`RatioReport` objects pairing ``lhs`` and ``rhs`` per
trial. Constants of equivalence are only reported; the sole hard checks are
the explicit-constant bounds of :func:`verify_explicit_bounds`.

Trials run in order, or on ``NCFA_THREADS`` worker threads. Each trial's
family is regenerated from ``(seed, trial)``, so results do not depend on
scheduling.
"""

from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from functools import reduce
from typing import Callable, Iterable, Sequence

import numpy as np

from . import eigen
from .algebra import AlgElement, trace
from .independence import Ensemble, TensorFamily, rademacher_expand
from .majorization import hl_submajorize
from .operators import square_mu
from .rearrangement import StepFunction, mu_of_direct_sum, restrict, singular_value_function
from .spaces import (
    ZE,
    Cap,
    Lp,
    NormSpec,
    Orlicz,
    OrliczFunction,
    Sum,
    format_norm_spec,
    norm,
    phi_moment,
    uses_surrogate,
)

__all__ = [
    "RatioReport",
    "HypothesisError",
    "LazyFamilies",
    "THEOREMS",
    "verify_rosenthal",
    "verify_js",
    "verify_khinchine",
    "verify_modular",
    "verify_explicit_bounds",
    "run_theorem",
    "thread_count",
    "CSV_FIELDS",
    "reports_to_csv",
    "MODULAR_VARIANTS",
]

MEAN_ZERO_ATOL = 1e-9
POSITIVE_ATOL = 1e-10
HARD_ATOL = 1e-9
THEOREMS = ("rosenthal", "js", "khinchine", "modular", "bounds")
CSV_FIELDS = ("theorem_id", "spec", "kind", "K", "n", "seed", "trial", "lhs", "rhs", "ratio")


class HypothesisError(ValueError):
    """A family or exponent violates the hypothesis of the inequality being checked."""


# reports ------------------------------------------------------------------


def _json_float(x: float):
    if x is None:
        return None
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


@dataclass
class RatioReport:
    """Paired ``lhs``/``rhs`` values of one check over a run of trials.

    ``excluded`` lists trials with ``lhs = rhs = 0``; they carry no ratio.
    ``hard_failures`` is non-empty iff an explicit-constant bound failed.
    """

    theorem_id: str
    spec: str
    ensemble: dict
    lhs: list[float] = field(default_factory=list)
    rhs: list[float] = field(default_factory=list)
    params: dict = field(default_factory=dict)
    surrogate_flags: list[str] = field(default_factory=list)
    excluded: list[int] = field(default_factory=list)
    hard_failures: list[str] = field(default_factory=list)
    exploratory: bool = False

    def __post_init__(self):
        if len(self.lhs) != len(self.rhs):
            raise ValueError("lhs and rhs must be paired")

    @property
    def trials(self) -> int:
        return len(self.lhs)

    @property
    def ratios(self) -> list[float | None]:
        out = []
        for a, b in zip(self.lhs, self.rhs):
            if b == 0.0:
                out.append(None if a == 0.0 else math.inf)
            else:
                out.append(a / b)
        return out

    def _valid(self) -> list[float]:
        return sorted(r for r in self.ratios if r is not None)

    @property
    def ratio_min(self) -> float | None:
        r = self._valid()
        return r[0] if r else None

    @property
    def ratio_max(self) -> float | None:
        r = self._valid()
        return r[-1] if r else None

    @property
    def ratio_geomean(self) -> float | None:
        r = self._valid()
        if not r:
            return None
        if r[-1] == math.inf:
            return math.inf
        if r[0] == 0.0:
            return 0.0
        # sorted before summing so the value is independent of trial order
        return math.exp(math.fsum(math.log(v) for v in r) / len(r))

    @property
    def spread(self) -> float | None:
        """``ratio_max / ratio_min``."""
        lo, hi = self.ratio_min, self.ratio_max
        if lo is None:
            return None
        return math.inf if lo == 0.0 else hi / lo

    @property
    def passed(self) -> bool:
        return not self.hard_failures

    def cell(self) -> tuple:
        """Key of the (theorem, spec, parameters, ensemble kind) cell."""
        return (self.theorem_id, self.spec, tuple(sorted(self.params.items())), self.ensemble.get("kind"))

    def to_json(self) -> dict:
        return {
            "theorem_id": self.theorem_id,
            "spec": self.spec,
            "params": dict(self.params),
            "ensemble": dict(self.ensemble),
            "trials": self.trials,
            "lhs": [_json_float(v) for v in self.lhs],
            "rhs": [_json_float(v) for v in self.rhs],
            "ratio_min": _json_float(self.ratio_min),
            "ratio_max": _json_float(self.ratio_max),
            "ratio_geomean": _json_float(self.ratio_geomean),
            "surrogate_flags": list(self.surrogate_flags),
            "excluded": list(self.excluded),
            "hard_failures": list(self.hard_failures),
            "exploratory": self.exploratory,
        }

    def csv_rows(self) -> list[dict]:
        ens = self.ensemble
        spec = self.spec
        if self.params:
            spec += " [" + ",".join(f"{k}={v}" for k, v in self.params.items()) + "]"
        rows = []
        for t, (a, b, r) in enumerate(zip(self.lhs, self.rhs, self.ratios)):
            rows.append(
                {
                    "theorem_id": self.theorem_id,
                    "spec": spec,
                    "kind": ens.get("kind"),
                    "K": ens.get("K"),
                    "n": ens.get("n"),
                    "seed": ens.get("seed"),
                    "trial": ens.get("first_trial", 0) + t,
                    "lhs": repr(float(a)),
                    "rhs": repr(float(b)),
                    "ratio": "" if r is None else repr(float(r)),
                }
            )
        return rows


def reports_to_csv(reports: Iterable[RatioReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for rep in reports:
        writer.writerows(rep.csv_rows())
    return buf.getvalue()


# trial plumbing ----------------------------------------------------------


def thread_count() -> int:
    """Worker threads for trials, from ``NCFA_THREADS`` (default 1)."""
    raw = os.environ.get("NCFA_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


class LazyFamilies(Sequence):
    """Trials ``first, first+1, ...`` of an ensemble, sampled on access."""

    def __init__(self, ensemble: Ensemble, trials: int, first: int = 0):
        if trials < 1:
            raise ValueError("trials must be >= 1")
        self.ensemble = ensemble
        self.trials = int(trials)
        self.first = int(first)

    def __len__(self):
        return self.trials

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(self.trials))]
        if not 0 <= i < self.trials:
            raise IndexError(i)
        return self.ensemble.sample(self.first + i)

    def descriptor(self) -> dict:
        d = self.ensemble.to_json()
        d["trials"] = self.trials
        d["first_trial"] = self.first
        return d


def _as_families(families) -> Sequence:
    if isinstance(families, TensorFamily):
        return [families]
    if isinstance(families, list) and families and isinstance(families[0], AlgElement):
        return [families]
    return families


def _describe(families: Sequence, ensemble) -> dict:
    if ensemble is not None:
        d = ensemble.to_json() if isinstance(ensemble, Ensemble) else dict(ensemble)
        d.setdefault("trials", len(families))
        return d
    if isinstance(families, LazyFamilies):
        return families.descriptor()
    f = families[0]
    if isinstance(f, TensorFamily):
        n = f.dims[0] if f.kind == "tensor" else 2
        return {"kind": f.kind, "K": f.K, "n": n, "seed": None, "trials": len(families)}
    return {"kind": "list", "K": len(f), "n": f[0].algebra.size, "seed": None, "trials": len(families)}


def _map_trials(fn: Callable, families: Sequence) -> list:
    threads = thread_count()
    idx = range(len(families))
    if threads == 1:
        return [fn(families[i]) for i in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda i: fn(families[i]), idx))


@dataclass
class _Pair:
    lhs: float
    rhs: float
    failure: str | None = None


def _assemble(
    rows: list[dict],
    keys: list[tuple],
    meta: dict,
    ensemble: dict,
) -> list[RatioReport]:
    reports = []
    for key in keys:
        theorem_id, spec, params = key
        m = meta[key]
        rep = RatioReport(
            theorem_id,
            spec,
            dict(ensemble),
            params=dict(params),
            surrogate_flags=list(m.get("surrogate_flags", [])),
            exploratory=m.get("exploratory", False),
        )
        for t, row in enumerate(rows):
            pair = row[key]
            rep.lhs.append(float(pair.lhs))
            rep.rhs.append(float(pair.rhs))
            if pair.lhs == 0.0 and pair.rhs == 0.0:
                rep.excluded.append(t)
            if pair.failure:
                rep.hard_failures.append(f"trial {ensemble.get('first_trial', 0) + t}: {pair.failure}")
        reports.append(rep)
    return reports


def _run(fn: Callable, families, ensemble, meta: dict) -> list[RatioReport]:
    fams = _as_families(families)
    if len(fams) == 0:
        raise ValueError("no families to evaluate")
    rows = _map_trials(fn, fams)
    return _assemble(rows, list(meta), meta, _describe(fams, ensemble))


# hypothesis checks -------------------------------------------------------


def _elements(family) -> list[AlgElement]:
    return list(family.embedded) if isinstance(family, TensorFamily) else list(family)


def _factor_elements(family) -> list[AlgElement]:
    # factors carry the same distributions as the embedded elements at a fraction of the size
    return [x for _, x in family.factors] if isinstance(family, TensorFamily) else list(family)


def _require_family(family) -> TensorFamily:
    if not isinstance(family, TensorFamily):
        raise HypothesisError("an independent family is required (rank_one is only a negative control)")
    return family


def _check_mean_zero(family) -> None:
    for k, x in enumerate(_factor_elements(family)):
        if abs(trace(x)) > MEAN_ZERO_ATOL * (1.0 + x.opnorm()):
            raise HypothesisError(f"x_{k} is not mean zero (tau = {complex(trace(x)):.3e})")


def _check_positive(family) -> None:
    for k, x in enumerate(_factor_elements(family)):
        if not x.check_hermitian():
            raise HypothesisError(f"x_{k} is not self-adjoint")
        lo = min(float(eigen.eigvalsh(b).min()) for b in x.blocks)
        if lo < -POSITIVE_ATOL * (1.0 + x.opnorm()):
            raise HypothesisError(f"x_{k} is not positive (smallest eigenvalue {lo:.3e})")


def _exponents(spec: NormSpec) -> list[float]:
    if isinstance(spec, Lp):
        return [spec.p]
    if isinstance(spec, (Cap, Sum)):
        return [spec.p, spec.q]
    if isinstance(spec, Orlicz):
        return [spec.phi.p_convex, spec.phi.q_concave]
    if isinstance(spec, ZE):
        return _exponents(spec.inner) + [spec.p]
    raise HypothesisError(f"not a norm spec: {spec!r}")


def _total(family) -> AlgElement:
    return reduce(lambda u, v: u + v, _elements(family))


def _mu_total(family) -> StepFunction:
    return singular_value_function(_total(family))


def _mu_direct_sum(family) -> StepFunction:
    return mu_of_direct_sum([singular_value_function(x) for x in _factor_elements(family)])


# verifiers ---------------------------------------------------------------


def verify_rosenthal(families, p: float, ensemble=None) -> RatioReport:
    """``||sum x_k||_p`` against ``(sum ||x_k||_p^p)^{1/p} + (sum ||x_k||_2^2)^{1/2}``.

    Requires ``2 <= p < inf`` and mean-zero families.
    """
    p = float(p)
    if not 2.0 <= p < math.inf:
        raise HypothesisError(f"the Rosenthal inequality needs 2 <= p < inf, got p={p}")
    key = ("rosenthal", format_norm_spec(Lp(p)), (("p", p),))

    def one(family):
        _require_family(family)
        _check_mean_zero(family)
        mus = [singular_value_function(x) for x in _factor_elements(family)]
        lhs = norm(Lp(p), _mu_total(family))
        head = math.fsum(norm(Lp(p), m) ** p for m in mus) ** (1.0 / p)
        tail = math.sqrt(math.fsum(norm(Lp(2), m) ** 2 for m in mus))
        return {key: _Pair(lhs, head + tail)}

    return _run(one, families, ensemble, {key: {}})[0]


def verify_js(families, E: NormSpec, direction: str = "both", form: str = "Z2", ensemble=None) -> RatioReport:
    """``||sum x_k||_E`` against ``||sum x_k (x) e_k||`` in ``Z_E^2`` (mean zero) or ``Z_E^1`` (positive).

    ``direction="upper"`` and ``"both"`` report ``lhs = ||sum x_k||_E``;
    ``"lower"`` swaps the sides so the ratio bounds the lower estimate.
    Endpoint exponents (1) are accepted but marked exploratory.
    """
    if direction not in ("upper", "lower", "both"):
        raise ValueError(f"direction must be upper, lower or both, got {direction!r}")
    if form not in ("Z1", "Z2"):
        raise ValueError(f"form must be Z1 or Z2, got {form!r}")
    zp = 2.0 if form == "Z2" else 1.0
    Z = ZE(E, zp)
    key = ("js", format_norm_spec(E), (("direction", direction), ("form", form)))
    flags = ["holmstedt:L1+L2"] if uses_surrogate(Z) else []
    exploratory = any(e == 1.0 for e in _exponents(E))

    def one(family):
        _require_family(family)
        if form == "Z2":
            _check_mean_zero(family)
        else:
            _check_positive(family)
        a = norm(E, _mu_total(family))
        b = norm(Z, _mu_direct_sum(family))
        return {key: _Pair(b, a) if direction == "lower" else _Pair(a, b)}

    return _run(one, families, ensemble, {key: {"surrogate_flags": flags, "exploratory": exploratory}})[0]


def verify_khinchine(families, E: NormSpec, pair: str = "sum", ensemble=None) -> RatioReport:
    """``||sum x_k||_E`` against ``||(sum x_k^2)^{1/2}||_E``.

    ``pair="adjoint"`` instead compares ``(sum |x_k|^2)^{1/2}`` with
    ``(sum |x_k*|^2)^{1/2}``, which is also accepted for a plain list of
    elements (the ``rank_one`` negative control).
    """
    if pair not in ("sum", "adjoint"):
        raise ValueError(f"pair must be sum or adjoint, got {pair!r}")
    exps = _exponents(E)
    if isinstance(E, ZE) or not all(1.0 < e < math.inf for e in exps):
        raise HypothesisError(f"{format_norm_spec(E)} needs exponents strictly inside (1, inf)")
    key = ("khinchine", format_norm_spec(E), (("pair", pair),))

    def one(family):
        if pair == "sum":
            _require_family(family)
            _check_mean_zero(family)
            return {key: _Pair(norm(E, _mu_total(family)), norm(E, square_mu(_elements(family))))}
        xs = _elements(family)
        return {key: _Pair(norm(E, square_mu(xs)), norm(E, square_mu(xs, adjoint=True)))}

    meta = {"surrogate_flags": ["holmstedt:" + format_norm_spec(E)] if uses_surrogate(E) else []}
    return _run(one, families, ensemble, {key: meta})[0]


MODULAR_VARIANTS = ("positive", "mean_zero", "khinchine")


def verify_modular(families, phi: OrliczFunction, variant: str, ensemble=None) -> RatioReport:
    """``tau(Phi(|sum x_k|))`` against the variant's right-hand side.

    ``positive``:  ``int_0^1 Phi(mu(X)) + Phi(||X||_1)``
    ``mean_zero``: ``int_0^1 Phi(mu(X)) + Phi(||X||_{L1+L2})`` (Holmstedt surrogate)
    ``khinchine``: ``tau(Phi((sum x_k^2)^{1/2}))``

    with ``X = sum x_k (x) e_k``. Needs ``1 < p_convex <= q_concave < inf``.
    """
    if variant not in MODULAR_VARIANTS:
        raise ValueError(f"variant must be one of {MODULAR_VARIANTS}, got {variant!r}")
    if not (1.0 < phi.p_convex <= phi.q_concave < math.inf):
        raise HypothesisError(f"{phi.label} needs 1 < p_convex <= q_concave < inf")
    key = ("modular", f"orlicz({phi.label})", (("variant", variant),))
    flags = ["holmstedt:L1+L2"] if variant == "mean_zero" else []

    def one(family):
        _require_family(family)
        if variant == "positive":
            _check_positive(family)
        else:
            _check_mean_zero(family)
        lhs = phi_moment(phi, _mu_total(family))
        if variant == "khinchine":
            return {key: _Pair(lhs, phi_moment(phi, square_mu(_elements(family))))}
        mu_x = _mu_direct_sum(family)
        head = phi_moment(phi, restrict(mu_x, 0.0, 1.0)) if not mu_x.is_zero else 0.0
        tail_norm = norm(Lp(1) if variant == "positive" else Sum(1, 2), mu_x)
        return {key: _Pair(lhs, head + float(phi(np.array([tail_norm]))[0]))}

    return _run(one, families, ensemble, {key: {"surrogate_flags": flags}})[0]


DYADIC_N = (1, 2, 3)


def verify_explicit_bounds(families, q_list: Sequence[float] = (2, 4, 8), ensemble=None) -> list[RatioReport]:
    """Explicit-constant bounds for mean-zero families.

    * ``symmetrization``: ``||sum x_k||_q <= 2 ||sum x_k (x) r_k||_q`` (hard).
    * ``dyadic-moment``: ``||sum x_k||_{2^N}`` against ``||X||_{L_2 cap L_{2^N}}``
      for ``N = 1, 2, 3``; the ratio is recorded and, for ``N = 1``, must be
      at most one (hard).
    * ``column-contraction``: for ``q >= 2`` and the column ``z = (x_k)``,
      ``||Lz||_q <= ||z||_q`` and ``|Lz|^2 <<  |z|^2`` (hard).
    """
    qs = [float(q) for q in q_list]
    if not qs or any(not 1.0 <= q < math.inf for q in qs):
        raise HypothesisError("q_list needs finite exponents >= 1")
    meta: dict = {}
    for q in qs:
        meta[("symmetrization", format_norm_spec(Lp(q)), (("q", q),))] = {}
    for N in DYADIC_N:
        meta[("dyadic-moment", format_norm_spec(Cap(2, 2**N)), (("N", N),))] = {}
    for q in qs:
        if q >= 2:
            meta[("column-contraction", format_norm_spec(Lp(q)), (("q", q),))] = {}

    def one(family):
        _require_family(family)
        _check_mean_zero(family)
        out = {}
        mu_sum = _mu_total(family)
        mu_rad = rademacher_expand(family).mu()
        mu_x = _mu_direct_sum(family)
        mu_col = square_mu(_elements(family))
        for q in qs:
            a, b = norm(Lp(q), mu_sum), norm(Lp(q), mu_rad)
            bad = f"q={q}: {a!r} > 2 * {b!r}" if a > 2.0 * b + HARD_ATOL else None
            out[("symmetrization", format_norm_spec(Lp(q)), (("q", q),))] = _Pair(a, b, bad)
        for N in DYADIC_N:
            spec = Cap(2, 2**N)
            a, b = norm(Lp(2**N), mu_sum), norm(spec, mu_x)
            bad = None
            if N == 1 and a > b * (1.0 + HARD_ATOL) + HARD_ATOL:
                bad = f"N=1: {a!r} > {b!r}"
            out[("dyadic-moment", format_norm_spec(spec), (("N", N),))] = _Pair(a, b, bad)
        squares_ok = hl_submajorize(mu_x.power(2), mu_col.power(2))
        for q in qs:
            if q < 2:
                continue
            a, b = norm(Lp(q), mu_x), norm(Lp(q), mu_col)
            bad = None
            if a > b + HARD_ATOL:
                bad = f"q={q}: ||Lz|| = {a!r} > ||z|| = {b!r}"
            elif not squares_ok:
                bad = "|Lz|^2 is not submajorized by |z|^2"
            out[("column-contraction", format_norm_spec(Lp(q)), (("q", q),))] = _Pair(a, b, bad)
        return out

    return _run(one, families, ensemble, meta)


# driver ------------------------------------------------------------------


def run_theorem(theorem: str, ensemble: Ensemble, trials: int, first_trial: int = 0, **params) -> list[RatioReport]:
    """Run one theorem on ``trials`` draws of ``ensemble``.

    ``params`` by theorem: ``rosenthal`` takes ``p``; ``js`` takes ``spec``,
    ``direction``, ``form``; ``khinchine`` takes ``spec``, ``pair``;
    ``modular`` takes ``phi``, ``variant``; ``bounds`` takes ``q_list``.
    Families for ``js`` with ``form="Z1"`` and ``modular`` with
    ``variant="positive"`` are drawn from the positive version of the ensemble.
    """
    if theorem not in THEOREMS:
        raise ValueError(f"unknown theorem {theorem!r}; expected one of {THEOREMS}")
    if (theorem == "js" and params.get("form") == "Z1") or (
        theorem == "modular" and params.get("variant") == "positive"
    ):
        ensemble = replace(ensemble, positive=True, mean_zero=False)
    elif theorem != "khinchine" or params.get("pair", "sum") == "sum":
        if ensemble.kind == "rank_one":
            raise HypothesisError(f"{theorem} needs an independent ensemble; rank_one is a negative control")
    fams = LazyFamilies(ensemble, trials, first_trial)
    if theorem == "rosenthal":
        return [verify_rosenthal(fams, params["p"])]
    if theorem == "js":
        return [verify_js(fams, params["spec"], params.get("direction", "both"), params.get("form", "Z2"))]
    if theorem == "khinchine":
        return [verify_khinchine(fams, params["spec"], params.get("pair", "sum"))]
    if theorem == "modular":
        return [verify_modular(fams, params["phi"], params["variant"])]
    return verify_explicit_bounds(fams, params.get("q_list", (2, 4, 8)))
