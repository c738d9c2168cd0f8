"""Command-line entry point.

    ncfa verify --theorem rosenthal --ensemble classical:K=4,n=2 --p 4 --trials 50 --seed 7 --out r.json
    ncfa sweep  --theorem khinchine --spec "Lp(1.5),Lp(3)" --ensemble fermionic:K=4
    ncfa oracle --check l2-orthogonality --trials 1000
    ncfa norm   --matrix x.json --spec "Lp(3),sum(1,2)"

Exit status: 0 on success, 1 if a hard check failed, 2 on a bad
configuration, 3 if a requested family exceeds the size limits.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .algebra import element_from_json
from .harness import (
    MODULAR_VARIANTS,
    THEOREMS,
    HypothesisError,
    RatioReport,
    reports_to_csv,
    run_theorem,
)
from .independence import BudgetExceededError, Ensemble
from .oracles import CHECKS, OracleReport, run_checks
from .rearrangement import singular_value_function
from .spaces import Orlicz, format_norm_spec, norm, parse_norm_spec, parse_orlicz, split_specs

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3
COMMANDS = ("verify", "sweep", "oracle", "norm")

# defaults used by ``sweep`` when a parameter is not given
SWEEP_EXPONENTS = (1.5, 2.0, 3.0, 4.0)
SWEEP_PHIS = ("M:2,4", "M:1.5,3")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    theorems: list[str] = field(default_factory=list)
    ensembles: list[str] = field(default_factory=list)
    specs: list[str] = field(default_factory=list)
    p: list[float] = field(default_factory=list)
    q: list[float] = field(default_factory=list)
    phi: list[str] = field(default_factory=list)
    direction: str = "both"
    form: str = "Z2"
    variants: list[str] = field(default_factory=list)
    pair: str = "sum"
    checks: list[str] = field(default_factory=list)
    trials: int = 100
    seed: int = 0
    out: str | None = None
    format: str = "json"
    matrix: str | None = None

    def to_json(self) -> dict:
        """Everything that determines the report content (the output path is left out)."""
        doc = {
            "command": self.command,
            "trials": self.trials,
            "seed": self.seed,
            "format": self.format,
        }
        if self.command in ("verify", "sweep"):
            doc.update(
                theorems=list(self.theorems),
                ensembles=list(self.ensembles),
                specs=list(self.specs),
                p=list(self.p),
                q=list(self.q),
                phi=list(self.phi),
                direction=self.direction,
                form=self.form,
                variants=list(self.variants),
                pair=self.pair,
            )
        elif self.command == "oracle":
            doc["checks"] = list(self.checks)
        return doc


# parsing ------------------------------------------------------------------


def _listify(value, split: bool = True) -> list[str]:
    if value is None:
        return []
    items = value if isinstance(value, list) else [value]
    out = []
    for item in items:
        if isinstance(item, (int, float)) and not isinstance(item, bool):
            out.append(str(item))
        elif split:
            out.extend(s.strip() for s in str(item).split(",") if s.strip())
        else:
            out.append(str(item).strip())
    return out


def _floats(value, what: str) -> list[float]:
    try:
        return [float(s) for s in _listify(value)]
    except ValueError as exc:
        raise ConfigError(f"bad number in --{what}: {exc}") from exc


def _spec_list(value) -> list[str]:
    items = value if isinstance(value, list) else ([] if value is None else [value])
    out = []
    for item in items:
        out.extend(split_specs(str(item)))
    return out


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=S, help="JSON file with the same keys as the flags; flags win")
    common.add_argument("--trials", type=int, default=S)
    common.add_argument("--seed", type=int, default=S)
    common.add_argument("--out", default=S, help="output file (default: standard output)")
    common.add_argument("--format", choices=("json", "csv"), default=S)

    theory = argparse.ArgumentParser(add_help=False)
    theory.add_argument("--theorem", action="append", default=S, help=f"one of {', '.join(THEOREMS)}; repeatable")
    theory.add_argument("--ensemble", action="append", default=S, help="e.g. classical:K=4,n=2; repeatable")
    theory.add_argument("--spec", action="append", default=S, help='norm specs, e.g. "Lp(1.5),Lp(3)"')
    theory.add_argument("--p", action="append", default=S, help="Rosenthal exponents, comma separated")
    theory.add_argument("--q", action="append", default=S, help="exponents for the explicit-constant bounds")
    theory.add_argument("--phi", action="append", default=S, help="Orlicz function, e.g. M:2,4; repeatable")
    theory.add_argument("--direction", choices=("upper", "lower", "both"), default=S)
    theory.add_argument("--form", choices=("Z1", "Z2"), default=S)
    theory.add_argument("--variant", action="append", default=S, help=f"{', '.join(MODULAR_VARIANTS)} or all")
    theory.add_argument("--pair", choices=("sum", "adjoint"), default=S)

    parser = argparse.ArgumentParser(prog="ncfa", description=__doc__.split("\n\n")[0], parents=[common])
    sub = parser.add_subparsers(dest="command")
    sub.add_parser("verify", parents=[common, theory], help="check theorems with the given parameters")
    sub.add_parser("sweep", parents=[common, theory], help="like verify, with exponent grids as defaults")
    p_oracle = sub.add_parser("oracle", parents=[common], help="exact identities and explicit bounds")
    p_oracle.add_argument("--check", action="append", default=S, help=f"{', '.join(CHECKS)} or all")
    p_norm = sub.add_parser("norm", parents=[common], help="norms of a matrix given as JSON")
    p_norm.add_argument("--matrix", default=S, required=False)
    p_norm.add_argument("--spec", action="append", default=S)
    return parser


def _load_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    return doc


_FILE_KEYS = {
    "command", "theorem", "ensemble", "spec", "p", "q", "phi", "direction", "form",
    "variant", "pair", "check", "trials", "seed", "out", "format", "matrix",
}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    given = {k: v for k, v in vars(ns).items() if v is not None}
    merged: dict = {}
    if "config" in given:
        file_doc = _load_file(given.pop("config"))
        unknown = set(file_doc) - _FILE_KEYS
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged.update(file_doc)
    merged.update(given)
    command = merged.get("command")
    if command not in COMMANDS:
        raise ConfigError(f"a command is required: one of {COMMANDS}")

    try:
        trials = int(merged.get("trials", 100))
        seed = int(merged.get("seed", 0))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"trials and seed must be integers: {exc}") from exc
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    out = merged.get("out")
    fmt = merged.get("format")
    if fmt is None:
        fmt = "csv" if command == "sweep" or (out and str(out).endswith(".csv")) else "json"
    if fmt not in ("json", "csv"):
        raise ConfigError(f"format must be json or csv, got {fmt!r}")

    cfg = RunConfig(command, trials=trials, seed=seed, out=out, format=fmt)
    if command == "oracle":
        cfg.checks = _listify(merged.get("check")) or ["all"]
        for c in cfg.checks:
            if c != "all" and c not in CHECKS:
                raise ConfigError(f"unknown check {c!r}; expected one of {sorted(CHECKS)} or all")
        return cfg
    if command == "norm":
        cfg.matrix = merged.get("matrix")
        if not cfg.matrix:
            raise ConfigError("norm needs --matrix")
        cfg.specs = [format_norm_spec(parse_norm_spec(s)) for s in _spec_list(merged.get("spec"))] or ["Lp(2)"]
        return cfg

    cfg.theorems = _listify(merged.get("theorem"))
    cfg.ensembles = _listify(merged.get("ensemble"), split=False)
    if not cfg.theorems:
        raise ConfigError("at least one --theorem is required")
    if not cfg.ensembles:
        raise ConfigError("at least one --ensemble is required")
    for t in cfg.theorems:
        if t not in THEOREMS:
            raise ConfigError(f"unknown theorem {t!r}; expected one of {THEOREMS}")
    cfg.specs = [format_norm_spec(parse_norm_spec(s)) for s in _spec_list(merged.get("spec"))]
    cfg.p = _floats(merged.get("p"), "p")
    cfg.q = _floats(merged.get("q"), "q")
    cfg.phi = [parse_orlicz(s).label for s in _listify(merged.get("phi"), split=False)]
    cfg.direction = merged.get("direction", "both")
    cfg.form = merged.get("form", "Z2")
    cfg.pair = merged.get("pair", "sum")
    variants = _listify(merged.get("variant"))
    if "all" in variants:
        variants = list(MODULAR_VARIANTS)
    for v in variants:
        if v not in MODULAR_VARIANTS:
            raise ConfigError(f"unknown variant {v!r}; expected one of {MODULAR_VARIANTS} or all")
    cfg.variants = variants
    # canonicalise ensembles and make sure they parse
    cfg.ensembles = [Ensemble.parse(e).label() if "seed=" not in e else e for e in cfg.ensembles]
    _plan(cfg)
    return cfg


# planning and running -----------------------------------------------------


def _plan(cfg: RunConfig) -> list[tuple[str, Ensemble, dict]]:
    """Expand the config into ``(theorem, ensemble, params)`` cells in a fixed order."""
    sweep = cfg.command == "sweep"
    ensembles = [Ensemble.parse(e, seed=cfg.seed) for e in cfg.ensembles]
    norm_specs = [parse_norm_spec(s) for s in cfg.specs]
    cells = []
    for theorem in cfg.theorems:
        if theorem == "rosenthal":
            ps = cfg.p or ([e for e in SWEEP_EXPONENTS if e >= 2] if sweep else [])
            if not ps:
                raise ConfigError("rosenthal needs --p")
            params = [dict(p=p) for p in ps]
        elif theorem in ("js", "khinchine"):
            specs = norm_specs or ([parse_norm_spec(f"Lp({e})") for e in SWEEP_EXPONENTS] if sweep else [])
            if not specs:
                raise ConfigError(f"{theorem} needs --spec")
            if theorem == "js":
                params = [dict(spec=s, direction=cfg.direction, form=cfg.form) for s in specs]
            else:
                params = [dict(spec=s, pair=cfg.pair) for s in specs]
        elif theorem == "modular":
            phis = [parse_orlicz(s) for s in cfg.phi] + [s.phi for s in norm_specs if isinstance(s, Orlicz)]
            if not phis:
                if not sweep:
                    raise ConfigError("modular needs --phi")
                phis = [parse_orlicz(s) for s in SWEEP_PHIS]
            variants = cfg.variants or (list(MODULAR_VARIANTS) if sweep else [])
            if not variants:
                raise ConfigError("modular needs --variant")
            params = [dict(phi=f, variant=v) for f in phis for v in variants]
        else:
            params = [dict(q_list=tuple(cfg.q) if cfg.q else (2.0, 4.0, 8.0))]
        for ens in ensembles:
            for pr in params:
                cells.append((theorem, ens, pr))
    return cells


def run(cfg: RunConfig) -> tuple[list, list[str]]:
    """Execute the config; returns the reports and a list of hard failures."""
    if cfg.command == "oracle":
        reports = run_checks(cfg.checks, cfg.trials, cfg.seed)
        failures = [f"{r.check}: {m}" for r in reports for m in r.failures]
        failures += [f"{r.check}: {r.failure_count} failing instances" for r in reports if r.failure_count]
        return reports, failures
    cells = _plan(cfg)
    for _, ens, _ in cells:
        ens.check_budget()
    reports: list[RatioReport] = []
    for theorem, ens, params in cells:
        reports.extend(run_theorem(theorem, ens, cfg.trials, **params))
    failures = [f"{r.theorem_id} {r.spec} {r.ensemble.get('kind')}: {m}" for r in reports for m in r.hard_failures]
    return reports, failures


def render(cfg: RunConfig, reports: list) -> str:
    if cfg.format == "csv":
        if reports and isinstance(reports[0], OracleReport):
            lines = ["check,trials,seed,passed,max_residual,failure_count"]
            lines += [f"{r.check},{r.trials},{r.seed},{r.passed},{r.max_residual!r},{r.failure_count}" for r in reports]
            return "\n".join(lines) + "\n"
        return reports_to_csv(reports)
    doc = {"config": cfg.to_json(), "reports": [r.to_json() for r in reports]}
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _run_norm(cfg: RunConfig) -> str:
    try:
        x = element_from_json(Path(cfg.matrix).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read matrix {cfg.matrix}: {exc}") from exc
    mu = singular_value_function(x)
    doc = {
        "mu": mu.to_json(),
        "norms": {s: norm(parse_norm_spec(s), mu) for s in cfg.specs},
    }
    return json.dumps(doc, indent=2, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
        if cfg.command == "norm":
            _emit(_run_norm(cfg), cfg.out)
            return EXIT_OK
        reports, failures = run(cfg)
    except BudgetExceededError as exc:
        print(f"ncfa: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ConfigError, HypothesisError, ValueError) as exc:
        print(f"ncfa: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _emit(render(cfg, reports), cfg.out)
    if failures:
        for f in failures:
            print(f"FAIL {f}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
