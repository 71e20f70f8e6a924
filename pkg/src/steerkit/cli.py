"""Command-line entry point: ``steerkit <subcommand> [flags]``.

Exit codes: 0 success, 1 usage error, 2 numerical-invariant failure,
3 enumeration-guard breach.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, assemblages, measurements, steering

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_GUARD = 0, 1, 2, 3


class UsageError(Exception):
    pass


class InvariantFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class CliConfig:
    subcommand: str
    d: int | None = None
    n: int | None = None
    mub: bool = False
    eta: float | None = None
    w: float | None = None
    bases: Path | None = None
    output: Path | None = None
    format: str = "text"
    seed: int = 0
    max_strategies: int | None = steering.ENUMERATION_GUARD
    exact: bool = False
    fig: int = 1
    grid: int = 101
    primes: tuple = (2, 3, 5, 7, 11, 13)
    trials: int = 1000
    identical: int | None = None
    orthogonal: int | None = None


def _unit(name):
    def parse(s):
        v = float(s)
        if not 0.0 <= v <= 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie in [0, 1], got {s}")
        return v

    return parse


def _positive(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _primes(s):
    try:
        vals = tuple(int(p) for p in s.split(",") if p)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    bad = [p for p in vals if not measurements.is_prime(p)]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"not a list of primes: {s}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="steerkit", description="Loss-tolerant linear steering inequalities.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def common(p, fmt="text"):
        p.add_argument("--d", type=_positive, help="local dimension")
        p.add_argument("--mub", action="store_true", help="use the d+1 prime-dimension MUBs")
        p.add_argument("--n", type=_positive, help="keep only the first n bases")
        p.add_argument("--bases", type=Path, help="basis-set JSON file")
        p.add_argument("--format", choices=("text", "csv", "json"), default=fmt)
        p.add_argument("--output", type=Path, help="write here instead of stdout")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("bound", help="analytic and exact LHS bounds")
    common(p)
    p.add_argument("--max-strategies", type=_positive, default=steering.ENUMERATION_GUARD)
    p.add_argument("--no-guard", action="store_true", help="lift the enumeration guard")

    p = sub.add_parser("violation", help="value on the lossy isotropic state")
    common(p)
    p.add_argument("--eta", type=_unit("eta"), required=True)
    p.add_argument("--w", type=_unit("w"), default=1.0)
    p.add_argument("--exact", action="store_true", help="also report the enumerated bound")
    p.add_argument("--max-strategies", type=_positive, default=steering.ENUMERATION_GUARD)

    p = sub.add_parser("critical", help="critical efficiency and visibility")
    common(p)
    p.add_argument("--eta", type=_unit("eta"), default=1.0)
    p.add_argument("--w", type=_unit("w"), default=1.0)

    p = sub.add_parser("scan", help="region (fig 1) or critical-visibility (fig 2) tables")
    common(p, fmt="csv")
    p.add_argument("--fig", type=int, choices=(1, 2), default=1)
    p.add_argument("--grid", type=_positive, default=101)
    p.add_argument("--primes", type=_primes, default=(2, 3, 5, 7, 11, 13))
    p.add_argument("--eta", type=_unit("eta"), default=1.0)

    p = sub.add_parser("jm", help="joint-measurability certificate for lossy measurements")
    common(p)
    p.add_argument("--eta", type=_unit("eta"), required=True)

    p = sub.add_parser("lemma", help="random checks of the projector-sum norm bound")
    common(p)
    p.add_argument("--trials", type=_positive, default=1000)
    p.add_argument("--identical", type=_positive, help="tight case: this many equal projectors")
    p.add_argument("--orthogonal", type=_positive, help="tight case: this many orthogonal projectors")
    return parser


def config_from_args(args) -> CliConfig:
    cfg = CliConfig(subcommand=args.subcommand)
    for k, v in vars(args).items():
        key = k.replace("-", "_")
        if hasattr(cfg, key):
            setattr(cfg, key, v)
    if getattr(args, "no_guard", False):
        cfg.max_strategies = None
    return cfg


def load_set(cfg: CliConfig) -> measurements.MeasurementSet:
    if cfg.bases is not None:
        if cfg.mub:
            raise UsageError("--mub and --bases are mutually exclusive")
        try:
            mset = measurements.load_bases(cfg.bases)
        except OSError as exc:
            raise UsageError(f"cannot read {cfg.bases}: {exc}") from exc
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    elif cfg.mub:
        if cfg.d is None:
            raise UsageError("--mub needs --d")
        if not measurements.is_prime(cfg.d):
            raise UsageError(f"--mub needs a prime dimension, got {cfg.d}")
        mset = measurements.mub_prime(cfg.d)
    else:
        raise UsageError("supply --mub with --d, or --bases FILE")
    if cfg.n is not None:
        if cfg.n > mset.n:
            raise UsageError(f"--n {cfg.n} exceeds the {mset.n} available bases")
        mset = mset.subset(range(cfg.n))
    if cfg.d is not None and cfg.d != mset.dim:
        raise UsageError(f"--d {cfg.d} does not match basis dimension {mset.dim}")
    return mset


def _need_two(mset):
    if mset.n < 2:
        raise UsageError("at least two measurements are needed")


def _render(record: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(record, indent=1, ensure_ascii=False) + "\n"
    if fmt == "csv":
        cols = tuple(record)
        return analysis.to_csv([record], cols)
    out = []
    for k, v in record.items():
        if isinstance(v, float):
            v = format(v, ".12g")
        elif v is None:
            v = "unattainable"
        out.append(f"{k}: {v}")
    return "\n".join(out) + "\n"


def cmd_bound(cfg: CliConfig) -> tuple[int, str]:
    mset = load_set(cfg)
    _need_two(mset)
    f = steering.build_functional(mset)
    rep = steering.exact_lhs_bound(f, guard=cfg.max_strategies)
    record = {"d": mset.dim, "n": mset.n}
    record.update(rep.as_dict())
    per_class = record.pop("per_class_max")
    if cfg.format == "json":
        record["per_class_max"] = per_class
    else:
        record.update({f"class_{k}_max": v for k, v in per_class.items()})
    if rep.exact_bound > rep.analytic_bound + 1e-9 and f.cos_theta < 1:
        raise InvariantFailure(
            f"exact bound {rep.exact_bound} exceeds analytic bound {rep.analytic_bound}"
        )
    return EXIT_OK, _render(record, cfg.format)


def cmd_violation(cfg: CliConfig) -> tuple[int, str]:
    mset = load_set(cfg)
    _need_two(mset)
    d = mset.dim
    f = steering.build_functional(mset, use_transpose=True)
    lossy = assemblages.apply_loss(
        assemblages.assemble(assemblages.isotropic(d, cfg.w), mset), cfg.eta
    )
    bound = steering.functional_analytic_bound(f)
    exact = None
    if cfg.exact:
        exact = steering.exact_lhs_bound(f, guard=cfg.max_strategies).exact_bound
    rep = analysis.violation(f, lossy, bound, exact)
    record = {"d": d, "n": mset.n, "eta": cfg.eta, "w": cfg.w, "beta": rep.beta,
              "bound": bound, "violated": rep.violated, "V": rep.normalized_violation}
    if cfg.exact:
        record["lhs_exact"] = exact
    return EXIT_OK, _render(record, cfg.format)


def cmd_critical(cfg: CliConfig) -> tuple[int, str]:
    mset = load_set(cfg)
    _need_two(mset)
    c = measurements.max_overlap(mset)
    if c >= 1 - 1e-12:
        raise UsageError("cosθ = 1: trivial inequality, no threshold exists")
    if cfg.eta == 0:
        raise UsageError("--eta must be positive")
    t = analysis.thresholds(mset.n, mset.dim, c, eta=cfg.eta, w=cfg.w)
    record = {"d": mset.dim, "n": mset.n, "cos_theta": c, "eta": cfg.eta, "w": cfg.w,
              "eta_critical": t.eta_critical, "w_critical": t.w_critical}
    if cfg.format == "csv":
        record = {k: ("unattainable" if v is None else v) for k, v in record.items()}
    return EXIT_OK, _render(record, cfg.format)


def cmd_scan(cfg: CliConfig) -> tuple[int, str]:
    fmt = "csv" if cfg.format == "text" else cfg.format
    if cfg.fig == 1:
        if cfg.d is None or not measurements.is_prime(cfg.d):
            raise UsageError("fig 1 needs a prime --d")
        n = cfg.n or cfg.d + 1
        if n < 2 or n > cfg.d + 1:
            raise UsageError(f"--n must lie in [2, {cfg.d + 1}]")
        grid = np.linspace(0.0, 1.0, cfg.grid)
        rows = analysis.scan_region(cfg.d, n, grid, grid)
        cols = analysis.CSV_COLUMNS
    else:
        if cfg.eta == 0:
            raise UsageError("--eta must be positive for fig 2")
        rows = analysis.fig2_rows(cfg.primes, eta=cfg.eta)
        cols = ("curve",) + analysis.CSV_COLUMNS + ("note",)
    text = analysis.to_csv(rows, cols) if fmt == "csv" else analysis.to_json(rows, cols)
    return EXIT_OK, text


def _matrix_text(m: np.ndarray) -> str:
    def z(c):
        return f"{c.real:+.6f}{c.imag:+.6f}j"

    return "\n".join("    [" + " ".join(z(c) for c in row) + "]" for row in m)


def cmd_jm(cfg: CliConfig) -> tuple[int, str]:
    mset = load_set(cfg)
    n, d = mset.n, mset.dim
    if cfg.eta <= 1.0 / n:
        parent = measurements.parent_povm(mset)
        target = measurements.lossy_povm(mset, 1.0 / n).elements
        residual = max(
            float(np.max(np.abs(np.stack(measurements.marginalize(parent, x)) - target[x])))
            for x in range(n)
        )
        completeness = parent.completeness_error()
        if residual > 1e-12 or not parent.is_valid():
            raise InvariantFailure(f"parent POVM check failed (marginal residual {residual:.3g})")
        record = {
            "d": d, "n": n, "eta": cfg.eta, "certificate": "jointly measurable",
            "nonzero_elements": len(parent.elements),
            "parent_outcomes": parent.num_outcomes,
            "marginal_residual": residual, "completeness_residual": completeness,
        }
        if cfg.format == "json":
            record["parent"] = {
                "".join("∅" if a is None else str(a + 1) for a in s): [
                    [[float(c.real), float(c.imag)] for c in row] for row in m
                ]
                for s, m in parent.elements.items()
            }
            return EXIT_OK, _render(record, "json")
        text = _render(record, cfg.format)
        if cfg.format == "text":
            lines = ["parent POVM (nonzero elements; eta < 1/n follows by mixing in no-click):"]
            for s, m in parent.elements.items():
                label = "".join("∅" if a is None else str(a + 1) for a in s)
                lines.append(f"  M[{label}] =\n{_matrix_text(m)}")
            text += "\n".join(lines) + "\n"
        return EXIT_OK, text

    _need_two(mset)
    f = steering.build_functional(mset, use_transpose=True)
    lossy = assemblages.apply_loss(assemblages.assemble(assemblages.max_entangled(d), mset), cfg.eta)
    bound = steering.functional_analytic_bound(f)
    rep = analysis.violation(f, lossy, bound)
    record = {
        "d": d, "n": n, "eta": cfg.eta, "beta": rep.beta, "bound": bound,
        "certificate": "not jointly measurable" if rep.violated else "inconclusive",
    }
    return EXIT_OK, _render(record, cfg.format)


def _random_projector(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def cmd_lemma(cfg: CliConfig) -> tuple[int, str]:
    rows = []
    worst = -np.inf
    for t in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, t])
        if cfg.identical:
            d = cfg.d or 2
            p = _random_projector(d, rng)
            projs = [p] * cfg.identical
        elif cfg.orthogonal:
            d = max(cfg.d or 2, cfg.orthogonal)
            basis = measurements.random_basis(d, int(rng.integers(2**31)))
            projs = list(basis.projectors[: cfg.orthogonal])
        else:
            ell = int(rng.integers(2, 7))
            d = cfg.d or int(rng.integers(2, 9))
            projs = [_random_projector(d, rng) for _ in range(ell)]
        lhs, bound = steering.projector_sum_norm_check(projs)
        rows.append((t, len(projs), d, lhs, bound))
        worst = max(worst, lhs - bound)
        if lhs > bound + 1e-9:
            raise InvariantFailure(
                f"norm bound violated at seed {cfg.seed}, trial {t}: {lhs} > {bound}"
            )
    if cfg.trials == 1 or cfg.format != "text":
        recs = [dict(zip(("trial", "ell", "d", "lhs", "bound"), r)) for r in rows]
        if cfg.format == "json":
            return EXIT_OK, json.dumps(recs, indent=1) + "\n"
        if cfg.format == "csv":
            return EXIT_OK, analysis.to_csv(recs, ("trial", "ell", "d", "lhs", "bound"))
        return EXIT_OK, _render(recs[0], "text")
    return EXIT_OK, f"pass: {cfg.trials} trials, max(lhs - bound) = {worst:.3g}\n"


COMMANDS = {
    "bound": cmd_bound,
    "violation": cmd_violation,
    "critical": cmd_critical,
    "scan": cmd_scan,
    "jm": cmd_jm,
    "lemma": cmd_lemma,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", measurements.TrivialInequalityWarning)
            status, text = COMMANDS[cfg.subcommand](cfg)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except UsageError as exc:
        print(f"steerkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except steering.EnumerationGuardError as exc:
        print(f"steerkit: error: {exc} (use --max-strategies or --no-guard)", file=sys.stderr)
        return EXIT_GUARD
    except InvariantFailure as exc:
        print(f"steerkit: invariant failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"steerkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if cfg.output is not None:
        try:
            cfg.output.write_text(text)
        except OSError as exc:
            print(f"steerkit: error: cannot write {cfg.output}: {exc}", file=sys.stderr)
            return EXIT_USAGE
    else:
        sys.stdout.write(text)
    return status


if __name__ == "__main__":
    sys.exit(main())
