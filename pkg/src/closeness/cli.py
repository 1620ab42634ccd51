"""Command-line entry point: ``closeness <subcommand> [options]``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import formats
from .adversarial import build_prior, draw_batch, expected_l1_on_a, separation_bound
from .distmodel import make_distribution
from .errors import ClosenessError, GuardError
from .harness import (MassTransport, PriorScaling, compare_report, default_null_suite, empirical_separation,
                      estimate_risk, family_two_level, family_two_spike, family_uniform, family_zipf,
                      fixed_pair, prior_pairs)
from .rates import dk16_rate, identity_rate, lower_rate, regime_table, upper_rate
from .sampling import RngStream, split_and_poissonize
from .testers import TestConstants, calibrate_constants, combined_test

log = logging.getLogger("closeness")

EXIT_OK, EXIT_USAGE, EXIT_GUARD = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def resolve_distribution(source: str):
    """A file path, or a preset ``uniform:D``, ``zipf:D:S``, ``two-level:D``, ``two-spike:K:H``."""
    name, _, rest = source.partition(":")
    args = rest.split(":") if rest else []
    try:
        if name == "uniform":
            return family_uniform(int(args[0]))
        if name == "zipf":
            return family_zipf(int(args[0]), float(args[1]) if len(args) > 1 else 1.0)
        if name == "two-level":
            return family_two_level(int(args[0]))
        if name == "two-spike":
            return family_two_spike(int(args[0]), float(args[1]) if len(args) > 1 else 0.3)
    except (IndexError, ValueError) as exc:
        raise UsageError(f"bad preset {source!r}: {exc}") from exc
    path = Path(source)
    if not path.exists():
        raise UsageError(f"no such distribution file or preset: {source!r}")
    return formats.read_distribution(path)


def _constants(args, d: int, k: int, rng: RngStream) -> TestConstants:
    if args.constants_file:
        return formats.read_constants(args.constants_file)
    log.info("no constants file given; calibrating on the default suite")
    return calibrate_constants(default_null_suite(d), k, args.gamma, args.calib_trials, rng.child(99))


def _samples_from_counts(counts: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(counts.size), counts)


def cmd_test(args, rng):
    if args.raw:
        x_obs = np.asarray(formats.parse_vector(Path(args.x).read_text()), dtype=np.int64)
        y_obs = np.asarray(formats.parse_vector(Path(args.y).read_text()), dtype=np.int64)
        if args.d is None:
            raise UsageError("--d is required with --raw")
        d = args.d
    else:
        cx, cy = formats.read_counts(args.x), formats.read_counts(args.y)
        if cx.size != cy.size:
            raise UsageError(f"count files have different lengths {cx.size} and {cy.size}")
        d = cx.size
        x_obs, y_obs = _samples_from_counts(cx), _samples_from_counts(cy)
    k = args.k if args.k is not None else min(x_obs.size, y_obs.size)
    if k > min(x_obs.size, y_obs.size):
        raise UsageError(f"--k={k} exceeds the smaller sample size {min(x_obs.size, y_obs.size)}")
    gen = rng.child(0).generator()
    x_obs = gen.permutation(x_obs)[:k]
    y_obs = gen.permutation(y_obs)[:k]
    counts = split_and_poissonize(x_obs, y_obs, d, k, gen)
    report = combined_test(counts, _constants(args, d, k, rng))
    return report.to_dict()


def cmd_calibrate(args, rng):
    suite = default_null_suite(args.d)
    if args.dist:
        suite = [resolve_distribution(s) for s in args.dist]
    c = calibrate_constants(suite, args.k, args.gamma, args.trials, rng)
    return c.to_dict()


def cmd_rates(args, rng):
    pi = resolve_distribution(args.dist)
    kinds = ["upper", "lower", "identity", "dk16"] if args.kind == "all" else [args.kind]
    out = {}
    for kind in kinds:
        if kind == "upper":
            out[kind] = upper_rate(pi, args.k, args.u)
        elif kind == "lower":
            out[kind] = lower_rate(pi, args.k, args.v)
        elif kind == "identity":
            out[kind] = identity_rate(pi, args.k)
        else:
            out[kind] = dk16_rate(pi, args.k)
    if args.format == "csv":
        rows = []
        for r in out.values():
            rows += formats.rate_rows(r)
        if args.regimes:
            rows += [dict(kind="regime", **row) for row in formats.regime_rows(regime_table(pi, args.k, args.u))]
        return rows
    doc = {k: v.to_dict() for k, v in out.items()}
    if args.regimes:
        doc["regimes"] = regime_table(pi, args.k, args.u).to_dict()
    return doc


def cmd_simulate(args, rng):
    null = resolve_distribution(args.null)
    alt = resolve_distribution(args.alt) if args.alt else null
    if alt.d != null.d:
        raise UsageError("--null and --alt have different supports")
    c = _constants(args, null.d, args.k, rng)
    r = estimate_risk(c, fixed_pair(null), fixed_pair(alt, null), args.k, args.trials, rng,
                      model=args.model)
    return dict(r.to_dict(), constants=c.to_dict())


def cmd_separation(args, rng):
    pi = resolve_distribution(args.dist)
    c = _constants(args, pi.d, args.k, rng)
    if args.direction == "prior":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            prior = build_prior(pi, args.k, M=args.M)
        direction = PriorScaling(prior)
    elif args.direction == "halves":
        direction = MassTransport.halves(pi)
    else:
        direction = MassTransport.tail(pi, args.k)
    est = empirical_separation(c, pi, args.k, args.gamma, direction, args.trials, rng)
    return dict(est.to_dict(), upper_rate=upper_rate(pi, args.k).rho, lower_rate=lower_rate(pi, args.k).rho)


def cmd_adversarial(args, rng):
    pi = resolve_distribution(args.dist)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        prior = build_prior(pi, args.k, u=args.u, v=args.v, M=args.M, a=args.a,
                            delta=args.delta, gamma_lb=args.gamma_lb)
    doc = {"prior": prior.to_dict(), "warnings": [str(w.message) for w in caught],
           "separation_bound": separation_bound(prior),
           "expected_l1_on_A": expected_l1_on_a(prior, "alt") if args.mode == "alt" else None}
    if args.draws:
        batch = draw_batch(prior, args.draws, rng.generator(), args.mode, args.scale)
        l1 = np.abs(batch.p - batch.q).sum(axis=1)
        doc["draws"] = {"mode": args.mode, "n": args.draws, "retries": batch.retries,
                        "l1_mean": float(l1.mean()), "l1": l1.tolist()}
        if args.keep_draws:
            doc["draws"]["q"] = batch.q.tolist()
            doc["draws"]["p"] = batch.p.tolist()
    return doc


def cmd_report(args, rng):
    if args.preset == "two-spike":
        pi = family_two_spike(args.k_shape or args.k, args.h)
    elif args.dist:
        pi = resolve_distribution(args.dist)
    else:
        raise UsageError("report needs --dist or --preset")
    c = formats.read_constants(args.constants_file) if args.constants_file else None
    opts = {"separation": args.separation, "seed": args.seed, "trials": args.trials}
    doc = compare_report(pi, args.k, args.gamma, c, opts)
    if args.preset == "two-spike":
        doc["preset"] = {"name": "two-spike", "k_shape": args.k_shape or args.k, "h": args.h,
                         "reference_scale": 1.0 / np.sqrt(args.k) + args.h}
    return doc


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="64-bit RNG seed")
    common.add_argument("--format", choices=("json", "csv"), default=argparse.SUPPRESS)
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    parser = _Parser(prog="closeness", description="Two-sample closeness testing toolkit.",
                     parents=[common])
    parser.set_defaults(seed=0, format="json", out=None, verbose=False)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def calib_opts(p):
        p.add_argument("--constants-file", help="JSON written by 'calibrate'")
        p.add_argument("--gamma", type=float, default=0.1)
        p.add_argument("--calib-trials", type=int, default=2000)

    p = sub.add_parser("test", parents=[common], help="run the combined test on two samples")
    p.add_argument("x", help="count file for the first sample (or raw sample with --raw)")
    p.add_argument("y", help="count file for the second sample")
    p.add_argument("--raw", action="store_true", help="files list category indices, one per line")
    p.add_argument("--d", type=int, help="support size (required with --raw)")
    p.add_argument("--k", type=int, help="sample size used per side (default: smaller sample)")
    p.add_argument("--json", action="store_true", help="same as --format json")
    calib_opts(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("calibrate", parents=[common], help="calibrate the four multipliers")
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--dist", action="append", help="replace the default suite (repeatable)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("rates", parents=[common], help="evaluate separation-rate formulas")
    p.add_argument("--dist", required=True, help="distribution file or preset")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--u", type=float, default=0.5)
    p.add_argument("--v", type=float, default=0.001)
    p.add_argument("--kind", choices=("upper", "lower", "identity", "dk16", "all"), default="all")
    p.add_argument("--regimes", action="store_true", help="include the regime table")
    p.set_defaults(func=cmd_rates)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo risk of the combined test")
    p.add_argument("--null", required=True, help="q (and p under the null)")
    p.add_argument("--alt", help="p under the alternative (default: equal to --null)")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--model", choices=("direct", "split"), default="direct")
    calib_opts(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("separation", parents=[common], help="bisection search for the separation distance")
    p.add_argument("--dist", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--trials", type=int, default=400)
    p.add_argument("--direction", choices=("tail", "halves", "prior"), default="tail")
    p.add_argument("--M", type=int, default=4)
    calib_opts(p)
    p.set_defaults(func=cmd_separation)

    p = sub.add_parser("adversarial", parents=[common], help="build a hard prior and draw from it")
    p.add_argument("--dist", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--u", type=float, default=0.1)
    p.add_argument("--v", type=float, default=0.001)
    p.add_argument("--M", type=int, default=4)
    p.add_argument("--a", type=float, default=3.0)
    p.add_argument("--delta", type=float, default=0.125)
    p.add_argument("--gamma-lb", type=float, default=0.1)
    p.add_argument("--draws", type=int, default=0)
    p.add_argument("--mode", choices=("null", "alt", "smalltail"), default="alt")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--keep-draws", action="store_true")
    p.set_defaults(func=cmd_adversarial)

    p = sub.add_parser("report", parents=[common], help="side-by-side rate comparison")
    p.add_argument("--dist")
    p.add_argument("--preset", choices=("two-spike",))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--k-shape", type=int, help="k used to shape the two-spike vector (default --k)")
    p.add_argument("--h", type=float, default=0.3)
    p.add_argument("--gamma", type=float, default=0.1)
    p.add_argument("--constants-file")
    p.add_argument("--separation", action="store_true")
    p.add_argument("--trials", type=int, default=400)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "json", False):
        args.format = "json"
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = args.func(args, RngStream(args.seed))
        text = formats.emit(doc, args.format)
    except UsageError as exc:
        print(f"closeness: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"closeness: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (GuardError, ClosenessError) as exc:
        print(f"closeness: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
