"""Command-line front end.

Exit codes:

    0  success
    1  bad arguments, bad config, or unreadable/malformed files
    2  optimize: max_iter reached without convergence
    3  optimize: numerical failure
    4  codebook lookup: miss
    5  codebook file has an unsupported format version
"""

import argparse
import json
import os
import sys
import time

from noran.channel import ChannelRealization, sample_rayleigh_channel
from noran.codebook import (
    build_codebook,
    load_codebook,
    lookup,
    matrix_from_json,
    matrix_to_json,
    save_codebook,
)
from noran.config import load_config
from noran.errors import (
    CodebookFormatError,
    ConfigError,
    NumericalFailureError,
    UnsupportedVersionError,
)
from noran.experiments import run_ber_sweep, run_sc_sweep, write_csv
from noran.optimizer import CcpConfig, DcObjective, ccp_solve
from noran.rng import RngStream

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CONVERGED = 2
EXIT_NUMERICAL = 3
EXIT_MISS = 4
EXIT_VERSION = 5

OPTIMIZE_OUTPUT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["sigma_u2", "sigma_k2", "secrecy", "iterations", "converged"],
    "properties": {
        "sigma_u2": {"type": "number", "minimum": 0},
        "sigma_k2": {"type": "number", "minimum": 0},
        "secrecy": {"type": "number"},
        "iterations": {"type": "integer", "minimum": 0},
        "converged": {"type": "boolean"},
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; 2 already means "not converged"
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _init_arg(text):
    if text in ("half-split", "full-signal"):
        return text
    try:
        u, k = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected half-split, full-signal, or 'u,k'") from None
    return (u, k)


def cmd_optimize(args):
    try:
        dc = DcObjective(
            a=args.gain_g, b=args.gain_h, sigma_n2=args.sigma_n2,
            sigma_e2=args.sigma_e2, p_budget=args.power,
        )
        cfg = CcpConfig(max_iter=args.max_iter, tol=args.tol, init=args.init)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        state = ccp_solve(dc, cfg)
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    result = {
        "sigma_u2": state.alloc.sigma_u2,
        "sigma_k2": state.alloc.sigma_k2,
        "secrecy": state.secrecy,
        "iterations": state.iterations,
        "converged": state.converged,
    }
    if args.json:
        print(json.dumps(result))
    else:
        print(f"sigma_u2   = {result['sigma_u2']:.10g}")
        print(f"sigma_k2   = {result['sigma_k2']:.10g}")
        print(f"secrecy    = {result['secrecy']:.10g} bit/channel use")
        print(f"iterations = {result['iterations']}")
        print(f"converged  = {str(result['converged']).lower()}")
    return EXIT_OK if state.converged else EXIT_NOT_CONVERGED


def _realizations(run):
    exp = run.experiment
    P = exp.p_budget
    sigma_n2 = P * 10.0 ** (-exp.snr_bob_db[0] / 10.0)
    sigma_e2 = P * 10.0 ** (-exp.snr_eve_db[0] / 10.0)
    out = []
    for i in range(run.codebook_realizations):
        rng = RngStream.derive(exp.master_seed, i)
        h = sample_rayleigh_channel(exp.n_rx[0], exp.n_tx[0], rng)
        g = sample_rayleigh_channel(exp.n_eve[0], exp.n_tx[0], rng)
        out.append(ChannelRealization(h, g, sigma_n2, sigma_e2))
    return out


def _codebook_build(args):
    run = load_config(args.config, args.seed)
    exp = run.experiment
    reals = _realizations(run)
    cb = build_codebook(
        reals, exp.delta, exp.p_budget, exp.ccp, exp.master_seed,
        precoder_mode=exp.precoder_mode, eve_model=exp.eve_model,
    )
    save_codebook(cb, args.out)
    if args.dump_csi:
        os.makedirs(args.dump_csi, exist_ok=True)
        for i, ch in enumerate(reals):
            with open(os.path.join(args.dump_csi, f"csi_{i:04d}.json"), "w", encoding="utf-8") as fh:
                json.dump({"h": matrix_to_json(ch.h)}, fh)
    print(f"wrote {len(cb)} entries ({len(reals)} realizations) to {args.out}")
    return EXIT_OK


def _codebook_show(args):
    cb = load_codebook(args.input)
    k = [e.sigma_k2 for e in cb.entries.values()]
    u = [e.sigma_u2 for e in cb.entries.values()]
    print(f"entries          {len(cb)}")
    print(f"delta            {cb.delta:.10g}")
    print(f"p_budget         {cb.p_budget:.10g}")
    print(f"sigma_n2         {cb.sigma_n2:.10g}")
    print(f"sigma_e2_assumed {cb.sigma_e2_assumed:.10g}")
    if k:
        print(f"sigma_k2 min/mean/max  {min(k):.6g} / {sum(k) / len(k):.6g} / {max(k):.6g}")
        print(f"sigma_u2 min/mean/max  {min(u):.6g} / {sum(u) / len(u):.6g} / {max(u):.6g}")
    return EXIT_OK


def _read_csi(path):
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    rows = doc["h"] if isinstance(doc, dict) else doc
    return matrix_from_json(rows)


def _codebook_lookup(args):
    cb = load_codebook(args.input)
    try:
        h = _read_csi(args.csi)
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: cannot read CSI from {args.csi}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    entry = lookup(cb, h)
    if entry is None:
        print("miss")
        return EXIT_MISS
    print(json.dumps({
        "key64": str(entry.key.key64),
        "sigma_u2": entry.sigma_u2,
        "sigma_k2": entry.sigma_k2,
        "noise_seed": str(entry.noise_seed),
        "precoder": matrix_to_json(entry.precoder.p),
    }))
    return EXIT_OK


def cmd_codebook(args):
    action = {"build": _codebook_build, "show": _codebook_show, "lookup": _codebook_lookup}
    try:
        return action[args.action](args)
    except UnsupportedVersionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VERSION
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, CodebookFormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def cmd_simulate(args):
    try:
        run = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    sweep = run_sc_sweep if args.kind == "sc" else run_ber_sweep
    start = time.perf_counter()
    rows = sweep(run.experiment, workers=args.workers)
    try:
        write_csv(rows, args.out)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"{args.kind}: {len(rows)} rows -> {args.out} in {time.perf_counter() - start:.2f} s")
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="noran", description="NORAN secrecy optimization and simulation")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    opt = sub.add_parser("optimize", help="solve the power split for one channel instance")
    opt.add_argument("--gain-h", type=float, required=True, help="Bob effective gain ||Hp||^2")
    opt.add_argument("--gain-g", type=float, required=True, help="Eve effective gain ||Gp||^2")
    opt.add_argument("--sigma-n2", type=float, default=1.0)
    opt.add_argument("--sigma-e2", type=float, default=1.0)
    opt.add_argument("--power", type=float, required=True, help="total power budget P")
    opt.add_argument("--init", type=_init_arg, default="half-split")
    opt.add_argument("--tol", type=float, default=1e-8)
    opt.add_argument("--max-iter", type=int, default=200)
    opt.add_argument("--json", action="store_true", help="machine-readable output")
    opt.set_defaults(func=cmd_optimize)

    cb = sub.add_parser("codebook", help="build, inspect, or query a codebook")
    cb_sub = cb.add_subparsers(dest="action", required=True, parser_class=_Parser)
    b = cb_sub.add_parser("build")
    b.add_argument("--config")
    b.add_argument("--out", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--dump-csi", metavar="DIR", help="also write each enrolled H as a CSI file")
    show = cb_sub.add_parser("show")
    show.add_argument("--in", dest="input", required=True)
    look = cb_sub.add_parser("lookup")
    look.add_argument("--in", dest="input", required=True)
    look.add_argument("--csi", required=True)
    cb.set_defaults(func=cmd_codebook)

    sim = sub.add_parser("simulate", help="run a secrecy-capacity or BER sweep")
    sim.add_argument("kind", choices=("sc", "ber"))
    sim.add_argument("--config")
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--workers", type=int, default=1)
    sim.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
