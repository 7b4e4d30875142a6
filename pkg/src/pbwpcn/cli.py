"""Command-line front end.

Subcommands: paper-instance, coop, auction, protocol, sweep.  A JSON config
file supplies defaults; command-line flags override it.  Exit codes: 0 on
success, 2 on configuration errors, 1 on numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import os
import sys

from .auction import AuctionConfig, run_auction
from .coop import derive_pair, waterfill
from .errors import ConvergenceError, DomainError, ProtocolError
from .experiments import (
    ExperimentConfig,
    _atomic_write,
    load_paper_instance,
    sweep,
    write_instance_csvs,
)
from .protocol import make_views, run_auction_protocol, run_coop_protocol

log = logging.getLogger("pbwpcn")

GOLDEN_ALPHA = (5.6834, 4.7802, 0.4543)
GOLDEN_E_LIM = (0.1676, 0.0989, 0.3299)
GOLDEN_E_OPT = (0.6325, 0.8307, 1.3247)

_CONFIG_KEYS = {
    "n_pairs": int,
    "d_ap_src": (int, float),
    "d_pb_src": (int, float),
    "pathloss_zeta": (int, float),
    "antennas_m": int,
    "trials": int,
    "seed": int,
    "e_b_tot_grid": list,
    "protocol": str,
    "output_path": str,
    "reserve_price": (int, float),
    "price_step": (int, float),
    "e_b_tot": (int, float),
}


class ConfigError(Exception):
    pass


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top-level value must be an object")
    for key, value in data.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}: unknown config field {key!r}")
        if not isinstance(value, _CONFIG_KEYS[key]):
            raise ConfigError(
                f"{path}: field {key!r} has wrong type {type(value).__name__}"
            )
    if "e_b_tot_grid" in data:
        if not all(isinstance(v, (int, float)) for v in data["e_b_tot_grid"]):
            raise ConfigError(f"{path}: e_b_tot_grid entries must be numbers")
        data["e_b_tot_grid"] = tuple(float(v) for v in data["e_b_tot_grid"])
    return data


def _multiset_close(computed, golden, rtol=1e-3) -> bool:
    a = sorted(computed)
    b = sorted(golden)
    return all(math.isclose(x, y, rel_tol=rtol) for x, y in zip(a, b))


def cmd_paper_instance(args, config) -> int:
    params, channels = load_paper_instance()
    deriveds = [derive_pair(params, ch, w) for ch, w in zip(channels, params.weights)]
    alphas = [d.alpha for d in deriveds]
    e_lims = [d.e_lim for d in deriveds]
    e_opts = [d.e_opt for d in deriveds]
    print("pair constants (index order):")
    print("  alpha  [utility/Joule]:", " ".join(f"{a:.4f}" for a in alphas))
    print("  E_lim  [Joule]        :", " ".join(f"{e:.4f}" for e in e_lims))
    print("  E_opt  [Joule]        :", " ".join(f"{e:.4f}" for e in e_opts))
    if args.check:
        ok = (
            _multiset_close(alphas, GOLDEN_ALPHA)
            and _multiset_close(e_lims, GOLDEN_E_LIM)
            and _multiset_close(e_opts, GOLDEN_E_OPT)
        )
        print("check:", "PASS" if ok else "FAIL")
        return 0 if ok else 1
    return 0


def cmd_coop(args, config) -> int:
    ebtot = args.ebtot if args.ebtot is not None else config.get("e_b_tot", 1.0)
    params, channels = load_paper_instance(e_b_tot=ebtot)
    res = waterfill(params, channels)
    print(f"nu [utility/Joule]: {res.nu:.6f}")
    print("E* [Joule]        :", " ".join(f"{e:.6f}" for e in res.e_star))
    print("tau* [fraction]   :", " ".join(f"{t:.6f}" for t in res.tau_star))
    print(f"welfare [utility] : {res.welfare:.6f}")
    print(f"sum E* [Joule]    : {math.fsum(res.e_star):.10f}")
    return 0


def _auction_cfg(args, config) -> AuctionConfig:
    mu0 = args.mu0 if args.mu0 is not None else config.get("reserve_price", 0.001)
    delta = args.delta if args.delta is not None else config.get("price_step", 0.01)
    return AuctionConfig(reserve_price=mu0, step=delta)


def cmd_auction(args, config) -> int:
    ebtot = args.ebtot if args.ebtot is not None else config.get("e_b_tot", 1.0)
    params, channels = load_paper_instance(e_b_tot=ebtot)
    outcome = run_auction(params, channels, _auction_cfg(args, config))
    if outcome.pb_quit:
        print("beacon quit the trade (aggregate demand within budget at reserve)")
    print("E~* [Joule]       :", " ".join(f"{e:.6f}" for e in outcome.e_final))
    print("tau~* [fraction]  :", " ".join(f"{t:.6f}" for t in outcome.tau_final))
    print("payments [utility]:", " ".join(f"{p:.6f}" for p in outcome.payment))
    print(f"beacon revenue    : {outcome.pb_utility:.6f}")
    print(f"rounds used       : {outcome.rounds_used}")
    if args.out:
        path = os.path.join(args.out, "auction_transcript.jsonl")
        _atomic_write(path, outcome.transcript_jsonl() + "\n")
        print(f"transcript written to {path}")
    return 0


def cmd_protocol(args, config) -> int:
    ebtot = args.ebtot if args.ebtot is not None else config.get("e_b_tot", 1.0)
    params, channels = load_paper_instance(e_b_tot=ebtot)
    pb_view, ap_views = make_views(params, channels)
    if args.which == "coop":
        result, bus = run_coop_protocol(pb_view, ap_views)
        print(f"nu: {result.nu:.6f}  rounds: {result.rounds}")
        print("E* [Joule]:", " ".join(f"{e:.6f}" for e in result.e_star))
    else:
        outcome, bus = run_auction_protocol(pb_view, ap_views, _auction_cfg(args, config))
        print(f"rounds: {outcome.rounds_used}  quit: {outcome.pb_quit}")
        print("E~* [Joule]:", " ".join(f"{e:.6f}" for e in outcome.e_final))
    text = bus.transcript_jsonl() + "\n"
    if args.out:
        path = os.path.join(args.out, f"protocol_{args.which}.jsonl")
        _atomic_write(path, text)
        print(f"transcript written to {path}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_sweep(args, config) -> int:
    fields = {f.name for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {k: v for k, v in config.items() if k in fields}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.seed is not None:
        kwargs["seed"] = args.seed
    outdir = args.out or kwargs.get("output_path") or "out"
    kwargs["output_path"] = outdir
    cfg = ExperimentConfig(**kwargs)
    log.info("sweep: %d trials, %d budget points", cfg.trials, len(cfg.e_b_tot_grid))
    records = sweep(cfg)
    write_instance_csvs(outdir)
    print(f"{len(records)} sweep records written under {outdir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pbwpcn",
        description="Beacon-assisted wireless-powered network resource allocation",
    )
    parser.add_argument("--config", help="JSON config file")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("paper-instance", help="print the fixed-instance constants")
    p.add_argument("--check", action="store_true", help="verify against golden values")
    p.set_defaults(func=cmd_paper_instance)

    p = sub.add_parser("coop", help="water-filling allocation on the fixed instance")
    p.add_argument("--ebtot", type=float, help="beacon energy budget [Joule]")
    p.set_defaults(func=cmd_coop)

    p = sub.add_parser("auction", help="clinching auction on the fixed instance")
    p.add_argument("--ebtot", type=float)
    p.add_argument("--delta", type=float, help="price step")
    p.add_argument("--mu0", type=float, help="reserve price")
    p.add_argument("--out", help="output directory for the transcript")
    p.set_defaults(func=cmd_auction)

    p = sub.add_parser("protocol", help="run the message-passing harness")
    p.add_argument("--which", choices=("coop", "auction"), default="coop")
    p.add_argument("--ebtot", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--mu0", type=float)
    p.add_argument("--out", help="output directory for the transcript")
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("sweep", help="Monte Carlo sweep, CSV outputs")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("PBWPCN_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(args, config)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, ProtocolError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
