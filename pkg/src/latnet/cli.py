"""Command-line front end.

Subcommands: bounds, chain build, sim-mac, sim-net, ff-capacity, sim-ff,
verify.  Outputs are deterministic given identical inputs, seeds and thread
counts: every CSV starts with a config-echo comment (no timestamps), floats
print with 12 significant digits, and all randomness is seed-derived.

Exit codes: 0 success, 1 verification failure, 2 file not found, 3 schema
violation, 4 guard exceeded, 5 model validation error, 6 infeasible chain
tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import (
    ChainMismatchError,
    GuardError,
    InfeasibleToleranceError,
    NetworkValidationError,
    SchemaError,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_NOT_FOUND = 2
EXIT_SCHEMA = 3
EXIT_GUARD = 4
EXIT_VALIDATION = 5
EXIT_INFEASIBLE = 6


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def _echo_line(args_dict: dict) -> str:
    return "# config: " + json.dumps(args_dict, sort_keys=True, default=str)


def _write_output(text: str, out_path: str | None):
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[dict], header: list[str], config: dict) -> str:
    lines = [_echo_line(config), ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(row[h]) for h in header))
    return "\n".join(lines) + "\n"


def _cut_label(members) -> str:
    return "{" + "|".join(str(v) for v in sorted(members)) + "}"


def _load_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from exc


def cmd_bounds(args) -> int:
    from .bounds import rate_report
    from .network import load_network

    net = load_network(args.network)
    rep = rate_report(net)
    config = {"command": "bounds", "network": args.network, "format": args.format}
    if args.format == "json":
        doc = {
            "upper_bound_bits": rep.upper_bound,
            "achievable_bits": rep.achievable,
            "gap_bound_bits": rep.gap_bound,
            "per_cut": [
                {
                    "cut": _cut_label(m),
                    "upper_term_bits": t[0],
                    "achievable_term_bits": t[1],
                }
                for m, t in rep.per_cut_terms.items()
            ],
            "upper_argmin": [_cut_label(m) for m in rep.upper_argmin],
            "achievable_argmin": [_cut_label(m) for m in rep.achievable_argmin],
        }
        _write_output(json.dumps(doc, indent=2, sort_keys=True) + "\n", args.out)
        return EXIT_OK
    rows = [
        {"quantity": "upper_bound", "cut": "", "bits": rep.upper_bound},
        {"quantity": "achievable", "cut": "", "bits": rep.achievable},
        {"quantity": "gap_bound", "cut": "", "bits": rep.gap_bound},
    ]
    for m, (ub, ach) in rep.per_cut_terms.items():
        rows.append({"quantity": "cut_upper_term", "cut": _cut_label(m), "bits": ub})
        rows.append({"quantity": "cut_achievable_term", "cut": _cut_label(m), "bits": ach})
    _write_output(_csv(rows, ["quantity", "cut", "bits"], config), args.out)
    return EXIT_OK


def cmd_chain_build(args) -> int:
    from .chain import chain_from_spec

    spec = _load_json(args.config)
    chain = chain_from_spec(spec)
    config = {"command": "chain build", "config": args.config, "seed": chain.seed}
    rows = chain.summary_rows()
    header = ["level", "target_power", "achieved_power", "power_slack", "multiplier", "rate_bits", "partitioning_ratio"]
    _write_output(_csv(rows, header, config), args.out)
    return EXIT_OK


def cmd_sim_mac(args) -> int:
    from .chain import chain_from_spec
    from .macsim import simulate_mac

    spec = _load_json(args.chain)
    chain = chain_from_spec(spec)
    res = simulate_mac(
        chain,
        args.trials,
        args.seed,
        noise_variance=args.noise_var,
        alpha_override=args.alpha_override,
        threads=args.threads,
    )
    config = {
        "command": "sim-mac",
        "chain": args.chain,
        "trials": args.trials,
        "seed": args.seed,
        "noise_var": args.noise_var,
        "alpha_override": args.alpha_override,
        "threads": args.threads,
    }
    row = {
        "users": chain.user_count,
        "dimension": chain.dimension,
        "trials": res.trials,
        "seed": res.seed,
        "rate_bits": res.rate_bits,
        "rate_target_bits": res.rate_target_bits,
        "backoff_bits": res.backoff_bits,
        "errors": res.errors,
        "error_rate": res.error_rate,
        "stderr": res.stderr,
        "exponent_bound": res.exponent_bound,
    }
    header = list(row)
    _write_output(_csv([row], header, config), args.out)
    return EXIT_OK


def _load_chain_dir(net, path: str):
    from .chain import chain_from_spec

    chains = {}
    for v in net.vertices:
        if v == net.source:
            continue
        node_path = os.path.join(path, f"node_{v}.json")
        if not os.path.exists(node_path):
            raise FileNotFoundError(node_path)
        chains[v] = chain_from_spec(_load_json(node_path))
    return chains


def cmd_sim_net(args) -> int:
    from .netsim import run_multicast
    from .network import load_network

    net = load_network(args.network)
    chains = _load_chain_dir(net, args.chains)
    out = run_multicast(
        net,
        chains,
        block_count=args.blocks,
        trials=args.trials,
        seed=args.seed,
        source_messages=args.messages,
        noise_variance=args.noise_var,
    )
    config = {
        "command": "sim-net",
        "network": args.network,
        "chains": args.chains,
        "blocks": args.blocks,
        "trials": args.trials,
        "seed": args.seed,
        "messages": args.messages,
        "noise_var": args.noise_var,
        "threads": args.threads,
    }
    rows = [
        {
            "destination": d,
            "blocks": out.block_count,
            "trials": out.trials,
            "messages": out.source_messages,
            "errors": out.destination_errors[d],
            "error_rate": out.destination_errors[d] / out.trials,
        }
        for d in sorted(out.destination_errors)
    ]
    rows.append(
        {
            "destination": "any",
            "blocks": out.block_count,
            "trials": out.trials,
            "messages": out.source_messages,
            "errors": out.any_destination_errors,
            "error_rate": out.error_rate,
        }
    )
    header = ["destination", "blocks", "trials", "messages", "errors", "error_rate"]
    _write_output(_csv(rows, header, config), args.out)
    return EXIT_OK


def cmd_ff_capacity(args) -> int:
    from .ffield import finite_field_capacity, finite_field_cut_terms
    from .network import load_network

    net = load_network(args.network)
    cap = finite_field_capacity(net)
    config = {"command": "ff-capacity", "network": args.network}
    rows = [{"quantity": "capacity", "cut": "", "bits": cap}]
    for m, t in finite_field_cut_terms(net).items():
        rows.append({"quantity": "cut_term", "cut": _cut_label(m), "bits": t})
    _write_output(_csv(rows, ["quantity", "cut", "bits"], config), args.out)
    return EXIT_OK


def cmd_sim_ff(args) -> int:
    from .ffield import random_linear_code, run_finite_field_multicast
    from .network import load_network

    net = load_network(args.network)
    codes_spec = _load_json(args.codes)
    allowed = {"blocklength", "dimensions", "seed"}
    unknown = set(codes_spec) - allowed
    if unknown:
        raise SchemaError(f"unknown field {sorted(unknown)[0]!r} in codes config")
    for key in ("blocklength", "dimensions"):
        if key not in codes_spec:
            raise SchemaError(f"missing field {key!r} in codes config")
    n = int(codes_spec["blocklength"])
    code_seed = int(codes_spec.get("seed", 0))
    codes = {}
    for v in net.vertices:
        if v == net.source:
            continue
        key = str(v)
        if key not in codes_spec["dimensions"]:
            raise SchemaError(f"codes config missing dimension for node {v}")
        codes[v] = random_linear_code(n, int(codes_spec["dimensions"][key]), net.field_size, seed=code_seed + v)
    out = run_finite_field_multicast(
        net,
        codes,
        block_count=args.blocks,
        trials=args.trials,
        seed=args.seed,
        source_messages=args.messages,
    )
    config = {
        "command": "sim-ff",
        "network": args.network,
        "codes": args.codes,
        "blocks": args.blocks,
        "trials": args.trials,
        "seed": args.seed,
        "messages": args.messages,
        "threads": args.threads,
    }
    rows = [
        {
            "destination": d,
            "blocks": out.block_count,
            "trials": out.trials,
            "messages": out.source_messages,
            "errors": out.destination_errors[d],
            "error_rate": out.destination_errors[d] / out.trials,
        }
        for d in sorted(out.destination_errors)
    ]
    rows.append(
        {
            "destination": "any",
            "blocks": out.block_count,
            "trials": out.trials,
            "messages": out.source_messages,
            "errors": out.any_destination_errors,
            "error_rate": out.error_rate,
        }
    )
    header = ["destination", "blocks", "trials", "messages", "errors", "error_rate"]
    _write_output(_csv(rows, header, config), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .verify import SUITES, run_suites

    if args.networks != "random":
        raise SchemaError(f"field 'networks' supports only 'random', got {args.networks!r}")
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    checks = run_suites(names, seed=args.seed, count=args.count)
    lines = []
    for c in checks:
        lines.append(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")
    ok = all(c.passed for c in checks)
    lines.append(f"{'PASS' if ok else 'FAIL'} overall ({sum(c.passed for c in checks)}/{len(checks)} checks)")
    _write_output("\n".join(lines) + "\n", args.out)
    return EXIT_OK if ok else EXIT_VERIFY_FAILED


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latnet", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0, help="base RNG seed")
        p.add_argument("--out", default=None, help="output file (default stdout)")
        p.add_argument("--format", choices=["csv", "json"], default="csv")
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("bounds", help="evaluate capacity bounds for a Gaussian network")
    p.add_argument("--network", required=True)
    common(p)
    p.set_defaults(fn=cmd_bounds)

    p = sub.add_parser("chain", help="lattice chain tools")
    chain_sub = p.add_subparsers(dest="chain_command", required=True)
    pb = chain_sub.add_parser("build", help="build a chain and print the power/rate table")
    pb.add_argument("--config", required=True)
    common(pb)
    pb.set_defaults(fn=cmd_chain_build)

    p = sub.add_parser("sim-mac", help="Monte Carlo of the dithered lattice MAC")
    p.add_argument("--chain", required=True, help="chain config file")
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--alpha-override", type=float, default=None)
    p.add_argument("--noise-var", type=float, default=1.0)
    common(p)
    p.set_defaults(fn=cmd_sim_mac)

    p = sub.add_parser("sim-net", help="end-to-end multicast simulation")
    p.add_argument("--network", required=True)
    p.add_argument("--chains", required=True, help="directory with node_<v>.json chain configs")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--messages", type=int, required=True, help="source messages per block")
    p.add_argument("--noise-var", type=float, default=1.0)
    common(p)
    p.set_defaults(fn=cmd_sim_net)

    p = sub.add_parser("ff-capacity", help="finite-field multicast capacity")
    p.add_argument("--network", required=True)
    common(p)
    p.set_defaults(fn=cmd_ff_capacity)

    p = sub.add_parser("sim-ff", help="finite-field multicast simulation")
    p.add_argument("--network", required=True)
    p.add_argument("--codes", required=True, help="codes config file")
    p.add_argument("--blocks", type=int, required=True)
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--messages", type=int, required=True)
    common(p)
    p.set_defaults(fn=cmd_sim_ff)

    p = sub.add_parser("verify", help="run model property suites")
    p.add_argument("--suite", default="all")
    p.add_argument("--networks", default="random")
    p.add_argument("--count", type=int, default=None, help="random-network count for the gap suite")
    common(p)
    p.set_defaults(fn=cmd_verify)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except FileNotFoundError as exc:
        name = exc.filename if getattr(exc, "filename", None) else exc
        print(f"error: file not found: {name}", file=sys.stderr)
        return EXIT_NOT_FOUND
    except SchemaError as exc:
        print(f"error: schema: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except GuardError as exc:
        print(f"error: guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except InfeasibleToleranceError as exc:
        print(f"error: infeasible tolerance: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NetworkValidationError, ChainMismatchError, ValueError) as exc:
        print(f"error: validation: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
