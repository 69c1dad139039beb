"""Command-line entry points.

Exit codes: 0 on success, 1 for usage or configuration errors, 2 for
runtime failures (victim transport, inconsistent artifacts, and the like).
"""

from __future__ import annotations

import argparse
import json
import sys

from .harness import (
    ConfigError,
    VictimSpec,
    build_victim,
    evaluate_instance,
    load_config,
    run_campaign,
    run_sweep,
)
from .serving import make_http_server, serve_stdio


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this tool reserves 2 for runtime
    failures, so usage errors exit 1 instead."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(payload) -> None:
    print(json.dumps(payload, indent=2, sort_keys=True))


def _parse_value(token: str):
    try:
        return json.loads(token)
    except json.JSONDecodeError:
        return token


def _cmd_attack(args) -> int:
    config = load_config(args.config)
    if not 0 <= args.instance < config.instances.count:
        raise ConfigError(
            f"--instance must be in 0..{config.instances.count - 1}, "
            f"got {args.instance}"
        )
    outcome = evaluate_instance(config, args.instance)
    record = outcome.record
    _emit(
        {
            "instance": record.instance,
            "ablation": config.attack.ablation,
            "objmc_clean": record.objmc_clean,
            "objmc_attack": record.objmc_attack,
            "success": record.success,
            "queries_used": record.queries_used,
            "budget_used": record.budget_used,
            "incomplete": record.incomplete,
            "velocity_objective_clean": outcome.velocity_objective_clean,
            "velocity_objective_attack": outcome.velocity_objective_attack,
        }
    )
    return 0


def _cmd_campaign(args) -> int:
    config = load_config(args.config)
    campaign = run_campaign(config)
    from .reporting import summary_payload

    _emit(summary_payload(campaign))
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    values = [_parse_value(tok) for tok in args.values.split(",") if tok != ""]
    if not values:
        raise ConfigError("--values needs at least one value")
    sweep = run_sweep(config, args.param, values)
    _emit(
        [
            {
                "value": point.value,
                "asr": point.campaign.asr,
                "mean_objmc_clean": point.campaign.mean_objmc_clean,
                "mean_objmc_attack": point.campaign.mean_objmc_attack,
            }
            for point in sweep.points
        ]
    )
    return 0


def _cmd_eval(args) -> int:
    from .reporting import load_campaign, summary_payload

    campaign = load_campaign(args.records)
    _emit(summary_payload(campaign))
    return 0


def _cmd_report(args) -> int:
    from .reporting import emit_report

    written = emit_report(args.in_dir, args.out_dir)
    for path in written:
        print(path)
    return 0


def _cmd_victim_serve(args) -> int:
    spec = VictimSpec(
        kind=args.kind,
        jitter_sigma=args.jitter_sigma,
        stiffness=args.stiffness,
        damping=args.damping,
        speed_limit=args.speed_limit,
        noise_sigma=args.noise_sigma,
        point_spread=args.point_spread,
        grid_height=args.grid_height,
        grid_width=args.grid_width,
        align_iterations=args.align_iterations,
        align_step=args.align_step,
    )
    handle = build_victim(spec)
    try:
        if args.transport == "stdio":
            serve_stdio(handle.fn)
            return 0
        server = make_http_server(handle.fn, args.host, args.port)
        print(json.dumps({"port": server.server_address[1]}), flush=True)
        try:
            server.serve_forever()
        except KeyboardInterrupt:
            pass
        finally:
            server.server_close()
        return 0
    finally:
        handle.close()


def build_parser() -> _Parser:
    parser = _Parser(prog="trajattack", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_attack = sub.add_parser("attack", help="attack one instance and print its record")
    p_attack.add_argument("--config", required=True)
    p_attack.add_argument("--instance", type=int, default=0)
    p_attack.set_defaults(fn=_cmd_attack)

    p_campaign = sub.add_parser("campaign", help="run every instance in the config")
    p_campaign.add_argument("--config", required=True)
    p_campaign.set_defaults(fn=_cmd_campaign)

    p_sweep = sub.add_parser("sweep", help="one campaign per value of a config field")
    p_sweep.add_argument("--config", required=True)
    p_sweep.add_argument("--param", required=True, help="dotted field, e.g. attack.query_budget")
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    p_sweep.set_defaults(fn=_cmd_sweep)

    p_eval = sub.add_parser("eval", help="recompute aggregates from persisted records")
    p_eval.add_argument("--records", required=True, help="campaign output directory")
    p_eval.set_defaults(fn=_cmd_eval)

    p_report = sub.add_parser("report", help="render tables and figures from results")
    p_report.add_argument("--in", dest="in_dir", required=True)
    p_report.add_argument("--out", dest="out_dir", required=True)
    p_report.set_defaults(fn=_cmd_report)

    p_serve = sub.add_parser("victim-serve", help="expose a built-in victim over a transport")
    p_serve.add_argument("--kind", required=True, choices=("faithful", "inertial", "coordfield"))
    p_serve.add_argument("--transport", choices=("stdio", "http"), default="stdio")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=0)
    p_serve.add_argument("--jitter-sigma", type=float, default=0.0)
    p_serve.add_argument("--stiffness", type=float, default=0.3)
    p_serve.add_argument("--damping", type=float, default=0.2)
    p_serve.add_argument("--speed-limit", type=float, default=4.0)
    p_serve.add_argument("--noise-sigma", type=float, default=0.0)
    p_serve.add_argument("--point-spread", type=float, default=0.0)
    p_serve.add_argument("--grid-height", type=int, default=4)
    p_serve.add_argument("--grid-width", type=int, default=4)
    p_serve.add_argument("--align-iterations", type=int, default=50)
    p_serve.add_argument("--align-step", type=float, default=0.25)
    p_serve.set_defaults(fn=_cmd_victim_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - boundary for exit-code mapping
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
