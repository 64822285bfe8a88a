"""Command-line entry point: ``coopcache {run,sweep,compare,validate-config}``.

Exit codes: 0 success, 2 configuration error, 3 infeasible scenario.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..actions import ActionSpaceTooLarge
from ..core import EmptyActionSpace
from ..env import ModelHiddenError
from .config import ConfigError, InfeasibleScenario, load_config, parse_agent_label
from .runner import compare, run, sweep

EXIT_OK, EXIT_CONFIG, EXIT_INFEASIBLE = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coopcache", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_ in [("run", "run one agent over the configured seeds"),
                        ("sweep", "converged rho over a range of cache sizes"),
                        ("compare", "cosine similarity of agents to the optimal policy"),
                        ("validate-config", "parse and check a configuration file")]:
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", required=True, help="INI configuration file")
        p.add_argument("--seed", type=int, action="append",
                       help="override the configured seeds (repeatable)")
        p.add_argument("--out", help="output directory (default: [output] path)")
        p.add_argument("--agent", action="append",
                       help="agent label, e.g. qlearning, vfa, mpcc, qlearning-ucc (repeatable)")
        p.add_argument("--discipline", choices=("mds", "uncoded"))
        p.add_argument("--quiet", action="store_true")
    return parser


def _apply_overrides(config, args):
    if args.seed:
        config = replace(config, seeds=tuple(args.seed))
    if args.discipline:
        config = replace(config, agent=replace(config.agent, discipline=args.discipline))
    return config


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    log = None if args.quiet else (lambda msg: print(msg, file=sys.stderr))
    try:
        config = _apply_overrides(load_config(args.config), args)
        agents = args.agent
        if agents and args.discipline == "uncoded":
            agents = [a if "ucc" in a.split("-") else f"{a}-ucc" for a in agents]
        if agents:
            for a in agents:
                parse_agent_label(a, config.agent)
        out = args.out or config.output_path
        if args.command == "validate-config":
            if log:
                log(f"{args.config}: ok")
        elif args.command == "run":
            run(config, out, agents=agents, log=log)
        elif args.command == "sweep":
            K_values = config.sweep_K or (config.params.K,)
            labels = agents or config.sweep_agents or (config.agent.label,)
            sweep(config, K_values, labels, out_dir=out, log=log)
        elif args.command == "compare":
            labels = agents or config.compare_agents or (config.agent.label,)
            compare(config, labels, out_dir=out, log=log)
    except (InfeasibleScenario, EmptyActionSpace) as exc:
        print(f"infeasible scenario: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ConfigError, ActionSpaceTooLarge, ModelHiddenError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
