"""
peergeo command line: mc, instruments, estimate, twostar.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

import argparse
import logging
import sys
from typing import List, Optional

from peergeo.cli.commands import EXIT_FAILURE, EXIT_USAGE, cmd_estimate, cmd_instruments, cmd_mc, cmd_twostar
from peergeo.cli.config import default_threads
from peergeo.errors import ConfigError, PeerGeoError

logger = logging.getLogger("peergeo")

LOG_FORMAT = "[%(levelname)s] %(message)s"
VERBOSE_LOG_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logging(verbose: bool = False) -> None:
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format=VERBOSE_LOG_FORMAT if verbose else LOG_FORMAT,
        force=True,
    )
    logging.captureWarnings(True)


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="base seed; all randomness derives from it")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker count (default: $PEERGEO_THREADS or all cores)")
    parser.add_argument("--out", default=None, help="output directory (default: $PEERGEO_OUTPUT_DIR/<command>)")
    parser.add_argument("--verbose", action="store_true", help="debug logging with timestamps")


def _panel_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--edges", required=True, help="edge CSV: group,src,dst,weight")
    parser.add_argument("--nodes", required=True, help="node CSV: group,node,<covariates>[,y][,cluster]")
    parser.add_argument("--symmetrize", action="store_true", help="treat edges as undirected (elementwise max)")
    parser.add_argument("--family", default="ces", help="aggregator: lim, ces, smoothmax, quantile")
    parser.add_argument("--theta", "--beta", "--kappa", "--q", dest="theta", type=float, default=None,
                        help="aggregator parameter (CES β, SmoothMax κ, Quantile q)")
    parser.add_argument("--shift", type=float, default=None, help="CES positivity shift c (default: from the data)")
    parser.add_argument("--menu", default="geo5", help="instrument menu: bruz, geo5, geo")
    parser.add_argument("--steps", type=int, default=None, help="deepest multi-step power K")
    parser.add_argument("--shells", type=int, default=None, help="deepest effective-distance shell H")
    parser.add_argument("--epsilon0", type=float, default=None, help="friction floor ε₀")
    parser.add_argument("--predictor", default="crossfit", help="ŷ construction: oracle, ols, crossfit")
    parser.add_argument("--folds", type=int, default=5, help="cross-fitting folds")
    parser.add_argument("--group-effects", action="store_true", help="add group dummies to the predictor")
    parser.add_argument("--oracle-gamma", default=None, help="comma-separated γ for the oracle predictor")
    parser.add_argument("--grid", default=None, help="comma-separated θ grid for the profile search")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peergeo", description="Peer effects with nonlinear norms and geometry instruments.")
    sub = parser.add_subparsers(dest="command", required=True)

    mc = sub.add_parser("mc", help="Monte Carlo replication tables")
    _common(mc)
    mc.add_argument("--config", default=None, help="TOML or JSON file with McConfig keys")
    mc.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key (repeatable)")
    mc.set_defaults(func=cmd_mc)

    inst = sub.add_parser("instruments", help="build an instrument signature for a panel")
    _common(inst)
    _panel_flags(inst)
    inst.set_defaults(func=cmd_instruments)

    est = sub.add_parser("estimate", help="profile-IV estimates, BRUZ vs geometry menu")
    _common(est)
    _panel_flags(est)
    est.set_defaults(func=cmd_estimate)

    star = sub.add_parser("twostar", help="two-star collapse diagnostics")
    _common(star)
    star.add_argument("--sizes", type=int, nargs=2, default=[5, 5], metavar=("M_A", "M_B"), help="peripherals per star")
    star.add_argument("--beta", type=float, default=1.2, help="CES curvature")
    star.add_argument("--unequal-hubs", action="store_true", help="give the hubs different covariates")
    star.add_argument("--json", action="store_true", help="print machine-readable diagnostics")
    star.set_defaults(func=cmd_twostar)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        if args.threads is None:
            args.threads = default_threads()
        if args.seed is None and args.command != "mc":
            args.seed = 0
        if args.command == "twostar" and min(args.sizes) < 2:
            raise ConfigError(f"star sizes must be at least 2, got {args.sizes}", key="sizes")
        return args.func(args)
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (PeerGeoError, OSError, ValueError) as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
