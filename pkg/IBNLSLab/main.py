import argparse
import logging
import os
import sys

# Add the root directory to sys.path
root_dir = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
if root_dir not in sys.path:
    sys.path.append(root_dir)

from IBNLSLab.config import EXPERIMENTS, load_config, load_env
from IBNLSLab.core.runner import ExperimentRunner
from IBNLSLab.errors import IBNLSError, EXIT_CONFIG
from IBNLSLab.utils.logger import setup_logger


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibnls", description="Spectral laboratory for the inhomogeneous biharmonic NLS")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=None, help="output directory (overrides output.dir and IBNLS_OUT_DIR)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--parallel", type=int, default=None, help="sweep workers")
        p.add_argument("--snapshot-stride", type=int, default=None, help="steps between recorded snapshots")

    for name in EXPERIMENTS:
        common(sub.add_parser(name, help=f"run the {name} experiment"))
    resume = sub.add_parser("resume", help="continue an evolve run from its checkpoint")
    common(resume)
    resume.add_argument("--checkpoint", required=True, help="checkpoint .bin written by an evolve run")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    env = load_env()
    setup_logger(log_to_file=False, level=getattr(logging, env["log_level"], logging.INFO))
    logger = logging.getLogger("ibnls")

    overrides = {
        "experiment": "evolve" if args.command == "resume" else args.command,
        "out_dir": args.out,
        "seed": args.seed,
        "parallel": args.parallel,
        "snapshot_stride": args.snapshot_stride,
    }
    try:
        config = load_config(args.config, overrides)
    except (IBNLSError, FileNotFoundError) as e:
        logger.error(f"❌ {e}")
        return EXIT_CONFIG

    runner = ExperimentRunner(config)
    return runner.run(checkpoint=args.checkpoint if args.command == "resume" else None)


if __name__ == "__main__":
    sys.exit(main())
