import argparse
import sys

from ..errors import NormalizerError
from ..util import FileManager, Logger, Parallel, __version__, configure_logging
from .commands import COMMANDS, OUTPUT_FORMATS
from .manifest import load_manifest

DESCRIPTIONS = {
    "kolmogorov": "Kolmogorov normal form of a torus model",
    "birkhoff": "Birkhoff normal form around a torus, optionally with stability estimates",
    "stability": "Stability time curve from a table of remainder norms",
    "pipeline": "Planetary pre-processing steps (i) to (v), optionally normalized further",
    "integrate": "Direct N-body integration of a three-body model",
    "frequencies": "Frequency analysis of integrated or synthetic signals",
    "check": "Invariant suites",
}


def parse_args(argv=None):
    parser = argparse.ArgumentParser(prog="normalizer", description="Normal forms and stability estimates "
                                                                     "for near-integrable Hamiltonians.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, description in DESCRIPTIONS.items():
        command = commands.add_parser(name, help=description, description=description)
        command.add_argument("--manifest", required=True, help="TOML run manifest.")
        command.add_argument("--threads", type=int, default=None, help="Number of numba threads.")
        command.add_argument("--out", default="out", help="Output folder (default: out).")
        command.add_argument("--format", dest="formats", choices=OUTPUT_FORMATS, action="append",
                             help="Output format, repeatable (default: all).")
        command.add_argument("--resume", action="store_true", help="Resume from the checkpoints in the output "
                                                                   "folder.")
        verbosity = command.add_mutually_exclusive_group()
        verbosity.add_argument("-v", "--verbose", action="store_true")
        verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser.parse_args(argv)


def _fail(report):
    Logger.error(f"{report['error']}: {report['message']}")
    FileManager.save_json(report, "error.json")
    return report["exit_code"]


def main(argv=None) -> int:
    args = parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    FileManager.working_dir = args.out
    FileManager.loading_enabled = args.resume
    try:
        manifest = load_manifest(args.manifest, args.command)
        Parallel.threads = args.threads or manifest.threads
        Parallel.apply()
        COMMANDS[args.command](manifest, set(args.formats or OUTPUT_FORMATS))
    except NormalizerError as e:
        return _fail(e.to_dict())
    except (FileNotFoundError, ValueError) as e:
        return _fail({"error": type(e).__name__, "message": str(e), "exit_code": 2})
    Logger.info(f"'{args.command}' done, outputs in '{args.out}'")
    return 0


if __name__ == "__main__":
    sys.exit(main())
