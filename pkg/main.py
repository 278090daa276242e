"""
NucleiGrind — Main entry-point and command dispatch.

    python main.py synth --size 64 64 --count 5 --seed 42 --out gt.pgm
    python main.py encode gt.pgm --method se --out se.sef
    python main.py postprocess sem.pgm se.sef --out pred.pgm
    python main.py evaluate pred.pgm gt.pgm --json report.json
    python main.py invariance --json invariance.json
    python main.py selfcheck
    python main.py glossary
"""
import argparse
import logging
import sys

from rich.logging import RichHandler

import ui
from content.fixtures import disk, fixture_set, generate_fixture, nonsymmetric_fixtures
from content.models import Encoder, FixtureSpec, ShapeFamily
from engine import fileio
from engine.config import Settings, write_json_report
from engine.encodings import encode
from engine.errors import ConfigError, NucleiGridError, TooSmallInstance
from engine.invariance import invariance_table, relation_check
from engine.metrics import evaluate
from engine.postproc import run_pipeline

logger = logging.getLogger("nucleigrind")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def setup_logging(verbose=False):
    level = logging.DEBUG if verbose else logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(message)s",
        handlers=[RichHandler(console=ui.err_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )


# ═══════════════════════════════════════════════════════════
#  COMMANDS
# ═══════════════════════════════════════════════════════════

def cmd_synth(args, settings):
    overrides = {
        "count": args.count,
        "shape": args.shape,
        "min_gap": args.gap,
        "seed": args.seed,
    }
    if args.size:
        overrides["height"], overrides["width"] = args.size
    if args.radius:
        overrides["radius_min"], overrides["radius_max"] = args.radius
    settings.override("fixtures", **overrides)
    spec = settings.fixtures
    labels = generate_fixture(spec)
    fileio.write_pgm(args.out, labels)
    ui.show_synth(spec, labels, args.out)
    return EXIT_OK


def cmd_encode(args, settings):
    settings.override("encoding", dir_class_count=args.dir_classes, background_norm_cap=args.bg_cap)
    cfg = settings.encoding
    labels = fileio.read_artifact(args.input, "pgm")
    method = Encoder(args.method)
    encoded = encode(labels, method, cfg)
    if method is Encoder.DIR:
        fileio.write_pgm(args.out, encoded)
    else:
        fileio.write_sef1(args.out, encoded)
    ui.show_written(args.out, f"{method.value.upper()} encoding")
    return EXIT_OK


def cmd_postprocess(args, settings):
    settings.override("postproc", t_p=args.tp, t_n=args.tn,
                      connectivity=args.connectivity, min_instance_area=args.min_area)
    cfg = settings.postproc
    semantic = fileio.read_artifact(args.semantic, "pgm")
    structure = fileio.read_artifact(args.structure, "sef1")
    labels = run_pipeline(semantic, structure, cfg)
    fileio.write_pgm(args.out, labels)
    ui.show_written(args.out, f"Label map ({int(labels.max()) if labels.size else 0} instances)")
    return EXIT_OK


def cmd_evaluate(args, settings):
    report = evaluate(fileio.read_artifact(args.pred, "pgm"), fileio.read_artifact(args.gt, "pgm"))
    ui.show_metrics(report)
    if args.json:
        write_json_report(args.json, report.to_json())
        ui.show_written(args.json, "Report")
    return EXIT_OK


def _relation_for(fixtures, encoding_cfg):
    for labels in fixtures:
        try:
            return relation_check(labels, encoding_cfg)
        except TooSmallInstance:
            logger.debug("Skipping a map without 3x3 interiors for the relation check")
    return None


def cmd_invariance(args, settings):
    encoding_cfg = settings.encoding
    if args.inputs:
        fixtures = [fileio.read_artifact(path, "pgm") for path in args.inputs]
        relation = _relation_for(fixtures, encoding_cfg)
    else:
        fixtures = nonsymmetric_fixtures() + fixture_set(count=3)
        relation = relation_check(disk(radius=8), encoding_cfg)
    rows = invariance_table(fixtures, postproc_cfg=settings.postproc, encoding_cfg=encoding_cfg)
    ui.show_invariance(rows, relation)
    if args.json:
        write_json_report(args.json, {
            "rows": [row.to_json() for row in rows],
            "relation": relation.to_json() if relation else None,
        })
        ui.show_written(args.json, "Invariance report")
    return EXIT_OK


def cmd_selfcheck(args, settings):
    import selfcheck

    return selfcheck.main(args.seeds, corrupt_distances=args.corrupt_distances)


def cmd_glossary(args, settings):
    ui.show_glossary()
    return EXIT_OK


# ═══════════════════════════════════════════════════════════
#  ARGUMENTS
# ═══════════════════════════════════════════════════════════

def build_parser():
    parser = argparse.ArgumentParser(
        prog="nucleigrind",
        description="Contour structure encoding toolkit for nuclei instance segmentation.",
    )
    parser.add_argument("--config", help="JSON file deep-merged over the built-in defaults")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a seeded synthetic label map")
    p.add_argument("--size", nargs=2, type=int, metavar=("H", "W"))
    p.add_argument("--count", type=int)
    p.add_argument("--shape", choices=[s.value for s in ShapeFamily])
    p.add_argument("--radius", nargs=2, type=int, metavar=("MIN", "MAX"))
    p.add_argument("--gap", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_synth)

    p = sub.add_parser("encode", help="encode a label map (se, hv, dir, pos)")
    p.add_argument("input")
    p.add_argument("--method", required=True, choices=[e.value for e in Encoder])
    p.add_argument("--out", required=True)
    p.add_argument("--dir-classes", type=int)
    p.add_argument("--bg-cap", type=float)
    p.set_defaults(handler=cmd_encode)

    p = sub.add_parser("postprocess", help="fuse a semantic mask and a structure field into instances")
    p.add_argument("semantic")
    p.add_argument("structure")
    p.add_argument("--out", required=True)
    p.add_argument("--tp", type=float)
    p.add_argument("--tn", type=float)
    p.add_argument("--connectivity", type=int, choices=[4, 8])
    p.add_argument("--min-area", type=int)
    p.set_defaults(handler=cmd_postprocess)

    p = sub.add_parser("evaluate", help="Dice, AJI, Hausdorff and PQ of a prediction")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("--json")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("invariance", help="encoder equivariance and pipeline bias under rigid transforms")
    p.add_argument("inputs", nargs="*")
    p.add_argument("--json")
    p.set_defaults(handler=cmd_invariance)

    p = sub.add_parser("selfcheck", help="run the oracle, gradient, equivariance and round-trip suites")
    p.add_argument("--seeds", type=int, default=100)
    p.add_argument("--corrupt-distances", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_selfcheck)

    p = sub.add_parser("glossary", help="explain the vocabulary")
    p.set_defaults(handler=cmd_glossary)
    return parser


# ═══════════════════════════════════════════════════════════
#  MAIN
# ═══════════════════════════════════════════════════════════

def main(argv=None):
    """Parse, dispatch, and map failures to exit codes."""
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(args.verbose)

    try:
        settings = Settings.load(args.config)
        return args.handler(args, settings)
    except ConfigError as e:
        ui.show_error(e)
        return EXIT_USAGE
    except (NucleiGridError, OSError) as e:
        ui.show_error(e)
        return EXIT_FAILURE
    except KeyboardInterrupt:
        ui.err_console.print("\n[italic bright_cyan]Interrupted.[/italic bright_cyan]")
        return EXIT_FAILURE
    except Exception as e:
        logger.exception("Unexpected error")
        ui.show_error(f"unexpected error: {e}")
        return EXIT_FAILURE


if __name__ == "__main__":
    # Check Python version
    if sys.version_info < (3, 10):
        print("Error: Python 3.10 or higher is required.")
        print(f"You are running Python {sys.version_info.major}.{sys.version_info.minor}")
        sys.exit(1)

    sys.exit(main())
