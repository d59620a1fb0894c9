"""Command line entry point: ``vosbench evaluate|fuse|plan|simulate|report``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .config import JOBS_ENV, ConfigError, load_config
from .report import format_csv, format_table, load_report, write_report
from .runner import InputError, evaluate_dirs, fuse_manifest, simulate
from .sampling import (
    STRATEGIES,
    dumps_plan,
    plan_head_hybrid,
    plan_ranked,
    plan_uniform,
    plan_uniform_plus,
    plan_wraparound,
    plan_wraparound_plus,
)
from .synth import SCENARIOS, builtin_script, load_script


class CliError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="JSON config file; flags override its values")
    p.add_argument("--jobs", type=_positive_int,
                   help=f"worker processes (default: ${JOBS_ENV} or 1)")


def _add_metric_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k-adapt", type=float, help="adaptive boundary tolerance coefficient")
    p.add_argument("--tolerance-frac", type=float,
                   help="classic boundary tolerance as a fraction of the image diagonal")
    p.add_argument("--empty-score", type=float, help="score when both masks are empty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vosbench",
                                     description="Video object segmentation benchmarking toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("evaluate", help="score predicted masks against ground truth")
    p.add_argument("--gt", type=Path, required=True, help="ground-truth sequences directory")
    p.add_argument("--pred", type=Path, required=True, help="predicted sequences directory")
    p.add_argument("--out", type=Path, required=True, help="output directory for the report")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    _add_common(p)
    _add_metric_flags(p)

    p = sub.add_parser("fuse", help="fuse several trackers' masks from a manifest")
    p.add_argument("--manifest", type=Path, required=True, help="fusion manifest (JSON)")
    p.add_argument("--out", type=Path, help="output directory (default: manifest 'output')")
    p.add_argument("--threshold", type=float, help="confidence threshold (default: half the weight sum)")
    _add_common(p)

    p = sub.add_parser("plan", help="print a frame-sampling plan")
    p.add_argument("strategy", help=f"one of: {', '.join(STRATEGIES)}")
    p.add_argument("t_ori", type=_positive_int, metavar="T_ORI", help="video length in frames")
    p.add_argument("total", type=_positive_int, nargs="?", metavar="T", help="frames to sample")
    p.add_argument("n_clips", type=_positive_int, nargs="?", metavar="N", help="number of clips")
    p.add_argument("clip_size", type=_positive_int, nargs="?", metavar="C", help="frames per clip")
    p.add_argument("--head", type=int, help="head length for the head strategy (default: C)")
    p.add_argument("--ranking", type=Path, help="frame ranking file for qframe (best first)")
    p.add_argument("--out", type=Path, help="write the plan here instead of stdout")

    p = sub.add_parser("simulate", help="render a synthetic scenario and evaluate its trackers")
    p.add_argument("scenario", help=f"built-in name ({', '.join(SCENARIOS)}) or a script path")
    p.add_argument("--seed", type=int, help="tracker noise seed (default: the script's)")
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--mpm", choices=("auto", "on", "off", "both"), default="auto",
                   help="motion prior: compare on/off, force one, or follow the script")
    p.add_argument("--figures", action="store_true", help="also render PNG figures")
    _add_common(p)
    _add_metric_flags(p)

    p = sub.add_parser("report", help="re-render a saved report as table, CSV and figures")
    p.add_argument("--in", dest="input", type=Path, required=True, help="report.json")
    p.add_argument("--out", type=Path, help="output directory (default: print the table)")
    p.add_argument("--no-figures", action="store_true", help="skip the PNG figures")
    return parser


def _config(args, **extra):
    return load_config(
        args.config,
        jobs=args.jobs,
        k_adapt=getattr(args, "k_adapt", None),
        tolerance_frac=getattr(args, "tolerance_frac", None),
        empty_score=getattr(args, "empty_score", None),
        **extra,
    )


def cmd_evaluate(args) -> int:
    cfg = _config(args)
    doc = evaluate_dirs(args.gt, args.pred, cfg)
    write_report(args.out, doc)
    if args.figures:
        from .plots import render_figures
        render_figures(doc, args.out / "figures")
    sys.stdout.write(format_table(doc))
    return 0


def cmd_fuse(args) -> int:
    load_config(args.config, jobs=args.jobs)
    names = fuse_manifest(args.manifest, args.out, args.threshold)
    for n in names:
        print(n)
    return 0


def _read_ranking(path: Path) -> list[int]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise CliError(f"{path}: {exc.strerror}") from None
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise CliError(f"{path}: ranking must be whitespace-separated frame indices") from None


def _clip_shape(args) -> tuple[int, int, int]:
    """Resolve (T, N, c) from the positional arguments; c defaults to 5."""
    total, n, c = args.total, args.n_clips, args.clip_size
    if n is not None and c is not None:
        if total is not None and total != n * c:
            raise CliError(f"T={total} does not equal N*C={n * c}")
        return n * c, n, c
    if total is None:
        raise CliError("give T, or T N C")
    if n is not None:
        if total % n:
            raise CliError(f"T={total} is not a multiple of N={n}")
        return total, n, total // n
    c = 5 if total % 5 == 0 else total
    return total, total // c, c


def build_plan(args):
    strategy = args.strategy
    if strategy not in STRATEGIES:
        raise CliError(f"unknown strategy {strategy!r}; choose one of: {', '.join(STRATEGIES)}")
    if strategy == "qframe" and args.ranking is None:
        raise CliError("qframe needs a precomputed frame ranking; pass it with --ranking FILE")
    total, n, c = _clip_shape(args)
    t_ori = args.t_ori
    if strategy == "uniform":
        return plan_uniform(t_ori, n, c)
    if strategy == "uniform+":
        return plan_uniform_plus(t_ori, n, c)
    if strategy == "wraparound":
        return plan_wraparound(t_ori, total, n)
    if strategy == "wraparound+":
        return plan_wraparound_plus(t_ori, n, c)
    if strategy == "head":
        head = c if args.head is None else args.head
        return plan_head_hybrid(t_ori, total, head, n)
    return plan_ranked(_read_ranking(args.ranking), t_ori, n, c)


def cmd_plan(args) -> int:
    try:
        text = dumps_plan(build_plan(args))
    except ValueError as exc:
        raise CliError(str(exc)) from None
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args, seed=args.seed)
    if args.scenario in SCENARIOS:
        script = builtin_script(args.scenario)
    else:
        path = Path(args.scenario)
        if not path.is_file():
            raise CliError(f"unknown scenario {args.scenario!r}; built-ins: {', '.join(SCENARIOS)}")
        try:
            script = load_script(path)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CliError(f"{path}: {exc}") from None
    doc = simulate(script, args.out, cfg, args.mpm)
    if args.figures:
        from .plots import plot_comparison, render_figures
        render_figures(doc, args.out / "figures")
        reapp = doc["meta"].get("mpm", {}).get("reappearance_J", {})
        if len(reapp) == 2:
            for obj, on in reapp["mpm-on"].items():
                off = reapp["mpm-off"][obj]
                if on is not None and off is not None:
                    plot_comparison({"off": off, "on": on}, f"object {obj} reappearance J",
                                    args.out / "figures" / f"mpm_obj{obj}.png")
    sys.stdout.write(format_table(doc))
    return 0


def cmd_report(args) -> int:
    try:
        doc = load_report(args.input)
    except OSError as exc:
        raise CliError(f"{args.input}: {exc.strerror}") from None
    except ValueError as exc:
        raise CliError(f"{args.input}: {exc}") from None
    if args.out is None:
        sys.stdout.write(format_table(doc))
        return 0
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "report.txt").write_text(format_table(doc))
    (args.out / "report.csv").write_text(format_csv(doc))
    if not args.no_figures:
        from .plots import render_figures
        render_figures(doc, args.out / "figures")
    sys.stdout.write(format_table(doc))
    return 0


COMMANDS = {
    "evaluate": cmd_evaluate,
    "fuse": cmd_fuse,
    "plan": cmd_plan,
    "simulate": cmd_simulate,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    logging.captureWarnings(True)
    try:
        return COMMANDS[args.command](args)
    except (CliError, ConfigError, InputError) as exc:
        print(f"vosbench {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
