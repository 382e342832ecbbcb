"""Command line entry point: ``potminer <command> ...``.

Every pipeline stage has its own subcommand reading and writing one artifact
directory; ``pipeline`` runs them in order. Thresholds come from an optional
JSON config file and can be overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .ingest import DatasetFormatError, load_dataset, save_dataset
from .pipeline import (
    STAGES, Artifacts, PipelineConfig, StageError, config_from_dict, default_threads,
    render_report, run_pipeline, run_stage,
)
from .synth import benchmark_scripts, generate_dataset, load_script

log = logging.getLogger("potminer")

# flag -> (config key, type)
OVERRIDES = {
    "n": ("n", int),
    "theta_p": ("theta_P", float),
    "theta_f": ("theta_F", float),
    "theta_h": ("theta_H", float),
    "min_period": ("min_period", int),
    "min_cycles": ("min_cycles", int),
    "K": ("K", int),
    "K_ts": ("K_ts", int),
    "restarts": ("restarts", int),
    "init": ("init", str),
    "max_sample": ("max_sample", int),
    "k": ("k", int),
    "seed": ("seed", int),
}


def parse_k_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not 1 <= lo <= hi:
        raise argparse.ArgumentTypeError(f"need 1 <= lo <= hi, got {text!r}")
    return lo, hi


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (flags override the config file)")
    g.add_argument("--config", type=Path, help="JSON file with pipeline parameters")
    g.add_argument("--n", type=int, help="PoT window length in frames")
    g.add_argument("--theta-p", type=float, help="fraction of pairs kept per frame")
    g.add_argument("--theta-f", type=float, help="pause threshold on the motion statistic")
    g.add_argument("--theta-h", type=float, help="periodicity peak-height threshold")
    g.add_argument("--min-period", type=int)
    g.add_argument("--min-cycles", type=int)
    g.add_argument("--K", type=int, help="PoT codebook size")
    g.add_argument("--K-ts", type=int, help="trajectory-shape codebook size")
    g.add_argument("--restarts", type=int, help="k-means restarts")
    g.add_argument("--init", choices=("random", "kmeans++"))
    g.add_argument("--standardize", action="store_true", default=None)
    g.add_argument("--max-sample", type=int, help="descriptor sample cap for k-means")
    g.add_argument("--k", type=int, help="number of interval clusters")
    g.add_argument("--k-range", type=parse_k_range, metavar="LO:HI", help="sweep k over LO..HI")
    g.add_argument("--seed", type=int)
    g.add_argument("--channels", help="comma-separated subset of pot,ts")
    g.add_argument("--no-pauses", action="store_true", help="skip pause splitting")
    g.add_argument("--no-periodic", action="store_true", help="skip periodicity splitting")
    g.add_argument("--span-indexing", action="store_true", default=None,
                   help="count a PoT in every frame its window covers")


def build_config(args: argparse.Namespace) -> PipelineConfig:
    d = {}
    if args.config is not None:
        with open(args.config, encoding="utf-8") as fh:
            d = json.load(fh)
        if not isinstance(d, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")
    for flag, (key, _) in OVERRIDES.items():
        v = getattr(args, flag)
        if v is not None:
            d[key] = v
    if args.k_range is not None:
        d["k_range"] = list(args.k_range)
    if args.channels is not None:
        d["channels"] = [c.strip() for c in args.channels.split(",") if c.strip()]
    if args.standardize:
        d["standardize"] = True
    if args.span_indexing:
        d["span_indexing"] = True
    if args.no_pauses:
        d["pauses"] = False
    if args.no_periodic:
        d["periodic"] = False
    return config_from_dict(d)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="potminer", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic labelled dataset")
    p.add_argument("output", type=Path)
    p.add_argument("--script", type=Path, help="JSON behavior script; default is the benchmark mix")
    p.add_argument("--shots", type=int, default=60)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--noise", type=float, default=0.3, help="benchmark mix only")

    for stage in STAGES:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("artifacts", type=Path, help="artifact directory")
        needs_data = stage not in ("codebook", "cluster", "report")
        p.add_argument("--data", type=Path, required=needs_data,
                       help="dataset file" + ("" if needs_data else " (report: enables the gallery)"))
        p.add_argument("--threads", type=int, default=1)
        _add_config_flags(p)

    p = sub.add_parser("pipeline", help="run all stages in order")
    p.add_argument("dataset", type=Path)
    p.add_argument("artifacts", type=Path)
    p.add_argument("--stage", choices=STAGES, default="report", help="stop after this stage")
    p.add_argument("--threads", type=int, default=default_threads())
    _add_config_flags(p)
    return parser


def cmd_synth(args) -> None:
    if args.shots < 1:
        raise ValueError("--shots must be >= 1")
    if args.script is not None:
        scripts = [load_script(args.script)] * args.shots
    else:
        scripts = benchmark_scripts(args.shots, args.seed, args.noise)
    shots = generate_dataset(scripts, args.seed)
    save_dataset(shots, args.output)
    print(f"wrote {len(shots)} shots to {args.output}")


def cmd_stage(args) -> None:
    cfg = build_config(args)
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    art = Artifacts(args.artifacts)
    if args.command == "report":
        shots = load_dataset(args.data) if args.data is not None else None
        for path in render_report(art.root, shots, cfg.k):
            print(path)
        return
    shots = load_dataset(args.data) if args.data is not None else []
    art.root.mkdir(parents=True, exist_ok=True)
    run_stage(args.command, shots, cfg, art, args.threads)
    print(f"{args.command}: done ({art.root})")


def cmd_pipeline(args) -> None:
    cfg = build_config(args)
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    art = run_pipeline(cfg, args.dataset, args.artifacts, until=args.stage, threads=args.threads)
    if art.metrics.exists():
        sys.stdout.write(art.metrics.read_text(encoding="utf-8"))
    print(f"artifacts in {art.root}")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            cmd_synth(args)
        elif args.command == "pipeline":
            cmd_pipeline(args)
        else:
            cmd_stage(args)
    except (StageError, DatasetFormatError, ValueError, OSError) as e:
        print(f"potminer {args.command}: error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
