"""``delineate`` command line: extract, score, evaluate, gen-samples, synth.

Exit codes: 0 success, 2 bad input, 3 bad configuration, 4 external scorer
failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from . import __version__
from .config import ConfigError, build_config
from .graph import GraphFormatError, dumps, graph_to_json, load_graph
from .graphx import PROFILES, build_overcomplete_graph
from .metrics import MATCH_TARGETS, evaluate
from .raster import PGMError, load_pgm, mask_to_grid, save_pgm, threshold
from .samples import generate_samples
from .scoring import VARIANTS, ScorerError, prune, score_graph
from .synth import SynthParams, synth

log = logging.getLogger("delineate")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_CONFIG = 3
EXIT_SCORER = 4


class InputError(Exception):
    pass


# config keys exposed as --flags; values are parsed by the config layer
_EXTRACT_FLAGS = ("threshold", "d", "epsilon", "k", "min_spur", "hweight", "search_margin")
_SCORE_FLAGS = ("scorer", "q", "tau", "patch_size", "timeout")
_EVAL_FLAGS = ("R", "match", "max_pairs", "seed")
_SAMPLE_FLAGS = _EXTRACT_FLAGS + ("patch_size",)


def _add_config_args(p: argparse.ArgumentParser, keys):
    p.add_argument("--config", metavar="FILE", help="key = value configuration file")
    p.add_argument("--profile", choices=sorted(PROFILES), help="named parameter set")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE", help="override any configuration key"
    )
    p.add_argument("--jobs", type=int, metavar="N", help="worker threads (results do not depend on N)")
    for key in keys:
        flag = "--" + key.replace("_", "-")
        kw = {"dest": key, "metavar": key.upper() if len(key) > 1 else key}
        if key == "scorer":
            kw["choices"] = VARIANTS
        if key == "match":
            kw["choices"] = MATCH_TARGETS
        p.add_argument(flag, **kw)


def _overrides(args, keys) -> list[tuple[str, str]]:
    out = []
    if args.profile:
        out.append(("profile", args.profile))
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out.append((k.strip(), v.strip()))
    for key in keys:
        val = getattr(args, key, None)
        if val is not None:
            out.append((key, val))
    if getattr(args, "scorer_cmd", None) is not None:
        out.append(("command", args.scorer_cmd))
    if getattr(args, "m", None) is not None:
        out.append(("m", args.m))
    if getattr(args, "rho", None) is not None:
        out.append(("rho", args.rho))
    if args.jobs is not None:
        out.append(("jobs", str(args.jobs)))
    return out


def _config(args, keys):
    return build_config(args.config, _overrides(args, keys))


def _read_grid(path):
    try:
        return load_pgm(path)
    except (OSError, PGMError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _read_graph(path):
    try:
        return load_graph(path)
    except (OSError, GraphFormatError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: {exc}") from None


def _emit(text: str, out):
    if out in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    tmp = f"{out}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, out)


def cmd_extract(args) -> int:
    cfg = _config(args, _EXTRACT_FLAGS)
    grid = _read_grid(args.tubularity)
    graph = build_overcomplete_graph(grid, cfg.extract_params(), cfg.jobs)
    log.info("extracted %d nodes, %d edges", len(graph.nodes), len(graph.edges))
    _emit(graph_to_json(graph), args.output)
    return EXIT_OK


def cmd_score(args) -> int:
    cfg = _config(args, _SCORE_FLAGS)
    graph = _read_graph(args.graph)
    grid = _read_grid(args.tubularity)
    try:
        scored = score_graph(graph, grid, cfg.scorer_spec(), cfg.jobs)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    pruned = prune(scored, cfg.tau)
    log.info("kept %d of %d edges at tau=%g", len(pruned.edges), len(graph.edges), cfg.tau)
    _emit(graph_to_json(pruned), args.output)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = _config(args, _EVAL_FLAGS)
    pred = _read_graph(args.pred)
    gt = _read_graph(args.gt)
    report = evaluate(gt, pred, cfg.R, cfg.m, cfg.match, cfg.max_pairs, cfg.seed)
    _emit(dumps(report) + "\n", args.output)
    return EXIT_OK


def cmd_gen_samples(args) -> int:
    cfg = _config(args, _SAMPLE_FLAGS)
    grid = _read_grid(args.tubularity)
    gt = threshold(_read_grid(args.gt), 0.5)
    if grid.values.shape != gt.bits.shape:
        raise InputError("tubularity map and ground-truth mask differ in size")
    samples = generate_samples(grid, gt, cfg.extract_params(), cfg.rho, cfg.patch_size, args.outdir, cfg.jobs)
    log.info("wrote %d samples to %s", len(samples), args.outdir)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        params = SynthParams(
            seed=args.seed,
            extent=args.extent,
            n_seeds=args.n_seeds,
            loop_prob=args.loop_prob,
            w=args.w,
            sigma=args.sigma,
            noise_amp=args.noise,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    graph, mask, grid = synth(params)
    os.makedirs(args.outdir, exist_ok=True)
    _emit(graph_to_json(graph), os.path.join(args.outdir, "graph.json"))
    save_pgm(mask_to_grid(mask), os.path.join(args.outdir, "mask.pgm"), maxval=255)
    save_pgm(grid, os.path.join(args.outdir, "tubularity.pgm"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="delineate", description="Curvilinear network delineation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="tubularity map -> overcomplete graph")
    p.add_argument("tubularity")
    p.add_argument("-o", "--output", help="graph JSON (default stdout)")
    _add_config_args(p, _EXTRACT_FLAGS)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("score", help="score every edge and prune below tau")
    p.add_argument("graph")
    p.add_argument("tubularity")
    p.add_argument("-o", "--output", help="pruned graph JSON (default stdout)")
    p.add_argument("--scorer-cmd", metavar="CMD", help="command line of the external scorer")
    _add_config_args(p, _SCORE_FLAGS)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", help="NPD and topological precision/recall")
    p.add_argument("pred")
    p.add_argument("gt")
    p.add_argument("-o", "--output", help="report JSON (default stdout)")
    p.add_argument("--m", metavar="LIST", help="distance thresholds, e.g. 1..10 or 1,3,5")
    _add_config_args(p, _EVAL_FLAGS)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("gen-samples", help="labelled path samples for classifier training")
    p.add_argument("tubularity")
    p.add_argument("gt", help="ground-truth mask PGM (pixels >= 0.5 are on)")
    p.add_argument("outdir")
    p.add_argument("--rho", metavar="RHO", help="ground-truth dilation radius")
    _add_config_args(p, _SAMPLE_FLAGS)
    p.set_defaults(func=cmd_gen_samples)

    p = sub.add_parser("synth", help="synthetic network, mask and tubularity map")
    p.add_argument("outdir")
    d = SynthParams()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--extent", type=int, default=d.extent)
    p.add_argument("--n-seeds", type=int, default=d.n_seeds)
    p.add_argument("--loop-prob", type=float, default=d.loop_prob)
    p.add_argument("--w", type=int, default=d.w)
    p.add_argument("--sigma", type=float, default=d.sigma)
    p.add_argument("--noise", type=float, default=d.noise_amp)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ScorerError as exc:
        log.error("external scorer failed: %s", exc)
        return EXIT_SCORER
    except InputError as exc:
        log.error("bad input: %s", exc)
        return EXIT_INPUT
    except (OSError, ValueError) as exc:
        log.error("bad input: %s", exc)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
