# conlab/cli.py
"""Command line: ``python -m conlab <command> ...``.

Exit codes: 0 ok, 1 runtime error, 2 usage, parse error or missing file.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .coding import covermix
from .errors import ConlabError, CoverParamsError, NameParseError, ScenarioError
from .logging_setup import setup_logging
from .models import AttackKind, DefenseKind
from .net.names import Name
from .processing import attacks, pipeline
from .processing.metrics import matrix_csv
from .processing.workload import render_schedule, workload_zipf
from .utils.files import write_output
from .utils.parse import load_scenario, parse_duration

logger = logging.getLogger("conlab")

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2
ALL_DEFENSES = ",".join(k.value for k in DefenseKind)


class UsageError(Exception):
    pass


def _csv_list(text: str) -> List[str]:
    return [p.strip() for p in text.split(",") if p.strip()]


def cmd_simulate(args) -> int:
    s = load_scenario(args.scenario)
    defense = pipeline.as_defense(args.defense, s.defense) if args.defense else None
    trace, result = pipeline.run_simulation(s, seed=args.seed, defense=defense)
    write_output(trace.to_csv(), args.out, "trace.csv")
    if args.metrics:
        write_output(matrix_csv([result]), args.metrics, "metrics.csv")
    return EXIT_OK


def cmd_compare(args) -> int:
    s = load_scenario(args.scenario)
    results = pipeline.compare_defenses(s, _csv_list(args.defenses), seed=args.seed, workers=args.workers)
    write_output(matrix_csv(results), args.out, "compare.csv")
    return EXIT_OK


def cmd_attack(args) -> int:
    s = load_scenario(args.scenario)
    seed = pipeline.effective_seed(s, args.seed)
    defense = pipeline.as_defense(args.defense, s.defense) if args.defense else None
    report = attacks.run_attack(s, AttackKind(args.kind), defense=defense, seed=seed)
    write_output(report.to_csv(), args.out, f"attack_{args.kind}.csv")
    if args.metrics:
        rows = "metric,value\n" + "".join(f"{k},{v:.6f}\n" for k, v in report.metrics.items())
        write_output(rows, args.metrics, "attack_metrics.csv")
    return EXIT_OK


def cmd_sweep(args) -> int:
    s = load_scenario(args.scenario)
    try:
        values = [float(v) for v in _csv_list(args.values)]
    except ValueError:
        raise UsageError(f"--values must be numbers, got {args.values!r}")
    results = pipeline.sweep(s, args.param, values, seed=args.seed, workers=args.workers)
    write_output(matrix_csv(results), args.out, "sweep.csv")
    return EXIT_OK


def cmd_workload(args) -> int:
    stem = Name.parse(args.stem)
    width = len(str(max(args.catalog - 1, 0)))
    names = [stem.append(f"{i:0{width}d}") for i in range(args.catalog)]
    schedule = workload_zipf(args.catalog, args.exponent, args.requests, args.seed, names=names,
                             consumers=_csv_list(args.consumers), start_us=parse_duration(args.start),
                             interval_us=parse_duration(args.interval))
    write_output(render_schedule(schedule), args.out, "schedule.txt")
    return EXIT_OK


def cmd_covermix_encode(args) -> int:
    content = Path(args.input).read_bytes()
    blocks = covermix.split_blocks(content, args.block_size)
    if args.alpha is not None and args.alpha != len(blocks):
        raise UsageError(f"--alpha {args.alpha} does not match the {len(blocks)} blocks of {args.input}")
    params = covermix.CoverParams(len(blocks), args.beta, args.k, args.block_size, bytes.fromhex(args.seed))
    covers = covermix.make_covers(args.beta, args.block_size, args.cover_seed)
    codewords, meta = covermix.encode_content(content, covers, params)
    out = Path(args.outdir)
    covermix.write_codewords(codewords, out)
    covermix.write_covers(covers, out / "covers")
    covermix.write_meta(meta, out / "meta.txt")
    logger.info("covermix: %d codewords written to %s", len(codewords), out)
    return EXIT_OK


def cmd_covermix_decode(args) -> int:
    meta = covermix.read_meta(Path(args.outdir) / "meta.txt")
    covers = covermix.load_covers(args.covers)
    covermix.check_covers(meta, covers)
    available = covermix.load_codewords(meta, args.outdir)
    chosen = covermix.plan_fetch(available, meta.beta, meta.alpha)
    content = covermix.decode(chosen, covers, meta)
    Path(args.output).write_bytes(content)
    logger.info("covermix: decoded %d bytes from %d codewords", len(content), len(chosen))
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn
    uvicorn.run("conlab.main:app", host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="conlab", description="Content-oriented networking privacy simulator")
    p.add_argument("--log-level", default=None)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_cmd(name: str, help_: str) -> argparse.ArgumentParser:
        c = sub.add_parser(name, help=help_)
        c.add_argument("scenario")
        c.add_argument("--seed", type=int, default=None)
        c.add_argument("--out", default=None, help="output file or directory; stdout when omitted")
        return c

    c = scenario_cmd("simulate", "run a scenario and emit its trace CSV")
    c.add_argument("--defense", default=None, choices=[k.value for k in DefenseKind])
    c.add_argument("--metrics", default=None, help="also write the metric rows here")
    c.set_defaults(func=cmd_simulate)

    c = scenario_cmd("compare-defenses", "defense x metric matrix")
    c.add_argument("--defenses", default=ALL_DEFENSES)
    c.add_argument("--workers", type=int, default=None)
    c.set_defaults(func=cmd_compare)

    c = sub.add_parser("attack", help="run an attack driver and emit its report CSV")
    c.add_argument("kind", choices=[k.value for k in AttackKind])
    c.add_argument("scenario")
    c.add_argument("--seed", type=int, default=None)
    c.add_argument("--out", default=None)
    c.add_argument("--defense", default=None, choices=[k.value for k in DefenseKind])
    c.add_argument("--metrics", default=None)
    c.set_defaults(func=cmd_attack)

    c = scenario_cmd("sweep", "rerun a scenario across values of one parameter")
    c.add_argument("--param", required=True, choices=list(pipeline.SWEEP_PARAMETERS))
    c.add_argument("--values", required=True, help="comma separated")
    c.add_argument("--workers", type=int, default=None)
    c.set_defaults(func=cmd_sweep)

    c = sub.add_parser("workload", help="emit a Zipf schedule in scenario syntax")
    c.add_argument("--catalog", type=int, required=True)
    c.add_argument("--exponent", type=float, default=1.0)
    c.add_argument("--requests", type=int, required=True)
    c.add_argument("--seed", type=int, default=1)
    c.add_argument("--consumers", default="c1")
    c.add_argument("--stem", default="/content")
    c.add_argument("--start", default="0")
    c.add_argument("--interval", default="1ms")
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_workload)

    cm = sub.add_parser("covermix", help="cover-file codec")
    cms = cm.add_subparsers(dest="action", required=True)
    e = cms.add_parser("encode")
    e.add_argument("--alpha", type=int, default=None, help="checked against the content's block count")
    e.add_argument("--beta", type=int, required=True)
    e.add_argument("--k", type=int, required=True)
    e.add_argument("--block-size", type=int, required=True)
    e.add_argument("--seed", default="00", help="hex naming seed")
    e.add_argument("--cover-seed", type=int, default=0)
    e.add_argument("input")
    e.add_argument("outdir")
    e.set_defaults(func=cmd_covermix_encode)
    d = cms.add_parser("decode")
    d.add_argument("outdir")
    d.add_argument("covers")
    d.add_argument("output")
    d.set_defaults(func=cmd_covermix_decode)

    c = sub.add_parser("serve", help="run the HTTP service")
    c.add_argument("--host", default="127.0.0.1")
    c.add_argument("--port", type=int, default=8000)
    c.set_defaults(func=cmd_serve)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    # stdout carries CSV output
    setup_logging(args.log_level, stream=sys.stderr)
    try:
        return args.func(args)
    except FileNotFoundError as e:
        print(f"conlab: file not found: {e.filename}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, ScenarioError, NameParseError, CoverParamsError) as e:
        print(f"conlab: {e}", file=sys.stderr)
        return EXIT_USAGE
    except ConlabError as e:
        logger.exception("conlab: %s", e)
        return EXIT_RUNTIME
    except ValueError as e:
        # unknown defense/parameter names and malformed option values
        print(f"conlab: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        logger.exception("conlab: %s", e)
        return EXIT_RUNTIME
