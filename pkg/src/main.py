"""
Command-line entry point: frame codec, rule checking, protection analytics
and scenario simulation behind one multiplexed tool.

Reports go to stdout as ``key=value`` lines (or CSV); diagnostics go to
stderr. Exit codes: 0 success, 1 domain error, 2 usage error.

Numeric precision: distances 2 decimals (m), times 2 decimals (us), rates
and ratios 6 significant digits.
"""

import argparse
import asyncio
import csv
import io
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, TextIO

import numpy as np
from pydantic import ValidationError

from .analysis.protection import (
    attack_range_report,
    energy_cost,
    false_positive_rate,
    tolerated_bit_error_rate,
)
from .analysis.timing import max_react_time, reaction_feasible
from .protocol.frame_codec import (
    AddrMode,
    Frame,
    SHR_PHR_LEN,
    frame_from_hex,
    frame_to_hex,
    intra_pan_data_frame,
)
from .rules.chain import RuleChain, evaluate_chain
from .rules.gtables import describe_rule, load_rules_file, parse_rules, render_rule
from .simulation.coordinator import run
from .simulation.loader import load_scenario
from .simulation.report import save_report, write_csv
from .utils.config import RuntimeConfig
from .utils.errors import GuardianError
from .utils.logging_setup import configure_logging
from .utils.schemas import (
    CostVariant,
    DecisionCostModel,
    RfParams,
    StatsReport,
    TimingModel,
)

logger = logging.getLogger(__name__)

# intra-PAN data frame: SHR+PHR, FCF, seq, PAN, two short addresses, FCS
_DATA_FRAME_OVERHEAD = SHR_PHR_LEN + 3 + 6 + 2


class UsageError(Exception):
    pass


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}")


def _hex_bytes(text: str) -> bytes:
    try:
        return bytes.fromhex(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid hex string {text!r}")


def _sig(value: float) -> str:
    return f"{value:.6g}"


def _emit(out: TextIO, **values: object) -> None:
    for key, value in values.items():
        out.write(f"{key}={value}\n")


# ---------------------------------------------------------------- frame

def cmd_frame_encode(args: argparse.Namespace, out: TextIO) -> int:
    frame = Frame(
        fcf=args.fcf,
        seq=args.seq,
        dst_pan=args.dst_pan,
        dst_addr=args.dst_addr,
        src_pan=args.src_pan,
        src_addr=args.src_addr,
        payload=args.payload,
    )
    out.write(frame_to_hex(frame) + "\n")
    return 0


def _fmt_field(value: Optional[int], width: int) -> str:
    return "-" if value is None else f"0x{value:0{width}X}"


def _addr_width(mode: AddrMode) -> int:
    return 16 if mode == AddrMode.EXTENDED else 4


def cmd_frame_decode(args: argparse.Namespace, out: TextIO) -> int:
    frame = frame_from_hex(args.hex)
    _emit(
        out,
        fcf=f"0x{frame.fcf:04X}",
        frame_type=frame.frame_type.name.lower(),
        seq=frame.seq,
        dst_pan=_fmt_field(frame.dst_pan, 4),
        dst_addr=_fmt_field(frame.dst_addr, _addr_width(frame.layout.dst_mode)),
        src_pan=_fmt_field(frame.src_pan, 4),
        src_addr=_fmt_field(frame.src_addr, _addr_width(frame.layout.src_mode)),
        payload=frame.payload.hex().upper() or "-",
        fcs=_fmt_field(frame.fcs, 4),
        corrupt=str(frame.corrupt).lower(),
        total_bytes=frame.total_bytes,
        airtime_us=f"{frame.airtime_us:.2f}",
    )
    if args.rss is not None:
        _emit(out, rss_dbm=f"{args.rss:.2f}")
    for name, (first, last) in frame.offsets.items():
        _emit(out, **{f"offset.{name}": f"{first}-{last}"})
    return 0


# ---------------------------------------------------------------- rules

def cmd_rules_check(args: argparse.Namespace, out: TextIO) -> int:
    chain = load_rules_file(args.file)
    for index, rule in enumerate(chain.rules):
        out.write(f"rule {index}: {describe_rule(rule)} | {render_rule(rule)}\n")
    _emit(out, rules=len(chain))
    return 0


def cmd_match(args: argparse.Namespace, out: TextIO) -> int:
    chain = load_rules_file(args.file)
    frame = frame_from_hex(args.hex)
    if args.rss is not None:
        frame = replace(frame, rx_meta=args.rss)
    result = evaluate_chain(chain, frame)
    _emit(out, verdict=result.verdict.value, rule="-" if result.rule_index is None else result.rule_index)
    return 0


# ---------------------------------------------------------------- analyze

def _parse_sweep(spec: str) -> tuple:
    try:
        name, span = spec.split("=", 1)
        start, stop, step = (float(part) for part in span.split(":"))
    except ValueError:
        raise UsageError(f"--sweep expects NAME=start:stop:step, got {spec!r}")
    if step <= 0 or stop < start:
        raise UsageError(f"--sweep range {span!r} is empty")
    return name.replace("-", "_"), np.arange(start, stop + step / 2.0, step)


def _run_sweep(
    args: argparse.Namespace,
    out: TextIO,
    compute: Callable[[argparse.Namespace], Dict[str, str]],
) -> int:
    name, values = _parse_sweep(args.sweep)
    if not hasattr(args, name) or name in ("mode", "sweep", "csv"):
        raise UsageError(f"cannot sweep {name!r}")

    rows = []
    for value in values:
        setattr(args, name, float(value))
        rows.append({name: _sig(float(value)), **compute(args)})

    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=list(rows[0].keys()), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.csv:
        Path(args.csv).write_text(buffer.getvalue())
        _emit(out, sweep=name, points=len(rows), csv=args.csv)
    else:
        out.write(buffer.getvalue())
    return 0


def _range_values(args: argparse.Namespace) -> Dict[str, str]:
    mode = args.mode.replace("-", "_")
    if mode == "no_guardian":
        _require(args, "pa", "sv")
        inputs = dict(pa_dbm=args.pa, sv_dbm=args.sv, alpha=args.alpha, d0=args.d0, pl_d0_db=args.pl_d0)
    elif mode == "stealth":
        _require(args, "sv", "sg", "dgv")
        inputs = dict(sv_dbm=args.sv, sg_dbm=args.sg, d_gv=args.dgv, alpha=args.alpha)
    else:
        _require(args, "pa", "pg", "dgv")
        gamma_eff = args.gamma_eff
        if gamma_eff is None:
            gamma_eff = RfParams().gamma_eff_db
        inputs = dict(pa_dbm=args.pa, pg_dbm=args.pg, gamma_eff_db=gamma_eff, d_gv=args.dgv, alpha=args.alpha)
    report = attack_range_report(mode, **inputs)
    return {"range_m": f"{report.range_m:.2f}"}


def _require(args: argparse.Namespace, *names: str) -> None:
    missing = [f"--{name.replace('_', '-')}" for name in names if getattr(args, name) is None]
    if missing:
        raise UsageError(f"--mode {args.mode} requires {', '.join(missing)}")


def cmd_analyze_range(args: argparse.Namespace, out: TextIO) -> int:
    if args.sweep:
        return _run_sweep(args, out, _range_values)
    _emit(out, mode=args.mode, **_range_values(args))
    return 0


def _energy_values(args: argparse.Namespace) -> Dict[str, str]:
    ratio = energy_cost(
        args.pa,
        args.dav,
        args.pg,
        args.dgv,
        int(args.frame_bytes),
        args.t_interfere,
        args.alpha,
    )
    return {"energy_ratio": _sig(ratio)}


def cmd_analyze_energy(args: argparse.Namespace, out: TextIO) -> int:
    if args.sweep:
        return _run_sweep(args, out, _energy_values)
    _emit(out, **_energy_values(args))
    return 0


def cmd_analyze_fp(args: argparse.Namespace, out: TextIO) -> int:
    rate = false_positive_rate(args.bits, args.errors)
    _emit(
        out,
        fp_fraction=f"{rate.numerator}/{rate.denominator}",
        fp_rate=_sig(float(rate)),
        tolerated_ber=_sig(tolerated_bit_error_rate(args.bits, args.errors)),
    )
    return 0


def _timing_model(args: argparse.Namespace) -> TimingModel:
    decision = DecisionCostModel(
        variant=CostVariant(args.variant),
        c_base=args.c_base,
        c_rule=args.c_rule,
        c_dispatch=args.c_dispatch,
        c_exec=args.c_exec,
        fpga_const=args.fpga_const,
    )
    return TimingModel(
        rx_delay=args.rx_delay,
        t_init=args.t_init,
        t_interfere=args.t_interfere,
        min_overlap=args.min_overlap,
        decision=decision,
    )


def cmd_analyze_timing(args: argparse.Namespace, out: TextIO) -> int:
    if args.offset is not None:
        _emit(out, max_react_time_us=f"{max_react_time(args.offset, args.total_bytes):.2f}")
        if not args.rules and not args.rule:
            return 0

    chain = RuleChain()
    if args.rules:
        chain = load_rules_file(args.rules)
    if args.rule:
        chain = RuleChain(rules=chain.rules + parse_rules("\n".join(args.rule)).rules)
    if not len(chain):
        raise UsageError("analyze timing needs --rules FILE, --rule LINE or --offset N")

    if args.frame:
        layout = frame_from_hex(args.frame)
        total = layout.total_bytes
    else:
        total = args.total_bytes
        if total < _DATA_FRAME_OVERHEAD:
            raise UsageError(f"--total-bytes must be at least {_DATA_FRAME_OVERHEAD} for the default data frame")
        layout = intra_pan_data_frame(0x0022, 0xFFFF, 0x0001, 0, bytes(total - _DATA_FRAME_OVERHEAD))

    report = reaction_feasible(chain, layout, _timing_model(args), total)
    _emit(
        out,
        depth=report.depth,
        total_frame_bytes=report.total_frame_bytes,
        t_listen_budget_us=f"{report.t_listen_budget:.2f}",
        rx_delay_us=f"{report.rx_delay:.2f}",
        t_decide_us=f"{report.t_decide:.2f}",
        t_init_us=f"{report.t_init:.2f}",
        t_interfere_us=f"{report.t_interfere:.2f}",
        t_react_us=f"{report.t_react:.2f}",
        min_overlap_us=f"{report.min_overlap:.2f}",
        required_us=f"{report.required:.2f}",
        slack_us=f"{report.slack:.2f}",
        feasible=str(report.feasible).lower(),
    )
    return 0


# ---------------------------------------------------------------- simulate

def _simulate_one(path: str) -> StatsReport:
    return run(load_scenario(path))


async def _simulate_all(paths: Sequence[str], jobs: int) -> List[StatsReport]:
    semaphore = asyncio.Semaphore(jobs)

    async def worker(path: str) -> StatsReport:
        async with semaphore:
            logger.info(f"Simulating {path}")
            return await asyncio.to_thread(_simulate_one, path)

    return await asyncio.gather(*(worker(path) for path in paths))


def cmd_simulate(args: argparse.Namespace, out: TextIO) -> int:
    scenarios: List[str] = args.scenarios
    if len(scenarios) > 1 and not args.out_dir:
        raise UsageError("several scenarios need --out-dir")
    if len(scenarios) > 1 and (args.csv or args.summary):
        raise UsageError("--csv and --summary take a single scenario; use --out-dir")

    jobs = args.jobs if args.jobs is not None else args.config.jobs
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    if jobs == 1 or len(scenarios) == 1:
        reports = [_simulate_one(path) for path in scenarios]
    else:
        reports = asyncio.run(_simulate_all(scenarios, jobs))

    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for path, report in zip(scenarios, reports):
            stem = Path(path).stem
            save_report(report, out_dir / f"{stem}.csv", out_dir / f"{stem}.summary.json")
            _emit(out, **{stem: out_dir / f"{stem}.csv"})
        return 0

    report = reports[0]
    save_report(report, args.csv, args.summary)
    if not args.csv:
        write_csv(report, out)
    return 0


# ---------------------------------------------------------------- parser

def _add_timing_flags(parser: argparse.ArgumentParser) -> None:
    defaults = TimingModel()
    decision = defaults.decision
    group = parser.add_argument_group("Timing model")
    group.add_argument("--variant", choices=[v.value for v in CostVariant], default=decision.variant.value)
    group.add_argument("--c-base", type=float, default=decision.c_base, help="firmware per-packet overhead, us")
    group.add_argument("--c-rule", type=float, default=decision.c_rule, help="firmware per-rule cost, us")
    group.add_argument("--c-dispatch", type=float, default=decision.c_dispatch, help="firmware per-match dispatch, us")
    group.add_argument("--c-exec", type=float, default=decision.c_exec, help="firmware per-match execution, us")
    group.add_argument("--fpga-const", type=float, default=decision.fpga_const, help="FPGA decision time, us")
    group.add_argument("--rx-delay", type=float, default=defaults.rx_delay)
    group.add_argument("--t-init", type=float, default=defaults.t_init)
    group.add_argument("--t-interfere", type=float, default=defaults.t_interfere)
    group.add_argument("--min-overlap", type=float, default=defaults.min_overlap)


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guardian",
        description="IEEE 802.15.4 guardian toolkit: frames, gtables rules, protection analysis, simulation",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG on stderr")
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    # frame
    frame = commands.add_parser("frame", help="encode or decode frames as hex")
    frame_commands = frame.add_subparsers(dest="frame_command", metavar="ACTION")
    frame_commands.required = True
    encode = frame_commands.add_parser("encode", help="build a frame and print it as hex")
    encode.add_argument("--fcf", type=_int, required=True, help="frame control field, e.g. 0x8841")
    encode.add_argument("--seq", type=_int, default=0)
    encode.add_argument("--dst-pan", type=_int)
    encode.add_argument("--dst-addr", type=_int)
    encode.add_argument("--src-pan", type=_int)
    encode.add_argument("--src-addr", type=_int)
    encode.add_argument("--payload", type=_hex_bytes, default=b"", help="payload as hex")
    encode.set_defaults(handler=cmd_frame_encode)
    decode = frame_commands.add_parser("decode", help="parse a hex frame and print its fields and offsets")
    decode.add_argument("hex")
    decode.add_argument("--rss", type=float, help="received signal strength to attach, dBm")
    decode.set_defaults(handler=cmd_frame_decode)

    # rules / match
    rules = commands.add_parser("rules", help="validate rules files")
    rules_commands = rules.add_subparsers(dest="rules_command", metavar="ACTION")
    rules_commands.required = True
    check = rules_commands.add_parser("check", help="parse a rules file and summarise each rule")
    check.add_argument("file")
    check.set_defaults(handler=cmd_rules_check)

    match = commands.add_parser("match", help="evaluate a rules file against a hex frame")
    match.add_argument("hex")
    match.add_argument("file")
    match.add_argument("--rss", type=float, help="received signal strength at the guardian, dBm")
    match.set_defaults(handler=cmd_match)

    # analyze
    analyze = commands.add_parser("analyze", help="closed-form protection analysis")
    analyze_commands = analyze.add_subparsers(dest="analyze_command", metavar="ANALYSIS")
    analyze_commands.required = True

    rf = RfParams()
    range_parser = analyze_commands.add_parser("range", help="attack range under a given attacker model")
    range_parser.add_argument("--mode", choices=["no-guardian", "stealth", "force"], required=True)
    range_parser.add_argument("--pa", type=float, help="attacker transmit power, dBm")
    range_parser.add_argument("--pg", type=float, help="guardian interference power, dBm")
    range_parser.add_argument("--sv", type=float, help="victim sensitivity, dBm")
    range_parser.add_argument("--sg", type=float, help="guardian sensitivity, dBm")
    range_parser.add_argument("--dgv", type=float, help="guardian-victim distance, m")
    range_parser.add_argument("--alpha", type=float, default=rf.alpha, help="path-loss exponent")
    range_parser.add_argument("--d0", type=float, default=rf.d0, help="reference distance, m")
    range_parser.add_argument("--pl-d0", type=float, default=rf.pl_d0_db, help="path loss at d0, dB")
    range_parser.add_argument("--gamma-eff", type=float, help="effective SIR threshold, dB")
    range_parser.add_argument("--sweep", help="NAME=start:stop:step over one numeric flag")
    range_parser.add_argument("--csv", help="write the sweep to this CSV file")
    range_parser.set_defaults(handler=cmd_analyze_range)

    energy = analyze_commands.add_parser("energy", help="attacker/guardian energy ratio per frame")
    energy.add_argument("--pa", type=float, default=0.0)
    energy.add_argument("--pg", type=float, default=0.0)
    energy.add_argument("--dav", type=float, default=1.0)
    energy.add_argument("--dgv", type=float, default=1.0)
    energy.add_argument("--frame-bytes", type=float, default=32)
    energy.add_argument("--t-interfere", type=float, default=TimingModel().t_interfere)
    energy.add_argument("--alpha", type=float, default=rf.alpha)
    energy.add_argument("--sweep", help="NAME=start:stop:step over one numeric flag")
    energy.add_argument("--csv", help="write the sweep to this CSV file")
    energy.set_defaults(handler=cmd_analyze_energy)

    fp = analyze_commands.add_parser("fp", help="false-positive rate of a Hamming-tolerant match")
    fp.add_argument("--bits", type=int, default=32)
    fp.add_argument("--errors", type=int, default=2)
    fp.set_defaults(handler=cmd_analyze_fp)

    timing = analyze_commands.add_parser("timing", help="reaction-time feasibility of a chain")
    timing.add_argument("--rules", help="rules file")
    timing.add_argument("--rule", action="append", help="inline gtables line (repeatable)")
    timing.add_argument("--frame", help="hex frame whose layout is inspected")
    timing.add_argument("--total-bytes", type=int, default=32, help="frame length incl. SHR/PHR/FCS")
    timing.add_argument("--offset", type=int, help="print the airtime left after this 1-indexed byte")
    _add_timing_flags(timing)
    timing.set_defaults(handler=cmd_analyze_timing)

    # simulate
    simulate = commands.add_parser("simulate", help="run scenario files")
    simulate.add_argument("scenarios", nargs="+", metavar="SCENARIO")
    simulate.add_argument("--csv", help="interval CSV path (default: stdout)")
    simulate.add_argument("--summary", help="JSON summary path")
    simulate.add_argument("--out-dir", help="write <name>.csv and <name>.summary.json per scenario")
    simulate.add_argument("--jobs", type=int, help="scenarios simulated concurrently")
    simulate.set_defaults(handler=cmd_simulate)
    return parser


def dispatch(argv: Optional[Sequence[str]] = None, out: Optional[TextIO] = None) -> int:
    """Parse ``argv``, run the command and return its exit code."""
    out = out if out is not None else sys.stdout
    parser = create_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        config = RuntimeConfig.from_env()
    except ValueError as e:
        print(f"guardian: error: {e}", file=sys.stderr)
        return 1
    configure_logging(config, args.verbose)
    args.config = config

    try:
        return args.handler(args, out)
    except (UsageError, ValidationError) as e:
        parser.print_usage(sys.stderr)
        print(f"guardian: error: {e}", file=sys.stderr)
        return 2
    except (GuardianError, OSError) as e:
        logger.debug("command failed", exc_info=True)
        print(f"guardian: error: {e}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
