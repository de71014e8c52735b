"""
crosslayer command-line interface
parse -> execute -> emit; errors map to exit codes 1 (usage), 2 (domain precondition), 3 (bound exceeded)
"""

import argparse
import asyncio
import json
import logging
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import structlog

from config.settings import AnalysisSettings, settings as default_settings
from framework.comg import CensorRaceEngine, RaceSpec
from framework.compose import check_ic
from framework.errors import CrossLayerError, MalformedConfig, MissingParameter, UnknownSubcommand, UsageError
from framework.extform import protocol_from_document
from framework.models import to_fraction
from framework.orchestration import SweepOrchestrator
from framework.reporting import FORMATS, Report, build_report, render
from framework.settlement import load_settlement_document, validate_hashrate
from games.crab import CROSS_CHECK_MAX_T, CrabParams, crab_cross_check, crab_game, crab_safety
from games.htlc import HtlcParams, WormholeParams, htlc_analysis, two_htlc, wormhole
from games.mev import MevParams, mev_game

logger = logging.getLogger(__name__)

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")
REQUIRED = object()
SEED_LIMIT = 2**64

_installed_handlers: List[logging.Handler] = []


# ==================== PARAMETER TABLE ====================

def _hashrate(raw: Any):
    values = raw.split(",") if isinstance(raw, str) else list(raw)
    return validate_hashrate([v.strip() if isinstance(v, str) else v for v in values])


def _reveal(raw: Any) -> Optional[int]:
    if raw is None or str(raw).lower() in ("never", "none"):
        return None
    return int(raw)


def _flag(raw: Any) -> bool:
    if isinstance(raw, str):
        return raw.lower() in ("1", "true", "yes")
    return bool(raw)


Param = Tuple[str, Callable[[Any], Any], Any]  # (name, converter, default or REQUIRED)

LAMBDA: Param = ("lambda", _hashrate, REQUIRED)
RACE: List[Param] = [LAMBDA, ("f1", to_fraction, REQUIRED), ("f2", to_fraction, REQUIRED)]

COMMANDS: Dict[str, List[Param]] = {
    "comg schedule": RACE + [("T", int, None), ("strict_ties", _flag, False)],
    "comg prob": RACE + [("T", int, REQUIRED)],
    "comg min-timelock": RACE,
    "comg oracle": RACE + [("T", int, REQUIRED)],
    "comg simulate": RACE + [("T", int, REQUIRED), ("trials", int, None)],
    "comg sweep": RACE + [("T_min", int, 0), ("T_max", int, REQUIRED), ("trials", int, 0), ("save", _flag, False)],
    "htlc analyze": [
        LAMBDA, ("T", int, REQUIRED), ("t_e", int, None), ("t_s", _reveal, 0),
        ("v_A", to_fraction, REQUIRED), ("v_B", to_fraction, REQUIRED), ("v", to_fraction, REQUIRED),
        ("fee_cap_payer", to_fraction, None), ("fee_cap_payee", to_fraction, None),
        ("fee_step", to_fraction, None), ("epsilon_open", to_fraction, None), ("max_block", int, None),
    ],
    "two-htlc check": [
        LAMBDA, ("mode", str, "dep"), ("T1", int, REQUIRED), ("T2", int, REQUIRED),
        ("v1", to_fraction, REQUIRED), ("v2", to_fraction, REQUIRED),
        ("v_A1", to_fraction, 0), ("v_B1", to_fraction, 0), ("v_C2", to_fraction, 0), ("v_D2", to_fraction, 0),
        ("cap1", to_fraction, None), ("cap2", to_fraction, None), ("generic", _flag, False),
    ],
    "wormhole check": [
        LAMBDA, ("v1", to_fraction, None), ("v2", to_fraction, None),
        ("v3", to_fraction, REQUIRED), ("routing_fee", to_fraction, None),
        ("v_A1", to_fraction, 0), ("v_B1", to_fraction, 0), ("v_B2", to_fraction, 0),
        ("v_C2", to_fraction, 0), ("v_C3", to_fraction, 0), ("v_D3", to_fraction, 0), ("T", int, 1),
        ("fee_divisions", int, 1),
    ],
    "crab game": [
        LAMBDA, ("T", int, REQUIRED), ("v", to_fraction, REQUIRED), ("c", to_fraction, REQUIRED),
        ("v_A_l", to_fraction, REQUIRED), ("v_A_o", to_fraction, REQUIRED),
        ("epsilon", to_fraction, Fraction(1, 100)), ("bribe_cap", to_fraction, None),
        ("punish_cap", to_fraction, 0), ("fee_step", to_fraction, None), ("cross_check", _flag, False),
    ],
    "crab safety": [LAMBDA, ("c", to_fraction, REQUIRED), ("v", to_fraction, REQUIRED), ("T", int, REQUIRED)],
    "mev solve": [
        LAMBDA, ("s", to_fraction, REQUIRED), ("f", to_fraction, REQUIRED), ("l", to_fraction, 0),
        ("trusted", to_fraction, None),
    ],
    "compose check-ic": [LAMBDA, ("game", str, REQUIRED), ("settlement", str, REQUIRED), ("max_block", int, None)],
}


def option(name: str) -> str:
    return "--" + name.replace("_", "-")


@dataclass
class Command:
    """A validated subcommand with its bound parameters"""
    name: str
    params: Dict[str, Any]
    inputs: Dict[str, Any] = field(default_factory=dict)
    fmt: str = "json"
    seed: int = 0
    config: AnalysisSettings = default_settings
    log_level: str = "INFO"
    log_file: Optional[str] = None


# ==================== PARSING ====================

class CliParser(argparse.ArgumentParser):
    """argparse errors become UsageError instead of exiting"""

    def error(self, message: str):
        if "invalid choice" in message and message.startswith(("argument group", "argument action")):
            raise UnknownSubcommand(message)
        raise UsageError(message)


def _common_options() -> CliParser:
    common = CliParser(add_help=False)
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config document")
    common.add_argument("--format", choices=FORMATS, default=argparse.SUPPRESS, help="Output format")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="Seed for randomised steps")
    common.add_argument("--log-level", choices=LOG_LEVELS, default=argparse.SUPPRESS)
    common.add_argument("--log-file", default=argparse.SUPPRESS, help="Log file (default from settings)")
    return common


def build_parser() -> CliParser:
    common = _common_options()
    parser = CliParser(prog="crosslayer", parents=[common],
                       description="Cross-layer incentive analysis of blockchain protocols")
    groups = parser.add_subparsers(dest="group", required=True, parser_class=CliParser)
    actions: Dict[str, argparse._SubParsersAction] = {}
    for name, params in COMMANDS.items():
        group, action = name.split(" ")
        if group not in actions:
            actions[group] = groups.add_parser(group).add_subparsers(dest="action", required=True,
                                                                     parser_class=CliParser)
        leaf = actions[group].add_parser(action, parents=[common], allow_abbrev=False)
        for param, converter, _ in params:
            if converter is _flag:
                leaf.add_argument(option(param), dest=param, action="store_const", const=True, default=None)
            else:
                leaf.add_argument(option(param), dest=param, default=None)
    return parser


def _read_document(path: str) -> Dict[str, Any]:
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise MalformedConfig(f"Cannot read config document {path}: {e}") from e
    if not isinstance(document, dict):
        raise MalformedConfig("Config document must be a JSON object")
    return document


def _bind(name: str, params: Sequence[Param], flags: Mapping[str, Any],
          document: Mapping[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """Flags over document params over defaults; returns (converted, raw)"""
    raw_doc = document.get("params", {})
    if not isinstance(raw_doc, dict):
        raise MalformedConfig("Config document 'params' must be an object")
    from_doc = {key.replace("-", "_"): value for key, value in raw_doc.items()}

    bound: Dict[str, Any] = {}
    raw: Dict[str, Any] = {}
    for param, converter, default in params:
        value = flags.get(param)
        if value is None:
            value = from_doc.get(param)
        if value is None:
            if default is REQUIRED:
                raise MissingParameter(f"{name} needs {option(param)}")
            bound[param] = default
            continue
        raw[param] = value
        try:
            bound[param] = converter(value)
        except (ValueError, TypeError, ZeroDivisionError) as e:
            raise UsageError(f"Invalid value for {option(param)}: {value!r}") from e
    return bound, raw


def parse(argv: Optional[Sequence[str]] = None, document: Optional[Mapping[str, Any]] = None) -> Command:
    """Validated Command from argv and an optional config document"""
    args = build_parser().parse_args(argv)
    name = f"{args.group} {args.action}"
    if document is None:
        document = _read_document(args.config) if getattr(args, "config", None) else {}

    config = default_settings
    if document.get("settings"):
        config = config.merged(document["settings"])

    params, raw = _bind(name, COMMANDS[name], vars(args), document)

    fmt = getattr(args, "format", None) or document.get("format", "json")
    if fmt not in FORMATS:
        raise UsageError(f"Unknown output format {fmt!r}")
    seed = getattr(args, "seed", None)
    if seed is None:
        seed = document.get("seed", config.default_seed)
    if not isinstance(seed, int) or not 0 <= seed < SEED_LIMIT:
        raise UsageError(f"Seed must be an integer in [0, 2^64), got {seed!r}")

    return Command(
        name=name,
        params=params,
        inputs=raw,
        fmt=fmt,
        seed=seed,
        config=config,
        log_level=getattr(args, "log_level", None) or config.log_level,
        log_file=getattr(args, "log_file", None) or config.log_file,
    )


# ==================== HANDLERS ====================

def _comg_schedule(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    schedule = CensorRaceEngine.censor_schedule(p["lambda"], p["f1"], p["f2"], p["strict_ties"])
    result: Dict[str, Any] = {"ell": schedule.ell, "rho": schedule.rho, "r_star": schedule.r_star}
    if p["T"] is not None:
        result["T"] = p["T"]
        result["tstar"] = CensorRaceEngine.switch_times(schedule, p["T"])
    return result


def _comg_prob(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    schedule = CensorRaceEngine.censor_schedule(p["lambda"], p["f1"], p["f2"])
    probability = CensorRaceEngine.inclusion_probability(schedule, p["T"])
    return {
        "T": p["T"],
        "p": probability,
        "p_float": float(probability),
        "tstar": CensorRaceEngine.switch_times(schedule, p["T"]),
    }


def _comg_min_timelock(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    return {"min_timelock": CensorRaceEngine.min_certain_timelock(p["lambda"], p["f1"], p["f2"])}


def _comg_oracle(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    spec = RaceSpec(p["lambda"], p["f1"], p["f2"], p["T"])
    oracle = CensorRaceEngine.best_response_oracle(spec, cmd.config)
    schedule = CensorRaceEngine.censor_schedule(p["lambda"], p["f1"], p["f2"])
    analytic_rounds = [min(max(t, 0), spec.T) for t in CensorRaceEngine.switch_times(schedule, spec.T)]
    analytic_p = CensorRaceEngine.inclusion_probability(schedule, spec.T)
    return {
        "oracle": oracle,
        "analytic_switch_rounds": [int(t) for t in analytic_rounds],
        "analytic_p": analytic_p,
        "agree": list(oracle.switch_rounds) == analytic_rounds and oracle.probability == analytic_p,
    }


def _comg_simulate(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    spec = RaceSpec(p["lambda"], p["f1"], p["f2"], p["T"])
    schedule = CensorRaceEngine.censor_schedule(spec.lam, spec.f1, spec.f2)
    times = CensorRaceEngine.switch_times(schedule, spec.T)
    trials = p["trials"] or cmd.config.mc_trials
    simulated = CensorRaceEngine.simulate_race(spec, times, trials, cmd.seed)
    analytic = CensorRaceEngine.inclusion_probability(schedule, spec.T)
    deviation = abs(simulated.probability - float(analytic))
    return {
        "simulation": simulated,
        "p_analytic": analytic,
        "within_3se": deviation <= 3 * simulated.standard_error or deviation == 0,
    }


def _comg_sweep(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    orchestrator = SweepOrchestrator(p["lambda"], p["f1"], p["f2"], cmd.config)
    horizons = range(p["T_min"], p["T_max"] + 1)

    async def run() -> None:
        await orchestrator.run_sweep(horizons, p["trials"], cmd.seed)
        if p["save"]:
            await orchestrator.save_results()

    asyncio.run(run())
    return {
        "columns": orchestrator.columns(),
        "rows": orchestrator.rows(),
        "summary": orchestrator.generate_sweep_report(),
    }


def _htlc_analyze(cmd: Command) -> Dict[str, Any]:
    p = dict(cmd.params)
    max_block = p.pop("max_block")
    lam = p.pop("lambda")
    if p["t_e"] is None:
        p["t_e"] = p["T"]
    params = HtlcParams(**p)
    return htlc_analysis(params, lam, cmd.config, max_block).summary()


def _two_htlc_check(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    horizon = max(p["T1"], p["T2"])
    first = HtlcParams(T=p["T1"], t_e=horizon, v_A=p["v_A1"], v_B=p["v_B1"], v=p["v1"],
                       fee_cap_payee=p["cap1"])
    second = HtlcParams(T=p["T2"], t_e=horizon, v_A=p["v_C2"], v_B=p["v_D2"], v=p["v2"],
                        fee_cap_payee=p["cap2"])
    report = two_htlc(p["mode"], first, second, p["lambda"], cmd.config, generic=p["generic"])
    return report.summary()


def _wormhole_check(cmd: Command) -> Dict[str, Any]:
    p = dict(cmd.params)
    lam = p.pop("lambda")
    fee = p.pop("routing_fee")
    if fee is not None:
        if p["v1"] is None:
            p.pop("v1")
        p.pop("v2")
        v3 = p.pop("v3")
        params = WormholeParams.with_routing_fee(v3, fee, **p)
    else:
        if p["v1"] is None or p["v2"] is None:
            raise MissingParameter("wormhole check needs --v1 and --v2, or --routing-fee")
        params = WormholeParams(**p)
    return wormhole(params, lam, cmd.config).summary()


def _crab_params(p: Mapping[str, Any]) -> CrabParams:
    return CrabParams(
        T=p["T"], v_A_l=p["v_A_l"], v_B_l=p["v"] - p["v_A_l"], v_A_o=p["v_A_o"], v_B_o=p["v"] - p["v_A_o"],
        c=p["c"], v=p["v"], epsilon=p["epsilon"], bribe_cap=p["bribe_cap"],
        punish_cap=p["punish_cap"], fee_step=p["fee_step"],
    )


def _crab_game(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    params = _crab_params(p)
    protocol = crab_game(params, cmd.config)
    tree = protocol.game.tree(params.T)
    result: Dict[str, Any] = {
        "tree": tree.describe(),
        "intended_path": tree.play(protocol.ipb(params.T)).leaf_path,
        "safety": crab_safety(params.T, params.c, params.bribe_cap, p["lambda"]),
        "cross_check": None,
    }
    if p["cross_check"]:
        if params.T > CROSS_CHECK_MAX_T:
            logger.warning(f"Cross-check skipped: T={params.T} exceeds {CROSS_CHECK_MAX_T}")
        else:
            result["cross_check"] = crab_cross_check(params, p["lambda"], cmd.config).summary()
    return result


def _crab_safety(cmd: Command) -> Any:
    p = cmd.params
    return crab_safety(p["T"], p["c"], p["v"], p["lambda"])


def _mev_solve(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    params = MevParams(l=p["l"], s=p["s"], f=p["f"], lam=p["lambda"], trusted_share=p["trusted"])
    return mev_game(params, cmd.config).summary()


def _compose_check_ic(cmd: Command) -> Dict[str, Any]:
    p = cmd.params
    protocol = protocol_from_document(p["game"])
    _, conflicts, rules = load_settlement_document(p["settlement"])
    verdicts = check_ic(protocol, p["lambda"], rules, conflicts, max_block=p["max_block"], config=cmd.config)
    return {
        "protocol": protocol.name,
        "holds": all(v.holds for v in verdicts.values()),
        "verdicts": verdicts,
        "rows": [
            {"p": str(param), "holds": v.holds, "indifferent": v.indifferent,
             "collusions_checked": v.collusions_checked,
             "witness_kind": v.witness.kind if v.witness else None}
            for param, v in verdicts.items()
        ],
    }


HANDLERS: Dict[str, Callable[[Command], Any]] = {
    "comg schedule": _comg_schedule,
    "comg prob": _comg_prob,
    "comg min-timelock": _comg_min_timelock,
    "comg oracle": _comg_oracle,
    "comg simulate": _comg_simulate,
    "comg sweep": _comg_sweep,
    "htlc analyze": _htlc_analyze,
    "two-htlc check": _two_htlc_check,
    "wormhole check": _wormhole_check,
    "crab game": _crab_game,
    "crab safety": _crab_safety,
    "mev solve": _mev_solve,
    "compose check-ic": _compose_check_ic,
}


def execute(cmd: Command) -> Report:
    """Run the command; deterministic given the seed"""
    handler = HANDLERS.get(cmd.name)
    if handler is None:
        raise UnknownSubcommand(f"Unknown subcommand {cmd.name!r}")
    logger.info(f"Running {cmd.name}")
    return build_report(cmd.name, handler(cmd), cmd.inputs, cmd.seed)


def emit(report: Report, fmt: str = "json") -> str:
    return render(report, fmt)


# ==================== LOGGING ====================

def configure_logging(level: str, log_file: Optional[str] = None) -> None:
    """Root logger: console renderer on stderr, JSON lines in the log file"""
    pre_chain = [
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
    ]
    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(structlog.stdlib.ProcessorFormatter(
        processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                    structlog.dev.ConsoleRenderer(colors=False)],
        foreign_pre_chain=pre_chain,
    ))
    handlers: List[logging.Handler] = [console]
    if log_file:
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(structlog.stdlib.ProcessorFormatter(
            processors=[structlog.stdlib.ProcessorFormatter.remove_processors_meta,
                        structlog.processors.JSONRenderer(sort_keys=True)],
            foreign_pre_chain=pre_chain,
        ))
        handlers.append(file_handler)

    root = logging.getLogger()
    for handler in _installed_handlers:
        root.removeHandler(handler)
        handler.close()
    _installed_handlers[:] = handlers
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level.upper())


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        command = parse(argv)
        configure_logging(command.log_level, command.log_file)
        report = execute(command)
        sys.stdout.write(emit(report, command.fmt))
        return 0
    except CrossLayerError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
