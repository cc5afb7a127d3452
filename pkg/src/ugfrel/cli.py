from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

from . import __version__
from .config import effective_config
from .document import load_system_config
from .oracle import compare, enumerate_exact, monte_carlo
from .report import (
    discretization_payload,
    format_discretization,
    format_report,
    format_ufunction,
    report_payload,
    ufunction_payload,
)
from .stochastic import BetaParams, WeibullParams, discretize, fit_beta_moments
from .system import SystemConfig, assess, build_components, system_generation
from .ugf import ModelInputError
from .utils import atomic_write_text, dump_json, setup_logging

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ORACLE_MISMATCH = 3


class CommandListFormatter(argparse.HelpFormatter):
    """Subcommands one per line, their help starting at a fixed column."""

    COMMAND_COLUMN = 14

    def __init__(self, prog: str) -> None:
        super().__init__(prog, max_help_position=28)

    def _format_action(self, action: argparse.Action) -> str:
        if not isinstance(action, argparse._SubParsersAction._ChoicesPseudoAction):  # type: ignore[attr-defined]
            return super()._format_action(action)
        name = self._format_action_invocation(action)
        line = " " * self._current_indent + name
        if action.help:
            line += " " * max(1, self.COMMAND_COLUMN - len(name)) + self._expand_help(action)
        return line + "\n"


_TRUE_STRS = {"1", "true", "yes", "on", "y", "t"}
_FALSE_STRS = {"0", "false", "no", "off", "n", "f"}


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in _TRUE_STRS:
        return True
    if v in _FALSE_STRS:
        return False
    raise argparse.ArgumentTypeError(f"expected true or false, got {value!r}")


def _parse_params(text: str) -> Dict[str, float]:
    out: Dict[str, float] = {}
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        key, sep, value = item.partition("=")
        if not sep:
            raise ValueError(f"parameter {item!r} is not key=value")
        try:
            out[key.strip()] = float(value)
        except ValueError:
            raise ValueError(f"parameter {key.strip()!r} is not a number: {value!r}") from None
    return out


def _density(dist: str, params: Dict[str, float]):
    keys = set(params)
    if dist == "beta":
        if keys == {"alpha", "beta"}:
            return BetaParams(params["alpha"], params["beta"])
        if keys == {"mean", "variance"}:
            return fit_beta_moments(params["mean"], params["variance"])
        raise ModelInputError("beta needs alpha=..,beta=.. or mean=..,variance=..")
    if keys == {"k", "c"}:
        return WeibullParams(params["k"], params["c"])
    raise ModelInputError("weibull needs k=..,c=..")


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--json-logs", action="store_true", help="emit JSON log lines instead of human-readable")
    p.add_argument("--verbose", action="store_true", help="debug logging")
    p.add_argument(
        "--settings",
        type=Path,
        default=None,
        help="path to settings TOML (default: ~/.config/ugfrel/config.toml)",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="ugfrel",
        description="UGF reliability assessment for distribution systems with DG",
        formatter_class=CommandListFormatter,
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    sub = ap.add_subparsers(dest="cmd", required=True, metavar="command")
    ap._subparsers_main = sub  # type: ignore[attr-defined]

    # assess
    ap_assess = sub.add_parser("assess", help="compute LOLE and EENS for a system")
    _add_common_flags(ap_assess)
    ap_assess.add_argument("--config", type=Path, required=True, help="system description (JSON)")
    ap_assess.add_argument("--load-csv", type=Path, default=None, help="hourly load series overriding the document")
    ap_assess.add_argument("--out", type=Path, default=None, help="write the report here instead of stdout")
    ap_assess.add_argument("--format", choices=["json", "text"], default=None, help="report format (default: settings or text)")
    ap_assess.add_argument("--strict-loss", type=_parse_bool, default=None, help="true: loss when L > G; false: L >= G")
    ap_assess.add_argument("--verify-oracle", action="store_true", help="cross-check against exact joint enumeration")
    ap_assess.add_argument("--mc-samples", type=int, default=None, help="also run a Monte Carlo estimate")
    ap_assess.add_argument("--seed", type=int, default=None, help="Monte Carlo seed (default: settings)")
    ap_assess.add_argument("--workers", type=int, default=None, help="worker threads (default: settings or 1)")

    # discretize
    dp = sub.add_parser("discretize", help="discretize a source density")
    _add_common_flags(dp)
    dp.add_argument("--dist", choices=["beta", "weibull"], required=True)
    dp.add_argument("--params", required=True, help="alpha=..,beta=.. | mean=..,variance=.. | k=..,c=..")
    dp.add_argument("--n", type=int, required=True, help="number of states")
    dp.add_argument("--max", type=float, default=None, help="upper bound (default: 1 for beta, 4c for weibull)")
    dp.add_argument("--method", choices=["cdf", "quad"], default="cdf")
    dp.add_argument("--format", choices=["json", "text"], default=None)

    # inspect
    ip = sub.add_parser("inspect", help="print one component's u-function")
    _add_common_flags(ip)
    ip.add_argument("--config", type=Path, required=True, help="system description (JSON)")
    ip.add_argument(
        "--component",
        choices=["solar", "wind", "ev", "transformer", "load", "system"],
        required=True,
    )
    ip.add_argument("--load-csv", type=Path, default=None)
    ip.add_argument("--format", choices=["json", "text"], default=None)

    help_parser = sub.add_parser("help", help="show help for a command")
    help_parser.add_argument("topic", nargs="?", help="command to describe")

    return ap


def _load_system(ns: argparse.Namespace, cfg: Dict[str, Any]) -> SystemConfig:
    algebra = cfg["algebra"]
    return load_system_config(
        ns.config,
        load_csv=ns.load_csv,
        strict_loss=getattr(ns, "strict_loss", None),
        table_mass_tolerance=float(algebra["table_mass_tolerance"]),
        rel_tol=float(algebra["collect_rel_tol"]),
    )


def _write_output(text: str, out: Optional[Path]) -> None:
    if out is not None:
        atomic_write_text(out.expanduser(), text)
    else:
        print(text, end="")


def main(argv: list[str] | None = None) -> None:
    if argv is None:
        argv = sys.argv[1:]
    ap = build_parser()
    ns = ap.parse_args(list(argv))

    if ns.cmd == "help":
        topic = getattr(ns, "topic", None)
        subparsers = getattr(ap, "_subparsers_main", None)
        if not topic:
            ap.print_help()
            sys.exit(0)
        if subparsers and topic in subparsers.choices:
            subparsers.choices[topic].print_help()
            sys.exit(0)
        print(f"Unknown command '{topic}'", file=sys.stderr)
        print()
        ap.print_help()
        sys.exit(1)

    def _emit(event: str, **extra: object) -> None:
        if ns.json_logs:
            payload: dict[str, object] = {"event": event}
            if extra:
                payload.update(extra)
            print(json.dumps(payload), file=sys.stderr)
        else:
            message = extra.pop("message", None)
            details = " ".join(f"{k}={extra[k]}" for k in sorted(extra))
            print(f"{event}: {message or details}", file=sys.stderr)

    cfg = effective_config(ns.settings)
    log_file = cfg.get("logging", {}).get("file") or None
    setup_logging(
        "ugfrel",
        level=logging.DEBUG if ns.verbose else logging.WARNING,
        json_logs=bool(ns.json_logs),
        log_file=Path(log_file).expanduser() if log_file else None,
    )
    fmt = ns.format or cfg["output"]["format"]

    if ns.cmd == "discretize":
        try:
            density = _density(ns.dist, _parse_params(ns.params))
            dist = discretize(density, ns.n, ns.max, method=ns.method)
        except (ValueError, ModelInputError) as exc:
            _emit("error", message=str(exc))
            sys.exit(EXIT_INVALID)
        text = dump_json(discretization_payload(dist)) if fmt == "json" else format_discretization(dist)
        _write_output(text, None)
        sys.exit(EXIT_OK)

    elif ns.cmd == "inspect":
        try:
            system = _load_system(ns, cfg)
            parts = build_components(system)
            if ns.component == "system":
                u = system_generation(
                    parts["solar"], parts["wind"], parts["ev"], parts["transformer"], rel_tol=system.rel_tol
                )
            else:
                u = parts[ns.component]
        except ModelInputError as exc:
            _emit("error", message=str(exc))
            sys.exit(EXIT_INVALID)
        text = dump_json(ufunction_payload(ns.component, u)) if fmt == "json" else format_ufunction(ns.component, u)
        _write_output(text, None)
        sys.exit(EXIT_OK)

    elif ns.cmd == "assess":
        workers = ns.workers or int(cfg["oracle"]["workers"])
        seed = ns.seed if ns.seed is not None else int(cfg["monte_carlo"]["seed"])
        oracle_result = check = mc = None
        try:
            if ns.mc_samples is not None and ns.mc_samples < 1:
                raise ModelInputError("--mc-samples must be >= 1")
            system = _load_system(ns, cfg)
            report = assess(system, workers=workers)
            if ns.verify_oracle:
                oracle_result = enumerate_exact(
                    system, max_states=int(cfg["oracle"]["max_states"]), workers=workers
                )
                check = compare(report, oracle_result, float(cfg["oracle"]["rel_tolerance"]))
            if ns.mc_samples:
                mc = monte_carlo(
                    system, ns.mc_samples, seed, batch_size=int(cfg["monte_carlo"]["batch_size"])
                )
        except ModelInputError as exc:
            _emit("error", message=str(exc))
            sys.exit(EXIT_INVALID)

        if fmt == "json":
            text = dump_json(report_payload(report, oracle=oracle_result, check=check, monte_carlo=mc))
        else:
            text = format_report(report, oracle=oracle_result, check=check, monte_carlo=mc)
        _write_output(text, ns.out)

        if check is not None and not check.matches:
            _emit(
                "oracle-mismatch",
                loss_rel_error=check.loss_rel_error,
                unserved_rel_error=check.unserved_rel_error,
            )
            sys.exit(EXIT_ORACLE_MISMATCH)
        sys.exit(EXIT_OK)

    else:
        ap.print_help()
        sys.exit(1)
