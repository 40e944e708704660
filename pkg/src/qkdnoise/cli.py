"""Command-line front end: deterministic CSV sweeps of the security bounds.

Every subcommand resolves its parameters from flags over an optional config
file over built-in defaults, echoes the resolved set as `#` comments in the
CSV output, and can render the matching figure next to the data via --plot.
Exit codes: 0 success, 1 argument errors, 2 numerical/solver failures.
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import dataclass
from typing import Callable

from . import __version__, analysis, plotting
from .analysis import STATUS_CV_SECURE, STATUS_FAILURE, STATUS_NO_RATE, STATUS_OK
from .dv_security import (
    BB84,
    SIX_STATE,
    DvSetup,
    asymptotic_mu_max_dv,
    observables,
    qber_threshold,
    simulate_dv,
)
from .gaussian_cv import (
    SQUEEZED,
    CvSetup,
    DegenerateMeasurementError,
    UnphysicalStateError,
    asymptotic_mu_max_cv,
)
from .numerics import ConvergenceError, NoSignChangeError
from .photon_stats import ChannelModel, NoiseSource

_STATUS_TOKEN = {
    STATUS_OK: "ok",
    STATUS_NO_RATE: "none",
    STATUS_FAILURE: "fail",
    STATUS_CV_SECURE: "cv_secure",
}

_DV_NAMES = {"bb84": BB84, "sixstate": SIX_STATE}
_CV_NAMES = ("squeezed", "gg02")


class CliError(Exception):
    """An argument or config problem; reported on stderr with exit code 1."""


def _parse_float(name: str):
    def parse(text: str) -> float:
        try:
            return float(text)
        except ValueError:
            raise CliError(f"{name}: expected a number, got {text!r}") from None
    return parse


def _parse_int(name: str):
    def parse(text: str) -> int:
        try:
            return int(text)
        except ValueError:
            raise CliError(f"{name}: expected an integer, got {text!r}") from None
    return parse


def _parse_axis(name: str):
    """A single value or a log-spaced START:STOP:POINTS grid."""
    def parse(text: str) -> tuple[float, ...]:
        parts = text.split(":")
        try:
            if len(parts) == 1:
                return (float(parts[0]),)
            if len(parts) == 3:
                return analysis.log_grid(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as err:
            raise CliError(f"{name}: {err}") from None
        raise CliError(f"{name}: expected VALUE or START:STOP:POINTS, got {text!r}")
    return parse


def _parse_choice(name: str, options: tuple[str, ...]):
    def parse(text: str) -> str:
        if text not in options:
            raise CliError(f"{name}: expected one of {'|'.join(options)}, got {text!r}")
        return text
    return parse


def _parse_bool(name: str):
    def parse(text: str) -> bool:
        lowered = text.strip().lower()
        if lowered in ("true", "1", "yes", "on"):
            return True
        if lowered in ("false", "0", "no", "off"):
            return False
        raise CliError(f"{name}: expected true/false, got {text!r}")
    return parse


def _parse_str(name: str):
    return lambda text: text


@dataclass(frozen=True)
class Param:
    """One resolvable parameter: long flag name (also the config key) and parser."""

    name: str
    parse: Callable[[str], object]
    default: object
    help: str
    flag: bool = False


def _param_float(name, default, help):
    return Param(name, _parse_float(name), default, help)


def _param_axis(name, default, help):
    return Param(name, _parse_axis(name), default, help)


def _param_choice(name, options, default, help):
    return Param(name, _parse_choice(name, options), default, help)


def _param_flag(name, help):
    return Param(name, _parse_bool(name), False, help, flag=True)


_PROTOCOL = _param_choice(
    "protocol", ("bb84", "sixstate", "squeezed", "gg02"), "sixstate", "protocol to evaluate"
)
_DV_PROTOCOL = _param_choice("protocol", ("bb84", "sixstate"), "sixstate", "DV protocol")
_NOISE = _param_choice("noise", ("thermal", "poisson"), "thermal", "noise photon statistics")
_DETECTOR = _param_choice("detector", ("binary", "pnr"), "binary", "receiver detector model")
_PREPROCESS = _param_flag("preprocess", "randomize the raw key (DV bit flips / CV trusted noise)")
_SOURCE_P = _param_float("source-p", 1.0, "probability of a non-empty signal pulse")
_DARK_D = _param_float("dark-d", 0.0, "dark-count probability per detector and window")
_ETA = _param_float("eta", 1.0, "per-photon detection efficiency")
_VS = Param("vs", _parse_float("vs"), None, "CV signal (squeezed) quadrature variance, SNU")
_VM = Param("vm", _parse_float("vm"), None, "CV modulation variance, SNU")
_TRUSTED = _param_choice("trusted-noise", ("0", "opt"), "0", "trusted detection noise: off or optimized")
_OUT = Param("out", _parse_str("out"), None, "output CSV path (default: standard output)")
_PLOT = Param("plot", _parse_str("plot"), None, "render the matching figure to this file")
_SEED = Param("seed", _parse_int("seed"), 0, "Monte Carlo seed (u64)")
_TRIALS = Param("trials", _parse_int("trials"), 100_000, "Monte Carlo trials")


@dataclass(frozen=True)
class Subcommand:
    name: str
    help: str
    params: tuple[Param, ...]
    handler: Callable


def _load_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as err:
        raise CliError(f"cannot read config file: {err}") from None
    for line_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise CliError(f"{path}:{line_no}: expected 'key = value', got {line!r}")
        values[key.strip()] = value.strip()
    return values


def _resolve(ns: argparse.Namespace, config: dict[str, str], params: tuple[Param, ...]) -> dict:
    """Merge flags over config values over defaults; unknown config keys are errors."""
    known = {p.name for p in params}
    unknown = sorted(set(config) - known)
    if unknown:
        raise CliError(f"unknown config keys: {', '.join(unknown)}")
    resolved = {}
    for p in params:
        from_cli = getattr(ns, p.name.replace("-", "_"))
        if from_cli is not None:
            resolved[p.name] = from_cli if p.flag else p.parse(from_cli)
        elif p.name in config:
            resolved[p.name] = p.parse(config[p.name])
        else:
            resolved[p.name] = p.default
    return resolved


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    return str(value)


def _fmt_param(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, tuple):
        if len(value) == 1:
            return _fmt(value[0])
        return f"{_fmt(value[0])}:{_fmt(value[-1])}:{len(value)}"
    return _fmt(value)


def _write_csv(stream, command: str, params: dict, columns: tuple[str, ...], rows) -> None:
    stream.write(f"# qkdnoise {__version__}\n")
    stream.write(f"# command = {command}\n")
    for key in sorted(params):
        if key in ("out", "plot"):
            continue
        stream.write(f"# {key} = {_fmt_param(params[key])}\n")
    stream.write(",".join(columns) + "\n")
    for row in rows:
        stream.write(",".join(_fmt(v) for v in row) + "\n")


def _token(status: str) -> str:
    return _STATUS_TOKEN[status]


def _squeezed_variances(vs: float | None, vm: float | None) -> tuple[float, float]:
    """Fill in the squeezed-protocol constraint v_s*(v_s + v_m) = 1."""
    if vs is None and vm is None:
        total = analysis.INFINITE_SQUEEZING_V
        return 1.0 / total, total - 1.0 / total
    if vs is None:
        return 0.5 * (math.sqrt(vm * vm + 4.0) - vm), vm
    if vm is None:
        if not 0.0 < vs <= 1.0:
            raise CliError(f"squeezed protocol needs 0 < vs <= 1, got {vs}")
        return vs, 1.0 / vs - vs
    return vs, vm


def _dv_setup_from(params: dict) -> DvSetup:
    name = params["protocol"]
    if name not in _DV_NAMES:
        raise CliError(f"this subcommand needs a DV protocol (bb84|sixstate), got {name!r}")
    return analysis.dv_template(
        _DV_NAMES[name],
        noise_family=params["noise"],
        preprocessing=bool(params.get("preprocess")),
        detector=params.get("detector", "binary"),
        source_p=params.get("source-p", 1.0),
        dark_count_d=params.get("dark-d", 0.0),
        efficiency_eta=params.get("eta", 1.0),
    )


def _cv_setup_from(params: dict, name: str) -> tuple[CvSetup, dict]:
    optimize = params.get("trusted-noise", "0") == "opt" or bool(params.get("preprocess"))
    channel = ChannelModel(0.5, NoiseSource(params["noise"], 0.0))
    if name == "squeezed":
        v_s, v_m = _squeezed_variances(params.get("vs"), params.get("vm"))
        setup = CvSetup(SQUEEZED, v_s, v_m, channel, optimize_v_t=optimize)
    else:
        v_m = params.get("vm")
        if v_m is None:
            v_m = analysis.DEFAULT_MODULATION
        setup = CvSetup.gg02_protocol(v_m, channel, optimize_v_t=optimize)
    return setup, dict(params, vs=setup.v_s, vm=setup.v_m)


def _protocol_template(params: dict):
    name = params["protocol"]
    if name in _DV_NAMES:
        return _dv_setup_from(params), params
    return _cv_setup_from(params, name)


def _cmd_threshold(params: dict, stream) -> int:
    template, params = _protocol_template(params)
    result = analysis.mu_max_curve(template, params["t"])
    rows = [(params["protocol"], t, v, _token(s)) for (t, v, s) in result.rows]
    _write_csv(stream, "threshold", params, ("protocol", "t", "mu_max", "status"), rows)
    if params["plot"]:
        plotting.save_threshold_figure(result, params["plot"])
    return 0


def _cmd_ratio(params: dict, stream) -> int:
    dv = _dv_setup_from(params)
    cv, params = _cv_setup_from(params, params["cv"])
    result = analysis.ratio_curve(cv, dv, params["t"])
    rows = [(t, a, b, r, _token(s)) for (t, a, b, r, s) in result.rows]
    _write_csv(
        stream, "ratio", params,
        ("t", "mu_max_cv", "mu_max_dv", "ratio", "status"), rows,
    )
    if params["plot"]:
        plotting.save_ratio_figure(result, params["plot"])
    return 0


def _cmd_keyrate(params: dict, stream) -> int:
    template, params = _protocol_template(params)
    rows = []
    figures = {}
    for mu in params["mu"]:
        swept = analysis.with_channel(template, None, mu)
        result = analysis.key_rate_curve(swept, params["t"])
        figures[f"mu={_fmt(mu)}"] = result
        rows.extend(
            (params["protocol"], mu, t, k, _token(s)) for (t, k, s) in result.rows
        )
    _write_csv(stream, "keyrate", params, ("protocol", "mu", "t", "key_rate", "status"), rows)
    if params["plot"]:
        plotting.save_key_rate_figure(figures, params["plot"])
    return 0


def _cmd_minp(params: dict, stream) -> int:
    dv = _dv_setup_from(params)
    mu = params["mu"][0]
    rows = []
    points = []
    for t in params["t"]:
        p = analysis.min_source_p(dv, t, mu)
        if p is None:
            rows.append((params["protocol"], t, mu, math.nan, _token(STATUS_NO_RATE)))
            points.append((t, math.nan, STATUS_NO_RATE))
        else:
            rows.append((params["protocol"], t, mu, p, _token(STATUS_OK)))
            points.append((t, p, STATUS_OK))
    _write_csv(stream, "minp", params, ("protocol", "t", "mu", "min_p", "status"), rows)
    if params["plot"]:
        plotting.save_min_p_figure(
            analysis.CurveResult(("t", "min_p", "status"), tuple(points)), params["plot"]
        )
    return 0


def _cmd_minsqueeze(params: dict, stream) -> int:
    template = analysis.generalized_template(
        modulation=params["vm"] if params["vm"] is not None else analysis.DEFAULT_MODULATION,
        noise_family=params["noise"],
        optimize_v_t=params["trusted-noise"] == "opt",
    )
    params = dict(params, vm=template.v_m)
    mu = params["mu"][0]
    rows = []
    points = []
    for t in params["t"]:
        v_s = analysis.min_squeezing(template, t, mu)
        if v_s is None:
            rows.append((t, mu, template.v_m, math.nan, _token(STATUS_NO_RATE)))
            points.append((t, math.nan, STATUS_NO_RATE))
        else:
            rows.append((t, mu, template.v_m, v_s, _token(STATUS_OK)))
            points.append((t, v_s, STATUS_OK))
    _write_csv(stream, "minsqueeze", params, ("t", "mu", "vm", "min_vs", "status"), rows)
    if params["plot"]:
        plotting.save_min_squeezing_figure(
            analysis.CurveResult(("t", "min_vs", "status"), tuple(points)), params["plot"]
        )
    return 0


def _cmd_region(params: dict, stream) -> int:
    dv = _dv_setup_from(params)
    result = analysis.region_map(dv, params["t"], params["mu"])
    rows = [(params["protocol"], t, m, p, _token(s)) for (t, m, p, s) in result.rows]
    _write_csv(stream, "region", params, ("protocol", "t", "mu", "min_p", "status"), rows)
    if params["plot"]:
        plotting.save_region_figure(result, params["plot"])
    return 0


def _cmd_darkcount(params: dict, stream) -> int:
    dv = _dv_setup_from(params)
    rows = []
    points = []
    for value in params["d-over-eta"]:
        t_th = analysis.dark_count_threshold(dv, value)
        bound = analysis.dark_count_bound(dv.protocol, value)
        rows.append((params["protocol"], value, t_th, bound, _token(STATUS_OK)))
        points.append((value, t_th, bound, STATUS_OK))
    _write_csv(
        stream, "darkcount", params,
        ("protocol", "d_over_eta", "t_th", "bound", "status"), rows,
    )
    if params["plot"]:
        plotting.save_dark_count_figure(
            analysis.CurveResult(("d_over_eta", "t_th", "bound", "status"), tuple(points)),
            params["plot"],
        )
    return 0


def _cmd_simulate(params: dict, stream) -> int:
    if not 0 <= params["seed"] < 2**64:
        raise CliError(f"seed must be a u64, got {params['seed']}")
    if params["trials"] < 1:
        raise CliError(f"trials must be positive, got {params['trials']}")
    dv = _dv_setup_from(params)
    t = params["t"][0]
    mu = params["mu"][0]
    setup = analysis.with_channel(dv, t, mu)
    sim = simulate_dv(setup, params["trials"], params["seed"])
    exact = observables(setup)
    row = (
        params["protocol"], params["detector"], t, mu, params["trials"], params["seed"],
        sim.p_exp, sim.p_exp_se, sim.qber, sim.qber_se, exact.p_exp, exact.qber,
    )
    _write_csv(
        stream, "simulate", params,
        (
            "protocol", "detector", "t", "mu", "trials", "seed",
            "p_exp_mc", "p_exp_se", "qber_mc", "qber_se", "p_exp_exact", "qber_exact",
        ),
        [row],
    )
    return 0


_VALIDATE_T = (1e-3, 1e-4, 1e-5)


def _cmd_validate(params: dict, stream) -> int:
    """Asymptotic-agreement suite: exact thresholds against their small-T laws."""
    rows = []
    failures = 0

    def check(name, t, value, reference, rel_err, ok):
        nonlocal failures
        failures += 0 if ok else 1
        rows.append((name, t, value, reference, rel_err, "ok" if ok else "fail"))

    for protocol, label, target in ((BB84, "bb84_qber_threshold", 0.110),
                                    (SIX_STATE, "sixstate_qber_threshold", 0.126)):
        value = qber_threshold(protocol)
        check(label, math.nan, value, target, abs(value - target), abs(value - target) <= 1e-3)

    dv = analysis.dv_template(SIX_STATE)
    q_th = qber_threshold(SIX_STATE)
    dv_rel = []
    for t in _VALIDATE_T:
        exact = analysis.mu_max(dv, t).value
        approx = asymptotic_mu_max_dv(t, q_th)
        rel = abs(exact - approx) / approx
        dv_rel.append(rel)
        check("sixstate_asymptotic", t, exact, approx, rel, rel <= 0.05)
    check("sixstate_error_decreasing", math.nan, math.nan, math.nan, math.nan,
          all(a >= b for a, b in zip(dv_rel, dv_rel[1:])))

    cv = analysis.infinite_squeezing_template()
    for t in _VALIDATE_T:
        exact = analysis.mu_max(cv, t).value
        approx = asymptotic_mu_max_cv(t)
        rel = abs(exact - approx) / approx
        check("squeezed_asymptotic", t, exact, approx, rel, rel <= 0.05)
    # the squeezing proxy must already sit in the V -> inf plateau
    proxy = analysis.mu_max(cv, 1e-3).value
    doubled_setup = CvSetup.squeezed(2.0 * analysis.INFINITE_SQUEEZING_V, cv.channel)
    doubled = analysis.mu_max(doubled_setup, 1e-3).value
    drift = abs(doubled - proxy) / proxy
    check("squeezing_proxy_converged", 1e-3, proxy, doubled, drift, drift <= 1e-3)

    _write_csv(
        stream, "validate", params,
        ("check", "t", "value", "reference", "rel_err", "status"), rows,
    )
    return 0 if failures == 0 else 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on bad usage; the CSV contract reserves 2 for solvers."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


_AXIS_T = _param_axis("t", (1e-4,), "transmittance: VALUE or START:STOP:POINTS (log-spaced)")
_AXIS_T_SWEEP = _param_axis(
    "t", analysis.log_grid(1e-4, 0.95, 61),
    "transmittance: VALUE or START:STOP:POINTS (log-spaced)",
)
_AXIS_MU = _param_axis("mu", (0.0,), "mean noise photons per pulse: VALUE or grid")

_SUBCOMMANDS = (
    Subcommand(
        "threshold", "maximum tolerable noise vs transmittance",
        (_PROTOCOL, _AXIS_T_SWEEP, _NOISE, _PREPROCESS, _DETECTOR, _SOURCE_P, _DARK_D,
         _ETA, _VS, _VM, _TRUSTED, _OUT, _PLOT),
        _cmd_threshold,
    ),
    Subcommand(
        "ratio", "CV/DV tolerable-noise ratio vs transmittance",
        (_DV_PROTOCOL, _param_choice("cv", _CV_NAMES, "squeezed", "CV protocol for the numerator"),
         _AXIS_T_SWEEP, _NOISE, _PREPROCESS, _DETECTOR, _SOURCE_P, _DARK_D, _ETA,
         _VS, _VM, _TRUSTED, _OUT, _PLOT),
        _cmd_ratio,
    ),
    Subcommand(
        "keyrate", "secure key rate vs transmittance",
        (_PROTOCOL, _AXIS_T_SWEEP, _AXIS_MU, _NOISE, _PREPROCESS, _DETECTOR, _SOURCE_P,
         _DARK_D, _ETA, _VS, _VM, _TRUSTED, _OUT, _PLOT),
        _cmd_keyrate,
    ),
    Subcommand(
        "minp", "minimum source quality vs transmittance",
        (_DV_PROTOCOL, _AXIS_T_SWEEP, _param_axis("mu", (1e-4,), "noise level"),
         _NOISE, _PREPROCESS, _DETECTOR, _DARK_D, _ETA, _OUT, _PLOT),
        _cmd_minp,
    ),
    Subcommand(
        "minsqueeze", "required squeezing vs transmittance",
        (_AXIS_T_SWEEP, _param_axis("mu", (1e-4,), "noise level"), _NOISE, _VM,
         _TRUSTED, _OUT, _PLOT),
        _cmd_minsqueeze,
    ),
    Subcommand(
        "region", "source-quality requirement over a (T, mu) grid",
        (_DV_PROTOCOL, _param_axis("t", analysis.log_grid(1e-4, 0.5, 13), "transmittance grid"),
         _param_axis("mu", analysis.log_grid(1e-5, 1e-1, 9), "noise grid"),
         _NOISE, _PREPROCESS, _DETECTOR, _DARK_D, _ETA, _OUT, _PLOT),
        _cmd_region,
    ),
    Subcommand(
        "darkcount", "dark-count transmittance thresholds vs d/eta",
        (_DV_PROTOCOL, _param_axis("d-over-eta", analysis.log_grid(1e-7, 1e-4, 4), "d/eta values"),
         _NOISE, _PREPROCESS, _DETECTOR, _OUT, _PLOT),
        _cmd_darkcount,
    ),
    Subcommand(
        "simulate", "Monte Carlo check of the DV observables",
        (_DV_PROTOCOL, _param_axis("t", (0.5,), "transmittance (single value)"),
         _param_axis("mu", (0.2,), "noise level (single value)"), _NOISE, _DETECTOR,
         _SOURCE_P, _DARK_D, _ETA, _TRIALS, _SEED, _OUT),
        _cmd_simulate,
    ),
    Subcommand(
        "validate", "asymptotic-agreement suite (pass/fail per check)",
        (_OUT,),
        _cmd_validate,
    ),
)


def _build_parser() -> tuple[_Parser, dict[str, Subcommand]]:
    parser = _Parser(prog="qkdnoise", description=__doc__)
    parser.add_argument("--version", action="version", version=f"qkdnoise {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    table = {}
    for spec in _SUBCOMMANDS:
        sub = subparsers.add_parser(spec.name, help=spec.help)
        for p in spec.params:
            if p.flag:
                sub.add_argument(f"--{p.name}", action="store_true", default=None, help=p.help)
            else:
                sub.add_argument(f"--{p.name}", default=None, metavar="V", help=p.help)
        sub.add_argument("--config", default=None, metavar="PATH",
                         help="flat key=value file; flags override it")
        table[spec.name] = spec
    return parser, table


def run(argv=None) -> int:
    parser, table = _build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    spec = table[ns.command]
    try:
        config = _load_config_file(ns.config) if ns.config else {}
        params = _resolve(ns, config, spec.params)
        out = params.get("out")
        if out:
            with open(out, "w", encoding="utf-8", newline="\n") as stream:
                return spec.handler(params, stream)
        return spec.handler(params, sys.stdout)
    except CliError as err:
        print(f"qkdnoise: error: {err}", file=sys.stderr)
        return 1
    except (NoSignChangeError, ConvergenceError, UnphysicalStateError,
            DegenerateMeasurementError) as err:
        print(f"qkdnoise: solver failure: {err}", file=sys.stderr)
        return 2
    except ValueError as err:
        print(f"qkdnoise: error: {err}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))
