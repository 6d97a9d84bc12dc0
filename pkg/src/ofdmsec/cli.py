"""Command-line experiment runner.

Exposes the Monte Carlo engine as reproducible experiments: four figure
presets (``fig1`` .. ``fig4``), the generic ``sweep`` and ``optimize``
operations, and a structural ``validate`` suite. Every run writes a CSV (one
record per scheme / N_e / fraction point / decoder), a line-oriented log of
the fully resolved configuration, and, on request, an SVG line chart rendered
from the CSV after it is written — never from in-memory state — so headless
runs produce identical artifacts.

Settings come from built-in defaults, then an optional config file, then
command-line flags, in that order of increasing precedence. The config file
is flat ``key = value`` text in three sections mirroring the library types::

    [system]
    n_subchannels = 64
    total_power = 64000

    [plan]
    trials = 2000
    seed = 7

    [output]
    dir = results

SNR convention: the power budget is expressed in linear units; the default
``total_power = N * 10**3`` with unit noise power is an average SNR of 30 dB
per sub-channel (SNR = total_power / (N * noise_power)).

Exit codes: 0 success, 1 configuration error, 2 numerical failure (the
message names the failing trial index and seed for replay), 3 validation
failure.
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from dataclasses import fields as dataclass_fields
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .channel import CHANNEL_LANE, sample_realization, substream
from .montecarlo import (
    DECODERS,
    MonteCarloPlan,
    _make_row,
    _run_cells,
    grid_fractions,
    grid_search,
    sweep_ne,
)
from .ofdm import SystemConfig, build_structure
from .power import METHODS, PowerFractions, water_fill
from .precoder import compute_precoder

CSV_HEADER = "scheme,n_encrypted,eve_decoder,theta1,theta2,theta3,avg_secrecy,std_error,n_trials"
VALIDATE_HEADER = "check,worst,threshold,status"

#: N_e grid shared by the figure presets (fig4 overrides it).
_DEFAULT_NE_LIST = (0, 8, 16, 24, 32, 40, 48, 56, 64)


class ConfigError(Exception):
    """Bad configuration: unparseable file, unknown key, invalid value."""


# --------------------------------------------------------------------------
# Settings: defaults -> preset defaults -> config file -> flags
# --------------------------------------------------------------------------

def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_int_list(raw: str):
    items = [part.strip() for part in raw.split(",") if part.strip()]
    if not items:
        raise ValueError("expected a comma-separated list of integers")
    values = tuple(int(part) for part in items)
    if any(v < 0 for v in values):
        raise ValueError("N_e values must be non-negative")
    return values


def _parse_choice(options):
    def convert(raw: str) -> str:
        if raw not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {raw!r}")
        return raw
    return convert


def _parse_fractions(raw: str):
    """'optimized' or 'theta1,theta2,theta3' -> policy value."""
    if raw.strip().lower() == "optimized":
        return "optimized"
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 3:
        raise ValueError(
            "expected 'optimized' or three comma-separated fractions")
    t1, t2, t3 = (float(p) for p in parts)
    if abs(t1 + t2 + t3 - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {t1 + t2 + t3}, expected 1")
    if min(t1, t2, t3) < 0 or max(t1, t2) > 1:
        raise ValueError("fractions must lie in [0, 1]")
    return PowerFractions.with_remainder(t1, t2)


_SYSTEM_SCHEMA = {
    "n_subchannels": int,
    "n_cp": int,
    "delay_spread_bob": int,
    "delay_spread_eve": int,
    "tap_variance_bob": float,
    "tap_variance_eve": float,
    "noise_power_bob": float,
    "noise_power_eve": float,
    "total_power": float,
}

_PLAN_SCHEMA = {
    "trials": int,
    "grid": int,
    "seed": int,
    "ne": int,
    "ne_list": _parse_int_list,
    "method": _parse_choice(METHODS),
    "decoder": _parse_choice(DECODERS + ("both",)),
    "fractions": _parse_fractions,
    "equal_power": _parse_bool,
    "jobs": int,
}

_OUTPUT_SCHEMA = {"dir": str, "stem": str, "plot": _parse_bool}

_SCHEMAS = {"system": _SYSTEM_SCHEMA, "plan": _PLAN_SCHEMA, "output": _OUTPUT_SCHEMA}

#: Figure presets tune these defaults; config file and flags still win.
_PRESET_DEFAULTS = {
    "fig2": {"plan": {"fractions": PowerFractions(0.375, 0.375, 0.25),
                      "equal_power": True}},
    "fig3": {"plan": {"fractions": PowerFractions(0.35, 0.35, 0.30)}},
    "fig4": {"plan": {"fractions": PowerFractions(0.35, 0.35, 0.30),
                      "ne_list": (8, 16, 32, 48)}},
    "validate": {"plan": {"trials": 100}},
}

_SECTION_RE = re.compile(r"^\[([^\]]+)\]$")


def _default_settings():
    system = {f.name: f.default for f in dataclass_fields(SystemConfig)}
    plan = {
        "trials": 2000,
        "grid": 21,
        "seed": 7,
        "ne": 0,
        "ne_list": _DEFAULT_NE_LIST,
        "method": "highest",
        "decoder": "joint",
        "fractions": "optimized",
        "equal_power": False,
        "jobs": 1,
    }
    output = {"dir": ".", "stem": None, "plot": False}
    return {"system": system, "plan": plan, "output": output}


def _load_config_file(path: str):
    """Parse the flat key-value config file into converted settings.

    Unknown sections/keys, duplicates, and unconvertible values are reported
    with their line number.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config file ({exc})") from exc

    loaded: dict = {"system": {}, "plan": {}, "output": {}}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith(("#", ";")):
            continue
        match = _SECTION_RE.match(line)
        if match:
            name = match.group(1).strip()
            if name not in _SCHEMAS:
                raise ConfigError(
                    f"{path}:{lineno}: unknown section [{name}] "
                    "(expected [system], [plan], or [output])")
            section = name
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path}:{lineno}: expected 'key = value', got {line!r}")
        if section is None:
            raise ConfigError(
                f"{path}:{lineno}: key appears before any [section] header")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        schema = _SCHEMAS[section]
        if key not in schema:
            raise ConfigError(
                f"{path}:{lineno}: unknown key {key!r} in [{section}]")
        if key in loaded[section]:
            raise ConfigError(
                f"{path}:{lineno}: duplicate key {key!r} in [{section}]")
        try:
            loaded[section][key] = schema[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: invalid value for {key!r}: {exc}") from exc
    return loaded


def _resolve_settings(args):
    """Merge defaults, preset defaults, the config file, and flags."""
    settings = _default_settings()
    for section, values in _PRESET_DEFAULTS.get(args.subcommand, {}).items():
        settings[section].update(values)
    if args.config is not None:
        loaded = _load_config_file(args.config)
        for section, values in loaded.items():
            settings[section].update(values)
    for section, schema in _SCHEMAS.items():
        for key, convert in schema.items():
            flag_value = getattr(args, key, None)
            if flag_value is None:
                continue
            if isinstance(flag_value, str) and convert is not str:
                try:
                    flag_value = convert(flag_value)
                except ValueError as exc:
                    raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from exc
            settings[section][key] = flag_value
    if settings["output"]["stem"] is None:
        settings["output"]["stem"] = args.subcommand
    return settings


def _system_config(settings) -> SystemConfig:
    try:
        return SystemConfig(**settings["system"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _base_plan(settings) -> MonteCarloPlan:
    plan = settings["plan"]
    decoder = plan["decoder"]
    try:
        return MonteCarloPlan(
            n_trials=plan["trials"],
            grid_points=plan["grid"],
            seed=plan["seed"],
            n_encrypted=plan["ne"],
            method=plan["method"],
            eve_decoder="joint" if decoder == "both" else decoder,
            equal_power=plan["equal_power"],
            n_jobs=plan["jobs"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _decoder_list(settings):
    decoder = settings["plan"]["decoder"]
    return list(DECODERS) if decoder == "both" else [decoder]


def _fixed_fractions(settings, subcommand) -> PowerFractions:
    policy = settings["plan"]["fractions"]
    if not isinstance(policy, PowerFractions):
        raise ConfigError(
            f"{subcommand} needs fixed fractions 'theta1,theta2,theta3', "
            "got 'optimized'")
    return policy


# --------------------------------------------------------------------------
# Artifact writers
# --------------------------------------------------------------------------

def _fmt(value: float) -> str:
    return f"{value:.10g}"


def _csv_line(scheme: str, row) -> str:
    return ",".join([
        scheme,
        str(row.n_encrypted),
        row.eve_decoder,
        _fmt(row.theta1),
        _fmt(row.theta2),
        _fmt(row.theta3),
        _fmt(row.avg_secrecy),
        _fmt(row.std_error),
        str(row.n_trials),
    ])


def _write_lines(path: Path, header: str, lines):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header + "\n")
        for line in lines:
            fh.write(line + "\n")


def _settings_repr(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, PowerFractions):
        return ",".join(_fmt(t) for t in (value.theta1, value.theta2, value.theta3))
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return _fmt(value)
    return str(value)


def _write_log(path: Path, subcommand: str, settings, artifacts):
    lines = [f"ofdmsec {__version__}", f"subcommand = {subcommand}"]
    for section in ("system", "plan", "output"):
        lines.append(f"[{section}]")
        for key in _SCHEMAS[section]:
            lines.append(f"{key} = {_settings_repr(settings[section][key])}")
    lines.append("[artifacts]")
    lines.extend(f"{kind} = {name}" for kind, name in artifacts)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def _render_plot(csv_path: Path, svg_path: Path) -> bool:
    """Draw a line chart from an experiment CSV. Returns False when the CSV
    has no plottable schema (e.g. the validate report)."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(csv_path, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "avg_secrecy" not in rows[0]:
        return False

    groups: dict = {}
    for row in rows:
        groups.setdefault((row["scheme"], row["eve_decoder"]), []).append(row)

    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for (scheme, decoder), grp in sorted(groups.items()):
        label_base = scheme if len({k[1] for k in groups}) == 1 \
            else f"{scheme} ({decoder})"
        ne_vals = [int(r["n_encrypted"]) for r in grp]
        if len(set(ne_vals)) == len(grp) and len(grp) > 1:
            xs, ys, errs = zip(*sorted(
                (ne, float(r["avg_secrecy"]), float(r["std_error"]))
                for ne, r in zip(ne_vals, grp)))
            ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=2,
                        label=label_base)
            ax.set_xlabel("encrypted sub-channels $N_e$")
        else:
            by_ne: dict = {}
            for r in grp:
                by_ne.setdefault(int(r["n_encrypted"]), []).append(r)
            for ne, sub in sorted(by_ne.items()):
                best: dict = {}
                for r in sub:
                    t1 = float(r["theta1"])
                    if t1 not in best or float(r["avg_secrecy"]) > float(best[t1]["avg_secrecy"]):
                        best[t1] = r
                xs = sorted(best)
                ys = [float(best[x]["avg_secrecy"]) for x in xs]
                errs = [float(best[x]["std_error"]) for x in xs]
                label = f"{label_base} $N_e$={ne}" if len(by_ne) > 1 else label_base
                ax.errorbar(xs, ys, yerr=errs, marker="o", capsize=2, label=label)
            ax.set_xlabel(r"$\theta_1$")
    ax.set_ylabel("average secrecy rate [bits/sec/Hz]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    return True


# --------------------------------------------------------------------------
# Experiment presets
# --------------------------------------------------------------------------

def _best_by_ne(report):
    return {row.n_encrypted: row for row in report.best}


def _cmd_fig1(config, settings, plan):
    """N_e sweep with grid-optimized fractions under both Eve decoders."""
    ne_list = settings["plan"]["ne_list"]
    lines = []
    for decoder in DECODERS:
        report = sweep_ne(config, replace(plan, eve_decoder=decoder), ne_list)
        lines.extend(_csv_line("hybrid_opt", row) for row in report.best)
    return lines, []


def _cmd_fig2(config, settings, plan):
    """Equal-data-power N_e sweep for the three encryption-selection methods."""
    ne_list = settings["plan"]["ne_list"]
    fractions = _fixed_fractions(settings, "fig2")
    lines = []
    for decoder in _decoder_list(settings):
        for method in METHODS:
            report = sweep_ne(
                config,
                replace(plan, method=method, eve_decoder=decoder, equal_power=True),
                ne_list, fractions)
            lines.extend(_csv_line(method, row) for row in report.best)
    return lines, []


def _cmd_fig3(config, settings, plan):
    """Scheme comparison: AN-only, key-only, fixed hybrid, optimized hybrid."""
    ne_list = settings["plan"]["ne_list"]
    fractions = _fixed_fractions(settings, "fig3")
    tensor = sweep_ne(config, plan, ne_list)
    fixed = sweep_ne(config, plan, ne_list, fractions)

    points = grid_fractions(plan.grid_points)
    n_points = len(points)
    rows_by_ne = {ne: tensor.rows[i * n_points:(i + 1) * n_points]
                  for i, ne in enumerate(ne_list)}

    if 0 in rows_by_ne:
        an_best = max(rows_by_ne[0], key=lambda r: r.avg_secrecy)
    else:
        an_best = sweep_ne(config, plan, [0]).best[0]

    lines = []
    # AN-only ignores N_e entirely; repeat its optimum across the sweep axis.
    lines.extend(_csv_line("tan_only", replace(an_best, n_encrypted=ne))
                 for ne in ne_list)
    for ne in ne_list:
        no_an = [r for r in rows_by_ne[ne] if r.theta3 <= 1e-12]
        lines.append(_csv_line("sk_only", max(no_an, key=lambda r: r.avg_secrecy)))
    lines.extend(_csv_line("hybrid_fixed", row) for row in fixed.best)
    lines.extend(_csv_line("hybrid_opt", row) for row in tensor.best)
    return lines, []


def _cmd_fig4(config, settings, plan):
    """theta1 sweep at a fixed AN fraction for several N_e values."""
    ne_list = settings["plan"]["ne_list"]
    theta3 = _fixed_fractions(settings, "fig4").theta3
    step = 1.0 / (plan.grid_points - 1)
    n_steps = int(round((1.0 - theta3) / step))
    if abs(n_steps * step - (1.0 - theta3)) > 1e-9:
        raise ConfigError(
            f"theta3={_fmt(theta3)} is not representable on the "
            f"{plan.grid_points}-point grid (step {_fmt(step)})")
    cells = [(ne, i * step, (n_steps - i) * step, theta3, plan.method,
              plan.equal_power)
             for ne in ne_list for i in range(n_steps + 1)]
    acc = _run_cells(config, plan.seed, plan.n_trials, cells, plan.n_jobs,
                     with_joint=plan.eve_decoder == "joint")
    lines = [_csv_line("theta1_sweep",
                       _make_row(acc[i], plan.n_trials, config, cells[i],
                                 plan.eve_decoder))
             for i in range(len(cells))]
    return lines, []


def _cmd_sweep(config, settings, plan):
    """Generic N_e sweep under a fixed or grid-optimized fraction policy."""
    ne_list = settings["plan"]["ne_list"]
    policy = settings["plan"]["fractions"]
    fractions = None if policy == "optimized" else policy
    scheme = "optimized" if fractions is None else "fixed"
    lines = []
    for decoder in _decoder_list(settings):
        report = sweep_ne(config, replace(plan, eve_decoder=decoder),
                          ne_list, fractions)
        lines.extend(_csv_line(scheme, row) for row in report.best)
    return lines, []


def _cmd_optimize(config, settings, plan):
    """Full fraction-grid search at a single N_e; prints the argmax."""
    report = grid_search(config, plan)
    lines = [_csv_line("grid", row) for row in report.rows]
    best = report.best[0]
    stdout = [
        "optimal fractions: "
        f"theta1={_fmt(best.theta1)} theta2={_fmt(best.theta2)} "
        f"theta3={_fmt(best.theta3)}",
        f"avg_secrecy={_fmt(best.avg_secrecy)} "
        f"std_error={_fmt(best.std_error)} n_encrypted={best.n_encrypted}",
    ]
    return lines, stdout


_COMMANDS = {
    "fig1": _cmd_fig1,
    "fig2": _cmd_fig2,
    "fig3": _cmd_fig3,
    "fig4": _cmd_fig4,
    "sweep": _cmd_sweep,
    "optimize": _cmd_optimize,
}


# --------------------------------------------------------------------------
# Structural validation suite
# --------------------------------------------------------------------------

def _run_validate(config, settings):
    """Check the structural invariants on random realizations.

    Returns (csv_lines, stdout_lines, all_passed).
    """
    n_trials = settings["plan"]["trials"]
    seed = settings["plan"]["seed"]
    structure = build_structure(config.n_subchannels, config.n_cp)
    n = config.n_subchannels

    identity_exact = bool(np.array_equal(
        structure.cp_remove @ structure.cp_insert, np.eye(n)))

    worst = {"frequency_diagonalization": 0.0, "an_null_residual": 0.0,
             "precoder_orthonormality": 0.0, "bob_an_invariance": 0.0,
             "waterfill_kkt": 0.0}
    pz = config.total_power / config.n_cp if config.n_cp else 0.0

    for trial in range(n_trials):
        rng = substream(seed, trial, CHANNEL_LANE)
        realization = sample_realization(config, structure, rng)
        precoder = compute_precoder(structure, realization.h_time)
        q = precoder.q

        for h_time in (realization.h_time, realization.g_time):
            sandwich = structure.dft @ structure.cp_remove @ h_time \
                @ structure.cp_insert @ structure.dft.conj().T
            diag_scale = float(np.max(np.abs(np.diag(sandwich))))
            off = sandwich - np.diag(np.diag(sandwich))
            worst["frequency_diagonalization"] = max(
                worst["frequency_diagonalization"],
                float(np.max(np.abs(off))) / diag_scale)

        h_norm = float(np.linalg.norm(realization.h_time))
        residual = structure.cp_remove @ realization.h_time @ q
        worst["an_null_residual"] = max(
            worst["an_null_residual"], float(np.linalg.norm(residual)) / h_norm)

        gram = q.conj().T @ q - np.eye(q.shape[1])
        worst["precoder_orthonormality"] = max(
            worst["precoder_orthonormality"], float(np.linalg.norm(gram)))

        scale = np.sqrt(config.total_power / n)
        symbols = scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)) \
            / np.sqrt(2.0)
        x = structure.cp_insert @ (structure.dft.conj().T @ symbols)
        noise = np.sqrt(pz / 2.0) * (rng.standard_normal(q.shape[1])
                                     + 1j * rng.standard_normal(q.shape[1]))
        y_clean = structure.dft @ (structure.cp_remove @ (realization.h_time @ x))
        y_noisy = structure.dft @ (structure.cp_remove
                                   @ (realization.h_time @ (x + q @ noise)))
        worst["bob_an_invariance"] = max(
            worst["bob_an_invariance"],
            float(np.linalg.norm(y_noisy - y_clean))
            / float(np.linalg.norm(y_clean)))

        gains = np.abs(realization.h_freq) ** 2
        budget = 0.4 * config.total_power
        powers, level = water_fill(gains, config.noise_power_bob, budget)
        floors = config.noise_power_bob / gains
        active = powers > 0
        kkt = abs(float(np.sum(powers)) - budget) / budget
        if np.any(active):
            kkt = max(kkt, float(np.max(np.abs(
                floors[active] + powers[active] - level))) / level)
        if np.any(~active):
            kkt = max(kkt, max(0.0, float(np.max(
                level - floors[~active])) / level))
        worst["waterfill_kkt"] = max(worst["waterfill_kkt"], kkt)

    thresholds = {"frequency_diagonalization": 1e-10, "an_null_residual": 1e-9,
                  "precoder_orthonormality": 1e-10, "bob_an_invariance": 1e-9,
                  "waterfill_kkt": 1e-8}

    csv_lines = []
    stdout = []
    all_ok = identity_exact
    status = "PASS" if identity_exact else "FAIL"
    csv_lines.append(f"cp_identity,0,0,{status}")
    stdout.append(f"{status} cp_identity: cyclic-prefix removal of insertion "
                  "is the exact identity")
    for name, value in worst.items():
        ok = value < thresholds[name]
        all_ok = all_ok and ok
        status = "PASS" if ok else "FAIL"
        csv_lines.append(f"{name},{_fmt(value)},{_fmt(thresholds[name])},{status}")
        stdout.append(f"{status} {name}: worst {_fmt(value)} "
                      f"(tolerance {_fmt(thresholds[name])}, "
                      f"{n_trials} realizations)")
    return csv_lines, stdout, all_ok


# --------------------------------------------------------------------------
# Argument parsing and entry point
# --------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """argparse with usage errors remapped to the config-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="config file (sections [system], [plan], [output])")
    system = common.add_argument_group("system overrides")
    system.add_argument("--n-subchannels", type=int, metavar="N")
    system.add_argument("--n-cp", type=int, metavar="NCP")
    system.add_argument("--delay-spread-bob", type=int, metavar="L")
    system.add_argument("--delay-spread-eve", type=int, metavar="L")
    system.add_argument("--tap-variance-bob", type=float, metavar="VAR")
    system.add_argument("--tap-variance-eve", type=float, metavar="VAR")
    system.add_argument("--noise-power-bob", type=float, metavar="ETA")
    system.add_argument("--noise-power-eve", type=float, metavar="ETA")
    system.add_argument("--total-power", type=float, metavar="P",
                        help="linear power budget (default N*1000: 30 dB per "
                             "sub-channel at unit noise)")
    plan = common.add_argument_group("plan overrides")
    plan.add_argument("--trials", type=int, metavar="K")
    plan.add_argument("--grid", type=int, metavar="M",
                      help="fraction-grid resolution per axis")
    plan.add_argument("--seed", type=int, metavar="SEED")
    plan.add_argument("--ne", type=int, metavar="NE",
                      help="encrypted-set size (optimize)")
    plan.add_argument("--ne-list", metavar="NE,NE,...",
                      help="encrypted-set sizes for sweeps")
    plan.add_argument("--method", choices=METHODS,
                      help="encrypted sub-channel selection rule")
    plan.add_argument("--decoder", choices=DECODERS + ("both",),
                      help="eavesdropper decoder model")
    plan.add_argument("--fractions", metavar="T1,T2,T3|optimized",
                      help="power-fraction policy")
    plan.add_argument("--equal-power", action=argparse.BooleanOptionalAction,
                      default=None, help="split the data budget evenly over "
                                         "the active set")
    plan.add_argument("--jobs", type=int, metavar="J",
                      help="worker processes (results identical to serial)")
    output = common.add_argument_group("output")
    output.add_argument("--out", dest="dir", metavar="DIR",
                        help="output directory")
    output.add_argument("--stem", metavar="NAME",
                        help="artifact basename (default: subcommand)")
    output.add_argument("--plot", action=argparse.BooleanOptionalAction,
                        default=None, help="also render an SVG chart from the CSV")

    parser = _Parser(
        prog="ofdmsec",
        description="Link-level secrecy experiments for cyclic-prefix OFDM "
                    "with temporal artificial noise and key-encrypted "
                    "sub-channels.",
        epilog="Exit codes: 0 ok, 1 config error, 2 numerical failure, "
               "3 validation failure.")
    parser.add_argument("--version", action="version",
                        version=f"ofdmsec {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True,
                                parser_class=_Parser)
    sub.add_parser("fig1", parents=[common],
                   help="N_e sweep, optimized fractions, both Eve decoders")
    sub.add_parser("fig2", parents=[common],
                   help="N_e sweep, equal data power, three selection methods")
    sub.add_parser("fig3", parents=[common],
                   help="compare AN-only, key-only, fixed and optimized hybrid")
    sub.add_parser("fig4", parents=[common],
                   help="theta1 sweep at fixed AN fraction for several N_e")
    sub.add_parser("sweep", parents=[common],
                   help="generic N_e sweep (fixed or optimized fractions)")
    sub.add_parser("optimize", parents=[common],
                   help="fraction-grid search at one N_e")
    sub.add_parser("validate", parents=[common],
                   help="structural invariant suite")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        settings = _resolve_settings(args)
        config = _system_config(settings)
        out_dir = Path(settings["output"]["dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        stem = settings["output"]["stem"]
        csv_path = out_dir / f"{stem}.csv"
        log_path = out_dir / f"{stem}.log"
        svg_path = out_dir / f"{stem}.svg"

        if args.subcommand == "validate":
            csv_lines, stdout_lines, all_ok = _run_validate(config, settings)
            header = VALIDATE_HEADER
        else:
            plan = _base_plan(settings)
            csv_lines, stdout_lines = _COMMANDS[args.subcommand](
                config, settings, plan)
            header = CSV_HEADER
            all_ok = True

        _write_lines(csv_path, header, csv_lines)
        artifacts = [("csv", csv_path.name), ("log", log_path.name)]
        if settings["output"]["plot"]:
            if _render_plot(csv_path, svg_path):
                artifacts.append(("svg", svg_path.name))
            else:
                stdout_lines.append("plot skipped: no plottable columns")
        _write_log(log_path, args.subcommand, settings, artifacts)

        for line in stdout_lines:
            print(line)
        print(f"wrote {csv_path} ({len(csv_lines)} rows)")
        return 0 if all_ok else 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
