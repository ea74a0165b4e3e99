"""Command-line front end: ``modclock run | sweep | verify``.

Configs are flat ``key = value`` files with dotted prefixes::

    scenario = spin
    clock.d = 2001
    spin.regime = detuned_compensated
    tol.max_flip = 0.01

Exit status is 0 when every asserted check passes, 1 when one fails and 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import settings
from .errors import ConfigError, ModclockError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
SCENARIOS = ("doubleslit", "piston", "spin")


@dataclass
class RunConfig:
    scenario: str
    params: dict[str, str] = field(default_factory=dict)
    clock_d: int | None = None
    clock_dt: float | None = None
    out: str = "out"
    tolerances: dict[str, float] = field(default_factory=dict)
    hbar: float = 1.0


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _read_pairs(text: str) -> dict[str, str]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), delimiters=("=",), strict=True)
    parser.optionxform = str
    try:
        parser.read_string("[root]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    if len(parser.sections()) != 1:
        raise ConfigError("section headers are not allowed; use dotted keys instead")
    return {k.strip(): v.strip() for k, v in parser["root"].items()}


def _number(key: str, raw: str, kind=float):
    try:
        val = kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from exc
    if kind is float and not np.isfinite(val):
        raise ConfigError(f"{key}: value must be finite")
    return val


def parse_config(text: str) -> RunConfig:
    pairs = _read_pairs(text)
    scenario = pairs.pop("scenario", None)
    if scenario not in SCENARIOS:
        raise ConfigError(f"scenario must be one of {', '.join(SCENARIOS)}; got {scenario!r}")
    cfg = RunConfig(scenario)
    for key, raw in pairs.items():
        head, _, rest = key.partition(".")
        if key == "out":
            cfg.out = raw
        elif key == "hbar":
            cfg.hbar = _number(key, raw)
        elif key == "clock.d":
            cfg.clock_d = _number(key, raw, int)
        elif key == "clock.dt":
            cfg.clock_dt = _number(key, raw)
        elif head == "tol" and rest:
            cfg.tolerances[rest] = _number(key, raw)
        elif head == scenario and rest:
            cfg.params[rest] = raw
        else:
            raise ConfigError(f"unknown key {key!r} for scenario {scenario!r}")
    _validate_basics(cfg)
    return cfg


def _validate_basics(cfg: RunConfig) -> None:
    if not cfg.hbar > 0:
        raise ConfigError("hbar must be positive")
    if cfg.clock_d is not None and cfg.clock_d < 2:
        raise ConfigError("clock.d must be at least 2")
    if cfg.clock_dt is not None and not cfg.clock_dt > 0:
        raise ConfigError("clock.dt must be positive")


def load_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)


_CONVERTERS = {"float": float, "int": int, "str": str, "float | None": float}


def _build_dataclass(cls, params: dict[str, str], prefix: str, skip=()):
    kinds = {f.name: f.type for f in dataclasses.fields(cls) if f.init}
    kwargs = {}
    for key, raw in params.items():
        if key in skip:
            continue
        if key not in kinds:
            raise ConfigError(f"unknown key {prefix}.{key}")
        kind = kinds[key]
        if kind == "tuple[float, float]":
            parts = [p for p in raw.replace(",", " ").split() if p]
            if len(parts) != 2:
                raise ConfigError(f"{prefix}.{key}: expected two numbers")
            kwargs[key] = tuple(_number(f"{prefix}.{key}", p) for p in parts)
        elif kind == "str":
            kwargs[key] = raw
        else:
            conv = _CONVERTERS.get(kind)
            if conv is None:
                raise ConfigError(f"{prefix}.{key} cannot be set from a config file")
            kwargs[key] = _number(f"{prefix}.{key}", raw, conv)
    try:
        return cls(**kwargs)
    except ModclockError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{prefix}: {exc}") from exc


# ---------------------------------------------------------------------------
# scenario runners; each returns (tables, checks)
# ---------------------------------------------------------------------------

Table = tuple[str, list[str], list[list[float]]]


def _check(checks: list, cid: str, residual: float, tol: float, cfg: RunConfig, status: str = "") -> None:
    from .verify import CheckResult

    checks.append(CheckResult(cid, float(residual), float(cfg.tolerances.get(cid, tol)), status))


def _grid_from(params: dict[str, str], cfg: RunConfig, n_default: int, length_default: float):
    from .scenarios.grid import GridSystem

    n = _number("n", params.pop("n", str(n_default)), int)
    length = _number("length", params.pop("length", str(length_default)))
    mass = _number("mass", params.pop("mass", "1.0"))
    return GridSystem(n, length, mass)


def _phis(params: dict[str, str]) -> np.ndarray:
    if "phi" in params:
        raw = params.pop("phi")
        params.pop("n_phi", None)
        return np.array([_number("doubleslit.phi", p) for p in raw.replace(",", " ").split()])
    n_phi = _number("doubleslit.n_phi", params.pop("n_phi", "12"), int)
    if n_phi < 1:
        raise ConfigError("doubleslit.n_phi must be positive")
    return 2 * np.pi * np.arange(n_phi) / n_phi


def run_doubleslit(cfg: RunConfig, regime: str | None = None) -> tuple[list[Table], list]:
    from .modvars import fourier_moments
    from .scenarios.doubleslit import (
        DoubleSlitConfig,
        collapse_uncertainty_demo,
        modular_momentum,
        polynomial_phase_insensitivity,
        two_packet_state,
    )

    params = dict(cfg.params)
    grid = _grid_from(params, cfg, 256, 256.0)
    phis = _phis(params)
    ell = _number("doubleslit.ell", params.pop("ell", str(grid.length / 8)))
    sigma = _number("doubleslit.sigma", params.pop("sigma", str(ell / 16)))
    center = params.pop("center", None)
    if params:
        raise ConfigError(f"unknown doubleslit keys: {', '.join(sorted(params))}")
    center = None if center is None else _number("doubleslit.center", center)
    v = modular_momentum(grid, ell)
    probe = modular_momentum(grid, 4 * ell)
    rows, worst, worst_probe = [], 0.0, 0.0
    for phi in phis:
        psi = two_packet_state(grid, DoubleSlitConfig(sigma, ell, float(phi), center))
        m = fourier_moments(psi, v, 1).moment(1)
        rows.append([float(phi), m.real, m.imag])
        worst = max(worst, abs(m - np.exp(1j * phi) / 2))
        worst_probe = max(worst_probe, abs(fourier_moments(psi, probe, 1).moment(1)))
    base = DoubleSlitConfig(sigma, ell, float(phis[0]), center)
    checks: list = []
    _check(checks, "phase_law", worst, 1e-6, cfg)
    _check(checks, "probe_4ell", worst_probe, 1e-6, cfg)
    _check(checks, "polynomial_insensitivity", polynomial_phase_insensitivity(grid, base), 1e-8, cfg)
    demo = collapse_uncertainty_demo(grid, base, 5)
    _check(checks, "collapse_uncertainty", float(np.max(np.abs(demo.after.moments))), 1e-6, cfg)
    return [("doubleslit.csv", ["phi", "re_moment", "im_moment"], rows)], checks


def run_piston_cli(cfg: RunConfig, regime: str | None = None) -> tuple[list[Table], list]:
    from .scenarios.piston import PistonConfig, particle_period, run_piston

    params = dict(cfg.params)
    grid = _grid_from(params, cfg, 256, 256.0)
    pc = _build_dataclass(PistonConfig, params, "piston")
    if cfg.clock_dt is not None:
        q = int(round(particle_period(grid, pc) / cfg.clock_dt))
        pc = dataclasses.replace(pc, ticks_per_period=max(q, 4))
    run = run_piston(grid, pc, cfg.clock_d)
    times = run.moved.clock.times
    rows = [[float(times[k]), v.real, v.imag] for k, v in enumerate(run.series)]
    checks: list = []
    _check(checks, "phase_shift", run.relative_error, 0.05, cfg)
    _check(checks, "wall_mass", run.wall_mass, 1e-6, cfg)
    return [("piston.csv", ["t", "re_overlap", "im_overlap"], rows)], checks


def run_spin_cli(cfg: RunConfig, regime: str | None = None) -> tuple[list[Table], list]:
    from .scenarios.spin import Regime, SpinPulseConfig, regime_config, run_spin, spin_modular_energy_rates

    params = dict(cfg.params)
    regime = regime or params.pop("regime", "resonant")
    params.pop("regime", None)
    try:
        regime = Regime(regime)
    except ValueError as exc:
        raise ConfigError(f"unknown regime {regime!r}") from exc
    overrides = {}
    probe = _build_dataclass(SpinPulseConfig, params, "spin")  # type-checks the keys
    for key in params:
        overrides[key] = getattr(probe, key)
    overrides["hbar"] = cfg.hbar
    sc = regime_config(regime, **overrides)
    if cfg.clock_dt is not None:
        tpp = sc.period / cfg.clock_dt
        if abs(tpp - round(tpp)) > 1e-9 * tpp:
            raise ConfigError(f"clock.dt must divide the pulse period {sc.period:.12g}")
        sc = dataclasses.replace(sc, ticks_per_period=int(round(tpp)))
    run = run_spin(sc, regime, cfg.clock_d)
    rows = [[float(t), float(p)] for t, p in zip(run.times, run.p_flip)]
    checks: list = []
    if regime is Regime.DETUNED_BARE:
        _check(checks, "max_flip", run.max_flip, 0.1, cfg)
    else:
        _check(checks, "max_flip", 1 - run.max_flip, 0.01, cfg)
    _check(checks, "norm", run.norm_error, 1e-10, cfg)
    rates = spin_modular_energy_rates(sc, sc.period)
    _check(checks, "rate_pulse_period", rates.rate_norm, 1e-10, cfg)
    _check(checks, "rate_identity", rates.identity_residual, 1e-10, cfg)
    return [(f"spin_{regime.value}.csv", ["t", "p_flip"], rows)], checks


RUNNERS = {"doubleslit": run_doubleslit, "piston": run_piston_cli, "spin": run_spin_cli}


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def csv_text(header: list[str], rows: list[list[float]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def summary_json(checks: list, extra: dict | None = None) -> str:
    body = dict(extra or {})
    body["checks"] = [c.as_dict() for c in checks]
    body["status"] = "pass" if all(c.status != "fail" for c in checks) else "fail"
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def write_atomic(files: dict[str, str], out_dir: str | os.PathLike) -> None:
    """Write every file to a temporary name first, then rename them all."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    staged = []
    try:
        for name, text in files.items():
            fd, tmp = tempfile.mkstemp(dir=out, prefix=f".{name}.", suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            staged.append((tmp, out / name))
    except BaseException:
        for tmp, _ in staged:
            os.unlink(tmp)
        raise
    for tmp, final in staged:
        os.replace(tmp, final)


def _report(checks: list, stream=None) -> None:
    stream = stream or sys.stdout
    width = max([len(c.id) for c in checks] + [5])
    stream.write(f"{'check':<{width}}  {'residual':>12}  {'tol':>10}  status\n")
    for c in checks:
        stream.write(f"{c.id:<{width}}  {c.residual:12.4e}  {c.tol:10.2e}  {c.status}\n")


def execute(cfg: RunConfig, regime: str | None = None) -> tuple[dict[str, str], list]:
    with settings.override(hbar=cfg.hbar):
        tables, checks = RUNNERS[cfg.scenario](cfg, regime)
    files = {name: csv_text(header, rows) for name, header, rows in tables}
    files["summary.json"] = summary_json(checks, {"scenario": cfg.scenario})
    return files, checks


def _status(checks: list) -> int:
    return EXIT_OK if all(c.status != "fail" for c in checks) else EXIT_FAIL


def _apply_flags(cfg: RunConfig, args) -> RunConfig:
    if getattr(args, "out", None):
        cfg.out = args.out
    if getattr(args, "hbar", None) is not None:
        cfg.hbar = args.hbar
    if getattr(args, "d", None) is not None:
        cfg.clock_d = args.d
    if getattr(args, "dt", None) is not None:
        cfg.clock_dt = args.dt
    _validate_basics(cfg)
    return cfg


def cmd_run(args) -> int:
    cfg = _apply_flags(load_config(args.config), args)
    files, checks = execute(cfg, args.regime)
    write_atomic(files, cfg.out)
    _report(checks)
    return _status(checks)


def _with_param(cfg: RunConfig, name: str, value: str) -> RunConfig:
    new = dataclasses.replace(cfg, params=dict(cfg.params), tolerances=dict(cfg.tolerances))
    head, _, rest = name.partition(".")
    if name == "hbar":
        new.hbar = _number(name, value)
    elif name == "clock.d":
        new.clock_d = _number(name, value, int)
    elif name == "clock.dt":
        new.clock_dt = _number(name, value)
    elif head == cfg.scenario and rest:
        new.params[rest] = value
    else:
        raise ConfigError(f"cannot sweep {name!r} for scenario {cfg.scenario!r}")
    _validate_basics(new)
    return new


def cmd_sweep(args) -> int:
    base = _apply_flags(load_config(args.config), args)
    variants = [_with_param(base, args.param, v) for v in args.values]
    jobs = max(1, min(args.jobs, len(variants)))
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        results = list(pool.map(lambda c: execute(c, args.regime), variants))
    runs, all_checks = [], []
    for value, (_, checks) in zip(args.values, results):
        runs.append({"value": value, "checks": [c.as_dict() for c in checks],
                     "status": "pass" if all(c.status != "fail" for c in checks) else "fail"})
        all_checks += checks
    summary = {"param": args.param, "scenario": base.scenario, "runs": runs,
               "status": "pass" if all(r["status"] == "pass" for r in runs) else "fail"}
    for value, (run_files, _) in zip(args.values, results):
        write_atomic(run_files, Path(base.out) / f"{args.param}={value}")
    write_atomic({"sweep.json": json.dumps(summary, indent=2, sort_keys=True) + "\n"}, base.out)
    for r in runs:
        print(f"{args.param} = {r['value']}: {r['status']}")
    return _status(all_checks)


# ---------------------------------------------------------------------------
# verification suites
# ---------------------------------------------------------------------------


def suite_identities(d: int) -> list:
    from .clock import ClockModel
    from .modvars import energy_time_cell_residual, weyl_commutation_check
    from .scenarios.grid import GridSystem
    from .scenarios.piston import small_piston_spec
    from .scenarios.spin import regime_config, spin_spec
    from .verify import CheckResult, check_energy_time_commutators, check_modular_energy_identity, \
        check_modular_momentum_identity

    out = []
    grid = GridSystem(128, 128.0)
    potentials = {
        "zero": lambda x: 0 * x,
        "harmonic": lambda x: 0.005 * (x - 64) ** 2,
        "double_well": lambda x: 0.5 * np.cos(2 * np.pi * x / 16) + 0.1 * np.cos(2 * np.pi * x / 32),
    }
    for name, v in potentials.items():
        out.append(CheckResult(f"momentum_identity/{name}", check_modular_momentum_identity(grid, v, 16.0), 1e-10))
    g64 = GridSystem(64, 64.0)
    out.append(CheckResult("weyl/commuting", weyl_commutation_check(g64.X, g64.P, 8.0, 2 * np.pi / 8.0), 1e-10))
    half = weyl_commutation_check(g64.X, g64.P, 8.0, np.pi / 8.0)
    out.append(CheckResult("weyl/half_cell", max(0.0, 0.5 - half), 1e-12))
    cfg = regime_config("detuned_compensated")
    spec = spin_spec(cfg, 2 * cfg.ticks_per_period)
    out.append(CheckResult("energy_identity/spin_tau", check_modular_energy_identity(spec, 150).residual, 1e-10))
    out.append(CheckResult("energy_identity/spin_tau_prime", check_modular_energy_identity(spec, 100).rate_norm, 1e-10))
    _, pcfg, pspec = small_piston_spec(64, ticks_per_period=50, centered=False)
    out.append(CheckResult("energy_identity/piston", check_modular_energy_identity(pspec, 50).residual, 1e-10))
    clock = ClockModel(d, 0.1)
    out.append(CheckResult("energy_time/interior", check_energy_time_commutators(clock, 1).interior, 1e-8))
    out.append(CheckResult("energy_time/cells", energy_time_cell_residual(clock, 1), 1e-10))
    return out


def suite_clock(d: int) -> list:
    from .clock import ClockModel
    from .opalg import Operator
    from .pwframe import HamiltonianSpec
    from .verify import CheckResult, check_energy_time_commutators, check_time_flow

    clock = ClockModel(d, 1.0 / d)
    spec = HamiltonianSpec(clock, Operator.diagonal([0.0, 1.0], (("S", 2),)))
    out = []
    tf = check_time_flow(spec, width=4 * clock.delta_t)
    out.append(CheckResult("time_flow", tf.residual, 1e-2, "" if tf.asserted else "flagged"))
    rep = check_energy_time_commutators(clock, 1, s=1, width=4 * clock.delta_t)
    out.append(CheckResult("energy_time/interior", rep.interior, 1e-8))
    out.append(CheckResult("energy_time/ladder", rep.ladder, 1e-2))
    out.append(CheckResult("energy_time/seam", rep.seam, 1e-8, "flagged"))
    return out


SUITES = {"identities": suite_identities, "clock": suite_clock}


def cmd_verify(args) -> int:
    if args.suite not in SUITES and args.suite != "all":
        raise ConfigError(f"unknown suite {args.suite!r}; choose from {', '.join([*SUITES, 'all'])}")
    if args.d < 8:
        raise ConfigError("--d must be at least 8")
    names = list(SUITES) if args.suite == "all" else [args.suite]
    with settings.override(hbar=args.hbar if args.hbar is not None else 1.0):
        checks = [c for name in names for c in SUITES[name](args.d)]
    write_atomic({"verify.json": summary_json(checks, {"suite": args.suite, "d": args.d})}, args.out or "out")
    _report(checks)
    return _status(checks)


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modclock", description="Relational-time modular variable experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--hbar", type=float, help="override hbar")
        sp.add_argument("--d", type=int, help="clock dimension")

    r = sub.add_parser("run", help="run one scenario config")
    r.add_argument("config")
    common(r)
    r.add_argument("--dt", type=float, help="clock tick")
    r.add_argument("--regime", help="spin regime override")

    s = sub.add_parser("sweep", help="run a config once per parameter value")
    s.add_argument("config")
    s.add_argument("--param", required=True, help="dotted key, e.g. piston.delta_ell")
    s.add_argument("--values", nargs="+", required=True)
    s.add_argument("--jobs", type=int, default=4)
    common(s)
    s.add_argument("--dt", type=float)
    s.add_argument("--regime")

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("--suite", default="identities")
    v.add_argument("--out")
    v.add_argument("--hbar", type=float)
    v.add_argument("--d", type=int, default=64)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    handlers = {"run": cmd_run, "sweep": cmd_sweep, "verify": cmd_verify}
    try:
        return handlers[args.command](args)
    except (ConfigError, ModclockError) as exc:
        print(f"modclock: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
