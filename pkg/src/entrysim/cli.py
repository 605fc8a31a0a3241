"""Command-line front end.

    entrysim run [CONFIG] -o OUT [--override key=value ...]
    entrysim montecarlo CONFIG -o OUT [--override key=value ...]
    entrysim atmosphere --from 0 --to 86000 --step 1000
    entrysim schema

Config files are YAML with the sections scenario, entry, vehicle, guidance and
montecarlo. Every key carries its unit in its name; angles are given in
degrees and converted to radians here, nowhere else. Unknown keys are errors.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import yaml

from . import atmosphere
from .dynamics import VehicleParams
from .engine import COLUMNS, Scenario, run
from .guidance import EntryConditions, GuidanceConfig
from .montecarlo import DispersionSpec, EmptyEnsembleError, run_ensemble

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

SECTIONS = ("scenario", "entry", "vehicle", "guidance", "montecarlo")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Key:
    section: str
    name: str  # config key, unit suffix included
    field: str  # attribute on the target dataclass
    kind: str  # float | int | bool | mode | angle | pair
    unit: str
    help: str


SCHEMA = (
    Key("scenario", "mode", "mode", "mode", "-", "planar or three_d"),
    Key("scenario", "dt_s", "dt", "float", "s", "integration step"),
    Key("scenario", "max_time_s", "max_time", "float", "s", "simulated time limit"),
    Key("scenario", "curvature_term", "curvature_term", "bool", "-",
        "Earth-curvature term in the flight-path angle rate"),
    Key("scenario", "seed", "seed", "int", "-", "seeker noise seed"),
    Key("scenario", "target_x_m", "target_x", "float", "m", "target downrange"),
    Key("scenario", "target_z_m", "target_z", "float", "m", "target crossrange"),
    Key("scenario", "density_multiplier", "density_multiplier", "float", "-",
        "scale on standard-atmosphere density"),
    Key("scenario", "output_every", "output_every", "int", "steps",
        "keep every Nth trajectory sample"),
    Key("entry", "altitude_m", "entry_altitude", "float", "m", "entry altitude"),
    Key("entry", "speed_m_s", "entry_speed", "float", "m/s", "entry speed"),
    Key("entry", "gamma_deg", "entry_gamma", "angle", "deg",
        "entry flight-path angle below the horizon"),
    Key("entry", "heading_deg", "entry_heading", "angle", "deg", "entry heading"),
    Key("vehicle", "mass_kg", "mass", "float", "kg", "vehicle mass"),
    Key("vehicle", "ref_area_m2", "ref_area", "float", "m^2", "aerodynamic reference area"),
    Key("vehicle", "lift_to_drag", "lift_to_drag", "float", "-", "lift-to-drag ratio K"),
    Key("vehicle", "cx0", "cx0", "float", "-", "zero-lift drag coefficient"),
    Key("vehicle", "cy_max", "cy_max", "float", "-", "maximum lift coefficient"),
    Key("guidance", "pullup_altitude_m", "pullup_altitude", "float", "m",
        "descent to pull-up switch altitude"),
    Key("guidance", "turn_radius_m", "turn_radius", "float", "m", "pull-up arc radius"),
    Key("guidance", "cruise_altitude_m", "cruise_altitude", "float", "m", "altitude hold target"),
    Key("guidance", "k_alt_per_m", "k_alt", "float", "1/m", "altitude error gain"),
    Key("guidance", "k_alt_rate_s_per_m", "k_alt_rate", "float", "s/m", "climb rate damping gain"),
    Key("guidance", "k_terminal_per_rad", "k_terminal", "float", "1/rad", "terminal pursuit gain"),
    Key("guidance", "seeker_acquisition_range_m", "seeker_acquisition_range", "float", "m",
        "seeker lock-on range"),
    Key("guidance", "seeker_fov_half_angle_deg", "seeker_fov_half_angle", "angle", "deg",
        "seeker field-of-view half angle"),
    Key("guidance", "seeker_noise_sigma_deg", "seeker_noise_sigma", "angle", "deg",
        "seeker angle noise, 1 sigma per channel"),
    Key("montecarlo", "n_runs", "n_runs", "int", "-", "ensemble size"),
    Key("montecarlo", "base_seed", "base_seed", "int", "-", "ensemble seed"),
    Key("montecarlo", "mass_range_kg", "mass_range", "pair", "kg", "uniform mass range"),
    Key("montecarlo", "entry_gamma_range_deg", "entry_gamma_range", "pair", "deg",
        "uniform entry angle range"),
    Key("montecarlo", "entry_altitude_range_m", "entry_altitude_range", "pair", "m",
        "uniform entry altitude range"),
    Key("montecarlo", "density_multiplier_sigma", "density_multiplier_sigma", "float", "-",
        "lognormal sigma of the density multiplier"),
    Key("montecarlo", "seeker_noise_sigma_deg", "seeker_noise_sigma", "angle", "deg",
        "seeker angle noise for every run"),
    Key("montecarlo", "target_offset_sigma_m", "target_offset_sigma", "float", "m",
        "target offset sigma per horizontal axis"),
)

_BY_SECTION = {s: {k.name: k for k in SCHEMA if k.section == s} for s in SECTIONS}
_UNIT_SUFFIXES = ("_s_per_m", "_per_rad", "_per_m", "_m_s", "_m2", "_deg", "_kg", "_m", "_s")


def _stem(name):
    for suffix in _UNIT_SUFFIXES:
        if name.endswith(suffix):
            return name[:-len(suffix)]
    return name


def _aliases(key):
    return {key.name, key.field, _stem(key.name)}


def _defaults():
    sc = Scenario()
    objs = {"entry": sc.entry, "vehicle": sc.vehicle, "guidance": sc.guidance,
            "montecarlo": DispersionSpec()}
    out = {}
    for k in SCHEMA:
        if k.section == "scenario":
            if k.field == "target_x":
                v = sc.target[0]
            elif k.field == "target_z":
                v = sc.target[1]
            else:
                v = getattr(sc, k.field)
        else:
            v = getattr(objs[k.section], k.field)
        if k.kind == "angle":
            v = math.degrees(v)
        elif k.kind == "pair":
            v = list(v)
        out[(k.section, k.name)] = v
    return out


def _coerce(key, value):
    where = f"{key.section}.{key.name}"
    if key.kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false, got {value!r}")
        return value
    if key.kind == "mode":
        if value not in ("planar", "three_d"):
            raise ConfigError(f"{where}: expected 'planar' or 'three_d', got {value!r}")
        return value
    if key.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer, got {value!r}")
        return value
    if key.kind == "pair":
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ConfigError(f"{where}: expected [low, high], got {value!r}")
        return [_number(where, v) for v in value]
    return _number(where, value)


def _number(where, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}: must be finite, got {value!r}")
    return float(value)


def _lookup(dotted):
    """Resolve an override key: ``section.key`` or a key unique across sections.

    The unit suffix may be dropped, so ``max_time`` finds ``scenario.max_time_s``.
    """
    if "." in dotted:
        section, name = dotted.split(".", 1)
        candidates = [k for k in _BY_SECTION.get(section, {}).values() if name in _aliases(k)]
    else:
        candidates = [k for k in SCHEMA if dotted in _aliases(k)]
    if not candidates:
        raise ConfigError(f"unknown override key {dotted!r}")
    if len(candidates) > 1:
        options = ", ".join(f"{k.section}.{k.name}" for k in candidates)
        raise ConfigError(f"ambiguous override key {dotted!r}; use one of {options}")
    return candidates[0]


def load_config(path=None, overrides=()):
    """Parse, override and type-check a config. Returns ``{section: {key: value}}``."""
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config top level must be a mapping of sections")
    cfg = {}
    for section, body in raw.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}")
        if body is None:
            body = {}
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping")
        cfg[section] = {}
        for name, value in body.items():
            key = _BY_SECTION[section].get(name)
            if key is None:
                raise ConfigError(f"unknown key {section}.{name}")
            cfg[section][name] = _coerce(key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        name, text = item.split("=", 1)
        key = _lookup(name.strip())
        try:
            value = yaml.safe_load(text)
        except yaml.YAMLError:
            raise ConfigError(f"override {name}: cannot parse {text!r}") from None
        cfg.setdefault(key.section, {})[key.name] = _coerce(key, value)
    return cfg


def _fields(cfg, section):
    out = {}
    for name, value in cfg.get(section, {}).items():
        key = _BY_SECTION[section][name]
        if key.kind == "angle":
            value = math.radians(value)
        elif key.kind == "pair":
            value = tuple(value)
        out[key.field] = value
    return out


def _build(cls, kwargs, section, base=None):
    try:
        return replace(base, **kwargs) if base is not None else cls(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def build_scenario(cfg):
    entry = _build(EntryConditions, _fields(cfg, "entry"), "entry")
    vehicle = _build(VehicleParams, _fields(cfg, "vehicle"), "vehicle")
    guidance = _build(GuidanceConfig, _fields(cfg, "guidance"), "guidance")
    sc = _fields(cfg, "scenario")
    default_target = Scenario.__dataclass_fields__["target"].default
    target = (sc.pop("target_x", default_target[0]), sc.pop("target_z", default_target[1]))
    return _build(Scenario, dict(sc, entry=entry, vehicle=vehicle, guidance=guidance,
                                 target=target), "scenario")


def build_dispersion(cfg, scenario):
    if "montecarlo" not in cfg:
        raise ConfigError("missing section 'montecarlo'")
    return _build(DispersionSpec, dict(_fields(cfg, "montecarlo"), base=scenario), "montecarlo")


def _num(v):
    """Finite float as shortest round-trip text; anything else is a bug upstream."""
    v = float(v)
    if not math.isfinite(v):
        raise ValueError(f"refusing to serialize non-finite value {v}")
    return repr(v)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, int):
        return obj
    v = float(obj)
    return v if math.isfinite(v) else None


def _write_json(path, obj):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def write_trajectory(path, trajectory):
    phase_col = COLUMNS.index("phase")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for row in trajectory.data:
            w.writerow([int(v) if i == phase_col else _num(v) for i, v in enumerate(row)])


def cmd_run(args):
    cfg = load_config(args.config, args.override)
    scenario = build_scenario(cfg)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    trajectory, report = run(scenario)
    write_trajectory(out / "trajectory.csv", trajectory)
    _write_json(out / "report.json", report.to_dict())
    print(f"outcome={report.outcome} impact_time_s={report.impact_time:.3f} "
          f"downrange_m={report.downrange:.1f} miss_m={report.miss_distance:.4f}")
    return EXIT_RUNTIME if report.outcome == "aborted" else EXIT_OK


RUN_FIELDS = ("run_index", "seed", "mass_kg", "entry_gamma_deg", "entry_altitude_m",
              "density_multiplier", "target_x_m", "target_z_m", "miss_m",
              "impact_time_s", "downrange_m", "outcome")


def cmd_montecarlo(args):
    cfg = load_config(args.config, args.override)
    spec = build_dispersion(cfg, build_scenario(cfg))
    threads = os.environ.get("SIM_THREADS")
    if threads is not None:
        try:
            if int(threads) < 1:
                raise ValueError
        except ValueError:
            raise ConfigError(f"SIM_THREADS must be a positive integer, got {threads!r}") from None
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    try:
        stats, reports, samples = run_ensemble(spec, return_samples=True)
    except EmptyEnsembleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    _write_json(out / "ensemble.json", stats.to_dict())
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RUN_FIELDS)
        for i, (s, r) in enumerate(zip(samples, reports)):
            w.writerow([i, s.seed, _num(s.vehicle.mass), _num(math.degrees(s.entry.entry_gamma)),
                        _num(s.entry.entry_altitude), _num(s.density_multiplier),
                        _num(s.target[0]), _num(s.target[1]), _num(r.miss_distance),
                        _num(r.impact_time), _num(r.downrange), r.outcome])
    print(f"n={stats.n} impacts={stats.n_impact} cep_m={stats.cep:.4f} "
          f"miss_max_m={stats.miss_max:.4f}")
    return EXIT_OK


def cmd_atmosphere(args):
    lo, hi, step = args.start, args.stop, args.step
    if not (math.isfinite(lo) and math.isfinite(hi) and 0 <= lo < hi):
        raise ConfigError(f"altitude range must satisfy 0 <= from < to, got {lo}..{hi}")
    if not (math.isfinite(step) and step > 0):
        raise ConfigError(f"step must be > 0, got {step}")
    n = int(math.floor((hi - lo) / step + 1e-9)) + 1
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(("altitude_m", "temperature_k", "pressure_pa", "density_kg_m3",
                "speed_of_sound_m_s"))
    for i in range(n):
        a = atmosphere.sample(lo + i * step)
        w.writerow([_num(a.altitude_geometric), _num(a.temperature), _num(a.pressure),
                    _num(a.density), _num(a.speed_of_sound)])
    return EXIT_OK


def cmd_schema(args):
    defaults = _defaults()
    for section in SECTIONS:
        print(f"{section}:")
        for key in _BY_SECTION[section].values():
            value = yaml.safe_dump(defaults[(section, key.name)], default_flow_style=True)
            value = value.strip().removesuffix("...").strip()
            print(f"  {key.name}: {value}  # [{key.unit}] {key.help}")
    return EXIT_OK


def _parser():
    p = argparse.ArgumentParser(prog="entrysim", description="Entry vehicle flight simulator")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="fly one scenario")
    r.add_argument("config", nargs="?", help="YAML config (defaults when omitted)")
    r.add_argument("-o", "--output", default=".", help="output directory")
    r.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("montecarlo", help="fly a dispersed ensemble")
    m.add_argument("config", help="YAML config with a montecarlo section")
    m.add_argument("-o", "--output", default=".", help="output directory")
    m.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    m.set_defaults(func=cmd_montecarlo)

    a = sub.add_parser("atmosphere", help="print a standard-atmosphere table as CSV")
    a.add_argument("--from", dest="start", type=float, default=0.0, help="first altitude, m")
    a.add_argument("--to", dest="stop", type=float, default=86000.0, help="last altitude, m")
    a.add_argument("--step", type=float, default=1000.0, help="altitude step, m")
    a.set_defaults(func=cmd_atmosphere)

    s = sub.add_parser("schema", help="print every config key with default and unit")
    s.set_defaults(func=cmd_schema)
    return p


def main(argv=None):
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
