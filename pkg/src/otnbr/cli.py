"""Command-line front end.

Subcommands: ``design``, ``eval``, ``sweep``, ``bound`` and ``reproduce``.
Settings come from an optional JSON file (``--config``); any flag given on
the command line wins over the file. Exit status is 0 on success, 2 for a
configuration problem and 3 for a numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import bound_rate, budget_from_snrs, distortion_power_bound
from .decoder import ChannelSnrs
from .designer import SCHEMES, AnnealSchedule, design
from .netcode import NotApplicableError, code_from_dict, code_to_dict, is_linear, structured_relay_rate
from .quantizer import ConvergenceError, design_lloyd_max
from .simulator import CURVE_COLUMNS, SystemInstance, curve_row, exact_point, format_csv, sweep
from .topology import NetworkTopology, TopologyError, make_preset

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
THREADS_ENV = "OTNBR_THREADS"
AXIS_FLAGS = {"snr-rd": "snr_rd", "snr-sd": "snr_sd", "snr-sr": "snr_sr", "rate": "rate"}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str = "omarc"
    n: int = 2
    topology: list | None = None  # explicit decode sets, overrides preset
    r: int = 3
    rates: list | None = None  # per-source rates, overrides r
    rr: int | None = None
    scheme: str = "dnnc-c4"
    snr_sd: float = -3.0
    snr_sr: float = 10.0
    snr_rd: float = 7.0
    anneal: dict = field(default_factory=dict)
    samples: int = 40_000
    seed: int = 0
    mode: str = "soft"
    variance: float = 1.0
    b: float | None = None

    @classmethod
    def from_sources(cls, path: str | None, overrides: dict) -> "ExperimentConfig":
        doc: dict = {}
        if path:
            try:
                doc = json.loads(Path(path).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config: cannot read {path}: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config: top level must be an object")
        known = {f.name for f in fields(cls)}
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"config: unknown field(s) {sorted(unknown)}")
        doc.update({k: v for k, v in overrides.items() if k in known and v is not None})
        cfg = cls(**doc)
        cfg.check()
        return cfg

    def check(self) -> None:
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme: must be one of {', '.join(SCHEMES)}")
        if self.mode not in ("soft", "hard", "exact"):
            raise ConfigError("mode: must be soft, hard or exact")
        if int(self.samples) < 1:
            raise ConfigError("samples: must be >= 1")
        if self.variance <= 0:
            raise ConfigError("variance: must be positive")
        if self.b is not None and self.b <= 0:
            raise ConfigError("b: must be positive")
        try:
            AnnealSchedule(**self.anneal)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"anneal: {exc}") from exc

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def build_topology(self) -> NetworkTopology:
        try:
            if self.topology is not None:
                return NetworkTopology(len({s for ds in self.topology for s in ds}) if self.rates is None
                                       else len(self.rates), self.topology)
            return make_preset(self.preset, self.n)
        except TopologyError as exc:
            raise ConfigError(f"topology: {exc}") from exc

    def source_rates(self, topology: NetworkTopology) -> list[int]:
        rates = list(self.rates) if self.rates is not None else [int(self.r)] * topology.num_sources
        if len(rates) != topology.num_sources or any(r < 1 or r > 8 for r in rates):
            raise ConfigError("rates: need one rate in 1..8 per source")
        return rates

    def relay_rate(self, topology: NetworkTopology, notify=print) -> int:
        if self.rr is not None:
            if not 1 <= int(self.rr) <= 16:
                raise ConfigError("rr: must lie in 1..16")
            return int(self.rr)
        rates = self.source_rates(topology)
        if self.scheme == "structured" and len(set(rates)) == 1 and rates[0] >= 2:
            rr = structured_relay_rate(topology.num_sources, rates[0])
            notify(f"notice: relay rate not given; using {rr} bits for the structured code")
            return rr
        if topology.num_sources == 2 and len(set(rates)) == 1:
            return rates[0]
        raise ConfigError("rr: relay rate is required for this configuration")

    def snrs(self) -> ChannelSnrs:
        return ChannelSnrs(float(self.snr_sd), float(self.snr_sr), float(self.snr_rd))

    def schedule(self) -> AnnealSchedule:
        return AnnealSchedule(**{**self.anneal, "seed": int(self.anneal.get("seed", self.seed))})


def parse_values(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            count = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 10) for k in range(count)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"values: cannot parse {text!r}") from exc


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _header(cfg: ExperimentConfig, extra: tuple = ()) -> list[str]:
    return [f"otnbr {__version__}", f"config_hash {cfg.digest()}", f"seed {cfg.seed}", *extra]


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _quantizers(cfg: ExperimentConfig, topology: NetworkTopology):
    return tuple(design_lloyd_max(r, cfg.variance) for r in cfg.source_rates(topology))


def code_document(code, topology: NetworkTopology, quantizers, cfg: ExperimentConfig | None = None) -> dict:
    doc = code_to_dict(code)
    doc["topology"] = topology.to_dict()
    doc["variances"] = [q.variance for q in quantizers]
    doc["tool_version"] = __version__
    if cfg is not None:
        doc["config"] = cfg.to_dict()
        doc["config_hash"] = cfg.digest()
    return doc


def load_code_document(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"code: cannot read {path}: {exc}") from exc
    try:
        code = code_from_dict(doc)
        topology = NetworkTopology.from_dict(doc["topology"]) if "topology" in doc else None
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"code: {exc}") from exc
    variances = doc.get("variances")
    return code, topology, variances


def _instance_from_code(args, cfg: ExperimentConfig) -> SystemInstance:
    code, topology, variances = load_code_document(args.code)
    if topology is None:
        topology = cfg.build_topology()
    rates = code.source_rates
    if variances is None:
        variances = [cfg.variance] * len(rates)
    qs = tuple(design_lloyd_max(r, v) for r, v in zip(rates, variances))
    mode = "hard" if cfg.mode == "exact" else cfg.mode
    try:
        return SystemInstance(topology, qs, code, cfg.snrs(), mode)
    except ValueError as exc:
        raise ConfigError(f"code: {exc}") from exc


def _rows_for(instance: SystemInstance, axis: str, values, cfg: ExperimentConfig, label: str | None = None):
    if cfg.mode == "exact":
        rows = []
        for v in values:
            inst = instance.replace(snrs=instance.snrs.replace(**{axis[4:]: float(v)}))
            rows.append(exact_point(inst, v))
    else:
        rows = [curve_row(v, r) for v, r in sweep(instance, axis, values, int(cfg.samples), cfg.seed,
                                                  workers=_workers())]
    if label is not None:
        for r in rows:
            r["curve"] = label
    return rows


# --- subcommands -------------------------------------------------------------------------------

def cmd_design(args, cfg: ExperimentConfig) -> int:
    topology = cfg.build_topology()
    qs = _quantizers(cfg, topology)
    rr = cfg.relay_rate(topology)
    try:
        result = design(topology, qs, rr, cfg.scheme, cfg.snrs(), cfg.schedule())
    except NotApplicableError as exc:
        raise ConfigError(f"scheme: {exc}") from exc
    doc = code_document(result.code, topology, qs, cfg)
    out = args.out or "code.json"
    _write(out, json.dumps(doc, indent=1, sort_keys=True) + "\n")
    trace_path = args.trace or str(Path(out).with_suffix("")) + ".trace.csv"
    _write(trace_path, format_csv(result.trace_rows(), _header(cfg),
                                  ("temp_index", "temperature", "current_cost", "best_cost")))
    linear = is_linear(result.code, allow_mixed_rates=True)
    print(f"final design cost: {result.cost!r}")
    print(f"scheme {cfg.scheme}, relay rate {rr}, linear: {linear}")
    if cfg.scheme == "dlnc":
        print(f"coefficients: {tuple(result.code.coefficients)}")
    return EXIT_OK


def cmd_eval(args, cfg: ExperimentConfig) -> int:
    instance = _instance_from_code(args, cfg)
    if cfg.mode == "exact":
        row = exact_point(instance, "")
    else:
        row = curve_row("", sweep(instance, "snr_rd", [cfg.snr_rd], int(cfg.samples), cfg.seed)[0][1])
    _write(args.out, format_csv([row], _header(cfg, (f"mode {cfg.mode}",))))
    if args.out not in (None, "-"):
        print(f"rsnr_db {row['rsnr_db']:.4f}  d_total {row['d_total']:.6g}")
    return EXIT_OK


def cmd_sweep(args, cfg: ExperimentConfig) -> int:
    axis = AXIS_FLAGS.get(args.axis)
    if axis is None or axis == "rate":
        raise ConfigError("axis: must be snr-rd, snr-sd or snr-sr for a stored code")
    instance = _instance_from_code(args, cfg)
    rows = _rows_for(instance, axis, parse_values(args.values), cfg)
    _write(args.out, format_csv(rows, _header(cfg, (f"axis {axis}", f"mode {cfg.mode}"))))
    return EXIT_OK


def bound_rows(topology: NetworkTopology, cfg: ExperimentConfig, axis: str, values, b: float) -> list[dict]:
    rows = []
    for v in values:
        snr = {"snr_sd": cfg.snr_sd, "snr_sr": cfg.snr_sr, "snr_rd": cfg.snr_rd, axis: float(v)}
        rate = bound_rate(topology, budget_from_snrs(topology, snr["snr_sd"], snr["snr_sr"], snr["snr_rd"]))
        d = distortion_power_bound(rate, b, cfg.variance)
        rows.append({"axis_value": v, "rsnr_db": 10 * np.log10(cfg.variance / d), "d_total": d,
                     "d_sources": "", "d_network_est": "", "stderr": 0.0, "n_samples": 0, "seed": ""})
    return rows


def cmd_bound(args, cfg: ExperimentConfig) -> int:
    topology = cfg.build_topology()
    if args.sweep:
        axis = AXIS_FLAGS.get(args.sweep[0])
        if axis is None or axis == "rate":
            raise ConfigError("sweep: axis must be snr-sd, snr-sr or snr-rd")
        values = parse_values(args.sweep[1])
    else:
        axis, values = "snr_sd", [cfg.snr_sd]
    b = cfg.b if cfg.b is not None else float(cfg.source_rates(topology)[0])
    rows = bound_rows(topology, cfg, axis, values, b)
    _write(args.out, format_csv(rows, _header(cfg, (f"axis {axis}", f"b {b:g} channel uses per sample"))))
    return EXIT_OK


# --- figure recipes ------------------------------------------------------------------------------

def _design_code(topology, qs, rr, scheme, design_snrs, cfg):
    return design(topology, qs, rr, scheme, design_snrs, cfg.schedule()).code


def _recipe_snr_rd(topology, sd_operation, rr_list, cfg, quick):
    """RSNR against relay-destination SNR for the schemes compared in the basic figures."""
    values = [-4.0, 4.0, 10.0, 16.0] if quick else parse_values("-4:16:2")
    qs = tuple(design_lloyd_max(3, cfg.variance) for _ in range(topology.num_sources))
    rows, codes = [], {}
    for rr, schemes in rr_list:
        for scheme, design_sd in schemes:
            label = f"{scheme}-rr{rr}-design{design_sd:g}dB"
            code = _design_code(topology, qs, rr, scheme, ChannelSnrs(design_sd, 10.0, 7.0), cfg)
            codes[label] = code_document(code, topology, qs)
            inst = SystemInstance(topology, qs, code, ChannelSnrs(sd_operation, 10.0, 7.0),
                                  "hard" if cfg.mode == "exact" else cfg.mode)
            rows += _rows_for(inst, "snr_rd", values, cfg, label)
    return rows, codes


BASIC = [("dnnc-c3", -3.0), ("dnnc-c3", 1.0), ("dnnc-c4", -3.0), ("structured", -3.0), ("dlnc", -3.0)]


def _recipe_rate(topology, cfg, quick):
    rates = [2, 3] if quick else [2, 3, 4]
    design_snrs = ChannelSnrs(-3.0, 10.0, 7.0)
    rows, codes = [], {}
    for scheme in ("dnnc-c3", "dlnc"):
        for rate in rates:
            qs = tuple(design_lloyd_max(rate, cfg.variance) for _ in range(topology.num_sources))
            code = _design_code(topology, qs, rate, scheme, design_snrs, cfg)
            codes[f"{scheme}-r{rate}"] = code_document(code, topology, qs)
            inst = SystemInstance(topology, qs, code, design_snrs, "hard" if cfg.mode == "exact" else cfg.mode)
            rows += _rows_for(inst, "snr_rd", [7.0], cfg, scheme)
            rows[-1]["axis_value"] = rate
    return rows, codes


def _recipe_fig9(cfg, quick):
    topology = make_preset("otnbr23")
    values = [-6.0, 0.0, 6.0, 12.0] if quick else parse_values("-6:12:2")
    qs = tuple(design_lloyd_max(3, cfg.variance) for _ in range(2))
    design_snrs = ChannelSnrs(-3.0, 10.0, 7.0)
    rows, codes = [], {}
    for scheme in ("structured", "dlnc"):
        code = _design_code(topology, qs, 3, scheme, design_snrs, cfg)
        codes[scheme] = code_document(code, topology, qs)
        inst = SystemInstance(topology, qs, code, design_snrs, "hard" if cfg.mode == "exact" else cfg.mode)
        rows += _rows_for(inst, "snr_sd", values, cfg, scheme)
    bcfg = ExperimentConfig(snr_sr=10.0, snr_rd=7.0, variance=cfg.variance)
    b = cfg.b if cfg.b is not None else 3.0
    for r in bound_rows(topology, bcfg, "snr_sd", values, b):
        r["curve"] = f"bound-b{b:g}"
        rows.append(r)
    return rows, codes


FIGURES = {
    "fig3": lambda cfg, q: _recipe_snr_rd(make_preset("omcbr", 2), -3.0, [(3, BASIC)], cfg, q),
    "fig4": lambda cfg, q: _recipe_snr_rd(make_preset("omarc", 2), -3.0, [(3, BASIC)], cfg, q),
    "fig5": lambda cfg, q: _recipe_snr_rd(make_preset("omarc", 2), 1.0, [(3, BASIC)], cfg, q),
    "fig6": lambda cfg, q: _recipe_snr_rd(
        make_preset("omcbr", 3), -3.0,
        [(5, [("dnnc-c3", -3.0), ("dnnc-c4", -3.0), ("structured", -3.0), ("dlnc", -3.0)]),
         (3, [("dnnc-c3", -3.0), ("dlnc", -3.0)])], cfg, q),
    "fig7": lambda cfg, q: _recipe_rate(make_preset("omarc", 2), cfg, q),
    "fig8": lambda cfg, q: _recipe_rate(make_preset("otnbr23"), cfg, q),
    "fig9": lambda cfg, q: _recipe_fig9(cfg, q),
}


def cmd_reproduce(args, cfg: ExperimentConfig) -> int:
    if args.figure not in FIGURES:
        raise ConfigError(f"figure: unknown id {args.figure!r}; choose from {', '.join(FIGURES)}")
    rows, codes = FIGURES[args.figure](cfg, args.quick)
    out_dir = Path(args.out_dir or args.figure)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = ("curve",) + CURVE_COLUMNS
    _write(str(out_dir / f"{args.figure}.csv"),
           format_csv(rows, _header(cfg, (f"figure {args.figure}", f"mode {cfg.mode}")), columns))
    for label, doc in codes.items():
        _write(str(out_dir / f"{args.figure}-{label}.json"), json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(rows)} rows to {out_dir / (args.figure + '.csv')}")
    return EXIT_OK


# --- argument parsing ------------------------------------------------------------------------------

_VALUE_LIKE = re.compile(r"^-\d[\d.]*([:,]-?[\d.]+)+$")


def _shield_values(argv: list[str]) -> list[str]:
    """Keep range arguments such as ``-6:12:1`` from being read as options."""
    return [" " + a if _VALUE_LIKE.match(a) else a for a in argv]


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON experiment configuration")
    p.add_argument("--preset", choices=["omarc", "omcbr", "otnbr23"])
    p.add_argument("--n", type=int, help="number of sources for omarc/omcbr")
    p.add_argument("--r", type=int, help="quantizer rate of every source")
    p.add_argument("--rr", type=int, help="relay rate in bits")
    p.add_argument("--scheme", choices=SCHEMES)
    p.add_argument("--snr-sd", dest="snr_sd", type=float)
    p.add_argument("--snr-sr", dest="snr_sr", type=float)
    p.add_argument("--snr-rd", dest="snr_rd", type=float)
    p.add_argument("--samples", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["soft", "hard", "exact"])
    p.add_argument("--alpha", type=float, help="annealing cooling factor")
    p.add_argument("--t0", type=float, help="annealing start temperature")
    p.add_argument("--max-temps", dest="max_temps", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otnbr", description="Relay network code design and evaluation")
    parser.add_argument("--version", action="version", version=f"otnbr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="design a relay code")
    _common(p)
    p.add_argument("--out", help="code JSON path (default code.json)")
    p.add_argument("--trace", help="annealing trace CSV path")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("eval", help="evaluate a stored code at one operating point")
    _common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="evaluate a stored code along an SNR axis")
    _common(p)
    p.add_argument("--code", required=True)
    p.add_argument("--axis", required=True, choices=sorted(AXIS_FLAGS))
    p.add_argument("--values", required=True, help="start:stop:step or a comma list")
    p.add_argument("--out")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="separate source/channel-network distortion bound")
    _common(p)
    p.add_argument("--sweep", nargs=2, metavar=("AXIS", "VALUES"))
    p.add_argument("--b", type=float, help="channel uses per source sample (default: the quantizer rate)")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("reproduce", help="run a figure recipe")
    _common(p)
    p.add_argument("figure")
    p.add_argument("--out-dir", dest="out_dir")
    p.add_argument("--quick", action="store_true", help="fewer points for a smoke run")
    p.add_argument("--b", type=float)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _overrides(args) -> tuple[dict, dict]:
    keys = ("preset", "n", "r", "rr", "scheme", "snr_sd", "snr_sr", "snr_rd", "samples", "seed", "mode", "b")
    out = {k: getattr(args, k, None) for k in keys}
    anneal = {k: getattr(args, k) for k in ("alpha", "t0", "max_temps") if getattr(args, k, None) is not None}
    return out, anneal


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(_shield_values(argv))
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if getattr(args, "values", None):
        args.values = args.values.strip()
    if getattr(args, "sweep", None):
        args.sweep = [a.strip() for a in args.sweep]
    try:
        overrides, anneal = _overrides(args)
        cfg = ExperimentConfig.from_sources(args.config, overrides)
        if anneal:
            cfg.anneal = {**cfg.anneal, **anneal}
            cfg.check()
        if args.command == "bound" and args.preset is None and args.config is None:
            cfg.preset = "otnbr23"
        return args.func(args, cfg)
    except (ConfigError, TopologyError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
