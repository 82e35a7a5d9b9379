"""Command-line front end.

Usage::

    apqfluid simulate-apq config.json [--seed N] [--output-dir DIR] [--allow-unstable]
    apqfluid simulate-tandem config.json
    apqfluid verify-mapping config.json [--perturb-fluid-mu FACTOR]
    apqfluid estimate-stationary config.json

Exit codes: 0 success, 1 config error, 2 instability, 3 I/O error,
4 insufficient data, 5 verification failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import InsufficientDataError, ParameterError, ValidationError
from .apq import ApqParams, StabilityError, simulate_apq
from .fluid import down_phase_decrements, embedded_at_down_to_up, fluid_category, simulate_tandem
from .mapping import (
    compare_embedded,
    embedded_pair,
    lemma_jump_reports,
    map_phase_type,
    perturb_service_rate,
    simulate_matched,
    verify_lemma_during,
)
from .mpp import build_mpp, default_burn_in, embedded_samples
from .stochastics import RandomStream

EXIT_OK, EXIT_CONFIG, EXIT_UNSTABLE, EXIT_IO, EXIT_DATA, EXIT_FAILED = range(6)
SEED_ENV = "APQFLUID_SEED"
TWO_SAMPLE_PASS = 0.9
ONE_SAMPLE_PASS = 0.95


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    apq: ApqParams
    n_departures: int = 10_000
    n_down_cycles: int = 10_000
    burn_in: int | None = None
    seed: int = 0
    significance: float = 0.01
    g_bins: int = 50
    f_bins: tuple = (30, 30)
    output_dir: str = "."
    replications: int = 20
    n_during: int = 10_000
    allow_unstable: bool = False
    fluid_mu_factor: float = 1.0
    raw: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_dict(cls, cfg: dict) -> "ExperimentConfig":
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        if "apq" not in cfg:
            raise ConfigError("config needs an 'apq' section")
        try:
            apq = ApqParams.from_config(cfg["apq"])
        except (ParameterError, ValidationError, TypeError) as exc:
            raise ConfigError(f"apq: {exc}") from None
        bins = cfg.get("bins", {})
        n_dep = cfg.get("n_departures", 10_000)
        out = cls(
            apq=apq,
            n_departures=n_dep,
            n_down_cycles=cfg.get("n_down_cycles", n_dep),
            burn_in=cfg.get("burn_in"),
            seed=cfg.get("seed", 0),
            significance=cfg.get("significance", 0.01),
            g_bins=bins.get("g", 50),
            f_bins=tuple(bins.get("f", (30, 30))),
            output_dir=cfg.get("output_dir", "."),
            replications=cfg.get("replications", 20),
            n_during=cfg.get("n_during", 10_000),
            allow_unstable=bool(cfg.get("allow_unstable", False)),
            fluid_mu_factor=cfg.get("diagnostics", {}).get("fluid_mu_factor", 1.0),
            raw=cfg,
        )
        out.check()
        return out

    def check(self):
        def count(name, v, lo):
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                raise ConfigError(f"{name} must be an integer >= {lo}, got {v!r}")
        count("n_departures", self.n_departures, 1)
        count("n_down_cycles", self.n_down_cycles, 1)
        count("replications", self.replications, 1)
        count("n_during", self.n_during, 1)
        count("seed", self.seed, 0)
        count("g_bins", self.g_bins, 1)
        if self.burn_in is not None:
            count("burn_in", self.burn_in, 0)
        if len(self.f_bins) != 2:
            raise ConfigError("bins.f must have two entries")
        for v in self.f_bins:
            count("bins.f", v, 1)
        if not isinstance(self.significance, (int, float)) or not 0 < self.significance < 1:
            raise ConfigError("significance must lie in (0, 1)")
        if not isinstance(self.fluid_mu_factor, (int, float)) or not self.fluid_mu_factor > 0:
            raise ConfigError("diagnostics.fluid_mu_factor must be positive")

    def resolved(self) -> dict:
        return {
            "apq": self.apq.to_config(),
            "n_departures": self.n_departures,
            "n_down_cycles": self.n_down_cycles,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "significance": self.significance,
            "bins": {"g": self.g_bins, "f": list(self.f_bins)},
            "replications": self.replications,
            "n_during": self.n_during,
            "allow_unstable": self.allow_unstable,
            "diagnostics": {"fluid_mu_factor": self.fluid_mu_factor},
        }

    def header(self) -> str:
        return "# apqfluid seed={} params={}".format(
            self.seed, json.dumps(self.resolved(), sort_keys=True, separators=(",", ":")))


def load_config(path: str, args) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}")
    if isinstance(raw, dict):
        raw = dict(raw)
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                raw["seed"] = int(env)
            except ValueError:
                raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.output_dir is not None:
            raw["output_dir"] = args.output_dir
        if args.allow_unstable:
            raw["allow_unstable"] = True
        if getattr(args, "perturb_fluid_mu", None) is not None:
            raw.setdefault("diagnostics", {})
            raw["diagnostics"] = dict(raw["diagnostics"], fluid_mu_factor=args.perturb_fluid_mu)
    return ExperimentConfig.from_dict(raw)


def _write(outdir: Path, files: dict):
    outdir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(outdir / name, "w", newline="") as fh:
            fh.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _proportions(values, labels) -> dict:
    n = len(values)
    return {str(k): (float(np.sum(values == k)) / n if n else 0.0) for k in labels}


def cmd_simulate_apq(cfg: ExperimentConfig) -> int:
    if not cfg.allow_unstable:
        cfg.apq.check_stable()
    burn = default_burn_in(cfg.n_departures) if cfg.burn_in is None else cfg.burn_in
    log = simulate_apq(cfg.apq, cfg.n_departures + burn, RandomStream(cfg.seed, 0),
                       allow_unstable=cfg.allow_unstable)
    path = build_mpp(log, cfg.apq)
    emb = embedded_samples(path, burn)
    header = cfg.header()
    _write(Path(cfg.output_dir), {
        "eventlog.csv": log.to_csv(header),
        "jumps.csv": path.jumps_csv(header),
        "embedded.csv": emb.to_csv(header),
    })
    jt = path.jump_type[burn:]
    summary = {
        "seed": cfg.seed,
        "rho": cfg.apq.rho,
        "n_departures": int(jt.size),
        "burn_in": burn,
        "jump_type_proportions": _proportions(jt, (1, 2, 3)),
        "h": float(np.mean(emb.region == 0)),
    }
    print(_dump(summary), end="")
    return EXIT_OK


def cmd_simulate_tandem(cfg: ExperimentConfig) -> int:
    if not cfg.allow_unstable:
        cfg.apq.check_stable()
    burn = default_burn_in(cfg.n_down_cycles) if cfg.burn_in is None else cfg.burn_in
    tandem = map_phase_type(cfg.apq)
    path = simulate_tandem(tandem, cfg.n_down_cycles + burn, RandomStream(cfg.seed, 1))
    emb = embedded_at_down_to_up(path, burn, cfg.apq.b1 / cfg.apq.b2)
    header = cfg.header()
    _write(Path(cfg.output_dir), {
        "fluid_cycles.csv": path.cycles_csv(header),
        "embedded_fluid.csv": emb.to_csv(header),
    })
    cat = fluid_category(down_phase_decrements(path, burn))
    summary = {
        "seed": cfg.seed,
        "tandem": tandem.to_dict(),
        "n_down_cycles": int(cat.size),
        "burn_in": burn,
        "origin_mass": float(np.mean(emb.region == 0)),
        "censoring_proportions": dict(zip(
            ("x_survived", "x_drained_y_survived", "y_drained"),
            _proportions(cat, (1, 2, 3)).values())),
    }
    print(_dump(summary), end="")
    return EXIT_OK


def _replicate(cfg: ExperimentConfig, seed: int) -> list:
    tandem = None
    if cfg.fluid_mu_factor != 1.0:
        tandem = map_phase_type(perturb_service_rate(cfg.apq, cfg.fluid_mu_factor))
    run = simulate_matched(cfg.apq, cfg.n_departures, seed, burn_in=cfg.burn_in, tandem=tandem,
                           allow_unstable=cfg.allow_unstable)
    alpha = cfg.significance
    reports = verify_lemma_during(run.mpp, run.fluid, alpha, n=cfg.n_during, seed=seed)
    reports += lemma_jump_reports(run, alpha)
    d1, d2 = embedded_pair(run, cfg.g_bins, cfg.f_bins)
    reports += compare_embedded(d1, d2, alpha, seed=seed)
    return reports


def _threshold(name: str, reps: int) -> int:
    frac = ONE_SAMPLE_PASS if name.startswith("fluid_") else TWO_SAMPLE_PASS
    if name in ("during_slope_ratio",):
        frac = 1.0
    return math.ceil(frac * reps - 1e-9)


def cmd_verify_mapping(cfg: ExperimentConfig) -> int:
    if not cfg.allow_unstable:
        cfg.apq.check_stable()
    all_reports = []
    for r in range(cfg.replications):
        all_reports.extend(_replicate(cfg, cfg.seed + r))
    names = list(dict.fromkeys(rep.test_name for rep in all_reports))
    summary = {}
    ok = True
    for name in names:
        passes = sum(not rep.rejected for rep in all_reports if rep.test_name == name)
        need = _threshold(name, cfg.replications)
        summary[name] = {"passes": passes, "replications": cfg.replications, "required": need,
                         "passed": passes >= need}
        ok &= passes >= need
    report = {
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "tests": [_clean(rep.to_dict()) for rep in all_reports],
        "summary": {"tests": summary, "passed": ok},
    }
    _write(Path(cfg.output_dir), {"verify_report.json": _dump(report)})
    print(_dump({"seed": cfg.seed, "passed": ok,
                 "failed_tests": [n for n, s in summary.items() if not s["passed"]]}), end="")
    return EXIT_OK if ok else EXIT_FAILED


def _clean(d: dict) -> dict:
    return {k: (None if isinstance(v, float) and not math.isfinite(v) else v) for k, v in d.items()}


def _hist_csv(header: str, dists: dict) -> tuple:
    g_rows = [header, "source,bin_lo,bin_hi,mass"]
    f_rows = [header, "source,x_lo,x_hi,y_lo,y_hi,mass"]
    for src, d in dists.items():
        e = d.g_edges
        for i, m in enumerate(d.g):
            g_rows.append(f"{src},{e[i]!r},{e[i + 1]!r},{float(m)!r}")
        xe, ye = d.f_edges
        for i in range(xe.size - 1):
            for j in range(ye.size - 1):
                f_rows.append(f"{src},{xe[i]!r},{xe[i + 1]!r},{ye[j]!r},{ye[j + 1]!r},"
                              f"{float(d.f[i, j])!r}")
    return "\n".join(g_rows) + "\n", "\n".join(f_rows) + "\n"


def cmd_estimate_stationary(cfg: ExperimentConfig) -> int:
    if not cfg.allow_unstable:
        cfg.apq.check_stable()
    run = simulate_matched(cfg.apq, cfg.n_departures, cfg.seed, burn_in=cfg.burn_in,
                           allow_unstable=cfg.allow_unstable)
    d1, d2 = embedded_pair(run, cfg.g_bins, cfg.f_bins)
    reports = compare_embedded(d1, d2, cfg.significance, seed=cfg.seed)
    g_csv, f_csv = _hist_csv(cfg.header(), {"mpp": d1, "fluid": d2})
    out = {
        "seed": cfg.seed,
        "config": cfg.resolved(),
        "mpp": {"h": d1.h, "g_mass": float(d1.g.sum()), "f_mass": float(d1.f.sum()),
                "n_samples": d1.n_samples},
        "fluid": {"h": d2.h, "g_mass": float(d2.g.sum()), "f_mass": float(d2.f.sum()),
                  "n_samples": d2.n_samples},
        "l1_distance": d1.l1_distance(d2),
        "comparison": [rep.to_dict() for rep in reports],
    }
    _write(Path(cfg.output_dir), {"stationary.json": _dump(out), "g_hist.csv": g_csv,
                                  "f_hist.csv": f_csv})
    print(_dump({k: out[k] for k in ("seed", "mpp", "fluid", "l1_distance")}), end="")
    return EXIT_OK


COMMANDS = {
    "simulate-apq": cmd_simulate_apq,
    "simulate-tandem": cmd_simulate_tandem,
    "verify-mapping": cmd_verify_mapping,
    "estimate-stationary": cmd_estimate_stationary,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="apqfluid", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="JSON experiment config")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--output-dir", default=None)
        p.add_argument("--allow-unstable", action="store_true")
        if name == "verify-mapping":
            p.add_argument("--perturb-fluid-mu", type=float, default=None, metavar="FACTOR",
                           help="diagnostic: scale the fluid side's service rates")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSTABLE
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
