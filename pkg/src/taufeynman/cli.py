"""Command line experiments writing CSV tables.

    taufeynman converge     --config cfg.json [--out results.csv] [--threads k]
    taufeynman tau-compare  ...
    taufeynman mc-validate  ...
    taufeynman norm-growth  ...
    taufeynman hff-check    ...

Every run uses the datum phi(q) = exp(-q^2 / 2) and reads point values at
q = 0.  Exit status: 0 on success, 2 for invalid configuration or refused
work, 3 when a numerical guard aborts an iteration.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np

from .feynman_kac import mc_estimate, mc_estimate_girsanov
from .phase_space import hff_evaluate
from .reference import ConstantCoeffProblem, GaussianMixture
from .semigroup import (
    GridFunction,
    GridSpec,
    NumericalGuardError,
    chernoff_iterate,
    l1_growth,
    l1_rate_bound,
    quantization_step_gap,
)
from .symbols import PRESETS, HamiltonSymbol, LevySpec, preset, tau_transform

log = logging.getLogger("taufeynman")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GUARD = 3

DEFAULT_SWEEP = [1, 2, 4, 8, 16, 32, 64]

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["preset", "t", "grid"],
    "properties": {
        "preset": {"enum": list(PRESETS)},
        "tau": {"type": "number", "minimum": 0, "maximum": 1},
        "t": {"type": "number", "exclusiveMinimum": 0},
        "grid": {
            "type": "object",
            "additionalProperties": False,
            "required": ["min", "max", "points"],
            "properties": {
                "min": {"type": "number"},
                "max": {"type": "number"},
                "points": {"type": "integer", "minimum": 16, "maximum": 8192},
            },
        },
        "n_sweep": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 1},
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "paths": {"type": "integer", "minimum": 100},
                "steps": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "levy": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["y", "w"],
                "properties": {
                    "y": {"type": "number", "not": {"const": 0}},
                    "w": {"type": "number", "exclusiveMinimum": 0},
                },
            },
        },
        "out": {"type": "string"},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    preset: str
    t: float
    grid: GridSpec
    tau: float = 1.0
    n_sweep: list[int] = field(default_factory=lambda: list(DEFAULT_SWEEP))
    mc_paths: int = 100_000
    mc_steps: int = 64
    mc_seed: int = 0
    levy: list[tuple[float, float]] = field(default_factory=list)
    out: str | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, CONFIG_SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigError(f"{where}: {exc.message}") from None
        g = raw["grid"]
        if not g["min"] < g["max"]:
            raise ConfigError("grid: min must be below max")
        mc = raw.get("mc", {})
        return cls(
            preset=raw["preset"],
            t=float(raw["t"]),
            grid=GridSpec(float(g["min"]), float(g["max"]), int(g["points"])),
            tau=float(raw.get("tau", 1.0)),
            n_sweep=list(raw.get("n_sweep", DEFAULT_SWEEP)),
            mc_paths=int(mc.get("paths", 100_000)),
            mc_steps=int(mc.get("steps", 64)),
            mc_seed=int(mc.get("seed", 0)),
            levy=[(float(a["y"]), float(a["w"])) for a in raw.get("levy", [])],
            out=raw.get("out"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_dict(raw)

    @property
    def levy_spec(self) -> LevySpec | None:
        return LevySpec.from_pairs(self.levy, 1) if self.levy else None

    def symbol(self) -> HamiltonSymbol:
        return preset(self.preset, self.levy_spec)


def datum(q: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * q[..., 0] ** 2)


def _sample(cfg: ExperimentConfig) -> GridFunction:
    try:
        return cfg.grid.sample(datum)
    except ValueError as exc:
        raise ConfigError(f"datum does not fit the grid: {exc}") from None


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".16e")


def _table(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def run_converge(cfg: ExperimentConfig, threads: int | None = None) -> str:
    """Rows (n, l1_error_vs_reference, l1_norm, wall_ms).

    The reference is the exact Gaussian (mixture) solution for the constant
    preset and the run at n = 2 max(n_sweep) otherwise.
    """
    H = cfg.symbol()
    f = _sample(cfg)
    if cfg.preset == "constant":
        Q = H.quad
        x0 = np.zeros((1, 1))
        prob = ConstantCoeffProblem(Q.A(x0)[0], Q.b(x0)[0], float(Q.c(x0)[0]), cfg.levy_spec)
        mix, _ = GaussianMixture.single().evolve(prob, cfg.t)
        ref = GridFunction(cfg.grid, mix(cfg.grid.nodes()))
    else:
        ref = chernoff_iterate(H, cfg.tau, cfg.t, 2 * max(cfg.n_sweep), f, threads=threads)
    rows = []
    for n in cfg.n_sweep:
        t0 = time.perf_counter()
        u = chernoff_iterate(H, cfg.tau, cfg.t, n, f, threads=threads)
        ms = 1e3 * (time.perf_counter() - t0)
        rows.append([n, (u - ref).l1_norm(), u.l1_norm(), ms])
        log.info("converge n=%d done in %.1f ms", n, ms)
    return _table(["n", "l1_error_vs_reference", "l1_norm", "wall_ms"], rows)


def run_tau_compare(cfg: ExperimentConfig, threads: int | None = None) -> str:
    """Rows (n, gap_tau_pair, gap_transformed, step_gap).

    gap_tau_pair compares tau with its partner (1, or 0 when tau = 1) on the
    same symbol; gap_transformed compares the tau iteration of H with the
    qp (tau = 1) iteration of tau_transform(H, tau); step_gap is the
    single-step gap of the pair at t / n.
    """
    H = cfg.symbol()
    Ht = tau_transform(H, cfg.tau)
    partner = 1.0 if cfg.tau < 1.0 else 0.0
    f = _sample(cfg)
    rows = []
    for n in cfg.n_sweep:
        u = chernoff_iterate(H, cfg.tau, cfg.t, n, f, threads=threads)
        v = chernoff_iterate(H, partner, cfg.t, n, f, threads=threads)
        w = chernoff_iterate(Ht, 1.0, cfg.t, n, f, threads=threads)
        step = quantization_step_gap(H, cfg.tau, partner, cfg.t / n, f, threads=threads)
        rows.append([n, (u - v).l1_norm(), (u - w).l1_norm(), step])
    return _table(["n", "gap_tau_pair", "gap_transformed", "step_gap"], rows)


def run_mc_validate(cfg: ExperimentConfig, threads: int | None = None) -> str:
    """Rows (estimator, mean, stderr, grid_value, z_score) at q = 0.

    ``drift`` simulates the tau-transformed jump diffusion; ``girsanov`` (no
    jumps only) reweights driftless paths of the transformed qp symbol.  The
    grid value is the tau iteration with n = mc.steps.
    """
    H = cfg.symbol()
    f = _sample(cfg)
    grid_value = float(np.real(chernoff_iterate(H, cfg.tau, cfg.t, cfg.mc_steps, f,
                                                threads=threads).at(0.0)))
    q0 = np.zeros(1)
    rows = []
    m, se = mc_estimate(H, cfg.tau, cfg.t, q0, datum, cfg.mc_steps, cfg.mc_paths, cfg.mc_seed,
                        threads=threads)
    rows.append(["drift", m, se, grid_value, (m - grid_value) / se if se > 0 else math.nan])
    if not H.has_jumps:
        Ht = tau_transform(H, cfg.tau)
        m, se = mc_estimate_girsanov(Ht, cfg.t, q0, datum, cfg.mc_steps, cfg.mc_paths,
                                     cfg.mc_seed, threads=threads)
        rows.append(["girsanov", m, se, grid_value,
                     (m - grid_value) / se if se > 0 else math.nan])
    return _table(["estimator", "mean", "stderr", "grid_value", "z_score"], rows)


def run_norm_growth(cfg: ExperimentConfig, threads: int | None = None) -> str:
    """Rows (n, t_step, k_emp, k_bound) with t_step = t / n.

    k_emp = log(||F_tau(t_step) phi||_1 / ||phi||_1) / t_step and
    k_bound = max(0, -min(c - tau div b - tau^2 tr Hess A)) over the grid, the
    rate for the L1 norm of the tau-ordered step (it reduces to -min c at tau = 0).
    """
    H = cfg.symbol()
    f = _sample(cfg)
    k_bound = l1_rate_bound(H, cfg.tau, cfg.grid)
    rows = []
    for n in cfg.n_sweep:
        ts = cfg.t / n
        rows.append([n, ts, l1_growth(H, cfg.tau, ts, f, threads=threads), k_bound])
    return _table(["n", "t_step", "k_emp", "k_bound"], rows)


def run_hff_check(cfg: ExperimentConfig, threads: int | None = None) -> str:
    """Rows (n, hff_value, lff_value, abs_diff) at the anchor x = 0."""
    H = cfg.symbol()
    f = _sample(cfg)
    rows = []
    for n in cfg.n_sweep:
        hv = hff_evaluate(H, cfg.tau, cfg.t, n, f, 0.0, cfg.grid)
        lv = chernoff_iterate(H, cfg.tau, cfg.t, n, f, threads=threads).at(0.0)
        rows.append([n, float(np.real(hv)), float(np.real(lv)), abs(hv - lv)])
    return _table(["n", "hff_value", "lff_value", "abs_diff"], rows)


COMMANDS = {
    "converge": run_converge,
    "tau-compare": run_tau_compare,
    "mc-validate": run_mc_validate,
    "norm-growth": run_norm_growth,
    "hff-check": run_hff_check,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="taufeynman", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__.split("\n")[0])
        p.add_argument("--config", required=True, help="JSON experiment configuration")
        p.add_argument("--out", help="CSV destination (default: config 'out', else stdout)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (default: all cores); results do not depend on it")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.threads is not None and args.threads < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = ExperimentConfig.load(args.config)
        text = COMMANDS[args.command](cfg, threads=args.threads)
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.out
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
