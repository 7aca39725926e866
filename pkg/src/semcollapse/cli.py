"""Command-line front end: ``semcollapse {align,bench,verify,traceplot,serve}``.

Settings come from three layers, later ones winning: built-in defaults, an
optional ``--config`` INI file (a ``[common]`` section plus one section per
subcommand, keys spelled like the long flags with underscores), and flags.
Every run writes into ``--out``: a ``config.ini`` snapshot plus the
subcommand's artifacts. Identical settings give byte-identical files.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import logging
import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .alignment import KNOWN_FAULTS, NoiseSpec
from .bench.backend import BackendServer, ExternalBackend
from .bench.decoding import DecodeConfig
from .bench.runner import BenchConfig, fmt, read_trace, run_benchmark, write_plot_series, write_summary, write_trace
from .bench.toy import ToyModel
from .entropy import Ensemble, ensemble_conditional_entropy
from .errors import InputError, SemCollapseError
from .experiments import ENTROPY_CHECKPOINTS, default_trajectories, run_trajectory
from .manifold import MANIFOLDS, make_manifold
from .verify import SUITES, report_csv, report_text, run_verify

log = logging.getLogger("semcollapse")

COMMANDS = ("align", "bench", "verify", "traceplot", "serve")
ALIGN_TRAJECTORIES = ("flow", "deterministic", "stochastic")
BENCH_TRAJECTORIES = ("smooth_greedy", "stochastic_tp")


@dataclass(frozen=True)
class RunConfig:
    command: str = "verify"
    out: str = "out"
    seed: int = 0
    workers: int = 1
    # alignment
    manifold: str = "euclidean"
    dim: int = 2
    trajectory: str = "all"
    agents: int = 16
    seeds: int = 10
    steps: int = 10_000
    alpha: float = 0.1
    alpha0: float = 0.3
    lam: float = 0.05
    sigma: float = 0.1
    noise_scaled: bool = True
    dt: float = 1e-3
    tol: float = 1e-8
    stochastic_tol: float = 1e-2
    bin_width: float = 0.01
    # benchmark
    rounds: int = 6
    max_tokens: int = 48
    temperature: float = 0.7
    top_p: float = 0.9
    top_k: int = 40
    backend: str = "toy"
    endpoint: str = "127.0.0.1:8765"
    timeout: float = 60.0
    # verify / traceplot / serve
    suite: str = "all"
    fault: str = ""
    trace: str = ""
    host: str = "127.0.0.1"
    port: int = 8765


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}

# keys accepted per subcommand (besides the common ones)
COMMON_KEYS = ("out", "seed", "workers")
COMMAND_KEYS = {
    "align": ("manifold", "dim", "trajectory", "agents", "seeds", "steps", "alpha", "alpha0", "lam", "sigma",
              "noise_scaled", "dt", "tol", "stochastic_tol", "bin_width"),
    "bench": ("agents", "rounds", "max_tokens", "temperature", "top_p", "top_k", "backend", "endpoint", "timeout",
              "trajectory"),
    "verify": ("suite", "fault"),
    "traceplot": ("trace",),
    "serve": ("host", "port"),
}  # fmt: skip

# (lower, upper, lower inclusive) for numeric fields
RANGES = {
    "seed": (0, math.inf, True),
    "workers": (1, 256, True),
    "dim": (1, math.inf, True),
    "agents": (1, math.inf, True),
    "seeds": (1, math.inf, True),
    "steps": (1, math.inf, True),
    "alpha": (0, math.inf, False),
    "alpha0": (0, math.inf, False),
    "lam": (0, math.inf, False),
    "sigma": (0, math.inf, True),
    "dt": (0, math.inf, False),
    "tol": (0, math.inf, False),
    "stochastic_tol": (0, math.inf, False),
    "bin_width": (0, math.inf, False),
    "rounds": (1, math.inf, True),
    "max_tokens": (0, math.inf, True),
    "temperature": (0, math.inf, False),
    "top_p": (0, 1, False),
    "top_k": (0, math.inf, True),
    "timeout": (0, math.inf, False),
    "port": (0, 65535, True),
}


def _convert(key: str, raw):
    kind = FIELD_TYPES[key]
    if not isinstance(raw, str):
        return raw
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise InputError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw.strip()


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.command not in COMMANDS:
        raise InputError(f"command must be one of {COMMANDS}, got {cfg.command!r}")
    for key, (lo, hi, closed) in RANGES.items():
        v = getattr(cfg, key)
        below = v < lo if closed else v <= lo
        if not math.isfinite(v) or below or v > hi:
            left = "[" if closed else "("
            raise InputError(f"{key} = {v!r} is out of range; valid range {left}{lo}, {hi}]")
    if cfg.manifold not in MANIFOLDS:
        raise InputError(f"manifold must be one of {sorted(MANIFOLDS)}, got {cfg.manifold!r}")
    if cfg.manifold == "sphere" and cfg.dim < 2:
        raise InputError("dim must be >= 2 for the sphere (ambient dimension)")
    if cfg.backend not in ("toy", "external"):
        raise InputError(f"backend must be 'toy' or 'external', got {cfg.backend!r}")
    valid_traj = ALIGN_TRAJECTORIES if cfg.command == "align" else BENCH_TRAJECTORIES
    if cfg.trajectory != "all" and any(t not in valid_traj for t in _split(cfg.trajectory)):
        raise InputError(f"trajectory must be 'all' or a comma list of {valid_traj}, got {cfg.trajectory!r}")
    if cfg.suite != "all" and any(s not in SUITES for s in _split(cfg.suite)):
        raise InputError(f"suite must be 'all' or a comma list of {SUITES}, got {cfg.suite!r}")
    if cfg.fault and cfg.fault not in KNOWN_FAULTS:
        raise InputError(f"fault must be one of {KNOWN_FAULTS}, got {cfg.fault!r}")
    if cfg.command == "traceplot" and not cfg.trace:
        raise InputError("traceplot needs trace (path to a trace file)")
    return cfg


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def read_config_file(path: str | Path, command: str) -> dict:
    parser = configparser.ConfigParser(interpolation=None)
    path = Path(path)
    if not path.is_file():
        raise InputError(f"config file not found: {path}")
    parser.read(path, encoding="utf-8")
    valid = set(COMMON_KEYS) | set(COMMAND_KEYS[command])
    values = {}
    for section in ("common", command):
        if not parser.has_section(section):
            continue
        allowed = set(COMMON_KEYS) if section == "common" else valid
        for key, raw in parser.items(section):
            if key not in allowed:
                raise InputError(f"unknown key {key!r} in [{section}]; valid keys: {', '.join(sorted(allowed))}")
            values[key] = _convert(key, raw)
    unknown = [s for s in parser.sections() if s != "common" and s not in COMMANDS]
    if unknown:
        raise InputError(f"unknown section(s) {unknown}; valid: common, {', '.join(COMMANDS)}")
    return values


def parse_config(argv: list[str] | None = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config", None)
    args.pop("verbose", None)
    values = read_config_file(config_path, command) if config_path else {}
    values.update({k: _convert(k, v) for k, v in args.items() if v is not None})
    return validate(RunConfig(command=command, **values))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="semcollapse", description="Anchor-alignment simulations and collapse benchmark.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    help_text = {
        "align": "simulate agents aligning to a fixed anchor",
        "bench": "run the multi-round collapse benchmark",
        "verify": "run the bundled invariant checks",
        "traceplot": "emit plot series from a trace file",
        "serve": "serve the toy model over the backend protocol",
    }
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=help_text[cmd], argument_default=None)
        sp.add_argument("--config", help="INI file with [common] and per-command sections")
        for key in COMMON_KEYS + COMMAND_KEYS[cmd]:
            kind = FIELD_TYPES[key]
            extra = {"choices": sorted(MANIFOLDS)} if key == "manifold" else {}
            if key == "backend":
                extra = {"choices": ["toy", "external"]}
            sp.add_argument("--" + key.replace("_", "-"), dest=key, metavar=kind.upper(), **extra)
    return p


def write_config_snapshot(cfg: RunConfig, out: Path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser["common"] = {k: str(getattr(cfg, k)) for k in COMMON_KEYS}
    parser[cfg.command] = {k: str(getattr(cfg, k)) for k in COMMAND_KEYS[cfg.command]}
    buf = io.StringIO()
    parser.write(buf)
    (out / "config.ini").write_text(buf.getvalue(), encoding="utf-8")


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


# -- commands -----------------------------------------------------------------------------------


def cmd_align(cfg: RunConfig, out: Path) -> int:
    M = make_manifold(cfg.manifold, cfg.dim)
    specs = default_trajectories(cfg.alpha, cfg.alpha0, cfg.lam, cfg.sigma, cfg.dt)
    specs["stochastic"] = replace(specs["stochastic"], noise=NoiseSpec(cfg.sigma, cfg.noise_scaled))
    names = ALIGN_TRAJECTORIES if cfg.trajectory == "all" else _split(cfg.trajectory)
    checkpoints = sorted({c for c in ENTROPY_CHECKPOINTS if c <= cfg.steps} | {cfg.steps})
    summary = []
    for name in names:
        anchor, run = run_trajectory(M, specs[name], cfg.agents, cfg.seeds, cfg.steps, cfg.seed, checkpoints)
        d = run.distances
        rows = (
            (t, float(run.times[t]), float(d[t].mean()), float(np.sum(d[t] ** 2)), float(np.mean(0.5 * d[t] ** 2)))
            for t in range(len(d))
        )
        (out / f"align_{name}.csv").write_text(
            _csv_text(("step", "time", "distance_to_anchor", "loss", "lyapunov"), rows), encoding="utf-8"
        )
        ent_rows = []
        for c in checkpoints:
            e = Ensemble(M, anchor.point, run.snapshots[c])
            h = ensemble_conditional_entropy(e, "histogram", cfg.bin_width)
            ent_rows.append((c, "histogram", h.value, fmt(cfg.bin_width)))
            if len(run.snapshots[c]) >= 2:
                g = ensemble_conditional_entropy(e, "gaussian")
                ent_rows.append((c, "gaussian", "degenerate" if g.degenerate else g.value, ";".join(fmt(v) for v in g.parameter)))
        (out / f"entropy_{name}.csv").write_text(
            _csv_text(("checkpoint", "method", "value", "parameter"), ent_rows), encoding="utf-8"
        )
        final = d[-1]
        tol = cfg.stochastic_tol if name == "stochastic" else cfg.tol
        summary.append((name, len(final), float(final.max()), float(final.mean()), tol, int(np.sum(final <= tol))))
        log.info("%s: max final distance %.3g", name, final.max())
    text = _csv_text(("trajectory", "agents", "max_final_distance", "mean_final_distance", "tol", "within_tol"), summary)
    (out / "align_summary.csv").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0


def _bench_model(cfg: RunConfig):
    if cfg.backend == "toy":
        return ToyModel()
    return ExternalBackend(cfg.endpoint, cfg.timeout)


def cmd_bench(cfg: RunConfig, out: Path) -> int:
    trajectories = (
        ("smooth_greedy", DecodeConfig.greedy()),
        ("stochastic_tp", DecodeConfig.stochastic(cfg.temperature, cfg.top_p, cfg.top_k)),
    )
    if cfg.trajectory != "all":
        keep = _split(cfg.trajectory)
        trajectories = tuple(t for t in trajectories if t[0] in keep)
    bcfg = BenchConfig(
        agents=cfg.agents, rounds=cfg.rounds, max_tokens=cfg.max_tokens, seed=cfg.seed,
        trajectories=trajectories, workers=cfg.workers,
    )  # fmt: skip
    model = _bench_model(cfg)
    try:
        result = run_benchmark(bcfg, model)
    finally:
        if hasattr(model, "close"):
            model.close()
    write_trace(result.trace, out / "trace.csv")
    (out / "anchor.txt").write_text(result.anchor_text + "\n", encoding="utf-8")
    if result.trace:
        write_plot_series(result.trace, out)
    if result.failed:
        (out / "status.txt").write_text(f"failed\n{result.error}\n", encoding="utf-8")
        print(f"benchmark failed: {result.error}", file=sys.stderr)
        return 1
    summary = write_summary(result.summary, out / "summary.csv")
    (out / "status.txt").write_text("ok\n", encoding="utf-8")
    print(summary, end="")
    return 0


def cmd_verify(cfg: RunConfig, out: Path) -> int:
    suites = SUITES if cfg.suite == "all" else tuple(_split(cfg.suite))
    results = run_verify(suites, cfg.seed, cfg.fault or None)
    (out / "verify_report.csv").write_text(report_csv(results), encoding="utf-8")
    text = report_text(results)
    (out / "verify_report.txt").write_text(text, encoding="utf-8")
    print(text, end="")
    return 0 if all(r.passed for r in results) else 1


def cmd_traceplot(cfg: RunConfig, out: Path) -> int:
    rows = read_trace(Path(cfg.trace))
    for path in write_plot_series(rows, out):
        print(path)
    return 0


def cmd_serve(cfg: RunConfig, out: Path) -> int:
    server = BackendServer(ToyModel(), cfg.host, cfg.port)
    print(f"serving toy model on {server.endpoint}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


HANDLERS = {"align": cmd_align, "bench": cmd_bench, "verify": cmd_verify, "traceplot": cmd_traceplot, "serve": cmd_serve}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(level=logging.INFO if "-v" in argv or "--verbose" in argv else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")  # fmt: skip
    try:
        cfg = parse_config(argv)
        out = Path(cfg.out)
        if cfg.command != "serve":
            out.mkdir(parents=True, exist_ok=True)
            write_config_snapshot(cfg, out)
        return HANDLERS[cfg.command](cfg, out)
    except (SemCollapseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
