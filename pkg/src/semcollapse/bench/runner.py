"""Dataset-free semantic-collapse benchmark: orchestration and artifacts."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import astuple, dataclass, field, fields
from pathlib import Path
from typing import Sequence

from ..errors import BackendError, InputError
from ..rng import stream
from .context import CentralContext, DEFAULT_QUERY, anchor_prompt, build_prompt, compliance_score, dialects
from .decoding import DecodeConfig, generate_with_probs
from .metrics import collision_rate, fisher_rao, hash64, jaccard_similarity, kl_divergence, shannon_entropy, top1, unique_count

log = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "model_id", "seed", "agent", "trajectory", "round", "entropy", "top1",
    "fisher_rao", "kl", "compliance", "chars", "hash64",
)  # fmt: skip
SUMMARY_COLUMNS = (
    "trajectory", "unique_finals", "collision_rate", "jaccard_final_anchor",
    "jaccard_greedy_stochastic", "mean_compliance",
)  # fmt: skip

DEFAULT_TRAJECTORIES = (
    ("smooth_greedy", DecodeConfig.greedy()),
    ("stochastic_tp", DecodeConfig.stochastic()),
)


@dataclass(frozen=True)
class BenchConfig:
    agents: int = 16
    rounds: int = 6
    max_tokens: int = 48
    seed: int = 0
    dialects: tuple[str, ...] = ()
    query: str = DEFAULT_QUERY
    context: CentralContext = field(default_factory=CentralContext)
    trajectories: tuple[tuple[str, DecodeConfig], ...] = DEFAULT_TRAJECTORIES
    workers: int = 1

    def __post_init__(self):
        for name, lo in (("agents", 1), ("rounds", 1), ("max_tokens", 0), ("workers", 1), ("seed", 0)):
            v = getattr(self, name)
            if int(v) != v or v < lo:
                raise InputError(f"{name} must be an integer >= {lo}, got {v!r}")
        if not self.dialects:
            object.__setattr__(self, "dialects", dialects(self.agents))
        if len(self.dialects) != self.agents:
            raise InputError(f"need {self.agents} dialects, got {len(self.dialects)}")
        names = [n for n, _ in self.trajectories]
        if not names or len(set(names)) != len(names):
            raise InputError(f"trajectory names must be non-empty and unique, got {names}")


@dataclass(frozen=True)
class TraceRow:
    model_id: str
    seed: int
    agent: int
    trajectory: str
    round: int
    entropy: float
    top1: float
    fisher_rao: float
    kl: float
    compliance: float
    chars: int
    hash64: int


@dataclass(frozen=True)
class SummaryRow:
    trajectory: str
    unique_finals: int
    collision_rate: float
    jaccard_final_anchor: float
    jaccard_greedy_stochastic: float
    mean_compliance: float


@dataclass
class BenchResult:
    trace: list[TraceRow]
    summary: list[SummaryRow]
    anchor_text: str
    finals: dict[str, list[str]]
    failed: bool = False
    error: str | None = None


@dataclass
class _AgentOutcome:
    rows: list[TraceRow]
    final: str | None
    error: str | None = None


def _run_agent(model, cfg: BenchConfig, name: str, decode: DecodeConfig, agent: int, q, anchor_text: str, model_id: str):
    rng = stream(cfg.seed, name, agent)
    rows: list[TraceRow] = []
    text = ""
    try:
        for r in range(cfg.rounds):
            prompt = build_prompt(r, cfg.dialects[agent - 1], text, cfg.context.prompt, cfg.query)
            text, p = generate_with_probs(model, prompt, decode, cfg.max_tokens, rng)
            rows.append(
                TraceRow(
                    model_id, cfg.seed, agent, name, r,
                    shannon_entropy(p), top1(p), fisher_rao(p, q), kl_divergence(p, q),
                    compliance_score(text, cfg.context), len(text), hash64(text),
                )  # fmt: skip
            )
    except BackendError as exc:
        return _AgentOutcome(rows, None, f"trajectory {name} agent {agent}: {exc}")
    return _AgentOutcome(rows, text)


def summarize(
    finals: dict[str, list[str]],
    final_compliance: dict[str, list[float]],
    anchor_text: str,
    trajectories: Sequence[tuple[str, DecodeConfig]],
) -> list[SummaryRow]:
    greedy = next((n for n, c in trajectories if c.mode == "greedy"), None)
    stoch = next((n for n, c in trajectories if c.mode == "stochastic"), None)
    if greedy and stoch:
        cross = sum(jaccard_similarity(g, s) for g, s in zip(finals[greedy], finals[stoch])) / len(finals[greedy])
    else:
        cross = math.nan
    out = []
    for name, _ in trajectories:
        texts = finals[name]
        out.append(
            SummaryRow(
                name,
                unique_count(texts),
                collision_rate(texts),
                sum(jaccard_similarity(t, anchor_text) for t in texts) / len(texts),
                cross,
                sum(final_compliance[name]) / len(texts),
            )
        )
    return out


def run_benchmark(cfg: BenchConfig, model) -> BenchResult:
    """Run every trajectory for every agent over ``cfg.rounds`` rounds.

    Agents run on ``cfg.workers`` threads; each (trajectory, agent) pair owns
    its own PRNG stream, and rows are emitted sorted by (trajectory, agent,
    round), so the output does not depend on the worker count. A backend
    failure stops the run and returns the rows gathered so far with
    ``failed=True``.
    """
    try:
        model_id = str(model.model_id)
        anchor_text, q = generate_with_probs(model, anchor_prompt(cfg.context.prompt), DecodeConfig.greedy(), cfg.max_tokens)
    except BackendError as exc:
        return BenchResult([], [], "", {}, failed=True, error=f"anchor generation: {exc}")

    trace: list[TraceRow] = []
    finals: dict[str, list[str]] = {}
    final_comp: dict[str, list[float]] = defaultdict(list)
    errors: list[str] = []
    with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
        for name, decode in cfg.trajectories:
            outcomes = list(
                pool.map(
                    lambda i: _run_agent(model, cfg, name, decode, i, q, anchor_text, model_id),
                    range(1, cfg.agents + 1),
                )
            )
            for o in outcomes:
                trace.extend(o.rows)
                if o.error:
                    errors.append(o.error)
                else:
                    final_comp[name].append(o.rows[-1].compliance)
            if errors:
                break
            finals[name] = [o.final for o in outcomes]

    if errors:
        log.error("benchmark failed: %s", errors[0])
        return BenchResult(trace, [], anchor_text, finals, failed=True, error="; ".join(errors))
    return BenchResult(trace, summarize(finals, final_comp, anchor_text, cfg.trajectories), anchor_text, finals)


# -- artifacts -------------------------------------------------------------------------


def fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def _write_csv(path: Path | None, header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def trace_rows(rows: Sequence[TraceRow]):
    for r in rows:
        t = astuple(r)
        yield (*t[:-1], f"{r.hash64:016x}")


def write_trace(rows: Sequence[TraceRow], path: Path | None = None) -> str:
    return _write_csv(path, TRACE_COLUMNS, trace_rows(rows))


def write_summary(rows: Sequence[SummaryRow], path: Path | None = None) -> str:
    return _write_csv(path, SUMMARY_COLUMNS, (astuple(r) for r in rows))


def read_trace(path: Path) -> list[TraceRow]:
    types = {f.name: f.type for f in fields(TraceRow)}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise InputError(f"{path}: expected columns {TRACE_COLUMNS}, got {reader.fieldnames}")
        for rec in reader:
            kw = {}
            for k, v in rec.items():
                if k == "hash64":
                    kw[k] = int(v, 16)
                elif types[k] == "int":
                    kw[k] = int(v)
                elif types[k] == "float":
                    kw[k] = float(v)
                else:
                    kw[k] = v
            out.append(TraceRow(**kw))
    return out


def plot_series(rows: Sequence[TraceRow]) -> dict[str, dict[str, list[tuple[int, float]]]]:
    """Per trajectory, mean entropy and mean compliance by round (means over agents)."""
    if not rows:
        raise InputError("trace is empty")
    acc: dict[str, dict[int, list[TraceRow]]] = defaultdict(lambda: defaultdict(list))
    order: list[str] = []
    for r in rows:
        if r.trajectory not in acc:
            order.append(r.trajectory)
        acc[r.trajectory][r.round].append(r)
    out = {}
    for name in order:
        by_round = acc[name]
        rounds = sorted(by_round)
        out[name] = {
            "entropy": [(k, sum(x.entropy for x in by_round[k]) / len(by_round[k])) for k in rounds],
            "compliance": [(k, sum(x.compliance for x in by_round[k]) / len(by_round[k])) for k in rounds],
        }
    return out


def write_plot_series(rows: Sequence[TraceRow], out_dir: Path) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, series in plot_series(rows).items():
        for metric, pts in series.items():
            path = out_dir / f"series_{name}_{metric}.csv"
            _write_csv(path, ("round", f"mean_{metric}"), pts)
            paths.append(path)
    return paths
