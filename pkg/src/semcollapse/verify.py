"""Bundled verification suite.

Each check measures one quantity, compares it with a tolerance and records the
outcome. Exceptions inside a check become failed entries, so a run always
produces a full report.
"""

from __future__ import annotations

import csv
import io
import math
import time
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import alignment as al
from .bench import metrics as bm
from .bench.context import compliance_score
from .bench.decoding import top_p_sample
from .bench.runner import BenchConfig, plot_series, run_benchmark, write_summary, write_trace
from .bench.toy import ToyModel
from .entropy import Ensemble, discrete_entropy, ensemble_conditional_entropy, gaussian_differential_entropy
from .errors import InputError
from .experiments import entropy_collapse, mutual_information_series, start_radius, trajectory_irrelevance
from .manifold import Euclidean, Manifold, PoincareBall, Sphere
from .rng import stream

SUITES = ("manifold", "alignment", "entropy", "bench")
REPORT_COLUMNS = ("suite", "check", "status", "measured", "tolerance", "detail")


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    passed: bool
    measured: float
    tolerance: float
    detail: str = ""

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"


def _le(suite, name, measured, tol, detail="") -> CheckResult:
    measured = float(measured)
    return CheckResult(suite, name, bool(measured <= tol), measured, tol, detail)


def _manifolds() -> list[Manifold]:
    return [Euclidean(3), Sphere(3), PoincareBall(3)]


def _pairs(M: Manifold, n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    g = stream(seed, "verify-pairs", M.name)
    if isinstance(M, Sphere):
        x = M.random_point(g, n)
        return x, _sphere_partners(M, x, g)
    if isinstance(M, PoincareBall):
        return M.random_point(g, n, max_norm=0.999), M.random_point(g, n, max_norm=0.999)
    return M.random_point(g, n), M.random_point(g, n)


def _sphere_partners(M: Sphere, x: np.ndarray, g: np.random.Generator) -> np.ndarray:
    # keep pairs away from antipodes, where log is undefined
    y = M.random_point(g, len(x))
    flip = np.sum(x * y, axis=-1) < -0.99
    y[flip] = -y[flip]
    return y


# -- manifold ---------------------------------------------------------------------------------


def _manifold_checks(seed: int):
    for M in _manifolds():
        x, y = _pairs(M, 1000, seed)
        tol = 1e-7 if isinstance(M, PoincareBall) else 1e-9
        yield f"roundtrip_{M.name}", lambda M=M, x=x, y=y, tol=tol: _le(
            "manifold", f"roundtrip_{M.name}", np.max(M.dist(M.exp(x, M.log(x, y)), y)), tol
        )
        yield f"symmetry_{M.name}", lambda M=M, x=x, y=y: _le(
            "manifold", f"symmetry_{M.name}", np.max(np.abs(M.dist(x, y) - M.dist(y, x))), 1e-12
        )

        def speed(M=M, x=x, seed=seed):
            g = stream(seed, "verify-speed", M.name)
            v = M.sample_tangent_gaussian(x, 1.0, g)
            n = M.norm(x, v)
            cap = 3.0 if isinstance(M, Sphere) else 4.0
            v = v * np.minimum(1.0, cap / np.maximum(n, 1e-300))[..., None]
            err = np.abs(M.dist(x, M.exp(x, v)) - M.norm(x, v))
            return _le("manifold", f"speed_{M.name}", np.max(err), 1e-9)

        def triangle(M=M, seed=seed):
            g = stream(seed, "verify-triangle", M.name)
            a, b, c = (M.random_point(g, 1000) for _ in range(3))
            gap = M.dist(a, b) + M.dist(b, c) - M.dist(a, c)
            return _le("manifold", f"triangle_{M.name}", max(0.0, -np.min(gap)), 1e-9, "largest violation")

        yield f"speed_{M.name}", speed
        yield f"triangle_{M.name}", triangle

    def examples():
        B = PoincareBall(2)
        errs = [
            abs(B.dist(np.zeros(2), np.array([0.5, 0.0])) - math.log(3)),
            float(np.max(np.abs(Sphere(2).exp(np.array([1.0, 0.0]), np.array([0.0, math.pi / 2])) - [0.0, 1.0]))),
            float(np.max(np.abs(Euclidean(2).exp(np.array([1.0, 1.0]), np.array([2.0, 3.0])) - [3.0, 4.0]))),
        ]
        return _le("manifold", "worked_examples", max(errs), 1e-12)

    def sampler():
        E = Euclidean(2)
        z = E.sample_tangent_gaussian(np.zeros((100_000, 2)), 1.0, stream(seed, "verify-sampler"))
        err = max(np.max(np.abs(z.mean(axis=0))) / 0.02, np.max(np.abs(z.var(axis=0) - 1)) / 0.05)
        return _le("manifold", "sampler_moments", err, 1.0, "max of |mean|/0.02 and |var-1|/0.05")

    yield "worked_examples", examples
    yield "sampler_moments", sampler


# -- alignment -------------------------------------------------------------------------------


def _gradient_check(M: Manifold, seed: int) -> CheckResult:
    g = stream(seed, "verify-grad", M.name)
    worst = 0.0
    for _ in range(5):
        if isinstance(M, Sphere):
            a = M.random_point(g)
            x = M.random_ball(a, 1.2, g)
        else:
            a, x = M.random_point(g), M.random_point(g)
        anchor = al.Anchor(M, a)
        grad = al.riemannian_gradient(anchor, x)
        u = M.sample_tangent_gaussian(x, 1.0, g)
        u = u / M.norm(x, u)
        h = 1e-5
        fd = (M.dist(a, M.exp(x, h * u)) ** 2 - M.dist(a, M.exp(x, -h * u)) ** 2) / (2 * h)
        exact = M.inner(x, grad, u)
        worst = max(worst, abs(fd - exact) / max(abs(exact), 1e-12))
    return _le("alignment", f"gradient_check_{M.name}", worst, 1e-5, "relative error vs finite differences")


def _alignment_checks(seed: int):
    for M in _manifolds():
        yield f"gradient_check_{M.name}", lambda M=M: _gradient_check(M, seed)

    E = Euclidean(2)
    anchor = al.Anchor(E, np.zeros(2))

    def flow_closed_form():
        run = al.run_alignment(anchor, [1.0, 0.0], al.SmoothFlow(1e-3), tol=1e-300, max_steps=2000)
        errs = [abs(run.records[k].distance - math.exp(-2 * k * 1e-3)) for k in (500, 1000, 2000)]
        return _le("alignment", "flow_closed_form", max(errs), 1e-6, "t in {0.5, 1, 2}")

    def flow_rate():
        run = al.run_alignment(anchor, [1.0, 0.0], al.SmoothFlow(1e-3), tol=1e-300, max_steps=2000)
        rate = al.convergence_report(run).fitted_rate
        return _le("alignment", "flow_fitted_rate", abs(rate - 2.0) / 2.0, 0.01, f"rate={rate:.6g}")

    def rate_bound():
        run = al.run_alignment(anchor, [1.0, 0.0], al.SmoothFlow(1e-3), tol=1e-300, max_steps=2000)
        excess = max(r.distance - math.exp(-2 * r.time) for r in run.records)
        return _le("alignment", "flow_rate_bound", excess, 1e-6)

    def contraction():
        worst = 0.0
        for alpha in (0.1, 0.25, 0.4):
            run = al.run_alignment(anchor, [0.6, 0.8], al.DeterministicDescent(), al.Constant(alpha), tol=1e-300, max_steps=50)
            worst = max(worst, max(abs(r.distance - (1 - 2 * alpha) ** r.step) for r in run.records))
        return _le("alignment", "deterministic_contraction", worst, 1e-10, "alpha in {0.1, 0.25, 0.4}, k <= 50")

    def lyapunov():
        bad = 0
        for M in _manifolds():
            g = stream(seed, "verify-lyap", M.name)
            a = M.random_point(g)
            x0 = M.random_ball(a, start_radius(M), g)
            anc = al.Anchor(M, a)
            for kind in (al.DeterministicDescent(), al.SmoothFlow(1e-2)):
                run = al.run_alignment(anc, x0, kind, al.Constant(0.1), max_steps=300)
                bad += 0 if al.convergence_report(run).monotone else 1
        return _le("alignment", "lyapunov_monotone", bad, 0, "non-monotone runs")

    def irrelevance(M):
        start = time.perf_counter()
        finals = trajectory_irrelevance(M, seed=seed)
        worst = max(float(np.max(v)) for v in finals.values())
        return _le("alignment", f"trajectory_irrelevance_{M.name}", worst, 1e-2,
                   f"32 agents x 10 seeds, {time.perf_counter() - start:.1f}s")  # fmt: skip

    yield "flow_closed_form", flow_closed_form
    yield "flow_fitted_rate", flow_rate
    yield "flow_rate_bound", rate_bound
    yield "deterministic_contraction", contraction
    yield "lyapunov_monotone", lyapunov
    for M in (Euclidean(2), Sphere(3), PoincareBall(2)):
        yield f"trajectory_irrelevance_{M.name}", lambda M=M: irrelevance(M)


# -- entropy ----------------------------------------------------------------------------------


def _entropy_checks(seed: int):
    def gaussian_plugin():
        E = Euclidean(1)
        s = stream(seed, "verify-gauss").normal(0.0, 0.1, size=(100_000, 1))
        est = ensemble_conditional_entropy(Ensemble(E, np.zeros(1), s), "gaussian")
        return _le("entropy", "gaussian_plugin", abs(est.value - gaussian_differential_entropy(0.01)), 0.05)

    def max_entropy():
        g = stream(seed, "verify-maxent")
        worst = 0.0
        for k in range(2, 50):
            p = g.dirichlet(np.ones(k))
            worst = max(worst, discrete_entropy(p) - math.log(k))
        worst = max(worst, abs(discrete_entropy(np.full(8, 1 / 8)) - math.log(8)))
        return _le("entropy", "entropy_upper_bound", worst, 1e-9)

    def collapse(M):
        series = [p.conditional.value for p in entropy_collapse(M, seed=seed)]
        rise = max(b - a for a, b in zip(series, series[1:]))
        ratio = series[-1] / series[0]
        return CheckResult(
            "entropy", f"entropy_collapse_{M.name}", bool(rise <= 0.05 and ratio <= 0.1), ratio, 0.1,
            "final/initial; series " + ", ".join(f"{v:.4g}" for v in series) + f"; max rise {rise:.3g} (slack 0.05)",
        )  # fmt: skip

    def mi():
        vals = [p.mutual_information for p in mutual_information_series(seed=seed)]
        drop = max(a - b for a, b in zip(vals, vals[1:]))
        return _le("entropy", "mutual_information_nondecreasing", drop, 0.05,
                   "series " + ", ".join(f"{v:.4g}" for v in vals))  # fmt: skip

    yield "gaussian_plugin", gaussian_plugin
    yield "entropy_upper_bound", max_entropy
    for M in (Euclidean(2), Sphere(3), PoincareBall(2)):
        yield f"entropy_collapse_{M.name}", lambda M=M: collapse(M)
    yield "mutual_information_nondecreasing", mi


# -- bench ------------------------------------------------------------------------------------

COMPLIANCE_CORPUS = (
    ("Therefore, the model converges. Therefore, alignment holds.", 1.0),
    ("We think so. It works. Done.", 0.25),
    ("", 0.5),
)


def _bench_checks(seed: int):
    def identities():
        p = np.array([0.2, 0.3, 0.5])
        errs = [
            bm.fisher_rao(p, p),
            bm.kl_divergence(p, p),
            abs(bm.fisher_rao([1.0, 0.0], [0.0, 1.0]) - math.pi),
            abs(bm.kl_divergence([1.0, 0.0], [0.5, 0.5]) - math.log(2)),
            abs(bm.fisher_rao([1.0, 0.0], [0.5, 0.5]) - math.pi / 2),
        ]
        return _le("bench", "metric_identities", max(errs), 1e-9)

    def sampler():
        g = stream(seed, "verify-nucleus")
        n = 100_000
        draws = np.array([top_p_sample([0.5, 0.3, 0.2], 0.7, 0, g) for _ in range(n)])
        counts = np.bincount(draws, minlength=3)
        target = np.array([0.625, 0.375])
        z = np.abs(counts[:2] / n - target) / np.sqrt(target * (1 - target) / n)
        score = float(np.max(z)) if counts[2] == 0 else math.inf
        return _le("bench", "nucleus_fidelity", score, 3.0, f"counts {counts.tolist()}")

    def compliance():
        wrong = sum(compliance_score(t) != s for t, s in COMPLIANCE_CORPUS)
        return _le("bench", "compliance_examples", wrong, 0, "mismatches")

    def toy_run():
        start = time.perf_counter()
        res = run_benchmark(BenchConfig(seed=seed), ToyModel())
        elapsed = time.perf_counter() - start
        ok = len(res.trace) == 192 and len(res.summary) == 2 and not res.failed
        coll = max(r.collision_rate for r in res.summary) if res.summary else math.inf
        return CheckResult("bench", "toy_benchmark_structure", ok and coll == 0 and elapsed < 30, coll, 0.0,
                           f"{len(res.trace)} rows, {len(res.summary)} summary rows, {elapsed:.1f}s")  # fmt: skip

    def toy_shape():
        res = run_benchmark(BenchConfig(seed=seed), ToyModel())
        worst = -math.inf
        comp_ok = True
        for series in plot_series(res.trace).values():
            ent = dict(series["entropy"])
            comp = dict(series["compliance"])
            worst = max(worst, max(ent[r] - ent[0] for r in ent if r >= 2))
            comp_ok &= comp[max(comp)] >= comp[0]
        return CheckResult("bench", "toy_collapse_shape", worst < 0 and comp_ok, worst, 0.0,
                           "max(mean entropy at round>=2 minus round 0); final compliance >= initial: " + str(comp_ok))  # fmt: skip

    def determinism():
        outs = []
        for workers in (1, 4):
            res = run_benchmark(BenchConfig(seed=seed, workers=workers), ToyModel())
            outs.append(write_trace(res.trace) + write_summary(res.summary))
        return CheckResult("bench", "determinism", outs[0] == outs[1], float(outs[0] != outs[1]), 0.0, "workers 1 vs 4")

    yield "metric_identities", identities
    yield "nucleus_fidelity", sampler
    yield "compliance_examples", compliance
    yield "toy_benchmark_structure", toy_run
    yield "toy_collapse_shape", toy_shape
    yield "determinism", determinism


_SUITE_CHECKS: dict[str, Callable] = {
    "manifold": _manifold_checks,
    "alignment": _alignment_checks,
    "entropy": _entropy_checks,
    "bench": _bench_checks,
}


def _run_check(suite: str, name: str, check: Callable[[], CheckResult]) -> CheckResult:
    try:
        with np.errstate(all="ignore"):
            return check()
    except Exception as exc:  # a crashing check is a failing check
        last = traceback.extract_tb(exc.__traceback__)[-1]
        detail = f"{type(exc).__name__}: {exc} ({Path(last.filename).name}:{last.lineno})"
        return CheckResult(suite, name, False, math.nan, math.nan, detail)


def run_verify(suites=SUITES, seed: int = 0, fault: str | None = None) -> list[CheckResult]:
    unknown = [s for s in suites if s not in SUITES]
    if unknown:
        raise InputError(f"unknown suite(s) {unknown}; valid: {SUITES}")
    results = []
    for suite in suites:
        for name, check in _SUITE_CHECKS[suite](seed):
            if fault:
                with al.inject_fault(fault):
                    results.append(_run_check(suite, name, check))
            else:
                results.append(_run_check(suite, name, check))
    return results


def report_csv(results: list[CheckResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in results:
        w.writerow((r.suite, r.name, r.status, f"{r.measured:.6g}", f"{r.tolerance:.6g}", r.detail))
    return buf.getvalue()


def report_text(results: list[CheckResult]) -> str:
    lines = [
        f"{r.status}  {r.suite}/{r.name}: measured {r.measured:.6g} vs tolerance {r.tolerance:.6g}"
        + (f"  [{r.detail}]" if r.detail else "")
        for r in results
    ]
    failed = sum(not r.passed for r in results)
    lines.append(f"{len(results) - failed}/{len(results)} checks passed")
    return "\n".join(lines) + "\n"
