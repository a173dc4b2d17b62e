"""Monte Carlo study of the adaptive loop under additive plant uncertainty.

Each run perturbs the damaged state matrix, A' = A_d + Delta, and repeats the
closed-loop scenario. Randomness for run ``i`` comes from
``SeedSequence(seed, spawn_key=(i,))`` feeding a PCG64 generator, so a run's
sample depends only on (seed, i) and never on batching or execution order.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .simulator import run_batch_metrics, settle_time

MODES = ("entrywise", "spectral")


@dataclass(frozen=True)
class UncertaintySpec:
    fraction: float = 0.30
    runs: int = 1000
    seed: int = 20170101
    target: str = "A_d"
    mode: str = "entrywise"

    def __post_init__(self):
        if self.fraction < 0:
            raise ValueError("fraction must be nonnegative")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.target != "A_d":
            raise ValueError("only the damaged state matrix can be perturbed")


def run_rng(seed, run_index):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(run_index,))))


def perturbation(a, spec, run_index):
    a = np.asarray(a, dtype=float)
    rng = run_rng(spec.seed, run_index)
    if spec.mode == "entrywise":
        return rng.uniform(-1.0, 1.0, size=a.shape) * (spec.fraction * np.abs(a))
    g = rng.standard_normal(a.shape)
    radius = rng.uniform(0.0, 1.0) * spec.fraction * np.linalg.norm(a, 2)
    return g * (radius / np.linalg.norm(g, 2))


def sample_uncertain_plant(base, spec, run_index):
    """Copy of ``base`` with its state matrix perturbed for one run."""
    return base.with_a(np.asarray(base.a) + perturbation(base.a, spec, run_index))


@dataclass(frozen=True)
class RunResult:
    index: int
    converged: bool
    diverged: bool
    settle_time: float
    peak_error: float
    peak_aileron: float
    peak_dT: float
    steady_aileron: float
    steady_dT: float


@dataclass
class MonteCarloReport:
    spec: UncertaintySpec
    runs: list
    settle_by: float
    tolerance: float
    t: np.ndarray = field(repr=False)
    error_envelope: np.ndarray = field(repr=False)  # (len(t), 3): min, median, max of |e|_inf, 0.1 s grid

    @property
    def convergence_rate(self):
        return sum(r.converged for r in self.runs) / len(self.runs)

    @property
    def divergence_count(self):
        return sum(r.diverged for r in self.runs)

    def envelope(self, name):
        vals = np.array([getattr(r, name) for r in self.runs], dtype=float)
        return float(np.min(vals)), float(np.max(vals))

    def summary_rows(self):
        rows = [
            ("runs", str(len(self.runs))),
            ("fraction", f"{self.spec.fraction:.6g}"),
            ("mode", self.spec.mode),
            ("seed", str(self.spec.seed)),
            ("convergence_rate", f"{self.convergence_rate:.6f}"),
            ("diverged", str(self.divergence_count)),
        ]
        for name, unit in (("settle_time", "s"), ("peak_error", "rad"),
                           ("peak_aileron", "rad"), ("peak_dT", "lbf"),
                           ("steady_aileron", "rad"), ("steady_dT", "lbf")):
            lo, hi = self.envelope(name)
            rows.append((f"{name}_min [{unit}]", f"{lo:.10g}"))
            rows.append((f"{name}_max [{unit}]", f"{hi:.10g}"))
        return rows

    def summary_text(self):
        rows = self.summary_rows()
        w = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{w}}  {v}" for k, v in rows) + "\n"

    def write_runs_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["run", "converged", "diverged", "settle_time_s", "peak_error_rad",
                        "peak_aileron_rad", "peak_dT_lbf", "steady_aileron_rad", "steady_dT_lbf"])
            for r in self.runs:
                w.writerow([r.index, int(r.converged), int(r.diverged), repr(r.settle_time),
                            repr(r.peak_error), repr(r.peak_aileron), repr(r.peak_dT),
                            repr(r.steady_aileron), repr(r.steady_dT)])


def run_monte_carlo(spec, scenario, design, cfg, factor, base_a=None, engine=None,
                    limiter=None, settle_by=25.0, tolerance=0.01, chunk_size=1000):
    """Independent closed-loop runs on perturbed plants, summarized per run.

    A run counts as converged when it did not diverge and its error norm stays
    within ``tolerance`` of its peak from ``settle_by`` seconds on.
    """
    base_a = np.asarray(design.a_d if base_a is None else base_a, dtype=float)
    n = scenario.n_steps + 1
    t = np.arange(n) * scenario.dt
    stride = max(1, int(round(0.1 / scenario.dt)))
    results = {}
    err_chunks = []
    for start in range(0, spec.runs, chunk_size):
        idx = range(start, min(start + chunk_size, spec.runs))
        a_batch = np.stack([base_a + perturbation(base_a, spec, i) for i in idx])
        rec, diverged_at = run_batch_metrics(scenario, design, cfg, factor, a_batch,
                                             engine=engine, limiter=limiter)
        err = rec.err
        err_chunks.append(err[::stride])
        for j, i in enumerate(idx):
            e = err[:, j]
            diverged = not math.isnan(diverged_at[j])
            st = math.inf if diverged else settle_time(t, e, tolerance)
            results[i] = RunResult(
                index=i,
                converged=(not diverged) and st <= settle_by,
                diverged=diverged,
                settle_time=st,
                peak_error=float(np.nanmax(e)),
                peak_aileron=float(rec.ail_peak[j]),
                peak_dT=float(rec.dT_peak[j]),
                steady_aileron=float(rec.ail_last[j]),
                steady_dT=float(rec.dT_last[j]),
            )
    sampled = np.concatenate(err_chunks, axis=1)
    envelope = np.column_stack([np.nanmin(sampled, axis=1), np.nanmedian(sampled, axis=1),
                                np.nanmax(sampled, axis=1)])
    runs = [results[i] for i in range(spec.runs)]
    return MonteCarloReport(spec, runs, settle_by, tolerance, t[::stride], envelope)
